use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vcbart::data::fmt_num;
use vcbart::summary::CurveMetrics;
use vcbart::{Error, Result};

use crate::config::{exit_code, LeafPriorKind, ModelArgs, ScheduleArgs};
use crate::fit::{fit_to, FitArgs};
use crate::simulate::{simulate_to, DgpArgs};
use crate::summarize::{summarize_to, ScreenKind, SummarizeArgs};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Sparse prior only.
    #[default]
    None,
    /// Constant leaf variance only.
    ConstantShrinkage,
    /// Both fits on every replication, plus a comparison table.
    Both,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Base seed; replication k uses seed + k for its data and chains
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub ablation: Ablation,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, short, default_value = "experiment")]
    pub out: PathBuf,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

const VARIANTS: [(&str, LeafPriorKind); 2] = [("sparse", LeafPriorKind::Horseshoe), ("constant", LeafPriorKind::Constant)];

struct RepOutcome {
    rep: usize,
    /// `(variant, per-ensemble metrics)`
    metrics: Vec<(&'static str, Vec<CurveMetrics>)>,
    error: Option<(i32, String)>,
    seconds: f64,
}

fn one_rep(args: &ExperimentArgs, rep: usize) -> RepOutcome {
    let start = Instant::now();
    let mut metrics = Vec::new();
    let result = (|| -> Result<()> {
        let seed = args.seed.wrapping_add(rep as u64);
        let dir = args.out.join(format!("rep_{rep}"));
        simulate_to(&args.dgp, seed, (500, 100), &dir)?;
        let variants: Vec<_> = match args.ablation {
            Ablation::None => VARIANTS[..1].to_vec(),
            Ablation::ConstantShrinkage => VARIANTS[1..].to_vec(),
            Ablation::Both => VARIANTS.to_vec(),
        };
        let mut runs = Vec::new();
        for (name, kind) in variants {
            let fit = FitArgs {
                train: Some(dir.join("train.csv")),
                grid: Some(dir.join("test.csv")),
                out: dir.join(name),
                seed,
                schedule: args.schedule.clone(),
                model: ModelArgs {
                    leaf_prior: kind,
                    ..args.model.clone()
                },
                config: None,
            };
            let (train, grid) = crate::fit::load_inputs(&fit)?;
            fit_to(&fit, &train, &grid)?;
            let (s, _) = summarize_to(&SummarizeArgs {
                run: Some(fit.out.clone()),
                truth: Some(dir.join("test.csv")),
                compare: None,
                out: None,
                level: args.level,
                screen: ScreenKind::Elbow,
                screen_value: None,
                config: None,
            })?;
            metrics.push((name, s.metrics.expect("truth supplied")));
            runs.push(fit.out);
        }
        if let [a, b] = &runs[..] {
            summarize_to(&SummarizeArgs {
                run: Some(a.clone()),
                truth: Some(dir.join("test.csv")),
                compare: Some(b.clone()),
                out: Some(dir.join("comparison")),
                level: args.level,
                screen: ScreenKind::Elbow,
                screen_value: None,
                config: None,
            })?;
        }
        Ok(())
    })();
    RepOutcome {
        rep,
        metrics,
        error: result.err().map(|e| (exit_code(&e), e.to_string())),
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run(args: ExperimentArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(Error::Config("reps must be >= 1".into()));
    }
    args.schedule.schedule()?;
    args.dgp.spec(args.seed, (500, 100)).validate()?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Config(format!("{}: {e}", args.out.display())))?;

    let start = Instant::now();
    let outcomes: Vec<RepOutcome> = (0..args.reps).into_par_iter().map(|rep| one_rep(&args, rep)).collect();

    let mut w = csv::Writer::from_path(args.out.join("replications.csv"))?;
    w.write_record(["rep", "variant", "j", "mse", "coverage"])?;
    for o in &outcomes {
        for (variant, m) in &o.metrics {
            for (j, m) in m.iter().enumerate() {
                w.write_record([o.rep.to_string(), variant.to_string(), j.to_string(), fmt_num(m.mse), fmt_num(m.coverage)])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(args.out.join("aggregate.csv"))?;
    w.write_record(["variant", "j", "reps", "mean_mse", "mean_coverage"])?;
    for (variant, _) in VARIANTS {
        let ok: Vec<&Vec<CurveMetrics>> = outcomes
            .iter()
            .flat_map(|o| o.metrics.iter().filter(|(v, _)| *v == variant).map(|(_, m)| m))
            .collect();
        let Some(first) = ok.first() else { continue };
        let n = ok.len() as f64;
        for j in 0..first.len() {
            let mse = ok.iter().map(|m| m[j].mse).sum::<f64>() / n;
            let cov = ok.iter().map(|m| m[j].coverage).sum::<f64>() / n;
            w.write_record([variant.to_string(), j.to_string(), ok.len().to_string(), fmt_num(mse), fmt_num(cov)])?;
            println!("{variant} beta_{j}: mean mse {mse:.4}, mean coverage {cov:.3} over {} reps", ok.len());
        }
    }
    w.flush()?;

    let failures: Vec<_> = outcomes.iter().filter_map(|o| o.error.as_ref().map(|e| (o.rep, e))).collect();
    let meta = serde_json::json!({
        "config": args,
        "wall_seconds": start.elapsed().as_secs_f64(),
        "replications": outcomes.iter().map(|o| serde_json::json!({
            "rep": o.rep,
            "seed": args.seed.wrapping_add(o.rep as u64),
            "status": if o.error.is_some() { "failed" } else { "ok" },
            "error": o.error.as_ref().map(|e| &e.1),
            "seconds": o.seconds,
        })).collect::<Vec<_>>(),
    });
    std::fs::write(args.out.join("experiment.json"), serde_json::to_string_pretty(&meta)?)?;
    for (rep, (_, msg)) in &failures {
        eprintln!("replication {rep} failed: {msg}");
    }
    if failures.len() == outcomes.len() {
        let (code, msg) = failures[0].1.clone();
        return Err(match code {
            2 => Error::Config(msg),
            4 => Error::Numerical { sweep: 0, message: msg },
            _ => Error::Data(msg),
        });
    }
    Ok(())
}
