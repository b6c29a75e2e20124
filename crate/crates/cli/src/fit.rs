use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use vcbart::data::{fmt_num, load_csv, CsvSchema, Dataset};
use vcbart::gibbs::{run_chains, ChainOutput, Model};
use vcbart::{Error, Result};

use crate::config::{ModelArgs, ScheduleArgs};

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct FitArgs {
    /// Training CSV with columns y, x_*, z_*
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// CSV of query points (z_* columns) for the coefficient curves
    /// [default: the training modifiers]
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Run directory
    #[arg(long, short, default_value = "run")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON file whose keys override the flags; a run's meta.json re-runs
    /// that job
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Load the training data and the grid, applying the training rescaling to
/// the grid.
pub fn load_inputs(args: &FitArgs) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let path = args
        .train
        .as_ref()
        .ok_or_else(|| Error::Config("--train is required".into()))?;
    let train: Dataset<f64> = load_csv(
        path,
        CsvSchema {
            rescale_z: args.model.rescale_z,
            allow_missing_y: false,
        },
    )?;
    let grid = match &args.grid {
        None => train.clone(),
        Some(g) => {
            let mut grid: Dataset<f64> = load_csv(
                g,
                CsvSchema {
                    rescale_z: false,
                    allow_missing_y: true,
                },
            )?;
            if grid.z_names != train.z_names {
                return Err(Error::Data(format!(
                    "grid modifiers {:?} differ from training modifiers {:?}",
                    grid.z_names, train.z_names
                )));
            }
            if let Some(scaling) = &train.z_scaling {
                for (col, &(lo, hi)) in grid.z.iter_mut().zip(scaling) {
                    for v in col.iter_mut() {
                        *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
                    }
                }
            }
            grid
        }
    };
    Ok((train, grid))
}

fn write_grid(grid: &Dataset<f64>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["g".to_string()];
    header.extend(grid.z_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..grid.n() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(grid.z.iter().map(|c| fmt_num(c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Fit `train`, evaluate the curves on `grid` and write the run directory.
pub fn fit_to(args: &FitArgs, train: &Dataset<f64>, grid: &Dataset<f64>) -> Result<Vec<ChainOutput<f64>>> {
    let schedule = args.schedule.schedule()?;
    let (hyper, options) = args.model.build(train)?;
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
    let config = serde_json::to_value(args)?;
    let mut meta = serde_json::json!({
        "config": config,
        "status": "running",
        "data": {
            "n": train.n(),
            "p": train.p(),
            "r": train.r(),
            "x_names": train.x_names,
            "z_names": train.z_names,
            "z_scaling": train.z_scaling,
            "grid_points": grid.n(),
        },
        "hyperparameters": hyper,
        "sampler": options,
        "seed": args.seed,
    });
    write_grid(grid, &out.join("grid.csv"))?;

    let model = Model::new(train, hyper, options)?;
    let start = Instant::now();
    let result = run_chains(&model, &grid.z, &schedule, args.seed);
    let wall = start.elapsed().as_secs_f64();
    meta["wall_seconds"] = wall.into();
    let chains = match result {
        Ok(c) => c,
        Err(e) => {
            meta["status"] = "aborted".into();
            meta["error"] = e.to_string().into();
            std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
            return Err(e);
        }
    };
    for c in &chains {
        c.write(out.join(format!("chain_{}", c.chain)), &config)?;
    }
    meta["status"] = "ok".into();
    meta["chains"] = chains
        .iter()
        .map(|c| {
            serde_json::json!({
                "chain": c.chain,
                "dir": format!("chain_{}", c.chain),
                "draws": c.num_draws(),
                "tree_acceptance": c.diagnostics.tree_acceptance(),
                "eta_acceptance": c.diagnostics.eta_acceptance(),
                "seconds": c.seconds,
            })
        })
        .collect();
    std::fs::write(out.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
    Ok(chains)
}

pub fn run(args: FitArgs) -> Result<()> {
    let (train, grid) = load_inputs(&args)?;
    let chains = fit_to(&args, &train, &grid)?;
    for c in &chains {
        eprintln!(
            "chain {}: {} draws, tree acceptance {:.3}, {:.1}s",
            c.chain,
            c.num_draws(),
            c.diagnostics.tree_acceptance(),
            c.seconds
        );
    }
    eprintln!("wrote {}", args.out.display());
    Ok(())
}
