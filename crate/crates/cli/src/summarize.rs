use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vcbart::data::{fmt_num, load_csv, CsvSchema, Dataset};
use vcbart::gibbs::ChainOutput;
use vcbart::summary::{
    coverage_and_mse, lambda_screen, modifier_report, predictive_metrics, summarize, CurveMetrics, ScreenRule,
    SummaryReport,
};
use vcbart::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenKind {
    /// Cut at the largest ratio between sorted medians.
    #[default]
    Elbow,
    /// Keep medians above a fixed value.
    Threshold,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SummarizeArgs {
    /// Run directory written by `fit`
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// CSV with beta_true_* columns on the run's grid (e.g. truth.csv or
    /// test.csv from `simulate`)
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Second run directory for a side-by-side comparison
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Report directory [default: <run>/summary]
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Central interval probability
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, value_enum, default_value_t)]
    pub screen: ScreenKind,
    /// Elbow ratio or threshold [default: 1.5 for elbow, 1 for threshold]
    #[arg(long)]
    pub screen_value: Option<f64>,
    /// JSON file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl SummarizeArgs {
    fn rule(&self) -> ScreenRule {
        match self.screen {
            ScreenKind::Elbow => ScreenRule::Elbow(self.screen_value.unwrap_or(1.5)),
            ScreenKind::Threshold => ScreenRule::Threshold(self.screen_value.unwrap_or(1.0)),
        }
    }
}

/// A fitted run read back from disk.
pub struct Run {
    pub chains: Vec<ChainOutput<f64>>,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    /// `grid[r][g]`
    pub grid: Vec<Vec<f64>>,
}

fn names(meta: &Value, key: &str) -> Vec<String> {
    meta["data"][key]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

pub fn read_run(dir: &Path) -> Result<Run> {
    let meta_path = dir.join("meta.json");
    let text = std::fs::read_to_string(&meta_path)
        .map_err(|e| Error::Data(format!("{}: {e}", meta_path.display())))?;
    let meta: Value = serde_json::from_str(&text)?;
    if meta["status"] != "ok" {
        return Err(Error::Data(format!("{}: run did not finish ({})", dir.display(), meta["status"])));
    }
    let chains = meta["chains"]
        .as_array()
        .ok_or_else(|| Error::Data(format!("{}: no chains listed", meta_path.display())))?
        .iter()
        .map(|c| ChainOutput::read(dir.join(c["dir"].as_str().unwrap_or_default())))
        .collect::<Result<Vec<_>>>()?;
    let (x_names, z_names) = (names(&meta, "x_names"), names(&meta, "z_names"));
    let mut grid = vec![Vec::new(); z_names.len()];
    let mut rd = csv::Reader::from_path(dir.join("grid.csv"))?;
    for (row, rec) in rd.records().enumerate() {
        let rec = rec?;
        for (r, col) in grid.iter_mut().enumerate() {
            let cell = rec.get(r + 1).unwrap_or_default();
            col.push(cell.parse().map_err(|_| Error::Data(format!("grid.csv row {}: bad value {cell:?}", row + 1)))?);
        }
    }
    Ok(Run {
        chains,
        x_names,
        z_names,
        grid,
    })
}

impl Run {
    pub fn ensemble_name(&self, j: usize) -> String {
        if j == 0 {
            "intercept".into()
        } else {
            self.x_names.get(j - 1).cloned().unwrap_or_else(|| format!("x_{j}"))
        }
    }
}

/// Everything computed for one run.
pub struct RunSummary {
    pub report: SummaryReport<f64>,
    pub metrics: Option<Vec<CurveMetrics>>,
    pub selected: Vec<usize>,
}

pub fn load_truth(path: &Path, run: &Run) -> Result<Dataset<f64>> {
    let truth: Dataset<f64> = load_csv(
        path,
        CsvSchema {
            rescale_z: false,
            allow_missing_y: true,
        },
    )?;
    let k = run.x_names.len() + 1;
    let g = run.grid.first().map_or(0, Vec::len);
    match &truth.beta_true {
        Some(b) if b.len() == k && truth.n() == g => Ok(truth),
        Some(b) => Err(Error::Data(format!(
            "truth has {} functions on {} points, run has {k} on {g}",
            b.len(),
            truth.n()
        ))),
        None => Err(Error::Data(format!("{}: no beta_true_* columns", path.display()))),
    }
}

pub fn summarize_run(run: &Run, truth: Option<&Dataset<f64>>, level: f64, rule: ScreenRule) -> Result<RunSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level {level} must lie in (0, 1)")));
    }
    let report = summarize(&run.chains, level)?;
    let metrics = match truth {
        Some(t) => Some(coverage_and_mse(&report, t.beta_true.as_ref().expect("checked on load"))?),
        None => None,
    };
    let selected = lambda_screen(&report.lambda_median[1..], rule);
    Ok(RunSummary {
        report,
        metrics,
        selected,
    })
}

fn write_reports(run: &Run, s: &RunSummary, truth: Option<&Dataset<f64>>, args: &SummarizeArgs, out: &Path) -> Result<()> {
    let report = &s.report;
    let truth_beta = truth.and_then(|t| t.beta_true.as_ref());

    let mut w = csv::Writer::from_path(out.join("summary.csv"))?;
    let mut header = ["j", "name", "g", "mean", "lower", "upper"].map(String::from).to_vec();
    if truth_beta.is_some() {
        header.push("truth".into());
    }
    w.write_record(&header)?;
    for (j, c) in report.beta.iter().enumerate() {
        for g in 0..c.mean.len() {
            let mut row = vec![j.to_string(), run.ensemble_name(j), (g + 1).to_string()];
            row.extend([c.mean[g], c.lower[g], c.upper[g]].map(fmt_num));
            if let Some(b) = truth_beta {
                row.push(fmt_num(b[j][g]));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;

    for (j, c) in report.beta.iter().enumerate() {
        let mut w = csv::Writer::from_path(out.join(format!("plotdata_{j}.csv")))?;
        let mut header = run.z_names.clone();
        header.extend(["mean", "lower", "upper"].map(String::from));
        if truth_beta.is_some() {
            header.push("truth".into());
        }
        w.write_record(&header)?;
        for g in 0..c.mean.len() {
            let mut row: Vec<String> = run.grid.iter().map(|col| fmt_num(col[g])).collect();
            row.extend([c.mean[g], c.lower[g], c.upper[g]].map(fmt_num));
            if let Some(b) = truth_beta {
                row.push(fmt_num(b[j][g]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let modifiers = (0..report.beta.len())
        .map(|j| {
            let rows = modifier_report(&run.chains, j)?;
            Ok(serde_json::json!({
                "j": j,
                "name": run.ensemble_name(j),
                "modifiers": rows.iter().map(|m| serde_json::json!({
                    "modifier": run.z_names.get(m.modifier),
                    "mass": m.mass,
                    "cumulative": m.cumulative,
                    "flagged": m.flagged,
                })).collect::<Vec<_>>(),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let selection = serde_json::json!({
        "rule": args.rule(),
        "lambda_median": report.lambda_median.iter().enumerate().map(|(j, m)| serde_json::json!({
            "j": j, "name": run.ensemble_name(j), "median": m,
        })).collect::<Vec<_>>(),
        "selected": s.selected.iter().map(|&i| run.ensemble_name(i + 1)).collect::<Vec<_>>(),
        "sigma2_mean": report.sigma2_mean,
        "draws": report.draws,
        "level": report.level,
        "modifier_mass": modifiers,
    });
    std::fs::write(out.join("selection.json"), serde_json::to_string_pretty(&selection)?)?;

    if let Some(metrics) = &s.metrics {
        let mut w = csv::Writer::from_path(out.join("metrics.csv"))?;
        w.write_record(["j", "name", "mse", "coverage"])?;
        for (j, m) in metrics.iter().enumerate() {
            w.write_record([j.to_string(), run.ensemble_name(j), fmt_num(m.mse), fmt_num(m.coverage)])?;
        }
        let n = metrics.len() as f64;
        let avg = |f: fn(&CurveMetrics) -> f64| metrics.iter().map(f).sum::<f64>() / n;
        w.write_record([
            "all".into(),
            "average".into(),
            fmt_num(avg(|m| m.mse)),
            fmt_num(avg(|m| m.coverage)),
        ])?;
        w.flush()?;
    }

    // out-of-sample prediction when the truth file carries the test rows
    if let Some(t) = truth {
        if t.p() == run.x_names.len() && t.y.iter().any(|&v| v != 0.0) {
            let m = predictive_metrics(&run.chains, &t.x, &t.y, args.level)?;
            let mut w = csv::Writer::from_path(out.join("predictive.csv"))?;
            w.write_record(["rmse", "coverage"])?;
            w.write_record([fmt_num(m.rmse), fmt_num(m.coverage)])?;
            w.flush()?;
        }
    }
    Ok(())
}

fn write_comparison(a: (&Run, &RunSummary), b: (&Run, &RunSummary), out: &Path) -> Result<()> {
    let (ra, sa) = a;
    let (rb, sb) = b;
    if sa.report.beta.len() != sb.report.beta.len() || ra.grid != rb.grid {
        return Err(Error::Data("runs differ in covariates or grid".into()));
    }
    let mut w = csv::Writer::from_path(out.join("comparison.csv"))?;
    let with_truth = sa.metrics.is_some() && sb.metrics.is_some();
    let mut header = ["j", "name", "lambda_median_a", "lambda_median_b", "selected_a", "selected_b"]
        .map(String::from)
        .to_vec();
    if with_truth {
        header.extend(["mse_a", "mse_b", "coverage_a", "coverage_b"].map(String::from));
    }
    w.write_record(&header)?;
    let picked = |s: &RunSummary, j: usize| (j > 0 && s.selected.contains(&(j - 1))).to_string();
    for j in 0..sa.report.beta.len() {
        let mut row = vec![
            j.to_string(),
            ra.ensemble_name(j),
            fmt_num(sa.report.lambda_median[j]),
            fmt_num(sb.report.lambda_median[j]),
            picked(sa, j),
            picked(sb, j),
        ];
        if let (Some(ma), Some(mb)) = (&sa.metrics, &sb.metrics) {
            row.extend([ma[j].mse, mb[j].mse, ma[j].coverage, mb[j].coverage].map(fmt_num));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Summarize `args.run` (and `args.compare`) into the report directory.
pub fn summarize_to(args: &SummarizeArgs) -> Result<(RunSummary, PathBuf)> {
    let dir = args.run.as_ref().ok_or_else(|| Error::Config("--run is required".into()))?;
    let out = args.out.clone().unwrap_or_else(|| dir.join("summary"));
    let run = read_run(dir)?;
    let truth = args.truth.as_deref().map(|p| load_truth(p, &run)).transpose()?;
    let s = summarize_run(&run, truth.as_ref(), args.level, args.rule())?;
    std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
    write_reports(&run, &s, truth.as_ref(), args, &out)?;
    if let Some(other) = &args.compare {
        let run_b = read_run(other)?;
        let sb = summarize_run(&run_b, truth.as_ref(), args.level, args.rule())?;
        write_comparison((&run, &s), (&run_b, &sb), &out)?;
    }
    Ok((s, out))
}

pub fn run(args: SummarizeArgs) -> Result<()> {
    let (s, out) = summarize_to(&args)?;
    if let Some(m) = &s.metrics {
        for (j, m) in m.iter().enumerate() {
            println!("beta_{j}: mse {:.4}, coverage {:.3}", m.mse, m.coverage);
        }
    }
    println!("selected covariates (1-based): {:?}", s.selected.iter().map(|i| i + 1).collect::<Vec<_>>());
    eprintln!("wrote {}", out.display());
    Ok(())
}
