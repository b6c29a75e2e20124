use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use vcbart::data::{augment_noise_covariates, fmt_num, generate, Beta0Form, Dataset, DgpSpec, Experiment};
use vcbart::sampling::RngStream;
use vcbart::{Error, Result};

use crate::config::DATA_STREAM;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Three covariates, all active.
    #[default]
    Exp1,
    /// Fifty covariates, three active.
    Exp2,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beta0Kind {
    #[default]
    Repaired,
    Raw,
}

/// Data-generating settings shared by `simulate` and `experiment`.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct DgpArgs {
    #[arg(long, value_enum, default_value_t)]
    pub experiment: ExperimentKind,
    /// Training rows [default: 1000, 500 for `experiment`]
    #[arg(long)]
    pub n_train: Option<usize>,
    /// Test rows [default: 200, 100 for `experiment`]
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Covariates [default: 3 for exp1, 50 for exp2]
    #[arg(long)]
    pub p: Option<usize>,
    /// Effect modifiers [default: 20]
    #[arg(long)]
    pub r: Option<usize>,
    /// AR(1) correlation of the covariates
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Form of the intercept function
    #[arg(long, value_enum, default_value_t)]
    pub beta0: Beta0Kind,
    /// Append this many pure-noise covariates to both splits
    #[arg(long, default_value_t = 0)]
    pub noise_covariates: usize,
}

impl DgpArgs {
    pub fn spec(&self, seed: u64, default_rows: (usize, usize)) -> DgpSpec {
        let base = DgpSpec::for_experiment(match self.experiment {
            ExperimentKind::Exp1 => Experiment::Exp1,
            ExperimentKind::Exp2 => Experiment::Exp2,
        });
        DgpSpec {
            n_train: self.n_train.unwrap_or(default_rows.0),
            n_test: self.n_test.unwrap_or(default_rows.1),
            p: self.p.unwrap_or(base.p),
            r: self.r.unwrap_or(base.r),
            rho: self.rho.unwrap_or(base.rho),
            noise_sd: self.noise_sd.unwrap_or(base.noise_sd),
            seed,
            beta0: match self.beta0 {
                Beta0Kind::Repaired => Beta0Form::Repaired,
                Beta0Kind::Raw => Beta0Form::Raw,
            },
            ..base
        }
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, short, default_value = "data")]
    pub out: PathBuf,
    /// JSON file whose keys override the flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// The simulated pair, written as `train.csv`, `test.csv`, `truth.csv`
/// (test rows without the response, with the true coefficients) and
/// `dgp.json`.
pub fn simulate_to(dgp: &DgpArgs, seed: u64, default_rows: (usize, usize), out: &Path) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let spec = dgp.spec(seed, default_rows);
    spec.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::Config(format!("{}: {e}", out.display())))?;
    let mut rng = RngStream::new(seed, DATA_STREAM);
    let (mut train, mut test) = generate::<f64, _>(&spec, &mut rng)?;
    if dgp.noise_covariates > 0 {
        train = augment_noise_covariates(&train, dgp.noise_covariates, &mut rng);
        test = augment_noise_covariates(&test, dgp.noise_covariates, &mut rng);
    }
    train.write_csv(out.join("train.csv"))?;
    test.write_csv(out.join("test.csv"))?;
    write_truth(&test, &out.join("truth.csv"))?;
    let echo = serde_json::json!({
        "spec": spec,
        "noise_covariates": dgp.noise_covariates,
        "data_stream": DATA_STREAM,
    });
    std::fs::write(out.join("dgp.json"), serde_json::to_string_pretty(&echo)?)?;
    Ok((train, test))
}

fn write_truth(data: &Dataset<f64>, path: &Path) -> Result<()> {
    let beta = data.beta_true.as_ref().ok_or_else(|| Error::Data("no true coefficients".into()))?;
    let mut w = csv::Writer::from_path(path)?;
    let mut header = data.x_names.clone();
    header.extend(data.z_names.iter().cloned());
    header.extend((0..beta.len()).map(|j| format!("beta_true_{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let row: Vec<String> = data.x.iter().chain(&data.z).chain(beta).map(|c| fmt_num(c[i])).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run(args: SimulateArgs) -> Result<()> {
    let (train, test) = simulate_to(&args.dgp, args.seed, (1000, 200), &args.out)?;
    eprintln!(
        "wrote {} training and {} test rows (p = {}, R = {}) to {}",
        train.n(),
        test.n(),
        train.p(),
        train.r(),
        args.out.display()
    );
    Ok(())
}
