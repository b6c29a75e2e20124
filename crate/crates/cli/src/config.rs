//! Flag structs shared by the subcommands and the JSON override layer.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vcbart::data::Dataset;
use vcbart::gibbs::{C2Update, LeafPrior, SamplerOptions, Schedule};
use vcbart::prior::{sample_sd, Hyperparameters, TreePriorConfig};
use vcbart::tree::CutpointMode;
use vcbart::{Error, Result};

/// Stream index reserved for data simulation, so a data set and the chains
/// fitted to it can share a seed.
pub const DATA_STREAM: u64 = 1 << 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafPriorKind {
    /// Regularized horseshoe on every ensemble.
    #[default]
    Horseshoe,
    /// Fixed N(0, v) jumps with no shrinkage updates.
    Constant,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C2Kind {
    #[default]
    Exact,
    Conjugate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cutpoints {
    #[default]
    Uniform,
    Midpoints,
}

/// Prior and kernel settings. Unset values fall back to the defaults
/// calibrated from the training response.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Trees per ensemble [default: 50]
    #[arg(long)]
    pub trees: Option<usize>,
    /// Noise prior degrees of freedom [default: 3]
    #[arg(long)]
    pub nu: Option<f64>,
    /// Noise prior scale [default: calibrated from y]
    #[arg(long)]
    pub noise_scale: Option<f64>,
    /// Slab prior degrees of freedom [default: 4]
    #[arg(long)]
    pub nu_c: Option<f64>,
    /// Slab prior scale [default: 2]
    #[arg(long)]
    pub s_c: Option<f64>,
    /// Half-Cauchy scale of the global shrinkage [default: calibrated]
    #[arg(long)]
    pub tau0: Option<f64>,
    /// Split probability at depth d is base (1 + d)^-2 [default: 0.95]
    #[arg(long)]
    pub split_base: Option<f64>,
    /// Nodes at this depth never split
    #[arg(long)]
    pub max_depth: Option<u32>,
    #[arg(long, value_enum, default_value_t)]
    pub leaf_prior: LeafPriorKind,
    /// Leaf variance of the constant prior [default: sd(y)^2 / (4 trees)]
    #[arg(long)]
    pub constant_variance: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub c2_update: C2Kind,
    #[arg(long, value_enum, default_value_t)]
    pub cutpoints: Cutpoints,
    /// Hold the noise variance fixed at this value
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Random-walk step for the concentration update [default: 1]
    #[arg(long)]
    pub eta_step: Option<f64>,
    /// Min-max rescale the modifiers of the training data to [0, 1]
    #[arg(long)]
    pub rescale_z: bool,
}

impl ModelArgs {
    pub fn build(&self, train: &Dataset<f64>) -> Result<(Hyperparameters<f64>, SamplerOptions<f64>)> {
        let mut hyper = Hyperparameters::calibrated(&train.y, train.p())?;
        if let Some(v) = self.trees {
            hyper.trees = v;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut hyper.nu, self.nu);
        set(&mut hyper.noise_scale, self.noise_scale);
        set(&mut hyper.nu_c, self.nu_c);
        set(&mut hyper.s_c, self.s_c);
        set(&mut hyper.tau0, self.tau0);
        if let Some(base) = self.split_base {
            hyper.tree_prior = TreePriorConfig::quadratic(base);
        }
        hyper.tree_prior.max_depth = self.max_depth;
        hyper.validate()?;

        let mut options = SamplerOptions::<f64> {
            c2_update: match self.c2_update {
                C2Kind::Exact => C2Update::Exact,
                C2Kind::Conjugate => C2Update::Conjugate,
            },
            cutpoints: match self.cutpoints {
                Cutpoints::Uniform => CutpointMode::Uniform,
                Cutpoints::Midpoints => CutpointMode::Midpoints,
            },
            fixed_sigma2: self.sigma2,
            ..Default::default()
        };
        if self.leaf_prior == LeafPriorKind::Constant {
            let v = match self.constant_variance {
                Some(v) => v,
                None => {
                    let sd = sample_sd(&train.y);
                    sd * sd / (4.0 * hyper.trees as f64)
                }
            };
            options.leaf_prior = LeafPrior::Fixed(v);
        }
        if let Some(step) = self.eta_step {
            options.eta_step = step;
        }
        options.validate()?;
        Ok((hyper, options))
    }
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleArgs {
    /// Independent chains, run in parallel
    #[arg(long, default_value_t = 4)]
    pub chains: usize,
    /// Sweeps per chain, burn-in included
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 400)]
    pub burn: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
}

impl Default for ScheduleArgs {
    fn default() -> Self {
        let s = Schedule::default();
        Self {
            chains: s.chains,
            iters: s.iters,
            burn: s.burn,
            thin: s.thin,
        }
    }
}

impl ScheduleArgs {
    pub fn schedule(&self) -> Result<Schedule> {
        let s = Schedule {
            chains: self.chains,
            iters: self.iters,
            burn: self.burn,
            thin: self.thin,
        };
        s.validate()?;
        Ok(s)
    }
}

fn merge(base: &mut Value, over: Value, path: &str) -> Result<()> {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v, &here)?,
                    Some(slot) => *slot = v,
                    None => return Err(Error::Config(format!("unknown config key {here:?}"))),
                }
            }
            Ok(())
        }
        _ => Err(Error::Config("config file must hold a JSON object".into())),
    }
}

/// Overlay the JSON object in `path` on the parsed flags. A run's
/// `meta.json` is accepted too: its `config` entry is used.
pub fn apply_config<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(args);
    };
    let bad = |e: &dyn std::fmt::Display| Error::Config(format!("{}: {e}", path.display()));
    let text = std::fs::read_to_string(path).map_err(|e| bad(&e))?;
    let mut file: Value = serde_json::from_str(&text).map_err(|e| bad(&e))?;
    if let Some(inner) = file.get_mut("config").filter(|v| v.is_object()) {
        file = inner.take();
    }
    let mut base = serde_json::to_value(&args)?;
    merge(&mut base, file, "")?;
    serde_json::from_value(base).map_err(|e| bad(&e))
}

/// Exit status for an error: 2 configuration, 3 data, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::Input(_) | Error::Data(_) | Error::Calibration(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => 3,
        Error::Domain(_) | Error::State(_) | Error::Kernel(_) | Error::Numerical { .. } => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overrides_and_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"chains": 2, "burn": 10}"#).unwrap();
        let s = apply_config(ScheduleArgs::default(), Some(&path)).unwrap();
        assert_eq!((s.chains, s.iters, s.burn), (2, 2000, 10));

        std::fs::write(&path, r#"{"chain": 2}"#).unwrap();
        let err = apply_config(ScheduleArgs::default(), Some(&path)).unwrap_err();
        assert_eq!(exit_code(&err), 2);

        std::fs::write(&path, r#"{"config": {"thin": 3}, "status": "ok"}"#).unwrap();
        assert_eq!(apply_config(ScheduleArgs::default(), Some(&path)).unwrap().thin, 3);
    }

    #[test]
    fn constant_prior_defaults_to_quarter_variance_per_tree() {
        let data = Dataset::new(vec![0.0, 2.0, 4.0], vec![vec![1.0, 0.0, 1.0]], vec![vec![0.1, 0.5, 0.9]]).unwrap();
        let args = ModelArgs {
            leaf_prior: LeafPriorKind::Constant,
            trees: Some(10),
            ..Default::default()
        };
        let (_, options) = args.build(&data).unwrap();
        assert_eq!(options.leaf_prior, LeafPrior::Fixed(4.0 / 40.0));
    }
}
