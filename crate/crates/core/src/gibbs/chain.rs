//! Chain orchestration and the on-disk chain format.
//!
//! A chain directory holds
//!
//! * `params.csv`: `draw, sweep, sigma2, tau, c2, lambda_0..lambda_p, eta_0..eta_p`
//! * `theta_<j>.csv` for each ensemble: `draw, theta_1..theta_R`
//! * `beta_grid.csv`: `draw, j, g_1..g_G`, one row per kept draw and ensemble
//! * `meta.json`: seed, chain index, move counters, timings and the caller's
//!   configuration echo.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ChainState, Diagnostics, Model};
use crate::data::fmt_num;
use crate::error::{Error, Result};
use crate::sampling::RngStream;
use crate::scalar::Real;

/// Iteration schedule. `iters` counts every sweep, burn-in included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub chains: usize,
    pub iters: usize,
    pub burn: usize,
    pub thin: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            chains: 4,
            iters: 2000,
            burn: 400,
            thin: 1,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iters == 0 || self.thin == 0 {
            return Err(Error::Config("chains, iters and thin must be positive".into()));
        }
        if self.burn >= self.iters {
            return Err(Error::Config(format!("burn ({}) must be below iters ({})", self.burn, self.iters)));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.iters - self.burn).div_ceil(self.thin)
    }
}

/// Scalar parameters of one kept draw.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamDraw<F> {
    pub sweep: usize,
    pub sigma2: F,
    pub tau: F,
    pub c2: F,
    pub lambda: Vec<F>,
    pub eta: Vec<F>,
}

/// Kept draws of one chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput<F> {
    pub seed: u64,
    pub chain: usize,
    pub params: Vec<ParamDraw<F>>,
    /// `theta[draw][j][r]`
    pub theta: Vec<Vec<Vec<F>>>,
    /// `beta_grid[draw][j][g]`
    pub beta_grid: Vec<Vec<Vec<F>>>,
    pub diagnostics: Diagnostics,
    pub seconds: f64,
}

#[derive(Serialize, Deserialize)]
struct ChainMeta {
    seed: u64,
    chain: usize,
    draws: usize,
    ensembles: usize,
    modifiers: usize,
    grid_points: usize,
    diagnostics: Diagnostics,
    tree_acceptance: f64,
    eta_acceptance: f64,
    seconds: f64,
    config: serde_json::Value,
}

fn record<F: Real>(model: &Model<F>, state: &ChainState<F>, grid: &[Vec<F>], out: &mut ChainOutput<F>) {
    let sh = &state.shrinkage;
    out.params.push(ParamDraw {
        sweep: state.sweep,
        sigma2: sh.sigma2,
        tau: sh.tau,
        c2: sh.c2,
        lambda: sh.lambda.clone(),
        eta: state.split.eta.clone(),
    });
    out.theta.push(state.split.theta.clone());
    out.beta_grid.push(model.evaluate_grid(state, grid));
}

/// Run one chain from the default initial state. The random stream is
/// `(seed, chain)`, so results do not depend on scheduling.
pub fn run_chain<F: Real>(
    model: &Model<F>,
    grid: &[Vec<F>],
    schedule: &Schedule,
    seed: u64,
    chain: usize,
) -> Result<ChainOutput<F>> {
    schedule.validate()?;
    if grid.len() != model.r() {
        return Err(Error::Input(format!(
            "grid has {} modifier columns, model has {}",
            grid.len(),
            model.r()
        )));
    }
    let start = Instant::now();
    let mut rng = RngStream::new(seed, chain as u64);
    let mut state = model.initial_state();
    let mut out = ChainOutput {
        seed,
        chain,
        params: Vec::with_capacity(schedule.kept()),
        theta: Vec::with_capacity(schedule.kept()),
        beta_grid: Vec::with_capacity(schedule.kept()),
        diagnostics: Diagnostics::default(),
        seconds: 0.0,
    };
    for it in 0..schedule.iters {
        model.sweep(&mut state, &mut rng, &mut out.diagnostics)?;
        if it >= schedule.burn && (it - schedule.burn).is_multiple_of(schedule.thin) {
            record(model, &state, grid, &mut out);
        }
    }
    out.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}

/// Run `schedule.chains` independent chains in parallel.
pub fn run_chains<F: Real>(
    model: &Model<F>,
    grid: &[Vec<F>],
    schedule: &Schedule,
    seed: u64,
) -> Result<Vec<ChainOutput<F>>> {
    (0..schedule.chains)
        .into_par_iter()
        .map(|c| run_chain(model, grid, schedule, seed, c))
        .collect()
}

fn parse<F: Real>(cell: &str, file: &str, row: usize) -> Result<F> {
    cell.parse()
        .map_err(|_| Error::Data(format!("{file} row {row}: cannot parse {cell:?}")))
}

impl<F: Real> ChainOutput<F> {
    pub fn num_draws(&self) -> usize {
        self.params.len()
    }

    pub fn num_ensembles(&self) -> usize {
        self.params.first().map_or(0, |d| d.lambda.len())
    }

    /// Write the chain directory, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>, config: &serde_json::Value) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let k = self.num_ensembles();

        let mut w = csv::Writer::from_path(dir.join("params.csv"))?;
        let mut header: Vec<String> = ["draw", "sweep", "sigma2", "tau", "c2"].map(String::from).to_vec();
        header.extend((0..k).map(|j| format!("lambda_{j}")));
        header.extend((0..k).map(|j| format!("eta_{j}")));
        w.write_record(&header)?;
        for (d, p) in self.params.iter().enumerate() {
            let mut row = vec![d.to_string(), p.sweep.to_string(), fmt_num(p.sigma2), fmt_num(p.tau), fmt_num(p.c2)];
            row.extend(p.lambda.iter().map(|&v| fmt_num(v)));
            row.extend(p.eta.iter().map(|&v| fmt_num(v)));
            w.write_record(&row)?;
        }
        w.flush()?;

        let r = self.theta.first().and_then(|t| t.first()).map_or(0, Vec::len);
        for j in 0..k {
            let mut w = csv::Writer::from_path(dir.join(format!("theta_{j}.csv")))?;
            let mut header = vec!["draw".to_string()];
            header.extend((1..=r).map(|c| format!("theta_{c}")));
            w.write_record(&header)?;
            for (d, t) in self.theta.iter().enumerate() {
                let mut row = vec![d.to_string()];
                row.extend(t[j].iter().map(|&v| fmt_num(v)));
                w.write_record(&row)?;
            }
            w.flush()?;
        }

        let g = self.beta_grid.first().and_then(|b| b.first()).map_or(0, Vec::len);
        let mut w = csv::Writer::from_path(dir.join("beta_grid.csv"))?;
        let mut header = vec!["draw".to_string(), "j".to_string()];
        header.extend((1..=g).map(|c| format!("g_{c}")));
        w.write_record(&header)?;
        for (d, b) in self.beta_grid.iter().enumerate() {
            for (j, values) in b.iter().enumerate() {
                let mut row = vec![d.to_string(), j.to_string()];
                row.extend(values.iter().map(|&v| fmt_num(v)));
                w.write_record(&row)?;
            }
        }
        w.flush()?;

        let meta = ChainMeta {
            seed: self.seed,
            chain: self.chain,
            draws: self.num_draws(),
            ensembles: k,
            modifiers: r,
            grid_points: g,
            diagnostics: self.diagnostics.clone(),
            tree_acceptance: self.diagnostics.tree_acceptance(),
            eta_acceptance: self.diagnostics.eta_acceptance(),
            seconds: self.seconds,
            config: config.clone(),
        };
        std::fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }

    /// Read a directory written by [`ChainOutput::write`].
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta_path = dir.join("meta.json");
        let meta: ChainMeta = serde_json::from_str(
            &std::fs::read_to_string(&meta_path)
                .map_err(|e| Error::Data(format!("{}: {e}", meta_path.display())))?,
        )?;
        let k = meta.ensembles;

        let mut params = Vec::with_capacity(meta.draws);
        let mut rd = csv::Reader::from_path(dir.join("params.csv"))?;
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            if rec.len() != 5 + 2 * k {
                return Err(Error::Data(format!("params.csv row {}: wrong field count", row + 1)));
            }
            let v = |c: usize| parse::<F>(&rec[c], "params.csv", row + 1);
            params.push(ParamDraw {
                sweep: rec[1]
                    .parse()
                    .map_err(|_| Error::Data(format!("params.csv row {}: bad sweep", row + 1)))?,
                sigma2: v(2)?,
                tau: v(3)?,
                c2: v(4)?,
                lambda: (0..k).map(|j| v(5 + j)).collect::<Result<_>>()?,
                eta: (0..k).map(|j| v(5 + k + j)).collect::<Result<_>>()?,
            });
        }
        let draws = params.len();

        let mut theta = vec![Vec::with_capacity(k); draws];
        for j in 0..k {
            let name = format!("theta_{j}.csv");
            let mut rd = csv::Reader::from_path(dir.join(&name))?;
            let mut n = 0;
            for (row, rec) in rd.records().enumerate() {
                let rec = rec?;
                if row >= draws {
                    return Err(Error::Data(format!("{name}: more rows than draws")));
                }
                let t = (1..rec.len()).map(|c| parse::<F>(&rec[c], &name, row + 1)).collect::<Result<Vec<F>>>()?;
                theta[row].push(t);
                n += 1;
            }
            if n != draws {
                return Err(Error::Data(format!("{name}: {n} rows, expected {draws}")));
            }
        }

        let mut beta_grid = vec![Vec::with_capacity(k); draws];
        let mut rd = csv::Reader::from_path(dir.join("beta_grid.csv"))?;
        for (row, rec) in rd.records().enumerate() {
            let rec = rec?;
            let bad = || Error::Data(format!("beta_grid.csv row {}: bad index", row + 1));
            let d: usize = rec[0].parse().map_err(|_| bad())?;
            let j: usize = rec[1].parse().map_err(|_| bad())?;
            if d >= draws || j != beta_grid[d].len() {
                return Err(bad());
            }
            let values = (2..rec.len())
                .map(|c| parse::<F>(&rec[c], "beta_grid.csv", row + 1))
                .collect::<Result<Vec<F>>>()?;
            beta_grid[d].push(values);
        }

        Ok(Self {
            seed: meta.seed,
            chain: meta.chain,
            params,
            theta,
            beta_grid,
            diagnostics: meta.diagnostics,
            seconds: meta.seconds,
        })
    }
}
