//! Posterior summaries pooled over chains: pointwise intervals for the
//! coefficient functions, local-scale screening, modifier mass tables and
//! evaluation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::ChainOutput;
use crate::scalar::Real;

/// Sample quantile with linear interpolation between order statistics:
/// `h = (n - 1) q`, `Q = x[floor h] + (h - floor h) (x[floor h + 1] - x[floor h])`.
/// `sorted` must be ascending and non-empty.
pub fn quantile_sorted<F: Real>(sorted: &[F], q: f64) -> F {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let frac = F::of(h - lo as f64);
    match sorted.get(lo + 1) {
        Some(&next) => sorted[lo] + frac * (next - sorted[lo]),
        None => sorted[lo],
    }
}

fn sorted<F: Real>(mut v: Vec<F>) -> Vec<F> {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    v
}

fn mean<F: Real>(v: &[F]) -> F {
    v.iter().copied().sum::<F>() / F::of(v.len() as f64)
}

/// Pointwise summary of one coefficient function over the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary<F> {
    pub mean: Vec<F>,
    pub lower: Vec<F>,
    pub upper: Vec<F>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport<F> {
    /// Central interval probability, e.g. 0.95.
    pub level: f64,
    pub draws: usize,
    /// One entry per ensemble, intercept first.
    pub beta: Vec<CurveSummary<F>>,
    pub lambda_median: Vec<F>,
    /// `theta_mean[j][r]`
    pub theta_mean: Vec<Vec<F>>,
    pub sigma2_mean: F,
}

fn check_shapes<F: Real>(chains: &[ChainOutput<F>]) -> Result<(usize, usize, usize)> {
    let first = chains.first().ok_or_else(|| Error::Input("no chains to summarize".into()))?;
    let shape = |c: &ChainOutput<F>| -> Result<(usize, usize, usize)> {
        let d = c.beta_grid.first().ok_or_else(|| Error::Input(format!("chain {} has no draws", c.chain)))?;
        let r = c.theta.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let s = (d.len(), d.first().map_or(0, Vec::len), r);
        let consistent = c.beta_grid.iter().all(|b| b.len() == s.0 && b.iter().all(|v| v.len() == s.1))
            && c.params.len() == c.beta_grid.len()
            && c.theta.len() == c.beta_grid.len();
        if consistent {
            Ok(s)
        } else {
            Err(Error::Input(format!("chain {} has ragged draws", c.chain)))
        }
    };
    let s = shape(first)?;
    for c in &chains[1..] {
        if shape(c)? != s {
            return Err(Error::Input("chains disagree on ensembles, grid or modifiers".into()));
        }
    }
    Ok(s)
}

/// Pool all kept draws of `chains` and summarize them with central
/// `level` intervals.
pub fn summarize<F: Real>(chains: &[ChainOutput<F>], level: f64) -> Result<SummaryReport<F>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Input(format!("interval level {level} must lie in (0, 1)")));
    }
    let (k, g, r) = check_shapes(chains)?;
    let draws: usize = chains.iter().map(ChainOutput::num_draws).sum();
    let (ql, qu) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let mut beta = Vec::with_capacity(k);
    let mut column = Vec::with_capacity(draws);
    for j in 0..k {
        let mut curve = CurveSummary {
            mean: Vec::with_capacity(g),
            lower: Vec::with_capacity(g),
            upper: Vec::with_capacity(g),
        };
        for point in 0..g {
            column.clear();
            column.extend(chains.iter().flat_map(|c| c.beta_grid.iter().map(move |d| d[j][point])));
            curve.mean.push(mean(&column));
            let s = sorted(column.clone());
            curve.lower.push(quantile_sorted(&s, ql));
            curve.upper.push(quantile_sorted(&s, qu));
        }
        beta.push(curve);
    }
    let lambda_median = (0..k)
        .map(|j| {
            let v: Vec<F> = chains.iter().flat_map(|c| c.params.iter().map(move |p| p.lambda[j])).collect();
            quantile_sorted(&sorted(v), 0.5)
        })
        .collect();
    let theta_mean = (0..k)
        .map(|j| {
            (0..r)
                .map(|m| {
                    let v: Vec<F> = chains.iter().flat_map(|c| c.theta.iter().map(move |t| t[j][m])).collect();
                    mean(&v)
                })
                .collect()
        })
        .collect();
    let s2: Vec<F> = chains.iter().flat_map(|c| c.params.iter().map(|p| p.sigma2)).collect();
    Ok(SummaryReport {
        level,
        draws,
        beta,
        lambda_median,
        theta_mean,
        sigma2_mean: mean(&s2),
    })
}

/// Estimation error of one coefficient function against the truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveMetrics {
    pub mse: f64,
    pub coverage: f64,
}

/// Mean squared error of the posterior mean and pointwise interval coverage,
/// per ensemble. `truth[j][g]` must match the report grid.
pub fn coverage_and_mse<F: Real>(report: &SummaryReport<F>, truth: &[Vec<F>]) -> Result<Vec<CurveMetrics>> {
    if truth.len() != report.beta.len() {
        return Err(Error::Input(format!(
            "truth has {} coefficient functions, report has {}",
            truth.len(),
            report.beta.len()
        )));
    }
    report
        .beta
        .iter()
        .zip(truth)
        .map(|(curve, t)| {
            if t.len() != curve.mean.len() || t.is_empty() {
                return Err(Error::Input("truth grid does not match the report grid".into()));
            }
            let n = t.len() as f64;
            let mut mse = 0.0;
            let mut covered = 0usize;
            for (g, &tv) in t.iter().enumerate() {
                mse += (curve.mean[g] - tv).as_f64().powi(2);
                if curve.lower[g] <= tv && tv <= curve.upper[g] {
                    covered += 1;
                }
            }
            Ok(CurveMetrics {
                mse: mse / n,
                coverage: covered as f64 / n,
            })
        })
        .collect()
}

/// Covariate screening rule applied to posterior medians of the local scales.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ScreenRule {
    /// Sort descending and cut at the largest ratio between neighbours,
    /// provided that ratio exceeds the given value.
    Elbow(f64),
    /// Keep medians strictly above the threshold.
    Threshold(f64),
}

impl Default for ScreenRule {
    fn default() -> Self {
        Self::Elbow(1.5)
    }
}

/// Covariates selected from `medians` (indexed by covariate, 0-based, no
/// intercept). Returns 0-based covariate indices in increasing order.
pub fn lambda_screen<F: Real>(medians: &[F], rule: ScreenRule) -> Vec<usize> {
    let mut out = match rule {
        ScreenRule::Threshold(t) => (0..medians.len()).filter(|&i| medians[i].as_f64() > t).collect(),
        ScreenRule::Elbow(min_ratio) => {
            let mut order: Vec<usize> = (0..medians.len()).collect();
            order.sort_by(|&a, &b| medians[b].partial_cmp(&medians[a]).expect("finite medians"));
            let mut best: Option<(usize, f64)> = None;
            for w in 0..order.len().saturating_sub(1) {
                let ratio = medians[order[w]].as_f64() / medians[order[w + 1]].as_f64();
                if best.is_none_or(|(_, b)| ratio > b) {
                    best = Some((w, ratio));
                }
            }
            match best {
                Some((w, ratio)) if ratio > min_ratio => order[..=w].to_vec(),
                _ => Vec::new(),
            }
        }
    };
    out.sort_unstable();
    out
}

/// One row of a modifier table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModifierMass {
    /// 0-based modifier index.
    pub modifier: usize,
    pub mass: f64,
    pub cumulative: f64,
    /// Part of the smallest prefix reaching 90% of the mass.
    pub flagged: bool,
}

/// Posterior mean split probabilities of ensemble `j`, sorted descending.
pub fn modifier_report<F: Real>(chains: &[ChainOutput<F>], j: usize) -> Result<Vec<ModifierMass>> {
    let (k, _, r) = check_shapes(chains)?;
    if j >= k {
        return Err(Error::Input(format!("ensemble {j} out of range (0..{k})")));
    }
    let draws: usize = chains.iter().map(ChainOutput::num_draws).sum();
    let mut mass = vec![0.0; r];
    for c in chains {
        for t in &c.theta {
            for (m, &v) in t[j].iter().enumerate() {
                mass[m] += v.as_f64();
            }
        }
    }
    let mut rows: Vec<(usize, f64)> = mass.into_iter().map(|m| m / draws as f64).enumerate().collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cumulative = 0.0;
    let mut reached = false;
    Ok(rows
        .into_iter()
        .map(|(modifier, m)| {
            let flagged = !reached;
            cumulative += m;
            reached = reached || cumulative >= 0.9 - 1e-12;
            ModifierMass {
                modifier,
                mass: m,
                cumulative,
                flagged,
            }
        })
        .collect())
}

/// Out-of-sample accuracy of the posterior predictive distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMetrics {
    /// RMSE of the posterior mean prediction.
    pub rmse: f64,
    /// Fraction of responses inside their central predictive interval.
    pub coverage: f64,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Predictive RMSE and interval coverage at the grid points, which must be
/// the rows of `x` (covariate columns, no intercept) and `y`. The
/// predictive law is the mixture over draws of `N(f_d, sigma_d^2)`.
pub fn predictive_metrics<F: Real>(chains: &[ChainOutput<F>], x: &[Vec<F>], y: &[F], level: f64) -> Result<PredictiveMetrics> {
    let (k, g, _) = check_shapes(chains)?;
    if x.len() + 1 != k || y.len() != g || x.iter().any(|c| c.len() != g) {
        return Err(Error::Input("test covariates do not match the chain grid".into()));
    }
    let (ql, qu) = ((1.0 - level) / 2.0, (1.0 + level) / 2.0);
    let draws: Vec<(Vec<f64>, f64)> = chains
        .iter()
        .flat_map(|c| c.beta_grid.iter().zip(&c.params))
        .map(|(b, p)| {
            let f = (0..g)
                .map(|i| b[0][i].as_f64() + (1..k).map(|j| b[j][i].as_f64() * x[j - 1][i].as_f64()).sum::<f64>())
                .collect();
            (f, p.sigma2.as_f64().sqrt())
        })
        .collect();
    let nd = draws.len() as f64;
    let (mut se, mut covered) = (0.0, 0usize);
    for i in 0..g {
        let yi = y[i].as_f64();
        let m = draws.iter().map(|(f, _)| f[i]).sum::<f64>() / nd;
        se += (m - yi).powi(2);
        let cdf = |v: f64| draws.iter().map(|(f, s)| normal_cdf((v - f[i]) / s)).sum::<f64>() / nd;
        let spread = draws.iter().map(|(f, s)| (f[i] - m).abs() + 10.0 * s).fold(0.0, f64::max);
        let solve = |q: f64| {
            let (mut lo, mut hi) = (m - spread, m + spread);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if cdf(mid) < q {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        if solve(ql) <= yi && yi <= solve(qu) {
            covered += 1;
        }
    }
    Ok(PredictiveMetrics {
        rmse: (se / g as f64).sqrt(),
        coverage: covered as f64 / g as f64,
    })
}
