//! Prior blocks: tree topology, split-probability hierarchy, global–local
//! leaf scales and inverse-gamma variances, plus the data-driven defaults.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::draw_multinomial_index;
use crate::scalar::Real;
use crate::tree::{DecisionRule, DecisionTree, NodeKind};

/// Beta(a, b) hyperprior on `u = eta / (eta + R)`.
pub const ETA_BETA_A: f64 = 1.0;
pub const ETA_BETA_B: f64 = 0.5;

/// Numerical floor for local and global scales.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Depth-dependent split probability of the Galton–Watson topology prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum TreePriorVariant<F> {
    /// `base * (1 + d)^-2`.
    Quadratic { base: F },
    /// `gamma^d`.
    Exponential { gamma: F },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreePriorConfig<F> {
    #[serde(flatten)]
    pub variant: TreePriorVariant<F>,
    /// Nodes at this depth or deeper never split.
    pub max_depth: Option<u32>,
}

impl<F: Real> Default for TreePriorConfig<F> {
    fn default() -> Self {
        Self::quadratic(F::of(0.95))
    }
}

impl<F: Real> TreePriorConfig<F> {
    pub fn quadratic(base: F) -> Self {
        Self {
            variant: TreePriorVariant::Quadratic { base },
            max_depth: None,
        }
    }

    pub fn exponential(gamma: F) -> Self {
        Self {
            variant: TreePriorVariant::Exponential { gamma },
            max_depth: None,
        }
    }

    pub fn with_max_depth(self, depth: u32) -> Self {
        Self {
            max_depth: Some(depth),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.variant {
            TreePriorVariant::Quadratic { base } if !(base > F::zero() && base < F::one()) => Err(
                Error::Config(format!("quadratic tree prior base {base} must lie in (0, 1)")),
            ),
            TreePriorVariant::Exponential { gamma }
                if !(gamma > F::zero() && gamma < F::of(0.5)) =>
            {
                Err(Error::Config(format!(
                    "exponential tree prior gamma {gamma} must lie in (0, 1/2)"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Probability that a node at `depth` is internal.
    pub fn split_probability(&self, depth: u32) -> F {
        if self.max_depth.is_some_and(|cap| depth >= cap) {
            return F::zero();
        }
        match self.variant {
            TreePriorVariant::Quadratic { base } => base / F::of(((1 + depth) as f64).powi(2)),
            TreePriorVariant::Exponential { gamma } => gamma.powi(depth as i32),
        }
    }

    /// `log p(split at depth)`; `-inf` where splitting is impossible.
    pub fn log_split(&self, depth: u32) -> F {
        self.split_probability(depth).ln()
    }

    /// `log (1 - p(split at depth))`; `-inf` where the node must split.
    pub fn log_stop(&self, depth: u32) -> F {
        (F::one() - self.split_probability(depth)).ln()
    }
}

/// Log prior mass of the topology of `tree` (rule content excluded).
///
/// Topologies the prior cannot produce, such as a split below `max_depth`,
/// get `-inf`.
pub fn tree_log_prior<F: Real>(tree: &DecisionTree<F>, config: &TreePriorConfig<F>) -> Result<F> {
    config.validate()?;
    Ok(tree
        .iter()
        .map(|(_, node)| {
            if node.is_leaf() {
                config.log_stop(node.depth)
            } else {
                config.log_split(node.depth)
            }
        })
        .sum())
}

/// Draw a tree from the prior: Galton–Watson topology, axes from `theta`,
/// uniform cutpoints, zero jumps.
pub fn sample_tree<F: Real, R: Rng + ?Sized>(
    config: &TreePriorConfig<F>,
    theta: &[F],
    rng: &mut R,
) -> DecisionTree<F> {
    let mut tree = DecisionTree::stump(F::zero());
    let mut frontier = vec![DecisionTree::<F>::ROOT];
    while let Some(id) = frontier.pop() {
        let depth = tree.node(id).depth;
        if F::unit(rng) < config.split_probability(depth) {
            let axis = draw_multinomial_index(theta, rng);
            let threshold = loop {
                let t = F::unit(rng);
                if t > F::zero() {
                    break t;
                }
            };
            let (l, r) = tree
                .grow(id, DecisionRule { axis, threshold }, F::zero(), F::zero())
                .expect("frontier holds leaves");
            frontier.push(r);
            frontier.push(l);
        }
    }
    tree
}

/// Local scales, global scale, slab and noise variance.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkageState<F> {
    pub lambda: Vec<F>,
    pub tau: F,
    pub c2: F,
    pub sigma2: F,
}

/// Regularized-horseshoe variance `t c^2 / (c^2 + t)` with `t = tau^2 lambda^2`.
#[inline]
pub fn rhs_variance<F: Real>(lambda: F, tau: F, c2: F) -> F {
    let t = (tau * lambda).powi(2);
    if t.is_infinite() {
        return c2;
    }
    t * c2 / (c2 + t)
}

impl<F: Real> ShrinkageState<F> {
    /// Ensemble-level variance `s_j^2`.
    pub fn s2(&self, j: usize) -> F {
        rhs_variance(self.lambda[j], self.tau, self.c2)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: F| x > F::zero() && x.is_finite();
        if self.lambda.iter().all(|&l| ok(l)) && ok(self.tau) && ok(self.c2) && ok(self.sigma2) {
            Ok(())
        } else {
            Err(Error::State(format!("invalid shrinkage state {self:?}")))
        }
    }
}

/// Per-leaf prior variance `s_j^2 / M_j` of ensemble `j`.
pub fn leaf_scale<F: Real>(j: usize, shrinkage: &ShrinkageState<F>, trees: usize) -> F {
    shrinkage.s2(j) / F::of(trees as f64)
}

/// Split-probability vectors and their Dirichlet concentrations, one per
/// ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitProbState<F> {
    pub theta: Vec<Vec<F>>,
    pub eta: Vec<F>,
}

impl<F: Real> SplitProbState<F> {
    /// Uniform `theta_j` with `eta_j = R` for each of `ensembles`.
    pub fn uniform(ensembles: usize, r: usize) -> Self {
        let inv = F::one() / F::of(r as f64);
        Self {
            theta: vec![vec![inv; r]; ensembles],
            eta: vec![F::of(r as f64); ensembles],
        }
    }
}

fn positive<F: Real>(name: &str, x: F) -> Result<()> {
    if x > F::zero() && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must be positive and finite")))
    }
}

/// Log density of the half-Cauchy C+(0, scale) at `x`.
pub fn log_half_cauchy<F: Real>(x: F, scale: F) -> Result<F> {
    positive("x", x)?;
    positive("scale", scale)?;
    Ok(half_cauchy_unchecked(x, scale))
}

#[inline]
pub(crate) fn half_cauchy_unchecked<F: Real>(x: F, scale: F) -> F {
    let ratio = x / scale;
    (F::of(2.0) / F::PI()).ln() - scale.ln() - ratio.mul_add(ratio, F::one()).ln()
}

/// Log density of IG(shape, rate) at `x`.
pub fn log_inv_gamma<F: Real>(x: F, shape: F, rate: F) -> Result<F> {
    positive("x", x)?;
    positive("shape", shape)?;
    positive("rate", rate)?;
    Ok(inv_gamma_unchecked(x, shape, rate))
}

#[inline]
pub(crate) fn inv_gamma_unchecked<F: Real>(x: F, shape: F, rate: F) -> F {
    shape * rate.ln() - shape.ln_gamma() - (shape + F::one()) * x.ln() - rate / x
}

/// Log Beta(a, b) density at `u`.
pub fn log_beta<F: Real>(u: F, a: F, b: F) -> F {
    if !(u > F::zero() && u < F::one()) {
        return F::neg_infinity();
    }
    (a + b).ln_gamma() - a.ln_gamma() - b.ln_gamma()
        + (a - F::one()) * u.ln()
        + (b - F::one()) * (F::one() - u).ln()
}

/// `u = eta / (eta + R)`.
pub fn eta_to_u<F: Real>(eta: F, r: usize) -> F {
    eta / (eta + F::of(r as f64))
}

/// `eta = R u / (1 - u)`.
pub fn u_to_eta<F: Real>(u: F, r: usize) -> F {
    F::of(r as f64) * u / (F::one() - u)
}

/// Log hyperprior of `u`.
pub fn log_u_prior<F: Real>(u: F) -> F {
    log_beta(u, F::of(ETA_BETA_A), F::of(ETA_BETA_B))
}

/// Log hyperprior density of `eta`, obtained from the prior on `u` by the
/// change of variables `du/deta = R / (eta + R)^2`.
pub fn log_eta_prior<F: Real>(eta: F, r: usize) -> F {
    let rf = F::of(r as f64);
    log_u_prior(eta_to_u(eta, r)) + rf.ln() - F::of(2.0) * (eta + rf).ln()
}

/// Dirichlet–multinomial log factor of split counts given concentration
/// `eta` (symmetric parameter `eta / R`), up to the multinomial coefficient.
pub fn log_dirichlet_multinomial<F: Real>(counts: &[usize], eta: F) -> F {
    let r = F::of(counts.len() as f64);
    let alpha = eta / r;
    let total = F::of(counts.iter().sum::<usize>() as f64);
    let mut out = eta.ln_gamma() - (eta + total).ln_gamma();
    for &c in counts {
        if c > 0 {
            out += (alpha + F::of(c as f64)).ln_gamma() - alpha.ln_gamma();
        }
    }
    out
}

/// Sample standard deviation (denominator `N - 1`).
pub fn sample_sd<F: Real>(y: &[F]) -> F {
    let n = F::of(y.len() as f64);
    let mean = y.iter().copied().sum::<F>() / n;
    let ss: F = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (ss / (n - F::one())).sqrt()
}

/// Rate `noise_scale` such that `sigma^2 ~ IG(nu/2, nu * noise_scale / 2)`
/// puts probability 0.9 on `sigma < sd(y)`.
pub fn calibrate_noise_rate<F: Real>(y: &[F], nu: F) -> Result<F> {
    if y.len() < 2 {
        return Err(Error::Calibration("need at least two responses".into()));
    }
    positive("nu", nu)?;
    let sd = sample_sd(y).as_f64();
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Calibration(
            "response has zero or non-finite standard deviation".into(),
        ));
    }
    let shape = nu.as_f64() / 2.0;
    // P(sigma^2 <= x) under IG(a, b) is Q(a, b / x); solve Q(a, s) = 0.9 for s
    let q = |s: f64| statrs::function::gamma::gamma_ur(shape, s);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while q(hi) > 0.9 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > 0.9 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(F::of(2.0 * s * sd * sd / nu.as_f64()))
}

/// Effective-sparsity guess `p0 = min(10, max(1, floor(p/4)))`.
pub fn default_p0(p: usize) -> usize {
    (p / 4).clamp(1, 10)
}

/// Global-scale prior scale `tau0 = p / (p - p0) * sd(y) / sqrt(N)`.
pub fn default_tau0<F: Real>(p: usize, n: usize, sd_y: F) -> Result<F> {
    let p0 = default_p0(p);
    if p <= p0 {
        return Err(Error::Config(format!(
            "default tau0 needs p > p0 (p = {p}, p0 = {p0}); set tau0 explicitly"
        )));
    }
    if n == 0 {
        return Err(Error::Config("default tau0 needs N >= 1".into()));
    }
    let pf = F::of(p as f64);
    Ok(pf / (pf - F::of(p0 as f64)) * sd_y / F::of(n as f64).sqrt())
}

/// Fixed hyperparameters of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters<F> {
    /// Trees per ensemble.
    pub trees: usize,
    /// Noise prior shape input: `sigma^2 ~ IG(nu/2, nu * noise_scale / 2)`.
    pub nu: F,
    pub noise_scale: F,
    /// Slab prior: `c^2 ~ IG(nu_c/2, nu_c s_c^2 / 2)`.
    pub nu_c: F,
    pub s_c: F,
    /// Scale of the half-Cauchy prior on the global scale.
    pub tau0: F,
    pub tree_prior: TreePriorConfig<F>,
}

impl<F: Real> Hyperparameters<F> {
    pub const DEFAULT_TREES: usize = 50;
    pub const DEFAULT_NU: f64 = 3.0;
    pub const DEFAULT_NU_C: f64 = 4.0;
    pub const DEFAULT_S_C: f64 = 2.0;

    /// Defaults calibrated from the response for a model with `p`
    /// covariates. For `p < 2` the `tau0` formula is undefined and
    /// `sd(y) / sqrt(N)` is used.
    pub fn calibrated(y: &[F], p: usize) -> Result<Self> {
        let nu = F::of(Self::DEFAULT_NU);
        let noise_scale = calibrate_noise_rate(y, nu)?;
        let sd = sample_sd(y);
        let tau0 = if p >= 2 {
            default_tau0(p, y.len(), sd)?
        } else {
            sd / F::of(y.len() as f64).sqrt()
        };
        Ok(Self {
            trees: Self::DEFAULT_TREES,
            nu,
            noise_scale,
            nu_c: F::of(Self::DEFAULT_NU_C),
            s_c: F::of(Self::DEFAULT_S_C),
            tau0,
            tree_prior: TreePriorConfig::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::Config("trees per ensemble must be >= 1".into()));
        }
        for (name, v) in [
            ("nu", self.nu),
            ("noise_scale", self.noise_scale),
            ("nu_c", self.nu_c),
            ("s_c", self.s_c),
            ("tau0", self.tau0),
        ] {
            if !(v > F::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        self.tree_prior.validate()
    }
}

/// Walk the tree checking the topology invariants (used by tests).
pub fn depths_consistent<F: Real>(tree: &DecisionTree<F>) -> bool {
    tree.iter().all(|(id, n)| match n.kind {
        NodeKind::Split { left, right, .. } => {
            let l = tree.node(left);
            let r = tree.node(right);
            l.depth == n.depth + 1 && r.depth == n.depth + 1 && l.parent == Some(id) && r.parent == Some(id)
        }
        NodeKind::Leaf { .. } => true,
    })
}
