//! Metropolis-within-Gibbs sampler over tree ensembles, split
//! probabilities and the global–local shrinkage block.

mod chain;
pub mod conditionals;

pub use chain::{run_chain, run_chains, ChainOutput, ParamDraw, Schedule};
pub use conditionals::{leaf_log_marginal, JumpStats, SufficientStats};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::prior::{
    sample_sd, sample_tree, Hyperparameters, ShrinkageState, SplitProbState,
    ETA_BETA_A, ETA_BETA_B, SCALE_FLOOR,
};
use crate::sampling::{draw_inv_gamma, draw_normal, slice_sample, SliceConfig};
use crate::scalar::Real;
use crate::tree::{
    propose_grow, propose_grow_midpoints, propose_prune, split_counts, CutpointMode, DecisionTree,
    LeafAssignment, NodeId, NodeKind,
};
use conditionals::{
    draw_c2_conjugate, draw_leaf, draw_sigma2, draw_theta, eta_mh_step, leaf_log_marginal_reduced,
    log_c2_target, log_lambda_target, log_tau_target,
};

/// Prior on the leaf jumps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "leaf_variance")]
pub enum LeafPrior<F> {
    /// Regularized horseshoe with sampled `lambda`, `tau` and `c^2`.
    #[default]
    Horseshoe,
    /// Every leaf gets this fixed variance; the scales stay at their
    /// initial values and are not updated.
    Fixed(F),
}

/// How the slab variance is updated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C2Update {
    /// Slice sampling against the exact conditional.
    #[default]
    Exact,
    /// Inverse-gamma draw that treats the leaf variance as
    /// `tau^2 lambda_j^2 c^2 / M_j`. Not invariant for the exact model.
    Conjugate,
}

/// Kernel settings that are not part of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerOptions<F> {
    pub cutpoints: CutpointMode,
    pub leaf_prior: LeafPrior<F>,
    pub c2_update: C2Update,
    /// Hold `sigma^2` at this value instead of sampling it.
    pub fixed_sigma2: Option<F>,
    pub slice: SliceConfig<F>,
    /// Random-walk step on `logit(u)` for the concentration update.
    pub eta_step: F,
    /// Recompute the cached fit from scratch every this many sweeps
    /// (0 disables the check).
    pub coherence_every: usize,
}

impl<F: Real> Default for SamplerOptions<F> {
    fn default() -> Self {
        Self {
            cutpoints: CutpointMode::Uniform,
            leaf_prior: LeafPrior::Horseshoe,
            c2_update: C2Update::Exact,
            fixed_sigma2: None,
            slice: SliceConfig::default(),
            eta_step: F::one(),
            coherence_every: 100,
        }
    }
}

impl<F: Real> SamplerOptions<F> {
    pub fn validate(&self) -> Result<()> {
        self.slice.validate()?;
        if !(self.eta_step >= F::zero()) || !self.eta_step.is_finite() {
            return Err(Error::Config("eta_step must be non-negative".into()));
        }
        if let LeafPrior::Fixed(v) = self.leaf_prior {
            if !(v >= F::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("fixed leaf variance {v} must be >= 0")));
            }
        }
        if let Some(s) = self.fixed_sigma2 {
            if !(s > F::zero()) || !s.is_finite() {
                return Err(Error::Config(format!("fixed sigma2 {s} must be positive")));
            }
        }
        Ok(())
    }
}

/// Data plus fixed settings. Ensemble 0 is the intercept, whose covariate
/// column is all ones.
#[derive(Clone, Debug)]
pub struct Model<F> {
    x: Vec<Vec<F>>,
    z: Vec<Vec<F>>,
    y: Vec<F>,
    hyper: Hyperparameters<F>,
    options: SamplerOptions<F>,
}

/// The trees of one ensemble with their leaf assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble<F> {
    pub trees: Vec<DecisionTree<F>>,
    pub assignments: Vec<LeafAssignment>,
}

/// Everything a chain samples, plus the cached fit
/// `f_i = sum_j x_ij beta_j(z_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState<F> {
    pub ensembles: Vec<Ensemble<F>>,
    pub split: SplitProbState<F>,
    pub shrinkage: ShrinkageState<F>,
    pub fit: Vec<F>,
    pub sweep: usize,
}

/// Move counters for one chain.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub grow_proposed: u64,
    pub grow_accepted: u64,
    pub prune_proposed: u64,
    pub prune_accepted: u64,
    /// Proposals rejected because the log acceptance ratio was not finite
    /// or no admissible cutpoint existed.
    pub degenerate: u64,
    pub eta_proposed: u64,
    pub eta_accepted: u64,
}

impl Diagnostics {
    pub fn tree_acceptance(&self) -> f64 {
        let proposed = self.grow_proposed + self.prune_proposed;
        if proposed == 0 {
            return 0.0;
        }
        (self.grow_accepted + self.prune_accepted) as f64 / proposed as f64
    }

    pub fn eta_acceptance(&self) -> f64 {
        if self.eta_proposed == 0 {
            return 0.0;
        }
        self.eta_accepted as f64 / self.eta_proposed as f64
    }
}

impl<F: Real> Ensemble<F> {
    fn stumps(trees: usize, z: &[Vec<F>], n: usize) -> Self {
        let stump = DecisionTree::stump(F::zero());
        let assignment = LeafAssignment::build(&stump, z, n);
        Self {
            trees: vec![stump; trees],
            assignments: vec![assignment; trees],
        }
    }

    pub fn jump_stats(&self) -> JumpStats<F> {
        let mut sum_sq = F::zero();
        let mut leaves = 0;
        for tree in &self.trees {
            for mu in tree.jumps() {
                sum_sq += mu * mu;
                leaves += 1;
            }
        }
        JumpStats {
            sum_sq,
            leaves,
            trees: self.trees.len(),
        }
    }

    pub fn split_counts(&self, r: usize) -> Vec<usize> {
        split_counts(&self.trees, r)
    }

    /// `beta_j(z)` at a point.
    pub fn evaluate(&self, z: &[F]) -> F {
        self.trees.iter().map(|t| t.jump(t.leaf_for(z))).sum()
    }
}

impl<F: Real> Model<F> {
    pub fn new(data: &Dataset<F>, hyper: Hyperparameters<F>, options: SamplerOptions<F>) -> Result<Self> {
        data.validate()?;
        hyper.validate()?;
        options.validate()?;
        if data.n() == 0 {
            return Err(Error::Data("empty data set".into()));
        }
        let mut x = Vec::with_capacity(data.p() + 1);
        x.push(vec![F::one(); data.n()]);
        x.extend(data.x.iter().cloned());
        Ok(Self {
            x,
            z: data.z.clone(),
            y: data.y.clone(),
            hyper,
            options,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of covariates, excluding the intercept.
    pub fn p(&self) -> usize {
        self.x.len() - 1
    }

    pub fn r(&self) -> usize {
        self.z.len()
    }

    pub fn num_ensembles(&self) -> usize {
        self.x.len()
    }

    pub fn hyper(&self) -> &Hyperparameters<F> {
        &self.hyper
    }

    pub fn options(&self) -> &SamplerOptions<F> {
        &self.options
    }

    pub fn y(&self) -> &[F] {
        &self.y
    }

    pub fn z(&self) -> &[Vec<F>] {
        &self.z
    }

    /// Replace the response, keeping covariates and modifiers.
    pub fn set_response(&mut self, y: Vec<F>) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Input(format!("response has {} rows, expected {}", y.len(), self.n())));
        }
        self.y = y;
        Ok(())
    }

    /// Stumps with zero jumps, uniform split probabilities with `eta = R`,
    /// `lambda = 1`, `tau = tau0`, `c^2 = s_c^2`, `sigma^2 = sd(y)^2`.
    pub fn initial_state(&self) -> ChainState<F> {
        let n = self.n();
        let sigma2 = match self.options.fixed_sigma2 {
            Some(s) => s,
            None => {
                let sd = if n > 1 { sample_sd(&self.y) } else { F::zero() };
                if sd > F::zero() && sd.is_finite() {
                    sd * sd
                } else {
                    self.hyper.noise_scale
                }
            }
        };
        ChainState {
            ensembles: (0..self.num_ensembles())
                .map(|_| Ensemble::stumps(self.hyper.trees, &self.z, n))
                .collect(),
            split: SplitProbState::uniform(self.num_ensembles(), self.r()),
            shrinkage: ShrinkageState {
                lambda: vec![F::one(); self.num_ensembles()],
                tau: self.hyper.tau0,
                c2: self.hyper.s_c * self.hyper.s_c,
                sigma2,
            },
            fit: vec![F::zero(); n],
            sweep: 0,
        }
    }

    /// Per-leaf prior variance of ensemble `j`.
    pub fn leaf_variance(&self, state: &ChainState<F>, j: usize) -> F {
        match self.options.leaf_prior {
            LeafPrior::Fixed(v) => v,
            LeafPrior::Horseshoe => {
                state.shrinkage.s2(j) / F::of(state.ensembles[j].trees.len() as f64)
            }
        }
    }

    /// Draw every parameter from its prior (with the fit recomputed).
    pub fn sample_prior_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ChainState<F>> {
        let k = self.num_ensembles();
        let r = self.r();
        let h = &self.hyper;
        let half = F::of(0.5);
        let mut state = self.initial_state();
        if self.options.leaf_prior == LeafPrior::Horseshoe {
            let half_cauchy = |scale: F, rng: &mut R| (F::std_normal(rng) / F::std_normal(rng)).abs() * scale;
            for l in state.shrinkage.lambda.iter_mut() {
                *l = half_cauchy(F::one(), rng).max(F::of(SCALE_FLOOR));
            }
            state.shrinkage.tau = half_cauchy(h.tau0, rng).max(F::of(SCALE_FLOOR));
            state.shrinkage.c2 = draw_inv_gamma(half * h.nu_c, half * h.nu_c * h.s_c * h.s_c, rng)?;
        }
        state.shrinkage.sigma2 = match self.options.fixed_sigma2 {
            Some(s) => s,
            None => draw_inv_gamma(half * h.nu, half * h.nu * h.noise_scale, rng)?,
        };
        for j in 0..k {
            // u ~ Beta(1, b) by inversion: u = 1 - (1 - V)^(1/b)
            let v = F::unit(rng);
            let u = F::one() - (F::one() - v).powf(F::one() / F::of(ETA_BETA_B));
            debug_assert_eq!(ETA_BETA_A, 1.0);
            let u = u.min(F::one() - F::epsilon()).max(F::min_positive_value());
            state.split.eta[j] = F::of(r as f64) * u / (F::one() - u);
            state.split.theta[j] = draw_theta(state.split.eta[j], &vec![0; r], rng)?;
            let v = self.leaf_variance(&state, j);
            let mut trees = Vec::with_capacity(h.trees);
            for _ in 0..h.trees {
                let mut tree = sample_tree(&h.tree_prior, &state.split.theta[j], rng);
                for leaf in tree.leaves() {
                    tree.set_jump(leaf, draw_normal(F::zero(), v, rng)?);
                }
                trees.push(tree);
            }
            let assignments = trees
                .iter()
                .map(|t| LeafAssignment::build(t, &self.z, self.n()))
                .collect();
            state.ensembles[j] = Ensemble { trees, assignments };
        }
        state.fit = self.recompute_fit(&state);
        Ok(state)
    }

    /// `y_i = f_i + sigma e_i`.
    pub fn sample_response<R: Rng + ?Sized>(&self, state: &ChainState<F>, rng: &mut R) -> Vec<F> {
        let sd = state.shrinkage.sigma2.sqrt();
        state.fit.iter().map(|&f| f + sd * F::std_normal(rng)).collect()
    }

    /// Fit computed from the trees, ignoring the cache.
    pub fn recompute_fit(&self, state: &ChainState<F>) -> Vec<F> {
        let mut fit = vec![F::zero(); self.n()];
        for (j, ens) in state.ensembles.iter().enumerate() {
            let x = &self.x[j];
            for (tree, assignment) in ens.trees.iter().zip(&ens.assignments) {
                for (i, f) in fit.iter_mut().enumerate() {
                    *f += x[i] * tree.jump(assignment.leaf_of(i));
                }
            }
        }
        fit
    }

    /// Check the cached fit against a recomputation.
    pub fn check_coherence(&self, state: &ChainState<F>) -> Result<()> {
        let fresh = self.recompute_fit(state);
        let tol = F::of(1e-8);
        for (i, (&cached, &f)) in state.fit.iter().zip(&fresh).enumerate() {
            if !((cached - f).abs() < tol * (F::one() + f.abs())) {
                return Err(Error::Numerical {
                    sweep: state.sweep,
                    message: format!("cached fit {cached} differs from recomputed {f} at row {}", i + 1),
                });
            }
        }
        Ok(())
    }

    /// Leave-one-tree-out residuals for tree `m` of ensemble `j`.
    pub fn partial_residuals(&self, state: &ChainState<F>, j: usize, m: usize) -> Vec<F> {
        let ens = &state.ensembles[j];
        let (tree, assignment) = (&ens.trees[m], &ens.assignments[m]);
        let x = &self.x[j];
        (0..self.n())
            .map(|i| self.y[i] - state.fit[i] + x[i] * tree.jump(assignment.leaf_of(i)))
            .collect()
    }

    /// Sufficient statistics of leaf `leaf` of tree `(j, m)`, with residuals
    /// taken against the current cached fit.
    fn leaf_stats(&self, state: &ChainState<F>, j: usize, members: &[u32], jump: F) -> (F, F) {
        let x = &self.x[j];
        let (mut a, mut b) = (F::zero(), F::zero());
        for &i in members {
            let i = i as usize;
            let xi = x[i];
            let r = self.y[i] - state.fit[i] + xi * jump;
            a += xi * xi;
            b += xi * r;
        }
        (a, b)
    }

    /// Full log marginal likelihood of the partial residuals under tree
    /// `(j, m)` with its jumps integrated out.
    pub fn tree_log_marginal(&self, state: &ChainState<F>, j: usize, m: usize) -> F {
        let r = self.partial_residuals(state, j, m);
        let ens = &state.ensembles[j];
        let s2 = self.leaf_variance(state, j);
        let x = &self.x[j];
        ens.trees[m]
            .leaves()
            .into_iter()
            .map(|leaf| {
                let mut stats = SufficientStats::zero();
                for &i in ens.assignments[m].members(leaf) {
                    stats.push(x[i as usize], r[i as usize]);
                }
                leaf_log_marginal(&stats, s2, state.shrinkage.sigma2)
            })
            .sum()
    }

    /// One GROW/PRUNE Metropolis–Hastings step on tree `(j, m)` with the
    /// jumps integrated out. Returns whether the move was accepted.
    pub fn mh_tree_update<R: Rng + ?Sized>(
        &self,
        state: &mut ChainState<F>,
        j: usize,
        m: usize,
        rng: &mut R,
        diag: &mut Diagnostics,
    ) -> bool {
        let s2 = self.leaf_variance(state, j);
        let sigma2 = state.shrinkage.sigma2;
        let prior = &self.hyper.tree_prior;
        let tree = &state.ensembles[j].trees[m];
        let grow = tree.is_stump() || F::unit(rng) < F::of(crate::tree::GROW_PROBABILITY);
        let marg = |a: F, b: F| leaf_log_marginal_reduced(a, b, s2, sigma2);
        if grow {
            diag.grow_proposed += 1;
            let assignment = &state.ensembles[j].assignments[m];
            let mv = match self.options.cutpoints {
                CutpointMode::Uniform => Some(propose_grow(tree, &state.split.theta[j], rng)),
                CutpointMode::Midpoints => {
                    propose_grow_midpoints(tree, &state.split.theta[j], assignment, &self.z, rng)
                }
            };
            let Some(mv) = mv else {
                diag.degenerate += 1;
                return false;
            };
            let depth = tree.node(mv.leaf).depth;
            let jump = tree.jump(mv.leaf);
            let x = &self.x[j];
            let column = &self.z[mv.rule.axis];
            let (mut al, mut bl, mut ar, mut br) = (F::zero(), F::zero(), F::zero(), F::zero());
            for &i in assignment.members(mv.leaf) {
                let i = i as usize;
                let xi = x[i];
                let r = self.y[i] - state.fit[i] + xi * jump;
                if mv.rule.goes_left(column[i]) {
                    al += xi * xi;
                    bl += xi * r;
                } else {
                    ar += xi * xi;
                    br += xi * r;
                }
            }
            let log_alpha = prior.log_split(depth) + F::of(2.0) * prior.log_stop(depth + 1)
                - prior.log_stop(depth)
                + mv.log_proposal_ratio
                + marg(al, bl)
                + marg(ar, br)
                - marg(al + ar, bl + br);
            if !self.accept(log_alpha, rng, diag) {
                return false;
            }
            let ens = &mut state.ensembles[j];
            let (l, r) = ens.trees[m]
                .grow(mv.leaf, mv.rule, jump, jump)
                .expect("proposal targets a leaf");
            ens.assignments[m].apply_grow(mv.leaf, l, r, &mv.rule, &self.z);
            diag.grow_accepted += 1;
            true
        } else {
            diag.prune_proposed += 1;
            let Some(mv) = propose_prune(tree, rng) else {
                diag.degenerate += 1;
                return false;
            };
            let (l, r) = match tree.node(mv.node).kind {
                NodeKind::Split { left, right, .. } => (left, right),
                NodeKind::Leaf { .. } => unreachable!("nog nodes are splits"),
            };
            let depth = tree.node(mv.node).depth;
            let assignment = &state.ensembles[j].assignments[m];
            let (al, bl) = self.leaf_stats(state, j, assignment.members(l), tree.jump(l));
            let (ar, br) = self.leaf_stats(state, j, assignment.members(r), tree.jump(r));
            let log_alpha = prior.log_stop(depth) - prior.log_split(depth) - F::of(2.0) * prior.log_stop(depth + 1)
                + mv.log_proposal_ratio
                + marg(al + ar, bl + br)
                - marg(al, bl)
                - marg(ar, br);
            if !self.accept(log_alpha, rng, diag) {
                return false;
            }
            self.collapse(state, j, m, mv.node, l, r);
            diag.prune_accepted += 1;
            true
        }
    }

    fn accept<R: Rng + ?Sized>(&self, log_alpha: F, rng: &mut R, diag: &mut Diagnostics) -> bool {
        if log_alpha.is_nan() || log_alpha == F::infinity() {
            diag.degenerate += 1;
            return false;
        }
        log_alpha >= F::zero() || F::unit(rng).ln() < log_alpha
    }

    /// Prune `node`, removing the children's contributions from the fit so
    /// the cache agrees with the new leaf jump of zero.
    fn collapse(&self, state: &mut ChainState<F>, j: usize, m: usize, node: NodeId, l: NodeId, r: NodeId) {
        let x = &self.x[j];
        let ens = &mut state.ensembles[j];
        for child in [l, r] {
            let jump = ens.trees[m].jump(child);
            for &i in ens.assignments[m].members(child) {
                state.fit[i as usize] -= x[i as usize] * jump;
            }
        }
        ens.trees[m].prune(node, F::zero()).expect("nog node");
        ens.assignments[m].apply_prune(node, l, r);
    }

    /// Redraw every jump of tree `(j, m)` from its Gaussian full conditional
    /// and update the cached fit.
    pub fn redraw_leaves<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, j: usize, m: usize, rng: &mut R) -> Result<()> {
        let s2 = self.leaf_variance(state, j);
        let sigma2 = state.shrinkage.sigma2;
        let leaves = state.ensembles[j].trees[m].leaves();
        let x = &self.x[j];
        for leaf in leaves {
            let old = state.ensembles[j].trees[m].jump(leaf);
            let (a, b) = self.leaf_stats(state, j, state.ensembles[j].assignments[m].members(leaf), old);
            let mu = draw_leaf(a, b, s2, sigma2, rng)?;
            let delta = mu - old;
            let ens = &mut state.ensembles[j];
            ens.trees[m].set_jump(leaf, mu);
            for &i in ens.assignments[m].members(leaf) {
                state.fit[i as usize] += x[i as usize] * delta;
            }
        }
        Ok(())
    }

    /// Conjugate Dirichlet draw of `theta_j` given the split counts.
    pub fn update_theta<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, j: usize, rng: &mut R) -> Result<()> {
        let counts = state.ensembles[j].split_counts(self.r());
        state.split.theta[j] = draw_theta(state.split.eta[j], &counts, rng)?;
        Ok(())
    }

    /// Random-walk MH on `logit(u_j)` with `theta_j` integrated out.
    pub fn update_eta<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, j: usize, rng: &mut R) -> bool {
        let counts = state.ensembles[j].split_counts(self.r());
        let (eta, accepted) = eta_mh_step(state.split.eta[j], &counts, self.options.eta_step, rng);
        state.split.eta[j] = eta;
        accepted
    }

    fn jump_stats(&self, state: &ChainState<F>) -> Vec<JumpStats<F>> {
        state.ensembles.iter().map(Ensemble::jump_stats).collect()
    }

    fn log_slice(&self) -> SliceConfig<F> {
        self.options.slice.with_bounds(F::of(SCALE_FLOOR).ln(), F::infinity())
    }

    /// Slice-sample each `ln lambda_j`, then `ln tau`.
    pub fn update_lambda_tau<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let stats = self.jump_stats(state);
        let cfg = self.log_slice();
        let sh = &mut state.shrinkage;
        for (j, s) in stats.iter().enumerate() {
            let (tau, c2) = (sh.tau, sh.c2);
            let x = slice_sample(|x| log_lambda_target(x, s, tau, c2), sh.lambda[j].ln(), &cfg, rng)?;
            sh.lambda[j] = x.exp();
        }
        let (c2, tau0) = (sh.c2, self.hyper.tau0);
        let lambda = sh.lambda.clone();
        let x = slice_sample(|x| log_tau_target(x, &stats, &lambda, c2, tau0), sh.tau.ln(), &cfg, rng)?;
        sh.tau = x.exp();
        Ok(())
    }

    pub fn update_c2<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        let stats = self.jump_stats(state);
        let h = &self.hyper;
        let sh = &mut state.shrinkage;
        sh.c2 = match self.options.c2_update {
            C2Update::Conjugate => draw_c2_conjugate(&stats, &sh.lambda, sh.tau, h.nu_c, h.s_c, rng)?,
            C2Update::Exact => {
                let cfg = self.options.slice;
                let (lambda, tau) = (&sh.lambda, sh.tau);
                let x = slice_sample(
                    |x| log_c2_target(x, &stats, lambda, tau, h.nu_c, h.s_c),
                    sh.c2.ln(),
                    &cfg,
                    rng,
                )?;
                x.exp()
            }
        };
        Ok(())
    }

    pub fn update_sigma2<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, rng: &mut R) -> Result<()> {
        if let Some(s) = self.options.fixed_sigma2 {
            state.shrinkage.sigma2 = s;
            return Ok(());
        }
        let rss: F = self.y.iter().zip(&state.fit).map(|(&y, &f)| (y - f) * (y - f)).sum();
        state.shrinkage.sigma2 = draw_sigma2(rss, self.n(), self.hyper.nu, self.hyper.noise_scale, rng)?;
        Ok(())
    }

    /// One full sweep: every tree (MH then jump redraw), then for each
    /// ensemble `eta` and `theta`, then `lambda`, `tau`, `c^2` and
    /// `sigma^2`.
    pub fn sweep<R: Rng + ?Sized>(&self, state: &mut ChainState<F>, rng: &mut R, diag: &mut Diagnostics) -> Result<()> {
        let tag = |e: Error, sweep: usize| match e {
            Error::Numerical { .. } => e,
            other => Error::Numerical {
                sweep,
                message: other.to_string(),
            },
        };
        let sweep = state.sweep;
        for j in 0..self.num_ensembles() {
            for m in 0..state.ensembles[j].trees.len() {
                self.mh_tree_update(state, j, m, rng, diag);
                self.redraw_leaves(state, j, m, rng).map_err(|e| tag(e, sweep))?;
            }
        }
        for j in 0..self.num_ensembles() {
            diag.eta_proposed += 1;
            if self.update_eta(state, j, rng) {
                diag.eta_accepted += 1;
            }
            self.update_theta(state, j, rng).map_err(|e| tag(e, sweep))?;
        }
        if self.options.leaf_prior == LeafPrior::Horseshoe {
            self.update_lambda_tau(state, rng).map_err(|e| tag(e, sweep))?;
            self.update_c2(state, rng).map_err(|e| tag(e, sweep))?;
        }
        self.update_sigma2(state, rng).map_err(|e| tag(e, sweep))?;
        state.sweep += 1;

        if let Some(i) = state.fit.iter().position(|f| !f.is_finite()) {
            return Err(Error::Numerical {
                sweep,
                message: format!("non-finite fit at row {}", i + 1),
            });
        }
        let k = self.options.coherence_every;
        if k > 0 && state.sweep.is_multiple_of(k) {
            self.check_coherence(state)?;
            state.fit = self.recompute_fit(state);
        }
        Ok(())
    }

    /// `beta_j` at every point of a column-major grid, for all ensembles.
    pub fn evaluate_grid(&self, state: &ChainState<F>, grid: &[Vec<F>]) -> Vec<Vec<F>> {
        let g = grid.first().map_or(0, Vec::len);
        state
            .ensembles
            .iter()
            .map(|ens| {
                let mut out = vec![F::zero(); g];
                for tree in &ens.trees {
                    for (k, v) in out.iter_mut().enumerate() {
                        *v += tree.jump(tree.leaf_for_column(grid, k));
                    }
                }
                out
            })
            .collect()
    }
}
