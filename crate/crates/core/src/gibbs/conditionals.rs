//! Closed-form conditionals and one-dimensional targets used by the sweep.
//! Everything here is a pure function of sufficient statistics so it can be
//! tested in isolation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::prior::{half_cauchy_unchecked, inv_gamma_unchecked, log_dirichlet_multinomial, rhs_variance};
use crate::sampling::{draw_dirichlet, draw_inv_gamma, draw_normal};
use crate::scalar::Real;

/// Per-leaf sufficient statistics of the single-leaf regression
/// `r_i = x_i mu + sigma e_i`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SufficientStats<F> {
    /// `sum x_i^2`
    pub a: F,
    /// `sum x_i r_i`
    pub b: F,
    pub n: usize,
    /// `sum r_i^2`
    pub rss: F,
}

impl<F: Real> SufficientStats<F> {
    pub fn from_slices(x: &[F], r: &[F]) -> Self {
        let mut s = Self::zero();
        for (&xi, &ri) in x.iter().zip(r) {
            s.push(xi, ri);
        }
        s
    }

    pub fn zero() -> Self {
        Self {
            a: F::zero(),
            b: F::zero(),
            n: 0,
            rss: F::zero(),
        }
    }

    #[inline]
    pub fn push(&mut self, x: F, r: F) {
        self.a += x * x;
        self.b += x * r;
        self.rss += r * r;
        self.n += 1;
    }
}

/// Log marginal likelihood of one leaf with its jump integrated out under
/// `mu ~ N(0, s2)`.
pub fn leaf_log_marginal<F: Real>(stats: &SufficientStats<F>, s2: F, sigma2: F) -> F {
    if stats.n == 0 {
        return F::zero();
    }
    let n = F::of(stats.n as f64);
    let half = F::of(0.5);
    -half * n * (F::TAU() * sigma2).ln() - half * stats.rss / sigma2
        + leaf_log_marginal_reduced(stats.a, stats.b, s2, sigma2)
}

/// The part of [`leaf_log_marginal`] that depends on the prior variance.
/// Differences of tree marginals only need this term.
#[inline]
pub fn leaf_log_marginal_reduced<F: Real>(a: F, b: F, s2: F, sigma2: F) -> F {
    let half = F::of(0.5);
    let denom = sigma2 + s2 * a;
    -half * (s2 * a / sigma2).ln_1p() + half * s2 * b * b / (sigma2 * denom)
}

/// Mean and variance of the Gaussian full conditional of a leaf jump.
pub fn leaf_posterior<F: Real>(a: F, b: F, s2: F, sigma2: F) -> (F, F) {
    if s2 <= F::zero() {
        return (F::zero(), F::zero());
    }
    // V = s2 sigma2 / (sigma2 + s2 A) avoids dividing by s2
    let denom = sigma2 + s2 * a;
    let var = s2 * sigma2 / denom;
    (s2 * b / denom, var)
}

pub fn draw_leaf<F: Real, R: Rng + ?Sized>(a: F, b: F, s2: F, sigma2: F, rng: &mut R) -> Result<F> {
    let (mean, var) = leaf_posterior(a, b, s2, sigma2);
    draw_normal(mean, var, rng)
}

/// `theta ~ Dirichlet(eta/R + N_1, ..., eta/R + N_R)`.
pub fn draw_theta<F: Real, R: Rng + ?Sized>(eta: F, counts: &[usize], rng: &mut R) -> Result<Vec<F>> {
    let alpha = eta / F::of(counts.len() as f64);
    let params: Vec<F> = counts.iter().map(|&c| alpha + F::of(c as f64)).collect();
    draw_dirichlet(&params, rng)
}

/// Log target of `w = logit(u)` with `u = eta / (eta + R)`, so `eta = R e^w`:
/// Dirichlet–multinomial factor, Beta(1, 1/2) prior on `u`, and the logit
/// Jacobian `u (1 - u)`.
pub fn eta_logit_target<F: Real>(w: F, counts: &[usize]) -> F {
    let eta = F::of(counts.len() as f64) * w.exp();
    if !(eta > F::zero()) || !eta.is_finite() {
        return F::neg_infinity();
    }
    // ln u and ln(1 - u) from w without cancellation
    let ln_u = -softplus(-w);
    let ln_1mu = -softplus(w);
    let a = F::of(crate::prior::ETA_BETA_A);
    let b = F::of(crate::prior::ETA_BETA_B);
    let log_beta = (a + b).ln_gamma() - a.ln_gamma() - b.ln_gamma()
        + (a - F::one()) * ln_u
        + (b - F::one()) * ln_1mu;
    log_dirichlet_multinomial(counts, eta) + log_beta + ln_u + ln_1mu
}

#[inline]
fn softplus<F: Real>(x: F) -> F {
    if x > F::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Random-walk Metropolis step on `logit(u)`. Returns the new `eta` and
/// whether the proposal was accepted. Non-finite targets reject.
pub fn eta_mh_step<F: Real, R: Rng + ?Sized>(eta: F, counts: &[usize], step: F, rng: &mut R) -> (F, bool) {
    let rf = F::of(counts.len() as f64);
    let w = (eta / rf).ln();
    let proposal = w + step * F::std_normal(rng);
    let log_alpha = eta_logit_target(proposal, counts) - eta_logit_target(w, counts);
    if log_alpha.is_nan() {
        return (eta, false);
    }
    let u = F::unit(rng);
    if u.ln() < log_alpha || log_alpha >= F::zero() {
        let eta_new = rf * proposal.exp();
        if eta_new > F::zero() && eta_new.is_finite() {
            return (eta_new, true);
        }
    }
    (eta, false)
}

/// Jump statistics of one ensemble: `S = sum mu^2`, `L` leaves, `M` trees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpStats<F> {
    pub sum_sq: F,
    pub leaves: usize,
    pub trees: usize,
}

/// `-1/2 (S / v + L ln v)` with per-leaf variance `v = s2 / M`.
#[inline]
pub fn jump_log_likelihood<F: Real>(stats: &JumpStats<F>, s2: F) -> F {
    let v = s2 / F::of(stats.trees as f64);
    if !(v > F::zero()) {
        return F::neg_infinity();
    }
    -F::of(0.5) * (stats.sum_sq / v + F::of(stats.leaves as f64) * v.ln())
}

/// Conditional log target of `x = ln lambda_j`.
pub fn log_lambda_target<F: Real>(x: F, stats: &JumpStats<F>, tau: F, c2: F) -> F {
    let lambda = x.exp();
    jump_log_likelihood(stats, rhs_variance(lambda, tau, c2)) + half_cauchy_unchecked(lambda, F::one()) + x
}

/// Conditional log target of `x = ln tau`.
pub fn log_tau_target<F: Real>(x: F, stats: &[JumpStats<F>], lambda: &[F], c2: F, tau0: F) -> F {
    let tau = x.exp();
    let mut out = half_cauchy_unchecked(tau, tau0) + x;
    for (s, &l) in stats.iter().zip(lambda) {
        out += jump_log_likelihood(s, rhs_variance(l, tau, c2));
    }
    out
}

/// Exact conditional log target of `x = ln c^2` under the regularized
/// horseshoe leaf variance.
pub fn log_c2_target<F: Real>(x: F, stats: &[JumpStats<F>], lambda: &[F], tau: F, nu_c: F, s_c: F) -> F {
    let c2 = x.exp();
    if !(c2 > F::zero()) || !c2.is_finite() {
        return F::neg_infinity();
    }
    let half = F::of(0.5);
    let mut out = inv_gamma_unchecked(c2, half * nu_c, half * nu_c * s_c * s_c) + x;
    for (s, &l) in stats.iter().zip(lambda) {
        out += jump_log_likelihood(s, rhs_variance(l, tau, c2));
    }
    out
}

/// Shape and rate of the conjugate `c^2` draw that treats the leaf variance
/// as the pure scale product `tau^2 lambda_j^2 c^2 / M_j`.
pub fn c2_conjugate_params<F: Real>(stats: &[JumpStats<F>], lambda: &[F], tau: F, nu_c: F, s_c: F) -> (F, F) {
    let half = F::of(0.5);
    let leaves: usize = stats.iter().map(|s| s.leaves).sum();
    let mut rate = nu_c * s_c * s_c;
    for (s, &l) in stats.iter().zip(lambda) {
        rate += F::of(s.trees as f64) * s.sum_sq / (tau * l).powi(2);
    }
    (half * (nu_c + F::of(leaves as f64)), half * rate)
}

pub fn draw_c2_conjugate<F: Real, R: Rng + ?Sized>(
    stats: &[JumpStats<F>],
    lambda: &[F],
    tau: F,
    nu_c: F,
    s_c: F,
    rng: &mut R,
) -> Result<F> {
    let (shape, rate) = c2_conjugate_params(stats, lambda, tau, nu_c, s_c);
    draw_inv_gamma(shape, rate, rng)
}

/// `sigma^2 ~ IG((nu + N) / 2, (nu * noise_scale + RSS) / 2)`.
pub fn draw_sigma2<F: Real, R: Rng + ?Sized>(rss: F, n: usize, nu: F, noise_scale: F, rng: &mut R) -> Result<F> {
    if !rss.is_finite() || rss < F::zero() {
        return Err(Error::State(format!("residual sum of squares {rss}")));
    }
    let half = F::of(0.5);
    draw_inv_gamma(half * (nu + F::of(n as f64)), half * (nu * noise_scale + rss), rng)
}
