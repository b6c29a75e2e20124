//! Random-number streams and the primitive stochastic kernels the sampler
//! is assembled from.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Seeded, stream-separated generator. Each chain owns one stream; the
/// sequence depends only on `(seed, stream)` and the call sequence.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Tuning of the stepping-out/shrinkage slice sampler.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig<F> {
    /// Initial bracket width.
    pub width: F,
    /// Upper bound on the number of stepping-out expansions.
    pub max_steps: u32,
    /// Support of the target; points outside have zero density.
    pub lower: F,
    pub upper: F,
}

impl<F: Real> Default for SliceConfig<F> {
    fn default() -> Self {
        Self {
            width: F::one(),
            max_steps: 32,
            lower: F::neg_infinity(),
            upper: F::infinity(),
        }
    }
}

impl<F: Real> SliceConfig<F> {
    pub fn with_bounds(self, lower: F, upper: F) -> Self {
        Self {
            lower,
            upper,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > F::zero()) || !self.width.is_finite() {
            return Err(Error::Config(format!("slice width {} must be positive", self.width)));
        }
        if !(self.lower < self.upper) {
            return Err(Error::Config("slice domain is empty".into()));
        }
        Ok(())
    }
}

const MAX_SHRINKS: usize = 1000;

/// One transition of Neal's univariate slice sampler with stepping out and
/// shrinkage. `log_target` is the unnormalised log density.
pub fn slice_sample<F, R, T>(mut log_target: T, x0: F, cfg: &SliceConfig<F>, rng: &mut R) -> Result<F>
where
    F: Real,
    R: Rng + ?Sized,
    T: FnMut(F) -> F,
{
    let mut eval = |x: F| {
        if x < cfg.lower || x > cfg.upper {
            F::neg_infinity()
        } else {
            log_target(x)
        }
    };
    let f0 = eval(x0);
    if f0.is_nan() || !f0.is_finite() {
        return Err(Error::State(format!(
            "slice sampler started at {x0} where the log target is {f0}"
        )));
    }
    let level = f0 + open_unit::<F, _>(rng).ln();

    let w = cfg.width;
    let mut lo = x0 - F::unit(rng) * w;
    let mut hi = lo + w;
    let m = cfg.max_steps.max(1);
    let mut left_steps = (F::unit(rng) * F::of(m as f64)).to_u32().unwrap_or(0).min(m - 1);
    let mut right_steps = m - 1 - left_steps;
    while left_steps > 0 && eval(lo) > level {
        lo -= w;
        left_steps -= 1;
    }
    while right_steps > 0 && eval(hi) > level {
        hi += w;
        right_steps -= 1;
    }

    for _ in 0..MAX_SHRINKS {
        let x1 = lo + F::unit(rng) * (hi - lo);
        let f1 = eval(x1);
        if f1 > level {
            return Ok(x1);
        }
        if x1 < x0 {
            lo = x1;
        } else {
            hi = x1;
        }
    }
    Err(Error::Kernel(format!(
        "slice shrinkage found no point above level {level} after {MAX_SHRINKS} contractions"
    )))
}

fn open_unit<F: Real, R: Rng + ?Sized>(rng: &mut R) -> F {
    loop {
        let u = F::unit(rng);
        if u > F::zero() {
            return u;
        }
    }
}

/// Log of a Gamma(shape, 1) draw, stable for small shapes through
/// `G(a) = G(a + 1) * U^(1/a)`.
fn log_gamma_draw<F: Real, R: Rng + ?Sized>(shape: F, rng: &mut R) -> Result<F> {
    if !(shape > F::zero()) || !shape.is_finite() {
        return Err(Error::Domain(format!("gamma shape {shape} must be positive")));
    }
    if shape >= F::one() {
        let g = F::gamma(shape, rng).ok_or_else(|| Error::Domain(format!("gamma shape {shape}")))?;
        Ok(g.ln())
    } else {
        let g = F::gamma(shape + F::one(), rng)
            .ok_or_else(|| Error::Domain(format!("gamma shape {shape}")))?;
        Ok(g.ln() + open_unit::<F, _>(rng).ln() / shape)
    }
}

/// Dirichlet draw through normalised Gamma variates. Entries are floored at
/// the smallest positive normal value so the result stays strictly positive.
pub fn draw_dirichlet<F: Real, R: Rng + ?Sized>(alpha: &[F], rng: &mut R) -> Result<Vec<F>> {
    if alpha.is_empty() {
        return Err(Error::Domain("empty Dirichlet parameter".into()));
    }
    let logs = alpha
        .iter()
        .map(|&a| log_gamma_draw(a, rng))
        .collect::<Result<Vec<F>>>()?;
    let max = logs.iter().copied().fold(F::neg_infinity(), F::max);
    let mut theta: Vec<F> = logs
        .iter()
        .map(|&l| (l - max).exp().max(F::min_positive_value()))
        .collect();
    let total: F = theta.iter().copied().sum();
    for t in &mut theta {
        *t /= total;
    }
    Ok(theta)
}

/// Draw from IG(shape, rate), i.e. `rate / Gamma(shape, 1)`.
pub fn draw_inv_gamma<F: Real, R: Rng + ?Sized>(shape: F, rate: F, rng: &mut R) -> Result<F> {
    if !(rate > F::zero()) || !rate.is_finite() {
        return Err(Error::Domain(format!("inverse-gamma rate {rate} must be positive")));
    }
    let x = rate / log_gamma_draw(shape, rng)?.exp();
    if x.is_finite() && x > F::zero() {
        Ok(x)
    } else {
        Err(Error::Domain(format!("inverse-gamma draw overflowed (shape {shape}, rate {rate})")))
    }
}

/// Draw from N(mean, var).
pub fn draw_normal<F: Real, R: Rng + ?Sized>(mean: F, var: F, rng: &mut R) -> Result<F> {
    if !(var >= F::zero()) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::Domain(format!("normal({mean}, {var}) is not a valid distribution")));
    }
    Ok(mean + var.sqrt() * F::std_normal(rng))
}

/// Zero-based index drawn with probabilities proportional to `theta`.
pub fn draw_multinomial_index<F: Real, R: Rng + ?Sized>(theta: &[F], rng: &mut R) -> usize {
    let total: F = theta.iter().copied().sum();
    let target = F::unit(rng) * total;
    let mut acc = F::zero();
    let mut last_positive = 0;
    for (k, &t) in theta.iter().enumerate() {
        if t > F::zero() {
            last_positive = k;
        }
        acc += t;
        if target < acc {
            return k;
        }
    }
    last_positive
}
