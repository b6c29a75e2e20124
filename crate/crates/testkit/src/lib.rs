//! Independent numerical oracles used by the test suites: adaptive
//! quadrature, Kolmogorov–Smirnov and chi-square tests, and moment helpers.
//!
//! Nothing in here depends on the sampler crate, so the checks built on top
//! of it stay independent of the code paths they validate.

use statrs::distribution::{ChiSquared, ContinuousCDF};

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<G: Fn(f64) -> f64>(f: &G, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = h * XGK[k];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

const MAX_INTERVALS: usize = 4000;

/// Global adaptive subdivision: repeatedly bisect the interval with the
/// largest error estimate until the summed estimate falls below `tol`.
fn adapt<G: Fn(f64) -> f64>(f: &G, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    for _ in 0..MAX_INTERVALS {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= tol {
            break;
        }
        let (worst, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let m = 0.5 * (lo + hi);
        if m <= lo || m >= hi {
            parts.push((lo, hi, gk15(f, lo, hi).0, 0.0));
            continue;
        }
        let (v1, e1) = gk15(f, lo, m);
        let (v2, e2) = gk15(f, m, hi);
        parts.push((lo, m, v1, e1));
        parts.push((m, hi, v2, e2));
    }
    parts.iter().map(|p| p.2).sum()
}

/// Adaptive Gauss–Kronrod quadrature of `f` over the finite interval `[a, b]`.
pub fn integrate<G: Fn(f64) -> f64>(f: G, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol)
}

/// Quadrature over `[a, b]` after splitting at the supplied interior points;
/// useful for peaked or heavy-tailed integrands.
pub fn integrate_pieces<G: Fn(f64) -> f64>(f: G, breaks: &[f64], tol: f64) -> f64 {
    let pieces = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| adapt(&f, w[0], w[1], tol / pieces))
        .sum()
}

/// Asymptotic Kolmogorov survival function with the usual small-sample
/// correction on the effective size.
fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let sq = n_eff.sqrt();
    let lam = (sq + 0.12 + 0.11 / sq) * d;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lam * lam).exp();
        sum += term;
        if term.abs() < 1e-14 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `sample` against a continuous CDF. Returns `(D, p)`.
pub fn ks_one_sample<C: Fn(f64) -> f64>(sample: &[f64], cdf: C) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    (d, kolmogorov_pvalue(d, n))
}

/// Two-sample KS test. Returns `(D, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.total_cmp(q));
    xb.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    (d, kolmogorov_pvalue(d, n_eff))
}

/// Two-sample chi-square homogeneity test on integer-valued samples.
/// Categories with small expected counts are pooled into their neighbours.
/// Returns `(statistic, p)`.
pub fn chi2_two_sample(a: &[usize], b: &[usize]) -> (f64, f64) {
    let max = a.iter().chain(b).copied().max().unwrap_or(0);
    let mut ca = vec![0.0; max + 1];
    let mut cb = vec![0.0; max + 1];
    for &v in a {
        ca[v] += 1.0;
    }
    for &v in b {
        cb[v] += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    // pool adjacent bins until each has at least 10 pooled observations
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut acc_a, mut acc_b) = (0.0, 0.0);
    for k in 0..=max {
        acc_a += ca[k];
        acc_b += cb[k];
        if acc_a + acc_b >= 10.0 {
            bins.push((acc_a, acc_b));
            acc_a = 0.0;
            acc_b = 0.0;
        }
    }
    if acc_a + acc_b > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc_a;
                last.1 += acc_b;
            }
            None => bins.push((acc_a, acc_b)),
        }
    }
    if bins.len() < 2 {
        return (0.0, 1.0);
    }
    let total = na + nb;
    let mut stat = 0.0;
    for &(oa, ob) in &bins {
        let col = oa + ob;
        let ea = col * na / total;
        let eb = col * nb / total;
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = (bins.len() - 1) as f64;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    (stat, p)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Standard error of the sample mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the unbiased sample variance, from the fourth central
/// moment.
pub fn variance_std_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n).sqrt()
}

/// Total-variation distance between two probability vectors.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
