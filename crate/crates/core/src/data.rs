//! Datasets: synthetic generators, noise-covariate augmentation and CSV I/O.
//!
//! CSV layout: a header row naming `y`, the covariates `x_*`, the modifiers
//! `z_*`, and optionally `beta_true_0 .. beta_true_p`. Numbers use `.` as the
//! decimal separator and no grouping. Columns are matched by prefix, so
//! order does not matter on input; output order is `y, x_*, z_*, beta_true_*`.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column-major data set of `N` rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<F> {
    pub y: Vec<F>,
    /// `p` covariate columns.
    pub x: Vec<Vec<F>>,
    /// `R` modifier columns with entries in `[0, 1]`.
    pub z: Vec<Vec<F>>,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    /// True coefficient values `beta_j(z_i)`, `p + 1` columns, when known.
    pub beta_true: Option<Vec<Vec<F>>>,
    /// `(min, max)` per modifier when the columns were min-max rescaled.
    pub z_scaling: Option<Vec<(F, F)>>,
}

fn default_names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}")).collect()
}

impl<F: Real> Dataset<F> {
    pub fn new(y: Vec<F>, x: Vec<Vec<F>>, z: Vec<Vec<F>>) -> Result<Self> {
        let data = Self {
            x_names: default_names("x", x.len()),
            z_names: default_names("z", z.len()),
            y,
            x,
            z,
            beta_true: None,
            z_scaling: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.len()
    }

    pub fn r(&self) -> usize {
        self.z.len()
    }

    pub fn z_row(&self, i: usize) -> Vec<F> {
        self.z.iter().map(|c| c[i]).collect()
    }

    pub fn z_rows(&self) -> Vec<Vec<F>> {
        (0..self.n()).map(|i| self.z_row(i)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.x_names.len() != self.p() || self.z_names.len() != self.r() {
            return Err(Error::Data("column names do not match column counts".into()));
        }
        let finite = |name: &str, col: &[F]| -> Result<()> {
            if col.len() != n {
                return Err(Error::Data(format!("column {name} has {} rows, expected {n}", col.len())));
            }
            match col.iter().position(|v| !v.is_finite()) {
                Some(i) => Err(Error::Data(format!("row {}, column {name}: non-finite value", i + 1))),
                None => Ok(()),
            }
        };
        finite("y", &self.y)?;
        for (name, col) in self.x_names.iter().zip(&self.x) {
            finite(name, col)?;
        }
        for (name, col) in self.z_names.iter().zip(&self.z) {
            finite(name, col)?;
            if let Some(i) = col.iter().position(|&v| v < F::zero() || v > F::one()) {
                return Err(Error::Data(format!(
                    "row {}, column {name}: modifier {} outside [0, 1]",
                    i + 1,
                    col[i]
                )));
            }
        }
        if let Some(beta) = &self.beta_true {
            if beta.len() != self.p() + 1 {
                return Err(Error::Data(format!(
                    "expected {} beta_true columns, found {}",
                    self.p() + 1,
                    beta.len()
                )));
            }
            for (j, col) in beta.iter().enumerate() {
                finite(&format!("beta_true_{j}"), col)?;
            }
        }
        Ok(())
    }

    /// Write in the documented CSV layout.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["y".to_string()];
        header.extend(self.x_names.iter().cloned());
        header.extend(self.z_names.iter().cloned());
        if let Some(beta) = &self.beta_true {
            header.extend((0..beta.len()).map(|j| format!("beta_true_{j}")));
        }
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row = vec![fmt_num(self.y[i])];
            row.extend(self.x.iter().map(|c| fmt_num(c[i])));
            row.extend(self.z.iter().map(|c| fmt_num(c[i])));
            if let Some(beta) = &self.beta_true {
                row.extend(beta.iter().map(|c| fmt_num(c[i])));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
pub fn fmt_num<F: Real>(x: F) -> String {
    format!("{x:?}")
}

/// Options for [`load_csv`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Min-max rescale each modifier column to `[0, 1]`.
    pub rescale_z: bool,
    /// Accept files without a `y` column (query grids); `y` is then zero.
    pub allow_missing_y: bool,
}

enum Role {
    Y,
    X,
    Z,
    Beta(usize),
}

/// Parse a data set from CSV, validating every cell.
pub fn load_csv<F: Real>(path: impl AsRef<Path>, schema: CsvSchema) -> Result<Dataset<F>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let mut roles = Vec::with_capacity(headers.len());
    let (mut x_names, mut z_names) = (Vec::new(), Vec::new());
    let mut beta_idx = Vec::new();
    let mut has_y = false;
    for name in headers.iter() {
        let name = name.trim();
        let role = if name == "y" {
            if has_y {
                return Err(Error::Data("duplicate y column".into()));
            }
            has_y = true;
            Role::Y
        } else if let Some(j) = name.strip_prefix("beta_true_") {
            let j: usize = j
                .parse()
                .map_err(|_| Error::Data(format!("bad beta_true column name {name}")))?;
            beta_idx.push(j);
            Role::Beta(j)
        } else if name.starts_with("x_") {
            x_names.push(name.to_string());
            Role::X
        } else if name.starts_with("z_") {
            z_names.push(name.to_string());
            Role::Z
        } else {
            return Err(Error::Data(format!("unrecognised column {name:?}")));
        };
        roles.push(role);
    }
    if !has_y && !schema.allow_missing_y {
        return Err(Error::Data("missing column y".into()));
    }
    if z_names.is_empty() {
        return Err(Error::Data("no modifier columns z_*".into()));
    }
    let mut sorted_beta = beta_idx.clone();
    sorted_beta.sort_unstable();
    if !beta_idx.is_empty() && sorted_beta != (0..beta_idx.len()).collect::<Vec<_>>() {
        return Err(Error::Data("beta_true columns must be numbered 0..p".into()));
    }

    let mut y = Vec::new();
    let mut x: Vec<Vec<F>> = vec![Vec::new(); x_names.len()];
    let mut z: Vec<Vec<F>> = vec![Vec::new(); z_names.len()];
    let mut beta: Vec<Vec<F>> = vec![Vec::new(); beta_idx.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", row + 1)))?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!(
                "row {}: expected {} fields, found {}",
                row + 1,
                headers.len(),
                record.len()
            )));
        }
        let (mut xi, mut zi) = (0, 0);
        for ((cell, role), name) in record.iter().zip(&roles).zip(headers.iter()) {
            let value: F = cell.trim().parse().map_err(|_| {
                Error::Data(format!("row {}, column {name}: cannot parse {cell:?}", row + 1))
            })?;
            if !value.is_finite() {
                return Err(Error::Data(format!("row {}, column {name}: non-finite value", row + 1)));
            }
            match role {
                Role::Y => y.push(value),
                Role::X => {
                    x[xi].push(value);
                    xi += 1;
                }
                Role::Z => {
                    z[zi].push(value);
                    zi += 1;
                }
                Role::Beta(j) => beta[*j].push(value),
            }
        }
    }
    let n = z[0].len();
    if n == 0 {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    if !has_y {
        y = vec![F::zero(); n];
    }
    let z_scaling = if schema.rescale_z {
        let mut scaling = Vec::with_capacity(z.len());
        for col in &mut z {
            let lo = col.iter().copied().fold(F::infinity(), F::min);
            let hi = col.iter().copied().fold(F::neg_infinity(), F::max);
            let span = hi - lo;
            for v in col.iter_mut() {
                *v = if span > F::zero() { (*v - lo) / span } else { F::zero() };
            }
            scaling.push((lo, hi));
        }
        Some(scaling)
    } else {
        None
    };
    let data = Dataset {
        y,
        x,
        z,
        x_names,
        z_names,
        beta_true: (!beta.is_empty()).then_some(beta),
        z_scaling,
    };
    data.validate()?;
    Ok(data)
}

/// Which printed form of the intercept function to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Beta0Form {
    /// `3 z1 + (2 - 5 1{z2 > .5}) sin(pi z1) - 2 1{z2 > .5}`.
    #[default]
    Repaired,
    /// `3 z1 + 2 - 5 1{z2 > .5} sin(pi z1) - 2 1{z2 > .5}`.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Three covariates, all active.
    Exp1,
    /// Fifty covariates, the first three active.
    Exp2,
    /// User-chosen `p` and `R` with the same coefficient functions.
    Custom,
}

/// Synthetic data-generating process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub experiment: Experiment,
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    pub r: usize,
    /// Covariate correlation `Sigma_ij = rho^|i - j|`.
    pub rho: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub beta0: Beta0Form,
}

impl DgpSpec {
    pub fn exp1() -> Self {
        Self {
            experiment: Experiment::Exp1,
            n_train: 1000,
            n_test: 200,
            p: 3,
            r: 20,
            rho: 0.5,
            noise_sd: 1.0,
            seed: 0,
            beta0: Beta0Form::Repaired,
        }
    }

    pub fn exp2() -> Self {
        Self {
            experiment: Experiment::Exp2,
            p: 50,
            ..Self::exp1()
        }
    }

    pub fn for_experiment(experiment: Experiment) -> Self {
        match experiment {
            Experiment::Exp1 => Self::exp1(),
            Experiment::Exp2 => Self::exp2(),
            Experiment::Custom => Self {
                experiment,
                ..Self::exp1()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.p == 0 || self.r == 0 {
            return Err(Error::Config("n_train, p and R must all be >= 1".into()));
        }
        let needed = if self.p >= 3 { 5 } else { 2 };
        if self.r < needed {
            return Err(Error::Config(format!(
                "the coefficient functions for p = {} use {needed} modifiers, R = {}",
                self.p, self.r
            )));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho = {} must lie in (-1, 1)", self.rho)));
        }
        if !(self.noise_sd >= 0.0) {
            return Err(Error::Config("noise_sd must be non-negative".into()));
        }
        Ok(())
    }
}

fn ind(cond: bool) -> f64 {
    if cond {
        1.0
    } else {
        0.0
    }
}

/// True coefficient function `beta_j(z)`; zero for `j >= 4`.
pub fn true_beta<F: Real>(j: usize, z: &[F], form: Beta0Form) -> Result<F> {
    let need = match j {
        0 => 2,
        1 | 2 => 1,
        3 => 5,
        _ => 0,
    };
    if z.len() < need {
        return Err(Error::Input(format!("beta_{j} needs {need} modifiers, got {}", z.len())));
    }
    let zf = |r: usize| z[r].as_f64();
    let v = match j {
        0 => {
            let (z1, hi) = (zf(0), ind(zf(1) > 0.5));
            match form {
                Beta0Form::Repaired => 3.0 * z1 + (2.0 - 5.0 * hi) * (PI * z1).sin() - 2.0 * hi,
                Beta0Form::Raw => 3.0 * z1 + 2.0 - 5.0 * hi * (PI * z1).sin() - 2.0 * hi,
            }
        }
        1 => {
            let z1 = zf(0);
            (3.0 - 3.0 * z1 * z1) * ind(z1 > 0.6) - 10.0 * z1.sqrt() * ind(z1 < 0.25)
        }
        2 => 1.0,
        3 => {
            10.0 * (PI * zf(0) * zf(1)).sin()
                + 20.0 * (zf(2) - 0.5).powi(2)
                + 10.0 * zf(3)
                + 5.0 * zf(4)
        }
        _ => 0.0,
    };
    Ok(F::of(v))
}

fn simulate<F: Real, R: Rng + ?Sized>(spec: &DgpSpec, n: usize, rng: &mut R) -> Result<Dataset<F>> {
    let (p, r) = (spec.p, spec.r);
    let rho = spec.rho;
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = vec![Vec::with_capacity(n); p];
    let mut z = vec![Vec::with_capacity(n); r];
    let mut y = Vec::with_capacity(n);
    let mut beta = vec![Vec::with_capacity(n); p + 1];
    let mut xi = vec![0.0; p];
    let mut zi = vec![0.0; r];
    for _ in 0..n {
        // Cholesky factor of the AR(1) covariance applied to iid normals
        for k in 0..p {
            let e = f64::std_normal(rng);
            xi[k] = if k == 0 { e } else { rho * xi[k - 1] + innov * e };
        }
        for v in zi.iter_mut() {
            *v = rng.random::<f64>();
        }
        let mut mean = true_beta::<f64>(0, &zi, spec.beta0)?;
        beta[0].push(F::of(mean));
        for j in 1..=p {
            let b = true_beta::<f64>(j, &zi, spec.beta0)?;
            mean += b * xi[j - 1];
            beta[j].push(F::of(b));
        }
        y.push(F::of(mean + spec.noise_sd * f64::std_normal(rng)));
        for k in 0..p {
            x[k].push(F::of(xi[k]));
        }
        for k in 0..r {
            z[k].push(F::of(zi[k]));
        }
    }
    let mut data = Dataset::new(y, x, z)?;
    data.beta_true = Some(beta);
    Ok(data)
}

/// Draw independent training and test sets. True coefficients are recorded
/// for both; the test modifiers double as the evaluation grid.
pub fn generate<F: Real, R: Rng + ?Sized>(spec: &DgpSpec, rng: &mut R) -> Result<(Dataset<F>, Dataset<F>)> {
    spec.validate()?;
    let train = simulate(spec, spec.n_train, rng)?;
    let test = simulate(spec, spec.n_test, rng)?;
    Ok((train, test))
}

/// Append `k` independent N(0, 1) covariates named `x_noise_1..k`. The
/// response is untouched; known true coefficients gain zero columns.
pub fn augment_noise_covariates<F: Real, R: Rng + ?Sized>(
    data: &Dataset<F>,
    k: usize,
    rng: &mut R,
) -> Dataset<F> {
    let mut out = data.clone();
    for c in 1..=k {
        out.x.push((0..data.n()).map(|_| F::std_normal(rng)).collect());
        out.x_names.push(format!("x_noise_{c}"));
        if let Some(beta) = &mut out.beta_true {
            beta.push(vec![F::zero(); data.n()]);
        }
    }
    out
}
