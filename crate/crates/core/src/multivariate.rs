//! Elliptical flat-topped densities built on the Mahalanobis distance.
//!
//! With ρ = d_M(x, m, Σ), R = rⁿ and u = ρⁿ:
//!
//! * CM: c_M / (1 + exp((u − R)t))
//! * CL: c_L sinh(Rt) / (cosh(ut) + cosh(Rt))
//! * MU: c_L on the ellipsoid ρ ≤ r, zero outside.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{seeded_rng, Dataset};
use crate::error::{Error, Result};
use crate::specfun::{ln_gamma, softplus};
use crate::univariate::{al_log_shape, UnivariateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MvFamily {
    CM,
    CL,
    MU,
}

impl MvFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            MvFamily::CM => "CM",
            MvFamily::CL => "CL",
            MvFamily::MU => "MU",
        }
    }
}

impl fmt::Display for MvFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MvFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CM" => Ok(MvFamily::CM),
            "CL" => Ok(MvFamily::CL),
            "MU" => Ok(MvFamily::MU),
            _ => Err(Error::UnknownFamily(s.to_string())),
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct MultivariateSpec {
    family: MvFamily,
    m: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
    r: f64,
    t: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    family: MvFamily,
    n: usize,
    m: Vec<f64>,
    #[serde(rename = "Sigma")]
    sigma: Vec<Vec<f64>>,
    r: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
}

impl TryFrom<RawSpec> for MultivariateSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.m.len() != raw.n {
            return Err(Error::DimensionMismatch {
                expected: raw.n,
                got: raw.m.len(),
            });
        }
        let sigma = matrix_from_rows(&raw.sigma)?;
        MultivariateSpec::new(raw.family, raw.m, sigma, raw.r, raw.t)
    }
}

impl From<MultivariateSpec> for RawSpec {
    fn from(spec: MultivariateSpec) -> Self {
        RawSpec {
            family: spec.family,
            n: spec.n(),
            m: spec.m.iter().copied().collect(),
            sigma: spec.sigma.row_iter().map(|row| row.iter().copied().collect()).collect(),
            r: spec.r,
            t: spec.t,
        }
    }
}

impl PartialEq for MultivariateSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.m == other.m && self.sigma == other.sigma && self.r == other.r && self.t == other.t
    }
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(row) = rows.iter().find(|row| row.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: row.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl MultivariateSpec {
    /// `t` is required for CM and CL and must be absent for MU.
    pub fn new(family: MvFamily, m: Vec<f64>, sigma: DMatrix<f64>, r: f64, t: Option<f64>) -> Result<Self> {
        let n = m.len();
        let name = family.as_str();
        if n == 0 {
            return Err(Error::param(name, "dimension must be at least 1"));
        }
        if sigma.nrows() != n || sigma.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sigma.nrows().max(sigma.ncols()),
            });
        }
        if m.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param(name, "location and scatter must be finite"));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-12 * sigma.abs().max() {
            return Err(Error::param(name, "Sigma must be symmetric"));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(name, format!("r must be positive, got {r}")));
        }
        match (family, t) {
            (MvFamily::MU, Some(_)) => return Err(Error::param(name, "MU takes no slope t")),
            (MvFamily::CM | MvFamily::CL, None) => return Err(Error::param(name, "missing slope t")),
            (_, Some(t)) if !(t > 0.0 && t.is_finite()) => {
                return Err(Error::param(name, format!("t must be positive, got {t}")))
            }
            _ => {}
        }
        let chol = sigma
            .clone()
            .cholesky()
            .ok_or_else(|| Error::param(name, "Sigma must be positive definite"))?
            .unpack();
        if chol.diagonal().iter().any(|d| !(*d > 0.0)) {
            return Err(Error::param(name, "Sigma must be positive definite"));
        }
        let log_det = 2.0 * chol.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(MultivariateSpec {
            family,
            m: DVector::from_vec(m),
            sigma,
            chol,
            log_det,
            r,
            t,
        })
    }

    pub fn cm(m: Vec<f64>, sigma: DMatrix<f64>, r: f64, t: f64) -> Result<Self> {
        Self::new(MvFamily::CM, m, sigma, r, Some(t))
    }

    pub fn cl(m: Vec<f64>, sigma: DMatrix<f64>, r: f64, t: f64) -> Result<Self> {
        Self::new(MvFamily::CL, m, sigma, r, Some(t))
    }

    pub fn mu(m: Vec<f64>, sigma: DMatrix<f64>, r: f64) -> Result<Self> {
        Self::new(MvFamily::MU, m, sigma, r, None)
    }

    /// Builds from the precision matrix P = Σ⁻¹ and R = rⁿ.
    pub fn from_precision(family: MvFamily, m: Vec<f64>, precision: &DMatrix<f64>, r_pow_n: f64, t: Option<f64>) -> Result<Self> {
        let n = m.len();
        let p = 0.5 * (precision + precision.transpose());
        let sigma = p
            .cholesky()
            .ok_or_else(|| Error::param(family.as_str(), "precision must be positive definite"))?
            .inverse();
        let sigma = 0.5 * (&sigma + sigma.transpose());
        Self::new(family, m, sigma, r_pow_n.powf(1.0 / n as f64), t)
    }

    pub fn family(&self) -> MvFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &DVector<f64> {
        &self.m
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower triangular factor L with Σ = LLᵀ.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn precision(&self) -> DMatrix<f64> {
        let inv = self
            .chol
            .clone()
            .try_inverse()
            .expect("triangular factor has a positive diagonal");
        inv.transpose() * inv
    }

    pub fn log_det_sigma(&self) -> f64 {
        self.log_det
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// rⁿ.
    pub fn r_pow_n(&self) -> f64 {
        self.r.powi(self.n() as i32)
    }

    pub fn t(&self) -> Option<f64> {
        self.t
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: len,
            });
        }
        Ok(())
    }

    /// Squared Mahalanobis distance.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let d = DVector::from_column_slice(x) - &self.m;
        let y = self
            .chol
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::NearSingular("triangular solve failed".into()))?;
        Ok(y.norm_squared())
    }

    pub fn mahalanobis(&self, x: &[f64]) -> Result<f64> {
        Ok(self.mahalanobis_sq(x)?.sqrt())
    }

    fn ln_ball_volume(&self) -> f64 {
        let n = self.n() as f64;
        0.5 * n * PI.ln() - ln_gamma(0.5 * n + 1.0) + 0.5 * self.log_det
    }

    pub fn log_normalizer(&self) -> f64 {
        let big_r = self.r_pow_n();
        match (self.family, self.t) {
            (MvFamily::CM, Some(t)) => t.ln() - softplus(big_r * t).ln() - self.ln_ball_volume(),
            _ => -big_r.ln() - self.ln_ball_volume(),
        }
    }

    /// c_M or c_L; for MU the constant density inside the ellipsoid.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer().exp()
    }

    /// Log density as a function of u = ρⁿ.
    pub fn log_pdf_radial(&self, u: f64) -> f64 {
        let big_r = self.r_pow_n();
        let c = self.log_normalizer();
        match (self.family, self.t) {
            (MvFamily::CM, Some(t)) => c - softplus((u - big_r) * t),
            (MvFamily::CL, Some(t)) => c + al_log_shape(u * t, big_r * t),
            _ => {
                if u <= big_r {
                    c
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let rho2 = self.mahalanobis_sq(x)?;
        Ok(self.log_pdf_radial(rho2.powf(0.5 * self.n() as f64)))
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    /// Distribution function of u = ρⁿ.
    pub fn radial_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let big_r = self.r_pow_n();
        match (self.family, self.t) {
            (MvFamily::CM, Some(t)) => {
                let total = softplus(big_r * t);
                (total - softplus((big_r - u) * t)) / total
            }
            (MvFamily::CL, Some(t)) => {
                let al = UnivariateSpec::al(-big_r, big_r, 1.0 / t).expect("valid AL");
                (2.0 * al.cdf(u) - 1.0).clamp(0.0, 1.0)
            }
            _ => (u / big_r).min(1.0),
        }
    }

    /// Inverse of [`radial_cdf`](Self::radial_cdf).
    pub fn radial_quantile(&self, v: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::Domain(format!("probability {v} outside [0, 1)")));
        }
        let big_r = self.r_pow_n();
        match (self.family, self.t) {
            (MvFamily::CM, Some(t)) => {
                let y = (1.0 - v) * softplus(big_r * t);
                let ln_expm1 = if y > 30.0 { y + (-(-y).exp()).ln_1p() } else { y.exp_m1().ln() };
                Ok((big_r - ln_expm1 / t).max(0.0))
            }
            (MvFamily::CL, Some(t)) => {
                let al = UnivariateSpec::al(-big_r, big_r, 1.0 / t)?;
                Ok(al.quantile(0.5 + 0.5 * v)?.max(0.0))
            }
            _ => Ok(v * big_r),
        }
    }

    /// Maps a unit-Mahalanobis direction and radius to a point.
    fn place(&self, dir: &DVector<f64>, rho: f64) -> DVector<f64> {
        &self.m + &self.chol * (dir * rho)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Result<Vec<f64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(count * n);
        for _ in 0..count {
            let dir = unit_direction(rng, n);
            let v: f64 = rng.sample(Open01);
            let u = self.radial_quantile(v)?;
            let x = self.place(&dir, u.powf(1.0 / n as f64));
            out.extend(x.iter());
        }
        Ok(out)
    }

    /// Two draws sharing a direction and radial level: (dir, v) and (−dir, 1 − v).
    pub fn antithetic_pair_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<[DVector<f64>; 2]> {
        let n = self.n() as f64;
        let dir = unit_direction(rng, self.n());
        let v: f64 = rng.sample(Open01);
        let u1 = self.radial_quantile(v)?;
        let u2 = self.radial_quantile(1.0 - v)?;
        Ok([self.place(&dir, u1.powf(1.0 / n)), self.place(&-dir.clone(), u2.powf(1.0 / n))])
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Dataset> {
        if count == 0 {
            return Err(Error::Domain("sample count must be at least 1".into()));
        }
        let mut rng = seeded_rng(seed);
        let values = self.sample_with(&mut rng, count)?;
        Dataset::new(self.n(), values, format!("{self} seed={seed}"))
    }

    /// Rescales Σ to unit determinant, adjusting r and t so the density is unchanged.
    pub fn normalize_sigma(&self) -> Result<Self> {
        let n = self.n() as f64;
        let sigma = &self.sigma * (-self.log_det / n).exp();
        let half = (0.5 * self.log_det).exp();
        let r = self.r * (0.5 * self.log_det / n).exp();
        Self::new(self.family, self.m.iter().copied().collect(), sigma, r, self.t.map(|t| t / half))
    }

    /// Importance-sampled estimate of ∫p using a multivariate Student-t proposal
    /// with three degrees of freedom and the same scatter shape.
    pub fn mc_normalization(&self, draws: usize, seed: u64) -> Result<McEstimate> {
        if draws < 2 {
            return Err(Error::Domain("at least two draws are needed".into()));
        }
        let n = self.n();
        let nf = n as f64;
        let nu = 3.0;
        let width = match self.t {
            Some(t) => (self.r_pow_n() + 4.0 / t).powf(1.0 / nf),
            None => self.r,
        };
        let scale = width / nf.sqrt();
        let chi = ChiSquared::new(nu).expect("positive degrees of freedom");
        let ln_q_const = ln_gamma(0.5 * (nu + nf)) - ln_gamma(0.5 * nu) - 0.5 * nf * (nu * PI).ln() - nf * scale.ln() - 0.5 * self.log_det;
        let mut rng = seeded_rng(seed);
        let (mut mean, mut m2) = (0.0, 0.0);
        for k in 0..draws {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let w = chi.sample(&mut rng);
            let y = z * (scale * (nu / w).sqrt());
            let x = &self.m + &self.chol * &y;
            let q2 = y.norm_squared() / (scale * scale);
            let ln_q = ln_q_const - 0.5 * (nu + nf) * (q2 / nu).ln_1p();
            let weight = (self.log_pdf(x.as_slice())? - ln_q).exp();
            let delta = weight - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (weight - mean);
        }
        let var = m2 / (draws - 1) as f64;
        Ok(McEstimate {
            value: mean,
            stderr: (var / draws as f64).sqrt(),
            draws,
        })
    }

    /// Probability mass of the ellipsoid ρ ≤ r.
    pub fn mass_within_r(&self) -> f64 {
        self.radial_cdf(self.r_pow_n())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl fmt::Display for MultivariateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{n={},r={}", self.family, self.n(), self.r)?;
        if let Some(t) = self.t {
            write!(f, ",t={t}")?;
        }
        f.write_str("}")
    }
}

pub(crate) fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = z.norm();
        if norm > 1e-300 {
            return z / norm;
        }
    }
}

