//! KL divergence and L1 distance: numerical estimates for arbitrary pairs of
//! densities, and closed forms for uniform densities against their best-fit
//! normals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::seeded_rng;
use crate::error::{Error, Result};
use crate::multivariate::MultivariateSpec;
use crate::specfun::{erf, integrate_with, ln_gamma, regularized_gamma, QuadratureSettings, Tail};
use crate::univariate::UnivariateSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceMethod {
    ClosedForm,
    Quadrature,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McStderr {
    pub kl: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceResult {
    /// Nats; `inf` when q vanishes on part of p's support.
    pub kl: f64,
    pub l1: f64,
    pub method: DivergenceMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_stderr: Option<McStderr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_n: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub method: DivergenceMethod,
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct MvNormal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
    log_det: f64,
}

impl MvNormal {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 || cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::param("MN", "non-finite mean or covariance"));
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::NearSingular("covariance is not positive definite".into()))?
            .unpack();
        let log_det = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(MvNormal {
            mean: DVector::from_vec(mean),
            chol,
            log_det,
        })
    }

    /// N(m, σ²I).
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let n = mean.len();
        MvNormal::new(mean, DMatrix::identity(n, n) * variance)
    }

    pub fn n(&self) -> usize {
        self.mean.len()
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: x.len(),
            });
        }
        let d = DVector::from_column_slice(x) - &self.mean;
        let y = self
            .chol
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::NearSingular("covariance factor".into()))?;
        let n = self.n() as f64;
        Ok(-0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det + y.norm_squared()))
    }

    /// z and −z mapped through the factor.
    pub fn antithetic_pair_with<R: Rng + ?Sized>(&self, rng: &mut R) -> [DVector<f64>; 2] {
        let z = DVector::from_fn(self.n(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * z;
        [&self.mean + &step, &self.mean - step]
    }
}

/// Anything the divergence routines can evaluate.
#[derive(Clone, Debug)]
pub enum Density {
    Univariate(UnivariateSpec),
    Multivariate(MultivariateSpec),
    Normal(MvNormal),
}

impl From<UnivariateSpec> for Density {
    fn from(s: UnivariateSpec) -> Self {
        Density::Univariate(s)
    }
}

impl From<MultivariateSpec> for Density {
    fn from(s: MultivariateSpec) -> Self {
        Density::Multivariate(s)
    }
}

impl From<MvNormal> for Density {
    fn from(s: MvNormal) -> Self {
        Density::Normal(s)
    }
}

impl Density {
    pub fn dim(&self) -> usize {
        match self {
            Density::Univariate(_) => 1,
            Density::Multivariate(s) => s.n(),
            Density::Normal(s) => s.n(),
        }
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        match self {
            Density::Univariate(s) => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                Ok(s.log_pdf(x[0]))
            }
            Density::Multivariate(s) => s.log_pdf(x),
            Density::Normal(s) => s.log_pdf(x),
        }
    }

    fn log_pdf_1d(&self, x: f64) -> f64 {
        self.log_pdf(&[x]).unwrap_or(f64::NEG_INFINITY)
    }

    /// Support, break-points and length scale of a one-dimensional density.
    fn layout_1d(&self) -> (f64, f64, Vec<f64>, f64) {
        match self {
            Density::Univariate(s) => {
                let (lo, hi) = s.support();
                (lo, hi, s.breakpoints(), s.scale())
            }
            Density::Multivariate(s) => {
                let m = s.m()[0];
                let half = s.r() * s.factor()[(0, 0)];
                let bounded = s.t().is_none();
                let (lo, hi) = if bounded {
                    (m - half, m + half)
                } else {
                    (f64::NEG_INFINITY, f64::INFINITY)
                };
                let scale = s.t().map_or(half, |t| s.factor()[(0, 0)] / t);
                (lo, hi, vec![m - half, m, m + half], scale)
            }
            Density::Normal(s) => {
                let sd = s.chol[(0, 0)];
                let m = s.mean[0];
                (f64::NEG_INFINITY, f64::INFINITY, vec![m - sd, m, m + sd], sd)
            }
        }
    }

    fn antithetic_pair_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<[DVector<f64>; 2]> {
        match self {
            Density::Multivariate(s) => s.antithetic_pair_with(rng),
            Density::Normal(s) => Ok(s.antithetic_pair_with(rng)),
            Density::Univariate(_) => Err(Error::Unsupported("Monte Carlo is used only above one dimension".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSettings {
    /// Monte Carlo draws (rounded up to whole antithetic pairs).
    pub draws: usize,
    pub seed: u64,
    pub quadrature: QuadratureSettings,
}

impl Default for DivergenceSettings {
    fn default() -> Self {
        DivergenceSettings {
            draws: 1_000_000,
            seed: 0,
            quadrature: QuadratureSettings {
                abs_tol: 1e-13,
                rel_tol: 1e-11,
                max_subdivisions: 4000,
                tail_cutoff: None,
            },
        }
    }
}

fn check_dims(p: &Density, q: &Density) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            got: q.dim(),
        });
    }
    Ok(())
}

/// Integrates `g(x)` over p's support with the break-points of both densities.
fn integrate_over_p(p: &Density, q: &Density, g: impl Fn(f64) -> f64, settings: &QuadratureSettings) -> Result<f64> {
    let (lo, hi, mut breaks, sp) = p.layout_1d();
    let (qlo, qhi, qb, sq) = q.layout_1d();
    breaks.extend(qb);
    breaks.extend([qlo, qhi]);
    Ok(integrate_with(g, lo, hi, &breaks, sp.max(sq), settings)?.value)
}

/// Whether q vanishes somewhere on p's support (one dimension).
fn support_gap_1d(p: &Density, q: &Density) -> bool {
    let (lo, hi, _, _) = p.layout_1d();
    let (qlo, qhi, _, _) = q.layout_1d();
    qlo > lo || qhi < hi
}

fn kl_quadrature(p: &Density, q: &Density, settings: &QuadratureSettings) -> Result<f64> {
    if support_gap_1d(p, q) {
        return Ok(f64::INFINITY);
    }
    integrate_over_p(
        p,
        q,
        |x| {
            let lp = p.log_pdf_1d(x);
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            lp.exp() * (lp - q.log_pdf_1d(x))
        },
        settings,
    )
}

/// 2∫(p − q)₊, which equals ∫|p − q| for normalized densities.
fn l1_quadrature(p: &Density, q: &Density, settings: &QuadratureSettings) -> Result<f64> {
    let v = integrate_over_p(
        p,
        q,
        |x| {
            let lp = p.log_pdf_1d(x);
            if lp == f64::NEG_INFINITY {
                return 0.0;
            }
            (lp.exp() - q.log_pdf_1d(x).exp()).max(0.0)
        },
        settings,
    )?;
    Ok((2.0 * v).min(2.0))
}

struct McPair {
    kl: (f64, f64),
    l1: (f64, f64),
    infinite: bool,
}

/// Pair-averaged draws of ln(p/q) and 2(1 − q/p)₊ under p.
fn mc_pairs<R: Rng + ?Sized>(p: &Density, q: &Density, rng: &mut R, draws: usize) -> Result<McPair> {
    let pairs = draws.div_ceil(2).max(2);
    let (mut kl, mut l1) = (Welford::default(), Welford::default());
    let mut infinite = false;
    for _ in 0..pairs {
        let xs = p.antithetic_pair_with(rng)?;
        let (mut k, mut l) = (0.0, 0.0);
        for x in &xs {
            let lp = p.log_pdf(x.as_slice())?;
            let lq = q.log_pdf(x.as_slice())?;
            if lq == f64::NEG_INFINITY {
                infinite = true;
            }
            k += 0.5 * (lp - lq);
            l += (1.0 - (lq - lp).exp()).max(0.0);
        }
        kl.push(k);
        l1.push(l);
    }
    Ok(McPair {
        kl: kl.mean_and_stderr(),
        l1: l1.mean_and_stderr(),
        infinite,
    })
}

#[derive(Default)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn mean_and_stderr(&self) -> (f64, f64) {
        (self.mean, (self.m2 / (self.n - 1.0) / self.n).sqrt())
    }
}

/// KL by Monte Carlo with caller-owned generator state.
pub fn kl_monte_carlo<R: Rng + ?Sized>(p: &Density, q: &Density, rng: &mut R, draws: usize) -> Result<Estimate> {
    check_dims(p, q)?;
    let mc = mc_pairs(p, q, rng, draws)?;
    Ok(if mc.infinite {
        Estimate {
            value: f64::INFINITY,
            stderr: None,
            method: DivergenceMethod::MonteCarlo,
        }
    } else {
        Estimate {
            value: mc.kl.0,
            stderr: Some(mc.kl.1),
            method: DivergenceMethod::MonteCarlo,
        }
    })
}

/// L1 by Monte Carlo with caller-owned generator state.
pub fn l1_monte_carlo<R: Rng + ?Sized>(p: &Density, q: &Density, rng: &mut R, draws: usize) -> Result<Estimate> {
    check_dims(p, q)?;
    let mc = mc_pairs(p, q, rng, draws)?;
    Ok(Estimate {
        value: mc.l1.0,
        stderr: Some(mc.l1.1),
        method: DivergenceMethod::MonteCarlo,
    })
}

/// D_KL(p‖q): quadrature in one dimension, Monte Carlo otherwise.
pub fn kl_numeric(p: &Density, q: &Density, settings: &DivergenceSettings) -> Result<Estimate> {
    check_dims(p, q)?;
    if p.dim() == 1 {
        return Ok(Estimate {
            value: kl_quadrature(p, q, &settings.quadrature)?,
            stderr: None,
            method: DivergenceMethod::Quadrature,
        });
    }
    kl_monte_carlo(p, q, &mut seeded_rng(settings.seed), settings.draws)
}

/// ∫|p − q|: quadrature in one dimension, Monte Carlo otherwise.
pub fn l1_numeric(p: &Density, q: &Density, settings: &DivergenceSettings) -> Result<Estimate> {
    check_dims(p, q)?;
    if p.dim() == 1 {
        return Ok(Estimate {
            value: l1_quadrature(p, q, &settings.quadrature)?,
            stderr: None,
            method: DivergenceMethod::Quadrature,
        });
    }
    l1_monte_carlo(p, q, &mut seeded_rng(settings.seed), settings.draws)
}

/// Both divergences from one pass.
pub fn divergence_numeric(p: &Density, q: &Density, settings: &DivergenceSettings) -> Result<DivergenceResult> {
    check_dims(p, q)?;
    if p.dim() == 1 {
        return Ok(DivergenceResult {
            kl: kl_quadrature(p, q, &settings.quadrature)?,
            l1: l1_quadrature(p, q, &settings.quadrature)?,
            method: DivergenceMethod::Quadrature,
            mc_stderr: None,
            chi_n: None,
        });
    }
    let mc = mc_pairs(p, q, &mut seeded_rng(settings.seed), settings.draws)?;
    Ok(DivergenceResult {
        kl: if mc.infinite { f64::INFINITY } else { mc.kl.0 },
        l1: mc.l1.0,
        method: DivergenceMethod::MonteCarlo,
        mc_stderr: Some(McStderr {
            kl: if mc.infinite { f64::NAN } else { mc.kl.1 },
            l1: mc.l1.1,
        }),
        chi_n: None,
    })
}

/// (mean, variance) of the maximum-likelihood normal for U(a, b).
pub fn bestfit_normal_of_uniform(a: f64, b: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return Err(Error::param("U", format!("need a < b, got a={a}, b={b}")));
    }
    let r = 0.5 * (b - a);
    Ok((0.5 * (a + b), r * r / 3.0))
}

/// E_U[ln p*_N] for U(a, b) and its best-fit normal.
pub fn expected_loglik_bestfit_normal_of_uniform(a: f64, b: f64) -> Result<f64> {
    bestfit_normal_of_uniform(a, b)?;
    Ok(-(b - a).ln() - 0.5 * (std::f64::consts::PI * std::f64::consts::E / 6.0).ln())
}

/// Divergences of any U(a, b) from its best-fit normal; independent of (a, b).
pub fn uniform_vs_bestfit_normal_1d() -> DivergenceResult {
    let c = (6.0 / std::f64::consts::PI).ln();
    let kl = 0.5 * (std::f64::consts::PI * std::f64::consts::E / 6.0).ln();
    let l1 = 2.0 * (1.0 - (c / 3.0).sqrt() + erf((c / 2.0).sqrt()) - erf(1.5f64.sqrt()));
    DivergenceResult {
        kl,
        l1,
        method: DivergenceMethod::ClosedForm,
        mc_stderr: None,
        chi_n: None,
    }
}

/// Per-axis variance of the best-fit normal of the uniform n-ball of radius r.
pub fn bestfit_normal_of_ball(n: usize, r: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("MU", format!("radius must be positive, got {r}")));
    }
    Ok(r * r / (n as f64 + 2.0))
}

/// Relative radius where the ball density equals its best-fit normal.
pub fn chi_n(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let h = n as f64 / 2.0;
    Ok(((h * (h + 1.0).ln() - ln_gamma(h + 1.0)) / (h + 1.0)).sqrt())
}

/// Divergences of the uniform n-ball from its best-fit normal; includes χ_n.
pub fn ball_vs_bestfit_normal(n: usize) -> Result<DivergenceResult> {
    let chi = chi_n(n)?;
    let h = n as f64 / 2.0;
    let kl = ln_gamma(h + 1.0) - h * (h + 1.0).ln() + h;
    let upper = |x: f64| regularized_gamma(h, x, Tail::Upper);
    let l1 = 2.0 * (1.0 - chi.powi(n as i32) - (upper((h + 1.0) * chi * chi)? - upper(h + 1.0)?));
    Ok(DivergenceResult {
        kl,
        l1,
        method: DivergenceMethod::ClosedForm,
        mc_stderr: None,
        chi_n: Some(chi),
    })
}

/// The unit-radius ball density and its best-fit normal, both centred at 0.
pub fn ball_and_bestfit_normal(n: usize) -> Result<(Density, Density)> {
    let var = bestfit_normal_of_ball(n, 1.0)?;
    let ball = MultivariateSpec::mu(vec![0.0; n], DMatrix::identity(n, n), 1.0)?;
    let normal = MvNormal::isotropic(vec![0.0; n], var)?;
    Ok((ball.into(), normal.into()))
}
