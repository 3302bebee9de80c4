//! Log-likelihoods, analytic partial derivatives and a coordinate-wise
//! gradient-ascent fitter for AL, BL and CL models.
//!
//! Every update moves one parameter (or one parameter block for CL) using the
//! freshest values of the others. Steps are Newton-sized along the coordinate
//! and halved until the log-likelihood does not decrease.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::flatness::bl_bound;
use crate::multivariate::{MultivariateSpec, MvFamily};
use crate::specfun::{coth, csch2, ln_sinh, sech2, sigmoid, sigmoid_d1, sinh_over_cosh_sum};
use crate::univariate::{approx_al_from_normal, FamilyTag, UnivariateSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub max_iters: usize,
    /// Threshold on the largest scale-free gradient per observation.
    pub grad_tol: f64,
    pub step_scale: f64,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
    /// Flatness bound below which BL approximate gradients are trusted.
    pub flat_threshold: f64,
    /// Largest log-likelihood loss tolerated for a step that shrinks the gradient.
    pub ascent_slack: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            max_iters: 500,
            grad_tol: 1e-8,
            step_scale: 1.0,
            backtrack_factor: 0.5,
            max_halvings: 30,
            flat_threshold: 0.05,
            ascent_slack: 1e-9,
        }
    }
}

impl FitSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.step_scale > 0.0 && self.flat_threshold > 0.0 && self.ascent_slack >= 0.0) {
            return Err(Error::Domain("fit settings must be positive".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::Domain("backtrack_factor must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Domain("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradTol,
    MaxIters,
    /// Every coordinate step was rejected in one sweep.
    Stalled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub loglik_trace: Vec<f64>,
    pub final_params: BTreeMap<String, f64>,
    pub grad_norm: f64,
    pub loglik: f64,
    pub n_obs: usize,
    pub free_params: usize,
    /// CL only: count under the unit-determinant constraint on Σ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_params_constrained: Option<usize>,
    pub aic: f64,
    pub bic: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FitReport {
    /// `iteration,loglik` rows with a header line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,loglik\n");
        for (i, l) in self.loglik_trace.iter().enumerate() {
            let _ = writeln!(out, "{i},{l:?}");
        }
        out
    }
}

pub fn aic(loglik: f64, k: usize) -> f64 {
    2.0 * k as f64 - 2.0 * loglik
}

pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * loglik
}

/// Weight of point i, 1 when unweighted.
fn weight(w: Option<&[f64]>, i: usize) -> f64 {
    w.map_or(1.0, |w| w[i])
}

fn total_weight(xs: &[f64], w: Option<&[f64]>) -> f64 {
    w.map_or(xs.len() as f64, |w| w.iter().sum())
}

/// ln cosh(u) without overflow.
#[inline]
fn ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

// ---------------------------------------------------------------- AL

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlGradient {
    pub a: f64,
    pub b: f64,
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlHessian {
    pub aa: f64,
    pub bb: f64,
    pub ss: f64,
    pub ab: f64,
    pub a_s: f64,
    pub b_s: f64,
}

/// ln p_AL(x | a, b, s).
pub fn al_log_pdf(x: f64, a: f64, b: f64, s: f64) -> f64 {
    let h = (b - a) / (2.0 * s);
    ln_sinh(h) - (2.0 * (b - a)).ln() - ln_cosh((x - a) / (2.0 * s)) - ln_cosh((x - b) / (2.0 * s))
}

pub fn loglik_al(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64) -> f64 {
    let h = (b - a) / (2.0 * s);
    let head = ln_sinh(h) - (2.0 * (b - a)).ln();
    let mut sum = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let ua = (x - a) / (2.0 * s);
        let ub = (x - b) / (2.0 * s);
        sum += weight(w, i) * (head - ln_cosh(ua) - ln_cosh(ub));
    }
    sum
}

pub fn grad_al(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64) -> AlGradient {
    let n = total_weight(xs, w);
    let h = (b - a) / (2.0 * s);
    let ch = coth(h);
    let (mut ta, mut tb, mut ts) = (0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let wi = weight(w, i);
        let ua = (x - a) / (2.0 * s);
        let ub = (x - b) / (2.0 * s);
        let (tha, thb) = (ua.tanh(), ub.tanh());
        ta += wi * tha;
        tb += wi * thb;
        ts += wi * (ua * tha + ub * thb);
    }
    AlGradient {
        a: n / (b - a) - n / (2.0 * s) * ch + ta / (2.0 * s),
        b: -n / (b - a) + n / (2.0 * s) * ch + tb / (2.0 * s),
        s: -(n / s) * h * ch + ts / s,
    }
}

pub fn hess_al(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64) -> AlHessian {
    let n = total_weight(xs, w);
    let h = (b - a) / (2.0 * s);
    let (ch, cs2) = (coth(h), csch2(h));
    let s2 = s * s;
    let (mut saa, mut sbb, mut sss, mut sas, mut sbs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let wi = weight(w, i);
        let ua = (x - a) / (2.0 * s);
        let ub = (x - b) / (2.0 * s);
        let (ea, eb) = (sech2(ua), sech2(ub));
        let (tha, thb) = (ua.tanh(), ub.tanh());
        saa += wi * ea;
        sbb += wi * eb;
        sss += wi * (2.0 * ua * tha + ua * ua * ea + 2.0 * ub * thb + ub * ub * eb);
        sas += wi * (tha + ua * ea);
        sbs += wi * (thb + ub * eb);
    }
    let width2 = (b - a) * (b - a);
    let edge = n / (4.0 * s2) * cs2;
    let mixed = n / (2.0 * s2) * (ch - h * cs2);
    AlHessian {
        aa: n / width2 - edge - saa / (4.0 * s2),
        bb: n / width2 - edge - sbb / (4.0 * s2),
        ss: n / s2 * (2.0 * h * ch - h * h * cs2) - sss / s2,
        ab: -n / width2 + edge,
        a_s: mixed - sas / (2.0 * s2),
        b_s: -mixed - sbs / (2.0 * s2),
    }
}

// ---------------------------------------------------------------- BL

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlGradient {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub t: f64,
    /// False when the flatness bound exceeds the threshold and the
    /// approximation should not be trusted.
    pub flat: bool,
}

/// Exact log-likelihood with the quadrature normalizer.
pub fn loglik_bl(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
    let spec = UnivariateSpec::bl(a, b, s, t)?;
    Ok(xs.iter().enumerate().map(|(i, &x)| weight(w, i) * spec.log_pdf(x)).sum())
}

pub fn bl_is_flat(a: f64, b: f64, s: f64, t: f64, threshold: f64) -> bool {
    bl_bound(a, b, s, t) < threshold
}

/// Flat-regime approximate partials of the BL log-likelihood.
pub fn grad_bl_flat(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64, t: f64, threshold: f64) -> BlGradient {
    let n = total_weight(xs, w);
    let (mut ga, mut gb, mut gs, mut gt) = (0.0, 0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let wi = weight(w, i);
        let upper_a = sigmoid((a - x) / s);
        let lower_b = sigmoid((x - b) / t);
        ga += wi * upper_a;
        gb += wi * lower_b;
        gs += wi * (a - x) * upper_a;
        gt += wi * (x - b) * lower_b;
    }
    BlGradient {
        a: n / (b - a) - ga / s,
        b: -n / (b - a) + gb / t,
        s: gs / (s * s),
        t: gt / (t * t),
        flat: bl_is_flat(a, b, s, t, threshold),
    }
}

/// Diagonal second derivatives of the approximate log-likelihood.
fn curv_bl_flat(xs: &[f64], w: Option<&[f64]>, a: f64, b: f64, s: f64, t: f64) -> [f64; 4] {
    let n = total_weight(xs, w);
    let (mut ca, mut cb, mut cs, mut ct) = (0.0, 0.0, 0.0, 0.0);
    for (i, &x) in xs.iter().enumerate() {
        let wi = weight(w, i);
        let za = (x - a) / s;
        let zb = (x - b) / t;
        ca += wi * sigmoid_d1(za);
        cb += wi * sigmoid_d1(zb);
        cs += wi * (2.0 * za * sigmoid(-za) - za * za * sigmoid_d1(za));
        ct += wi * (-2.0 * zb * sigmoid(zb) - zb * zb * sigmoid_d1(zb));
    }
    let width2 = (b - a) * (b - a);
    [n / width2 - ca / (s * s), n / width2 - cb / (t * t), cs / (s * s), ct / (t * t)]
}

// ---------------------------------------------------------------- CL

#[derive(Clone, Debug, PartialEq)]
pub struct ClGradient {
    pub m: DVector<f64>,
    /// ∂l/∂(Σ⁻¹), entries treated as independent.
    pub precision: DMatrix<f64>,
    /// ∂l/∂(rⁿ).
    pub r_pow_n: f64,
    pub t: f64,
}

fn require_cl(spec: &MultivariateSpec, data: &Dataset) -> Result<f64> {
    if spec.family() != MvFamily::CL {
        return Err(Error::Unsupported(format!("{} log-likelihood derivatives", spec.family())));
    }
    if data.dim() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            got: data.dim(),
        });
    }
    Ok(spec.t().expect("CL carries a slope"))
}

pub fn loglik_cl(data: &Dataset, spec: &MultivariateSpec) -> Result<f64> {
    require_cl(spec, data)?;
    let mut sum = 0.0;
    for x in data.rows() {
        sum += spec.log_pdf(x)?;
    }
    Ok(sum)
}

pub fn grad_cl(data: &Dataset, spec: &MultivariateSpec) -> Result<ClGradient> {
    let t = require_cl(spec, data)?;
    let n = spec.n();
    let nf = n as f64;
    let count = data.len() as f64;
    let big_r = spec.r_pow_n();
    let p = spec.precision();
    let mut acc_m = DVector::zeros(n);
    let mut acc_p = DMatrix::zeros(n, n);
    let (mut sum_psi, mut sum_t) = (0.0, 0.0);
    for x in data.rows() {
        let d = DVector::from_column_slice(x) - spec.m();
        let rho2 = spec.mahalanobis_sq(x)?;
        let u = rho2.powf(0.5 * nf);
        let phi = sinh_over_cosh_sum(u * t, big_r * t);
        let psi = sinh_over_cosh_sum(big_r * t, u * t);
        // t·φ·n·ρ^{n−2}, with the ρ → 0 limit for n = 1
        let weight = if rho2 > 0.0 {
            t * phi * nf * rho2.powf(0.5 * nf - 1.0)
        } else if n == 1 {
            t * t * 0.5 * sech2(0.5 * big_r * t)
        } else if n == 2 {
            2.0 * t * phi
        } else {
            0.0
        };
        acc_m += &d * weight;
        acc_p += &d * d.transpose() * weight;
        sum_psi += psi;
        sum_t += u * phi + big_r * psi;
    }
    let ctr = coth(big_r * t);
    Ok(ClGradient {
        m: &p * acc_m,
        precision: spec.sigma() * (0.5 * count) - acc_p * 0.5,
        r_pow_n: count * (t * ctr - 1.0 / big_r) - t * sum_psi,
        t: count * big_r * ctr - sum_t,
    })
}

// ---------------------------------------------------------------- fitting

/// Box constraints for location and scale parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl Bounds {
    /// min{x} < a < b < max{x}, (max − min)/(4N) ≤ s < σ̂.
    pub fn from_data(xs: &[f64], w: Option<&[f64]>) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::Degenerate("empty data".into()));
        }
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate("all observations are equal".into()));
        }
        let (_, sd) = weighted_mean_sd(xs, w);
        Ok(Bounds {
            lo,
            hi,
            s_min: (hi - lo) / (4.0 * xs.len() as f64),
            s_max: sd,
        })
    }

    /// Widened so the given parameters lie inside.
    pub fn containing(mut self, a: f64, b: f64, scales: &[f64]) -> Self {
        self.lo = self.lo.min(a);
        self.hi = self.hi.max(b);
        for &s in scales {
            self.s_min = self.s_min.min(s);
            self.s_max = self.s_max.max(s);
        }
        self
    }

    /// Zeroes gradient components that push a parameter into a bound it
    /// has reached, so convergence is judged on the feasible directions.
    fn project<const K: usize>(&self, ab: &[f64; 2], scales: &[f64], mut g: [f64; K]) -> [f64; K] {
        let tol = 1e-9 * (self.hi - self.lo);
        if g[0] < 0.0 && ab[0] - self.lo <= tol {
            g[0] = 0.0;
        }
        if g[1] > 0.0 && self.hi - ab[1] <= tol {
            g[1] = 0.0;
        }
        for (k, &s) in scales.iter().enumerate() {
            let gk = &mut g[2 + k];
            if (*gk < 0.0 && s - self.s_min <= 1e-9 * self.s_min) || (*gk > 0.0 && self.s_max - s <= 1e-9 * self.s_max) {
                *gk = 0.0;
            }
        }
        g
    }

    fn admits(&self, a: f64, b: f64, scales: &[f64]) -> bool {
        self.lo < a && a < b && b < self.hi && scales.iter().all(|&s| self.s_min <= s && s <= self.s_max)
    }
}

pub fn weighted_mean_sd(xs: &[f64], w: Option<&[f64]>) -> (f64, f64) {
    let n = total_weight(xs, w);
    let mean = xs.iter().enumerate().map(|(i, &x)| weight(w, i) * x).sum::<f64>() / n;
    let var = xs.iter().enumerate().map(|(i, &x)| weight(w, i) * (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// One coordinate update: Newton-sized step, clipped to stay inside
/// (lo, hi), then halved until the objective does not decrease. A step that
/// loses less than `ascent_slack` is also taken when it reduces |grad|.
#[allow(clippy::too_many_arguments)]
fn coordinate_step(
    current: f64,
    grad: f64,
    curv: f64,
    scale: f64,
    (lo, hi): (f64, f64),
    settings: &FitSettings,
    base: f64,
    objective: impl Fn(f64) -> f64,
    grad_at: impl Fn(f64) -> f64,
) -> Option<(f64, f64)> {
    if grad == 0.0 || !grad.is_finite() {
        return None;
    }
    let mut delta = if curv.abs() < 1e-12 || !curv.is_finite() {
        0.1 * scale * grad.signum()
    } else {
        settings.step_scale * grad / curv.abs()
    };
    let target = current + delta;
    if target <= lo {
        delta = 0.5 * (lo - current);
    } else if target >= hi {
        delta = 0.5 * (hi - current);
    }
    for _ in 0..=settings.max_halvings {
        let cand = current + delta;
        if cand == current {
            return None;
        }
        let value = objective(cand);
        if value.is_finite() && value >= base {
            return Some((cand, value));
        }
        // below rounding level of l, accept if the gradient shrinks
        if value >= base - settings.ascent_slack && grad_at(cand).abs() < grad.abs() {
            return Some((cand, value));
        }
        delta *= settings.backtrack_factor;
    }
    None
}

/// One a → b → s sweep on a weighted AL log-likelihood.
pub fn al_pass(xs: &[f64], w: Option<&[f64]>, params: [f64; 3], bounds: &Bounds, settings: &FitSettings) -> ([f64; 3], f64, usize) {
    let [mut a, mut b, mut s] = params;
    let mut l = loglik_al(xs, w, a, b, s);
    let mut accepted = 0;
    let g = grad_al(xs, w, a, b, s).a;
    let h = hess_al(xs, w, a, b, s).aa;
    if let Some((v, lv)) = coordinate_step(a, g, h, s, (bounds.lo, b), settings, l, |v| loglik_al(xs, w, v, b, s), |v| grad_al(xs, w, v, b, s).a) {
        a = v;
        l = lv;
        accepted += 1;
    }
    let g = grad_al(xs, w, a, b, s).b;
    let h = hess_al(xs, w, a, b, s).bb;
    if let Some((v, lv)) = coordinate_step(b, g, h, s, (a, bounds.hi), settings, l, |v| loglik_al(xs, w, a, v, s), |v| grad_al(xs, w, a, v, s).b) {
        b = v;
        l = lv;
        accepted += 1;
    }
    let g = grad_al(xs, w, a, b, s).s;
    let h = hess_al(xs, w, a, b, s).ss;
    let s_range = (bounds.s_min, bounds.s_max);
    if let Some((v, lv)) = coordinate_step(s, g, h, s, s_range, settings, l, |v| loglik_al(xs, w, a, b, v), |v| grad_al(xs, w, a, b, v).s) {
        s = v;
        l = lv;
        accepted += 1;
    }
    ([a, b, s], l, accepted)
}

/// One a → b → s → t sweep on a weighted BL log-likelihood using the
/// flat-regime gradients.
pub fn bl_pass(
    xs: &[f64],
    w: Option<&[f64]>,
    params: [f64; 4],
    bounds: &Bounds,
    settings: &FitSettings,
) -> Result<([f64; 4], f64, usize)> {
    let mut p = params;
    let mut l = loglik_bl(xs, w, p[0], p[1], p[2], p[3])?;
    let mut accepted = 0;
    for k in 0..4 {
        let g = grad_bl_flat(xs, w, p[0], p[1], p[2], p[3], settings.flat_threshold);
        let c = curv_bl_flat(xs, w, p[0], p[1], p[2], p[3]);
        let grad = [g.a, g.b, g.s, g.t][k];
        let range = match k {
            0 => (bounds.lo, p[1]),
            1 => (p[0], bounds.hi),
            _ => (bounds.s_min, bounds.s_max),
        };
        let scale = if k == 1 || k == 3 { p[3] } else { p[2] };
        let objective = |v: f64| {
            let mut q = p;
            q[k] = v;
            loglik_bl(xs, w, q[0], q[1], q[2], q[3]).unwrap_or(f64::NEG_INFINITY)
        };
        let grad_at = |v: f64| {
            let mut q = p;
            q[k] = v;
            let g = grad_bl_flat(xs, w, q[0], q[1], q[2], q[3], settings.flat_threshold);
            [g.a, g.b, g.s, g.t][k]
        };
        if let Some((v, lv)) = coordinate_step(p[k], grad, c[k], scale, range, settings, l, objective, grad_at) {
            p[k] = v;
            l = lv;
            accepted += 1;
        }
    }
    Ok((p, l, accepted))
}

fn univariate_values(data: &Dataset) -> Result<(&[f64], Option<&[f64]>)> {
    let xs = data.as_univariate()?;
    if xs.is_empty() {
        return Err(Error::Degenerate("empty data".into()));
    }
    Ok((xs, data.weights()))
}

/// AL initial guess from the normal approximation to the sample.
pub fn al_init_normal(xs: &[f64]) -> Result<UnivariateSpec> {
    let bounds = Bounds::from_data(xs, None)?;
    let (mean, sd) = weighted_mean_sd(xs, None);
    let approx = approx_al_from_normal(mean, sd)?;
    let margin = 1e-3 * (bounds.hi - bounds.lo);
    let a = approx.param("a").unwrap_or(mean).max(bounds.lo + margin);
    let b = approx.param("b").unwrap_or(mean).min(bounds.hi - margin);
    let s = approx.param("s").unwrap_or(sd).clamp(bounds.s_min, bounds.s_max);
    UnivariateSpec::al(a, b, s)
}

/// AL initial guess for uniform-looking data: s = 4·s_min, a = min + s, b = max − s.
pub fn al_init_uniform(xs: &[f64]) -> Result<UnivariateSpec> {
    let bounds = Bounds::from_data(xs, None)?;
    let s = (4.0 * bounds.s_min).min(bounds.s_max);
    UnivariateSpec::al(bounds.lo + s, bounds.hi - s, s)
}

/// CL initial guess: sample mean and covariance, the uniform-ball radius
/// √(n+2), and an edge of a quarter of rⁿ.
pub fn cl_init(data: &Dataset) -> Result<MultivariateSpec> {
    let n = data.dim();
    if data.len() <= n {
        return Err(Error::Degenerate("CL fit needs more points than dimensions".into()));
    }
    let count = data.len() as f64;
    let mut mean = DVector::zeros(n);
    for x in data.rows() {
        mean += DVector::from_column_slice(x);
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for x in data.rows() {
        let d = DVector::from_column_slice(x) - &mean;
        cov += &d * d.transpose();
    }
    cov /= count;
    let r = ((n + 2) as f64).sqrt();
    let big_r = r.powi(n as i32);
    MultivariateSpec::cl(mean.iter().copied().collect(), cov, r, 4.0 / big_r)
        .map_err(|e| Error::Degenerate(format!("sample covariance unusable: {e}")))
}

#[derive(Clone, Copy)]
struct LoopState {
    iterations: usize,
    termination: Termination,
    grad_norm: f64,
}

fn report(
    state: LoopState,
    trace: Vec<f64>,
    params: BTreeMap<String, f64>,
    n_obs: usize,
    k: usize,
    k_constrained: Option<usize>,
    warnings: Vec<String>,
) -> FitReport {
    let loglik = *trace.last().expect("trace holds the initial value");
    let k_score = k_constrained.unwrap_or(k);
    FitReport {
        converged: state.termination == Termination::GradTol,
        termination: state.termination,
        iterations: state.iterations,
        loglik_trace: trace,
        final_params: params,
        grad_norm: state.grad_norm,
        loglik,
        n_obs,
        free_params: k,
        free_params_constrained: k_constrained,
        aic: aic(loglik, k_score),
        bic: bic(loglik, k_score, n_obs),
        warnings,
    }
}

/// Gradient-ascent AL fit from `init`.
pub fn fit_al(data: &Dataset, init: &UnivariateSpec, settings: &FitSettings) -> Result<(UnivariateSpec, FitReport)> {
    settings.validate()?;
    let (xs, w) = univariate_values(data)?;
    if init.tag() != FamilyTag::AL {
        return Err(Error::InvalidInit(format!("expected AL, got {}", init.tag())));
    }
    let bounds = Bounds::from_data(xs, w)?;
    let mut p = [param(init, "a")?, param(init, "b")?, param(init, "s")?];
    if !bounds.admits(p[0], p[1], &[p[2]]) {
        return Err(Error::InvalidInit(format!("{init} violates {bounds:?}")));
    }
    let n = total_weight(xs, w);
    let (_, sd) = weighted_mean_sd(xs, w);
    let crit = |p: &[f64; 3]| {
        let g = grad_al(xs, w, p[0], p[1], p[2]);
        let g = bounds.project(&[p[0], p[1]], &[p[2]], [g.a, g.b, g.s]);
        sd * g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n
    };
    let mut trace = vec![loglik_al(xs, w, p[0], p[1], p[2])];
    let mut state = LoopState {
        iterations: 0,
        termination: Termination::MaxIters,
        grad_norm: crit(&p),
    };
    if state.grad_norm < settings.grad_tol {
        state.termination = Termination::GradTol;
    } else {
        while state.iterations < settings.max_iters {
            let (next, l, accepted) = al_pass(xs, w, p, &bounds, settings);
            state.iterations += 1;
            p = next;
            trace.push(l);
            state.grad_norm = crit(&p);
            if state.grad_norm < settings.grad_tol {
                state.termination = Termination::GradTol;
                break;
            }
            if accepted == 0 {
                state.termination = Termination::Stalled;
                break;
            }
        }
    }
    let spec = UnivariateSpec::al(p[0], p[1], p[2])?;
    let params = spec.param_map();
    Ok((spec, report(state, trace, params, xs.len(), 3, None, vec![])))
}

/// BL fit with flat-regime approximate gradients and the exact likelihood.
pub fn fit_bl(data: &Dataset, init: &UnivariateSpec, settings: &FitSettings) -> Result<(UnivariateSpec, FitReport)> {
    settings.validate()?;
    let (xs, w) = univariate_values(data)?;
    if init.tag() != FamilyTag::BL {
        return Err(Error::InvalidInit(format!("expected BL, got {}", init.tag())));
    }
    let bounds = Bounds::from_data(xs, w)?;
    let mut p = [param(init, "a")?, param(init, "b")?, param(init, "s")?, param(init, "t")?];
    if !bounds.admits(p[0], p[1], &[p[2], p[3]]) {
        return Err(Error::InvalidInit(format!("{init} violates {bounds:?}")));
    }
    let n = total_weight(xs, w);
    let (_, sd) = weighted_mean_sd(xs, w);
    let mut warnings = Vec::new();
    let crit = |p: &[f64; 4], warnings: &mut Vec<String>| {
        let g = grad_bl_flat(xs, w, p[0], p[1], p[2], p[3], settings.flat_threshold);
        if !g.flat && warnings.is_empty() {
            warnings.push("BL outside the flat regime; approximate gradients may be inaccurate".to_string());
        }
        let g = bounds.project(&[p[0], p[1]], &[p[2], p[3]], [g.a, g.b, g.s, g.t]);
        sd * g.iter().fold(0.0f64, |m, v| m.max(v.abs())) / n
    };
    let mut trace = vec![loglik_bl(xs, w, p[0], p[1], p[2], p[3])?];
    let mut state = LoopState {
        iterations: 0,
        termination: Termination::MaxIters,
        grad_norm: crit(&p, &mut warnings),
    };
    if state.grad_norm < settings.grad_tol {
        state.termination = Termination::GradTol;
    } else {
        while state.iterations < settings.max_iters {
            let (next, l, accepted) = bl_pass(xs, w, p, &bounds, settings)?;
            state.iterations += 1;
            p = next;
            trace.push(l);
            state.grad_norm = crit(&p, &mut warnings);
            if state.grad_norm < settings.grad_tol {
                state.termination = Termination::GradTol;
                break;
            }
            if accepted == 0 {
                state.termination = Termination::Stalled;
                break;
            }
        }
    }
    let spec = UnivariateSpec::bl(p[0], p[1], p[2], p[3])?;
    let params = spec.param_map();
    Ok((spec, report(state, trace, params, xs.len(), 4, None, warnings)))
}

fn param(spec: &UnivariateSpec, name: &str) -> Result<f64> {
    spec.param(name)
        .ok_or_else(|| Error::InvalidInit(format!("{spec} has no parameter {name}")))
}

/// CL parameters as the fitter moves them.
#[derive(Clone)]
struct ClState {
    m: DVector<f64>,
    p: DMatrix<f64>,
    big_r: f64,
    t: f64,
}

impl ClState {
    fn of(spec: &MultivariateSpec) -> Self {
        ClState {
            m: spec.m().clone(),
            p: spec.precision(),
            big_r: spec.r_pow_n(),
            t: spec.t().expect("CL carries a slope"),
        }
    }

    fn spec(&self) -> Result<MultivariateSpec> {
        MultivariateSpec::from_precision(MvFamily::CL, self.m.iter().copied().collect(), &self.p, self.big_r, Some(self.t))
    }

    fn loglik(&self, data: &Dataset) -> f64 {
        self.spec()
            .and_then(|s| loglik_cl(data, &s))
            .unwrap_or(f64::NEG_INFINITY)
    }
}

/// Symmetrizes and floors eigenvalues at 1e-10.
fn project_pd(p: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = 0.5 * (p + p.transpose());
    let mut eig = SymmetricEigen::new(sym);
    for v in eig.eigenvalues.iter_mut() {
        *v = v.max(1e-10);
    }
    let pd = eig.recompose();
    0.5 * (&pd + pd.transpose())
}

#[derive(Clone, Copy)]
enum Block {
    Location,
    Precision,
    RadiusPower,
    Slope,
}

/// Moves a CL block along its gradient direction g by α. α is Newton-sized
/// from the directional curvature, estimated by central differences of l.
fn cl_block_step(data: &Dataset, st: &ClState, block: Block, settings: &FitSettings, base: f64) -> Result<Option<(ClState, f64)>> {
    let spec = st.spec()?;
    let g = grad_cl(data, &spec)?;
    let apply = |alpha: f64| -> Option<ClState> {
        let mut next = st.clone();
        match block {
            Block::Location => next.m += &g.m * alpha,
            Block::Precision => next.p = project_pd(&(&st.p + &g.precision * alpha)),
            Block::RadiusPower => next.big_r += g.r_pow_n * alpha,
            Block::Slope => next.t += g.t * alpha,
        }
        (next.big_r > 0.0 && next.t > 0.0).then_some(next)
    };
    let (slope, scale) = match block {
        Block::Location => (g.m.norm_squared(), spec.sigma().diagonal().max().sqrt()),
        Block::Precision => (g.precision.norm_squared(), st.p.abs().max()),
        Block::RadiusPower => (g.r_pow_n * g.r_pow_n, st.big_r),
        Block::Slope => (g.t * g.t, st.t),
    };
    if !(slope > 0.0) || !slope.is_finite() {
        return Ok(None);
    }
    let gnorm = slope.sqrt();
    let eps = 1e-4 * scale / gnorm;
    let eval = |alpha: f64| apply(alpha).map_or(f64::NEG_INFINITY, |s| s.loglik(data));
    let curv = (eval(eps) - 2.0 * base + eval(-eps)) / (eps * eps);
    let mut alpha = if curv.is_finite() && curv.abs() >= 1e-12 {
        settings.step_scale * slope / curv.abs()
    } else {
        0.1 * scale / gnorm
    };
    // keep R and t positive
    let limit = match block {
        Block::RadiusPower if g.r_pow_n < 0.0 => Some(-st.big_r / g.r_pow_n),
        Block::Slope if g.t < 0.0 => Some(-st.t / g.t),
        _ => None,
    };
    if let Some(limit) = limit {
        if alpha >= limit {
            alpha = 0.5 * limit;
        }
    }
    for _ in 0..=settings.max_halvings {
        if let Some(next) = apply(alpha) {
            let l = next.loglik(data);
            if l.is_finite() && l >= base {
                return Ok(Some((next, l)));
            }
            if l >= base - settings.ascent_slack && block_norm2(data, &next, block)? < slope {
                return Ok(Some((next, l)));
            }
        }
        alpha *= settings.backtrack_factor;
    }
    Ok(None)
}

fn block_norm2(data: &Dataset, st: &ClState, block: Block) -> Result<f64> {
    let g = grad_cl(data, &st.spec()?)?;
    Ok(match block {
        Block::Location => g.m.norm_squared(),
        Block::Precision => g.precision.norm_squared(),
        Block::RadiusPower => g.r_pow_n * g.r_pow_n,
        Block::Slope => g.t * g.t,
    })
}

fn cl_criterion(data: &Dataset, st: &ClState) -> Result<f64> {
    let spec = st.spec()?;
    let g = grad_cl(data, &spec)?;
    let loc_scale = spec.sigma().diagonal().max().sqrt();
    let prec_scale = st.p.abs().max();
    let worst = (g.m.amax() * loc_scale)
        .max(g.precision.amax() * prec_scale)
        .max((g.r_pow_n * st.big_r).abs())
        .max((g.t * st.t).abs());
    Ok(worst / data.len() as f64)
}

/// CL fit updating m, Σ⁻¹, rⁿ and t in turn.
pub fn fit_cl(data: &Dataset, init: &MultivariateSpec, settings: &FitSettings) -> Result<(MultivariateSpec, FitReport)> {
    settings.validate()?;
    require_cl(init, data)?;
    if data.len() <= data.dim() {
        return Err(Error::Degenerate("CL fit needs more points than dimensions".into()));
    }
    let mut st = ClState::of(init);
    let mut trace = vec![st.loglik(data)];
    if !trace[0].is_finite() {
        return Err(Error::InvalidInit(format!("{init} has non-finite log-likelihood")));
    }
    let mut state = LoopState {
        iterations: 0,
        termination: Termination::MaxIters,
        grad_norm: cl_criterion(data, &st)?,
    };
    if state.grad_norm < settings.grad_tol {
        state.termination = Termination::GradTol;
    } else {
        while state.iterations < settings.max_iters {
            let mut l = *trace.last().expect("nonempty");
            let mut accepted = 0;
            for block in [Block::Location, Block::Precision, Block::RadiusPower, Block::Slope] {
                if let Some((next, lv)) = cl_block_step(data, &st, block, settings, l)? {
                    st = next;
                    l = lv;
                    accepted += 1;
                }
            }
            state.iterations += 1;
            trace.push(l);
            state.grad_norm = cl_criterion(data, &st)?;
            if state.grad_norm < settings.grad_tol {
                state.termination = Termination::GradTol;
                break;
            }
            if accepted == 0 {
                state.termination = Termination::Stalled;
                break;
            }
        }
    }
    let spec = st.spec()?;
    let n = spec.n();
    let constrained = (n + 1) * (n + 2) / 2;
    let mut params = BTreeMap::new();
    for (i, v) in spec.m().iter().enumerate() {
        params.insert(format!("m{i}"), *v);
    }
    for i in 0..n {
        for j in i..n {
            params.insert(format!("Sigma{i}{j}"), spec.sigma()[(i, j)]);
        }
    }
    params.insert("r".into(), spec.r());
    params.insert("t".into(), st.t);
    let rep = report(state, trace, params, data.len(), constrained + 1, Some(constrained), vec![]);
    Ok((spec, rep))
}

/// A model accepted by [`fit`].
#[derive(Clone, Debug, PartialEq)]
pub enum FitModel {
    Univariate(UnivariateSpec),
    Multivariate(MultivariateSpec),
}

/// Dispatches to the AL, BL or CL fitter.
pub fn fit(data: &Dataset, init: &FitModel, settings: &FitSettings) -> Result<(FitModel, FitReport)> {
    match init {
        FitModel::Univariate(spec) => match spec.tag() {
            FamilyTag::AL => fit_al(data, spec, settings).map(|(s, r)| (FitModel::Univariate(s), r)),
            FamilyTag::BL => fit_bl(data, spec, settings).map(|(s, r)| (FitModel::Univariate(s), r)),
            other => Err(Error::Unsupported(format!("maximum likelihood for {other}"))),
        },
        FitModel::Multivariate(spec) => fit_cl(data, spec, settings).map(|(s, r)| (FitModel::Multivariate(s), r)),
    }
}

/// Log-likelihood of the best-fit normal (maximum likelihood mean and variance).
pub fn loglik_normal_mle(xs: &[f64]) -> f64 {
    let (_, sd) = weighted_mean_sd(xs, None);
    let n = xs.len() as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * sd * sd).ln() - 0.5 * n
}

/// One analytic-vs-finite-difference comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckRow {
    pub instance: usize,
    pub param: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

fn central5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn check_row(instance: usize, param: impl Into<String>, analytic: f64, numeric: f64) -> GradCheckRow {
    let scale = analytic.abs().max(numeric.abs());
    GradCheckRow {
        instance,
        param: param.into(),
        analytic,
        numeric,
        rel_err: if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale },
    }
}

/// Compares analytic partials with five-point central differences on random
/// instances. AL covers first and second partials; BL compares the flat-regime
/// approximation with the exact likelihood; CL covers m, Σ⁻¹, rⁿ and t.
pub fn gradcheck(family: &str, instances: usize, seed: u64) -> Result<Vec<GradCheckRow>> {
    use rand::Rng;
    let mut rng = crate::data::seeded_rng(seed);
    let mut rows = Vec::new();
    match family.to_ascii_uppercase().as_str() {
        "AL" => {
            for k in 0..instances {
                let a = rng.random_range(-5.0..5.0);
                let b = a + rng.random_range(0.5..10.0);
                let s = rng.random_range(0.05..2.0);
                let (lo, hi) = (a - 3.0 * s - 2.0, b + 3.0 * s + 3.0);
                let xs: Vec<f64> = (0..50).map(|_| rng.random_range(lo..hi)).collect();
                let l = |a: f64, b: f64, s: f64| loglik_al(&xs, None, a, b, s);
                let g = |a: f64, b: f64, s: f64| grad_al(&xs, None, a, b, s);
                let (gr, hs) = (g(a, b, s), hess_al(&xs, None, a, b, s));
                let (h, hs_) = (1e-3 * s, 1e-4 * s);
                rows.push(check_row(k, "a", gr.a, central5(|v| l(v, b, s), a, h)));
                rows.push(check_row(k, "b", gr.b, central5(|v| l(a, v, s), b, h)));
                rows.push(check_row(k, "s", gr.s, central5(|v| l(a, b, v), s, hs_)));
                rows.push(check_row(k, "aa", hs.aa, central5(|v| g(v, b, s).a, a, h)));
                rows.push(check_row(k, "bb", hs.bb, central5(|v| g(a, v, s).b, b, h)));
                rows.push(check_row(k, "ss", hs.ss, central5(|v| g(a, b, v).s, s, hs_)));
                rows.push(check_row(k, "ab", hs.ab, central5(|v| g(a, v, s).a, b, h)));
                rows.push(check_row(k, "as", hs.a_s, central5(|v| g(a, b, v).a, s, hs_)));
                rows.push(check_row(k, "bs", hs.b_s, central5(|v| g(a, b, v).b, s, hs_)));
            }
        }
        "BL" => {
            let mut k = 0;
            while k < instances {
                let a = rng.random_range(-5.0..5.0);
                let w = rng.random_range(2.0..20.0);
                let b = a + w;
                let s = w * rng.random_range(0.01..0.05);
                let t = w * rng.random_range(0.01..0.05);
                let (lo, hi) = (a + rng.random_range(-0.2..0.2) * w, b + rng.random_range(-0.2..0.2) * w);
                let xs: Vec<f64> = (0..50).map(|_| rng.random_range(lo..hi)).collect();
                let g = grad_bl_flat(&xs, None, a, b, s, t, 0.05);
                if !g.flat {
                    continue;
                }
                let l = |a: f64, b: f64, s: f64, t: f64| loglik_bl(&xs, None, a, b, s, t).unwrap_or(f64::NAN);
                rows.push(check_row(k, "a", g.a, central5(|v| l(v, b, s, t), a, 1e-3 * s)));
                rows.push(check_row(k, "b", g.b, central5(|v| l(a, v, s, t), b, 1e-3 * t)));
                rows.push(check_row(k, "s", g.s, central5(|v| l(a, b, v, t), s, 1e-3 * s)));
                rows.push(check_row(k, "t", g.t, central5(|v| l(a, b, s, v), t, 1e-3 * t)));
                k += 1;
            }
        }
        "CL" => {
            for k in 0..instances {
                let n = 1 + k % 3;
                let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let sigma = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
                let m: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let r = rng.random_range(0.5..2.0);
                let t = rng.random_range(0.3..3.0);
                let spec = MultivariateSpec::cl(m.clone(), sigma, r, t)?;
                let pts: Vec<Vec<f64>> = (0..40).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
                let data = Dataset::from_rows(&pts, "gradcheck")?;
                let g = grad_cl(&data, &spec)?;
                let p = spec.precision();
                let big_r = spec.r_pow_n();
                let l = |m: &[f64], p: &DMatrix<f64>, big_r: f64, t: f64| {
                    MultivariateSpec::from_precision(MvFamily::CL, m.to_vec(), p, big_r, Some(t))
                        .and_then(|s| loglik_cl(&data, &s))
                        .unwrap_or(f64::NAN)
                };
                for i in 0..n {
                    let fd = central5(
                        |v| {
                            let mut mm = m.clone();
                            mm[i] = v;
                            l(&mm, &p, big_r, t)
                        },
                        m[i],
                        1e-3,
                    );
                    rows.push(check_row(k, format!("m{i}"), g.m[i], fd));
                }
                for i in 0..n {
                    for j in i..n {
                        // a symmetric perturbation moves both (i, j) and (j, i)
                        let fd = central5(
                            |v| {
                                let mut pp = p.clone();
                                pp[(i, j)] = v;
                                pp[(j, i)] = v;
                                l(&m, &pp, big_r, t)
                            },
                            p[(i, j)],
                            1e-4,
                        );
                        let fd = if i == j { fd } else { 0.5 * fd };
                        rows.push(check_row(k, format!("P{i}{j}"), g.precision[(i, j)], fd));
                    }
                }
                rows.push(check_row(k, "r_pow_n", g.r_pow_n, central5(|v| l(&m, &p, v, t), big_r, 1e-4 * big_r)));
                rows.push(check_row(k, "t", g.t, central5(|v| l(&m, &p, big_r, v), t, 1e-4 * t)));
            }
        }
        other => return Err(Error::Unsupported(format!("gradient check for {other}"))),
    }
    Ok(rows)
}
