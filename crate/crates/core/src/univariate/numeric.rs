//! Quadrature- and root-finding fallbacks shared by the families.

use super::{Method, MomentReport, MomentValue, UnivariateFamily};
use crate::error::{Error, Result};
use crate::specfun::{integrate_with, QuadratureSettings};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

pub fn settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_subdivisions: 4000,
        tail_cutoff: None,
    }
}

pub(crate) fn check_prob(v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {v} outside (0,1)")))
    }
}

/// ∫ g(x)·pdf(x) over [lo, hi] using the family's break-points.
pub fn integrate_weighted<F, G>(f: &F, g: G, lo: f64, hi: f64) -> Result<f64>
where
    F: UnivariateFamily + ?Sized,
    G: Fn(f64) -> f64,
{
    let (slo, shi) = f.support();
    let (lo, hi) = (lo.max(slo), hi.min(shi));
    if !(hi > lo) {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = f.breakpoints().into_iter().filter(|&x| x > lo && x < hi).collect();
    let r = integrate_with(|x| g(x) * f.pdf(x), lo, hi, &breaks, f.scale(), &settings())?;
    Ok(r.value)
}

pub fn total_mass<F: UnivariateFamily + ?Sized>(f: &F) -> Result<f64> {
    integrate_weighted(f, |_| 1.0, f64::NEG_INFINITY, f64::INFINITY)
}

/// Distribution function by integrating away from the mode.
pub fn cdf<F: UnivariateFamily + ?Sized>(f: &F, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let (slo, shi) = f.support();
    if x <= slo {
        return 0.0;
    }
    if x >= shi {
        return 1.0;
    }
    let v = if x <= f.mode() {
        integrate_weighted(f, |_| 1.0, f64::NEG_INFINITY, x)
    } else {
        integrate_weighted(f, |_| 1.0, x, f64::INFINITY).map(|q| 1.0 - q)
    };
    v.unwrap_or(f64::NAN).clamp(0.0, 1.0)
}

/// Inverse of `cdf` by bracketing from the mode and safeguarded Newton steps.
pub fn quantile<F: UnivariateFamily + ?Sized>(f: &F, v: f64) -> Result<f64> {
    check_prob(v)?;
    let (slo, shi) = f.support();
    let mode = f.mode();
    let mut step = f.spread().max(f.scale());
    let c_mode = f.cdf(mode);
    if c_mode.is_nan() {
        return Err(Error::Domain("distribution function is NaN at the mode".into()));
    }
    let below = c_mode > v;
    let (mut lo, mut hi) = (mode, mode);
    let mut expansions = 0;
    loop {
        if below {
            lo = (mode - step).max(slo);
            if f.cdf(lo) <= v || lo == slo {
                break;
            }
            hi = lo;
        } else {
            hi = (mode + step).min(shi);
            if f.cdf(hi) >= v || hi == shi {
                break;
            }
            lo = hi;
        }
        step *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::Convergence(format!("could not bracket quantile {v}")));
        }
    }
    solve_increasing(|x| f.cdf(x) - v, |x| f.pdf(x), lo, hi, 1e-13)
}

/// Root of an increasing function inside [lo, hi] with derivative `d`.
pub(crate) fn solve_increasing(
    g: impl Fn(f64) -> f64,
    d: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    ftol: f64,
) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let gx = g(x);
        if gx.is_nan() {
            return Err(Error::Convergence("objective returned NaN in root solve".into()));
        }
        if gx.abs() <= ftol {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
            return Ok(x);
        }
        let dx = d(x);
        let newton = x - gx / dx;
        x = if dx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::Convergence("root solve exhausted iterations".into()))
}

/// Maximizer of a unimodal function on [lo, hi] by golden-section search.
pub fn argmax(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > tol {
        if g1 < g2 {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + GOLDEN * (hi - lo);
            g2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - GOLDEN * (hi - lo);
            g1 = g(x1);
        }
        if hi - lo <= 2.0 * f64::EPSILON * (lo.abs() + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn mean<F: UnivariateFamily + ?Sized>(f: &F) -> Result<f64> {
    let m = f.mode();
    let left = integrate_weighted(f, |x| x - m, f64::NEG_INFINITY, m)?;
    let right = integrate_weighted(f, |x| x - m, m, f64::INFINITY)?;
    Ok(m + left + right)
}

pub fn central_moment<F: UnivariateFamily + ?Sized>(f: &F, k: u32) -> Result<f64> {
    check_even(k)?;
    if k == 0 {
        return Ok(1.0);
    }
    let mu = f.mean()?;
    let p = k as i32;
    let left = integrate_weighted(f, |x| (x - mu).powi(p), f64::NEG_INFINITY, mu)?;
    let right = integrate_weighted(f, |x| (x - mu).powi(p), mu, f64::INFINITY)?;
    Ok(left + right)
}

pub fn central_moment_report<F: UnivariateFamily + ?Sized>(f: &F, k: u32) -> Result<MomentReport> {
    Ok(MomentReport {
        order: k,
        value: MomentValue::Finite(central_moment(f, k)?),
        method: Method::Quadrature,
    })
}

pub(crate) fn check_even(k: u32) -> Result<()> {
    if k % 2 == 0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("moment order {k} must be even")))
    }
}

pub fn kurtosis_from_moments<F: UnivariateFamily + ?Sized>(f: &F) -> Result<f64> {
    let m2 = f.central_moment(2)?;
    let m4 = f.central_moment(4)?;
    match (m2.value, m4.value) {
        (MomentValue::Finite(a), MomentValue::Finite(b)) => Ok(b / (a * a)),
        _ => Err(Error::DivergentMoment {
            family: f.tag().to_string(),
            order: 4,
        }),
    }
}

fn step<F: UnivariateFamily + ?Sized>(f: &F) -> f64 {
    f64::EPSILON.cbrt() * f.scale()
}

pub fn diff1<F: UnivariateFamily + ?Sized>(f: &F, x: f64) -> f64 {
    let h = step(f);
    (f.pdf(x + h) - f.pdf(x - h)) / (2.0 * h)
}

pub fn diff2<F: UnivariateFamily + ?Sized>(f: &F, x: f64) -> f64 {
    let h = step(f);
    (f.pdf(x + h) - 2.0 * f.pdf(x) + f.pdf(x - h)) / (h * h)
}

/// Sorted, de-duplicated finite break-points.
pub(crate) fn tidy(mut pts: Vec<f64>) -> Vec<f64> {
    pts.retain(|x| x.is_finite());
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// a ± k·s for k in {3, 10, 30}.
pub(crate) fn edge_points(at: f64, s: f64) -> [f64; 6] {
    [at - 30.0 * s, at - 10.0 * s, at - 3.0 * s, at + 3.0 * s, at + 10.0 * s, at + 30.0 * s]
}
