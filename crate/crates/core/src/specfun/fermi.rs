//! Complete and incomplete Fermi–Dirac integrals
//! F_j(x, u) = (1/Γ(j+1)) ∫_u^∞ t^j/(e^{t−x}+1) dt.

use super::quad::{integrate_with, QuadratureSettings};
use super::{ln_gamma, polylog_neg, softplus, MAX_POLYLOG_ORDER};
use crate::error::{Error, Result};

fn settings() -> QuadratureSettings {
    QuadratureSettings {
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        max_subdivisions: 4000,
        tail_cutoff: None,
    }
}

/// 1/(e^z + 1) without overflow.
#[inline]
fn fermi_factor(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn check_order(j: f64) -> Result<()> {
    if !(j > -1.0) || !j.is_finite() {
        return Err(Error::Domain(format!("Fermi-Dirac order must exceed -1, got {j}")));
    }
    Ok(())
}

fn integer_order(j: f64) -> Option<i32> {
    if j.fract() == 0.0 && j >= 0.0 && j < (MAX_POLYLOG_ORDER - 1) as f64 {
        Some(j as i32)
    } else {
        None
    }
}

/// Complete integral F_j(x) = −Li_{j+1}(−e^x).
pub fn fermi_dirac_complete(j: f64, x: f64) -> Result<f64> {
    check_order(j)?;
    if x.is_nan() {
        return Err(Error::Domain("NaN argument".into()));
    }
    if x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if j == 0.0 {
        return Ok(softplus(x));
    }
    if let Some(ji) = integer_order(j) {
        return Ok(-polylog_neg(ji + 1, x)?);
    }
    if x <= -1.0 {
        return Ok(alternating_series(j, x));
    }
    quadrature(j, x, 0.0)
}

/// Incomplete integral with lower limit `u ≥ 0`.
pub fn fermi_dirac_incomplete(j: f64, x: f64, u: f64) -> Result<f64> {
    check_order(j)?;
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("lower limit must be non-negative, got {u}")));
    }
    if x.is_nan() {
        return Err(Error::Domain("NaN argument".into()));
    }
    if u == 0.0 {
        return fermi_dirac_complete(j, x);
    }
    if u == f64::INFINITY || x == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if j == 0.0 {
        return Ok(softplus(x - u));
    }
    if let Some(ji) = integer_order(j) {
        // shift t = u + τ and expand t^j binomially
        let mut sum = 0.0;
        let mut upow_over_fact = 1.0;
        for i in (0..=ji).rev() {
            let k = ji - i;
            if k > 0 {
                upow_over_fact *= u / k as f64;
            }
            sum += upow_over_fact * fermi_dirac_complete(i as f64, x - u)?;
        }
        return Ok(sum);
    }
    quadrature(j, x, u)
}

fn alternating_series(j: f64, x: f64) -> f64 {
    let z = x.exp();
    let mut zk = 1.0;
    let mut sum = 0.0;
    for k in 1..=400 {
        zk *= -z;
        let term = zk / (k as f64).powf(j + 1.0);
        sum -= term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn quadrature(j: f64, x: f64, u: f64) -> Result<f64> {
    let norm = (-ln_gamma(j + 1.0)).exp();
    let value = if j > 0.0 {
        let f = |t: f64| t.powf(j) * fermi_factor(t - x);
        let breaks = [x, x + 10.0];
        integrate_with(f, u, f64::INFINITY, &breaks, 1.0, &settings())?.value
    } else {
        // y = t^{j+1} removes the integrable singularity at the origin
        let p = 1.0 / (j + 1.0);
        let f = |y: f64| fermi_factor(y.powf(p) - x) * p;
        let y0 = u.powf(j + 1.0);
        let xp = x.max(0.0);
        let breaks = [xp.powf(j + 1.0), (xp + 10.0).powf(j + 1.0)];
        let scale = (j + 1.0) * x.max(1.0).powf(j);
        integrate_with(f, y0, f64::INFINITY, &breaks, scale, &settings())?.value
    };
    Ok(value * norm)
}
