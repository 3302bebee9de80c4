//! Special functions and numerical integration.

mod fermi;
mod polylog;
pub mod quad;

pub use fermi::{fermi_dirac_complete, fermi_dirac_incomplete};
pub use polylog::{dirichlet_eta, polylog_neg, MAX_POLYLOG_ORDER};
pub use quad::{integrate, integrate_with, Integral, QuadratureSettings};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LN_2: f64 = std::f64::consts::LN_2;
pub const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Lower,
    Upper,
}

/// erf(x) = sign(x)·P(1/2, x²).
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return x.signum();
    }
    if x == 0.0 {
        return x;
    }
    let p = statrs::function::gamma::gamma_lr(0.5, x * x);
    p.copysign(x)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    if x == 0.0 {
        return 1.0;
    }
    let q = statrs::function::gamma::gamma_ur(0.5, x * x);
    if x >= 0.0 {
        q
    } else {
        2.0 - q
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// Unregularized incomplete gamma: γ(s,x) for `Lower`, Γ(s,x) for `Upper`.
pub fn incomplete_gamma(s: f64, x: f64, tail: Tail) -> Result<f64> {
    check_gamma_args(s, x)?;
    Ok(regularized_gamma(s, x, tail)? * gamma(s))
}

/// Regularized incomplete gamma P(s,x) or Q(s,x).
pub fn regularized_gamma(s: f64, x: f64, tail: Tail) -> Result<f64> {
    check_gamma_args(s, x)?;
    if x == f64::INFINITY {
        return Ok(match tail {
            Tail::Lower => 1.0,
            Tail::Upper => 0.0,
        });
    }
    if x == 0.0 {
        return Ok(match tail {
            Tail::Lower => 0.0,
            Tail::Upper => 1.0,
        });
    }
    let r = match tail {
        Tail::Lower => statrs::function::gamma::checked_gamma_lr(s, x),
        Tail::Upper => statrs::function::gamma::checked_gamma_ur(s, x),
    };
    r.map_err(|e| Error::Domain(e.to_string()))
}

fn check_gamma_args(s: f64, x: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma needs s > 0, got {s}")));
    }
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma needs x >= 0, got {x}")));
    }
    Ok(())
}

pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    statrs::function::beta::checked_ln_beta(a, b).map_err(|e| Error::Domain(e.to_string()))
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    statrs::function::beta::checked_beta_reg(a, b, x).map_err(|e| Error::Domain(e.to_string()))
}

/// ln(1 + e^x) without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function 1/(1+e^{−x}).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// σ'(x) = σ(x)σ(−x).
#[inline]
pub fn sigmoid_d1(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// σ''(x) = σ'(x)(1 − 2σ(x)).
#[inline]
pub fn sigmoid_d2(x: f64) -> f64 {
    sigmoid_d1(x) * (1.0 - 2.0 * sigmoid(x))
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln sinh(x) for x > 0.
#[inline]
pub fn ln_sinh(x: f64) -> f64 {
    if x > 30.0 {
        x - LN_2 + (-(-2.0 * x).exp_m1()).ln()
    } else {
        x.sinh().ln()
    }
}

/// ln(cosh u + cosh v).
#[inline]
pub fn ln_cosh_sum(u: f64, v: f64) -> f64 {
    let (u, v) = (u.abs(), v.abs());
    let m = u.max(v);
    m - LN_2 + ((u - m).exp() + (-u - m).exp() + (v - m).exp() + (-v - m).exp()).ln()
}

/// sinh(u)/(cosh u + cosh v) for u, v ≥ 0, exponent-shifted.
#[inline]
pub fn sinh_over_cosh_sum(u: f64, v: f64) -> f64 {
    let m = u.abs().max(v.abs());
    let num = (u - m).exp() - (-u - m).exp();
    let den = (u - m).exp() + (-u - m).exp() + (v - m).exp() + (-v - m).exp();
    num / den
}

/// 1/tanh(x).
#[inline]
pub fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

/// csch²(x) without overflow.
#[inline]
pub fn csch2(x: f64) -> f64 {
    let ax = x.abs();
    if ax > 30.0 {
        let e = (-2.0 * ax).exp();
        4.0 * e / ((1.0 - e) * (1.0 - e))
    } else {
        let s = x.sinh();
        1.0 / (s * s)
    }
}

/// sech²(x) without overflow.
#[inline]
pub fn sech2(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
