use std::f64::consts::PI;

use super::{finite_all, numeric, require, type_a_central_moment, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{dirichlet_eta, polylog_neg, sigmoid, sigmoid_d1, sigmoid_d2, softplus, MAX_POLYLOG_ORDER};

/// Uniform compounded with a logistic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct CompoundLogistic {
    a: f64,
    b: f64,
    s: f64,
}

/// ln p_AL for z = (x − m)/s and ρ = r/s, without the −ln(2r) term.
#[inline]
pub(crate) fn al_log_shape(u: f64, rho: f64) -> f64 {
    let u = u.abs();
    let d = u - rho;
    let den = if d > 0.0 {
        d + ((-2.0 * u).exp() + (-d).exp() + (-u - rho).exp()).ln_1p()
    } else {
        (d.exp() + (-u - rho).exp() + (-2.0 * rho).exp()).ln_1p()
    };
    (-(-2.0 * rho).exp_m1()).ln() - den
}

/// Logistic central moment E[L^j] at unit scale, j even.
pub(crate) fn logistic_moment(j: u32) -> f64 {
    if j == 0 {
        return 1.0;
    }
    let mut f = 1.0;
    for i in 2..=j {
        f *= i as f64;
    }
    2.0 * f * dirichlet_eta(j as f64)
}

impl CompoundLogistic {
    pub fn new(a: f64, b: f64, s: f64) -> Result<Self> {
        finite_all("AL", &[a, b, s])?;
        require(a < b, "AL", "requires a < b")?;
        require(s > 0.0, "AL", "requires s > 0")?;
        Ok(CompoundLogistic { a, b, s })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn m(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    pub fn r(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    fn lower_cdf(&self, x: f64) -> f64 {
        let d = (self.b - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        if d < 700.0 {
            (sigmoid(zb) * d.exp_m1()).ln_1p() / d
        } else {
            let za = (x - self.a) / self.s;
            (softplus(za) - softplus(zb)) / d
        }
    }

    fn lower_quantile(&self, v: f64) -> f64 {
        let d = (self.b - self.a) / self.s;
        let lhs = (-(-d * v).exp_m1()).ln() + d * v;
        let rhs = (-(-d * (1.0 - v)).exp_m1()).ln();
        self.a + self.s * (lhs - rhs)
    }
}

impl UnivariateFamily for CompoundLogistic {
    fn tag(&self) -> FamilyTag {
        FamilyTag::AL
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("s", self.s)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        -(2.0 * self.r()).ln() + al_log_shape((x - self.m()) / self.s, self.r() / self.s)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x <= self.m() {
            self.lower_cdf(x)
        } else {
            1.0 - self.lower_cdf(2.0 * self.m() - x)
        }
    }

    fn cdf_method(&self) -> Method {
        Method::ClosedForm
    }

    fn quantile(&self, v: f64) -> Result<f64> {
        numeric::check_prob(v)?;
        if v <= 0.5 {
            Ok(self.lower_quantile(v))
        } else {
            Ok(2.0 * self.m() - self.lower_quantile(1.0 - v))
        }
    }

    fn quantile_method(&self) -> Method {
        Method::ClosedForm
    }

    fn mode(&self) -> f64 {
        self.m()
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn scale(&self) -> f64 {
        self.s
    }

    fn spread(&self) -> f64 {
        self.r() + 3.0 * self.s
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.m(), self.b];
        v.extend(numeric::edge_points(self.a, self.s));
        v.extend(numeric::edge_points(self.b, self.s));
        numeric::tidy(v)
    }

    fn normalizer(&self) -> Option<f64> {
        Some(1.0 / (self.b - self.a))
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        if k == 0 {
            return Ok(MomentReport::closed(0, 1.0));
        }
        let n = k as i32;
        if n < MAX_POLYLOG_ORDER {
            let rho = self.r() / self.s;
            let mut fact = 1.0;
            for i in 2..=k {
                fact *= i as f64;
            }
            let bracket = -polylog_neg(n + 1, rho)? + polylog_neg(n + 1, -rho)?;
            let v = self.s.powi(n + 1) / self.r() * fact * bracket;
            Ok(MomentReport::closed(k, v))
        } else {
            let v = type_a_central_moment(k, self.r(), self.s, logistic_moment);
            Ok(MomentReport::closed(k, v))
        }
    }

    fn kurtosis(&self) -> Result<f64> {
        let q = (self.r() / (PI * self.s)).powi(2);
        Ok(9.0 / 5.0 + 12.0 / (5.0 * (1.0 + q)))
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let za = (x - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        (sigmoid_d1(za) - sigmoid_d1(zb)) / (self.s * (self.b - self.a))
    }

    fn pdf_d2(&self, x: f64) -> f64 {
        let za = (x - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        (sigmoid_d2(za) - sigmoid_d2(zb)) / (self.s * self.s * (self.b - self.a))
    }
}
