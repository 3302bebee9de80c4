use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, MomentValue, UnivariateFamily};
use crate::error::{Error, Result};
use crate::specfun::{erf, SQRT_PI};

/// Saturated power density (1 − exp(−z^{−2}))/(2√π s).
#[derive(Clone, Debug, PartialEq)]
pub struct PeakFlattened {
    m: f64,
    s: f64,
}

impl PeakFlattened {
    pub fn new(m: f64, s: f64) -> Result<Self> {
        finite_all("DE", &[m, s])?;
        require(s > 0.0, "DE", "requires s > 0")?;
        Ok(PeakFlattened { m, s })
    }

    fn survival(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.5;
        }
        let w = 1.0 / z;
        0.5 * (erf(w) - (z / SQRT_PI) * -(-w * w).exp_m1())
    }
}

impl UnivariateFamily for PeakFlattened {
    fn tag(&self) -> FamilyTag {
        FamilyTag::DE
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("m", self.m), ("s", self.s)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.m) / self.s;
        let sat = if z == 0.0 { 1.0 } else { -(-1.0 / (z * z)).exp_m1() };
        sat.ln() - (2.0 * SQRT_PI * self.s).ln()
    }

    fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.m) / self.s;
        let q = self.survival(z.abs());
        if z < 0.0 {
            q
        } else {
            1.0 - q
        }
    }

    fn cdf_method(&self) -> Method {
        Method::ClosedForm
    }

    fn mode(&self) -> f64 {
        self.m
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn scale(&self) -> f64 {
        self.s
    }

    fn spread(&self) -> f64 {
        self.s
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (m, s) = (self.m, self.s);
        numeric::tidy(vec![m - 10.0 * s, m - s, m, m + s, m + 10.0 * s])
    }

    fn normalizer(&self) -> Option<f64> {
        Some(1.0 / (2.0 * SQRT_PI * self.s))
    }

    fn mean(&self) -> Result<f64> {
        Err(Error::DivergentMoment {
            family: "DE".into(),
            order: 1,
        })
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        let value = if k == 0 {
            MomentValue::Finite(1.0)
        } else {
            MomentValue::Infinite
        };
        Ok(MomentReport {
            order: k,
            value,
            method: Method::ClosedForm,
        })
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let z = (x - self.m) / self.s;
        if z == 0.0 {
            return 0.0;
        }
        -(-1.0 / (z * z)).exp() / (SQRT_PI * self.s * self.s * z.powi(3))
    }
}
