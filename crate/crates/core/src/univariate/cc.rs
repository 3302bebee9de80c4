use std::f64::consts::PI;

use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, MomentValue, UnivariateFamily};
use crate::error::{Error, Result};
use crate::specfun::regularized_beta;

/// Power-law symmetric density 1/(1 + |z|^β).
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedCauchy {
    m: f64,
    s: f64,
    beta: f64,
    ln_c: f64,
}

impl GeneralizedCauchy {
    pub fn new(m: f64, s: f64, beta: f64) -> Result<Self> {
        finite_all("CC", &[m, s, beta])?;
        require(s > 0.0, "CC", "requires s > 0")?;
        require(beta > 1.0, "CC", "requires beta > 1 for integrability")?;
        // B(1 − 1/β, 1/β) = π / sin(π/β)
        let ln_b = PI.ln() - (PI / beta).sin().ln();
        let ln_c = beta.ln() - (2.0 * s).ln() - ln_b;
        Ok(GeneralizedCauchy { m, s, beta, ln_c })
    }

    fn survival(&self, y: f64) -> f64 {
        let yb = y.powf(self.beta);
        let (pa, pb) = (1.0 - 1.0 / self.beta, 1.0 / self.beta);
        let i = if yb < 1.0 {
            // complement at 1 − w = y^β/(1 + y^β) keeps precision near the centre
            1.0 - regularized_beta(yb / (1.0 + yb), pb, pa).unwrap_or(f64::NAN)
        } else {
            regularized_beta(1.0 / (1.0 + yb), pa, pb).unwrap_or(f64::NAN)
        };
        0.5 * i
    }
}

impl UnivariateFamily for GeneralizedCauchy {
    fn tag(&self) -> FamilyTag {
        FamilyTag::CC
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("m", self.m), ("s", self.s), ("beta", self.beta)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let y = (x - self.m).abs() / self.s;
        let lny = y.ln() * self.beta;
        let tail = if lny > 30.0 {
            lny + (-lny).exp().ln_1p()
        } else {
            lny.exp().ln_1p()
        };
        self.ln_c - tail
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
        Some(self.ln_c.exp())
    }

    fn mean(&self) -> Result<f64> {
        if self.beta > 2.0 {
            Ok(self.m)
        } else {
            Err(Error::DivergentMoment {
                family: "CC".into(),
                order: 1,
            })
        }
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        let value = if ((k + 1) as f64) < self.beta {
            let b = self.beta;
            MomentValue::Finite(self.s.powi(k as i32) * (PI / b).sin() / (PI * (k + 1) as f64 / b).sin())
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
        let y = z.abs();
        let b = self.beta;
        let yb = y.powf(b);
        -self.ln_c.exp() * b * y.powf(b - 1.0) * z.signum() / (self.s * (1.0 + yb) * (1.0 + yb))
    }
}
