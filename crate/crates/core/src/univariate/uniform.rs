use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct Uniform {
    a: f64,
    b: f64,
    height: f64,
}

impl Uniform {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        finite_all("U", &[a, b])?;
        require(a < b, "U", "requires a < b")?;
        Ok(Uniform {
            a,
            b,
            height: 1.0 / (b - a),
        })
    }

    pub fn height(&self) -> f64 {
        self.height
    }
}

impl UnivariateFamily for Uniform {
    fn tag(&self) -> FamilyTag {
        FamilyTag::U
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        if x >= self.a && x <= self.b {
            self.height.ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        if x >= self.a && x <= self.b {
            self.height
        } else {
            0.0
        }
    }

    fn cdf(&self, x: f64) -> f64 {
        ((x - self.a) * self.height).clamp(0.0, 1.0)
    }

    fn cdf_method(&self) -> Method {
        Method::ClosedForm
    }

    fn quantile(&self, v: f64) -> Result<f64> {
        numeric::check_prob(v)?;
        Ok(self.a + v * (self.b - self.a))
    }

    fn quantile_method(&self) -> Method {
        Method::ClosedForm
    }

    fn mode(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn scale(&self) -> f64 {
        self.b - self.a
    }

    fn spread(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![self.a, self.mode(), self.b]
    }

    fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn normalizer(&self) -> Option<f64> {
        Some(self.height)
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        let r = 0.5 * (self.b - self.a);
        Ok(MomentReport::closed(k, r.powi(k as i32) / (k + 1) as f64))
    }

    fn kurtosis(&self) -> Result<f64> {
        Ok(9.0 / 5.0)
    }

    fn pdf_d1(&self, _x: f64) -> f64 {
        0.0
    }

    fn pdf_d2(&self, _x: f64) -> f64 {
        0.0
    }
}
