use super::{finite_all, numeric, require, FamilyTag, UnivariateFamily};
use crate::error::{Error, Result};
use crate::specfun::LN_2;

/// Product of a rising and a falling Laplace CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceProduct {
    a: f64,
    b: f64,
    s: f64,
    t: f64,
    c: f64,
    mode: f64,
}

/// Relative |s − t|/s below which the normalizer uses its series form.
pub const BD_SERIES_SWITCH: f64 = 1e-4;

/// ln F_D(x; a, s).
fn ln_laplace_cdf(z: f64) -> f64 {
    if z < 0.0 {
        z - LN_2
    } else {
        (-0.5 * (-z).exp()).ln_1p()
    }
}

impl LaplaceProduct {
    pub fn new(a: f64, b: f64, s: f64, t: f64) -> Result<Self> {
        finite_all("BD", &[a, b, s, t])?;
        require(a < b, "BD", "requires a < b")?;
        require(s > 0.0, "BD", "requires s > 0")?;
        require(t > 0.0, "BD", "requires t > 0")?;
        let c = Self::normalizing_constant(a, b, s, t)?;
        let mut d = LaplaceProduct {
            a,
            b,
            s,
            t,
            c,
            mode: 0.5 * (a + b),
        };
        let w = s.max(t);
        d.mode = numeric::argmax(|x| d.log_pdf(x), a - 20.0 * w, b + 20.0 * w, 1e-10 * (b - a + w));
        Ok(d)
    }

    pub fn normalizing_constant(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
        let d = b - a;
        let rel = (s - t).abs() / s;
        let tails = if rel < BD_SERIES_SWITCH {
            // [h(s) − h(t)]/(2(s² − t²)) with h(u) = u³e^{−D/u}, expanded about the midpoint
            let u = 0.5 * (s + t);
            let e = (-d / u).exp();
            let q = d / u;
            let h1 = e * (3.0 * u * u + d * u);
            let h3 = e * (6.0 + 6.0 * q + 3.0 * q * q + q * q * q);
            (h1 + h3 * (s - t) * (s - t) / 24.0) / (2.0 * (s + t))
        } else {
            s.powi(3) * (-d / s).exp() / (2.0 * (s * s - t * t)) + t.powi(3) * (-d / t).exp() / (2.0 * (t * t - s * s))
        };
        let c = 1.0 / (d + tails);
        if c.is_finite() && c > 0.0 {
            Ok(c)
        } else {
            Err(Error::NearSingular(format!(
                "BD normalizer not finite for s={s}, t={t}"
            )))
        }
    }
}

impl UnivariateFamily for LaplaceProduct {
    fn tag(&self) -> FamilyTag {
        FamilyTag::BD
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("s", self.s), ("t", self.t)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        self.c.ln() + ln_laplace_cdf((x - self.a) / self.s) + ln_laplace_cdf((self.b - x) / self.t)
    }

    fn mode(&self) -> f64 {
        self.mode
    }

    fn is_symmetric(&self) -> bool {
        self.s == self.t
    }

    fn scale(&self) -> f64 {
        self.s.min(self.t)
    }

    fn spread(&self) -> f64 {
        0.5 * (self.b - self.a) + 3.0 * self.s.max(self.t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.mode, self.b];
        v.extend(numeric::edge_points(self.a, self.s));
        v.extend(numeric::edge_points(self.b, self.t));
        numeric::tidy(v)
    }

    fn normalizer(&self) -> Option<f64> {
        Some(self.c)
    }
}
