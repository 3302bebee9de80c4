use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{ln_gamma, regularized_gamma, Tail};

#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedNormal {
    mu: f64,
    s: f64,
    beta: f64,
    ln_c: f64,
}

impl GeneralizedNormal {
    pub fn new(mu: f64, s: f64, beta: f64) -> Result<Self> {
        finite_all("GN", &[mu, s, beta])?;
        require(s > 0.0, "GN", "requires s > 0")?;
        require(beta > 0.0, "GN", "requires beta > 0")?;
        let ln_c = beta.ln() - (2.0 * s).ln() - ln_gamma(1.0 / beta);
        Ok(GeneralizedNormal { mu, s, beta, ln_c })
    }

    /// N(mean, sd²) as GN{mean, sd·√2, 2}.
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(mean, sd * std::f64::consts::SQRT_2, 2.0)
    }

    fn moment_ratio(&self, k: u32) -> f64 {
        let b = self.beta;
        (ln_gamma((k + 1) as f64 / b) - ln_gamma(1.0 / b)).exp()
    }
}

impl UnivariateFamily for GeneralizedNormal {
    fn tag(&self) -> FamilyTag {
        FamilyTag::GN
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("mu", self.mu), ("s", self.s), ("beta", self.beta)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        self.ln_c - ((x - self.mu).abs() / self.s).powf(self.beta)
    }

    fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.s;
        let w = z.abs().powf(self.beta);
        let q = 0.5 * regularized_gamma(1.0 / self.beta, w, Tail::Upper).unwrap_or(f64::NAN);
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
        self.mu
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn scale(&self) -> f64 {
        self.s / self.beta.max(1.0)
    }

    fn spread(&self) -> f64 {
        self.s
    }

    fn breakpoints(&self) -> Vec<f64> {
        let s = self.s;
        numeric::tidy(vec![self.mu - 3.0 * s, self.mu - s, self.mu, self.mu + s, self.mu + 3.0 * s])
    }

    fn normalizer(&self) -> Option<f64> {
        Some(self.ln_c.exp())
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        Ok(MomentReport::closed(k, self.s.powi(k as i32) * self.moment_ratio(k)))
    }

    fn kurtosis(&self) -> Result<f64> {
        let b = self.beta;
        Ok((ln_gamma(5.0 / b) + ln_gamma(1.0 / b) - 2.0 * ln_gamma(3.0 / b)).exp())
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.s;
        if z == 0.0 {
            return 0.0;
        }
        let b = self.beta;
        -self.pdf(x) * b * z.abs().powf(b - 1.0) * z.signum() / self.s
    }

    fn pdf_d2(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.s;
        let b = self.beta;
        let p = self.pdf(x);
        if z == 0.0 {
            return if b > 2.0 {
                0.0
            } else if b == 2.0 {
                -2.0 * p / (self.s * self.s)
            } else {
                f64::NEG_INFINITY
            };
        }
        let y = z.abs();
        let g = b * y.powf(b - 1.0) / self.s;
        p * (g * g - b * (b - 1.0) * y.powf(b - 2.0) / (self.s * self.s))
    }
}
