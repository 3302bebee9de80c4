use super::al::CompoundLogistic;
use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{fermi_dirac_complete, fermi_dirac_incomplete, ln_cosh_sum, ln_gamma, ln_sinh, sinh_over_cosh_sum, softplus};

/// Hyperbolic density sinh(R)/(cosh(|z|^β) + cosh R), normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicFermi {
    m: f64,
    r: f64,
    s: f64,
    beta: f64,
    big_r: f64,
    fj_diff: f64,
    ln_c: f64,
}

impl HyperbolicFermi {
    pub fn new(m: f64, r: f64, s: f64, beta: f64) -> Result<Self> {
        finite_all("CH", &[m, r, s, beta])?;
        require(r > 0.0, "CH", "requires r > 0")?;
        require(s > 0.0, "CH", "requires s > 0")?;
        require(beta > 0.0, "CH", "requires beta > 0")?;
        let big_r = (r / s).powf(beta);
        let fj_diff = Self::fd_diff(1.0 / beta - 1.0, big_r)?;
        let ln_c = beta.ln() - (2.0 * s).ln() - ln_gamma(1.0 / beta) - fj_diff.ln();
        require(ln_c.is_finite(), "CH", "normalizing constant is not finite")?;
        Ok(HyperbolicFermi {
            m,
            r,
            s,
            beta,
            big_r,
            fj_diff,
            ln_c,
        })
    }

    /// F_j(R) − F_j(−R).
    fn fd_diff(j: f64, big_r: f64) -> Result<f64> {
        if j == 0.0 {
            return Ok(big_r);
        }
        Ok(fermi_dirac_complete(j, big_r)? - fermi_dirac_complete(j, -big_r)?)
    }

    pub fn edge_width(&self) -> f64 {
        self.s.powf(self.beta) / (self.beta * self.r.powf(self.beta - 1.0))
    }

    fn survival(&self, y: f64) -> f64 {
        let w = y.powf(self.beta);
        let num = if self.beta == 1.0 {
            softplus(self.big_r - w) - softplus(-self.big_r - w)
        } else {
            let j = 1.0 / self.beta - 1.0;
            match (
                fermi_dirac_incomplete(j, self.big_r, w),
                fermi_dirac_incomplete(j, -self.big_r, w),
            ) {
                (Ok(p), Ok(q)) => p - q,
                _ => f64::NAN,
            }
        };
        0.5 * num / self.fj_diff
    }

    fn moment_ratio(&self, k: u32) -> Result<f64> {
        let q = (k + 1) as f64 / self.beta;
        let fk = Self::fd_diff(q - 1.0, self.big_r)?;
        Ok((ln_gamma(q) - ln_gamma(1.0 / self.beta)).exp() * fk / self.fj_diff)
    }
}

impl UnivariateFamily for HyperbolicFermi {
    fn tag(&self) -> FamilyTag {
        FamilyTag::CH
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("m", self.m), ("r", self.r), ("s", self.s), ("beta", self.beta)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let w = ((x - self.m).abs() / self.s).powf(self.beta);
        self.ln_c + ln_sinh(self.big_r) - ln_cosh_sum(w, self.big_r)
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
        if self.beta == 1.0 {
            Method::ClosedForm
        } else {
            Method::Quadrature
        }
    }

    fn quantile(&self, v: f64) -> Result<f64> {
        if self.beta == 1.0 {
            CompoundLogistic::new(self.m - self.r, self.m + self.r, self.s)?.quantile(v)
        } else {
            numeric::quantile(self, v)
        }
    }

    fn quantile_method(&self) -> Method {
        self.cdf_method()
    }

    fn mode(&self) -> f64 {
        self.m
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn scale(&self) -> f64 {
        self.edge_width().min(self.s)
    }

    fn spread(&self) -> f64 {
        self.r + self.s
    }

    fn breakpoints(&self) -> Vec<f64> {
        let w = self.scale();
        let mut v = vec![self.m];
        for side in [-1.0, 1.0] {
            let edge = self.m + side * self.r;
            v.extend(numeric::edge_points(edge, w).into_iter().filter(|x| side * (x - self.m) > 0.0));
            v.push(edge);
            v.push(self.m + side * (self.r + 3.0 * self.s));
        }
        numeric::tidy(v)
    }

    fn normalizer(&self) -> Option<f64> {
        Some(self.ln_c.exp())
    }

    fn central_moment(&self, k: u32) -> Result<MomentReport> {
        numeric::check_even(k)?;
        Ok(MomentReport::closed(k, self.s.powi(k as i32) * self.moment_ratio(k)?))
    }

    fn kurtosis(&self) -> Result<f64> {
        let m2 = self.moment_ratio(2)?;
        Ok(self.moment_ratio(4)? / (m2 * m2))
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let z = (x - self.m) / self.s;
        if z == 0.0 {
            return 0.0;
        }
        let y = z.abs();
        let b = self.beta;
        let w = y.powf(b);
        let dens = sinh_over_cosh_sum(self.big_r, w) * sinh_over_cosh_sum(w, self.big_r);
        -self.ln_c.exp() * dens * b * y.powf(b - 1.0) * z.signum() / self.s
    }
}
