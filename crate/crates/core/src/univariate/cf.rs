use super::{finite_all, numeric, require, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{fermi_dirac_complete, fermi_dirac_incomplete, ln_gamma, sigmoid_d1, softplus};

/// Fermi-function density σ((r^β − |x − m|^β)/s^β), normalized. The Ferreri
/// form (β = 2, parameterized by a and b) shares the implementation.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedFermi {
    m: f64,
    r: f64,
    s: f64,
    beta: f64,
    ferreri: bool,
    big_r: f64,
    fj: f64,
    ln_c: f64,
}

impl GeneralizedFermi {
    pub fn new(m: f64, r: f64, s: f64, beta: f64) -> Result<Self> {
        Self::build(m, r, s, beta, false, "CF")
    }

    /// CE{a, b, s} = CF{(a+b)/2, (b−a)/2, s, 2}.
    pub fn ferreri(a: f64, b: f64, s: f64) -> Result<Self> {
        finite_all("CE", &[a, b, s])?;
        require(a < b, "CE", "requires a < b")?;
        Self::build(0.5 * (a + b), 0.5 * (b - a), s, 2.0, true, "CE")
    }

    fn build(m: f64, r: f64, s: f64, beta: f64, ferreri: bool, name: &str) -> Result<Self> {
        finite_all(name, &[m, r, s, beta])?;
        require(r > 0.0, name, "requires r > 0")?;
        require(s > 0.0, name, "requires s > 0")?;
        require(beta > 0.0, name, "requires beta > 0")?;
        let big_r = (r / s).powf(beta);
        let fj = fermi_dirac_complete(1.0 / beta - 1.0, big_r)?;
        let ln_c = beta.ln() - (2.0 * s).ln() - ln_gamma(1.0 / beta) - fj.ln();
        require(ln_c.is_finite(), name, "normalizing constant is not finite")?;
        Ok(GeneralizedFermi {
            m,
            r,
            s,
            beta,
            ferreri,
            big_r,
            fj,
            ln_c,
        })
    }

    /// Width of the edge in x, s^β/(β r^{β−1}).
    pub fn edge_width(&self) -> f64 {
        self.s.powf(self.beta) / (self.beta * self.r.powf(self.beta - 1.0))
    }

    fn survival(&self, y: f64) -> f64 {
        if self.beta == 1.0 {
            0.5 * softplus(self.big_r - y) / self.fj
        } else {
            let j = 1.0 / self.beta - 1.0;
            0.5 * fermi_dirac_incomplete(j, self.big_r, y.powf(self.beta)).unwrap_or(f64::NAN) / self.fj
        }
    }

    fn lower_quantile(&self, v: f64) -> f64 {
        let u = self.big_r - (2.0 * v * self.fj).exp_m1().ln();
        self.m - self.s * u
    }

    fn moment_ratio(&self, k: u32) -> Result<f64> {
        let b = self.beta;
        let q = (k + 1) as f64 / b;
        let fk = fermi_dirac_complete(q - 1.0, self.big_r)?;
        Ok((ln_gamma(q) - ln_gamma(1.0 / b)).exp() * fk / self.fj)
    }
}

impl UnivariateFamily for GeneralizedFermi {
    fn tag(&self) -> FamilyTag {
        if self.ferreri {
            FamilyTag::CE
        } else {
            FamilyTag::CF
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        if self.ferreri {
            vec![("a", self.m - self.r), ("b", self.m + self.r), ("s", self.s)]
        } else {
            vec![("m", self.m), ("r", self.r), ("s", self.s), ("beta", self.beta)]
        }
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let y = (x - self.m).abs() / self.s;
        self.ln_c - softplus(y.powf(self.beta) - self.big_r)
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
        if self.beta != 1.0 {
            return numeric::quantile(self, v);
        }
        numeric::check_prob(v)?;
        if v <= 0.5 {
            Ok(self.lower_quantile(v))
        } else {
            Ok(2.0 * self.m - self.lower_quantile(1.0 - v))
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
        -self.ln_c.exp() * sigmoid_d1(self.big_r - y.powf(b)) * b * y.powf(b - 1.0) * z.signum() / self.s
    }
}
