use std::f64::consts::{PI, SQRT_2};

use super::{finite_all, numeric, require, type_a_central_moment, FamilyTag, Method, MomentReport, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{erfc, norm_pdf};

/// Uniform compounded with a normal kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct CompoundNormal {
    a: f64,
    b: f64,
    s: f64,
}

/// ln(1 − Φ(z)).
pub(crate) fn ln_norm_sf(z: f64) -> f64 {
    if z < 5.0 {
        (0.5 * erfc(z / SQRT_2)).ln()
    } else {
        // Φc(z) = φ(z)/(z + T)
        -0.5 * z * z - 0.5 * (2.0 * PI).ln() - (z + mills_tail(z)).ln()
    }
}

/// T(x) = 1/(x + 2/(x + 3/(x + …))) for x ≥ 5.
fn mills_tail(x: f64) -> f64 {
    let mut t = 0.0;
    for k in (2..=60).rev() {
        t = k as f64 / (x + t);
    }
    1.0 / (x + t)
}

/// G(z) = zΦ(z) + φ(z), the antiderivative of Φ.
fn g_int(z: f64) -> f64 {
    if z < -5.0 {
        let x = -z;
        let t = mills_tail(x);
        norm_pdf(x) * t / (x + t)
    } else {
        z * 0.5 * erfc(-z / SQRT_2) + norm_pdf(z)
    }
}

impl CompoundNormal {
    pub fn new(a: f64, b: f64, s: f64) -> Result<Self> {
        finite_all("AN", &[a, b, s])?;
        require(a < b, "AN", "requires a < b")?;
        require(s > 0.0, "AN", "requires s > 0")?;
        Ok(CompoundNormal { a, b, s })
    }

    fn m(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    fn r(&self) -> f64 {
        0.5 * (self.b - self.a)
    }

    fn lower_cdf(&self, x: f64) -> f64 {
        let za = (x - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        self.s / (self.b - self.a) * (g_int(za) - g_int(zb))
    }
}

impl UnivariateFamily for CompoundNormal {
    fn tag(&self) -> FamilyTag {
        FamilyTag::AN
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("s", self.s)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        // reflect so that the far edge is the upper one
        let y = self.m() - (x - self.m()).abs();
        let za = (y - self.a) / self.s;
        let zb = (y - self.b) / self.s;
        // Φ(za) − Φ(zb) = Φc(−za) − Φc(−zb) with −zb ≥ −za
        let (hi, lo) = (-zb, -za);
        let ln_hi = ln_norm_sf(hi);
        let ln_lo = ln_norm_sf(lo);
        ln_lo + (-(ln_hi - ln_lo).exp()).ln_1p() - (self.b - self.a).ln()
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
        let v = type_a_central_moment(k, self.r(), self.s, |j| double_factorial(j as i64 - 1));
        Ok(MomentReport::closed(k, v))
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let za = (x - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        (norm_pdf(za) - norm_pdf(zb)) / (self.s * (self.b - self.a))
    }

    fn pdf_d2(&self, x: f64) -> f64 {
        let za = (x - self.a) / self.s;
        let zb = (x - self.b) / self.s;
        (zb * norm_pdf(zb) - za * norm_pdf(za)) / (self.s * self.s * (self.b - self.a))
    }
}

fn double_factorial(n: i64) -> f64 {
    let mut v = 1.0;
    let mut k = n;
    while k > 1 {
        v *= k as f64;
        k -= 2;
    }
    v
}
