use super::{finite_all, numeric, require, FamilyTag, UnivariateFamily};
use crate::error::Result;
use crate::specfun::{sigmoid_d1, softplus};

/// Uniform compounded with a skewed logistic kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewCompoundLogistic {
    a: f64,
    b: f64,
    s: f64,
    lambda: f64,
    mode: f64,
}

impl SkewCompoundLogistic {
    pub fn new(a: f64, b: f64, s: f64, lambda: f64) -> Result<Self> {
        finite_all("ALS", &[a, b, s, lambda])?;
        require(a < b, "ALS", "requires a < b")?;
        require(s > 0.0, "ALS", "requires s > 0")?;
        require(lambda > -1.0 && lambda < 1.0, "ALS", "requires -1 < lambda < 1")?;
        let mut d = SkewCompoundLogistic {
            a,
            b,
            s,
            lambda,
            mode: 0.5 * (a + b),
        };
        let w = d.tail_width();
        d.mode = numeric::argmax(|x| d.log_pdf(x), a - 10.0 * w, b + 10.0 * w, 1e-10 * (b - a + s));
        Ok(d)
    }

    /// Twice the tanh argument of F_LS, so that F_LS = σ(g).
    fn g(&self, x: f64, at: f64) -> f64 {
        let y = (x - at) / (2.0 * self.s);
        2.0 * (y + self.lambda * ((y * y + 1.0).sqrt() - 1.0))
    }

    fn dg(&self, x: f64, at: f64) -> f64 {
        let y = (x - at) / (2.0 * self.s);
        (1.0 + self.lambda * y / (y * y + 1.0).sqrt()) / self.s
    }

    fn tail_width(&self) -> f64 {
        self.s / (1.0 - self.lambda.abs())
    }
}

impl UnivariateFamily for SkewCompoundLogistic {
    fn tag(&self) -> FamilyTag {
        FamilyTag::ALS
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("s", self.s), ("lambda", self.lambda)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        let ga = self.g(x, self.a);
        let gb = self.g(x, self.b);
        // σ(A) − σ(B) = σ(A)σ(−B)(1 − e^{B−A})
        -softplus(-ga) - softplus(gb) + (-(gb - ga).exp_m1()).ln() - (self.b - self.a).ln()
    }

    fn mode(&self) -> f64 {
        self.mode
    }

    fn is_symmetric(&self) -> bool {
        self.lambda == 0.0
    }

    fn scale(&self) -> f64 {
        self.s
    }

    fn spread(&self) -> f64 {
        0.5 * (self.b - self.a) + 3.0 * self.tail_width()
    }

    fn breakpoints(&self) -> Vec<f64> {
        let w = self.tail_width();
        let mut v = vec![self.a, self.mode, self.b];
        v.extend(numeric::edge_points(self.a, w));
        v.extend(numeric::edge_points(self.b, w));
        numeric::tidy(v)
    }

    fn normalizer(&self) -> Option<f64> {
        Some(1.0 / (self.b - self.a))
    }

    fn pdf_d1(&self, x: f64) -> f64 {
        let fa = sigmoid_d1(self.g(x, self.a)) * self.dg(x, self.a);
        let fb = sigmoid_d1(self.g(x, self.b)) * self.dg(x, self.b);
        (fa - fb) / (self.b - self.a)
    }
}
