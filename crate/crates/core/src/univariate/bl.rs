use super::{finite_all, numeric, require, FamilyTag, UnivariateFamily};
use crate::error::{Error, Result};
use crate::specfun::{integrate_with, sigmoid, sigmoid_d1, softplus};

/// Product of a rising and a falling logistic CDF with separate slopes.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticProduct {
    a: f64,
    b: f64,
    s: f64,
    t: f64,
    c: f64,
    mode: f64,
}

impl LogisticProduct {
    pub fn new(a: f64, b: f64, s: f64, t: f64) -> Result<Self> {
        finite_all("BL", &[a, b, s, t])?;
        require(a < b, "BL", "requires a < b")?;
        require(s > 0.0, "BL", "requires s > 0")?;
        require(t > 0.0, "BL", "requires t > 0")?;
        let overlap = Self::overlap(a, b, s, t)?;
        let c = 1.0 / ((b - a) + overlap);
        let mode = Self::locate_mode(a, b, s, t)?;
        Ok(LogisticProduct { a, b, s, t, c, mode })
    }

    /// ∫σ((a−x)/s)σ((x−b)/t)dx, the mass the product loses against b − a.
    fn overlap(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
        let w = s.max(t);
        let mut breaks = vec![a, 0.5 * (a + b), b];
        breaks.extend(numeric::edge_points(a, s));
        breaks.extend(numeric::edge_points(b, t));
        let breaks = numeric::tidy(breaks);
        let settings = crate::specfun::QuadratureSettings {
            abs_tol: 1e-16 * (b - a),
            rel_tol: 1e-13,
            max_subdivisions: 4000,
            tail_cutoff: None,
        };
        let r = integrate_with(
            |x| (-softplus((x - a) / s) - softplus((b - x) / t)).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &breaks,
            w,
            &settings,
        )?;
        Ok(r.value)
    }

    fn locate_mode(a: f64, b: f64, s: f64, t: f64) -> Result<f64> {
        // d/dx ln p = σ((a−x)/s)/s − σ((x−b)/t)/t, strictly decreasing
        let slope = |x: f64| sigmoid((a - x) / s) / s - sigmoid((x - b) / t) / t;
        let w = s.max(t);
        let (mut lo, mut hi) = (a - w, b + w);
        let mut k = 0;
        while slope(lo) < 0.0 || slope(hi) > 0.0 {
            lo -= w * 2f64.powi(k);
            hi += w * 2f64.powi(k);
            k += 1;
            if k > 60 {
                return Err(Error::Convergence("BL mode bracket".into()));
            }
        }
        while hi - lo > 1e-12 * (b - a + w) {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Flat-regime shortcut c ≈ 1/(b − a).
    pub fn normalizer_flat_approx(&self) -> f64 {
        1.0 / (self.b - self.a)
    }

    fn score(&self, x: f64) -> f64 {
        sigmoid((self.a - x) / self.s) / self.s - sigmoid((x - self.b) / self.t) / self.t
    }
}

impl UnivariateFamily for LogisticProduct {
    fn tag(&self) -> FamilyTag {
        FamilyTag::BL
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![("a", self.a), ("b", self.b), ("s", self.s), ("t", self.t)]
    }

    fn log_pdf(&self, x: f64) -> f64 {
        self.c.ln() - softplus((self.a - x) / self.s) - softplus((x - self.b) / self.t)
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

    fn pdf_d1(&self, x: f64) -> f64 {
        self.pdf(x) * self.score(x)
    }

    fn pdf_d2(&self, x: f64) -> f64 {
        let g = self.score(x);
        let dg = -sigmoid_d1((self.a - x) / self.s) / (self.s * self.s)
            - sigmoid_d1((x - self.b) / self.t) / (self.t * self.t);
        self.pdf(x) * (g * g + dg)
    }
}
