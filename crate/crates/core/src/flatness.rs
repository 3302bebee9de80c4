//! Flatness diagnostics: canonical boundaries, the derivative-based
//! ε-measure, Δ-window measures, and closed-form family bounds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{coth, integrate_with, sech2, QuadratureSettings};
use crate::univariate::{FamilyTag, UnivariateFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRule {
    /// Equal-area boundaries with p(x_m)(b − a) = 1.
    Canonical,
    /// Full width at half maximum.
    Fwhm,
    /// The family's own location parameters a and b (or m ∓ r).
    Parameters,
    /// Caller-supplied.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Integral,
    Concave,
}

/// Which measure a closed-form family bound controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCriterion {
    /// |p''(x_m)|·|(a − b)/(p'(a) − p'(b))| at the family's own a, b.
    Derivative,
    /// 1 − (p(x1) + p(x2))/(2p(x_m)) at x1,2 = m ∓ r/2.
    Concave,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyBound {
    pub value: f64,
    pub criterion: BoundCriterion,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub a: f64,
    pub b: f64,
    pub boundary_rule: BoundaryRule,
    pub epsilon_measure: f64,
    pub family_bound: Option<f64>,
    pub bound_criterion: Option<BoundCriterion>,
    pub delta: Option<f64>,
    pub delta_measure: Option<f64>,
    pub interval_ratio: Option<f64>,
    pub verdict_at: BTreeMap<String, bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub delta: f64,
    pub measure: f64,
    pub mode: DeltaMode,
    pub satisfied_at: BTreeMap<String, bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessOptions {
    pub boundaries: BoundaryRule,
    /// Explicit (a, b) overriding `boundaries`.
    pub explicit: Option<(f64, f64)>,
    /// Thresholds to report verdicts at; there is no default.
    pub epsilons: Vec<f64>,
    pub window: Option<(f64, f64, DeltaMode)>,
    /// ε for the generalized-normal interval ratio.
    pub ratio_epsilon: Option<f64>,
}

impl Default for FlatnessOptions {
    fn default() -> Self {
        FlatnessOptions {
            boundaries: BoundaryRule::Canonical,
            explicit: None,
            epsilons: Vec::new(),
            window: None,
            ratio_epsilon: None,
        }
    }
}

fn verdicts(measure: f64, epsilons: &[f64]) -> BTreeMap<String, bool> {
    epsilons.iter().map(|e| (format!("{e}"), measure < *e)).collect()
}

/// a = x_m − P(x_m)/p(x_m), b = x_m + (1 − P(x_m))/p(x_m).
pub fn canonical_boundaries<F: UnivariateFamily + ?Sized>(d: &F) -> Result<(f64, f64)> {
    let xm = d.mode();
    let pm = d.pdf(xm);
    let below = d.cdf(xm);
    if !(pm > 0.0) || !below.is_finite() {
        return Err(Error::Degenerate("density or distribution function unusable at the mode".into()));
    }
    Ok((xm - below / pm, xm + (1.0 - below) / pm))
}

/// Points where the density falls to half its maximum.
pub fn fwhm_boundaries<F: UnivariateFamily + ?Sized>(d: &F) -> Result<(f64, f64)> {
    let params = d.params();
    if d.tag() == FamilyTag::GN {
        let mu = params[0].1;
        let s = params[1].1;
        let beta = params[2].1;
        let h = s * std::f64::consts::LN_2.powf(1.0 / beta);
        return Ok((mu - h, mu + h));
    }
    let xm = d.mode();
    let half = 0.5 * d.pdf(xm);
    let side = |dir: f64| -> Result<f64> {
        let mut step = d.spread().max(d.scale());
        let mut far = xm + dir * step;
        let mut k = 0;
        while d.pdf(far) > half {
            step *= 2.0;
            far = xm + dir * step;
            k += 1;
            if k > 200 {
                return Err(Error::Convergence("half-maximum bracket".into()));
            }
        }
        let (mut inner, mut outer) = (xm, far);
        for _ in 0..200 {
            let mid = 0.5 * (inner + outer);
            if d.pdf(mid) > half {
                inner = mid;
            } else {
                outer = mid;
            }
        }
        Ok(0.5 * (inner + outer))
    };
    Ok((side(-1.0)?, side(1.0)?))
}

/// The family's own a, b (or m ∓ r) where it has them.
pub fn parameter_boundaries<F: UnivariateFamily + ?Sized>(d: &F) -> Option<(f64, f64)> {
    let p: BTreeMap<&str, f64> = d.params().into_iter().collect();
    match (p.get("a"), p.get("b"), p.get("m"), p.get("r")) {
        (Some(&a), Some(&b), _, _) => Some((a, b)),
        (_, _, Some(&m), Some(&r)) => Some((m - r, m + r)),
        _ => None,
    }
}

pub fn boundaries<F: UnivariateFamily + ?Sized>(d: &F, rule: BoundaryRule) -> Result<(f64, f64)> {
    match rule {
        BoundaryRule::Canonical => canonical_boundaries(d),
        BoundaryRule::Fwhm => fwhm_boundaries(d),
        BoundaryRule::Parameters => parameter_boundaries(d)
            .ok_or_else(|| Error::Unsupported(format!("{} has no boundary parameters", d.tag()))),
        BoundaryRule::Explicit => Err(Error::Domain("explicit boundaries need values".into())),
    }
}

/// |p''(x_m)|·|(a − b)/(p'(a) − p'(b))|.
pub fn eps_flat_measure<F: UnivariateFamily + ?Sized>(d: &F, a: f64, b: f64) -> Result<f64> {
    let xm = d.mode();
    if !(a < xm && xm < b) {
        return Err(Error::Domain(format!("boundaries ({a}, {b}) must straddle the mode {xm}")));
    }
    let d2 = d.pdf_d2(xm);
    let slope_gap = d.pdf_d1(a) - d.pdf_d1(b);
    if slope_gap == 0.0 || !slope_gap.is_finite() {
        return Err(Error::Degenerate("p'(a) = p'(b)".into()));
    }
    Ok((d2 * (a - b) / slope_gap).abs())
}

/// Window measure on [x1, x2]: integral or concave form.
pub fn delta_eps_flat<F: UnivariateFamily + ?Sized>(
    d: &F,
    x1: f64,
    x2: f64,
    mode: DeltaMode,
    epsilons: &[f64],
) -> Result<DeltaReport> {
    let xm = d.mode();
    if !(x1 < x2) || !(x1 <= xm && xm <= x2) {
        return Err(Error::Domain(format!("window [{x1}, {x2}] must straddle the mode {xm}")));
    }
    let pm = d.pdf(xm);
    let delta = x2 - x1;
    let measure = match mode {
        DeltaMode::Integral => {
            let settings = QuadratureSettings::with_tolerances(1e-14, 1e-12);
            let breaks: Vec<f64> = d.breakpoints().into_iter().filter(|x| *x > x1 && *x < x2).collect();
            let mass = integrate_with(|x| d.pdf(x), x1, x2, &breaks, d.scale(), &settings)?.value;
            1.0 - mass / (pm * delta)
        }
        DeltaMode::Concave => 1.0 - (d.pdf(x1) + d.pdf(x2)) / (2.0 * pm),
    };
    Ok(DeltaReport {
        delta,
        measure,
        mode,
        satisfied_at: verdicts(measure, epsilons),
    })
}

/// Derivative-criterion bound for BL{a, b, s, t}.
pub fn bl_bound(a: f64, b: f64, s: f64, t: f64) -> f64 {
    let w = b - a;
    6.0 * (w / s * coth(w / (2.0 * s)) + w / t * coth(w / (2.0 * t))) * (-w / (s + t)).exp()
}

/// Closed-form upper bound on a flatness measure, where one exists.
pub fn family_flat_bound<F: UnivariateFamily + ?Sized>(d: &F) -> Option<FamilyBound> {
    let p: BTreeMap<&str, f64> = d.params().into_iter().collect();
    let derivative = |value: f64| FamilyBound {
        value,
        criterion: BoundCriterion::Derivative,
    };
    match d.tag() {
        FamilyTag::AL => {
            let q = (p["b"] - p["a"]) / (2.0 * p["s"]);
            Some(derivative(al_bound(q)))
        }
        FamilyTag::BL => {
            Some(derivative(bl_bound(p["a"], p["b"], p["s"], p["t"])))
        }
        FamilyTag::AN => {
            let q = ((p["a"] - p["b"]) / (2.0 * p["s"])).powi(2);
            Some(derivative(2.0 * q / (0.5 * q).exp_m1()))
        }
        FamilyTag::CE => {
            let q = ((p["b"] - p["a"]) / (2.0 * p["s"])).powi(2);
            Some(derivative(sech2(q)))
        }
        FamilyTag::CF if p["beta"] == 1.0 => Some(FamilyBound {
            value: (-p["r"] / (2.0 * p["s"])).exp(),
            criterion: BoundCriterion::Concave,
        }),
        _ => None,
    }
}

/// 4(r/s)csch(r/s), overflow-safe.
fn al_bound(q: f64) -> f64 {
    if q > 300.0 {
        8.0 * q * (-q).exp()
    } else {
        4.0 * q / q.sinh()
    }
}

/// |x1 − x2|/|a − b| = |log₂(1 − ε)|^{1/β} for the generalized normal.
pub fn gn_flat_interval_ratio(beta: f64, eps: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::param("GN", "requires beta > 0"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("epsilon {eps} outside (0,1)")));
    }
    Ok((1.0 - eps).log2().abs().powf(1.0 / beta))
}

pub fn analyze<F: UnivariateFamily + ?Sized>(d: &F, opts: &FlatnessOptions) -> Result<FlatnessReport> {
    let (a, b) = match opts.explicit {
        Some(ab) => ab,
        None => boundaries(d, opts.boundaries)?,
    };
    let epsilon_measure = eps_flat_measure(d, a, b)?;
    let bound = family_flat_bound(d);
    let window = match opts.window {
        Some((x1, x2, mode)) => Some(delta_eps_flat(d, x1, x2, mode, &[])?),
        None => None,
    };
    let interval_ratio = match (d.tag(), opts.ratio_epsilon) {
        (FamilyTag::GN, Some(eps)) => Some(gn_flat_interval_ratio(d.params()[2].1, eps)?),
        _ => None,
    };
    Ok(FlatnessReport {
        a,
        b,
        boundary_rule: if opts.explicit.is_some() {
            BoundaryRule::Explicit
        } else {
            opts.boundaries
        },
        epsilon_measure,
        family_bound: bound.map(|f| f.value),
        bound_criterion: bound.map(|f| f.criterion),
        delta: window.as_ref().map(|w| w.delta),
        delta_measure: window.as_ref().map(|w| w.measure),
        interval_ratio,
        verdict_at: verdicts(epsilon_measure, &opts.epsilons),
    })
}
