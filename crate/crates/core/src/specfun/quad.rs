//! Adaptive Gauss–Kronrod quadrature.
//!
//! Panels are integrated with the 21-point Kronrod rule and refined globally,
//! always bisecting the panel with the largest error estimate. Infinite ends
//! are handled either by the map `x = c ± L·(u/(1−u))²` or, when a tail cutoff
//! is configured, by truncating where the integrand has decayed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// `None` maps infinite ranges onto the unit interval; `Some(c)` truncates
    /// them where the integrand falls below `c` times its sampled peak.
    pub tail_cutoff: Option<f64>,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 2000,
            tail_cutoff: None,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) || self.max_subdivisions < 1 {
            return Err(Error::Domain(
                "quadrature tolerances must be positive and max_subdivisions >= 1".into(),
            ));
        }
        if let Some(c) = self.tail_cutoff {
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::Domain("tail_cutoff must lie in (0,1)".into()));
            }
        }
        Ok(())
    }

    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSettings {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

#[derive(Clone, Copy, Debug)]
enum Map {
    Identity,
    /// x = c + L·w², w = u/(1−u)
    Right { c: f64, l: f64 },
    /// x = c − L·w²
    Left { c: f64, l: f64 },
}

impl Map {
    #[inline]
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, u: f64) -> f64 {
        match *self {
            Map::Identity => f(u),
            Map::Right { c, l } => {
                let w = u / (1.0 - u);
                tail_value(f, c + l * w * w, 2.0 * l * w / ((1.0 - u) * (1.0 - u)))
            }
            Map::Left { c, l } => {
                let w = u / (1.0 - u);
                tail_value(f, c - l * w * w, 2.0 * l * w / ((1.0 - u) * (1.0 - u)))
            }
        }
    }
}

#[inline]
fn tail_value<F: Fn(f64) -> f64>(f: &F, x: f64, jac: f64) -> f64 {
    if !x.is_finite() || !jac.is_finite() {
        return 0.0;
    }
    let v = f(x) * jac;
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug)]
struct Panel {
    map: Map,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, resabs: f64, resasc: f64) -> f64 {
    let mut err = err.abs();
    if resasc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / resasc).powf(1.5);
        err = if scale < 1.0 { resasc * scale } else { resasc };
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * resabs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

fn qk21<F: Fn(f64) -> f64>(f: &F, map: Map, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = map.eval(f, center);
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = map.eval(f, center - dx);
        let f2 = map.eval(f, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[10] * (fc - reskh).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let error = rescale_error((resk - resg) * half, resabs, resasc);
    Panel {
        map,
        lo,
        hi,
        value,
        error,
    }
}

fn run<F: Fn(f64) -> f64>(f: &F, initial: Vec<(Map, f64, f64)>, settings: &QuadratureSettings) -> Result<Integral> {
    settings.validate()?;
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for (map, lo, hi) in initial {
        if hi > lo {
            let p = qk21(f, map, lo, hi);
            total += p.value;
            total_err += p.error;
            heap.push(p);
        }
    }
    let mut subdivisions = heap.len();
    loop {
        let tol = settings.abs_tol.max(settings.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if subdivisions >= settings.max_subdivisions {
            return Err(Error::Quadrature {
                value: total,
                error: total_err,
                subdivisions,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo && mid < worst.hi) {
            // panel no longer divisible in floating point
            heap.push(Panel { error: 0.0, ..worst });
            total_err -= worst.error;
            continue;
        }
        let left = qk21(f, worst.map, worst.lo, mid);
        let right = qk21(f, worst.map, mid, worst.hi);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    // recompute the sums to shed accumulated cancellation
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    if !value.is_finite() {
        return Err(Error::Quadrature {
            value,
            error,
            subdivisions,
        });
    }
    Ok(Integral {
        value,
        error,
        subdivisions,
    })
}

/// Integrates `f` over `[lo, hi]`, either end possibly infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, settings: &QuadratureSettings) -> Result<Integral> {
    integrate_with(f, lo, hi, &[], 1.0, settings)
}

/// Integrates `f` over `[lo, hi]` with interior break-points. `tail_scale` sets
/// the length unit of the infinite-range maps.
pub fn integrate_with<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tail_scale: f64,
    settings: &QuadratureSettings,
) -> Result<Integral> {
    if lo.is_nan() || hi.is_nan() {
        return Err(Error::Domain("NaN integration limit".into()));
    }
    if hi < lo {
        let r = integrate_with(f, hi, lo, breaks, tail_scale, settings)?;
        return Ok(Integral {
            value: -r.value,
            ..r
        });
    }
    if hi == lo {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let l = if tail_scale.is_finite() && tail_scale > 0.0 {
        tail_scale
    } else {
        1.0
    };
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if pts.is_empty() && lo.is_infinite() && hi.is_infinite() {
        pts.push(0.0);
    }
    let mut lo = lo;
    let mut hi = hi;
    if let Some(cut) = settings.tail_cutoff {
        let anchors: Vec<f64> = pts.iter().copied().chain([lo, hi]).filter(|x| x.is_finite()).collect();
        let peak = anchors.iter().map(|&x| f(x).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if lo == f64::NEG_INFINITY {
            let start = anchors.iter().copied().fold(f64::INFINITY, f64::min);
            lo = march(&f, start, -l, cut * peak);
        }
        if hi == f64::INFINITY {
            let start = anchors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi = march(&f, start, l, cut * peak);
        }
        pts.retain(|p| *p > lo && *p < hi);
    }
    let mut edges = Vec::with_capacity(pts.len() + 2);
    edges.push(lo);
    edges.extend(pts);
    edges.push(hi);
    let mut panels = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        match (a.is_infinite(), b.is_infinite()) {
            (false, false) => panels.push((Map::Identity, a, b)),
            (true, false) => panels.push((Map::Left { c: b, l }, 0.0, 1.0)),
            (false, true) => panels.push((Map::Right { c: a, l }, 0.0, 1.0)),
            (true, true) => unreachable!("infinite range always split"),
        }
    }
    run(&f, panels, settings)
}

fn march<F: Fn(f64) -> f64>(f: &F, start: f64, step: f64, threshold: f64) -> f64 {
    let mut h = step;
    let mut x = start + h;
    for _ in 0..2000 {
        if f(x).abs() < threshold && f(x + h).abs() < threshold {
            return x + h;
        }
        h *= 2.0;
        x = start + h;
        if !x.is_finite() {
            break;
        }
    }
    x
}
