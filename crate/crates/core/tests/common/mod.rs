//! Test-only oracles, independent of the library's own quadrature.
#![allow(dead_code)]

/// 8-point Gauss–Legendre nodes and weights on [−1, 1].
const GL_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_W: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite Gauss–Legendre over the sorted knots, `panels` per gap.
pub fn gl_integrate(f: impl Fn(f64) -> f64, knots: &[f64], panels: usize) -> f64 {
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let h = (hi - lo) / panels as f64;
        for i in 0..panels {
            let c = lo + (i as f64 + 0.5) * h;
            let half = 0.5 * h;
            let mut acc = 0.0;
            for k in 0..4 {
                acc += GL_W[k] * (f(c - half * GL_X[k]) + f(c + half * GL_X[k]));
            }
            total += acc * half;
        }
    }
    total
}

/// Geometric knots from `center` outward to `center ± reach`, finest near the centre.
pub fn knots_around(points: &[f64], reach: f64, finest: f64) -> Vec<f64> {
    let mut v: Vec<f64> = points.to_vec();
    for &p in points {
        let mut d = finest;
        while d < reach {
            v.push(p - d);
            v.push(p + d);
            d *= 1.5;
        }
    }
    let lo = points.iter().cloned().fold(f64::INFINITY, f64::min) - reach;
    let hi = points.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + reach;
    v.push(lo);
    v.push(hi);
    v.retain(|x| *x >= lo && *x <= hi);
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

/// Bisection root of an increasing function.
pub fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lower incomplete gamma γ(s, x) by its power series.
pub fn lower_gamma_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    for n in 1..500 {
        term *= x / (s + n as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    x.powf(s) * (-x).exp() * sum
}

/// Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic(xs: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

use flattop::univariate::{FamilyTag, UnivariateSpec};

/// At least 20 parameter configurations per family, spanning bell-shaped to flat.
pub fn configs(tag: FamilyTag) -> Vec<UnivariateSpec> {
    let mut out = Vec::new();
    let locs = [-3.0, 0.0, 2.5, 10.0];
    let widths = [0.5, 1.0, 4.0];
    let shapes = [0.05, 0.3, 1.0, 3.0];
    match tag {
        FamilyTag::U => {
            for &a in &locs {
                for &w in &[0.1, 1.0, 2.0, 7.5, 40.0] {
                    out.push(UnivariateSpec::uniform(a, a + w).unwrap());
                }
            }
        }
        FamilyTag::GN => {
            for &mu in &locs[..2] {
                for &s in &[0.5, 2.0] {
                    for &b in &[0.7, 1.0, 2.0, 4.0, 8.0, 20.0] {
                        out.push(UnivariateSpec::gn(mu, s, b).unwrap());
                    }
                }
            }
        }
        FamilyTag::CC => {
            for &m in &locs[..2] {
                for &s in &[0.5, 2.0] {
                    for &b in &[2.0, 2.5, 3.0, 4.0, 6.0, 10.0] {
                        out.push(UnivariateSpec::cc(m, s, b).unwrap());
                    }
                }
            }
        }
        FamilyTag::DE => {
            for &m in &locs {
                for &s in &[0.1, 0.5, 1.0, 3.0, 10.0] {
                    out.push(UnivariateSpec::de(m, s).unwrap());
                }
            }
        }
        FamilyTag::CF | FamilyTag::CH => {
            for &w in &widths {
                for &sh in &shapes {
                    for &b in &[0.5, 1.0, 2.0] {
                        let spec = if tag == FamilyTag::CF {
                            UnivariateSpec::cf(1.0, w, w * sh, b)
                        } else {
                            UnivariateSpec::ch(1.0, w, w * sh, b)
                        };
                        out.push(spec.unwrap());
                    }
                }
            }
        }
        _ => {
            for (i, &a) in locs.iter().enumerate() {
                for &w in &widths {
                    for (j, &sh) in shapes.iter().enumerate() {
                        if (i + j) % 2 == 1 {
                            continue;
                        }
                        let b = a + 2.0 * w;
                        let s = w * sh;
                        let t = w * shapes[(j + 1) % shapes.len()];
                        let spec = match tag {
                            FamilyTag::AN => UnivariateSpec::an(a, b, s),
                            FamilyTag::AL => UnivariateSpec::al(a, b, s),
                            FamilyTag::ALS => UnivariateSpec::als(a, b, s, [-0.6, 0.3, 0.8][(i + j) % 3]),
                            FamilyTag::BL => UnivariateSpec::bl(a, b, s, t),
                            FamilyTag::BD => UnivariateSpec::bd(a, b, s, t),
                            FamilyTag::CE => UnivariateSpec::ce(a, b, s),
                            _ => unreachable!(),
                        };
                        out.push(spec.unwrap());
                    }
                }
            }
        }
    }
    out
}

/// Knots covering the bulk and tails of `spec` for `gl_integrate`.
pub fn knots_for(spec: &UnivariateSpec) -> Vec<f64> {
    let (lo, hi) = spec.support();
    if lo.is_finite() && hi.is_finite() {
        return vec![lo, hi];
    }
    let mut pts = spec.breakpoints();
    pts.retain(|x| (x - spec.mode()).abs() <= 2.0 * spec.spread() + 1.0);
    pts.push(spec.mode());
    let heavy = matches!(spec.tag(), FamilyTag::CC | FamilyTag::DE);
    let reach = if heavy { 1e13 * spec.spread() } else { 1e5 * spec.spread() };
    knots_around(&pts, reach, spec.scale() * 0.05)
}

/// Five-point central difference f'(x).
pub fn fd5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// l_CL with an arbitrary (not necessarily symmetric) precision matrix.
pub fn cl_oracle(xs: &[Vec<f64>], m: &[f64], p: &nalgebra::DMatrix<f64>, big_r: f64, t: f64) -> f64 {
    let n = m.len();
    let nf = n as f64;
    let ln_gamma = lanczos_ln_gamma;
    let head = ln_gamma(0.5 * nf + 1.0) - 0.5 * nf * std::f64::consts::PI.ln() + (big_r * t).sinh().ln() - big_r.ln()
        + 0.5 * p.determinant().ln();
    let mut l = 0.0;
    for x in xs {
        let d = nalgebra::DVector::from_fn(n, |i, _| x[i] - m[i]);
        let rho2 = (d.transpose() * p * &d)[0];
        let u = rho2.powf(0.5 * nf);
        // ln(cosh A + cosh B) by log-sum-exp over ±A, ±B
        let (ea, eb) = (u * t, big_r * t);
        let top = ea.abs().max(eb.abs());
        let sum = (ea - top).exp() + (-ea - top).exp() + (eb - top).exp() + (-eb - top).exp();
        l += head - (top + sum.ln() - std::f64::consts::LN_2);
    }
    l
}

/// Lanczos ln Γ for the oracle (g = 7, 9 terms).
pub fn lanczos_ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
