mod common;

use common::{cl_oracle, fd5};
use flattop::data::{gen_mixed_1d, Dataset};
use flattop::mle::{
    aic, al_init_normal, al_init_uniform, al_pass, bic, cl_init, fit, fit_al, fit_bl, fit_cl, grad_al, grad_bl_flat,
    grad_cl, hess_al, loglik_al, loglik_bl, loglik_cl, loglik_normal_mle, Bounds, FitModel, FitSettings, Termination,
};
use flattop::multivariate::MultivariateSpec;
use flattop::univariate::UnivariateSpec;
use flattop::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn random_al_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64, f64, f64) {
    let a = rng.random_range(-5.0..5.0);
    let b = a + rng.random_range(0.5..10.0);
    let s = rng.random_range(0.05..2.0);
    let lo = a - 3.0 * s - 2.0;
    let hi = b + 3.0 * s + 3.0;
    let xs = (0..50).map(|_| rng.random_range(lo..hi)).collect();
    (xs, a, b, s)
}

#[test]
fn al_first_partials_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let (xs, a, b, s) = random_al_instance(&mut rng);
        let g = grad_al(&xs, None, a, b, s);
        let h = 1e-3 * s;
        let fa = fd5(|v| loglik_al(&xs, None, v, b, s), a, h);
        let fb = fd5(|v| loglik_al(&xs, None, a, v, s), b, h);
        let fs = fd5(|v| loglik_al(&xs, None, a, b, v), s, 1e-4 * s);
        assert!(rel(g.a, fa) < 1e-6, "a: {} vs {fa}", g.a);
        assert!(rel(g.b, fb) < 1e-6, "b: {} vs {fb}", g.b);
        assert!(rel(g.s, fs) < 1e-6, "s: {} vs {fs}", g.s);
    }
}

#[test]
fn al_second_partials_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let (xs, a, b, s) = random_al_instance(&mut rng);
        let hs = hess_al(&xs, None, a, b, s);
        let h = 1e-3 * s;
        let ga = |a: f64, b: f64, s: f64| grad_al(&xs, None, a, b, s);
        let pairs = [
            (hs.aa, fd5(|v| ga(v, b, s).a, a, h)),
            (hs.bb, fd5(|v| ga(a, v, s).b, b, h)),
            (hs.ss, fd5(|v| ga(a, b, v).s, s, 1e-4 * s)),
            (hs.ab, fd5(|v| ga(a, v, s).a, b, h)),
            (hs.a_s, fd5(|v| ga(a, b, v).a, s, 1e-4 * s)),
            (hs.b_s, fd5(|v| ga(a, b, v).b, s, 1e-4 * s)),
        ];
        for (k, (analytic, numeric)) in pairs.iter().enumerate() {
            assert!(rel(*analytic, *numeric) < 1e-6, "entry {k}: {analytic} vs {numeric}");
        }
    }
}

#[test]
fn al_gradient_symmetries() {
    let xs = [-3.0, -1.0, 0.5, -0.5, 1.0, 3.0];
    let g = grad_al(&xs, None, -2.0, 2.0, 0.7);
    assert!((g.a + g.b).abs() < 1e-14);
    // single point at the midpoint
    let (a, b, s): (f64, f64, f64) = (-1.0, 1.0, 50.0);
    let h = (b - a) / (2.0 * s);
    let u = 0.5 * h;
    let want = -(1.0 / s) * h / h.tanh() + (2.0 / s) * u * u.tanh();
    let g = grad_al(&[0.0], None, a, b, s);
    assert!((g.s - want).abs() < 1e-15);
    assert!(g.s < 0.0);
}

#[test]
fn weighted_likelihood_matches_replicated_data() {
    let xs = [0.1, 0.5, 2.0, 3.5];
    let w = [2.0, 1.0, 3.0, 1.0];
    let rep: Vec<f64> = xs.iter().zip(w).flat_map(|(x, k)| std::iter::repeat_n(*x, k as usize)).collect();
    let (a, b, s) = (0.3, 3.0, 0.4);
    assert!((loglik_al(&xs, Some(&w), a, b, s) - loglik_al(&rep, None, a, b, s)).abs() < 1e-12);
    let (g1, g2) = (grad_al(&xs, Some(&w), a, b, s), grad_al(&rep, None, a, b, s));
    assert!((g1.s - g2.s).abs() < 1e-12 && (g1.a - g2.a).abs() < 1e-12);
}

#[test]
fn loglik_matches_density() {
    let xs = [-40.0, -1.0, 0.0, 2.5, 90.0];
    let spec = UnivariateSpec::al(-1.0, 2.0, 0.3).unwrap();
    let direct: f64 = xs.iter().map(|&x| spec.log_pdf(x)).sum();
    assert!(rel(loglik_al(&xs, None, -1.0, 2.0, 0.3), direct) < 1e-13);
}

#[test]
fn bl_approximate_gradient_tracks_exact_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 50 {
        let a = rng.random_range(-5.0..5.0);
        let w = rng.random_range(2.0..20.0);
        let b = a + w;
        let s = w * rng.random_range(0.01..0.05);
        let t = w * rng.random_range(0.01..0.05);
        let lo = a + rng.random_range(-0.2..0.2) * w;
        let hi = b + rng.random_range(-0.2..0.2) * w;
        let xs: Vec<f64> = (0..50).map(|_| rng.random_range(lo..hi)).collect();
        let g = grad_bl_flat(&xs, None, a, b, s, t, 0.05);
        if !g.flat {
            continue;
        }
        let l = |a: f64, b: f64, s: f64, t: f64| loglik_bl(&xs, None, a, b, s, t).unwrap();
        let exact = [
            fd5(|v| l(v, b, s, t), a, 1e-3 * s),
            fd5(|v| l(a, v, s, t), b, 1e-3 * t),
            fd5(|v| l(a, b, v, t), s, 1e-3 * s),
            fd5(|v| l(a, b, s, v), t, 1e-3 * t),
        ];
        for (k, (approx, exact)) in [g.a, g.b, g.s, g.t].iter().zip(exact).enumerate() {
            assert!(rel(*approx, exact) < 0.02, "param {k}: {approx} vs {exact}");
        }
        checked += 1;
    }
}

#[test]
fn bl_gradient_examples() {
    let xs: Vec<f64> = (0..20).map(|i| 30.0 + i as f64).collect();
    let g = grad_bl_flat(&xs, None, 0.0, 10.0, 0.5, 0.5, 0.05);
    assert!(g.b > 0.0);
    assert!(g.flat);
    let half = [-7.0, -5.5, -4.0, -1.0, 0.0];
    let mirrored: Vec<f64> = half.iter().chain(half.iter().map(|x| -x).collect::<Vec<_>>().iter()).copied().collect();
    let g = grad_bl_flat(&mirrored, None, -5.0, 5.0, 0.4, 0.4, 0.05);
    assert!((g.s - g.t).abs() < 1e-12 * g.s.abs().max(1.0));
    assert!((g.a + g.b).abs() < 1e-12);
    let g = grad_bl_flat(&xs, None, 0.0, 1.0, 0.5, 0.5, 0.05);
    assert!(!g.flat);
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

#[test]
fn cl_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for case in 0..50 {
        let n = 1 + case % 3;
        let sigma = random_spd(&mut rng, n);
        let m: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = rng.random_range(0.5..2.0);
        let t = rng.random_range(0.3..3.0);
        let spec = MultivariateSpec::cl(m.clone(), sigma, r, t).unwrap();
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let data = Dataset::from_rows(&rows, "test").unwrap();
        let g = grad_cl(&data, &spec).unwrap();
        let p = spec.precision();
        let big_r = spec.r_pow_n();
        let base = cl_oracle(&rows, &m, &p, big_r, t);
        assert!(rel(base, loglik_cl(&data, &spec).unwrap()) < 1e-10);
        for i in 0..n {
            let fd = fd5(
                |v| {
                    let mut mm = m.clone();
                    mm[i] = v;
                    cl_oracle(&rows, &mm, &p, big_r, t)
                },
                m[i],
                1e-3,
            );
            assert!(rel(g.m[i], fd) < 1e-6, "m{i}: {} vs {fd}", g.m[i]);
            for j in 0..n {
                let fd = fd5(
                    |v| {
                        let mut pp = p.clone();
                        pp[(i, j)] = v;
                        cl_oracle(&rows, &m, &pp, big_r, t)
                    },
                    p[(i, j)],
                    1e-4,
                );
                assert!(rel(g.precision[(i, j)], fd) < 1e-5, "P{i}{j}: {} vs {fd}", g.precision[(i, j)]);
            }
        }
        let fd = fd5(|v| cl_oracle(&rows, &m, &p, v, t), big_r, 1e-4 * big_r);
        assert!(rel(g.r_pow_n, fd) < 1e-6, "R: {} vs {fd}", g.r_pow_n);
        let fd = fd5(|v| cl_oracle(&rows, &m, &p, big_r, v), t, 1e-4 * t);
        assert!(rel(g.t, fd) < 1e-6, "t: {} vs {fd}", g.t);
    }
}

#[test]
fn cl_gradient_examples() {
    let spec = MultivariateSpec::cl(vec![1.0, 2.0], DMatrix::identity(2, 2), 1.0, 1.0).unwrap();
    let data = Dataset::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]], "center").unwrap();
    let g = grad_cl(&data, &spec).unwrap();
    assert_eq!(g.m.amax(), 0.0);
    // every point on the shell ρ = r: ψ = tanh(Rt)/2
    let rows: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            let th = k as f64 * std::f64::consts::PI / 4.0;
            vec![1.0 + th.cos(), 2.0 + th.sin()]
        })
        .collect();
    let data = Dataset::from_rows(&rows, "shell").unwrap();
    let g = grad_cl(&data, &spec).unwrap();
    let want = 8.0 * (1.0 / 1f64.tanh() - 1.0 - 0.5 * 1f64.tanh());
    assert!((g.r_pow_n - want).abs() < 1e-12);
    assert!(g.r_pow_n < 0.0);
}

#[test]
fn uniform_data_fit_recovers_edges() {
    let data = UnivariateSpec::uniform(0.0, 100.0).unwrap().sample(10_000, 12).unwrap();
    let xs = data.as_univariate().unwrap();
    for init in [al_init_normal(xs).unwrap(), al_init_uniform(xs).unwrap()] {
        let (spec, rep) = fit_al(&data, &init, &FitSettings::default()).unwrap();
        let (a, b, s) = (spec.param("a").unwrap(), spec.param("b").unwrap(), spec.param("s").unwrap());
        assert!((-1.0..=1.0).contains(&a), "a={a} {rep:?}");
        assert!((99.0..=101.0).contains(&b), "b={b}");
        assert!(s < 1.0, "s={s}");
        assert!(rep.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }
}

#[test]
fn al_fit_recovers_parameters_within_standard_errors() {
    let truth = [0.0, 10.0, 0.5];
    let data = UnivariateSpec::al(truth[0], truth[1], truth[2]).unwrap().sample(10_000, 33).unwrap();
    let xs = data.as_univariate().unwrap();
    let (spec, rep) = fit_al(&data, &al_init_normal(xs).unwrap(), &FitSettings::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    let est = [spec.param("a").unwrap(), spec.param("b").unwrap(), spec.param("s").unwrap()];
    let h = hess_al(xs, None, est[0], est[1], est[2]);
    let info = -DMatrix::from_row_slice(3, 3, &[h.aa, h.ab, h.a_s, h.ab, h.bb, h.b_s, h.a_s, h.b_s, h.ss]);
    let cov = info.try_inverse().unwrap();
    for k in 0..3 {
        let se = cov[(k, k)].sqrt();
        assert!((est[k] - truth[k]).abs() < 3.0 * se, "param {k}: {} ± {se}", est[k]);
    }
}

#[test]
fn mixed_sample_fit_beats_normal() {
    let data = gen_mixed_1d(0);
    let xs = data.as_univariate().unwrap();
    let (al, rep) = fit_al(&data, &al_init_normal(xs).unwrap(), &FitSettings::default()).unwrap();
    assert!(rep.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(rep.loglik > loglik_normal_mle(xs));
    let init = UnivariateSpec::bl(al.param("a").unwrap(), al.param("b").unwrap(), al.param("s").unwrap(), al.param("s").unwrap()).unwrap();
    let start = loglik_bl(xs, None, init.param("a").unwrap(), init.param("b").unwrap(), init.param("s").unwrap(), init.param("t").unwrap()).unwrap();
    let (_, bl_rep) = fit_bl(&data, &init, &FitSettings::default()).unwrap();
    assert!(bl_rep.loglik >= start - 1e-9);
    assert!(bl_rep.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert_eq!(bl_rep.free_params, 4);
}

#[test]
fn iterates_respect_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let settings = FitSettings::default();
    for seed in 0..10 {
        let data = gen_mixed_1d(seed);
        let xs = data.as_univariate().unwrap();
        let bounds = Bounds::from_data(xs, None).unwrap();
        let init = al_init_normal(xs).unwrap();
        let mut p = [init.param("a").unwrap(), init.param("b").unwrap(), init.param("s").unwrap()];
        let mut l = loglik_al(xs, None, p[0], p[1], p[2]);
        for _ in 0..rng.random_range(20..60) {
            let (next, lv, _) = al_pass(xs, None, p, &bounds, &settings);
            assert!(bounds.lo < next[0] && next[0] < next[1] && next[1] < bounds.hi);
            assert!((next[1] - next[0]) / (4.0 * xs.len() as f64) <= next[2]);
            assert!(bounds.s_min <= next[2] && next[2] <= bounds.s_max);
            assert!(lv >= l - 1e-9);
            p = next;
            l = lv;
        }
    }
}

#[test]
fn fit_is_translation_and_scale_equivariant() {
    let data = gen_mixed_1d(5);
    let xs = data.as_univariate().unwrap();
    let (c, d) = (3.5, -120.0);
    let moved: Vec<f64> = xs.iter().map(|x| c * x + d).collect();
    let moved_data = Dataset::univariate(moved.clone(), "moved").unwrap();
    let settings = FitSettings::default();
    let (p1, _) = fit_al(&data, &al_init_normal(xs).unwrap(), &settings).unwrap();
    let (p2, _) = fit_al(&moved_data, &al_init_normal(&moved).unwrap(), &settings).unwrap();
    for (name, shift) in [("a", d), ("b", d), ("s", 0.0)] {
        let want = c * p1.param(name).unwrap() + shift;
        let got = p2.param(name).unwrap();
        assert!((got - want).abs() < 1e-6 * want.abs().max(c), "{name}: {got} vs {want}");
    }
}

#[test]
fn cl_fit_increases_likelihood() {
    let truth = MultivariateSpec::cl(vec![1.0, -1.0], DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6]), 1.2, 6.0).unwrap();
    let data = truth.sample(2000, 3).unwrap();
    let init = cl_init(&data).unwrap();
    let settings = FitSettings {
        max_iters: 200,
        ..FitSettings::default()
    };
    let (spec, rep) = fit_cl(&data, &init, &settings).unwrap();
    assert!(rep.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    assert!(rep.loglik > rep.loglik_trace[0]);
    assert!(rep.loglik >= loglik_cl(&data, &truth).unwrap() - 10.0, "{}", rep.loglik);
    assert!((spec.m() - truth.m()).amax() < 0.1);
    assert_eq!(rep.free_params_constrained, Some(6));
    assert_eq!(rep.free_params, 7);
}

#[test]
fn dispatch_and_errors() {
    let data = gen_mixed_1d(1);
    let xs = data.as_univariate().unwrap();
    let init = FitModel::Univariate(al_init_normal(xs).unwrap());
    let (model, rep) = fit(&data, &init, &FitSettings::default()).unwrap();
    assert!(matches!(model, FitModel::Univariate(_)));
    assert!(rep.termination != Termination::MaxIters || rep.iterations == 500);
    let gn = FitModel::Univariate(UnivariateSpec::gn(50.0, 10.0, 2.0).unwrap());
    assert!(matches!(fit(&data, &gn, &FitSettings::default()), Err(Error::Unsupported(_))));
    let outside = UnivariateSpec::al(-500.0, 50.0, 1.0).unwrap();
    assert!(matches!(fit_al(&data, &outside, &FitSettings::default()), Err(Error::InvalidInit(_))));
    let flat = Dataset::univariate(vec![2.0; 10], "constant").unwrap();
    let al = UnivariateSpec::al(1.0, 3.0, 0.1).unwrap();
    assert!(matches!(fit_al(&flat, &al, &FitSettings::default()), Err(Error::Degenerate(_))));
    let bad = FitSettings {
        backtrack_factor: 1.5,
        ..FitSettings::default()
    };
    assert!(fit_al(&data, &al_init_normal(xs).unwrap(), &bad).is_err());
}

#[test]
fn report_serialization_and_scores() {
    assert_eq!(aic(0.0, 1), 2.0);
    assert!((bic(-1.0, 2, 10) - (2.0 * 10f64.ln() + 2.0)).abs() < 1e-15);
    let data = gen_mixed_1d(9);
    let xs = data.as_univariate().unwrap();
    let (_, rep) = fit_al(&data, &al_init_normal(xs).unwrap(), &FitSettings::default()).unwrap();
    assert!((rep.aic - (6.0 - 2.0 * rep.loglik)).abs() < 1e-9);
    assert!((rep.bic - (3.0 * 55f64.ln() - 2.0 * rep.loglik)).abs() < 1e-9);
    let json = serde_json::to_string(&rep).unwrap();
    let back: flattop::mle::FitReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rep);
    let csv = rep.trace_csv();
    assert!(csv.starts_with("iteration,loglik\n0,"));
    assert_eq!(csv.lines().count(), rep.loglik_trace.len() + 1);
}
