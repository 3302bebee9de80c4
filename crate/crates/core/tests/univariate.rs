mod common;

use std::f64::consts::{E, PI};

use common::{bisect, configs, gl_integrate, knots_for, lower_gamma_series, rel_err};
use flattop::specfun::gamma;
use flattop::univariate::{
    approx_al_from_an, approx_al_from_normal, approx_bd_from_bl, parse_param_list, registry, FamilyTag, Method,
    MomentValue, UnivariateSpec,
};
use flattop::Error;
use proptest::prelude::*;

fn mass(spec: &UnivariateSpec) -> f64 {
    gl_integrate(|x| spec.pdf(x), &knots_for(spec), 24)
}

fn moment_oracle(spec: &UnivariateSpec, k: i32) -> f64 {
    let m = spec.mode();
    gl_integrate(|x| (x - m).powi(k) * spec.pdf(x), &knots_for(spec), 24)
}

#[test]
fn uniform_height_and_quantile() {
    let u = UnivariateSpec::uniform(0.0, 2.0).unwrap();
    assert_eq!(u.normalizer(), Some(0.5));
    assert_eq!(u.pdf(1.0), 0.5);
    assert_eq!(u.quantile(0.25).unwrap(), 0.5);
    let xs = UnivariateSpec::uniform(0.0, 1.0).unwrap().sample_values(4, 7).unwrap();
    assert_eq!(xs.len(), 4);
    assert!(xs.iter().all(|x| (0.0..=1.0).contains(x)));
}

#[test]
fn cf_beta_one_constant() {
    let cf = UnivariateSpec::cf(0.0, 1.0, 1.0, 1.0).unwrap();
    let want = 1.0 / (2.0 * (1.0 + E).ln());
    assert!(rel_err(cf.normalizer().unwrap(), want) < 1e-14);
}

#[test]
fn bl_flat_constant_near_inverse_width() {
    let bl = UnivariateSpec::bl(0.0, 10.0, 0.1, 0.1).unwrap();
    let c = bl.normalizer().unwrap();
    assert!((c - 0.1).abs() < 1e-4);
    // exact constant from the test integrator on the unnormalized product
    let raw = |x: f64| 1.0 / ((1.0 + (-x / 0.1f64).exp()) * (1.0 + ((x - 10.0) / 0.1f64).exp()));
    let knots = common::knots_around(&[0.0, 5.0, 10.0], 50.0, 0.01);
    let oracle = 1.0 / gl_integrate(raw, &knots, 24);
    assert!(rel_err(c, oracle) < 1e-10, "{c} vs {oracle}");
}

#[test]
fn al_reference_values() {
    let al = UnivariateSpec::al(-1.0, 1.0, 0.5).unwrap();
    assert!(rel_err(al.pdf(0.0), 0.5 * 1f64.tanh()) < 1e-14);
    assert!((al.cdf(0.0) - 0.5).abs() < 1e-15);
    assert_eq!(al.quantile(0.5).unwrap(), 0.0);
    let q = al.quantile(0.9).unwrap();
    let oracle = bisect(|x| al.cdf(x) - 0.9, -10.0, 10.0);
    assert!((q - oracle).abs() < 1e-12);
    assert_eq!(al.quantile_method(), Method::ClosedForm);
    let narrow = UnivariateSpec::al(0.0, 1.0, 1e-6).unwrap();
    assert!((narrow.pdf(0.5) - 1.0).abs() < 1e-9);
}

#[test]
fn al_pdf_matches_logistic_difference() {
    // (σ(za) − σ(zb))/(b − a) evaluated naively in the bulk
    let (a, b, s) = (-2.0, 3.0, 0.7);
    let al = UnivariateSpec::al(a, b, s).unwrap();
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    for i in 0..50 {
        let x = -6.0 + 0.25 * i as f64;
        let naive = (sig((x - a) / s) - sig((x - b) / s)) / (b - a);
        assert!(rel_err(al.pdf(x), naive) < 1e-12, "x={x}");
    }
}

#[test]
fn ch_cdf_at_centre_and_beta_one_equals_al() {
    let ch = UnivariateSpec::ch(0.0, 1.0, 1.0, 1.0).unwrap();
    assert!((ch.cdf(0.0) - 0.5).abs() < 1e-15);
    let al = UnivariateSpec::al(-1.0, 1.0, 1.0).unwrap();
    for i in 0..40 {
        let x = -5.0 + 0.25 * i as f64;
        assert!(rel_err(ch.pdf(x), al.pdf(x)) < 1e-12);
        assert!((ch.cdf(x) - al.cdf(x)).abs() < 1e-13);
    }
}

#[test]
fn gn_cdf_against_gamma_series() {
    let gn = UnivariateSpec::gn(0.0, 1.0, 4.0).unwrap();
    let want = 0.5 + lower_gamma_series(0.25, 1.0) / (2.0 * gamma(0.25));
    assert!((gn.cdf(1.0) - want).abs() < 1e-13);
}

#[test]
fn sampling_is_deterministic_and_de_median_centred() {
    let de = UnivariateSpec::de(0.0, 1.0).unwrap();
    let mut xs = de.sample_values(10_000, 99).unwrap();
    assert_eq!(xs, de.sample_values(10_000, 99).unwrap());
    xs.sort_by(|a, b| a.total_cmp(b));
    let median = 0.5 * (xs[4999] + xs[5000]);
    assert!(median.abs() < 0.05);
}

#[test]
fn moment_reference_values() {
    let al = UnivariateSpec::al(-PI, PI, 1.0).unwrap();
    let m2 = al.central_moment(2).unwrap();
    assert_eq!(m2.method, Method::ClosedForm);
    assert!(rel_err(m2.value.finite().unwrap(), 2.0 * PI * PI / 3.0) < 1e-13);
    let de = UnivariateSpec::de(0.0, 1.0).unwrap();
    assert_eq!(de.central_moment(2).unwrap().value, MomentValue::Infinite);
    assert!(matches!(de.kurtosis(), Err(Error::DivergentMoment { .. })));
    let gn = UnivariateSpec::gn(0.0, 1.0, 2.0).unwrap();
    assert!(rel_err(gn.central_moment(2).unwrap().value.finite().unwrap(), 0.5) < 1e-14);
    let cc = UnivariateSpec::cc(0.0, 1.0, 3.0).unwrap();
    assert_eq!(cc.central_moment(2).unwrap().value, MomentValue::Infinite);
    assert!(cc.central_moment(3).is_err());
}

#[test]
fn kurtosis_reference_values() {
    let al = UnivariateSpec::al(-PI, PI, 1.0).unwrap();
    assert!((al.kurtosis().unwrap() - 3.0).abs() < 1e-14);
    let gn = UnivariateSpec::gn(0.0, 1.0, 1e3).unwrap();
    assert!((gn.kurtosis().unwrap() - 1.8).abs() < 1e-3);
    let cc = UnivariateSpec::cc(0.0, 1.0, 6.0).unwrap();
    assert!((cc.kurtosis().unwrap() - 4.0).abs() < 1e-12);
    let u = UnivariateSpec::uniform(0.0, 1.0).unwrap();
    assert_eq!(u.kurtosis().unwrap(), 1.8);
}

#[test]
fn al_kurtosis_bounds_over_ratio_range() {
    let mut ratio: f64 = 1e-3;
    while ratio <= 1e3 {
        let k = UnivariateSpec::al(-ratio, ratio, 1.0).unwrap().kurtosis().unwrap();
        assert!(k > 1.8 && k <= 4.2, "r/s={ratio}: {k}");
        ratio *= 1.5;
    }
}

#[test]
fn closed_form_moments_match_integration() {
    for tag in [FamilyTag::AL, FamilyTag::GN, FamilyTag::CF, FamilyTag::CH, FamilyTag::AN, FamilyTag::U] {
        for spec in configs(tag) {
            for k in [2u32, 4] {
                let closed = spec.central_moment(k).unwrap();
                assert_eq!(closed.method, Method::ClosedForm);
                let q = moment_oracle(&spec, k as i32);
                let c = closed.value.finite().unwrap();
                assert!(rel_err(c, q) < 1e-6, "{spec} k={k}: {c} vs {q}");
            }
        }
    }
}

#[test]
fn normalization_every_family() {
    for tag in FamilyTag::ALL {
        let cs = configs(tag);
        assert!(cs.len() >= 20, "{tag} has {} configs", cs.len());
        for spec in cs {
            let m = mass(&spec);
            assert!((m - 1.0).abs() < 1e-8, "{spec}: {m}");
        }
    }
}

#[test]
fn cdf_derivative_matches_pdf() {
    for tag in FamilyTag::ALL {
        for spec in configs(tag).into_iter().step_by(5) {
            let lo = spec.quantile(0.02).unwrap();
            let hi = spec.quantile(0.98).unwrap();
            for i in 0..20 {
                let x = lo + (hi - lo) * (i as f64 + 0.5) / 20.0;
                let p = spec.pdf(x);
                if p < 1e-3 * spec.pdf(spec.mode()) {
                    continue;
                }
                let h = 1e-4 * spec.scale();
                // fourth-order central difference
                let d = (-spec.cdf(x + 2.0 * h) + 8.0 * spec.cdf(x + h) - 8.0 * spec.cdf(x - h)
                    + spec.cdf(x - 2.0 * h))
                    / (12.0 * h);
                assert!(rel_err(d, p) < 1e-6, "{spec} x={x}: {d} vs {p}");
            }
        }
    }
}

#[test]
fn quantile_round_trip() {
    for tag in FamilyTag::ALL {
        for spec in configs(tag).into_iter().step_by(4) {
            let tol = match spec.quantile_method() {
                Method::ClosedForm => 1e-10,
                Method::Quadrature => 1e-8,
            };
            for i in 1..100 {
                let v = i as f64 / 100.0;
                let x = spec.quantile(v).unwrap();
                assert!((spec.cdf(x) - v).abs() < tol, "{spec} v={v}");
            }
        }
    }
}

#[test]
fn al_uniform_limit() {
    let al = UnivariateSpec::al(0.0, 1.0, 1e-4).unwrap();
    for i in 1..20 {
        let x = 0.1 + 0.8 * i as f64 / 20.0;
        assert!((al.pdf(x) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bd_series_branch_is_continuous() {
    let (a, b, s) = (0.0, 3.0, 0.8);
    let exact = UnivariateSpec::bd(a, b, s, s).unwrap().normalizer().unwrap();
    let limit = 1.0 / ((b - a) + (3.0 * s + (b - a)) * (-(b - a) / s).exp() / 4.0);
    assert!(rel_err(exact, limit) < 1e-14);
    for rel in [1e-7, 5e-5, 9.9e-5, 1.01e-4, 2e-4, 1e-3] {
        let t = s * (1.0 + rel);
        let spec = UnivariateSpec::bd(a, b, s, t).unwrap();
        let oracle = 1.0 / mass(&UnivariateSpec::bd(a, b, s, t).unwrap()) * spec.normalizer().unwrap();
        assert!(rel_err(spec.normalizer().unwrap(), oracle) < 1e-9, "rel={rel}");
    }
}

#[test]
fn bl_equal_slopes_is_al() {
    let bl = UnivariateSpec::bl(-1.0, 2.0, 0.4, 0.4).unwrap();
    let al = UnivariateSpec::al(-1.0, 2.0, 0.4).unwrap();
    for i in 0..40 {
        let x = -4.0 + 0.2 * i as f64;
        assert!(rel_err(bl.pdf(x), al.pdf(x)) < 1e-10, "x={x}");
    }
    assert!((bl.mode() - 0.5).abs() < 1e-10);
}

#[test]
fn ce_is_cf_with_beta_two() {
    let ce = UnivariateSpec::ce(-1.0, 3.0, 0.5).unwrap();
    let cf = UnivariateSpec::cf(1.0, 2.0, 0.5, 2.0).unwrap();
    for i in 0..30 {
        let x = -3.0 + 0.25 * i as f64;
        assert!(rel_err(ce.pdf(x), cf.pdf(x)) < 1e-14);
    }
    assert_eq!(ce.tag(), FamilyTag::CE);
}

#[test]
fn asymmetric_modes_maximize_density() {
    let specs = [
        UnivariateSpec::bl(0.0, 1.0, 0.1, 0.5).unwrap(),
        UnivariateSpec::bd(0.0, 1.0, 0.2, 0.05).unwrap(),
        UnivariateSpec::als(0.0, 1.0, 0.3, 0.6).unwrap(),
    ];
    for spec in specs {
        let m = spec.mode();
        let h = 1e-5;
        assert!(spec.log_pdf(m) >= spec.log_pdf(m + h) - 1e-13, "{spec}");
        assert!(spec.log_pdf(m) >= spec.log_pdf(m - h) - 1e-13, "{spec}");
    }
}

#[test]
fn normal_approximation_constants() {
    let al = approx_al_from_normal(0.0, 1.0).unwrap();
    assert!((al.param("a").unwrap() + 0.97741).abs() < 5e-6);
    assert!((al.param("b").unwrap() - 0.97741).abs() < 5e-6);
    assert!((al.param("s").unwrap() - 0.47712).abs() < 5e-6);
    assert!((al.kurtosis().unwrap() - 3.48).abs() < 0.005);
    let an = approx_al_from_an(0.0, 1.0, 1.0).unwrap();
    assert_eq!(an.param("s"), Some(0.5877));
    let bd = approx_bd_from_bl(0.0, 1.0, 0.2, 0.3).unwrap();
    assert!(rel_err(bd.param("s").unwrap(), 0.2 * 4f64.ln()) < 1e-15);
    assert!(rel_err(bd.param("t").unwrap(), 0.3 * 4f64.ln()) < 1e-15);
}

#[test]
fn registry_rejects_bad_parameters() {
    let ok = UnivariateSpec::parse("AL", "a=0,b=1,s=0.2").unwrap();
    assert_eq!(ok.tag(), FamilyTag::AL);
    assert!(matches!(UnivariateSpec::parse("XX", "a=0"), Err(Error::UnknownFamily(_))));
    assert!(matches!(UnivariateSpec::parse("AL", "a=0,b=1"), Err(Error::InvalidParameter { .. })));
    assert!(matches!(
        UnivariateSpec::parse("AL", "a=0,b=1,s=1,t=2"),
        Err(Error::InvalidParameter { .. })
    ));
    assert!(matches!(UnivariateSpec::parse("AL", "a=1,b=0,s=1"), Err(Error::InvalidParameter { .. })));
    assert!(matches!(UnivariateSpec::parse("CC", "m=0,s=1,beta=1"), Err(Error::InvalidParameter { .. })));
    assert!(matches!(UnivariateSpec::parse("ALS", "a=0,b=1,s=1,lambda=1"), Err(Error::InvalidParameter { .. })));
    assert!(parse_param_list("a=1,a=2").is_err());
    for entry in registry::entries() {
        assert!(!entry.params.is_empty());
    }
}

#[test]
fn json_round_trip_is_exact() {
    for tag in FamilyTag::ALL {
        for spec in configs(tag).into_iter().take(3) {
            let text = serde_json::to_string(&spec).unwrap();
            let back: UnivariateSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(back, spec);
            assert_eq!(back.params(), spec.params());
        }
    }
    let text = r#"{"family":"AL","params":{"a":0.1,"b":0.30000000000000004,"s":1e-3}}"#;
    let spec: UnivariateSpec = serde_json::from_str(text).unwrap();
    assert_eq!(spec.param("b"), Some(0.30000000000000004));
    assert!(serde_json::from_str::<UnivariateSpec>(r#"{"family":"AL","params":{"a":0,"b":1}}"#).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn symmetric_families_are_mirror_images(
        m in -5.0f64..5.0,
        r in 0.1f64..5.0,
        s in 0.05f64..3.0,
        beta in 1.2f64..6.0,
        d in 0.0f64..10.0,
    ) {
        let specs = [
            UnivariateSpec::uniform(m - r, m + r).unwrap(),
            UnivariateSpec::gn(m, s, beta).unwrap(),
            UnivariateSpec::an(m - r, m + r, s).unwrap(),
            UnivariateSpec::al(m - r, m + r, s).unwrap(),
            UnivariateSpec::cc(m, s, beta).unwrap(),
            UnivariateSpec::cf(m, r, s, beta).unwrap(),
            UnivariateSpec::ce(m - r, m + r, s).unwrap(),
            UnivariateSpec::ch(m, r, s, beta).unwrap(),
            UnivariateSpec::de(m, s).unwrap(),
        ];
        for spec in specs {
            let c = spec.mode();
            prop_assert!((c - m).abs() <= 4.0 * f64::EPSILON * (m.abs() + r));
            let (p, q) = (spec.pdf(c + d), spec.pdf(c - d));
            // rounding of c ± d alone moves the density by |p'/p|·ulp(x)
            if p == 0.0 && q == 0.0 {
                continue;
            }
            let slope = (spec.pdf_d1(c + d) / p).abs();
            let tol = 64.0 * f64::EPSILON * (1.0 + (c.abs() + d) * slope);
            prop_assert!((p - q).abs() <= tol * p.max(q), "{} d={}", spec, d);
        }
    }

    #[test]
    fn cdf_is_monotone(
        a in -3.0f64..3.0,
        w in 0.2f64..4.0,
        s in 0.05f64..2.0,
        x in -10.0f64..10.0,
        dx in 1e-3f64..1.0,
    ) {
        let specs = [
            UnivariateSpec::al(a, a + w, s).unwrap(),
            UnivariateSpec::an(a, a + w, s).unwrap(),
            UnivariateSpec::cf(a, w, s, 1.0).unwrap(),
            UnivariateSpec::de(a, s).unwrap(),
        ];
        for spec in specs {
            let (f0, f1) = (spec.cdf(x), spec.cdf(x + dx));
            prop_assert!(f0 <= f1 + 1e-15);
            prop_assert!((0.0..=1.0).contains(&f0));
        }
    }

    #[test]
    fn al_quantile_inverts_cdf(a in -3.0f64..3.0, w in 0.01f64..20.0, s in 1e-3f64..5.0, v in 1e-6f64..0.999_999) {
        let al = UnivariateSpec::al(a, a + w, s).unwrap();
        let x = al.quantile(v).unwrap();
        prop_assert!((al.cdf(x) - v).abs() < 1e-10);
    }
}
