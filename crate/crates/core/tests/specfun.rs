//! Special functions against frozen high-precision values and identities.

use std::f64::consts::PI;

use flattop::specfun::{
    self, fermi_dirac_complete, fermi_dirac_incomplete, integrate, polylog_neg, QuadratureSettings, Tail,
};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

const POLYLOG: &[(i32, f64, f64)] = &[
    (2, -30.0, -9.357622968839955e-14),
    (2, -3.0, -0.04918072033882423),
    (2, -0.7, -0.4456434426919501),
    (2, -0.2, -0.6935045966786987),
    (2, 0.0, -0.8224670334241132),
    (2, 0.3, -1.0540336671330217),
    (2, 0.9, -1.6785820504728897),
    (2, 2.0, -3.513921582133803),
    (2, 5.0, -14.138207435970704),
    (2, 40.0, -801.6449340668482),
    (2, 300.0, -45001.64493406685),
    (3, -30.0, -9.357622968840065e-14),
    (3, -3.0, -0.049481701454796134),
    (3, -0.7, -0.4695344457569215),
    (3, -0.2, -0.750262203200804),
    (3, 0.0, -0.9015426773696957),
    (3, 0.3, -1.1818086593647148),
    (3, 0.9, -1.989982297845718),
    (3, 2.0, -4.756334196415437),
    (3, 5.0, -29.06473595087995),
    (3, 40.0, -10732.464029340596),
    (3, 300.0, -4500493.480220054),
    (4, -30.0, -9.357622968840119e-14),
    (4, -3.0, -0.049633646411820075),
    (4, -0.7, -0.48248641743635534),
    (4, -0.2, -0.7822821054348172),
    (4, 0.0, -0.9470328294972459),
    (4, 0.3, -1.2577996186141656),
    (4, 0.9, -2.1906251039395985),
    (4, 2.0, -5.716380543853743),
    (4, 5.0, -48.49067304799197),
    (4, 40.0, -107984.50798580424),
    (4, 300.0, -337574023.92707384),
    (5, -30.0, -9.357622968840147e-14),
    (5, -3.0, -0.04971010931738597),
    (5, -0.7, -0.489331788805425),
    (5, -0.2, -0.7996923340766187),
    (5, 0.0, -0.9721197704469093),
    (5, 0.3, -1.3007444565235684),
    (5, 0.9, -2.311096348944721),
    (5, 2.0, -6.3828162134514175),
    (5, 5.0, -69.78819121715198),
    (5, 40.0, -870955.0593394075),
    (5, 300.0, -20257402771.520515),
    (7, -30.0, -9.357622968840167e-14),
    (7, -3.0, -0.04976775917414128),
    (7, -0.7, -0.4947113868873604),
    (7, -0.2, -0.8137212565917983),
    (7, 0.0, -0.9925938199228302),
    (7, 0.3, -1.3365878342405022),
    (7, 0.9, -2.4176176033917502),
    (7, 2.0, -7.066864459534575),
    (7, 5.0, -107.6597664554761),
    (7, 40.0, -33931895.78943024),
    (7, 300.0, -43426175581597.62),
    (10, -30.0, -9.357622968840174e-14),
    (10, -3.0, -0.049784649795568785),
    (10, -0.7, -0.49634650512876116),
    (10, -0.2, -0.8180850427294581),
    (10, 0.0, -0.9990395075982715),
    (10, 0.3, -1.3481182624204584),
    (10, 0.9, -2.453919095812263),
    (10, 2.0, -7.340849310484757),
    (10, 5.0, -137.95927076330435),
    (10, 40.0, -3167948393.237881),
    (10, 300.0, -1.6299107508504154e+18),
];

const FD_COMPLETE: &[(f64, f64, f64)] = &[
    (-0.75, -20.0, 2.061153618866132e-09),
    (-0.75, -2.0, 0.12160685164286172),
    (-0.75, -0.5, 0.40581819673574765),
    (-0.75, 0.0, 0.5544873859140731),
    (-0.75, 0.7, 0.7827198982966039),
    (-0.75, 3.0, 1.364429056070078),
    (-0.75, 12.0, 2.0487995270526245),
    (-0.75, 60.0, 3.0702904525806853),
    (-0.5, -20.0, 2.061153619434518e-09),
    (-0.5, -2.0, 0.12366562180120995),
    (-0.5, -0.5, 0.43123144192639706),
    (-0.5, 0.0, 0.6048986434216304),
    (-0.5, 0.7, 0.8942877121627347),
    (-0.5, 3.0, 1.8534850886015177),
    (-0.5, 12.0, 3.8972682319254393),
    (-0.5, 60.0, 8.739387813831382),
    (-0.2, -20.0, 2.061153619998519e-09),
    (-0.2, -2.0, 0.12574555468451512),
    (-0.2, -0.5, 0.4581532470004384),
    (-0.2, 0.0, 0.659854662679817),
    (-0.2, 0.7, 1.022276685766541),
    (-0.2, 3.0, 2.5377694067384464),
    (-0.2, 12.0, 7.823535948347395),
    (-0.2, 60.0, 28.402760747444116),
    (0.25, -20.0, 2.061153620652345e-09),
    (0.25, -2.0, 0.12820850189820304),
    (0.25, -0.5, 0.49188006849341265),
    (0.25, 0.0, 0.7310987638016613),
    (0.25, 0.7, 1.1986881459560954),
    (0.25, 3.0, 3.7418475355249945),
    (0.25, 12.0, 19.783854428784753),
    (0.25, 60.0, 147.40764251471293),
    (0.5, -20.0, 2.0611536209365377e-09),
    (0.5, -2.0, 0.12929851332007558),
    (0.5, -0.5, 0.5075371035546379),
    (0.5, 0.0, 0.765147024625408),
    (0.5, 0.7, 1.2874984984088396),
    (0.5, 3.0, 4.487547421351709),
    (0.5, 12.0, 31.540203287044243),
    (0.5, 60.0, 349.7353379459762),
    (1.5, -20.0, 2.0611536216875478e-09),
    (1.5, -2.0, 0.13224678225177236),
    (1.5, -0.5, 0.5526495259473541),
    (1.5, 0.0, 0.8671998890121841),
    (1.5, 0.7, 1.5737833942930932),
    (1.5, 3.0, 7.7886107702959695),
    (1.5, 12.0, 156.51518642795727),
    (1.5, 60.0, 8405.148157117057),
    (2.5, -20.0, 2.0611536220630526e-09),
    (2.5, -2.0, 0.1337669290459733),
    (2.5, -0.5, 0.5779521605410086),
    (2.5, 0.0, 0.9275535777739481),
    (2.5, 0.7, 1.7605877096684572),
    (2.5, 3.0, 11.112899522711691),
    (2.5, 12.0, 566.372380835691),
    (2.5, 60.0, 144417.03723463553),
    (1.0, -20.0, 2.061153621376469e-09),
    (1.0, -2.0, 0.13101248471442378),
    (1.0, -0.5, 0.5332172799948812),
    (1.0, 0.0, 0.8224670334241132),
    (1.0, 0.7, 1.4442906241562763),
    (1.0, 3.0, 6.095753346509402),
    (1.0, 12.0, 73.64492792264531),
    (1.0, 60.0, 1801.6449340668482),
    (2.0, -20.0, 2.0611536219075137e-09),
    (2.0, -2.0, 0.1331327293856503),
    (2.0, -0.5, 0.5671842444922778),
    (2.0, 0.0, 0.9015426773696957),
    (2.0, 0.7, 1.6781549592173466),
    (2.0, 3.0, 9.484283901999476),
    (2.0, 12.0, 307.73921494638637),
    (2.0, 60.0, 36098.696044010896),
    (3.0, -20.0, 2.0611536221730358e-09),
    (3.0, -2.0, 0.13421991550386803),
    (3.0, -0.5, 0.585866475325089),
    (3.0, 0.0, 0.9470328294972459),
    (3.0, 0.7, 1.8245922546026185),
    (3.0, 3.0, 12.621635313399691),
    (3.0, 12.0, 984.3293123278568),
    (3.0, 60.0, 542962.7753859858),
];

const FD_INCOMPLETE: &[(f64, f64, f64, f64)] = &[
    (0.5, 1.0, 3.0, 0.2856463041410346),
    (-0.5, 2.0, 1.0, 0.5197851212969075),
    (-0.5, -1.0, 0.5, 0.10371999866060501),
    (1.5, 4.0, 2.0, 11.687377708890681),
    (0.25, 10.0, 12.0, 0.2659260716765969),
    (-0.8, 0.0, 0.1, 0.20317649983293495),
    (2.0, 3.0, 1.0, 9.333719784070725),
    (1.0, -2.0, 5.0, 0.005469006436453446),
    (3.0, 20.0, 5.0, 6971.505882801434),
    (0.5, 30.0, 1.0, 123.0250949720348),
];

#[test]
fn polylog_matches_frozen_values() {
    for &(n, x, want) in POLYLOG {
        let got = polylog_neg(n, x).unwrap();
        assert!(rel(got, want) < 1e-13, "Li_{n}(-e^{x}): {got} vs {want}");
    }
}

#[test]
fn fermi_dirac_complete_matches_frozen_values() {
    for &(j, x, want) in FD_COMPLETE {
        let got = fermi_dirac_complete(j, x).unwrap();
        assert!(rel(got, want) < 1e-11, "F_{j}({x}): {got} vs {want}");
    }
}

#[test]
fn fermi_dirac_incomplete_matches_frozen_values() {
    for &(j, x, u, want) in FD_INCOMPLETE {
        let got = fermi_dirac_incomplete(j, x, u).unwrap();
        assert!(rel(got, want) < 1e-11, "F_{j}({x},{u}): {got} vs {want}");
    }
}

#[test]
fn fermi_dirac_reference_points() {
    assert!((fermi_dirac_complete(0.0, 0.0).unwrap() - 0.693_147_180_559_945_3).abs() < 1e-16);
    assert!(fermi_dirac_complete(1.0, -745.0).unwrap().abs() < 1e-300);
    // alternating series oracle Σ(−1)^{k+1}/k²
    let mut s = 0.0;
    for k in 1..=2_000_000u64 {
        let kf = k as f64;
        s += if k % 2 == 1 { 1.0 } else { -1.0 } / (kf * kf);
    }
    let v = fermi_dirac_complete(1.0, 0.0).unwrap();
    assert!((v - s).abs() < 1e-12);
    assert!((v - PI * PI / 12.0).abs() < 1e-15);
    assert!((fermi_dirac_incomplete(0.0, 2.0, 2.0).unwrap() - 2f64.ln()).abs() < 1e-16);
    assert_eq!(
        fermi_dirac_incomplete(0.0, 0.0, 0.0).unwrap(),
        fermi_dirac_complete(0.0, 0.0).unwrap()
    );
}

#[test]
fn fermi_dirac_overflow_safe() {
    for &j in &[0.0, 0.5, 1.0, -0.5, 2.0] {
        let hi = fermi_dirac_complete(j, 700.0).unwrap();
        let lo = fermi_dirac_complete(j, -700.0).unwrap();
        assert!(hi.is_finite() && hi > 0.0);
        assert!(lo.is_finite() && lo >= 0.0);
    }
}

#[test]
fn fermi_dirac_monotone_on_grid() {
    for &j in &[-0.5, 0.0, 0.5, 1.0, 2.5] {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..1000 {
            let x = -30.0 + 60.0 * i as f64 / 999.0;
            let v = fermi_dirac_complete(j, x).unwrap();
            assert!(v > prev, "j={j}, x={x}");
            prev = v;
        }
    }
}

#[test]
fn polylog_reference_points() {
    assert!((polylog_neg(2, 0.0).unwrap() + PI * PI / 12.0).abs() < 1e-16);
    assert!((polylog_neg(4, 0.0).unwrap() + 7.0 * PI.powi(4) / 720.0).abs() < 1e-15);
    let x = 1.0;
    let lhs = polylog_neg(3, x).unwrap() - polylog_neg(3, -x).unwrap();
    let rhs = -x.powi(3) / 6.0 - PI * PI * x / 6.0;
    assert!(rel(lhs, rhs) < 1e-14);
}

#[test]
fn polylog_order_five_by_reflected_direct_sum() {
    // Li_5(−e^2) from the inversion identity with a 64-term sum for Li_5(−e^{−2})
    let x: f64 = 2.0;
    let z = (-x).exp();
    let mut reflected = 0.0;
    for k in 1..=64 {
        reflected += (-z).powi(k) / (k as f64).powi(5);
    }
    let eta2 = PI * PI / 12.0;
    let eta4 = 7.0 * PI.powi(4) / 720.0;
    let want = reflected - x.powi(5) / 120.0 - 2.0 * (x.powi(3) / 6.0 * eta2 + x * eta4);
    assert!(rel(polylog_neg(5, x).unwrap(), want) < 1e-14);
}

/// erf by the positive-term series e^{−x²}·Σ 2ⁿx^{2n+1}/(2n+1)!!.
fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-18 * sum {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x * x).exp() * sum
}

#[test]
fn erf_matches_series() {
    for i in 1..=60 {
        let x = 0.05 * i as f64;
        let e = erf_series(x);
        assert!((specfun::erf(x) - e).abs() < 2e-15, "erf({x})");
        assert!((specfun::erfc(x) - (1.0 - e)).abs() < 2e-15, "erfc({x})");
        assert!((specfun::erfc(-x) - (1.0 + e)).abs() < 4e-15, "erfc(-{x})");
    }
    assert_eq!(specfun::erf(f64::INFINITY), 1.0);
    assert_eq!(specfun::erfc(f64::NEG_INFINITY), 2.0);
    assert!(specfun::erfc(30.0) < 1e-300);
}

#[test]
fn special_function_reference_points() {
    assert_eq!(specfun::erf(0.0), 0.0);
    let lb = specfun::log_beta(0.75, 0.25).unwrap();
    assert!((lb.exp() - PI * 2f64.sqrt()).abs() < 1e-13);
    let q = specfun::incomplete_gamma(1.0, 2.0, Tail::Upper).unwrap();
    assert!((q - (-2f64).exp()).abs() < 1e-15);
    let r = integrate(|t: f64| (-t).exp(), 0.0, f64::INFINITY, &QuadratureSettings::default()).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12);
}

fn inversion_rhs(n: i32, x: f64) -> f64 {
    // Li_n(−e^x) + (−1)^n Li_n(−e^{−x}) = −x^n/n! − 2 Σ_k x^{n−2k}/(n−2k)! η(2k)
    let fact = |m: i32| (1..=m).fold(1.0, |a, i| a * i as f64);
    let mut v = -x.powi(n) / fact(n);
    for k in 1..=n / 2 {
        v -= 2.0 * x.powi(n - 2 * k) / fact(n - 2 * k) * specfun::dirichlet_eta((2 * k) as f64);
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn polylog_inversion_identity(x in -5.0f64..5.0, n in prop::sample::select(vec![3, 5])) {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = polylog_neg(n, x).unwrap() + sign * polylog_neg(n, -x).unwrap();
        let rhs = inversion_rhs(n, x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn incomplete_at_zero_is_complete(j in -0.9f64..3.0, x in -20.0f64..20.0) {
        let a = fermi_dirac_incomplete(j, x, 0.0).unwrap();
        let b = fermi_dirac_complete(j, x).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
    }

    #[test]
    fn incomplete_decreases_in_lower_limit(j in -0.9f64..3.0, x in -5.0f64..10.0, u in 0.0f64..8.0) {
        let a = fermi_dirac_incomplete(j, x, u).unwrap();
        let b = fermi_dirac_incomplete(j, x, u + 0.5).unwrap();
        prop_assert!(b < a);
    }

    #[test]
    fn erf_odd_and_bounded(x in -10.0f64..10.0) {
        prop_assert_eq!(specfun::erf(-x), -specfun::erf(x));
        prop_assert!(specfun::erf(x).abs() <= 1.0);
    }

    #[test]
    fn incomplete_gamma_tails_sum(s in 0.1f64..10.0, x in 0.0f64..30.0) {
        let lo = specfun::incomplete_gamma(s, x, Tail::Lower).unwrap();
        let up = specfun::incomplete_gamma(s, x, Tail::Upper).unwrap();
        prop_assert!(rel(lo + up, specfun::gamma(s)) < 1e-12);
    }
}
