use std::path::Path;
use std::process::{Command, Output};

fn flattop(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_flattop"));
    cmd.args(args).env_remove("FLATTOP_OUT_DIR");
    if let Some(d) = out_dir {
        cmd.env("FLATTOP_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = flattop(args, None);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn eval_grid_integrates_to_one() {
    let text = ok(&["eval", "--family", "AL", "--params", "a=-1,b=1,s=0.1", "--grid", "-2:2:0.01"]);
    assert_eq!(text.lines().next(), Some("x,pdf,cdf"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 401);
    assert!((rows[0][0] + 2.0).abs() < 1e-12 && (rows[400][0] - 2.0).abs() < 1e-9);
    let trapz: f64 = rows.windows(2).map(|w| 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0])).sum();
    assert!((trapz - 1.0).abs() < 1e-3, "trapezoid {trapz}");
    assert!(rows.windows(2).all(|w| w[1][2] >= w[0][2]));
}

#[test]
fn eval_json_and_multivariate() {
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["eval", "--family", "GN", "--params", "mu=0,s=1.4142135623730951,beta=2", "--grid", "0:1:0.5", "--format", "json"]))
            .unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!((rows[0]["pdf"].as_f64().unwrap() - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-14);
    assert!((rows[0]["cdf"].as_f64().unwrap() - 0.5).abs() < 1e-14);

    let text = ok(&["eval", "--family", "MU", "--params", "r=1", "--grid", "-1.5:1.5:0.5"]);
    assert_eq!(text.lines().next(), Some("x,y,pdf"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 49);
    let inside = 1.0 / std::f64::consts::PI;
    for r in rows {
        let expect = if r[0] * r[0] + r[1] * r[1] <= 1.0 { inside } else { 0.0 };
        assert!((r[2] - expect).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let cases: &[&[&str]] = &[
        &["eval", "--family", "AL", "--params", "a=-1,b=1,s=0.1", "--grid", "-2:2"],
        &["eval", "--family", "AL", "--params", "a=-1,b=1,s=0.1", "--grid", "2:-2:0.1"],
        &["eval", "--family", "AL", "--params", "a=-1,b=1", "--grid", "0:1:0.1"],
        &["eval", "--family", "AL", "--params", "a=-1,b=1,s=0.1,q=3", "--grid", "0:1:0.1"],
        &["eval", "--family", "XX", "--params", "a=1", "--grid", "0:1:0.1"],
        &["eval", "--family", "AL", "--params", "a=1,b=0,s=0.1", "--grid", "0:1:0.1"],
        &["sweep", "--family", "GMM", "--k", "3:1"],
        &["mixfit", "--family", "XYZ", "--k", "2", "--data", "nope.csv"],
        &["gradcheck", "--family", "ALS"],
        &["nonsense"],
    ];
    for args in cases {
        let out = flattop(args, None);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1.0\nfoo\n").unwrap();
    let missing = dir.path().join("missing.csv");
    for data in [&bad, &missing] {
        let out = flattop(&["fit", "--family", "AL", "--data", data.to_str().unwrap()], None);
        assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn help_exits_zero() {
    assert_eq!(flattop(&["--help"], None).status.code(), Some(0));
    assert_eq!(flattop(&["sweep", "--help"], None).status.code(), Some(0));
}

#[test]
fn gradcheck_agrees() {
    for family in ["AL", "CL"] {
        let text = ok(&["gradcheck", "--family", family, "--n", "50", "--seed", "7", "--quiet"]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("instance,param,analytic,numeric,rel_err"));
        let errs: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
        assert!(errs.len() >= 50);
        let worst = errs.iter().cloned().fold(0.0, f64::max);
        assert!(worst < 1e-6, "{family}: {worst}");
    }
    let text = ok(&["gradcheck", "--family", "BL", "--n", "50", "--seed", "7", "--quiet"]);
    let worst = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).fold(0.0, f64::max);
    assert!(worst < 0.02, "BL: {worst}");
}

#[test]
fn sweep_on_segments_picks_four_by_bic() {
    for family in ["GMM", "FTM"] {
        let text = ok(&["sweep", "--family", family, "--k", "1:8", "--seed", "7", "--quiet"]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("K,it,loglik_per_N,AIC,BIC"));
        let rows: Vec<(usize, f64)> = lines
            .filter_map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                f[4].parse().ok().map(|bic| (f[0].parse().unwrap(), bic))
            })
            .collect();
        let best = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert_eq!(best, 4, "{family}: {text}");
    }
}

#[test]
fn output_is_deterministic() {
    let argvs: &[&[&str]] = &[
        &["sample", "--family", "BL", "--params", "a=0,b=2,s=0.1,t=0.3", "--n", "200", "--seed", "3"],
        &["gen", "segments", "--seed", "11"],
        &["divergence", "--case", "ball", "--n", "3", "--method", "numeric", "--draws", "20000", "--seed", "1"],
        &["flatness", "--family", "GN", "--params", "mu=0,s=1,beta=8", "--eps", "0.01", "--ratio-eps", "0.01"],
    ];
    for args in argvs {
        assert_eq!(ok(args), ok(args), "{args:?}");
    }
}

#[test]
fn mixfit_writes_model_and_responsibilities() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mixed.csv");
    std::fs::write(&data, ok(&["gen", "mixed", "--seed", "0"])).unwrap();
    let run = |tag: &str| {
        let out = flattop(
            &["mixfit", "--data", data.to_str().unwrap(), "--family", "FTM", "--k", "2", "--seed", "5", "--out", &format!("{tag}.json"), "--resp", &format!("{tag}.csv")],
            Some(dir.path()),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        (std::fs::read(dir.path().join(format!("{tag}.json"))).unwrap(), std::fs::read_to_string(dir.path().join(format!("{tag}.csv"))).unwrap())
    };
    let (model_a, resp_a) = run("a");
    let (model_b, resp_b) = run("b");
    assert_eq!(model_a, model_b);
    assert_eq!(resp_a, resp_b);

    let v: serde_json::Value = serde_json::from_slice(&model_a).unwrap();
    assert_eq!(v["strategy"], "FTM");
    assert_eq!(v["model"]["K"], 2);
    let mut lines = resp_a.lines();
    assert_eq!(lines.next(), Some("w0,w1"));
    let mut n = 0;
    for l in lines {
        let s: f64 = l.split(',').map(|x| x.parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        n += 1;
    }
    assert_eq!(n, 55);
}

#[test]
fn fit_reports_loglik_against_normal() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("mixed.csv");
    std::fs::write(&data, ok(&["gen", "mixed", "--seed", "0"])).unwrap();
    let trace = dir.path().join("trace.csv");
    let v: serde_json::Value = serde_json::from_str(&ok(&[
        "fit", "--family", "AL", "--data", data.to_str().unwrap(), "--trace", trace.to_str().unwrap(), "--quiet",
    ]))
    .unwrap();
    let l = v["report"]["loglik"].as_f64().unwrap();
    assert!(l > v["normal_loglik"].as_f64().unwrap());
    assert!(std::fs::read_to_string(&trace).unwrap().starts_with("iteration,loglik\n"));

    let bl: serde_json::Value =
        serde_json::from_str(&ok(&["fit", "--family", "BL", "--data", data.to_str().unwrap(), "--quiet"])).unwrap();
    assert!(bl["report"]["loglik"].as_f64().unwrap() >= l - 1e-9);
}

#[test]
fn divergence_closed_forms() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["divergence", "--case", "uniform"])).unwrap();
    let kl = 0.5 * (std::f64::consts::PI * std::f64::consts::E / 6.0).ln();
    assert!((v["kl"].as_f64().unwrap() - kl).abs() < 1e-12);
    let v: serde_json::Value = serde_json::from_str(&ok(&["divergence", "--p", "U:a=-1,b=1", "--q", "U:a=-2,b=2"])).unwrap();
    assert!((v["kl"].as_f64().unwrap() - 2f64.ln()).abs() < 1e-9);
    assert!((v["l1"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn scenario_round_trips_through_gen() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("sc.json");
    std::fs::write(&sc, ok(&["gen", "scenario", "--n", "50"])).unwrap();
    let text = ok(&["gen", "segments", "--scenario", sc.to_str().unwrap(), "--labels"]);
    assert_eq!(text.lines().count(), 50);
    assert!(text.lines().all(|l| l.split(',').count() == 3));
}
