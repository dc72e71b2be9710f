use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elg::distributions::elg_cdf;
use elg::inference::ModelComparison;
use elg::ElgParams;
use serde_json::Value;

fn elg_bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elg"))
        .args(args)
        .output()
        .expect("spawn elg")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend_from_slice(&["--format", "json"]);
    let out = elg_bin(&all);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("elg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn write(name: &str, text: &str) -> PathBuf {
    let path = scratch(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn relief_fit_matches_reference_estimates() {
    let v = json(&["fit", "--data", "builtin:relief", "--model", "elg"]);
    let p = &v["results"]["params"];
    assert!((p["alpha"].as_f64().unwrap() - 15.5628).abs() < 5e-4);
    assert!((p["theta"].as_f64().unwrap() - 1.5270).abs() < 5e-4);
    assert!((p["p"].as_f64().unwrap() - 0.9059).abs() < 5e-4);
    assert_eq!(v["results"]["converged"], true);

    let v = json(&["fit", "--data", "builtin:relief", "--model", "lg"]);
    let p = &v["results"]["params"];
    assert!((p["theta"].as_f64().unwrap() - 3.1827).abs() < 5e-4);
    assert!((p["p"].as_f64().unwrap() + 125.1293).abs() < 5e-3);
}

#[test]
fn em_only_for_elg() {
    let out = elg_bin(&["fit", "--data", "builtin:relief", "--model", "gamma", "--method", "em"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&["fit", "--data", "builtin:relief", "--method", "em"]);
    assert_eq!(v["results"]["method"], "em");
    assert!((v["results"]["loglik"].as_f64().unwrap() + 15.5528).abs() < 1e-3);
}

#[test]
fn exit_codes() {
    assert_eq!(elg_bin(&["fit", "--bogus"]).status.code(), Some(1));
    assert_eq!(elg_bin(&["--help"]).status.code(), Some(0));

    let missing = scratch("does-not-exist.txt");
    let out = elg_bin(&["fit", "--data", s(&missing)]);
    assert_eq!(out.status.code(), Some(3));

    let empty = write("empty.txt", "");
    let out = elg_bin(&["compare", "--data", s(&empty)]);
    assert_eq!(out.status.code(), Some(1));

    let repeated = write("repeated.txt", "2.5\n2.5\n2.5\n2.5\n");
    let out = elg_bin(&["fit", "--data", s(&repeated)]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn parse_errors_name_the_line() {
    let bad = write("bad.txt", "# header\n1.2\n3.4\nnot-a-number\n");
    let out = elg_bin(&["fit", "--data", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn sample_is_deterministic() {
    let args = ["sample", "--alpha", "2", "--theta", "1", "--p", "0.5", "--n", "1000", "--seed", "7"];
    let a = elg_bin(&args);
    let b = elg_bin(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);

    let v = json(&args);
    let values: Vec<f64> = v["results"]["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(values.len(), 1000);
    assert!(values.iter().all(|&x| x > 0.0));

    let path = scratch("sample.txt");
    let mut with_file = args.to_vec();
    with_file.extend_from_slice(&["--output", s(&path)]);
    assert_eq!(elg_bin(&with_file).status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let from_file: Vec<f64> = text.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(from_file, values);
}

#[test]
fn eval_cdf_and_quantiles() {
    let v = json(&["eval", "--what", "cdf", "--alpha", "2", "--theta", "1", "--p", "0.5", "--x", "0"]);
    assert_eq!(v["results"]["points"][0][1].as_f64(), Some(0.0));

    let params = ElgParams::new(2.0, 1.0, 0.5).unwrap();
    let v = json(&[
        "eval", "--what", "quantile", "--alpha", "2", "--theta", "1", "--p", "0.5", "--u", "0.25", "0.5", "0.75",
    ]);
    let pts = v["results"]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 3);
    for pt in pts {
        let (u, x) = (pt[0].as_f64().unwrap(), pt[1].as_f64().unwrap());
        assert!((elg_cdf(params, x).unwrap() - u).abs() < 1e-10);
    }
}

#[test]
fn fitted_survival_curve_decreases_from_one() {
    let fit = json(&["fit", "--data", "builtin:relief"]);
    let p = &fit["results"]["params"];
    let (a, t, q) = (p["alpha"].to_string(), p["theta"].to_string(), p["p"].to_string());
    let v = json(&[
        "eval", "--what", "survival", "--alpha", &a, "--theta", &t, "--p", &q, "--from", "0", "--to", "4.5", "--step",
        "0.01",
    ]);
    let ys: Vec<f64> = v["results"]["points"].as_array().unwrap().iter().map(|pt| pt[1].as_f64().unwrap()).collect();
    assert_eq!(ys.len(), 451);
    assert_eq!(ys[0], 1.0);
    assert!(ys.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn moments_report_method() {
    let v = json(&["moments", "--alpha", "1", "--theta", "1", "--p", "0"]);
    assert!((v["results"]["summary"]["mean"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert_eq!(v["results"]["moments"][0]["method"], "series");

    let v = json(&["moments", "--alpha", "2", "--theta", "1", "--p", "0.5"]);
    for m in v["results"]["moments"].as_array().unwrap() {
        assert_eq!(m["method"], "quadrature");
    }
}

#[test]
fn lrtest_nulls_are_nested() {
    let lg = json(&["lrtest", "--data", "builtin:relief", "--null", "lg"]);
    let lindley = json(&["lrtest", "--data", "builtin:relief", "--null", "lindley"]);
    assert_eq!(lg["results"]["df"], 1);
    assert_eq!(lindley["results"]["df"], 2);
    let w_lg = lg["results"]["omega"].as_f64().unwrap();
    let w_lindley = lindley["results"]["omega"].as_f64().unwrap();
    assert!((w_lg - 7.5667).abs() < 1e-3);
    assert!(w_lindley >= w_lg);
}

#[test]
fn compare_roundtrips_through_json() {
    let v = json(&["compare", "--data", "builtin:relief"]);
    let c: ModelComparison = serde_json::from_value(v["results"].clone()).unwrap();
    assert_eq!(c.rows.len(), 4);
    assert_eq!(c.best_by_aic.as_deref(), Some("ELG"));
    assert_eq!(serde_json::to_value(&c).unwrap(), v["results"]);

    let table = String::from_utf8(elg_bin(&["compare", "--data", "builtin:relief"]).stdout).unwrap();
    assert!(table.contains("37.1056"), "{table}");
}

#[test]
fn digest_tracks_content_and_flags() {
    let a = write("digest-a.txt", "1.1\n1.4\n1.3\n1.7\n1.9\n");
    let b = write("digest-b.txt", "1.1\n1.4\n1.3\n1.7\n2.0\n");
    let digest = |args: &[&str]| json(args)["inputs_digest"].as_str().unwrap().to_string();
    let da = digest(&["fit", "--data", s(&a), "--model", "lindley"]);
    assert_eq!(da, digest(&["fit", "--model", "lindley", "--data", s(&a)]));
    assert_ne!(da, digest(&["fit", "--data", s(&b), "--model", "lindley"]));
    assert_ne!(da, digest(&["fit", "--data", s(&a), "--model", "lindley", "--level", "0.9"]));
}

fn assert_close(path: &str, got: &Value, want: &Value) {
    match (got, want) {
        (Value::Number(g), Value::Number(w)) => {
            let (g, w) = (g.as_f64().unwrap(), w.as_f64().unwrap());
            let tol = 1e-7 * w.abs().max(1e-6);
            assert!((g - w).abs() <= tol, "{path}: {g} vs golden {w}");
        }
        (Value::Array(g), Value::Array(w)) => {
            assert_eq!(g.len(), w.len(), "{path}: length");
            for (i, (g, w)) in g.iter().zip(w).enumerate() {
                assert_close(&format!("{path}[{i}]"), g, w);
            }
        }
        (Value::Object(g), Value::Object(w)) => {
            assert_eq!(g.keys().collect::<Vec<_>>(), w.keys().collect::<Vec<_>>(), "{path}: keys");
            for (k, w) in w {
                assert_close(&format!("{path}.{k}"), &g[k], w);
            }
        }
        _ => assert_eq!(got, want, "{path}"),
    }
}

#[test]
fn outputs_match_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/golden");
    let cases: [(&str, &[&str]); 6] = [
        ("fit", &["fit", "--data", "builtin:relief"]),
        ("compare", &["compare", "--data", "builtin:relief"]),
        ("lrtest", &["lrtest", "--data", "builtin:relief", "--null", "lg"]),
        ("sample", &["sample", "--alpha", "2", "--theta", "1", "--p", "0.5", "--n", "10", "--seed", "7"]),
        (
            "eval",
            &["eval", "--what", "pdf", "--alpha", "2", "--theta", "1", "--p", "0.5", "--from", "0", "--to", "2", "--step", "0.5"],
        ),
        ("moments", &["moments", "--alpha", "2", "--theta", "1", "--p", "0.25"]),
    ];
    for (name, args) in cases {
        let text = std::fs::read_to_string(golden.join(format!("{name}.json"))).unwrap();
        let want: Value = serde_json::from_str(&text).unwrap();
        assert_close(name, &json(args), &want);
    }
}
