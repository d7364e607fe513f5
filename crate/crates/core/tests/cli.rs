//! End-to-end runs of the `delsarte` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn run(cmd: &str, config: &Value, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.json");
    fs::write(&cfg, serde_json::to_vec_pretty(config).unwrap()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_delsarte"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("out/report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn zero_phi_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("factorize", &json!({ "factorize": { "phi": { "kind": "zero", "n": 8 } } }), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let f: Value = serde_json::from_slice(&fs::read(dir.path().join("out/factorization.json")).unwrap()).unwrap();
    assert_eq!(f["residual"], json!(0.0));
    assert_eq!(f["first_singular_minor"], Value::Null);
}

#[test]
fn one_soliton_dressing_reaches_minus_two_at_origin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "grid": { "lower": -20, "upper": 20, "n": 401 },
        "darboux": { "kappas": [1.0], "seed_source": "analytic", "n_low": 6 }
    });
    let o = run("darboux", &cfg, dir.path(), &["--plots"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r = report(dir.path());
    let q0 = &r["diagnostics"]["q_tilde_at_origin"];
    assert!(q0["x"].as_f64().unwrap().abs() < 1e-12, "{q0}");
    assert!((q0["re"].as_f64().unwrap() + 2.0).abs() <= 1e-8, "{q0}");
    let arts: Vec<&str> = r["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for a in ["potential.csv", "spectrum.json", "potential.svg", "report.json"] {
        assert!(arts.contains(&a), "{a} missing from {arts:?}");
        assert!(dir.path().join("out").join(a).exists());
    }
    let csv = fs::read_to_string(dir.path().join("out/potential.csv")).unwrap();
    assert!(csv.starts_with("x,q_re,q_im\n"));
}

#[test]
fn zero_tolerance_fails_named_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "seed": 3, "verify": { "criteria": [4] }, "tolerances": { "c4.reconstruction": 0.0 } });
    let o = run("verify", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL c4.reconstruction"), "{}", stdout(&o));
    assert!(String::from_utf8_lossy(&o.stderr).contains("c4.reconstruction"));
}

#[test]
fn schema_violations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        json!({ "grid": { "lower": 0, "upper": 1, "n": 3 } }),
        json!({ "unknown_field": 1 }),
        json!({ "tolerances": { "c1.order": -1.0 } }),
        json!({ "darboux": { "kappas": [1.0], "seeds": [{ "source": "sampled", "energy": -1.0 }] } }),
        json!({ "command": "derham" }),
    ] {
        let o = run("darboux", &cfg, dir.path(), &[]);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let cfg = dir.path().join("broken.json");
    fs::write(&cfg, "{ not json").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_delsarte")).args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn singular_minor_exits_three_with_index() {
    let dir = tempfile::tempdir().unwrap();
    // 1 + Phi has a vanishing leading 2x2 minor
    fs::write(
        dir.path().join("phi.csv"),
        "c0_re,c0_im,c1_re,c1_im,c2_re,c2_im\n0,0,1,0,0,0\n1,0,0,0,0,0\n0,0,0,0,0,0\n",
    )
    .unwrap();
    let o = run("factorize", &json!({ "factorize": { "phi": { "kind": "file", "path": "phi.csv" } } }), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let f: Value = serde_json::from_slice(&fs::read(dir.path().join("out/factorization.json")).unwrap()).unwrap();
    assert_eq!(f["first_singular_minor"], json!(2));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cfg = json!({ "seed": 21, "derham": { "n": [6, 7], "lengths": [1.0, 1.5], "hodge_samples": 2 } });
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let oa = run("derham", &cfg, a.path(), &[]);
    let ob = run("derham", &cfg, b.path(), &[]);
    assert_eq!(oa.status.code(), Some(0), "{}", stdout(&oa));
    let hash = |o: &Output| stdout(o).lines().find(|l| l.starts_with("report-sha256")).map(str::to_owned);
    assert!(hash(&oa).is_some());
    assert_eq!(hash(&oa), hash(&ob));
    assert_eq!(fs::read(a.path().join("out/report.json")).unwrap(), fs::read(b.path().join("out/report.json")).unwrap());
    assert!(a.path().join("out/timings.json").exists());
    assert_eq!(report(a.path())["seed"], json!(21));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "seed": 1, "factorize": { "phi": { "kind": "random", "n": 6, "count": 3 } } });
    let o = run("factorize", &cfg, dir.path(), &["--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(dir.path())["seed"], json!(99));
}

#[test]
fn transmute_eigen_family_is_local_for_both_signs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "grid": { "lower": -8, "upper": 8, "n": 80 },
        "operator": { "potential": { "kind": "sech2", "amplitude": -2.0 } },
        "transmute": { "family": { "kind": "eigen", "count": 2 }, "signs": ["plus", "minus"] }
    });
    let o = run("transmute", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["psi.csv", "phi.csv", "omega0.csv", "omega0_adjoint.csv", "transmutation.json", "transmute_diagnostics.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let d: Value = serde_json::from_slice(&fs::read(dir.path().join("out/transmute_diagnostics.json")).unwrap()).unwrap();
    for k in ["intertwining", "locality", "independence", "adjoint_compat", "condition_numbers"] {
        assert!(d.get(k).is_some(), "{k}");
    }
}

#[test]
fn derham_writes_harmonic_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({ "derham": { "n": [8, 8], "lengths": [1.0, 2.0], "hodge_samples": 1 } });
    let o = run("derham", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for (k, b) in [1, 2, 1].into_iter().enumerate() {
        let h: Value = serde_json::from_slice(&fs::read(dir.path().join(format!("out/harmonic_{k}.json"))).unwrap()).unwrap();
        assert_eq!(h["degree"], json!(k));
        assert_eq!(h["dim"], json!(b));
        assert_eq!(h["betti_expected"], json!(b));
    }
    assert!(dir.path().join("out/periods.csv").exists());
}
