use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn cnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnls"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, config: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn uniform(d: usize, dim: usize, lambda: &[f64], mu: &[f64], b: f64) -> Value {
    let bm: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| if i == j { 0.0 } else { b }).collect())
        .collect();
    json!({"d": d, "N": dim, "lambda": lambda, "mu": mu, "b": bm})
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_single_equation() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = json!({
        "parameters": uniform(1, 1, &[1.0], &[1.0], 0.0),
        "grid": {"R": 20.0, "n": 4000},
        "output": {"dir": out},
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["solve", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("level = 1.3333"), "{}", stdout(&o));

    let result: Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["result"]["converged"], json!(true));
    assert_eq!(result["result"]["support"], json!([0]));
    assert_eq!(result["result"]["grid"]["intervals"], json!(4000));
    assert_eq!(
        result["provenance"]["version"],
        json!(env!("CARGO_PKG_VERSION"))
    );
    let hash = result["provenance"]["config_sha256"]
        .as_str()
        .unwrap()
        .to_owned();
    assert_eq!(hash.len(), 64);

    let csv = fs::read_to_string(out.join("profiles.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        format!("# cnls {} config_sha256={hash}", env!("CARGO_PKG_VERSION"))
    );
    assert_eq!(lines.next().unwrap(), "r,u1");
    assert_eq!(lines.count(), 4001);
    assert!(!csv.contains('\r'));
}

#[test]
fn solve_rejects_negative_mu() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"parameters": {"d": 2, "N": 1, "lambda": [1.0, 1.0], "mu": [1.0, -1.0], "b": [[0.0, 1.0], [1.0, 0.0]]}});
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["solve", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("positivity violated"), "{}", stderr(&o));
}

#[test]
fn solve_flags_non_convergence() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = json!({
        "parameters": uniform(2, 1, &[1.0, 2.0], &[1.0, 0.5], 3.0),
        "grid": {"n": 400},
        "solver": {"max_iterations": 1},
        "output": {"dir": out},
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["solve", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let result: Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["result"]["converged"], json!(false));
}

#[test]
fn bad_configs_exit_one() {
    let tmp = TempDir::new().unwrap();
    let garbage = tmp.path().join("g.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(
        cnls(&["solve", garbage.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let coarse = write_config(
        tmp.path(),
        "coarse.json",
        &json!({"parameters": uniform(1, 1, &[1.0], &[1.0], 0.0), "grid": {"n": 50}}),
    );
    let o = cnls(&["solve", &coarse]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 100"));
    assert_eq!(cnls(&["solve"]).status.code(), Some(1));
    assert_eq!(cnls(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn classify_writes_verdict() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = json!({
        "parameters": uniform(2, 1, &[1.0, 1.0], &[1.0, 1.0], 3.0),
        "grid": {"R": 16.0, "n": 1000},
        "output": {"dir": out},
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["classify", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict = fully_nontrivial"));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["verdict"], json!("fully_nontrivial"));
    assert_eq!(v["verdict"]["predicates"]["theorem13"], json!("n/a"));
    assert!(v["provenance"]["config_sha256"].is_string());
}

#[test]
fn sweep_is_deterministic_and_row_major() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "parameters": uniform(3, 1, &[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0], 1.0),
        "grid": {"R": 14.0, "n": 400},
        "sweep": {"axes": [
            {"path": "b", "values": [0.3, 2.0]},
            {"path": "lambda[2]", "values": [1.0, 1.5, 2.0]}
        ]},
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = cnls(&[
        "sweep",
        &path,
        "--out",
        a.to_str().unwrap(),
        "--workers",
        "1",
        "--seed",
        "4",
    ]);
    let ob = cnls(&[
        "sweep",
        &path,
        "--out",
        b.to_str().unwrap(),
        "--workers",
        "3",
        "--seed",
        "4",
    ]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    let (ca, cb) = (
        fs::read(a.join("sweep.csv")).unwrap(),
        fs::read(b.join("sweep.csv")).unwrap(),
    );
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca.clone()).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[1].starts_with("3e-1,1.5e0,"), "{}", rows[1]);
    assert!(rows[3].starts_with("2e0,1e0,"), "{}", rows[3]);

    let again = tmp.path().join("again");
    cnls(&[
        "sweep",
        &path,
        "--out",
        again.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_eq!(fs::read(again.join("sweep.csv")).unwrap(), ca);
}

#[test]
fn sweep_without_axes_is_classify() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let cfg = json!({
        "parameters": uniform(2, 1, &[1.0, 1.0], &[1.0, 1.0], 0.5),
        "grid": {"R": 16.0, "n": 600},
        "output": {"dir": out},
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    assert_eq!(cnls(&["sweep", &path]).status.code(), Some(0));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("full_level,"));
    assert!(lines[2].contains(",semitrivial,"));
}

#[test]
fn sweep_cap_and_bad_path() {
    let tmp = TempDir::new().unwrap();
    let base = uniform(2, 1, &[1.0, 1.0], &[1.0, 1.0], 1.0);
    let capped = write_config(
        tmp.path(),
        "cap.json",
        &json!({"parameters": base, "sweep": {"axes": [{"path": "b", "values": [1.0, 2.0, 3.0]}], "cap": 2}}),
    );
    let o = cnls(&["sweep", &capped]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cap"));
    let bad = write_config(
        tmp.path(),
        "bad.json",
        &json!({"parameters": base, "sweep": {"axes": [{"path": "gamma", "values": [1.0]}]}}),
    );
    let o = cnls(&["sweep", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"));
}

#[test]
fn reduce_prints_reduced_system() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({
        "parameters": uniform(3, 1, &[1.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 3.0),
        "group": [0, 1],
    });
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["reduce", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["reduced"]["lambda"], json!([1.0, 2.0]));
    assert_eq!(v["reduced"]["mu"], json!([2.0, 1.0]));
    assert_eq!(v["sphere"]["regime"], json!("interior"));
    assert_eq!(v["sphere"]["f_max"], json!(2.0));

    let mut skew = cfg.clone();
    skew["parameters"]["b"][0][2] = json!(2.0);
    skew["parameters"]["b"][2][0] = json!(2.0);
    let o = cnls(&["reduce", &write_config(tmp.path(), "skew.json", &skew)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("constant couplings"));

    let mut nogroup = cfg.clone();
    nogroup.as_object_mut().unwrap().remove("group");
    let o = cnls(&["reduce", &write_config(tmp.path(), "ng.json", &nogroup)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("group"));
}

#[test]
fn thresholds_table() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"parameters": uniform(3, 3, &[1.0, 1.0, 2.0], &[1.0, 1.0, 1.0], 1.0)});
    let path = write_config(tmp.path(), "c.json", &cfg);
    let o = cnls(&["thresholds", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let line = |key: &str| {
        text.lines()
            .find(|l| l.starts_with(key))
            .unwrap()
            .to_owned()
    };
    assert!(line("alpha_threshold").ends_with("2.25"), "{text}");
    assert!(
        line("tail admissible").contains("true (ratio 2 vs alpha 2.25)"),
        "{text}"
    );
    assert!(line("theorem13_condition").contains("false"), "{text}");
    assert!(line("small_b_bound").contains("0.7071"), "{text}");
    assert!(line("beta_spread_condition").contains("n/a"), "{text}");
}

#[test]
fn seed_override_changes_provenance() {
    let tmp = TempDir::new().unwrap();
    let cfg = json!({"parameters": uniform(1, 1, &[1.0], &[1.0], 0.0), "grid": {"n": 200}});
    let path = write_config(tmp.path(), "c.json", &cfg);
    let hash = |seed: &str, dir: &str| {
        let out = tmp.path().join(dir);
        let o = cnls(&[
            "solve",
            &path,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        let v: Value =
            serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
        v["provenance"]["config_sha256"]
            .as_str()
            .unwrap()
            .to_owned()
    };
    assert_ne!(hash("1", "x"), hash("2", "x"));
    assert_eq!(hash("1", "x"), hash("1", "x"));
}

#[test]
fn selftest_detects_fault() {
    let o = cnls(&["selftest", "--inject-weight-fault"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("[FAIL] criterion  1"));
}
