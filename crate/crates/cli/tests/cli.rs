use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn pns(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pns"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn pns_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pns"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn plan_full_bounds() {
    let v = json_out(&pns(&["plan", "--epsilon", "0.05"]));
    assert_eq!(v["m"], 6147);
    assert_eq!(v["n"], 6147);
    assert_eq!(v["kind"], "full-bounds");
    assert!(v["achieved_margin"].as_f64().unwrap() <= 0.05);
}

#[test]
fn plan_k_term_and_fixed_m() {
    let v = json_out(&pns(&["plan", "--epsilon", "0.05", "--k-term", "1"]));
    assert_eq!(v["m"], 385);
    let v = json_out(&pns(&["plan", "--epsilon", "0.05", "--k-term", "2"]));
    assert_eq!(v["m"], 1537);
    let v = json_out(&pns(&[
        "plan",
        "--epsilon",
        "0.05",
        "--fixed-m",
        "6147",
        "--z-rounded",
    ]));
    assert_eq!(v["n"], 6147);
}

#[test]
fn plan_rejects_bad_epsilon() {
    let out = pns(&["plan", "--epsilon", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epsilon"));
}

#[test]
fn plan_rejects_exhausted_budget() {
    let out = pns(&["plan", "--epsilon", "0.05", "--fixed-m", "1000"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_from_probabilities() {
    let input = r#"{
        "exp": {"p_y_given_do_x": 1.0, "p_y_given_do_xprime": 0.0},
        "obs": {"p_xy": 0.5, "p_xy_prime": 0.0, "p_xprime_y": 0.0, "p_xprime_yprime": 0.5},
        "m": 1000000000, "n": 1000000000
    }"#;
    let v = json_out(&pns_stdin(&["bounds"], input));
    assert_eq!(v["bounds"]["lower"], 1.0);
    assert_eq!(v["bounds"]["upper"], 1.0);
    let worst = v["margins"]["worst_case_margin"].as_f64().unwrap();
    assert!(worst < 1e-3);
    let per_arm = v["margins"]["per_arm_margins_upper"].as_array().unwrap();
    // Degenerate experimental estimates carry no Wald margin.
    assert_eq!(per_arm[0], 0.0);
    assert_eq!(per_arm[1], 0.0);
    assert!(per_arm.iter().all(|x| x.as_f64().unwrap() < 1e-4));
}

#[test]
fn bounds_from_counts() {
    let input = r#"{
        "experimental_counts": {"n11": 30, "n10": 20, "n01": 10, "n00": 40},
        "observational_counts": {"n11": 20, "n10": 10, "n01": 30, "n00": 40}
    }"#;
    let v = json_out(&pns_stdin(&["bounds"], input));
    assert_eq!((v["m"].as_u64(), v["n"].as_u64()), (Some(100), Some(100)));
    let lower = v["bounds"]["lower"].as_f64().unwrap();
    let upper = v["bounds"]["upper"].as_f64().unwrap();
    assert!((lower - 0.4).abs() < 1e-12, "{lower}");
    assert!((upper - 0.6).abs() < 1e-12, "{upper}");
}

#[test]
fn bounds_empty_arm_exits_3() {
    let input = r#"{
        "experimental_counts": {"n11": 0, "n10": 0, "n01": 10, "n00": 40},
        "observational_counts": {"n11": 20, "n10": 10, "n01": 30, "n00": 40}
    }"#;
    let out = pns_stdin(&["bounds"], input);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("treated"), "{}", stderr(&out));
}

#[test]
fn bounds_needs_sizes() {
    let input = r#"{
        "exp": {"p_y_given_do_x": 0.5, "p_y_given_do_xprime": 0.5},
        "obs": {"p_xy": 0.25, "p_xy_prime": 0.25, "p_xprime_y": 0.25, "p_xprime_yprime": 0.25}
    }"#;
    let out = pns_stdin(&["bounds"], input);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_rejects_unnormalized_cells() {
    let input = r#"{
        "exp": {"p_y_given_do_x": 0.5, "p_y_given_do_xprime": 0.5},
        "obs": {"p_xy": 0.5, "p_xy_prime": 0.5, "p_xprime_y": 0.5, "p_xprime_yprime": 0.5},
        "m": 10, "n": 10
    }"#;
    let out = pns_stdin(&["bounds"], input);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_feeds_bounds() {
    let oracle = pns(&["oracle", "--preset", "model1"]);
    let truth = json_out(&oracle);
    let pns_value = truth["true_pns"].as_f64().unwrap();
    let lower = truth["bounds"]["lower"].as_f64().unwrap();
    let upper = truth["bounds"]["upper"].as_f64().unwrap();
    assert!(lower <= pns_value && pns_value <= upper);

    let text = String::from_utf8(oracle.stdout).unwrap();
    let v = json_out(&pns_stdin(&["bounds", "--m", "6147", "--n", "6147"], &text));
    assert_eq!(v["bounds"]["lower"].as_f64().unwrap(), lower);
    assert_eq!(v["bounds"]["upper"].as_f64().unwrap(), upper);
    let margins = &v["margins"];
    assert!(margins["worst_case_margin"].as_f64().unwrap() <= 0.05);
    for key in ["per_arm_margins_lower", "per_arm_margins_upper"] {
        for x in margins[key].as_array().unwrap() {
            assert!(x.as_f64().unwrap() <= 0.05);
        }
    }
}

#[test]
fn gen_model_then_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let path_str = path.to_str().unwrap();
    assert!(pns(&["gen-model", "--seed", "11", "--out", path_str])
        .status
        .success());
    let again = pns(&["gen-model", "--seed", "11"]);
    assert_eq!(fs::read(&path).unwrap(), again.stdout);

    let v = json_out(&pns(&["oracle", "--model", path_str]));
    assert_eq!(v["model"], "random-11");
    let p = v["true_pns"].as_f64().unwrap();
    let lower = v["bounds"]["lower"].as_f64().unwrap();
    let upper = v["bounds"]["upper"].as_f64().unwrap();
    assert!(lower - 1e-9 <= p && p <= upper + 1e-9);
}

#[test]
fn malformed_model_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"name": "bad", "a": [0.1], "b": [], "c": 0.0}"#).unwrap();
    let out = pns(&["oracle", "--model", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.json"));
}

#[test]
fn model_source_is_required() {
    assert_eq!(pns(&["oracle"]).status.code(), Some(2));
}

#[test]
fn sample_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("exp.csv");
    let out = pns(&[
        "sample",
        "--preset",
        "model2",
        "--kind",
        "experimental",
        "--size",
        "500",
        "--seed",
        "4",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 500);
    assert!(rows
        .iter()
        .all(|r| ["0,0", "0,1", "1,0", "1,1"].contains(r)));

    let meta: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("exp.json")).unwrap()).unwrap();
    assert_eq!(meta["kind"], "experimental");
    assert_eq!(meta["seed"], 4);
    assert_eq!(meta["size"], 500);
}

fn simulate(dir: &Path, threads: &str) {
    let out = pns(&[
        "--threads",
        threads,
        "simulate",
        "--preset",
        "model1",
        "--grid",
        "40,160",
        "--reps",
        "30",
        "--seed",
        "9",
        "--out-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn simulate_is_deterministic_and_self_consistent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), "1");
    simulate(b.path(), "2");
    for name in ["replications.csv", "sweep.csv"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name} differs"
        );
    }

    let reps = fs::read_to_string(a.path().join("replications.csv")).unwrap();
    let mut lines = reps.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (m_col, err_col) = (col("m"), col("err_lower"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 60);

    let sweep = fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    let mut lines = sweep.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let scol = |name: &str| header.iter().position(|h| *h == name).unwrap();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let size = f[scol("size")];
        let errs: Vec<f64> = rows
            .iter()
            .filter(|r| r[m_col] == size && !r[err_col].is_empty())
            .map(|r| r[err_col].parse().unwrap())
            .collect();
        let failed: usize = f[scol("failed_reps")].parse().unwrap();
        assert_eq!(errs.len() + failed, 30);
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        let reported: f64 = f[scol("mean_err_lower")].parse().unwrap();
        assert!((mean - reported).abs() < 1e-12, "{mean} vs {reported}");
    }
}
