use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ldpgamma(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldpgamma")).args(args).current_dir(dir).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix(v: &Value) -> (usize, usize, Vec<f64>) {
    let rows = v["row_labels"].as_array().unwrap().len();
    let cols = v["col_labels"].as_array().unwrap().len();
    let entries = v["entries"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    (rows, cols, entries)
}

#[test]
fn gamma2_artifact_carries_factorization_and_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldpgamma(&["gamma2", "--class", "thresholds:3", "--alpha", "0.1", "--out", "g.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("g.json"));
    let res = &v["result"];
    assert!(res["certificate"]["gap"].as_f64().unwrap() <= 1e-6);
    let (r_rows, d, r) = matrix(&res["factorization"]["r"]);
    let (d2, cols, a) = matrix(&res["factorization"]["a"]);
    assert_eq!((r_rows, d, cols), (4, d2, 3));
    // R·A stays within α of the threshold matrix.
    for c in 0..4 {
        for x in 0..3 {
            let p: f64 = (0..d).map(|k| r[c * d + k] * a[k * cols + x]).sum();
            let w = if x < c { 1.0 } else { -1.0 };
            assert!((p - w).abs() <= 0.1 + 1e-5, "entry ({c},{x}) = {p}");
        }
    }
    // The value is the product of the two factor norms.
    let row_norm = (0..4).map(|c| (0..d).map(|k| r[c * d + k].powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let col_norm = (0..cols).map(|x| (0..d).map(|k| a[k * cols + x].powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max);
    assert!((row_norm * col_norm - res["value"].as_f64().unwrap()).abs() < 1e-4);
}

#[test]
fn audit_reports_bounded_log_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = ldpgamma(&["audit", "--class", "thresholds:4", "--epsilon", "1", "--out", "a.json"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json(&dir.path().join("a.json"));
    assert!(v["result"]["enumerated"].as_bool().unwrap());
    assert!(v["result"]["max_log_ratio"].as_f64().unwrap() <= 1.0 + 1e-9);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&ldpgamma(&["sweep", "--trials", "0"], dir.path())), 2);
    assert_eq!(code(&ldpgamma(&["gamma2", "--class", "circles:3"], dir.path())), 2);
    assert_eq!(code(&ldpgamma(&["eta", "--alpha", "1.5"], dir.path())), 2);
    assert_eq!(code(&ldpgamma(&["simulate", "--randomizer", "noise-free"], dir.path())), 2);
    assert_eq!(code(&ldpgamma(&["frobnicate"], dir.path())), 2);
    assert_eq!(code(&ldpgamma(&["--help"], dir.path())), 0);
}

#[test]
fn refuter_exit_codes_follow_the_answer() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["simulate", "--class", "thresholds:4", "--mode", "refute", "--theta", "0.25", "--seed", "3"];
    let realizable = ldpgamma(&[&base[..], &["--target", "t1"]].concat(), dir.path());
    assert_eq!(code(&realizable), 0, "{}", String::from_utf8_lossy(&realizable.stderr));
    let noise = ldpgamma(&base, dir.path());
    assert_eq!(code(&noise), 1);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "class = \"points:3\"\nalpha = 0.25\n").unwrap();
    let out = ldpgamma(&["eta", "--config", "run.toml", "--alpha", "0.1", "--out", "e.json"], dir.path());
    assert_eq!(code(&out), 0);
    let v = json(&dir.path().join("e.json"));
    assert_eq!(v["config"]["class"], "points:3");
    assert_eq!(v["config"]["alpha"].as_f64(), Some(0.1));
    fs::write(dir.path().join("run.json"), r#"{"class": "points:3", "alpha": 0.25}"#).unwrap();
    let out = ldpgamma(&["eta", "--config", "run.json", "--out", "f.json"], dir.path());
    assert_eq!(code(&out), 0);
    assert_eq!(json(&dir.path().join("f.json"))["config"]["alpha"].as_f64(), Some(0.25));
}

#[test]
fn simulate_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = || {
        vec![
            "simulate".to_string(),
            "--class".into(),
            "thresholds:4".into(),
            "--target".into(),
            "t2".into(),
            "--n".into(),
            "3000".into(),
            "--seed".into(),
            "11".into(),
            "--transcript".into(),
            "t.csv".into(),
            "--answers".into(),
            "a.json".into(),
            "--out".into(),
            "s.json".into(),
        ]
    };
    for tag in ["1", "2"] {
        let a = args();
        let refs: Vec<&str> = a.iter().map(String::as_str).collect();
        assert_eq!(code(&ldpgamma(&refs, dir.path())), 0);
        for stem in ["s.json", "t.csv", "a.json"] {
            fs::rename(dir.path().join(stem), dir.path().join(format!("{tag}{stem}"))).unwrap();
        }
    }
    for (a, b) in [("1t.csv", "2t.csv"), ("1a.json", "2a.json"), ("1s.json", "2s.json")] {
        assert_eq!(fs::read(dir.path().join(a)).unwrap(), fs::read(dir.path().join(b)).unwrap(), "{a} vs {b}");
    }
    let transcript = fs::read_to_string(dir.path().join("1t.csv")).unwrap();
    assert_eq!(transcript.lines().next(), Some("record_index,message_symbol"));
    assert_eq!(transcript.lines().count(), 3001);
    let answers = json(&dir.path().join("1a.json"));
    assert_eq!(answers.as_object().unwrap().len(), 5);
}

#[test]
fn simulate_reads_a_dataset_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("point,label\n");
    for i in 0..4000 {
        let x = i % 3 + 1;
        csv.push_str(&format!("{x},{}\n", if x <= 1 { "+1" } else { "-1" }));
    }
    fs::write(dir.path().join("d.csv"), csv).unwrap();
    let out = ldpgamma(&["simulate", "--class", "thresholds:3", "--data", "d.csv", "--out", "s.json"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&dir.path().join("s.json"));
    assert_eq!(v["result"]["n"], 4000);
    assert_eq!(v["result"]["n_source"], "data");
}

fn sweep_rows(text: &str) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn sweep_is_reproducible_and_summaries_recompute() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep", "--class", "thresholds:4", "--target", "t2", "--label-noise", "0.1", "--trials", "6", "--ns", "300,1200",
        "--epsilons", "1,2", "--seed", "5", "--out",
    ];
    assert_eq!(code(&ldpgamma(&[&args[..], &["a.csv"]].concat(), dir.path())), 0);
    assert_eq!(code(&ldpgamma(&[&args[..], &["b.csv"]].concat(), dir.path())), 0);
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert!(dir.path().join("a.csv.meta.json").is_file());
    assert_eq!(a.lines().next(), Some("point_id,n,epsilon,alpha,trial,outcome,achieved_loss,runtime_ms"));

    let rows = sweep_rows(&a);
    let trials: Vec<_> = rows.iter().filter(|r| r[4] != "summary" && r[4] != "slope").collect();
    let summaries: Vec<_> = rows.iter().filter(|r| r[4] == "summary").collect();
    let slopes: Vec<_> = rows.iter().filter(|r| r[4] == "slope").collect();
    assert_eq!(trials.len(), 4 * 6);
    assert_eq!(summaries.len(), 4);
    assert!(slopes.len() <= 2);
    assert_eq!(rows.len(), trials.len() + summaries.len() + slopes.len());
    assert!(trials.iter().all(|r| r[7] == "0"));

    // Success rate and RMSE of the excess loss, from the trial rows alone.
    let optimal = 0.1;
    for s in summaries {
        let mine: Vec<_> = trials.iter().filter(|r| r[0] == s[0]).collect();
        let wins = mine.iter().filter(|r| r[5] == "success").count() as f64 / mine.len() as f64;
        assert!((s[5].parse::<f64>().unwrap() - wins).abs() < 1e-12);
        let sq: Vec<f64> = mine.iter().map(|r| (r[6].parse::<f64>().unwrap() - optimal).powi(2)).collect();
        let rmse = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
        assert!((s[6].parse::<f64>().unwrap() - rmse).abs() < 1e-9);
    }
}
