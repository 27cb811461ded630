use std::path::Path;
use std::process::{Command, Output};

use rpsubspace::data::{load_matrix, DataFormat};

fn rpsub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpsub")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_data_writes_a_readable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.csv");
    let out = rpsub(&[
        "--seed", "3", "gen-data", "--n", "20", "--classes", "2", "--d", "2", "--per-class", "5", "--out",
        path(&file),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let data = load_matrix(&file, DataFormat::Csv).unwrap();
    assert_eq!(data.len(), 10);
    assert_eq!(data.ambient_dim(), 20);
}

#[test]
fn issued_template_matches_its_own_sample_best() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let template = dir.path().join("t.json");
    let gen = ["--seed", "3", "gen-data", "--n", "20", "--classes", "2", "--d", "2", "--per-class", "5"];
    assert!(rpsub(&[&gen[..], &["--out", path(&data)]].concat()).status.success());
    let issue = [
        "--seed", "9", "template", "issue", "--input", path(&data), "--row", "1", "--subject", "s1", "--m", "8",
        "--out", path(&template),
    ];
    assert!(rpsub(&issue).status.success());

    let out = rpsub(&["template", "match", "--template", path(&template), "--input", path(&data)]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let scores: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|line| line.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(scores.len(), 10);
    let best = (0..scores.len()).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
    assert_eq!(best, 1);
    assert!((scores[1] - 1.0).abs() < 1e-9);
}

#[test]
fn exit_codes_follow_error_kind() {
    let bad_eps = rpsub(&["bounds", "--eps", "0.7"]);
    assert_eq!(bad_eps.status.code(), Some(2));

    let missing = rpsub(&["classify", "--train", "/nonexistent/a.csv", "--test", "/nonexistent/b.csv"]);
    assert_eq!(missing.status.code(), Some(4));

    let starved = rpsub(&[
        "bench", "--synthetic", "n=30,k=2,d=2,count=6", "--dims", "4", "--max-iter", "1", "--timing-repeats", "0",
    ]);
    assert_eq!(starved.status.code(), Some(3));
}

#[test]
fn json_report_parses() {
    let out = rpsub(&["--format", "json", "bounds", "--eps", "0.2", "--m", "100"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}
