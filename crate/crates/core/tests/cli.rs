mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::REFERENCE_TSV;
use polypscope::ingest::write_image;
use polypscope::RasterImage;

fn polypscope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polypscope")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn evaluate_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.tsv");
    std::fs::write(&m, REFERENCE_TSV).unwrap();
    let json = dir.path().join("r.json");
    let out = polypscope(&["evaluate", "--confusion", s(&m), "--out", s(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let total = stdout.lines().find(|l| l.starts_with("total")).unwrap();
    assert!(total.contains("93.0"), "{total}");
    let first = std::fs::read(&json).unwrap();
    polypscope(&["evaluate", "--confusion", s(&m), "--out", s(&json)]);
    assert_eq!(std::fs::read(&json).unwrap(), first);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(polypscope(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(polypscope(&["evaluate", "--cohort-size", "many"]).status.code(), Some(2));
    let out = polypscope(&["evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn help_for_every_subcommand() {
    assert_eq!(polypscope(&["--help"]).status.code(), Some(0));
    for sub in ["split", "stats", "tile", "train", "infer", "evaluate"] {
        let out = polypscope(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("[default:"), "{sub}");
    }
}

fn recorded_fixture(dir: &Path, rows: &[&str]) -> (String, String) {
    write_image(&RasterImage::zeros(100, 100).unwrap(), dir.join("s1.ppm")).unwrap();
    let manifest = dir.join("slides.tsv");
    std::fs::write(&manifest, "id\tpath\tlabel\tsplit\ns1\ts1.ppm\tTSA\ttest\n").unwrap();
    let mut text = String::from("patch_id\tp_hp\tp_ssp\tp_tsa\tp_ta\tp_tvv\tp_normal\n");
    for id in rows {
        text.push_str(&format!("s1/{id}\t0.05\t0.05\t0.8\t0.04\t0.03\t0.03\n"));
    }
    let preds = dir.join("preds.tsv");
    std::fs::write(&preds, text).unwrap();
    (s(&manifest).to_string(), s(&preds).to_string())
}

#[test]
fn missing_prediction_names_the_patch() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, preds) = recorded_fixture(dir.path(), &["0_0", "40_0", "0_40"]);
    let out_dir = dir.path().join("out");
    let out = polypscope(&[
        "infer", "--manifest", &manifest, "--predictions", &preds, "--patch-width", "60", "--out", s(&out_dir),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("s1/40_40"), "{stderr}");
    assert_eq!(stderr.trim().lines().count(), 1);
}

#[test]
fn recorded_inference_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (manifest, preds) = recorded_fixture(dir.path(), &["0_0", "40_0", "0_40", "40_40"]);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = polypscope(&[
            "infer", "--manifest", &manifest, "--predictions", &preds, "--patch-width", "60", "--min-patches", "4",
            "--out", s(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (
            std::fs::read_to_string(out_dir.join("summary.tsv")).unwrap(),
            std::fs::read(out_dir.join("slides/s1.json")).unwrap(),
        )
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert!(a.0.lines().nth(1).unwrap().starts_with("s1\tTSA\tTSA\t4"), "{}", a.0);
}
