//! End-to-end tests of the command-line interface: exit codes, file
//! formats, and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ghdinc::decompose::{validate, Ghd};
use ghdinc::fixtures;
use ghdinc::hypergraph::Hypergraph;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghdinc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn asset(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets").join(rel)
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn decompose_writes_validating_ghd() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("g.json");
    let out = run(&[
        "decompose",
        "--hypergraph",
        asset("corpus/hp2.hg").to_str().unwrap(),
        "--width",
        "2",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let ghd = Ghd::from_json(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(validate(&fixtures::h_p2(), &ghd, 2), vec![]);
}

#[test]
fn decompose_usage_and_reject_and_timeout_codes() {
    // Width 0 is a usage error.
    let out = run(&[
        "decompose",
        "--hypergraph",
        asset("corpus/hp.hg").to_str().unwrap(),
        "--width",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // The triangle has no width-1 decomposition.
    let out = run(&[
        "decompose",
        "--hypergraph",
        asset("corpus/triangle.hg").to_str().unwrap(),
        "--width",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // A zero-second deadline times out immediately.
    let out = run(&[
        "decompose",
        "--hypergraph",
        asset("corpus/hp_prime.hg").to_str().unwrap(),
        "--width",
        "2",
        "--timeout",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));

    // Unreadable and unparsable files are usage errors.
    let out = run(&["decompose", "--hypergraph", "/nonexistent.hg", "--width", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn update_worked_example_and_explain() {
    let dir = tempfile::tempdir().unwrap();
    let ghd_path = dir.path().join("hp2_ghd.json");
    fs::write(&ghd_path, fixtures::HP2_GHD_JSON).unwrap();
    let mod_path = dir.path().join("del.json");
    fs::write(&mod_path, r#"{"class":"DelConstr","name":"w7"}"#).unwrap();
    let out_path = dir.path().join("updated.json");

    let out = run(&[
        "update",
        "--hypergraph",
        asset("corpus/hp2.hg").to_str().unwrap(),
        "--mod",
        mod_path.to_str().unwrap(),
        "--ghd",
        ghd_path.to_str().unwrap(),
        "--width",
        "2",
        "--explain",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let updated = Ghd::from_json(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(validate(&fixtures::h_p_prime(), &updated, 2), vec![]);
    let err = stderr_of(&out);
    assert!(err.contains("\"mutable\":[\"u1\",\"u2\"]"), "explain dump missing: {err}");
}

#[test]
fn update_delvar_notes_fast_path() {
    let dir = tempfile::tempdir().unwrap();
    let ghd_path = dir.path().join("hp_prime_ghd.json");
    fs::write(&ghd_path, fixtures::HP_PRIME_GHD_JSON).unwrap();
    let mod_path = dir.path().join("delvar.json");
    fs::write(&mod_path, r#"{"class":"DelVar","vertex":"h"}"#).unwrap();

    let out = run(&[
        "update",
        "--hypergraph",
        asset("corpus/hp_prime.hg").to_str().unwrap(),
        "--mod",
        mod_path.to_str().unwrap(),
        "--ghd",
        ghd_path.to_str().unwrap(),
        "--width",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr_of(&out).contains("fast-path"));
}

#[test]
fn update_width_increase_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let h_path = dir.path().join("path.hg");
    fs::write(&h_path, fixtures::PATH2_TEXT).unwrap();
    let base = ghdinc::decompose::decompose(&fixtures::path2(), 1).unwrap();
    let ghd_path = dir.path().join("path_ghd.json");
    fs::write(&ghd_path, base.outcome.found().unwrap().to_json()).unwrap();
    let mod_path = dir.path().join("close.json");
    fs::write(
        &mod_path,
        r#"{"class":"AddConstr","name":"e3","vertices":["a","c"]}"#,
    )
    .unwrap();

    let out = run(&[
        "update",
        "--hypergraph",
        h_path.to_str().unwrap(),
        "--mod",
        mod_path.to_str().unwrap(),
        "--ghd",
        ghd_path.to_str().unwrap(),
        "--width",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn update_rejects_invalid_input_ghd() {
    let dir = tempfile::tempdir().unwrap();
    let mut tampered = fixtures::hp2_ghd();
    tampered.root.bag.remove("a");
    let ghd_path = dir.path().join("bad.json");
    fs::write(&ghd_path, tampered.to_json()).unwrap();
    let mod_path = dir.path().join("del.json");
    fs::write(&mod_path, r#"{"class":"DelConstr","name":"w7"}"#).unwrap();

    let out = run(&[
        "update",
        "--hypergraph",
        asset("corpus/hp2.hg").to_str().unwrap(),
        "--mod",
        mod_path.to_str().unwrap(),
        "--ghd",
        ghd_path.to_str().unwrap(),
        "--width",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("does not validate"));
}

#[test]
fn mutate_is_deterministic_per_seed() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [&dir_a, &dir_b] {
        let out = run(&[
            "mutate",
            "--hypergraph",
            asset("corpus/hp_prime.hg").to_str().unwrap(),
            "--class",
            "AddConstr",
            "--seed",
            "7",
            "--count",
            "5",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let mut names: Vec<String> = fs::read_dir(dir_a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names.len(), 5);
    for name in &names {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "outputs must be byte-identical per seed");
        // Each generated edge has the ceil-average rank of the instance.
        let m = ghdinc::modify::Modification::from_json(
            &String::from_utf8(a).unwrap(),
        )
        .unwrap();
        match m {
            ghdinc::modify::Modification::AddConstr { vertices, .. } => {
                assert_eq!(vertices.len(), 3)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn mutate_inadmissible_class_fails() {
    let dir = tempfile::tempdir().unwrap();
    let h_path = dir.path().join("flat.hg");
    fs::write(&h_path, "e1(a,b),e2(c,d).").unwrap();
    let out = run(&[
        "mutate",
        "--hypergraph",
        h_path.to_str().unwrap(),
        "--class",
        "DelEq",
        "--seed",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("inadmissible"));
}

#[test]
fn validate_codes_and_witness() {
    let dir = tempfile::tempdir().unwrap();
    let ghd_path = dir.path().join("hp_prime_ghd.json");
    fs::write(&ghd_path, fixtures::HP_PRIME_GHD_JSON).unwrap();

    let out = run(&[
        "validate",
        "--hypergraph",
        asset("corpus/hp_prime.hg").to_str().unwrap(),
        "--ghd",
        ghd_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));

    // Tampered bag: condition (1) with witness w5.
    let mut tampered = fixtures::hp_prime_ghd();
    tampered.root.bag.remove("c");
    let bad_path = dir.path().join("tampered.json");
    fs::write(&bad_path, tampered.to_json()).unwrap();
    let out = run(&[
        "validate",
        "--hypergraph",
        asset("corpus/hp_prime.hg").to_str().unwrap(),
        "--ghd",
        bad_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("condition (1)"));
    assert!(stdout.contains("w5"));

    // Malformed JSON.
    let garbled = dir.path().join("garbled.json");
    fs::write(&garbled, "{not json").unwrap();
    let out = run(&[
        "validate",
        "--hypergraph",
        asset("corpus/hp_prime.hg").to_str().unwrap(),
        "--ghd",
        garbled.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_ghd_the_cli_writes_passes_cli_validation() {
    let dir = tempfile::tempdir().unwrap();
    for (name, width) in [("hp.hg", "1"), ("hp_prime.hg", "2"), ("hp2.hg", "2"), ("ring6.hg", "2")] {
        let out_path = dir.path().join(format!("{name}.json"));
        let out = run(&[
            "decompose",
            "--hypergraph",
            asset(&format!("corpus/{name}")).to_str().unwrap(),
            "--width",
            width,
            "--out",
            out_path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let out = run(&[
            "validate",
            "--hypergraph",
            asset(&format!("corpus/{name}")).to_str().unwrap(),
            "--ghd",
            out_path.to_str().unwrap(),
            "--width",
            width,
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
}

#[test]
fn bench_pretty_renders_table() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let out = run(&[
        "bench",
        "--corpus",
        asset("corpus").to_str().unwrap(),
        "--count",
        "1",
        "--seed",
        "5",
        "--timeout",
        "30",
        "--min-classic-ms",
        "0",
        "--pretty",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("Operation"));
    assert!(table.contains("Total"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["classes"].as_array().unwrap().len(), 6);
}

#[test]
fn bench_empty_corpus_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bench", "--corpus", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_class_filter_limits_rows() {
    let out = run(&[
        "bench",
        "--corpus",
        asset("corpus").to_str().unwrap(),
        "--count",
        "1",
        "--classes",
        "DelConstr,AddEq",
        "--min-classic-ms",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&out.stdout)).unwrap();
    let labels: Vec<&str> = json["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|row| row["class"].as_str().unwrap())
        .collect();
    assert_eq!(labels, vec!["DelConstr", "AddEq"]);

    let bad = run(&[
        "bench",
        "--corpus",
        asset("corpus").to_str().unwrap(),
        "--classes",
        "NotAClass",
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn hypergraph_parse_error_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let h_path = dir.path().join("bad.hg");
    fs::write(&h_path, "w1(a,\nb&)").unwrap();
    let out = run(&["decompose", "--hypergraph", h_path.to_str().unwrap(), "--width", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("line"));
}

#[test]
fn logging_env_var_controls_diagnostics() {
    let out = bin()
        .args([
            "decompose",
            "--hypergraph",
            asset("corpus/hp.hg").to_str().unwrap(),
            "--width",
            "1",
        ])
        .env("GHD_INCR_LOG", "info")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr_of(&out).contains("separators tried"));

    let quiet = bin()
        .args([
            "decompose",
            "--hypergraph",
            asset("corpus/hp.hg").to_str().unwrap(),
            "--width",
            "1",
        ])
        .output()
        .unwrap();
    assert!(!stderr_of(&quiet).contains("separators tried"));
}

#[test]
fn canonical_serializer_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = fixtures::h_p_prime().to_text();
    let path = dir.path().join("canon.hg");
    fs::write(&path, &text).unwrap();
    let parsed = Hypergraph::parse(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed.to_text(), text);
}
