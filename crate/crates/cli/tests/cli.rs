//! End-to-end runs of the binary against the shipped fixtures.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amalgam")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn group_validate_ok_and_broken() {
    let text = run_ok(&["group", "validate", fixture("groups/s3.json").to_str().unwrap()]);
    assert!(text.contains("ok: true"));
    assert!(text.contains("order: 6"));
    assert!(text.contains("abelian: false"));

    let out = run(&["group", "validate", fixture("groups/broken.json").to_str().unwrap()]);
    assert!(!out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("ok: false"));
    assert!(text.contains("identity"));
}

#[test]
fn triangle_analyze_fixtures() {
    let text = run_ok(&[
        "triangle",
        "analyze",
        fixture("triangles/klein_triangle.json").to_str().unwrap(),
    ]);
    assert!(text.contains("verdict: REALIZABLE"));
    assert!(text.contains("reason: enumeration"));
    assert!(text.contains("order: 8"));

    let text = run_ok(&[
        "triangle",
        "analyze",
        fixture("triangles/transposition_triangle.json").to_str().unwrap(),
        "--max-cosets",
        "2000",
    ]);
    assert!(text.contains("verdict: REALIZABLE"));
    assert!(text.contains("angle sum"));
    assert!(text.contains("theta: pi/3 (exact)"));

    // Starved bounds report UNKNOWN with exit code 0: the verdict is data.
    let text = run_ok(&[
        "triangle",
        "analyze",
        fixture("triangles/transposition_triangle.json").to_str().unwrap(),
        "--max-cosets",
        "1",
        "--angle-bound",
        "2",
    ]);
    assert!(text.contains("verdict: UNKNOWN"));
}

#[test]
fn triangle_reports_are_deterministic() {
    let path = fixture("triangles/klein_triangle.json");
    let args = ["triangle", "analyze", path.to_str().unwrap()];
    let a = run_ok(&args);
    let b = run_ok(&args);
    assert_eq!(a, b, "byte-identical reports");
}

#[test]
fn angle_command() {
    let text = run_ok(&[
        "angle",
        fixture("angle/s3_transpositions.json").to_str().unwrap(),
        "--bound",
        "12",
    ]);
    assert!(text.contains("theta: pi/3 (exact)"));
    assert!(text.contains("status: EXACT"));
}

#[test]
fn algebra_amalgam_fixtures() {
    let text = run_ok(&[
        "algebra",
        "amalgam",
        fixture("algebra/biunitary_triangle.json").to_str().unwrap(),
    ]);
    assert!(text.contains("dimension: 64"));
    assert!(text.contains("confluent: true"));
    assert!(text.contains("center_dimension: 4"));
    assert!(text.contains("simple: false"));
    assert!(text.contains("- 16"));

    let text = run_ok(&[
        "algebra",
        "amalgam",
        fixture("algebra/tensor_triangle.json").to_str().unwrap(),
    ]);
    assert!(text.contains("dimension: 64"));
    assert!(text.contains("simple: true"));
    assert!(text.contains("matrix_size: 8"));

    let text = run_ok(&[
        "algebra",
        "amalgam",
        fixture("algebra/span_deficient.json").to_str().unwrap(),
    ]);
    assert!(text.contains("verdict: edge images at vertex 0 do not span it"));
}

#[test]
fn square_check_fixture() {
    let text = run_ok(&[
        "algebra",
        "square-check",
        fixture("algebra/commuting_squares.json").to_str().unwrap(),
    ]);
    assert!(text.contains("u: true"));
    assert!(text.contains("v: true"));
    let eu_e0 = text.split("(Eu,E0):").nth(1).unwrap();
    assert!(eu_e0.trim_start().starts_with("commutes: true"));
    let ev_e0 = text.split("(Ev,E0):").nth(1).unwrap();
    assert!(ev_e0.trim_start().starts_with("commutes: true"));
    let eu_ev = text.split("(Eu,Ev):").nth(1).unwrap();
    assert!(eu_ev.trim_start().starts_with("commutes: false"));
}

#[test]
fn fock_moments_fixture() {
    let base = fixture("fock/involution_pair.json");
    let text = run_ok(&["fock", "moments", base.to_str().unwrap()]);
    assert!(text.contains("all_vanish: true"));
    assert!(text.contains("module_dimension: 9"));

    // Identity-indicator on group words.
    let text = run_ok(&[
        "fock", "moments", base.to_str().unwrap(), "--word", "0:g,0:g",
    ]);
    assert!(text.contains("moment:\n  - 1"));
    let text = run_ok(&[
        "fock", "moments", base.to_str().unwrap(), "--word", "0:g,1:g,0:g,1:g",
    ]);
    assert!(text.contains("moment:\n  - 0"));
}

#[test]
fn json_output_matches_text_content() {
    let text = run_ok(&[
        "triangle",
        "analyze",
        fixture("triangles/degenerate.json").to_str().unwrap(),
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdict"], "REALIZABLE");
    assert_eq!(v["fillable"], true);
    assert_eq!(v["minimal"], false);
}
