use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn qlam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qlam")).args(args).output().expect("qlam runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qlam(&[]).status.code(), Some(2));
    assert_eq!(qlam(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qlam(&["dist", "--metric", "nope", "a", "b"]).status.code(), Some(2));
}

#[test]
fn xi_violation_is_a_domain_error() {
    let o = qlam(&["check-proof", &data("bad_xi.json"), "--theory", "U_lambda"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ξ requires x ∈ X"), "{}", stderr(&o));
    let o = qlam(&["check-proof", &data("good_xi.json"), "--theory", "U_lambda"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn dist_on_the_projection_pair() {
    let o = qlam(&[
        "dist",
        "--metric",
        "e",
        "--expr",
        "\\x1:o->o. \\x2:o->o. x1 (x2 (t : o))",
        "\\x1:o->o. \\x2:o->o. x1 (x2 (s : o))",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), r#"{"value":"1/4"}"#);
}

#[test]
fn term_files_are_read() {
    let dir = std::env::temp_dir().join(format!("qlam-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let t = dir.join("t.term");
    std::fs::write(&t, "(\\x:o. x) (y : o)\n").unwrap();
    let o = qlam(&["normalize", t.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(r#""normal_form":"(y : o)""#), "{}", stdout(&o));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn human_output() {
    let o = qlam(&["-H", "typecheck", "--expr", "\\x:o. x"]);
    assert_eq!(stdout(&o).trim(), "o->o");
}

#[test]
fn fuel_from_environment() {
    let omega = "(\\x. x x) (\\x. x x)";
    let o = Command::new(env!("CARGO_BIN_EXE_qlam"))
        .args(["normalize", "--sig", "untyped-lambda", "--expr", omega])
        .env("QLAM_FUEL", "25")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("fuel"), "{}", stderr(&o));
}

#[test]
fn repro_matches_golden_and_is_deterministic() {
    for name in ["remark25", "remark27", "example15", "remark-theta-xi", "fth-church", "nat-not-exponentiable"] {
        let a = qlam(&["repro", name]);
        let b = qlam(&["repro", name]);
        assert_eq!(a.status.code(), Some(0), "{name}: {}", stdout(&a));
        assert_eq!(a.stdout, b.stdout, "{name} not byte-identical");
        assert!(stdout(&a).contains(r#""golden":"match""#));
    }
    let o = qlam(&["-H", "repro", "example15"]);
    let out = stdout(&o);
    assert!(out.starts_with("PASS example15"), "{out}");
    assert!(out.contains("arrow distance: computed 5/4"));
    assert_eq!(qlam(&["repro", "remark99"]).status.code(), Some(1));
}

#[test]
fn metric_verbs() {
    let o = qlam(&["hom-dist", &data("shift.json"), "--kind", "phi"]);
    assert_eq!(stdout(&o).trim(), r#"{"kind":"phi","value":"1"}"#);
    let o = qlam(&["exp-check", &data("two_points.json")]);
    assert!(stdout(&o).contains(r#""alpha":"1/2""#));
    let o = qlam(&["exp-check", &data("two_points.json"), "--mode", "image-restricted"]);
    assert_eq!(stdout(&o).trim(), r#"{"result":"ok"}"#);
    let o = qlam(&["classify", &data("not_metric.json")]);
    assert!(stdout(&o).contains(r#""metric":false"#));
    assert_eq!(qlam(&["exp-check", &data("not_metric.json")]).status.code(), Some(1));
}

#[test]
fn model_verbs() {
    let o = qlam(&["model-check", "--algebra", &data("fts2.json"), &data("id_ext.json")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains(r#""satisfied":true"#));
    let o = qlam(&["build-grid", &data("grid.json")]);
    assert!(stdout(&o).contains(r#""r1_4":1"#));
    let o = qlam(&["build-fts", "--discrete", "2", "--sort", "o->o"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn harness_reports_no_violations() {
    let o = qlam(&["harness", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().count() >= 30);
    assert!(!out.contains(r#""status":"violated""#));
}

#[test]
fn malformed_inputs_never_panic() {
    let dir = std::env::temp_dir().join(format!("qlam-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let junk = dir.join("junk.json");
    std::fs::write(&junk, "{\"points\": [1, {}], \"dist\": 7").unwrap();
    let j = junk.to_str().unwrap();
    let good = data("good_xi.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["parse", j],
        vec!["classify", j],
        vec!["exp-check", j],
        vec!["hom-dist", j],
        vec!["build-grid", j],
        vec!["build-fts", "--base", j],
        vec!["check-proof", j, "--theory", "U_CL"],
        vec!["check-proof", &good, "--theory", "U_nothing"],
        vec!["model-check", "--algebra", j, j],
        vec!["dist", "--expr", "\\x:o. x", "(y : o)"],
        vec!["normalize", "--expr", "\\x:o. x x"],
        vec!["bracket", "x", "--expr", "(y : o)"],
    ];
    for args in cases {
        let o = qlam(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).contains("panicked"), "{args:?}");
    }
    std::fs::remove_dir_all(&dir).ok();
}
