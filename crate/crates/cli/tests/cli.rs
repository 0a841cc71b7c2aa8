use std::process::{Command, Output};

use segre_witness::certify::{Rule, Status, Verdict};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segre-witness"))
        .args(args)
        .env_remove("SEGRE_WITNESS_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Drops wall-clock fields so reports from two runs compare equal.
fn strip_timings(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.remove("elapsed_ms");
            m.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

#[test]
fn table_case_as_json() {
    let o = run(&["check", "--dims", "2,3,3", "--k", "5", "--json"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    let verdict: Verdict = serde_json::from_value(v["verdict"].clone()).unwrap();
    assert_eq!(
        (verdict.status, verdict.rule),
        (Status::NotIdentifiable, Rule::ExceptionsTable)
    );
    assert!(v["config"]["seed"].is_u64());
}

#[test]
fn numeric_certificate_replays_with_seed() {
    let args = [
        "check",
        "--dims",
        "1,1,1,1,1",
        "--k",
        "4",
        "--seed",
        "42",
        "--json",
    ];
    let a = run(&args);
    assert_eq!(code(&a), 0);
    let mut va = json(&a);
    let verdict: Verdict = serde_json::from_value(va["verdict"].clone()).unwrap();
    assert_eq!(
        (verdict.status, verdict.rule),
        (Status::Identifiable, Rule::NumericCertificate)
    );
    assert!(stderr(&a).contains("seed: 42"));

    let mut vb = json(&run(&args));
    strip_timings(&mut va);
    strip_timings(&mut vb);
    assert_eq!(va, vb);
}

#[test]
fn seed_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_segre-witness"))
        .args(["check", "--dims", "2,3,3", "--k", "4"])
        .env("SEGRE_WITNESS_SEED", "777")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("seed: 777"));
    assert!(stdout(&o).contains("seed 777"));
}

#[test]
fn sampled_seed_is_printed() {
    let o = run(&["bounds", "--dims", "2,2,2"]);
    assert!(stderr(&o).lines().any(|l| l.starts_with("seed: ")));
}

#[test]
fn invalid_inputs_exit_2() {
    for args in [
        &["check", "--dims", "1,1", "--k", "2"][..],
        &["check", "--dims", "1,a", "--k", "2"],
        &["check", "--dims", "0,1,1", "--k", "1"],
        &["check", "--dims", "2,3,3", "--k", "0"],
        &["check", "--dims", "2,3,3", "--k", "3", "--prime-bits", "20"],
        &["check", "--dims", "2,3,3", "--k", "3", "--trials", "0"],
        &["check", "--dims", "2,3,3", "--k", "3", "--r", "5"],
        &["bounds"],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
    }
    assert!(stderr(&run(&["check", "--dims", "1,1", "--k", "2"])).contains("unsupported shape"));
}

#[test]
fn span_filling_check_is_out_of_method() {
    let o = run(&["check", "--dims", "1x7", "--k", "16"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn perfect_case_needs_no_numeric_check() {
    let o = run(&["check", "--dims", "1,1,1", "--k", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("perfect-case"));
}

#[test]
fn bounds_reports() {
    let o = run(&["bounds", "--dims", "1x12"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("k_c = 4096/13"), "{out}");
    assert!(out.contains("manyp1 = 315"), "{out}");

    let out = stdout(&run(&["bounds", "--dims", "3,3,3"]));
    assert!(out.contains("trex = 2"), "{out}");
    assert!(out.contains("k = 6"), "{out}");

    let out = stdout(&run(&["bounds", "--dims", "2x6"]));
    assert!(out.contains("manyp2 = 56"), "{out}");

    let v = json(&run(&["bounds", "--dims", "3x4", "--json"]));
    assert_eq!(v["bounds"]["engine_bound"], 8);
    assert_eq!(v["bounds"]["engine"]["derivation"]["rule"], "extend");
}

#[test]
fn secant_reports_defect() {
    let v = json(&run(&[
        "secant", "--dims", "1,1,1,1", "--k", "3", "--seed", "3", "--json",
    ]));
    assert_eq!(v["secant"]["expected"], 14);
    assert_eq!(v["secant"]["actual"], 13);
    assert_eq!(v["secant"]["defect"], 1);
}

#[test]
fn large_ambient_needs_allow_long() {
    let o = run(&["secant", "--dims", "1x14", "--k", "2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--allow-long"));
    let o = run(&["secant", "--dims", "1x14", "--k", "2", "--allow-long"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn padded_check() {
    let v = json(&run(&[
        "check", "--dims", "3x5", "--k", "63", "--r", "1007", "--json",
    ]));
    assert_eq!(v["tangency"]["verdict"], "certified");
    assert_eq!(v["tangency"]["span_dim"], 1007);
}

#[test]
fn survey_runs_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.jsonl");
    let path = out.to_str().unwrap();

    let o = run(&["survey", "--max-size", "8", "--out", path, "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("shapes 1"));
    assert!(stdout(&o).contains("numeric checks 1, certified 1"));

    let a = run(&[
        "survey",
        "--max-size",
        "100",
        "--out",
        path,
        "--seed",
        "1",
        "--json",
    ]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let va = json(&a);
    assert_eq!(va["summary"]["divergences"], 0);
    assert_eq!(va["summary"]["table_hits"], 7);

    let b = run(&[
        "survey",
        "--max-size",
        "100",
        "--out",
        path,
        "--seed",
        "1",
        "--json",
    ]);
    assert_eq!(code(&b), 0);
    let mut sa = va["summary"].clone();
    let mut sb = json(&b)["summary"].clone();
    sa.as_object_mut().unwrap().remove("wall_ms");
    sb.as_object_mut().unwrap().remove("wall_ms");
    assert_eq!(sa, sb);
}

#[test]
fn survey_io_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("s.jsonl");
    let o = run(&["survey", "--max-size", "8", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 4);
}
