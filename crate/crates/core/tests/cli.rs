use std::path::PathBuf;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn example(name: &str) -> String {
    format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn spa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spa")).args(args).env_remove("SPA_THREADS").output().expect("spawn spa")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema() -> JSONSchema {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/report-schema.json");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

/// Run with `--json`, validate against the schema and return the report.
fn json(args: &[&str]) -> (i32, Value) {
    let mut full = args.to_vec();
    full.push("--json");
    let o = spa(&full);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)));
    let s = schema();
    if let Err(errs) = s.validate(&v) {
        let msgs: Vec<String> = errs.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("report does not validate: {msgs:?}\n{v:#}");
    }
    let code = o.status.code().unwrap();
    assert_eq!(v["exit_code"], code);
    (code, v)
}

#[test]
fn attack_three_sessions_finds_echo_attack() {
    let o = spa(&["attack", &example("example1.spa"), "--goal", "secret_m", "--sessions", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("?x_2 -> pk_i"), "{out}");
    assert!(out.contains("?y_3 -> m"), "{out}");
    assert!(out.trim_end().ends_with("FOUND"), "{out}");
}

#[test]
fn attack_one_session_is_none() {
    let o = spa(&["attack", &example("example1.spa"), "--goal", "secret_m", "--sessions", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_end().ends_with("NONE"));
}

#[test]
fn derive_trivial_yes() {
    let o = spa(&["derive", &example("empty.spa"), "--goal", "trivial_refl"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_end().ends_with("YES"));
}

#[test]
fn derive_no_is_answered() {
    let (code, v) = json(&["derive", &example("eqderiv.spa"), "--goal", "underivable_key"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "no");
    assert_eq!(v["result"]["certificate"], Value::Null);
}

#[test]
fn derive_with_oracle_agrees() {
    let (code, v) = json(&["derive", &example("disje.spa"), "--goal", "disje", "--oracle"]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "yes");
    assert_eq!(v["oracle"]["verdict"], "agree");
    assert_eq!(v["result"]["certificate_replayed"], true);
}

#[test]
fn json_reports_validate_for_every_verb() {
    let (_, v) = json(&["attack", &example("example1.spa"), "--sessions", "3"]);
    assert_eq!(v["status"], "found");
    let (_, v) = json(&["attack", &example("example1.spa"), "--sessions", "1"]);
    assert_eq!(v["status"], "none");
    let (_, v) = json(&["saturate", &example("eqderiv.spa"), "--goal", "cipher_match", "--oracle"]);
    assert_eq!(v["result"]["goals"][0]["holds"], true);
    assert!(v["result"]["rounds"].as_u64() <= v["result"]["round_bound"].as_u64());
    for f in ["disje.spa", "empty.spa", "eqderiv.spa", "example1.spa", "foo.spa"] {
        let (code, v) = json(&["check", &example(f)]);
        assert_eq!((code, v["status"].as_str()), (0, Some("ok")), "{f}");
    }
    let (code, v) = json(&["fuzz", "--seed", "3", "--count", "4", "--threads", "2"]);
    assert_eq!((code, v["status"].as_str()), (0, Some("pass")));
}

#[test]
fn normalize_round_trips_a_derived_proof() {
    let (_, d) = json(&["derive", &example("eqderiv.spa"), "--goal", "cipher_match"]);
    let proof = &d["result"]["certificate"]["eq_proofs"][0][1];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("proof.json");
    std::fs::write(&p, proof.to_string()).unwrap();
    let (code, v) = json(&["normalize", &example("eqderiv.spa"), "--goal", "cipher_match", "--proof", p.to_str().unwrap(), "--oracle"]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["is_normal"], true);
    assert_eq!(v["result"]["subterm_property"], true);
    assert_eq!(v["oracle"]["verdict"], "agree");
}

#[test]
fn normalize_rewrites_a_detour() {
    // sym(sym(ax)) collapses to ax.
    let proof = serde_json::json!({
        "rule": "sym", "conclusion": "?x ~ {m}?y",
        "premises": [{
            "rule": "sym", "conclusion": "{m}?y ~ ?x",
            "premises": [{ "rule": "ax", "conclusion": "?x ~ {m}?y" }]
        }]
    });
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("proof.json");
    std::fs::write(&p, proof.to_string()).unwrap();
    let (code, v) = json(&["normalize", &example("eqderiv.spa"), "--goal", "cipher_match", "--proof", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["input_normal"], false);
    assert_eq!(v["result"]["proof"]["rule"], "ax");
}

#[test]
fn invalid_proof_is_an_error() {
    let proof = serde_json::json!({ "rule": "ax", "conclusion": "m ~ k" });
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("proof.json");
    std::fs::write(&p, proof.to_string()).unwrap();
    let (code, v) = json(&["normalize", &example("eqderiv.spa"), "--goal", "cipher_match", "--proof", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert_eq!(v["status"], "error");
}

#[test]
fn validate_run_replays_the_attack() {
    let (_, a) = json(&["attack", &example("example1.spa"), "--sessions", "3"]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.json");
    std::fs::write(&p, a["result"]["run"]["spec"].to_string()).unwrap();
    let (code, v) = json(&["validate-run", &example("example1.spa"), "--run", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "valid");
    assert_eq!(v["result"]["attacks"]["secret_m"], true);
    assert_eq!(v["result"]["zap"]["bounded"], true);

    // Dropping the first session leaves b's input underivable.
    let mut spec = a["result"]["run"]["spec"].clone();
    spec["interleaving"] = serde_json::json!([[1, 0], [0, 0], [2, 0]]);
    std::fs::write(&p, spec.to_string()).unwrap();
    let (code, v) = json(&["validate-run", &example("example1.spa"), "--run", p.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(v["status"], "invalid");
}

#[test]
fn identical_inputs_give_identical_json() {
    let runs = [
        vec!["attack", "EX1", "--sessions", "3", "--json"],
        vec!["derive", "DISJE", "--goal", "disje", "--json"],
        vec!["fuzz", "--seed", "11", "--count", "3", "--json"],
    ];
    for r in runs {
        let args: Vec<String> = r
            .iter()
            .map(|a| match *a {
                "EX1" => example("example1.spa"),
                "DISJE" => example("disje.spa"),
                s => s.to_string(),
            })
            .collect();
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = spa(&args).stdout;
        let b = spa(&args).stdout;
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn fuzz_json_does_not_depend_on_threads() {
    let one = spa(&["fuzz", "--seed", "5", "--count", "6", "--threads", "1", "--json"]).stdout;
    let four = Command::new(env!("CARGO_BIN_EXE_spa"))
        .args(["fuzz", "--seed", "5", "--count", "6", "--json"])
        .env("SPA_THREADS", "4")
        .output()
        .unwrap()
        .stdout;
    assert_eq!(one, four);
}

#[test]
fn errors_and_flags() {
    let (code, v) = json(&["check", "/nonexistent/file.spa"]);
    assert_eq!((code, v["status"].as_str()), (1, Some("error")));
    let o = spa(&["derive"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spa(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = spa(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let (code, v) = json(&["derive", &example("disje.spa")]);
    assert_eq!(code, 1);
    assert!(v["error"].as_str().unwrap().contains("--goal"));
    let (code, _) = json(&["attack", &example("example1.spa"), "--goal", "nope"]);
    assert_eq!(code, 1);
}

#[test]
fn parse_errors_pass_through() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.spa");
    std::fs::write(&p, "names m;\nderive q { know m; goal m ~ ; }\n").unwrap();
    let (code, v) = json(&["check", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(v["error"].as_str().unwrap().contains(":2:"), "{v}");
}

#[test]
fn tiny_budget_exhausts() {
    let (code, v) = json(&["attack", &example("example1.spa"), "--sessions", "3", "--budget-ms", "0"]);
    assert_eq!(code, 2);
    assert_eq!(v["status"], "exhausted");
}

#[test]
fn schema_rejects_inconsistent_reports() {
    let (_, v) = json(&["derive", &example("empty.spa")]);
    let s = schema();
    let mut bad = v.clone();
    bad["exit_code"] = 2.into();
    assert!(!s.is_valid(&bad));
    let mut bad = v.clone();
    bad["result"]["holds"] = "yes".into();
    assert!(!s.is_valid(&bad));
    let mut bad = v;
    bad["timing_ms"] = 3.into();
    assert!(!s.is_valid(&bad));
}
