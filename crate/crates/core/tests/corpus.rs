use spa::assertion::Mode;
use spa::derive::assert_derives;
use spa::insecurity::{find_attack, AttackOptions, AttackOutcome};
use spa::protocol::{is_attack, validate_run, RunSpec, ValidateOptions};
use spa::speclang::{parse, SpecFile};

fn load(name: &str) -> SpecFile {
    let p = format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn eqderiv_queries() {
    let spec = load("eqderiv.spa");
    let q = spec.derive_query("cipher_match").unwrap();
    assert!(assert_derives(&q.context(), &q.goal, Mode::Core).unwrap().holds);
    let q = spec.derive_query("underivable_key").unwrap();
    assert!(!assert_derives(&q.context(), &q.goal, Mode::Core).unwrap().holds);
}

#[test]
fn disje_queries() {
    let spec = load("disje.spa");
    let q = spec.derive_query("disje").unwrap();
    assert!(assert_derives(&q.context(), &q.goal, Mode::Extended).unwrap().holds);
    let q = spec.derive_query("disje_independent").unwrap();
    assert!(!assert_derives(&q.context(), &q.goal, Mode::Extended).unwrap().holds);
}

#[test]
fn empty_trivial() {
    let spec = load("empty.spa");
    let q = spec.derive_query("trivial_refl").unwrap();
    assert!(assert_derives(&q.context(), &q.goal, Mode::Core).unwrap().holds);
}

#[test]
fn foo_honest_run_validates() {
    let spec = load("foo.spa");
    let p = spec.protocol().unwrap();
    let rs: RunSpec = serde_json::from_value(serde_json::json!({
        "sessions": [
            {"role": "voter", "steps": 2},
            {"role": "authority", "steps": 2},
            {"role": "collector", "steps": 1}
        ],
        "interleaving": [[0, 0], [1, 0], [1, 1], [0, 1], [2, 0]],
        "sigma": {
            "?c_2": "{0}p",
            "?d_3": "{0}q"
        }
    }))
    .unwrap();
    let run = spec.run_from_spec(&rs).unwrap();
    let r = validate_run(&run, &p.initial_knowledge(), &p.intruder, Mode::Extended, ValidateOptions::default()).unwrap();
    assert!(r.valid, "{:?}", r.failure);
    let goal = &spec.attack_query("vote_secrecy").unwrap().goal;
    assert!(!is_attack(&r, goal, Mode::Extended).unwrap().holds);
}

#[test]
fn foo_vote_secrecy_holds_for_two_sessions() {
    let spec = load("foo.spa");
    let p = spec.protocol().unwrap();
    let goal = &spec.attack_query("vote_secrecy").unwrap().goal;
    let out = find_attack(&p, goal, &AttackOptions { sessions: 2, ..Default::default() }).unwrap();
    assert!(matches!(out, AttackOutcome::None { .. }), "{out:?}");
}
