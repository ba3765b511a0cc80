use std::path::PathBuf;

use spa::assertion::Mode;
use spa::error::Error;
use spa::speclang::{parse, print_spec};

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut out: Vec<(String, String)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "spa"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn corpus_parses_and_round_trips() {
    let files = corpus();
    assert!(files.len() >= 5);
    for (name, src) in files {
        let spec = parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = print_spec(&spec);
        let again = parse(&printed).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{printed}"));
        assert_eq!(spec, again, "{name}");
        assert_eq!(printed, print_spec(&again), "{name}");
    }
}

#[test]
fn echo_roles() {
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/example1.spa")).unwrap();
    let spec = parse(&src).unwrap();
    assert_eq!(spec.roles.len(), 2);
    let eta2 = &spec.roles[1];
    assert_eq!(eta2.intruder_vars.len(), 2);
    assert!(eta2.agent_vars.is_empty());
    assert_eq!(eta2.steps[0].recv.to_string(), "{(?x, {?y}pk_b)}pk_b ~ {(?x, {?y}pk_b)}pk_b");
    assert_eq!(eta2.steps[0].send.to_string(), "{?y}?x ~ {?y}?x");
    assert_eq!(spec.roles[0].steps[0].send.to_string(), "{(pk_a, {m}pk_b)}pk_b ~ {(pk_a, {m}pk_b)}pk_b");
}

#[test]
fn empty_protocol_section() {
    let spec = parse("").unwrap();
    assert!(spec.roles.is_empty());
    assert_eq!(spec.mode, Mode::Core);
    let spec = parse("names m;\nderive t { know m; goal m; }").unwrap();
    assert!(spec.roles.is_empty());
}

fn err(src: &str) -> (usize, usize, String) {
    match parse(src).unwrap_err() {
        Error::Parse { line, col, msg } => (line, col, msg),
        e => panic!("unexpected {e}"),
    }
}

#[test]
fn diagnostics_are_located() {
    let (l, c, m) = err("names m;\nderive t {\n  know n;\n  goal m;\n}");
    assert_eq!((l, c), (3, 8));
    assert!(m.starts_with("unresolved identifier"), "{m}");

    let (l, c, m) = err("names m;\nderive t { know m goal m; }");
    assert_eq!((l, c), (2, 19));
    assert!(m.starts_with("syntax error"), "{m}");

    let (_, _, m) = err("mode extended;\nnames m, k;\nderive t { know m; goal P({m}k); }");
    assert!(m.starts_with("sort violation"), "{m}");

    let (_, _, m) = err("names _m;");
    assert!(m.contains("reserved"), "{m}");

    let (_, _, m) = err("names m, m;");
    assert!(m.contains("twice"), "{m}");
}

#[test]
fn quantified_and_instantiation_variables_are_distinct() {
    let spec = parse("names m;\nvars x;\nderive t { know m, x; assume x ~ ?x; goal m; }").unwrap();
    let q = spec.derive_query("t").unwrap();
    let vs: Vec<String> = q.assume[0].vars().iter().map(|v| format!("{v:?}")).collect();
    assert_eq!(vs.len(), 2, "{vs:?}");
}

#[test]
fn enc_sugar_prints_compactly() {
    let spec = parse("names m, k;").unwrap();
    assert_eq!(spec.parse_term("enc(m, k)", &[]).unwrap().to_string(), "{m}k");
    assert_eq!(spec.parse_term("enc(m, (k, k))", &[]).unwrap().to_string(), "enc(m, (k, k))");
}
