use std::collections::BTreeMap;

use spa::assertion::{Assertion, Mode};
use spa::insecurity::{find_attack, AttackOptions, AttackOutcome};
use spa::protocol::{instantiate_session, validate_run, Protocol, Role, Run, Step, ValidateOptions};
use spa::term::{Name, Subst, Term, Variable};

fn agent(id: &str) -> Name {
    Name::agent(id, &format!("pk_{id}"), &format!("sk_{id}"))
}
fn pk(a: &Name) -> Term {
    Term::name(a.public_key().unwrap())
}
fn iv(s: &str) -> Term {
    Term::var(Variable::inst(s))
}
fn msg(t: Term) -> Assertion {
    Assertion::msg(t)
}

fn echo_protocol() -> Protocol {
    let (a, b, i) = (agent("a"), agent("b"), agent("i"));
    let m = Term::name(Name::plain("m"));
    let eta1 = Role::new(
        "eta1",
        a.clone(),
        vec![Step::exchange(msg(Term::name(Name::dummy())), msg(Term::enc(Term::pair(pk(&a), Term::enc(m.clone(), pk(&b))), pk(&b))))],
        BTreeMap::new(),
    )
    .unwrap();
    let eta2 = Role::new(
        "eta2",
        b.clone(),
        vec![Step::exchange(msg(Term::enc(Term::pair(iv("x"), Term::enc(iv("y"), pk(&b))), pk(&b))), msg(Term::enc(iv("y"), iv("x"))))],
        BTreeMap::new(),
    )
    .unwrap();
    Protocol {
        mode: Mode::Core,
        roles: vec![eta1, eta2],
        agents: vec![a.clone(), b, i.clone()],
        intruder: i,
        public: vec![],
        knows: BTreeMap::from([(a, vec![m])]),
        facts: BTreeMap::new(),
    }
}

fn secret_m() -> Assertion {
    msg(Term::name(Name::plain("m")))
}

#[test]
fn echo_attack_run_validates() {
    let p = echo_protocol();
    let s1 = instantiate_session(&p.roles[0], &p.roles[0].actor, &BTreeMap::new(), 1, 1).unwrap();
    let s2 = instantiate_session(&p.roles[1], &p.roles[1].actor, &BTreeMap::new(), 1, 2).unwrap();
    let s3 = instantiate_session(&p.roles[1], &p.roles[1].actor, &BTreeMap::new(), 1, 3).unwrap();
    let i = agent("i");
    let a = agent("a");
    let m = Term::name(Name::plain("m"));
    let pkb = pk(&agent("b"));
    let sigma: Subst = [
        (Variable::inst("x_2"), pk(&i)),
        (Variable::inst("x_3"), pk(&i)),
        (Variable::inst("y_2"), Term::pair(pk(&a), Term::enc(m.clone(), pkb))),
        (Variable::inst("y_3"), m),
    ]
    .into_iter()
    .collect();
    let run = Run { sessions: vec![s1, s2, s3], interleaving: vec![(0, 0), (1, 0), (2, 0)], sigma };
    let r = validate_run(&run, &p.initial_knowledge(), &p.intruder, Mode::Core, ValidateOptions::default()).unwrap();
    assert!(r.valid, "{:?}", r.failure);
    let g = spa::protocol::is_attack(&r, &secret_m(), Mode::Core).unwrap();
    assert!(g.holds);
}

#[test]
fn echo_attack_with_three_sessions() {
    let p = echo_protocol();
    let out = find_attack(&p, &secret_m(), &AttackOptions { sessions: 3, ..Default::default() }).unwrap();
    let AttackOutcome::Found(rep) = out else { panic!("expected an attack, got {out:?}") };
    assert_eq!(rep.run.sessions.len(), 3);
    println!("sigma = {}", rep.run.sigma);
    let i = agent("i");
    let xs: Vec<_> = rep.run.sigma.iter().filter(|(v, _)| v.id().starts_with('x')).map(|(_, t)| t.clone()).collect();
    assert!(xs.iter().all(|t| *t == pk(&i)), "{}", rep.run.sigma);
    let zap = rep.zap.expect("zap report");
    assert!(zap.preserved, "{:?}", zap.failures);
}

#[test]
fn echo_no_attack_with_one_session() {
    let p = echo_protocol();
    let out = find_attack(&p, &secret_m(), &AttackOptions { sessions: 1, ..Default::default() }).unwrap();
    assert!(matches!(out, AttackOutcome::None { .. }), "{out:?}");
}

#[test]
fn echo_needs_three_sessions() {
    let p = echo_protocol();
    let out = find_attack(&p, &secret_m(), &AttackOptions { sessions: 2, ..Default::default() }).unwrap();
    assert!(matches!(out, AttackOutcome::None { .. }), "{out:?}");
}
