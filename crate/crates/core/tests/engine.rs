use std::sync::Arc;

use spa::assertion::{Assertion, KnowledgePair, Mode};
use spa::derive::assert_derives;
use spa::derive::WitnessQuery;
use spa::eq::{check_subterm_property, eq_derives, normalize, EqContext, DEFAULT_STEP_LIMIT};
use spa::term::{Name, Term, Variable};

fn n(s: &str) -> Term {
    Term::name(Name::plain(s))
}
fn q(s: &str) -> Term {
    Term::var(Variable::quant(s))
}
fn enc(a: Term, k: Term) -> Term {
    Term::enc(a, k)
}

#[test]
fn cipher_match_equality() {
    let (m, k, y, z, x) = (n("m"), n("k"), q("y"), q("z"), q("x"));
    let kp = KnowledgePair::new(
        [m.clone(), k.clone(), y.clone(), z.clone(), x.clone()],
        [Assertion::eq(x.clone(), enc(m.clone(), y.clone())), Assertion::eq(x.clone(), enc(z, k.clone()))],
    );
    let ctx = Arc::new(EqContext::new(&kp, Mode::Core).unwrap());
    let goal = Assertion::eq(x, enc(m, k));
    let p = eq_derives(&ctx, &goal).unwrap().expect("derivable");
    p.check(&ctx).unwrap();
    let r = normalize(&p, &ctx, DEFAULT_STEP_LIMIT).unwrap();
    r.proof.check(&ctx).unwrap();
    assert!(r.proof.is_normal(), "{}", r.proof.render());
    assert!(check_subterm_property(&r.proof, &ctx).unwrap());
    println!("{}", r.proof.render());
}

fn disjoint_ranges(second_key: &str) -> (KnowledgePair, Assertion) {
    let v = n("0");
    let k1 = n("k");
    let k2 = n(second_key);
    let (x, r, y, s) = (Variable::quant("x"), Variable::quant("r"), Variable::quant("y"), Variable::quant("s"));
    let l1 = vec![Name::plain("0"), Name::plain("1")];
    let l2 = vec![Name::plain("0"), Name::plain("2")];
    let a1 = Assertion::exists_many(
        &[x.clone(), r.clone()],
        Assertion::and(
            Assertion::eq(enc(Term::var(x.clone()), Term::var(r.clone())), enc(v.clone(), k1.clone())),
            Assertion::member(Term::var(x.clone()), l1),
        ),
    );
    let a2 = Assertion::exists_many(
        &[y.clone(), s.clone()],
        Assertion::and(
            Assertion::eq(enc(Term::var(y.clone()), Term::var(s.clone())), enc(v.clone(), k2.clone())),
            Assertion::member(Term::var(y.clone()), l2),
        ),
    );
    let mut terms = vec![enc(v.clone(), k1.clone()), n("0"), n("1"), n("2")];
    if second_key != "k" {
        terms.push(enc(v.clone(), k2.clone()));
    }
    let kp = KnowledgePair::new(terms, [a1, a2]);
    let (z, w) = (Variable::quant("z"), Variable::quant("w"));
    let goal = Assertion::exists_many(
        &[z.clone(), w.clone()],
        Assertion::and(Assertion::eq(enc(Term::var(z.clone()), Term::var(w.clone())), enc(v, k1)), Assertion::eq(Term::var(z), n("0"))),
    );
    (kp, goal)
}

#[test]
fn disjoint_ranges_extended() {
    let (kp, goal) = disjoint_ranges("k");
    let d = assert_derives(&kp, &goal, Mode::Extended).unwrap();
    assert!(d.holds);
    let cert = d.certificate.unwrap();
    println!("{}", cert.witness);
    cert.replay(&WitnessQuery::new(&kp, &goal, Mode::Extended).unwrap()).unwrap();
    let (kp, goal) = disjoint_ranges("k2");
    let d = assert_derives(&kp, &goal, Mode::Extended).unwrap();
    assert!(!d.holds);
}
