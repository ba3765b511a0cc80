use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;

use spa::assertion::{Assertion, KnowledgePair, Mode};
use spa::consistency::consistent;
use spa::derive::{assert_derives, WitnessQuery};
use spa::dy::dy_derives;
use spa::eq::{eq_derives, normalize, EqContext, Saturation, DEFAULT_STEP_LIMIT};
use spa::error::Error;
use spa::oracles::gen::{self, instance_rng};
use spa::oracles::{brute_dy, brute_eq, brute_witness, fuzz, OracleConfig};
use spa::speclang::{parse, SpecFile};
use spa::term::{Name, Term, Variable};

fn load(name: &str) -> SpecFile {
    let p = format!("{}/examples/{name}", env!("CARGO_MANIFEST_DIR"));
    parse(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn cfg() -> OracleConfig {
    OracleConfig::default()
}

fn n(s: &str) -> Term {
    Term::name(Name::plain(s))
}

#[test]
fn brute_dy_member_of_knowledge() {
    let t = Term::pair(n("a"), n("b"));
    assert!(brute_dy(&BTreeSet::from([t.clone()]), &t, &cfg()).unwrap());
}

#[test]
fn brute_dy_intruder_reads_its_mail() {
    // The last message of the attack, {m}pk_i, opened with sk_i.
    let i = Name::agent("i", "pk_i", "sk_i");
    let pk = Term::name(i.public_key().unwrap());
    let sk = Term::name(i.secret_key().unwrap());
    let x = BTreeSet::from([sk, Term::enc(n("m"), pk.clone()), pk]);
    assert!(brute_dy(&x, &n("m"), &cfg()).unwrap());
    assert!(dy_derives(&x, &n("m")).is_some());
    let x: BTreeSet<Term> = x.into_iter().filter(|t| t.to_string() != "sk_i").collect();
    assert!(!brute_dy(&x, &n("m"), &cfg()).unwrap());
}

#[test]
fn brute_eq_cipher_match() {
    let spec = load("eqderiv.spa");
    let q = spec.derive_query("cipher_match").unwrap();
    assert!(brute_eq(&q.context(), &q.goal, &cfg()).unwrap());
    let q = spec.derive_query("underivable_key").unwrap();
    assert!(!brute_eq(&q.context(), &q.goal, &cfg()).unwrap());
}

#[test]
fn brute_eq_reflexive_on_underivable_term() {
    let kp = KnowledgePair::new([n("a")], []);
    assert!(!brute_eq(&kp, &Assertion::eq(n("b"), n("b")), &cfg()).unwrap());
    assert!(brute_eq(&kp, &Assertion::eq(n("a"), n("a")), &cfg()).unwrap());
}

#[test]
fn brute_witness_finds_the_disjointness_witness() {
    let spec = load("disje.spa");
    let q = spec.derive_query("disje").unwrap();
    let wq = WitnessQuery::new(&q.context(), &q.goal, Mode::Extended).unwrap();
    let s = brute_witness(&wq, 2 * wq.m_bound, &cfg()).unwrap();
    let mu = s.witness.expect("witness within 2M");
    let inst = q.goal.clone();
    let Assertion::Exists(z, _) = inst else { panic!("goal is existential") };
    assert_eq!(mu.get(&z).map(|t| t.to_string()).as_deref(), Some("0"));
}

#[test]
fn brute_witness_none_for_distinct_public_names() {
    let z = Variable::quant("z");
    let kp = KnowledgePair::new([n("m"), n("n")], []);
    let goal =
        Assertion::exists(z.clone(), Assertion::and(Assertion::eq(Term::var(z.clone()), n("m")), Assertion::eq(Term::var(z), n("n"))));
    let wq = WitnessQuery::new(&kp, &goal, Mode::Extended).unwrap();
    // The candidate pool outgrows the default bound past dagsize 4.
    let cap = wq.m_bound + 1;
    let s = brute_witness(&wq, cap, &cfg()).unwrap();
    assert!(s.witness.is_none());
    assert_eq!(s.complete_up_to, cap);
    assert!(!assert_derives(&kp, &goal, Mode::Extended).unwrap().holds);
    let goal = Assertion::eq(n("m"), n("n"));
    let wq = WitnessQuery::new(&kp, &goal, Mode::Core).unwrap();
    assert!(brute_witness(&wq, 2 * wq.m_bound, &cfg()).unwrap().witness.is_none());
}

#[test]
fn brute_witness_reports_its_bound() {
    let spec = load("disje.spa");
    let q = spec.derive_query("disje_independent").unwrap();
    let wq = WitnessQuery::new(&q.context(), &q.goal, Mode::Extended).unwrap();
    let c = OracleConfig { max_assignments: 100, ..cfg() };
    assert!(matches!(brute_witness(&wq, 2 * wq.m_bound, &c), Err(Error::BoundExceeded(_))));
}

#[test]
fn config_rejects_zero_bounds() {
    let c = OracleConfig { max_term_dagsize: 0, ..cfg() };
    assert!(c.validate().is_err());
    assert!(cfg().validate().is_ok());
}

#[test]
fn suites_agree_on_a_second_seed() {
    let c = OracleConfig::with_seed(2024, 60);
    for r in [
        fuzz::dy_agreement(&c, 120, 4),
        fuzz::eq_agreement(&c, 60, 4),
        fuzz::witness_agreement(&c, 20, 4),
        fuzz::normalization_suite(&c, 120, 4),
        fuzz::zap_suite(&c, 30, 4),
    ] {
        assert!(r.passed(), "{}: {:?}", r.suite, r.disagreements);
        assert!(r.agreements > 0, "{}: no conclusive instance", r.suite);
    }
}

#[test]
fn suites_are_deterministic() {
    let c = OracleConfig::with_seed(99, 30);
    let a = serde_json::to_string(&fuzz::run_all(&c, 8, 1)).unwrap();
    let b = serde_json::to_string(&fuzz::run_all(&c, 8, 3)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oversized_runs_shrink() {
    let proto = fuzz::echo_protocol();
    let runs = fuzz::oversized_runs(&proto);
    assert!(runs.len() >= 6);
    let r = fuzz::zap_suite(&OracleConfig::with_seed(1, runs.len()), runs.len(), 2);
    assert!(r.passed(), "{:?}", r.disagreements);
    assert_eq!(r.counters["hand_built"], runs.len());
    assert!(r.counters["shrunk"] > 0);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn dy_engine_matches_oracle(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 101, 0);
        let (x, t) = gen::dy_instance(&mut rng, 12);
        let engine = dy_derives(&x, &t);
        if let Some(p) = &engine {
            prop_assert!(p.check(&x).is_ok());
        }
        prop_assert_eq!(brute_dy(&x, &t, &cfg()).unwrap(), engine.is_some());
    }

    #[test]
    fn derived_equalities_are_true_in_every_model(seed in any::<u64>(), extended in any::<bool>()) {
        let mode = if extended { Mode::Extended } else { Mode::Core };
        let mut rng = instance_rng(seed, 102, 0);
        let kp = gen::eq_context(&mut rng, mode, 8);
        let lambda = consistent(&kp.assertions).unwrap().expect("generated contexts are consistent");
        let ctx = Arc::new(EqContext::new(&kp, mode).unwrap());
        let sat = Saturation::new(ctx, &[]).unwrap();
        for (t, u) in sat.derived_equalities() {
            prop_assert_eq!(lambda.apply(&t), lambda.apply(&u), "{} ~ {} under {}", t, u, lambda);
        }
    }

    #[test]
    fn saturation_rounds_are_quadratically_bounded(seed in any::<u64>(), extended in any::<bool>()) {
        let mode = if extended { Mode::Extended } else { Mode::Core };
        let mut rng = instance_rng(seed, 103, 0);
        let kp = gen::eq_context(&mut rng, mode, 8);
        let ctx = Arc::new(EqContext::new(&kp, mode).unwrap());
        let sat = Saturation::new(ctx, &[]).unwrap();
        let z = sat.universe().len();
        prop_assert!(sat.rounds() <= z * z);
    }

    #[test]
    fn normalization_is_idempotent(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 104, 0);
        let (ctx, p) = loop {
            let kp = gen::eq_context(&mut rng, Mode::Extended, 8);
            let ctx = EqContext::new(&kp, Mode::Extended).unwrap();
            if let Some(p) = gen::valid_proof(&mut rng, &ctx) {
                break (ctx, p);
            }
        };
        let once = normalize(&p, &ctx, DEFAULT_STEP_LIMIT).unwrap();
        let twice = normalize(&once.proof, &ctx, DEFAULT_STEP_LIMIT).unwrap();
        prop_assert!(twice.steps.is_empty(), "{:?}", twice.steps.iter().map(|s| s.rule).collect::<Vec<_>>());
        prop_assert!(twice.proof == once.proof);
    }

    #[test]
    fn saturation_proofs_check(seed in any::<u64>()) {
        let mut rng = instance_rng(seed, 105, 0);
        let kp = gen::eq_context(&mut rng, Mode::Core, 8);
        let ctx = Arc::new(EqContext::new(&kp, Mode::Core).unwrap());
        let sat = Saturation::new(ctx.clone(), &[]).unwrap();
        for a in sat.derived_atoms() {
            let p = eq_derives(&ctx, &a).unwrap().expect("derived atoms have proofs");
            prop_assert!(p.check(&ctx).is_ok());
            prop_assert!(p.conclusion.alpha_eq(&a));
        }
    }

    #[test]
    fn generators_are_pure_functions_of_the_seed(seed in any::<u64>(), index in 0usize..1000) {
        let a = gen::witness_query(&mut instance_rng(seed, 106, index), 7);
        let b = gen::witness_query(&mut instance_rng(seed, 106, index), 7);
        prop_assert_eq!(format!("{} {} {:?}", a.0, a.1, a.2), format!("{} {} {:?}", b.0, b.1, b.2));
    }
}
