//! Agreement suites between the engine and the oracles.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use super::gen::{self, instance_rng};
use super::{brute_dy, brute_witness, EqOracle, OracleConfig};
use crate::assertion::{Assertion, Mode};
use crate::derive::{assert_derives, WitnessQuery};
use crate::dy::dy_derives;
use crate::eq::{eq_derives, normalize, EqContext, Saturation, DEFAULT_STEP_LIMIT};
use crate::error::Error;
use crate::insecurity::verify_zap_preservation;
use crate::protocol::{validate_run, Protocol, Run, ValidateOptions};
use crate::speclang;
use crate::term::Term;

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub instances: usize,
    pub agreements: usize,
    /// Instances the oracle could not decide within its bounds.
    pub inconclusive: usize,
    pub disagreements: Vec<String>,
    pub counters: BTreeMap<String, usize>,
}

impl SuiteReport {
    fn new(suite: &str) -> SuiteReport {
        SuiteReport { suite: suite.to_string(), ..SuiteReport::default() }
    }

    pub fn passed(&self) -> bool {
        self.disagreements.is_empty()
    }

    fn bump(&mut self, key: &str, by: usize) {
        *self.counters.entry(key.to_string()).or_default() += by;
    }

    fn absorb(&mut self, o: Outcome) {
        self.instances += 1;
        match o.verdict {
            Verdict::Agree => self.agreements += 1,
            Verdict::Inconclusive => self.inconclusive += 1,
            Verdict::Disagree(why) => self.disagreements.push(why),
        }
        for (k, v) in o.counters {
            self.bump(&k, v);
        }
    }
}

enum Verdict {
    Agree,
    Inconclusive,
    Disagree(String),
}

struct Outcome {
    verdict: Verdict,
    counters: Vec<(String, usize)>,
}

impl Outcome {
    fn agree() -> Outcome {
        Outcome { verdict: Verdict::Agree, counters: vec![] }
    }

    fn disagree(why: String) -> Outcome {
        Outcome { verdict: Verdict::Disagree(why), counters: vec![] }
    }

    fn inconclusive() -> Outcome {
        Outcome { verdict: Verdict::Inconclusive, counters: vec![] }
    }

    fn count(mut self, key: &str, by: usize) -> Outcome {
        self.counters.push((key.to_string(), by));
        self
    }
}

/// Run `f` on `0..count` with up to `threads` workers; results come back in
/// index order.
fn par_map<T: Send>(count: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, count.max(1));
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> =
            (0..threads).map(|w| scope.spawn(move || (w..count).step_by(threads).map(|i| (i, f(i))).collect::<Vec<_>>())).collect();
        for h in handles {
            for (i, r) in h.join().expect("fuzz worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every index computed")).collect()
}

fn collect(name: &str, outcomes: Vec<Outcome>) -> SuiteReport {
    let mut r = SuiteReport::new(name);
    for o in outcomes {
        r.absorb(o);
    }
    r
}

const DY: u64 = 1;
const EQ: u64 = 2;
const WITNESS: u64 = 3;
const NORMALIZE: u64 = 4;
const ZAP: u64 = 5;

/// `dy_derives` against `brute_dy` on instances with `|st(X ∪ {t})| ≤ 12`.
pub fn dy_agreement(cfg: &OracleConfig, count: usize, threads: usize) -> SuiteReport {
    let outcomes = par_map(count, threads, |i| {
        let mut rng = instance_rng(cfg.instance_seed, DY, i);
        let (x, t) = gen::dy_instance(&mut rng, 12);
        let engine = dy_derives(&x, &t);
        if let Some(p) = &engine {
            if let Err(e) = p.check(&x) {
                return Outcome::disagree(format!("#{i}: invalid dy proof of {t}: {e}"));
            }
        }
        match brute_dy(&x, &t, cfg) {
            Ok(b) if b == engine.is_some() => Outcome::agree().count(if b { "yes" } else { "no" }, 1),
            Ok(b) => Outcome::disagree(format!("#{i}: X = {x:?}, t = {t}: engine {}, oracle {b}", engine.is_some())),
            Err(_) => Outcome::inconclusive(),
        }
    });
    collect("dy", outcomes)
}

/// `eq_derives` against the equality oracle on every atom of `Z × Z`, plus
/// the saturation round bound `rounds ≤ |Z|²`.
pub fn eq_agreement(cfg: &OracleConfig, count: usize, threads: usize) -> SuiteReport {
    let outcomes = par_map(count, threads, |i| {
        let mut rng = instance_rng(cfg.instance_seed, EQ, i);
        let mode = if i % 2 == 0 { Mode::Core } else { Mode::Extended };
        let kp = gen::eq_context(&mut rng, mode, 8);
        let ctx = match EqContext::new(&kp, mode) {
            Ok(c) => Arc::new(c),
            Err(e) => return Outcome::disagree(format!("#{i}: context rejected: {e}")),
        };
        let oracle = match EqOracle::new(&kp, &[], cfg) {
            Ok(o) => o,
            Err(_) => return Outcome::inconclusive(),
        };
        let z: Vec<Term> = oracle.universe().to_vec();
        let sat = match Saturation::new(ctx.clone(), &[]) {
            Ok(s) => s,
            Err(e) => return Outcome::disagree(format!("#{i}: saturation failed: {e}")),
        };
        if sat.rounds() > z.len() * z.len() {
            return Outcome::disagree(format!("#{i}: {} rounds exceed |Z|² = {}", sat.rounds(), z.len() * z.len()));
        }
        let mut yes = 0;
        let mut atoms: Vec<Assertion> = z.iter().flat_map(|t| z.iter().map(move |u| Assertion::eq(t.clone(), u.clone()))).collect();
        if mode == Mode::Extended {
            atoms.extend(z.iter().flat_map(|t| oracle.lists().iter().map(move |l| Assertion::member(t.clone(), l.clone()))));
        }
        for phi in &atoms {
            let engine = match eq_derives(&ctx, phi) {
                Ok(p) => p,
                Err(e) => return Outcome::disagree(format!("#{i}: eq_derives({phi}) failed: {e}")),
            };
            if let Some(p) = &engine {
                if let Err(e) = p.check(&ctx) {
                    return Outcome::disagree(format!("#{i}: invalid proof of {phi}: {e}"));
                }
                yes += 1;
            }
            match oracle.holds(phi) {
                Ok(b) if b == engine.is_some() => {}
                Ok(b) => return Outcome::disagree(format!("#{i}: {kp}: {phi}: engine {}, oracle {b}", engine.is_some())),
                Err(_) => return Outcome::inconclusive(),
            }
        }
        Outcome::agree().count("atoms", atoms.len()).count("derivable_atoms", yes).count("max_rounds", sat.rounds())
    });
    let mut r = SuiteReport::new("eq");
    let mut max_rounds = 0;
    for mut o in outcomes {
        if let Some(pos) = o.counters.iter().position(|(k, _)| k == "max_rounds") {
            max_rounds = max_rounds.max(o.counters.remove(pos).1);
        }
        r.absorb(o);
    }
    r.counters.insert("max_rounds".into(), max_rounds);
    r
}

/// Whenever the oracle finds a witness of dagsize at most `2M`, the engine
/// must answer YES; when the oracle exhausts its space, the engine must
/// answer NO. Engine answers are replayed from their certificates.
pub fn witness_agreement(cfg: &OracleConfig, count: usize, threads: usize) -> SuiteReport {
    let outcomes = par_map(count, threads, |i| {
        let mut rng = instance_rng(cfg.instance_seed, WITNESS, i);
        let (kp, goal, mode) = gen::witness_query(&mut rng, 7);
        let q = match WitnessQuery::new(&kp, &goal, mode) {
            Ok(q) => q,
            Err(e) => return Outcome::disagree(format!("#{i}: query rejected: {e}")),
        };
        let engine = match assert_derives(&kp, &goal, mode) {
            Ok(d) => d,
            Err(e) => return Outcome::disagree(format!("#{i}: assert_derives failed: {e}")),
        };
        if let Some(c) = &engine.certificate {
            if let Err(e) = c.replay(&q) {
                return Outcome::disagree(format!("#{i}: certificate does not replay: {e}"));
            }
        }
        let label = format!("#{i}: ({kp}) ⊢ {goal} [{mode:?}]");
        match brute_witness(&q, 2 * q.m_bound, cfg) {
            Ok(s) => match (&s.witness, engine.holds) {
                (Some(_), true) => Outcome::agree().count("oracle_found", 1),
                (None, false) => Outcome::agree().count("oracle_none", 1),
                (Some(mu), false) => Outcome::disagree(format!("{label}: oracle witness {mu}, engine NO")),
                (None, true) => Outcome::disagree(format!("{label}: engine YES, oracle exhausted without a witness")),
            },
            Err(Error::BoundExceeded(_)) => {
                Outcome::inconclusive().count(if engine.holds { "engine_yes_unconfirmed" } else { "engine_no_unconfirmed" }, 1)
            }
            Err(e) => Outcome::disagree(format!("{label}: oracle failed: {e}")),
        }
    });
    collect("witness", outcomes)
}

/// Normalize generated valid proofs and check the result.
pub fn normalization_suite(cfg: &OracleConfig, count: usize, threads: usize) -> SuiteReport {
    let outcomes = par_map(count, threads, |i| {
        let mut rng = instance_rng(cfg.instance_seed, NORMALIZE, i);
        let mode = if i % 2 == 0 { Mode::Core } else { Mode::Extended };
        let (ctx, p) = loop {
            let kp = gen::eq_context(&mut rng, mode, 8);
            let Ok(ctx) = EqContext::new(&kp, mode) else { continue };
            if let Some(p) = gen::valid_proof(&mut rng, &ctx) {
                break (ctx, p);
            }
        };
        if let Err(e) = p.check(&ctx) {
            return Outcome::disagree(format!("#{i}: generator produced an invalid proof: {e}"));
        }
        let was_normal = p.is_normal();
        let r = match normalize(&p, &ctx, DEFAULT_STEP_LIMIT) {
            Ok(r) => r,
            Err(e) => return Outcome::disagree(format!("#{i}: normalize failed: {e}")),
        };
        if !r.proof.conclusion.alpha_eq(&p.conclusion) {
            return Outcome::disagree(format!("#{i}: conclusion changed from {} to {}", p.conclusion, r.proof.conclusion));
        }
        if let Err(e) = r.proof.check(&ctx) {
            return Outcome::disagree(format!("#{i}: normalized proof is invalid: {e}"));
        }
        if !r.proof.is_normal() {
            return Outcome::disagree(format!("#{i}: result violates {:?}", r.proof.normality_violations()));
        }
        if let Some(s) = r.steps.iter().find(|s| !s.is_sym_phase() && !s.descends()) {
            return Outcome::disagree(format!("#{i}: {} does not decrease the measure ({:?} -> {:?})", s.rule, s.before, s.after));
        }
        Outcome::agree()
            .count("non_normal_inputs", usize::from(!was_normal))
            .count("rewrites", r.steps.len())
            .count("input_nodes", p.size())
    });
    collect("normalize", outcomes)
}

const ECHO_SPEC: &str = include_str!("../../examples/example1.spa");

pub fn echo_protocol() -> Protocol {
    speclang::parse(ECHO_SPEC).and_then(|s| s.protocol()).expect("bundled example parses")
}

/// Hand-built runs in the pattern of the oversized-substitution example:
/// the intruder makes b answer a message carrying a large term that matches
/// no protocol pattern.
pub fn oversized_runs(proto: &Protocol) -> Vec<Run> {
    let spec = speclang::parse(ECHO_SPEC).expect("bundled example parses");
    let pk = |s: &str| spec.parse_term(s, &[]).expect("name");
    let big = [
        Term::pair(Term::pair(pk("pk_i"), pk("pk_a")), Term::pair(pk("pk_i"), pk("pk_a"))),
        Term::enc(Term::pair(pk("pk_i"), Term::pair(pk("pk_a"), pk("pk_b"))), pk("pk_i")),
        Term::pair(Term::enc(pk("pk_a"), pk("pk_b")), Term::pair(pk("pk_i"), Term::pair(pk("pk_a"), pk("*")))),
    ];
    let mut out = Vec::new();
    for t in big {
        for with_a in [false, true] {
            let mut sessions = Vec::new();
            let eta2 = proto.role("eta2").expect("eta2");
            let eta1 = proto.role("eta1").expect("eta1");
            if with_a {
                sessions.push(crate::protocol::instantiate_session(eta1, &eta1.actor, &Default::default(), 1, 1).expect("eta1"));
            }
            let id = sessions.len() + 1;
            sessions.push(crate::protocol::instantiate_session(eta2, &eta2.actor, &Default::default(), 1, id).expect("eta2"));
            let interleaving: Vec<(usize, usize)> = (0..sessions.len()).map(|s| (s, 0)).collect();
            let mut sigma = crate::term::Subst::new();
            for v in sessions[id - 1].fv() {
                let val = if v.id().starts_with('x') { pk("pk_i") } else { t.clone() };
                sigma.insert(v, val);
            }
            out.push(Run { sessions, interleaving, sigma });
        }
    }
    out
}

/// Zap preservation on validated runs of the bundled two-role protocol:
/// hand-built oversized runs first, then random runs.
pub fn zap_suite(cfg: &OracleConfig, count: usize, threads: usize) -> SuiteReport {
    let proto = echo_protocol();
    let k0 = proto.initial_knowledge();
    let hand = oversized_runs(&proto);
    let outcomes = par_map(count, threads, |i| {
        let run = if i < hand.len() {
            hand[i].clone()
        } else {
            let mut rng = instance_rng(cfg.instance_seed, ZAP, i);
            match gen::random_run(&mut rng, &proto, i % 3 == 0, 50) {
                Some(r) => r,
                None => return Outcome::inconclusive(),
            }
        };
        let report = match validate_run(&run, &k0, &proto.intruder, proto.mode, ValidateOptions::default()) {
            Ok(r) if r.valid => r,
            Ok(r) => return Outcome::disagree(format!("#{i}: run does not validate: {}", r.failure.unwrap_or_default())),
            Err(e) => return Outcome::disagree(format!("#{i}: {e}")),
        };
        let z = match verify_zap_preservation(&run, &report, &k0, proto.mode) {
            Ok(z) => z,
            Err(e) => return Outcome::disagree(format!("#{i}: {e}")),
        };
        if !z.precondition {
            return Outcome::disagree(format!("#{i}: spare name occurs in a substitution range"));
        }
        if !z.preserved || !z.bounded {
            return Outcome::disagree(format!("#{i}: {}", z.failures.join("; ")));
        }
        Outcome::agree().count("hand_built", usize::from(i < hand.len())).count("shrunk", usize::from(z.sigma_small_size < z.sigma_size))
    });
    collect("zap", outcomes)
}

/// Every suite with `count` instances each.
pub fn run_all(cfg: &OracleConfig, count: usize, threads: usize) -> Vec<SuiteReport> {
    vec![
        dy_agreement(cfg, count, threads),
        eq_agreement(cfg, count, threads),
        witness_agreement(cfg, count, threads),
        normalization_suite(cfg, count, threads),
        zap_suite(cfg, count, threads),
    ]
}
