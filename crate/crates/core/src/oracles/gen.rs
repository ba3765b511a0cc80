//! Seeded instance generators. Every instance is a pure function of the
//! seed, the suite and its index, so suites can be split across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assertion::{canonical_list, Assertion, KnowledgePair, Mode};
use crate::consistency::satisfies;
use crate::derive::WitnessQuery;
use crate::dy::{DyProof, DyRule};
use crate::eq::{EqContext, EqProof, EqRule};
use crate::protocol::{instantiate_session, validate_run, Protocol, Role, Run, ValidateOptions};
use crate::term::{Name, Subst, Term, Variable};

pub fn instance_rng(seed: u64, suite: u64, index: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ suite.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(index as u64);
    r
}

/// Names used by the generators.
pub struct Vocabulary {
    pub plain: Vec<Term>,
    pub key: Term,
    pub key_inv: Term,
    pub shared: Term,
    pub agent_pk: Term,
    pub agent_sk: Term,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        let k = Name::key("k", "k_inv");
        let agent = Name::agent("p", "pk_p", "sk_p");
        Vocabulary {
            plain: ["a", "b", "c"].iter().map(|s| Term::name(Name::plain(s))).collect(),
            key_inv: Term::name(k.inverse().expect("declared key")),
            key: Term::name(k),
            shared: Term::name(Name::symmetric_key("s")),
            agent_pk: Term::name(agent.public_key().expect("agent")),
            agent_sk: Term::name(agent.secret_key().expect("agent")),
        }
    }

    fn atoms(&self) -> Vec<Term> {
        let mut v = self.plain.clone();
        v.extend([self.key.clone(), self.key_inv.clone(), self.shared.clone()]);
        v
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new()
    }
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs.choose(rng).expect("non-empty choice").clone()
}

/// A random term of depth at most `depth` over `leaves`.
pub fn random_term(rng: &mut ChaCha8Rng, leaves: &[Term], depth: usize) -> Term {
    if depth == 0 || rng.gen_bool(0.4) {
        return pick(rng, leaves);
    }
    let a = random_term(rng, leaves, depth - 1);
    if rng.gen_bool(0.5) {
        Term::pair(a, random_term(rng, leaves, depth - 1))
    } else {
        let k = if rng.gen_bool(0.7) { pick(rng, leaves) } else { random_term(rng, leaves, depth - 1) };
        Term::enc(a, k)
    }
}

fn st_size<'a>(ts: impl IntoIterator<Item = &'a Term>) -> usize {
    let mut out = BTreeSet::new();
    for t in ts {
        t.collect_subterms(&mut out);
    }
    out.len()
}

/// `(X, t)` with `|st(X ∪ {t})| ≤ max_st`.
pub fn dy_instance(rng: &mut ChaCha8Rng, max_st: usize) -> (BTreeSet<Term>, Term) {
    let voc = Vocabulary::new();
    let leaves = voc.atoms();
    loop {
        let n = rng.gen_range(1..=4);
        let x: BTreeSet<Term> = (0..n).map(|_| random_term(rng, &leaves, 3)).collect();
        let subs: Vec<Term> = x.iter().flat_map(|t| t.subterms()).collect();
        let t = match rng.gen_range(0..3) {
            0 => pick(rng, &subs),
            1 => {
                let (a, b) = (pick(rng, &subs), pick(rng, &subs));
                if rng.gen_bool(0.5) {
                    Term::pair(a, b)
                } else {
                    Term::enc(a, b)
                }
            }
            _ => random_term(rng, &leaves, 2),
        };
        if st_size(x.iter().chain([&t])) <= max_st {
            return (x, t);
        }
    }
}

/// Replace subterms of the ground term `g` by variables with the same value.
fn generalize(rng: &mut ChaCha8Rng, g: &Term, lambda: &Subst) -> Term {
    let vars: Vec<Term> = lambda.iter().filter(|(_, t)| *t == g).map(|(v, _)| Term::var(v.clone())).collect();
    if !vars.is_empty() && rng.gen_bool(0.6) {
        return pick(rng, &vars);
    }
    match g.children() {
        Some((a, b)) => g.with_children(generalize(rng, a, lambda), generalize(rng, b, lambda)),
        None => g.clone(),
    }
}

/// A ground assignment for `vars` and atoms true under it.
fn satisfied_atoms(rng: &mut ChaCha8Rng, vars: &[Variable], mode: Mode, count: usize) -> (Subst, Vec<Assertion>) {
    let voc = Vocabulary::new();
    let leaves: Vec<Term> = voc.plain.iter().cloned().chain([voc.key.clone()]).collect();
    let mut lambda = Subst::new();
    for v in vars {
        let depth = if mode == Mode::Extended && rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..=1) };
        lambda.insert(v.clone(), random_term(rng, &leaves, depth));
    }
    let mut atoms = Vec::new();
    for _ in 0..count {
        let kind = rng.gen_range(0..if mode == Mode::Extended { 3 } else { 2 });
        match kind {
            0 => {
                let v = pick(rng, vars);
                let g = lambda.get(&v).expect("assigned").clone();
                atoms.push(Assertion::eq(Term::var(v), generalize(rng, &g, &lambda)));
            }
            1 => {
                let mut g = random_term(rng, &leaves, 1);
                if rng.gen_bool(0.5) {
                    let v = pick(rng, vars);
                    g = Term::enc(lambda.get(&v).expect("assigned").clone(), pick(rng, &leaves));
                }
                atoms.push(Assertion::eq(generalize(rng, &g, &lambda), generalize(rng, &g, &lambda)));
            }
            _ => {
                let v = pick(rng, vars);
                let val = lambda.get(&v).expect("assigned").clone();
                let Some(n) = val.as_name() else { continue };
                let mut l = vec![n.clone()];
                for p in &voc.plain {
                    if rng.gen_bool(0.4) {
                        l.push(p.as_name().expect("name").clone());
                    }
                }
                atoms.push(Assertion::member(Term::var(v), canonical_list(l)));
            }
        }
    }
    (lambda, atoms)
}

/// A random pure consistent context with `|Z| ≤ max_z`.
pub fn eq_context(rng: &mut ChaCha8Rng, mode: Mode, max_z: usize) -> KnowledgePair {
    let voc = Vocabulary::new();
    let vars: Vec<Variable> = ["x", "y", "z"].iter().map(|s| Variable::inst(s)).collect();
    loop {
        let nv = rng.gen_range(1..=vars.len());
        let count = rng.gen_range(1..=3);
        let (lambda, atoms) = satisfied_atoms(rng, &vars[..nv], mode, count);
        debug_assert!(satisfies(&lambda, &atoms));
        let mut pool: Vec<Term> = voc.plain.iter().cloned().chain([voc.key.clone(), voc.key_inv.clone()]).collect();
        for a in &atoms {
            pool.extend(a.subterms());
        }
        pool.sort();
        pool.dedup();
        let n = rng.gen_range(1..=3);
        let terms: Vec<Term> = (0..n).map(|_| pick(rng, &pool)).collect();
        let kp = KnowledgePair::new(terms, atoms);
        if kp.subterms().len() <= max_z {
            return kp;
        }
    }
}

/// A sanitized derivability query with `|st(S) ∪ st(A ∪ {α})| ≤ max_st`.
pub fn witness_query(rng: &mut ChaCha8Rng, max_st: usize) -> (KnowledgePair, Assertion, Mode) {
    let voc = Vocabulary::new();
    let vars: Vec<Variable> = ["x", "y"].iter().map(|s| Variable::inst(s)).collect();
    let z = Variable::quant("z");
    let w = Variable::quant("w");
    loop {
        let mode = if rng.gen_bool(0.3) { Mode::Extended } else { Mode::Core };
        let nv = rng.gen_range(1..=2);
        let count = rng.gen_range(0..=2);
        let (lambda, atoms) = satisfied_atoms(rng, &vars[..nv], mode, count);
        let mut s: BTreeSet<Term> = atoms.iter().flat_map(|a| a.pubs()).collect();
        for t in voc.plain.iter().chain([&voc.key, &voc.key_inv]) {
            if rng.gen_bool(0.3) {
                s.insert(t.clone());
            }
        }
        if rng.gen_bool(0.3) {
            let extra = random_term(rng, &voc.plain, 1);
            s.insert(Term::enc(extra, voc.key.clone()));
        }
        if s.is_empty() {
            continue;
        }
        // Source equality to abstract from.
        let eqs: Vec<(Term, Term)> = atoms
            .iter()
            .filter_map(|a| match a {
                Assertion::Eq(t, u) => Some((t.clone(), u.clone())),
                _ => None,
            })
            .collect();
        let s_list: Vec<Term> = s.iter().cloned().collect();
        let (t, mut u) = if !eqs.is_empty() && rng.gen_bool(0.6) {
            let (t, u) = pick(rng, &eqs);
            if rng.gen_bool(0.5) {
                (u, t)
            } else {
                (t, u)
            }
        } else {
            let r = pick(rng, &s_list);
            (r.clone(), r)
        };
        if rng.gen_bool(0.2) {
            u = random_term(rng, &voc.plain, 1);
        }
        let subs: Vec<Term> = t.subterms().into_iter().collect();
        let r1 = pick(rng, &subs);
        let body_t = replace_all(&t, &r1, &Term::var(z.clone()));
        let two = rng.gen_bool(0.35);
        let (body_t, r2) = if two {
            let subs2: Vec<Term> = body_t.subterms().into_iter().filter(|x| x.as_var() != Some(&z)).collect();
            match subs2.choose(rng) {
                Some(r2) => (replace_all(&body_t, r2, &Term::var(w.clone())), Some(r2.clone())),
                None => (body_t, None),
            }
        } else {
            (body_t, None)
        };
        let mut body = Assertion::eq(body_t, u);
        match rng.gen_range(0..4) {
            0 => body = Assertion::and(body, Assertion::eq(Term::var(z.clone()), r1.clone())),
            1 if mode == Mode::Extended => {
                let mut l: Vec<Name> = voc.plain.iter().filter(|_| rng.gen_bool(0.5)).map(|p| p.as_name().unwrap().clone()).collect();
                if let Some(n) = lambda.apply(&r1).as_name() {
                    if rng.gen_bool(0.7) {
                        l.push(n.clone());
                    }
                }
                if !l.is_empty() {
                    body = Assertion::and(body, Assertion::member(Term::var(z.clone()), canonical_list(l)));
                }
            }
            _ => {}
        }
        let mut goal = body;
        if r2.is_some() && goal.vars().contains(&w) {
            goal = Assertion::exists(w.clone(), goal);
        }
        if goal.vars().contains(&z) {
            goal = Assertion::exists(z.clone(), goal);
        }
        if mode == Mode::Extended && rng.gen_bool(0.2) {
            let subj = voc.agent_pk.clone();
            goal = Assertion::says(subj, goal);
            if rng.gen_bool(0.5) {
                s.insert(voc.agent_sk.clone());
            }
        }
        let kp = KnowledgePair::new(s, atoms);
        match WitnessQuery::new(&kp, &goal, mode) {
            Ok(q) if q.m_bound <= max_st && !q.bound_vars.is_empty() => return (kp, goal, mode),
            _ => continue,
        }
    }
}

/// A random valid `⊢eq` proof over `ctx`, usually far from normal.
pub fn valid_proof(rng: &mut ChaCha8Rng, ctx: &EqContext) -> Option<Arc<EqProof>> {
    let an = ctx.analysis();
    let mut pool: Vec<Arc<EqProof>> = Vec::new();
    for a in &ctx.atoms {
        pool.push(EqProof::ax(a.clone()));
    }
    let z = ctx.knowledge().subterms();
    for t in &z {
        if let Some(d) = an.synthesize(t) {
            pool.push(EqProof::eq(d.clone()));
            if rng.gen_bool(0.5) {
                // Detour through a pair.
                let p = DyProof::node(DyRule::Pair, vec![d.clone(), d.clone()], Term::pair(t.clone(), t.clone()));
                pool.push(EqProof::eq(DyProof::node(DyRule::Fst, vec![p], t.clone())));
            }
        }
    }
    if pool.is_empty() {
        return None;
    }
    let steps = rng.gen_range(2..=14);
    for _ in 0..steps {
        let p = pick(rng, &pool);
        let next = match rng.gen_range(0..8) {
            0 => eq_of(&p).map(|_| EqProof::sym(p.clone())),
            1 | 2 => {
                let Some((_, right)) = eq_of(&p) else { continue };
                let next: Vec<Arc<EqProof>> = pool.iter().filter(|q| eq_of(q).is_some_and(|(l, _)| l == right)).cloned().collect();
                if next.is_empty() {
                    continue;
                }
                let mut chain = vec![p.clone(), pick(rng, &next)];
                if rng.gen_bool(0.3) {
                    let end = eq_of(&chain[1]).expect("equality").1;
                    if let Some(d) = an.synthesize(&end) {
                        chain.push(EqProof::eq(d));
                    }
                }
                Some(EqProof::trans(chain))
            }
            3 | 4 => {
                let q = pick(rng, &pool);
                if eq_of(&p).is_none() || eq_of(&q).is_none() {
                    continue;
                }
                let any = z.iter().next().expect("non-empty universe").clone();
                let shape = if rng.gen_bool(0.5) { Term::pair(any.clone(), any) } else { Term::enc(any.clone(), any) };
                let c = EqProof::cons(&shape, p.clone(), q);
                if rng.gen_bool(0.6) {
                    EqProof::proj(rng.gen_range(0..2), c.clone(), an).or(Some(c))
                } else {
                    Some(c)
                }
            }
            5 => EqProof::proj(rng.gen_range(0..2), p.clone(), an),
            6 => member_step(rng, &p, &pool),
            _ => match &p.conclusion {
                Assertion::Member(t, l) if l.len() == 1 => {
                    let c = Assertion::eq(t.clone(), Term::name(l[0].clone()));
                    Some(EqProof::node(EqRule::Prom, c, vec![p.clone()], vec![]))
                }
                _ => eq_of(&p).map(|_| EqProof::sym(EqProof::sym(p.clone()))),
            },
        };
        if let Some(n) = next {
            if n.check(ctx).is_ok() && n.size() <= 200 {
                pool.push(n);
            }
        }
    }
    let best = pool.iter().map(|p| p.size()).max()?;
    let big: Vec<Arc<EqProof>> = pool.iter().filter(|p| p.size() * 2 >= best).cloned().collect();
    Some(pick(rng, &big))
}

fn replace_all(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    match t.children() {
        Some((a, b)) => t.with_children(replace_all(a, from, to), replace_all(b, from, to)),
        None => t.clone(),
    }
}

fn eq_of(p: &EqProof) -> Option<(Term, Term)> {
    match &p.conclusion {
        Assertion::Eq(t, u) => Some((t.clone(), u.clone())),
        _ => None,
    }
}

/// `wk`, `int` or `subst` on top of `p`, when the shapes allow it.
fn member_step(rng: &mut ChaCha8Rng, p: &Arc<EqProof>, pool: &[Arc<EqProof>]) -> Option<Arc<EqProof>> {
    let lists: Vec<Vec<Name>> = pool.iter().flat_map(|q| q.lists()).collect();
    match &p.conclusion {
        Assertion::Eq(t, n) => {
            let name = n.as_name()?;
            let mut l = vec![name.clone()];
            if let Some(extra) = lists.choose(rng) {
                l.extend(extra.iter().cloned());
            }
            let c = Assertion::member(t.clone(), canonical_list(l));
            Some(EqProof::node(EqRule::Wk, c, vec![p.clone()], vec![]))
        }
        Assertion::Member(t, l) => {
            if rng.gen_bool(0.5) {
                let others: Vec<Arc<EqProof>> =
                    pool.iter().filter(|q| matches!(&q.conclusion, Assertion::Member(s, _) if s == t)).cloned().collect();
                let q = others.choose(rng)?.clone();
                let Assertion::Member(_, l2) = &q.conclusion else { return None };
                let inter: Vec<Name> = l.iter().filter(|n| l2.contains(n)).cloned().collect();
                if inter.is_empty() {
                    return None;
                }
                let c = Assertion::member(t.clone(), inter);
                Some(EqProof::node(EqRule::Int, c, vec![p.clone(), q], vec![]))
            } else {
                let eqs: Vec<Arc<EqProof>> = pool.iter().filter(|q| eq_of(q).is_some_and(|(a, _)| a == *t)).cloned().collect();
                let e = eqs.choose(rng)?.clone();
                let (_, u) = eq_of(&e)?;
                let c = Assertion::member(u, l.clone());
                Some(EqProof::node(EqRule::Subst, c, vec![p.clone(), e], vec![]))
            }
        }
        _ => None,
    }
}

/// Agent-variable bindings a role can start with.
pub fn role_bindings(role: &Role, agents: &[Name]) -> Vec<BTreeMap<Variable, Name>> {
    let mut out = vec![BTreeMap::new()];
    for v in &role.agent_vars {
        let dom = role.domains.get(v).cloned().unwrap_or_else(|| agents.to_vec());
        out = out
            .iter()
            .flat_map(|b| {
                dom.iter().map(move |n| {
                    let mut b2 = b.clone();
                    b2.insert(v.clone(), n.clone());
                    b2
                })
            })
            .collect();
    }
    out
}

/// A validated run of `proto` with random sessions and random intruder
/// choices. With `oversized`, values are deep compositions of what the
/// intruder knows. Gives up after `attempts` tries.
pub fn random_run(rng: &mut ChaCha8Rng, proto: &Protocol, oversized: bool, attempts: usize) -> Option<Run> {
    let k0 = proto.initial_knowledge();
    let spare = Term::name(Name::spare());
    for _ in 0..attempts {
        let n = rng.gen_range(1..=3);
        let mut sessions = Vec::new();
        for id in 1..=n {
            let role = pick(rng, &proto.roles);
            if role.steps.is_empty() {
                continue;
            }
            let mut binding = pick(rng, &role_bindings(&role, &proto.agents));
            let len = rng.gen_range(1..=role.steps.len());
            let needed = role.agent_vars_in_prefix(len);
            binding.retain(|v, _| needed.contains(v));
            let Ok(s) = instantiate_session(&role, &role.actor, &binding, len, id) else { continue };
            sessions.push(s);
        }
        if sessions.is_empty() {
            continue;
        }
        let mut left: Vec<usize> = sessions.iter().map(|s| s.steps.len()).collect();
        let mut next = vec![0usize; sessions.len()];
        let mut interleaving = Vec::new();
        while left.iter().any(|&l| l > 0) {
            let live: Vec<usize> = (0..sessions.len()).filter(|&i| left[i] > 0).collect();
            let s = pick(rng, &live);
            interleaving.push((s, next[s]));
            next[s] += 1;
            left[s] -= 1;
        }
        // Intruder knowledge grows with every send; values for the
        // variables of each receive are drawn from what it knows then.
        let mut known: BTreeSet<Term> = k0.get(&proto.intruder).terms.clone();
        known.remove(&spare);
        let mut sigma = Subst::new();
        for &(s, j) in &interleaving {
            let st = &sessions[s].steps[j];
            let base: Vec<Term> = known.iter().cloned().collect();
            for v in st.recv.fv() {
                if sigma.contains(&v) {
                    continue;
                }
                let depth = if oversized { rng.gen_range(2..=3) } else { rng.gen_range(0..=1) };
                sigma.insert(v, random_term(rng, &base, depth));
            }
            for t in st.send.apply(&sigma).pubs() {
                known.insert(t);
            }
        }
        let run = Run { sessions, interleaving, sigma };
        if let Ok(r) = validate_run(&run, &k0, &proto.intruder, proto.mode, ValidateOptions::default()) {
            if r.valid {
                return Some(run);
            }
        }
    }
    None
}
