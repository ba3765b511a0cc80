//! Brute-force reference procedures. They share only the term and assertion
//! data types with the engine: closures, rule application and witness
//! enumeration are all computed here from scratch.

pub mod fuzz;
pub mod gen;

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;

use crate::assertion::{says_key, Assertion, KnowledgePair, Mode};
use crate::derive::WitnessQuery;
use crate::error::{Error, Result};
use crate::term::{Name, Position, Subst, Term, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OracleConfig {
    /// Fixpoint rounds allowed before giving up.
    pub max_proof_depth: usize,
    /// Largest subterm universe an oracle will close over.
    pub max_term_dagsize: usize,
    pub instance_seed: u64,
    pub instance_count: usize,
    /// Cap on enumerated witness candidates and joint assignments.
    pub max_assignments: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { max_proof_depth: 4096, max_term_dagsize: 256, instance_seed: 0, instance_count: 100, max_assignments: 4000 }
    }
}

impl OracleConfig {
    pub fn with_seed(seed: u64, count: usize) -> OracleConfig {
        OracleConfig { instance_seed: seed, instance_count: count, ..OracleConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_proof_depth == 0 || self.max_term_dagsize == 0 || self.max_assignments == 0 {
            return Err(Error::BoundExceeded("oracle bounds must be positive".into()));
        }
        Ok(())
    }
}

fn subterms_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for t in ts {
        t.collect_subterms(&mut out);
    }
    out
}

/// Everything derivable from `x` among `st(x ∪ extra)`, by applying the
/// pairing, encryption, projection and decryption rules until nothing new
/// appears.
pub fn brute_dy_closure(x: &BTreeSet<Term>, extra: &[Term], cfg: &OracleConfig) -> Result<BTreeSet<Term>> {
    let universe: Vec<Term> = subterms_of(x.iter().chain(extra)).into_iter().collect();
    if universe.len() > cfg.max_term_dagsize {
        return Err(Error::BoundExceeded(format!("{} subterms exceed {}", universe.len(), cfg.max_term_dagsize)));
    }
    let mut known: BTreeSet<Term> = x.clone();
    let mut rounds = 0;
    loop {
        let mut fresh = Vec::new();
        for u in &universe {
            if known.contains(u) {
                continue;
            }
            let built = u.children().is_some_and(|(a, b)| known.contains(a) && known.contains(b));
            let taken = known.iter().any(|v| {
                if v.is_pair() {
                    let (a, b) = v.children().expect("pair");
                    a == u || b == u
                } else if v.is_enc() {
                    let (a, k) = v.children().expect("enc");
                    a == u && k.inverse_key().is_some_and(|inv| known.contains(&inv))
                } else {
                    false
                }
            });
            if built || taken {
                fresh.push(u.clone());
            }
        }
        if fresh.is_empty() {
            return Ok(known);
        }
        rounds += 1;
        if rounds > cfg.max_proof_depth {
            return Err(Error::BoundExceeded(format!("dy closure needs more than {} rounds", cfg.max_proof_depth)));
        }
        known.extend(fresh);
    }
}

/// `X ⊢dy t` by exhaustive closure over `st(X ∪ {t})`.
pub fn brute_dy(x: &BTreeSet<Term>, t: &Term, cfg: &OracleConfig) -> Result<bool> {
    Ok(brute_dy_closure(x, std::slice::from_ref(t), cfg)?.contains(t))
}

/// `𝔸(K, t)` where `K` is a set of derivable terms closed enough to decide
/// every subterm of `t`.
fn abstractable_in(known: &BTreeSet<Term>, t: &Term) -> BTreeSet<Position> {
    let mut out = BTreeSet::new();
    let mut stack = vec![(t.clone(), Position::root())];
    while let Some((s, p)) = stack.pop() {
        if !known.contains(&s) {
            continue;
        }
        if let Some((a, b)) = s.children() {
            if known.contains(a) && known.contains(b) {
                stack.push((a.clone(), p.child(0)));
                stack.push((b.clone(), p.child(1)));
            }
        }
        out.insert(p);
    }
    out
}

/// The complete set of `⊢eq` consequences of a pure context over its
/// finite atom universe.
pub struct EqOracle {
    z: Vec<Term>,
    index: HashMap<Term, usize>,
    derivable: BTreeSet<Term>,
    lists: Vec<Vec<Name>>,
    eq: Vec<Vec<bool>>,
    mem: Vec<Vec<bool>>,
    others: Vec<Assertion>,
    terms: BTreeSet<Term>,
    pub rounds: usize,
    cfg: OracleConfig,
}

fn intersect(a: &[Name], b: &[Name]) -> Vec<Name> {
    a.iter().filter(|n| b.contains(n)).cloned().collect()
}

impl EqOracle {
    /// Close `(T; E)` over `Z = st(T) ∪ st(E) ∪ st(goals)`.
    pub fn new(te: &KnowledgePair, goals: &[Assertion], cfg: &OracleConfig) -> Result<EqOracle> {
        let mut zs = subterms_of(&te.terms);
        for a in te.assertions.iter().chain(goals) {
            zs.extend(a.subterms());
        }
        if zs.len() > cfg.max_term_dagsize {
            return Err(Error::BoundExceeded(format!("|Z| = {} exceeds {}", zs.len(), cfg.max_term_dagsize)));
        }
        let z: Vec<Term> = zs.iter().cloned().collect();
        let index: HashMap<Term, usize> = z.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let derivable = brute_dy_closure(&te.terms, &z, cfg)?;

        let mut ls: BTreeSet<Vec<Name>> = BTreeSet::new();
        for a in te.assertions.iter().chain(goals) {
            ls.extend(a.lists());
        }
        for t in &z {
            if let Some(n) = t.as_name() {
                ls.insert(vec![n.clone()]);
            }
        }
        loop {
            let cur: Vec<Vec<Name>> = ls.iter().cloned().collect();
            let before = ls.len();
            for a in &cur {
                for b in &cur {
                    ls.insert(intersect(a, b));
                }
            }
            if ls.len() == before {
                break;
            }
        }
        let lists: Vec<Vec<Name>> = ls.into_iter().collect();

        let n = z.len();
        let mut o = EqOracle {
            eq: vec![vec![false; n]; n],
            mem: vec![vec![false; lists.len()]; n],
            z,
            index,
            derivable,
            lists,
            others: Vec::new(),
            terms: te.terms.clone(),
            rounds: 0,
            cfg: *cfg,
        };
        for a in &te.assertions {
            match a {
                Assertion::Eq(t, u) => {
                    let (i, j) = (o.index[t], o.index[u]);
                    o.eq[i][j] = true;
                }
                Assertion::Member(t, l) => {
                    let (i, k) = (o.index[t], o.list(l).expect("list of E"));
                    o.mem[i][k] = true;
                }
                other => o.others.push(other.alpha_canonical()),
            }
        }
        for i in 0..n {
            if o.derivable.contains(&o.z[i]) {
                o.eq[i][i] = true;
            }
        }
        o.close()?;
        Ok(o)
    }

    fn list(&self, l: &[Name]) -> Option<usize> {
        self.lists.iter().position(|k| k == l)
    }

    /// One round derives everything that follows from the previous round's
    /// facts by a single rule.
    #[allow(clippy::needless_range_loop)]
    fn close(&mut self) -> Result<()> {
        let n = self.z.len();
        let nl = self.lists.len();
        loop {
            let mut eq = self.eq.clone();
            let mut mem = self.mem.clone();
            for i in 0..n {
                for j in 0..n {
                    if !self.eq[i][j] {
                        continue;
                    }
                    // sym, trans
                    eq[j][i] = true;
                    for k in 0..n {
                        if self.eq[j][k] {
                            eq[i][k] = true;
                        }
                    }
                    // proj
                    let (ti, tj) = (&self.z[i], &self.z[j]);
                    if ti.same_constructor(tj) {
                        let (a0, a1) = ti.children().expect("compound");
                        let (b0, b1) = tj.children().expect("compound");
                        if [a0, a1, b0, b1].iter().all(|t| self.derivable.contains(*t)) {
                            eq[self.index[a0]][self.index[b0]] = true;
                            eq[self.index[a1]][self.index[b1]] = true;
                        }
                    }
                    // wk
                    if let Some(name) = tj.as_name() {
                        for (k, l) in self.lists.iter().enumerate() {
                            if l.contains(name) {
                                mem[i][k] = true;
                            }
                        }
                    }
                    // subst
                    for k in 0..nl {
                        if self.mem[i][k] {
                            mem[j][k] = true;
                        }
                    }
                }
            }
            // cons
            for p in 0..n {
                for q in 0..n {
                    let (tp, tq) = (&self.z[p], &self.z[q]);
                    if !tp.same_constructor(tq) {
                        continue;
                    }
                    let (a0, a1) = tp.children().expect("compound");
                    let (b0, b1) = tq.children().expect("compound");
                    if self.eq[self.index[a0]][self.index[b0]] && self.eq[self.index[a1]][self.index[b1]] {
                        eq[p][q] = true;
                    }
                }
            }
            for i in 0..n {
                for k in 0..nl {
                    if !self.mem[i][k] {
                        continue;
                    }
                    // prom
                    if let [name] = self.lists[k].as_slice() {
                        if let Some(&j) = self.index.get(&Term::name(name.clone())) {
                            eq[i][j] = true;
                        }
                    }
                    // int
                    for k2 in 0..nl {
                        if self.mem[i][k2] {
                            let l = intersect(&self.lists[k], &self.lists[k2]);
                            let target = self.list(&l).expect("lists are closed under intersection");
                            mem[i][target] = true;
                        }
                    }
                }
            }
            if eq == self.eq && mem == self.mem {
                return Ok(());
            }
            self.rounds += 1;
            if self.rounds > self.cfg.max_proof_depth {
                return Err(Error::BoundExceeded(format!("eq closure needs more than {} rounds", self.cfg.max_proof_depth)));
            }
            self.eq = eq;
            self.mem = mem;
        }
    }

    pub fn universe(&self) -> &[Term] {
        &self.z
    }

    pub fn lists(&self) -> &[Vec<Name>] {
        &self.lists
    }

    /// Does `φ` hold? Atoms outside the universe are rejected.
    pub fn holds(&self, phi: &Assertion) -> Result<bool> {
        let outside = || Error::BoundExceeded(format!("{phi} is outside the oracle universe"));
        match phi {
            Assertion::Eq(t, u) => {
                let (i, j) = (self.index.get(t).ok_or_else(outside)?, self.index.get(u).ok_or_else(outside)?);
                Ok(self.eq[*i][*j])
            }
            Assertion::Member(t, l) => {
                let i = self.index.get(t).ok_or_else(outside)?;
                let k = self.list(l).ok_or_else(outside)?;
                Ok(self.mem[*i][k])
            }
            Assertion::Pred(..) => Ok(self.others.contains(&phi.alpha_canonical())),
            Assertion::Says(subj, body) => {
                if self.others.contains(&phi.alpha_canonical()) {
                    return Ok(true);
                }
                let Some(key) = says_key(subj) else { return Ok(false) };
                if !body.is_atom() || !brute_dy(&self.terms, &key, &self.cfg)? {
                    return Ok(false);
                }
                self.holds(body)
            }
            _ => Err(Error::MalformedAtom(phi.to_string())),
        }
    }
}

/// `(T; E) ⊢eq φ` by exhaustive rule application over the atom universe.
pub fn brute_eq(te: &KnowledgePair, phi: &Assertion, cfg: &OracleConfig) -> Result<bool> {
    EqOracle::new(te, std::slice::from_ref(phi), cfg)?.holds(phi)
}

/// Outcome of a witness enumeration.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessSearch {
    pub witness: Option<Subst>,
    /// Largest candidate dagsize enumerated completely.
    pub complete_up_to: usize,
    pub assignments: usize,
}

/// Derivable terms by dagsize level: the analysis closure of `T` closed
/// under pairing and encryption.
struct Pool {
    base: BTreeSet<Term>,
    terms: Vec<Term>,
    level: usize,
}

impl Pool {
    fn new(t: &BTreeSet<Term>, cfg: &OracleConfig) -> Result<Pool> {
        let st: Vec<Term> = subterms_of(t).into_iter().collect();
        let base = brute_dy_closure(t, &st, cfg)?;
        let mut terms: Vec<Term> = base.iter().filter(|s| s.dagsize() <= 1).cloned().collect();
        terms.sort_by(|a, b| a.size_then_text(b));
        Ok(Pool { base, terms, level: 1 })
    }

    /// Add every derivable term of dagsize `level + 1`. Fails when the pool
    /// would outgrow `limit`.
    fn grow(&mut self, limit: usize) -> Result<()> {
        let d = self.level + 1;
        let mut fresh: BTreeSet<Term> = self.base.iter().filter(|s| s.dagsize() == d).cloned().collect();
        for a in &self.terms {
            for b in &self.terms {
                for c in [Term::pair(a.clone(), b.clone()), Term::enc(a.clone(), b.clone())] {
                    if c.dagsize() == d {
                        fresh.insert(c);
                    }
                }
            }
            if self.terms.len() + fresh.len() > limit {
                return Err(Error::BoundExceeded(format!("more than {limit} candidates of dagsize {d}")));
            }
        }
        let mut fresh: Vec<Term> = fresh.into_iter().collect();
        fresh.sort_by(|a, b| a.size_then_text(b));
        self.terms.extend(fresh);
        self.level = d;
        Ok(())
    }
}

/// Does `goal` follow from proved atoms by introduction rules, with the
/// witnesses of `mu`?
fn intro_holds(
    goal: &Assertion,
    mu: &Subst,
    t: &BTreeSet<Term>,
    atom: &mut dyn FnMut(&Assertion) -> Result<bool>,
    cfg: &OracleConfig,
) -> Result<bool> {
    match goal {
        Assertion::And(a, b) => Ok(intro_holds(a, mu, t, atom, cfg)? && intro_holds(b, mu, t, atom, cfg)?),
        Assertion::Exists(_, body) => intro_holds(body, mu, t, atom, cfg),
        Assertion::Says(subj, body) => {
            let inst = goal.apply(mu);
            if atom(&inst)? {
                return Ok(true);
            }
            match says_key(subj) {
                Some(k) if brute_dy(t, &k, cfg)? => intro_holds(body, mu, t, atom, cfg),
                _ => Ok(false),
            }
        }
        other => atom(&other.apply(mu)),
    }
}

/// Enumerate joint assignments of the goal's bound variables to derivable
/// terms of dagsize at most `size_cap`, smallest first, and return the first
/// one satisfying conditions [1]–[3] (and [4] in extended mode).
///
/// `Err(BoundExceeded)` means the enumeration was cut short without a
/// witness, so the answer is unknown.
pub fn brute_witness(q: &WitnessQuery, size_cap: usize, cfg: &OracleConfig) -> Result<WitnessSearch> {
    let t = &q.kernel.terms;
    let bv: Vec<Variable> = q.goal.bv_ordered();

    // Condition [2] does not depend on the assignment.
    let mut tb = t.clone();
    tb.extend(bv.iter().cloned().map(Term::var));
    let tops = q.goal.top_terms();
    let known = brute_dy_closure(&tb, &tops, cfg)?;
    for x in &bv {
        let xt = Term::var(x.clone());
        for r in &tops {
            if !r.pos_of(&xt).is_subset(&abstractable_in(&known, r)) {
                return Ok(WitnessSearch { witness: None, complete_up_to: size_cap, assignments: 0 });
            }
        }
    }

    let mut memo: HashMap<Assertion, bool> = HashMap::new();
    let te = &q.kernel;
    let mut atom = |a: &Assertion| -> Result<bool> {
        if let Some(&b) = memo.get(a) {
            return Ok(b);
        }
        let b = if q.mode == Mode::Core && !matches!(a, Assertion::Eq(..)) { false } else { brute_eq(te, a, cfg)? };
        memo.insert(a.clone(), b);
        Ok(b)
    };

    if bv.is_empty() {
        let ok = intro_holds(&q.goal, &Subst::new(), t, &mut atom, cfg)?;
        return Ok(WitnessSearch { witness: ok.then(Subst::new), complete_up_to: size_cap, assignments: 1 });
    }

    // Level by level: at dagsize d, try the assignments whose largest value
    // has dagsize exactly d, smallest total first.
    let mut pool = Pool::new(t, cfg)?;
    let k = bv.len();
    let mut tried = 0;
    loop {
        let d = pool.level;
        let n = pool.terms.len();
        let mut batch: Vec<Vec<usize>> = Vec::new();
        let mut idx = vec![0usize; k];
        if n > 0 {
            'all: loop {
                if idx.iter().any(|&i| pool.terms[i].dagsize() == d) {
                    batch.push(idx.clone());
                    if tried + batch.len() > cfg.max_assignments {
                        return Err(Error::BoundExceeded(format!(
                            "more than {} assignments; complete up to dagsize {}",
                            cfg.max_assignments,
                            d - 1
                        )));
                    }
                }
                for p in (0..k).rev() {
                    idx[p] += 1;
                    if idx[p] < n {
                        continue 'all;
                    }
                    idx[p] = 0;
                }
                break;
            }
        }
        batch.sort_by_key(|ix| ix.iter().map(|&i| pool.terms[i].dagsize()).sum::<usize>());
        for ix in &batch {
            tried += 1;
            let mu: Subst = bv.iter().cloned().zip(ix.iter().map(|&i| pool.terms[i].clone())).collect();
            if intro_holds(&q.goal, &mu, t, &mut atom, cfg)? {
                return Ok(WitnessSearch { witness: Some(mu), complete_up_to: d, assignments: tried });
            }
        }
        if d >= size_cap {
            return Ok(WitnessSearch { witness: None, complete_up_to: d, assignments: tried });
        }
        pool.grow(cfg.max_assignments)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Term {
        Term::name(Name::plain(s))
    }

    #[test]
    fn dy_reflexive_and_decrypt() {
        let cfg = OracleConfig::default();
        let k = Name::key("k", "k_inv");
        let m = n("m");
        let c = Term::enc(m.clone(), Term::name(k.clone()));
        let x: BTreeSet<Term> = [c.clone()].into_iter().collect();
        assert!(brute_dy(&x, &c, &cfg).unwrap());
        assert!(!brute_dy(&x, &m, &cfg).unwrap());
        let x2: BTreeSet<Term> = [c, Term::name(k.inverse().unwrap())].into_iter().collect();
        assert!(brute_dy(&x2, &m, &cfg).unwrap());
    }

    #[test]
    fn eq_reflexive_underivable() {
        let cfg = OracleConfig::default();
        let te = KnowledgePair::new([n("a")], []);
        assert!(!brute_eq(&te, &Assertion::eq(n("b"), n("b")), &cfg).unwrap());
        assert!(brute_eq(&te, &Assertion::eq(n("a"), n("a")), &cfg).unwrap());
    }

    #[test]
    fn tiny_bound_is_reported() {
        let cfg = OracleConfig { max_term_dagsize: 1, ..OracleConfig::default() };
        let x: BTreeSet<Term> = [Term::pair(n("a"), n("b"))].into_iter().collect();
        assert!(matches!(brute_dy(&x, &n("a"), &cfg), Err(Error::BoundExceeded(_))));
    }
}
