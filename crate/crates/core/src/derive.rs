//! Assertion derivability `(S;A) ⊢a α`: kernel reduction, bounded witness
//! search, abstractability checks and intro-rule reconstruction.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::Serialize;

use crate::assertion::{abstractable_positions_term_with, abstractable_positions_with, atoms, says_key, Assertion, KnowledgePair, Mode};
use crate::consistency::consistent;
use crate::dy::{Analysis, DyProof};
use crate::eq::{normalize, EqContext, EqProof, Saturation, DEFAULT_STEP_LIMIT};
use crate::error::{Error, Result};
use crate::term::{Name, Position, Subst, Term, Variable};

/// Default cap on resolved witness candidates examined per query.
pub const DEFAULT_CANDIDATE_LIMIT: usize = 200_000;

/// A derivability question in kernel form.
#[derive(Clone, Debug)]
pub struct WitnessQuery {
    pub context: KnowledgePair,
    pub goal: Assertion,
    pub kernel: KnowledgePair,
    pub bound_vars: Vec<Variable>,
    /// `|st(S) ∪ st(A ∪ {α})|`.
    pub m_bound: usize,
    pub mode: Mode,
}

impl WitnessQuery {
    pub fn new(context: &KnowledgePair, goal: &Assertion, mode: Mode) -> Result<WitnessQuery> {
        context.check_mode(mode)?;
        goal.check_mode(mode)?;
        if let Some(e) = context.sanitization_error() {
            return Err(Error::NotSanitized(e));
        }
        let bv = goal.bv_ordered();
        let ctx_vars = context.vars();
        if let Some(v) = bv.iter().find(|v| ctx_vars.contains(v)) {
            return Err(Error::VariableCapture(format!("{v} is bound in the goal and occurs in the context")));
        }
        if let Some(v) = goal.fv().into_iter().find(|v| bv.contains(v)) {
            return Err(Error::VariableCapture(format!("{v} occurs both free and bound in the goal")));
        }
        if bv.len() != goal.subformulas().iter().filter(|f| matches!(f, Assertion::Exists(..))).count() {
            return Err(Error::VariableCapture("a variable is bound twice in the goal".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &context.assertions {
            for v in a.bv() {
                if !seen.insert(v.clone()) {
                    return Err(Error::VariableCapture(format!("{v} is bound by two assertions of the context")));
                }
            }
        }
        let kernel = context.kernel()?;
        let mut st = BTreeSet::new();
        for t in &context.terms {
            t.collect_subterms(&mut st);
        }
        for a in context.assertions.iter().chain(std::iter::once(goal)) {
            st.extend(a.subterms());
        }
        Ok(WitnessQuery { context: context.clone(), goal: goal.clone(), kernel, bound_vars: bv, m_bound: st.len(), mode })
    }

    /// Terms the witness search draws from: `𝒟 = 𝒞 \ bv(α)`, where
    /// `𝒞 = st(T) ∪ st(E ∪ {α})`.
    pub fn type_universe(&self) -> BTreeSet<Term> {
        let mut c = BTreeSet::new();
        for t in &self.kernel.terms {
            t.collect_subterms(&mut c);
        }
        for a in self.kernel.assertions.iter().chain(std::iter::once(&self.goal)) {
            c.extend(a.subterms());
        }
        for v in &self.bound_vars {
            c.remove(&Term::var(v.clone()));
        }
        c
    }

    /// Term set of the kernel extended with the goal's bound variables.
    fn t_with_bv(&self) -> Analysis {
        let mut ts: Vec<Term> = self.kernel.terms.iter().cloned().collect();
        ts.extend(self.bound_vars.iter().cloned().map(Term::var));
        Analysis::new(&ts)
    }
}

/// Evidence for condition [2] on one variable and one top-level term.
#[derive(Clone, Debug, Serialize)]
pub struct AbstractabilityEvidence {
    pub variable: Variable,
    pub term: Term,
    pub positions: Vec<String>,
    pub abstractable: Vec<String>,
    pub holds: bool,
}

/// Check condition [2]: `pos_of(x, r) ⊆ 𝔸(T ∪ bv(α), r)` for every bound
/// `x` and every top-level term `r` of the goal.
pub fn check_abstractability_conditions(q: &WitnessQuery) -> Vec<AbstractabilityEvidence> {
    let an = q.t_with_bv();
    let mut out = Vec::new();
    let mut tops = q.goal.top_terms();
    tops.dedup();
    for x in &q.bound_vars {
        let xt = Term::var(x.clone());
        for r in &tops {
            let pos = r.pos_of(&xt);
            if pos.is_empty() {
                continue;
            }
            let abs = abstractable_positions_term_with(&an, r);
            out.push(AbstractabilityEvidence {
                variable: x.clone(),
                term: r.clone(),
                holds: pos.is_subset(&abs),
                positions: pos.iter().map(|p| p.to_string()).collect(),
                abstractable: abs.iter().map(|p| p.to_string()).collect(),
            });
        }
    }
    out
}

/// A proof that uses only introduction rules over proved atoms.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum IntroProof {
    /// An atom discharged by an `⊢eq` proof.
    Atom {
        conclusion: Assertion,
    },
    And {
        conclusion: Assertion,
        left: Box<IntroProof>,
        right: Box<IntroProof>,
    },
    Exists {
        conclusion: Assertion,
        variable: Variable,
        witness: Term,
        premise: Box<IntroProof>,
    },
    Say {
        conclusion: Assertion,
        key: Term,
        premise: Box<IntroProof>,
    },
}

impl IntroProof {
    pub fn conclusion(&self) -> &Assertion {
        match self {
            IntroProof::Atom { conclusion }
            | IntroProof::And { conclusion, .. }
            | IntroProof::Exists { conclusion, .. }
            | IntroProof::Say { conclusion, .. } => conclusion,
        }
    }

    pub fn leaves(&self) -> Vec<&Assertion> {
        match self {
            IntroProof::Atom { conclusion } => vec![conclusion],
            IntroProof::And { left, right, .. } => {
                let mut v = left.leaves();
                v.extend(right.leaves());
                v
            }
            IntroProof::Exists { premise, .. } | IntroProof::Say { premise, .. } => premise.leaves(),
        }
    }
}

/// Side conditions of `∃i`: `T ⊢dy r` and `pos_of(x, β) ⊆ 𝔸(T ∪ {x}, β)`.
fn exists_intro_ok(t: &Analysis, x: &Variable, body: &Assertion, r: &Term) -> bool {
    if !t.derives(r) {
        return false;
    }
    let xt = Term::var(x.clone());
    let mut tx = t.clone();
    tx.extend([&xt]);
    body.pos_of(&xt).is_subset(&abstractable_positions_with(&tx, body))
}

/// Reconstruct `α` from atoms accepted by `proved`, using `∧i`, `∃i` (with
/// witnesses from `mu`) and `say`.
pub fn decompose_intro(alpha: &Assertion, mu: &Subst, t: &Analysis, proved: &mut dyn FnMut(&Assertion) -> bool) -> Option<IntroProof> {
    match alpha {
        Assertion::And(a, b) => {
            let left = decompose_intro(a, mu, t, proved)?;
            let right = decompose_intro(b, mu, t, proved)?;
            Some(IntroProof::And { conclusion: alpha.clone(), left: Box::new(left), right: Box::new(right) })
        }
        Assertion::Exists(x, body) => {
            let r = mu.get(x)?.clone();
            if !exists_intro_ok(t, x, body, &r) {
                return None;
            }
            let premise = body.apply(&Subst::singleton(x.clone(), r.clone()));
            let p = decompose_intro(&premise, mu, t, proved)?;
            Some(IntroProof::Exists { conclusion: alpha.clone(), variable: x.clone(), witness: r, premise: Box::new(p) })
        }
        Assertion::Says(subj, body) => {
            if proved(alpha) {
                return Some(IntroProof::Atom { conclusion: alpha.clone() });
            }
            let key = says_key(subj)?;
            if !t.derives(&key) {
                return None;
            }
            let p = decompose_intro(body, mu, t, proved)?;
            Some(IntroProof::Say { conclusion: alpha.clone(), key, premise: Box::new(p) })
        }
        _ => proved(alpha).then(|| IntroProof::Atom { conclusion: alpha.clone() }),
    }
}

/// Everything needed to re-check a positive answer independently.
#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    /// The goal is literally among the assertions.
    pub by_axiom: bool,
    pub witness: Subst,
    pub dy_proofs: BTreeMap<String, Arc<DyProof>>,
    pub eq_proofs: Vec<(Assertion, Arc<EqProof>)>,
    pub abstractability: Vec<AbstractabilityEvidence>,
    pub intro: Option<IntroProof>,
}

impl Certificate {
    /// Replay every condition from scratch.
    pub fn replay(&self, q: &WitnessQuery) -> Result<()> {
        let fail = |why: String| Err(Error::InvalidProof(why));
        if self.by_axiom {
            return if q.context.assertions.iter().any(|a| a.alpha_eq(&q.goal)) {
                Ok(())
            } else {
                fail("goal is not an assertion of the context".into())
            };
        }
        let t = Analysis::new(&q.kernel.terms);
        for x in &q.bound_vars {
            let Some(r) = self.witness.get(x) else { return fail(format!("no witness for {x}")) };
            let Some(d) = self.dy_proofs.get(&x.to_string()) else { return fail(format!("no dy proof for {x}")) };
            if d.conclusion != *r {
                return fail(format!("dy proof for {x} concludes the wrong term"));
            }
            d.check(&q.kernel.terms).map_err(Error::InvalidProof)?;
        }
        if let Some(e) = check_abstractability_conditions(q).into_iter().find(|e| !e.holds) {
            return fail(format!("{} is not abstractable in {}", e.variable, e.term));
        }
        let ctx = EqContext::new(&q.kernel, q.mode)?;
        for (a, p) in &self.eq_proofs {
            if !p.conclusion.alpha_eq(a) {
                return fail(format!("proof of {a} concludes {}", p.conclusion));
            }
            p.check(&ctx)?;
        }
        let Some(intro) = &self.intro else { return fail("missing intro proof".into()) };
        if !intro.conclusion().alpha_eq(&q.goal) {
            return fail("intro proof concludes the wrong formula".into());
        }
        replay_intro(intro, &t, &self.eq_proofs)
    }
}

fn replay_intro(p: &IntroProof, t: &Analysis, eqs: &[(Assertion, Arc<EqProof>)]) -> Result<()> {
    let fail = |why: String| Err(Error::InvalidProof(why));
    match p {
        IntroProof::Atom { conclusion } => {
            if eqs.iter().any(|(a, _)| a.alpha_eq(conclusion)) {
                Ok(())
            } else {
                fail(format!("no eq proof for {conclusion}"))
            }
        }
        IntroProof::And { conclusion, left, right } => match conclusion {
            Assertion::And(a, b) if left.conclusion().alpha_eq(a) && right.conclusion().alpha_eq(b) => {
                replay_intro(left, t, eqs)?;
                replay_intro(right, t, eqs)
            }
            _ => fail(format!("bad conjunction step for {conclusion}")),
        },
        IntroProof::Exists { conclusion, variable, witness, premise } => match conclusion {
            Assertion::Exists(x, body) if x == variable => {
                let expected = body.apply(&Subst::singleton(x.clone(), witness.clone()));
                if !premise.conclusion().alpha_eq(&expected) {
                    return fail(format!("premise of the step for {x} is not the instance"));
                }
                if !exists_intro_ok(t, x, body, witness) {
                    return fail(format!("side conditions fail for {x} := {witness}"));
                }
                replay_intro(premise, t, eqs)
            }
            _ => fail(format!("bad existential step for {conclusion}")),
        },
        IntroProof::Say { conclusion, key, premise } => match conclusion {
            Assertion::Says(subj, body) if premise.conclusion().alpha_eq(body) => {
                if says_key(subj).as_ref() != Some(key) || !t.derives(key) {
                    return fail(format!("secret key of {subj} is not derivable"));
                }
                replay_intro(premise, t, eqs)
            }
            _ => fail(format!("bad say step for {conclusion}")),
        },
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub candidate_limit: usize,
    /// Normalize the reconstructed eq proofs.
    pub normalize_proofs: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { candidate_limit: DEFAULT_CANDIDATE_LIMIT, normalize_proofs: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Derivation {
    pub holds: bool,
    /// The candidate limit was hit before an answer.
    pub exhausted: bool,
    pub candidates_tried: usize,
    pub certificate: Option<Certificate>,
}

/// Precomputed state for answering one query.
pub struct Deriver {
    pub query: WitnessQuery,
    ctx: Arc<EqContext>,
    base: Saturation,
    t: Analysis,
    memo: RefCell<HashMap<Assertion, bool>>,
    opts: SearchOptions,
}

impl Deriver {
    pub fn new(q: WitnessQuery, opts: SearchOptions) -> Result<Deriver> {
        let ctx = Arc::new(EqContext::new(&q.kernel, q.mode)?);
        if consistent(&q.kernel.assertions)?.is_none() {
            return Err(Error::Inconsistent);
        }
        let lists: Vec<Assertion> = q.goal.lists().into_iter().map(|l| Assertion::Member(Term::name(l[0].clone()), l)).collect();
        let mut base = Saturation::new(ctx.clone(), &[])?;
        if q.mode == Mode::Extended && !lists.is_empty() {
            base.add_goals(&lists);
        }
        let t = ctx.analysis().clone();
        Ok(Deriver { query: q, ctx, base, t, memo: RefCell::new(HashMap::new()), opts })
    }

    /// `(T;E) ⊢eq φ` for an instantiated atom, memoized.
    pub fn atom_holds(&self, a: &Assertion) -> bool {
        if let Some(&b) = self.memo.borrow().get(a) {
            return b;
        }
        let b = match a {
            Assertion::Pred(..) => self.ctx.has_atom(a),
            _ => {
                let mut s = self.base.clone();
                s.add_goals(std::slice::from_ref(a));
                s.holds(a)
            }
        };
        self.memo.borrow_mut().insert(a.clone(), b);
        b
    }

    fn atom_proof(&self, a: &Assertion) -> Option<Arc<EqProof>> {
        let mut s = self.base.clone();
        s.add_goals(std::slice::from_ref(a));
        let p = s.proof(a)?;
        if self.opts.normalize_proofs {
            if let Ok(r) = normalize(&p, &self.ctx, DEFAULT_STEP_LIMIT) {
                return Some(r.proof);
            }
        }
        Some(p)
    }

    /// Does `mu` satisfy conditions [3] and [4]?
    pub fn check_witness(&self, mu: &Subst) -> Option<IntroProof> {
        let mut proved = |a: &Assertion| self.atom_holds(a);
        decompose_intro(&self.query.goal, mu, &self.t, &mut proved)
    }

    /// Values a bound variable may take: the spare name (when it is a term of
    /// the context) or a term of `𝒟`, whose bound variables are replaced by
    /// their already chosen witnesses. Sorted by (dagsize, text).
    fn choices(&self) -> Vec<Term> {
        let q = &self.query;
        let mut choices: Vec<Term> = q.type_universe().into_iter().collect();
        let spare = Term::name(Name::spare());
        if q.kernel.terms.contains(&spare) && !choices.contains(&spare) {
            choices.push(spare);
        }
        let zs: BTreeSet<&Variable> = q.bound_vars.iter().collect();
        // Closed choices must already be derivable.
        choices.retain(|c| c.vars().iter().any(|v| zs.contains(v)) || self.t.derives(c));
        choices.sort_by(|a, b| a.size_then_text(b));
        choices
    }

    /// Walk the goal under a partial witness: fail as soon as a fully
    /// assigned part is not provable, or report the next variable to assign.
    fn walk(&self, alpha: &Assertion, mu: &Subst) -> Walk {
        match alpha {
            Assertion::And(a, b) => {
                let l = self.walk(a, mu);
                if matches!(l, Walk::Fail) {
                    return Walk::Fail;
                }
                let r = self.walk(b, mu);
                match (l, r) {
                    (_, Walk::Fail) => Walk::Fail,
                    (Walk::Need(x, v), _) | (_, Walk::Need(x, v)) => Walk::Need(x, v),
                    (Walk::Done(l), Walk::Done(r)) => {
                        Walk::Done(IntroProof::And { conclusion: alpha.clone(), left: Box::new(l), right: Box::new(r) })
                    }
                    _ => unreachable!(),
                }
            }
            Assertion::Exists(x, body) => {
                let Some(r) = mu.get(x) else {
                    return match self.rigid_values(x, body) {
                        Some(vals) if vals.is_empty() => Walk::Fail,
                        vals => Walk::Need(x.clone(), vals),
                    };
                };
                if !exists_intro_ok(&self.t, x, body, r) {
                    return Walk::Fail;
                }
                match self.walk(&body.apply(&Subst::singleton(x.clone(), r.clone())), mu) {
                    Walk::Done(p) => Walk::Done(IntroProof::Exists {
                        conclusion: alpha.clone(),
                        variable: x.clone(),
                        witness: r.clone(),
                        premise: Box::new(p),
                    }),
                    other => other,
                }
            }
            Assertion::Says(subj, body) => {
                if self.atom_holds(alpha) {
                    return Walk::Done(IntroProof::Atom { conclusion: alpha.clone() });
                }
                match says_key(subj) {
                    Some(k) if self.t.derives(&k) => match self.walk(body, mu) {
                        Walk::Done(p) => Walk::Done(IntroProof::Say { conclusion: alpha.clone(), key: k, premise: Box::new(p) }),
                        other => other,
                    },
                    _ => Walk::Fail,
                }
            }
            _ => {
                if self.atom_holds(alpha) {
                    Walk::Done(IntroProof::Atom { conclusion: alpha.clone() })
                } else {
                    Walk::Fail
                }
            }
        }
    }

    /// Values of `x` allowed by the parts of `body` that can only hold as
    /// context atoms: predicates, and `says` formulas whose key is not
    /// derivable. `None` when no such part mentions `x`.
    fn rigid_values(&self, x: &Variable, body: &Assertion) -> Option<BTreeSet<Term>> {
        let mut wild: BTreeSet<Variable> = body.bv();
        wild.insert(x.clone());
        let mut rigid = Vec::new();
        fn collect<'a>(a: &'a Assertion, d: &Deriver, wild: &BTreeSet<Variable>, out: &mut Vec<&'a Assertion>) {
            match a {
                Assertion::And(l, r) => {
                    collect(l, d, wild, out);
                    collect(r, d, wild, out);
                }
                Assertion::Exists(_, b) => collect(b, d, wild, out),
                Assertion::Says(subj, _) => {
                    let closed = subj.vars().is_disjoint(wild);
                    if closed && !says_key(subj).is_some_and(|k| d.t.derives(&k)) {
                        out.push(a);
                    }
                }
                Assertion::Pred(..) => out.push(a),
                _ => {}
            }
        }
        collect(body, self, &wild, &mut rigid);
        let xt = Term::var(x.clone());
        let mut allowed: Option<BTreeSet<Term>> = None;
        for r in rigid.into_iter().filter(|r| r.vars().contains(x)) {
            let mut vals = BTreeSet::new();
            for atom in &self.query.kernel.assertions {
                let mut b = Subst::new();
                if match_assertion(r, atom, &wild, &mut b) {
                    vals.insert(b.apply(&xt));
                }
            }
            allowed = Some(match allowed {
                None => vals,
                Some(prev) => prev.intersection(&vals).cloned().collect(),
            });
        }
        allowed
    }

    fn search(&self, mu: &mut Subst, choices: &[Term], budget: &mut usize) -> Option<IntroProof> {
        let x = match self.walk(&self.query.goal, mu) {
            Walk::Fail => return None,
            Walk::Done(p) => return Some(p),
            Walk::Need(x, vals) => (x, vals),
        };
        let (x, vals) = x;
        let restricted: Vec<Term>;
        let options = match vals {
            Some(v) => {
                restricted = v.into_iter().collect();
                &restricted[..]
            }
            None => choices,
        };
        for c in options {
            if *budget == 0 {
                return None;
            }
            let r = mu.apply(c);
            if r.vars().iter().any(|v| self.query.bound_vars.contains(v)) || r.dagsize() > self.query.m_bound || !self.t.derives(&r) {
                continue;
            }
            *budget -= 1;
            mu.insert(x.clone(), r);
            if let Some(p) = self.search(mu, choices, budget) {
                return Some(p);
            }
            mu.remove(&x);
        }
        None
    }

    /// Search for an `M`-bounded witness. Returns the witness with its
    /// introduction proof, the number of assignments tried, and whether the
    /// candidate budget ran out.
    pub fn find_witness(&self) -> (Option<(Subst, IntroProof)>, usize, bool) {
        if check_abstractability_conditions(&self.query).iter().any(|e| !e.holds) {
            return (None, 0, false);
        }
        let choices = self.choices();
        let mut budget = self.opts.candidate_limit;
        let mut mu = Subst::new();
        let found = self.search(&mut mu, &choices, &mut budget);
        let tried = self.opts.candidate_limit - budget;
        match found {
            Some(p) => (Some((mu, p)), tried, false),
            None => (None, tried, budget == 0),
        }
    }

    pub fn certificate(&self, mu: Subst, intro: IntroProof) -> Certificate {
        let mut dy_proofs = BTreeMap::new();
        for x in &self.query.bound_vars {
            if let Some(t) = mu.get(x) {
                if let Some(p) = self.t.synthesize(t) {
                    dy_proofs.insert(x.to_string(), p);
                }
            }
        }
        let mut eq_proofs: Vec<(Assertion, Arc<EqProof>)> = Vec::new();
        for leaf in intro.leaves() {
            if eq_proofs.iter().any(|(a, _)| a == leaf) {
                continue;
            }
            if let Some(p) = self.atom_proof(leaf) {
                eq_proofs.push((leaf.clone(), p));
            }
        }
        Certificate {
            by_axiom: false,
            witness: mu,
            dy_proofs,
            eq_proofs,
            abstractability: check_abstractability_conditions(&self.query),
            intro: Some(intro),
        }
    }

    pub fn derive(&self) -> Derivation {
        let (found, tried, exhausted) = self.find_witness();
        match found {
            Some((mu, intro)) => {
                Derivation { holds: true, exhausted: false, candidates_tried: tried, certificate: Some(self.certificate(mu, intro)) }
            }
            None => Derivation { holds: false, exhausted, candidates_tried: tried, certificate: None },
        }
    }
}

enum Walk {
    Fail,
    /// Next variable to assign, with its possible values when they are
    /// forced by matching.
    Need(Variable, Option<BTreeSet<Term>>),
    Done(IntroProof),
}

/// One-way matching of `p` against `t`, binding only variables in `wild`.
fn match_term(p: &Term, t: &Term, wild: &BTreeSet<Variable>, b: &mut Subst) -> bool {
    if let Some(v) = p.as_var() {
        if wild.contains(v) {
            if let Some(prev) = b.get(v) {
                return prev == t;
            }
            b.insert(v.clone(), t.clone());
            return true;
        }
    }
    match (p.children(), t.children()) {
        (Some((p1, p2)), Some((t1, t2))) if p.same_constructor(t) => match_term(p1, t1, wild, b) && match_term(p2, t2, wild, b),
        _ => p == t,
    }
}

/// Matching modulo renaming of bound variables.
fn match_assertion(p: &Assertion, t: &Assertion, wild: &BTreeSet<Variable>, b: &mut Subst) -> bool {
    match (p, t) {
        (Assertion::Eq(a, c), Assertion::Eq(d, e)) => match_term(a, d, wild, b) && match_term(c, e, wild, b),
        (Assertion::Pred(n, xs), Assertion::Pred(m, ys)) => {
            n == m && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| match_term(x, y, wild, b))
        }
        (Assertion::Member(a, l), Assertion::Member(c, k)) => l == k && match_term(a, c, wild, b),
        (Assertion::And(a, c), Assertion::And(d, e)) => match_assertion(a, d, wild, b) && match_assertion(c, e, wild, b),
        (Assertion::Exists(x, bp), Assertion::Exists(y, bt)) => {
            let renamed = bp.apply(&Subst::singleton(x.clone(), Term::var(y.clone())));
            match_assertion(&renamed, bt, wild, b)
        }
        (Assertion::Says(s, bp), Assertion::Says(u, bt)) => match_term(s, u, wild, b) && match_assertion(bp, bt, wild, b),
        _ => false,
    }
}

/// Decide `(S;A) ⊢a α`.
pub fn assert_derives(context: &KnowledgePair, goal: &Assertion, mode: Mode) -> Result<Derivation> {
    assert_derives_with(context, goal, mode, SearchOptions::default())
}

pub fn assert_derives_with(context: &KnowledgePair, goal: &Assertion, mode: Mode, opts: SearchOptions) -> Result<Derivation> {
    let q = WitnessQuery::new(context, goal, mode)?;
    if q.bound_vars.is_empty() && context.assertions.iter().any(|a| a.alpha_eq(goal)) {
        return Ok(Derivation {
            holds: true,
            exhausted: false,
            candidates_tried: 0,
            certificate: Some(Certificate {
                by_axiom: true,
                witness: Subst::new(),
                dy_proofs: BTreeMap::new(),
                eq_proofs: vec![],
                abstractability: vec![],
                intro: None,
            }),
        });
    }
    if let Assertion::Eq(t, u) = goal {
        if t == u && q.bound_vars.is_empty() {
            return Ok(reflexive(&q, t));
        }
    }
    Ok(Deriver::new(q, opts)?.derive())
}

/// `t ⋈ t` over a kernel holds iff `T ⊢dy t`.
fn reflexive(q: &WitnessQuery, t: &Term) -> Derivation {
    let an = Analysis::new(&q.kernel.terms);
    match an.synthesize(t) {
        Some(d) => {
            let goal = q.goal.clone();
            Derivation {
                holds: true,
                exhausted: false,
                candidates_tried: 0,
                certificate: Some(Certificate {
                    by_axiom: false,
                    witness: Subst::new(),
                    dy_proofs: BTreeMap::new(),
                    eq_proofs: vec![(goal.clone(), EqProof::eq(d))],
                    abstractability: vec![],
                    intro: Some(IntroProof::Atom { conclusion: goal }),
                }),
            }
        }
        None => Derivation { holds: false, exhausted: false, candidates_tried: 0, certificate: None },
    }
}

/// Atoms that every intro proof of `goal` must discharge by `⊢eq`: those
/// not under a `says`.
pub fn mandatory_atoms(goal: &Assertion) -> Vec<Assertion> {
    fn go(g: &Assertion, out: &mut Vec<Assertion>) {
        match g {
            Assertion::And(a, b) => {
                go(a, out);
                go(b, out);
            }
            Assertion::Exists(_, b) => go(b, out),
            Assertion::Says(..) => {}
            other => out.push(other.clone()),
        }
    }
    let mut out = Vec::new();
    go(goal, &mut out);
    out
}

/// Atoms of the goal, re-exported for reports.
pub fn goal_atoms(goal: &Assertion) -> Vec<Assertion> {
    atoms(goal)
}

/// Helper used by tests and reports: positions as strings.
pub fn position_set(ps: &BTreeSet<Position>) -> Vec<String> {
    ps.iter().map(|p| p.to_string()).collect()
}
