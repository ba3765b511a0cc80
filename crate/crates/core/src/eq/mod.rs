//! Equality reasoning `(T;E) ⊢eq φ`: proof objects, checking, normality,
//! saturation and normalization.

mod normalize;
mod saturate;

pub use normalize::{normalize, NormalizeReport, RewriteStep, DEFAULT_STEP_LIMIT};
pub use saturate::{eq_derives, AtomId, Just, Saturation};

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::assertion::{says_key, Assertion, KnowledgePair, Mode};
use crate::dy::{Analysis, DyProof, DyRule};
use crate::error::{Error, Result};
use crate::term::{Name, Term};

/// A pure context `(T; E)` with its analysis closure precomputed.
#[derive(Clone, Debug)]
pub struct EqContext {
    pub terms: BTreeSet<Term>,
    pub atoms: Vec<Assertion>,
    pub mode: Mode,
    analysis: Analysis,
    canon: HashSet<Assertion>,
}

impl EqContext {
    /// Accepts any set of atoms; non-atomic formulas are rejected.
    pub fn new(kp: &KnowledgePair, mode: Mode) -> Result<EqContext> {
        if let Some(a) = kp.assertions.iter().find(|a| !a.is_atom()) {
            return Err(Error::NotPure(format!("{a} is not an atom")));
        }
        if mode == Mode::Core {
            if let Some(a) = kp.assertions.iter().find(|a| !matches!(a, Assertion::Eq(..))) {
                return Err(Error::Mode(format!("{a} is not an equality")));
            }
        }
        Ok(EqContext {
            terms: kp.terms.clone(),
            atoms: kp.assertions.clone(),
            mode,
            analysis: Analysis::new(&kp.terms),
            canon: kp.assertions.iter().map(Assertion::alpha_canonical).collect(),
        })
    }

    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn derives(&self, t: &Term) -> bool {
        self.analysis.derives(t)
    }

    /// Is `a` among the atoms of `E`, up to renaming of bound variables?
    pub fn has_atom(&self, a: &Assertion) -> bool {
        self.canon.contains(&a.alpha_canonical())
    }

    pub fn knowledge(&self) -> KnowledgePair {
        KnowledgePair { terms: self.terms.clone(), assertions: self.atoms.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EqRule {
    Ax,
    Eq,
    Sym,
    Trans,
    Cons,
    Proj(u8),
    Prom,
    Wk,
    Int,
    Subst,
    Say,
}

impl EqRule {
    pub fn label(self) -> &'static str {
        match self {
            EqRule::Ax => "ax",
            EqRule::Eq => "eq",
            EqRule::Sym => "sym",
            EqRule::Trans => "trans",
            EqRule::Cons => "cons",
            EqRule::Proj(0) => "proj0",
            EqRule::Proj(_) => "proj1",
            EqRule::Prom => "prom",
            EqRule::Wk => "wk",
            EqRule::Int => "int",
            EqRule::Subst => "subst",
            EqRule::Say => "say",
        }
    }

    pub fn from_label(s: &str) -> Option<EqRule> {
        Some(match s {
            "ax" => EqRule::Ax,
            "eq" => EqRule::Eq,
            "sym" => EqRule::Sym,
            "trans" => EqRule::Trans,
            "cons" => EqRule::Cons,
            "proj0" => EqRule::Proj(0),
            "proj1" => EqRule::Proj(1),
            "prom" => EqRule::Prom,
            "wk" => EqRule::Wk,
            "int" => EqRule::Int,
            "subst" => EqRule::Subst,
            "say" => EqRule::Say,
            _ => return None,
        })
    }
}

impl Serialize for EqRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

/// A proof of `(T;E) ⊢eq φ`. Dolev-Yao side derivations live in `side`:
/// one for `eq` and `say`, four for `proj`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EqProof {
    pub rule: EqRule,
    pub conclusion: Assertion,
    pub premises: Vec<Arc<EqProof>>,
    pub side: Vec<Arc<DyProof>>,
}

/// Violated normality clauses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Clause {
    DyNotNormal,
    SymPremise,
    EqPremiseConstructor,
    TransPremiseReflexiveOrTrans,
    AdjacentCons,
    ProjContainsCons,
    IntPremise,
}

impl Clause {
    pub fn describe(self) -> &'static str {
        match self {
            Clause::DyNotNormal => "all dy subproofs are normal",
            Clause::SymPremise => "the premise of sym is the conclusion of ax or prom",
            Clause::EqPremiseConstructor => "the premise of eq is not the conclusion of a constructor",
            Clause::TransPremiseReflexiveOrTrans => "no premise of trans is reflexive or the conclusion of trans",
            Clause::AdjacentCons => "adjacent premises of trans are not both conclusions of cons",
            Clause::ProjContainsCons => "no subproof ending in proj contains cons",
            Clause::IntPremise => "no premise of int is the conclusion of int or wk",
        }
    }
}

/// `δ(π) = (δ1, δ2, δ3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Measure {
    pub dy_size: usize,
    pub cons: usize,
    pub size: usize,
}

fn is_reflexive(a: &Assertion) -> bool {
    matches!(a, Assertion::Eq(t, u) if t == u)
}

fn eq_sides(a: &Assertion) -> Option<(&Term, &Term)> {
    match a {
        Assertion::Eq(t, u) => Some((t, u)),
        _ => None,
    }
}

impl EqProof {
    pub fn leaf(rule: EqRule, conclusion: Assertion, side: Vec<Arc<DyProof>>) -> Arc<EqProof> {
        Arc::new(EqProof { rule, conclusion, premises: vec![], side })
    }

    pub fn node(rule: EqRule, conclusion: Assertion, premises: Vec<Arc<EqProof>>, side: Vec<Arc<DyProof>>) -> Arc<EqProof> {
        Arc::new(EqProof { rule, conclusion, premises, side })
    }

    pub fn ax(a: Assertion) -> Arc<EqProof> {
        EqProof::leaf(EqRule::Ax, a, vec![])
    }

    pub fn eq(d: Arc<DyProof>) -> Arc<EqProof> {
        let t = d.conclusion.clone();
        EqProof::leaf(EqRule::Eq, Assertion::msg(t), vec![d])
    }

    pub fn sym(p: Arc<EqProof>) -> Arc<EqProof> {
        let (t, u) = eq_sides(&p.conclusion).expect("sym over an equality");
        let c = Assertion::eq(u.clone(), t.clone());
        EqProof::node(EqRule::Sym, c, vec![p], vec![])
    }

    /// k-ary transitivity over a chain; a single premise is returned as is.
    pub fn trans(ps: Vec<Arc<EqProof>>) -> Arc<EqProof> {
        if ps.len() == 1 {
            return ps.into_iter().next().expect("one premise");
        }
        let first = eq_sides(&ps[0].conclusion).expect("equality").0.clone();
        let last = eq_sides(&ps[ps.len() - 1].conclusion).expect("equality").1.clone();
        EqProof::node(EqRule::Trans, Assertion::eq(first, last), ps, vec![])
    }

    /// `cons` for the constructor of `shape`.
    pub fn cons(shape: &Term, a: Arc<EqProof>, b: Arc<EqProof>) -> Arc<EqProof> {
        let (t0, u0) = eq_sides(&a.conclusion).expect("equality");
        let (t1, u1) = eq_sides(&b.conclusion).expect("equality");
        let c = Assertion::eq(shape.with_children(t0.clone(), t1.clone()), shape.with_children(u0.clone(), u1.clone()));
        EqProof::node(EqRule::Cons, c, vec![a, b], vec![])
    }

    /// `proj_j` with side proofs drawn from `analysis`.
    pub fn proj(j: u8, p: Arc<EqProof>, analysis: &Analysis) -> Option<Arc<EqProof>> {
        let (t, u) = eq_sides(&p.conclusion)?;
        if !t.same_constructor(u) {
            return None;
        }
        let (t0, t1) = t.children()?;
        let (u0, u1) = u.children()?;
        let side = [t0, t1, u0, u1].iter().map(|x| analysis.synthesize(x)).collect::<Option<Vec<_>>>()?;
        let c = if j == 0 { Assertion::eq(t0.clone(), u0.clone()) } else { Assertion::eq(t1.clone(), u1.clone()) };
        Some(EqProof::node(EqRule::Proj(j), c, vec![p], side))
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.premises.iter().map(|p| p.depth()).max().unwrap_or(0)
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a EqProof)) {
        f(self);
        for p in &self.premises {
            p.walk(f);
        }
    }

    pub fn contains_rule(&self, r: EqRule) -> bool {
        self.rule == r || self.premises.iter().any(|p| p.contains_rule(r))
    }

    pub fn count_rule(&self, pred: impl Fn(EqRule) -> bool + Copy) -> usize {
        usize::from(pred(self.rule)) + self.premises.iter().map(|p| p.count_rule(pred)).sum::<usize>()
    }

    pub fn measure(&self) -> Measure {
        let mut dy_size = 0;
        let mut cons = 0;
        let mut size = 0;
        self.walk(&mut |p| {
            size += 1;
            match p.rule {
                EqRule::Cons => cons += 1,
                EqRule::Eq | EqRule::Say => dy_size += p.side.iter().map(|d| d.size()).sum::<usize>(),
                _ => {}
            }
        });
        Measure { dy_size, cons, size }
    }

    /// Rules used, bottom-up in premise order.
    pub fn rule_sequence(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        fn go(p: &EqProof, out: &mut Vec<&'static str>) {
            for q in &p.premises {
                go(q, out);
            }
            out.push(p.rule.label());
        }
        go(self, &mut out);
        out
    }

    /// Validate every node against its rule and the context.
    pub fn check(&self, ctx: &EqContext) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidProof(format!("{} concluding {}: {why}", self.rule.label(), self.conclusion)));
        let prem: Vec<&Assertion> = self.premises.iter().map(|p| &p.conclusion).collect();
        for d in &self.side {
            d.check(ctx.analysis.axioms()).map_err(Error::InvalidProof)?;
        }
        let side_concl: Vec<&Term> = self.side.iter().map(|d| &d.conclusion).collect();
        match (self.rule, &self.conclusion) {
            (EqRule::Ax, c) => {
                if !prem.is_empty() || !ctx.has_atom(c) {
                    return bad("not an atom of E");
                }
            }
            (EqRule::Eq, Assertion::Eq(t, u)) => {
                if t != u || !prem.is_empty() || side_concl != [t] {
                    return bad("needs a dy proof of the term");
                }
            }
            (EqRule::Sym, Assertion::Eq(t, u)) => match prem.as_slice() {
                [Assertion::Eq(a, b)] if a == u && b == t => {}
                _ => return bad("premise is not the flipped equality"),
            },
            (EqRule::Trans, Assertion::Eq(t, u)) => {
                if prem.is_empty() {
                    return bad("no premises");
                }
                let mut cur = t;
                for p in &prem {
                    match p {
                        Assertion::Eq(a, b) if a == cur => cur = b,
                        _ => return bad("premises do not chain"),
                    }
                }
                if cur != u {
                    return bad("chain does not end at the right side");
                }
            }
            (EqRule::Cons, Assertion::Eq(t, u)) => {
                let ok = t.same_constructor(u)
                    && match (prem.as_slice(), t.children(), u.children()) {
                        ([Assertion::Eq(a0, b0), Assertion::Eq(a1, b1)], Some((t0, t1)), Some((u0, u1))) => {
                            a0 == t0 && a1 == t1 && b0 == u0 && b1 == u1
                        }
                        _ => false,
                    };
                if !ok {
                    return bad("premises are not the componentwise equalities");
                }
            }
            (EqRule::Proj(j), Assertion::Eq(c0, c1)) => {
                let ok = match prem.as_slice() {
                    [Assertion::Eq(t, u)] if t.same_constructor(u) => {
                        let (t0, t1) = t.children().expect("compound");
                        let (u0, u1) = u.children().expect("compound");
                        let (a, b) = if j == 0 { (t0, u0) } else { (t1, u1) };
                        a == c0 && b == c1 && {
                            let want: BTreeSet<&Term> = [t0, t1, u0, u1].into_iter().collect();
                            let have: BTreeSet<&Term> = side_concl.iter().copied().collect();
                            want == have
                        }
                    }
                    _ => false,
                };
                if !ok {
                    return bad("bad projection or missing side derivations");
                }
            }
            (EqRule::Prom, Assertion::Eq(t, n)) => match prem.as_slice() {
                [Assertion::Member(s, l)] if s == t && l.len() == 1 && n.as_name() == Some(&l[0]) => {}
                _ => return bad("premise must be a singleton membership"),
            },
            (EqRule::Wk, Assertion::Member(t, l)) => match prem.as_slice() {
                [Assertion::Eq(s, n)] if s == t && n.as_name().is_some_and(|n| l.contains(n)) => {}
                _ => return bad("premise must equate the subject with a list element"),
            },
            (EqRule::Int, Assertion::Member(t, l)) => {
                if prem.is_empty() {
                    return bad("no premises");
                }
                let mut inter: Option<Vec<Name>> = None;
                for p in &prem {
                    match p {
                        Assertion::Member(s, l2) if s == t => {
                            inter = Some(match inter {
                                None => l2.clone(),
                                Some(cur) => cur.into_iter().filter(|n| l2.contains(n)).collect(),
                            });
                        }
                        _ => return bad("premise is not a membership of the subject"),
                    }
                }
                if inter.as_ref() != Some(l) {
                    return bad("conclusion is not the intersection");
                }
            }
            (EqRule::Subst, Assertion::Member(u, l)) => match prem.as_slice() {
                [Assertion::Member(t, l2), Assertion::Eq(a, b)] if l2 == l && a == t && b == u => {}
                _ => return bad("premises must be t ⟵ l and t ⋈ u"),
            },
            (EqRule::Say, Assertion::Says(subj, body)) => {
                let key = says_key(subj);
                if prem.len() != 1 || !prem[0].alpha_eq(body) || key.as_ref() != side_concl.first().copied() {
                    return bad("needs the body and a dy proof of the secret key");
                }
            }
            _ => return bad("rule does not match the conclusion shape"),
        }
        self.premises.iter().try_for_each(|p| p.check(ctx))
    }

    /// Every violated normality clause.
    pub fn normality_violations(&self) -> Vec<Clause> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| {
            if p.side.iter().any(|d| !d.is_normal()) {
                out.insert(Clause::DyNotNormal);
            }
            match p.rule {
                EqRule::Sym => {
                    if !matches!(p.premises[0].rule, EqRule::Ax | EqRule::Prom) {
                        out.insert(Clause::SymPremise);
                    }
                }
                EqRule::Eq => {
                    if p.side.first().is_some_and(|d| d.rule.is_constructor()) {
                        out.insert(Clause::EqPremiseConstructor);
                    }
                }
                EqRule::Trans => {
                    if p.premises.iter().any(|q| q.rule == EqRule::Trans || is_reflexive(&q.conclusion)) {
                        out.insert(Clause::TransPremiseReflexiveOrTrans);
                    }
                    if p.premises.windows(2).any(|w| w[0].rule == EqRule::Cons && w[1].rule == EqRule::Cons) {
                        out.insert(Clause::AdjacentCons);
                    }
                }
                EqRule::Proj(_) => {
                    if p.premises[0].contains_rule(EqRule::Cons) {
                        out.insert(Clause::ProjContainsCons);
                    }
                }
                EqRule::Int if p.premises.iter().any(|q| matches!(q.rule, EqRule::Int | EqRule::Wk)) => {
                    out.insert(Clause::IntPremise);
                }
                _ => {}
            }
        });
        out.into_iter().collect()
    }

    pub fn is_normal(&self) -> bool {
        self.normality_violations().is_empty()
    }

    /// Maximal terms of every conclusion.
    pub fn terms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| out.extend(p.conclusion.top_terms()));
        out
    }

    pub fn lists(&self) -> BTreeSet<Vec<Name>> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| {
            if let Assertion::Member(_, l) = &p.conclusion {
                out.insert(l.clone());
            }
        });
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, 0);
        s
    }

    fn render_into(&self, s: &mut String, depth: usize) {
        use std::fmt::Write;
        for p in &self.premises {
            p.render_into(s, depth + 1);
        }
        let side: Vec<String> = self.side.iter().map(|d| d.conclusion.to_string()).collect();
        let side = if side.is_empty() { String::new() } else { format!("  dy: {}", side.join(", ")) };
        let _ = writeln!(s, "{}{}  [{}]{}", "  ".repeat(depth), self.conclusion, self.rule.label(), side);
    }
}

impl fmt::Debug for EqProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Check the subterm property of a normal proof of `goal` from `ctx`.
pub fn check_subterm_property(p: &EqProof, ctx: &EqContext) -> Result<bool> {
    if !p.is_normal() {
        return Err(Error::InvalidProof("proof is not normal".into()));
    }
    let mut base: BTreeSet<Term> = BTreeSet::new();
    for t in &ctx.terms {
        t.collect_subterms(&mut base);
    }
    for a in &ctx.atoms {
        base.extend(a.subterms());
    }
    let mut weak = base.clone();
    weak.extend(p.conclusion.subterms());
    let bound = if p.contains_rule(EqRule::Cons) { &weak } else { &base };
    if !p.terms().is_subset(bound) {
        return Ok(false);
    }
    let mut lists: BTreeSet<Vec<Name>> = ctx.atoms.iter().flat_map(|a| a.lists()).collect();
    let strong_lists = !matches!(p.rule, EqRule::Wk | EqRule::Int);
    let names_of =
        |ts: &BTreeSet<Term>| -> BTreeSet<Vec<Name>> { ts.iter().filter_map(|t| t.as_name().map(|n| vec![n.clone()])).collect() };
    if strong_lists {
        lists.extend(names_of(&base));
    } else {
        lists.extend(p.conclusion.lists());
        lists.extend(names_of(&weak));
    }
    Ok(p.lists().is_subset(&lists))
}

/// `dy` rule label used in JSON renderings of side proofs.
pub fn dy_rule_from_label(s: &str) -> Option<DyRule> {
    Some(match s {
        "ax" => DyRule::Ax,
        "pair" => DyRule::Pair,
        "enc" => DyRule::Enc,
        "fst" => DyRule::Fst,
        "snd" => DyRule::Snd,
        "dec" => DyRule::Dec,
        _ => return None,
    })
}
