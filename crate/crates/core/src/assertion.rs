//! Assertions: syntax, positions, public terms, abstractability, kernels, atoms.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::dy::Analysis;
use crate::error::{Error, Result};
use crate::term::{Name, NameKind, Position, Sort, Subst, Term, Variable};

/// Which fragment of the assertion language a query lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `∃x⃗. t ⋈ u` only.
    #[default]
    Core,
    /// Conjunction, predicates, list membership and `says`.
    Extended,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "core" => Ok(Mode::Core),
            "extended" => Ok(Mode::Extended),
            _ => Err(Error::Mode(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Assertion {
    Eq(Term, Term),
    Pred(Arc<str>, Vec<Term>),
    /// `t ⟵ [n1, …, nk]`; the list is kept sorted and duplicate-free.
    Member(Term, Vec<Name>),
    And(Arc<Assertion>, Arc<Assertion>),
    Exists(Variable, Arc<Assertion>),
    /// `pk(a) says α`; the subject is an agent name or a variable.
    Says(Term, Arc<Assertion>),
}

pub fn canonical_list(mut l: Vec<Name>) -> Vec<Name> {
    l.sort();
    l.dedup();
    l
}

impl Assertion {
    pub fn eq(t: Term, u: Term) -> Assertion {
        Assertion::Eq(t, u)
    }

    /// `t ⋈ t`, the encoding of a bare message.
    pub fn msg(t: Term) -> Assertion {
        Assertion::Eq(t.clone(), t)
    }

    pub fn pred(sym: &str, args: Vec<Term>) -> Assertion {
        Assertion::Pred(sym.into(), args)
    }

    pub fn member(t: Term, l: Vec<Name>) -> Assertion {
        Assertion::Member(t, canonical_list(l))
    }

    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        Assertion::And(Arc::new(a), Arc::new(b))
    }

    pub fn exists(v: Variable, body: Assertion) -> Assertion {
        Assertion::Exists(v, Arc::new(body))
    }

    pub fn exists_many(vs: &[Variable], body: Assertion) -> Assertion {
        vs.iter().rev().fold(body, |acc, v| Assertion::exists(v.clone(), acc))
    }

    pub fn says(subject: Term, body: Assertion) -> Assertion {
        Assertion::Says(subject, Arc::new(body))
    }

    /// Atoms in the kernel sense: equalities, memberships, predicates and `says`.
    pub fn is_atom(&self) -> bool {
        !matches!(self, Assertion::And(..) | Assertion::Exists(..))
    }

    /// Quantifier-free and conjunction-free, and not a `says`.
    pub fn is_basic_atom(&self) -> bool {
        matches!(self, Assertion::Eq(..) | Assertion::Member(..) | Assertion::Pred(..))
    }

    /// Shape of the core fragment: `∃x⃗. t ⋈ u`.
    pub fn is_core(&self) -> bool {
        match self {
            Assertion::Eq(..) => true,
            Assertion::Exists(_, b) => b.is_core(),
            _ => false,
        }
    }

    pub fn check_mode(&self, mode: Mode) -> Result<()> {
        if mode == Mode::Core && !self.is_core() {
            return Err(Error::Mode(format!("{self} is outside the core fragment")));
        }
        Ok(())
    }

    /// The terms occurring directly in the formula (not their subterms).
    pub fn top_terms(&self) -> Vec<Term> {
        let mut out = Vec::new();
        self.collect_top_terms(&mut out);
        out
    }

    fn collect_top_terms(&self, out: &mut Vec<Term>) {
        match self {
            Assertion::Eq(t, u) => {
                out.push(t.clone());
                out.push(u.clone());
            }
            Assertion::Pred(_, args) => out.extend(args.iter().cloned()),
            Assertion::Member(t, l) => {
                out.push(t.clone());
                out.extend(l.iter().map(|n| Term::name(n.clone())));
            }
            Assertion::And(a, b) => {
                a.collect_top_terms(out);
                b.collect_top_terms(out);
            }
            Assertion::Exists(_, b) => b.collect_top_terms(out),
            Assertion::Says(s, b) => {
                out.push(s.clone());
                b.collect_top_terms(out);
            }
        }
    }

    /// `st(α)`.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in self.top_terms() {
            t.collect_subterms(&mut out);
        }
        out
    }

    pub fn lists(&self) -> BTreeSet<Vec<Name>> {
        let mut out = BTreeSet::new();
        self.walk(&mut |a| {
            if let Assertion::Member(_, l) = a {
                out.insert(l.clone());
            }
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Assertion)) {
        f(self);
        match self {
            Assertion::And(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Assertion::Exists(_, b) | Assertion::Says(_, b) => b.walk(f),
            _ => {}
        }
    }

    /// `sf(α)`.
    pub fn subformulas(&self) -> Vec<Assertion> {
        let mut out = Vec::new();
        self.walk(&mut |a| out.push(a.clone()));
        out
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for t in self.top_terms() {
            t.collect_vars(&mut out);
        }
        out.extend(self.bv());
        out
    }

    pub fn bv(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.walk(&mut |a| {
            if let Assertion::Exists(v, _) = a {
                out.insert(v.clone());
            }
        });
        out
    }

    /// Bound variables in binding order (outermost first, left to right).
    pub fn bv_ordered(&self) -> Vec<Variable> {
        let mut out = Vec::new();
        self.walk(&mut |a| {
            if let Assertion::Exists(v, _) = a {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    pub fn fv(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut BTreeSet::new(), &mut out);
        out
    }

    fn collect_fv(&self, bound: &mut BTreeSet<Variable>, out: &mut BTreeSet<Variable>) {
        let mut add = |t: &Term, bound: &BTreeSet<Variable>| {
            for v in t.vars() {
                if !bound.contains(&v) {
                    out.insert(v);
                }
            }
        };
        match self {
            Assertion::Eq(t, u) => {
                add(t, bound);
                add(u, bound);
            }
            Assertion::Pred(_, args) => args.iter().for_each(|t| add(t, bound)),
            Assertion::Member(t, _) => add(t, bound),
            Assertion::And(a, b) => {
                a.collect_fv(bound, out);
                b.collect_fv(bound, out);
            }
            Assertion::Exists(v, b) => {
                let fresh = bound.insert(v.clone());
                b.collect_fv(bound, out);
                if fresh {
                    bound.remove(v);
                }
            }
            Assertion::Says(s, b) => {
                add(s, bound);
                b.collect_fv(bound, out);
            }
        }
    }

    /// `pubs(α)`: maximal subterms free of quantification variables.
    pub fn pubs(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in self.top_terms() {
            collect_pubs(&t, &mut out);
        }
        out
    }

    /// Apply a substitution to the free variables.
    pub fn apply(&self, s: &Subst) -> Assertion {
        if s.is_empty() {
            return self.clone();
        }
        match self {
            Assertion::Eq(t, u) => Assertion::Eq(s.apply(t), s.apply(u)),
            Assertion::Pred(p, args) => Assertion::Pred(p.clone(), args.iter().map(|t| s.apply(t)).collect()),
            Assertion::Member(t, l) => Assertion::Member(s.apply(t), l.clone()),
            Assertion::And(a, b) => Assertion::and(a.apply(s), b.apply(s)),
            Assertion::Exists(v, b) => {
                if s.contains(v) {
                    Assertion::exists(v.clone(), b.apply(&s.without([v])))
                } else {
                    Assertion::exists(v.clone(), b.apply(s))
                }
            }
            Assertion::Says(subj, b) => Assertion::says(s.apply(subj), b.apply(s)),
        }
    }

    /// Every term position together with the subterm found there.
    pub fn term_positions(&self) -> Vec<(Position, Term)> {
        let mut out = Vec::new();
        self.collect_positions(&mut Vec::new(), &mut out);
        out
    }

    fn collect_positions(&self, path: &mut Vec<u8>, out: &mut Vec<(Position, Term)>) {
        fn term_rec(t: &Term, path: &mut Vec<u8>, out: &mut Vec<(Position, Term)>) {
            out.push((Position(path.clone()), t.clone()));
            if let Some((a, b)) = t.children() {
                path.push(0);
                term_rec(a, path, out);
                path.pop();
                path.push(1);
                term_rec(b, path, out);
                path.pop();
            }
        }
        match self {
            Assertion::Eq(t, u) => {
                path.push(0);
                term_rec(t, path, out);
                path.pop();
                path.push(1);
                term_rec(u, path, out);
                path.pop();
            }
            Assertion::Pred(_, args) => {
                for (i, t) in args.iter().enumerate() {
                    path.push((i + 1) as u8);
                    term_rec(t, path, out);
                    path.pop();
                }
            }
            Assertion::Member(t, _) => {
                path.push(0);
                term_rec(t, path, out);
                path.pop();
            }
            Assertion::And(a, b) => {
                path.push(0);
                a.collect_positions(path, out);
                path.pop();
                path.push(1);
                b.collect_positions(path, out);
                path.pop();
            }
            Assertion::Exists(_, b) => {
                path.push(0);
                b.collect_positions(path, out);
                path.pop();
            }
            Assertion::Says(s, b) => {
                path.push(0);
                term_rec(s, path, out);
                path.pop();
                path.push(1);
                b.collect_positions(path, out);
                path.pop();
            }
        }
    }

    pub fn positions(&self) -> BTreeSet<Position> {
        self.term_positions().into_iter().map(|(p, _)| p).collect()
    }

    /// `pos_of(r, α)`.
    pub fn pos_of(&self, r: &Term) -> BTreeSet<Position> {
        self.term_positions().into_iter().filter(|(_, t)| t == r).map(|(p, _)| p).collect()
    }

    pub fn subterm_at(&self, p: &Position) -> Result<Term> {
        self.term_positions().into_iter().find(|(q, _)| q == p).map(|(_, t)| t).ok_or_else(|| Error::InvalidPosition(p.to_string()))
    }

    /// Replace the terms at the given positions by `r`.
    pub fn replace_at(&self, ps: &BTreeSet<Position>, r: &Term) -> Result<Assertion> {
        let all = self.positions();
        if let Some(p) = ps.iter().find(|p| !all.contains(p)) {
            return Err(Error::InvalidPosition(p.to_string()));
        }
        Ok(self.replace_rec(ps, &mut Vec::new(), r))
    }

    fn replace_rec(&self, ps: &BTreeSet<Position>, path: &mut Vec<u8>, r: &Term) -> Assertion {
        let sub = |t: &Term, d: u8, path: &mut Vec<u8>| -> Term {
            path.push(d);
            let local: BTreeSet<Position> =
                ps.iter().filter(|p| p.0.starts_with(path)).map(|p| Position(p.0[path.len()..].to_vec())).collect();
            path.pop();
            if local.is_empty() {
                t.clone()
            } else {
                t.replace_at(&local, r).unwrap_or_else(|_| t.clone())
            }
        };
        let rec = |a: &Assertion, d: u8, path: &mut Vec<u8>| -> Assertion {
            path.push(d);
            let out = a.replace_rec(ps, path, r);
            path.pop();
            out
        };
        match self {
            Assertion::Eq(t, u) => Assertion::Eq(sub(t, 0, path), sub(u, 1, path)),
            Assertion::Pred(p, args) => {
                Assertion::Pred(p.clone(), args.iter().enumerate().map(|(i, t)| sub(t, (i + 1) as u8, path)).collect())
            }
            Assertion::Member(t, l) => Assertion::Member(sub(t, 0, path), l.clone()),
            Assertion::And(a, b) => Assertion::and(rec(a, 0, path), rec(b, 1, path)),
            Assertion::Exists(v, b) => Assertion::exists(v.clone(), rec(b, 0, path)),
            Assertion::Says(s, b) => Assertion::says(sub(s, 0, path), rec(b, 1, path)),
        }
    }

    /// Rename bound variables to canonical names so alpha-equivalent
    /// formulas compare equal.
    pub fn alpha_canonical(&self) -> Assertion {
        fn go(a: &Assertion, depth: &mut usize, ren: &Subst) -> Assertion {
            match a {
                Assertion::Exists(v, b) => {
                    let nv = Variable::new(&format!("%{}", *depth), Sort::Quant);
                    *depth += 1;
                    let mut r2 = ren.clone();
                    r2.insert(v.clone(), Term::var(nv.clone()));
                    Assertion::exists(nv, go(b, depth, &r2))
                }
                Assertion::And(x, y) => {
                    let l = go(x, depth, ren);
                    let r = go(y, depth, ren);
                    Assertion::and(l, r)
                }
                Assertion::Says(s, b) => Assertion::says(ren.apply(s), go(b, depth, ren)),
                other => other.apply(ren),
            }
        }
        if self.bv().is_empty() {
            return self.clone();
        }
        go(self, &mut 0, &Subst::new())
    }

    pub fn alpha_eq(&self, other: &Assertion) -> bool {
        self == other || self.alpha_canonical() == other.alpha_canonical()
    }

    /// Nesting depth of `says`.
    pub fn says_depth(&self) -> usize {
        match self {
            Assertion::Says(_, b) => 1 + b.says_depth(),
            Assertion::And(a, b) => a.says_depth().max(b.says_depth()),
            Assertion::Exists(_, b) => b.says_depth(),
            _ => 0,
        }
    }
}

fn collect_pubs(t: &Term, out: &mut BTreeSet<Term>) {
    if !t.has_quant_var() {
        out.insert(t.clone());
    } else if let Some((a, b)) = t.children() {
        collect_pubs(a, out);
        collect_pubs(b, out);
    }
}

/// `at(γ)`.
pub fn atoms(g: &Assertion) -> Vec<Assertion> {
    let mut out = Vec::new();
    fn go(g: &Assertion, out: &mut Vec<Assertion>) {
        match g {
            Assertion::And(a, b) => {
                go(a, out);
                go(b, out);
            }
            Assertion::Exists(_, b) => go(b, out),
            Assertion::Says(_, b) => {
                if !out.contains(g) {
                    out.push(g.clone());
                }
                go(b, out);
            }
            _ => {
                if !out.contains(g) {
                    out.push(g.clone());
                }
            }
        }
    }
    go(g, &mut out);
    out
}

/// `𝔸(S, t)` given the analysis of `S`.
pub fn abstractable_positions_term_with(s: &Analysis, t: &Term) -> BTreeSet<Position> {
    let mut out = BTreeSet::new();
    if s.derives(t) {
        fn go(s: &Analysis, t: &Term, path: &mut Vec<u8>, out: &mut BTreeSet<Position>) {
            out.insert(Position(path.clone()));
            if let Some((a, b)) = t.children() {
                if s.derives(a) && s.derives(b) {
                    path.push(0);
                    go(s, a, path, out);
                    path.pop();
                    path.push(1);
                    go(s, b, path, out);
                    path.pop();
                }
            }
        }
        go(s, t, &mut Vec::new(), &mut out);
    }
    out
}

/// `𝔸(S, t)`.
pub fn abstractable_positions_term<'a>(s: impl IntoIterator<Item = &'a Term>, t: &Term) -> BTreeSet<Position> {
    abstractable_positions_term_with(&Analysis::new(s), t)
}

/// `𝔸(S, α)` given the analysis of `S`.
pub fn abstractable_positions_with(s: &Analysis, a: &Assertion) -> BTreeSet<Position> {
    let shift = |d: u8, ps: BTreeSet<Position>| ps.into_iter().map(move |p| p.prefixed(d));
    match a {
        Assertion::Eq(t, u) => {
            shift(0, abstractable_positions_term_with(s, t)).chain(shift(1, abstractable_positions_term_with(s, u))).collect()
        }
        Assertion::Pred(_, args) => {
            args.iter().enumerate().filter(|(_, u)| s.derives(u)).map(|(i, _)| Position(vec![(i + 1) as u8])).collect()
        }
        Assertion::Member(..) => [Position(vec![0])].into_iter().collect(),
        Assertion::And(x, y) => shift(0, abstractable_positions_with(s, x)).chain(shift(1, abstractable_positions_with(s, y))).collect(),
        Assertion::Exists(v, b) => {
            let mut s2 = s.clone();
            s2.extend([&Term::var(v.clone())]);
            shift(0, abstractable_positions_with(&s2, b)).collect()
        }
        Assertion::Says(_, b) => std::iter::once(Position(vec![0])).chain(shift(1, abstractable_positions_with(s, b))).collect(),
    }
}

/// `𝔸(S, α)`.
pub fn abstractable_positions<'a>(s: impl IntoIterator<Item = &'a Term>, a: &Assertion) -> BTreeSet<Position> {
    abstractable_positions_with(&Analysis::new(s), a)
}

/// A knowledge pair `(S; A)` or `(T; E)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgePair {
    pub terms: BTreeSet<Term>,
    pub assertions: Vec<Assertion>,
}

impl KnowledgePair {
    pub fn new(terms: impl IntoIterator<Item = Term>, assertions: impl IntoIterator<Item = Assertion>) -> KnowledgePair {
        let mut kp = KnowledgePair { terms: terms.into_iter().collect(), assertions: Vec::new() };
        for a in assertions {
            kp.add_assertion(a);
        }
        kp
    }

    pub fn add_assertion(&mut self, a: Assertion) {
        if !self.assertions.contains(&a) {
            self.assertions.push(a);
        }
    }

    /// `update((X;Φ), α) = (X ∪ pubs(α); Φ ∪ {α})`.
    pub fn update(&mut self, a: &Assertion) {
        self.terms.extend(a.pubs());
        self.add_assertion(a.clone());
    }

    pub fn apply(&self, s: &Subst) -> KnowledgePair {
        KnowledgePair::new(self.terms.iter().map(|t| s.apply(t)), self.assertions.iter().map(|a| a.apply(s)))
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            t.collect_vars(&mut out);
        }
        for a in &self.assertions {
            out.extend(a.vars());
        }
        out
    }

    pub fn fv(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            t.collect_vars(&mut out);
        }
        for a in &self.assertions {
            out.extend(a.fv());
        }
        out
    }

    pub fn bv(&self) -> BTreeSet<Variable> {
        self.assertions.iter().flat_map(|a| a.bv()).collect()
    }

    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            t.collect_subterms(&mut out);
        }
        for a in &self.assertions {
            out.extend(a.subterms());
        }
        out
    }

    /// Why the pair fails to be sanitized, if it does.
    pub fn sanitization_error(&self) -> Option<String> {
        if let Some(v) = self.fv().into_iter().find(|v| v.is_quant()) {
            return Some(format!("free quantification variable {v}"));
        }
        for a in &self.assertions {
            if let Some(t) = a.pubs().into_iter().find(|t| !self.terms.contains(t)) {
                return Some(format!("public term {t} of {a} is missing from the term set"));
            }
        }
        None
    }

    pub fn is_sanitized(&self) -> bool {
        self.sanitization_error().is_none()
    }

    /// Every assertion is an atom and every free quantification variable is a term.
    pub fn is_pure(&self) -> bool {
        self.assertions
            .iter()
            .all(|a| a.is_atom() && a.fv().into_iter().filter(|v| v.is_quant()).all(|v| self.terms.contains(&Term::var(v))))
    }

    /// `ker(S; A)`: bound variables join the terms, atoms replace formulas.
    pub fn kernel(&self) -> Result<KnowledgePair> {
        if let Some(e) = self.sanitization_error() {
            return Err(Error::NotSanitized(e));
        }
        Ok(self.kernel_unchecked())
    }

    pub fn kernel_unchecked(&self) -> KnowledgePair {
        let mut terms = self.terms.clone();
        terms.extend(self.bv().into_iter().map(Term::var));
        let mut assertions = Vec::new();
        for a in &self.assertions {
            for f in a.subformulas() {
                if f.is_atom() && !assertions.contains(&f) {
                    assertions.push(f);
                }
            }
        }
        KnowledgePair { terms, assertions }
    }

    pub fn check_mode(&self, mode: Mode) -> Result<()> {
        self.assertions.iter().try_for_each(|a| a.check_mode(mode))
    }
}

impl fmt::Display for KnowledgePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        let asr: Vec<String> = self.assertions.iter().map(|a| a.to_string()).collect();
        write!(f, "({{{}}}; {{{}}})", ts.join(", "), asr.join(", "))
    }
}

/// Key needed to speak for a `says` subject: an agent or one of its keys.
pub fn says_key(subject: &Term) -> Option<Term> {
    let n = subject.as_name()?;
    match n.kind() {
        NameKind::Agent => n.secret_key().map(Term::name),
        NameKind::Key => n.inverse().map(Term::name),
        _ => None,
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assertion::Eq(t, u) => write!(f, "{t} ~ {u}"),
            Assertion::Pred(p, args) => {
                let a: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                write!(f, "{p}({})", a.join(", "))
            }
            Assertion::Member(t, l) => {
                let a: Vec<&str> = l.iter().map(|n| n.id()).collect();
                write!(f, "member({t}, [{}])", a.join(", "))
            }
            Assertion::And(a, b) => write!(f, "and({a}, {b})"),
            Assertion::Exists(..) => {
                let mut vs = Vec::new();
                let mut cur = self;
                while let Assertion::Exists(v, b) = cur {
                    vs.push(v.to_string());
                    cur = b;
                }
                write!(f, "exists {}. {cur}", vs.join(" "))
            }
            Assertion::Says(s, b) => write!(f, "says({s}, {b})"),
        }
    }
}

impl fmt::Debug for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for Assertion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Sort a set of printable values by their rendering.
pub fn sorted_strings<T: fmt::Display>(xs: impl IntoIterator<Item = T>) -> Vec<String> {
    let mut v: Vec<String> = xs.into_iter().map(|x| x.to_string()).collect();
    v.sort();
    v.dedup();
    v
}
