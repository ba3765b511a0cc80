//! Dolev-Yao derivability: analysis closure, synthesis, normal proofs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::term::{subterms_of, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DyRule {
    Ax,
    Pair,
    Enc,
    Fst,
    Snd,
    Dec,
}

impl DyRule {
    pub fn is_constructor(self) -> bool {
        matches!(self, DyRule::Pair | DyRule::Enc)
    }

    pub fn is_destructor(self) -> bool {
        matches!(self, DyRule::Fst | DyRule::Snd | DyRule::Dec)
    }

    pub fn label(self) -> &'static str {
        match self {
            DyRule::Ax => "ax",
            DyRule::Pair => "pair",
            DyRule::Enc => "enc",
            DyRule::Fst => "fst",
            DyRule::Snd => "snd",
            DyRule::Dec => "dec",
        }
    }
}

/// A proof tree for `X ⊢dy t`. For destructors the major premise comes first.
#[derive(Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DyProof {
    pub rule: DyRule,
    pub premises: Vec<Arc<DyProof>>,
    pub conclusion: Term,
}

impl DyProof {
    pub fn ax(t: Term) -> Arc<DyProof> {
        Arc::new(DyProof { rule: DyRule::Ax, premises: vec![], conclusion: t })
    }

    pub fn node(rule: DyRule, premises: Vec<Arc<DyProof>>, conclusion: Term) -> Arc<DyProof> {
        Arc::new(DyProof { rule, premises, conclusion })
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    pub fn axioms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| {
            if p.rule == DyRule::Ax {
                out.insert(p.conclusion.clone());
            }
        });
        out
    }

    /// Conclusions of all nodes.
    pub fn terms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.walk(&mut |p| {
            out.insert(p.conclusion.clone());
        });
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a DyProof)) {
        f(self);
        for p in &self.premises {
            p.walk(f);
        }
    }

    /// Check every node against its rule, with axioms drawn from `x`.
    pub fn check(&self, x: &BTreeSet<Term>) -> Result<(), String> {
        let c = &self.conclusion;
        let prem: Vec<&Term> = self.premises.iter().map(|p| &p.conclusion).collect();
        let ok = match (self.rule, prem.as_slice()) {
            (DyRule::Ax, []) => x.contains(c),
            (DyRule::Pair, [a, b]) => *c == Term::pair((*a).clone(), (*b).clone()),
            (DyRule::Enc, [a, k]) => *c == Term::enc((*a).clone(), (*k).clone()),
            (DyRule::Fst, [p]) => p.is_pair() && p.children().map(|(a, _)| a) == Some(c),
            (DyRule::Snd, [p]) => p.is_pair() && p.children().map(|(_, b)| b) == Some(c),
            (DyRule::Dec, [e, k]) => match e.children() {
                Some((payload, key)) if e.is_enc() => payload == c && key.inverse_key().as_ref() == Some(*k),
                _ => false,
            },
            _ => false,
        };
        if !ok {
            return Err(format!("bad {} node concluding {}", self.rule.label(), c));
        }
        self.premises.iter().try_for_each(|p| p.check(x))
    }

    /// No constructor conclusion is the major premise of a destructor.
    pub fn is_normal(&self) -> bool {
        if self.rule.is_destructor() && self.premises[0].rule.is_constructor() {
            return false;
        }
        self.premises.iter().all(|p| p.is_normal())
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
        let _ = writeln!(s, "{}{}  [{}]", "  ".repeat(depth), self.conclusion, self.rule.label());
    }
}

impl fmt::Debug for DyProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rule.label())?;
        for (i, p) in self.premises.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p:?}")?;
        }
        write!(f, ") ⊢ {}", self.conclusion)
    }
}

/// Rewrite destructor-of-constructor redexes away.
pub fn normalize_dy(p: &Arc<DyProof>) -> Arc<DyProof> {
    let premises: Vec<Arc<DyProof>> = p.premises.iter().map(normalize_dy).collect();
    if p.rule.is_destructor() && premises[0].rule.is_constructor() {
        let major = &premises[0];
        return match p.rule {
            DyRule::Fst => major.premises[0].clone(),
            DyRule::Snd => major.premises[1].clone(),
            _ => major.premises[0].clone(),
        };
    }
    if premises.iter().zip(&p.premises).all(|(a, b)| Arc::ptr_eq(a, b)) {
        return p.clone();
    }
    DyProof::node(p.rule, premises, p.conclusion.clone())
}

/// The analysis closure of a term set: everything obtainable by destructors,
/// with dec gated on synthesizing the inverse key.
#[derive(Clone, Debug)]
pub struct Analysis {
    axioms: BTreeSet<Term>,
    known: BTreeMap<Term, Arc<DyProof>>,
}

impl Analysis {
    pub fn new<'a>(x: impl IntoIterator<Item = &'a Term>) -> Analysis {
        let mut a = Analysis { axioms: BTreeSet::new(), known: BTreeMap::new() };
        a.extend(x);
        a
    }

    /// Add axioms and recompute the closure incrementally.
    pub fn extend<'a>(&mut self, x: impl IntoIterator<Item = &'a Term>) {
        let mut work = Vec::new();
        for t in x {
            if self.axioms.insert(t.clone()) && !self.known.contains_key(t) {
                let p = DyProof::ax(t.clone());
                self.known.insert(t.clone(), p.clone());
                work.push(p);
            }
        }
        let mut pending: Vec<Arc<DyProof>> = self.known.values().filter(|p| p.conclusion.is_enc()).cloned().collect();
        loop {
            while let Some(p) = work.pop() {
                let t = p.conclusion.clone();
                match t.children() {
                    Some((a, b)) if t.is_pair() => {
                        for (rule, c) in [(DyRule::Fst, a), (DyRule::Snd, b)] {
                            if !self.known.contains_key(c) {
                                let q = DyProof::node(rule, vec![p.clone()], c.clone());
                                self.known.insert(c.clone(), q.clone());
                                work.push(q);
                            }
                        }
                    }
                    Some(_) => pending.push(p),
                    None => {}
                }
            }
            let mut progressed = false;
            let mut still = Vec::new();
            for p in pending.drain(..) {
                let (payload, key) = p.conclusion.children().expect("enc");
                if self.known.contains_key(payload) {
                    continue;
                }
                match key.inverse_key().and_then(|inv| self.synthesize(&inv)) {
                    Some(kp) => {
                        let q = DyProof::node(DyRule::Dec, vec![p.clone(), kp], payload.clone());
                        self.known.insert(payload.clone(), q.clone());
                        work.push(q);
                        progressed = true;
                    }
                    None => still.push(p),
                }
            }
            pending = still;
            if !progressed {
                break;
            }
        }
    }

    pub fn axioms(&self) -> &BTreeSet<Term> {
        &self.axioms
    }

    /// Terms in the analysis closure.
    pub fn closure(&self) -> impl Iterator<Item = &Term> {
        self.known.keys()
    }

    pub fn in_closure(&self, t: &Term) -> bool {
        self.known.contains_key(t)
    }

    pub fn derives(&self, t: &Term) -> bool {
        let mut memo = HashMap::new();
        self.derives_memo(t, &mut memo)
    }

    fn derives_memo(&self, t: &Term, memo: &mut HashMap<Term, bool>) -> bool {
        if self.known.contains_key(t) {
            return true;
        }
        if let Some(&b) = memo.get(t) {
            return b;
        }
        let b = match t.children() {
            Some((a, c)) => self.derives_memo(a, memo) && self.derives_memo(c, memo),
            None => false,
        };
        memo.insert(t.clone(), b);
        b
    }

    /// A normal proof of `t`, if derivable.
    pub fn synthesize(&self, t: &Term) -> Option<Arc<DyProof>> {
        if let Some(p) = self.known.get(t) {
            return Some(p.clone());
        }
        let (a, b) = t.children()?;
        let pa = self.synthesize(a)?;
        let pb = self.synthesize(b)?;
        let rule = if t.is_pair() { DyRule::Pair } else { DyRule::Enc };
        Some(DyProof::node(rule, vec![pa, pb], t.clone()))
    }
}

/// Decide `X ⊢dy t`, returning a normal proof.
pub fn dy_derives<'a>(x: impl IntoIterator<Item = &'a Term>, t: &Term) -> Option<Arc<DyProof>> {
    Analysis::new(x).synthesize(t)
}

/// Subterm property check for a normal proof of `t` from `x`.
pub fn has_subterm_property(p: &DyProof, x: &BTreeSet<Term>) -> bool {
    let mut bound = subterms_of(x.iter());
    let strong = p.rule.is_destructor() || p.rule == DyRule::Ax;
    if !strong {
        p.conclusion.collect_subterms(&mut bound);
    }
    p.terms().is_subset(&bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Name;

    fn n(s: &str) -> Term {
        Term::name(Name::plain(s))
    }

    #[test]
    fn echo_intruder_step() {
        let pk_a = Term::name(Name::key("pk_a", "sk_a"));
        let pk_b = Term::name(Name::key("pk_b", "sk_b"));
        let pk_i = Term::name(Name::key("pk_i", "sk_i"));
        let sk_i = Term::name(Name::key("sk_i", "pk_i"));
        let inner = Term::enc(n("m"), pk_b.clone());
        let msg = Term::enc(Term::pair(pk_a, inner.clone()), pk_i);
        let x: BTreeSet<Term> = [msg, sk_i].into_iter().collect();
        let p = dy_derives(&x, &inner).expect("derivable");
        assert_eq!(p.rule, DyRule::Snd);
        assert_eq!(p.premises[0].rule, DyRule::Dec);
        assert!(p.is_normal());
        assert!(p.check(&x).is_ok());
        assert!(has_subterm_property(&p, &x));
        assert!(dy_derives(&x, &n("m")).is_none());
    }

    #[test]
    fn key_needed_later_unlocks_earlier_encryption() {
        let k = Term::name(Name::symmetric_key("k"));
        let x: BTreeSet<Term> = [Term::enc(n("s"), k.clone()), Term::pair(n("a"), k.clone())].into_iter().collect();
        assert!(dy_derives(&x, &n("s")).is_some());
    }

    #[test]
    fn normalize_removes_detours() {
        let a = DyProof::ax(n("a"));
        let b = DyProof::ax(n("b"));
        let pair = DyProof::node(DyRule::Pair, vec![a.clone(), b], Term::pair(n("a"), n("b")));
        let detour = DyProof::node(DyRule::Fst, vec![pair], n("a"));
        assert!(!detour.is_normal());
        let norm = normalize_dy(&detour);
        assert_eq!(*norm, *a);
    }
}
