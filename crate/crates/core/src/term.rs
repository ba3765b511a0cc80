//! Names, variables, hash-consed terms, positions and substitutions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Identifier of the reserved spare name.
pub const SPARE_ID: &str = "_m";
/// Identifier of the dummy public name `*` used for empty receives.
pub const DUMMY_ID: &str = "*";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NameKind {
    Plain,
    Key,
    Agent,
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct NameData {
    id: Box<str>,
    kind: NameKind,
    /// Inverse key id for keys, public/secret key ids for agents.
    link: Option<Box<str>>,
    link2: Option<Box<str>>,
}

/// An atomic name. Keys carry the id of their inverse; agents carry their key pair.
#[derive(Clone)]
pub struct Name(Arc<NameData>);

impl Name {
    pub fn plain(id: &str) -> Name {
        Name(Arc::new(NameData { id: id.into(), kind: NameKind::Plain, link: None, link2: None }))
    }

    /// A key whose inverse is `inverse` (pass the same id for a symmetric key).
    pub fn key(id: &str, inverse: &str) -> Name {
        Name(Arc::new(NameData { id: id.into(), kind: NameKind::Key, link: Some(inverse.into()), link2: None }))
    }

    pub fn symmetric_key(id: &str) -> Name {
        Name::key(id, id)
    }

    pub fn agent(id: &str, pk: &str, sk: &str) -> Name {
        Name(Arc::new(NameData { id: id.into(), kind: NameKind::Agent, link: Some(pk.into()), link2: Some(sk.into()) }))
    }

    pub fn spare() -> Name {
        Name::plain(SPARE_ID)
    }

    pub fn dummy() -> Name {
        Name::plain(DUMMY_ID)
    }

    pub fn id(&self) -> &str {
        &self.0.id
    }

    pub fn kind(&self) -> NameKind {
        self.0.kind
    }

    pub fn is_spare(&self) -> bool {
        &*self.0.id == SPARE_ID
    }

    /// `inv(k)` for keys.
    pub fn inverse(&self) -> Option<Name> {
        match self.0.kind {
            NameKind::Key => {
                let inv = self.0.link.as_deref()?;
                if inv == self.id() {
                    Some(self.clone())
                } else {
                    Some(Name::key(inv, self.id()))
                }
            }
            _ => None,
        }
    }

    pub fn public_key(&self) -> Option<Name> {
        match (self.0.kind, &self.0.link, &self.0.link2) {
            (NameKind::Agent, Some(pk), Some(sk)) => Some(Name::key(pk, sk)),
            _ => None,
        }
    }

    pub fn secret_key(&self) -> Option<Name> {
        match (self.0.kind, &self.0.link, &self.0.link2) {
            (NameKind::Agent, Some(pk), Some(sk)) => Some(Name::key(sk, pk)),
            _ => None,
        }
    }

    fn cmp_key(&self) -> (&str, NameKind, Option<&str>, Option<&str>) {
        (&self.0.id, self.0.kind, self.0.link.as_deref(), self.0.link2.as_deref())
    }
}

impl PartialEq for Name {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.cmp_key() == other.cmp_key()
    }
}
impl Eq for Name {}
impl Hash for Name {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.id.hash(state)
    }
}
impl PartialOrd for Name {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Name {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cmp_key().cmp(&other.cmp_key())
    }
}
impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}
impl Serialize for Name {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    /// Instantiated by the run substitution σ; written `?x`.
    Inst,
    /// Bound by quantifiers.
    Quant,
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    id: Arc<str>,
    sort: Sort,
}

impl Variable {
    pub fn new(id: &str, sort: Sort) -> Variable {
        Variable { id: id.into(), sort }
    }

    pub fn inst(id: &str) -> Variable {
        Variable::new(id, Sort::Inst)
    }

    pub fn quant(id: &str) -> Variable {
        Variable::new(id, Sort::Quant)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn sort(&self) -> Sort {
        self.sort
    }

    pub fn is_quant(&self) -> bool {
        self.sort == Sort::Quant
    }

    pub fn renamed(&self, id: &str) -> Variable {
        Variable::new(id, self.sort)
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sort {
            Sort::Inst => write!(f, "?{}", self.id),
            Sort::Quant => f.write_str(&self.id),
        }
    }
}
impl Serialize for Variable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Clone, PartialEq, Eq)]
pub enum TermNode {
    Name(Name),
    Var(Variable),
    Pair(Term, Term),
    Enc(Term, Term),
}

struct Inner {
    node: TermNode,
    hash: u64,
    has_var: bool,
    has_qvar: bool,
}

/// A hash-consed term. Structurally equal terms share one allocation, so
/// equality is a pointer comparison.
#[derive(Clone)]
pub struct Term(Arc<Inner>);

const SHARDS: usize = 32;

struct Interner {
    shards: Vec<Mutex<HashMap<u64, Vec<Term>>>>,
}

fn interner() -> &'static Interner {
    static POOL: OnceLock<Interner> = OnceLock::new();
    POOL.get_or_init(|| Interner { shards: (0..SHARDS).map(|_| Mutex::new(HashMap::new())).collect() })
}

fn mix(h: u64, v: u64) -> u64 {
    let x = (h ^ v).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x ^ (x >> 29)
}

fn str_hash(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn node_hash(node: &TermNode) -> u64 {
    match node {
        TermNode::Name(n) => mix(1, str_hash(n.id())),
        TermNode::Var(v) => mix(2 + v.sort as u64, str_hash(v.id())),
        TermNode::Pair(a, b) => mix(mix(5, a.0.hash), b.0.hash.rotate_left(17)),
        TermNode::Enc(a, b) => mix(mix(7, a.0.hash), b.0.hash.rotate_left(23)),
    }
}

fn shallow_eq(a: &TermNode, b: &TermNode) -> bool {
    match (a, b) {
        (TermNode::Name(x), TermNode::Name(y)) => x == y,
        (TermNode::Var(x), TermNode::Var(y)) => x == y,
        (TermNode::Pair(a0, a1), TermNode::Pair(b0, b1)) | (TermNode::Enc(a0, a1), TermNode::Enc(b0, b1)) => {
            Arc::ptr_eq(&a0.0, &b0.0) && Arc::ptr_eq(&a1.0, &b1.0)
        }
        _ => false,
    }
}

fn intern(node: TermNode) -> Term {
    let hash = node_hash(&node);
    let (has_var, has_qvar) = match &node {
        TermNode::Name(_) => (false, false),
        TermNode::Var(v) => (true, v.is_quant()),
        TermNode::Pair(a, b) | TermNode::Enc(a, b) => (a.0.has_var || b.0.has_var, a.0.has_qvar || b.0.has_qvar),
    };
    let shard = &interner().shards[(hash as usize) % SHARDS];
    let mut map = shard.lock().unwrap_or_else(|e| e.into_inner());
    let bucket = map.entry(hash).or_default();
    if let Some(t) = bucket.iter().find(|t| shallow_eq(&t.0.node, &node)) {
        return t.clone();
    }
    let t = Term(Arc::new(Inner { node, hash, has_var, has_qvar }));
    bucket.push(t.clone());
    t
}

impl Term {
    pub fn name(n: Name) -> Term {
        intern(TermNode::Name(n))
    }

    pub fn var(v: Variable) -> Term {
        intern(TermNode::Var(v))
    }

    pub fn pair(a: Term, b: Term) -> Term {
        intern(TermNode::Pair(a, b))
    }

    pub fn enc(payload: Term, key: Term) -> Term {
        intern(TermNode::Enc(payload, key))
    }

    /// Rebuild a compound with the same constructor as `self`.
    pub fn with_children(&self, a: Term, b: Term) -> Term {
        match self.node() {
            TermNode::Pair(..) => Term::pair(a, b),
            TermNode::Enc(..) => Term::enc(a, b),
            _ => self.clone(),
        }
    }

    pub fn node(&self) -> &TermNode {
        &self.0.node
    }

    pub fn as_name(&self) -> Option<&Name> {
        match self.node() {
            TermNode::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self.node() {
            TermNode::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn children(&self) -> Option<(&Term, &Term)> {
        match self.node() {
            TermNode::Pair(a, b) | TermNode::Enc(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn is_atomic(&self) -> bool {
        self.children().is_none()
    }

    pub fn is_pair(&self) -> bool {
        matches!(self.node(), TermNode::Pair(..))
    }

    pub fn is_enc(&self) -> bool {
        matches!(self.node(), TermNode::Enc(..))
    }

    /// True when both terms are compounds built with the same constructor.
    pub fn same_constructor(&self, other: &Term) -> bool {
        matches!((self.node(), other.node()), (TermNode::Pair(..), TermNode::Pair(..)) | (TermNode::Enc(..), TermNode::Enc(..)))
    }

    pub fn is_ground(&self) -> bool {
        !self.0.has_var
    }

    pub fn has_quant_var(&self) -> bool {
        self.0.has_qvar
    }

    /// `inv(k)`; only declared keys have one, so nothing else decrypts.
    pub fn inverse_key(&self) -> Option<Term> {
        self.as_name()?.inverse().map(Term::name)
    }

    /// Distinct subterms, `st(t)`.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    pub fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        if out.insert(self.clone()) {
            if let Some((a, b)) = self.children() {
                a.collect_subterms(out);
                b.collect_subterms(out);
            }
        }
    }

    /// Number of distinct subterms.
    pub fn dagsize(&self) -> usize {
        let mut seen = HashSet::new();
        fn walk(t: &Term, seen: &mut HashSet<usize>) {
            if seen.insert(Arc::as_ptr(&t.0) as usize) {
                if let Some((a, b)) = t.children() {
                    walk(a, seen);
                    walk(b, seen);
                }
            }
        }
        walk(self, &mut seen);
        seen.len()
    }

    /// Number of nodes of the syntax tree.
    pub fn tree_size(&self) -> usize {
        match self.children() {
            Some((a, b)) => 1 + a.tree_size() + b.tree_size(),
            None => 1,
        }
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<Variable>) {
        if self.is_ground() {
            return;
        }
        match self.node() {
            TermNode::Var(v) => {
                out.insert(v.clone());
            }
            TermNode::Pair(a, b) | TermNode::Enc(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            TermNode::Name(_) => {}
        }
    }

    pub fn names(&self) -> BTreeSet<Name> {
        self.subterms().into_iter().filter_map(|t| t.as_name().cloned()).collect()
    }

    pub fn contains(&self, sub: &Term) -> bool {
        if self == sub {
            return true;
        }
        match self.children() {
            Some((a, b)) => a.contains(sub) || b.contains(sub),
            None => false,
        }
    }

    pub fn occurs(&self, v: &Variable) -> bool {
        !self.is_ground() && self.vars().contains(v)
    }

    pub fn positions(&self) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        let mut path = Vec::new();
        fn walk(t: &Term, path: &mut Vec<u8>, out: &mut BTreeSet<Position>) {
            out.insert(Position(path.clone()));
            if let Some((a, b)) = t.children() {
                path.push(0);
                walk(a, path, out);
                path.pop();
                path.push(1);
                walk(b, path, out);
                path.pop();
            }
        }
        walk(self, &mut path, &mut out);
        out
    }

    pub fn subterm_at(&self, p: &Position) -> Result<Term> {
        let mut cur = self.clone();
        for &d in &p.0 {
            let next = match (cur.children(), d) {
                (Some((a, _)), 0) => a.clone(),
                (Some((_, b)), 1) => b.clone(),
                _ => return Err(Error::InvalidPosition(p.to_string())),
            };
            cur = next;
        }
        Ok(cur)
    }

    /// Replace the subterms at every position in `ps` by `r`.
    pub fn replace_at(&self, ps: &BTreeSet<Position>, r: &Term) -> Result<Term> {
        for p in ps {
            self.subterm_at(p)?;
        }
        Ok(self.replace_rec(ps, &mut Vec::new(), r))
    }

    fn replace_rec(&self, ps: &BTreeSet<Position>, path: &mut Vec<u8>, r: &Term) -> Term {
        if ps.contains(&Position(path.clone())) {
            return r.clone();
        }
        if !ps.iter().any(|p| p.0.starts_with(path)) {
            return self.clone();
        }
        match self.children() {
            Some((a, b)) => {
                path.push(0);
                let a2 = a.replace_rec(ps, path, r);
                path.pop();
                path.push(1);
                let b2 = b.replace_rec(ps, path, r);
                path.pop();
                self.with_children(a2, b2)
            }
            None => self.clone(),
        }
    }

    /// `pos_of(r, t)`: every position of `self` holding `r`.
    pub fn pos_of(&self, r: &Term) -> BTreeSet<Position> {
        let mut out = BTreeSet::new();
        let mut path = Vec::new();
        fn walk(t: &Term, r: &Term, path: &mut Vec<u8>, out: &mut BTreeSet<Position>) {
            if t == r {
                out.insert(Position(path.clone()));
                return;
            }
            if let Some((a, b)) = t.children() {
                path.push(0);
                walk(a, r, path, out);
                path.pop();
                path.push(1);
                walk(b, r, path, out);
                path.pop();
            }
        }
        walk(self, r, &mut path, &mut out);
        out
    }

    fn tag(&self) -> u8 {
        match self.node() {
            TermNode::Name(_) => 0,
            TermNode::Var(_) => 1,
            TermNode::Pair(..) => 2,
            TermNode::Enc(..) => 3,
        }
    }

    fn structural_cmp(&self, other: &Term) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        match (self.node(), other.node()) {
            (TermNode::Name(a), TermNode::Name(b)) => a.cmp(b),
            (TermNode::Var(a), TermNode::Var(b)) => a.cmp(b),
            (TermNode::Pair(a0, a1), TermNode::Pair(b0, b1)) | (TermNode::Enc(a0, a1), TermNode::Enc(b0, b1)) => {
                a0.structural_cmp(b0).then_with(|| a1.structural_cmp(b1))
            }
            _ => self.tag().cmp(&other.tag()),
        }
    }

    /// Order used for deterministic tie-breaking: dagsize, then printed form.
    pub fn size_then_text(&self, other: &Term) -> Ordering {
        self.dagsize().cmp(&other.dagsize()).then_with(|| self.to_string().cmp(&other.to_string()))
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}
impl Eq for Term {}
impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash)
    }
}
impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if Arc::ptr_eq(&self.0, &other.0) {
            return Ordering::Equal;
        }
        self.0.hash.cmp(&other.0.hash).then_with(|| self.structural_cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            TermNode::Name(n) => write!(f, "{n}"),
            TermNode::Var(v) => write!(f, "{v}"),
            TermNode::Pair(a, b) => write!(f, "({a}, {b})"),
            TermNode::Enc(p, k) if k.is_atomic() => write!(f, "{{{p}}}{k}"),
            TermNode::Enc(p, k) => write!(f, "enc({p}, {k})"),
        }
    }
}
impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// `st(X)` for a collection of terms.
pub fn subterms_of<'a>(ts: impl IntoIterator<Item = &'a Term>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for t in ts {
        t.collect_subterms(&mut out);
    }
    out
}

/// A position: a digit path from the root. The empty path is ε.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Position(pub Vec<u8>);

impl Position {
    pub fn root() -> Position {
        Position(Vec::new())
    }

    pub fn child(&self, d: u8) -> Position {
        let mut v = self.0.clone();
        v.push(d);
        Position(v)
    }

    pub fn prefixed(&self, d: u8) -> Position {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(d);
        v.extend_from_slice(&self.0);
        Position(v)
    }

    pub fn is_prefix_of(&self, other: &Position) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&d| d < 10) {
            for d in &self.0 {
                write!(f, "{d}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
            f.write_str(&parts.join("."))
        }
    }
}
impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("ε")
        } else {
            fmt::Display::fmt(self, f)
        }
    }
}
impl FromStr for Position {
    type Err = Error;
    fn from_str(s: &str) -> Result<Position> {
        let bad = || Error::InvalidPosition(s.to_string());
        if s.contains('.') {
            s.split('.').map(|p| p.parse::<u8>().map_err(|_| bad())).collect::<Result<_>>().map(Position)
        } else {
            s.chars().map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(bad)).collect::<Result<_>>().map(Position)
        }
    }
}
impl Serialize for Position {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Render a set of positions as strings, ε as "".
pub fn position_strings(ps: &BTreeSet<Position>) -> BTreeSet<String> {
    ps.iter().map(|p| p.to_string()).collect()
}

/// A finite map from variables to terms.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subst(BTreeMap<Variable, Term>);

impl Subst {
    pub fn new() -> Subst {
        Subst(BTreeMap::new())
    }

    pub fn singleton(v: Variable, t: Term) -> Subst {
        let mut s = Subst::new();
        s.insert(v, t);
        s
    }

    pub fn insert(&mut self, v: Variable, t: Term) {
        self.0.insert(v, t);
    }

    pub fn remove(&mut self, v: &Variable) -> Option<Term> {
        self.0.remove(v)
    }

    pub fn get(&self, v: &Variable) -> Option<&Term> {
        self.0.get(v)
    }

    pub fn contains(&self, v: &Variable) -> bool {
        self.0.contains_key(v)
    }

    pub fn domain(&self) -> BTreeSet<Variable> {
        self.0.keys().cloned().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Term)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_ground(&self) -> bool {
        self.0.values().all(Term::is_ground)
    }

    pub fn apply(&self, t: &Term) -> Term {
        if self.0.is_empty() || t.is_ground() {
            return t.clone();
        }
        match t.node() {
            TermNode::Var(v) => self.0.get(v).cloned().unwrap_or_else(|| t.clone()),
            TermNode::Pair(a, b) | TermNode::Enc(a, b) => t.with_children(self.apply(a), self.apply(b)),
            TermNode::Name(_) => t.clone(),
        }
    }

    /// The substitution without the given variables.
    pub fn without<'a>(&self, vs: impl IntoIterator<Item = &'a Variable>) -> Subst {
        let mut s = self.clone();
        for v in vs {
            s.0.remove(v);
        }
        s
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Subst) -> Subst {
        let mut out: BTreeMap<Variable, Term> = other.0.iter().map(|(v, t)| (v.clone(), self.apply(t))).collect();
        for (v, t) in &self.0 {
            out.entry(v.clone()).or_insert_with(|| t.clone());
        }
        Subst(out)
    }

    /// Largest dagsize among the images.
    pub fn max_dagsize(&self) -> usize {
        self.0.values().map(Term::dagsize).max().unwrap_or(0)
    }

    pub fn total_dagsize(&self) -> usize {
        self.0.values().map(Term::dagsize).sum()
    }
}

impl FromIterator<(Variable, Term)> for Subst {
    fn from_iter<I: IntoIterator<Item = (Variable, Term)>>(iter: I) -> Self {
        Subst(iter.into_iter().collect())
    }
}

impl fmt::Display for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (v, t)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v} -> {t}")?;
        }
        f.write_str("]")
    }
}
impl fmt::Debug for Subst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
impl Serialize for Subst {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m: BTreeMap<String, String> = self.0.iter().map(|(v, t)| (v.to_string(), t.to_string())).collect();
        m.serialize(s)
    }
}

/// Syntactic unification with occurs check. Returns an idempotent mgu.
pub fn unify(eqs: &[(Term, Term)]) -> Option<Subst> {
    let mut sigma = Subst::new();
    let mut work: Vec<(Term, Term)> = eqs.iter().rev().cloned().collect();
    while let Some((a, b)) = work.pop() {
        let a = sigma.apply(&a);
        let b = sigma.apply(&b);
        if a == b {
            continue;
        }
        match (a.node(), b.node()) {
            (TermNode::Var(v), _) => bind(&mut sigma, v, &b)?,
            (_, TermNode::Var(v)) => bind(&mut sigma, v, &a)?,
            (TermNode::Pair(a0, a1), TermNode::Pair(b0, b1)) | (TermNode::Enc(a0, a1), TermNode::Enc(b0, b1)) => {
                work.push((a1.clone(), b1.clone()));
                work.push((a0.clone(), b0.clone()));
            }
            _ => return None,
        }
    }
    Some(sigma)
}

fn bind(sigma: &mut Subst, v: &Variable, t: &Term) -> Option<()> {
    if t.occurs(v) {
        return None;
    }
    let single = Subst::singleton(v.clone(), t.clone());
    for val in sigma.0.values_mut() {
        *val = single.apply(val);
    }
    sigma.insert(v.clone(), t.clone());
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Term {
        Term::name(Name::plain(s))
    }
    fn k(s: &str) -> Term {
        Term::name(Name::symmetric_key(s))
    }

    #[test]
    fn keys_with_different_inverses_are_distinct() {
        let sym = Term::name(Name::symmetric_key("kx"));
        let asym = Term::name(Name::key("kx", "kx_inv"));
        assert_ne!(sym, asym);
        assert_eq!(sym.inverse_key(), Some(sym.clone()));
        assert_eq!(asym.inverse_key().map(|t| t.to_string()).as_deref(), Some("kx_inv"));
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let a = Term::pair(n("a"), n("b"));
        let b = Term::pair(n("a"), n("b"));
        assert!(Arc::ptr_eq(&a.0, &b.0));
        assert_ne!(a, Term::pair(n("b"), n("a")));
    }

    #[test]
    fn example_three_positions() {
        let t = Term::pair(Term::enc(Term::enc(n("m"), k("k")), k("k'")), Term::pair(n("n"), n("n'")));
        let got = position_strings(&t.positions());
        let want: BTreeSet<String> = ["", "0", "1", "00", "01", "10", "11", "000", "001"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
        assert_eq!(t.dagsize(), 9);
    }

    #[test]
    fn replace_and_read_back() {
        let x = Term::var(Variable::quant("x"));
        let t = Term::enc(x.clone(), k("k"));
        let r = Term::pair(n("a"), n("b"));
        let out = t.replace_at(&t.pos_of(&x), &r).unwrap();
        assert_eq!(out, Term::enc(r.clone(), k("k")));
        assert_eq!(Term::pair(n("a"), n("b")).subterm_at(&"1".parse().unwrap()).unwrap(), n("b"));
        assert!(t.subterm_at(&"00".parse().unwrap()).is_err());
    }

    #[test]
    fn unify_cases() {
        let x = Term::var(Variable::inst("x"));
        let y = Term::var(Variable::inst("y"));
        let mk = Term::enc(n("m"), k("k"));
        let s = unify(&[(Term::pair(x.clone(), mk.clone()), Term::pair(n("n"), y.clone()))]).unwrap();
        assert_eq!(s.apply(&x), n("n"));
        assert_eq!(s.apply(&y), mk);
        assert!(unify(&[(Term::pair(n("m"), n("n")), Term::enc(n("p"), k("k")))]).is_none());
        assert!(unify(&[(x.clone(), Term::pair(n("m"), x.clone()))]).is_none());
    }

    #[test]
    fn position_parse_round_trip() {
        for s in ["", "0", "0110", "1.12.3"] {
            assert_eq!(s.parse::<Position>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn key_inverse_is_involution() {
        let pk = Name::key("pk_a", "sk_a");
        assert_eq!(pk.inverse().unwrap().inverse().unwrap(), pk);
        let k = Name::symmetric_key("k");
        assert_eq!(k.inverse().unwrap(), k);
        let a = Name::agent("a", "pk_a", "sk_a");
        assert_eq!(a.public_key().unwrap().inverse().unwrap(), a.secret_key().unwrap());
    }
}
