//! Saturation over the finite atom universe of a context and a goal.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use super::{EqContext, EqProof, EqRule};
use crate::assertion::{says_key, Assertion, Mode};
use crate::error::{Error, Result};
use crate::term::{Name, Term};

/// An atom of the saturation universe.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtomId {
    /// `Z[i] ⋈ Z[j]`.
    Eq(u32, u32),
    /// `Z[i] ⟵ lists[l]`.
    Mem(u32, u32),
}

/// How an atom was first derived.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Just {
    Ax,
    Eq,
    Sym(AtomId),
    Trans(AtomId, AtomId),
    Cons(AtomId, AtomId),
    Proj(u8, AtomId),
    Prom(AtomId),
    Wk(AtomId),
    Int(Vec<AtomId>),
    Subst(AtomId, AtomId),
}

#[derive(Clone, Debug)]
enum SaysJust {
    Ax,
    Say,
}

/// Saturated state: every derivable atom over the universe with its first
/// derivation.
#[derive(Clone, Debug)]
pub struct Saturation {
    ctx: Arc<EqContext>,
    z: Vec<Term>,
    index: HashMap<Term, u32>,
    derivable: Vec<bool>,
    parents0: Vec<Vec<u32>>,
    parents1: Vec<Vec<u32>>,
    lists: Vec<Vec<Name>>,
    list_index: HashMap<Vec<Name>, u32>,
    lists_with: HashMap<Name, Vec<u32>>,
    atoms: HashMap<AtomId, (Just, usize)>,
    left: Vec<BTreeSet<u32>>,
    right: Vec<BTreeSet<u32>>,
    mem_of: Vec<BTreeSet<u32>>,
    says: Vec<(Assertion, Option<SaysJust>)>,
    queue: VecDeque<AtomId>,
    rounds: usize,
}

impl Saturation {
    /// Saturate `ctx` over `Z = st(T ∪ goal terms) ∪ st(E)`.
    pub fn new(ctx: Arc<EqContext>, goals: &[Assertion]) -> Result<Saturation> {
        if ctx.mode == Mode::Core {
            if let Some(g) = goals.iter().find(|g| !matches!(g, Assertion::Eq(..))) {
                return Err(Error::Mode(format!("{g} is not an equality")));
            }
        }
        let mut s = Saturation {
            ctx: ctx.clone(),
            z: Vec::new(),
            index: HashMap::new(),
            derivable: Vec::new(),
            parents0: Vec::new(),
            parents1: Vec::new(),
            lists: Vec::new(),
            list_index: HashMap::new(),
            lists_with: HashMap::new(),
            atoms: HashMap::new(),
            left: Vec::new(),
            right: Vec::new(),
            mem_of: Vec::new(),
            says: Vec::new(),
            queue: VecDeque::new(),
            rounds: 0,
        };
        let mut universe: BTreeSet<Term> = BTreeSet::new();
        for t in &ctx.terms {
            t.collect_subterms(&mut universe);
        }
        for a in ctx.atoms.iter().chain(goals) {
            universe.extend(a.subterms());
        }
        let mut lists = BTreeSet::new();
        for a in ctx.atoms.iter().chain(goals) {
            lists.extend(a.lists());
        }
        s.add_terms_inner(universe.iter(), lists);
        for a in &ctx.atoms {
            s.seed_atom(a);
        }
        s.run();
        s.register_says(goals);
        Ok(s)
    }

    fn seed_atom(&mut self, a: &Assertion) {
        match a {
            Assertion::Eq(t, u) => {
                let id = AtomId::Eq(self.index[t], self.index[u]);
                self.add(id, Just::Ax, 0);
            }
            Assertion::Member(t, l) => {
                let id = AtomId::Mem(self.index[t], self.list_index[l]);
                self.add(id, Just::Ax, 0);
            }
            _ => {}
        }
    }

    pub fn context(&self) -> &Arc<EqContext> {
        &self.ctx
    }

    pub fn universe(&self) -> &[Term] {
        &self.z
    }

    /// Number of fixpoint generations used.
    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    fn add_terms_inner<'a>(&mut self, terms: impl Iterator<Item = &'a Term>, lists: BTreeSet<Vec<Name>>) {
        let mut sorted: Vec<Term> = terms.filter(|t| !self.index.contains_key(*t)).cloned().collect();
        sorted.sort_by_key(|t| t.dagsize());
        let first_new = self.z.len();
        for t in sorted {
            if self.index.contains_key(&t) {
                continue;
            }
            let i = self.z.len() as u32;
            self.index.insert(t.clone(), i);
            self.derivable.push(self.ctx.derives(&t));
            self.z.push(t);
            self.parents0.push(Vec::new());
            self.parents1.push(Vec::new());
            self.left.push(BTreeSet::new());
            self.right.push(BTreeSet::new());
            self.mem_of.push(BTreeSet::new());
        }
        for i in first_new..self.z.len() {
            if let Some((a, b)) = self.z[i].children() {
                let (a, b) = (self.index[a], self.index[b]);
                self.parents0[a as usize].push(i as u32);
                self.parents1[b as usize].push(i as u32);
            }
        }
        if self.ctx.mode == Mode::Extended {
            let mut all = lists;
            for t in &self.z[first_new..] {
                if let Some(n) = t.as_name() {
                    all.insert(vec![n.clone()]);
                }
            }
            for l in all {
                if !self.list_index.contains_key(&l) {
                    let li = self.lists.len() as u32;
                    for n in &l {
                        self.lists_with.entry(n.clone()).or_default().push(li);
                    }
                    self.list_index.insert(l.clone(), li);
                    self.lists.push(l);
                }
            }
        }
        for i in first_new..self.z.len() {
            if self.derivable[i] {
                self.add(AtomId::Eq(i as u32, i as u32), Just::Eq, 0);
            }
        }
        if first_new > 0 {
            self.cons_for_new(first_new);
        }
    }

    /// After growing `Z`, apply cons where a new compound meets derived
    /// component equalities.
    fn cons_for_new(&mut self, first_new: usize) {
        for p in first_new..self.z.len() {
            let Some((p0, p1)) = self.z[p].children() else { continue };
            let (p0, p1) = (self.index[p0], self.index[p1]);
            for q in 0..self.z.len() {
                if !self.z[p].same_constructor(&self.z[q]) {
                    continue;
                }
                let (q0, q1) = self.z[q].children().expect("compound");
                let (q0, q1) = (self.index[q0], self.index[q1]);
                for (a, b, x0, y0, x1, y1) in [(p, q, p0, q0, p1, q1), (q, p, q0, p0, q1, p1)] {
                    let e0 = AtomId::Eq(x0, y0);
                    let e1 = AtomId::Eq(x1, y1);
                    if self.atoms.contains_key(&e0) && self.atoms.contains_key(&e1) {
                        let g = self.gen_of(&[e0, e1]);
                        self.add(AtomId::Eq(a as u32, b as u32), Just::Cons(e0, e1), g);
                    }
                }
            }
        }
    }

    /// Grow the universe by new terms and resaturate.
    pub fn add_terms<'a>(&mut self, terms: impl IntoIterator<Item = &'a Term>) {
        let mut all = BTreeSet::new();
        for t in terms {
            t.collect_subterms(&mut all);
        }
        self.add_terms_inner(all.iter(), BTreeSet::new());
        self.run();
    }

    /// Extend with goals that may mention new terms, lists or `says` formulas.
    pub fn add_goals(&mut self, goals: &[Assertion]) {
        let mut terms = BTreeSet::new();
        let mut lists = BTreeSet::new();
        for g in goals {
            terms.extend(g.subterms());
            lists.extend(g.lists());
        }
        let fresh_lists: BTreeSet<Vec<Name>> = lists.into_iter().filter(|l| !self.list_index.contains_key(l)).collect();
        let had_new_lists = !fresh_lists.is_empty() && self.ctx.mode == Mode::Extended;
        self.add_terms_inner(terms.iter(), fresh_lists);
        if had_new_lists {
            self.resweep_lists();
        }
        self.run();
        self.register_says(goals);
    }

    /// Re-fire wk and int for every member-relevant atom after new lists appear.
    fn resweep_lists(&mut self) {
        let ids: Vec<AtomId> = self.atoms.keys().copied().collect();
        for id in ids {
            self.queue.push_back(id);
        }
    }

    fn gen_of(&self, ids: &[AtomId]) -> usize {
        1 + ids.iter().map(|i| self.atoms.get(i).map_or(0, |x| x.1)).max().unwrap_or(0)
    }

    fn add(&mut self, id: AtomId, just: Just, gen: usize) {
        if self.atoms.contains_key(&id) {
            return;
        }
        match id {
            AtomId::Eq(i, j) => {
                self.left[i as usize].insert(j);
                self.right[j as usize].insert(i);
            }
            AtomId::Mem(s, l) => {
                self.mem_of[s as usize].insert(l);
            }
        }
        self.rounds = self.rounds.max(gen);
        self.atoms.insert(id, (just, gen));
        self.queue.push_back(id);
    }

    fn run(&mut self) {
        let extended = self.ctx.mode == Mode::Extended;
        while let Some(id) = self.queue.pop_front() {
            match id {
                AtomId::Eq(i, j) => {
                    self.fire_eq(i, j);
                    if extended {
                        self.fire_eq_lists(i, j);
                    }
                }
                AtomId::Mem(s, l) => self.fire_mem(s, l),
            }
        }
        self.refresh_says();
    }

    fn fire_eq(&mut self, i: u32, j: u32) {
        let me = AtomId::Eq(i, j);
        let g = self.gen_of(&[me]);
        self.add(AtomId::Eq(j, i), Just::Sym(me), g);

        let before: Vec<u32> = self.right[i as usize].iter().copied().collect();
        for k in before {
            let other = AtomId::Eq(k, i);
            let g = self.gen_of(&[other, me]);
            self.add(AtomId::Eq(k, j), Just::Trans(other, me), g);
        }
        let after: Vec<u32> = self.left[j as usize].iter().copied().collect();
        for k in after {
            let other = AtomId::Eq(j, k);
            let g = self.gen_of(&[me, other]);
            self.add(AtomId::Eq(i, k), Just::Trans(me, other), g);
        }

        let (ti, tj) = (self.z[i as usize].clone(), self.z[j as usize].clone());
        let p0i = self.parents0[i as usize].clone();
        let p0j = self.parents0[j as usize].clone();
        for &p in &p0i {
            for &q in &p0j {
                let (zp, zq) = (&self.z[p as usize], &self.z[q as usize]);
                if !zp.same_constructor(zq) {
                    continue;
                }
                let e1 = AtomId::Eq(self.index[zp.children().unwrap().1], self.index[zq.children().unwrap().1]);
                if self.atoms.contains_key(&e1) {
                    let g = self.gen_of(&[me, e1]);
                    self.add(AtomId::Eq(p, q), Just::Cons(me, e1), g);
                }
            }
        }
        let p1i = self.parents1[i as usize].clone();
        let p1j = self.parents1[j as usize].clone();
        for &p in &p1i {
            for &q in &p1j {
                let (zp, zq) = (&self.z[p as usize], &self.z[q as usize]);
                if !zp.same_constructor(zq) {
                    continue;
                }
                let e0 = AtomId::Eq(self.index[zp.children().unwrap().0], self.index[zq.children().unwrap().0]);
                if self.atoms.contains_key(&e0) {
                    let g = self.gen_of(&[e0, me]);
                    self.add(AtomId::Eq(p, q), Just::Cons(e0, me), g);
                }
            }
        }

        if ti.same_constructor(&tj) {
            let (a0, a1) = ti.children().unwrap();
            let (b0, b1) = tj.children().unwrap();
            let ids = [self.index[a0], self.index[a1], self.index[b0], self.index[b1]];
            if ids.iter().all(|&k| self.derivable[k as usize]) {
                let g = self.gen_of(&[me]);
                self.add(AtomId::Eq(ids[0], ids[2]), Just::Proj(0, me), g);
                self.add(AtomId::Eq(ids[1], ids[3]), Just::Proj(1, me), g);
            }
        }
    }

    fn fire_eq_lists(&mut self, i: u32, j: u32) {
        let me = AtomId::Eq(i, j);
        let (ti, tj) = (&self.z[i as usize], &self.z[j as usize]);
        if !ti.is_atomic() || !tj.is_atomic() {
            return;
        }
        if let Some(n) = tj.as_name() {
            let ls = self.lists_with.get(n).cloned().unwrap_or_default();
            let g = self.gen_of(&[me]);
            for l in ls {
                self.add(AtomId::Mem(i, l), Just::Wk(me), g);
            }
        }
        let ls: Vec<u32> = self.mem_of[i as usize].iter().copied().collect();
        for l in ls {
            let m = AtomId::Mem(i, l);
            let g = self.gen_of(&[m, me]);
            self.add(AtomId::Mem(j, l), Just::Subst(m, me), g);
        }
    }

    fn fire_mem(&mut self, s: u32, l: u32) {
        let me = AtomId::Mem(s, l);
        let list = self.lists[l as usize].clone();
        if list.len() == 1 {
            if let Some(&n) = self.index.get(&Term::name(list[0].clone())) {
                let g = self.gen_of(&[me]);
                self.add(AtomId::Eq(s, n), Just::Prom(me), g);
            }
        }
        let eqs: Vec<u32> = self.left[s as usize].iter().copied().collect();
        for j in eqs {
            if self.z[j as usize].is_atomic() {
                let e = AtomId::Eq(s, j);
                let g = self.gen_of(&[me, e]);
                self.add(AtomId::Mem(j, l), Just::Subst(me, e), g);
            }
        }
        let targets: Vec<u32> = (0..self.lists.len() as u32)
            .filter(|&t| t != l && !self.atoms.contains_key(&AtomId::Mem(s, t)))
            .filter(|&t| self.lists[t as usize].iter().all(|n| list.contains(n)))
            .collect();
        for t in targets {
            let target = &self.lists[t as usize];
            let sup: Vec<u32> =
                self.mem_of[s as usize].iter().copied().filter(|&k| target.iter().all(|n| self.lists[k as usize].contains(n))).collect();
            let mut inter = self.lists[sup[0] as usize].clone();
            for &k in &sup[1..] {
                inter.retain(|n| self.lists[k as usize].contains(n));
            }
            if &inter == target {
                let prem: Vec<AtomId> = sup.iter().map(|&k| AtomId::Mem(s, k)).collect();
                let g = self.gen_of(&prem);
                self.add(AtomId::Mem(s, t), Just::Int(prem), g);
            }
        }
    }

    fn register_says(&mut self, goals: &[Assertion]) {
        if self.ctx.mode != Mode::Extended {
            return;
        }
        let mut fresh = Vec::new();
        for a in self.ctx.atoms.iter().chain(goals) {
            a.walk(&mut |f| {
                if matches!(f, Assertion::Says(..)) {
                    fresh.push(f.alpha_canonical());
                }
            });
        }
        for f in fresh {
            if !self.says.iter().any(|(g, _)| *g == f) {
                self.says.push((f, None));
            }
        }
        self.says.sort_by_key(|(f, _)| f.says_depth());
        self.refresh_says();
    }

    fn refresh_says(&mut self) {
        for k in 0..self.says.len() {
            if self.says[k].1.is_some() {
                continue;
            }
            let f = self.says[k].0.clone();
            let just = if self.ctx.has_atom(&f) {
                Some(SaysJust::Ax)
            } else if let Assertion::Says(subj, body) = &f {
                let key_ok = says_key(subj).is_some_and(|k| self.ctx.derives(&k));
                (key_ok && self.holds_basic(body)).then_some(SaysJust::Say)
            } else {
                None
            };
            self.says[k].1 = just;
        }
    }

    fn holds_basic(&self, a: &Assertion) -> bool {
        match a {
            Assertion::Eq(..) | Assertion::Member(..) => self.atom_id(a).is_some_and(|id| self.atoms.contains_key(&id)),
            Assertion::Pred(..) => self.ctx.has_atom(a),
            Assertion::Says(..) => {
                let c = a.alpha_canonical();
                self.says.iter().any(|(f, j)| *f == c && j.is_some())
            }
            _ => false,
        }
    }

    pub fn atom_id(&self, a: &Assertion) -> Option<AtomId> {
        match a {
            Assertion::Eq(t, u) => Some(AtomId::Eq(*self.index.get(t)?, *self.index.get(u)?)),
            Assertion::Member(t, l) => Some(AtomId::Mem(*self.index.get(t)?, *self.list_index.get(l)?)),
            _ => None,
        }
    }

    pub fn assertion_of(&self, id: AtomId) -> Assertion {
        match id {
            AtomId::Eq(i, j) => Assertion::eq(self.z[i as usize].clone(), self.z[j as usize].clone()),
            AtomId::Mem(s, l) => Assertion::Member(self.z[s as usize].clone(), self.lists[l as usize].clone()),
        }
    }

    /// Is the atom derivable? Atoms outside the universe are not.
    pub fn holds(&self, a: &Assertion) -> bool {
        match a {
            Assertion::Eq(..) | Assertion::Member(..) | Assertion::Pred(..) => self.holds_basic(a),
            Assertion::Says(..) => {
                let c = a.alpha_canonical();
                match self.says.iter().find(|(f, _)| *f == c) {
                    Some((_, j)) => j.is_some(),
                    None => self.ctx.has_atom(a),
                }
            }
            _ => false,
        }
    }

    /// All derived equalities.
    pub fn derived_equalities(&self) -> BTreeSet<(Term, Term)> {
        self.atoms
            .keys()
            .filter_map(|id| match *id {
                AtomId::Eq(i, j) => Some((self.z[i as usize].clone(), self.z[j as usize].clone())),
                _ => None,
            })
            .collect()
    }

    pub fn derived_atoms(&self) -> Vec<Assertion> {
        let mut ids: Vec<AtomId> = self.atoms.keys().copied().collect();
        ids.sort();
        ids.into_iter().map(|id| self.assertion_of(id)).collect()
    }

    /// Rebuild a proof from the recorded first derivations.
    pub fn proof(&self, a: &Assertion) -> Option<Arc<EqProof>> {
        let mut memo = HashMap::new();
        match a {
            Assertion::Eq(..) | Assertion::Member(..) => {
                let id = self.atom_id(a)?;
                self.atoms.contains_key(&id).then(|| self.build(id, &mut memo))
            }
            Assertion::Pred(..) => self.ctx.has_atom(a).then(|| EqProof::ax(a.clone())),
            Assertion::Says(..) => self.says_proof(a, &mut memo),
            _ => None,
        }
    }

    fn says_proof(&self, a: &Assertion, memo: &mut HashMap<AtomId, Arc<EqProof>>) -> Option<Arc<EqProof>> {
        if self.ctx.has_atom(a) {
            return Some(EqProof::ax(a.clone()));
        }
        let Assertion::Says(subj, body) = a else { return None };
        if !self.holds(a) {
            return None;
        }
        let key = self.ctx.analysis().synthesize(&says_key(subj)?)?;
        let inner = match &**body {
            Assertion::Says(..) => self.says_proof(body, memo)?,
            Assertion::Pred(..) => EqProof::ax((**body).clone()),
            other => {
                let id = self.atom_id(other)?;
                self.build(id, memo)
            }
        };
        Some(EqProof::node(EqRule::Say, a.clone(), vec![inner], vec![key]))
    }

    fn build(&self, id: AtomId, memo: &mut HashMap<AtomId, Arc<EqProof>>) -> Arc<EqProof> {
        if let Some(p) = memo.get(&id) {
            return p.clone();
        }
        let concl = self.assertion_of(id);
        let (just, _) = &self.atoms[&id];
        let p = match just.clone() {
            Just::Ax => EqProof::ax(concl),
            Just::Eq => {
                let t = &self.z[match id {
                    AtomId::Eq(i, _) => i as usize,
                    AtomId::Mem(s, _) => s as usize,
                }];
                EqProof::eq(self.ctx.analysis().synthesize(t).expect("derivable term"))
            }
            Just::Sym(a) => EqProof::sym(self.build(a, memo)),
            Just::Trans(a, b) => {
                let mut ps = Vec::new();
                for x in [a, b] {
                    let q = self.build(x, memo);
                    if q.rule == EqRule::Trans {
                        ps.extend(q.premises.iter().cloned());
                    } else {
                        ps.push(q);
                    }
                }
                EqProof::trans(ps)
            }
            Just::Cons(a, b) => {
                let shape = match id {
                    AtomId::Eq(i, _) => self.z[i as usize].clone(),
                    _ => unreachable!(),
                };
                EqProof::cons(&shape, self.build(a, memo), self.build(b, memo))
            }
            Just::Proj(j, a) => EqProof::proj(j, self.build(a, memo), self.ctx.analysis()).expect("side conditions hold"),
            Just::Prom(a) => EqProof::node(EqRule::Prom, concl, vec![self.build(a, memo)], vec![]),
            Just::Wk(a) => EqProof::node(EqRule::Wk, concl, vec![self.build(a, memo)], vec![]),
            Just::Int(ps) => {
                let ps = ps.iter().map(|&x| self.build(x, memo)).collect();
                EqProof::node(EqRule::Int, concl, ps, vec![])
            }
            Just::Subst(m, e) => EqProof::node(EqRule::Subst, concl, vec![self.build(m, memo), self.build(e, memo)], vec![]),
        };
        memo.insert(id, p.clone());
        p
    }
}

/// Decide `(T;E) ⊢eq φ` for an atom `φ`, with a proof on success.
pub fn eq_derives(ctx: &Arc<EqContext>, goal: &Assertion) -> Result<Option<Arc<EqProof>>> {
    if !goal.is_atom() {
        return Err(Error::MalformedAtom(goal.to_string()));
    }
    let sat = Saturation::new(ctx.clone(), std::slice::from_ref(goal))?;
    Ok(sat.proof(goal))
}
