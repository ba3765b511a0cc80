//! Depth-first K-bounded attack search.
//!
//! Sessions are started lazily; at each node the search either advances a
//! started session or starts a new one, guessing values for the intruder
//! variables first mentioned by the received message. Values are drawn from
//! ground instances of the current type universe plus the spare name.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::assertion::Assertion;
use crate::derive::{assert_derives_with, Derivation, SearchOptions};
use crate::dy::Analysis;
use crate::error::{Error, Result};
use crate::protocol::{
    goal_instance, instantiate_session, is_attack, validate_run, KnowledgeFunction, Protocol, Run, RunReport, Session, ValidateOptions,
};
use crate::term::{Name, Subst, Term, Variable};

use super::{verify_zap_preservation, ZapReport};

#[derive(Clone, Debug)]
pub struct AttackOptions {
    /// K: maximum number of sessions.
    pub sessions: usize,
    /// Maximum number of search nodes (candidate steps tried).
    pub max_nodes: usize,
    pub time_limit: Option<Duration>,
}

impl Default for AttackOptions {
    fn default() -> Self {
        AttackOptions { sessions: 1, max_nodes: 2_000_000, time_limit: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub run: Run,
    pub validation: RunReport,
    pub goal: Derivation,
    /// Small-substitution check of the found run.
    pub zap: Option<ZapReport>,
    pub nodes: usize,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum AttackOutcome {
    Found(Box<AttackReport>),
    /// No attack within the searched space.
    None {
        nodes: usize,
    },
    /// Budget ran out first.
    Exhausted {
        nodes: usize,
    },
}

struct Search<'a> {
    proto: &'a Protocol,
    gamma: Assertion,
    k0: KnowledgeFunction,
    opts: &'a AttackOptions,
    /// (role index, binding) pairs that may start a session.
    templates: Vec<(usize, BTreeMap<Variable, Name>)>,
    nodes: usize,
    start: Instant,
    out_of_budget: bool,
}

#[derive(Clone)]
struct Node {
    sessions: Vec<Session>,
    progress: Vec<usize>,
    interleaving: Vec<(usize, usize)>,
    sigma: Subst,
    k: KnowledgeFunction,
}

fn search_opts() -> SearchOptions {
    SearchOptions { normalize_proofs: false, ..SearchOptions::default() }
}

fn bindings(role: &crate::protocol::Role, agents: &[Name]) -> Vec<BTreeMap<Variable, Name>> {
    let mut out = vec![BTreeMap::new()];
    for v in &role.agent_vars {
        let dom = role.domains.get(v).cloned().unwrap_or_else(|| agents.to_vec());
        let mut next = Vec::new();
        for b in &out {
            for n in &dom {
                let mut b2 = b.clone();
                b2.insert(v.clone(), n.clone());
                next.push(b2);
            }
        }
        out = next;
    }
    out
}

impl<'a> Search<'a> {
    fn budget_left(&mut self) -> bool {
        if self.nodes >= self.opts.max_nodes || self.opts.time_limit.is_some_and(|d| self.start.elapsed() > d) {
            self.out_of_budget = true;
        }
        !self.out_of_budget
    }

    fn intruder(&self) -> &Name {
        &self.proto.intruder
    }

    fn attack_holds(&self, n: &Node) -> bool {
        let ki = n.k.get(self.intruder()).apply(&n.sigma);
        let g = goal_instance(&self.gamma).apply(&n.sigma);
        matches!(assert_derives_with(&ki, &g, self.proto.mode, search_opts()), Ok(d) if d.holds)
    }

    /// Non-variable subterms of everything the node mentions.
    fn universe(&self, n: &Node) -> BTreeSet<Term> {
        let mut c = BTreeSet::new();
        for kp in n.k.states.values() {
            c.extend(kp.kernel_unchecked().subterms());
        }
        for s in &n.sessions {
            for st in &s.steps {
                c.extend(st.recv.subterms());
                c.extend(st.send.subterms());
            }
        }
        c.extend(self.gamma.subterms());
        c.insert(Term::name(Name::spare()));
        c.into_iter().filter(|t| t.as_var().is_none()).collect()
    }

    /// Joint candidate assignments for `fresh`, smallest first.
    fn candidates(&self, n: &Node, fresh: &[Variable]) -> Vec<Subst> {
        if fresh.is_empty() {
            return vec![Subst::new()];
        }
        let spare = Term::name(Name::spare());
        let d: Vec<Term> = self.universe(n).into_iter().collect();
        let fresh_set: BTreeSet<&Variable> = fresh.iter().collect();
        let mut out: BTreeSet<(usize, String, Subst)> = BTreeSet::new();
        let mut idx = vec![0usize; fresh.len()];
        'outer: loop {
            let pick: BTreeMap<&Variable, &Term> = fresh.iter().zip(idx.iter().map(|&i| &d[i])).collect();
            if let Some(asg) = resolve(&pick, &fresh_set, &n.sigma, &spare) {
                if asg.is_ground() {
                    out.insert((asg.total_dagsize(), asg.to_string(), asg));
                }
            }
            for p in (0..fresh.len()).rev() {
                idx[p] += 1;
                if idx[p] < d.len() {
                    continue 'outer;
                }
                idx[p] = 0;
            }
            break;
        }
        out.into_iter().map(|(_, _, s)| s).collect()
    }

    fn dfs(&mut self, n: &Node) -> Option<Node> {
        if self.attack_holds(n) {
            return Some(n.clone());
        }
        // Advance a started session.
        for s in 0..n.sessions.len() {
            if n.progress[s] < n.sessions[s].steps.len() {
                if let Some(hit) = self.step(n, s) {
                    return Some(hit);
                }
                if self.out_of_budget {
                    return None;
                }
            }
        }
        // Start a new one.
        if n.sessions.len() < self.opts.sessions {
            for t in 0..self.templates.len() {
                let (ri, binding) = self.templates[t].clone();
                let role = &self.proto.roles[ri];
                if role.steps.is_empty() {
                    continue;
                }
                let id = n.sessions.len() + 1;
                let Ok(sess) = instantiate_session(role, &role.actor, &binding, role.steps.len(), id) else { continue };
                let mut m = n.clone();
                m.sessions.push(sess);
                m.progress.push(0);
                if let Some(hit) = self.step(&m, id - 1) {
                    return Some(hit);
                }
                if self.out_of_budget {
                    return None;
                }
            }
        }
        None
    }

    /// Execute the next step of session `s` under every viable guess.
    fn step(&mut self, n: &Node, s: usize) -> Option<Node> {
        let j = n.progress[s];
        let sess = &n.sessions[s];
        let st = &sess.steps[j];
        let actor = sess.actor.clone();
        let mode = self.proto.mode;

        // The honest check does not depend on σ.
        let mut after_recv = n.k.clone();
        after_recv.update(&actor, &st.recv);
        let honest = assert_derives_with(&after_recv.get(&actor), &st.send, mode, search_opts());
        if !matches!(honest, Ok(ref d) if d.holds) {
            return None;
        }

        let fresh: Vec<Variable> = st.recv.fv().into_iter().filter(|v| !n.sigma.contains(v)).collect();
        let ki = n.k.get(self.intruder());
        let cands = self.candidates(n, &fresh);
        for asg in cands {
            self.nodes += 1;
            if !self.budget_left() {
                return None;
            }
            let mut sigma = n.sigma.clone();
            for (v, t) in asg.iter() {
                sigma.insert(v.clone(), t.clone());
            }
            let kis = ki.apply(&sigma);
            let beta = st.recv.apply(&sigma);
            let an = Analysis::new(&kis.terms);
            if !beta.pubs().iter().all(|p| an.derives(p)) {
                continue;
            }
            match assert_derives_with(&kis, &beta, mode, search_opts()) {
                Ok(d) if d.holds => {}
                _ => continue,
            }
            let mut k = after_recv.clone();
            if let Some(kp) = k.states.get_mut(&actor) {
                kp.assertions.retain(|a| !st.retract.contains(a));
            }
            k.update(self.intruder(), &st.send);
            let mut m = n.clone();
            m.k = k;
            m.sigma = sigma;
            m.progress[s] += 1;
            m.interleaving.push((s, j));
            if let Some(hit) = self.dfs(&m) {
                return Some(hit);
            }
            if self.out_of_budget {
                return None;
            }
        }
        None
    }
}

/// Resolve a choice of universe terms for the fresh variables: references
/// among fresh variables are followed, assigned variables use σ, and
/// variables not yet assigned become the spare name.
fn resolve(pick: &BTreeMap<&Variable, &Term>, fresh: &BTreeSet<&Variable>, sigma: &Subst, spare: &Term) -> Option<Subst> {
    fn go(
        x: &Variable,
        pick: &BTreeMap<&Variable, &Term>,
        fresh: &BTreeSet<&Variable>,
        sigma: &Subst,
        spare: &Term,
        done: &mut Subst,
        stack: &mut Vec<Variable>,
    ) -> Option<Term> {
        if let Some(t) = done.get(x) {
            return Some(t.clone());
        }
        if stack.contains(x) {
            return None;
        }
        stack.push(x.clone());
        let choice = pick[x];
        let mut inner = Subst::new();
        for y in choice.vars() {
            let ty = if fresh.contains(&y) {
                go(&y, pick, fresh, sigma, spare, done, stack)?
            } else if let Some(t) = sigma.get(&y) {
                t.clone()
            } else if y.is_quant() {
                return None;
            } else {
                spare.clone()
            };
            inner.insert(y, ty);
        }
        stack.pop();
        let t = inner.apply(choice);
        done.insert(x.clone(), t.clone());
        Some(t)
    }
    let mut done = Subst::new();
    for x in pick.keys() {
        go(x, pick, fresh, sigma, spare, &mut done, &mut Vec::new())?;
    }
    Some(done)
}

/// Search for a K-bounded attack on the secrecy of `gamma`.
pub fn find_attack(proto: &Protocol, gamma: &Assertion, opts: &AttackOptions) -> Result<AttackOutcome> {
    if opts.sessions == 0 {
        return Err(Error::MalformedProtocol("the session bound must be at least 1".into()));
    }
    if let Some(v) = gamma.fv().into_iter().next() {
        return Err(Error::MalformedProtocol(format!("secrecy goal has free variable {v}")));
    }
    gamma.check_mode(proto.mode)?;
    let mut templates = Vec::new();
    for (ri, role) in proto.roles.iter().enumerate() {
        for b in bindings(role, &proto.agents) {
            templates.push((ri, b));
        }
    }
    let k0 = proto.initial_knowledge();
    let mut s =
        Search { proto, gamma: gamma.clone(), k0: k0.clone(), opts, templates, nodes: 0, start: Instant::now(), out_of_budget: false };
    let root = Node { sessions: vec![], progress: vec![], interleaving: vec![], sigma: Subst::new(), k: k0 };
    let hit = s.dfs(&root);
    let nodes = s.nodes;
    let Some(hit) = hit else {
        return Ok(if s.out_of_budget { AttackOutcome::Exhausted { nodes } } else { AttackOutcome::None { nodes } });
    };
    // Drop sessions that never ran and re-validate from scratch.
    let used: Vec<usize> = (0..hit.sessions.len()).filter(|&i| hit.progress[i] > 0).collect();
    let remap: BTreeMap<usize, usize> = used.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let sessions: Vec<Session> = used
        .iter()
        .map(|&i| {
            let mut sess = hit.sessions[i].clone();
            sess.steps.truncate(hit.progress[i]);
            sess
        })
        .collect();
    let interleaving = hit.interleaving.iter().map(|&(s, j)| (remap[&s], j)).collect();
    let run = Run { sessions, interleaving, sigma: hit.sigma.clone() };
    let validation = validate_run(&run, &s.k0, &proto.intruder, proto.mode, ValidateOptions::default())?;
    if !validation.valid {
        return Err(Error::InvalidRun(format!(
            "search produced a run that does not re-validate: {}",
            validation.failure.clone().unwrap_or_default()
        )));
    }
    let goal = is_attack(&validation, gamma, proto.mode)?;
    if !goal.holds {
        return Err(Error::InvalidRun("search produced a run that is not an attack".into()));
    }
    let zap = verify_zap_preservation(&run, &validation, &s.k0, proto.mode).ok();
    Ok(AttackOutcome::Found(Box::new(AttackReport { run, validation, goal, zap, nodes })))
}
