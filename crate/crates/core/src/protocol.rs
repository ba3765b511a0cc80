//! Protocols, roles, sessions, knowledge functions and run validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::assertion::{Assertion, KnowledgePair, Mode};
use crate::derive::{assert_derives_with, Derivation, SearchOptions};
use crate::error::{Error, Result};
use crate::term::{Name, Subst, Term, Variable};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    /// `recv β; send α;`
    Exchange,
    /// `assert α;`: triggered by the dummy message, gated on honest derivability.
    Assert,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Step {
    pub recv: Assertion,
    pub send: Assertion,
    pub kind: StepKind,
    /// Anonymous send. Bookkeeping only: the intruder still learns the message.
    pub anon: bool,
    /// Predicate facts removed from the actor's state after the step.
    pub retract: Vec<Assertion>,
}

impl Step {
    pub fn exchange(recv: Assertion, send: Assertion) -> Step {
        Step { recv, send, kind: StepKind::Exchange, anon: false, retract: vec![] }
    }

    pub fn assert(send: Assertion) -> Step {
        Step { recv: Assertion::msg(Term::name(Name::dummy())), send, kind: StepKind::Assert, anon: false, retract: vec![] }
    }

    fn map(&self, f: &impl Fn(&Assertion) -> Assertion) -> Step {
        Step { recv: f(&self.recv), send: f(&self.send), kind: self.kind, anon: self.anon, retract: self.retract.iter().map(f).collect() }
    }

    fn fv(&self) -> BTreeSet<Variable> {
        let mut v = self.recv.fv();
        v.extend(self.send.fv());
        v
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Role {
    pub name: String,
    pub actor: Name,
    pub steps: Vec<Step>,
    /// Variables whose first occurrence is in a send.
    pub agent_vars: BTreeSet<Variable>,
    /// Variables whose first occurrence is in a receive.
    pub intruder_vars: BTreeSet<Variable>,
    /// Names each agent variable may be instantiated with.
    pub domains: BTreeMap<Variable, Vec<Name>>,
}

impl Role {
    pub fn new(name: &str, actor: Name, steps: Vec<Step>, domains: BTreeMap<Variable, Vec<Name>>) -> Result<Role> {
        let mut agent_vars = BTreeSet::new();
        let mut intruder_vars = BTreeSet::new();
        for s in &steps {
            for v in s.recv.fv() {
                if !agent_vars.contains(&v) {
                    intruder_vars.insert(v);
                }
            }
            for v in s.send.fv() {
                if !intruder_vars.contains(&v) {
                    agent_vars.insert(v);
                }
            }
        }
        if let Some(v) = agent_vars.iter().chain(&intruder_vars).find(|v| v.is_quant()) {
            return Err(Error::MalformedProtocol(format!("role {name}: quantification variable {v} occurs free")));
        }
        if let Some(v) = domains.keys().find(|v| !agent_vars.contains(v)) {
            return Err(Error::MalformedProtocol(format!("role {name}: {v} has a domain but is not an agent variable")));
        }
        Ok(Role { name: name.to_string(), actor, steps, agent_vars, intruder_vars, domains })
    }

    /// Agent variables occurring in the first `len` steps.
    pub fn agent_vars_in_prefix(&self, len: usize) -> BTreeSet<Variable> {
        self.steps[..len].iter().flat_map(|s| s.fv()).filter(|v| self.agent_vars.contains(v)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Session {
    pub id: usize,
    pub role: String,
    pub actor: Name,
    pub binding: BTreeMap<Variable, Name>,
    pub steps: Vec<Step>,
}

impl Session {
    pub fn fv(&self) -> BTreeSet<Variable> {
        self.steps.iter().flat_map(|s| s.fv()).collect()
    }
}

fn suffixed(v: &Variable, tag: &str) -> Variable {
    v.renamed(&format!("{}_{tag}", v.id()))
}

/// Rename every bound variable of `a` by appending `tag`.
fn rename_bound(a: &Assertion, tag: &str) -> Assertion {
    match a {
        Assertion::Exists(v, body) => {
            let nv = suffixed(v, tag);
            let body = body.apply(&Subst::singleton(v.clone(), Term::var(nv.clone())));
            Assertion::exists(nv, rename_bound(&body, tag))
        }
        Assertion::And(x, y) => Assertion::and(rename_bound(x, tag), rename_bound(y, tag)),
        Assertion::Says(s, b) => Assertion::says(s.clone(), rename_bound(b, tag)),
        other => other.clone(),
    }
}

/// Instantiate a prefix of `role`: agent variables are bound to names,
/// intruder variables get the suffix `_{id}` and bound variables the suffix
/// `_{id}_{step}` (primed in sends), which keeps sessions with distinct ids coherent.
pub fn instantiate_session(role: &Role, actor: &Name, binding: &BTreeMap<Variable, Name>, prefix_len: usize, id: usize) -> Result<Session> {
    if prefix_len > role.steps.len() {
        return Err(Error::PrefixOutOfRange { len: prefix_len, max: role.steps.len() });
    }
    let needed = role.agent_vars_in_prefix(prefix_len);
    let given: BTreeSet<Variable> = binding.keys().cloned().collect();
    if needed != given {
        let missing: Vec<String> = needed.difference(&given).map(|v| v.to_string()).collect();
        let extra: Vec<String> = given.difference(&needed).map(|v| v.to_string()).collect();
        return Err(Error::IncompleteBinding(format!(
            "role {}: missing [{}], unexpected [{}]",
            role.name,
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut s = Subst::new();
    for (v, n) in binding {
        s.insert(v.clone(), Term::name(n.clone()));
    }
    for v in &role.intruder_vars {
        s.insert(v.clone(), Term::var(suffixed(v, &id.to_string())));
    }
    let steps = role.steps[..prefix_len]
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let tag = format!("{id}_{j}");
            let mut out = st.map(&|a| rename_bound(&a.apply(&s), &tag));
            // The send gets its own names so that it never shares a bound
            // variable with the receive it is checked against.
            out.send = rename_bound(&st.send.apply(&s), &format!("{tag}'"));
            out
        })
        .collect();
    Ok(Session { id, role: role.name.clone(), actor: actor.clone(), binding: binding.clone(), steps })
}

pub fn check_coherent(sessions: &[Session]) -> Result<()> {
    let mut owner: BTreeMap<Variable, usize> = BTreeMap::new();
    for s in sessions {
        for v in s.fv() {
            if let Some(o) = owner.insert(v.clone(), s.id) {
                if o != s.id {
                    return Err(Error::IncoherentSessions(format!("{v} is free in sessions {o} and {}", s.id)));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Protocol {
    pub mode: Mode,
    pub roles: Vec<Role>,
    pub agents: Vec<Name>,
    pub intruder: Name,
    /// Names every agent knows initially.
    pub public: Vec<Term>,
    /// Extra initial terms per agent, on top of the defaults.
    pub knows: BTreeMap<Name, Vec<Term>>,
    /// Assertions every agent holds initially (static predicate facts).
    pub facts: BTreeMap<Name, Vec<Assertion>>,
}

impl Protocol {
    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Default initial knowledge: own secret key, all public keys, public
    /// names, the dummy and the spare name, plus declared extras.
    pub fn initial_knowledge(&self) -> KnowledgeFunction {
        let mut kf = KnowledgeFunction::default();
        let pks: Vec<Term> = self.agents.iter().filter_map(|a| a.public_key()).map(Term::name).collect();
        for a in &self.agents {
            let mut terms: BTreeSet<Term> = pks.iter().cloned().collect();
            terms.extend(self.public.iter().cloned());
            terms.insert(Term::name(Name::dummy()));
            terms.insert(Term::name(Name::spare()));
            if let Some(sk) = a.secret_key() {
                terms.insert(Term::name(sk));
            }
            terms.extend(self.knows.get(a).into_iter().flatten().cloned());
            let mut kp = KnowledgePair::new(terms, []);
            for f in self.facts.get(a).into_iter().flatten() {
                kp.update(f);
            }
            kf.states.insert(a.clone(), kp);
        }
        kf
    }
}

/// Per-agent knowledge states `k(a) = (X_a; Φ_a)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KnowledgeFunction {
    pub states: BTreeMap<Name, KnowledgePair>,
}

impl KnowledgeFunction {
    pub fn get(&self, a: &Name) -> KnowledgePair {
        self.states.get(a).cloned().unwrap_or_default()
    }

    pub fn update(&mut self, a: &Name, alpha: &Assertion) {
        self.states.entry(a.clone()).or_default().update(alpha);
    }

    /// Componentwise inclusion.
    pub fn le(&self, other: &KnowledgeFunction) -> bool {
        self.states.iter().all(|(a, kp)| {
            let o = other.get(a);
            kp.terms.is_subset(&o.terms) && kp.assertions.iter().all(|x| o.assertions.contains(x))
        })
    }
}

impl Serialize for KnowledgeFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(self.states.len()))?;
        for (a, kp) in &self.states {
            let ts: Vec<String> = kp.terms.iter().map(|t| t.to_string()).collect();
            let asr: Vec<String> = kp.assertions.iter().map(|x| x.to_string()).collect();
            m.serialize_entry(a.id(), &serde_json::json!({ "terms": ts, "assertions": asr }))?;
        }
        m.end()
    }
}

/// An interleaving of sessions with a ground substitution for its free variables.
#[derive(Clone, Debug, Serialize)]
pub struct Run {
    pub sessions: Vec<Session>,
    /// `(session index, step index)` in execution order.
    pub interleaving: Vec<(usize, usize)>,
    pub sigma: Subst,
}

/// One event `u_i : β_i ▷ α_i` of an interleaving.
#[derive(Clone, Debug, Serialize)]
pub struct Event {
    pub session: usize,
    pub step: usize,
    pub actor: Name,
    pub recv: Assertion,
    pub send: Assertion,
    pub kind: StepKind,
    pub anon: bool,
}

impl Run {
    pub fn events(&self) -> Vec<Event> {
        self.interleaving
            .iter()
            .map(|&(s, j)| {
                let sess = &self.sessions[s];
                let st = &sess.steps[j];
                Event {
                    session: s,
                    step: j,
                    actor: sess.actor.clone(),
                    recv: st.recv.clone(),
                    send: st.send.clone(),
                    kind: st.kind,
                    anon: st.anon,
                }
            })
            .collect()
    }

    /// `fv(ξ)` of the events actually executed.
    pub fn fv(&self) -> BTreeSet<Variable> {
        self.events()
            .iter()
            .flat_map(|e| {
                let mut v = e.recv.fv();
                v.extend(e.send.fv());
                v
            })
            .collect()
    }

    fn check_interleaving(&self) -> Result<()> {
        let mut next = vec![0usize; self.sessions.len()];
        for &(s, j) in &self.interleaving {
            let Some(n) = next.get_mut(s) else {
                return Err(Error::NotAnInterleaving(format!("unknown session {s}")));
            };
            if j != *n || j >= self.sessions[s].steps.len() {
                return Err(Error::NotAnInterleaving(format!("session {s} step {j} out of order (expected {n})")));
            }
            *n += 1;
        }
        Ok(())
    }
}

/// Outcome of one derivability check inside a run.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub holds: bool,
    pub witness: Subst,
    pub exhausted: bool,
    pub error: Option<String>,
}

impl CheckOutcome {
    fn from(r: Result<Derivation>) -> CheckOutcome {
        match r {
            Ok(d) => CheckOutcome {
                holds: d.holds,
                witness: d.certificate.map(|c| c.witness).unwrap_or_default(),
                exhausted: d.exhausted,
                error: None,
            },
            Err(e) => CheckOutcome { holds: false, witness: Subst::new(), exhausted: false, error: Some(e.to_string()) },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub index: usize,
    pub event: Event,
    /// `σ(k_{i-1}(I)) ⊢a σ(β_i)`, with witness `μ_i`.
    pub intruder: CheckOutcome,
    /// `k_i(u_i) ⊢a α_i`, with witness `θ_i`.
    pub honest: CheckOutcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub valid: bool,
    pub failure: Option<String>,
    pub steps: Vec<StepReport>,
    /// `k_0 … k_n` (unsubstituted).
    pub trace: Vec<KnowledgeFunction>,
    pub sigma: Subst,
    pub intruder: Name,
}

impl RunReport {
    pub fn final_knowledge(&self) -> &KnowledgeFunction {
        self.trace.last().expect("trace starts with k0")
    }

    pub fn mus(&self) -> Vec<Subst> {
        self.steps.iter().map(|s| s.intruder.witness.clone()).collect()
    }

    pub fn thetas(&self) -> Vec<Subst> {
        self.steps.iter().map(|s| s.honest.witness.clone()).collect()
    }

    /// `ω = σ μ_1 θ_1 … μ_n θ_n`, applied right to left.
    pub fn omega_apply(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        for s in self.steps.iter().rev() {
            cur = s.honest.witness.apply(&cur);
            cur = s.intruder.witness.apply(&cur);
        }
        self.sigma.apply(&cur)
    }

    /// `ω` as a substitution over the union of all domains.
    pub fn omega(&self) -> Subst {
        let mut dom: BTreeSet<Variable> = self.sigma.domain();
        for s in &self.steps {
            dom.extend(s.intruder.witness.domain());
            dom.extend(s.honest.witness.domain());
        }
        dom.into_iter()
            .map(|v| {
                let t = self.omega_apply(&Term::var(v.clone()));
                (v, t)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    pub search: SearchOptions,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        // Witness proofs are not needed for run bookkeeping.
        ValidateOptions { search: SearchOptions { normalize_proofs: false, ..SearchOptions::default() } }
    }
}

/// Recompute the knowledge trace of `run` and check both derivability
/// families step by step.
pub fn validate_run(run: &Run, initial: &KnowledgeFunction, intruder: &Name, mode: Mode, opts: ValidateOptions) -> Result<RunReport> {
    if !run.sigma.is_ground() {
        return Err(Error::NonGroundSigma(run.sigma.to_string()));
    }
    let fv = run.fv();
    if let Some(v) = fv.iter().find(|v| !run.sigma.contains(v)) {
        return Err(Error::NonGroundSigma(format!("{v} is free in the run but not bound by sigma")));
    }
    if let Some(v) = run.sigma.domain().into_iter().find(|v| !fv.contains(v)) {
        return Err(Error::InvalidRun(format!("sigma binds {v}, which is not free in the run")));
    }
    check_coherent(&run.sessions)?;
    run.check_interleaving()?;

    let mut k = initial.clone();
    let mut trace = vec![k.clone()];
    let mut steps = Vec::new();
    let mut failure = None;
    for (i, ev) in run.events().into_iter().enumerate() {
        let ki = k.get(intruder).apply(&run.sigma);
        let intr = CheckOutcome::from(assert_derives_with(&ki, &ev.recv.apply(&run.sigma), mode, opts.search));
        let mut next = k.clone();
        if ev.actor != *intruder {
            next.update(&ev.actor, &ev.recv);
        }
        let hon = CheckOutcome::from(assert_derives_with(&next.get(&ev.actor), &ev.send, mode, opts.search));
        if failure.is_none() {
            if !intr.holds {
                failure = Some(format!("step {i}: intruder cannot derive {}", ev.recv.apply(&run.sigma)));
            } else if !hon.holds {
                failure = Some(format!("step {i}: {} cannot derive {}", ev.actor.id(), ev.send));
            }
        }
        let st = &run.sessions[ev.session].steps[ev.step];
        if let Some(kp) = next.states.get_mut(&ev.actor) {
            kp.assertions.retain(|a| !st.retract.contains(a));
        }
        next.update(intruder, &ev.send);
        k = next;
        trace.push(k.clone());
        steps.push(StepReport { index: i, event: ev, intruder: intr, honest: hon });
    }
    Ok(RunReport { valid: failure.is_none(), failure, steps, trace, sigma: run.sigma.clone(), intruder: intruder.clone() })
}

/// Rename the bound variables of a secrecy goal away from a run.
pub fn goal_instance(gamma: &Assertion) -> Assertion {
    rename_bound(gamma, "g")
}

/// `σ(k_n(I)) ⊢a σ(γ)` on a validated run.
pub fn is_attack(report: &RunReport, gamma: &Assertion, mode: Mode) -> Result<Derivation> {
    if !report.valid {
        return Err(Error::InvalidRun(report.failure.clone().unwrap_or_default()));
    }
    let ki = report.final_knowledge().get(&report.intruder).apply(&report.sigma);
    assert_derives_with(&ki, &goal_instance(gamma).apply(&report.sigma), mode, SearchOptions::default())
}

/// JSON form of a run: sessions by role, interleaving and σ.
#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct RunSpec {
    pub sessions: Vec<SessionSpec>,
    pub interleaving: Vec<(usize, usize)>,
    pub sigma: BTreeMap<String, String>,
}

#[derive(Clone, Debug, Serialize, serde::Deserialize)]
pub struct SessionSpec {
    pub role: String,
    #[serde(default)]
    pub actor: Option<String>,
    #[serde(default)]
    pub binding: BTreeMap<String, String>,
    pub steps: usize,
}
