//! Report records emitted by the command-line front end.
//!
//! Every command produces one [`Report`]. JSON output is a pure function of
//! the inputs and the seed: no timings, no paths other than the ones given,
//! and maps in sorted order.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::assertion::{Assertion, KnowledgePair, Mode};
use crate::derive::Certificate;
use crate::eq::{EqProof, RewriteStep};
use crate::insecurity::ZapReport;
use crate::oracles::fuzz::SuiteReport;
use crate::protocol::{Run, RunReport, RunSpec};
use crate::speclang::{render_assertion, run_to_spec};
use crate::term::{Subst, Variable};

pub const SCHEMA_ID: &str = "spa-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Yes,
    No,
    Found,
    None,
    Exhausted,
    Valid,
    Invalid,
    Ok,
    Pass,
    Fail,
    Error,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Exhausted => 2,
            Status::Fail | Status::Error => 1,
            _ => 0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Yes => "YES",
            Status::No => "NO",
            Status::Found => "FOUND",
            Status::None => "NONE",
            Status::Exhausted => "EXHAUSTED",
            Status::Valid => "VALID",
            Status::Invalid => "INVALID",
            Status::Ok => "OK",
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Agree,
    Disagree,
    Inconclusive,
}

/// Result of re-answering a query with a brute-force oracle.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: &'static str,
    pub input: Option<String>,
    pub status: Status,
    pub exit_code: i32,
    pub result: Payload,
    pub oracle: Option<OracleCheck>,
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, input: Option<String>, status: Status, result: Payload) -> Report {
        Report { schema: SCHEMA_ID, command, input, status, exit_code: status.exit_code(), result, oracle: None, error: None }
    }

    pub fn error(command: &'static str, input: Option<String>, msg: String) -> Report {
        let mut r = Report::new(command, input, Status::Error, Payload::Empty {});
        r.error = Some(msg);
        r
    }

    /// Attach an oracle verdict; a disagreement turns the report into a failure.
    pub fn with_oracle(mut self, o: OracleCheck) -> Report {
        if o.verdict == Verdict::Disagree {
            self.status = Status::Fail;
            self.exit_code = Status::Fail.exit_code();
        }
        self.oracle = Some(o);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Derive(DeriveResult),
    Attack(AttackResult),
    Saturate(SaturateResult),
    Normalize(NormalizeResult),
    ValidateRun(ValidateResult),
    Check(CheckResult),
    Fuzz(FuzzResult),
    Empty {},
}

#[derive(Clone, Debug, Serialize)]
pub struct ContextView {
    pub terms: Vec<String>,
    pub assertions: Vec<String>,
}

impl From<&KnowledgePair> for ContextView {
    fn from(kp: &KnowledgePair) -> ContextView {
        ContextView {
            terms: kp.terms.iter().map(|t| t.to_string()).collect(),
            assertions: kp.assertions.iter().map(|a| a.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeriveResult {
    pub query: String,
    pub mode: Mode,
    pub context: ContextView,
    pub goal: Assertion,
    pub kernel: ContextView,
    pub bound_vars: Vec<Variable>,
    pub m_bound: usize,
    pub holds: bool,
    pub exhausted: bool,
    pub candidates_tried: usize,
    pub certificate_replayed: bool,
    pub certificate: Option<Certificate>,
}

/// A run in its input format plus the rendered events under σ.
#[derive(Clone, Debug, Serialize)]
pub struct RunView {
    pub spec: RunSpec,
    pub events: Vec<String>,
}

impl From<&Run> for RunView {
    fn from(run: &Run) -> RunView {
        let events = run
            .events()
            .iter()
            .map(|e| {
                let sid = run.sessions[e.session].id;
                format!(
                    "[{sid}] {}: {} > {}",
                    e.actor.id(),
                    render_assertion(&e.recv.apply(&run.sigma)),
                    render_assertion(&e.send.apply(&run.sigma))
                )
            })
            .collect();
        RunView { spec: run_to_spec(run), events }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ZapView {
    pub precondition: bool,
    pub preserved: bool,
    pub bounded: bool,
    pub universe_size: usize,
    pub sigma_size: usize,
    pub sigma_small_size: usize,
    pub sigma_small: Subst,
    pub failures: Vec<String>,
}

impl From<&ZapReport> for ZapView {
    fn from(z: &ZapReport) -> ZapView {
        ZapView {
            precondition: z.precondition,
            preserved: z.preserved,
            bounded: z.bounded,
            universe_size: z.universe_size,
            sigma_size: z.sigma_size,
            sigma_small_size: z.sigma_small_size,
            sigma_small: z.sigma_small.clone(),
            failures: z.failures.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackResult {
    pub query: String,
    pub goal: Assertion,
    pub sessions: usize,
    pub nodes: usize,
    pub run: Option<RunView>,
    /// Witness of the goal in the intruder's final knowledge.
    pub goal_witness: Option<Subst>,
    pub zap: Option<ZapView>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AtomStatus {
    pub atom: Assertion,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaturateResult {
    pub query: String,
    pub mode: Mode,
    pub kernel: ContextView,
    pub universe_size: usize,
    pub rounds: usize,
    /// `|Z|²`, the fixpoint iteration bound.
    pub round_bound: usize,
    pub derived: Vec<String>,
    pub goals: Vec<AtomStatus>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalizeResult {
    pub query: String,
    pub conclusion: Assertion,
    pub input_size: usize,
    pub input_normal: bool,
    pub steps: Vec<RewriteStep>,
    pub is_normal: bool,
    pub subterm_property: bool,
    pub proof: Arc<EqProof>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepView {
    pub index: usize,
    pub intruder_holds: bool,
    pub intruder_witness: Subst,
    pub honest_holds: bool,
    pub honest_witness: Subst,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateResult {
    pub valid: bool,
    pub failure: Option<String>,
    pub run: RunView,
    pub steps: Vec<StepView>,
    pub zap: Option<ZapView>,
    /// Attack queries of the file and whether this run realizes them.
    pub attacks: BTreeMap<String, bool>,
}

impl ValidateResult {
    pub fn steps_of(r: &RunReport) -> Vec<StepView> {
        r.steps
            .iter()
            .map(|s| StepView {
                index: s.index,
                intruder_holds: s.intruder.holds,
                intruder_witness: s.intruder.witness.clone(),
                honest_holds: s.honest.holds,
                honest_witness: s.honest.witness.clone(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RoleView {
    pub name: String,
    pub actor: String,
    pub steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryView {
    pub name: String,
    pub kind: &'static str,
    pub ok: bool,
    pub problem: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub mode: Mode,
    pub names: Vec<String>,
    pub agents: Vec<String>,
    pub intruder: Option<String>,
    pub roles: Vec<RoleView>,
    pub queries: Vec<QueryView>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FuzzResult {
    pub seed: u64,
    pub count: usize,
    pub suites: Vec<SuiteReport>,
}
