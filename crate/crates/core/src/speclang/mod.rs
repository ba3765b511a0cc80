//! The `.spa` specification language: declarations, roles and queries.

mod lexer;
mod parser;
mod printer;
mod proof;

use std::collections::BTreeMap;

use crate::assertion::{Assertion, KnowledgePair, Mode};
use crate::error::{Error, Result};
use crate::protocol::{instantiate_session, Protocol, Role, Run, RunSpec, SessionSpec};
use crate::term::{Name, Subst, Term, Variable};

pub use parser::Scope;
pub use printer::{print_run, print_spec, render_assertion};
pub use proof::{dy_proof_from_json, eq_proof_from_json};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpecFile {
    pub mode: Mode,
    pub names: Vec<Name>,
    pub keys: Vec<Name>,
    pub agents: Vec<Name>,
    pub intruder: Option<Name>,
    /// Quantification variables usable everywhere (free in contexts).
    pub vars: Vec<Variable>,
    pub public: Vec<Term>,
    pub knows: BTreeMap<Name, Vec<Term>>,
    pub facts: BTreeMap<Name, Vec<Assertion>>,
    pub roles: Vec<Role>,
    pub queries: Vec<Query>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Query {
    Derive(DeriveQuery),
    Attack(AttackQuery),
}

impl Query {
    pub fn name(&self) -> &str {
        match self {
            Query::Derive(q) => &q.name,
            Query::Attack(q) => &q.name,
        }
    }
}

/// `(S; A) ⊢a α`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeriveQuery {
    pub name: String,
    pub vars: Vec<Variable>,
    pub know: Vec<Term>,
    pub assume: Vec<Assertion>,
    pub goal: Assertion,
}

impl DeriveQuery {
    pub fn context(&self) -> KnowledgePair {
        KnowledgePair::new(self.know.iter().cloned(), self.assume.iter().cloned())
    }
}

/// Secrecy goal γ with an optional default session bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackQuery {
    pub name: String,
    pub goal: Assertion,
    pub sessions: Option<usize>,
}

pub fn parse(src: &str) -> Result<SpecFile> {
    let mut p = parser::Parser::new(src, Scope::with_builtins())?;
    let spec = p.file()?;
    p.expect_eof()?;
    Ok(spec)
}

impl SpecFile {
    fn check_query_name(&self, name: &str, t: &lexer::Token) -> Result<()> {
        if self.queries.iter().any(|q| q.name() == name) {
            return Err(Error::Parse { line: t.line, col: t.col, msg: format!("query `{name}` is declared twice") });
        }
        Ok(())
    }

    /// Every declared name plus builtins, and the global variables.
    pub fn scope(&self) -> Scope {
        let mut s = Scope::with_builtins();
        for n in self.names.iter().chain(&self.keys) {
            s.names.insert(n.id().to_string(), n.clone());
            if let Some(inv) = n.inverse() {
                s.names.insert(inv.id().to_string(), inv);
            }
        }
        for a in &self.agents {
            s.names.insert(a.id().to_string(), a.clone());
            for k in [a.public_key(), a.secret_key()].into_iter().flatten() {
                s.names.insert(k.id().to_string(), k);
            }
        }
        s.vars.extend(self.vars.iter().map(|v| v.id().to_string()));
        s
    }

    fn scope_with(&self, extra: &[Variable]) -> Scope {
        let mut s = self.scope();
        s.vars.extend(extra.iter().map(|v| v.id().to_string()));
        s
    }

    pub fn parse_term(&self, src: &str, extra_vars: &[Variable]) -> Result<Term> {
        let mut p = parser::Parser::new(src, self.scope_with(extra_vars))?;
        let t = p.term()?;
        p.expect_eof()?;
        Ok(t)
    }

    pub fn parse_assertion(&self, src: &str, extra_vars: &[Variable]) -> Result<Assertion> {
        let mut p = parser::Parser::new(src, self.scope_with(extra_vars))?;
        let a = p.assertion()?;
        p.expect_eof()?;
        Ok(a)
    }

    pub fn query(&self, name: &str) -> Result<&Query> {
        self.queries.iter().find(|q| q.name() == name).ok_or_else(|| {
            let known: Vec<&str> = self.queries.iter().map(Query::name).collect();
            Error::MalformedProtocol(format!("no query named `{name}` (have: {})", known.join(", ")))
        })
    }

    pub fn derive_query(&self, name: &str) -> Result<&DeriveQuery> {
        match self.query(name)? {
            Query::Derive(q) => Ok(q),
            Query::Attack(_) => Err(Error::MalformedProtocol(format!("`{name}` is an attack query, not a derive query"))),
        }
    }

    pub fn attack_query(&self, name: &str) -> Result<&AttackQuery> {
        match self.query(name)? {
            Query::Attack(q) => Ok(q),
            Query::Derive(_) => Err(Error::MalformedProtocol(format!("`{name}` is a derive query, not an attack query"))),
        }
    }

    pub fn protocol(&self) -> Result<Protocol> {
        let intruder = self.intruder.clone().ok_or_else(|| Error::MalformedProtocol("no intruder declared".into()))?;
        Ok(Protocol {
            mode: self.mode,
            roles: self.roles.clone(),
            agents: self.agents.clone(),
            intruder,
            public: self.public.clone(),
            knows: self.knows.clone(),
            facts: self.facts.clone(),
        })
    }

    /// Build a run from its JSON description. Sessions get ids 1, 2, ...
    pub fn run_from_spec(&self, rs: &RunSpec) -> Result<Run> {
        let scope = self.scope();
        let lookup = |s: &str| scope.names.get(s).cloned().ok_or_else(|| Error::InvalidRun(format!("unknown name `{s}`")));
        let mut sessions = Vec::new();
        for (i, ss) in rs.sessions.iter().enumerate() {
            let role =
                self.roles.iter().find(|r| r.name == ss.role).ok_or_else(|| Error::InvalidRun(format!("unknown role `{}`", ss.role)))?;
            let actor = match &ss.actor {
                Some(a) => lookup(a)?,
                None => role.actor.clone(),
            };
            let mut binding = BTreeMap::new();
            for (v, n) in &ss.binding {
                binding.insert(Variable::inst(v.trim_start_matches('?')), lookup(n)?);
            }
            sessions.push(instantiate_session(role, &actor, &binding, ss.steps, i + 1)?);
        }
        let mut sigma = Subst::new();
        for (v, t) in &rs.sigma {
            let v = Variable::inst(v.trim_start_matches('?'));
            sigma.insert(v, self.parse_term(t, &[]).map_err(|e| Error::InvalidRun(format!("sigma value {t:?}: {e}")))?);
        }
        Ok(Run { sessions, interleaving: rs.interleaving.clone(), sigma })
    }
}

/// The JSON description of a run, inverse to [`SpecFile::run_from_spec`].
pub fn run_to_spec(run: &Run) -> RunSpec {
    RunSpec {
        sessions: run
            .sessions
            .iter()
            .map(|s| SessionSpec {
                role: s.role.clone(),
                actor: Some(s.actor.id().to_string()),
                binding: s.binding.iter().map(|(v, n)| (v.id().to_string(), n.id().to_string())).collect(),
                steps: s.steps.len(),
            })
            .collect(),
        interleaving: run.interleaving.clone(),
        sigma: run.sigma.iter().map(|(v, t)| (v.to_string(), t.to_string())).collect(),
    }
}
