//! Recursive-descent parser for `.spa` files.

use std::collections::{BTreeMap, BTreeSet};

use crate::assertion::Assertion;
use crate::error::{Error, Result};
use crate::protocol::{Role, Step};
use crate::term::{Name, NameKind, Term, Variable, DUMMY_ID, SPARE_ID};

use super::lexer::{lex, Tok, Token};
use super::{AttackQuery, DeriveQuery, Query, SpecFile};

const RESERVED: &[&str] = &["enc", "member", "and", "exists", "says"];

/// Name table plus quantification variables in scope.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    pub names: BTreeMap<String, Name>,
    pub vars: BTreeSet<String>,
}

impl Scope {
    pub fn with_builtins() -> Scope {
        let mut s = Scope::default();
        s.names.insert(DUMMY_ID.into(), Name::dummy());
        s.names.insert(SPARE_ID.into(), Name::spare());
        s
    }
}

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    pub(super) scope: Scope,
}

fn syntax(t: &Token, msg: impl Into<String>) -> Error {
    Error::Parse { line: t.line, col: t.col, msg: format!("syntax error: {}", msg.into()) }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) | Tok::Int(s) => format!("`{s}`"),
        Tok::Var(s) => format!("`?{s}`"),
        Tok::Sym(c) => format!("`{c}`"),
        Tok::Eof => "end of input".into(),
    }
}

impl Parser {
    pub(super) fn new(src: &str, scope: Scope) -> Result<Parser> {
        Ok(Parser { toks: lex(src)?, pos: 0, scope })
    }

    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        syntax(self.peek(), msg)
    }

    fn at_sym(&self, c: char) -> bool {
        self.peek().tok == Tok::Sym(c)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.at_sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.err_here(format!("expected `{c}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err_here(format!("expected `{kw}`, found {}", describe(&self.peek().tok))))
        }
    }

    pub(super) fn expect_eof(&mut self) -> Result<()> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.err_here(format!("unexpected {}", describe(&self.peek().tok))))
        }
    }

    /// An identifier or digit string.
    fn word(&mut self) -> Result<(String, Token)> {
        let t = self.bump();
        match &t.tok {
            Tok::Ident(s) | Tok::Int(s) => Ok((s.clone(), t.clone())),
            other => Err(syntax(&t, format!("expected an identifier, found {}", describe(other)))),
        }
    }

    fn count(&mut self) -> Result<usize> {
        let t = self.bump();
        match &t.tok {
            Tok::Int(s) => s.parse().map_err(|_| syntax(&t, "number out of range")),
            other => Err(syntax(&t, format!("expected a number, found {}", describe(other)))),
        }
    }

    fn resolve(&self, s: &str, t: &Token) -> Result<Term> {
        if self.scope.vars.contains(s) {
            return Ok(Term::var(Variable::quant(s)));
        }
        match self.scope.names.get(s) {
            Some(n) => Ok(Term::name(n.clone())),
            None => Err(Error::Parse { line: t.line, col: t.col, msg: format!("unresolved identifier `{s}`") }),
        }
    }

    fn resolve_name(&self, s: &str, t: &Token) -> Result<Name> {
        match self.scope.names.get(s) {
            Some(n) => Ok(n.clone()),
            None => Err(Error::Parse { line: t.line, col: t.col, msg: format!("unresolved name `{s}`") }),
        }
    }

    fn declare(&mut self, s: &str, t: &Token, n: Name) -> Result<()> {
        if s.starts_with('_') {
            return Err(Error::Parse { line: t.line, col: t.col, msg: format!("`{s}` is reserved") });
        }
        if RESERVED.contains(&s) {
            return Err(syntax(t, format!("`{s}` is a keyword")));
        }
        if self.scope.names.contains_key(s) || self.scope.vars.contains(s) {
            return Err(Error::Parse { line: t.line, col: t.col, msg: format!("`{s}` is declared twice") });
        }
        self.scope.names.insert(s.to_string(), n);
        Ok(())
    }

    fn declare_var(&mut self, s: &str, t: &Token) -> Result<Variable> {
        if self.scope.names.contains_key(s) {
            return Err(Error::Parse { line: t.line, col: t.col, msg: format!("variable `{s}` shadows a name") });
        }
        if RESERVED.contains(&s) {
            return Err(syntax(t, format!("`{s}` is a keyword")));
        }
        self.scope.vars.insert(s.to_string());
        Ok(Variable::quant(s))
    }

    fn atomic(&mut self) -> Result<Term> {
        let t = self.bump();
        match &t.tok {
            Tok::Var(s) => Ok(Term::var(Variable::inst(s))),
            Tok::Sym('*') => Ok(Term::name(Name::dummy())),
            Tok::Ident(s) | Tok::Int(s) => self.resolve(s, &t),
            other => Err(syntax(&t, format!("expected an atomic term, found {}", describe(other)))),
        }
    }

    pub(super) fn term(&mut self) -> Result<Term> {
        if self.eat_sym('(') {
            let a = self.term()?;
            self.expect_sym(',')?;
            let b = self.term()?;
            self.expect_sym(')')?;
            return Ok(Term::pair(a, b));
        }
        if self.eat_sym('{') {
            let p = self.term()?;
            self.expect_sym('}')?;
            let k = self.atomic()?;
            return Ok(Term::enc(p, k));
        }
        if self.at_kw("enc") && *self.peek_at(1) == Tok::Sym('(') {
            self.bump();
            self.bump();
            let p = self.term()?;
            self.expect_sym(',')?;
            let k = self.term()?;
            self.expect_sym(')')?;
            return Ok(Term::enc(p, k));
        }
        self.atomic()
    }

    fn terms_until(&mut self, end: char) -> Result<Vec<Term>> {
        let mut out = vec![self.term()?];
        while self.eat_sym(',') {
            out.push(self.term()?);
        }
        if !self.at_sym(end) {
            return Err(self.err_here(format!("expected `,` or `{end}`, found {}", describe(&self.peek().tok))));
        }
        Ok(out)
    }

    fn sort_atomic(&self, t: &Term, tok: &Token, what: &str) -> Result<()> {
        if t.is_atomic() {
            Ok(())
        } else {
            Err(Error::Parse { line: tok.line, col: tok.col, msg: format!("sort violation: {what} must be atomic, got {t}") })
        }
    }

    pub(super) fn assertion(&mut self) -> Result<Assertion> {
        let start = self.peek().clone();
        let kw = match &start.tok {
            Tok::Ident(s) => Some(s.clone()),
            _ => None,
        };
        let call = *self.peek_at(1) == Tok::Sym('(');
        match kw.as_deref() {
            Some("exists") => {
                self.bump();
                let saved = self.scope.vars.clone();
                let mut vs = Vec::new();
                while !self.at_sym('.') {
                    let (s, t) = self.word()?;
                    vs.push(self.declare_var(&s, &t)?);
                }
                if vs.is_empty() {
                    return Err(self.err_here("expected a bound variable"));
                }
                self.expect_sym('.')?;
                let body = self.assertion();
                self.scope.vars = saved;
                Ok(Assertion::exists_many(&vs, body?))
            }
            Some("and") if call => {
                self.bump();
                self.bump();
                let a = self.assertion()?;
                self.expect_sym(',')?;
                let b = self.assertion()?;
                self.expect_sym(')')?;
                Ok(Assertion::and(a, b))
            }
            Some("says") if call => {
                self.bump();
                self.bump();
                let tok = self.peek().clone();
                let s = self.term()?;
                self.sort_atomic(&s, &tok, "a says subject")?;
                if let Some(n) = s.as_name() {
                    if n.kind() != NameKind::Key {
                        return Err(Error::Parse {
                            line: tok.line,
                            col: tok.col,
                            msg: format!("sort violation: says subject {n} is not a key"),
                        });
                    }
                }
                self.expect_sym(',')?;
                let b = self.assertion()?;
                self.expect_sym(')')?;
                Ok(Assertion::says(s, b))
            }
            Some("member") if call => {
                self.bump();
                self.bump();
                let t = self.term()?;
                self.expect_sym(',')?;
                self.expect_sym('[')?;
                let mut l = Vec::new();
                if !self.at_sym(']') {
                    loop {
                        let (s, tok) = self.word()?;
                        l.push(self.resolve_name(&s, &tok)?);
                        if !self.eat_sym(',') {
                            break;
                        }
                    }
                }
                self.expect_sym(']')?;
                self.expect_sym(')')?;
                Ok(Assertion::member(t, l))
            }
            Some(p) if call && p != "enc" => {
                let p = p.to_string();
                self.bump();
                self.bump();
                let mut args = Vec::new();
                if !self.at_sym(')') {
                    loop {
                        let tok = self.peek().clone();
                        let a = self.term()?;
                        self.sort_atomic(&a, &tok, &format!("argument of {p}"))?;
                        args.push(a);
                        if !self.eat_sym(',') {
                            break;
                        }
                    }
                }
                self.expect_sym(')')?;
                Ok(Assertion::pred(&p, args))
            }
            _ => {
                let t = self.term()?;
                if self.eat_sym('~') {
                    let u = self.term()?;
                    Ok(Assertion::eq(t, u))
                } else {
                    Ok(Assertion::msg(t))
                }
            }
        }
    }

    fn words(&mut self) -> Result<Vec<(String, Token)>> {
        let mut out = vec![self.word()?];
        while self.eat_sym(',') {
            out.push(self.word()?);
        }
        Ok(out)
    }

    fn role(&mut self, spec: &SpecFile) -> Result<Role> {
        let (name, name_tok) = self.word()?;
        if spec.roles.iter().any(|r| r.name == name) {
            return Err(Error::Parse { line: name_tok.line, col: name_tok.col, msg: format!("role `{name}` is declared twice") });
        }
        self.expect_kw("actor")?;
        let (a, at) = self.word()?;
        let actor = self.resolve_name(&a, &at)?;
        if !spec.agents.contains(&actor) {
            return Err(Error::Parse { line: at.line, col: at.col, msg: format!("sort violation: actor {a} is not an agent") });
        }
        self.expect_sym('{')?;
        let mut steps: Vec<Step> = Vec::new();
        let mut domains = BTreeMap::new();
        let mut pending: Option<Assertion> = None;
        while !self.at_sym('}') {
            let (kw, t) = self.word()?;
            match kw.as_str() {
                "domain" => {
                    let vt = self.bump();
                    let Tok::Var(v) = &vt.tok else {
                        return Err(syntax(&vt, "expected `?variable` after `domain`"));
                    };
                    self.expect_sym(':')?;
                    let mut dom = Vec::new();
                    for (s, tok) in self.words()? {
                        dom.push(self.resolve_name(&s, &tok)?);
                    }
                    domains.insert(Variable::inst(v), dom);
                }
                "recv" => {
                    if pending.is_some() {
                        return Err(syntax(&t, "two receives in a row"));
                    }
                    pending = Some(self.assertion()?);
                }
                "send" | "assert" => {
                    let anon = if self.at_kw("anon") {
                        self.bump();
                        true
                    } else {
                        false
                    };
                    let a = self.assertion()?;
                    let mut st = if kw == "send" {
                        let recv = pending.take().unwrap_or_else(|| Assertion::msg(Term::name(Name::dummy())));
                        Step::exchange(recv, a)
                    } else {
                        if pending.is_some() {
                            return Err(syntax(&t, "`assert` cannot follow `recv`"));
                        }
                        Step::assert(a)
                    };
                    st.anon = anon;
                    steps.push(st);
                }
                "retract" => {
                    let a = self.assertion()?;
                    if pending.is_some() {
                        return Err(syntax(&t, "`retract` must follow a send or assert"));
                    }
                    match steps.last_mut() {
                        Some(st) => st.retract.push(a),
                        None => return Err(syntax(&t, "`retract` must follow a send or assert")),
                    }
                }
                other => return Err(syntax(&t, format!("unknown role statement `{other}`"))),
            }
            self.expect_sym(';')?;
        }
        if pending.is_some() {
            return Err(self.err_here("receive without a matching send"));
        }
        self.expect_sym('}')?;
        Role::new(&name, actor, steps, domains).map_err(|e| Error::Parse { line: name_tok.line, col: name_tok.col, msg: e.to_string() })
    }

    fn derive_query(&mut self) -> Result<DeriveQuery> {
        let (name, _) = self.word()?;
        self.expect_sym('{')?;
        let saved = self.scope.vars.clone();
        let r = self.derive_body(name);
        self.scope.vars = saved;
        r
    }

    fn derive_body(&mut self, name: String) -> Result<DeriveQuery> {
        let (mut vars, mut know, mut assume, mut goal) = (vec![], vec![], vec![], None);
        while !self.at_sym('}') {
            let (kw, t) = self.word()?;
            match kw.as_str() {
                "vars" => {
                    for (s, tok) in self.words()? {
                        vars.push(self.declare_var(&s, &tok)?);
                    }
                }
                "know" => know.extend(self.terms_until(';')?),
                "assume" => assume.push(self.assertion()?),
                "goal" => {
                    if goal.is_some() {
                        return Err(syntax(&t, "a derive query has one goal"));
                    }
                    goal = Some(self.assertion()?);
                }
                other => return Err(syntax(&t, format!("unknown derive statement `{other}`"))),
            }
            self.expect_sym(';')?;
        }
        let Some(goal) = goal else {
            return Err(self.err_here("derive query without a goal"));
        };
        self.expect_sym('}')?;
        Ok(DeriveQuery { name, vars, know, assume, goal })
    }

    pub(super) fn file(&mut self) -> Result<SpecFile> {
        let mut spec = SpecFile::default();
        while self.peek().tok != Tok::Eof {
            let (kw, t) = self.word()?;
            match kw.as_str() {
                "mode" => {
                    let (m, mt) = self.word()?;
                    spec.mode = m.parse().map_err(|_| syntax(&mt, format!("unknown mode `{m}`")))?;
                }
                "names" => {
                    for (s, tok) in self.words()? {
                        let n = Name::plain(&s);
                        self.declare(&s, &tok, n.clone())?;
                        spec.names.push(n);
                    }
                }
                "keys" => loop {
                    let (s, tok) = self.word()?;
                    let k = if self.eat_sym('/') {
                        let (inv, itok) = self.word()?;
                        self.declare(&inv, &itok, Name::key(&inv, &s))?;
                        Name::key(&s, &inv)
                    } else {
                        Name::symmetric_key(&s)
                    };
                    self.declare(&s, &tok, k.clone())?;
                    spec.keys.push(k);
                    if !self.eat_sym(',') {
                        break;
                    }
                },
                "agents" => {
                    for (s, tok) in self.words()? {
                        let (pk, sk) = (format!("pk_{s}"), format!("sk_{s}"));
                        let a = Name::agent(&s, &pk, &sk);
                        self.declare(&s, &tok, a.clone())?;
                        self.declare(&pk, &tok, Name::key(&pk, &sk))?;
                        self.declare(&sk, &tok, Name::key(&sk, &pk))?;
                        spec.agents.push(a);
                    }
                }
                "intruder" => {
                    let (s, tok) = self.word()?;
                    let n = self.resolve_name(&s, &tok)?;
                    if !spec.agents.contains(&n) {
                        return Err(Error::Parse {
                            line: tok.line,
                            col: tok.col,
                            msg: format!("sort violation: intruder {s} is not an agent"),
                        });
                    }
                    spec.intruder = Some(n);
                }
                "vars" => {
                    for (s, tok) in self.words()? {
                        spec.vars.push(self.declare_var(&s, &tok)?);
                    }
                }
                "public" => spec.public.extend(self.terms_until(';')?),
                "knows" | "fact" => {
                    let (s, tok) = self.word()?;
                    let a = self.resolve_name(&s, &tok)?;
                    if !spec.agents.contains(&a) {
                        return Err(Error::Parse { line: tok.line, col: tok.col, msg: format!("sort violation: {s} is not an agent") });
                    }
                    self.expect_sym(':')?;
                    if kw == "knows" {
                        let ts = self.terms_until(';')?;
                        spec.knows.entry(a).or_default().extend(ts);
                    } else {
                        let f = self.assertion()?;
                        spec.facts.entry(a).or_default().push(f);
                    }
                }
                "role" => {
                    let r = self.role(&spec)?;
                    spec.roles.push(r);
                    continue;
                }
                "derive" => {
                    let q = self.derive_query()?;
                    spec.check_query_name(&q.name, &t)?;
                    spec.queries.push(Query::Derive(q));
                    continue;
                }
                "attack" => {
                    let (name, _) = self.word()?;
                    spec.check_query_name(&name, &t)?;
                    self.expect_sym(':')?;
                    let goal = self.assertion()?;
                    let sessions = if self.at_kw("sessions") {
                        self.bump();
                        Some(self.count()?)
                    } else {
                        None
                    };
                    spec.queries.push(Query::Attack(AttackQuery { name, goal, sessions }));
                }
                other => return Err(syntax(&t, format!("unknown declaration `{other}`"))),
            }
            self.expect_sym(';')?;
        }
        Ok(spec)
    }
}
