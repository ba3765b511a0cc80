//! Command-line front end: argument parsing, dispatch and report rendering.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::assertion::{Assertion, Mode};
use crate::derive::{assert_derives, WitnessQuery};
use crate::eq::{check_subterm_property, normalize, EqContext, Saturation, DEFAULT_STEP_LIMIT};
use crate::error::Error;
use crate::insecurity::{find_attack, verify_zap_preservation, AttackOptions, AttackOutcome};
use crate::oracles::{brute_witness, fuzz, EqOracle, OracleConfig};
use crate::protocol::{is_attack, validate_run, RunSpec, ValidateOptions};
use crate::report::*;
use crate::speclang::{self, eq_proof_from_json, print_run, render_assertion, DeriveQuery, Query, SpecFile};

#[derive(Parser, Debug)]
#[command(name = "spa", version, about = "Symbolic analysis of equality and assertion knowledge in security protocols")]
pub struct Cli {
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for the fuzz suites.
    #[arg(long, global = true, env = "SPA_THREADS")]
    pub threads: Option<usize>,
    /// Cross-check the answer with the brute-force oracles.
    #[arg(long, global = true)]
    pub oracle: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Core,
    Extended,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Core => Mode::Core,
            ModeArg::Extended => Mode::Extended,
        }
    }
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    pub file: PathBuf,
    /// Query name; may be omitted when the file has exactly one query of the right kind.
    #[arg(long)]
    pub goal: Option<String>,
    /// Override the file's mode.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide (S; A) ⊢a α for a derive query.
    Derive(QueryArgs),
    /// Search for an attack with at most K sessions.
    Attack {
        file: PathBuf,
        #[arg(long)]
        goal: Option<String>,
        /// Session bound K; defaults to the query's bound, then 1.
        #[arg(long)]
        sessions: Option<usize>,
        /// Wall-clock budget in milliseconds.
        #[arg(long)]
        budget_ms: Option<u64>,
    },
    /// Saturate the kernel of a derive query and list the derived atoms.
    Saturate(QueryArgs),
    /// Check and normalize a JSON proof against a derive query's context.
    Normalize {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long)]
        proof: PathBuf,
    },
    /// Replay a JSON run against the file's protocol.
    ValidateRun {
        file: PathBuf,
        #[arg(long)]
        run: PathBuf,
    },
    /// Parse a file and check its queries.
    Check { file: PathBuf },
    /// Run the oracle agreement suites.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

impl Command {
    fn verb(&self) -> &'static str {
        match self {
            Command::Derive(_) => "derive",
            Command::Attack { .. } => "attack",
            Command::Saturate(_) => "saturate",
            Command::Normalize { .. } => "normalize",
            Command::ValidateRun { .. } => "validate-run",
            Command::Check { .. } => "check",
            Command::Fuzz { .. } => "fuzz",
        }
    }

    fn input(&self) -> Option<String> {
        let p = match self {
            Command::Derive(q) | Command::Saturate(q) | Command::Normalize { query: q, .. } => &q.file,
            Command::Attack { file, .. } | Command::ValidateRun { file, .. } | Command::Check { file } => file,
            Command::Fuzz { .. } => return None,
        };
        Some(p.display().to_string())
    }
}

/// Failure of a command before it could produce an answer.
#[derive(Debug)]
pub struct Failure(pub String);

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure(e.to_string())
    }
}

/// A report together with its human-readable rendering.
pub type Outcome = std::result::Result<(Report, String), Failure>;

/// Parse `argv`, run one command, write its report and return the exit code.
pub fn run_cli<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    let verb = cli.command.verb();
    let input = cli.command.input();
    let (report, text) = match dispatch(&cli) {
        Ok(r) => r,
        Err(Failure(msg)) => {
            let r = Report::error(verb, input, msg.clone());
            if cli.json {
                let _ = out.write_all(r.to_json().as_bytes());
            } else {
                let _ = writeln!(err, "error: {msg}");
            }
            return r.exit_code;
        }
    };
    if cli.json {
        let _ = out.write_all(report.to_json().as_bytes());
    } else {
        let _ = out.write_all(text.as_bytes());
        if let Some(o) = &report.oracle {
            let _ = writeln!(out, "oracle: {:?} ({})", o.verdict, o.detail);
        }
        let _ = writeln!(out, "{}", report.status.label());
    }
    report.exit_code
}

fn threads(cli: &Cli) -> usize {
    cli.threads.filter(|&n| n > 0).unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Derive(q) => derive(q, cli.oracle),
        Command::Attack { file, goal, sessions, budget_ms } => attack(file, goal.as_deref(), *sessions, *budget_ms, cli.oracle),
        Command::Saturate(q) => saturate(q, cli.oracle),
        Command::Normalize { query, proof } => normalize_cmd(query, proof, cli.oracle),
        Command::ValidateRun { file, run } => validate(file, run),
        Command::Check { file } => check(file),
        Command::Fuzz { seed, count } => fuzz_cmd(*seed, *count, threads(cli)),
    }
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn load(path: &PathBuf) -> Result<SpecFile, Failure> {
    let src = read(path)?;
    speclang::parse(&src).map_err(|e| Failure(format!("{}:{e}", path.display())))
}

/// The named query, or the only query of the wanted kind.
fn pick<'a>(spec: &'a SpecFile, name: Option<&str>, derive: bool) -> Result<&'a Query, Failure> {
    if let Some(n) = name {
        return Ok(spec.query(n)?);
    }
    let kind = if derive { "derive" } else { "attack" };
    let mut it = spec.queries.iter().filter(|q| matches!(q, Query::Derive(_)) == derive);
    match (it.next(), it.next()) {
        (Some(q), None) => Ok(q),
        (None, _) => Err(Failure(format!("no {kind} query in file"))),
        _ => Err(Failure(format!("several {kind} queries; choose one with --goal"))),
    }
}

fn derive_query<'a>(spec: &'a SpecFile, q: &QueryArgs) -> Result<&'a DeriveQuery, Failure> {
    select_derive(spec, q.goal.as_deref())
}

fn select_derive<'a>(spec: &'a SpecFile, goal: Option<&str>) -> Result<&'a DeriveQuery, Failure> {
    match pick(spec, goal, true)? {
        Query::Derive(d) => Ok(d),
        Query::Attack(a) => Err(Failure(format!("`{}` is an attack query", a.name))),
    }
}

fn witness_oracle(q: &WitnessQuery, engine: bool) -> OracleCheck {
    let cap = 2 * q.m_bound;
    match brute_witness(q, cap, &OracleConfig::default()) {
        Ok(s) => {
            let detail = match &s.witness {
                Some(mu) => format!("oracle witness {mu} within dagsize {cap}"),
                None => format!("no witness up to dagsize {}", s.complete_up_to),
            };
            let verdict = if s.witness.is_some() == engine { Verdict::Agree } else { Verdict::Disagree };
            OracleCheck { verdict, detail }
        }
        Err(e) => OracleCheck { verdict: Verdict::Inconclusive, detail: e.to_string() },
    }
}

fn derive(a: &QueryArgs, oracle: bool) -> Outcome {
    let spec = load(&a.file)?;
    derive_spec(&spec, Some(a.file.display().to_string()), a.goal.as_deref(), a.mode.map(Mode::from), oracle)
}

/// `derive` on a parsed file; `input` is only echoed in the report.
pub fn derive_spec(spec: &SpecFile, input: Option<String>, goal: Option<&str>, mode: Option<Mode>, oracle: bool) -> Outcome {
    let dq = select_derive(spec, goal)?;
    let mode = mode.unwrap_or(spec.mode);
    let ctx = dq.context();
    let q = WitnessQuery::new(&ctx, &dq.goal, mode)?;
    let d = assert_derives(&ctx, &dq.goal, mode)?;
    let replayed = match &d.certificate {
        Some(c) => {
            c.replay(&q).map_err(|e| Failure(format!("certificate does not replay: {e}")))?;
            true
        }
        None => false,
    };
    let status = if d.holds {
        Status::Yes
    } else if d.exhausted {
        Status::Exhausted
    } else {
        Status::No
    };
    let mut text = format!("query {}: {ctx} ⊢a {} [{mode:?}]\n", dq.name, dq.goal);
    text += &format!("M = {}, candidates tried: {}\n", q.m_bound, d.candidates_tried);
    if let Some(c) = &d.certificate {
        if c.by_axiom {
            text += "goal is an assertion of the context\n";
        } else if !c.witness.is_empty() {
            text += &format!("witness: {}\n", c.witness);
        }
        for (atom, p) in &c.eq_proofs {
            text += &format!("proof of {atom}:\n{}", indent(&p.render()));
        }
    }
    let result = DeriveResult {
        query: dq.name.clone(),
        mode,
        context: (&ctx).into(),
        goal: dq.goal.clone(),
        kernel: (&q.kernel).into(),
        bound_vars: q.bound_vars.clone(),
        m_bound: q.m_bound,
        holds: d.holds,
        exhausted: d.exhausted,
        candidates_tried: d.candidates_tried,
        certificate_replayed: replayed,
        certificate: d.certificate.clone(),
    };
    let mut r = Report::new("derive", input, status, Payload::Derive(result));
    if oracle && status != Status::Exhausted {
        r = r.with_oracle(witness_oracle(&q, d.holds));
    }
    Ok((r, text))
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}\n")).collect()
}

fn attack(file: &PathBuf, goal: Option<&str>, sessions: Option<usize>, budget_ms: Option<u64>, oracle: bool) -> Outcome {
    let spec = load(file)?;
    attack_spec(&spec, Some(file.display().to_string()), goal, sessions, budget_ms, oracle)
}

/// `attack` on a parsed file; `input` is only echoed in the report.
pub fn attack_spec(
    spec: &SpecFile,
    input: Option<String>,
    goal: Option<&str>,
    sessions: Option<usize>,
    budget_ms: Option<u64>,
    oracle: bool,
) -> Outcome {
    let aq = match pick(spec, goal, false)? {
        Query::Attack(a) => a,
        Query::Derive(d) => return Err(Failure(format!("`{}` is a derive query", d.name))),
    };
    let proto = spec.protocol()?;
    let k = sessions.or(aq.sessions).unwrap_or(1);
    let opts = AttackOptions { sessions: k, time_limit: budget_ms.map(Duration::from_millis), ..AttackOptions::default() };
    let outcome = find_attack(&proto, &aq.goal, &opts)?;
    let mut result =
        AttackResult { query: aq.name.clone(), goal: aq.goal.clone(), sessions: k, nodes: 0, run: None, goal_witness: None, zap: None };
    let mut text = format!("attack {} on goal {} with at most {k} sessions\n", aq.name, render_assertion(&aq.goal));
    let mut check = None;
    let status = match &outcome {
        AttackOutcome::Found(a) => {
            result.nodes = a.nodes;
            result.run = Some((&a.run).into());
            result.goal_witness = a.goal.certificate.as_ref().map(|c| c.witness.clone());
            result.zap = a.zap.as_ref().map(ZapView::from);
            text += &print_run(&a.run);
            if let Some(w) = &result.goal_witness {
                if !w.is_empty() {
                    text += &format!("goal witness: {w}\n");
                }
            }
            if let Some(z) = &a.zap {
                text += &format!("small substitution: {} (bounded: {})\n", z.sigma_small, z.bounded);
            }
            if oracle {
                let ki = a.validation.final_knowledge().get(&a.validation.intruder).apply(&a.validation.sigma);
                let g = crate::protocol::goal_instance(&aq.goal).apply(&a.validation.sigma);
                check = Some(match WitnessQuery::new(&ki, &g, proto.mode) {
                    Ok(q) => witness_oracle(&q, true),
                    Err(e) => OracleCheck { verdict: Verdict::Inconclusive, detail: e.to_string() },
                });
            }
            Status::Found
        }
        AttackOutcome::None { nodes } => {
            result.nodes = *nodes;
            text += &format!("no attack ({nodes} nodes)\n");
            Status::None
        }
        AttackOutcome::Exhausted { nodes } => {
            result.nodes = *nodes;
            text += &format!("budget exhausted after {nodes} nodes\n");
            Status::Exhausted
        }
    };
    let mut r = Report::new("attack", input, status, Payload::Attack(result));
    if let Some(c) = check {
        r = r.with_oracle(c);
    }
    Ok((r, text))
}

fn saturate(a: &QueryArgs, oracle: bool) -> Outcome {
    let spec = load(&a.file)?;
    let dq = derive_query(&spec, a)?;
    let mode = a.mode.map(Mode::from).unwrap_or(spec.mode);
    let q = WitnessQuery::new(&dq.context(), &dq.goal, mode)?;
    let goals: Vec<Assertion> = crate::derive::goal_atoms(&dq.goal)
        .into_iter()
        .filter(|g| g.is_basic_atom() && g.vars().iter().all(|v| !q.bound_vars.contains(v)))
        .collect();
    let ctx = Arc::new(EqContext::new(&q.kernel, mode)?);
    let sat = Saturation::new(ctx, &goals)?;
    let z = sat.universe().len();
    let derived: Vec<String> = sat.derived_atoms().iter().map(|x| x.to_string()).collect();
    let statuses: Vec<AtomStatus> = goals.iter().map(|g| AtomStatus { atom: g.clone(), holds: sat.holds(g) }).collect();
    let mut text = format!("kernel: {}\n|Z| = {z}, rounds = {} (bound {})\n", q.kernel, sat.rounds(), z * z);
    for d in &derived {
        text += &format!("  {d}\n");
    }
    for s in &statuses {
        text += &format!("goal atom {}: {}\n", s.atom, if s.holds { "derivable" } else { "not derivable" });
    }
    let check = if oracle {
        Some(match EqOracle::new(&q.kernel, &goals, &OracleConfig::default()) {
            Ok(o) => {
                let mut verdict = Verdict::Agree;
                let mut detail = format!("{} goal atoms over |Z| = {}", statuses.len(), o.universe().len());
                for s in &statuses {
                    match o.holds(&s.atom) {
                        Ok(b) if b == s.holds => {}
                        Ok(b) => {
                            verdict = Verdict::Disagree;
                            detail = format!("{}: engine {}, oracle {b}", s.atom, s.holds);
                            break;
                        }
                        Err(e) => {
                            verdict = Verdict::Inconclusive;
                            detail = e.to_string();
                            break;
                        }
                    }
                }
                OracleCheck { verdict, detail }
            }
            Err(e) => OracleCheck { verdict: Verdict::Inconclusive, detail: e.to_string() },
        })
    } else {
        None
    };
    let result = SaturateResult {
        query: dq.name.clone(),
        mode,
        kernel: (&q.kernel).into(),
        universe_size: z,
        rounds: sat.rounds(),
        round_bound: z * z,
        derived,
        goals: statuses,
    };
    let mut r = Report::new("saturate", Some(a.file.display().to_string()), Status::Ok, Payload::Saturate(result));
    if let Some(c) = check {
        r = r.with_oracle(c);
    }
    Ok((r, text))
}

fn normalize_cmd(a: &QueryArgs, proof: &PathBuf, oracle: bool) -> Outcome {
    let spec = load(&a.file)?;
    let dq = derive_query(&spec, a)?;
    let mode = a.mode.map(Mode::from).unwrap_or(spec.mode);
    let json: serde_json::Value = serde_json::from_str(&read(proof)?).map_err(|e| Failure(format!("{}: {e}", proof.display())))?;
    let mut vars = spec.vars.clone();
    vars.extend(dq.vars.iter().cloned());
    let p = eq_proof_from_json(&json, &spec, &vars)?;
    let ctx = EqContext::new(&dq.context(), mode)?;
    p.check(&ctx)?;
    let r = normalize(&p, &ctx, DEFAULT_STEP_LIMIT)?;
    let subterm = check_subterm_property(&r.proof, &ctx)?;
    let normal = r.proof.is_normal();
    let mut text = format!("input: {} nodes, normal: {}\n", p.size(), p.is_normal());
    for s in &r.steps {
        text += &format!("  {} {:?} -> {:?}\n", s.rule, s.before, s.after);
    }
    text += &format!("normal form ({} rewrites):\n{}", r.steps.len(), indent(&r.proof.render()));
    text += &format!("is_normal: {normal}, subterm property: {subterm}\n");
    let check = oracle.then(|| match EqOracle::new(&ctx.knowledge(), std::slice::from_ref(&p.conclusion), &OracleConfig::default()) {
        Ok(o) => match o.holds(&p.conclusion) {
            Ok(true) => OracleCheck { verdict: Verdict::Agree, detail: format!("oracle derives {}", p.conclusion) },
            Ok(false) => OracleCheck { verdict: Verdict::Disagree, detail: format!("oracle does not derive {}", p.conclusion) },
            Err(e) => OracleCheck { verdict: Verdict::Inconclusive, detail: e.to_string() },
        },
        Err(e) => OracleCheck { verdict: Verdict::Inconclusive, detail: e.to_string() },
    });
    let status = if normal && subterm { Status::Ok } else { Status::Fail };
    let result = NormalizeResult {
        query: dq.name.clone(),
        conclusion: p.conclusion.clone(),
        input_size: p.size(),
        input_normal: p.is_normal(),
        steps: r.steps,
        is_normal: normal,
        subterm_property: subterm,
        proof: r.proof,
    };
    let mut rep = Report::new("normalize", Some(a.file.display().to_string()), status, Payload::Normalize(result));
    if let Some(c) = check {
        rep = rep.with_oracle(c);
    }
    Ok((rep, text))
}

fn validate(file: &PathBuf, run: &PathBuf) -> Outcome {
    let spec = load(file)?;
    let proto = spec.protocol()?;
    let rs: RunSpec = serde_json::from_str(&read(run)?).map_err(|e| Failure(format!("{}: {e}", run.display())))?;
    let run = spec.run_from_spec(&rs)?;
    let k0 = proto.initial_knowledge();
    let rep = validate_run(&run, &k0, &proto.intruder, proto.mode, ValidateOptions::default())?;
    let mut text = print_run(&run);
    let mut zap = None;
    let mut attacks = std::collections::BTreeMap::new();
    if rep.valid {
        let z = verify_zap_preservation(&run, &rep, &k0, proto.mode)?;
        text += &format!("small substitution: {} (preserved: {}, bounded: {})\n", z.sigma_small, z.preserved, z.bounded);
        zap = Some(ZapView::from(&z));
        for q in &spec.queries {
            if let Query::Attack(a) = q {
                let holds = is_attack(&rep, &a.goal, proto.mode)?.holds;
                text += &format!("attack {}: {}\n", a.name, if holds { "realized" } else { "not realized" });
                attacks.insert(a.name.clone(), holds);
            }
        }
    } else if let Some(f) = &rep.failure {
        text += &format!("failure: {f}\n");
    }
    let result = ValidateResult {
        valid: rep.valid,
        failure: rep.failure.clone(),
        run: (&run).into(),
        steps: ValidateResult::steps_of(&rep),
        zap,
        attacks,
    };
    let status = if rep.valid { Status::Valid } else { Status::Invalid };
    Ok((Report::new("validate-run", Some(file.display().to_string()), status, Payload::ValidateRun(result)), text))
}

fn check(file: &PathBuf) -> Outcome {
    let spec = load(file)?;
    let mut queries = Vec::new();
    let proto = if spec.roles.is_empty() { None } else { Some(spec.protocol()) };
    for q in &spec.queries {
        let (kind, problem) = match q {
            Query::Derive(d) => ("derive", WitnessQuery::new(&d.context(), &d.goal, spec.mode).err().map(|e| e.to_string())),
            Query::Attack(a) => (
                "attack",
                match &proto {
                    Some(Ok(p)) => crate::protocol::goal_instance(&a.goal).check_mode(p.mode).err().map(|e| e.to_string()),
                    Some(Err(e)) => Some(e.to_string()),
                    None => Some("no roles declared".to_string()),
                },
            ),
        };
        queries.push(QueryView { name: q.name().to_string(), kind, ok: problem.is_none(), problem });
    }
    let result = CheckResult {
        mode: spec.mode,
        names: spec.names.iter().map(|n| n.id().to_string()).collect(),
        agents: spec.agents.iter().map(|n| n.id().to_string()).collect(),
        intruder: spec.intruder.as_ref().map(|n| n.id().to_string()),
        roles: spec
            .roles
            .iter()
            .map(|r| RoleView { name: r.name.clone(), actor: r.actor.id().to_string(), steps: r.steps.len() })
            .collect(),
        queries,
    };
    let mut text =
        format!("mode {:?}, {} names, {} agents, {} roles\n", spec.mode, result.names.len(), result.agents.len(), result.roles.len());
    for q in &result.queries {
        match &q.problem {
            None => text += &format!("  {} {}: ok\n", q.kind, q.name),
            Some(p) => text += &format!("  {} {}: {p}\n", q.kind, q.name),
        }
    }
    let status = if result.queries.iter().all(|q| q.ok) { Status::Ok } else { Status::Fail };
    Ok((Report::new("check", Some(file.display().to_string()), status, Payload::Check(result)), text))
}

fn fuzz_cmd(seed: u64, count: usize, threads: usize) -> Outcome {
    let cfg = OracleConfig::with_seed(seed, count);
    cfg.validate()?;
    let suites = fuzz::run_all(&cfg, count, threads);
    let mut text = String::new();
    for s in &suites {
        let counters: Vec<String> = s.counters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        text += &format!(
            "{:<10} {:>5} instances, {:>5} agree, {:>4} inconclusive, {} disagree  [{}]\n",
            s.suite,
            s.instances,
            s.agreements,
            s.inconclusive,
            s.disagreements.len(),
            counters.join(" ")
        );
        for d in &s.disagreements {
            text += &format!("  {d}\n");
        }
    }
    let status = if suites.iter().all(|s| s.passed()) { Status::Pass } else { Status::Fail };
    Ok((Report::new("fuzz", None, status, Payload::Fuzz(FuzzResult { seed, count, suites })), text))
}
