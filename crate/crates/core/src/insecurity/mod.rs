//! Bounded insecurity: zapping, small substitutions, typed proofs and the
//! K-bounded attack search.

mod search;

pub use search::{find_attack, AttackOptions, AttackOutcome, AttackReport};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::assertion::{atoms, Assertion, KnowledgePair};
use crate::derive::assert_derives_with;
use crate::dy::{Analysis, DyProof};
use crate::eq::{eq_derives, normalize, EqContext, EqProof, DEFAULT_STEP_LIMIT};
use crate::error::{Error, Result};
use crate::protocol::{validate_run, KnowledgeFunction, Run, RunReport, ValidateOptions};
use crate::term::{Name, Subst, Term, TermNode, Variable};

/// `𝒞`, `𝒟 = 𝒞 \ 𝒱` and the spare name.
#[derive(Clone, Debug, Serialize)]
pub struct TypeUniverse {
    pub c: BTreeSet<Term>,
    pub d: BTreeSet<Term>,
    pub spare: Name,
}

impl TypeUniverse {
    pub fn new(c: BTreeSet<Term>) -> TypeUniverse {
        let d = c.iter().filter(|t| t.as_var().is_none()).cloned().collect();
        TypeUniverse { c, d, spare: Name::spare() }
    }

    /// Subterms of every `ker(k_i(I))` and `ker(k_i(u_i))` along a run,
    /// before substitution.
    pub fn of_run(report: &RunReport) -> TypeUniverse {
        let mut c = BTreeSet::new();
        let mut add = |kp: &KnowledgePair| c.extend(kp.kernel_unchecked().subterms());
        for k in &report.trace {
            add(&k.get(&report.intruder));
        }
        for (i, s) in report.steps.iter().enumerate() {
            add(&report.trace[i + 1].get(&s.event.actor));
        }
        TypeUniverse::new(c)
    }
}

/// `ω`, its minimal variables and the universe they are judged against.
#[derive(Clone, Debug, Serialize)]
pub struct ZapContext {
    pub omega: Subst,
    pub minimal_vars: BTreeSet<Variable>,
    pub universe: TypeUniverse,
    /// `{ω(x) | x minimal}`.
    #[serde(skip)]
    zapped_images: BTreeSet<Term>,
}

impl ZapContext {
    pub fn new(omega: Subst, universe: TypeUniverse) -> ZapContext {
        let d_images: BTreeSet<Term> = universe.d.iter().map(|t| omega.apply(t)).collect();
        let minimal_vars: BTreeSet<Variable> = omega.iter().filter(|(_, t)| !d_images.contains(t)).map(|(v, _)| v.clone()).collect();
        let zapped_images = minimal_vars.iter().filter_map(|v| omega.get(v).cloned()).collect();
        ZapContext { omega, minimal_vars, universe, zapped_images }
    }

    pub fn of_run(report: &RunReport) -> ZapContext {
        ZapContext::new(report.omega(), TypeUniverse::of_run(report))
    }

    pub fn spare(&self) -> Term {
        Term::name(self.universe.spare.clone())
    }

    pub fn is_minimal(&self, x: &Variable) -> bool {
        self.minimal_vars.contains(x)
    }

    /// `ω(t) = ω(x)` for some minimal `x`.
    pub fn is_zappable(&self, t: &Term) -> bool {
        self.zapped_images.contains(&self.omega.apply(t))
    }

    /// `t ∈ σ(𝒟) ∪ ω(𝒞) ∪ 𝒱_q`.
    pub fn typed_term(&self, sigma: &Subst, t: &Term) -> bool {
        matches!(t.as_var(), Some(v) if v.is_quant())
            || self.universe.d.iter().any(|d| sigma.apply(d) == *t)
            || self.universe.c.iter().any(|c| self.omega.apply(c) == *t)
    }
}

/// The zap of a term.
pub fn zap(t: &Term, ctx: &ZapContext) -> Term {
    match t.node() {
        TermNode::Var(_) => t.clone(),
        TermNode::Name(_) => {
            if ctx.is_zappable(t) {
                ctx.spare()
            } else {
                t.clone()
            }
        }
        TermNode::Pair(..) | TermNode::Enc(..) => {
            if ctx.is_zappable(t) {
                ctx.spare()
            } else {
                let (a, b) = t.children().expect("compound");
                t.with_children(zap(a, ctx), zap(b, ctx))
            }
        }
    }
}

/// `λ*(x) = zap(λ(x))`.
pub fn small_subst(lambda: &Subst, ctx: &ZapContext) -> Subst {
    lambda.iter().map(|(v, t)| (v.clone(), zap(t, ctx))).collect()
}

/// Every subproof ends in a constructor or concludes a term of `σ(𝒟) ∪ 𝒱_q`.
pub fn typed_check_dy(p: &DyProof, sigma_d: &BTreeSet<Term>) -> bool {
    let mut ok = true;
    p.walk(&mut |q| {
        let c = &q.conclusion;
        if !(q.rule.is_constructor() || sigma_d.contains(c) || matches!(c.as_var(), Some(v) if v.is_quant())) {
            ok = false;
        }
    });
    ok
}

/// Every equality subproof contains `cons`, is reflexive, or relates two typed terms.
pub fn typed_check_eq(p: &EqProof, sigma: &Subst, ctx: &ZapContext) -> bool {
    let mut ok = true;
    p.walk(&mut |q| {
        if let Assertion::Eq(t, u) = &q.conclusion {
            let fine = t == u || q.contains_rule(crate::eq::EqRule::Cons) || (ctx.typed_term(sigma, t) && ctx.typed_term(sigma, u));
            if !fine {
                ok = false;
            }
        }
    });
    ok
}

#[derive(Clone, Debug, Serialize)]
pub struct StepZapCheck {
    pub index: usize,
    pub mu_small: Subst,
    /// `σ*(T_{i-1}) ⊢dy σ*μ*_i(x)` for each bound variable.
    pub dy_ok: bool,
    /// `σ*(T_{i-1}; E_{i-1}) ⊢eq σ*μ*_i(φ)` for each atom of `β_i`.
    pub eq_ok: bool,
    /// `σ*μ*_i(t) = zap(σμ_i(t))` for all `t ∈ 𝒞`.
    pub commutes: bool,
    /// Normal dy proofs of `σ(β_i)`'s public terms are typed.
    pub typed_dy: bool,
    /// Normal eq proofs of the instantiated atoms are typed.
    pub typed_eq: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ZapReport {
    /// `m` is absent from every substitution range, so the construction applies.
    pub precondition: bool,
    pub preserved: bool,
    pub universe_size: usize,
    pub minimal_vars: Vec<Variable>,
    pub sigma_small: Subst,
    pub omega_small: Subst,
    pub steps: Vec<StepZapCheck>,
    /// Every image of `σ*`, `ω*`, `μ*_i` has dagsize at most `|𝒟|`.
    pub bounded: bool,
    pub sigma_size: usize,
    pub sigma_small_size: usize,
    /// The run re-validates with `σ*`.
    pub revalidates: bool,
    pub failures: Vec<String>,
}

fn spare_in_ranges(report: &RunReport) -> bool {
    let m = Term::name(Name::spare());
    let mut substs = vec![report.sigma.clone()];
    substs.extend(report.mus());
    substs.extend(report.thetas());
    substs.iter().any(|s| s.iter().any(|(_, t)| t.contains(&m)))
        || report.steps.iter().any(|s| s.event.recv.subterms().contains(&m) || s.event.send.subterms().contains(&m))
}

/// Zap a validated run and re-check every intruder derivability under the
/// small substitutions.
pub fn verify_zap_preservation(
    run: &Run,
    report: &RunReport,
    initial: &KnowledgeFunction,
    mode: crate::assertion::Mode,
) -> Result<ZapReport> {
    if !report.valid {
        return Err(Error::UnvalidatedRun);
    }
    let ctx = ZapContext::of_run(report);
    let sigma = &report.sigma;
    let sigma_small = small_subst(sigma, &ctx);
    let omega_small = small_subst(&ctx.omega, &ctx);
    let bound = ctx.universe.d.len();
    let mut failures = Vec::new();
    let precondition = !spare_in_ranges(report) && report.trace[0].get(&report.intruder).terms.contains(&ctx.spare());
    let mut bounded = true;
    let mut check_bound = |name: &str, s: &Subst, failures: &mut Vec<String>| {
        for (v, t) in s.iter() {
            if t.dagsize() > bound {
                bounded = false;
                failures.push(format!("{name}*({v}) = {t} exceeds |D| = {bound}"));
            }
        }
    };
    check_bound("sigma", &sigma_small, &mut failures);
    check_bound("omega", &omega_small, &mut failures);

    let sigma_d: BTreeSet<Term> = ctx.universe.d.iter().map(|t| sigma.apply(t)).collect();
    let mut steps = Vec::new();
    for (i, st) in report.steps.iter().enumerate() {
        let mu = &st.intruder.witness;
        let mu_small = small_subst(mu, &ctx);
        check_bound(&format!("mu{}", i + 1), &mu_small, &mut failures);
        let ki = report.trace[i].get(&report.intruder);
        let ker = ki.kernel_unchecked();
        let t_big = ker.apply(sigma);
        let t_small = ker.apply(&sigma_small);
        let an_small = Analysis::new(&t_small.terms);
        let an_big = Analysis::new(&t_big.terms);

        let commutes = ctx.universe.c.iter().all(|t| sigma_small.apply(&mu_small.apply(t)) == zap(&sigma.apply(&mu.apply(t)), &ctx));
        if !commutes {
            failures.push(format!("step {i}: small substitutions do not commute with zap"));
        }
        let mut dy_ok = true;
        for (x, _) in mu.iter() {
            let target = sigma_small.apply(&mu_small.apply(&Term::var(x.clone())));
            if !an_small.derives(&target) {
                dy_ok = false;
                failures.push(format!("step {i}: {target} not derivable after zapping"));
            }
        }
        let mut typed_dy = true;
        for p in st.event.recv.apply(sigma).pubs() {
            if let Some(d) = an_big.synthesize(&p) {
                if !typed_check_dy(&d, &sigma_d) {
                    typed_dy = false;
                    failures.push(format!("step {i}: untyped normal dy proof of {p}"));
                }
            }
        }
        let mut eq_ok = true;
        let mut typed_eq = true;
        let goal_atoms: Vec<Assertion> = atoms(&st.event.recv).into_iter().filter(|a| matches!(a, Assertion::Eq(..))).collect();
        if !goal_atoms.is_empty() {
            let ectx_small = EqContext::new(&t_small, mode).map(Arc::new);
            let ectx_big = EqContext::new(&t_big, mode).map(Arc::new);
            for a in &goal_atoms {
                if let Ok(c) = &ectx_big {
                    let inst = a.apply(mu).apply(sigma);
                    if let Ok(Some(p)) = eq_derives(c, &inst) {
                        let p = normalize(&p, c, DEFAULT_STEP_LIMIT).map(|r| r.proof).unwrap_or(p);
                        if !typed_check_eq(&p, sigma, &ctx) {
                            typed_eq = false;
                            failures.push(format!("step {i}: untyped normal eq proof of {inst}"));
                        }
                    }
                }
                let small = a.apply(&mu_small).apply(&sigma_small);
                let holds = match &ectx_small {
                    Ok(c) => matches!(eq_derives(c, &small), Ok(Some(_))),
                    Err(_) => false,
                };
                if !holds {
                    eq_ok = false;
                    failures.push(format!("step {i}: {small} not derivable after zapping"));
                }
            }
        }
        steps.push(StepZapCheck { index: i, mu_small, dy_ok, eq_ok, commutes, typed_dy, typed_eq });
    }

    let small_run = Run { sessions: run.sessions.clone(), interleaving: run.interleaving.clone(), sigma: sigma_small.clone() };
    let revalidates = match validate_run(&small_run, initial, &report.intruder, mode, ValidateOptions::default()) {
        Ok(r) => r.valid,
        Err(e) => {
            failures.push(format!("zapped run: {e}"));
            false
        }
    };
    if !revalidates {
        failures.push("zapped run does not validate".into());
    }
    let preserved = steps.iter().all(|s| s.dy_ok && s.eq_ok && s.commutes) && revalidates && bounded;
    Ok(ZapReport {
        precondition,
        preserved,
        universe_size: bound,
        minimal_vars: ctx.minimal_vars.iter().cloned().collect(),
        sigma_size: sigma.total_dagsize(),
        sigma_small_size: sigma_small.total_dagsize(),
        sigma_small,
        omega_small,
        steps,
        bounded,
        revalidates,
        failures,
    })
}

/// Check a secrecy goal on a run after replacing σ by σ*.
pub fn goal_after_zap(report: &RunReport, sigma_small: &Subst, gamma: &Assertion, mode: crate::assertion::Mode) -> Result<bool> {
    let ki = report.final_knowledge().get(&report.intruder).apply(sigma_small);
    let g = crate::protocol::goal_instance(gamma).apply(sigma_small);
    Ok(assert_derives_with(&ki, &g, mode, Default::default())?.holds)
}

/// Map each variable to the step whose receive first mentions it.
pub fn first_receive(report: &RunReport) -> BTreeMap<Variable, usize> {
    let mut out = BTreeMap::new();
    for (i, s) in report.steps.iter().enumerate() {
        for v in s.event.recv.fv() {
            out.entry(v).or_insert(i);
        }
    }
    out
}
