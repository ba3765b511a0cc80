//! Proof normalization by the rewrite rules R1–R11.

use std::sync::Arc;

use serde::Serialize;

use super::{is_reflexive, EqContext, EqProof, EqRule, Measure};
use crate::assertion::Assertion;
use crate::dy::normalize_dy;
use crate::error::{Error, Result};

pub const DEFAULT_STEP_LIMIT: usize = 1_000_000;

/// One rewrite with the measure before and after.
#[derive(Clone, Debug, Serialize)]
pub struct RewriteStep {
    pub rule: &'static str,
    pub before: Measure,
    pub after: Measure,
}

impl RewriteStep {
    /// R2–R4 are exempt from the descent requirement.
    pub fn is_sym_phase(&self) -> bool {
        matches!(self.rule, "R2" | "R3" | "R4")
    }

    pub fn descends(&self) -> bool {
        self.after < self.before
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalizeReport {
    pub proof: Arc<EqProof>,
    pub steps: Vec<RewriteStep>,
}

/// Normalize a valid proof. R2–R4 run first to a fixpoint, then the
/// remaining rules fire one innermost redex at a time.
pub fn normalize(p: &Arc<EqProof>, ctx: &EqContext, limit: usize) -> Result<NormalizeReport> {
    let mut steps = Vec::new();
    let mut cur = normalize_side(p);
    cur = push_sym(&cur, &mut steps);
    let mut n = 0;
    loop {
        let before = cur.measure();
        let Some((next, rule)) = step(&cur, ctx) else { break };
        n += 1;
        if n > limit {
            return Err(Error::StepLimit(limit));
        }
        steps.push(RewriteStep { rule, before, after: next.measure() });
        cur = next;
    }
    Ok(NormalizeReport { proof: cur, steps })
}

fn rebuild(p: &EqProof, premises: Vec<Arc<EqProof>>) -> Arc<EqProof> {
    EqProof::node(p.rule, p.conclusion.clone(), premises, p.side.clone())
}

fn normalize_side(p: &Arc<EqProof>) -> Arc<EqProof> {
    let premises = p.premises.iter().map(normalize_side).collect();
    let side = p.side.iter().map(normalize_dy).collect();
    EqProof::node(p.rule, p.conclusion.clone(), premises, side)
}

fn push_sym(p: &Arc<EqProof>, log: &mut Vec<RewriteStep>) -> Arc<EqProof> {
    let premises: Vec<Arc<EqProof>> = p.premises.iter().map(|q| push_sym(q, log)).collect();
    let p = rebuild(p, premises);
    if p.rule != EqRule::Sym {
        return p;
    }
    let inner = p.premises[0].clone();
    let before = p.measure();
    let (out, rule) = match inner.rule {
        EqRule::Eq => (inner.clone(), "R2"),
        EqRule::Sym => (inner.premises[0].clone(), "R3"),
        EqRule::Trans => {
            let ps = inner.premises.iter().rev().map(|q| push_sym(&EqProof::sym(q.clone()), log)).collect();
            (EqProof::trans(ps), "R4")
        }
        EqRule::Cons => {
            let (t, _) = match &inner.conclusion {
                Assertion::Eq(t, u) => (t.clone(), u.clone()),
                _ => unreachable!(),
            };
            let a = push_sym(&EqProof::sym(inner.premises[0].clone()), log);
            let b = push_sym(&EqProof::sym(inner.premises[1].clone()), log);
            (EqProof::cons(&t, a, b), "R4")
        }
        EqRule::Proj(j) => {
            let q = push_sym(&EqProof::sym(inner.premises[0].clone()), log);
            let mut side = inner.side.clone();
            side.swap(0, 2);
            side.swap(1, 3);
            let (a, b) = match &inner.conclusion {
                Assertion::Eq(a, b) => (a.clone(), b.clone()),
                _ => unreachable!(),
            };
            (EqProof::node(EqRule::Proj(j), Assertion::eq(b, a), vec![q], side), "R4")
        }
        _ => return p,
    };
    log.push(RewriteStep { rule, before, after: out.measure() });
    out
}

/// One innermost rewrite, if any applies.
fn step(p: &Arc<EqProof>, ctx: &EqContext) -> Option<(Arc<EqProof>, &'static str)> {
    for (i, q) in p.premises.iter().enumerate() {
        if let Some((q2, rule)) = step(q, ctx) {
            let mut ps = p.premises.clone();
            ps[i] = q2;
            return Some((rebuild(p, ps), rule));
        }
    }
    rewrite_here(p, ctx)
}

fn rewrite_here(p: &Arc<EqProof>, ctx: &EqContext) -> Option<(Arc<EqProof>, &'static str)> {
    match p.rule {
        EqRule::Eq => {
            let d = &p.side[0];
            if d.rule.is_constructor() {
                let a = EqProof::eq(d.premises[0].clone());
                let b = EqProof::eq(d.premises[1].clone());
                return Some((EqProof::cons(&d.conclusion, a, b), "R1"));
            }
            None
        }
        EqRule::Trans => {
            let ps = &p.premises;
            if ps.len() == 1 {
                return Some((ps[0].clone(), "R6"));
            }
            if let Some(i) = ps.iter().position(|q| is_reflexive(&q.conclusion)) {
                let mut rest = ps.clone();
                rest.remove(i);
                return Some((EqProof::trans(rest), "R5"));
            }
            if let Some(i) = ps.iter().position(|q| q.rule == EqRule::Trans) {
                let mut out = ps[..i].to_vec();
                out.extend(ps[i].premises.iter().cloned());
                out.extend(ps[i + 1..].iter().cloned());
                return Some((EqProof::trans(out), "R6"));
            }
            if let Some(i) = ps.windows(2).position(|w| w[0].rule == EqRule::Cons && w[1].rule == EqRule::Cons) {
                let (a, b) = (&ps[i], &ps[i + 1]);
                let shape = match &a.conclusion {
                    Assertion::Eq(t, _) => t.clone(),
                    _ => unreachable!(),
                };
                let c0 = EqProof::trans(vec![a.premises[0].clone(), b.premises[0].clone()]);
                let c1 = EqProof::trans(vec![a.premises[1].clone(), b.premises[1].clone()]);
                let mut out = ps[..i].to_vec();
                out.push(EqProof::cons(&shape, c0, c1));
                out.extend(ps[i + 2..].iter().cloned());
                return Some((EqProof::trans(out), "R7"));
            }
            None
        }
        EqRule::Proj(j) => {
            let inner = &p.premises[0];
            if inner.rule == EqRule::Cons {
                return Some((inner.premises[j as usize].clone(), "R8"));
            }
            if inner.rule == EqRule::Trans {
                let ps = &inner.premises;
                let i = ps.iter().position(|q| q.rule == EqRule::Cons)?;
                let mut parts = Vec::new();
                if i > 0 {
                    parts.push(EqProof::proj(j, EqProof::trans(ps[..i].to_vec()), ctx.analysis())?);
                }
                parts.push(ps[i].premises[j as usize].clone());
                if i + 1 < ps.len() {
                    parts.push(EqProof::proj(j, EqProof::trans(ps[i + 1..].to_vec()), ctx.analysis())?);
                }
                return Some((EqProof::trans(parts), "R9"));
            }
            None
        }
        EqRule::Int => {
            if let Some(i) = p.premises.iter().position(|q| q.rule == EqRule::Int) {
                let mut out = p.premises[..i].to_vec();
                out.extend(p.premises[i].premises.iter().cloned());
                out.extend(p.premises[i + 1..].iter().cloned());
                return Some((rebuild(p, out), "R10"));
            }
            let Assertion::Member(_, l) = &p.conclusion else { return None };
            for q in &p.premises {
                if q.rule != EqRule::Wk {
                    continue;
                }
                if let Assertion::Eq(_, n) = &q.premises[0].conclusion {
                    if n.as_name().is_some_and(|n| l.contains(n)) {
                        let w = EqProof::node(EqRule::Wk, p.conclusion.clone(), vec![q.premises[0].clone()], vec![]);
                        return Some((w, "R11"));
                    }
                }
            }
            None
        }
        _ => None,
    }
}
