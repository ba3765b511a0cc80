//! Consistency of atom sets: a ground substitution satisfying every
//! equality and membership.

use std::collections::BTreeMap;

use crate::assertion::Assertion;
use crate::error::{Error, Result};
use crate::term::{unify, Name, Subst, Term, Variable};

/// Prefix for names invented to ground unconstrained variables.
pub const FRESH_PREFIX: &str = "_c";

/// Decide consistency of `e`, returning a witness `λ` over `vars(e)`.
/// Predicates and `says` atoms carry no constraint and are skipped.
pub fn consistent(e: &[Assertion]) -> Result<Option<Subst>> {
    let mut eqs = Vec::new();
    let mut members = Vec::new();
    let mut vars = std::collections::BTreeSet::new();
    for a in e {
        match a {
            Assertion::Eq(t, u) => {
                t.collect_vars(&mut vars);
                u.collect_vars(&mut vars);
                eqs.push((t.clone(), u.clone()));
            }
            Assertion::Member(t, l) => {
                t.collect_vars(&mut vars);
                members.push((t.clone(), l.clone()));
            }
            Assertion::Pred(..) | Assertion::Says(..) => {}
            other => return Err(Error::MalformedAtom(other.to_string())),
        }
    }
    let Some(mgu) = unify(&eqs) else { return Ok(None) };

    let mut domains: BTreeMap<Variable, Vec<Name>> = BTreeMap::new();
    for (t, l) in &members {
        let t = mgu.apply(t);
        if let Some(n) = t.as_name() {
            if !l.contains(n) {
                return Ok(None);
            }
        } else if let Some(v) = t.as_var() {
            let d = domains.entry(v.clone()).or_insert_with(|| l.clone());
            d.retain(|n| l.contains(n));
            if d.is_empty() {
                return Ok(None);
            }
        } else {
            return Ok(None);
        }
    }

    let mut ground = Subst::new();
    let mut residual = std::collections::BTreeSet::new();
    for v in &vars {
        mgu.apply(&Term::var(v.clone())).collect_vars(&mut residual);
    }
    for (i, v) in residual.iter().enumerate() {
        let t = match domains.get(v) {
            Some(d) => Term::name(d[0].clone()),
            None => Term::name(Name::plain(&format!("{FRESH_PREFIX}{i}"))),
        };
        ground.insert(v.clone(), t);
    }
    let lambda: Subst = vars.iter().map(|v| (v.clone(), ground.apply(&mgu.apply(&Term::var(v.clone()))))).collect();
    debug_assert!(satisfies(&lambda, e));
    Ok(Some(lambda))
}

/// Does `λ` satisfy every equality and membership of `e`?
pub fn satisfies(lambda: &Subst, e: &[Assertion]) -> bool {
    e.iter().all(|a| match a {
        Assertion::Eq(t, u) => lambda.apply(t) == lambda.apply(u),
        Assertion::Member(t, l) => lambda.apply(t).as_name().is_some_and(|n| l.contains(n)),
        _ => true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::Variable;

    fn n(s: &str) -> Term {
        Term::name(Name::plain(s))
    }

    #[test]
    fn absurd_equality() {
        let k = Term::name(Name::symmetric_key("k"));
        let e = vec![Assertion::eq(Term::pair(n("m"), n("n")), Term::enc(n("p"), k))];
        assert_eq!(consistent(&e).unwrap(), None);
    }

    #[test]
    fn membership_intersection() {
        let x = Term::var(Variable::inst("x"));
        let y = Term::var(Variable::inst("y"));
        let l = |xs: &[&str]| xs.iter().map(|s| Name::plain(s)).collect::<Vec<_>>();
        let e = vec![
            Assertion::eq(x.clone(), y.clone()),
            Assertion::member(x.clone(), l(&["0", "1"])),
            Assertion::member(y.clone(), l(&["1", "2"])),
        ];
        let w = consistent(&e).unwrap().unwrap();
        assert_eq!(w.apply(&x), n("1"));
        assert_eq!(w.apply(&y), n("1"));
    }

    #[test]
    fn non_atomic_is_rejected() {
        let e = vec![Assertion::and(Assertion::msg(n("a")), Assertion::msg(n("b")))];
        assert!(matches!(consistent(&e), Err(Error::MalformedAtom(_))));
    }
}
