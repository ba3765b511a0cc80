//! Parse-compatible rendering of spec files and runs.

use std::fmt::Write;

use crate::assertion::{Assertion, Mode};
use crate::protocol::{Run, StepKind};
use crate::term::Name;

use super::{Query, SpecFile};

/// Like `Display`, but `t ~ t` is shortened to `t`.
pub fn render_assertion(a: &Assertion) -> String {
    match a {
        Assertion::Eq(t, u) if t == u => t.to_string(),
        Assertion::And(x, y) => format!("and({}, {})", render_assertion(x), render_assertion(y)),
        Assertion::Says(s, b) => format!("says({s}, {})", render_assertion(b)),
        Assertion::Exists(..) => {
            let mut vs = Vec::new();
            let mut cur = a;
            while let Assertion::Exists(v, b) = cur {
                vs.push(v.to_string());
                cur = b;
            }
            format!("exists {}. {}", vs.join(" "), render_assertion(cur))
        }
        other => other.to_string(),
    }
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn ids<'a>(ns: impl IntoIterator<Item = &'a Name>) -> String {
    join(ns.into_iter().map(|n| n.id()))
}

pub fn print_spec(spec: &SpecFile) -> String {
    let mut o = String::new();
    if spec.mode == Mode::Extended {
        o.push_str("mode extended;\n");
    }
    if !spec.names.is_empty() {
        let _ = writeln!(o, "names {};", ids(&spec.names));
    }
    if !spec.keys.is_empty() {
        let ks: Vec<String> = spec
            .keys
            .iter()
            .map(|k| match k.inverse() {
                Some(inv) if inv != *k => format!("{}/{}", k.id(), inv.id()),
                _ => k.id().to_string(),
            })
            .collect();
        let _ = writeln!(o, "keys {};", ks.join(", "));
    }
    if !spec.agents.is_empty() {
        let _ = writeln!(o, "agents {};", ids(&spec.agents));
    }
    if let Some(i) = &spec.intruder {
        let _ = writeln!(o, "intruder {};", i.id());
    }
    if !spec.vars.is_empty() {
        let _ = writeln!(o, "vars {};", join(&spec.vars));
    }
    if !spec.public.is_empty() {
        let _ = writeln!(o, "public {};", join(&spec.public));
    }
    for (a, ts) in &spec.knows {
        if !ts.is_empty() {
            let _ = writeln!(o, "knows {}: {};", a.id(), join(ts));
        }
    }
    for (a, fs) in &spec.facts {
        for f in fs {
            let _ = writeln!(o, "fact {}: {};", a.id(), render_assertion(f));
        }
    }
    for r in &spec.roles {
        let _ = writeln!(o, "\nrole {} actor {} {{", r.name, r.actor.id());
        for (v, d) in &r.domains {
            let _ = writeln!(o, "  domain {v}: {};", ids(d));
        }
        for st in &r.steps {
            let anon = if st.anon { "anon " } else { "" };
            match st.kind {
                StepKind::Exchange => {
                    let _ = writeln!(o, "  recv {};", render_assertion(&st.recv));
                    let _ = writeln!(o, "  send {anon}{};", render_assertion(&st.send));
                }
                StepKind::Assert => {
                    let _ = writeln!(o, "  assert {anon}{};", render_assertion(&st.send));
                }
            }
            for a in &st.retract {
                let _ = writeln!(o, "  retract {};", render_assertion(a));
            }
        }
        o.push_str("}\n");
    }
    for q in &spec.queries {
        match q {
            Query::Derive(d) => {
                let _ = writeln!(o, "\nderive {} {{", d.name);
                if !d.vars.is_empty() {
                    let _ = writeln!(o, "  vars {};", join(&d.vars));
                }
                if !d.know.is_empty() {
                    let _ = writeln!(o, "  know {};", join(&d.know));
                }
                for a in &d.assume {
                    let _ = writeln!(o, "  assume {};", render_assertion(a));
                }
                let _ = writeln!(o, "  goal {};", render_assertion(&d.goal));
                o.push_str("}\n");
            }
            Query::Attack(a) => {
                let _ = write!(o, "\nattack {}: {}", a.name, render_assertion(&a.goal));
                if let Some(k) = a.sessions {
                    let _ = write!(o, " sessions {k}");
                }
                o.push_str(";\n");
            }
        }
    }
    o
}

/// Human-readable rendering of a run: sessions, σ, then the message sequence.
pub fn print_run(run: &Run) -> String {
    let mut o = String::new();
    for s in &run.sessions {
        let b: Vec<String> = s.binding.iter().map(|(v, n)| format!("{v} = {}", n.id())).collect();
        let _ = write!(o, "session {}: {} actor {}", s.id, s.role, s.actor.id());
        if !b.is_empty() {
            let _ = write!(o, " [{}]", b.join(", "));
        }
        let _ = writeln!(o, " ({} steps)", s.steps.len());
    }
    let _ = writeln!(o, "sigma = {}", run.sigma);
    for (i, ev) in run.events().iter().enumerate() {
        let sid = run.sessions[ev.session].id;
        match ev.kind {
            StepKind::Exchange => {
                let _ = writeln!(o, "{:>3}. [{sid}] {} recv {}", i + 1, ev.actor.id(), render_assertion(&ev.recv.apply(&run.sigma)));
                let arrow = if ev.anon { "send anon" } else { "send" };
                let _ = writeln!(o, "     [{sid}] {} {arrow} {}", ev.actor.id(), render_assertion(&ev.send.apply(&run.sigma)));
            }
            StepKind::Assert => {
                let _ = writeln!(o, "{:>3}. [{sid}] {} assert {}", i + 1, ev.actor.id(), render_assertion(&ev.send.apply(&run.sigma)));
            }
        }
    }
    o
}
