//! Import of JSON-serialized proofs, resolving terms against a spec file.

use std::sync::Arc;

use serde_json::Value;

use crate::dy::DyProof;
use crate::eq::{dy_rule_from_label, EqProof, EqRule};
use crate::error::{Error, Result};
use crate::term::Variable;

use super::SpecFile;

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidProof(msg.into())
}

fn field<'a>(v: &'a Value, k: &str) -> Result<&'a Value> {
    v.get(k).ok_or_else(|| bad(format!("missing field `{k}`")))
}

fn str_field<'a>(v: &'a Value, k: &str) -> Result<&'a str> {
    field(v, k)?.as_str().ok_or_else(|| bad(format!("field `{k}` is not a string")))
}

fn list<'a>(v: &'a Value, k: &str) -> Result<&'a [Value]> {
    match v.get(k) {
        None => Ok(&[]),
        Some(Value::Array(xs)) => Ok(xs),
        Some(_) => Err(bad(format!("field `{k}` is not an array"))),
    }
}

pub fn dy_proof_from_json(v: &Value, spec: &SpecFile, vars: &[Variable]) -> Result<Arc<DyProof>> {
    let label = str_field(v, "rule")?;
    let rule = dy_rule_from_label(label).ok_or_else(|| bad(format!("unknown dy rule `{label}`")))?;
    let conclusion = spec.parse_term(str_field(v, "conclusion")?, vars)?;
    let premises = list(v, "premises")?.iter().map(|p| dy_proof_from_json(p, spec, vars)).collect::<Result<_>>()?;
    Ok(DyProof::node(rule, premises, conclusion))
}

/// Inverse of the `Serialize` impl of [`EqProof`]. Structural well-formedness
/// is left to `EqProof::check`.
pub fn eq_proof_from_json(v: &Value, spec: &SpecFile, vars: &[Variable]) -> Result<Arc<EqProof>> {
    let label = str_field(v, "rule")?;
    let rule = EqRule::from_label(label).ok_or_else(|| bad(format!("unknown eq rule `{label}`")))?;
    let conclusion = spec.parse_assertion(str_field(v, "conclusion")?, vars)?;
    let premises = list(v, "premises")?.iter().map(|p| eq_proof_from_json(p, spec, vars)).collect::<Result<_>>()?;
    let side = list(v, "side")?.iter().map(|p| dy_proof_from_json(p, spec, vars)).collect::<Result<_>>()?;
    Ok(EqProof::node(rule, conclusion, premises, side))
}
