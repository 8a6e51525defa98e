//! Extended Scenic DSL: domain model, strict parser, canonical serializer and
//! cross-field validation.
//!
//! Documents are a YAML subset (scalars, maps and sequences only). The
//! normative grammar lives in `docs/dsl-grammar.md`.

mod model;
mod parse;
mod serialize;
mod tree;
mod validate;

pub use model::*;
pub use parse::{parse_dsl, FieldKind, TokenResolver};
pub(crate) use parse::parse_with;
pub use serialize::serialize_dsl;
pub use validate::validate_spec;

/// Parses and validates in one step; the error carries every issue found.
pub fn parse_and_validate(source: &str) -> Result<ScenarioSpec, Vec<ValidationIssue>> {
    let spec = parse_dsl(source)?;
    let issues = validate_spec(&spec);
    if issues.is_empty() {
        Ok(spec)
    } else {
        Err(issues)
    }
}
