//! Offline rule monitor: quantitative traffic-code checks over traces.

pub mod registry;
mod rules;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::quantize6;
use crate::dsl::OracleEntry;
use crate::sim::{detect_collisions, CollisionEvent, RoadGeometry, Trace};
use registry::SUPPORTED;
use rules::View;

#[derive(Debug, Error, PartialEq)]
pub enum MonitorError {
    #[error("rule {0} is not in the registry")]
    UnknownRule(u32),
    #[error("trace was produced on geometry {trace:016x}, not {geometry:016x}")]
    GeometryMismatch { trace: u64, geometry: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: u32,
    pub actor_id: String,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_actor: Option<String>,
    pub evidence: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    RuleViolation,
    Collision,
    Both,
    Clean,
}

impl Outcome {
    pub fn classify(violations: bool, collisions: bool) -> Self {
        match (violations, collisions) {
            (true, true) => Outcome::Both,
            (true, false) => Outcome::RuleViolation,
            (false, true) => Outcome::Collision,
            (false, false) => Outcome::Clean,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::RuleViolation => "rule_violation",
            Outcome::Collision => "collision",
            Outcome::Both => "both",
            Outcome::Clean => "clean",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub scenario_id: String,
    pub instance_seed: u64,
    pub violations: Vec<Violation>,
    pub collisions: Vec<CollisionEvent>,
    pub outcome: Outcome,
    pub targeted_hit: bool,
}

impl ViolationReport {
    /// Distinct violated rule ids, ascending.
    pub fn distinct_rules(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.violations.iter().map(|v| v.rule_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn count(&self, rule_id: u32) -> usize {
        self.violations.iter().filter(|v| v.rule_id == rule_id).count()
    }

    /// Canonical JSON, sorted keys.
    pub fn to_canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }
}

/// True when every entry is matched by a violation of its rule by its actor.
pub fn targeted_hit(oracle: &[OracleEntry], violations: &[Violation]) -> bool {
    oracle.iter().all(|e| {
        violations.iter().any(|v| {
            v.rule_id == e.rule_id
                && e.violating_actor.as_deref().is_none_or(|a| a == v.actor_id)
        })
    })
}

fn check(trace: &Trace, geometry: &RoadGeometry) -> Result<(), MonitorError> {
    if trace.meta.geometry_ref != geometry.geometry_ref {
        return Err(MonitorError::GeometryMismatch {
            trace: trace.meta.geometry_ref,
            geometry: geometry.geometry_ref,
        });
    }
    Ok(())
}

fn evaluate_family(view: &View, rule_id: u32) -> Vec<Violation> {
    match rule_id {
        21453 => rules::red_light(view),
        22450 => rules::stop_sign(view),
        22349 => rules::maximum_speed(view),
        22350 => rules::basic_speed(view),
        21460 | 21461 => rules::centerline(view, rule_id),
        22107 => rules::unsafe_lane_change(view),
        22108 => rules::junction_lane_change(view),
        21804 => rules::enter_from_off_road(view),
        _ => rules::right_of_way(view)
            .into_iter()
            .filter(|v| v.rule_id == rule_id)
            .collect(),
    }
}

/// Violations of one rule, merged into maximal intervals.
pub fn evaluate_rule(
    rule_id: u32,
    trace: &Trace,
    geometry: &RoadGeometry,
) -> Result<Vec<Violation>, MonitorError> {
    if !registry::is_supported(rule_id) {
        return Err(MonitorError::UnknownRule(rule_id));
    }
    check(trace, geometry)?;
    Ok(evaluate_family(&View::new(trace, geometry), rule_id))
}

fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| {
        a.t_start
            .total_cmp(&b.t_start)
            .then(a.rule_id.cmp(&b.rule_id))
            .then(a.actor_id.cmp(&b.actor_id))
    });
}

/// Evaluates every registry rule and detects collisions.
pub fn monitor(
    trace: &Trace,
    oracle: &[OracleEntry],
    geometry: &RoadGeometry,
) -> Result<ViolationReport, MonitorError> {
    check(trace, geometry)?;
    let view = View::new(trace, geometry);
    let mut violations = Vec::new();
    let mut row = Vec::new();
    for rule_id in SUPPORTED {
        match rule_id {
            21800..=21803 => {
                if rule_id == 21800 {
                    row.extend(rules::right_of_way(&view));
                }
            }
            _ => violations.extend(evaluate_family(&view, rule_id)),
        }
    }
    violations.extend(row);
    for v in &mut violations {
        for x in v.evidence.values_mut() {
            *x = quantize6(*x);
        }
    }
    sort_violations(&mut violations);
    let collisions = detect_collisions(trace);
    Ok(ViolationReport {
        scenario_id: trace.meta.scenario_id.clone(),
        instance_seed: trace.meta.instance_seed,
        outcome: Outcome::classify(!violations.is_empty(), !collisions.is_empty()),
        targeted_hit: targeted_hit(oracle, &violations),
        violations,
        collisions,
    })
}

/// Header of the batch summary CSV.
pub fn summary_header() -> String {
    let mut cols = vec![
        "scenario_id".to_string(),
        "seed".into(),
        "outcome".into(),
        "targeted_hit".into(),
    ];
    cols.extend(SUPPORTED.iter().map(|r| format!("cvc_{r}")));
    cols.join(",")
}

pub fn summary_row(report: &ViolationReport) -> String {
    let mut cols = vec![
        csv_field(&report.scenario_id),
        report.instance_seed.to_string(),
        report.outcome.as_str().to_string(),
        report.targeted_hit.to_string(),
    ];
    cols.extend(SUPPORTED.iter().map(|&r| report.count(r).to_string()));
    cols.join(",")
}

/// Summary CSV with a header line and one row per report.
pub fn summary_csv(reports: &[ViolationReport]) -> String {
    let mut out = summary_header();
    out.push('\n');
    for r in reports {
        out.push_str(&summary_row(r));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_table() {
        assert_eq!(Outcome::classify(true, true), Outcome::Both);
        assert_eq!(Outcome::classify(false, false), Outcome::Clean);
        assert_eq!(Outcome::classify(false, true), Outcome::Collision);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }

    #[test]
    fn header_lists_every_rule() {
        assert_eq!(summary_header().split(',').count(), 4 + 13);
    }
}
