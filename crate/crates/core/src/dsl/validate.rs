//! Cross-field consistency checks.

use std::collections::{HashMap, HashSet};

use super::model::*;
use crate::monitor::registry;

fn check_speed(issues: &mut Vec<ValidationIssue>, path: String, v: Option<f64>) {
    if let Some(v) = v {
        if !(v.is_finite() && v > 0.0 && v <= MAX_SPEED_MPS) {
            issues.push(ValidationIssue::new(
                path,
                IssueKind::RangeViolation,
                format!("{v} outside (0, {MAX_SPEED_MPS}]"),
            ));
        }
    }
}

/// Checks every cross-field invariant of a structurally parsed spec.
///
/// Returns an empty list when the document is consistent. Issues are sorted by
/// path, so equal specs always give equal lists.
pub fn validate_spec(spec: &ScenarioSpec) -> Vec<ValidationIssue> {
    let mut issues = Vec::new();
    let mut push = |path: String, kind: IssueKind, msg: String| {
        issues.push(ValidationIssue::new(path, kind, msg));
    };

    if spec.scenario_id.trim().is_empty() {
        push("/scenario_id".into(), IssueKind::RangeViolation, "must not be empty".into());
    }

    let r = &spec.road_network;
    let ways_ok = match r.road_type {
        RoadType::Intersection => r.number_of_ways == 4,
        RoadType::TIntersection => r.number_of_ways == 3,
        RoadType::Straight | RoadType::Curve => matches!(r.number_of_ways, 1 | 2),
    };
    if !ways_ok {
        let expected = match r.road_type {
            RoadType::Intersection => "4",
            RoadType::TIntersection => "3",
            _ => "1 or 2",
        };
        push(
            "/road_network/number_of_ways".into(),
            IssueKind::Inconsistent,
            format!(
                "{} needs {expected} ways, found {}",
                r.road_type, r.number_of_ways
            ),
        );
    }
    if !(1..=MAX_LANES).contains(&r.number_of_lanes) {
        push(
            "/road_network/number_of_lanes".into(),
            IssueKind::RangeViolation,
            format!("{} outside [1, {MAX_LANES}]", r.number_of_lanes),
        );
    }
    let has_limit_sign = r.has_sign(TrafficSign::SpeedLimitSign);
    match (has_limit_sign, r.speed_limit_value) {
        (true, None) => push(
            "/road_network/speed_limit_value".into(),
            IssueKind::Inconsistent,
            "speed_limit_sign listed without a speed_limit_value".into(),
        ),
        (false, Some(_)) => push(
            "/road_network/speed_limit_value".into(),
            IssueKind::Inconsistent,
            "speed_limit_value given without a speed_limit_sign".into(),
        ),
        _ => {}
    }
    if r.has_sign(TrafficSign::NotMentioned) && r.traffic_signs.len() > 1 {
        push(
            "/road_network/traffic_signs".into(),
            IssueKind::Inconsistent,
            "not_mentioned cannot be combined with other signs".into(),
        );
    }
    let mut seen_signs = HashSet::new();
    for (i, s) in r.traffic_signs.iter().enumerate() {
        if !seen_signs.insert(*s) {
            push(
                format!("/road_network/traffic_signs/{i}"),
                IssueKind::Inconsistent,
                format!("`{s}` listed twice"),
            );
        }
    }
    check_speed(&mut issues, "/road_network/speed_limit_value".into(), r.speed_limit_value);

    // Actors.
    let a = &spec.actors;
    let mut issues_actors = Vec::new();
    if a.npcs.len() > MAX_NPCS {
        issues_actors.push(ValidationIssue::new(
            "/actors/npcs",
            IssueKind::RangeViolation,
            format!("{} NPCs, at most {MAX_NPCS} supported", a.npcs.len()),
        ));
    }
    if a.ego.position.is_some() {
        issues_actors.push(ValidationIssue::new(
            "/actors/ego/position",
            IssueKind::Inconsistent,
            "the ego is the reference frame and takes no position",
        ));
    }
    check_speed(&mut issues_actors, "/actors/ego/speed_mps".into(), a.ego.speed_mps);
    let mut ids: HashMap<&str, String> = HashMap::new();
    if a.ego.actor_id.trim().is_empty() {
        issues_actors.push(ValidationIssue::new(
            "/actors/ego/actor_id",
            IssueKind::RangeViolation,
            "must not be empty",
        ));
    }
    ids.insert(&a.ego.actor_id, "/actors/ego".into());
    for (i, npc) in a.npcs.iter().enumerate() {
        let base = format!("/actors/npcs/{i}");
        if npc.actor_id.trim().is_empty() {
            issues_actors.push(ValidationIssue::new(
                format!("{base}/actor_id"),
                IssueKind::RangeViolation,
                "must not be empty",
            ));
        }
        if let Some(first) = ids.get(npc.actor_id.as_str()) {
            issues_actors.push(ValidationIssue::new(
                format!("{base}/actor_id"),
                IssueKind::Inconsistent,
                format!("`{}` already used by {first}", npc.actor_id),
            ));
        } else {
            ids.insert(&npc.actor_id, base.clone());
        }
        check_speed(&mut issues_actors, format!("{base}/speed_mps"), npc.speed_mps);
        if npc.position.is_none() {
            issues_actors.push(ValidationIssue::new(
                format!("{base}/position"),
                IssueKind::MissingSection,
                "NPCs need a position",
            ));
        }
    }
    // Reference resolution and cycles.
    let refs: HashMap<&str, &str> = a
        .npcs
        .iter()
        .filter_map(|n| n.position.as_ref().map(|p| (n.actor_id.as_str(), p.reference.as_str())))
        .collect();
    for (i, npc) in a.npcs.iter().enumerate() {
        let Some(p) = &npc.position else { continue };
        let path = format!("/actors/npcs/{i}/position/reference");
        if !ids.contains_key(p.reference.as_str()) {
            issues_actors.push(ValidationIssue::new(
                path,
                IssueKind::Inconsistent,
                format!("`{}` does not name an actor", p.reference),
            ));
            continue;
        }
        let mut cur = npc.actor_id.as_str();
        let mut visited = HashSet::new();
        while let Some(next) = refs.get(cur) {
            if !visited.insert(cur) {
                issues_actors.push(ValidationIssue::new(
                    path.clone(),
                    IssueKind::Inconsistent,
                    format!("`{}` is part of a reference cycle", npc.actor_id),
                ));
                break;
            }
            cur = next;
        }
    }
    issues.extend(issues_actors);

    // Oracle.
    if spec.oracle.is_empty() {
        issues.push(ValidationIssue::new(
            "/oracle",
            IssueKind::MissingSection,
            "at least one oracle entry is required",
        ));
    }
    for (i, e) in spec.oracle.iter().enumerate() {
        let base = format!("/oracle/{i}");
        if !registry::is_supported(e.rule_id) {
            issues.push(ValidationIssue::invalid_enum(
                format!("{base}/rule_id"),
                &e.rule_token(),
                registry::rule_tokens(),
            ));
        }
        if e.violation_type.trim().is_empty() {
            issues.push(ValidationIssue::new(
                format!("{base}/violation_type"),
                IssueKind::RangeViolation,
                "must not be empty",
            ));
        }
        if e.description.trim().is_empty() {
            issues.push(ValidationIssue::new(
                format!("{base}/description"),
                IssueKind::RangeViolation,
                "must not be empty",
            ));
        }
        if let Some(v) = &e.violating_actor {
            if !ids.contains_key(v.as_str()) {
                issues.push(ValidationIssue::new(
                    format!("{base}/violating_actor"),
                    IssueKind::Inconsistent,
                    format!("`{v}` does not name an actor"),
                ));
            }
        }
    }

    sort_issues(&mut issues);
    issues
}
