//! Canonical DSL emitter.

use std::fmt::Write;

use super::model::*;

/// Plain scalars that a YAML reader would not take as text.
fn needs_quotes(s: &str) -> bool {
    let reserved = matches!(
        s.to_ascii_lowercase().as_str(),
        "" | "~" | "null" | "true" | "false" | "yes" | "no" | "on" | "off"
    );
    let mut chars = s.chars();
    let first_ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    let rest_ok = s
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    reserved || !first_ok || !rest_ok
}

fn quoted(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn ident(s: &str) -> String {
    if needs_quotes(s) {
        quoted(s)
    } else {
        s.to_string()
    }
}

fn number(v: f64) -> String {
    format!("{v:?}")
}

fn actor(out: &mut String, a: &ActorSpec, indent: &str, first_prefix: &str) {
    let _ = writeln!(out, "{first_prefix}actor_id: {}", ident(&a.actor_id));
    let _ = writeln!(out, "{indent}actor_type: {}", a.actor_type);
    let _ = writeln!(out, "{indent}behavior: {}", a.behavior);
    if let Some(v) = a.speed_mps {
        let _ = writeln!(out, "{indent}speed_mps: {}", number(v));
    }
    if let Some(p) = &a.position {
        let _ = writeln!(out, "{indent}position:");
        let _ = writeln!(out, "{indent}  reference: {}", ident(&p.reference));
        let _ = writeln!(out, "{indent}  spatial_relation: {}", p.spatial_relation);
        if let Some(h) = p.heading_relation {
            let _ = writeln!(out, "{indent}  heading_relation: {h}");
        }
    }
    if let Some(m) = &a.model_id {
        let _ = writeln!(out, "{indent}model_id: {}", quoted(m));
    }
}

/// Emits the canonical text of `spec`: fixed key order, two-space indent,
/// lowercase tokens, LF endings, no trailing whitespace.
pub fn serialize_dsl(spec: &ScenarioSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario_id: {}", quoted(&spec.scenario_id));

    out.push_str("environment:\n");
    let _ = writeln!(out, "  weather: {}", spec.environment.weather);
    let _ = writeln!(out, "  time_of_day: {}", spec.environment.time_of_day);

    let r = &spec.road_network;
    out.push_str("road_network:\n");
    let _ = writeln!(out, "  road_type: {}", r.road_type);
    let _ = writeln!(out, "  number_of_ways: {}", r.number_of_ways);
    let _ = writeln!(out, "  number_of_lanes: {}", r.number_of_lanes);
    if let Some(m) = r.road_markers {
        let _ = writeln!(out, "  road_markers: {m}");
    }
    if !r.traffic_signs.is_empty() {
        out.push_str("  traffic_signs:\n");
        for s in &r.traffic_signs {
            let _ = writeln!(out, "    - {s}");
        }
    }
    if let Some(v) = r.speed_limit_value {
        let _ = writeln!(out, "  speed_limit_value: {}", number(v));
    }

    out.push_str("actors:\n");
    out.push_str("  ego:\n");
    actor(&mut out, &spec.actors.ego, "    ", "    ");
    if !spec.actors.npcs.is_empty() {
        out.push_str("  npcs:\n");
        for npc in &spec.actors.npcs {
            actor(&mut out, npc, "      ", "    - ");
        }
    }

    out.push_str("oracle:\n");
    for e in &spec.oracle {
        let _ = writeln!(out, "  - {}: {}", e.rule_token(), ident(&e.violation_type));
        let _ = writeln!(out, "    description: {}", quoted(&e.description));
        if let Some(a) = &e.violating_actor {
            let _ = writeln!(out, "    violating_actor: {}", ident(a));
        }
    }
    out
}
