//! Canonicalization and default filling between the DSL and the synthesizer.
//!
//! Free-text values are folded into DSL tokens through a [`SynonymTable`];
//! [`apply_defaults`] then resolves every optional field so the scenario is
//! always executable, recording for each field whether it came from the
//! document, from normalization, or from a default.

mod synonyms;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dsl::{
    parse_with, validate_spec, ActorType, HeadingRelation, RoadMarker, ScenarioSpec, TimeOfDay,
    TrafficSign, ValidationIssue, Weather,
};
use crate::sampler::stream;

pub use synonyms::{fold, normalize_field, CanonicalToken, SynonymError, SynonymTable, DEFAULT_TABLE};

pub const DEFAULT_SPEED_MPS: f64 = 10.0;
pub const DEFAULT_EGO_MODEL: &str = "vehicle.lincoln.mkz_2017";
pub const TRUCK_MODEL: &str = "vehicle.carlamotors.european_hgv";
pub const CAR_POOL: [&str; 5] = [
    "vehicle.nissan.patrol",
    "vehicle.tesla.model3",
    "vehicle.dodge.charger_2020",
    "vehicle.audi.tt",
    "vehicle.toyota.prius",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Explicit,
    Normalized,
    Defaulted,
}

/// A scenario with every optional field resolved.
///
/// `spec` holds the resolved values; `provenance` maps every field path to
/// where its value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSpec {
    pub spec: ScenarioSpec,
    pub provenance: BTreeMap<String, Provenance>,
    pub seed: u64,
}

impl NormalizedSpec {
    /// The resolved values viewed as a plain spec.
    pub fn to_spec(&self) -> ScenarioSpec {
        self.spec.clone()
    }

    pub fn provenance_of(&self, path: &str) -> Option<Provenance> {
        self.provenance.get(path).copied()
    }

    /// Paths whose value was filled in rather than read.
    pub fn defaulted_paths(&self) -> Vec<&str> {
        self.provenance
            .iter()
            .filter(|(_, p)| **p == Provenance::Defaulted)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Picks the asset for an actor. Trucks always get the heavy goods vehicle;
/// cars draw uniformly from [`CAR_POOL`] on the `(seed, actor_index)` stream.
pub fn resolve_actor_model(actor_type: ActorType, seed: u64, actor_index: u64) -> &'static str {
    match actor_type {
        ActorType::Truck => TRUCK_MODEL,
        ActorType::Car => {
            let x = stream(seed, "model", actor_index);
            let idx = ((x as u128 * CAR_POOL.len() as u128) >> 64) as usize;
            CAR_POOL[idx]
        }
    }
}

/// Parses a document, folding non-canonical enum values through `table`.
///
/// Returns the document together with the paths whose values were rewritten.
/// Validation issues are returned exactly as by [`crate::dsl::parse_dsl`]
/// for values the table cannot resolve.
pub fn parse_lenient(
    source: &str,
    table: &SynonymTable,
) -> Result<(ScenarioSpec, Vec<String>), Vec<ValidationIssue>> {
    let parsed = parse_with(source, Some(table))?;
    Ok((parsed.spec, parsed.normalized_paths))
}

/// Parses leniently, validates and applies defaults.
pub fn normalize_document(
    source: &str,
    table: &SynonymTable,
    seed: u64,
) -> Result<NormalizedSpec, Vec<ValidationIssue>> {
    let (spec, normalized) = parse_lenient(source, table)?;
    let issues = validate_spec(&spec);
    if !issues.is_empty() {
        return Err(issues);
    }
    Ok(apply_defaults_with(spec, seed, &normalized))
}

/// Resolves every optional field of a validated spec.
pub fn apply_defaults(spec: ScenarioSpec, seed: u64) -> NormalizedSpec {
    apply_defaults_with(spec, seed, &[])
}

/// Like [`apply_defaults`], tagging `normalized_paths` as normalized.
pub fn apply_defaults_with(
    mut spec: ScenarioSpec,
    seed: u64,
    normalized_paths: &[String],
) -> NormalizedSpec {
    let mut prov = BTreeMap::new();
    let mut mark = |path: String, defaulted: bool| {
        let normalized = normalized_paths
            .iter()
            .any(|n| *n == path || n.starts_with(&format!("{path}/")));
        let p = if defaulted {
            Provenance::Defaulted
        } else if normalized {
            Provenance::Normalized
        } else {
            Provenance::Explicit
        };
        prov.insert(path, p);
    };

    mark("/scenario_id".into(), false);

    let env = &mut spec.environment;
    let w_default = env.weather == Weather::NotMentioned;
    if w_default {
        env.weather = Weather::Sunny;
    }
    mark("/environment/weather".into(), w_default);
    let t_default = env.time_of_day == TimeOfDay::NotMentioned;
    if t_default {
        env.time_of_day = TimeOfDay::Daytime;
    }
    mark("/environment/time_of_day".into(), t_default);

    let r = &mut spec.road_network;
    mark("/road_network/road_type".into(), false);
    mark("/road_network/number_of_ways".into(), false);
    mark("/road_network/number_of_lanes".into(), false);
    let m_default = matches!(r.road_markers, None | Some(RoadMarker::NotMentioned));
    if m_default {
        r.road_markers = Some(RoadMarker::BrokenLine);
    }
    mark("/road_network/road_markers".into(), m_default);
    let s_default = r.traffic_signs.contains(&TrafficSign::NotMentioned);
    r.traffic_signs.retain(|s| *s != TrafficSign::NotMentioned);
    mark("/road_network/traffic_signs".into(), s_default);
    if r.speed_limit_value.is_some() {
        mark("/road_network/speed_limit_value".into(), false);
    }

    let first_npc = spec.actors.npcs.first().map(|n| n.actor_id.clone());
    let ego_id = spec.actors.ego.actor_id.clone();
    let actors = std::iter::once(("/actors/ego".to_string(), &mut spec.actors.ego)).chain(
        spec.actors
            .npcs
            .iter_mut()
            .enumerate()
            .map(|(i, a)| (format!("/actors/npcs/{i}"), a)),
    );
    for (index, (base, a)) in actors.enumerate() {
        mark(format!("{base}/actor_id"), false);
        mark(format!("{base}/actor_type"), false);
        mark(format!("{base}/behavior"), false);
        let sp_default = a.speed_mps.is_none();
        a.speed_mps.get_or_insert(DEFAULT_SPEED_MPS);
        mark(format!("{base}/speed_mps"), sp_default);
        let model_default = a.model_id.is_none();
        if model_default {
            let model = if index == 0 {
                DEFAULT_EGO_MODEL
            } else {
                resolve_actor_model(a.actor_type, seed, index as u64)
            };
            a.model_id = Some(model.to_string());
        }
        mark(format!("{base}/model_id"), model_default);
        if let Some(p) = &mut a.position {
            mark(format!("{base}/position/reference"), false);
            mark(format!("{base}/position/spatial_relation"), false);
            let h_default = p.heading_relation.is_none();
            p.heading_relation
                .get_or_insert(HeadingRelation::OppositeDirection);
            mark(format!("{base}/position/heading_relation"), h_default);
        }
    }

    for (i, e) in spec.oracle.iter_mut().enumerate() {
        let base = format!("/oracle/{i}");
        mark(format!("{base}/rule_id"), false);
        mark(format!("{base}/violation_type"), false);
        mark(format!("{base}/description"), false);
        let va_default = e.violating_actor.is_none();
        if va_default {
            e.violating_actor = Some(first_npc.clone().unwrap_or_else(|| ego_id.clone()));
        }
        mark(format!("{base}/violating_actor"), va_default);
    }

    NormalizedSpec {
        spec,
        provenance: prov,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truck_model_is_fixed() {
        for seed in [0, 1, 99, u64::MAX] {
            for idx in 0..4 {
                assert_eq!(resolve_actor_model(ActorType::Truck, seed, idx), TRUCK_MODEL);
            }
        }
    }

    #[test]
    fn car_model_is_deterministic_pool_member() {
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let a = resolve_actor_model(ActorType::Car, seed, 1);
            assert_eq!(a, resolve_actor_model(ActorType::Car, seed, 1));
            assert!(CAR_POOL.contains(&a));
            seen.insert(a);
        }
        assert_eq!(seen.len(), CAR_POOL.len());
    }
}
