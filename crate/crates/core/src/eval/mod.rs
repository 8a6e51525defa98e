//! Scoring: extraction accuracy against golden documents, weighted Fleiss
//! kappa over rater matrices, and violation-count agreement tables.

mod agreement;
mod kappa;

pub use agreement::{compare_violation_counts, AgreementRow, AgreementTable};
pub use kappa::{brute_force_kappa, fleiss_kappa, KappaBand, RatingsMatrix};

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::fmt_sig;
use crate::dsl::{ActorSpec, OracleEntry, ScenarioSpec};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot aggregate an empty result list")]
    Empty,
    #[error("kappa is undefined: expected agreement is 1")]
    UndefinedKappa,
    #[error("item {item} has {raters} rating(s); at least 2 are needed")]
    TooFewRaters { item: usize, raters: usize },
    #[error("rating {value} at item {item} is not a category index below {categories}")]
    BadCategory {
        item: usize,
        value: usize,
        categories: usize,
    },
    #[error("at least two categories are needed")]
    TooFewCategories,
    #[error("no reports for road type {0}")]
    MissingRoadType(String),
    #[error("ratings line {line}: {message}")]
    Ratings { line: usize, message: String },
}

/// Matched and total field counts for one component.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub matched: usize,
    pub total: usize,
}

impl Tally {
    /// 1.0 for an empty component: nothing to get wrong.
    pub fn fraction(self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }

    fn add(&mut self, other: Tally) {
        self.matched += other.matched;
        self.total += other.total;
    }
}

pub const COMPONENTS: [&str; 4] = ["environment", "road_network", "actor", "oracle"];

/// Field-level accuracy of one or more candidate documents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentAccuracy {
    pub environment: Tally,
    pub road_network: Tally,
    pub actor: Tally,
    pub oracle: Tally,
    /// Field path to match flag. Aggregates prefix paths with the case index.
    pub per_field: BTreeMap<String, bool>,
}

impl ComponentAccuracy {
    pub fn tally(&self, component: &str) -> Tally {
        match component {
            "environment" => self.environment,
            "road_network" => self.road_network,
            "actor" => self.actor,
            "oracle" => self.oracle,
            _ => self.overall_tally(),
        }
    }

    pub fn overall_tally(&self) -> Tally {
        let mut t = Tally::default();
        for c in [self.environment, self.road_network, self.actor, self.oracle] {
            t.add(c);
        }
        t
    }

    pub fn overall(&self) -> f64 {
        self.overall_tally().fraction()
    }

    /// `component,matched,total,fraction` rows, `overall` last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("component,matched,total,fraction\n");
        for c in COMPONENTS.iter().copied().chain(["overall"]) {
            let t = self.tally(c);
            let _ = writeln!(out, "{c},{},{},{}", t.matched, t.total, fmt_sig(t.fraction(), 6));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("accuracy serializes");
        v["overall"] = serde_json::json!(self.overall_tally());
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }
}

struct Scorer {
    tally: Tally,
    per_field: BTreeMap<String, bool>,
}

impl Scorer {
    fn new() -> Self {
        Self {
            tally: Tally::default(),
            per_field: BTreeMap::new(),
        }
    }

    /// Compares two optional tokens; a path absent on both sides is not
    /// compared at all.
    fn field(&mut self, path: String, a: Option<String>, b: Option<String>) {
        if a.is_none() && b.is_none() {
            return;
        }
        let hit = a == b;
        self.tally.total += 1;
        self.tally.matched += usize::from(hit);
        self.per_field.insert(path, hit);
    }

    fn both(&mut self, path: String, a: String, b: String) {
        self.field(path, Some(a), Some(b));
    }
}

fn num(v: Option<f64>) -> Option<String> {
    v.map(|x| fmt_sig(x, 6))
}

fn signs(spec: &ScenarioSpec) -> String {
    let mut t: Vec<&str> = spec.road_network.traffic_signs.iter().map(|s| s.as_str()).collect();
    t.sort_unstable();
    t.dedup();
    format!("[{}]", t.join(","))
}

/// Categorical attributes plus stated speeds; ids, asset names and the
/// reference link are naming choices and are not scored.
fn actor_fields(sc: &mut Scorer, path: &str, a: Option<&ActorSpec>, b: Option<&ActorSpec>) {
    let get = |x: Option<&ActorSpec>, f: fn(&ActorSpec) -> Option<String>| x.and_then(f);
    let rows: [(&str, fn(&ActorSpec) -> Option<String>); 5] = [
        ("actor_type", |x| Some(x.actor_type.as_str().into())),
        ("behavior", |x| Some(x.behavior.as_str().into())),
        ("speed_mps", |x| num(x.speed_mps)),
        ("position/spatial_relation", |x| {
            x.position.as_ref().map(|p| p.spatial_relation.as_str().into())
        }),
        ("position/heading_relation", |x| {
            x.position
                .as_ref()
                .and_then(|p| p.heading_relation)
                .map(|h| h.as_str().into())
        }),
    ];
    for (name, f) in rows {
        sc.field(format!("{path}/{name}"), get(a, f), get(b, f));
    }
}

fn oracle_fields(sc: &mut Scorer, i: usize, a: Option<&OracleEntry>, b: Option<&OracleEntry>) {
    sc.field(
        format!("oracle/{i}/rule_id"),
        a.map(|e| e.rule_token()),
        b.map(|e| e.rule_token()),
    );
    sc.field(
        format!("oracle/{i}/violation_type"),
        a.map(|e| e.violation_type.clone()),
        b.map(|e| e.violation_type.clone()),
    );
}

/// Exact-token comparison per component. Actors pair by role (ego, then NPCs
/// in listed order) and oracle entries by position; an unpaired actor or
/// entry counts every one of its fields as a mismatch.
pub fn compare_specs(candidate: &ScenarioSpec, golden: &ScenarioSpec) -> ComponentAccuracy {
    let (c, g) = (candidate, golden);

    let mut env = Scorer::new();
    env.both(
        "environment/weather".into(),
        c.environment.weather.as_str().into(),
        g.environment.weather.as_str().into(),
    );
    env.both(
        "environment/time_of_day".into(),
        c.environment.time_of_day.as_str().into(),
        g.environment.time_of_day.as_str().into(),
    );

    let (cr, gr) = (&c.road_network, &g.road_network);
    let mut road = Scorer::new();
    road.both("road_network/road_type".into(), cr.road_type.as_str().into(), gr.road_type.as_str().into());
    road.both(
        "road_network/number_of_ways".into(),
        cr.number_of_ways.to_string(),
        gr.number_of_ways.to_string(),
    );
    road.both(
        "road_network/number_of_lanes".into(),
        cr.number_of_lanes.to_string(),
        gr.number_of_lanes.to_string(),
    );
    road.field(
        "road_network/road_markers".into(),
        cr.road_markers.map(|m| m.as_str().into()),
        gr.road_markers.map(|m| m.as_str().into()),
    );
    road.both("road_network/traffic_signs".into(), signs(c), signs(g));
    road.field(
        "road_network/speed_limit_value".into(),
        num(cr.speed_limit_value),
        num(gr.speed_limit_value),
    );

    let mut actor = Scorer::new();
    actor_fields(&mut actor, "actors/ego", Some(&c.actors.ego), Some(&g.actors.ego));
    for i in 0..c.actors.npcs.len().max(g.actors.npcs.len()) {
        actor_fields(
            &mut actor,
            &format!("actors/npcs/{i}"),
            c.actors.npcs.get(i),
            g.actors.npcs.get(i),
        );
    }

    let mut oracle = Scorer::new();
    for i in 0..c.oracle.len().max(g.oracle.len()) {
        oracle_fields(&mut oracle, i, c.oracle.get(i), g.oracle.get(i));
    }

    let mut per_field = BTreeMap::new();
    for s in [&env, &road, &actor, &oracle] {
        per_field.extend(s.per_field.iter().map(|(k, v)| (k.clone(), *v)));
    }
    ComponentAccuracy {
        environment: env.tally,
        road_network: road.tally,
        actor: actor.tally,
        oracle: oracle.tally,
        per_field,
    }
}

/// Micro-average: field counts summed per component across cases.
pub fn aggregate_accuracy(results: &[ComponentAccuracy]) -> Result<ComponentAccuracy, EvalError> {
    match results {
        [] => Err(EvalError::Empty),
        [one] => Ok(one.clone()),
        _ => {
            let mut acc = ComponentAccuracy::default();
            for (i, r) in results.iter().enumerate() {
                acc.environment.add(r.environment);
                acc.road_network.add(r.road_network);
                acc.actor.add(r.actor);
                acc.oracle.add(r.oracle);
                acc.per_field
                    .extend(r.per_field.iter().map(|(k, v)| (format!("{i}:{k}"), *v)));
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_dsl, Weather};

    const DOC: &str = "scenario_id: t\nenvironment:\n  weather: sunny\n  time_of_day: daytime\nroad_network:\n  road_type: straight\n  number_of_ways: 2\n  number_of_lanes: 1\n  road_markers: broken_line\n  traffic_signs: []\nactors:\n  ego:\n    actor_id: ego\n    actor_type: car\n    behavior: go_forward\n  npcs:\n    - actor_id: npc1\n      actor_type: car\n      behavior: go_forward\n      position:\n        reference: ego\n        spatial_relation: front\n        heading_relation: opposite_direction\noracle:\n  - CVC_21461: crossing_center_line\n    description: x\n    violating_actor: npc1\n";

    #[test]
    fn identity_is_perfect() {
        let s = parse_dsl(DOC).unwrap();
        let a = compare_specs(&s, &s);
        assert_eq!(a.overall(), 1.0);
        assert_eq!(a.environment, Tally { matched: 2, total: 2 });
        assert_eq!(a.road_network.total, 5);
        assert_eq!(a.actor.total, 2 + 4);
        assert_eq!(a.oracle.total, 2);
    }

    #[test]
    fn weather_mismatch_is_isolated() {
        let g = parse_dsl(DOC).unwrap();
        let mut c = g.clone();
        c.environment.weather = Weather::Rainy;
        let a = compare_specs(&c, &g);
        assert_eq!(a.environment.fraction(), 0.5);
        for t in [a.road_network, a.actor, a.oracle] {
            assert_eq!(t.fraction(), 1.0);
        }
        assert_eq!(a.per_field["environment/weather"], false);
    }

    #[test]
    fn missing_npc_counts_against_actor_only() {
        let g = parse_dsl(DOC).unwrap();
        let mut c = g.clone();
        c.actors.npcs.clear();
        let a = compare_specs(&c, &g);
        assert_eq!(a.actor, Tally { matched: 2, total: 6 });
        let b = compare_specs(&g, &c);
        assert_eq!(a.actor, b.actor);
    }

    #[test]
    fn aggregate_is_micro_average() {
        let g = parse_dsl(DOC).unwrap();
        let mut c = g.clone();
        c.environment.weather = Weather::Foggy;
        let agg = aggregate_accuracy(&[compare_specs(&g, &g), compare_specs(&c, &g)]).unwrap();
        assert_eq!(agg.environment.fraction(), 3.0 / 4.0);
        assert_eq!(aggregate_accuracy(&[]), Err(EvalError::Empty));
    }

    #[test]
    fn csv_has_overall_row() {
        let s = parse_dsl(DOC).unwrap();
        let csv = compare_specs(&s, &s).to_csv();
        assert!(csv.ends_with("overall,15,15,1\n"), "{csv}");
    }
}
