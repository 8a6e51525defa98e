//! Compilation of a normalized scenario into a parameterized
//! [`ScenarioTemplate`] and a probabilistic Scenic program.

mod render;
mod tables;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::fnv64;
use crate::dsl::{
    ActorType, Behavior, HeadingRelation, OracleEntry, RoadMarker, RoadType, SpatialRelation,
    TrafficSign,
};
use crate::monitor::registry::DEFAULT_SPEED_LIMIT_MPS;
use crate::normalize::{NormalizedSpec, DEFAULT_SPEED_MPS};

pub use render::{parse_back, render_scenic, ScenicProgram};
pub use tables::{map_time, map_weather, select_map, Town};

/// Smallest total heading change of a curve template, in degrees.
pub const MIN_CURVE_DEG: f64 = 30.0;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("unsupported {field} token `{token}`")]
    UnsupportedToken { field: &'static str, token: String },
    #[error("`{heading}` is not compatible with a `{topology}` road")]
    Incompatible { topology: String, heading: String },
    #[error("actor `{actor}`: behavior `{behavior}` needs a junction, road is `{topology}`")]
    BehaviorNeedsJunction {
        actor: String,
        behavior: String,
        topology: String,
    },
    #[error("template invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "m")]
    Meters,
    #[serde(rename = "s")]
    Seconds,
    #[serde(rename = "degree")]
    Degrees,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub unit: Unit,
}

impl ParamRange {
    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }

    pub fn is_sound(&self) -> bool {
        self.low.is_finite() && self.high.is_finite() && self.low <= self.high && self.low >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    Speed,
    InitDist,
}

pub const INIT_DIST_RANGE_M: (f64, f64) = (15.0, 20.0);

/// Speeds widen to ±20 % of the base; initial distances always span
/// [15, 20] m.
pub fn widen_to_range(base: f64, kind: RangeKind) -> ParamRange {
    match kind {
        RangeKind::Speed => ParamRange {
            name: "speed".into(),
            low: base * 4.0 / 5.0,
            high: base * 6.0 / 5.0,
            unit: Unit::MetersPerSecond,
        },
        RangeKind::InitDist => ParamRange {
            name: "init_dist".into(),
            low: INIT_DIST_RANGE_M.0,
            high: INIT_DIST_RANGE_M.1,
            unit: Unit::Meters,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    HeadOn,
    CarFollowing,
    CrossingFromLeft,
    CrossingFromRight,
    JunctionConflict,
}

impl Configuration {
    pub fn as_str(self) -> &'static str {
        match self {
            Configuration::HeadOn => "head_on",
            Configuration::CarFollowing => "car_following",
            Configuration::CrossingFromLeft => "crossing_from_left",
            Configuration::CrossingFromRight => "crossing_from_right",
            Configuration::JunctionConflict => "junction_conflict",
        }
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Junction leg of the adversary, relative to the ego's approach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    Left,
    Right,
    Opposite,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Left => "left",
            Approach::Right => "right",
            Approach::Opposite => "opposite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Ego,
    Adversary,
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateActor {
    pub actor_id: String,
    pub actor_type: ActorType,
    pub behavior: Behavior,
    pub model_id: String,
    pub role: Role,
    pub base_speed: f64,
    pub reference: Option<String>,
    pub spatial_relation: Option<SpatialRelation>,
    pub heading_relation: Option<HeadingRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateParams {
    pub scenario_id: String,
    pub town: Town,
    pub time_hour: u32,
    pub weather_preset: String,
    pub topology: RoadType,
    pub configuration: Configuration,
    /// Adversary leg on junctions.
    pub approach: Option<Approach>,
    /// Lanes per direction as realized by the town.
    pub lanes: u32,
    pub ways: u32,
    #[serde(rename = "EGO_INIT_DIST")]
    pub ego_init_dist: ParamRange,
    #[serde(rename = "NPC_INIT_DIST")]
    pub npc_init_dist: ParamRange,
    pub ego_speed: ParamRange,
    pub npc_speed: ParamRange,
    pub ego_model: String,
    pub npc_models: Vec<String>,
    pub marker: RoadMarker,
    pub signs: Vec<TrafficSign>,
    pub speed_limit: f64,
    pub oracle: Vec<OracleEntry>,
    pub actors: Vec<TemplateActor>,
    pub adversary: Option<String>,
}

impl TemplateParams {
    pub fn ranges(&self) -> [&ParamRange; 4] {
        [
            &self.ego_init_dist,
            &self.npc_init_dist,
            &self.ego_speed,
            &self.npc_speed,
        ]
    }

    pub fn ego(&self) -> &TemplateActor {
        &self.actors[0]
    }

    pub fn adversary_actor(&self) -> Option<&TemplateActor> {
        let id = self.adversary.as_deref()?;
        self.actors.iter().find(|a| a.actor_id == id)
    }

    pub fn has_sign(&self, sign: TrafficSign) -> bool {
        self.signs.contains(&sign)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub params: TemplateParams,
    /// Sampled axes, sorted by name.
    pub free_parameters: Vec<ParamRange>,
    pub fixed_parameters: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl ScenarioTemplate {
    /// Canonical JSON with sorted keys.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("template serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn to_canonical_json_pretty(&self) -> String {
        let value = serde_json::to_value(self).expect("template serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn digest(&self) -> u64 {
        fnv64(self.to_canonical_json().as_bytes())
    }

    pub fn scenario_id(&self) -> &str {
        &self.params.scenario_id
    }

    pub fn free(&self, name: &str) -> Option<&ParamRange> {
        self.free_parameters.iter().find(|p| p.name == name)
    }

    pub fn check_invariants(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Invariant(m));
        for r in &self.free_parameters {
            if !r.is_sound() {
                return fail(format!("range {} is [{}, {}]", r.name, r.low, r.high));
            }
            if self.fixed_parameters.contains_key(&r.name) {
                return fail(format!("{} is both free and fixed", r.name));
            }
        }
        for r in self.params.ranges() {
            let n = self
                .free_parameters
                .iter()
                .filter(|p| p.name == r.name)
                .count()
                + usize::from(self.fixed_parameters.contains_key(&r.name));
            if n != 1 {
                return fail(format!("{} listed {n} times", r.name));
            }
        }
        let junction = self.params.topology.is_junction();
        let ok = match self.params.configuration {
            Configuration::HeadOn | Configuration::CarFollowing => !junction,
            _ => junction,
        };
        if !ok {
            return fail(format!(
                "{} on {}",
                self.params.configuration, self.params.topology
            ));
        }
        Ok(())
    }
}

/// The NPC the oracle blames, or the first NPC.
fn pick_adversary(n: &NormalizedSpec) -> Option<usize> {
    let npcs = &n.spec.actors.npcs;
    let blamed = n
        .spec
        .oracle
        .first()
        .and_then(|e| e.violating_actor.as_deref());
    blamed
        .and_then(|id| npcs.iter().position(|a| a.actor_id == id))
        .or(if npcs.is_empty() { None } else { Some(0) })
}

/// Compiles a normalized scenario into a template.
pub fn build_template(normalized: &NormalizedSpec) -> Result<ScenarioTemplate, SynthError> {
    let spec = &normalized.spec;
    let road = &spec.road_network;
    let topology = road.road_type;
    let mut warnings = Vec::new();

    let time_hour = map_time(spec.environment.time_of_day)?;
    let weather_preset = map_weather(spec.environment.weather, spec.environment.time_of_day);
    let (town, warn) = select_map(topology, road.number_of_ways * road.number_of_lanes);
    warnings.extend(warn);
    let lanes = if topology.is_junction() {
        road.number_of_lanes
    } else {
        town.lanes_per_direction()
    };

    for a in spec.actors.iter() {
        if matches!(a.behavior, Behavior::TurnLeft | Behavior::TurnRight) && !topology.is_junction()
        {
            return Err(SynthError::BehaviorNeedsJunction {
                actor: a.actor_id.clone(),
                behavior: a.behavior.to_string(),
                topology: topology.to_string(),
            });
        }
    }

    let adversary = pick_adversary(normalized);
    let heading = adversary.map(|i| {
        spec.actors.npcs[i]
            .position
            .as_ref()
            .and_then(|p| p.heading_relation)
            .unwrap_or(HeadingRelation::OppositeDirection)
    });
    let incompatible = |h: HeadingRelation| SynthError::Incompatible {
        topology: topology.to_string(),
        heading: h.to_string(),
    };
    let (configuration, approach) = match (topology, heading) {
        (RoadType::Straight | RoadType::Curve, None) => (Configuration::CarFollowing, None),
        (RoadType::Straight | RoadType::Curve, Some(h)) => match h {
            HeadingRelation::OppositeDirection => (Configuration::HeadOn, None),
            HeadingRelation::SameDirection => (Configuration::CarFollowing, None),
            other => return Err(incompatible(other)),
        },
        (_, None) => (Configuration::JunctionConflict, None),
        (_, Some(h)) => match h {
            HeadingRelation::FromLeft => (Configuration::JunctionConflict, Some(Approach::Left)),
            HeadingRelation::FromRight => (Configuration::JunctionConflict, Some(Approach::Right)),
            HeadingRelation::OppositeDirection if topology == RoadType::Intersection => {
                (Configuration::JunctionConflict, Some(Approach::Opposite))
            }
            other => return Err(incompatible(other)),
        },
    };
    let speed_of = |s: Option<f64>| s.unwrap_or(DEFAULT_SPEED_MPS);
    let ego = &spec.actors.ego;
    let mut actors = vec![TemplateActor {
        actor_id: ego.actor_id.clone(),
        actor_type: ego.actor_type,
        behavior: ego.behavior,
        model_id: ego.model_id.clone().unwrap_or_default(),
        role: Role::Ego,
        base_speed: speed_of(ego.speed_mps),
        reference: None,
        spatial_relation: None,
        heading_relation: None,
    }];
    for (i, a) in spec.actors.npcs.iter().enumerate() {
        let p = a.position.as_ref();
        actors.push(TemplateActor {
            actor_id: a.actor_id.clone(),
            actor_type: a.actor_type,
            behavior: a.behavior,
            model_id: a.model_id.clone().unwrap_or_default(),
            role: if Some(i) == adversary {
                Role::Adversary
            } else {
                Role::Background
            },
            base_speed: speed_of(a.speed_mps),
            reference: p.map(|p| p.reference.clone()),
            spatial_relation: p.map(|p| p.spatial_relation),
            heading_relation: p.and_then(|p| p.heading_relation),
        });
    }

    let npc_base = adversary
        .map(|i| speed_of(spec.actors.npcs[i].speed_mps))
        .unwrap_or(DEFAULT_SPEED_MPS);
    let ego_speed = widen_to_range(speed_of(ego.speed_mps), RangeKind::Speed).named("ego_speed");
    let npc_speed = widen_to_range(npc_base, RangeKind::Speed).named("npc_speed");
    let ego_init_dist = widen_to_range(0.0, RangeKind::InitDist).named("EGO_INIT_DIST");
    let npc_init_dist = widen_to_range(0.0, RangeKind::InitDist).named("NPC_INIT_DIST");

    let speed_limit = road.speed_limit_value.unwrap_or(DEFAULT_SPEED_LIMIT_MPS);
    let mut fixed_parameters = BTreeMap::new();
    fixed_parameters.insert("time_hour".to_string(), time_hour as f64);
    fixed_parameters.insert("lanes".to_string(), lanes as f64);
    fixed_parameters.insert("ways".to_string(), road.number_of_ways as f64);
    fixed_parameters.insert("speed_limit".to_string(), speed_limit);
    for a in actors.iter().filter(|a| a.role == Role::Background) {
        fixed_parameters.insert(format!("{}.speed", a.actor_id), a.base_speed);
    }

    let mut free_parameters = vec![
        ego_init_dist.clone(),
        npc_init_dist.clone(),
        ego_speed.clone(),
        npc_speed.clone(),
    ];
    free_parameters.sort_by(|a, b| a.name.cmp(&b.name));

    let template = ScenarioTemplate {
        params: TemplateParams {
            scenario_id: spec.scenario_id.clone(),
            town,
            time_hour,
            weather_preset: weather_preset.to_string(),
            topology,
            configuration,
            approach,
            lanes,
            ways: road.number_of_ways,
            ego_init_dist,
            npc_init_dist,
            ego_speed,
            npc_speed,
            ego_model: actors[0].model_id.clone(),
            npc_models: actors[1..].iter().map(|a| a.model_id.clone()).collect(),
            marker: road.road_markers.unwrap_or(RoadMarker::BrokenLine),
            signs: road.traffic_signs.clone(),
            speed_limit,
            oracle: spec.oracle.clone(),
            adversary: adversary.map(|i| spec.actors.npcs[i].actor_id.clone()),
            actors,
        },
        free_parameters,
        fixed_parameters,
        warnings,
    };
    template.check_invariants()?;
    Ok(template)
}
