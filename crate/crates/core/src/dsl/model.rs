//! Scenario domain model for the Extended Scenic DSL.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Declares a closed-vocabulary enum whose variants map one-to-one onto the
/// lowercase DSL tokens.
macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn from_token(token: &str) -> Option<Self> {
                match token {
                    $($token => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn tokens() -> Vec<String> {
                Self::ALL.iter().map(|v| v.as_str().to_string()).collect()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

token_enum!(Weather {
    Sunny => "sunny",
    Cloudy => "cloudy",
    Overcast => "overcast",
    Rainy => "rainy",
    Snowy => "snowy",
    Foggy => "foggy",
    Windy => "windy",
    NotMentioned => "not_mentioned",
});

token_enum!(TimeOfDay {
    Daytime => "daytime",
    Nighttime => "nighttime",
    NotMentioned => "not_mentioned",
});

token_enum!(RoadType {
    Straight => "straight",
    Intersection => "intersection",
    TIntersection => "t_intersection",
    Curve => "curve",
});

impl RoadType {
    pub fn is_junction(self) -> bool {
        matches!(self, RoadType::Intersection | RoadType::TIntersection)
    }
}

token_enum!(RoadMarker {
    SolidLine => "solid_line",
    BrokenLine => "broken_line",
    NotMentioned => "not_mentioned",
});

token_enum!(TrafficSign {
    StopSign => "stop_sign",
    SpeedLimitSign => "speed_limit_sign",
    TrafficLight => "traffic_light",
    NotMentioned => "not_mentioned",
});

token_enum!(ActorType {
    Car => "car",
    Truck => "truck",
});

token_enum!(Behavior {
    GoForward => "go_forward",
    TurnLeft => "turn_left",
    TurnRight => "turn_right",
    Static => "static",
    Stop => "stop",
});

token_enum!(SpatialRelation {
    Front => "front",
    Behind => "behind",
    Left => "left",
    Right => "right",
});

token_enum!(HeadingRelation {
    SameDirection => "same_direction",
    OppositeDirection => "opposite_direction",
    FromLeft => "from_left",
    FromRight => "from_right",
});

/// Parsed scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: String,
    pub environment: Environment,
    pub road_network: RoadNetwork,
    pub actors: ActorSet,
    pub oracle: Vec<OracleEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub weather: Weather,
    pub time_of_day: TimeOfDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadNetwork {
    pub road_type: RoadType,
    pub number_of_ways: u32,
    /// Per direction on straight/curve roads, per approach on junctions.
    pub number_of_lanes: u32,
    /// `None` when the document omits the key.
    pub road_markers: Option<RoadMarker>,
    pub traffic_signs: Vec<TrafficSign>,
    /// Posted limit in m/s, only with a speed limit sign.
    pub speed_limit_value: Option<f64>,
}

impl RoadNetwork {
    pub fn has_sign(&self, sign: TrafficSign) -> bool {
        self.traffic_signs.contains(&sign)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSet {
    pub ego: ActorSpec,
    pub npcs: Vec<ActorSpec>,
}

impl ActorSet {
    pub fn iter(&self) -> impl Iterator<Item = &ActorSpec> {
        std::iter::once(&self.ego).chain(self.npcs.iter())
    }

    pub fn get(&self, id: &str) -> Option<&ActorSpec> {
        self.iter().find(|a| a.actor_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorSpec {
    pub actor_id: String,
    pub actor_type: ActorType,
    pub behavior: Behavior,
    pub speed_mps: Option<f64>,
    /// Required for NPCs, absent for the ego.
    pub position: Option<PositionSpec>,
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSpec {
    pub reference: String,
    pub spatial_relation: SpatialRelation,
    pub heading_relation: Option<HeadingRelation>,
}

/// One `CVC_<code>: <violation_type>` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub rule_id: u32,
    pub violation_type: String,
    pub description: String,
    /// Defaults to the first NPC during normalization when absent.
    pub violating_actor: Option<String>,
}

impl OracleEntry {
    pub fn rule_token(&self) -> String {
        format!("CVC_{}", self.rule_id)
    }
}

/// Upper bounds shared by the parser and the generators.
pub const MAX_NPCS: usize = 4;
pub const MAX_LANES: u32 = 8;
pub const MAX_SPEED_MPS: f64 = 45.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    MissingSection,
    InvalidEnum,
    RangeViolation,
    Inconsistent,
    UnknownField,
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IssueKind::MissingSection => "missing_section",
            IssueKind::InvalidEnum => "invalid_enum",
            IssueKind::RangeViolation => "range_violation",
            IssueKind::Inconsistent => "inconsistent",
            IssueKind::UnknownField => "unknown_field",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub path: String,
    pub kind: IssueKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<String>>,
}

impl ValidationIssue {
    pub fn new(path: impl Into<String>, kind: IssueKind, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            kind,
            message: message.into(),
            allowed: None,
        }
    }

    pub fn invalid_enum(path: impl Into<String>, got: &str, allowed: Vec<String>) -> Self {
        Self {
            path: path.into(),
            kind: IssueKind::InvalidEnum,
            message: format!("`{got}` is not an accepted token"),
            allowed: Some(allowed),
        }
    }
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.path, self.kind, self.message)?;
        if let Some(allowed) = &self.allowed {
            write!(f, " (allowed: {})", allowed.join(", "))?;
        }
        Ok(())
    }
}

/// Sorts issues by path (then kind and message) so output order is stable.
pub fn sort_issues(issues: &mut Vec<ValidationIssue>) {
    issues.sort();
    issues.dedup();
}
