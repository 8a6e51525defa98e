//! Strict schema walk from the node tree to [`ScenarioSpec`].
//!
//! The walker never stops at the first problem: every field is visited and
//! every defect becomes a [`ValidationIssue`] carrying its field path.

use serde::{Deserialize, Serialize};

use super::model::*;
use super::tree::{parse_tree, Node};
use crate::monitor::registry;

/// Field families whose free-text values a [`TokenResolver`] may fold into
/// canonical tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Weather,
    Time,
    Behavior,
    Heading,
    Spatial,
    Marker,
    Sign,
    ActorType,
}

impl FieldKind {
    pub const ALL: [FieldKind; 8] = [
        FieldKind::Weather,
        FieldKind::Time,
        FieldKind::Behavior,
        FieldKind::Heading,
        FieldKind::Spatial,
        FieldKind::Marker,
        FieldKind::Sign,
        FieldKind::ActorType,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FieldKind::Weather => "weather",
            FieldKind::Time => "time",
            FieldKind::Behavior => "behavior",
            FieldKind::Heading => "heading",
            FieldKind::Spatial => "spatial",
            FieldKind::Marker => "marker",
            FieldKind::Sign => "sign",
            FieldKind::ActorType => "actor_type",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// The canonical vocabulary of this field family.
    pub fn vocabulary(self) -> Vec<String> {
        match self {
            FieldKind::Weather => Weather::tokens(),
            FieldKind::Time => TimeOfDay::tokens(),
            FieldKind::Behavior => Behavior::tokens(),
            FieldKind::Heading => HeadingRelation::tokens(),
            FieldKind::Spatial => SpatialRelation::tokens(),
            FieldKind::Marker => RoadMarker::tokens(),
            FieldKind::Sign => TrafficSign::tokens(),
            FieldKind::ActorType => ActorType::tokens(),
        }
    }
}

/// Maps a non-canonical value to a canonical token of the given family.
pub trait TokenResolver {
    fn resolve(&self, kind: FieldKind, raw: &str) -> Option<String>;
}

/// Result of a parse: the document plus the paths whose values were rewritten by
/// the resolver (always empty in strict mode).
pub(crate) struct Parsed {
    pub spec: ScenarioSpec,
    pub normalized_paths: Vec<String>,
}

struct Walker<'r> {
    issues: Vec<ValidationIssue>,
    resolver: Option<&'r dyn TokenResolver>,
    normalized: Vec<String>,
}

fn entries<'n>(node: &'n Node) -> Option<&'n [(String, Node)]> {
    match node {
        Node::Map(e) => Some(e),
        _ => None,
    }
}

fn get<'n>(map: &'n [(String, Node)], key: &str) -> Option<&'n Node> {
    map.iter().find(|(k, _)| k == key).map(|(_, v)| v)
}

impl<'r> Walker<'r> {
    fn issue(&mut self, path: &str, kind: IssueKind, msg: impl Into<String>) {
        self.issues.push(ValidationIssue::new(path, kind, msg));
    }

    /// Flags keys outside `allowed`.
    fn check_keys(&mut self, path: &str, map: &[(String, Node)], allowed: &[&str]) {
        for (k, _) in map {
            if !allowed.contains(&k.as_str()) {
                self.issue(
                    &format!("{path}/{k}"),
                    IssueKind::UnknownField,
                    format!("unknown field `{k}`"),
                );
            }
        }
    }

    fn map_at<'n>(&mut self, node: &'n Node, path: &str) -> Option<&'n [(String, Node)]> {
        let m = entries(node);
        if m.is_none() {
            self.issue(
                path,
                IssueKind::Inconsistent,
                format!("expected a mapping, found a {}", node.describe()),
            );
        }
        m
    }

    fn required<'n>(
        &mut self,
        map: &'n [(String, Node)],
        parent: &str,
        key: &str,
    ) -> Option<&'n Node> {
        match get(map, key) {
            Some(n) if !n.is_null() => Some(n),
            _ => {
                self.issue(
                    &format!("{parent}/{key}"),
                    IssueKind::MissingSection,
                    format!("`{key}` is required"),
                );
                None
            }
        }
    }

    fn scalar<'n>(&mut self, node: &'n Node, path: &str) -> Option<&'n str> {
        match node {
            Node::Scalar { value, .. } => Some(value.as_str()),
            other => {
                self.issue(
                    path,
                    IssueKind::Inconsistent,
                    format!("expected a scalar, found a {}", other.describe()),
                );
                None
            }
        }
    }

    fn string(&mut self, node: &Node, path: &str) -> Option<String> {
        let s = self.scalar(node, path)?.to_string();
        if s.trim().is_empty() {
            self.issue(path, IssueKind::RangeViolation, "must not be empty");
            return None;
        }
        Some(s)
    }

    fn token<T>(
        &mut self,
        node: &Node,
        path: &str,
        kind: Option<FieldKind>,
        from: fn(&str) -> Option<T>,
        allowed: fn() -> Vec<String>,
    ) -> Option<T> {
        let raw = self.scalar(node, path)?;
        if let Some(v) = from(raw) {
            return Some(v);
        }
        if let (Some(resolver), Some(kind)) = (self.resolver, kind) {
            if let Some(v) = resolver.resolve(kind, raw).as_deref().and_then(from) {
                self.normalized.push(path.to_string());
                return Some(v);
            }
        }
        self.issues
            .push(ValidationIssue::invalid_enum(path, raw, allowed()));
        None
    }

    fn int(&mut self, node: &Node, path: &str, lo: u32, hi: u32) -> Option<u32> {
        let raw = self.scalar(node, path)?;
        let plain = matches!(node, Node::Scalar { plain: true, .. });
        match raw.parse::<i64>() {
            Ok(v) if plain => {
                if v < lo as i64 || v > hi as i64 {
                    self.issue(
                        path,
                        IssueKind::RangeViolation,
                        format!("{v} outside [{lo}, {hi}]"),
                    );
                    None
                } else {
                    Some(v as u32)
                }
            }
            _ => {
                self.issue(
                    path,
                    IssueKind::Inconsistent,
                    format!("expected an integer, found `{raw}`"),
                );
                None
            }
        }
    }

    /// Positive finite real in (0, max].
    fn speed(&mut self, node: &Node, path: &str, max: f64) -> Option<f64> {
        let raw = self.scalar(node, path)?;
        let plain = matches!(node, Node::Scalar { plain: true, .. });
        match raw.parse::<f64>() {
            Ok(v) if plain && v.is_finite() => {
                if v <= 0.0 || v > max {
                    self.issue(
                        path,
                        IssueKind::RangeViolation,
                        format!("{raw} outside (0, {max}]"),
                    );
                    None
                } else {
                    Some(v)
                }
            }
            _ => {
                self.issue(
                    path,
                    IssueKind::Inconsistent,
                    format!("expected a number, found `{raw}`"),
                );
                None
            }
        }
    }

    fn environment(&mut self, node: &Node) -> Option<Environment> {
        let path = "/environment";
        let map = self.map_at(node, path)?;
        self.check_keys(path, map, &["weather", "time_of_day"]);
        let weather = self.required(map, path, "weather").and_then(|n| {
            self.token(
                n,
                "/environment/weather",
                Some(FieldKind::Weather),
                Weather::from_token,
                Weather::tokens,
            )
        });
        let time = self.required(map, path, "time_of_day").and_then(|n| {
            self.token(
                n,
                "/environment/time_of_day",
                Some(FieldKind::Time),
                TimeOfDay::from_token,
                TimeOfDay::tokens,
            )
        });
        Some(Environment {
            weather: weather?,
            time_of_day: time?,
        })
    }

    fn road_network(&mut self, node: &Node) -> Option<RoadNetwork> {
        let path = "/road_network";
        let map = self.map_at(node, path)?;
        self.check_keys(
            path,
            map,
            &[
                "road_type",
                "number_of_ways",
                "number_of_lanes",
                "road_markers",
                "traffic_signs",
                "speed_limit_value",
            ],
        );
        let road_type = self.required(map, path, "road_type").and_then(|n| {
            self.token(
                n,
                "/road_network/road_type",
                None,
                RoadType::from_token,
                RoadType::tokens,
            )
        });
        let ways = self
            .required(map, path, "number_of_ways")
            .and_then(|n| self.int(n, "/road_network/number_of_ways", 1, 4));
        let lanes = self
            .required(map, path, "number_of_lanes")
            .and_then(|n| self.int(n, "/road_network/number_of_lanes", 1, MAX_LANES));
        let mut ok = true;
        let road_markers = match get(map, "road_markers").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.token(
                    n,
                    "/road_network/road_markers",
                    Some(FieldKind::Marker),
                    RoadMarker::from_token,
                    RoadMarker::tokens,
                );
                ok &= v.is_some();
                v
            }
        };
        let mut traffic_signs = Vec::new();
        match get(map, "traffic_signs").filter(|n| !n.is_null()) {
            None => {}
            Some(Node::Seq(items)) => {
                for (i, item) in items.iter().enumerate() {
                    let p = format!("/road_network/traffic_signs/{i}");
                    match self.token(
                        item,
                        &p,
                        Some(FieldKind::Sign),
                        TrafficSign::from_token,
                        TrafficSign::tokens,
                    ) {
                        Some(s) if traffic_signs.contains(&s) => {
                            self.issue(&p, IssueKind::Inconsistent, format!("`{s}` listed twice"));
                            ok = false;
                        }
                        Some(s) => traffic_signs.push(s),
                        None => ok = false,
                    }
                }
            }
            Some(other) => {
                self.issue(
                    "/road_network/traffic_signs",
                    IssueKind::Inconsistent,
                    format!("expected a sequence, found a {}", other.describe()),
                );
                ok = false;
            }
        }
        let speed_limit_value = match get(map, "speed_limit_value").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.speed(n, "/road_network/speed_limit_value", MAX_SPEED_MPS);
                ok &= v.is_some();
                v
            }
        };
        if !ok {
            return None;
        }
        Some(RoadNetwork {
            road_type: road_type?,
            number_of_ways: ways?,
            number_of_lanes: lanes?,
            road_markers,
            traffic_signs,
            speed_limit_value,
        })
    }

    fn actor(&mut self, node: &Node, path: &str, is_ego: bool) -> Option<ActorSpec> {
        let map = self.map_at(node, path)?;
        self.check_keys(
            path,
            map,
            &[
                "actor_id",
                "actor_type",
                "behavior",
                "speed_mps",
                "position",
                "model_id",
            ],
        );
        let actor_id = self
            .required(map, path, "actor_id")
            .and_then(|n| self.string(n, &format!("{path}/actor_id")));
        let actor_type = self.required(map, path, "actor_type").and_then(|n| {
            self.token(
                n,
                &format!("{path}/actor_type"),
                Some(FieldKind::ActorType),
                ActorType::from_token,
                ActorType::tokens,
            )
        });
        let behavior = self.required(map, path, "behavior").and_then(|n| {
            self.token(
                n,
                &format!("{path}/behavior"),
                Some(FieldKind::Behavior),
                Behavior::from_token,
                Behavior::tokens,
            )
        });
        let mut ok = true;
        let speed_mps = match get(map, "speed_mps").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.speed(n, &format!("{path}/speed_mps"), MAX_SPEED_MPS);
                ok &= v.is_some();
                v
            }
        };
        let model_id = match get(map, "model_id").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.string(n, &format!("{path}/model_id"));
                ok &= v.is_some();
                v
            }
        };
        let position = match (get(map, "position").filter(|n| !n.is_null()), is_ego) {
            (Some(_), true) => {
                self.issue(
                    &format!("{path}/position"),
                    IssueKind::Inconsistent,
                    "the ego is the reference frame and takes no position",
                );
                ok = false;
                None
            }
            (None, true) => None,
            (None, false) => {
                self.issue(
                    &format!("{path}/position"),
                    IssueKind::MissingSection,
                    "NPCs need a position",
                );
                ok = false;
                None
            }
            (Some(n), false) => {
                let v = self.position(n, &format!("{path}/position"));
                ok &= v.is_some();
                v
            }
        };
        if !ok {
            return None;
        }
        Some(ActorSpec {
            actor_id: actor_id?,
            actor_type: actor_type?,
            behavior: behavior?,
            speed_mps,
            position,
            model_id,
        })
    }

    fn position(&mut self, node: &Node, path: &str) -> Option<PositionSpec> {
        let map = self.map_at(node, path)?;
        self.check_keys(
            path,
            map,
            &["reference", "spatial_relation", "heading_relation"],
        );
        let reference = match get(map, "reference").filter(|n| !n.is_null()) {
            None => Some("ego".to_string()),
            Some(n) => self.string(n, &format!("{path}/reference")),
        };
        let spatial = self.required(map, path, "spatial_relation").and_then(|n| {
            self.token(
                n,
                &format!("{path}/spatial_relation"),
                Some(FieldKind::Spatial),
                SpatialRelation::from_token,
                SpatialRelation::tokens,
            )
        });
        let mut ok = true;
        let heading = match get(map, "heading_relation").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.token(
                    n,
                    &format!("{path}/heading_relation"),
                    Some(FieldKind::Heading),
                    HeadingRelation::from_token,
                    HeadingRelation::tokens,
                );
                ok &= v.is_some();
                v
            }
        };
        if !ok {
            return None;
        }
        Some(PositionSpec {
            reference: reference?,
            spatial_relation: spatial?,
            heading_relation: heading,
        })
    }

    fn actors(&mut self, node: &Node) -> Option<ActorSet> {
        let path = "/actors";
        let map = self.map_at(node, path)?;
        self.check_keys(path, map, &["ego", "npcs"]);
        let ego = self
            .required(map, path, "ego")
            .and_then(|n| self.actor(n, "/actors/ego", true));
        let mut npcs = Vec::new();
        let mut ok = true;
        match get(map, "npcs").filter(|n| !n.is_null()) {
            None => {}
            Some(Node::Seq(items)) => {
                if items.len() > MAX_NPCS {
                    self.issue(
                        "/actors/npcs",
                        IssueKind::RangeViolation,
                        format!("{} NPCs, at most {MAX_NPCS} supported", items.len()),
                    );
                    ok = false;
                }
                for (i, item) in items.iter().enumerate() {
                    match self.actor(item, &format!("/actors/npcs/{i}"), false) {
                        Some(a) => npcs.push(a),
                        None => ok = false,
                    }
                }
            }
            Some(other) => {
                self.issue(
                    "/actors/npcs",
                    IssueKind::Inconsistent,
                    format!("expected a sequence, found a {}", other.describe()),
                );
                ok = false;
            }
        }
        if !ok {
            return None;
        }
        Some(ActorSet { ego: ego?, npcs })
    }

    fn oracle_entry(&mut self, node: &Node, path: &str) -> Option<OracleEntry> {
        let map = self.map_at(node, path)?;
        let mut rule: Option<(u32, String)> = None;
        let mut saw_rule_key = false;
        let mut ok = true;
        for (k, v) in map {
            if let Some(code) = k.strip_prefix("CVC_") {
                if saw_rule_key {
                    self.issue(
                        &format!("{path}/rule_id"),
                        IssueKind::Inconsistent,
                        "one `CVC_<code>` key per oracle entry",
                    );
                    ok = false;
                    continue;
                }
                saw_rule_key = true;
                let code = code.parse::<u32>().ok().filter(|c| registry::is_supported(*c));
                let vt = self.string(v, &format!("{path}/violation_type"));
                match code {
                    None => {
                        self.issues.push(ValidationIssue::invalid_enum(
                            format!("{path}/rule_id"),
                            k,
                            registry::rule_tokens(),
                        ));
                        ok = false;
                    }
                    Some(c) => match vt {
                        Some(vt) => rule = Some((c, vt)),
                        None => ok = false,
                    },
                }
            } else if k != "description" && k != "violating_actor" {
                self.issue(
                    &format!("{path}/{k}"),
                    IssueKind::UnknownField,
                    format!("unknown field `{k}`"),
                );
            }
        }
        if !saw_rule_key {
            self.issue(
                &format!("{path}/rule_id"),
                IssueKind::MissingSection,
                "expected a `CVC_<code>: <violation_type>` key",
            );
        }
        let description = self
            .required(map, path, "description")
            .and_then(|n| self.string(n, &format!("{path}/description")));
        let violating_actor = match get(map, "violating_actor").filter(|n| !n.is_null()) {
            None => None,
            Some(n) => {
                let v = self.string(n, &format!("{path}/violating_actor"));
                ok &= v.is_some();
                v
            }
        };
        if !ok {
            return None;
        }
        let (rule_id, violation_type) = rule?;
        Some(OracleEntry {
            rule_id,
            violation_type,
            description: description?,
            violating_actor,
        })
    }

    fn oracle(&mut self, node: &Node) -> Option<Vec<OracleEntry>> {
        let Node::Seq(items) = node else {
            self.issue(
                "/oracle",
                IssueKind::Inconsistent,
                format!("expected a sequence, found a {}", node.describe()),
            );
            return None;
        };
        if items.is_empty() {
            self.issue("/oracle", IssueKind::MissingSection, "at least one oracle entry is required");
            return None;
        }
        let mut out = Vec::new();
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.oracle_entry(item, &format!("/oracle/{i}")) {
                Some(e) => out.push(e),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }
}

pub(crate) fn parse_with(
    source: &str,
    resolver: Option<&dyn TokenResolver>,
) -> Result<Parsed, Vec<ValidationIssue>> {
    let root = parse_tree(source).map_err(|msg| {
        vec![ValidationIssue::new("/", IssueKind::Inconsistent, msg)]
    })?;
    let mut w = Walker {
        issues: Vec::new(),
        resolver,
        normalized: Vec::new(),
    };
    let Some(map) = entries(&root) else {
        return Err(vec![ValidationIssue::new(
            "/",
            IssueKind::Inconsistent,
            format!("expected a mapping at the top level, found a {}", root.describe()),
        )]);
    };
    w.check_keys(
        "",
        map,
        &["scenario_id", "environment", "road_network", "actors", "oracle"],
    );
    let scenario_id = match get(map, "scenario_id") {
        None => Some("unnamed".to_string()),
        Some(n) => w.string(n, "/scenario_id"),
    };
    let environment = w.required(map, "", "environment").and_then(|n| w.environment(n));
    let road_network = w.required(map, "", "road_network").and_then(|n| w.road_network(n));
    let actors = w.required(map, "", "actors").and_then(|n| w.actors(n));
    let oracle = w.required(map, "", "oracle").and_then(|n| w.oracle(n));

    if !w.issues.is_empty() {
        sort_issues(&mut w.issues);
        return Err(w.issues);
    }
    let spec = ScenarioSpec {
        scenario_id: scenario_id.expect("no issues implies a value"),
        environment: environment.expect("no issues implies a value"),
        road_network: road_network.expect("no issues implies a value"),
        actors: actors.expect("no issues implies a value"),
        oracle: oracle.expect("no issues implies a value"),
    };
    w.normalized.sort();
    Ok(Parsed {
        spec,
        normalized_paths: w.normalized,
    })
}

/// Parses a DSL document in strict mode.
///
/// On failure every detected issue is returned, sorted by path. Cross-field
/// consistency (junction ways, sign/limit pairing, references) is checked by
/// [`super::validate_spec`], not here.
pub fn parse_dsl(source: &str) -> Result<ScenarioSpec, Vec<ValidationIssue>> {
    parse_with(source, None).map(|p| p.spec)
}
