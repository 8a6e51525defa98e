//! Scenic program rendering through the master template.

use minijinja::syntax::SyntaxConfig;
use minijinja::value::{Serde, Value};
use minijinja::Environment;
use serde::Serialize;

use super::{Role, ScenarioTemplate, MIN_CURVE_DEG};
use crate::digest::{fmt_sig, fnv64, hex64};
use crate::dsl::{ActorType, Behavior};
use crate::sim::LANE_WIDTH_M;

const MASTER: &str = include_str!("../../templates/master.scenic.j2");
const DIGEST_PREFIX: &str = "# content_digest: ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenicProgram {
    pub source_text: String,
    /// FNV-1a 64 of the program body (everything after the header comment).
    pub content_digest: u64,
}

impl ScenicProgram {
    pub fn body(&self) -> &str {
        split_header(&self.source_text).1
    }

    /// True when the header digest and `content_digest` both match the body.
    pub fn verify(&self) -> bool {
        let (header, body) = split_header(&self.source_text);
        let stated = header
            .lines()
            .find_map(|l| l.strip_prefix(DIGEST_PREFIX))
            .and_then(|h| u64::from_str_radix(h.trim(), 16).ok());
        let actual = fnv64(body.as_bytes());
        stated == Some(actual) && actual == self.content_digest
    }
}

fn split_header(text: &str) -> (&str, &str) {
    let mut end = 0;
    for line in text.split_inclusive('\n') {
        if line.starts_with("# ") {
            end += line.len();
        } else {
            break;
        }
    }
    text.split_at(end)
}

#[derive(Serialize)]
struct RangeCtx {
    name: String,
    low: String,
    high: String,
}

#[derive(Serialize)]
struct ActorCtx {
    id: String,
    #[serde(rename = "const")]
    constant: String,
    class: &'static str,
    model: String,
    behavior: &'static str,
    maneuver: &'static str,
    offset_sign: &'static str,
    placement: &'static str,
    reference: String,
    offset: String,
    speed: String,
}

#[derive(Serialize)]
struct OracleCtx {
    rule: String,
    violation_type: String,
    actor: String,
    description: String,
}

#[derive(Serialize)]
struct Ctx {
    town: &'static str,
    weather: String,
    time_hour: u32,
    topology: &'static str,
    configuration: &'static str,
    approach: &'static str,
    lanes: u32,
    ways: u32,
    lane_width: String,
    min_curve_rad: String,
    marker: &'static str,
    signs: Vec<&'static str>,
    speed_limit: String,
    ranges: Vec<RangeCtx>,
    ego: ActorCtx,
    adversary: Option<ActorCtx>,
    npcs: Vec<ActorCtx>,
    background: Vec<ActorCtx>,
    oracle: Vec<OracleCtx>,
}

fn maneuver(b: Behavior) -> &'static str {
    match b {
        Behavior::TurnLeft => "LEFT_TURN",
        Behavior::TurnRight => "RIGHT_TURN",
        _ => "STRAIGHT",
    }
}

fn actor_ctx(t: &ScenarioTemplate, a: &super::TemplateActor, index: usize) -> ActorCtx {
    use crate::dsl::SpatialRelation as S;
    let spatial = a.spatial_relation.unwrap_or(S::Front);
    let placement = match spatial {
        S::Front => "ahead of",
        S::Behind => "behind",
        S::Left => "left of",
        S::Right => "right of",
    };
    let offset = match spatial {
        S::Front | S::Behind => fmt_sig(25.0 * index as f64, 6),
        S::Left | S::Right => fmt_sig(LANE_WIDTH_M, 6),
    };
    let behind = a.spatial_relation == Some(S::Behind);
    ActorCtx {
        id: a.actor_id.clone(),
        constant: a
            .actor_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_uppercase() } else { '_' })
            .collect(),
        class: match a.actor_type {
            ActorType::Car => "Car",
            ActorType::Truck => "Truck",
        },
        model: a.model_id.clone(),
        behavior: a.behavior.as_str(),
        maneuver: maneuver(a.behavior),
        offset_sign: if behind { "-" } else { "" },
        placement,
        reference: a.reference.clone().unwrap_or_else(|| t.params.ego().actor_id.clone()),
        offset,
        speed: fmt_sig(a.base_speed, 6),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn context(t: &ScenarioTemplate) -> Ctx {
    let p = &t.params;
    let ego = actor_ctx(t, p.ego(), 0);
    let npcs: Vec<ActorCtx> = p.actors[1..]
        .iter()
        .enumerate()
        .map(|(i, a)| actor_ctx(t, a, i + 1))
        .collect();
    let adversary = p
        .actors
        .iter()
        .enumerate()
        .find(|(_, a)| a.role == Role::Adversary)
        .map(|(i, a)| actor_ctx(t, a, i));
    let background = p
        .actors
        .iter()
        .enumerate()
        .filter(|(_, a)| a.role == Role::Background)
        .map(|(i, a)| actor_ctx(t, a, i))
        .collect();
    Ctx {
        town: p.town.as_str(),
        weather: p.weather_preset.clone(),
        time_hour: p.time_hour,
        topology: p.topology.as_str(),
        configuration: p.configuration.as_str(),
        approach: p.approach.map(|a| a.as_str()).unwrap_or("none"),
        lanes: p.lanes,
        ways: p.ways,
        lane_width: fmt_sig(LANE_WIDTH_M, 6),
        min_curve_rad: fmt_sig(MIN_CURVE_DEG.to_radians(), 6),
        marker: p.marker.as_str(),
        signs: p.signs.iter().map(|s| s.as_str()).collect(),
        speed_limit: fmt_sig(p.speed_limit, 6),
        ranges: t
            .free_parameters
            .iter()
            .map(|r| RangeCtx {
                name: r.name.clone(),
                low: fmt_sig(r.low, 6),
                high: fmt_sig(r.high, 6),
            })
            .collect(),
        ego,
        adversary,
        npcs,
        background,
        oracle: p
            .oracle
            .iter()
            .map(|o| OracleCtx {
                rule: o.rule_token(),
                violation_type: one_line(&o.violation_type),
                actor: o.violating_actor.clone().unwrap_or_default(),
                description: one_line(&o.description),
            })
            .collect(),
    }
}

fn environment() -> Environment<'static> {
    let mut env = Environment::new();
    env.set_syntax(
        SyntaxConfig::builder()
            .trim_blocks(true)
            .lstrip_blocks(true)
            .keep_trailing_newline(true)
            .build()
            .expect("static syntax config"),
    );
    env.add_template("master.scenic", MASTER)
        .expect("master template compiles");
    env
}

/// Expands the master template for `template`. Equal templates give
/// byte-identical programs.
pub fn render_scenic(template: &ScenarioTemplate) -> ScenicProgram {
    thread_local! {
        static ENV: Environment<'static> = environment();
    }
    let ctx = Value::from(Serde(&context(template)));
    let body = ENV.with(|env| {
        env.get_template("master.scenic")
            .and_then(|t| t.render(ctx))
            .expect("master template renders for every valid template")
    });
    let body = tidy(&body);
    let digest = fnv64(body.as_bytes());
    let header = format!(
        "# scenario_id: {}\n{DIGEST_PREFIX}{}\n# configuration: {}\n",
        one_line(template.scenario_id()),
        hex64(digest),
        template.params.configuration,
    );
    ScenicProgram {
        source_text: header + &body,
        content_digest: digest,
    }
}

/// Drops trailing whitespace and collapses runs of blank lines.
fn tidy(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut blank = false;
    for line in text.lines() {
        let line = line.trim_end();
        if line.is_empty() {
            if !blank && !out.is_empty() {
                out.push('\n');
            }
            blank = true;
            continue;
        }
        blank = false;
        out.push_str(line);
        out.push('\n');
    }
    while out.ends_with("\n\n") {
        out.pop();
    }
    out
}

/// Every `name = VerifaiRange(low, high)` binding in a program, in order.
pub fn parse_back(text: &str) -> Vec<(String, f64, f64)> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some((lhs, rhs)) = line.split_once('=') else {
            continue;
        };
        let Some(args) = rhs
            .trim()
            .strip_prefix("VerifaiRange(")
            .and_then(|r| r.strip_suffix(')'))
        else {
            continue;
        };
        let Some((lo, hi)) = args.split_once(',') else {
            continue;
        };
        if let (Ok(lo), Ok(hi)) = (lo.trim().parse(), hi.trim().parse()) {
            out.push((lhs.trim().to_string(), lo, hi));
        }
    }
    out
}
