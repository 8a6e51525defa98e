//! Extraction and validation prompt bundles. Wording lives in `prompts/`.

use std::sync::OnceLock;

use minijinja::{context, Environment};
use serde::{Deserialize, Serialize};

use super::CrashReport;
use crate::dsl::{
    serialize_dsl, ActorType, Behavior, HeadingRelation, RoadMarker, RoadType, ScenarioSpec,
    SpatialRelation, TimeOfDay, TrafficSign, Weather,
};
use crate::monitor::registry::rule_tokens;

const SCHEMA: &str = include_str!("../../prompts/schema.txt");
const EXTRACTION_SYSTEM: &str = include_str!("../../prompts/extraction_system.j2");
const VALIDATION_SYSTEM: &str = include_str!("../../prompts/validation_system.j2");
const EXEMPLARS: &str = include_str!("../../prompts/exemplars.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Part {
    Text(String),
    Image { media_type: String, data: Vec<u8> },
}

impl Part {
    pub fn text(&self) -> Option<&str> {
        match self {
            Part::Text(t) => Some(t),
            Part::Image { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<Part>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        Self {
            role,
            parts: vec![Part::Text(text.into())],
        }
    }
}

/// A crash description paired with its correct DSL document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub report: String,
    pub dsl: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_parts: Vec<Part>,
    pub exemplars: Vec<Exemplar>,
}

impl PromptBundle {
    /// System turn, one user/assistant turn pair per exemplar, then the
    /// report turn.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut out = vec![ChatMessage::text(Role::System, &self.system_text)];
        for e in &self.exemplars {
            out.push(ChatMessage::text(Role::User, format!("Crash summary:\n{}", e.report)));
            out.push(ChatMessage::text(Role::Assistant, &e.dsl));
        }
        out.push(ChatMessage {
            role: Role::User,
            parts: self.user_parts.clone(),
        });
        out
    }

    pub fn image_count(&self) -> usize {
        self.user_parts
            .iter()
            .filter(|p| matches!(p, Part::Image { .. }))
            .count()
    }
}

/// One draft value put to the model for confirmation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCheck {
    pub path: String,
    pub value: String,
}

impl FieldCheck {
    fn new(path: impl Into<String>, value: impl ToString) -> Self {
        Self {
            path: path.into(),
            value: value.to_string(),
        }
    }

    pub fn line(&self) -> String {
        format!("- check {} = {}", self.path, self.value)
    }
}

pub fn exemplars() -> &'static [Exemplar] {
    static CELL: OnceLock<Vec<Exemplar>> = OnceLock::new();
    CELL.get_or_init(|| serde_json::from_str(EXEMPLARS).expect("shipped exemplars parse"))
}

fn vocabulary() -> Vec<(&'static str, Vec<String>)> {
    vec![
        ("weather", Weather::tokens()),
        ("time_of_day", TimeOfDay::tokens()),
        ("road_type", RoadType::tokens()),
        ("road_markers", RoadMarker::tokens()),
        ("traffic_signs", TrafficSign::tokens()),
        ("actor_type", ActorType::tokens()),
        ("behavior", Behavior::tokens()),
        ("spatial_relation", SpatialRelation::tokens()),
        ("heading_relation", HeadingRelation::tokens()),
    ]
}

fn render(template: &str) -> String {
    Environment::new()
        .render_str(
            template,
            context! { schema => SCHEMA, vocabulary => vocabulary(), rules => rule_tokens() },
        )
        .expect("shipped prompt template renders")
}

fn report_parts(report: &CrashReport) -> Vec<Part> {
    let mut parts = vec![Part::Text(format!("Crash summary:\n{}", report.summary_text.trim()))];
    if let Some(s) = &report.sketch {
        parts.push(Part::Image {
            media_type: s.media_type.clone(),
            data: s.bytes.clone(),
        });
    }
    let rules = if report.rule_context.is_empty() {
        "Relevant regulations: none provided.".to_string()
    } else {
        let mut t = String::from("Relevant regulations:");
        for r in &report.rule_context {
            t.push_str("\n- ");
            t.push_str(r.trim());
        }
        t
    };
    parts.push(Part::Text(rules));
    parts
}

pub fn build_extraction_prompt(report: &CrashReport) -> PromptBundle {
    PromptBundle {
        system_text: render(EXTRACTION_SYSTEM),
        user_parts: report_parts(report),
        exemplars: exemplars().to_vec(),
    }
}

/// Every value present in the draft, in document order.
pub fn field_checks(draft: &ScenarioSpec) -> Vec<FieldCheck> {
    let mut out = vec![
        FieldCheck::new("/environment/weather", draft.environment.weather),
        FieldCheck::new("/environment/time_of_day", draft.environment.time_of_day),
    ];
    let r = &draft.road_network;
    out.push(FieldCheck::new("/road_network/road_type", r.road_type));
    out.push(FieldCheck::new("/road_network/number_of_ways", r.number_of_ways));
    out.push(FieldCheck::new("/road_network/number_of_lanes", r.number_of_lanes));
    if let Some(m) = r.road_markers {
        out.push(FieldCheck::new("/road_network/road_markers", m));
    }
    if !r.traffic_signs.is_empty() {
        let signs: Vec<&str> = r.traffic_signs.iter().map(|s| s.as_str()).collect();
        out.push(FieldCheck::new("/road_network/traffic_signs", format!("[{}]", signs.join(", "))));
    }
    if let Some(v) = r.speed_limit_value {
        out.push(FieldCheck::new("/road_network/speed_limit_value", v));
    }
    let actors = std::iter::once(("/actors/ego".to_string(), &draft.actors.ego)).chain(
        draft
            .actors
            .npcs
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("/actors/npcs/{i}"), a)),
    );
    for (base, a) in actors {
        out.push(FieldCheck::new(format!("{base}/actor_type"), a.actor_type));
        out.push(FieldCheck::new(format!("{base}/behavior"), a.behavior));
        if let Some(v) = a.speed_mps {
            out.push(FieldCheck::new(format!("{base}/speed_mps"), v));
        }
        if let Some(m) = &a.model_id {
            out.push(FieldCheck::new(format!("{base}/model_id"), m));
        }
        if let Some(p) = &a.position {
            out.push(FieldCheck::new(format!("{base}/position/reference"), &p.reference));
            out.push(FieldCheck::new(
                format!("{base}/position/spatial_relation"),
                p.spatial_relation,
            ));
            if let Some(h) = p.heading_relation {
                out.push(FieldCheck::new(format!("{base}/position/heading_relation"), h));
            }
        }
    }
    for (i, e) in draft.oracle.iter().enumerate() {
        out.push(FieldCheck::new(
            format!("/oracle/{i}/{}", e.rule_token()),
            &e.violation_type,
        ));
        if let Some(v) = &e.violating_actor {
            out.push(FieldCheck::new(format!("/oracle/{i}/violating_actor"), v));
        }
    }
    out
}

pub fn build_validation_prompt(draft: &ScenarioSpec, report: &CrashReport) -> PromptBundle {
    let mut parts = report_parts(report);
    parts.push(Part::Text(format!("Draft document:\n{}", serialize_dsl(draft))));
    let mut checks = String::from("Field checks (confirm or revise each against the evidence):");
    for c in field_checks(draft) {
        checks.push('\n');
        checks.push_str(&c.line());
    }
    parts.push(Part::Text(checks));
    PromptBundle {
        system_text: render(VALIDATION_SYSTEM),
        user_parts: parts,
        exemplars: Vec::new(),
    }
}
