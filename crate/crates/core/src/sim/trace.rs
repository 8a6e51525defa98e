//! Simulation traces and their JSON Lines form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::geometry::SignalColor;
use crate::digest::quantize6;
use crate::dsl::ActorType;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorState {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    /// Lane id, `junction` or `offroad`.
    pub lane: String,
    /// Signed offset from the lane centre, left of the road reference positive.
    pub lat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalState {
    pub approach: String,
    pub state: SignalColor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub actors: Vec<ActorState>,
    pub signals: Vec<SignalState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorMeta {
    pub id: String,
    #[serde(rename = "type")]
    pub actor_type: ActorType,
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario_id: String,
    pub instance_seed: u64,
    pub timestep_s: f64,
    pub horizon_s: f64,
    pub geometry_ref: u64,
    pub actors: Vec<ActorMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub meta: TraceMeta,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: TraceMeta,
}

impl Trace {
    pub fn timestep(&self) -> f64 {
        self.meta.timestep_s
    }

    pub fn actor_index(&self, id: &str) -> Option<usize> {
        self.meta.actors.iter().position(|a| a.id == id)
    }

    pub fn end_time(&self) -> f64 {
        self.frames.last().map_or(0.0, |f| f.t)
    }

    /// Copy with every float rounded to 6 significant digits, the precision
    /// of the serialized form.
    pub fn quantized(&self) -> Trace {
        let mut t = self.clone();
        for f in &mut t.frames {
            f.t = quantize6(f.t);
            for a in &mut f.actors {
                a.x = quantize6(a.x);
                a.y = quantize6(a.y);
                a.heading = quantize6(a.heading);
                a.speed = quantize6(a.speed);
                a.lat = quantize6(a.lat);
            }
        }
        t
    }

    pub fn to_jsonl(&self) -> String {
        let q = self.quantized();
        let mut out = serde_json::to_string(&MetaLine {
            meta: q.meta.clone(),
        })
        .expect("meta serializes");
        out.push('\n');
        for f in &q.frames {
            out.push_str(&serde_json::to_string(f).expect("frame serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, TraceError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceError::Empty)?;
        let meta: MetaLine =
            serde_json::from_str(first).map_err(|source| TraceError::Json { line: 1, source })?;
        let frames = lines
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|source| TraceError::Json { line: i + 1, source })
            })
            .collect::<Result<Vec<Frame>, _>>()?;
        Ok(Trace {
            meta: meta.meta,
            frames,
        })
    }
}
