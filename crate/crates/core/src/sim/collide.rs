//! Oriented-rectangle footprints and separating-axis overlap.

use serde::{Deserialize, Serialize};

use super::trace::Trace;
use crate::dsl::ActorType;

/// (length, width) in metres.
pub fn footprint(actor_type: ActorType) -> (f64, f64) {
    match actor_type {
        ActorType::Car => (4.5, 2.0),
        ActorType::Truck => (8.0, 2.5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub length: f64,
    pub width: f64,
}

impl Obb {
    fn axes(&self) -> [(f64, f64); 2] {
        let (c, s) = (self.heading.cos(), self.heading.sin());
        [(c, s), (-s, c)]
    }

    /// Corners counter-clockwise from front-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].map(|(a, b)| {
            (
                self.x + a * hl * ux + b * hw * vx,
                self.y + a * hl * uy + b * hw * vy,
            )
        })
    }

    pub fn front(&self) -> (f64, f64) {
        let hl = self.length / 2.0;
        (self.x + hl * self.heading.cos(), self.y + hl * self.heading.sin())
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (dx, dy) = (px - self.x, py - self.y);
        (dx * ux + dy * uy).abs() <= self.length / 2.0
            && (dx * vx + dy * vy).abs() <= self.width / 2.0
    }

    fn radius_on(&self, ax: f64, ay: f64) -> f64 {
        let [(ux, uy), (vx, vy)] = self.axes();
        self.length / 2.0 * (ux * ax + uy * ay).abs() + self.width / 2.0 * (vx * ax + vy * ay).abs()
    }

    /// Separating-axis test; touching boxes count as overlapping.
    pub fn overlaps(&self, other: &Obb) -> bool {
        let (dx, dy) = (other.x - self.x, other.y - self.y);
        for (ax, ay) in self.axes().into_iter().chain(other.axes()) {
            let dist = (dx * ax + dy * ay).abs();
            if dist > self.radius_on(ax, ay) + other.radius_on(ax, ay) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub actors: (String, String),
}

/// First overlapping frame of every actor pair, ordered by time then pair.
pub fn detect_collisions(trace: &Trace) -> Vec<CollisionEvent> {
    let dims: Vec<(f64, f64)> = trace
        .meta
        .actors
        .iter()
        .map(|a| (a.length, a.width))
        .collect();
    let n = dims.len();
    let mut seen = vec![false; n * n];
    let mut out = Vec::new();
    for frame in &trace.frames {
        let boxes: Vec<Obb> = frame
            .actors
            .iter()
            .zip(&dims)
            .map(|(a, &(length, width))| Obb {
                x: a.x,
                y: a.y,
                heading: a.heading,
                length,
                width,
            })
            .collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if !seen[i * n + j] && boxes[i].overlaps(&boxes[j]) {
                    seen[i * n + j] = true;
                    out.push(CollisionEvent {
                        t: frame.t,
                        actors: (frame.actors[i].id.clone(), frame.actors[j].id.clone()),
                    });
                }
            }
        }
    }
    out
}
