//! Parametric realization of the symbolic towns.
//!
//! Straight and curved roads are single two-way roads whose reference line
//! runs in the ego's direction; forward lanes sit at negative (right-hand)
//! lateral offsets. Junctions are orthogonal legs meeting a square conflict
//! region centred at the origin; each leg's reference line points inbound.

use serde::{Deserialize, Serialize};

use super::path::{Pose, RefPath};
use super::LANE_WIDTH_M;
use crate::digest::fnv64;
use crate::dsl::{RoadMarker, RoadType, TrafficSign};
use crate::synth::{Approach, Configuration, ScenarioTemplate, TemplateActor, Town};

pub const STRAIGHT_LENGTH_M: f64 = 300.0;
pub const CURVE_RADIUS_M: f64 = 150.0;
pub const CURVE_SWEEP_DEG: f64 = 60.0;
pub const CURVE_LEAD_M: f64 = 75.0;
pub const LEG_LENGTH_M: f64 = 150.0;
/// Stop lines sit this far before the conflict region.
pub const STOP_LINE_SETBACK_M: f64 = 1.0;
pub const SIGNAL_CYCLE_S: f64 = 30.0;
pub const SIGNAL_GREEN_S: f64 = 12.0;
pub const SIGNAL_YELLOW_S: f64 = 3.0;
/// Phase offset of the cross street, red while the main street is green.
pub const CROSS_OFFSET_S: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leg {
    West,
    East,
    North,
    South,
}

impl Leg {
    pub const ALL: [Leg; 4] = [Leg::West, Leg::East, Leg::North, Leg::South];

    pub fn as_str(self) -> &'static str {
        match self {
            Leg::West => "west",
            Leg::East => "east",
            Leg::North => "north",
            Leg::South => "south",
        }
    }

    /// Unit vector of inbound travel.
    pub fn inbound(self) -> (f64, f64) {
        match self {
            Leg::West => (1.0, 0.0),
            Leg::East => (-1.0, 0.0),
            Leg::North => (0.0, -1.0),
            Leg::South => (0.0, 1.0),
        }
    }

    pub fn inbound_heading(self) -> f64 {
        let (x, y) = self.inbound();
        y.atan2(x)
    }

    /// The leg whose outbound direction is `heading`.
    pub fn leaving_towards(heading: f64) -> Leg {
        let (c, s) = (heading.cos(), heading.sin());
        *Leg::ALL
            .iter()
            .max_by(|a, b| {
                let da = -(a.inbound().0 * c + a.inbound().1 * s);
                let db = -(b.inbound().0 * c + b.inbound().1 * s);
                da.total_cmp(&db)
            })
            .expect("four legs")
    }

    pub fn opposite(self) -> Leg {
        match self {
            Leg::West => Leg::East,
            Leg::East => Leg::West,
            Leg::North => Leg::South,
            Leg::South => Leg::North,
        }
    }

    /// True when traffic from `other` arrives from the right of traffic on `self`.
    pub fn has_on_right(self, other: Leg) -> bool {
        let (dx, dy) = self.inbound();
        let (ox, oy) = other.inbound();
        // other's inbound direction is self's rotated +90 degrees.
        ((-dy) - ox).abs() < 1e-12 && (dx - oy).abs() < 1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalColor {
    Green,
    Yellow,
    Red,
}

impl SignalColor {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalColor::Green => "green",
            SignalColor::Yellow => "yellow",
            SignalColor::Red => "red",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSchedule {
    pub cycle_s: f64,
    pub green_s: f64,
    pub yellow_s: f64,
    pub offset_s: f64,
}

impl SignalSchedule {
    pub fn state(&self, t: f64) -> SignalColor {
        let tau = (t - self.offset_s).rem_euclid(self.cycle_s);
        if tau < self.green_s {
            SignalColor::Green
        } else if tau < self.green_s + self.yellow_s {
            SignalColor::Yellow
        } else {
            SignalColor::Red
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalHead {
    pub approach: Leg,
    pub schedule: SignalSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub id: String,
    pub path: RefPath,
    /// Lanes travelling along the reference direction.
    pub lanes_forward: u32,
    pub lanes_backward: u32,
    pub leg: Option<Leg>,
}

impl Road {
    /// Lateral offset of the centre of a lane.
    pub fn lane_offset(&self, forward: bool, index: u32) -> f64 {
        let c = (index as f64 + 0.5) * LANE_WIDTH_M;
        if forward {
            -c
        } else {
            c
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub road: usize,
    pub forward: bool,
    pub index: u32,
    pub offset: f64,
    pub width: f64,
    pub marker: RoadMarker,
    pub centerline: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopLine {
    pub approach: Leg,
    pub road: usize,
    /// Station on the leg's reference line.
    pub station: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Where a point lies on the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Place {
    Lane {
        road: usize,
        lane: usize,
        station: f64,
        /// Lateral offset from the road reference line, left positive.
        lateral: f64,
    },
    Junction,
    Offroad,
}

/// The scripted cast, carried so that a geometry is self-contained input
/// for simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    pub configuration: Configuration,
    pub approach: Option<Approach>,
    pub cast: Vec<TemplateActor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadGeometry {
    pub town: Town,
    pub topology: RoadType,
    pub marker: RoadMarker,
    pub lane_width: f64,
    pub roads: Vec<Road>,
    pub lanes: Vec<Lane>,
    pub stop_lines: Vec<StopLine>,
    pub stop_controlled: Vec<Leg>,
    pub signal_heads: Vec<SignalHead>,
    pub conflict_region: Option<Vec<[f64; 2]>>,
    pub speed_limit: f64,
    pub template_digest: u64,
    pub script: Script,
    /// FNV-1a 64 of the canonical JSON with this field zeroed.
    pub geometry_ref: u64,
}

impl RoadGeometry {
    pub fn is_junction(&self) -> bool {
        self.conflict_region.is_some()
    }

    pub fn approaches(&self) -> Vec<Leg> {
        self.roads.iter().filter_map(|r| r.leg).collect()
    }

    pub fn road_of_leg(&self, leg: Leg) -> Option<usize> {
        self.roads.iter().position(|r| r.leg == Some(leg))
    }

    pub fn lane_index(&self, road: usize, forward: bool, index: u32) -> Option<usize> {
        self.lanes
            .iter()
            .position(|l| l.road == road && l.forward == forward && l.index == index)
    }

    /// Two-way roads with a single lane per direction use the lower
    /// prima facie maximum.
    pub fn two_way_single_lane(&self) -> bool {
        self.roads.iter().all(|r| r.lanes_forward <= 1)
    }

    pub fn signal_for(&self, leg: Leg) -> Option<&SignalHead> {
        self.signal_heads.iter().find(|h| h.approach == leg)
    }

    pub fn stop_line_for(&self, leg: Leg) -> Option<&StopLine> {
        self.stop_lines.iter().find(|s| s.approach == leg)
    }

    pub fn in_region(&self, x: f64, y: f64) -> bool {
        match &self.conflict_region {
            Some(poly) => polygon_contains(poly, x, y),
            None => false,
        }
    }

    /// Distance from a point to the conflict region (0 inside).
    pub fn region_distance(&self, x: f64, y: f64) -> Option<f64> {
        let poly = self.conflict_region.as_ref()?;
        if polygon_contains(poly, x, y) {
            return Some(0.0);
        }
        let n = poly.len();
        let d = (0..n)
            .map(|i| segment_distance(poly[i], poly[(i + 1) % n], x, y))
            .fold(f64::INFINITY, f64::min);
        Some(d)
    }

    pub fn locate(&self, x: f64, y: f64) -> Place {
        if self.in_region(x, y) {
            return Place::Junction;
        }
        let w = self.lane_width;
        let mut best: Option<(f64, usize, f64, f64)> = None;
        for (i, road) in self.roads.iter().enumerate() {
            let (s, l) = road.path.project(x, y);
            let inside = s >= 0.0
                && s <= road.path.length()
                && l >= -(road.lanes_forward as f64) * w
                && l <= road.lanes_backward as f64 * w;
            if inside && best.is_none_or(|b| l.abs() < b.0) {
                best = Some((l.abs(), i, s, l));
            }
        }
        let Some((_, road, station, lateral)) = best else {
            return Place::Offroad;
        };
        let r = &self.roads[road];
        let (forward, index) = if lateral < 0.0 {
            (true, ((-lateral / w) as u32).min(r.lanes_forward - 1))
        } else {
            (false, ((lateral / w) as u32).min(r.lanes_backward.max(1) - 1))
        };
        match self.lane_index(road, forward, index) {
            Some(lane) => Place::Lane {
                road,
                lane,
                station,
                lateral,
            },
            None => Place::Offroad,
        }
    }

    /// Canonical JSON, sorted keys.
    pub fn to_canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("geometry serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    fn seal(mut self) -> Self {
        self.geometry_ref = 0;
        self.geometry_ref = fnv64(self.to_canonical_json().as_bytes());
        self
    }
}

fn polygon_contains(poly: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let [ax, ay] = poly[i];
        let [bx, by] = poly[(i + 1) % n];
        let c = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        if c.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

fn segment_distance(a: [f64; 2], b: [f64; 2], x: f64, y: f64) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((x - a[0]) * dx + (y - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    (x - a[0] - t * dx).hypot(y - a[1] - t * dy)
}

/// Half-size of the square conflict region for `lanes` per direction.
pub fn region_half(lanes: u32) -> f64 {
    lanes as f64 * LANE_WIDTH_M
}

/// Legs present for a topology; a T keeps the stem on the adversary's side.
pub fn junction_legs(topology: RoadType, approach: Option<Approach>) -> Vec<Leg> {
    match topology {
        RoadType::TIntersection => {
            let stem = match approach {
                Some(Approach::Left) => Leg::North,
                _ => Leg::South,
            };
            vec![Leg::West, Leg::East, stem]
        }
        _ => Leg::ALL.to_vec(),
    }
}

/// Leg the adversary arrives on.
pub fn adversary_leg(approach: Option<Approach>) -> Leg {
    match approach {
        Some(Approach::Left) => Leg::North,
        Some(Approach::Opposite) => Leg::East,
        _ => Leg::South,
    }
}

fn leg_road(leg: Leg, half: f64, lanes: u32) -> Road {
    let (dx, dy) = leg.inbound();
    let far = half + LEG_LENGTH_M;
    Road {
        id: leg.as_str().to_string(),
        path: RefPath::line(-far * dx, -far * dy, leg.inbound_heading(), LEG_LENGTH_M),
        lanes_forward: lanes,
        lanes_backward: lanes,
        leg: Some(leg),
    }
}

fn curve_path() -> RefPath {
    let sweep = CURVE_SWEEP_DEG.to_radians();
    RefPath::chain(
        Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        },
        &[
            (CURVE_LEAD_M, 0.0),
            (CURVE_RADIUS_M * sweep, 1.0 / CURVE_RADIUS_M),
            (CURVE_LEAD_M, 0.0),
        ],
    )
}

pub fn build_geometry(template: &ScenarioTemplate) -> RoadGeometry {
    let p = &template.params;
    let lanes = p.lanes.max(1);
    let w = LANE_WIDTH_M;
    let mut roads = Vec::new();
    let mut stop_lines = Vec::new();
    let mut stop_controlled = Vec::new();
    let mut signal_heads = Vec::new();
    let mut conflict_region = None;

    match p.topology {
        RoadType::Straight => roads.push(Road {
            id: "main".into(),
            path: RefPath::line(0.0, 0.0, 0.0, STRAIGHT_LENGTH_M),
            lanes_forward: lanes,
            lanes_backward: lanes,
            leg: None,
        }),
        RoadType::Curve => roads.push(Road {
            id: "main".into(),
            path: curve_path(),
            lanes_forward: lanes,
            lanes_backward: lanes,
            leg: None,
        }),
        RoadType::Intersection | RoadType::TIntersection => {
            let half = region_half(lanes);
            conflict_region = Some(vec![
                [-half, -half],
                [half, -half],
                [half, half],
                [-half, half],
            ]);
            let legs = junction_legs(p.topology, p.approach);
            for &leg in &legs {
                let road = leg_road(leg, half, lanes);
                let station = LEG_LENGTH_M - STOP_LINE_SETBACK_M;
                let (a, b) = (
                    road.path.offset_point(station, 0.0),
                    road.path.offset_point(station, -(lanes as f64) * w),
                );
                stop_lines.push(StopLine {
                    approach: leg,
                    road: roads.len(),
                    station,
                    a: [a.0, a.1],
                    b: [b.0, b.1],
                });
                roads.push(road);
            }
            let cross = |leg: Leg| matches!(leg, Leg::North | Leg::South);
            if p.has_sign(TrafficSign::TrafficLight) {
                for &leg in &legs {
                    signal_heads.push(SignalHead {
                        approach: leg,
                        schedule: SignalSchedule {
                            cycle_s: SIGNAL_CYCLE_S,
                            green_s: SIGNAL_GREEN_S,
                            yellow_s: SIGNAL_YELLOW_S,
                            offset_s: if cross(leg) { CROSS_OFFSET_S } else { 0.0 },
                        },
                    });
                }
            }
            if p.has_sign(TrafficSign::StopSign) {
                stop_controlled = legs.iter().copied().filter(|&l| cross(l)).collect();
            }
        }
    }

    let mut lane_records = Vec::new();
    for (ri, road) in roads.iter().enumerate() {
        for (forward, count, tag) in [
            (true, road.lanes_forward, 'f'),
            (false, road.lanes_backward, 'b'),
        ] {
            for index in 0..count {
                let offset = road.lane_offset(forward, index);
                let mut centre = road.path.offset(offset);
                if !forward {
                    centre = centre.reversed();
                }
                lane_records.push(Lane {
                    id: format!("{}:{tag}{index}", road.id),
                    road: ri,
                    forward,
                    index,
                    offset,
                    width: w,
                    marker: p.marker,
                    centerline: centre.polyline(10.0),
                });
            }
        }
    }

    RoadGeometry {
        town: p.town,
        topology: p.topology,
        marker: p.marker,
        lane_width: w,
        roads,
        lanes: lane_records,
        stop_lines,
        stop_controlled,
        signal_heads,
        conflict_region,
        speed_limit: p.speed_limit,
        template_digest: template.digest(),
        script: Script {
            configuration: p.configuration,
            approach: p.approach,
            cast: p.actors.clone(),
        },
        geometry_ref: 0,
    }
    .seal()
}

/// Total heading change along a path, radians.
pub fn heading_change(path: &RefPath) -> f64 {
    path.segs().iter().map(|s| s.curvature * s.len).sum::<f64>().abs()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    #[test]
    fn signal_phases() {
        let s = SignalSchedule {
            cycle_s: 30.0,
            green_s: 12.0,
            yellow_s: 3.0,
            offset_s: 15.0,
        };
        assert_eq!(s.state(0.0), SignalColor::Red);
        assert_eq!(s.state(14.9), SignalColor::Red);
        assert_eq!(s.state(15.0), SignalColor::Green);
        assert_eq!(s.state(27.5), SignalColor::Yellow);
        assert_eq!(s.state(45.0), SignalColor::Green);
    }

    #[test]
    fn right_hand_legs() {
        assert!(Leg::West.has_on_right(Leg::South));
        assert!(!Leg::West.has_on_right(Leg::North));
        assert!(Leg::North.has_on_right(Leg::West));
        assert_eq!(Leg::leaving_towards(PI / 2.0), Leg::North);
        assert_eq!(Leg::leaving_towards(PI), Leg::West);
    }

    #[test]
    fn polygon_distance() {
        let sq = vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        assert!(polygon_contains(&sq, 0.0, 0.5));
        assert!(!polygon_contains(&sq, 2.0, 0.0));
        assert!((segment_distance(sq[1], sq[2], 3.0, 0.0) - 2.0).abs() < 1e-12);
    }
}
