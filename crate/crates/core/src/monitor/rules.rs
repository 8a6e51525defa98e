//! Quantitative rule predicates over a located trace.

use std::collections::BTreeMap;

use super::registry::*;
use super::Violation;
use crate::dsl::{Behavior, RoadMarker, RoadType};
use crate::sim::{Leg, Obb, Place, RoadGeometry, SignalColor, Trace};

const EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Sample {
    pub speed: f64,
    pub place: Place,
    pub obb: Obb,
    /// Travelling along the reference direction of the road it is on.
    pub forward: bool,
}

/// A trace joined with its geometry.
pub(crate) struct View<'a> {
    pub g: &'a RoadGeometry,
    pub trace: &'a Trace,
    pub times: Vec<f64>,
    /// `[actor][frame]`.
    pub samples: Vec<Vec<Sample>>,
}

impl<'a> View<'a> {
    pub fn new(trace: &'a Trace, g: &'a RoadGeometry) -> Self {
        let times = trace.frames.iter().map(|f| f.t).collect();
        let samples = trace
            .meta
            .actors
            .iter()
            .enumerate()
            .map(|(i, meta)| {
                trace
                    .frames
                    .iter()
                    .map(|f| {
                        let a = match f.actors.get(i) {
                            Some(a) if a.id == meta.id => a,
                            _ => f
                                .actors
                                .iter()
                                .find(|a| a.id == meta.id)
                                .expect("every frame holds every actor"),
                        };
                        let place = g.locate(a.x, a.y);
                        let forward = match place {
                            Place::Lane { road, station, .. } => {
                                let h = g.roads[road].path.pose(station).heading;
                                (a.heading - h).cos() >= 0.0
                            }
                            _ => true,
                        };
                        Sample {
                            speed: a.speed,
                            place,
                            obb: Obb {
                                x: a.x,
                                y: a.y,
                                heading: a.heading,
                                length: meta.length,
                                width: meta.width,
                            },
                            forward,
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            g,
            trace,
            times,
            samples,
        }
    }

    fn id(&self, actor: usize) -> &str {
        &self.trace.meta.actors[actor].id
    }

    fn actors(&self) -> usize {
        self.samples.len()
    }

    fn frames(&self) -> usize {
        self.times.len()
    }

    fn violation(&self, rule_id: u32, actor: usize, a: usize, b: usize) -> Violation {
        Violation {
            rule_id,
            actor_id: self.id(actor).to_string(),
            t_start: self.times[a],
            t_end: self.times[b],
            other_actor: None,
            evidence: BTreeMap::new(),
        }
    }

    /// Inbound leg an actor starts on, if any.
    fn approach(&self, actor: usize) -> Option<Leg> {
        let s = self.samples[actor].first()?;
        match s.place {
            Place::Lane { road, lane, .. } if self.g.lanes[lane].forward && s.forward => {
                self.g.roads[road].leg
            }
            _ => None,
        }
    }

    fn signal(&self, frame: usize, leg: Leg) -> Option<SignalColor> {
        self.trace.frames[frame]
            .signals
            .iter()
            .find(|s| s.approach == leg.as_str())
            .map(|s| s.state)
    }

    fn behavior(&self, actor: usize) -> Option<Behavior> {
        let id = self.id(actor);
        self.g
            .script
            .cast
            .iter()
            .find(|a| a.actor_id == id)
            .map(|a| a.behavior)
    }
}

/// Maximal runs of `pred` lasting at least `min_s`, as frame index pairs.
pub(crate) fn runs(pred: &[bool], times: &[f64], min_s: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < pred.len() {
        if !pred[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < pred.len() && pred[i + 1] {
            i += 1;
        }
        if times[i] - times[start] >= min_s - 1e-9 {
            out.push((start, i));
        }
        i += 1;
    }
    out
}

/// Unions overlapping or adjacent intervals.
pub(crate) fn merge(mut spans: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    spans.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (a, b) in spans {
        match out.last_mut() {
            Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

fn max_over(values: &[f64], a: usize, b: usize) -> f64 {
    values[a..=b].iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------- speed

fn speeding(v: &View, actor: usize, limit: f64) -> Vec<bool> {
    v.samples[actor]
        .iter()
        .map(|s| s.speed > limit + SPEED_MARGIN_MPS)
        .collect()
}

pub(crate) fn maximum_speed(v: &View) -> Vec<Violation> {
    let limit = if v.g.two_way_single_lane() {
        MAX_TWO_LANE_MPS
    } else {
        MAX_HIGHWAY_MPS
    };
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let speeds: Vec<f64> = v.samples[actor].iter().map(|s| s.speed).collect();
        for (a, b) in runs(&speeding(v, actor, limit), &v.times, SUSTAIN_S) {
            let mut viol = v.violation(22349, actor, a, b);
            viol.evidence.insert("max_speed_mps".into(), max_over(&speeds, a, b));
            viol.evidence.insert("limit_mps".into(), limit);
            out.push(viol);
        }
    }
    out
}

/// Bumper gap to the nearest same-lane, same-direction actor ahead.
fn lead_gap(v: &View, actor: usize, k: usize) -> Option<(usize, f64)> {
    let me = &v.samples[actor][k];
    let Place::Lane {
        lane, station, ..
    } = me.place
    else {
        return None;
    };
    let dir = if me.forward { 1.0 } else { -1.0 };
    let mut best: Option<(usize, f64)> = None;
    for other in 0..v.actors() {
        if other == actor {
            continue;
        }
        let o = &v.samples[other][k];
        let Place::Lane {
            lane: ol,
            station: os,
            ..
        } = o.place
        else {
            continue;
        };
        if ol != lane || o.forward != me.forward {
            continue;
        }
        let ahead = (os - station) * dir;
        if ahead <= 0.0 {
            continue;
        }
        let gap = ahead - (me.obb.length + o.obb.length) / 2.0;
        if best.is_none_or(|b| gap < b.1) {
            best = Some((other, gap));
        }
    }
    best
}

pub(crate) fn basic_speed(v: &View) -> Vec<Violation> {
    let limit = v.g.speed_limit;
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let speeds: Vec<f64> = v.samples[actor].iter().map(|s| s.speed).collect();
        let fast = runs(&speeding(v, actor, limit), &v.times, SUSTAIN_S);
        let headway: Vec<Option<f64>> = (0..v.frames())
            .map(|k| {
                let s = v.samples[actor][k].speed;
                lead_gap(v, actor, k)
                    .filter(|_| s > STOP_SPEED_MPS)
                    .map(|(_, gap)| gap / s)
            })
            .collect();
        let close: Vec<bool> = headway
            .iter()
            .map(|h| h.is_some_and(|h| h < TIME_HEADWAY_S))
            .collect();
        let tailgating = runs(&close, &v.times, SUSTAIN_S);
        let mut spans = fast.clone();
        spans.extend(tailgating.iter().copied());
        for (a, b) in merge(spans) {
            let mut viol = v.violation(22350, actor, a, b);
            viol.evidence.insert("max_speed_mps".into(), max_over(&speeds, a, b));
            viol.evidence.insert("limit_mps".into(), limit);
            let min_h = headway[a..=b]
                .iter()
                .flatten()
                .copied()
                .fold(f64::INFINITY, f64::min);
            if tailgating.iter().any(|&(x, y)| x <= b && a <= y) {
                viol.evidence.insert("min_headway_s".into(), min_h);
            }
            out.push(viol);
        }
    }
    out
}

// ------------------------------------------------------- lane keeping

/// How far the footprint reaches past the centreline into opposing lanes.
fn excursion(v: &View, s: &Sample) -> Option<(usize, f64)> {
    let Place::Lane { road, .. } = s.place else {
        return None;
    };
    let r = &v.g.roads[road];
    if r.lanes_backward == 0 || r.lanes_forward == 0 {
        return None;
    }
    let lats = s.obb.corners().map(|(x, y)| r.path.project(x, y).1);
    let e = if s.forward {
        lats.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        -lats.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Some((road, e))
}

fn oncoming(v: &View, actor: usize, k: usize, road: usize) -> Option<(usize, f64)> {
    let me = &v.samples[actor][k];
    let mut best: Option<(usize, f64)> = None;
    for other in 0..v.actors() {
        if other == actor {
            continue;
        }
        let o = &v.samples[other][k];
        let Place::Lane { road: or, .. } = o.place else {
            continue;
        };
        if or != road || o.forward == me.forward {
            continue;
        }
        let d = (o.obb.x - me.obb.x).hypot(o.obb.y - me.obb.y);
        if d <= ONCOMING_RANGE_M && best.is_none_or(|b| d < b.1) {
            best = Some((other, d));
        }
    }
    best
}

/// Longest stretch of lane departure overlapping [a, b], in seconds.
fn lane_departure(v: &View, actor: usize, a: usize, b: usize) -> f64 {
    let home = v.samples[actor].iter().find_map(|s| match s.place {
        Place::Lane { lane, .. } => Some(v.g.lanes[lane].offset),
        _ => None,
    });
    let Some(home) = home else {
        return 0.0;
    };
    let width = v.samples[actor][0].obb.width;
    let bound = (v.g.lane_width - width) / 2.0;
    let pred: Vec<bool> = v.samples[actor]
        .iter()
        .map(|s| match s.place {
            Place::Lane { lateral, .. } => (lateral - home).abs() > bound,
            _ => false,
        })
        .collect();
    runs(&pred, &v.times, LANE_KEEP_SUSTAIN_S)
        .into_iter()
        .filter(|&(x, y)| x <= b && a <= y)
        .map(|(x, y)| v.times[y] - v.times[x])
        .fold(0.0, f64::max)
}

pub(crate) fn centerline(v: &View, rule_id: u32) -> Vec<Violation> {
    let solid = v.g.marker == RoadMarker::SolidLine;
    if rule_id == 21460 && !solid {
        return Vec::new();
    }
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let mut pred = vec![false; v.frames()];
        let mut depth = vec![0.0; v.frames()];
        let mut near: Vec<Option<(usize, f64)>> = vec![None; v.frames()];
        for (k, s) in v.samples[actor].iter().enumerate() {
            let Some((road, e)) = excursion(v, s) else {
                continue;
            };
            if e <= EPS {
                continue;
            }
            depth[k] = e;
            if rule_id == 21460 {
                pred[k] = true;
            } else if let Some(o) = oncoming(v, actor, k, road) {
                near[k] = Some(o);
                pred[k] = true;
            }
        }
        for (a, b) in runs(&pred, &v.times, 0.0) {
            let mut viol = v.violation(rule_id, actor, a, b);
            viol.evidence.insert("max_excursion_m".into(), max_over(&depth, a, b));
            let closest = near[a..=b]
                .iter()
                .flatten()
                .min_by(|x, y| x.1.total_cmp(&y.1));
            if let Some(&(other, d)) = closest {
                viol.other_actor = Some(v.id(other).to_string());
                viol.evidence.insert("min_oncoming_distance_m".into(), d);
            }
            let dep = lane_departure(v, actor, a, b);
            if dep > 0.0 {
                viol.evidence.insert("lane_departure_s".into(), dep);
            }
            out.push(viol);
        }
    }
    out
}

// ------------------------------------------------------ stop lines

/// Frame at which the front edge first passes the stop line of `leg`,
/// with the front station at every frame up to it.
fn stop_line_crossing(v: &View, actor: usize, leg: Leg) -> Option<(usize, Vec<f64>)> {
    let line = v.g.stop_line_for(leg)?;
    let path = &v.g.roads[line.road].path;
    let mut fronts = Vec::new();
    for (k, s) in v.samples[actor].iter().enumerate() {
        let (fx, fy) = s.obb.front();
        let sf = path.project(fx, fy).0;
        fronts.push(sf);
        if k > 0 && fronts[k - 1] < line.station && sf >= line.station {
            return Some((k, fronts));
        }
    }
    None
}

pub(crate) fn red_light(v: &View) -> Vec<Violation> {
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let Some(leg) = v.approach(actor) else {
            continue;
        };
        if v.g.signal_for(leg).is_none() {
            continue;
        }
        let Some((k, _)) = stop_line_crossing(v, actor, leg) else {
            continue;
        };
        if v.signal(k, leg) == Some(SignalColor::Red) {
            let mut viol = v.violation(21453, actor, k, k);
            viol.evidence.insert("speed_mps".into(), v.samples[actor][k].speed);
            out.push(viol);
        }
    }
    out
}

pub(crate) fn stop_sign(v: &View) -> Vec<Violation> {
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let Some(leg) = v.approach(actor) else {
            continue;
        };
        if !v.g.stop_controlled.contains(&leg) {
            continue;
        }
        let line = v.g.stop_line_for(leg).expect("every leg has a stop line");
        let Some((k, fronts)) = stop_line_crossing(v, actor, leg) else {
            continue;
        };
        let zone = line.station - STOP_ZONE_M..=line.station;
        let min_in_zone = (0..k)
            .filter(|&i| zone.contains(&fronts[i]))
            .map(|i| v.samples[actor][i].speed)
            .fold(f64::INFINITY, f64::min);
        let min_speed = if min_in_zone.is_finite() {
            min_in_zone
        } else {
            v.samples[actor][k].speed
        };
        if min_speed > STOP_SPEED_MPS {
            let mut viol = v.violation(22450, actor, k, k);
            viol.evidence.insert("min_speed_in_zone_mps".into(), min_speed);
            out.push(viol);
        }
    }
    out
}

// ------------------------------------------------------ lane changes

struct LaneChange {
    actor: usize,
    frame: usize,
    to_lane: usize,
}

fn lane_changes(v: &View) -> Vec<LaneChange> {
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let ss = &v.samples[actor];
        for k in 1..ss.len() {
            let (
                Place::Lane {
                    road: r0, lane: l0, ..
                },
                Place::Lane {
                    road: r1, lane: l1, ..
                },
            ) = (ss[k - 1].place, ss[k].place)
            else {
                continue;
            };
            let (a, b) = (&v.g.lanes[l0], &v.g.lanes[l1]);
            if r0 == r1 && l0 != l1 && a.forward == b.forward && ss[k].forward == b.forward {
                out.push(LaneChange {
                    actor,
                    frame: k,
                    to_lane: l1,
                });
            }
        }
    }
    out
}

pub(crate) fn unsafe_lane_change(v: &View) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in lane_changes(v) {
        let me = &v.samples[c.actor][c.frame];
        let Place::Lane { station, .. } = me.place else {
            continue;
        };
        let mut worst: Option<(usize, f64)> = None;
        for other in 0..v.actors() {
            if other == c.actor {
                continue;
            }
            let o = &v.samples[other][c.frame];
            let Place::Lane {
                lane, station: os, ..
            } = o.place
            else {
                continue;
            };
            if lane != c.to_lane {
                continue;
            }
            let gap = (os - station).abs();
            let speed = me.speed.max(o.speed);
            if speed > 0.0 && gap <= TIME_HEADWAY_S * speed {
                let h = gap / speed;
                if worst.is_none_or(|w| h < w.1) {
                    worst = Some((other, h));
                }
            }
        }
        if let Some((other, h)) = worst {
            let mut viol = v.violation(22107, c.actor, c.frame, c.frame);
            viol.other_actor = Some(v.id(other).to_string());
            viol.evidence.insert("headway_s".into(), h);
            out.push(viol);
        }
    }
    out
}

pub(crate) fn junction_lane_change(v: &View) -> Vec<Violation> {
    let mut out = Vec::new();
    for c in lane_changes(v) {
        let (fx, fy) = v.samples[c.actor][c.frame].obb.front();
        if let Some(d) = v.g.region_distance(fx, fy) {
            if d <= JUNCTION_PROXIMITY_M {
                let mut viol = v.violation(22108, c.actor, c.frame, c.frame);
                viol.evidence.insert("region_distance_m".into(), d);
                out.push(viol);
            }
        }
    }
    out
}

// ------------------------------------------------------ right of way

fn priority_class(v: &View, leg: Leg, frame: usize) -> u8 {
    if let Some(state) = v.signal(frame, leg) {
        return u8::from(state == SignalColor::Red);
    }
    if v.g.stop_controlled.contains(&leg) {
        return 1;
    }
    if v.g.topology == RoadType::TIntersection && matches!(leg, Leg::North | Leg::South) {
        return 1;
    }
    0
}

fn in_region(v: &View, s: &Sample) -> bool {
    let (fx, fy) = s.obb.front();
    v.g.in_region(fx, fy) || v.g.in_region(s.obb.x, s.obb.y)
}

fn entry_frame(v: &View, actor: usize) -> Option<usize> {
    v.samples[actor].iter().position(|s| {
        let (fx, fy) = s.obb.front();
        v.g.in_region(fx, fy)
    })
}

pub(crate) fn right_of_way(v: &View) -> Vec<Violation> {
    if !v.g.is_junction() {
        return Vec::new();
    }
    let approaches: Vec<Option<Leg>> = (0..v.actors()).map(|a| v.approach(a)).collect();
    let entries: Vec<Option<usize>> = (0..v.actors()).map(|a| entry_frame(v, a)).collect();
    let mut best: BTreeMap<(usize, u32), (usize, usize, f64)> = BTreeMap::new();
    for x in 0..v.actors() {
        let (Some(leg_x), Some(kx)) = (approaches[x], entries[x]) else {
            continue;
        };
        let class_x = priority_class(v, leg_x, kx);
        for y in 0..v.actors() {
            let Some(leg_y) = approaches[y] else {
                continue;
            };
            if y == x || leg_y == leg_x {
                continue;
            }
            let inside = in_region(v, &v.samples[y][kx]);
            let delay = match entries[y] {
                Some(ky) if ky <= kx => {
                    if !inside {
                        continue;
                    }
                    0.0
                }
                Some(ky) => v.times[ky] - v.times[kx],
                None => continue,
            };
            let class_y = priority_class(v, leg_y, kx);
            let has_priority = class_y < class_x
                || (class_y == class_x
                    && (inside || (delay <= TIE_WINDOW_S && leg_x.has_on_right(leg_y))));
            if !has_priority || delay > PRIORITY_WINDOW_S {
                continue;
            }
            let section = if v.g.stop_controlled.contains(&leg_x) {
                21802
            } else if v.behavior(x) == Some(Behavior::TurnLeft) && leg_y == leg_x.opposite() {
                21801
            } else if v.g.topology == RoadType::TIntersection
                && v.g.signal_for(leg_x).is_none()
                && matches!(leg_x, Leg::North | Leg::South)
            {
                21803
            } else {
                21800
            };
            let entry = best.entry((x, section)).or_insert((kx, y, delay));
            if delay < entry.2 {
                *entry = (kx, y, delay);
            }
        }
    }
    best.into_iter()
        .map(|((x, section), (kx, y, delay))| {
            let mut viol = v.violation(section, x, kx, kx);
            viol.other_actor = Some(v.id(y).to_string());
            viol.evidence.insert("arrival_delay_s".into(), delay);
            viol
        })
        .collect()
}

pub(crate) fn enter_from_off_road(v: &View) -> Vec<Violation> {
    let mut out = Vec::new();
    for actor in 0..v.actors() {
        let ss = &v.samples[actor];
        if !matches!(ss.first().map(|s| s.place), Some(Place::Offroad)) {
            continue;
        }
        let Some(k) = ss.iter().position(|s| matches!(s.place, Place::Lane { .. })) else {
            continue;
        };
        let Place::Lane { lane, station, .. } = ss[k].place else {
            unreachable!()
        };
        let conflict = (0..v.actors()).filter(|&o| o != actor).find_map(|o| {
            let s = &v.samples[o][k];
            match s.place {
                Place::Lane {
                    lane: ol,
                    station: os,
                    ..
                } if ol == lane && (os - station).abs() <= TIME_HEADWAY_S * s.speed => {
                    Some((o, (os - station).abs()))
                }
                _ => None,
            }
        });
        if let Some((o, gap)) = conflict {
            let mut viol = v.violation(21804, actor, k, k);
            viol.other_actor = Some(v.id(o).to_string());
            viol.evidence.insert("gap_m".into(), gap);
            out.push(viol);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_respect_duration() {
        let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let mut pred = vec![false; 20];
        for p in pred.iter_mut().take(15).skip(2) {
            *p = true;
        }
        pred[17] = true;
        assert_eq!(runs(&pred, &times, 1.0), vec![(2, 14)]);
        assert_eq!(runs(&pred, &times, 0.0), vec![(2, 14), (17, 17)]);
    }

    #[test]
    fn merge_joins_adjacent() {
        assert_eq!(merge(vec![(5, 9), (0, 4), (12, 13)]), vec![(0, 9), (12, 13)]);
    }
}
