//! Scripted actor plans and the fixed-step simulation loop.

use std::f64::consts::PI;

use super::collide::{footprint, Obb};
use super::geometry::{
    adversary_leg, region_half, Leg, Place, RoadGeometry, LEG_LENGTH_M, STOP_LINE_SETBACK_M,
};
use super::path::{wrap_angle, RefPath};
use super::trace::{ActorMeta, ActorState, Frame, SignalState, Trace, TraceMeta};
use super::SimError;
use crate::dsl::{Behavior, HeadingRelation, SpatialRelation};
use crate::sampler::ScenarioInstance;
use crate::synth::{Configuration, Role, TemplateActor};

pub const DECEL_MPS2: f64 = 4.0;
pub const RAMP_S: f64 = 2.0;
/// The junction adversary enters the conflict region this long before the ego.
pub const LEAD_S: f64 = 0.5;
pub const BACKGROUND_SPACING_M: f64 = 25.0;
pub const BACKGROUND_JUNCTION_M: f64 = 60.0;
/// Gap kept before the stop line when braking to rest.
pub const REST_GAP_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub timestep_s: f64,
    pub horizon_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            timestep_s: 0.1,
            horizon_s: 60.0,
        }
    }
}

/// Longitudinal speed schedule, evaluated in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant { v: f64 },
    /// Standing until `t_go`, then constant `v`.
    Hold { t_go: f64, v: f64 },
    /// Constant `v0` until `t_brake`, then decelerate to rest.
    Brake { v0: f64, t_brake: f64, decel: f64 },
}

impl Profile {
    pub fn distance(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { v } => v * t,
            Profile::Hold { t_go, v } => v * (t - t_go).max(0.0),
            Profile::Brake { v0, t_brake, decel } => {
                if t <= t_brake {
                    v0 * t
                } else {
                    let tau = (t - t_brake).min(v0 / decel);
                    v0 * t_brake + v0 * tau - 0.5 * decel * tau * tau
                }
            }
        }
    }

    pub fn speed(&self, t: f64) -> f64 {
        match *self {
            Profile::Constant { v } => v,
            Profile::Hold { t_go, v } => {
                if t >= t_go {
                    v
                } else {
                    0.0
                }
            }
            Profile::Brake { v0, t_brake, decel } => {
                if t <= t_brake {
                    v0
                } else {
                    (v0 - decel * (t - t_brake)).max(0.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trigger {
    Immediate,
    /// Fires when the reference-line gap to the ego drops to `gap`.
    Gap { gap: f64 },
}

/// Cosine lateral shift of `delta` metres (left positive) over [`RAMP_S`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub delta: f64,
    pub trigger: Trigger,
}

/// Lateral offset and its rate `dt` seconds into a ramp.
pub fn ramp_at(delta: f64, dt: f64) -> (f64, f64) {
    if dt <= 0.0 {
        return (0.0, 0.0);
    }
    let u = (dt / RAMP_S).min(1.0);
    let lat = delta * (1.0 - (PI * u).cos()) / 2.0;
    let rate = if u < 1.0 {
        delta * PI / (2.0 * RAMP_S) * (PI * u).sin()
    } else {
        0.0
    };
    (lat, rate)
}

#[derive(Debug, Clone)]
pub struct Plan {
    pub meta: ActorMeta,
    pub route: RefPath,
    pub s0: f64,
    pub profile: Profile,
    pub ramp: Option<Ramp>,
}

struct Inputs {
    ego_init: f64,
    npc_init: f64,
    ego_speed: f64,
    npc_speed: f64,
}

fn binding(instance: &ScenarioInstance, name: &str) -> Result<f64, SimError> {
    instance
        .get(name)
        .ok_or_else(|| SimError::MissingBinding(name.to_string()))
}

fn meta_of(a: &TemplateActor) -> ActorMeta {
    let (length, width) = footprint(a.actor_type);
    ActorMeta {
        id: a.actor_id.clone(),
        actor_type: a.actor_type,
        length,
        width,
    }
}

/// Profile for a behavior; `rest` is the station where a stopping actor's
/// centre comes to rest, `None` to brake at once.
fn profile_for(behavior: Behavior, v: f64, s0: f64, rest: Option<f64>) -> Profile {
    match behavior {
        Behavior::Static => Profile::Constant { v: 0.0 },
        _ if v <= 0.0 => Profile::Constant { v: 0.0 },
        Behavior::Stop => {
            let braking = v * v / (2.0 * DECEL_MPS2);
            let t_brake = rest.map_or(0.0, |r| ((r - braking - s0) / v).max(0.0));
            Profile::Brake {
                v0: v,
                t_brake,
                decel: DECEL_MPS2,
            }
        }
        _ => Profile::Constant { v },
    }
}

fn background_speed(instance: &ScenarioInstance, a: &TemplateActor) -> f64 {
    instance
        .get(&format!("{}.speed", a.actor_id))
        .unwrap_or(a.base_speed)
}

fn road_plans(
    g: &RoadGeometry,
    instance: &ScenarioInstance,
    inp: &Inputs,
) -> Result<Vec<Plan>, SimError> {
    let road = &g.roads[0];
    let reference = &road.path;
    let mid = reference.length() / 2.0;
    let nf = road.lanes_forward;
    let cast = &g.script.cast;
    let ego = &cast[0];
    let adversary = cast.iter().find(|a| a.role == Role::Adversary);
    let following = g.script.configuration == Configuration::CarFollowing;

    let ego_lane = if following && nf > 1 {
        match adversary.and_then(|a| a.spatial_relation) {
            Some(SpatialRelation::Right) => 0,
            _ => nf - 1,
        }
    } else {
        0
    };
    let forward_route = |idx: u32| reference.offset(road.lane_offset(true, idx));
    let backward_route = |idx: u32| reference.offset(road.lane_offset(false, idx)).reversed();
    let side_lane = |rel: Option<SpatialRelation>| match rel {
        Some(SpatialRelation::Left) if ego_lane > 0 => ego_lane - 1,
        Some(SpatialRelation::Right) if ego_lane + 1 < nf => ego_lane + 1,
        _ => ego_lane,
    };

    let ego_ref = mid - inp.ego_init;
    let ego_route = forward_route(ego_lane);
    let ego_s0 = ego_route.station_matching(reference, ego_ref);
    let mut plans = vec![Plan {
        meta: meta_of(ego),
        profile: profile_for(ego.behavior, inp.ego_speed, ego_s0, None),
        route: ego_route,
        s0: ego_s0,
        ramp: None,
    }];
    let ego_len = plans[0].meta.length;

    for (k, a) in cast.iter().enumerate().skip(1) {
        let meta = meta_of(a);
        let (route, target, speed, ramp) = if a.role == Role::Adversary {
            let v = inp.npc_speed;
            let moving = a.behavior != Behavior::Static && v > 0.0;
            if following {
                let idx = side_lane(a.spatial_relation);
                let gap = inp.npc_init + (ego_len + meta.length) / 2.0;
                let sign = if a.spatial_relation == Some(SpatialRelation::Behind) {
                    -1.0
                } else {
                    1.0
                };
                let ramp = (idx != ego_lane && moving).then(|| Ramp {
                    delta: road.lane_offset(true, ego_lane) - road.lane_offset(true, idx),
                    trigger: Trigger::Immediate,
                });
                (forward_route(idx), ego_ref + sign * gap, v, ramp)
            } else {
                let ramp = moving.then(|| Ramp {
                    delta: (ego_lane as f64 + 1.0) * g.lane_width,
                    trigger: Trigger::Gap { gap: inp.npc_init },
                });
                (backward_route(0), mid + inp.npc_init, v, ramp)
            }
        } else {
            let v = background_speed(instance, a);
            let offset = BACKGROUND_SPACING_M * k as f64;
            if a.heading_relation == Some(HeadingRelation::OppositeDirection) {
                (backward_route(0), mid + inp.npc_init + offset, v, None)
            } else {
                let sign = if a.spatial_relation == Some(SpatialRelation::Behind) {
                    -1.0
                } else {
                    1.0
                };
                (
                    forward_route(side_lane(a.spatial_relation)),
                    ego_ref + sign * offset,
                    v,
                    None,
                )
            }
        };
        let s0 = route.station_matching(reference, target);
        plans.push(Plan {
            meta,
            profile: profile_for(a.behavior, speed, s0, None),
            route,
            s0,
            ramp,
        });
    }
    Ok(plans)
}

/// Lane-0 route from the far end of `leg` through the conflict region.
pub fn junction_route(g: &RoadGeometry, leg: Leg, behavior: Behavior) -> Option<RefPath> {
    let road = &g.roads[g.road_of_leg(leg)?];
    let w = g.lane_width;
    let half = region_half(road.lanes_forward);
    let inbound = road.path.offset(-0.5 * w);
    let entry = inbound.end();
    let connector = match behavior {
        Behavior::TurnLeft => {
            let r = half + 0.5 * w;
            RefPath::chain(entry, &[(r * PI / 2.0, 1.0 / r)])
        }
        Behavior::TurnRight => {
            let r = half - 0.5 * w;
            RefPath::chain(entry, &[(r * PI / 2.0, -1.0 / r)])
        }
        _ => RefPath::chain(entry, &[(2.0 * half, 0.0)]),
    };
    let outbound = RefPath::chain(connector.end(), &[(LEG_LENGTH_M, 0.0)]);
    Some(RefPath::concat(&[inbound, connector, outbound]))
}

fn junction_plans(
    g: &RoadGeometry,
    instance: &ScenarioInstance,
    inp: &Inputs,
) -> Result<Vec<Plan>, SimError> {
    let cast = &g.script.cast;
    let ego = &cast[0];
    let stop_station = LEG_LENGTH_M - STOP_LINE_SETBACK_M;
    let rest_for = |len: f64| stop_station - REST_GAP_M - len / 2.0;
    let route_for = |leg: Leg, b: Behavior| {
        junction_route(g, leg, b).ok_or(SimError::MissingLeg(leg.as_str()))
    };

    let ego_meta = meta_of(ego);
    let ego_route = route_for(Leg::West, ego.behavior)?;
    let ego_s0 = LEG_LENGTH_M - inp.ego_init;
    let t_enter = if inp.ego_speed > 0.0 {
        (inp.ego_init - ego_meta.length / 2.0) / inp.ego_speed
    } else {
        0.0
    };
    let mut plans = vec![Plan {
        profile: profile_for(
            ego.behavior,
            inp.ego_speed,
            ego_s0,
            Some(rest_for(ego_meta.length)),
        ),
        meta: ego_meta,
        route: ego_route,
        s0: ego_s0,
        ramp: None,
    }];

    let legs = g.approaches();
    for (k, a) in cast.iter().enumerate().skip(1) {
        let meta = meta_of(a);
        let len = meta.length;
        if a.role == Role::Adversary {
            let leg = adversary_leg(g.script.approach);
            let route = route_for(leg, a.behavior)?;
            let v = inp.npc_speed;
            let (s0, profile) = match a.behavior {
                Behavior::GoForward | Behavior::TurnLeft | Behavior::TurnRight if v > 0.0 => {
                    let t_a = (t_enter - LEAD_S).max(0.0);
                    let front0 = inp.npc_init - len / 2.0;
                    if front0 <= v * t_a {
                        (
                            LEG_LENGTH_M - inp.npc_init,
                            Profile::Hold {
                                t_go: t_a - front0 / v,
                                v,
                            },
                        )
                    } else {
                        (
                            LEG_LENGTH_M - (v * t_a + len / 2.0),
                            Profile::Constant { v },
                        )
                    }
                }
                b => {
                    let s0 = LEG_LENGTH_M - inp.npc_init;
                    (s0, profile_for(b, v, s0, Some(rest_for(len))))
                }
            };
            plans.push(Plan {
                meta,
                route,
                s0,
                profile,
                ramp: None,
            });
        } else {
            let wanted = match a.heading_relation {
                Some(HeadingRelation::FromLeft) => Leg::North,
                Some(HeadingRelation::FromRight) => Leg::South,
                Some(HeadingRelation::OppositeDirection) => Leg::East,
                _ => Leg::West,
            };
            let leg = if legs.contains(&wanted) {
                wanted
            } else {
                Leg::East
            };
            let route = route_for(leg, a.behavior)?;
            let offset = BACKGROUND_SPACING_M * k as f64;
            let s0 = if leg == Leg::West {
                LEG_LENGTH_M - inp.ego_init - offset
            } else {
                LEG_LENGTH_M - BACKGROUND_JUNCTION_M - offset
            };
            let v = background_speed(instance, a);
            plans.push(Plan {
                meta,
                route,
                s0,
                profile: profile_for(a.behavior, v, s0, Some(rest_for(len))),
                ramp: None,
            });
        }
    }
    Ok(plans)
}

/// Actor plans for an instance.
pub fn plan(instance: &ScenarioInstance, g: &RoadGeometry) -> Result<Vec<Plan>, SimError> {
    if instance.template_digest != g.template_digest {
        return Err(SimError::DigestMismatch {
            instance: instance.template_digest,
            geometry: g.template_digest,
        });
    }
    if g.script.cast.is_empty() {
        return Err(SimError::EmptyCast);
    }
    let inp = Inputs {
        ego_init: binding(instance, "EGO_INIT_DIST")?,
        npc_init: binding(instance, "NPC_INIT_DIST")?,
        ego_speed: binding(instance, "ego_speed")?,
        npc_speed: binding(instance, "npc_speed")?,
    };
    if g.is_junction() {
        junction_plans(g, instance, &inp)
    } else {
        road_plans(g, instance, &inp)
    }
}

fn state_of(g: &RoadGeometry, id: &str, x: f64, y: f64, heading: f64, speed: f64) -> ActorState {
    let (lane, lat) = match g.locate(x, y) {
        Place::Lane { lane, lateral, .. } => {
            let l = &g.lanes[lane];
            (l.id.clone(), lateral - l.offset)
        }
        Place::Junction => ("junction".to_string(), 0.0),
        Place::Offroad => ("offroad".to_string(), 0.0),
    };
    ActorState {
        id: id.to_string(),
        x,
        y,
        heading: wrap_angle(heading),
        speed,
        lane,
        lat,
    }
}

/// Runs `plans` on `g` at a fixed timestep until the horizon, or one second
/// after the first collision.
pub fn run(
    instance: &ScenarioInstance,
    g: &RoadGeometry,
    plans: &[Plan],
    cfg: SimConfig,
) -> Trace {
    let dt = cfg.timestep_s;
    let last = (cfg.horizon_s / dt + 1e-9).floor() as usize;
    let tail = (1.0 / dt).round() as usize;
    let reference = &g.roads[0].path;
    let mut fired: Vec<Option<f64>> = plans
        .iter()
        .map(|p| match p.ramp {
            Some(Ramp {
                trigger: Trigger::Immediate,
                ..
            }) => Some(0.0),
            _ => None,
        })
        .collect();
    let mut end = last;
    let mut collided = false;
    let mut frames = Vec::with_capacity(last + 1);
    let mut k = 0;
    while k <= end {
        let t = k as f64 * dt;
        let stations: Vec<f64> = plans.iter().map(|p| p.s0 + p.profile.distance(t)).collect();
        for (i, p) in plans.iter().enumerate() {
            if let (None, Some(Ramp {
                trigger: Trigger::Gap { gap },
                ..
            })) = (fired[i], p.ramp)
            {
                let me = p.route.pose(stations[i]);
                let ego = plans[0].route.pose(stations[0]);
                let ds = reference.project(me.x, me.y).0 - reference.project(ego.x, ego.y).0;
                if ds <= gap {
                    fired[i] = Some(t);
                }
            }
        }
        let mut actors = Vec::with_capacity(plans.len());
        let mut boxes = Vec::with_capacity(plans.len());
        for (i, p) in plans.iter().enumerate() {
            let pose = p.route.pose(stations[i]);
            let v = p.profile.speed(t);
            let (lat, rate) = match (p.ramp, fired[i]) {
                (Some(r), Some(t0)) => ramp_at(r.delta, t - t0),
                _ => (0.0, 0.0),
            };
            let (nx, ny) = pose.normal();
            let (x, y) = (pose.x + lat * nx, pose.y + lat * ny);
            let heading = if rate != 0.0 {
                pose.heading + rate.atan2(v)
            } else {
                pose.heading
            };
            let speed = v.hypot(rate);
            let s = state_of(g, &p.meta.id, x, y, heading, speed);
            boxes.push(Obb {
                x,
                y,
                heading: s.heading,
                length: p.meta.length,
                width: p.meta.width,
            });
            actors.push(s);
        }
        if !collided {
            let hit = (0..boxes.len())
                .any(|i| (i + 1..boxes.len()).any(|j| boxes[i].overlaps(&boxes[j])));
            if hit {
                collided = true;
                end = (k + tail).min(last);
            }
        }
        let signals = g
            .signal_heads
            .iter()
            .map(|h| SignalState {
                approach: h.approach.as_str().to_string(),
                state: h.schedule.state(t),
            })
            .collect();
        frames.push(Frame { t, actors, signals });
        k += 1;
    }
    Trace {
        meta: TraceMeta {
            scenario_id: instance.scenario_id.clone(),
            instance_seed: instance.instance_seed,
            timestep_s: dt,
            horizon_s: cfg.horizon_s,
            geometry_ref: g.geometry_ref,
            actors: plans.iter().map(|p| p.meta.clone()).collect(),
        },
        frames,
    }
}
