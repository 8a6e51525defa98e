//! Shared generators and trace builders for the integration suites.
#![allow(dead_code)]

use crashscene::dsl::*;
use crashscene::monitor::registry::SUPPORTED;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

pub const TABLE1: [(&str, &str, usize); 6] = [
    ("straight_1", include_str!("../../fixtures/table1/straight_1.yaml"), 1),
    ("straight_2", include_str!("../../fixtures/table1/straight_2.yaml"), 2),
    ("intersection_1", include_str!("../../fixtures/table1/intersection_1.yaml"), 3),
    ("intersection_2", include_str!("../../fixtures/table1/intersection_2.yaml"), 3),
    ("t_intersection", include_str!("../../fixtures/table1/t_intersection.yaml"), 2),
    ("curve", include_str!("../../fixtures/table1/curve.yaml"), 2),
];

pub fn fixture_dir(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

/// The 50 golden RQ1 documents, in file order.
pub fn golden_corpus() -> Vec<(String, String)> {
    let mut paths: Vec<_> = std::fs::read_dir(fixture_dir("rq1/golden"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect()
}

fn speed() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![Just(None), (1u32..=45_000).prop_map(|m| Some(m as f64 / 1000.0))]
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z][A-Za-z0-9 ,.'\"-]{0,30}"
}

fn road() -> impl Strategy<Value = RoadNetwork> {
    let shape = select(RoadType::ALL.to_vec()).prop_flat_map(|rt| {
        let ways: BoxedStrategy<u32> = match rt {
            RoadType::Intersection => Just(4).boxed(),
            RoadType::TIntersection => Just(3).boxed(),
            _ => (1u32..=2).boxed(),
        };
        (Just(rt), ways)
    });
    let real_signs = vec![
        TrafficSign::StopSign,
        TrafficSign::SpeedLimitSign,
        TrafficSign::TrafficLight,
    ];
    let signs = prop_oneof![
        Just(vec![TrafficSign::NotMentioned]),
        subsequence(real_signs, 0..=3),
    ];
    (
        shape,
        1u32..=MAX_LANES,
        proptest::option::of(select(RoadMarker::ALL.to_vec())),
        signs,
        (1u32..=45).prop_map(|v| v as f64 * 0.5 + 0.25),
    )
        .prop_map(|((road_type, number_of_ways), lanes, markers, signs, limit)| {
            let has_limit = signs.contains(&TrafficSign::SpeedLimitSign);
            RoadNetwork {
                road_type,
                number_of_ways,
                number_of_lanes: lanes,
                road_markers: markers,
                traffic_signs: signs,
                speed_limit_value: has_limit.then_some(limit),
            }
        })
}

fn actor(id: String) -> impl Strategy<Value = ActorSpec> {
    (
        select(ActorType::ALL.to_vec()),
        select(Behavior::ALL.to_vec()),
        speed(),
        proptest::option::of("[a-z]{3,8}\\.[a-z0-9_]{1,10}"),
    )
        .prop_map(move |(actor_type, behavior, speed_mps, model_id)| ActorSpec {
            actor_id: id.clone(),
            actor_type,
            behavior,
            speed_mps,
            position: None,
            model_id,
        })
}

fn position(refs: usize) -> impl Strategy<Value = (usize, SpatialRelation, Option<HeadingRelation>)> {
    (
        0..refs,
        select(SpatialRelation::ALL.to_vec()),
        proptest::option::of(select(HeadingRelation::ALL.to_vec())),
    )
}

/// Valid scenario specs; NPC references only point backwards so no cycle
/// can form.
pub fn valid_spec() -> impl Strategy<Value = ScenarioSpec> {
    (0usize..=MAX_NPCS).prop_flat_map(|n| {
        let ids: Vec<String> = std::iter::once("ego".to_string())
            .chain((1..=n).map(|i| format!("npc{i}")))
            .collect();
        let npcs: Vec<_> = (1..=n)
            .map(|i| (actor(ids[i].clone()), position(i)))
            .collect();
        let oracle_entry = (
            select(SUPPORTED.to_vec()),
            "[a-z][a-z_]{2,20}",
            text(),
            proptest::option::of(select(ids.clone())),
        )
            .prop_map(|(rule_id, violation_type, description, violating_actor)| OracleEntry {
                rule_id,
                violation_type,
                description,
                violating_actor,
            });
        (
            "[A-Za-z0-9][A-Za-z0-9 _-]{0,15}",
            select(Weather::ALL.to_vec()),
            select(TimeOfDay::ALL.to_vec()),
            road(),
            actor("ego".into()),
            npcs,
            vec(oracle_entry, 1..=3),
            Just(ids),
        )
            .prop_map(|(sid, weather, time_of_day, road_network, ego, npcs, oracle, ids)| {
                let npcs = npcs
                    .into_iter()
                    .map(|(mut a, (r, spatial_relation, heading_relation))| {
                        a.position = Some(PositionSpec {
                            reference: ids[r].clone(),
                            spatial_relation,
                            heading_relation,
                        });
                        a
                    })
                    .collect();
                ScenarioSpec {
                    scenario_id: sid,
                    environment: Environment { weather, time_of_day },
                    road_network,
                    actors: ActorSet { ego, npcs },
                    oracle,
                }
            })
    })
}

/// Number of independent defects [`inject_defect`] knows.
pub const DEFECT_KINDS: usize = 10;

/// Breaks one invariant; each kind lands on a different document path.
pub fn inject_defect(spec: &mut ScenarioSpec, kind: usize) {
    let r = &mut spec.road_network;
    match kind {
        0 => spec.scenario_id = " ".into(),
        1 => r.number_of_ways = 7,
        2 => r.number_of_lanes = 0,
        3 => spec.actors.ego.speed_mps = Some(MAX_SPEED_MPS + 10.0),
        4 => {
            spec.actors.ego.position = Some(PositionSpec {
                reference: "ego".into(),
                spatial_relation: SpatialRelation::Front,
                heading_relation: None,
            })
        }
        5 => {
            r.speed_limit_value = match r.speed_limit_value {
                Some(_) => None,
                None => Some(12.0),
            }
        }
        6 => spec.oracle[0].description = String::new(),
        7 => spec.oracle[0].violation_type = String::new(),
        8 => spec.oracle[0].violating_actor = Some("ghost".into()),
        9 => spec.oracle[0].rule_id = 12345,
        _ => unreachable!("unknown defect kind {kind}"),
    }
}

use crashscene::sim::{
    footprint, ActorMeta, ActorState, Frame, Obb, Place, RoadGeometry, SignalState, Trace,
    TraceMeta,
};

/// Trace on `g` with poses given by `pose(actor_index, t) -> (x, y, heading, speed)`;
/// lanes and signal states are filled in the way the simulator does.
pub fn synthetic_trace(
    g: &RoadGeometry,
    cast: &[(&str, ActorType)],
    dt: f64,
    frames: usize,
    pose: impl Fn(usize, f64) -> (f64, f64, f64, f64),
) -> Trace {
    let meta = TraceMeta {
        scenario_id: "synthetic".into(),
        instance_seed: 0,
        timestep_s: dt,
        horizon_s: (frames - 1) as f64 * dt,
        geometry_ref: g.geometry_ref,
        actors: cast
            .iter()
            .map(|&(id, actor_type)| {
                let (length, width) = footprint(actor_type);
                ActorMeta {
                    id: id.into(),
                    actor_type,
                    length,
                    width,
                }
            })
            .collect(),
    };
    let frames = (0..frames)
        .map(|k| {
            let t = k as f64 * dt;
            let actors = cast
                .iter()
                .enumerate()
                .map(|(i, &(id, _))| {
                    let (x, y, heading, speed) = pose(i, t);
                    let (lane, lat) = match g.locate(x, y) {
                        Place::Lane { lane, lateral, .. } => {
                            let l = &g.lanes[lane];
                            (l.id.clone(), lateral - l.offset)
                        }
                        Place::Junction => ("junction".into(), 0.0),
                        Place::Offroad => ("offroad".into(), 0.0),
                    };
                    ActorState {
                        id: id.into(),
                        x,
                        y,
                        heading,
                        speed,
                        lane,
                        lat,
                    }
                })
                .collect();
            let signals = g
                .signal_heads
                .iter()
                .map(|h| SignalState {
                    approach: h.approach.as_str().into(),
                    state: h.schedule.state(t),
                })
                .collect();
            Frame { t, actors, signals }
        })
        .collect();
    Trace { meta, frames }
}

/// `n × n` grid over the rectangle, edges included.
pub fn grid_points(b: &Obb, n: usize) -> Vec<(f64, f64)> {
    let (c, s) = (b.heading.cos(), b.heading.sin());
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let a = (i as f64 / (n - 1) as f64 - 0.5) * b.length;
        for j in 0..n {
            let w = (j as f64 / (n - 1) as f64 - 0.5) * b.width;
            out.push((b.x + a * c - w * s, b.y + a * s + w * c));
        }
    }
    out
}

/// Brute-force overlap: any sample of one footprint inside the other.
pub fn sampled_overlap(a: &Obb, b: &Obb) -> bool {
    grid_points(a, 100).iter().any(|&(x, y)| b.contains(x, y))
        || grid_points(b, 100).iter().any(|&(x, y)| a.contains(x, y))
}

pub fn grow(b: &Obb, d: f64) -> Obb {
    Obb {
        length: b.length + 2.0 * d,
        width: b.width + 2.0 * d,
        ..*b
    }
}

/// True when the pair is within `band` of touching, from either side.
pub fn in_boundary_band(a: &Obb, b: &Obb, band: f64) -> bool {
    grow(a, band).overlaps(&grow(b, band)) && !grow(a, -band).overlaps(&grow(b, -band))
}

pub fn random_obb() -> impl Strategy<Value = Obb> {
    (
        -6.0f64..6.0,
        -6.0f64..6.0,
        -std::f64::consts::PI..std::f64::consts::PI,
        1.0f64..8.0,
        1.0f64..3.0,
    )
        .prop_map(|(x, y, heading, length, width)| Obb {
            x,
            y,
            heading,
            length,
            width,
        })
}
