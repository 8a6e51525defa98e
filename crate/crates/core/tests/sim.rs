mod common;

use std::f64::consts::PI;

use common::*;
use crashscene::dsl::ActorType;
use crashscene::pipeline::{compile, Compiled, PipelineConfig};
use crashscene::sampler::sample_instance;
use crashscene::sim::*;
use crashscene::synth::Town;
use proptest::prelude::*;

fn compiled(doc: &str) -> Compiled {
    compile(doc, &PipelineConfig::default()).unwrap()
}

fn doc(name: &str) -> &'static str {
    TABLE1.iter().find(|(n, _, _)| *n == name).unwrap().1
}

fn ego_lane_doc() -> String {
    doc("straight_1")
        .replace("opposite_direction", "same_direction")
        .replace("behavior: go_forward\n      speed_mps: 10.0", "behavior: static\n      speed_mps: 10.0")
}

#[test]
fn straight_two_lanes_opposite() {
    let g = compiled(doc("straight_1")).geometry;
    assert_eq!(g.town, Town::Town02);
    assert_eq!(g.lanes.len(), 2);
    assert_eq!(g.lanes.iter().filter(|l| l.forward).count(), 1);
    assert_eq!(g.lanes.iter().filter(|l| !l.forward).count(), 1);
    assert!(!g.is_junction());
}

#[test]
fn t_junction_has_three_approaches() {
    let g = compiled(doc("t_intersection")).geometry;
    assert_eq!(g.approaches().len(), 3);
    let region = g.conflict_region.as_ref().unwrap();
    assert!(region.len() >= 3);
    assert!(g.in_region(0.0, 0.0));
}

#[test]
fn curve_turns_at_least_thirty_degrees() {
    let g = compiled(doc("curve")).geometry;
    assert!(heading_change(&g.roads[0].path) >= 30f64.to_radians());
}

#[test]
fn static_actor_never_moves() {
    let c = compiled(&ego_lane_doc());
    let inst = sample_instance(&c.template, 3);
    let trace = simulate(&inst, &c.geometry).unwrap();
    let i = trace.actor_index("npc1").unwrap();
    let first = &trace.frames[0].actors[i];
    for f in &trace.frames {
        let a = &f.actors[i];
        assert_eq!((a.x, a.y, a.heading, a.speed), (first.x, first.y, first.heading, 0.0));
    }
}

#[test]
fn constant_speed_displacement_is_exact() {
    let c = compiled(doc("straight_1"));
    let mut inst = sample_instance(&c.template, 11);
    inst.bindings.insert("ego_speed".into(), 10.0);
    let trace = simulate(&inst, &c.geometry).unwrap();
    let x0 = trace.frames[0].actors[0].x;
    let y0 = trace.frames[0].actors[0].y;
    for f in &trace.frames {
        let a = &f.actors[0];
        assert!((a.x - x0 - 10.0 * f.t).abs() <= 1e-9, "t={} dx={}", f.t, a.x - x0);
        assert!((a.y - y0).abs() <= 1e-9);
        assert!((a.speed - 10.0).abs() <= 1e-12);
    }
}

#[test]
fn frame_count_and_timestep() {
    let c = compiled(&ego_lane_doc());
    let mut inst = sample_instance(&c.template, 0);
    inst.bindings.insert("ego_speed".into(), 8.0);
    let cfg = SimConfig {
        timestep_s: 0.1,
        horizon_s: 5.0,
    };
    let trace = simulate_with(&inst, &c.geometry, cfg).unwrap();
    assert!(trace.frames.len() <= 51);
    for (k, f) in trace.frames.iter().enumerate() {
        assert!((f.t - k as f64 * 0.1).abs() < 1e-12);
    }
    assert!(detect_collisions(&trace).is_empty() == (trace.frames.len() == 51));
}

#[test]
fn simulation_is_deterministic() {
    for (name, d, _) in TABLE1 {
        let c = compiled(d);
        let inst = sample_instance(&c.template, 1234);
        let a = simulate(&inst, &c.geometry).unwrap().to_jsonl();
        let b = simulate(&inst, &c.geometry).unwrap().to_jsonl();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn mismatched_instance_rejected() {
    let a = compiled(doc("straight_1"));
    let b = compiled(doc("curve"));
    let inst = sample_instance(&a.template, 0);
    assert!(matches!(simulate(&inst, &b.geometry), Err(SimError::DigestMismatch { .. })));
}

#[test]
fn head_on_ramp_follows_closed_form() {
    let c = compiled(doc("straight_1"));
    let mut checked = 0;
    for seed in 0..20 {
        let inst = sample_instance(&c.template, seed);
        let trace = simulate(&inst, &c.geometry).unwrap();
        let i = trace.actor_index("npc1").unwrap();
        let y0 = trace.frames[0].actors[i].y;
        assert!(y0 > 0.0);
        let Some(k) = trace.frames.iter().position(|f| (f.actors[i].y - y0).abs() > 1e-9) else {
            continue;
        };
        let t0 = trace.frames[k - 1].t;
        let delta = 2.0 * y0;
        for f in &trace.frames[k - 1..] {
            let want = ramp_at(delta, f.t - t0).0;
            assert!(((y0 - f.actors[i].y) - want).abs() <= 1e-9, "seed {seed} t {} y0 {y0} y {} want {want} k {k}", f.t, f.actors[i].y);
        }
        let crossed = trace.frames[k..]
            .iter()
            .find(|f| f.actors[i].y < 0.0)
            .map(|f| f.t - t0);
        if trace.end_time() >= t0 + RAMP_S {
            let dt = crossed.expect("lateral offset changes sign");
            assert!(dt <= RAMP_S, "seed {seed}: sign change after {dt}s");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

fn mirror_doc(from_left: bool) -> String {
    let d = doc("intersection_1").replace("traffic_signs: [traffic_light]", "traffic_signs: []");
    if from_left {
        d
    } else {
        d.replace("spatial_relation: left", "spatial_relation: right")
            .replace("from_left", "from_right")
    }
}

#[test]
fn left_and_right_crossings_are_point_reflections() {
    let l = compiled(&mirror_doc(true));
    let r = compiled(&mirror_doc(false));
    for seed in [0, 5, 77] {
        let tl = simulate(&sample_instance(&l.template, seed), &l.geometry).unwrap();
        let tr = simulate(&sample_instance(&r.template, seed), &r.geometry).unwrap();
        assert_eq!(tl.frames.len(), tr.frames.len());
        for (fl, fr) in tl.frames.iter().zip(&tr.frames) {
            let (el, er) = (&fl.actors[0], &fr.actors[0]);
            assert_eq!((el.x, el.y, el.heading, el.speed), (er.x, er.y, er.heading, er.speed));
            let (al, ar) = (&fl.actors[1], &fr.actors[1]);
            assert!((al.x + ar.x).abs() < 1e-9 && (al.y + ar.y).abs() < 1e-9, "t {}", fl.t);
            assert!(wrap_angle(al.heading + PI - ar.heading).abs() < 1e-9);
            assert!((al.speed - ar.speed).abs() < 1e-12);
        }
    }
}

fn pair_trace(g: &RoadGeometry, a: (f64, f64, f64), b: (f64, f64, f64)) -> Trace {
    synthetic_trace(g, &[("a", ActorType::Car), ("b", ActorType::Car)], 0.1, 5, |i, _| {
        let p = if i == 0 { a } else { b };
        (p.0, p.1, p.2, 0.0)
    })
}

#[test]
fn coincident_cars_collide_in_first_frame() {
    let g = compiled(doc("straight_1")).geometry;
    let ev = detect_collisions(&pair_trace(&g, (50.0, -1.75, 0.0), (50.0, -1.75, 0.0)));
    assert_eq!(ev.len(), 1);
    assert_eq!(ev[0].t, 0.0);
    assert_eq!(ev[0].actors, ("a".to_string(), "b".to_string()));
}

#[test]
fn distant_cars_never_collide() {
    let g = compiled(doc("straight_1")).geometry;
    assert!(detect_collisions(&pair_trace(&g, (50.0, -1.75, 0.0), (150.0, 1.75, PI))).is_empty());
}

#[test]
fn forty_five_degrees_at_three_metres_matches_sampling() {
    let (l, w) = footprint(ActorType::Car);
    for k in 0..16 {
        let bearing = k as f64 * PI / 8.0;
        let a = Obb { x: 0.0, y: 0.0, heading: 0.0, length: l, width: w };
        let b = Obb {
            x: 3.0 * bearing.cos(),
            y: 3.0 * bearing.sin(),
            heading: PI / 4.0,
            length: l,
            width: w,
        };
        assert_eq!(a.overlaps(&b), sampled_overlap(&a, &b), "bearing {bearing}");
    }
}

proptest! {
    #[test]
    fn overlap_is_symmetric(a in random_obb(), b in random_obb()) {
        prop_assert_eq!(a.overlaps(&b), b.overlaps(&a));
        prop_assert!(a.overlaps(&a));
    }
}
