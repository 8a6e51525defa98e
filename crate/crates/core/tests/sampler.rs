mod common;

use std::collections::HashSet;

use common::TABLE1;
use crashscene::batch::ExecMode;
use crashscene::normalize::{normalize_document, SynonymTable};
use crashscene::sampler::*;
use crashscene::synth::{build_template, ScenarioTemplate};
use proptest::prelude::*;

fn template() -> ScenarioTemplate {
    let n = normalize_document(TABLE1[0].1, &SynonymTable::builtin(), 0).unwrap();
    build_template(&n).unwrap()
}

#[test]
fn bindings_stay_in_bounds() {
    let t = template();
    for inst in sample_batch(&t, 2000, 0) {
        for r in &t.free_parameters {
            let v = inst.bindings[&r.name];
            assert!(r.contains(v), "{} = {v} outside [{}, {}]", r.name, r.low, r.high);
        }
    }
}

#[test]
fn degenerate_range_is_exact() {
    let mut t = template();
    for r in &mut t.free_parameters {
        if r.name == "ego_speed" {
            r.low = 10.0;
            r.high = 10.0;
        }
    }
    for seed in 0..100 {
        assert_eq!(sample_instance(&t, seed).bindings["ego_speed"], 10.0);
    }
}

#[test]
fn batch_seeds_and_singleton() {
    let t = template();
    let batch = sample_batch(&t, 2000, 0);
    assert_eq!(batch.len(), 2000);
    assert!(batch.iter().enumerate().all(|(i, b)| b.instance_seed == i as u64));
    assert_eq!(sample_batch(&t, 1, 42), vec![sample_instance(&t, 42)]);
    assert!(batch.iter().all(|b| b.template_digest == t.digest()));
}

#[test]
fn sequential_and_parallel_agree() {
    let t = template();
    assert_eq!(
        sample_batch_with(&t, 500, 7, ExecMode::Sequential),
        sample_batch_with(&t, 500, 7, ExecMode::Parallel { workers: Some(4) })
    );
}

#[test]
fn uniform_mean() {
    let t = template();
    let n = 2000;
    let mean: f64 =
        sample_batch(&t, n, 0).iter().map(|i| i.bindings["ego_speed"]).sum::<f64>() / n as f64;
    assert!((mean - 10.0).abs() <= 0.1, "mean {mean}");
}

#[test]
fn streams_do_not_collide() {
    let mut seen = HashSet::new();
    for seed in 0..2500u64 {
        for label in ["ego_speed", "npc_speed", "EGO_INIT_DIST", "NPC_INIT_DIST"] {
            assert!(seen.insert(stream(seed, label, 0)), "collision at {seed}/{label}");
        }
    }
    assert_eq!(seen.len(), 10_000);
}

#[test]
fn manifest_round_trip_is_bit_exact() {
    let t = template();
    let batch = sample_batch(&t, 50, 100);
    let text = write_manifest(&batch);
    let back = read_manifest(&text).unwrap();
    assert_eq!(back, batch);
    for (a, b) in back.iter().zip(&batch) {
        for (k, v) in &a.bindings {
            assert_eq!(v.to_bits(), b.bindings[k].to_bits());
        }
    }
    assert_eq!(write_manifest(&back), text);
}

proptest! {
    #[test]
    fn same_seed_same_bits(seed in any::<u64>()) {
        let t = template();
        let a = sample_instance(&t, seed);
        let b = sample_instance(&t, seed);
        for (k, v) in &a.bindings {
            prop_assert_eq!(v.to_bits(), b.bindings[k].to_bits());
        }
    }

    #[test]
    fn unit_interval_is_half_open(x in any::<u64>()) {
        let u = unit_interval(x);
        prop_assert!((0.0..1.0).contains(&u));
    }
}
