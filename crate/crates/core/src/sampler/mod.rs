//! Reproducible instantiation of template free parameters.
//!
//! Every draw comes from its own SplitMix64 stream keyed by FNV-1a over
//! `(seed, label, index)`, so a binding depends only on the seed and the
//! parameter name, never on iteration order or thread scheduling.

use std::collections::BTreeMap;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::batch::{map_indexed, ExecMode};
use crate::digest::Digest;
use crate::synth::{ParamRange, ScenarioTemplate};

pub const DEFAULT_SAMPLES: usize = 2000;

/// Generator for the `(seed, label, index)` stream.
pub fn stream_rng(seed: u64, label: &str, index: u64) -> SplitMix64 {
    let key = Digest::new().u64(seed).str(label).u64(index).finish();
    SplitMix64::seed_from_u64(key)
}

/// First output of the `(seed, label, index)` stream.
pub fn stream(seed: u64, label: &str, index: u64) -> u64 {
    stream_rng(seed, label, index).next_u64()
}

/// Maps a 64-bit output to `[0, 1)` with 53 bits of precision.
pub fn unit_interval(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw from `range` given a 64-bit output.
pub fn draw(range: &ParamRange, x: u64) -> f64 {
    let v = range.low + (range.high - range.low) * unit_interval(x);
    v.min(range.high)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub scenario_id: String,
    pub template_digest: u64,
    pub instance_seed: u64,
    pub bindings: BTreeMap<String, f64>,
    pub fixed: BTreeMap<String, f64>,
}

impl ScenarioInstance {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.bindings
            .get(name)
            .or_else(|| self.fixed.get(name))
            .copied()
    }

    /// Canonical JSON, sorted keys, one line.
    pub fn to_json_line(&self) -> String {
        let v = serde_json::to_value(self).expect("instance serializes");
        serde_json::to_string(&v).expect("value serializes")
    }
}

/// Draws every free parameter of `template` for `seed`.
pub fn sample_instance(template: &ScenarioTemplate, seed: u64) -> ScenarioInstance {
    sample_with_digest(template, template.digest(), seed)
}

fn sample_with_digest(template: &ScenarioTemplate, digest: u64, seed: u64) -> ScenarioInstance {
    let mut names: Vec<&ParamRange> = template.free_parameters.iter().collect();
    names.sort_by(|a, b| a.name.cmp(&b.name));
    let bindings = names
        .into_iter()
        .map(|r| (r.name.clone(), draw(r, stream(seed, &r.name, 0))))
        .collect();
    ScenarioInstance {
        scenario_id: template.scenario_id().to_string(),
        template_digest: digest,
        instance_seed: seed,
        bindings,
        fixed: template.fixed_parameters.clone(),
    }
}

/// Instances for seeds `base_seed..base_seed + n`, in seed order.
pub fn sample_batch(template: &ScenarioTemplate, n: usize, base_seed: u64) -> Vec<ScenarioInstance> {
    sample_batch_with(template, n, base_seed, ExecMode::default())
}

pub fn sample_batch_with(
    template: &ScenarioTemplate,
    n: usize,
    base_seed: u64,
    mode: ExecMode,
) -> Vec<ScenarioInstance> {
    let digest = template.digest();
    map_indexed(n, mode, |i| {
        sample_with_digest(template, digest, base_seed.wrapping_add(i as u64))
    })
}

/// Instance manifest: one canonical JSON object per line.
pub fn write_manifest(instances: &[ScenarioInstance]) -> String {
    let mut out = String::new();
    for inst in instances {
        out.push_str(&inst.to_json_line());
        out.push('\n');
    }
    out
}

pub fn read_manifest(text: &str) -> Result<Vec<ScenarioInstance>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
