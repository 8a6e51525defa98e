//! End-to-end orchestration: DSL text to Scenic program, sampled instances,
//! traces and violation reports.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::batch::{map_indexed, ExecMode};
use crate::digest::{fnv64, hex64};
use crate::dsl::{serialize_dsl, ValidationIssue};
use crate::monitor::{monitor, summary_csv, MonitorError, ViolationReport};
use crate::normalize::{normalize_document, NormalizedSpec, SynonymTable};
use crate::sampler::{sample_batch_with, write_manifest, ScenarioInstance, DEFAULT_SAMPLES};
use crate::sim::{build_geometry, simulate_with, RoadGeometry, SimConfig, SimError, Trace};
use crate::synth::{build_template, render_scenic, ScenarioTemplate, ScenicProgram, SynthError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("document has {} validation issue(s)", .0.len())]
    Invalid(Vec<ValidationIssue>),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub samples: usize,
    pub base_seed: u64,
    pub mode: ExecMode,
    pub sim: SimConfig,
    pub synonyms: SynonymTable,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            base_seed: 0,
            mode: ExecMode::default(),
            sim: SimConfig::default(),
            synonyms: SynonymTable::builtin(),
        }
    }
}

/// Everything derived from one document before sampling.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub normalized: NormalizedSpec,
    pub template: ScenarioTemplate,
    pub program: ScenicProgram,
    pub geometry: RoadGeometry,
}

pub fn compile(source: &str, cfg: &PipelineConfig) -> Result<Compiled, PipelineError> {
    let normalized = normalize_document(source, &cfg.synonyms, cfg.base_seed)
        .map_err(PipelineError::Invalid)?;
    let template = build_template(&normalized)?;
    let program = render_scenic(&template);
    let geometry = build_geometry(&template);
    Ok(Compiled {
        normalized,
        template,
        program,
        geometry,
    })
}

/// Simulates and monitors one instance. The monitor sees the trace at its
/// serialized precision, so re-monitoring a written trace file reproduces
/// the report exactly.
pub fn run_instance(
    instance: &ScenarioInstance,
    compiled: &Compiled,
    sim: SimConfig,
) -> Result<(Trace, ViolationReport), PipelineError> {
    let trace = simulate_with(instance, &compiled.geometry, sim)?.quantized();
    let report = monitor(&trace, &compiled.normalized.spec.oracle, &compiled.geometry)?;
    Ok((trace, report))
}

#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub instance: ScenarioInstance,
    pub report: ViolationReport,
    /// FNV-1a 64 of the trace JSON Lines text.
    pub trace_digest: u64,
    pub frames: usize,
}

/// Where per-instance files go, if anywhere.
#[derive(Debug, Clone, Copy)]
pub struct Sinks<'a> {
    pub traces: Option<&'a Path>,
    pub reports: Option<&'a Path>,
}

impl Sinks<'_> {
    pub const NONE: Sinks<'static> = Sinks {
        traces: None,
        reports: None,
    };
}

pub fn seed_file(seed: u64, ext: &str) -> String {
    format!("seed_{seed:06}.{ext}")
}

pub fn run_batch(
    compiled: &Compiled,
    cfg: &PipelineConfig,
    sinks: Sinks<'_>,
) -> Result<Vec<InstanceOutcome>, PipelineError> {
    let instances = sample_batch_with(&compiled.template, cfg.samples, cfg.base_seed, cfg.mode);
    map_indexed(instances.len(), cfg.mode, |i| {
        let instance = &instances[i];
        let (trace, report) = run_instance(instance, compiled, cfg.sim)?;
        let text = trace.to_jsonl();
        if let Some(dir) = sinks.traces {
            atomic_write(&dir.join(seed_file(instance.instance_seed, "jsonl")), text.as_bytes())?;
        }
        if let Some(dir) = sinks.reports {
            atomic_write(
                &dir.join(seed_file(instance.instance_seed, "json")),
                report.to_canonical_json().as_bytes(),
            )?;
        }
        Ok(InstanceOutcome {
            instance: instance.clone(),
            report,
            trace_digest: fnv64(text.as_bytes()),
            frames: trace.frames.len(),
        })
    })
    .into_iter()
    .collect()
}

/// Writes via a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Result of one document through the whole pipeline.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub name: String,
    pub compiled: Compiled,
    pub outcomes: Vec<InstanceOutcome>,
}

impl ScenarioRun {
    pub fn reports(&self) -> Vec<ViolationReport> {
        self.outcomes.iter().map(|o| o.report.clone()).collect()
    }

    pub fn hit_count(&self) -> usize {
        self.outcomes.iter().filter(|o| o.report.targeted_hit).count()
    }

    /// Report of the first seed, used for per-road-type counts.
    pub fn representative(&self) -> Option<&ViolationReport> {
        self.outcomes.first().map(|o| &o.report)
    }

    /// Digest over every artifact of the run, in seed order.
    pub fn artifact_digest(&self) -> u64 {
        let mut all = String::new();
        all.push_str(&self.compiled.program.source_text);
        all.push_str(&self.compiled.template.to_canonical_json());
        for o in &self.outcomes {
            all.push_str(&hex64(o.trace_digest));
            all.push_str(&o.report.to_canonical_json());
        }
        fnv64(all.as_bytes())
    }
}

/// Runs one document, writing artifacts under `out/<name>/` when `out` is
/// given.
pub fn run_document(
    name: &str,
    source: &str,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<ScenarioRun, PipelineError> {
    let compiled = compile(source, cfg)?;
    let dir = out.map(|o| o.join(name));
    let (traces, reports) = match &dir {
        Some(d) => (Some(d.join("traces")), Some(d.join("reports"))),
        None => (None, None),
    };
    if let Some(d) = &dir {
        atomic_write(
            &d.join("normalized.yaml"),
            serialize_dsl(&compiled.normalized.spec).as_bytes(),
        )?;
        atomic_write(
            &d.join("template.json"),
            compiled.template.to_canonical_json_pretty().as_bytes(),
        )?;
        atomic_write(
            &d.join(format!("{name}.scenic")),
            compiled.program.source_text.as_bytes(),
        )?;
        atomic_write(
            &d.join("geometry.json"),
            compiled.geometry.to_canonical_json().as_bytes(),
        )?;
    }
    let outcomes = run_batch(
        &compiled,
        cfg,
        Sinks {
            traces: traces.as_deref(),
            reports: reports.as_deref(),
        },
    )?;
    let run = ScenarioRun {
        name: name.to_string(),
        compiled,
        outcomes,
    };
    if let Some(d) = &dir {
        let instances: Vec<ScenarioInstance> =
            run.outcomes.iter().map(|o| o.instance.clone()).collect();
        atomic_write(&d.join("instances.jsonl"), write_manifest(&instances).as_bytes())?;
        atomic_write(&d.join("summary.csv"), summary_csv(&run.reports()).as_bytes())?;
    }
    Ok(run)
}

/// File-name-safe form of a scenario name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "scenario".into()
    } else {
        s
    }
}
