//! Crash-report scenario toolkit.
//!
//! The crate turns scenario documents written in the Extended Scenic DSL into
//! runnable test material:
//!
//! * [`dsl`] parses, validates and canonically serializes scenario documents.
//! * [`normalize`] folds free-text values into DSL tokens and fills defaults.
//! * [`synth`] compiles a normalized scenario into a [`synth::ScenarioTemplate`]
//!   and a Scenic program.
//! * [`sampler`] draws reproducible concrete instances from a template.
//! * [`sim`] realizes the road topology and runs scripted kinematic actors.
//! * [`monitor`] checks traces against California Vehicle Code rule oracles.
//! * [`extract`] builds extraction/validation prompts and talks to a chat
//!   completion endpoint (or offline fixtures).
//! * [`eval`] scores extraction accuracy, rater agreement and violation counts.
//! * [`batch`] and [`pipeline`] run everything end to end, in parallel when the
//!   `parallel` feature is enabled.

pub mod batch;
pub mod digest;
pub mod dsl;
pub mod eval;
pub mod extract;
pub mod monitor;
pub mod normalize;
pub mod pipeline;
pub mod sampler;
pub mod sim;
pub mod synth;

pub use dsl::{parse_dsl, serialize_dsl, validate_spec, ScenarioSpec, ValidationIssue};
pub use monitor::{monitor, ViolationReport};
pub use normalize::{apply_defaults, NormalizedSpec};
pub use sampler::{sample_batch, sample_instance, ScenarioInstance};
pub use sim::{build_geometry, simulate, RoadGeometry, Trace};
pub use synth::{build_template, render_scenic, ScenarioTemplate, ScenicProgram};
