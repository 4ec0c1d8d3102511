//! Rapid virtual simulation ecosystem: authoring, deterministic play and
//! learning analytics for timed, branching patient-deterioration scenarios.
//!
//! * [`scenario`]: document format, canonical bytes, checksums, validation.
//! * [`engine`]: virtual-time session state machine and replay.
//! * [`analytics`]: session summaries, dashboards and trouble detectors.
//! * [`synth`]: synthetic learner cohorts driven through the engine.

pub mod analytics;
pub mod engine;
pub mod fixtures;
pub mod scenario;
pub mod synth;
