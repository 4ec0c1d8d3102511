//! Rapid virtual simulation ecosystem.
//!
//! Author branching virtual-patient scenarios as JSON, validate them, replay
//! them deterministically in virtual time, publish them to a versioned
//! repository, ingest learners' event logs and turn those into dashboards
//! and trouble alarms for scenario creators.
//!
//! ```
//! use std::sync::Arc;
//! use rvse::engine::{replay, ActionScript, SessionInfo};
//! use rvse::scenario::{parse_scenario, validate};
//!
//! let scenario = parse_scenario(rvse::fixtures::TWO_STATE.as_bytes()).unwrap();
//! assert!(validate(&scenario).is_deployable());
//! let session = replay(Arc::new(scenario), &ActionScript::default(), SessionInfo::new("s1", "ann")).unwrap();
//! assert_eq!(session.history().last().unwrap().t_ms, 10_000);
//! ```
//!
//! The `rvse` binary wraps these pieces as `validate`, `run`, `serve`,
//! `analyze` and `synth` subcommands; see [`cli`].

pub mod cli;
pub mod client;

pub use rvse_core::{analytics, engine, fixtures, scenario, synth};
pub use rvse_repository as repository;
