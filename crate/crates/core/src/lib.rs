//! A multi-label classification toolkit built around conditional label
//! dependence: independent classifiers, classifier chains and their
//! ensembles, Bayesian classifier chains over learned structures, and
//! classifier trellises (directed and undirected) that scale the idea to
//! very large label sets.
//!
//! The crate also ships the supporting machinery those methods need end
//! to end: dataset I/O and synthetic generators, a logistic SGD base
//! learner, mutual-information structure learning, Monte Carlo inference,
//! evaluation metrics with rank statistics, a sensor-grid localization
//! testbed, and a reproducible benchmark harness. Every seeded operation
//! is deterministic for a fixed seed.

pub mod data;
pub mod error;
pub mod harness;
pub mod inference;
pub mod learner;
pub mod localization;
pub mod metrics;
pub mod models;
pub mod structure;
mod util;

pub use error::{Error, Result};
