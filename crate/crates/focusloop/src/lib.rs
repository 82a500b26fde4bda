//! Sources, training workflows, broadcast service and CLI support for the
//! focusloop concentration/relaxation neurofeedback engine.
//!
//! The signal processing and classifiers live in [`focusloop_core`], which
//! is `no_std`; this crate adds files, sockets, threads and wall clocks.

pub mod bench;
pub mod config;
pub mod error;
pub mod ingestion;
pub mod model_file;
pub mod service;
pub mod workflow;

pub use error::{Error, Result};
pub use focusloop_core as core;
