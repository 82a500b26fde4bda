//! Allocation-only core of the focusloop neurofeedback engine.
//!
//! Everything here is pure computation: the sample/window types and the
//! sliding buffer, common spatial pattern filters, the analytic hierarchy
//! channel selector, the linear SVM and the small feedforward network, the
//! cross-validation harness, the OSC wire codec, and the per-tick
//! classification + plane state fold. IO, clocks and networking live in the
//! `focusloop` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod ahp;
pub mod csp;
pub mod error;
pub mod eval;
pub mod fnn;
pub mod linalg;
pub mod osc;
pub mod signal;
pub mod svm;
pub mod tick;

pub use error::{Error, Result};
pub use signal::{
    Band, ChannelId, ChannelSet, EegSample, Electrode, StateLabel, Trial, Window, WindowBuffer,
};

/// Nominal Muse band-power output rate.
pub const SAMPLE_RATE_HZ: u32 = 10;

/// Samples grouped into one classification window.
pub const WINDOW_LEN: usize = 5;
