//! Signal processing, simulation, fusion and evaluation toolkit for
//! multi-modal multi-channel target speech separation.
//!
//! The crate is organised bottom-up:
//!
//! - [`io`]: WAV, MMTS tensor files and JSON simulation manifests
//! - [`dsp`]: sqrt-Hann STFT analysis and overlap-add synthesis
//! - [`spatial`]: LPS, IPD, TPD and directional features for a mic array
//! - [`room`]: image-source RIRs and spatialised mixture synthesis
//! - [`fusion`]: embedding alignment, factorized and rule-based attention,
//!   mask estimation helpers
//! - [`metrics`]: SI-SDR, bucketed reports and real-time factor
//! - [`pipeline`]: file-based stages driven by the `mmtss` binary

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod fusion;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod room;
pub mod spatial;
pub mod waveform;

pub use error::{Error, Result};
pub use waveform::MultiChannelWaveform;
