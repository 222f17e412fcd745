//! Core algorithms for NOMAD, a learned perceptual distance between audio
//! clips that works against non-matching clean references.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs: file formats, subprocesses and the command line
//! live in the `nomad` companion crate.
//!
//! Pipeline overview:
//!
//! * [`signal`] and [`spectrogram`]: waveform container, windowed-sinc
//!   resampling and the log mel-band front-end.
//! * [`nsim`]: patchwise Neurogram Similarity Index Measure between a clean
//!   and a degraded spectrogram.
//! * [`degrade`]: seeded degradation families (clipping, additive noise,
//!   codec proxies, reverberation probe).
//! * [`triplet`]: easy/hard triplet sampling guided by NSIM.
//! * [`net`]: the convolutional embedding network with hand-written
//!   reverse-mode gradients and the triplet margin loss.
//! * [`train`]: SGD training loop with validation early stopping.
//! * [`score`]: embedding distances, pooled non-matching-reference scores and
//!   the multi-layer feature loss.
//! * [`eval`]: Spearman/Pearson correlations and per-condition aggregation.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod fft;
pub mod net;
pub mod nsim;
pub mod score;
pub mod seed;
pub mod signal;
pub mod spectrogram;
pub mod train;
pub mod triplet;

pub use error::{Error, Result};
pub use net::{EmbeddingModel, Embedding, EncoderConfig};
pub use signal::Waveform;
pub use spectrogram::{Spectrogram, SpectrogramConfig};

/// Sample rate every analysis runs at.
pub const CANONICAL_RATE: u32 = 16_000;
