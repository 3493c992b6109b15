//! Disentangled, interpretable speech representation toolkit.
//!
//! The representation has four time-aligned parts, all computed on one shared
//! frame grid: a Viterbi-decoded pitch contour, an entropy-based periodicity
//! track, multi-band A-weighted loudness, and a sparse phonetic posteriorgram
//! (SPPG). Two time-invariant ratios (`ratio_f`, `ratio_l`) ride along for
//! spectral-balance and volume control.
//!
//! The performance core is [`viterbi`]: a batched maximum-a-posteriori path
//! decoder over time-varying categorical distributions with banded triangular
//! transition kernels. Batch decoding is data-parallel across sequences via
//! rayon when the default `parallel` feature is enabled; with
//! `--no-default-features` it falls back to a sequential loop with identical
//! output.
//!
//! Feature archives use the `PMRP` container format (see [`archive`]); the
//! `promrep` binary exposes `analyze`, `edit`, `augment`, `harmonics`,
//! `metrics`, and `bench` subcommands over these modules.

pub mod archive;
pub mod augment;
pub mod bench;
pub mod dsp;
pub mod edit;
pub mod error;
pub mod harmonics;
pub mod metrics;
pub mod pipeline;
pub mod represent;
pub mod salience;
pub mod viterbi;

pub use error::{Error, Result};

/// Default analysis configuration shared by every feature extractor.
///
/// 22050 Hz with a 256-sample hop makes 64 frames correspond to exactly
/// 16384 samples; all tensors produced from one recording share the frame
/// count `1 + (len - WIN_SAMPLES) / HOP_SAMPLES`.
pub mod config {
    /// Analysis sample rate in Hz.
    pub const SAMPLE_RATE: u32 = 22050;
    /// FFT size for the loudness spectrogram.
    pub const FFT_SIZE: usize = 1024;
    /// Analysis window length in samples (defines the shared frame grid).
    pub const WIN_SAMPLES: usize = 1024;
    /// Hop between frame centers in samples.
    pub const HOP_SAMPLES: usize = 256;
    /// FFT size for the salience and harmonics spectrograms.
    pub const HARMONIC_FFT_SIZE: usize = 4096;
    /// Number of loudness bands.
    pub const LOUDNESS_BANDS: usize = 8;
    /// Default periodicity threshold for the voiced mask.
    pub const VOICED_THRESHOLD: f64 = 0.1625;
    /// Default percentile-k retained mass for SPPG sparsification.
    pub const PERCENTILE_K: f64 = 0.85;
    /// Default harmonic band-width parameter w.
    pub const HARMONIC_BAND_W: f64 = 0.8;

    /// Number of frames produced for `len` samples on the shared grid.
    pub fn frame_count(len: usize) -> usize {
        if len < WIN_SAMPLES {
            0
        } else {
            1 + (len - WIN_SAMPLES) / HOP_SAMPLES
        }
    }
}
