//! DSP pitch-salience front-end and posteriorgram file ingestion.
//!
//! [`pitch_posteriorgram`] produces pitch posteriors from audio by harmonic
//! summation over the 1440-bin grid: no trained weights, deterministic, and
//! accurate enough to exercise everything downstream on synthetic material.
//! Phonetic posteriorgrams are inferred offline by external tools and come
//! in through [`load_posteriorgram`].

use std::path::Path;

use ndarray::Array2;

use crate::archive::FeatureArchive;
use crate::config;
use crate::dsp::{stft_magnitude_on_grid, AudioBuffer};
use crate::error::{Error, Result};
use crate::represent::{pitch_grid_labels, FrameMeta, PitchBinGrid, Posteriorgram};

/// Harmonics summed per grid bin, weighted 1/k.
const NUM_HARMONICS: usize = 5;
/// Sharpening exponent applied to the raw salience.
const SALIENCE_BETA: i32 = 2;
/// Frames whose RMS level falls below this emit the uniform distribution.
const SILENCE_DB: f64 = -80.0;
/// Analysis window for the salience spectrogram. Longer than the shared
/// 1024-sample grid window so the mainlobe resolves low pitches, but framed
/// on the same grid so frame counts line up across features.
const SALIENCE_WIN: usize = 2048;

/// Quadratic (3-point) interpolation of `row` at fractional bin position
/// `pos`, floored at zero. A parabola can place spectral peaks between bin
/// centers, which the 5-cent grid needs at low frequencies.
fn interp_magnitude(row: &[f64], pos: f64) -> f64 {
    let i = (pos.round() as usize).clamp(1, row.len() - 2);
    let d = pos - i as f64;
    let (lo, mid, hi) = (row[i - 1], row[i], row[i + 1]);
    let v = mid + 0.5 * d * (hi - lo) + 0.5 * d * d * (hi - 2.0 * mid + lo);
    v.max(0.0)
}

/// Compute a pitch posteriorgram over the 1440-bin grid from audio at the
/// default analysis rate.
///
/// Per frame: `S(q) = sum_{k=1..5} mag(k * hz[q]) / k` from a 4096-point
/// magnitude spectrogram, floored at 0, raised to beta = 2, and normalized
/// to sum one. Near-silent frames (level below -80 dBFS) emit the uniform
/// distribution.
pub fn pitch_posteriorgram(audio: &AudioBuffer) -> Result<Posteriorgram> {
    if audio.sample_rate != config::SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "audio must be at the {} Hz analysis rate, got {} (resample first)",
            config::SAMPLE_RATE,
            audio.sample_rate
        )));
    }
    if audio.len() < config::WIN_SAMPLES {
        return Err(Error::invalid(format!(
            "audio of {} samples is shorter than one {}-sample analysis window",
            audio.len(),
            config::WIN_SAMPLES
        )));
    }
    let num_frames = config::frame_count(audio.len());
    let spec = stft_magnitude_on_grid(
        audio,
        config::HARMONIC_FFT_SIZE,
        SALIENCE_WIN,
        config::HOP_SAMPLES,
        num_frames,
    )?;
    let grid = PitchBinGrid::new();
    let bin_hz = spec.bin_hz();
    let nyquist_guard = (spec.num_bins() - 2) as f64;

    // Fractional FFT-bin positions of every (grid bin, harmonic) pair.
    let positions: Vec<[f64; NUM_HARMONICS]> = grid
        .hz()
        .iter()
        .map(|&hz| {
            std::array::from_fn(|k| {
                let pos = (k + 1) as f64 * hz / bin_hz;
                if pos < nyquist_guard {
                    pos
                } else {
                    -1.0
                }
            })
        })
        .collect();

    let q = grid.len();
    let uniform = 1.0 / q as f64;
    let mut probs = Array2::zeros((num_frames, q));
    let mut salience = vec![0.0f64; q];
    for t in 0..num_frames {
        let level = frame_level_db(audio, t);
        let mut row_out = probs.row_mut(t);
        if level < SILENCE_DB {
            row_out.fill(uniform);
            continue;
        }
        let row = spec.magnitudes.row(t);
        let row = row.as_slice().expect("contiguous spectrogram row");
        let mut total = 0.0;
        for (s, pos) in salience.iter_mut().zip(positions.iter()) {
            let mut acc = 0.0;
            for (k, &p) in pos.iter().enumerate() {
                if p >= 0.0 {
                    acc += interp_magnitude(row, p) / (k + 1) as f64;
                }
            }
            let sharpened = acc.max(0.0).powi(SALIENCE_BETA);
            *s = sharpened;
            total += sharpened;
        }
        if total > 0.0 {
            for (dst, &s) in row_out.iter_mut().zip(salience.iter()) {
                *dst = s / total;
            }
        } else {
            row_out.fill(uniform);
        }
    }

    Posteriorgram::new(probs, pitch_grid_labels(&grid), FrameMeta::default())
}

/// RMS level of the shared analysis frame centered at `t * hop`, in dBFS.
fn frame_level_db(audio: &AudioBuffer, t: usize) -> f64 {
    let n = audio.len() as i64;
    let center = (t * config::HOP_SAMPLES) as i64;
    let half = (config::WIN_SAMPLES / 2) as i64;
    let mut acc = 0.0;
    for k in 0..config::WIN_SAMPLES as i64 {
        let mut idx = center - half + k;
        if idx < 0 {
            idx = -idx;
        }
        if idx >= n {
            idx = 2 * (n - 1) - idx;
        }
        let s = audio.samples[idx.clamp(0, n - 1) as usize];
        acc += s * s;
    }
    20.0 * ((acc / config::WIN_SAMPLES as f64).sqrt() + 1e-10).log10()
}

/// Load a posteriorgram tensor from a feature archive and validate it.
///
/// The archive must contain a tensor named `ppg`, or exactly one labeled
/// tensor. Rows must sum to 1 within 1e-4 (renormalized when off by more
/// than 1e-9); labels must match `expected_labels` exactly.
pub fn load_posteriorgram(
    path: impl AsRef<Path>,
    expected_labels: &[String],
) -> Result<Posteriorgram> {
    let path = path.as_ref();
    let archive = FeatureArchive::read(path)?;
    let labeled: Vec<_> = archive
        .tensors()
        .iter()
        .filter(|t| t.labels.is_some())
        .collect();
    let tensor = archive
        .tensor("ppg")
        .or_else(|| (labeled.len() == 1).then(|| labeled[0]))
        .ok_or_else(|| {
            Error::format(format!(
                "{}: no 'ppg' tensor and no unique labeled tensor",
                path.display()
            ))
        })?;

    let labels = tensor
        .labels
        .as_ref()
        .ok_or_else(|| Error::format(format!("tensor '{}' carries no labels", tensor.name)))?;
    if labels != expected_labels {
        return Err(Error::format(format!(
            "label mismatch: archive has [{}], expected [{}]",
            labels.join(", "),
            expected_labels.join(", ")
        )));
    }

    let (t_len, q) = tensor.data.dim();
    let mut probs = Array2::zeros((t_len, q));
    for t in 0..t_len {
        let mut sum = 0.0f64;
        for i in 0..q {
            let v = tensor.data[(t, i)] as f64;
            if v.is_nan() {
                return Err(Error::format(format!(
                    "frame {t}, label '{}': NaN entry",
                    labels[i]
                )));
            }
            if v < 0.0 {
                return Err(Error::format(format!(
                    "frame {t}, label '{}': negative probability {v}",
                    labels[i]
                )));
            }
            probs[(t, i)] = v;
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::format(format!(
                "frame {t} sums to {sum}, expected 1 within 1e-4"
            )));
        }
        if (sum - 1.0).abs() > 1e-9 {
            for i in 0..q {
                probs[(t, i)] /= sum;
            }
        }
    }

    Posteriorgram::new(
        probs,
        labels.clone(),
        FrameMeta {
            sample_rate: archive.sample_rate,
            hop_samples: archive.hop,
        },
    )
}
