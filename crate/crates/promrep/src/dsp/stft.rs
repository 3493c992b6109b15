//! Hann-windowed magnitude spectrograms on the reflect-padded frame grid.

use ndarray::Array2;
use rustfft::{num_complex::Complex, FftPlanner};

use super::AudioBuffer;
use crate::error::{Error, Result};

/// Magnitude spectrogram with its framing metadata.
///
/// `magnitudes` is `T x F` with `F = fft_size / 2 + 1`;
/// `freqs[i] = i * sample_rate / fft_size`.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub freqs: Vec<f64>,
    pub hop_samples: usize,
    pub win_samples: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Width of one FFT bin in Hz.
    pub fn bin_hz(&self) -> f64 {
        self.sample_rate as f64 / self.fft_size as f64
    }
}

/// Periodic Hann window.
fn hann(win: usize) -> Vec<f64> {
    (0..win)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / win as f64).cos())
        .collect()
}

/// Reflect an out-of-range index back into `[0, len)` (librosa-style,
/// without repeating the edge sample).
fn reflect(idx: i64, len: usize) -> usize {
    let len = len as i64;
    let mut i = idx;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= len {
            i = 2 * (len - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Hann-windowed, reflect-center-padded magnitude spectrogram.
///
/// Frame `t` is centered at sample `t * hop`; the frame count is exactly
/// `1 + (len - win) / hop`.
pub fn stft_magnitude(
    audio: &AudioBuffer,
    fft_size: usize,
    win_samples: usize,
    hop_samples: usize,
) -> Result<Spectrogram> {
    if hop_samples == 0 || hop_samples > win_samples || win_samples > fft_size {
        return Err(Error::invalid(
            "framing requires 0 < hop <= win <= fft_size",
        ));
    }
    if audio.len() < win_samples {
        return Err(Error::invalid(format!(
            "audio of {} samples is shorter than one {win_samples}-sample window",
            audio.len()
        )));
    }
    let num_frames = 1 + (audio.len() - win_samples) / hop_samples;
    frame_spectrogram(audio, fft_size, win_samples, hop_samples, num_frames)
}

/// Magnitude spectrogram framed on an externally fixed grid: `num_frames`
/// frames centered at `t * hop`, independent of this call's window length.
/// Used when a longer analysis window must stay aligned with the shared
/// frame grid (salience, harmonics).
pub(crate) fn stft_magnitude_on_grid(
    audio: &AudioBuffer,
    fft_size: usize,
    win_samples: usize,
    hop_samples: usize,
    num_frames: usize,
) -> Result<Spectrogram> {
    if num_frames == 0 {
        return Err(Error::invalid("frame grid is empty"));
    }
    frame_spectrogram(audio, fft_size, win_samples, hop_samples, num_frames)
}

fn frame_spectrogram(
    audio: &AudioBuffer,
    fft_size: usize,
    win_samples: usize,
    hop_samples: usize,
    num_frames: usize,
) -> Result<Spectrogram> {
    if win_samples > fft_size {
        return Err(Error::invalid("win_samples must not exceed fft_size"));
    }
    let window = hann(win_samples);
    let num_bins = fft_size / 2 + 1;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(0.0, 0.0); fft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    let n = audio.len();
    let half = win_samples as i64 / 2;
    let mut magnitudes = Array2::zeros((num_frames, num_bins));
    for t in 0..num_frames {
        let center = (t * hop_samples) as i64;
        for (k, w) in window.iter().enumerate() {
            let src = reflect(center - half + k as i64, n);
            buf[k] = Complex::new(audio.samples[src] * w, 0.0);
        }
        for item in buf.iter_mut().take(fft_size).skip(win_samples) {
            *item = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        let mut row = magnitudes.row_mut(t);
        for (b, out) in row.iter_mut().enumerate() {
            *out = buf[b].norm();
        }
    }

    let freqs = (0..num_bins)
        .map(|i| i as f64 * audio.sample_rate as f64 / fft_size as f64)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        freqs,
        hop_samples,
        win_samples,
        fft_size,
        sample_rate: audio.sample_rate,
    })
}
