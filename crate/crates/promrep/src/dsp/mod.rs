//! Signal-processing substrate: audio buffers, framing and magnitude
//! spectrograms, windowed-sinc resampling, A-weighting, and gain.

mod resample;
mod stft;
pub mod wav;

pub use resample::resample;
pub(crate) use stft::stft_magnitude_on_grid;
pub use stft::{stft_magnitude, Spectrogram};

use crate::error::{Error, Result};

/// Mono audio: samples nominally in `[-1, 1]` plus a sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample_rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("samples must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |m, &s| m.max(s.abs()))
    }
}

/// Standard A-weighting in dB, IEC 61672 closed form, 0 dB at 1 kHz
/// (+2.00 dB normalization), clamped to a -120 dB floor.
pub fn a_weight_db(freq: f64) -> f64 {
    if freq <= 0.0 {
        return -120.0;
    }
    let f2 = freq * freq;
    const C1: f64 = 20.6 * 20.6;
    const C2: f64 = 107.7 * 107.7;
    const C3: f64 = 737.9 * 737.9;
    const C4: f64 = 12194.0 * 12194.0;
    let num = C4 * f2 * f2;
    let den = (f2 + C1) * ((f2 + C2) * (f2 + C3)).sqrt() * (f2 + C4);
    let db = 20.0 * (num / den).log10() + 2.00;
    db.max(-120.0)
}

/// Scale every sample by `10^(db/20)`. No implicit clipping; callers that
/// need samples in `[-1, 1]` check the range themselves.
pub fn gain(audio: &AudioBuffer, db: f64) -> AudioBuffer {
    let factor = 10f64.powf(db / 20.0);
    AudioBuffer {
        samples: audio.samples.iter().map(|s| s * factor).collect(),
        sample_rate: audio.sample_rate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_weight_is_zero_db_at_one_khz() {
        assert!(a_weight_db(1000.0).abs() < 0.1);
    }

    #[test]
    fn a_weight_matches_published_value_at_100_hz() {
        // IEC table value: -19.1 dB.
        assert!((a_weight_db(100.0) - (-19.1)).abs() < 0.05);
    }

    #[test]
    fn a_weight_monotone_increasing_from_20_hz_to_1_khz() {
        let mut prev = a_weight_db(20.0);
        let mut f = 21.0;
        while f <= 1000.0 {
            let cur = a_weight_db(f);
            assert!(cur >= prev, "A-weight decreased at {f} Hz");
            prev = cur;
            f += 1.0;
        }
    }

    #[test]
    fn a_weight_at_zero_hz_hits_floor() {
        assert_eq!(a_weight_db(0.0), -120.0);
    }

    #[test]
    fn zero_gain_is_identity() {
        let a = AudioBuffer::new(vec![0.1, -0.5, 0.9], 22050).unwrap();
        assert_eq!(gain(&a, 0.0).samples, a.samples);
    }

    #[test]
    fn six_db_doubles_samples() {
        let a = AudioBuffer::new(vec![0.1, -0.25], 22050).unwrap();
        let g = gain(&a, 6.0206);
        for (x, y) in a.samples.iter().zip(g.samples.iter()) {
            assert!((y - 2.0 * x).abs() < 1e-6 * x.abs().max(1e-12));
        }
    }

    #[test]
    fn minus_120_db_is_one_millionth() {
        let a = AudioBuffer::new(vec![1.0], 44100).unwrap();
        let g = gain(&a, -120.0);
        assert!((g.samples[0] - 1e-6).abs() < 1e-15);
    }

    #[test]
    fn gain_round_trip_is_identity_within_1e12() {
        let a = AudioBuffer::new((0..100).map(|i| (i as f64 * 0.37).sin()).collect(), 8000).unwrap();
        let back = gain(&gain(&a, 7.3), -7.3);
        for (x, y) in a.samples.iter().zip(back.samples.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_zero_sample_rate_and_non_finite_samples() {
        assert!(AudioBuffer::new(vec![0.0], 0).is_err());
        assert!(AudioBuffer::new(vec![f64::NAN], 100).is_err());
    }
}
