//! Harmonic trajectory estimation (H1, H2) by band-limited Viterbi decoding
//! on the log-magnitude spectrogram, plus spectral centroid.

use ndarray::Array2;

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};
use crate::represent::{PitchContour, VoicedMask};
use crate::viterbi::{decode, TransitionModel};

/// Per-frame F0/H1/H2 in Hz. Harmonic values are meaningful only where
/// `valid` is set; unvoiced frames hold the nearest voiced value.
#[derive(Debug, Clone)]
pub struct HarmonicTrack {
    pub f0: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Per-frame spectral centroid; silent frames are flagged invalid.
#[derive(Debug, Clone)]
pub struct CentroidTrack {
    pub hz: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Estimate H1 and H2 trajectories from a (4096-point) magnitude
/// spectrogram and an aligned pitch contour.
///
/// Harmonic `i` is decoded over the FFT bins inside
/// `((i + w) * f0[t], (i + 1/w) * f0[t])`: emissions are the log-softmax of
/// the log-magnitudes inside the band (`-inf` outside), the transition is
/// the banded triangular kernel with a one-octave jump cap converted to bin
/// units, and the decoded bin is refined by quadratic interpolation over its
/// 3-bin log-magnitude neighborhood. Unvoiced frames carry the last voiced
/// value (or the first voiced value at the start); frames whose band is
/// empty are marked invalid rather than failing.
pub fn estimate_harmonics(
    spec: &Spectrogram,
    f0: &PitchContour,
    voiced: &VoicedMask,
    w: f64,
) -> Result<HarmonicTrack> {
    if !(0.0 < w && w < 1.0) {
        return Err(Error::invalid(format!("w must be in (0, 1), got {w}")));
    }
    let t_len = spec.num_frames();
    if f0.hz.len() != t_len || voiced.flags.len() != t_len {
        return Err(Error::invalid(format!(
            "pitch ({}) and voiced ({}) frames must match the spectrogram ({t_len})",
            f0.hz.len(),
            voiced.flags.len()
        )));
    }
    if t_len == 0 {
        return Err(Error::invalid("empty spectrogram"));
    }

    let log_mag = spec.magnitudes.mapv(|m| (m + 1e-10).ln());
    let h1 = decode_harmonic(spec, &log_mag, f0, voiced, 1, w)?;
    let h2 = decode_harmonic(spec, &log_mag, f0, voiced, 2, w)?;

    let valid: Vec<bool> = (0..t_len)
        .map(|t| voiced.flags[t] && h1.band_ok[t] && h2.band_ok[t])
        .collect();

    Ok(HarmonicTrack {
        f0: f0.hz.clone(),
        h1: hold_invalid(&h1.hz, &valid),
        h2: hold_invalid(&h2.hz, &valid),
        valid,
    })
}

struct DecodedHarmonic {
    hz: Vec<f64>,
    band_ok: Vec<bool>,
}

fn decode_harmonic(
    spec: &Spectrogram,
    log_mag: &Array2<f64>,
    f0: &PitchContour,
    voiced: &VoicedMask,
    harmonic: usize,
    w: f64,
) -> Result<DecodedHarmonic> {
    let t_len = spec.num_frames();
    let bins = spec.num_bins();
    let bin_hz = spec.bin_hz();
    let i = harmonic as f64;

    // Per-frame band edges in Hz; empty bands (near Nyquist) are flagged.
    let mut lo_hz = vec![0.0; t_len];
    let mut hi_hz = vec![0.0; t_len];
    let mut band_ok = vec![false; t_len];
    for t in 0..t_len {
        let f = f0.hz[t];
        lo_hz[t] = (i + w) * f;
        hi_hz[t] = (i + 1.0 / w) * f;
        let lo_bin = (lo_hz[t] / bin_hz).ceil() as usize;
        let hi_bin = (hi_hz[t] / bin_hz).floor() as usize;
        band_ok[t] = lo_bin < bins && hi_bin < bins && lo_bin <= hi_bin;
    }

    // One-octave jump cap in bin units, measured at the harmonic's highest
    // legitimate frequency.
    let max_voiced_f0 = f0
        .hz
        .iter()
        .zip(voiced.flags.iter())
        .filter(|(_, &v)| v)
        .map(|(&h, _)| h)
        .fold(0.0f64, f64::max);
    let cap_hz = (i + 1.0) * if max_voiced_f0 > 0.0 { max_voiced_f0 } else { 200.0 };
    let max_jump = ((cap_hz / bin_hz).ceil() as usize).clamp(1, bins - 1);
    let transition = TransitionModel::triangular(bins, max_jump)?;
    let initial = vec![-(bins as f64).ln(); bins];

    // Emissions: in-band log-softmax of log-magnitudes; uniform for frames
    // with no usable band (unvoiced movement stays unconstrained there).
    let uniform = -(bins as f64).ln();
    let mut obs = Array2::from_elem((t_len, bins), f64::NEG_INFINITY);
    for t in 0..t_len {
        if !band_ok[t] || !voiced.flags[t] {
            obs.row_mut(t).fill(uniform);
            continue;
        }
        let lo_bin = (lo_hz[t] / bin_hz).ceil() as usize;
        let hi_bin = (hi_hz[t] / bin_hz).floor() as usize;
        let row = log_mag.row(t);
        let mut max = f64::NEG_INFINITY;
        for b in lo_bin..=hi_bin {
            max = max.max(row[b]);
        }
        let mut lse = 0.0;
        for b in lo_bin..=hi_bin {
            lse += (row[b] - max).exp();
        }
        let lse = max + lse.ln();
        for b in lo_bin..=hi_bin {
            obs[(t, b)] = row[b] - lse;
        }
    }

    let path = decode(obs.view(), &transition, &initial)?;

    let mut hz = vec![0.0; t_len];
    for t in 0..t_len {
        let b = path.states[t];
        let refined_bin = quadratic_peak(log_mag.row(t).as_slice().unwrap(), b);
        let mut f = refined_bin * bin_hz;
        if band_ok[t] {
            // Keep the refinement strictly inside the open band.
            let margin = 1e-6 * (hi_hz[t] - lo_hz[t]);
            f = f.clamp(lo_hz[t] + margin, hi_hz[t] - margin);
        }
        hz[t] = f;
    }
    Ok(DecodedHarmonic { hz, band_ok })
}

/// Sub-bin peak position from a parabola through the 3-bin neighborhood.
fn quadratic_peak(row: &[f64], bin: usize) -> f64 {
    if bin == 0 || bin + 1 >= row.len() {
        return bin as f64;
    }
    let (l, c, r) = (row[bin - 1], row[bin], row[bin + 1]);
    let den = l - 2.0 * c + r;
    if den.abs() < 1e-12 {
        return bin as f64;
    }
    let delta = (0.5 * (l - r) / den).clamp(-0.5, 0.5);
    bin as f64 + delta
}

/// Replace invalid frames by the nearest previous valid value (or the first
/// valid value for a leading run).
fn hold_invalid(values: &[f64], valid: &[bool]) -> Vec<f64> {
    let mut out = values.to_vec();
    let first_valid = valid.iter().position(|&v| v);
    let Some(first) = first_valid else {
        return out;
    };
    for t in 0..out.len() {
        if !valid[t] {
            out[t] = if t < first {
                values[first]
            } else {
                out[t - 1]
            };
        }
    }
    out
}

/// Magnitude-weighted mean frequency per frame; silent frames (magnitude
/// sum below 1e-12) are 0 with the invalid flag set.
pub fn spectral_centroid(spec: &Spectrogram) -> CentroidTrack {
    let mut hz = Vec::with_capacity(spec.num_frames());
    let mut valid = Vec::with_capacity(spec.num_frames());
    for row in spec.magnitudes.rows() {
        let total: f64 = row.iter().sum();
        if total < 1e-12 {
            hz.push(0.0);
            valid.push(false);
        } else {
            let weighted: f64 = row
                .iter()
                .zip(spec.freqs.iter())
                .map(|(&m, &f)| m * f)
                .sum();
            hz.push(weighted / total);
            valid.push(true);
        }
    }
    CentroidTrack { hz, valid }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;
    use crate::dsp::{stft_magnitude, AudioBuffer};
    use crate::represent::FrameMeta;

    fn harmonic_complex(f0: f64, secs: f64) -> AudioBuffer {
        let sr = config::SAMPLE_RATE;
        let n = (sr as f64 * secs) as usize;
        AudioBuffer::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr as f64;
                    ((2.0 * std::f64::consts::PI * f0 * t).sin()
                        + (2.0 * std::f64::consts::PI * 2.0 * f0 * t).sin()
                        + (2.0 * std::f64::consts::PI * 3.0 * f0 * t).sin())
                        / 3.0
                })
                .collect(),
            sr,
        )
        .unwrap()
    }

    fn spec_4096(audio: &AudioBuffer) -> Spectrogram {
        stft_magnitude(audio, 4096, 1024, 256).unwrap()
    }

    fn flat_contour(hz: f64, t: usize) -> PitchContour {
        PitchContour {
            hz: vec![hz; t],
            frame: FrameMeta::default(),
        }
    }

    fn all_voiced(t: usize) -> VoicedMask {
        VoicedMask {
            flags: vec![true; t],
            alpha: 0.1625,
        }
    }

    #[test]
    fn harmonic_bands_follow_w() {
        // w = 4/5, f0 = 200: H1 searches (360, 450), H2 (560, 650).
        let f = 200.0;
        let w = 0.8;
        assert!(((1.0 + w) * f - 360.0).abs() < 1e-9);
        assert!(((1.0 + 1.0 / w) * f - 450.0).abs() < 1e-9);
        assert!(((2.0 + w) * f - 560.0).abs() < 1e-9);
        assert!(((2.0 + 1.0 / w) * f - 650.0).abs() < 1e-9);
    }

    #[test]
    fn clean_complex_recovers_exact_harmonics() {
        let audio = harmonic_complex(200.0, 1.0);
        let spec = spec_4096(&audio);
        let t = spec.num_frames();
        let track =
            estimate_harmonics(&spec, &flat_contour(200.0, t), &all_voiced(t), 0.8).unwrap();
        for t in 8..t - 8 {
            assert!(track.valid[t]);
            let h1_err = 1200.0 * (track.h1[t] / 400.0).log2().abs();
            let h2_err = 1200.0 * (track.h2[t] / 600.0).log2().abs();
            assert!(h1_err < 15.0, "frame {t}: H1 {} ({h1_err} cents)", track.h1[t]);
            assert!(h2_err < 15.0, "frame {t}: H2 {} ({h2_err} cents)", track.h2[t]);
        }
    }

    #[test]
    fn band_constraint_holds_on_valid_frames() {
        let audio = harmonic_complex(150.0, 0.6);
        let spec = spec_4096(&audio);
        let t = spec.num_frames();
        let track =
            estimate_harmonics(&spec, &flat_contour(150.0, t), &all_voiced(t), 0.8).unwrap();
        for t in 0..t {
            if track.valid[t] {
                assert!(track.h1[t] > (1.0 + 0.8) * 150.0 && track.h1[t] < (1.0 + 1.25) * 150.0);
                assert!(track.h2[t] > (2.0 + 0.8) * 150.0 && track.h2[t] < (2.0 + 1.25) * 150.0);
            }
        }
    }

    #[test]
    fn single_frame_spur_is_suppressed_where_argmax_fails() {
        // A spur at 430 Hz slightly louder than the true 400 Hz harmonic in
        // one frame: per-frame argmax jumps, Viterbi continuity does not.
        let audio = harmonic_complex(200.0, 0.7);
        let mut spec = spec_4096(&audio);
        let t_len = spec.num_frames();
        let spur_frame = t_len / 2;
        let bin_430 = (430.0 / spec.bin_hz()).round() as usize;
        let bin_400 = (400.0 / spec.bin_hz()).round() as usize;
        let peak_400 = spec.magnitudes[(spur_frame, bin_400)];
        spec.magnitudes[(spur_frame, bin_430)] = 1.1 * peak_400;

        // Per-frame argmax inside the (360, 450) band picks the spur.
        let lo = (360.0 / spec.bin_hz()).ceil() as usize;
        let hi = (450.0 / spec.bin_hz()).floor() as usize;
        let row = spec.magnitudes.row(spur_frame);
        let argmax = (lo..=hi)
            .max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap())
            .unwrap();
        assert_eq!(argmax, bin_430, "spur must dominate the frame-local argmax");

        let track =
            estimate_harmonics(&spec, &flat_contour(200.0, t_len), &all_voiced(t_len), 0.8)
                .unwrap();
        let err = 1200.0 * (track.h1[spur_frame] / 400.0).log2().abs();
        assert!(err < 15.0, "H1 followed the spur: {}", track.h1[spur_frame]);
    }

    #[test]
    fn unvoiced_frames_hold_last_voiced_value() {
        let audio = harmonic_complex(200.0, 0.6);
        let spec = spec_4096(&audio);
        let t = spec.num_frames();
        let mut voiced = all_voiced(t);
        for i in 10..15 {
            voiced.flags[i] = false;
        }
        voiced.flags[0] = false;
        let track = estimate_harmonics(&spec, &flat_contour(200.0, t), &voiced, 0.8).unwrap();
        assert_eq!(track.h1[12], track.h1[9]);
        // Leading unvoiced frame takes the first voiced value.
        assert_eq!(track.h1[0], track.h1[1]);
        assert!(!track.valid[12]);
    }

    #[test]
    fn empty_band_near_nyquist_is_invalid_not_fatal() {
        let audio = harmonic_complex(200.0, 0.4);
        let spec = spec_4096(&audio);
        let t = spec.num_frames();
        // f0 high enough that (2 + w) * f0 exceeds Nyquist.
        let track =
            estimate_harmonics(&spec, &flat_contour(4100.0, t), &all_voiced(t), 0.8).unwrap();
        assert!(track.valid.iter().all(|&v| !v));
    }

    #[test]
    fn rejects_bad_w_and_mismatched_lengths() {
        let audio = harmonic_complex(200.0, 0.4);
        let spec = spec_4096(&audio);
        let t = spec.num_frames();
        assert!(estimate_harmonics(&spec, &flat_contour(200.0, t), &all_voiced(t), 1.5).is_err());
        assert!(estimate_harmonics(&spec, &flat_contour(200.0, t - 1), &all_voiced(t), 0.8).is_err());
    }

    #[test]
    fn centroid_of_sine_is_its_frequency() {
        let sr = config::SAMPLE_RATE;
        let audio = AudioBuffer::new(
            (0..16384)
                .map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / sr as f64).sin())
                .collect(),
            sr,
        )
        .unwrap();
        let spec = spec_4096(&audio);
        let c = spectral_centroid(&spec);
        for t in 8..spec.num_frames() - 8 {
            assert!(c.valid[t]);
            assert!((c.hz[t] - 1000.0).abs() < 2.0 * spec.bin_hz(), "frame {t}: {}", c.hz[t]);
        }
    }

    #[test]
    fn centroid_of_equal_pair_is_their_mean() {
        let sr = config::SAMPLE_RATE;
        let audio = AudioBuffer::new(
            (0..16384)
                .map(|i| {
                    let t = i as f64 / sr as f64;
                    0.5 * (2.0 * std::f64::consts::PI * 500.0 * t).sin()
                        + 0.5 * (2.0 * std::f64::consts::PI * 1500.0 * t).sin()
                })
                .collect(),
            sr,
        )
        .unwrap();
        let spec = spec_4096(&audio);
        let c = spectral_centroid(&spec);
        let mid = spec.num_frames() / 2;
        assert!((c.hz[mid] - 1000.0).abs() < 25.0, "centroid {}", c.hz[mid]);
    }

    #[test]
    fn centroid_of_silence_is_zero_and_invalid() {
        let audio = AudioBuffer::new(vec![0.0; 8192], config::SAMPLE_RATE).unwrap();
        let spec = spec_4096(&audio);
        let c = spectral_centroid(&spec);
        assert!(c.hz.iter().all(|&v| v == 0.0));
        assert!(c.valid.iter().all(|&v| !v));
    }

    #[test]
    fn centroid_is_gain_invariant() {
        use crate::dsp::gain;
        let audio = harmonic_complex(240.0, 0.5);
        let a = spectral_centroid(&spec_4096(&audio));
        let b = spectral_centroid(&spec_4096(&gain(&audio, 14.0)));
        for (x, y) in a.hz.iter().zip(b.hz.iter()) {
            if *x > 0.0 {
                assert!(((x - y) / x).abs() < 1e-6);
            }
        }
    }
}
