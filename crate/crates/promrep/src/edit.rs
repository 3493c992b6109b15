//! Representation-level editing: pitch shifts, loudness edits,
//! voiced/silence-restricted time stretching with SLERP-interpolated PPGs,
//! and the time-invariant ratio knobs.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::represent::{
    MultibandLoudness, PeriodicityTrack, PitchBinGrid, PitchContour, Posteriorgram, Sppg,
    VoicedMask,
};

/// Phonemes whose frames stretch naturally: CMU vowels, voiced sonorants,
/// and silence. `build_stretch_map_with` accepts a custom set.
pub const DEFAULT_STRETCHABLE: [&str; 27] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW",
    "L", "R", "W", "Y", "M", "N", "NG", "Z", "V", "DH", "ZH", "SIL",
];

/// The full representation of one utterance; every time-varying member
/// shares the frame count.
#[derive(Debug, Clone)]
pub struct RepresentationBundle {
    pub pitch: PitchContour,
    pub periodicity: PeriodicityTrack,
    pub loudness: MultibandLoudness,
    /// Dense posteriorgram (pre-sparsification), when available.
    pub ppg: Option<Posteriorgram>,
    /// Sparsified posteriorgram, when available.
    pub sppg: Option<Sppg>,
    pub ratio_f: f64,
    pub ratio_l: f64,
}

impl RepresentationBundle {
    pub fn num_frames(&self) -> usize {
        self.pitch.hz.len()
    }

    /// Check the shared-frame-count invariant.
    pub fn validate(&self) -> Result<()> {
        let t = self.num_frames();
        let mut counts = vec![("periodicity", self.periodicity.values.len())];
        counts.push(("loudness", self.loudness.num_frames()));
        if let Some(ref p) = self.ppg {
            counts.push(("ppg", p.num_frames()));
        }
        if let Some(ref s) = self.sppg {
            counts.push(("sppg", s.num_frames()));
        }
        for (name, n) in counts {
            if n != t {
                return Err(Error::invalid(format!(
                    "bundle member '{name}' has {n} frames, pitch has {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Shift the pitch contour by `cents_offset`, clamping to the grid range.
///
/// Returns the edited bundle and the number of clamped frames; every other
/// member is an untouched copy (disentanglement by construction).
pub fn shift_pitch(bundle: &RepresentationBundle, cents_offset: f64) -> (RepresentationBundle, usize) {
    let grid = PitchBinGrid::new();
    let (lo, hi) = (grid.min_hz(), grid.max_hz());
    let factor = 2f64.powf(cents_offset / 1200.0);
    let mut clamped = 0usize;
    let hz = bundle
        .pitch
        .hz
        .iter()
        .map(|&h| {
            let shifted = h * factor;
            if shifted < lo {
                clamped += 1;
                lo
            } else if shifted > hi {
                clamped += 1;
                hi
            } else {
                shifted
            }
        })
        .collect();
    let mut out = bundle.clone();
    out.pitch = PitchContour {
        hz,
        frame: bundle.pitch.frame,
    };
    (out, clamped)
}

/// Shift every loudness cell by `delta_dba`; everything else untouched.
pub fn edit_loudness(bundle: &RepresentationBundle, delta_dba: f64) -> RepresentationBundle {
    let mut out = bundle.clone();
    out.loudness = MultibandLoudness {
        db: bundle.loudness.db.mapv(|v| v + delta_dba),
        band_edges: bundle.loudness.band_edges.clone(),
    };
    out
}

/// Replace the time-invariant ratio knobs.
pub fn set_ratios(bundle: &RepresentationBundle, r_f: f64, r_l: f64) -> Result<RepresentationBundle> {
    for (name, v) in [("r_f", r_f), ("r_l", r_l)] {
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [-1, 1]")));
        }
    }
    let mut out = bundle.clone();
    out.ratio_f = r_f;
    out.ratio_l = r_l;
    Ok(out)
}

/// Per-output-frame fractional source positions, non-decreasing, spanning
/// `[0, T_in - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchMap {
    pub positions: Vec<f64>,
    /// True when no frame was stretchable and the map fell back to uniform
    /// stretching of everything.
    pub degraded: bool,
}

impl StretchMap {
    pub fn output_frames(&self) -> usize {
        self.positions.len()
    }

    /// Identity map over `t` frames.
    pub fn identity(t: usize) -> Self {
        Self {
            positions: (0..t).map(|i| i as f64).collect(),
            degraded: false,
        }
    }
}

/// Build a stretch map that reaches `round(factor * T_in)` output frames by
/// stretching only stretchable frames (SPPG argmax in the stretchable set,
/// or voiced) at one uniform local rate; other frames keep local rate 1.
pub fn build_stretch_map(sppg: &Sppg, voiced: &VoicedMask, factor: f64) -> Result<StretchMap> {
    build_stretch_map_with(sppg, voiced, factor, &DEFAULT_STRETCHABLE)
}

pub fn build_stretch_map_with(
    sppg: &Sppg,
    voiced: &VoicedMask,
    factor: f64,
    stretchable_labels: &[&str],
) -> Result<StretchMap> {
    if !(factor > 0.0) {
        return Err(Error::invalid(format!(
            "stretch factor must be positive, got {factor}"
        )));
    }
    let t_in = sppg.num_frames();
    if voiced.flags.len() != t_in {
        return Err(Error::invalid(format!(
            "voiced mask has {} frames, sppg has {t_in}",
            voiced.flags.len()
        )));
    }
    if t_in == 0 {
        return Err(Error::invalid("cannot stretch an empty bundle"));
    }
    let t_out = ((factor * t_in as f64).round() as usize).max(1);
    if t_in == 1 || t_out == 1 {
        return Ok(StretchMap {
            positions: vec![0.0; t_out],
            degraded: false,
        });
    }

    let stretchable: Vec<bool> = (0..t_in)
        .map(|t| {
            let label = sppg.labels[sppg.argmax(t)].as_str();
            stretchable_labels.contains(&label) || voiced.flags[t]
        })
        .collect();

    // Work on the T_in - 1 inter-frame intervals; interval u inherits frame
    // u's class. The stretchable intervals share one local rate rho chosen
    // so the rates sum to T_out - 1.
    let intervals = t_in - 1;
    let n_stretch = stretchable[..intervals].iter().filter(|&&b| b).count();
    let n_fixed = intervals - n_stretch;
    let needed = (t_out - 1) as f64 - n_fixed as f64;
    let (rates, degraded): (Vec<f64>, bool) = if n_stretch > 0 && needed > 0.0 {
        let rho = needed / n_stretch as f64;
        (
            stretchable[..intervals]
                .iter()
                .map(|&b| if b { rho } else { 1.0 })
                .collect(),
            false,
        )
    } else {
        // No stretchable frames (or they would need a non-positive rate):
        // fall back to stretching everything uniformly.
        let rho = (t_out - 1) as f64 / intervals as f64;
        (vec![rho; intervals], true)
    };

    // Cumulative output time at each input frame, pinned exactly at the ends.
    let mut cum = Vec::with_capacity(t_in);
    cum.push(0.0f64);
    for r in &rates {
        cum.push(cum.last().unwrap() + r);
    }
    *cum.last_mut().unwrap() = (t_out - 1) as f64;

    let mut positions = Vec::with_capacity(t_out);
    let mut seg = 0usize;
    for tau in 0..t_out {
        let target = tau as f64;
        while seg + 1 < intervals && cum[seg + 1] < target {
            seg += 1;
        }
        let width = cum[seg + 1] - cum[seg];
        let pos = if width > 0.0 {
            seg as f64 + (target - cum[seg]) / width
        } else {
            seg as f64
        };
        positions.push(pos.clamp(0.0, (t_in - 1) as f64));
    }
    positions[0] = 0.0;
    *positions.last_mut().unwrap() = (t_in - 1) as f64;

    Ok(StretchMap {
        positions,
        degraded,
    })
}

/// Spherical linear interpolation between two distributions on the
/// square-root (Hellinger) sphere; the result is squared and renormalized,
/// so it is always a valid distribution. Angles below 1e-6 fall back to
/// linear interpolation.
pub fn slerp(p: &[f64], q: &[f64], t: f64) -> Result<Vec<f64>> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "distributions have different lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("t = {t} outside [0, 1]")));
    }
    for (name, d) in [("p", p), ("q", q)] {
        let sum: f64 = d.iter().sum();
        if d.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "{name} is not a distribution (sum {sum})"
            )));
        }
    }
    // Endpoints return the inputs untouched.
    if t == 0.0 {
        return Ok(p.to_vec());
    }
    if t == 1.0 {
        return Ok(q.to_vec());
    }

    let u: Vec<f64> = p.iter().map(|&v| v.sqrt()).collect();
    let v: Vec<f64> = q.iter().map(|&v| v.sqrt()).collect();
    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    let omega = dot.clamp(-1.0, 1.0).acos();

    let mixed: Vec<f64> = if omega < 1e-6 {
        p.iter().zip(q.iter()).map(|(&a, &b)| (1.0 - t) * a + t * b).collect()
    } else {
        let sin_omega = omega.sin();
        let wa = ((1.0 - t) * omega).sin() / sin_omega;
        let wb = (t * omega).sin() / sin_omega;
        u.iter()
            .zip(v.iter())
            .map(|(&a, &b)| {
                let w = wa * a + wb * b;
                w * w
            })
            .collect()
    };
    let sum: f64 = mixed.iter().sum();
    Ok(mixed.iter().map(|&v| v / sum).collect())
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Resample every bundle member onto the stretch map's output grid.
///
/// Posteriorgram rows interpolate with [`slerp`]; pitch interpolates in the
/// cents (log-frequency) domain; periodicity and loudness interpolate
/// linearly. Positions landing exactly on a source frame copy it verbatim.
pub fn stretch(bundle: &RepresentationBundle, map: &StretchMap) -> Result<RepresentationBundle> {
    bundle.validate()?;
    let t_in = bundle.num_frames();
    if map
        .positions
        .iter()
        .any(|&p| !(0.0..=(t_in - 1) as f64 + 1e-9).contains(&p))
    {
        return Err(Error::invalid("stretch map positions exceed bundle frames"));
    }
    let t_out = map.output_frames();

    let split = |pos: f64| -> (usize, usize, f64) {
        let i = (pos.floor() as usize).min(t_in - 1);
        let j = (i + 1).min(t_in - 1);
        (i, j, pos - i as f64)
    };

    let pitch_hz: Vec<f64> = map
        .positions
        .iter()
        .map(|&pos| {
            let (i, j, frac) = split(pos);
            if frac == 0.0 {
                bundle.pitch.hz[i]
            } else {
                (lerp(bundle.pitch.hz[i].ln(), bundle.pitch.hz[j].ln(), frac)).exp()
            }
        })
        .collect();

    let periodicity: Vec<f64> = map
        .positions
        .iter()
        .map(|&pos| {
            let (i, j, frac) = split(pos);
            if frac == 0.0 {
                bundle.periodicity.values[i]
            } else {
                lerp(bundle.periodicity.values[i], bundle.periodicity.values[j], frac)
            }
        })
        .collect();

    let bands = bundle.loudness.num_bands();
    let mut loud = Array2::zeros((t_out, bands));
    for (tau, &pos) in map.positions.iter().enumerate() {
        let (i, j, frac) = split(pos);
        for b in 0..bands {
            loud[(tau, b)] = if frac == 0.0 {
                bundle.loudness.db[(i, b)]
            } else {
                lerp(bundle.loudness.db[(i, b)], bundle.loudness.db[(j, b)], frac)
            };
        }
    }

    let stretch_rows = |probs: &Array2<f64>| -> Result<Array2<f64>> {
        let q = probs.ncols();
        let mut out = Array2::zeros((t_out, q));
        for (tau, &pos) in map.positions.iter().enumerate() {
            let (i, j, frac) = split(pos);
            let row = if frac == 0.0 {
                probs.row(i).to_vec()
            } else {
                slerp(
                    probs.row(i).as_slice().unwrap(),
                    probs.row(j).as_slice().unwrap(),
                    frac,
                )?
            };
            out.row_mut(tau).iter_mut().zip(row).for_each(|(d, v)| *d = v);
        }
        Ok(out)
    };

    let ppg = match &bundle.ppg {
        Some(p) => Some(Posteriorgram::new(
            stretch_rows(&p.probs)?,
            p.labels.clone(),
            p.frame,
        )?),
        None => None,
    };
    let sppg = match &bundle.sppg {
        Some(s) => Some(Sppg {
            probs: stretch_rows(&s.probs)?,
            labels: s.labels.clone(),
            frame: s.frame,
            method: s.method,
            fallback_frames: Vec::new(),
        }),
        None => None,
    };

    Ok(RepresentationBundle {
        pitch: PitchContour {
            hz: pitch_hz,
            frame: bundle.pitch.frame,
        },
        periodicity: PeriodicityTrack { values: periodicity },
        loudness: MultibandLoudness {
            db: loud,
            band_edges: bundle.loudness.band_edges.clone(),
        },
        ppg,
        sppg,
        ratio_f: bundle.ratio_f,
        ratio_l: bundle.ratio_l,
    })
}
