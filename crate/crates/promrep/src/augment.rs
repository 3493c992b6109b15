//! Data augmentation: spectral-balance shift via double resampling, and
//! volume shift with clipping rejection.

use rand::Rng;

use crate::dsp::{gain, resample, AudioBuffer};
use crate::error::{Error, Result};

/// Gain range in dB is `12 * r_l` for `r_l` in `[-1, 1]`.
const VOLUME_GAIN_DB: f64 = 12.0;
/// Redraw budget before the rejection loop gives up.
const MAX_VOLUME_DRAWS: usize = 1000;

/// Validated augmentation parameters for one utterance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    pub r_f: f64,
    pub r_l: f64,
    pub source_rate: u32,
    pub target_rate: u32,
}

impl AugmentSpec {
    pub fn new(r_f: f64, r_l: f64, source_rate: u32, target_rate: u32) -> Result<Self> {
        for (name, v) in [("r_f", r_f), ("r_l", r_l)] {
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [-1, 1]")));
            }
        }
        if source_rate == 0 || target_rate == 0 {
            return Err(Error::invalid("rates must be positive"));
        }
        Ok(Self {
            r_f,
            r_l,
            source_rate,
            target_rate,
        })
    }
}

/// Spectral-balance augmentation by double resampling.
///
/// The first pass declares the input's rate as `2^r_f * s` and converts to
/// `s`, scaling pitch and spectral envelope by `2^r_f` and duration by
/// `2^-r_f`; the second pass is a content-preserving conversion to
/// `target_rate`.
pub fn augment_spectral(x: &AudioBuffer, r_f: f64, target_rate: u32) -> Result<AudioBuffer> {
    if !(-1.0..=1.0).contains(&r_f) {
        return Err(Error::invalid(format!("r_f = {r_f} outside [-1, 1]")));
    }
    if target_rate == 0 {
        return Err(Error::invalid("target_rate must be positive"));
    }
    let s = x.sample_rate as f64;
    let shifted = resample(x, 2f64.powf(r_f) * s, s)?;
    resample(&shifted, s, target_rate as f64)
}

/// Result of one volume augmentation.
#[derive(Debug, Clone)]
pub struct VolumeAugment {
    pub audio: AudioBuffer,
    /// The accepted (or fallback) volume ratio.
    pub r_l: f64,
    /// True when 1000 draws all clipped and a non-positive gain was forced.
    pub gave_up: bool,
}

/// Volume augmentation with clipping rejection.
///
/// Draws `r_l ~ Uniform(-1, 1)` and applies `12 * r_l` dB of gain; if any
/// output sample leaves `[-1, 1]` the draw is rejected and repeated, up to
/// 1000 times. A pathological peak near 1.0 then falls back to
/// `min(0, last draw)`, which can never clip. Deterministic given the RNG.
pub fn augment_volume(x: &AudioBuffer, rng: &mut impl Rng) -> Result<VolumeAugment> {
    if x.peak() > 1.0 {
        return Err(Error::invalid(
            "input samples must lie within [-1, 1] before volume augmentation",
        ));
    }
    let mut draw = 0.0;
    for _ in 0..MAX_VOLUME_DRAWS {
        draw = rng.gen_range(-1.0..1.0);
        let candidate = gain(x, VOLUME_GAIN_DB * draw);
        if candidate.peak() <= 1.0 {
            return Ok(VolumeAugment {
                audio: candidate,
                r_l: draw,
                gave_up: false,
            });
        }
    }
    let r_l = draw.min(0.0);
    Ok(VolumeAugment {
        audio: gain(x, VOLUME_GAIN_DB * r_l),
        r_l,
        gave_up: true,
    })
}

/// One spectrally shifted copy and one volume-shifted copy of an utterance,
/// with the ratios that produced them.
#[derive(Debug, Clone)]
pub struct AugmentedPair {
    pub spectral: AudioBuffer,
    pub r_f: f64,
    pub volume: AudioBuffer,
    pub r_l: f64,
    pub volume_gave_up: bool,
}

/// Draw `r_f ~ Uniform(-1, 1)`, produce the spectral copy at `target_rate`,
/// and produce a volume copy, suitable for writing training manifests.
pub fn make_augmented_pair(
    x: &AudioBuffer,
    target_rate: u32,
    rng: &mut impl Rng,
) -> Result<AugmentedPair> {
    let r_f = rng.gen_range(-1.0..1.0);
    let spectral = augment_spectral(x, r_f, target_rate)?;
    let volume = augment_volume(x, rng)?;
    Ok(AugmentedPair {
        spectral,
        r_f,
        volume: volume.audio,
        r_l: volume.r_l,
        volume_gave_up: volume.gave_up,
    })
}
