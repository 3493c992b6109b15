//! The four-part interpretable representation: sparse phonetic
//! posteriorgrams, Viterbi-decoded pitch, entropy-based periodicity, and
//! multi-band A-weighted loudness, plus equal-occupancy pitch quantization.

use ndarray::{Array2, ArrayView1};

use crate::config;
use crate::dsp::{a_weight_db, Spectrogram};
use crate::error::{Error, Result};
use crate::viterbi::{decode, TransitionModel};

/// Number of pitch bins on the analysis grid.
pub const PITCH_BINS: usize = 1440;
/// Lowest grid frequency in Hz.
pub const PITCH_FLOOR_HZ: f64 = 31.0;
/// Grid spacing in cents.
pub const CENTS_PER_BIN: f64 = 5.0;

/// The 39 CMU phonemes plus a trailing silence label (40 rows).
pub const PHONEME_LABELS: [&str; 40] = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER", "EY", "F", "G", "HH",
    "IH", "IY", "JH", "K", "L", "M", "N", "NG", "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH",
    "UW", "V", "W", "Y", "Z", "ZH", "SIL",
];

/// Frame timing shared by time-varying features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameMeta {
    pub sample_rate: u32,
    pub hop_samples: usize,
}

impl Default for FrameMeta {
    fn default() -> Self {
        Self {
            sample_rate: config::SAMPLE_RATE,
            hop_samples: config::HOP_SAMPLES,
        }
    }
}

/// Logarithmic pitch distance in cents: `1200 * |log2(a / b)|`.
pub fn cents(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::invalid(format!(
            "cents requires positive frequencies, got {a} and {b}"
        )));
    }
    Ok(1200.0 * (a / b).log2().abs())
}

/// Geometric pitch grid: 1440 bins from 31 Hz in exact 5-cent steps.
#[derive(Debug, Clone)]
pub struct PitchBinGrid {
    hz: Vec<f64>,
}

impl Default for PitchBinGrid {
    fn default() -> Self {
        Self::new()
    }
}

impl PitchBinGrid {
    pub fn new() -> Self {
        let hz = (0..PITCH_BINS)
            .map(|i| PITCH_FLOOR_HZ * 2f64.powf(CENTS_PER_BIN * i as f64 / 1200.0))
            .collect();
        Self { hz }
    }

    pub fn hz(&self) -> &[f64] {
        &self.hz
    }

    pub fn len(&self) -> usize {
        self.hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hz.is_empty()
    }

    pub fn min_hz(&self) -> f64 {
        self.hz[0]
    }

    pub fn max_hz(&self) -> f64 {
        *self.hz.last().unwrap()
    }

    /// Index of the grid bin closest (in cents) to `freq`.
    pub fn nearest_bin(&self, freq: f64) -> usize {
        let idx = 1200.0 * (freq / PITCH_FLOOR_HZ).log2() / CENTS_PER_BIN;
        (idx.round().max(0.0) as usize).min(self.hz.len() - 1)
    }
}

/// Per-frame categorical distributions over labeled bins.
#[derive(Debug, Clone)]
pub struct Posteriorgram {
    /// `T x |Q|`, each row non-negative and summing to one.
    pub probs: Array2<f64>,
    /// Hz values (as strings) for pitch grids, phoneme names for PPGs.
    pub labels: Vec<String>,
    pub frame: FrameMeta,
}

impl Posteriorgram {
    pub fn new(probs: Array2<f64>, labels: Vec<String>, frame: FrameMeta) -> Result<Self> {
        if probs.ncols() != labels.len() {
            return Err(Error::invalid(format!(
                "posteriorgram has {} columns but {} labels",
                probs.ncols(),
                labels.len()
            )));
        }
        for (t, row) in probs.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &p in row.iter() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::invalid(format!(
                        "frame {t} contains an invalid probability {p}"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::invalid(format!(
                    "frame {t} sums to {sum}, expected 1 within 1e-6"
                )));
            }
        }
        Ok(Self {
            probs,
            labels,
            frame,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.probs.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.probs.ncols()
    }
}

/// Per-frame pitch in Hz on the analysis grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchContour {
    pub hz: Vec<f64>,
    pub frame: FrameMeta,
}

/// Per-frame periodicity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityTrack {
    pub values: Vec<f64>,
}

/// Boolean voicing decisions from thresholding periodicity.
#[derive(Debug, Clone, PartialEq)]
pub struct VoicedMask {
    pub flags: Vec<bool>,
    pub alpha: f64,
}

/// A-weighted dB per frame and band, with the FFT-bin edges of each band.
#[derive(Debug, Clone)]
pub struct MultibandLoudness {
    /// `T x k`.
    pub db: Array2<f64>,
    /// `k + 1` ascending bin indices covering every FFT bin exactly once.
    pub band_edges: Vec<usize>,
}

impl MultibandLoudness {
    pub fn num_frames(&self) -> usize {
        self.db.nrows()
    }

    pub fn num_bands(&self) -> usize {
        self.db.ncols()
    }
}

/// Sparsification strategies for phonetic posteriorgrams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsifyMethod {
    /// Keep the k most probable phonemes per frame.
    TopK(usize),
    /// Zero phonemes with probability below k.
    ThresholdK(f64),
    /// Keep descending-probability phonemes until their sum reaches k.
    PercentileK(f64),
}

/// A sparsified, renormalized posteriorgram with its sparsity metadata.
#[derive(Debug, Clone)]
pub struct Sppg {
    pub probs: Array2<f64>,
    pub labels: Vec<String>,
    pub frame: FrameMeta,
    pub method: SparsifyMethod,
    /// Frames where Threshold-k wiped everything and the argmax was kept.
    pub fallback_frames: Vec<usize>,
}

impl Sppg {
    pub fn num_frames(&self) -> usize {
        self.probs.nrows()
    }

    /// Per-frame argmax phoneme index (ties to the lowest index).
    pub fn argmax(&self, t: usize) -> usize {
        let row = self.probs.row(t);
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, &p) in row.iter().enumerate() {
            if p > best {
                best = p;
                arg = i;
            }
        }
        arg
    }
}

/// Variable-width quantizer boundaries (k+1 ascending Hz values).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerEdges {
    pub edges: Vec<f64>,
}

impl QuantizerEdges {
    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }
}

/// Entropy-based periodicity: `h_t = 1 - H(row) / ln|Q|`, with `0 ln 0 = 0`,
/// clamped into `[0, 1]` against rounding.
pub fn periodicity(post: &Posteriorgram) -> PeriodicityTrack {
    let q = post.num_bins() as f64;
    let log_q = q.ln();
    let values = post
        .probs
        .rows()
        .into_iter()
        .map(|row| {
            let entropy: f64 = row
                .iter()
                .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
                .sum();
            (1.0 - entropy / log_q).clamp(0.0, 1.0)
        })
        .collect();
    PeriodicityTrack { values }
}

/// Strict-threshold voicing mask: voiced iff `h_t > alpha`.
pub fn voiced_mask(h: &PeriodicityTrack, alpha: f64) -> VoicedMask {
    VoicedMask {
        flags: h.values.iter().map(|&v| v > alpha).collect(),
        alpha,
    }
}

/// Viterbi-decode a pitch posteriorgram into a contour.
///
/// Emissions are the log posterior probabilities; the transition model is
/// triangular with the jump cap `max_jump_cents` converted to grid bins
/// (clamped to the grid size for truncated grids); the prior is uniform.
/// Every frame is decoded; voicing is carried by periodicity, not here.
pub fn decode_pitch(post: &Posteriorgram, max_jump_cents: f64) -> Result<PitchContour> {
    if max_jump_cents <= 0.0 {
        return Err(Error::invalid("max_jump_cents must be positive"));
    }
    let hz = parse_pitch_labels(&post.labels)?;
    let q = hz.len();
    let spacing = if q > 1 {
        1200.0 * (hz[1] / hz[0]).log2()
    } else {
        CENTS_PER_BIN
    };
    let jump_bins = ((max_jump_cents / spacing).round() as usize).min(q - 1);
    let transition = TransitionModel::triangular(q, jump_bins)?;
    let initial = vec![-(q as f64).ln(); q];
    let observations = post.probs.mapv(|p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY });
    let path = decode(observations.view(), &transition, &initial)?;
    Ok(PitchContour {
        hz: path.states.iter().map(|&s| hz[s]).collect(),
        frame: post.frame,
    })
}

/// Parse pitch-grid labels into ascending Hz values.
fn parse_pitch_labels(labels: &[String]) -> Result<Vec<f64>> {
    let hz: Vec<f64> = labels
        .iter()
        .map(|l| {
            l.parse::<f64>()
                .map_err(|_| Error::invalid(format!("pitch label '{l}' is not a frequency")))
        })
        .collect::<Result<_>>()?;
    if hz.is_empty() {
        return Err(Error::invalid("pitch grid has no bins"));
    }
    if hz.windows(2).any(|w| w[1] <= w[0]) || hz[0] <= 0.0 {
        return Err(Error::invalid("pitch labels must be ascending positive Hz"));
    }
    Ok(hz)
}

/// Labels for the full analysis pitch grid. Default float formatting is
/// shortest-round-trip, so parsing a label recovers the exact bin frequency.
pub fn pitch_grid_labels(grid: &PitchBinGrid) -> Vec<String> {
    grid.hz().iter().map(|h| h.to_string()).collect()
}

fn sparsify_row(
    row: ArrayView1<'_, f64>,
    method: SparsifyMethod,
) -> Result<(Vec<f64>, bool)> {
    let n = row.len();
    let mut order: Vec<usize> = (0..n).collect();
    // Descending probability, ties broken by phoneme index.
    order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));

    let mut keep = vec![false; n];
    let mut fallback = false;
    match method {
        SparsifyMethod::TopK(k) => {
            if k == 0 {
                return Err(Error::invalid("top_k requires k >= 1"));
            }
            for &i in order.iter().take(k) {
                keep[i] = true;
            }
        }
        SparsifyMethod::ThresholdK(k) => {
            if !(0.0..1.0).contains(&k) {
                return Err(Error::invalid("threshold_k requires k in [0, 1)"));
            }
            for i in 0..n {
                keep[i] = row[i] >= k;
            }
            if keep.iter().all(|&b| !b) {
                keep[order[0]] = true;
                fallback = true;
            }
        }
        SparsifyMethod::PercentileK(k) => {
            if !(k > 0.0 && k <= 1.0) {
                return Err(Error::invalid("percentile_k requires k in (0, 1]"));
            }
            let mut cum = 0.0;
            for &i in &order {
                keep[i] = true;
                cum += row[i];
                if cum >= k {
                    break;
                }
            }
        }
    }

    let retained: f64 = (0..n).filter(|&i| keep[i]).map(|i| row[i]).sum();
    if retained <= 0.0 {
        // Degenerate all-zero row; keep the argmax as a one-hot.
        let mut out = vec![0.0; n];
        out[order[0]] = 1.0;
        return Ok((out, true));
    }
    let out = (0..n)
        .map(|i| if keep[i] { row[i] / retained } else { 0.0 })
        .collect();
    Ok((out, fallback))
}

/// Sparsify a posteriorgram per frame and renormalize surviving mass to one.
pub fn sparsify(ppg: &Posteriorgram, method: SparsifyMethod) -> Result<Sppg> {
    let (t_len, n) = ppg.probs.dim();
    let mut probs = Array2::zeros((t_len, n));
    let mut fallback_frames = Vec::new();
    for (t, row) in ppg.probs.rows().into_iter().enumerate() {
        let (out, fallback) = sparsify_row(row, method)?;
        if fallback {
            fallback_frames.push(t);
        }
        probs.row_mut(t).iter_mut().zip(out).for_each(|(dst, v)| *dst = v);
    }
    Ok(Sppg {
        probs,
        labels: ppg.labels.clone(),
        frame: ppg.frame,
        method,
        fallback_frames,
    })
}

/// Floor added to magnitudes before taking logs (-200 dB).
pub const LOUDNESS_EPS: f64 = 1e-10;

/// Multi-band A-weighted loudness: FFT bins split into `num_bands`
/// contiguous near-equal groups (remainder spread to the lowest bands),
/// then per band the mean of `20 log10(mag + eps) + A(freq)`.
pub fn multiband_loudness(spec: &Spectrogram, num_bands: usize) -> Result<MultibandLoudness> {
    let f_bins = spec.num_bins();
    if num_bands == 0 || num_bands > f_bins {
        return Err(Error::invalid(format!(
            "num_bands must be in [1, {f_bins}], got {num_bands}"
        )));
    }
    let base = f_bins / num_bands;
    let rem = f_bins % num_bands;
    let mut band_edges = Vec::with_capacity(num_bands + 1);
    band_edges.push(0);
    for b in 0..num_bands {
        let width = base + usize::from(b < rem);
        band_edges.push(band_edges[b] + width);
    }

    let weights: Vec<f64> = spec.freqs.iter().map(|&f| a_weight_db(f)).collect();
    let t_len = spec.num_frames();
    let mut db = Array2::zeros((t_len, num_bands));
    for (t, row) in spec.magnitudes.rows().into_iter().enumerate() {
        for b in 0..num_bands {
            let (lo, hi) = (band_edges[b], band_edges[b + 1]);
            let mut acc = 0.0;
            for i in lo..hi {
                acc += 20.0 * (row[i] + LOUDNESS_EPS).log10() + weights[i];
            }
            db[(t, b)] = acc / (hi - lo) as f64;
        }
    }
    Ok(MultibandLoudness { db, band_edges })
}

/// Quantizer edges at the 0, 1/n, ..., 1 empirical quantiles so every bin is
/// occupied equally often (within one count) on distinct-valued inputs.
pub fn equal_occupancy_edges(pitch_samples: &[f64], num_bins: usize) -> Result<QuantizerEdges> {
    if num_bins == 0 {
        return Err(Error::invalid("num_bins must be positive"));
    }
    let mut sorted: Vec<f64> = pitch_samples
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < num_bins {
        return Err(Error::invalid(format!(
            "need at least {num_bins} distinct pitch values, got {}",
            distinct.len()
        )));
    }
    let n = sorted.len();
    let mut edges = Vec::with_capacity(num_bins + 1);
    edges.push(sorted[0]);
    for j in 1..num_bins {
        let mut candidate = sorted[n * j / num_bins];
        // Ties can repeat a quantile; advance to keep edges strictly
        // ascending (never triggered on distinct-valued inputs).
        if candidate <= *edges.last().unwrap() {
            match sorted.iter().find(|&&v| v > *edges.last().unwrap()) {
                Some(&v) => candidate = v,
                None => return Err(Error::invalid("too few distinct values for edges")),
            }
        }
        edges.push(candidate);
    }
    let top = *sorted.last().unwrap();
    let top = if top > *edges.last().unwrap() {
        top
    } else {
        *edges.last().unwrap() + f64::EPSILON.max(edges.last().unwrap().abs() * 1e-12)
    };
    edges.push(top);
    Ok(QuantizerEdges { edges })
}

/// Map a contour to bin indices: `edges[i] <= hz < edges[i+1]`, values on an
/// interior edge go to the upper bin, out-of-range values clamp to the ends.
pub fn quantize_pitch(contour: &PitchContour, edges: &QuantizerEdges) -> Vec<usize> {
    let nb = edges.num_bins();
    contour
        .hz
        .iter()
        .map(|&hz| {
            let e = &edges.edges;
            if hz < e[0] {
                return 0;
            }
            if hz >= e[nb] {
                return nb - 1;
            }
            // partition_point: first index with edge > hz; bin = that - 1,
            // which lands hz == interior edge in the upper bin.
            let idx = e.partition_point(|&edge| edge <= hz);
            idx - 1
        })
        .collect()
}
