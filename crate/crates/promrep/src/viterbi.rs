//! Batched maximum-a-posteriori path decoding over time-varying categorical
//! distributions with banded transition kernels.
//!
//! All arithmetic is in the log domain; probability zero is `-inf` with the
//! usual convention `-inf + x = -inf`. The transition kernel is stored once
//! (length `2 * band + 1`) instead of as a dense `Q x Q` matrix, which brings
//! the per-frame cost from `O(Q^2)` down to `O(Q * band)`. Batches are
//! decoded in parallel across sequences (rayon, `parallel` feature); the time
//! recursion inside one sequence is inherently sequential.
//!
//! Tie-breaking is deterministic everywhere: the lowest state index wins, in
//! the forward maximum and again when selecting the final state. The same
//! rule is implemented by [`brute_force_decode`] so oracle comparisons are
//! exact, including ties.

use ndarray::ArrayView2;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Banded log-domain transition model with triangular weights.
///
/// Interior rows share one kernel; rows clipped at the state boundaries are
/// renormalized so every row remains a distribution.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    num_states: usize,
    band_halfwidth: usize,
    /// Interior-row log-probabilities for offsets `-band ..= band`.
    log_kernel: Vec<f64>,
    /// Per-source-row renormalization `ln(Z_row) - ln(Z_interior)`;
    /// zero for interior rows, subtracted from the kernel at boundaries.
    row_adjust: Vec<f64>,
}

impl TransitionModel {
    /// Triangular transition kernel: weight at offset `d` proportional to
    /// `max_jump + 1 - |d|`, peaked at staying in place, zero beyond
    /// `max_jump` states.
    pub fn triangular(num_states: usize, max_jump: usize) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::invalid("num_states must be positive"));
        }
        if max_jump >= num_states {
            return Err(Error::invalid(format!(
                "max_jump {max_jump} must be smaller than num_states {num_states}"
            )));
        }
        let band = max_jump;
        let weight = |d: i64| (max_jump as i64 + 1 - d.abs()) as f64;
        let z_interior: f64 = (-(band as i64)..=band as i64).map(weight).sum();
        let log_z_interior = z_interior.ln();
        let log_kernel: Vec<f64> = (-(band as i64)..=band as i64)
            .map(|d| weight(d).ln() - log_z_interior)
            .collect();

        let mut row_adjust = vec![0.0; num_states];
        for (p, adj) in row_adjust.iter_mut().enumerate() {
            let lo = -((p.min(band)) as i64);
            let hi = (num_states - 1 - p).min(band) as i64;
            let z_row: f64 = (lo..=hi).map(weight).sum();
            // Interior rows compute the identical sum, so this is exactly 0.0
            // there and the kernel is used unmodified.
            *adj = z_row.ln() - log_z_interior;
        }

        Ok(Self {
            num_states,
            band_halfwidth: band,
            log_kernel,
            row_adjust,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn band_halfwidth(&self) -> usize {
        self.band_halfwidth
    }

    /// Interior-row log kernel for offsets `-band ..= band`.
    pub fn log_kernel(&self) -> &[f64] {
        &self.log_kernel
    }

    /// Log transition probability from state `from` to state `to`.
    pub fn log_prob(&self, from: usize, to: usize) -> f64 {
        debug_assert!(from < self.num_states && to < self.num_states);
        let d = to as i64 - from as i64;
        if d.unsigned_abs() as usize > self.band_halfwidth {
            return f64::NEG_INFINITY;
        }
        self.log_kernel[(d + self.band_halfwidth as i64) as usize] - self.row_adjust[from]
    }
}

/// A decoded state path with its accumulated log-joint score.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodePath {
    /// One state index per frame, each within `[0, num_states)`.
    pub states: Vec<usize>,
    /// `initial[s_0] + sum(transitions) + sum(emissions)` along the path.
    pub log_joint: f64,
}

fn check_inputs(
    observations: &ArrayView2<'_, f64>,
    transition: &TransitionModel,
    initial: &[f64],
) -> Result<(usize, usize)> {
    let (t, q) = observations.dim();
    if t == 0 {
        return Err(Error::invalid("observations must contain at least one frame"));
    }
    if q != transition.num_states {
        return Err(Error::invalid(format!(
            "observation width {q} does not match transition num_states {}",
            transition.num_states
        )));
    }
    if initial.len() != q {
        return Err(Error::invalid(format!(
            "initial prior length {} does not match num_states {q}",
            initial.len()
        )));
    }
    Ok((t, q))
}

/// Decode the maximum-a-posteriori banded path for one sequence.
///
/// `observations` is a `T x Q` matrix of log-emissions (finite or `-inf`);
/// `initial` is a `Q`-length log-prior. Errors with the frame index if a
/// frame leaves no admissible state.
pub fn decode(
    observations: ArrayView2<'_, f64>,
    transition: &TransitionModel,
    initial: &[f64],
) -> Result<DecodePath> {
    let (t_len, q) = check_inputs(&observations, transition, initial)?;
    let band = transition.band_halfwidth;
    let kernel = &transition.log_kernel;
    let adjust = &transition.row_adjust;

    let obs = observations
        .as_slice()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| observations.iter().copied().collect());

    let mut prev = vec![0.0f64; q];
    let mut cur = vec![0.0f64; q];
    // Backpointers; frame 0 row is unused.
    let mut psi = vec![0u32; t_len * q];

    let mut frame_max = f64::NEG_INFINITY;
    for s in 0..q {
        prev[s] = initial[s] + obs[s];
        if prev[s] > frame_max {
            frame_max = prev[s];
        }
    }
    if frame_max == f64::NEG_INFINITY {
        return Err(Error::DegenerateFrame { frame: 0 });
    }

    for t in 1..t_len {
        let emis = &obs[t * q..(t + 1) * q];
        let psi_row = &mut psi[t * q..(t + 1) * q];
        frame_max = f64::NEG_INFINITY;
        for s in 0..q {
            let lo = s.saturating_sub(band);
            let hi = (s + band).min(q - 1);
            // Kernel offset d = s - p maps to index p + band - s as p ascends;
            // the triangular kernel is symmetric so the orientation is fine.
            let k_base = band + lo - s; // index for p = lo
            let mut best = f64::NEG_INFINITY;
            let mut arg = lo as u32;
            let window = &prev[lo..=hi];
            let kwin = &kernel[k_base..k_base + window.len()];
            let awin = &adjust[lo..=hi];
            for ((j, &pv), (&kv, &av)) in
                window.iter().enumerate().zip(kwin.iter().zip(awin.iter()))
            {
                let cand = pv + (kv - av);
                if cand > best {
                    best = cand;
                    arg = (lo + j) as u32;
                }
            }
            let score = best + emis[s];
            cur[s] = score;
            psi_row[s] = arg;
            if score > frame_max {
                frame_max = score;
            }
        }
        if frame_max == f64::NEG_INFINITY {
            return Err(Error::DegenerateFrame { frame: t });
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    Ok(backtrack(&prev, &psi, t_len, q))
}

fn backtrack(final_scores: &[f64], psi: &[u32], t_len: usize, q: usize) -> DecodePath {
    let mut best = f64::NEG_INFINITY;
    let mut last = 0usize;
    for (s, &v) in final_scores.iter().enumerate() {
        if v > best {
            best = v;
            last = s;
        }
    }
    let mut states = vec![0usize; t_len];
    states[t_len - 1] = last;
    for t in (1..t_len).rev() {
        states[t - 1] = psi[t * q + states[t]] as usize;
    }
    DecodePath {
        states,
        log_joint: best,
    }
}

/// Decode a batch of sequences concurrently.
///
/// Output `i` is bit-identical to `decode(sequences[i], ..)`; failures carry
/// their sequence index and do not abort the rest of the batch. With the
/// `parallel` feature (default) sequences are distributed across the rayon
/// worker pool; callers need no synchronization.
pub fn decode_batch(
    sequences: &[ArrayView2<'_, f64>],
    transition: &TransitionModel,
    initial: &[f64],
) -> Vec<Result<DecodePath>> {
    let decode_one = |(i, obs): (usize, &ArrayView2<'_, f64>)| {
        decode(*obs, transition, initial).map_err(|e| e.in_batch(i))
    };
    #[cfg(feature = "parallel")]
    {
        sequences.par_iter().enumerate().map(decode_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sequences.iter().enumerate().map(decode_one).collect()
    }
}

/// Dense `Q x Q` transition matrix materialized from a [`TransitionModel`],
/// laid out `[to][from]` so the reference decoder streams rows contiguously.
#[derive(Debug, Clone)]
pub struct DenseTransition {
    num_states: usize,
    /// `log_probs[to * Q + from]`.
    log_probs: Vec<f64>,
}

impl DenseTransition {
    pub fn from_model(model: &TransitionModel) -> Self {
        let q = model.num_states;
        let band = model.band_halfwidth;
        let mut log_probs = vec![f64::NEG_INFINITY; q * q];
        for to in 0..q {
            let lo = to.saturating_sub(band);
            let hi = (to + band).min(q - 1);
            for from in lo..=hi {
                // Same expression as the banded inner loop so decoded paths
                // are bit-identical.
                log_probs[to * q + from] =
                    model.log_kernel[from + band - to] - model.row_adjust[from];
            }
        }
        Self {
            num_states: q,
            log_probs,
        }
    }
}

/// Naive dense single-threaded reference decoder, `O(T * Q^2)`.
///
/// The in-repo baseline that `bench` and the acceptance suite time the banded
/// decoder against. Same tie-break rule, same arithmetic, identical paths.
pub fn decode_dense(
    observations: ArrayView2<'_, f64>,
    dense: &DenseTransition,
    initial: &[f64],
) -> Result<DecodePath> {
    let (t_len, q) = observations.dim();
    if t_len == 0 {
        return Err(Error::invalid("observations must contain at least one frame"));
    }
    if q != dense.num_states || initial.len() != q {
        return Err(Error::invalid(
            "observation width, transition size, and prior length must agree",
        ));
    }
    let obs = observations
        .as_slice()
        .map(|s| s.to_vec())
        .unwrap_or_else(|| observations.iter().copied().collect());

    let mut prev = vec![0.0f64; q];
    let mut cur = vec![0.0f64; q];
    let mut psi = vec![0u32; t_len * q];

    let mut frame_max = f64::NEG_INFINITY;
    for s in 0..q {
        prev[s] = initial[s] + obs[s];
        if prev[s] > frame_max {
            frame_max = prev[s];
        }
    }
    if frame_max == f64::NEG_INFINITY {
        return Err(Error::DegenerateFrame { frame: 0 });
    }

    for t in 1..t_len {
        let emis = &obs[t * q..(t + 1) * q];
        let psi_row = &mut psi[t * q..(t + 1) * q];
        frame_max = f64::NEG_INFINITY;
        for s in 0..q {
            let row = &dense.log_probs[s * q..(s + 1) * q];
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0u32;
            for (p, (&pv, &tv)) in prev.iter().zip(row.iter()).enumerate() {
                let cand = pv + tv;
                if cand > best {
                    best = cand;
                    arg = p as u32;
                }
            }
            let score = best + emis[s];
            cur[s] = score;
            psi_row[s] = arg;
            if score > frame_max {
                frame_max = score;
            }
        }
        if frame_max == f64::NEG_INFINITY {
            return Err(Error::DegenerateFrame { frame: t });
        }
        std::mem::swap(&mut prev, &mut cur);
    }

    Ok(backtrack(&prev, &psi, t_len, q))
}

/// Exhaustive oracle: scores every band-admissible path.
///
/// Guarded to `Q^T <= 10^7`. Uses the same accumulation order and tie-break
/// rule as [`decode`], so agreement is exact including ties.
pub fn brute_force_decode(
    observations: ArrayView2<'_, f64>,
    transition: &TransitionModel,
    initial: &[f64],
) -> Result<DecodePath> {
    let (t_len, q) = check_inputs(&observations, transition, initial)?;
    if (q as f64).powi(t_len as i32) > 1e7 {
        return Err(Error::invalid(format!(
            "instance too large for exhaustive enumeration: Q^T = {q}^{t_len} > 1e7"
        )));
    }

    let band = transition.band_halfwidth;
    let mut best_score = f64::NEG_INFINITY;
    let mut best_path: Vec<usize> = Vec::new();
    let mut path = vec![0usize; t_len];
    // finite_depth[t] records whether any length-(t+1) prefix scores finitely;
    // the first false entry is the frame where admissibility collapses, the
    // condition the DP reports as a degenerate frame.
    let mut finite_depth = vec![false; t_len];

    // Depth-first over band-admissible successors, accumulating the score in
    // the same op order as the DP: (((init + e0) + trans) + e1) + ...
    #[allow(clippy::too_many_arguments)]
    fn visit(
        t: usize,
        t_len: usize,
        q: usize,
        band: usize,
        score: f64,
        path: &mut Vec<usize>,
        observations: &ArrayView2<'_, f64>,
        transition: &TransitionModel,
        initial: &[f64],
        best_score: &mut f64,
        best_path: &mut Vec<usize>,
        finite_depth: &mut [bool],
    ) {
        if t == t_len {
            if score > *best_score || (score == *best_score && reverse_lex_less(path, best_path))
            {
                *best_score = score;
                best_path.clear();
                best_path.extend_from_slice(path);
            }
            return;
        }
        let (lo, hi) = if t == 0 {
            (0, q - 1)
        } else {
            let prev = path[t - 1];
            (prev.saturating_sub(band), (prev + band).min(q - 1))
        };
        for s in lo..=hi {
            let mut sc = score;
            if t > 0 {
                sc += transition.log_prob(path[t - 1], s);
            } else {
                sc = initial[s];
            }
            sc += observations[(t, s)];
            path[t] = s;
            if sc > f64::NEG_INFINITY {
                finite_depth[t] = true;
            }
            visit(
                t + 1,
                t_len,
                q,
                band,
                sc,
                path,
                observations,
                transition,
                initial,
                best_score,
                best_path,
                finite_depth,
            );
        }
    }

    visit(
        0,
        t_len,
        q,
        band,
        0.0,
        &mut path,
        &observations,
        transition,
        initial,
        &mut best_score,
        &mut best_path,
        &mut finite_depth,
    );

    if best_score == f64::NEG_INFINITY {
        let frame = finite_depth.iter().position(|&ok| !ok).unwrap_or(0);
        return Err(Error::DegenerateFrame { frame });
    }
    Ok(DecodePath {
        states: best_path,
        log_joint: best_score,
    })
}

/// `a < b` comparing states from the last frame backwards; this is the order
/// the DP backtrack realizes when breaking ties by lowest state index.
fn reverse_lex_less(a: &[usize], b: &[usize]) -> bool {
    if b.is_empty() {
        return true;
    }
    for (x, y) in a.iter().rev().zip(b.iter().rev()) {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Re-score a path independently of the DP tables (test support).
pub fn score_path(
    states: &[usize],
    observations: ArrayView2<'_, f64>,
    transition: &TransitionModel,
    initial: &[f64],
) -> f64 {
    let mut score = initial[states[0]] + observations[(0, states[0])];
    for t in 1..states.len() {
        score += transition.log_prob(states[t - 1], states[t]);
        score += observations[(t, states[t])];
    }
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_prior(q: usize) -> Vec<f64> {
        vec![-(q as f64).ln(); q]
    }

    fn random_instance(rng: &mut ChaCha8Rng, t: usize, q: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, q), |_| rng.gen_range(-5.0..0.0))
    }

    #[test]
    fn triangular_3_1_normalizes_to_quarter_half_quarter() {
        let m = TransitionModel::triangular(3, 1).unwrap();
        let probs: Vec<f64> = m.log_kernel().iter().map(|l| l.exp()).collect();
        assert_eq!(probs.len(), 3);
        assert!((probs[0] - 0.25).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
        assert!((probs[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn triangular_zero_jump_is_identity_kernel() {
        let m = TransitionModel::triangular(5, 0).unwrap();
        assert_eq!(m.band_halfwidth(), 0);
        assert_eq!(m.log_kernel().len(), 1);
        assert!((m.log_kernel()[0].exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangular_pitch_grid_band_width() {
        // 240 bins of 5 cents = one octave on the 1440-bin grid.
        let m = TransitionModel::triangular(1440, 240).unwrap();
        assert_eq!(m.log_kernel().len(), 481);
        assert_eq!(m.band_halfwidth(), 240);
    }

    #[test]
    fn triangular_rejects_jump_at_least_num_states() {
        assert!(TransitionModel::triangular(4, 4).is_err());
        assert!(TransitionModel::triangular(4, 7).is_err());
    }

    #[test]
    fn interior_row_sums_to_one_and_is_symmetric_non_increasing() {
        let m = TransitionModel::triangular(100, 7).unwrap();
        let sum: f64 = m.log_kernel().iter().map(|l| l.exp()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let k = m.log_kernel();
        let b = m.band_halfwidth();
        for d in 0..=b {
            assert_eq!(k[b - d], k[b + d], "kernel must be symmetric");
            if d > 0 {
                assert!(k[b + d] <= k[b + d - 1], "kernel must not increase away from center");
            }
        }
    }

    #[test]
    fn boundary_rows_renormalize_to_one() {
        let m = TransitionModel::triangular(10, 3).unwrap();
        for from in [0usize, 1, 2, 8, 9] {
            let sum: f64 = (0..10)
                .map(|to| {
                    let lp = m.log_prob(from, to);
                    if lp == f64::NEG_INFINITY {
                        0.0
                    } else {
                        lp.exp()
                    }
                })
                .sum();
            assert!((sum - 1.0).abs() < 1e-9, "row {from} sums to {sum}");
        }
    }

    #[test]
    fn single_frame_decodes_argmax() {
        let obs = Array2::from_shape_vec((1, 3), vec![-1.0, -0.1, -2.0]).unwrap();
        let m = TransitionModel::triangular(3, 1).unwrap();
        let path = decode(obs.view(), &m, &uniform_prior(3)).unwrap();
        assert_eq!(path.states, vec![1]);
    }

    #[test]
    fn zero_band_decodes_constant_path_at_first_frame_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = random_instance(&mut rng, 6, 5);
        let m = TransitionModel::triangular(5, 0).unwrap();
        let prior = uniform_prior(5);
        let path = decode(obs.view(), &m, &prior).unwrap();
        let first = obs.row(0);
        let argmax = (0..5)
            .max_by(|&a, &b| {
                (prior[a] + first[a])
                    .partial_cmp(&(prior[b] + first[b]))
                    .unwrap()
            })
            .unwrap();
        assert!(path.states.iter().all(|&s| s == argmax));
    }

    #[test]
    fn all_neg_inf_frame_reports_frame_index() {
        let mut obs = Array2::from_elem((4, 3), -1.0);
        obs.row_mut(2).fill(f64::NEG_INFINITY);
        let m = TransitionModel::triangular(3, 1).unwrap();
        match decode(obs.view(), &m, &uniform_prior(3)) {
            Err(Error::DegenerateFrame { frame }) => assert_eq!(frame, 2),
            other => panic!("expected degenerate frame error, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_matches_hand_scored_two_frame_instance() {
        // Q=2, T=2, band 1. Hand scores with uniform prior ln(1/2):
        //   [0,0]: -0.693 + -1.0 + ln(2/3) + -0.5  = -2.599
        //   [0,1]: -0.693 + -1.0 + ln(1/3) + -0.2  = -2.992
        //   [1,0]: -0.693 + -0.3 + ln(1/3) + -0.5  = -2.592
        //   [1,1]: -0.693 + -0.3 + ln(2/3) + -0.2  = -1.599  <- best
        let obs = Array2::from_shape_vec((2, 2), vec![-1.0, -0.3, -0.5, -0.2]).unwrap();
        let m = TransitionModel::triangular(2, 1).unwrap();
        let path = brute_force_decode(obs.view(), &m, &uniform_prior(2)).unwrap();
        assert_eq!(path.states, vec![1, 1]);
        let expected = -(2.0f64).ln() - 0.3 + (2.0f64 / 3.0).ln() - 0.2;
        assert!((path.log_joint - expected).abs() < 1e-12);
    }

    #[test]
    fn brute_force_follows_one_hot_emissions() {
        let mut obs = Array2::from_elem((4, 3), f64::NEG_INFINITY);
        let want = [0usize, 1, 2, 2];
        for (t, &s) in want.iter().enumerate() {
            obs[(t, s)] = 0.0;
        }
        let m = TransitionModel::triangular(3, 1).unwrap();
        let path = brute_force_decode(obs.view(), &m, &uniform_prior(3)).unwrap();
        assert_eq!(path.states, want.to_vec());
    }

    #[test]
    fn brute_force_rejects_oversized_instances() {
        let obs = Array2::from_elem((30, 10), -1.0);
        let m = TransitionModel::triangular(10, 2).unwrap();
        assert!(matches!(
            brute_force_decode(obs.view(), &m, &uniform_prior(10)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn decode_agrees_with_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..200 {
            let q = rng.gen_range(2..=5usize);
            let t = rng.gen_range(1..=6usize);
            let band = rng.gen_range(0..q);
            let mut obs = random_instance(&mut rng, t, q);
            // Sprinkle a few hard zeros to exercise -inf handling.
            if case % 3 == 0 {
                for _ in 0..t {
                    let (i, j) = (rng.gen_range(0..t), rng.gen_range(0..q));
                    obs[(i, j)] = f64::NEG_INFINITY;
                }
            }
            let m = TransitionModel::triangular(q, band).unwrap();
            let prior = uniform_prior(q);
            let fast = decode(obs.view(), &m, &prior);
            let slow = brute_force_decode(obs.view(), &m, &prior);
            match (fast, slow) {
                (Ok(f), Ok(s)) => {
                    assert_eq!(f.states, s.states, "case {case} path mismatch");
                    assert!((f.log_joint - s.log_joint).abs() < 1e-9);
                }
                (Err(Error::DegenerateFrame { frame: a }), Err(Error::DegenerateFrame { frame: b })) => {
                    assert_eq!(a, b)
                }
                (f, s) => panic!("case {case}: divergent outcomes {f:?} vs {s:?}"),
            }
        }
    }

    #[test]
    fn dense_reference_matches_banded_decoder() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let q = rng.gen_range(2..=24usize);
            let t = rng.gen_range(1..=20usize);
            let band = rng.gen_range(0..q);
            let obs = random_instance(&mut rng, t, q);
            let m = TransitionModel::triangular(q, band).unwrap();
            let prior = uniform_prior(q);
            let banded = decode(obs.view(), &m, &prior).unwrap();
            let dense = decode_dense(obs.view(), &DenseTransition::from_model(&m), &prior).unwrap();
            assert_eq!(banded.states, dense.states);
            assert_eq!(banded.log_joint, dense.log_joint);
        }
    }

    #[test]
    fn batch_of_one_is_identical_to_decode() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs = random_instance(&mut rng, 12, 8);
        let m = TransitionModel::triangular(8, 2).unwrap();
        let prior = uniform_prior(8);
        let single = decode(obs.view(), &m, &prior).unwrap();
        let batch = decode_batch(&[obs.view()], &m, &prior);
        assert_eq!(batch.len(), 1);
        let got = batch[0].as_ref().unwrap();
        assert_eq!(got.states, single.states);
        assert_eq!(got.log_joint, single.log_joint);
    }

    #[test]
    fn batch_isolates_per_sequence_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let good = random_instance(&mut rng, 5, 4);
        let empty = Array2::<f64>::zeros((0, 4));
        let also_good = random_instance(&mut rng, 7, 4);
        let m = TransitionModel::triangular(4, 1).unwrap();
        let prior = uniform_prior(4);
        let out = decode_batch(&[good.view(), empty.view(), also_good.view()], &m, &prior);
        assert!(out[0].is_ok());
        match &out[1] {
            Err(Error::BatchItem { index, .. }) => assert_eq!(*index, 1),
            other => panic!("expected batch error, got {other:?}"),
        }
        assert!(out[2].is_ok());
    }

    #[test]
    fn batch_result_is_independent_of_worker_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seqs: Vec<Array2<f64>> = (0..16)
            .map(|_| {
                let t = rng.gen_range(3..20);
                random_instance(&mut rng, t, 12)
            })
            .collect();
        let views: Vec<_> = seqs.iter().map(|s| s.view()).collect();
        let m = TransitionModel::triangular(12, 3).unwrap();
        let prior = uniform_prior(12);
        let baseline: Vec<_> = views
            .iter()
            .map(|v| decode(*v, &m, &prior).unwrap())
            .collect();

        let run = |pool_threads: usize| -> Vec<DecodePath> {
            #[cfg(feature = "parallel")]
            {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(pool_threads)
                    .build()
                    .unwrap();
                pool.install(|| decode_batch(&views, &m, &prior))
                    .into_iter()
                    .map(|r| r.unwrap())
                    .collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                let _ = pool_threads;
                decode_batch(&views, &m, &prior)
                    .into_iter()
                    .map(|r| r.unwrap())
                    .collect()
            }
        };

        for threads in [1usize, 2, 4] {
            let got = run(threads);
            for (g, b) in got.iter().zip(baseline.iter()) {
                assert_eq!(g.states, b.states);
                assert_eq!(g.log_joint, b.log_joint);
            }
        }
    }

    #[test]
    fn per_frame_constant_shift_leaves_path_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let q = rng.gen_range(2..=10usize);
            let t = rng.gen_range(2..=15usize);
            let band = rng.gen_range(0..q);
            let obs = random_instance(&mut rng, t, q);
            let mut shifted = obs.clone();
            for mut row in shifted.rows_mut() {
                let c = rng.gen_range(-10.0..10.0);
                row.mapv_inplace(|e| e + c);
            }
            let m = TransitionModel::triangular(q, band).unwrap();
            let prior = uniform_prior(q);
            let a = decode(obs.view(), &m, &prior).unwrap();
            let b = decode(shifted.view(), &m, &prior).unwrap();
            assert_eq!(a.states, b.states);
        }
    }

    #[test]
    fn decoded_paths_respect_band_and_log_joint_rescoring() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let q = rng.gen_range(2..=30usize);
            let t = rng.gen_range(1..=40usize);
            let band = rng.gen_range(0..q);
            let obs = random_instance(&mut rng, t, q);
            let m = TransitionModel::triangular(q, band).unwrap();
            let prior = uniform_prior(q);
            let path = decode(obs.view(), &m, &prior).unwrap();
            for w in path.states.windows(2) {
                assert!(w[0].abs_diff(w[1]) <= band, "band constraint violated");
            }
            let rescored = score_path(&path.states, obs.view(), &m, &prior);
            assert!((rescored - path.log_joint).abs() < 1e-9);
        }
    }
}
