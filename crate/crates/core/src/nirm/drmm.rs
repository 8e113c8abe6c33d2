//! DRMM with log-count histograms and idf term gating.
//!
//! Each summary row becomes a `B`-bin matching histogram (B-1 equal-width
//! bins over `[-1, 1)` plus one exact-match bin, counts mapped to
//! `ln(1 + c)`), fed through a `B -> 5 -> 1` network with a tanh hidden
//! layer. Row scores are combined with softmax gates over `w_g * idf`.

use std::sync::LazyLock;

use rand::Rng;

use crate::embeddings::InteractionMatrix;
use crate::error::{Error, Result};

use super::params::{dense_blocks, dense_blocks_mut, Dense, Parameters};
use super::Scored;

pub const DEFAULT_BINS: usize = 30;
pub const DRMM_HIDDEN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct DrmmParams {
    pub hidden: Dense,
    pub output: Dense,
    /// Scalar multiplying idf inside the gating softmax.
    pub gate: f64,
}

impl DrmmParams {
    pub fn zeros(bins: usize) -> Self {
        DrmmParams {
            hidden: Dense::zeros(bins, DRMM_HIDDEN),
            output: Dense::zeros(DRMM_HIDDEN, 1),
            gate: 0.0,
        }
    }

    pub fn uniform<R: Rng + ?Sized>(bins: usize, rng: &mut R) -> Self {
        let hidden = Dense::uniform(bins, DRMM_HIDDEN, rng);
        let output = Dense::uniform(DRMM_HIDDEN, 1, rng);
        let r = super::params::glorot_bound(1, 1);
        DrmmParams {
            hidden,
            output,
            gate: rng.random_range(-r..=r),
        }
    }

    pub fn bins(&self) -> usize {
        self.hidden.inputs
    }
}

impl Parameters for DrmmParams {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<_> = dense_blocks("drmm.hidden", &self.hidden).into();
        out.extend(dense_blocks("drmm.output", &self.output));
        out.push(("drmm.gate".into(), std::slice::from_ref(&self.gate)));
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<_> = dense_blocks_mut("drmm.hidden", &mut self.hidden).into();
        out.extend(dense_blocks_mut("drmm.output", &mut self.output));
        out.push(("drmm.gate".into(), std::slice::from_mut(&mut self.gate)));
        out
    }

    fn zeros_like(&self) -> Self {
        DrmmParams::zeros(self.bins())
    }
}

/// Log-count histogram of one row of similarities.
pub fn drmm_histogram(row: &[f64], bins: usize) -> Vec<f64> {
    histogram_counts(row, bins)
        .into_iter()
        .map(|c| (c as f64).ln_1p())
        .collect()
}

fn histogram_counts(row: &[f64], bins: usize) -> Vec<u32> {
    assert!(bins >= 2, "a matching histogram needs at least two bins");
    let mut counts = vec![0u32; bins];
    for &s in row {
        counts[histogram_bin(s, bins)] += 1;
    }
    counts
}

fn histogram_bin(s: f64, bins: usize) -> usize {
    if s >= 1.0 {
        return bins - 1;
    }
    let intervals = bins - 1;
    let pos = ((s + 1.0) / 2.0 * intervals as f64).floor();
    (pos.max(0.0) as usize).min(intervals - 1)
}

/// Parameter-independent DRMM input: one histogram and one idf per row.
/// Raw bin counts are stored; the log transform is applied on use.
#[derive(Debug, Clone, PartialEq)]
pub struct DrmmInput {
    pub bins: usize,
    counts: Vec<u32>,
    pub idf: Vec<f64>,
}

impl DrmmInput {
    /// `idf_weights` is aligned with the summary the matrix was built from;
    /// rows dropped by OOV handling are skipped via the matrix row sources.
    pub fn new(matrix: &InteractionMatrix, idf_weights: &[f64], bins: usize) -> Result<Self> {
        let mut counts = Vec::with_capacity(matrix.n_rows() * bins);
        let mut idf = Vec::with_capacity(matrix.n_rows());
        if !matrix.is_degenerate() {
            for (i, &src) in matrix.row_source().iter().enumerate() {
                let w = *idf_weights.get(src).ok_or_else(|| {
                    Error::Shape(format!(
                        "idf weights cover {} rows, matrix row {i} needs index {src}",
                        idf_weights.len()
                    ))
                })?;
                counts.extend(histogram_counts(matrix.row(i), bins));
                idf.push(w);
            }
        }
        Ok(DrmmInput { bins, counts, idf })
    }

    pub fn rows(&self) -> usize {
        self.idf.len()
    }

    fn row_counts(&self, i: usize) -> &[u32] {
        &self.counts[i * self.bins..(i + 1) * self.bins]
    }

    /// The log-count histogram of row `i`, written into `out`.
    pub fn histogram_into(&self, i: usize, out: &mut [f64]) {
        let row = &self.counts[i * self.bins..(i + 1) * self.bins];
        for (o, &c) in out.iter_mut().zip(row) {
            *o = log_count(c);
        }
    }
}

const LOG_TABLE_SIZE: usize = 512;

static LOG_TABLE: LazyLock<[f64; LOG_TABLE_SIZE]> =
    LazyLock::new(|| std::array::from_fn(|c| (c as f64).ln_1p()));

// Histograms are recomputed on every forward pass, and most counts are small.
fn log_count(c: u32) -> f64 {
    match LOG_TABLE.get(c as usize) {
        Some(&v) => v,
        None => (c as f64).ln_1p(),
    }
}

/// Forward intermediates needed by [`drmm_backward`].
#[derive(Debug, Clone)]
pub struct DrmmCache {
    fingerprint: u64,
    hidden: Vec<f64>,
    row_scores: Vec<f64>,
    gates: Vec<f64>,
    score: f64,
}

impl DrmmCache {
    pub fn gates(&self) -> &[f64] {
        &self.gates
    }

    pub fn row_scores(&self) -> &[f64] {
        &self.row_scores
    }

    /// Gradient of the score w.r.t. each gate logit `w_g * idf_i`.
    pub fn gate_logit_grads(&self, upstream: f64) -> Vec<f64> {
        self.gates
            .iter()
            .zip(&self.row_scores)
            .map(|(g, z)| upstream * g * (z - self.score))
            .collect()
    }
}

pub fn drmm_forward(params: &DrmmParams, input: &DrmmInput) -> Result<(Scored, DrmmCache)> {
    drmm_forward_tagged(params, input, params.fingerprint())
}

/// Forward pass whose cache carries a caller-computed fingerprint, so a
/// composite model hashes its parameters once per target, not per input.
pub(crate) fn drmm_forward_tagged(
    params: &DrmmParams,
    input: &DrmmInput,
    fingerprint: u64,
) -> Result<(Scored, DrmmCache)> {
    if input.bins != params.bins() {
        return Err(Error::Shape(format!(
            "input has {} bins, model expects {}",
            input.bins,
            params.bins()
        )));
    }
    let rows = input.rows();
    let mut cache = DrmmCache {
        fingerprint,
        hidden: Vec::with_capacity(rows * DRMM_HIDDEN),
        row_scores: Vec::with_capacity(rows),
        gates: Vec::with_capacity(rows),
        score: 0.0,
    };
    if rows == 0 {
        return Ok((Scored::degenerate(), cache));
    }
    let mut a = vec![0.0; params.hidden.outputs];
    let mut nonzero: Vec<(usize, f64)> = Vec::with_capacity(input.bins);
    for i in 0..rows {
        // Histograms are sparse; skipping empty bins leaves every sum unchanged.
        nonzero.clear();
        nonzero.extend(
            input.row_counts(i)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(b, &c)| (b, log_count(c))),
        );
        for (o, a_o) in a.iter_mut().enumerate() {
            let w = &params.hidden.weights[o * input.bins..(o + 1) * input.bins];
            let pre = params.hidden.bias[o] + nonzero.iter().map(|&(b, x)| w[b] * x).sum::<f64>();
            *a_o = pre.tanh();
        }
        let z = params.output.affine(&a)[0];
        cache.hidden.extend_from_slice(&a);
        cache.row_scores.push(z);
    }
    cache.gates = softmax(input.idf.iter().map(|w| params.gate * w));
    cache.score = cache
        .gates
        .iter()
        .zip(&cache.row_scores)
        .map(|(g, z)| g * z)
        .sum();
    Ok((Scored::new(cache.score), cache))
}

/// Adds `upstream * d score / d params` into `grad`.
pub fn drmm_backward(
    params: &DrmmParams,
    input: &DrmmInput,
    cache: &DrmmCache,
    upstream: f64,
    grad: &mut DrmmParams,
) -> Result<()> {
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::StaleCache);
    }
    drmm_backward_unchecked(params, input, cache, upstream, grad)
}

/// [`drmm_backward`] without the fingerprint comparison; the caller vouches
/// that `cache` came from these parameters.
pub(crate) fn drmm_backward_unchecked(
    params: &DrmmParams,
    input: &DrmmInput,
    cache: &DrmmCache,
    upstream: f64,
    grad: &mut DrmmParams,
) -> Result<()> {
    if cache.row_scores.len() != input.rows() {
        return Err(Error::StaleCache);
    }
    let hidden_size = params.hidden.outputs;
    let logit_grads = cache.gate_logit_grads(upstream);
    let mut h = vec![0.0; input.bins];
    for i in 0..input.rows() {
        grad.gate += logit_grads[i] * input.idf[i];
        let dz = upstream * cache.gates[i];
        if dz == 0.0 {
            continue;
        }
        let u = &cache.hidden[i * hidden_size..(i + 1) * hidden_size];
        params.output.accumulate_grad(u, &[dz], &mut grad.output);
        let da: Vec<f64> = params
            .output
            .input_grad(&[dz])
            .into_iter()
            .zip(u)
            .map(|(d, u)| d * (1.0 - u * u))
            .collect();
        input.histogram_into(i, &mut h);
        params.hidden.accumulate_grad(&h, &da, &mut grad.hidden);
    }
    Ok(())
}

/// Scores an interaction matrix in one call.
pub fn drmm_score(matrix: &InteractionMatrix, idf_weights: &[f64], params: &DrmmParams) -> Result<Scored> {
    let input = DrmmInput::new(matrix, idf_weights, params.bins())?;
    Ok(drmm_forward(params, &input)?.0)
}

pub(crate) fn softmax(logits: impl Iterator<Item = f64>) -> Vec<f64> {
    let logits: Vec<f64> = logits.collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_row_histogram_is_zero() {
        assert_eq!(drmm_histogram(&[], 30), vec![0.0; 30]);
    }

    #[test]
    fn exact_match_bin() {
        let h = drmm_histogram(&[1.0], 30);
        assert_eq!(h[29], 2f64.ln());
        assert!(h[..29].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bin_edges() {
        assert_eq!(histogram_bin(-1.0, 30), 0);
        assert_eq!(histogram_bin(0.999_999, 30), 28);
        assert_eq!(histogram_bin(0.0, 3), 1);
        assert_eq!(histogram_bin(-1e-12, 3), 0);
    }

    #[test]
    fn random_histogram_matches_interval_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let row: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bins = 30;
        let width = 2.0 / (bins - 1) as f64;
        let mut counts = vec![0usize; bins];
        for &s in &row {
            let mut placed = false;
            for b in 0..bins - 1 {
                let lo = -1.0 + b as f64 * width;
                let hi = lo + width;
                if s >= lo && (s < hi || b == bins - 2) {
                    counts[b] += 1;
                    placed = true;
                    break;
                }
            }
            assert!(placed);
        }
        let expected: Vec<f64> = counts.iter().map(|&c| (c as f64).ln_1p()).collect();
        assert_eq!(drmm_histogram(&row, bins), expected);
    }

    #[test]
    fn zero_params_score_zero() {
        let m = InteractionMatrix::from_values(2, 3, vec![0.1, 0.5, 1.0, -0.3, 0.2, 0.9]).unwrap();
        let s = drmm_score(&m, &[1.0, 2.0], &DrmmParams::zeros(30)).unwrap();
        assert_eq!(s.score, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn single_row_equals_ffn_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = DrmmParams::uniform(30, &mut rng);
        let m = InteractionMatrix::from_values(1, 4, vec![0.1, 0.5, 1.0, -0.3]).unwrap();
        let s = drmm_score(&m, &[3.7], &params).unwrap();
        let h = drmm_histogram(m.row(0), 30);
        let hidden: Vec<f64> = params.hidden.affine(&h).into_iter().map(f64::tanh).collect();
        let z = params.output.affine(&hidden)[0];
        assert!((s.score - z).abs() < 1e-15);
    }

    #[test]
    fn degenerate_matrix_scores_zero() {
        let m = InteractionMatrix::from_values(0, 0, vec![]).unwrap();
        let s = drmm_score(&m, &[], &DrmmParams::zeros(30)).unwrap();
        assert_eq!(s, Scored::degenerate());
    }

    #[test]
    fn stale_cache_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut params = DrmmParams::uniform(30, &mut rng);
        let m = InteractionMatrix::from_values(1, 2, vec![0.3, 0.4]).unwrap();
        let input = DrmmInput::new(&m, &[1.0], 30).unwrap();
        let (_, cache) = drmm_forward(&params, &input).unwrap();
        params.gate += 0.5;
        let mut grad = params.zeros_like();
        assert!(matches!(
            drmm_backward(&params, &input, &cache, 1.0, &mut grad),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn gate_logit_grads_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let params = DrmmParams::uniform(30, &mut rng);
        let values: Vec<f64> = (0..4 * 6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = InteractionMatrix::from_values(4, 6, values).unwrap();
        let input = DrmmInput::new(&m, &[0.5, 1.5, 2.5, 0.1], 30).unwrap();
        let (_, cache) = drmm_forward(&params, &input).unwrap();
        let total: f64 = cache.gate_logit_grads(1.0).iter().sum();
        assert!(total.abs() < 1e-14);
    }
}
