//! K-NRM with frozen embeddings: Gaussian kernel pooling over the
//! interaction matrix, then a `K -> H -> 1` ranking layer with tanh on both
//! the hidden layer and the output.

use rand::Rng;

use crate::embeddings::InteractionMatrix;
use crate::error::{Error, Result};

use super::params::{dense_blocks, dense_blocks_mut, Dense, Parameters};
use super::Scored;

pub const KNRM_HIDDEN: usize = 5;
/// Lower clamp applied to each row's kernel sum before the log.
pub const LOG_CLAMP: f64 = 1e-10;
/// Fixed factor applied to the pooled features before the ranking layer.
pub const FEATURE_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub mu: f64,
    pub sigma: f64,
}

/// The exact-match kernel (mu 1, sigma 1e-3) followed by ten soft-match
/// kernels at mu = -0.9, -0.7, ..., 0.9 with sigma 0.1.
pub fn default_kernels() -> Vec<Kernel> {
    let mut kernels = vec![Kernel { mu: 1.0, sigma: 1e-3 }];
    kernels.extend((0..10).map(|i| Kernel {
        mu: -0.9 + 0.2 * i as f64,
        sigma: 0.1,
    }));
    kernels
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnrmParams {
    /// Fixed; never updated by training.
    pub kernels: Vec<Kernel>,
    pub hidden: Dense,
    pub output: Dense,
}

impl KnrmParams {
    pub fn zeros(kernels: Vec<Kernel>) -> Self {
        let k = kernels.len();
        KnrmParams {
            kernels,
            hidden: Dense::zeros(k, KNRM_HIDDEN),
            output: Dense::zeros(KNRM_HIDDEN, 1),
        }
    }

    pub fn uniform<R: Rng + ?Sized>(kernels: Vec<Kernel>, rng: &mut R) -> Self {
        let k = kernels.len();
        KnrmParams {
            kernels,
            hidden: Dense::uniform(k, KNRM_HIDDEN, rng),
            output: Dense::uniform(KNRM_HIDDEN, 1, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for k in &self.kernels {
            if !(k.sigma > 0.0) || !(-1.0..=1.0).contains(&k.mu) {
                return Err(Error::Parameter(format!("invalid kernel {k:?}")));
            }
        }
        if self.hidden.inputs != self.kernels.len() {
            return Err(Error::Shape("ranking layer width differs from kernel count".into()));
        }
        Ok(())
    }
}

impl Parameters for KnrmParams {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<_> = dense_blocks("knrm.hidden", &self.hidden).into();
        out.extend(dense_blocks("knrm.output", &self.output));
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<_> = dense_blocks_mut("knrm.hidden", &mut self.hidden).into();
        out.extend(dense_blocks_mut("knrm.output", &mut self.output));
        out
    }

    fn zeros_like(&self) -> Self {
        KnrmParams::zeros(self.kernels.clone())
    }
}

/// Soft-TF features `phi_k = sum_rows ln(max(sum_cols K_k(s), eps))`.
/// Returns `None` for a degenerate matrix.
pub fn knrm_features(matrix: &InteractionMatrix, kernels: &[Kernel]) -> Option<Vec<f64>> {
    if matrix.is_degenerate() {
        return None;
    }
    let coef: Vec<f64> = kernels.iter().map(|k| -0.5 / (k.sigma * k.sigma)).collect();
    let mut features = vec![0.0; kernels.len()];
    let mut sums = vec![0.0; kernels.len()];
    for row in matrix.rows() {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for &s in row {
            for ((sum, k), c) in sums.iter_mut().zip(kernels).zip(&coef) {
                let d = s - k.mu;
                *sum += (c * d * d).exp();
            }
        }
        for (f, s) in features.iter_mut().zip(&sums) {
            *f += s.max(LOG_CLAMP).ln();
        }
    }
    Some(features)
}

/// Parameter-independent K-NRM input: the pooled features, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct KnrmInput {
    pub features: Option<Vec<f64>>,
}

impl KnrmInput {
    pub fn new(matrix: &InteractionMatrix, kernels: &[Kernel]) -> Self {
        KnrmInput {
            features: knrm_features(matrix, kernels),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KnrmCache {
    fingerprint: u64,
    scaled: Vec<f64>,
    hidden: Vec<f64>,
    output: f64,
}

pub fn knrm_forward(params: &KnrmParams, input: &KnrmInput) -> Result<(Scored, KnrmCache)> {
    knrm_forward_tagged(params, input, params.fingerprint())
}

pub(crate) fn knrm_forward_tagged(
    params: &KnrmParams,
    input: &KnrmInput,
    fingerprint: u64,
) -> Result<(Scored, KnrmCache)> {
    let mut cache = KnrmCache {
        fingerprint,
        scaled: Vec::new(),
        hidden: Vec::new(),
        output: 0.0,
    };
    let Some(features) = &input.features else {
        return Ok((Scored::degenerate(), cache));
    };
    if features.len() != params.hidden.inputs {
        return Err(Error::Shape(format!(
            "{} features for a ranking layer of width {}",
            features.len(),
            params.hidden.inputs
        )));
    }
    cache.scaled = features.iter().map(|f| f * FEATURE_SCALE).collect();
    cache.hidden = params
        .hidden
        .affine(&cache.scaled)
        .into_iter()
        .map(f64::tanh)
        .collect();
    cache.output = params.output.affine(&cache.hidden)[0].tanh();
    Ok((Scored::new(cache.output), cache))
}

pub fn knrm_backward(
    params: &KnrmParams,
    input: &KnrmInput,
    cache: &KnrmCache,
    upstream: f64,
    grad: &mut KnrmParams,
) -> Result<()> {
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::StaleCache);
    }
    knrm_backward_unchecked(params, input, cache, upstream, grad)
}

pub(crate) fn knrm_backward_unchecked(
    params: &KnrmParams,
    input: &KnrmInput,
    cache: &KnrmCache,
    upstream: f64,
    grad: &mut KnrmParams,
) -> Result<()> {
    if input.features.is_none() {
        return Ok(());
    }
    if cache.hidden.is_empty() {
        return Err(Error::StaleCache);
    }
    let d_out = upstream * (1.0 - cache.output * cache.output);
    params.output.accumulate_grad(&cache.hidden, &[d_out], &mut grad.output);
    let d_hidden: Vec<f64> = params
        .output
        .input_grad(&[d_out])
        .into_iter()
        .zip(&cache.hidden)
        .map(|(d, h)| d * (1.0 - h * h))
        .collect();
    params.hidden.accumulate_grad(&cache.scaled, &d_hidden, &mut grad.hidden);
    Ok(())
}

pub fn knrm_score(matrix: &InteractionMatrix, params: &KnrmParams) -> Result<Scored> {
    let input = KnrmInput::new(matrix, &params.kernels);
    Ok(knrm_forward(params, &input)?.0)
}
