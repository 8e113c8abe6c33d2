//! Neural document-to-document relevance scorers.
//!
//! Both scorers split into a parameter-independent preparation step
//! (histograms for DRMM, pooled kernel features for K-NRM) and a cheap
//! parametric forward/backward pass, so training never rebuilds matrices.

pub(crate) mod checkpoint;
pub mod drmm;
pub mod knrm;
pub mod params;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::embeddings::InteractionMatrix;
use crate::error::{Error, Result};

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use drmm::{drmm_histogram, drmm_score, DrmmParams};
pub use knrm::{default_kernels, knrm_features, knrm_score, Kernel, KnrmParams};
pub use params::{Dense, Parameters};

/// A score plus whether it came from an empty interaction matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    pub degenerate: bool,
}

impl Scored {
    pub fn new(score: f64) -> Self {
        Scored {
            score,
            degenerate: false,
        }
    }

    pub fn degenerate() -> Self {
        Scored {
            score: 0.0,
            degenerate: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScorerKind {
    Drmm,
    Knrm,
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScorerKind::Drmm => "drmm",
            ScorerKind::Knrm => "knrm",
        })
    }
}

impl FromStr for ScorerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "drmm" => Ok(ScorerKind::Drmm),
            "knrm" | "k-nrm" => Ok(ScorerKind::Knrm),
            other => Err(Error::Parameter(format!("unknown scorer `{other}`"))),
        }
    }
}

/// Parameters of whichever scorer serves as rel_d.
#[derive(Debug, Clone, PartialEq)]
pub enum ScorerParams {
    Drmm(DrmmParams),
    Knrm(KnrmParams),
}

impl ScorerParams {
    pub fn uniform<R: Rng + ?Sized>(kind: ScorerKind, rng: &mut R) -> Self {
        match kind {
            ScorerKind::Drmm => ScorerParams::Drmm(DrmmParams::uniform(drmm::DEFAULT_BINS, rng)),
            ScorerKind::Knrm => ScorerParams::Knrm(KnrmParams::uniform(default_kernels(), rng)),
        }
    }

    /// All-zero parameters with the default structure for `kind`.
    pub fn zeros(kind: ScorerKind) -> Self {
        match kind {
            ScorerKind::Drmm => ScorerParams::Drmm(DrmmParams::zeros(drmm::DEFAULT_BINS)),
            ScorerKind::Knrm => ScorerParams::Knrm(KnrmParams::zeros(default_kernels())),
        }
    }

    pub fn kind(&self) -> ScorerKind {
        match self {
            ScorerParams::Drmm(_) => ScorerKind::Drmm,
            ScorerParams::Knrm(_) => ScorerKind::Knrm,
        }
    }

    /// Turns a matrix into the scorer's parameter-independent input.
    /// `idf_weights` is aligned with the summary rows and only used by DRMM.
    pub fn prepare(&self, matrix: &InteractionMatrix, idf_weights: &[f64]) -> Result<PreparedInput> {
        Ok(match self {
            ScorerParams::Drmm(p) => {
                PreparedInput::Drmm(drmm::DrmmInput::new(matrix, idf_weights, p.bins())?)
            }
            ScorerParams::Knrm(p) => PreparedInput::Knrm(knrm::KnrmInput::new(matrix, &p.kernels)),
        })
    }

    pub fn forward(&self, input: &PreparedInput) -> Result<(Scored, ScorerCache)> {
        self.forward_tagged(input, self.fingerprint())
    }

    pub(crate) fn forward_tagged(&self, input: &PreparedInput, fingerprint: u64) -> Result<(Scored, ScorerCache)> {
        match (self, input) {
            (ScorerParams::Drmm(p), PreparedInput::Drmm(x)) => {
                let (s, c) = drmm::drmm_forward_tagged(p, x, fingerprint)?;
                Ok((s, ScorerCache::Drmm(c)))
            }
            (ScorerParams::Knrm(p), PreparedInput::Knrm(x)) => {
                let (s, c) = knrm::knrm_forward_tagged(p, x, fingerprint)?;
                Ok((s, ScorerCache::Knrm(c)))
            }
            _ => Err(Error::Shape("prepared input belongs to a different scorer".into())),
        }
    }

    pub fn score(&self, input: &PreparedInput) -> Result<Scored> {
        Ok(self.forward(input)?.0)
    }

    /// Accumulates `upstream * d score / d params` into `grad`.
    pub fn backward_into(
        &self,
        input: &PreparedInput,
        cache: &ScorerCache,
        upstream: f64,
        grad: &mut ScorerParams,
    ) -> Result<()> {
        match (self, input, cache, grad) {
            (ScorerParams::Drmm(p), PreparedInput::Drmm(x), ScorerCache::Drmm(c), ScorerParams::Drmm(g)) => {
                drmm::drmm_backward(p, x, c, upstream, g)
            }
            (ScorerParams::Knrm(p), PreparedInput::Knrm(x), ScorerCache::Knrm(c), ScorerParams::Knrm(g)) => {
                knrm::knrm_backward(p, x, c, upstream, g)
            }
            _ => Err(Error::StaleCache),
        }
    }

    /// Backward pass for caches produced by [`Self::forward_tagged`]; the
    /// caller has already checked the fingerprint.
    pub(crate) fn backward_into_unchecked(
        &self,
        input: &PreparedInput,
        cache: &ScorerCache,
        upstream: f64,
        grad: &mut ScorerParams,
    ) -> Result<()> {
        match (self, input, cache, grad) {
            (ScorerParams::Drmm(p), PreparedInput::Drmm(x), ScorerCache::Drmm(c), ScorerParams::Drmm(g)) => {
                drmm::drmm_backward_unchecked(p, x, c, upstream, g)
            }
            (ScorerParams::Knrm(p), PreparedInput::Knrm(x), ScorerCache::Knrm(c), ScorerParams::Knrm(g)) => {
                knrm::knrm_backward_unchecked(p, x, c, upstream, g)
            }
            _ => Err(Error::StaleCache),
        }
    }

    /// Gradient of `upstream * score` for one input, from a cached forward.
    pub fn backward(&self, input: &PreparedInput, cache: &ScorerCache, upstream: f64) -> Result<ScorerParams> {
        let mut grad = self.zeros_like();
        self.backward_into(input, cache, upstream, &mut grad)?;
        Ok(grad)
    }

    pub fn shape_descriptor(&self) -> String {
        match self {
            ScorerParams::Drmm(p) => format!("bins={},hidden={}", p.bins(), p.hidden.outputs),
            ScorerParams::Knrm(p) => format!("kernels={},hidden={}", p.kernels.len(), p.hidden.outputs),
        }
    }
}

impl Parameters for ScorerParams {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        match self {
            ScorerParams::Drmm(p) => p.blocks(),
            ScorerParams::Knrm(p) => p.blocks(),
        }
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        match self {
            ScorerParams::Drmm(p) => p.blocks_mut(),
            ScorerParams::Knrm(p) => p.blocks_mut(),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            ScorerParams::Drmm(p) => ScorerParams::Drmm(p.zeros_like()),
            ScorerParams::Knrm(p) => ScorerParams::Knrm(p.zeros_like()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PreparedInput {
    Drmm(drmm::DrmmInput),
    Knrm(knrm::KnrmInput),
}

#[derive(Debug, Clone)]
pub enum ScorerCache {
    Drmm(drmm::DrmmCache),
    Knrm(knrm::KnrmCache),
}
