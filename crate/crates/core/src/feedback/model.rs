use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nirm::checkpoint::{scorer_blocks, scorer_from_checkpoint};
use crate::nirm::params::{dense_blocks, dense_blocks_mut};
use crate::nirm::{Checkpoint, Dense, Parameters, PreparedInput, ScorerCache, ScorerKind, ScorerParams};

use super::gates::GatedScores;

pub const COMBINE_HIDDEN: usize = 5;

/// How gated feedback scores are merged into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CombineVariant {
    /// Direct summation.
    Ds,
    /// `m -> 5 -> 1` network (tanh hidden) over gated scores in rank order.
    Ff,
    /// As `Ff` with every gate fixed to 1.
    FfPrime,
}

impl fmt::Display for CombineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombineVariant::Ds => "ds",
            CombineVariant::Ff => "ff",
            CombineVariant::FfPrime => "ffprime",
        })
    }
}

impl FromStr for CombineVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ds" => Ok(CombineVariant::Ds),
            "ff" => Ok(CombineVariant::Ff),
            "ffprime" | "ff_prime" | "ff'" => Ok(CombineVariant::FfPrime),
            other => Err(Error::Parameter(format!("unknown combination variant `{other}`"))),
        }
    }
}

/// The embedded scorer shared by all feedback documents plus the combination
/// layer (absent for `Ds`).
#[derive(Debug, Clone, PartialEq)]
pub struct NprfParams {
    pub variant: CombineVariant,
    pub m: usize,
    pub scorer: ScorerParams,
    pub combine: Option<Combiner>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    pub hidden: Dense,
    pub output: Dense,
}

impl NprfParams {
    pub fn uniform<R: Rng + ?Sized>(
        kind: ScorerKind,
        variant: CombineVariant,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if m < 1 {
            return Err(Error::Parameter("m must be at least 1".into()));
        }
        let scorer = ScorerParams::uniform(kind, rng);
        let combine = (variant != CombineVariant::Ds).then(|| Combiner {
            hidden: Dense::uniform(m, COMBINE_HIDDEN, rng),
            output: Dense::uniform(COMBINE_HIDDEN, 1, rng),
        });
        Ok(NprfParams {
            variant,
            m,
            scorer,
            combine,
        })
    }

    /// Tag used in run files, e.g. `nprf-drmm-ds`.
    pub fn tag(&self) -> String {
        format!("nprf-{}-{}", self.scorer.kind(), self.variant)
    }

    fn effective_gates(&self, gates: &[f64]) -> Vec<f64> {
        match self.variant {
            CombineVariant::FfPrime => vec![1.0; gates.len()],
            _ => gates.to_vec(),
        }
    }

    /// Scores one target from its per-feedback-document inputs, listed in
    /// feedback rank order, and the feedback gates.
    pub fn forward(&self, inputs: &[PreparedInput], gates: &[f64]) -> Result<NprfForward> {
        if inputs.len() != gates.len() {
            return Err(Error::Shape(format!(
                "{} scorer inputs but {} gates",
                inputs.len(),
                gates.len()
            )));
        }
        let fingerprint = self.fingerprint();
        let mut raw = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for input in inputs {
            let (scored, cache) = self.scorer.forward_tagged(input, fingerprint)?;
            raw.push(scored.score);
            caches.push(cache);
        }
        let gated = GatedScores::new(raw, self.effective_gates(gates));
        let (score, hidden) = match &self.combine {
            None => (gated.gated.iter().sum(), Vec::new()),
            Some(comb) => {
                let x = self.padded(&gated.gated)?;
                let hidden: Vec<f64> = comb.hidden.affine(&x).into_iter().map(f64::tanh).collect();
                (comb.output.affine(&hidden)[0], hidden)
            }
        };
        Ok(NprfForward {
            fingerprint,
            gated,
            score,
            caches,
            hidden,
        })
    }

    fn padded(&self, gated: &[f64]) -> Result<Vec<f64>> {
        if gated.len() > self.m {
            return Err(Error::Shape(format!(
                "{} feedback documents for a combiner trained with m = {}",
                gated.len(),
                self.m
            )));
        }
        let mut x = gated.to_vec();
        x.resize(self.m, 0.0);
        Ok(x)
    }

    /// Accumulates `upstream * d score / d params` into `grad`.
    pub fn backward_into(
        &self,
        inputs: &[PreparedInput],
        fwd: &NprfForward,
        upstream: f64,
        grad: &mut NprfParams,
    ) -> Result<()> {
        if fwd.fingerprint != self.fingerprint() || fwd.caches.len() != inputs.len() {
            return Err(Error::StaleCache);
        }
        let d_gated: Vec<f64> = match (&self.combine, &mut grad.combine) {
            (None, _) => vec![upstream; inputs.len()],
            (Some(comb), Some(gcomb)) => {
                let x = self.padded(&fwd.gated.gated)?;
                comb.output.accumulate_grad(&fwd.hidden, &[upstream], &mut gcomb.output);
                let d_hidden: Vec<f64> = comb
                    .output
                    .input_grad(&[upstream])
                    .into_iter()
                    .zip(&fwd.hidden)
                    .map(|(d, h)| d * (1.0 - h * h))
                    .collect();
                comb.hidden.accumulate_grad(&x, &d_hidden, &mut gcomb.hidden);
                let mut dx = comb.hidden.input_grad(&d_hidden);
                dx.truncate(inputs.len());
                dx
            }
            (Some(_), None) => return Err(Error::Shape("gradient lacks a combiner block".into())),
        };
        for ((input, cache), (d, gate)) in inputs
            .iter()
            .zip(&fwd.caches)
            .zip(d_gated.iter().zip(&fwd.gated.gates))
        {
            let d_raw = d * gate;
            if d_raw != 0.0 {
                self.scorer.backward_into_unchecked(input, cache, d_raw, &mut grad.scorer)?;
            }
        }
        Ok(())
    }

    pub fn backward(&self, inputs: &[PreparedInput], fwd: &NprfForward, upstream: f64) -> Result<NprfParams> {
        let mut grad = self.zeros_like();
        self.backward_into(inputs, fwd, upstream, &mut grad)?;
        Ok(grad)
    }

    pub fn shape_descriptor(&self) -> String {
        format!(
            "m={},{},comb_hidden={}",
            self.m,
            self.scorer.shape_descriptor(),
            self.combine.as_ref().map_or(0, |c| c.hidden.outputs)
        )
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut blocks = scorer_blocks(&self.scorer);
        if let Some(c) = &self.combine {
            blocks.extend(dense_blocks("comb.hidden", &c.hidden).map(|(n, b)| (n, b.to_vec())));
            blocks.extend(dense_blocks("comb.output", &c.output).map(|(n, b)| (n, b.to_vec())));
        }
        Checkpoint {
            model: self.tag(),
            shape: self.shape_descriptor(),
            blocks,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let parts: Vec<&str> = ckpt.model.split('-').collect();
        let [prefix, scorer, variant] = parts.as_slice() else {
            return Err(Error::Shape(format!("`{}` is not an NPRF model name", ckpt.model)));
        };
        if *prefix != "nprf" {
            return Err(Error::Shape(format!("`{}` is not an NPRF model name", ckpt.model)));
        }
        let kind: ScorerKind = scorer.parse()?;
        let variant: CombineVariant = variant.parse()?;
        let m = ckpt.shape_value("m")?;
        let scorer = scorer_from_checkpoint(kind, ckpt)?;
        let combine = if variant == CombineVariant::Ds {
            None
        } else {
            let hidden = ckpt.shape_value("comb_hidden")?;
            let mut c = Combiner {
                hidden: Dense::zeros(m, hidden),
                output: Dense::zeros(hidden, 1),
            };
            for (name, dst) in dense_blocks_mut("comb.hidden", &mut c.hidden)
                .into_iter()
                .chain(dense_blocks_mut("comb.output", &mut c.output))
            {
                let src = ckpt.block(&name)?;
                if src.len() != dst.len() {
                    return Err(Error::Shape(format!("block `{name}` has the wrong length")));
                }
                dst.copy_from_slice(src);
            }
            Some(c)
        };
        Ok(NprfParams {
            variant,
            m,
            scorer,
            combine,
        })
    }
}

impl Parameters for NprfParams {
    fn blocks(&self) -> Vec<(String, &[f64])> {
        let mut out = self.scorer.blocks();
        if let Some(c) = &self.combine {
            out.extend(dense_blocks("comb.hidden", &c.hidden));
            out.extend(dense_blocks("comb.output", &c.output));
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = self.scorer.blocks_mut();
        if let Some(c) = &mut self.combine {
            out.extend(dense_blocks_mut("comb.hidden", &mut c.hidden));
            out.extend(dense_blocks_mut("comb.output", &mut c.output));
        }
        out
    }

    fn zeros_like(&self) -> Self {
        NprfParams {
            variant: self.variant,
            m: self.m,
            scorer: self.scorer.zeros_like(),
            combine: self.combine.as_ref().map(|c| Combiner {
                hidden: c.hidden.zeros_like(),
                output: c.output.zeros_like(),
            }),
        }
    }
}

/// Result of [`NprfParams::forward`] with what the backward pass needs.
#[derive(Debug, Clone)]
pub struct NprfForward {
    fingerprint: u64,
    pub gated: GatedScores,
    pub score: f64,
    caches: Vec<ScorerCache>,
    hidden: Vec<f64>,
}
