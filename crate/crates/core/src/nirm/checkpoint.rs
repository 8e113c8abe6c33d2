//! Text checkpoints: a `NPRFMDL1 <model-name> <shape-descriptor>` header,
//! then per block a `name length` line and a line of floats.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::knrm::Kernel;
use super::params::{Dense, Parameters};
use super::{DrmmParams, KnrmParams, ScorerKind, ScorerParams};

pub const CHECKPOINT_MAGIC: &str = "NPRFMDL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: String,
    /// Comma-separated `key=value` pairs.
    pub shape: String,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{CHECKPOINT_MAGIC} {} {}", self.model, self.shape).unwrap();
        for (name, values) in &self.blocks {
            writeln!(out, "{name} {}", values.len()).unwrap();
            let line: Vec<String> = values.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty checkpoint"))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != CHECKPOINT_MAGIC {
            return Err(Error::parse(path, 1, format!("bad checkpoint header {header:?}")));
        }
        let mut blocks = Vec::new();
        while let Some((i, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            let (name, len) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `name length`"))?;
            let len: usize = len
                .parse()
                .map_err(|_| Error::parse(path, i + 1, "block length is not an integer"))?;
            let (j, values_line) = lines
                .next()
                .ok_or_else(|| Error::parse(path, i + 2, format!("missing values for {name}")))?;
            let values = values_line
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|_| Error::parse(path, j + 1, "non-numeric value"))?;
            if values.len() != len {
                return Err(Error::parse(
                    path,
                    j + 1,
                    format!("block {name} declares {len} values, found {}", values.len()),
                ));
            }
            blocks.push((name.to_string(), values));
        }
        Ok(Checkpoint {
            model: fields[1].to_string(),
            shape: fields[2].to_string(),
            blocks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn block(&self, name: &str) -> Result<&[f64]> {
        self.blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Shape(format!("checkpoint has no block `{name}`")))
    }

    pub fn shape_value(&self, key: &str) -> Result<usize> {
        self.shape
            .split(',')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .and_then(|(_, v)| v.parse().ok())
            .ok_or_else(|| Error::Shape(format!("shape descriptor lacks `{key}`")))
    }

    /// Copies every named block into matching trainable blocks of `params`.
    pub fn fill<P: Parameters>(&self, params: &mut P) -> Result<()> {
        for (name, dst) in params.blocks_mut() {
            let src = self.block(&name)?;
            if src.len() != dst.len() {
                return Err(Error::Shape(format!(
                    "block `{name}` has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(src);
        }
        Ok(())
    }
}

/// All scorer blocks including the fixed kernel bank.
pub(crate) fn scorer_blocks(params: &ScorerParams) -> Vec<(String, Vec<f64>)> {
    let mut blocks: Vec<(String, Vec<f64>)> = Vec::new();
    if let ScorerParams::Knrm(p) = params {
        blocks.push(("knrm.kernel_mu".into(), p.kernels.iter().map(|k| k.mu).collect()));
        blocks.push(("knrm.kernel_sigma".into(), p.kernels.iter().map(|k| k.sigma).collect()));
    }
    blocks.extend(params.blocks().into_iter().map(|(n, b)| (n, b.to_vec())));
    blocks
}

pub(crate) fn scorer_from_checkpoint(kind: ScorerKind, ckpt: &Checkpoint) -> Result<ScorerParams> {
    let hidden = ckpt.shape_value("hidden")?;
    let mut params = match kind {
        ScorerKind::Drmm => {
            let bins = ckpt.shape_value("bins")?;
            let mut p = DrmmParams::zeros(bins);
            p.hidden = Dense::zeros(bins, hidden);
            p.output = Dense::zeros(hidden, 1);
            ScorerParams::Drmm(p)
        }
        ScorerKind::Knrm => {
            let mu = ckpt.block("knrm.kernel_mu")?;
            let sigma = ckpt.block("knrm.kernel_sigma")?;
            if mu.len() != sigma.len() {
                return Err(Error::Shape("kernel mu and sigma blocks differ in length".into()));
            }
            let kernels: Vec<Kernel> = mu
                .iter()
                .zip(sigma)
                .map(|(&mu, &sigma)| Kernel { mu, sigma })
                .collect();
            let mut p = KnrmParams::zeros(kernels);
            p.hidden = Dense::zeros(p.kernels.len(), hidden);
            p.output = Dense::zeros(hidden, 1);
            p.validate()?;
            ScorerParams::Knrm(p)
        }
    };
    ckpt.fill(&mut params)?;
    Ok(params)
}

impl ScorerParams {
    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            model: self.kind().to_string(),
            shape: self.shape_descriptor(),
            blocks: scorer_blocks(self),
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let kind: ScorerKind = ckpt.model.parse()?;
        scorer_from_checkpoint(kind, ckpt)
    }
}
