use std::hash::{Hash, Hasher};

use rand::Rng;

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform in `[-r, r]` with `r = sqrt(6 / (fan_in + fan_out))`, biases
    /// included.
    pub fn uniform<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let r = glorot_bound(inputs, outputs);
        let mut layer = Self::zeros(inputs, outputs);
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = rng.random_range(-r..=r);
        }
        layer
    }

    /// Pre-activations `W x + b`, written into `out`.
    pub fn affine_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.inputs);
        for (o, out_o) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            *out_o = self.bias[o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
    }

    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        self.affine_into(x, &mut out);
        out
    }

    /// Accumulates parameter gradients for upstream `d_out` at input `x`.
    pub fn accumulate_grad(&self, x: &[f64], d_out: &[f64], grad: &mut Dense) {
        for (o, &d) in d_out.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[o] += d;
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            for (g, &xi) in row.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }

    /// `W^T d_out`.
    pub fn input_grad(&self, d_out: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; self.inputs];
        for (o, &d) in d_out.iter().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            for (dxi, w) in dx.iter_mut().zip(row) {
                *dxi += d * w;
            }
        }
        dx
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.inputs, self.outputs)
    }
}

pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Named, ordered access to trainable parameter blocks. A gradient is a
/// value of the same type, so gradient blocks line up with parameter blocks
/// by construction.
pub trait Parameters {
    fn blocks(&self) -> Vec<(String, &[f64])>;
    fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])>;
    fn zeros_like(&self) -> Self;

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    /// Hash of every trainable value, used to detect stale forward caches.
    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for (name, block) in self.blocks() {
            name.hash(&mut h);
            for v in block {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    fn flatten(&self) -> Vec<f64> {
        self.blocks().into_iter().flat_map(|(_, b)| b.iter().copied()).collect()
    }

    /// `self += scale * other`, block by block.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src = other.blocks();
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(src) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for (_, block) in self.blocks_mut() {
            for v in block.iter_mut() {
                *v *= factor;
            }
        }
    }
}

pub(crate) fn dense_blocks<'a>(prefix: &str, layer: &'a Dense) -> [(String, &'a [f64]); 2] {
    [
        (format!("{prefix}.weight"), layer.weights.as_slice()),
        (format!("{prefix}.bias"), layer.bias.as_slice()),
    ]
}

pub(crate) fn dense_blocks_mut<'a>(prefix: &str, layer: &'a mut Dense) -> [(String, &'a mut [f64]); 2] {
    [
        (format!("{prefix}.weight"), layer.weights.as_mut_slice()),
        (format!("{prefix}.bias"), layer.bias.as_mut_slice()),
    ]
}
