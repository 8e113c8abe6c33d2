use crate::error::{Error, Result};
use crate::nirm::Parameters;

/// Adam moments and hyperparameters for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    /// Defaults: beta1 0.9, beta2 0.999, eps 1e-8.
    pub fn new(lr: f64, num_params: usize) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
        }
    }

    pub fn for_params<P: Parameters>(params: &P, lr: f64) -> Self {
        Self::new(lr, params.num_params())
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything changes.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let grad_blocks = grads.blocks();
    for (name, block) in &grad_blocks {
        if block.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
    }
    let total: usize = grad_blocks.iter().map(|(_, b)| b.len()).sum();
    if total != state.first.len() || params.num_params() != total {
        return Err(Error::Shape(format!(
            "optimizer holds {} moments for {} gradients",
            state.first.len(),
            total
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let correction1 = 1.0 - state.beta1.powi(t);
    let correction2 = 1.0 - state.beta2.powi(t);
    let mut offset = 0;
    for ((_, p_block), (_, g_block)) in params.blocks_mut().into_iter().zip(grad_blocks) {
        for (p, &g) in p_block.iter_mut().zip(g_block) {
            let m = &mut state.first[offset];
            let v = &mut state.second[offset];
            *m = state.beta1 * *m + (1.0 - state.beta1) * g;
            *v = state.beta2 * *v + (1.0 - state.beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
            offset += 1;
        }
    }
    Ok(())
}
