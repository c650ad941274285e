use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// A named trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Self {
            name: name.into(),
            value,
        }
    }
}

/// Adam with bias correction and coupled (L2-in-gradient) weight decay.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

/// One optimizer step. Gradients are validated before any parameter moves,
/// so a rejected step leaves parameters and state untouched.
pub fn adam_step(params: &mut [Parameter], grads: &[Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() {
        return shape_err(format!("{} parameters, {} gradients", params.len(), grads.len()));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return shape_err(format!("gradient for {} has shape {:?}", p.name, g.shape()));
        }
        if !g.is_finite() {
            return Err(Error::Training {
                epoch: state.step as usize + 1,
                message: format!("non-finite gradient for parameter {}", p.name),
            });
        }
    }
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
        state.v = state.m.clone();
    } else if state.m.len() != params.len() {
        return shape_err("optimizer state belongs to a different parameter set");
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let values = p.value.data_mut();
        for (j, x) in values.iter_mut().enumerate() {
            let grad = g.data()[j] + state.weight_decay * *x;
            let mj = &mut m.data_mut()[j];
            *mj = state.beta1 * *mj + (1.0 - state.beta1) * grad;
            let vj = &mut v.data_mut()[j];
            *vj = state.beta2 * *vj + (1.0 - state.beta2) * grad * grad;
            let m_hat = m.data()[j] / bc1;
            let v_hat = v.data()[j] / bc2;
            *x -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
