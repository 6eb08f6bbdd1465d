use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment buffers for one [`ParamStore`], in store order.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update of every parameter in `store`.
pub fn adam_step(store: &mut ParamStore, grads: &[Vec<f64>], state: &mut AdamState) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() {
        return Err(Error::ShapeMismatch {
            op: "adam_step",
            left: vec![store.len()],
            right: vec![grads.len()],
        });
    }
    for ((p, g), m) in store.values_mut().zip(grads).zip(&state.m) {
        if p.len() != g.len() || m.len() != g.len() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: vec![g.len()],
            });
        }
    }

    state.t += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (((p, g), m), v) in store
        .values_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((theta, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g)
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
