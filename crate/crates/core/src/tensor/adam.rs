use super::ParamStore;
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
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        Self {
            step: 0,
            m: store.zero_grads(),
            v: store.zero_grads(),
        }
    }
}

/// One bias-corrected Adam update.
///
/// Every gradient is checked before anything is touched: a non-finite entry
/// aborts the step and leaves parameters and moments unchanged.
pub fn adam_step(
    store: &mut ParamStore,
    grads: &[Vec<f64>],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if grads.len() != store.len() || state.m.len() != store.len() || state.v.len() != store.len()
    {
        return Err(Error::invalid(format!(
            "adam: {} parameters, {} gradients, {} moment buffers",
            store.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((id, p), g) in store.iter().zip(grads) {
        let n = p.tensor.len();
        if g.len() != n || state.m[id.index()].len() != n || state.v[id.index()].len() != n {
            return Err(Error::Shape {
                op: "adam",
                lhs: p.tensor.shape().to_vec(),
                rhs: vec![g.len()],
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "gradient of parameter `{}`",
                p.name
            )));
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (i, g) in grads.iter().enumerate() {
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let w = store.data_mut(i);
        for j in 0..g.len() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            w[j] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
