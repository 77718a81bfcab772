//! Adam with bias correction, plus the stepped learning-rate schedule.

use ndarray::Array2;

use super::Model;

/// Adam moment decay and stability constants. The defaults are the usual
/// 0.9 / 0.999 / 1e-8.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators, shaped like the model's parameter
/// blocks, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(model: &Model, hyper: AdamHyper) -> AdamState {
        let m = model
            .blocks()
            .iter()
            .map(|b| Array2::zeros(b.dim()))
            .collect();
        let v = model
            .blocks()
            .iter()
            .map(|b| Array2::zeros(b.dim()))
            .collect();
        AdamState {
            hyper,
            step: 0,
            m,
            v,
        }
    }
}

/// One bias-corrected Adam update over every parameter block.
pub fn adam_step(model: &mut Model, grads: &[Array2<f64>], state: &mut AdamState, lr: f64) {
    let AdamHyper { beta1, beta2, eps } = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - beta1.powi(t);
    let bias2 = 1.0 - beta2.powi(t);
    let blocks = model.blocks_mut();
    assert_eq!(blocks.len(), grads.len());
    for ((param, grad), (m, v)) in blocks
        .into_iter()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(param.dim(), grad.dim());
        ndarray::Zip::from(param)
            .and(grad)
            .and(m)
            .and(v)
            .for_each(|p, &g, m, v| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
    }
}

/// Stepped decay: `base_lr * decay^floor(epoch / every)`.
pub fn lr_schedule(epoch: usize, base_lr: f64, decay: f64, every: usize) -> f64 {
    assert!(every >= 1);
    base_lr * decay.powi((epoch / every) as i32)
}
