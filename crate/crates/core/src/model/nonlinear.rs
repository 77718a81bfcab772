//! Mean-pool nonlinear head: temporal average, then two fully-connected
//! layers with a rectifier in between.

use ndarray::{Array2, Axis};
use rand_chacha::ChaCha8Rng;

use super::{check_batch, fan_in_uniform, relu};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonlinearDims {
    pub feature_dim: usize,
    pub hidden: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearHead {
    pub dims: NonlinearDims,
    w1: Array2<f64>,
    b1: Array2<f64>,
    w2: Array2<f64>,
    b2: Array2<f64>,
}

pub struct NonlinearCache {
    pooled: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

impl NonlinearCache {
    /// Smallest distance of any rectifier input from its kink. Finite
    /// difference checks reject instances where this is below the probe
    /// step.
    pub fn rectifier_margin(&self) -> f64 {
        self.pre.iter().fold(f64::INFINITY, |m, &x| m.min(x.abs()))
    }
}

impl NonlinearHead {
    pub const BLOCK_NAMES: &'static [&'static str] = &["w1", "b1", "w2", "b2"];

    pub fn init(dims: NonlinearDims, rng: &mut ChaCha8Rng) -> NonlinearHead {
        assert!(dims.hidden >= 1 && dims.feature_dim >= 1 && dims.classes >= 1);
        NonlinearHead {
            dims,
            w1: fan_in_uniform(dims.feature_dim, dims.hidden, dims.feature_dim, rng),
            b1: Array2::zeros((1, dims.hidden)),
            w2: fan_in_uniform(dims.hidden, dims.classes, dims.hidden, rng),
            b2: Array2::zeros((1, dims.classes)),
        }
    }

    pub fn blocks(&self) -> Vec<&Array2<f64>> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward_cached(&self, batch: &[Array2<f64>]) -> (Array2<f64>, NonlinearCache) {
        check_batch(batch, self.dims.feature_dim);
        let b = batch.len();
        let mut pooled = Array2::zeros((b, self.dims.feature_dim));
        for (i, seq) in batch.iter().enumerate() {
            pooled
                .row_mut(i)
                .assign(&seq.mean_axis(Axis(0)).expect("non-empty sequence"));
        }
        let pre = pooled.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(relu);
        let scores = hidden.dot(&self.w2) + &self.b2;
        (
            scores,
            NonlinearCache {
                pooled,
                pre,
                hidden,
            },
        )
    }

    pub fn backward(
        &self,
        _batch: &[Array2<f64>],
        cache: &NonlinearCache,
        dscores: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let db2 = dscores.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dw2 = cache.hidden.t().dot(dscores);
        let dhidden = dscores.dot(&self.w2.t());
        // rectifier gate: units that were clamped pass no gradient
        let dpre = &dhidden * &cache.hidden.mapv(|h| if h > 0.0 { 1.0 } else { 0.0 });
        let db1 = dpre.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dw1 = cache.pooled.t().dot(&dpre);
        vec![dw1, db1, dw2, db2]
    }
}
