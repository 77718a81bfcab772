//! Trainable classification heads over frame-feature sequences.
//!
//! Both heads consume a batch of sequences (each sample may have its own
//! length) and emit one raw score per class; multi-label probabilities are
//! `sigmoid(score)` and live in the loss module. Gradients are analytic
//! and checked against central finite differences in the test suite; the
//! whole compute path is f64.

mod netvlad;
mod nonlinear;
pub mod optim;

pub use netvlad::{NetVladDims, NetVladHead};
pub use nonlinear::{NonlinearDims, NonlinearHead};
pub use optim::{adam_step, lr_schedule, AdamHyper, AdamState};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rng::stream;

/// Architecture choice plus its width hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Arch {
    Nonlinear { hidden: usize },
    Netvlad { clusters: usize, hidden: usize },
}

impl Default for Arch {
    fn default() -> Self {
        Arch::Nonlinear { hidden: 512 }
    }
}

/// Fan-in scaled uniform init: entries drawn from `±1/sqrt(fan_in)`.
pub(crate) fn fan_in_uniform(
    rows: usize,
    cols: usize,
    fan_in: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

pub(crate) fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Forward intermediates needed by the matching backward call.
pub enum Cache {
    Nonlinear(nonlinear::NonlinearCache),
    NetVlad(Vec<netvlad::SampleCache>),
}

impl Cache {
    /// Smallest distance of any rectifier input from its kink, over the
    /// whole batch. The loss surface is non-differentiable at the kinks,
    /// so finite-difference gradient checks must probe instances where
    /// this margin exceeds the step.
    pub fn rectifier_margin(&self) -> f64 {
        match self {
            Cache::Nonlinear(c) => c.rectifier_margin(),
            Cache::NetVlad(caches) => caches
                .iter()
                .fold(f64::INFINITY, |m, c| m.min(c.rectifier_margin())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Nonlinear(NonlinearHead),
    NetVlad(NetVladHead),
}

impl Model {
    /// Initialize parameters from the seed: fan-in uniform weights, zero
    /// biases. The cluster head centers its residuals on rows drawn from
    /// `center_pool` (training frames) when one is supplied.
    pub fn init(
        arch: Arch,
        feature_dim: usize,
        classes: usize,
        seed: u64,
        center_pool: Option<&Array2<f64>>,
    ) -> Model {
        let mut rng = stream(seed, "init", 0);
        match arch {
            Arch::Nonlinear { hidden } => Model::Nonlinear(NonlinearHead::init(
                NonlinearDims {
                    feature_dim,
                    hidden,
                    classes,
                },
                &mut rng,
            )),
            Arch::Netvlad { clusters, hidden } => Model::NetVlad(NetVladHead::init(
                NetVladDims {
                    feature_dim,
                    clusters,
                    hidden,
                    classes,
                },
                &mut rng,
                center_pool,
            )),
        }
    }

    pub fn arch(&self) -> Arch {
        match self {
            Model::Nonlinear(h) => Arch::Nonlinear {
                hidden: h.dims.hidden,
            },
            Model::NetVlad(h) => Arch::Netvlad {
                clusters: h.dims.clusters,
                hidden: h.dims.hidden,
            },
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Model::Nonlinear(h) => h.dims.feature_dim,
            Model::NetVlad(h) => h.dims.feature_dim,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Model::Nonlinear(h) => h.dims.classes,
            Model::NetVlad(h) => h.dims.classes,
        }
    }

    /// Raw class scores for a batch, with the intermediates cached for
    /// `backward`.
    pub fn forward_cached(&self, batch: &[Array2<f64>]) -> (Array2<f64>, Cache) {
        match self {
            Model::Nonlinear(h) => {
                let (scores, cache) = h.forward_cached(batch);
                (scores, Cache::Nonlinear(cache))
            }
            Model::NetVlad(h) => {
                let (scores, cache) = h.forward_cached(batch);
                (scores, Cache::NetVlad(cache))
            }
        }
    }

    /// Pure forward pass: identical inputs yield bit-identical scores.
    pub fn forward(&self, batch: &[Array2<f64>]) -> Array2<f64> {
        self.forward_cached(batch).0
    }

    /// Parameter gradients for the batch given the loss gradient with
    /// respect to the scores. Blocks align with `blocks()`.
    pub fn backward(
        &self,
        batch: &[Array2<f64>],
        cache: &Cache,
        dscores: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        match (self, cache) {
            (Model::Nonlinear(h), Cache::Nonlinear(c)) => h.backward(batch, c, dscores),
            (Model::NetVlad(h), Cache::NetVlad(c)) => h.backward(batch, c, dscores),
            _ => panic!("cache does not match model architecture"),
        }
    }

    pub fn block_names(&self) -> &'static [&'static str] {
        match self {
            Model::Nonlinear(_) => NonlinearHead::BLOCK_NAMES,
            Model::NetVlad(_) => NetVladHead::BLOCK_NAMES,
        }
    }

    pub fn blocks(&self) -> Vec<&Array2<f64>> {
        match self {
            Model::Nonlinear(h) => h.blocks(),
            Model::NetVlad(h) => h.blocks(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Model::Nonlinear(h) => h.blocks_mut(),
            Model::NetVlad(h) => h.blocks_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }
}

pub(crate) fn check_batch(batch: &[Array2<f64>], feature_dim: usize) {
    for (i, seq) in batch.iter().enumerate() {
        assert!(seq.nrows() > 0, "sample {i} has no frames");
        assert_eq!(seq.ncols(), feature_dim, "sample {i} feature dim mismatch");
        assert!(
            seq.iter().all(|x| x.is_finite()),
            "sample {i} contains non-finite features"
        );
    }
}
