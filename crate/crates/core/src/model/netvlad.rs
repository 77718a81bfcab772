//! Cluster-residual aggregation head: frames are soft-assigned to learned
//! clusters, residuals against the cluster centers are accumulated and
//! L2-normalized per cluster and globally, then projected through a
//! rectified hidden layer into class scores.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{check_batch, fan_in_uniform, relu};

const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetVladDims {
    pub feature_dim: usize,
    pub clusters: usize,
    pub hidden: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetVladHead {
    pub dims: NetVladDims,
    cluster_w: Array2<f64>,
    cluster_b: Array2<f64>,
    centers: Array2<f64>,
    w_proj: Array2<f64>,
    b_proj: Array2<f64>,
    w_out: Array2<f64>,
    b_out: Array2<f64>,
}

pub struct SampleCache {
    assign: Array2<f64>,
    assign_sums: Array1<f64>,
    intra_norms: Array1<f64>,
    normalized: Array2<f64>,
    global_vec: Array1<f64>,
    global_norm: f64,
    pre: Array1<f64>,
    hidden: Array1<f64>,
}

impl SampleCache {
    /// Smallest distance of any rectifier input from its kink.
    pub fn rectifier_margin(&self) -> f64 {
        self.pre.iter().fold(f64::INFINITY, |m, &x| m.min(x.abs()))
    }
}

impl NetVladHead {
    pub const BLOCK_NAMES: &'static [&'static str] = &[
        "cluster_w",
        "cluster_b",
        "centers",
        "w_proj",
        "b_proj",
        "w_out",
        "b_out",
    ];

    pub fn init(
        dims: NetVladDims,
        rng: &mut ChaCha8Rng,
        center_pool: Option<&Array2<f64>>,
    ) -> NetVladHead {
        assert!(dims.clusters >= 1 && dims.hidden >= 1);
        let d = dims.feature_dim;
        let k = dims.clusters;
        let cluster_w = fan_in_uniform(k, d, d, rng);
        let mut centers = Array2::zeros((k, d));
        match center_pool {
            Some(pool) if pool.nrows() >= 1 => {
                for ki in 0..k {
                    let row = rng.random_range(0..pool.nrows());
                    centers.row_mut(ki).assign(&pool.row(row));
                }
            }
            _ => {
                // no training frames supplied: unit-norm random centers
                for ki in 0..k {
                    let mut v = Array1::from_shape_fn(d, |_| rng.random_range(-1.0..1.0f64));
                    let norm = v.dot(&v).sqrt();
                    if norm > NORM_EPS {
                        v /= norm;
                    }
                    centers.row_mut(ki).assign(&v);
                }
            }
        }
        NetVladHead {
            dims,
            cluster_w,
            cluster_b: Array2::zeros((1, k)),
            centers,
            w_proj: fan_in_uniform(k * d, dims.hidden, k * d, rng),
            b_proj: Array2::zeros((1, dims.hidden)),
            w_out: fan_in_uniform(dims.hidden, dims.classes, dims.hidden, rng),
            b_out: Array2::zeros((1, dims.classes)),
        }
    }

    pub fn blocks(&self) -> Vec<&Array2<f64>> {
        vec![
            &self.cluster_w,
            &self.cluster_b,
            &self.centers,
            &self.w_proj,
            &self.b_proj,
            &self.w_out,
            &self.b_out,
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![
            &mut self.cluster_w,
            &mut self.cluster_b,
            &mut self.centers,
            &mut self.w_proj,
            &mut self.b_proj,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    fn forward_sample(&self, frames: &Array2<f64>) -> (Array1<f64>, SampleCache) {
        let k = self.dims.clusters;
        let d = self.dims.feature_dim;

        // soft assignment over clusters, row-wise softmax
        let mut assign = frames.dot(&self.cluster_w.t()) + &self.cluster_b;
        for mut row in assign.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|x| x / sum);
        }
        let assign_sums = assign.sum_axis(Axis(0));

        // residual aggregation
        let mut vlad = assign.t().dot(frames);
        for ki in 0..k {
            let s = assign_sums[ki];
            let center = self.centers.row(ki);
            let mut row = vlad.row_mut(ki);
            row.zip_mut_with(&center, |v, &c| *v -= s * c);
        }

        // per-cluster normalization (skipped on zero rows)
        let mut intra_norms = Array1::zeros(k);
        let mut normalized = vlad;
        for ki in 0..k {
            let mut row = normalized.row_mut(ki);
            let norm = row.dot(&row).sqrt();
            intra_norms[ki] = norm;
            if norm > NORM_EPS {
                row.mapv_inplace(|x| x / norm);
            }
        }

        // flatten and global normalization (guarded)
        let flat = Array1::from_iter(normalized.iter().cloned());
        let global_norm = flat.dot(&flat).sqrt();
        let global_vec = if global_norm > NORM_EPS {
            &flat / global_norm
        } else {
            flat
        };

        let pre = global_vec.dot(&self.w_proj) + self.b_proj.row(0);
        let hidden = pre.mapv(relu);
        let scores = hidden.dot(&self.w_out) + self.b_out.row(0);
        debug_assert_eq!(global_vec.len(), k * d);
        (
            scores,
            SampleCache {
                assign,
                assign_sums,
                intra_norms,
                normalized,
                global_vec,
                global_norm,
                pre,
                hidden,
            },
        )
    }

    pub fn forward_cached(&self, batch: &[Array2<f64>]) -> (Array2<f64>, Vec<SampleCache>) {
        check_batch(batch, self.dims.feature_dim);
        let mut scores = Array2::zeros((batch.len(), self.dims.classes));
        let mut caches = Vec::with_capacity(batch.len());
        for (i, frames) in batch.iter().enumerate() {
            let (s, cache) = self.forward_sample(frames);
            scores.row_mut(i).assign(&s);
            caches.push(cache);
        }
        (scores, caches)
    }

    pub fn backward(
        &self,
        batch: &[Array2<f64>],
        caches: &[SampleCache],
        dscores: &Array2<f64>,
    ) -> Vec<Array2<f64>> {
        let k = self.dims.clusters;
        let d = self.dims.feature_dim;
        let mut d_cluster_w = Array2::zeros(self.cluster_w.dim());
        let mut d_cluster_b = Array2::zeros(self.cluster_b.dim());
        let mut d_centers = Array2::zeros(self.centers.dim());
        let mut d_w_proj = Array2::zeros(self.w_proj.dim());
        let mut d_b_proj = Array2::zeros(self.b_proj.dim());
        let mut d_w_out = Array2::zeros(self.w_out.dim());
        let mut d_b_out = Array2::zeros(self.b_out.dim());

        for (i, (frames, cache)) in batch.iter().zip(caches).enumerate() {
            let dscore = dscores.row(i);

            // output layer
            for h in 0..self.dims.hidden {
                for c in 0..self.dims.classes {
                    d_w_out[[h, c]] += cache.hidden[h] * dscore[c];
                }
            }
            d_b_out.row_mut(0).zip_mut_with(&dscore, |g, &x| *g += x);
            let dhidden = self.w_out.dot(&dscore);
            let dpre = Array1::from_shape_fn(self.dims.hidden, |h| {
                if cache.hidden[h] > 0.0 {
                    dhidden[h]
                } else {
                    0.0
                }
            });

            // projection layer
            for kd in 0..k * d {
                let g = cache.global_vec[kd];
                if g != 0.0 {
                    for h in 0..self.dims.hidden {
                        d_w_proj[[kd, h]] += g * dpre[h];
                    }
                }
            }
            d_b_proj.row_mut(0).zip_mut_with(&dpre, |g, &x| *g += x);
            let dglobal = self.w_proj.dot(&dpre);

            // global L2 backward (identity when the normalization was
            // skipped on an all-zero vector)
            let dflat = if cache.global_norm > NORM_EPS {
                let dot = dglobal.dot(&cache.global_vec);
                (&dglobal - &(&cache.global_vec * dot)) / cache.global_norm
            } else {
                dglobal
            };

            // per-cluster L2 backward
            let mut dvlad = Array2::zeros((k, d));
            for ki in 0..k {
                let du = dflat.slice(ndarray::s![ki * d..(ki + 1) * d]);
                let norm = cache.intra_norms[ki];
                let mut row = dvlad.row_mut(ki);
                if norm > NORM_EPS {
                    let u = cache.normalized.row(ki);
                    let dot = du.dot(&u);
                    for di in 0..d {
                        row[di] = (du[di] - dot * u[di]) / norm;
                    }
                } else {
                    row.assign(&du);
                }
            }

            // residual aggregation backward
            for ki in 0..k {
                let dv = dvlad.row(ki);
                let mut c_row = d_centers.row_mut(ki);
                let s = cache.assign_sums[ki];
                c_row.zip_mut_with(&dv, |g, &x| *g -= s * x);
            }
            // d assign[t,k] = dvlad_k . (v_t - c_k)
            let mut dassign = frames.dot(&dvlad.t());
            let mut center_dots = Array1::zeros(k);
            for ki in 0..k {
                center_dots[ki] = dvlad.row(ki).dot(&self.centers.row(ki));
            }
            for mut row in dassign.rows_mut() {
                row.zip_mut_with(&center_dots, |x, &cdot| *x -= cdot);
            }

            // softmax backward, row-wise
            let mut dlogits = dassign;
            for t in 0..frames.nrows() {
                let a_row = cache.assign.row(t);
                let da_row = dlogits.row(t).to_owned();
                let s: f64 = a_row.dot(&da_row);
                let mut out = dlogits.row_mut(t);
                for ki in 0..k {
                    out[ki] = a_row[ki] * (da_row[ki] - s);
                }
            }
            d_cluster_w = d_cluster_w + dlogits.t().dot(frames);
            d_cluster_b
                .row_mut(0)
                .zip_mut_with(&dlogits.sum_axis(Axis(0)), |g, &x| *g += x);
        }

        vec![
            d_cluster_w,
            d_cluster_b,
            d_centers,
            d_w_proj,
            d_b_proj,
            d_w_out,
            d_b_out,
        ]
    }
}
