//! Shared independent oracles for the integration suites: central finite
//! differences for gradients and brute-force prefix counting for average
//! precision. These deliberately avoid the library's own gradient and
//! ranking code paths.
//!
//! Each integration target uses its own subset of these helpers.
#![allow(dead_code)]

use framestack_core::model::Model;
use ndarray::Array2;

/// Central finite-difference gradients of `loss_of` with respect to every
/// parameter element, block by block.
pub fn fd_grads(
    model: &mut Model,
    mut loss_of: impl FnMut(&Model) -> f64,
    step: f64,
) -> Vec<Array2<f64>> {
    let shapes: Vec<(usize, usize)> = model.blocks().iter().map(|b| b.dim()).collect();
    let mut grads = Vec::with_capacity(shapes.len());
    for (bi, &dim) in shapes.iter().enumerate() {
        let mut g = Array2::zeros(dim);
        for r in 0..dim.0 {
            for c in 0..dim.1 {
                let original = model.blocks()[bi][[r, c]];
                model.blocks_mut()[bi][[r, c]] = original + step;
                let plus = loss_of(model);
                model.blocks_mut()[bi][[r, c]] = original - step;
                let minus = loss_of(model);
                model.blocks_mut()[bi][[r, c]] = original;
                g[[r, c]] = (plus - minus) / (2.0 * step);
            }
        }
        grads.push(g);
    }
    grads
}

/// Per-block norm relative error between analytic and finite-difference
/// gradients; the caller asserts the tolerance.
pub fn block_relative_errors(analytic: &[Array2<f64>], fd: &[Array2<f64>]) -> Vec<f64> {
    assert_eq!(analytic.len(), fd.len());
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| {
            let diff = (a - f).mapv(|x| x * x).sum().sqrt();
            let na = a.mapv(|x| x * x).sum().sqrt();
            let nf = f.mapv(|x| x * x).sum().sqrt();
            diff / na.max(nf).max(1e-12)
        })
        .collect()
}

/// Brute-force average precision: for every prefix of the ranking,
/// recount the positives from scratch; accumulate precision at each
/// prefix that ends on a positive. Ties rank by original index.
pub fn brute_force_ap(scores: &[f64], relevance: &[bool]) -> Option<f64> {
    let n = scores.len();
    let positives = relevance.iter().filter(|&&r| r).count();
    if positives == 0 {
        return None;
    }
    // independent ranking: repeatedly pick the best remaining item
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut ranking = Vec::with_capacity(n);
    while !remaining.is_empty() {
        let mut best = 0;
        for (pos, &idx) in remaining.iter().enumerate() {
            let better = scores[idx] > scores[remaining[best]]
                || (scores[idx] == scores[remaining[best]] && idx < remaining[best]);
            if better {
                best = pos;
            }
        }
        ranking.push(remaining.remove(best));
    }
    let mut sum = 0.0;
    for k in 1..=n {
        if relevance[ranking[k - 1]] {
            let hits_in_prefix = ranking[..k].iter().filter(|&&i| relevance[i]).count();
            sum += hits_in_prefix as f64 / k as f64;
        }
    }
    Some(sum / positives as f64)
}
