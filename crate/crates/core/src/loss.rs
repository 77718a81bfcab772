//! Multi-label training losses and re-weighting schemes.
//!
//! Every loss returns the scalar value (mean over batch and classes) and
//! its gradient with respect to the raw class scores. Targets may be
//! fractional: pair mixing emits soft label vectors, which weight the
//! positive and negative terms convexly. Each re-weighting scheme has a
//! neutral hyperparameter setting that reduces it exactly to plain
//! binary cross-entropy.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Probability floor/ceiling for log stability.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Bce,
    Focal,
    /// Class-balanced (effective-number) weighting on top of BCE.
    Cb,
    /// Count-scaled score margins with deferred re-weighting.
    LdamDrw,
    /// Stochastic suppression of negative gradients for rare classes.
    Eql,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Bce => "bce",
            LossKind::Focal => "focal",
            LossKind::Cb => "cb",
            LossKind::LdamDrw => "ldam_drw",
            LossKind::Eql => "eql",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    pub gamma_focal: f64,
    pub beta_cb: f64,
    pub ldam_c: f64,
    /// Epoch at which LDAM's deferred re-weighting kicks in. `None`
    /// resolves to 60% of the epoch budget when training starts.
    pub drw_start_epoch: Option<usize>,
    /// Frequency fraction below which a class counts as rare.
    pub eql_lambda: f64,
    /// Probability of suppressing a qualifying negative entry.
    pub eql_gamma: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::Bce,
            gamma_focal: 2.0,
            beta_cb: 0.9999,
            ldam_c: 0.5,
            drw_start_epoch: None,
            eql_lambda: 0.03,
            eql_gamma: 0.95,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma_focal < 0.0 {
            return Err(Error::Config("gamma_focal must be >= 0".to_string()));
        }
        if !(0.0..1.0).contains(&self.beta_cb) {
            return Err(Error::Config("beta_cb must lie in [0, 1)".to_string()));
        }
        if self.ldam_c < 0.0 {
            return Err(Error::Config("ldam_c must be >= 0".to_string()));
        }
        if !(0.0..=1.0).contains(&self.eql_lambda) {
            return Err(Error::Config("eql_lambda must lie in [0, 1]".to_string()));
        }
        if !(0.0..=1.0).contains(&self.eql_gamma) {
            return Err(Error::Config("eql_gamma must lie in [0, 1]".to_string()));
        }
        Ok(())
    }
}

/// Per-class sigmoid probabilities, clamped away from 0 and 1.
pub fn sigmoid_probs(scores: &Array2<f64>) -> Array2<f64> {
    scores.mapv(|s| (1.0 / (1.0 + (-s).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
}

fn weight_at(class_weights: Option<&[f64]>, mask: Option<&Array2<f64>>, b: usize, c: usize) -> f64 {
    let mut w = 1.0;
    if let Some(cw) = class_weights {
        w *= cw[c];
    }
    if let Some(m) = mask {
        w *= m[[b, c]];
    }
    w
}

fn bce_with(
    probs: &Array2<f64>,
    targets: &Array2<f64>,
    class_weights: Option<&[f64]>,
    mask: Option<&Array2<f64>>,
) -> (f64, Array2<f64>) {
    assert_eq!(probs.dim(), targets.dim());
    let (b, c) = probs.dim();
    let scale = 1.0 / (b * c) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((b, c));
    for bi in 0..b {
        for ci in 0..c {
            let w = weight_at(class_weights, mask, bi, ci);
            let p = probs[[bi, ci]];
            let y = targets[[bi, ci]];
            loss += w * -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            grad[[bi, ci]] = w * (p - y) * scale;
        }
    }
    (loss * scale, grad)
}

fn focal_with(
    probs: &Array2<f64>,
    targets: &Array2<f64>,
    gamma: f64,
    class_weights: Option<&[f64]>,
    mask: Option<&Array2<f64>>,
) -> (f64, Array2<f64>) {
    // gamma = 0 is binary cross-entropy by definition; delegating keeps
    // the reduction identity exact for soft targets too.
    if gamma == 0.0 {
        return bce_with(probs, targets, class_weights, mask);
    }
    assert_eq!(probs.dim(), targets.dim());
    let (b, c) = probs.dim();
    let scale = 1.0 / (b * c) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros((b, c));
    for bi in 0..b {
        for ci in 0..c {
            let w = weight_at(class_weights, mask, bi, ci);
            let p = probs[[bi, ci]];
            let y = targets[[bi, ci]];
            let q = 1.0 - p;
            let qg = q.powf(gamma);
            let pg = p.powf(gamma);
            loss += w * -(y * qg * p.ln() + (1.0 - y) * pg * q.ln());
            // d/ds of the element loss, with s the score behind p
            let pos = gamma * p * qg * p.ln() - qg * q;
            let neg = pg * p - gamma * q * pg * q.ln();
            grad[[bi, ci]] = w * (y * pos + (1.0 - y) * neg) * scale;
        }
    }
    (loss * scale, grad)
}

/// Binary cross-entropy over clamped probabilities. The gradient is with
/// respect to the underlying scores: `(p - y) / (B * C)`.
pub fn bce(probs: &Array2<f64>, targets: &Array2<f64>) -> (f64, Array2<f64>) {
    bce_with(probs, targets, None, None)
}

/// Focal loss with soft-target extension: the target weight interpolates
/// between the positive and negative focal terms. Gamma 0 is exactly
/// `bce`.
pub fn focal(probs: &Array2<f64>, targets: &Array2<f64>, gamma: f64) -> (f64, Array2<f64>) {
    focal_with(probs, targets, gamma, None, None)
}

/// Effective-number class weights `(1 - beta) / (1 - beta^count)`,
/// normalized to mean 1. `beta = 0` gives uniform weights.
pub fn cb_weights(counts: &[usize], beta_cb: f64) -> Vec<f64> {
    assert!((0.0..1.0).contains(&beta_cb));
    let raw: Vec<f64> = counts
        .iter()
        .map(|&n| {
            assert!(n >= 1, "class counts must be >= 1");
            (1.0 - beta_cb) / (1.0 - beta_cb.powf(n as f64))
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.into_iter().map(|w| w / mean).collect()
}

/// Per-class score margins `ldam_c / count^(1/4)`.
pub fn ldam_margins(counts: &[usize], ldam_c: f64) -> Vec<f64> {
    counts
        .iter()
        .map(|&n| ldam_c / (n as f64).powf(0.25))
        .collect()
}

/// One-versus-all margin loss: each positive class's score is lowered by
/// its margin before BCE. From `drw_start` onwards the class-balanced
/// weights apply on top (deferred re-weighting).
pub fn ldam_adjust(
    scores: &Array2<f64>,
    targets: &Array2<f64>,
    counts: &[usize],
    ldam_c: f64,
    epoch: usize,
    drw_start: usize,
    beta_cb: f64,
) -> (f64, Array2<f64>) {
    let margins = ldam_margins(counts, ldam_c);
    let mut adjusted = scores.clone();
    for ((bi, ci), s) in adjusted.indexed_iter_mut() {
        if targets[[bi, ci]] > 0.0 {
            *s -= margins[ci];
        }
    }
    let probs = sigmoid_probs(&adjusted);
    let weights = (epoch >= drw_start).then(|| cb_weights(counts, beta_cb));
    // The margin shift is constant in the scores, so the chain rule
    // through it is the identity.
    bce_with(&probs, targets, weights.as_deref(), None)
}

/// Gradient-suppression mask: a negative entry of a rare class (training
/// frequency below `eql_lambda`) is zeroed with probability `eql_gamma`.
/// Positive entries always pass. Multiplies the per-element BCE loss and
/// gradient.
pub fn eql_mask(
    targets: &Array2<f64>,
    counts: &[usize],
    eql_lambda: f64,
    eql_gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let total: usize = counts.iter().sum();
    let frequencies: Vec<f64> = counts.iter().map(|&n| n as f64 / total as f64).collect();
    let (b, c) = targets.dim();
    let mut mask = Array2::ones((b, c));
    for bi in 0..b {
        for ci in 0..c {
            let qualifying = targets[[bi, ci]] == 0.0 && frequencies[ci] < eql_lambda;
            if qualifying && rng.random::<f64>() < eql_gamma {
                mask[[bi, ci]] = 0.0;
            }
        }
    }
    mask
}

/// A loss configuration bound to a dataset's per-class training counts.
#[derive(Debug, Clone)]
pub struct LossFn {
    config: LossConfig,
    counts: Vec<usize>,
    drw_start: usize,
}

impl LossFn {
    /// `max_epochs` resolves the deferred re-weighting default (60% of the
    /// budget).
    pub fn new(config: LossConfig, counts: &[usize], max_epochs: usize) -> Result<LossFn> {
        config.validate()?;
        if counts.contains(&0) {
            return Err(Error::Config(
                "loss re-weighting needs every class count >= 1".to_string(),
            ));
        }
        let drw_start = config
            .drw_start_epoch
            .unwrap_or_else(|| (0.6 * max_epochs as f64).floor() as usize);
        Ok(LossFn {
            config,
            counts: counts.to_vec(),
            drw_start,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.config.kind
    }

    pub fn drw_start(&self) -> usize {
        self.drw_start
    }

    /// Loss and gradient with respect to `scores`. The rng only advances
    /// for the stochastic EQL mask.
    pub fn eval(
        &self,
        scores: &Array2<f64>,
        targets: &Array2<f64>,
        epoch: usize,
        rng: &mut ChaCha8Rng,
    ) -> (f64, Array2<f64>) {
        match self.config.kind {
            LossKind::Bce => bce(&sigmoid_probs(scores), targets),
            LossKind::Focal => focal(&sigmoid_probs(scores), targets, self.config.gamma_focal),
            LossKind::Cb => {
                let weights = cb_weights(&self.counts, self.config.beta_cb);
                bce_with(&sigmoid_probs(scores), targets, Some(&weights), None)
            }
            LossKind::LdamDrw => ldam_adjust(
                scores,
                targets,
                &self.counts,
                self.config.ldam_c,
                epoch,
                self.drw_start,
                self.config.beta_cb,
            ),
            LossKind::Eql => {
                let mask = eql_mask(
                    targets,
                    &self.counts,
                    self.config.eql_lambda,
                    self.config.eql_gamma,
                    rng,
                );
                bce_with(&sigmoid_probs(scores), targets, None, Some(&mask))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;
    use rand_chacha::rand_core::SeedableRng;

    fn single(p: f64, y: f64) -> (Array2<f64>, Array2<f64>) {
        (array![[p]], array![[y]])
    }

    #[test]
    fn bce_is_near_zero_on_exact_predictions() {
        let probs = array![[PROB_CLAMP, 1.0 - PROB_CLAMP]];
        let targets = array![[0.0, 1.0]];
        let (loss, _) = bce(&probs, &targets);
        assert!(loss < 1e-6);
    }

    #[test]
    fn bce_matches_hand_computation() {
        let (p, y) = single(0.5, 1.0);
        let (loss, grad) = bce(&p, &y);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((grad[[0, 0]] - (0.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bce_soft_target_stationary_point() {
        let (p, y) = single(0.75, 0.75);
        let (_, grad) = bce(&p, &y);
        assert_eq!(grad[[0, 0]], 0.0);
    }

    #[test]
    fn focal_gamma_zero_is_exactly_bce() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let probs = Array2::from_shape_fn((4, 6), |_| rng.random_range(0.05..0.95));
        let targets = Array2::from_shape_fn((4, 6), |_| {
            // mix of hard and soft targets
            match rng.random_range(0..3u8) {
                0 => 0.0,
                1 => 1.0,
                _ => rng.random_range(0.0..1.0),
            }
        });
        let (l_focal, g_focal) = focal(&probs, &targets, 0.0);
        let (l_bce, g_bce) = bce(&probs, &targets);
        assert_eq!(l_focal, l_bce);
        assert_eq!(g_focal, g_bce);
    }

    #[test]
    fn focal_matches_hand_computation() {
        let (p, y) = single(0.5, 1.0);
        let (loss, _) = focal(&p, &y, 2.0);
        assert!((loss - 0.25 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn focal_dominates_bce_near_confident_positives() {
        // For a positive target the focal element is (1-p)^gamma times the
        // bce element, so it vanishes faster as p -> 1 and the ratio
        // shrinks monotonically.
        let mut last_ratio = f64::INFINITY;
        for p in [0.6, 0.7, 0.8, 0.9, 0.95, 0.99] {
            let (pp, y) = single(p, 1.0);
            let (fl, _) = focal(&pp, &y, 2.0);
            let (bl, _) = bce(&pp, &y);
            assert!(fl < bl, "focal {fl} should undercut bce {bl} at p={p}");
            let ratio = fl / bl;
            assert!(ratio < last_ratio);
            last_ratio = ratio;
        }
    }

    #[test]
    fn cb_weights_match_effective_number_hand_computation() {
        let w = cb_weights(&[1, 10], 0.99);
        // raw weights [1.0, 0.104583], normalized to mean 1
        assert!((w[0] - 1.8106).abs() < 1e-4);
        assert!((w[1] - 0.18936).abs() < 1e-4);
        let mean = (w[0] + w[1]) / 2.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cb_weights_neutral_and_symmetric_cases() {
        assert_eq!(cb_weights(&[3, 500, 17], 0.0), vec![1.0, 1.0, 1.0]);
        for w in cb_weights(&[25, 25, 25, 25], 0.9) {
            assert!((w - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ldam_margin_matches_hand_computation() {
        let margins = ldam_margins(&[16], 0.5);
        assert_eq!(margins[0], 0.25);
    }

    #[test]
    fn ldam_with_zero_margin_is_exactly_bce() {
        let scores = array![[0.3, -1.2], [0.9, 0.1]];
        let targets = array![[1.0, 0.0], [0.0, 1.0]];
        let (l, g) = ldam_adjust(&scores, &targets, &[5, 50], 0.0, 0, 100, 0.9999);
        let (lb, gb) = bce(&sigmoid_probs(&scores), &targets);
        assert_eq!(l, lb);
        assert_eq!(g, gb);
    }

    #[test]
    fn ldam_defers_reweighting_until_drw_start() {
        let scores = array![[0.3, -1.2], [0.9, 0.1]];
        let targets = array![[1.0, 0.0], [0.0, 1.0]];
        let counts = [5, 500];
        let early = ldam_adjust(&scores, &targets, &counts, 0.5, 59, 60, 0.999);
        let manual = {
            let margins = ldam_margins(&counts, 0.5);
            let mut adjusted = scores.clone();
            for ((bi, ci), s) in adjusted.indexed_iter_mut() {
                if targets[[bi, ci]] > 0.0 {
                    *s -= margins[ci];
                }
            }
            bce(&sigmoid_probs(&adjusted), &targets)
        };
        assert_eq!(early.0, manual.0);
        let late = ldam_adjust(&scores, &targets, &counts, 0.5, 60, 60, 0.999);
        assert_ne!(late.0, early.0, "weights must kick in at drw_start");
    }

    #[test]
    fn eql_mask_neutral_threshold_is_all_ones() {
        let targets = array![[1.0, 0.0], [0.0, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mask = eql_mask(&targets, &[2, 98], 0.0, 0.95, &mut rng);
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn eql_mask_never_touches_positives() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let targets =
            Array2::from_shape_fn(
                (64, 4),
                |_| {
                    if rng.random::<f64>() < 0.4 {
                        1.0
                    } else {
                        0.0
                    }
                },
            );
        let mask = eql_mask(&targets, &[1, 1, 1, 997], 0.01, 1.0, &mut rng);
        for (idx, &t) in targets.indexed_iter() {
            if t > 0.0 {
                assert_eq!(mask[idx], 1.0);
            }
        }
    }

    #[test]
    fn eql_suppression_rate_matches_bernoulli_law() {
        // class 0 is rare (frequency 0.01 < lambda 0.03); count suppression
        // over 1e5 qualifying entries
        let rows = 100_000;
        let targets = Array2::zeros((rows, 1));
        let counts = [1, 99];
        let mut rng = stream(7, "eql", 0);
        let gamma = 0.95;
        let mask = eql_mask(&targets, &counts, 0.03, gamma, &mut rng);
        let suppressed = mask.iter().filter(|&&m| m == 0.0).count();
        let rate = suppressed as f64 / rows as f64;
        assert!(
            (rate - gamma).abs() < 0.01,
            "suppression rate {rate} should approximate {gamma}"
        );
    }

    #[test]
    fn losses_are_nonnegative_and_zero_only_at_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let probs = Array2::from_shape_fn((3, 4), |_| rng.random_range(0.01..0.99));
            let targets = Array2::from_shape_fn((3, 4), |_| f64::from(rng.random::<bool>()));
            let (l, _) = bce(&probs, &targets);
            assert!(l > 0.0);
            let (lf, _) = focal(&probs, &targets, 2.0);
            assert!(lf > 0.0);
        }
    }

    /// Central finite difference over scores, the independent check for
    /// every analytic gradient in this module.
    fn fd_check(eval: impl Fn(&Array2<f64>) -> (f64, Array2<f64>), scores: &Array2<f64>) {
        let (_, analytic) = eval(scores);
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for idx in ndarray::indices(scores.dim()) {
            let mut plus = scores.clone();
            plus[idx] += h;
            let mut minus = scores.clone();
            minus[idx] -= h;
            let fd = (eval(&plus).0 - eval(&minus).0) / (2.0 * h);
            let a = analytic[idx];
            let rel = (a - fd).abs() / f64::max(1e-8, a.abs().max(fd.abs()));
            max_rel = max_rel.max(rel);
        }
        assert!(max_rel < 1e-5, "max relative gradient error {max_rel}");
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores = Array2::from_shape_fn((3, 5), |_| rng.random_range(-2.0..2.0));
        let targets = Array2::from_shape_fn((3, 5), |_| match rng.random_range(0..3u8) {
            0 => 0.0,
            1 => 1.0,
            _ => 0.25,
        });
        let counts = vec![2usize, 40, 9, 1, 300];
        fd_check(|s| bce(&sigmoid_probs(s), &targets), &scores);
        fd_check(|s| focal(&sigmoid_probs(s), &targets, 2.0), &scores);
        fd_check(|s| focal(&sigmoid_probs(s), &targets, 0.5), &scores);
        let weights = cb_weights(&counts, 0.99);
        fd_check(
            |s| bce_with(&sigmoid_probs(s), &targets, Some(&weights), None),
            &scores,
        );
        fd_check(
            |s| ldam_adjust(s, &targets, &counts, 0.5, 80, 60, 0.99),
            &scores,
        );
        let mask = {
            let mut rng = stream(3, "eql", 0);
            eql_mask(&targets, &counts, 0.2, 0.9, &mut rng)
        };
        fd_check(
            |s| bce_with(&sigmoid_probs(s), &targets, None, Some(&mask)),
            &scores,
        );
    }

    #[test]
    fn loss_fn_dispatch_honors_neutral_settings() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let scores = Array2::from_shape_fn((4, 3), |_| rng.random_range(-1.5..1.5));
        let targets = Array2::from_shape_fn((4, 3), |_| f64::from(rng.random::<bool>()));
        let counts = [7, 90, 3];
        let reference = LossFn::new(LossConfig::default(), &counts, 100).unwrap();
        let mut neutral_focal = LossConfig {
            kind: LossKind::Focal,
            gamma_focal: 0.0,
            ..LossConfig::default()
        };
        let mut rng_a = stream(1, "loss", 0);
        let base = reference.eval(&scores, &targets, 0, &mut rng_a);
        for config in [
            neutral_focal.clone(),
            {
                neutral_focal.kind = LossKind::Cb;
                neutral_focal.beta_cb = 0.0;
                neutral_focal.clone()
            },
            {
                neutral_focal.kind = LossKind::LdamDrw;
                neutral_focal.ldam_c = 0.0;
                neutral_focal.drw_start_epoch = Some(1000);
                neutral_focal.clone()
            },
            {
                neutral_focal.kind = LossKind::Eql;
                neutral_focal.eql_lambda = 0.0;
                neutral_focal.clone()
            },
        ] {
            let kind = config.kind;
            let f = LossFn::new(config, &counts, 100).unwrap();
            let mut rng_b = stream(1, "loss", 0);
            let out = f.eval(&scores, &targets, 0, &mut rng_b);
            assert_eq!(out.0, base.0, "{kind:?} loss must equal bce exactly");
            assert_eq!(out.1, base.1, "{kind:?} gradient must equal bce exactly");
        }
    }
}
