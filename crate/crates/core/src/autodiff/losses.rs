//! Scalar loss kernels shared by the tape ops and plain evaluators.

use crate::scene::MAX_OBJECTS;
use crate::tensorize::{COORDS, GROUPS, PRESENCE, SLOT_DIM};

use super::tape::sigmoid_scalar;

/// Numerically stable `-log softmax(logits)[target]`.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// Adds `scale * (softmax(logits) - onehot(target))` to `out`.
pub fn cross_entropy_grad(logits: &[f64], target: usize, scale: f64, out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    for (i, (d, e)) in out.iter_mut().zip(&exps).enumerate() {
        *d += scale * (e / total - if i == target { 1.0 } else { 0.0 });
    }
}

/// Binary cross-entropy of a logit against a 0/1 target.
pub fn bce(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

/// Per-term breakdown of the loss of one predicted scene row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SceneLossTerms {
    pub presence: f64,
    pub shape: f64,
    pub size: f64,
    pub material: f64,
    pub color: f64,
    pub coords: f64,
}

impl SceneLossTerms {
    pub fn total(&self) -> f64 {
        self.presence + self.shape + self.size + self.material + self.color + self.coords
    }
}

fn target_index(group: &[f64]) -> usize {
    group.iter().position(|&v| v > 0.5).unwrap_or(0)
}

/// Factorized negative log-likelihood: presence BCE for every slot; for slots
/// present in the target, cross-entropy per categorical group plus
/// `coord_weight` times the squared coordinate error.
pub fn scene_loss_terms(pred: &[f64], target: &[f64], coord_weight: f64) -> SceneLossTerms {
    let mut t = SceneLossTerms::default();
    for slot in 0..MAX_OBJECTS {
        let p = &pred[slot * SLOT_DIM..(slot + 1) * SLOT_DIM];
        let y = &target[slot * SLOT_DIM..(slot + 1) * SLOT_DIM];
        t.presence += bce(p[PRESENCE], y[PRESENCE]);
        if y[PRESENCE] < 0.5 {
            continue;
        }
        let ce: Vec<f64> = GROUPS.iter().map(|&(o, w)| cross_entropy(&p[o..o + w], target_index(&y[o..o + w]))).collect();
        t.shape += ce[0];
        t.size += ce[1];
        t.material += ce[2];
        t.color += ce[3];
        t.coords += coord_weight * (0..3).map(|a| (p[COORDS + a] - y[COORDS + a]).powi(2)).sum::<f64>();
    }
    t
}

/// Adds `scale * d(scene_loss_terms(pred).total())/d pred` to `out`.
pub fn scene_loss_grad(pred: &[f64], target: &[f64], coord_weight: f64, scale: f64, out: &mut [f64]) {
    for slot in 0..MAX_OBJECTS {
        let base = slot * SLOT_DIM;
        let p = &pred[base..base + SLOT_DIM];
        let y = &target[base..base + SLOT_DIM];
        let o = &mut out[base..base + SLOT_DIM];
        o[PRESENCE] += scale * (sigmoid_scalar(p[PRESENCE]) - y[PRESENCE]);
        if y[PRESENCE] < 0.5 {
            continue;
        }
        for &(off, w) in &GROUPS {
            cross_entropy_grad(&p[off..off + w], target_index(&y[off..off + w]), scale, &mut o[off..off + w]);
        }
        for a in 0..3 {
            o[COORDS + a] += scale * coord_weight * 2.0 * (p[COORDS + a] - y[COORDS + a]);
        }
    }
}
