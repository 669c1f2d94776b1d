//! Cross-entropy and focal loss over probability rows, with their
//! gradients with respect to the pre-softmax logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to `p_t` before taking its logarithm.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossValue {
    Scalar(f64),
    PerItem(Vec<f64>),
}

impl LossValue {
    /// The scalar value, or the mean of per-item values.
    pub fn scalar(&self) -> f64 {
        match self {
            LossValue::Scalar(v) => *v,
            LossValue::PerItem(v) if v.is_empty() => 0.0,
            LossValue::PerItem(v) => v.iter().sum::<f64>() / v.len() as f64,
        }
    }
}

impl Reduction {
    pub fn apply(self, per_item: Vec<f64>) -> LossValue {
        match self {
            Reduction::Mean if per_item.is_empty() => LossValue::Scalar(0.0),
            Reduction::Mean => LossValue::Scalar(per_item.iter().sum::<f64>() / per_item.len() as f64),
            Reduction::Sum => LossValue::Scalar(per_item.iter().sum()),
            Reduction::None => LossValue::PerItem(per_item),
        }
    }

    /// Factor applied to each item's gradient. `None` trains as `Mean`.
    pub fn grad_scale(self, batch: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean | Reduction::None => 1.0 / batch.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
    pub reduction: Reduction,
    /// Per-class weights used in place of `alpha` when present.
    pub class_alpha: Option<Vec<f64>>,
}

impl Default for FocalParams {
    fn default() -> Self {
        FocalParams {
            alpha: 1.0,
            gamma: 2.0,
            reduction: Reduction::Mean,
            class_alpha: None,
        }
    }
}

impl FocalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::invalid(format!(
                "focal alpha and gamma must be nonnegative, got {} and {}",
                self.alpha, self.gamma
            )));
        }
        if let Some(a) = &self.class_alpha {
            if a.iter().any(|x| x.is_nan() || *x < 0.0) {
                return Err(Error::invalid("per-class alpha must be nonnegative"));
            }
        }
        Ok(())
    }

    fn alpha_for(&self, target: usize) -> f64 {
        self.class_alpha
            .as_ref()
            .and_then(|a| a.get(target).copied())
            .unwrap_or(self.alpha)
    }
}

/// The training objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy {
        #[serde(default)]
        reduction: Reduction,
    },
    Focal(FocalParams),
}

impl Default for LossKind {
    fn default() -> Self {
        LossKind::CrossEntropy {
            reduction: Reduction::Mean,
        }
    }
}

impl LossKind {
    pub fn focal_default() -> Self {
        LossKind::Focal(FocalParams::default())
    }

    pub fn is_focal(&self) -> bool {
        matches!(self, LossKind::Focal(_))
    }

    pub fn reduction(&self) -> Reduction {
        match self {
            LossKind::CrossEntropy { reduction } => *reduction,
            LossKind::Focal(fp) => fp.reduction,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossKind::CrossEntropy { .. } => Ok(()),
            LossKind::Focal(fp) => fp.validate(),
        }
    }

    /// Unreduced loss of one probability row.
    pub fn item_loss(&self, probs: &[f64], target: usize) -> f64 {
        let p_t = probs[target];
        // written as a subtraction so that p_t = 1 gives +0 rather than -0
        let nll = 0.0 - p_t.max(LOG_EPS).ln();
        match self {
            LossKind::CrossEntropy { .. } => nll,
            LossKind::Focal(fp) => fp.alpha_for(target) * (1.0 - p_t).powf(fp.gamma) * nll,
        }
    }

    /// Gradient of the unreduced item loss with respect to the logits that
    /// produced `probs` through a softmax.
    pub fn logit_grad(&self, probs: &[f64], target: usize) -> Vec<f64> {
        // dL/dz_j = c * (delta_tj - p_j), with c = dL/dp_t * p_t
        let p_t = probs[target];
        let coef = match self {
            LossKind::CrossEntropy { .. } => -1.0,
            LossKind::Focal(fp) => {
                let q = 1.0 - p_t;
                let log_p = p_t.max(LOG_EPS).ln();
                let focus = if fp.gamma == 0.0 || q <= 0.0 {
                    0.0
                } else {
                    fp.gamma * p_t * q.powf(fp.gamma - 1.0) * log_p
                };
                fp.alpha_for(target) * (focus - q.powf(fp.gamma))
            }
        };
        probs
            .iter()
            .enumerate()
            .map(|(j, &p)| coef * (if j == target { 1.0 } else { 0.0 } - p))
            .collect()
    }
}

fn check_targets(rows: &[Vec<f64>], targets: &[usize]) -> Result<()> {
    if rows.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} probability rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    for (row, &t) in rows.iter().zip(targets) {
        if t >= row.len() {
            return Err(Error::ClassIdOutOfRange {
                id: t,
                num_classes: row.len(),
            });
        }
    }
    Ok(())
}

/// Per-item `-ln p_t` with the epsilon floor, then reduced.
pub fn cross_entropy(rows: &[Vec<f64>], targets: &[usize], reduction: Reduction) -> Result<LossValue> {
    check_targets(rows, targets)?;
    let kind = LossKind::CrossEntropy { reduction };
    let per_item = rows
        .iter()
        .zip(targets)
        .map(|(r, &t)| kind.item_loss(r, t))
        .collect();
    Ok(reduction.apply(per_item))
}

/// Per-item `-alpha (1 - p_t)^gamma ln p_t`, then reduced.
pub fn focal_loss(rows: &[Vec<f64>], targets: &[usize], fp: &FocalParams) -> Result<LossValue> {
    fp.validate()?;
    check_targets(rows, targets)?;
    let kind = LossKind::Focal(fp.clone());
    let per_item = rows
        .iter()
        .zip(targets)
        .map(|(r, &t)| kind.item_loss(r, t))
        .collect();
    Ok(fp.reduction.apply(per_item))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn focal(alpha: f64, gamma: f64) -> FocalParams {
        FocalParams {
            alpha,
            gamma,
            ..FocalParams::default()
        }
    }

    #[test]
    fn cross_entropy_values() {
        let sure = vec![vec![0.0, 1.0]];
        assert_eq!(cross_entropy(&sure, &[1], Reduction::Mean).unwrap().scalar(), 0.0);
        let uniform = vec![vec![0.25; 4]];
        let v = cross_entropy(&uniform, &[2], Reduction::Mean).unwrap().scalar();
        assert!((v - 1.386294).abs() < 1e-6);
        let both = vec![vec![0.0, 1.0, 0.0, 0.0], vec![0.25; 4]];
        let mean = cross_entropy(&both, &[1, 0], Reduction::Mean).unwrap().scalar();
        assert!((mean - std::f64::consts::LN_2).abs() < 1e-6);
        let sum = cross_entropy(&both, &[1, 0], Reduction::Sum).unwrap().scalar();
        assert!((sum - 4f64.ln()).abs() < 1e-12);
        assert!(matches!(
            cross_entropy(&both, &[1, 0], Reduction::None).unwrap(),
            LossValue::PerItem(v) if v.len() == 2
        ));
    }

    #[test]
    fn zero_probability_is_clamped() {
        let v = cross_entropy(&[vec![1.0, 0.0]], &[1], Reduction::Mean)
            .unwrap()
            .scalar();
        assert!((v - (-LOG_EPS.ln())).abs() < 1e-9);
        assert!(v.is_finite());
    }

    #[test]
    fn focal_values() {
        let half = vec![vec![0.5, 0.5]];
        let fl = focal_loss(&half, &[0], &focal(1.0, 2.0)).unwrap().scalar();
        assert!((fl - 0.173287).abs() < 1e-6);
        let ce_like = focal_loss(&half, &[0], &focal(1.0, 0.0)).unwrap().scalar();
        assert!((ce_like - std::f64::consts::LN_2).abs() < 1e-6);
        let sure = vec![vec![1.0, 0.0]];
        assert_eq!(focal_loss(&sure, &[0], &focal(3.0, 2.0)).unwrap().scalar(), 0.0);
    }

    #[test]
    fn per_class_alpha_overrides_scalar() {
        let fp = FocalParams {
            class_alpha: Some(vec![2.0, 0.5]),
            ..focal(1.0, 0.0)
        };
        let rows = vec![vec![0.5, 0.5]];
        let a = focal_loss(&rows, &[0], &fp).unwrap().scalar();
        let b = focal_loss(&rows, &[1], &fp).unwrap().scalar();
        assert!((a - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((b - 0.5 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bad_targets_and_params() {
        let rows = vec![vec![0.5, 0.5]];
        assert!(cross_entropy(&rows, &[2], Reduction::Mean).is_err());
        assert!(cross_entropy(&rows, &[0, 1], Reduction::Mean).is_err());
        assert!(focal_loss(&rows, &[0], &focal(-1.0, 2.0)).is_err());
        assert!(focal_loss(&rows, &[0], &focal(1.0, -0.5)).is_err());
    }

    #[test]
    fn cross_entropy_logit_grad_is_p_minus_onehot() {
        let p = [0.2, 0.5, 0.3];
        let g = LossKind::default().logit_grad(&p, 1);
        let expected = [0.2, -0.5, 0.3];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn focal_gradient_vanishes_at_certainty() {
        for gamma in [0.5, 1.0, 2.0] {
            let g = LossKind::Focal(focal(1.0, gamma)).logit_grad(&[1.0, 0.0], 0);
            assert!(
                g.iter().all(|x| x.is_finite() && x.abs() < 1e-12),
                "gamma {gamma}: {g:?}"
            );
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn focal_nonincreasing_in_gamma(p in 0.001f64..0.999, g1 in 0.0f64..5.0, dg in 0.0f64..5.0, alpha in 0.0f64..4.0) {
                let rows = vec![vec![p, 1.0 - p]];
                let lo = focal_loss(&rows, &[0], &focal(alpha, g1)).unwrap().scalar();
                let hi = focal_loss(&rows, &[0], &focal(alpha, g1 + dg)).unwrap().scalar();
                prop_assert!(hi <= lo + 1e-15);
            }

            #[test]
            fn focal_linear_in_alpha(p in 0.001f64..0.999, gamma in 0.0f64..5.0, alpha in 0.0f64..4.0) {
                let rows = vec![vec![p, 1.0 - p]];
                let one = focal_loss(&rows, &[0], &focal(1.0, gamma)).unwrap().scalar();
                let scaled = focal_loss(&rows, &[0], &focal(alpha, gamma)).unwrap().scalar();
                prop_assert!((scaled - alpha * one).abs() <= 1e-12 * (1.0 + scaled.abs()));
            }
        }
    }
}
