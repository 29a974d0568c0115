//! Partial (scribble-restricted) segmentation losses in 64-bit arithmetic.
//!
//! Only voxels carrying a class label contribute; ignored voxels get exactly
//! zero gradient and perturbing their logits changes nothing. Sums run in
//! voxel-major order so results are bitwise reproducible.
//!
//! Logits are laid out class-major: `values[c * voxels + j]`.

use rand::seq::index;
use rand::Rng;

use crate::{Error, Result};

/// Default Dice smoothing term, added to numerator and denominator.
pub const DEFAULT_SMOOTH: f64 = 1e-5;

/// Floor of the relative-error denominator in [`check_gradient`].
pub const REL_ERROR_FLOOR: f64 = 1e-12;

/// Coordinates probed by [`finite_diff_check`] (all of them if fewer).
pub const FD_SAMPLE: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LogitField {
    classes: usize,
    voxels: usize,
    values: Vec<f64>,
}

impl LogitField {
    pub fn new(classes: usize, voxels: usize, values: Vec<f64>) -> Result<Self> {
        if classes < 2 || voxels < 1 {
            return Err(Error::ShapeMismatch(format!(
                "logit field needs >= 2 classes and >= 1 voxel, got {classes}x{voxels}"
            )));
        }
        if values.len() != classes * voxels {
            return Err(Error::ShapeMismatch(format!(
                "{} logits for a {classes}x{voxels} field",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("logits must be finite".into()));
        }
        Ok(Self {
            classes,
            voxels,
            values,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn voxels(&self) -> usize {
        self.voxels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, class: usize, voxel: usize) -> f64 {
        self.values[class * self.voxels + voxel]
    }
}

/// Per-voxel class labels with a reserved ignore value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseTarget {
    labels: Vec<u32>,
    ignore_label: u32,
    labeled_count: usize,
}

impl SparseTarget {
    pub fn new(labels: Vec<u32>, ignore_label: u32) -> Self {
        let labeled_count = labels.iter().filter(|&&l| l != ignore_label).count();
        Self {
            labels,
            ignore_label,
            labeled_count,
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn ignore_label(&self) -> u32 {
        self.ignore_label
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled_count
    }

    /// Class of voxel `j`, `None` when ignored.
    #[inline]
    pub fn class_at(&self, j: usize) -> Option<usize> {
        let l = self.labels[j];
        (l != self.ignore_label).then_some(l as usize)
    }

    fn check(&self, logits: &LogitField) -> Result<()> {
        if self.labels.len() != logits.voxels {
            return Err(Error::ShapeMismatch(format!(
                "{} target labels for {} voxels",
                self.labels.len(),
                logits.voxels
            )));
        }
        for (index, &label) in self.labels.iter().enumerate() {
            if label != self.ignore_label && label as usize >= logits.classes {
                return Err(Error::TargetOutOfRange {
                    index,
                    label,
                    classes: logits.classes,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// d loss / d logit, same layout as the logits.
    pub gradient: Vec<f64>,
}

impl LossResult {
    fn zero(logits: &LogitField) -> Self {
        Self {
            value: 0.0,
            gradient: vec![0.0; logits.values.len()],
        }
    }
}

/// Softmax of one voxel column, max-subtracted. Returns `(max, sum of exp)`
/// for log-sum-exp reuse.
fn softmax_column(logits: &LogitField, j: usize, out: &mut [f64]) -> (f64, f64) {
    let max = (0..logits.classes)
        .map(|c| logits.get(c, j))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (c, o) in out.iter_mut().enumerate() {
        *o = (logits.get(c, j) - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    (max, sum)
}

/// Per-voxel class probabilities, same layout as the logits.
pub fn softmax_columns(logits: &LogitField) -> Vec<f64> {
    let (c_n, n) = (logits.classes, logits.voxels);
    let mut probs = vec![0.0; c_n * n];
    let mut col = vec![0.0; c_n];
    for j in 0..n {
        softmax_column(logits, j, &mut col);
        for c in 0..c_n {
            probs[c * n + j] = col[c];
        }
    }
    probs
}

/// Mean negative log-likelihood over labeled voxels.
pub fn partial_cross_entropy(logits: &LogitField, target: &SparseTarget) -> Result<LossResult> {
    target.check(logits)?;
    let labeled = target.labeled_count();
    if labeled == 0 {
        return Ok(LossResult::zero(logits));
    }
    let (c_n, n) = (logits.classes, logits.voxels);
    let scale = 1.0 / labeled as f64;
    let mut out = LossResult::zero(logits);
    let mut col = vec![0.0; c_n];
    let mut total = 0.0;
    for j in 0..n {
        let Some(t) = target.class_at(j) else { continue };
        let (max, sum) = softmax_column(logits, j, &mut col);
        total += max + sum.ln() - logits.get(t, j);
        for (c, &p) in col.iter().enumerate() {
            let onehot = if c == t { 1.0 } else { 0.0 };
            out.gradient[c * n + j] = (p - onehot) * scale;
        }
    }
    out.value = total * scale;
    Ok(out)
}

/// One minus the mean soft Dice over the classes present among labeled
/// voxels; sums run over labeled voxels only.
pub fn partial_dice(logits: &LogitField, target: &SparseTarget, smooth: f64) -> Result<LossResult> {
    target.check(logits)?;
    if target.labeled_count() == 0 {
        return Ok(LossResult::zero(logits));
    }
    let (c_n, n) = (logits.classes, logits.voxels);

    let probs = softmax_columns(logits);
    let mut intersection = vec![0.0; c_n];
    let mut pred_sum = vec![0.0; c_n];
    let mut target_sum = vec![0.0; c_n];
    for j in 0..n {
        let Some(t) = target.class_at(j) else { continue };
        for c in 0..c_n {
            pred_sum[c] += probs[c * n + j];
        }
        intersection[t] += probs[t * n + j];
        target_sum[t] += 1.0;
    }

    let present: Vec<usize> = (0..c_n).filter(|&c| target_sum[c] > 0.0).collect();
    let k = present.len() as f64;
    let mut dice_sum = 0.0;
    // d loss / d p[c, j] = -(1/k) * (2 t (P+T+s) - (2I+s)) / (P+T+s)^2
    let mut d_onehot = vec![0.0; c_n];
    let mut d_other = vec![0.0; c_n];
    for &c in &present {
        let num = 2.0 * intersection[c] + smooth;
        let den = pred_sum[c] + target_sum[c] + smooth;
        dice_sum += num / den;
        d_onehot[c] = -(2.0 * den - num) / (den * den) / k;
        d_other[c] = num / (den * den) / k;
    }

    let mut out = LossResult::zero(logits);
    out.value = 1.0 - dice_sum / k;
    let mut dp = vec![0.0; c_n];
    for j in 0..n {
        let Some(t) = target.class_at(j) else { continue };
        for c in 0..c_n {
            dp[c] = if c == t { d_onehot[c] } else { d_other[c] };
        }
        // back through softmax: p_c (dp_c - sum_k p_k dp_k)
        let inner: f64 = (0..c_n).map(|c| probs[c * n + j] * dp[c]).sum();
        for c in 0..c_n {
            out.gradient[c * n + j] = probs[c * n + j] * (dp[c] - inner);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ce: f64,
    pub dice: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { ce: 1.0, dice: 1.0 }
    }
}

/// `weights.ce * pCE + weights.dice * pDice`, gradient likewise.
pub fn partial_loss(
    logits: &LogitField,
    target: &SparseTarget,
    weights: LossWeights,
    smooth: f64,
) -> Result<LossResult> {
    let ce = partial_cross_entropy(logits, target)?;
    let dice = partial_dice(logits, target, smooth)?;
    Ok(LossResult {
        value: weights.ce * ce.value + weights.dice * dice.value,
        gradient: ce
            .gradient
            .iter()
            .zip(&dice.gradient)
            .map(|(a, b)| weights.ce * a + weights.dice * b)
            .collect(),
    })
}

/// The three losses as one selectable value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartialLoss {
    CrossEntropy,
    Dice { smooth: f64 },
    Combined { weights: LossWeights, smooth: f64 },
}

impl PartialLoss {
    pub fn name(&self) -> &'static str {
        match self {
            PartialLoss::CrossEntropy => "pCE",
            PartialLoss::Dice { .. } => "pDice",
            PartialLoss::Combined { .. } => "pL",
        }
    }

    pub fn evaluate(&self, logits: &LogitField, target: &SparseTarget) -> Result<LossResult> {
        match *self {
            PartialLoss::CrossEntropy => partial_cross_entropy(logits, target),
            PartialLoss::Dice { smooth } => partial_dice(logits, target, smooth),
            PartialLoss::Combined { weights, smooth } => partial_loss(logits, target, weights, smooth),
        }
    }
}

/// Largest relative error between `analytic` and central differences of
/// `value` over a random subsample of `sample` coordinates. The denominator
/// is `max(|analytic|, |numeric|, 1e-12)`.
pub fn check_gradient(
    value: impl Fn(&LogitField) -> f64,
    analytic: &[f64],
    logits: &LogitField,
    eps: f64,
    sample: usize,
    rng: &mut impl Rng,
) -> f64 {
    let total = logits.values.len();
    let mut probe = logits.clone();
    let mut worst = 0.0f64;
    for i in index::sample(rng, total, sample.min(total)) {
        let orig = probe.values[i];
        probe.values[i] = orig + eps;
        let plus = value(&probe);
        probe.values[i] = orig - eps;
        let minus = value(&probe);
        probe.values[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

/// [`check_gradient`] applied to one of the partial losses.
pub fn finite_diff_check(
    loss: PartialLoss,
    logits: &LogitField,
    target: &SparseTarget,
    eps: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let analytic = loss.evaluate(logits, target)?.gradient;
    Ok(check_gradient(
        |l| loss.evaluate(l, target).map(|r| r.value).unwrap_or(f64::NAN),
        &analytic,
        logits,
        eps,
        FD_SAMPLE,
        rng,
    ))
}
