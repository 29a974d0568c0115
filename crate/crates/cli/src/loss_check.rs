//! Finite-difference verification of the partial losses on random problems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scribble_core::losses::{finite_diff_check, LogitField, LossWeights, PartialLoss, SparseTarget, DEFAULT_SMOOTH};

use crate::InvalidInput;

pub const FD_EPS: f64 = 1e-5;
const IGNORE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct LossCheckOptions {
    pub seed: u64,
    pub problems: usize,
    pub max_classes: usize,
    pub max_voxels: usize,
    /// Fixed labeled fraction; drawn per problem from `[0.1, 1]` when unset.
    pub labeled_fraction: Option<f64>,
    /// Logits are drawn from `[-scale, scale]`.
    pub logit_scale: f64,
    pub threshold: f64,
}

impl Default for LossCheckOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            problems: 20,
            max_classes: 5,
            max_voxels: 500,
            labeled_fraction: None,
            logit_scale: 1.0,
            threshold: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCheckLine {
    pub loss: &'static str,
    pub max_error: f64,
    /// Every problem had no labeled voxel, so there was nothing to check.
    pub degenerate: bool,
    pub passed: bool,
}

impl std::fmt::Display for LossCheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = match (self.passed, self.degenerate) {
            (true, true) => "degenerate-pass",
            (true, false) => "pass",
            (false, _) => "FAIL",
        };
        write!(f, "{:<6} max relative error {:.3e}  {verdict}", self.loss, self.max_error)
    }
}

pub fn losses() -> [PartialLoss; 3] {
    [
        PartialLoss::CrossEntropy,
        PartialLoss::Dice { smooth: DEFAULT_SMOOTH },
        PartialLoss::Combined {
            weights: LossWeights::default(),
            smooth: DEFAULT_SMOOTH,
        },
    ]
}

/// A random `classes x voxels` problem; each voxel is labeled with
/// probability `labeled`.
pub fn random_problem(
    rng: &mut impl Rng,
    classes: usize,
    voxels: usize,
    labeled: f64,
    scale: f64,
) -> (LogitField, SparseTarget) {
    let values = (0..classes * voxels).map(|_| rng.random_range(-scale..=scale)).collect();
    let labels = (0..voxels)
        .map(|_| {
            if rng.random_bool(labeled) {
                rng.random_range(0..classes as u32)
            } else {
                IGNORE
            }
        })
        .collect();
    (
        LogitField::new(classes, voxels, values).expect("valid shape"),
        SparseTarget::new(labels, IGNORE),
    )
}

pub fn run_loss_check(opts: &LossCheckOptions) -> anyhow::Result<Vec<LossCheckLine>> {
    if opts.max_classes < 2 || opts.max_voxels < 1 || opts.problems == 0 {
        return Err(InvalidInput("need >= 2 classes, >= 1 voxel and >= 1 problem".into()).into());
    }
    if let Some(f) = opts.labeled_fraction {
        if !(0.0..=1.0).contains(&f) {
            return Err(InvalidInput(format!("labeled fraction {f} outside [0, 1]")).into());
        }
    }
    if !(opts.logit_scale > 0.0 && opts.logit_scale.is_finite()) {
        return Err(InvalidInput("logit scale must be positive".into()).into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = [0.0f64; 3];
    let mut any_labeled = false;
    for _ in 0..opts.problems {
        let classes = rng.random_range(2..=opts.max_classes);
        let voxels = rng.random_range(1..=opts.max_voxels);
        let frac = opts.labeled_fraction.unwrap_or_else(|| rng.random_range(0.1..=1.0));
        let (logits, target) = random_problem(&mut rng, classes, voxels, frac, opts.logit_scale);
        any_labeled |= target.labeled_count() > 0;
        for (w, loss) in worst.iter_mut().zip(losses()) {
            *w = w.max(finite_diff_check(loss, &logits, &target, FD_EPS, &mut rng)?);
        }
    }
    Ok(losses()
        .iter()
        .zip(worst)
        .map(|(loss, max_error)| LossCheckLine {
            loss: loss.name(),
            max_error,
            degenerate: !any_labeled,
            passed: max_error < opts.threshold,
        })
        .collect())
}
