//! Monte Carlo check that sampled network outputs stay inside a band.

use rand::Rng;

use super::{BoundBand, PerturbationSpec};
use crate::model::MlpModel;

/// Slack for floating-point rounding between the bound arithmetic and the
/// forward pass. Far below any mutation a test would plant.
pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// Samples `n_samples` points uniformly from the L∞ ball around `x` and
/// counts, per band, the samples whose output leaves it. With `ε = 0` only
/// the center is evaluated.
pub fn count_violations<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &[f64],
    bands: &[&BoundBand],
    spec: PerturbationSpec,
    n_samples: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut violations = vec![0usize; bands.len()];
    let mut check = |y: &[f64]| {
        for (count, band) in violations.iter_mut().zip(bands) {
            if !band.contains(y, AUDIT_TOLERANCE) {
                *count += 1;
            }
        }
    };
    let eps = spec.epsilon;
    if eps == 0.0 {
        check(&model.logits(x));
        return violations;
    }
    let mut point = vec![0.0; x.len()];
    for _ in 0..n_samples {
        for (p, &c) in point.iter_mut().zip(x) {
            *p = c + rng.random_range(-eps..=eps);
        }
        check(&model.logits(&point));
    }
    violations
}

/// Number of sampled outputs outside `band`; 0 for a sound band.
pub fn soundness_audit<R: Rng + ?Sized>(
    model: &MlpModel,
    x: &[f64],
    band: &BoundBand,
    spec: PerturbationSpec,
    n_samples: usize,
    rng: &mut R,
) -> usize {
    count_violations(model, x, &[band], spec, n_samples, rng)[0]
}
