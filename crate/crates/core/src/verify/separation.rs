//! Share of correctly classified samples whose certified bands do not overlap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bound_band, BoundMethod, PerturbationSpec, VerifyError};
use crate::dataset::Dataset;
use crate::model::{argmax, MlpModel, Normalizer};
use crate::numfmt::format_sig9;

/// Two-sided 95% standard normal quantile.
pub const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    // At p = 0 and p = 1 the interval touches the boundary exactly.
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationResult {
    pub n_correct: usize,
    pub n_separated: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBounds {
    pub sample_id: u64,
    pub label: u8,
    pub logits: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub correct: bool,
    pub separated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub epsilon: f64,
    pub n_test: usize,
    pub n_correct: usize,
    pub n_separated: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: BoundMethod,
    pub per_sample: Vec<SampleBounds>,
}

impl VerificationReport {
    pub fn result(&self) -> SeparationResult {
        SeparationResult {
            n_correct: self.n_correct,
            n_separated: self.n_separated,
            fraction: self.fraction,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }

    /// Plot data: one row per sample with both logit bands, the clean
    /// logits and the true label.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("index,lower_0,upper_0,lower_1,upper_1,logit_0,logit_1,label\n");
        for (i, s) in self.per_sample.iter().enumerate() {
            let cells = [s.lower[0], s.upper[0], s.lower[1], s.upper[1], s.logits[0], s.logits[1]];
            let cells: Vec<String> = cells.iter().map(|v| format_sig9(*v)).collect();
            out.push_str(&format!("{i},{},{}\n", cells.join(","), s.label));
        }
        out
    }
}

/// Bounds every test sample, restricts to the correctly predicted ones and
/// counts those whose predicted-class lower bound exceeds every other
/// class's upper bound.
pub fn separation_metric(
    model: &MlpModel,
    normalizer: &Normalizer,
    test: &Dataset,
    spec: PerturbationSpec,
    method: BoundMethod,
) -> Result<VerificationReport, VerifyError> {
    if test.is_empty() {
        return Err(VerifyError::EmptyDataset);
    }
    PerturbationSpec::new(spec.epsilon)?;
    if normalizer.dim() != model.input_dim() {
        return Err(crate::model::ModelError::dims(model.input_dim(), normalizer.dim()).into());
    }
    let per_sample: Vec<SampleBounds> = test
        .rows
        .par_iter()
        .map(|row| {
            let x = normalizer.apply(&row.features);
            let logits = model.logits(&x);
            let predicted = argmax(&logits);
            let correct = predicted == row.class_index();
            let band = bound_band(model, &x, spec, method);
            let separated = correct
                && (0..band.len()).filter(|&j| j != predicted).all(|j| band.lower[predicted] > band.upper[j]);
            SampleBounds {
                sample_id: row.sample_id,
                label: row.label,
                logits,
                lower: band.lower,
                upper: band.upper,
                correct,
                separated,
            }
        })
        .collect();

    let n_correct = per_sample.iter().filter(|s| s.correct).count();
    if n_correct == 0 {
        return Err(VerifyError::NoCorrectPredictions);
    }
    let n_separated = per_sample.iter().filter(|s| s.separated).count();
    let fraction = n_separated as f64 / n_correct as f64;
    let (ci_low, ci_high) = wilson_interval(n_separated, n_correct, WILSON_Z95);
    Ok(VerificationReport {
        epsilon: spec.epsilon,
        n_test: test.len(),
        n_correct,
        n_separated,
        fraction,
        ci_low,
        ci_high,
        method,
        per_sample,
    })
}
