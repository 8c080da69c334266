//! Certified logit bounds under L∞ input perturbation.
//!
//! Two bounding methods are provided for dense ReLU networks:
//!
//! - [`ibp_bounds`]: interval bound propagation, layer by layer.
//! - [`crown_bounds`]: backward linear relaxation. Every hidden layer's
//!   pre-activation interval is itself obtained by a backward pass to the
//!   input, and unstable ReLUs use the adaptive lower slope.
//!
//! Both are sound: for every input in the ball the network output lies in
//! the returned band. The CROWN band is additionally intersected with the
//! IBP band, so it is never looser.

mod audit;
mod crown;
mod ibp;
mod separation;

pub use audit::{count_violations, soundness_audit, AUDIT_TOLERANCE};
pub use crown::crown_bounds;
pub use ibp::ibp_bounds;
pub use separation::{
    separation_metric, wilson_interval, SampleBounds, SeparationResult, VerificationReport, WILSON_Z95,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("test dataset is empty")]
    EmptyDataset,
    #[error("no test sample was predicted correctly")]
    NoCorrectPredictions,
    #[error("invalid perturbation radius {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// L∞ radius in normalized feature space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64) -> Result<Self, VerifyError> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(VerifyError::InvalidEpsilon(epsilon));
        }
        Ok(PerturbationSpec { epsilon })
    }
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec { epsilon: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundMethod {
    Crown,
    Ibp,
}

impl std::str::FromStr for BoundMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "crown" => Ok(BoundMethod::Crown),
            "ibp" => Ok(BoundMethod::Ibp),
            other => Err(format!("unknown bound method `{other}` (expected crown or ibp)")),
        }
    }
}

/// Per-output `[lower, upper]` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBand {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundBand {
    pub fn point(values: Vec<f64>) -> Self {
        BoundBand { lower: values.clone(), upper: values }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, y: &[f64], tolerance: f64) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= lo - tolerance && *v <= hi + tolerance)
    }

    /// `self ⊆ other` per coordinate, up to `tolerance`.
    pub fn is_within(&self, other: &BoundBand, tolerance: f64) -> bool {
        (0..self.len()).all(|i| self.lower[i] >= other.lower[i] - tolerance && self.upper[i] <= other.upper[i] + tolerance)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Restricts to the intersection with `other`; a crossing caused by
    /// rounding collapses to the midpoint.
    pub(crate) fn intersect(&mut self, other: &BoundBand) {
        for i in 0..self.len() {
            let lo = self.lower[i].max(other.lower[i]);
            let hi = self.upper[i].min(other.upper[i]);
            if lo <= hi {
                self.lower[i] = lo;
                self.upper[i] = hi;
            } else {
                let mid = 0.5 * (lo + hi);
                self.lower[i] = mid;
                self.upper[i] = mid;
            }
        }
    }
}

/// Pre-activation interval of one layer.
pub type LayerBounds = BoundBand;

/// An affine function of the input: `coefficients · x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub coefficients: Vec<f64>,
    pub offset: f64,
}

impl AffineForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        crate::model::dot(&self.coefficients, x) + self.offset
    }

    pub fn l1_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c.abs()).sum()
    }
}

/// Per output, affine lower and upper functions valid over the whole ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBounds {
    pub lower: Vec<AffineForm>,
    pub upper: Vec<AffineForm>,
}

/// Dispatches on `method`.
pub fn bound_band(model: &crate::MlpModel, x: &[f64], spec: PerturbationSpec, method: BoundMethod) -> BoundBand {
    match method {
        BoundMethod::Crown => crown_bounds(model, x, spec).0,
        BoundMethod::Ibp => ibp_bounds(model, x, spec).0,
    }
}
