use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dataset::{Dataset, FEATURE_COUNT};

/// Per-feature min-max scaling fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &Dataset) -> Result<Normalizer, ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptyDataset);
        }
        let mut min = vec![f64::INFINITY; FEATURE_COUNT];
        let mut max = vec![f64::NEG_INFINITY; FEATURE_COUNT];
        for row in &train.rows {
            for (i, &v) in row.features.iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Identity scaling over `[0, 1]` for `dim` features.
    pub fn identity(dim: usize) -> Normalizer {
        Normalizer { min: vec![0.0; dim], max: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.min.len() != self.max.len() {
            return Err(ModelError::dims(self.min.len(), self.max.len()));
        }
        for (i, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(ModelError::MalformedDocument(format!("normalizer feature {i}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Scales into `[0, 1]`, clamping out-of-range values; constant features map to 0.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span > 0.0 {
                    ((v - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Vec<Vec<f64>> {
        ds.rows.iter().map(|r| self.apply(&r.features)).collect()
    }
}
