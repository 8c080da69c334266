//! Shapley-value attribution with an interventional value function.
//!
//! `v(S)` is the mean model output over the background rows when the
//! features in `S` are taken from the explained point and the rest from the
//! background row. [`shapley_exact`] enumerates all coalitions (small `k`
//! only); [`shapley_permutation`] samples feature orderings.

mod exact;
mod permutation;
mod ranking;

pub use exact::{shapley_exact, MAX_EXACT_FEATURES};
pub use permutation::shapley_permutation;
pub use ranking::{importance_ranking, FeatureImportance, ImportanceRanking, RankingConfig};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::FEATURE_NAMES;
use crate::model::{argmax, MlpModel};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("exact Shapley enumeration supports at most {max} features, got {k}")]
    TooManyFeatures { k: usize, max: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("background is empty")]
    EmptyBackground,
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("n_permutations must be at least 1")]
    NoPermutations,
}

/// A real-valued function of `n_features` inputs to be explained.
pub trait ScalarModel: Sync {
    fn n_features(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
}

/// Wraps a closure as a [`ScalarModel`].
pub struct FnModel<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarModel for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// One logit of an MLP, evaluated on already-normalized inputs.
pub struct ClassLogit<'a> {
    pub model: &'a MlpModel,
    pub class: usize,
}

impl<'a> ClassLogit<'a> {
    /// The logit of the class the model predicts at `x`.
    pub fn predicted(model: &'a MlpModel, x: &[f64]) -> Self {
        ClassLogit { model, class: argmax(&model.logits(x)) }
    }
}

impl ScalarModel for ClassLogit<'_> {
    fn n_features(&self) -> usize {
        self.model.input_dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.model.logits(x)[self.class]
    }
}

/// Reference rows used to marginalize absent features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Background {
    pub rows: Vec<Vec<f64>>,
}

impl Background {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ExplainError> {
        let first = rows.first().ok_or(ExplainError::EmptyBackground)?;
        let dim = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(ExplainError::DimensionMismatch { expected: dim, found: bad.len() });
        }
        Ok(Background { rows })
    }

    /// Seeded sample of up to `n` distinct rows.
    pub fn sample(rows: &[Vec<f64>], n: usize, seed: u64) -> Result<Self, ExplainError> {
        if rows.is_empty() {
            return Err(ExplainError::EmptyBackground);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked = sample(&mut rng, rows.len(), n.min(rows.len()));
        Background::new(picked.into_iter().map(|i| rows[i].clone()).collect())
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    /// Mean model output over the background.
    pub fn baseline<M: ScalarModel + ?Sized>(&self, model: &M) -> f64 {
        self.rows.iter().map(|r| model.eval(r)).sum::<f64>() / self.rows.len() as f64
    }

    pub(crate) fn check<M: ScalarModel + ?Sized>(&self, model: &M, x: &[f64]) -> Result<(), ExplainError> {
        let k = model.n_features();
        if x.len() != k {
            return Err(ExplainError::DimensionMismatch { expected: k, found: x.len() });
        }
        if self.dim() != k {
            return Err(ExplainError::DimensionMismatch { expected: k, found: self.dim() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Exact,
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    pub feature_names: Vec<String>,
    pub phi: Vec<f64>,
    /// Per-feature standard error; permutation mode only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_err: Option<Vec<f64>>,
    pub baseline: f64,
    pub prediction: f64,
    pub estimator: Estimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_permutations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explained_class: Option<usize>,
}

impl ShapleyReport {
    /// `Σφ + baseline − prediction`.
    pub fn efficiency_residual(&self) -> f64 {
        self.phi.iter().sum::<f64>() + self.baseline - self.prediction
    }
}

pub(crate) fn feature_names(k: usize) -> Vec<String> {
    if k == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..k).map(|i| format!("x{i}")).collect()
    }
}

/// Deterministic seed derived from the bit pattern of a feature vector.
pub fn seed_from_features(x: &[f64]) -> u64 {
    let mut h = Sha256::new();
    for v in x {
        h.update(v.to_bits().to_le_bytes());
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// SplitMix64 finalizer, used to derive per-sample seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
