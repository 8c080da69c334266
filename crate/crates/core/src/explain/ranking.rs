use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{feature_names, mix_seed, shapley_exact, shapley_permutation, Background, ClassLogit, ExplainError};
use crate::dataset::Dataset;
use crate::model::{MlpModel, Normalizer};
use crate::numfmt::format_sig9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub n_permutations: usize,
    pub seed: u64,
    /// Explain at most this many rows (the first ones).
    #[serde(default)]
    pub max_samples: Option<usize>,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig { n_permutations: 200, seed: 17, max_samples: Some(200) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub index: usize,
    pub mean_abs_phi: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub n_samples: usize,
    pub n_permutations: usize,
    /// Descending by mean |φ|, ties broken by feature index.
    pub entries: Vec<FeatureImportance>,
}

impl ImportanceRanking {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.feature == feature).map(|e| e.rank)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature_name,mean_abs_phi,rank\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.feature, format_sig9(e.mean_abs_phi), e.rank));
        }
        out
    }
}

/// Mean absolute attribution of the predicted-class logit per feature over
/// `dataset`. `background` holds normalized rows. Uses the exact estimator
/// when the input has at most 12 features and `n_permutations` is 0.
pub fn importance_ranking(
    model: &MlpModel,
    normalizer: &Normalizer,
    dataset: &Dataset,
    background: &Background,
    config: &RankingConfig,
) -> Result<ImportanceRanking, ExplainError> {
    if dataset.is_empty() {
        return Err(ExplainError::EmptyDataset);
    }
    let k = model.input_dim();
    let take = config.max_samples.unwrap_or(dataset.len()).min(dataset.len()).max(1);
    let rows = &dataset.rows[..take];

    let per_sample: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|row| {
            let x = normalizer.apply(&row.features);
            let target = ClassLogit::predicted(model, &x);
            let report = if config.n_permutations == 0 {
                shapley_exact(&target, &x, background)?
            } else {
                let seed = mix_seed(config.seed, row.sample_id);
                shapley_permutation(&target, &x, background, config.n_permutations, seed)?
            };
            Ok(report.phi.iter().map(|p| p.abs()).collect())
        })
        .collect::<Result<_, ExplainError>>()?;

    let mut mean = vec![0.0; k];
    for phi in &per_sample {
        for (m, p) in mean.iter_mut().zip(phi) {
            *m += p;
        }
    }
    mean.iter_mut().for_each(|m| *m /= take as f64);

    let names = feature_names(k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    let entries = order
        .into_iter()
        .enumerate()
        .map(|(r, i)| FeatureImportance { feature: names[i].clone(), index: i, mean_abs_phi: mean[i], rank: r + 1 })
        .collect();
    Ok(ImportanceRanking { n_samples: take, n_permutations: config.n_permutations, entries })
}
