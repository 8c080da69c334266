//! Mini-batch gradient descent on softmax cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, MlpModel, ModelError, Normalizer, ARCHITECTURE};
use crate::dataset::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Share of rows used for fitting; the remainder is split evenly into
    /// validation and test.
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, batch_size: 64, learning_rate: 0.05, seed: 7, train_fraction: 0.7 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        // A zero step size is accepted: it trains nothing, which is a useful control.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(format!("learning_rate {} must be finite and >= 0", self.learning_rate)));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(ModelError::InvalidConfig(format!("train_fraction {} must lie in (0,1)", self.train_fraction)));
        }
        Ok(())
    }
}

const STREAM_SPLIT: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle, then `train_fraction` / half the rest / the rest.
pub fn split_dataset(dataset: &Dataset, cfg: &TrainConfig) -> DatasetSplit {
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut stream(cfg.seed, STREAM_SPLIT));
    let n = idx.len();
    let n_train = ((n as f64 * cfg.train_fraction).round() as usize).clamp(1.min(n), n);
    let n_val = (n - n_train) / 2;
    DatasetSplit {
        train: dataset.subset(&idx[..n_train]),
        validation: dataset.subset(&idx[n_train..n_train + n_val]),
        test: dataset.subset(&idx[n_train + n_val..]),
    }
}

/// The parameters `train` starts from for this config.
pub fn initial_model(cfg: &TrainConfig) -> MlpModel {
    MlpModel::he_init(&ARCHITECTURE, &mut stream(cfg.seed, STREAM_INIT))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsHistory {
    pub epochs: Vec<EpochMetrics>,
}

impl MetricsHistory {
    /// One `{epoch, loss, val_accuracy}` JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(e).expect("plain struct serializes"));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MlpModel,
    pub normalizer: Normalizer,
    pub history: MetricsHistory,
}

/// Parameter gradients with the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(model: &MlpModel) -> Self {
        Gradients {
            weights: model.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: model.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[target]
}

/// Mean cross-entropy over the batch and its gradient by backpropagation.
pub fn loss_and_gradients(model: &MlpModel, inputs: &[&[f64]], targets: &[usize]) -> (f64, Gradients) {
    let mut grads = Gradients::zeros_like(model);
    let n = inputs.len().max(1) as f64;
    let mut total = 0.0;
    let depth = model.layers.len();
    let mut activations: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];

    for (x, &target) in inputs.iter().zip(targets) {
        activations[0].clear();
        activations[0].extend_from_slice(x);
        for k in 0..depth {
            let (head, tail) = activations.split_at_mut(k + 1);
            model.layers[k].apply(&head[k], &mut tail[0]);
            if k + 1 < depth {
                tail[0].iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        let logits = &activations[depth];
        total += cross_entropy(logits, target);

        // dL/dz for the output layer.
        let mut delta = softmax(logits);
        delta[target] -= 1.0;

        for k in (0..depth).rev() {
            let layer = &model.layers[k];
            let input = &activations[k];
            let gw = &mut grads.weights[k];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let d_n = d / n;
                grads.bias[k][o] += d_n;
                let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d_n * a;
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, &w) in prev.iter_mut().zip(layer.row(o)) {
                        *p += d * w;
                    }
                }
                // ReLU derivative: active iff the post-activation is positive.
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }
    (total / n, grads)
}

fn mean_loss(model: &MlpModel, inputs: &[Vec<f64>], targets: &[usize]) -> f64 {
    let total: f64 = inputs.iter().zip(targets).map(|(x, &t)| cross_entropy(&model.logits(x), t)).sum();
    total / inputs.len().max(1) as f64
}

fn accuracy(model: &MlpModel, inputs: &[Vec<f64>], targets: &[usize]) -> f64 {
    let hits = inputs.iter().zip(targets).filter(|(x, &t)| model.predict_class(x) == t).count();
    hits as f64 / inputs.len() as f64
}

/// Fits the normalizer on the training split, then runs `cfg.epochs` epochs
/// of shuffled mini-batch gradient descent. Deterministic in `cfg.seed`.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, ModelError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if dataset.class_counts().contains(&0) {
        return Err(ModelError::SingleClassDataset);
    }
    let split = split_dataset(dataset, cfg);
    let normalizer = Normalizer::fit(&split.train)?;
    let train_x = normalizer.apply_dataset(&split.train);
    let train_y: Vec<usize> = split.train.rows.iter().map(|r| r.class_index()).collect();
    let val_x = normalizer.apply_dataset(&split.validation);
    let val_y: Vec<usize> = split.validation.rows.iter().map(|r| r.class_index()).collect();

    let mut model = initial_model(cfg);
    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = MetricsHistory::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| train_x[i].as_slice()).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| train_y[i]).collect();
            let (loss, grads) = loss_and_gradients(&model, &xs, &ys);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch });
            }
            if cfg.learning_rate > 0.0 {
                apply_step(&mut model, &grads, cfg.learning_rate);
            }
        }
        let loss = mean_loss(&model, &train_x, &train_y);
        if !loss.is_finite() || !model.all_finite() {
            return Err(ModelError::NonFiniteLoss { epoch });
        }
        let val_accuracy = (!val_x.is_empty()).then(|| accuracy(&model, &val_x, &val_y));
        history.epochs.push(EpochMetrics { epoch, loss, val_accuracy });
    }
    Ok(TrainOutcome { model, normalizer, history })
}

fn apply_step(model: &mut MlpModel, grads: &Gradients, lr: f64) {
    for (k, layer) in model.layers.iter_mut().enumerate() {
        for (w, g) in layer.weights.iter_mut().zip(&grads.weights[k]) {
            *w -= lr * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(&grads.bias[k]) {
            *b -= lr * g;
        }
    }
}

/// Predicted class index (0 or 1) for a raw feature vector.
pub fn predict(model: &MlpModel, normalizer: &Normalizer, raw: &[f64]) -> Result<usize, ModelError> {
    if raw.len() != normalizer.dim() {
        return Err(ModelError::dims(normalizer.dim(), raw.len()));
    }
    Ok(argmax(&model.forward(&normalizer.apply(raw))?))
}

/// Fraction of rows whose arg-max logit matches the label.
pub fn evaluate(model: &MlpModel, normalizer: &Normalizer, dataset: &Dataset) -> Result<f64, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut hits = 0usize;
    for row in &dataset.rows {
        if predict(model, normalizer, &row.features)? == row.class_index() {
            hits += 1;
        }
    }
    Ok(hits as f64 / dataset.len() as f64)
}
