//! JSON model document: architecture, parameters, normalizer and provenance.

use serde::{Deserialize, Serialize};

use super::{DenseLayer, MlpModel, ModelError, Normalizer, TrainConfig, ARCHITECTURE};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: u64,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
    #[serde(default)]
    pub dataset_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizerDoc {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema_version: u32,
    pub layer_dims: Vec<usize>,
    /// Per layer, `outputs` rows of `inputs` weights.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub normalizer: NormalizerDoc,
    pub metadata: ModelMetadata,
}

impl ModelDocument {
    pub fn from_parts(model: &MlpModel, normalizer: &Normalizer, metadata: ModelMetadata) -> Self {
        ModelDocument {
            schema_version: SCHEMA_VERSION,
            layer_dims: model.layer_dims(),
            weights: model.layers.iter().map(|l| l.weights.chunks(l.inputs).map(<[f64]>::to_vec).collect()).collect(),
            biases: model.layers.iter().map(|l| l.bias.clone()).collect(),
            normalizer: NormalizerDoc { min: normalizer.min.clone(), max: normalizer.max.clone() },
            metadata,
        }
    }

    fn into_parts(self) -> Result<(MlpModel, Normalizer, ModelMetadata), ModelError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ModelError::MalformedDocument(format!("unsupported schema_version {}", self.schema_version)));
        }
        let dims = &self.layer_dims;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(ModelError::dims("at least two positive layer dims", dims));
        }
        if self.weights.len() != dims.len() - 1 || self.biases.len() != dims.len() - 1 {
            return Err(ModelError::dims(dims.len() - 1, self.weights.len()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (k, (rows, bias)) in self.weights.into_iter().zip(self.biases).enumerate() {
            if rows.len() != dims[k + 1] || rows.iter().any(|r| r.len() != dims[k]) || bias.len() != dims[k + 1] {
                return Err(ModelError::dims(format!("layer {k}: {}x{}", dims[k + 1], dims[k]), "mismatched rows"));
            }
            layers.push(DenseLayer::from_rows(rows, bias)?);
        }
        let model = MlpModel::new(layers)?;
        if !model.all_finite() {
            return Err(ModelError::MalformedDocument("non-finite parameter".into()));
        }
        let normalizer = Normalizer { min: self.normalizer.min, max: self.normalizer.max };
        normalizer.validate()?;
        if normalizer.dim() != model.input_dim() {
            return Err(ModelError::dims(model.input_dim(), normalizer.dim()));
        }
        Ok((model, normalizer, self.metadata))
    }
}

/// Serializes to pretty JSON. Floats use shortest round-trip formatting.
pub fn save_model(model: &MlpModel, normalizer: &Normalizer, metadata: ModelMetadata) -> Vec<u8> {
    let doc = ModelDocument::from_parts(model, normalizer, metadata);
    serde_json::to_vec_pretty(&doc).expect("document serializes")
}

/// Loads a document and requires the fixed classifier architecture.
pub fn load_model(bytes: &[u8]) -> Result<(MlpModel, Normalizer, ModelMetadata), ModelError> {
    let parts = load_model_generic(bytes)?;
    if parts.0.layer_dims() != ARCHITECTURE {
        return Err(ModelError::dims(ARCHITECTURE, parts.0.layer_dims()));
    }
    Ok(parts)
}

/// Loads a document of any dense ReLU architecture.
pub fn load_model_generic(bytes: &[u8]) -> Result<(MlpModel, Normalizer, ModelMetadata), ModelError> {
    let doc: ModelDocument =
        serde_json::from_slice(bytes).map_err(|e| ModelError::MalformedDocument(e.to_string()))?;
    doc.into_parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64, dims: &[usize]) -> MlpModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = MlpModel::he_init(dims, &mut rng);
        for l in &mut m.layers {
            l.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        }
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = random_model(5, &ARCHITECTURE);
        let n = Normalizer { min: vec![-1.5; 25], max: vec![1e6 / 3.0; 25] };
        let meta = ModelMetadata { seed: 5, train_config: Some(TrainConfig::default()), dataset_hash: Some("ab".into()) };
        let bytes = save_model(&m, &n, meta.clone());
        let (m2, n2, meta2) = load_model(&bytes).unwrap();
        assert_eq!(m, m2);
        assert_eq!(n, n2);
        assert_eq!(meta, meta2);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let x: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..1.0)).collect();
            let a = m.forward(&x).unwrap();
            let b = m2.forward(&x).unwrap();
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn truncated_document_is_malformed() {
        let bytes = save_model(&random_model(1, &ARCHITECTURE), &Normalizer::identity(25), ModelMetadata::default());
        let cut = &bytes[..bytes.len() / 2];
        assert!(matches!(load_model(cut), Err(ModelError::MalformedDocument(_))));
    }

    #[test]
    fn other_architecture_needs_generic_mode() {
        let m = random_model(2, &[25, 64, 2]);
        let bytes = save_model(&m, &Normalizer::identity(25), ModelMetadata::default());
        assert!(matches!(load_model(&bytes), Err(ModelError::DimensionMismatch { .. })));
        let (m2, _, _) = load_model_generic(&bytes).unwrap();
        assert_eq!(m2.layer_dims(), vec![25, 64, 2]);
    }

    #[test]
    fn inconsistent_shapes_are_rejected() {
        let bytes = save_model(&random_model(3, &[3, 4, 2]), &Normalizer::identity(3), ModelMetadata::default());
        let mut doc: ModelDocument = serde_json::from_slice(&bytes).unwrap();
        doc.weights[1][0].pop();
        let bad = serde_json::to_vec(&doc).unwrap();
        assert!(matches!(load_model_generic(&bad), Err(ModelError::DimensionMismatch { .. })));
    }
}
