use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GateDecision, MlopsArtifacts, OperatorAction, PipelineError, Verdict};
use crate::explain::{seed_from_features, shapley_permutation, Background, ClassLogit, ShapleyReport};
use crate::model::{argmax, load_model, Normalizer};
use crate::store::{ArtifactStore, ArtifactUri};

/// Permutations drawn for each online explanation.
pub const ONLINE_PERMUTATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XAppPackage {
    /// `<manifest id>@<version>`
    pub xapp_id: String,
    pub manifest_id: String,
    pub version: u32,
    pub model_uri: ArtifactUri,
    pub normalizer: Normalizer,
    pub verification_uri: ArtifactUri,
    /// Absent only when an operator approved a run without a report.
    pub explanation_uri: Option<ArtifactUri>,
    pub background_uri: Option<ArtifactUri>,
    pub decision_uri: ArtifactUri,
}

impl XAppPackage {
    pub fn artifact_uris(&self) -> Vec<ArtifactUri> {
        let mut out = vec![self.model_uri, self.verification_uri, self.decision_uri];
        out.extend(self.explanation_uri);
        out.extend(self.background_uri);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutput {
    pub xapp_id: String,
    /// Application class label, 1 or 2.
    pub label: u8,
    pub class_index: usize,
    pub logits: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ShapleyReport>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct IndexDoc {
    packages: Vec<XAppPackage>,
}

/// Published packages, persisted as JSON under `<store root>/xapps/index.json`.
#[derive(Debug)]
pub struct XAppIndex {
    path: PathBuf,
    packages: Vec<XAppPackage>,
}

fn consistent(decision: &GateDecision) -> bool {
    let recomputed = decision.reasons.iter().all(|r| match r.threshold {
        Some(t) => r.passed == r.measured.is_some_and(|v| v >= t),
        None => true,
    });
    if !recomputed {
        return false;
    }
    let failed: Vec<&str> = decision.failed().map(|r| r.criterion.as_str()).collect();
    match &decision.operator_override {
        None => failed.is_empty(),
        Some(o) => o.action == OperatorAction::Approve && failed.iter().all(|c| *c == "explanation_report"),
    }
}

impl XAppIndex {
    pub fn open(store: &ArtifactStore) -> Result<Self, PipelineError> {
        let path = store.root().join("xapps").join("index.json");
        let packages = match std::fs::read(&path) {
            Ok(bytes) => {
                serde_json::from_slice::<IndexDoc>(&bytes).map_err(|e| PipelineError::CorruptIndex(e.to_string()))?.packages
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(crate::store::StoreError::Io(e).into()),
        };
        Ok(XAppIndex { path, packages })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn packages(&self) -> &[XAppPackage] {
        &self.packages
    }

    pub fn get(&self, xapp_id: &str) -> Option<&XAppPackage> {
        self.packages.iter().find(|p| p.xapp_id == xapp_id)
    }

    pub fn latest(&self, manifest_id: &str) -> Option<&XAppPackage> {
        self.packages.iter().filter(|p| p.manifest_id == manifest_id).max_by_key(|p| p.version)
    }

    pub fn is_published(&self, package: &XAppPackage) -> bool {
        self.get(&package.xapp_id) == Some(package)
    }

    fn save(&self) -> Result<(), PipelineError> {
        let dir = self.path.parent().expect("index lives in a directory");
        std::fs::create_dir_all(dir).map_err(crate::store::StoreError::Io)?;
        let tmp = dir.join(format!(".index-{}.tmp", std::process::id()));
        let doc = IndexDoc { packages: self.packages.clone() };
        std::fs::write(&tmp, serde_json::to_vec_pretty(&doc).expect("plain struct serializes"))
            .and_then(|_| std::fs::rename(&tmp, &self.path))
            .map_err(crate::store::StoreError::Io)?;
        Ok(())
    }

    /// Packages a run whose gate said Publish. The decision must be the one
    /// the run stored, and every referenced artifact must resolve.
    pub fn publish(
        &mut self,
        store: &ArtifactStore,
        manifest_id: &str,
        decision: &GateDecision,
        artifacts: &MlopsArtifacts,
    ) -> Result<XAppPackage, PipelineError> {
        if decision.verdict != Verdict::Publish {
            return Err(PipelineError::NotApproved(decision.verdict));
        }
        if !consistent(decision) {
            return Err(PipelineError::InconsistentDecision);
        }
        let decision_uri = artifacts.decision.ok_or(PipelineError::MissingArtifact("decision"))?;
        let stored: GateDecision = serde_json::from_slice(&store.get(&decision_uri)?)
            .map_err(|_| PipelineError::DecisionMismatch(decision_uri))?;
        if &stored != decision {
            return Err(PipelineError::DecisionMismatch(decision_uri));
        }
        let model_uri = artifacts.model.ok_or(PipelineError::MissingArtifact("model"))?;
        let verification_uri = artifacts.verification.ok_or(PipelineError::MissingArtifact("verification"))?;
        let (_, normalizer, _) = load_model(&store.get(&model_uri)?)?;

        let version = self.latest(manifest_id).map_or(1, |p| p.version + 1);
        let package = XAppPackage {
            xapp_id: format!("{manifest_id}@{version}"),
            manifest_id: manifest_id.to_string(),
            version,
            model_uri,
            normalizer,
            verification_uri,
            explanation_uri: artifacts.explanation,
            background_uri: artifacts.background,
            decision_uri,
        };
        for uri in package.artifact_uris() {
            store.get(&uri)?;
        }
        self.packages.push(package.clone());
        self.save()?;
        Ok(package)
    }
}

/// Classifies one raw feature vector with a published xApp. With `explain`,
/// attaches a permutation Shapley report of the predicted-class logit,
/// seeded from the input so that repeated calls agree.
pub fn online_infer(
    index: &XAppIndex,
    store: &ArtifactStore,
    xapp: &XAppPackage,
    x: &[f64],
    explain: bool,
) -> Result<InferenceOutput, PipelineError> {
    if !index.is_published(xapp) {
        return Err(PipelineError::UnpublishedXApp(xapp.xapp_id.clone()));
    }
    let (model, _, _) = load_model(&store.get(&xapp.model_uri)?)?;
    let expected = xapp.normalizer.dim();
    if x.len() != expected {
        return Err(PipelineError::DimensionMismatch { expected, found: x.len() });
    }
    let xn = xapp.normalizer.apply(x);
    let logits = model.forward(&xn)?;
    let class_index = argmax(&logits);
    let explanation = if explain {
        let bg_uri = xapp.background_uri.ok_or(PipelineError::MissingArtifact("background"))?;
        let background: Background = serde_json::from_slice(&store.get(&bg_uri)?)
            .map_err(|e| PipelineError::CorruptIndex(format!("background {bg_uri}: {e}")))?;
        let target = ClassLogit { model: &model, class: class_index };
        Some(shapley_permutation(&target, &xn, &background, ONLINE_PERMUTATIONS, seed_from_features(x))?)
    } else {
        None
    };
    Ok(InferenceOutput { xapp_id: xapp.xapp_id.clone(), label: class_index as u8 + 1, class_index, logits, explanation })
}
