use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{evaluate_gate, GateDecision, OperatorChannel, PipelineError, TrustCriteria, TrustMeasurements, Verdict};
use crate::aiplane::{PipelineRegistry, VertexKind};
use crate::clock::Clock;
use crate::dataset::Dataset;
use crate::explain::{importance_ranking, Background, RankingConfig};
use crate::matsim::{run_pooled, SimConfig};
use crate::model::{load_model, predict, save_model, split_dataset, train, ModelMetadata, TrainConfig};
use crate::store::{ArtifactStore, ArtifactUri, MetricsRecord};
use crate::verify::{separation_metric, BoundMethod};

/// Normalized training rows used as the attribution background.
pub const DEFAULT_BACKGROUND_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Simulate(Vec<SimConfig>),
    Dataset(Dataset),
    /// A dataset CSV already in the store.
    Artifact(ArtifactUri),
}

#[derive(Debug, Clone)]
pub struct MlopsRequest {
    pub manifest_id: String,
    pub source: DataSource,
    pub train: TrainConfig,
    pub criteria: TrustCriteria,
    pub ranking: RankingConfig,
    pub background_rows: usize,
    /// Computes the attribution ranking during model analysis.
    pub explain: bool,
}

impl MlopsRequest {
    pub fn new(manifest_id: impl Into<String>, source: DataSource) -> Self {
        MlopsRequest {
            manifest_id: manifest_id.into(),
            source,
            train: TrainConfig::default(),
            criteria: TrustCriteria::default(),
            ranking: RankingConfig::default(),
            background_rows: DEFAULT_BACKGROUND_ROWS,
            explain: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub ts: u64,
    pub stage: String,
    pub status: StageStatus,
    pub artifact_uri: Option<ArtifactUri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

pub fn stage_log_to_jsonl(records: &[StageRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlopsArtifacts {
    pub dataset: Option<ArtifactUri>,
    pub train_split: Option<ArtifactUri>,
    pub test_split: Option<ArtifactUri>,
    pub model: Option<ArtifactUri>,
    pub training_history: Option<ArtifactUri>,
    pub verification: Option<ArtifactUri>,
    pub verification_plot: Option<ArtifactUri>,
    pub explanation: Option<ArtifactUri>,
    pub explanation_csv: Option<ArtifactUri>,
    pub background: Option<ArtifactUri>,
    pub predictions: Option<ArtifactUri>,
    pub monitoring: Option<ArtifactUri>,
    pub decision: Option<ArtifactUri>,
    pub stage_log: Option<ArtifactUri>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlopsOutcome {
    pub run_id: String,
    pub manifest_id: String,
    pub dataset_hash: String,
    pub decision: GateDecision,
    pub measurements: TrustMeasurements,
    pub artifacts: MlopsArtifacts,
    pub stage_log: Vec<StageRecord>,
}

struct Run<'a> {
    store: &'a ArtifactStore,
    clock: &'a Clock,
    req: &'a MlopsRequest,
    run_id: String,
    dataset_hash: String,
    artifacts: MlopsArtifacts,
    measured: TrustMeasurements,
    log: Vec<StageRecord>,
}

type StageResult = Result<Option<ArtifactUri>, String>;

fn msg<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn required(uri: Option<ArtifactUri>, what: &str) -> Result<ArtifactUri, String> {
    uri.ok_or_else(|| format!("no {what} artifact; the stage that produces it has not run"))
}

impl Run<'_> {
    fn put(&self, bytes: &[u8]) -> Result<ArtifactUri, String> {
        self.store.put(bytes).map_err(msg)
    }

    fn put_json<T: Serialize>(&self, value: &T) -> Result<ArtifactUri, String> {
        self.put(&serde_json::to_vec_pretty(value).expect("plain struct serializes"))
    }

    fn load_dataset(&self, uri: ArtifactUri) -> Result<Dataset, String> {
        let bytes = self.store.get(&uri).map_err(msg)?;
        Dataset::read_csv(bytes.as_slice()).map_err(msg)
    }

    fn metric(&self, key: &str, value: f64) -> Result<(), String> {
        self.store
            .log_metric(&MetricsRecord { ts: self.clock.now_ms(), run_id: self.run_id.clone(), key: key.into(), value })
            .map_err(msg)
    }

    fn record(&mut self, stage: &str, result: &StageResult) {
        let (status, artifact_uri, message) = match result {
            Ok(uri) => (StageStatus::Ok, *uri, None),
            Err(m) => (StageStatus::Failed, None, Some(m.clone())),
        };
        self.log.push(StageRecord { ts: self.clock.now_ms(), stage: stage.into(), status, artifact_uri, message });
    }

    fn stage(&mut self, v: VertexKind) -> StageResult {
        match v {
            VertexKind::DataIngestion => Ok(self.artifacts.dataset),
            VertexKind::DataValidation => self.validate(),
            VertexKind::ModelTrain => self.train(),
            VertexKind::ModelAnalysis => self.analyze(),
            VertexKind::ModelExecution => self.execute(),
            VertexKind::Monitoring => self.monitor(),
        }
    }

    fn validate(&mut self) -> StageResult {
        let ds = self.load_dataset(required(self.artifacts.dataset, "dataset")?)?;
        if ds.class_counts().contains(&0) {
            return Err(format!("dataset needs both classes, counts are {:?}", ds.class_counts()));
        }
        let split = split_dataset(&ds, &self.req.train);
        if split.train.is_empty() || split.test.is_empty() {
            return Err(format!("{} rows are too few for a train/test split", ds.len()));
        }
        self.artifacts.train_split = Some(self.put(&split.train.to_csv_bytes())?);
        let test = self.put(&split.test.to_csv_bytes())?;
        self.artifacts.test_split = Some(test);
        self.metric("data.rows", ds.len() as f64)?;
        self.metric("data.test_rows", split.test.len() as f64)?;
        Ok(Some(test))
    }

    fn train(&mut self) -> StageResult {
        let ds = self.load_dataset(required(self.artifacts.dataset, "dataset")?)?;
        let out = train(&ds, &self.req.train).map_err(msg)?;
        let meta = ModelMetadata {
            seed: self.req.train.seed,
            train_config: Some(self.req.train.clone()),
            dataset_hash: Some(self.dataset_hash.clone()),
        };
        let uri = self.put(&save_model(&out.model, &out.normalizer, meta))?;
        self.artifacts.model = Some(uri);
        self.artifacts.training_history = Some(self.put(out.history.to_jsonl().as_bytes())?);
        for e in &out.history.epochs {
            self.metric("train.loss", e.loss)?;
            if let Some(a) = e.val_accuracy {
                self.metric("train.val_accuracy", a)?;
            }
        }
        Ok(Some(uri))
    }

    fn analyze(&mut self) -> StageResult {
        let bytes = self.store.get(&required(self.artifacts.model, "model")?).map_err(msg)?;
        let (model, norm, _) = load_model(&bytes).map_err(msg)?;
        let test = self.load_dataset(required(self.artifacts.test_split, "test split")?)?;
        let train_rows = self.load_dataset(required(self.artifacts.train_split, "train split")?)?;

        let report = separation_metric(&model, &norm, &test, self.req.criteria.perturbation(), BoundMethod::Crown)
            .map_err(msg)?;
        self.artifacts.verification = Some(self.put_json(&report)?);
        self.artifacts.verification_plot = Some(self.put(report.plot_csv().as_bytes())?);
        self.measured.separation_fraction = Some(report.fraction);
        self.metric("trust.separation_fraction", report.fraction)?;
        self.metric("trust.separation_ci_low", report.ci_low)?;
        self.metric("trust.separation_ci_high", report.ci_high)?;

        if !self.req.explain {
            return Ok(self.artifacts.verification);
        }
        let background = Background::sample(&norm.apply_dataset(&train_rows), self.req.background_rows, self.req.ranking.seed)
            .map_err(msg)?;
        self.artifacts.background = Some(self.put_json(&background)?);
        let ranking = importance_ranking(&model, &norm, &test, &background, &self.req.ranking).map_err(msg)?;
        let uri = self.put_json(&ranking)?;
        self.artifacts.explanation = Some(uri);
        self.artifacts.explanation_csv = Some(self.put(ranking.to_csv().as_bytes())?);
        self.measured.explanation_present = true;
        if let Some(top) = ranking.entries.first() {
            self.metric("trust.top_feature_mean_abs_phi", top.mean_abs_phi)?;
        }
        Ok(Some(uri))
    }

    fn execute(&mut self) -> StageResult {
        let bytes = self.store.get(&required(self.artifacts.model, "model")?).map_err(msg)?;
        let (model, norm, _) = load_model(&bytes).map_err(msg)?;
        let test = self.load_dataset(required(self.artifacts.test_split, "test split")?)?;
        let mut csv = String::from("sample_id,label,predicted\n");
        let mut hits = 0usize;
        for row in &test.rows {
            let class = predict(&model, &norm, &row.features).map_err(msg)?;
            hits += usize::from(class == row.class_index());
            csv.push_str(&format!("{},{},{}\n", row.sample_id, row.label, class + 1));
        }
        let accuracy = hits as f64 / test.len() as f64;
        self.measured.accuracy = Some(accuracy);
        self.metric("test.accuracy", accuracy)?;
        let uri = self.put(csv.as_bytes())?;
        self.artifacts.predictions = Some(uri);
        Ok(Some(uri))
    }

    fn monitor(&mut self) -> StageResult {
        let records = self.store.query_metrics(&self.run_id).map_err(msg)?;
        let mut latest: BTreeMap<String, f64> = BTreeMap::new();
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for r in &records {
            latest.insert(r.key.clone(), r.value);
            *counts.entry(r.key.clone()).or_default() += 1;
        }
        let summary = serde_json::json!({
            "run_id": self.run_id,
            "records": records.len(),
            "latest": latest,
            "counts": counts,
        });
        let uri = self.put_json(&summary)?;
        self.artifacts.monitoring = Some(uri);
        Ok(Some(uri))
    }

    fn fail(mut self, stage: &str, message: String) -> PipelineError {
        self.record(stage, &Err(message.clone()));
        if let Ok(uri) = self.put(stage_log_to_jsonl(&self.log).as_bytes()) {
            self.artifacts.stage_log = Some(uri);
        }
        PipelineError::Stage { stage: stage.into(), message, stage_log: self.log }
    }
}

fn ingest(store: &ArtifactStore, source: &DataSource) -> Result<ArtifactUri, String> {
    let bytes = match source {
        DataSource::Simulate(configs) => run_pooled(configs).map_err(msg)?.to_csv_bytes(),
        DataSource::Dataset(ds) => ds.to_csv_bytes(),
        DataSource::Artifact(uri) => store.get(uri).map_err(msg)?,
    };
    let ds = Dataset::read_csv(bytes.as_slice()).map_err(msg)?;
    if ds.is_empty() {
        return Err("dataset has no rows".into());
    }
    // Stored in canonical form so that the address equals the dataset hash.
    store.put(&ds.to_csv_bytes()).map_err(msg)
}

fn run_key(req: &MlopsRequest, dataset_hash: &str) -> String {
    let key = serde_json::json!({
        "manifest": req.manifest_id,
        "dataset": dataset_hash,
        "train": req.train,
        "criteria": req.criteria,
        "ranking": req.ranking,
        "background_rows": req.background_rows,
        "explain": req.explain,
    });
    hex::encode(&Sha256::digest(key.to_string().as_bytes())[..8])
}

/// A replay into the same store must not mix its metrics into the earlier run's log.
fn fresh_run_id(store: &ArtifactStore, base: &str) -> Result<String, crate::store::StoreError> {
    let mut id = base.to_string();
    let mut n = 1;
    while !store.query_metrics(&id)?.is_empty() {
        n += 1;
        id = format!("{base}-{n}");
    }
    Ok(id)
}

/// Runs the manifest's stages in order, then the gate. A pending gate
/// decision (everything numeric passed but a required explanation report is
/// missing) is settled by `operator`.
pub fn run_mlops(
    store: &ArtifactStore,
    registry: &PipelineRegistry,
    request: &MlopsRequest,
    operator: &mut dyn OperatorChannel,
    clock: &Clock,
) -> Result<MlopsOutcome, PipelineError> {
    request.criteria.validate()?;
    request.train.validate()?;
    let manifest = registry.get(&request.manifest_id)?;
    let order = manifest.execution_order();
    let start = clock.now_ms();

    let mut run = Run {
        store,
        clock,
        req: request,
        run_id: format!("run-{start}"),
        dataset_hash: String::new(),
        artifacts: MlopsArtifacts::default(),
        measured: TrustMeasurements::default(),
        log: Vec::new(),
    };
    // Ingestion feeds everything else, so the data arrives first even when the
    // manifest leaves the vertex out; its stage record appears in manifest order.
    match ingest(store, &request.source) {
        Ok(uri) => {
            run.dataset_hash = uri.digest_hex();
            let base = format!("run-{}-{start}", run_key(request, &run.dataset_hash));
            run.run_id = fresh_run_id(store, &base).map_err(PipelineError::Store)?;
            run.artifacts.dataset = Some(uri);
        }
        Err(m) => return Err(run.fail(VertexKind::DataIngestion.as_str(), m)),
    }

    for v in order {
        let result = run.stage(v);
        match result {
            Ok(_) => run.record(v.as_str(), &result),
            Err(m) => return Err(run.fail(v.as_str(), m)),
        }
    }

    let mut decision = evaluate_gate(&request.criteria, &run.measured);
    if decision.verdict == Verdict::AwaitOperator {
        let answer = operator.decide(&decision);
        decision = decision.resolve(answer);
    }
    let gate = run.put_json(&decision).map_err(|m| PipelineError::Stage {
        stage: "gate".into(),
        message: m,
        stage_log: run.log.clone(),
    })?;
    run.artifacts.decision = Some(gate);
    run.record("gate", &Ok(Some(gate)));
    run.artifacts.stage_log = Some(store.put(stage_log_to_jsonl(&run.log).as_bytes())?);

    Ok(MlopsOutcome {
        run_id: run.run_id,
        manifest_id: request.manifest_id.clone(),
        dataset_hash: run.dataset_hash,
        decision,
        measurements: run.measured,
        artifacts: run.artifacts,
        stage_log: run.log,
    })
}
