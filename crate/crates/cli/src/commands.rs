use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;
use xapp_core::aiplane::{AiPlane, AiPlaneError, PipelineManifest, PipelineRegistry, PoolConfig, Preconditions, ResourcePool};
use xapp_core::clock::Clock;
use xapp_core::dataset::{Dataset, DatasetError};
use xapp_core::explain::{importance_ranking, Background, ExplainError, RankingConfig};
use xapp_core::matsim::{reference_scenarios, run_pooled, run_simulation, SimConfig, SimError};
use xapp_core::model::{evaluate, load_model, save_model, split_dataset, train, MlpModel, ModelError, ModelMetadata, Normalizer, TrainConfig};
use xapp_core::pipeline::{
    online_infer, run_mlops, DataSource, FixedOperator, GateDecision, MlopsRequest, OperatorAction, OperatorChannel,
    OperatorOverride, PipelineError, TrustCriteria, Verdict, XAppIndex,
};
use xapp_core::store::{ArtifactStore, ArtifactUri, MetricsRecord, StoreError, URI_SCHEME};
use xapp_core::verify::{separation_metric, BoundMethod, PerturbationSpec, VerifyError};

use crate::{Cli, Command, ExplainArgs, InferArgs, PipelineCommand, PipelineRunArgs, PlaneCommand, SimulateArgs, TrainArgs, VerifyArgs};

/// Pipeline used by `pipeline run` when nothing else is registered under that id.
pub const DEFAULT_MANIFEST: &str = "traffic-classifier";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{flag}: {message}")]
    Usage { flag: &'static str, message: String },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage { .. } => 2,
            CliError::Domain(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage { .. } => "usage",
            CliError::Domain(_) => "domain",
        }
    }
}

macro_rules! domain_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Domain(e.to_string())
            }
        })*
    };
}

domain_errors!(PipelineError, AiPlaneError, ModelError, VerifyError, ExplainError, StoreError, SimError, DatasetError);

type Result<T> = std::result::Result<T, CliError>;

fn usage(flag: &'static str, message: impl std::fmt::Display) -> CliError {
    CliError::Usage { flag, message: message.to_string() }
}

fn read(path: &Path, flag: &'static str) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| usage(flag, format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path, flag: &'static str) -> Result<String> {
    String::from_utf8(read(path, flag)?).map_err(|_| usage(flag, format!("{} is not UTF-8", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Domain(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Domain(format!("cannot write {}: {e}", path.display())))
}

fn read_dataset(path: &Path, flag: &'static str) -> Result<Dataset> {
    Ok(Dataset::read_csv(read(path, flag)?.as_slice())?)
}

fn json_file<T: serde::de::DeserializeOwned>(path: &Path, flag: &'static str) -> Result<T> {
    serde_json::from_slice(&read(path, flag)?).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn clock(cli: &Cli) -> Clock {
    if cli.fixed_ts {
        Clock::logical(0)
    } else {
        Clock::system()
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// `artifact://…` resolves through the store; anything else is a file path.
fn load_model_ref(store: &ArtifactStore, reference: &str) -> Result<(MlpModel, Normalizer, Option<ArtifactUri>)> {
    let (bytes, uri) = if reference.starts_with(URI_SCHEME) {
        let uri = ArtifactUri::parse(reference).map_err(|e| usage("--model", e))?;
        (store.get(&uri)?, Some(uri))
    } else {
        (read(Path::new(reference), "--model")?, None)
    };
    let (model, norm, _) = load_model(&bytes)?;
    Ok((model, norm, uri))
}

pub fn run(cli: &Cli) -> Result<Value> {
    let store = ArtifactStore::open(&cli.store)?;
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train_cmd(cli, &store, a),
        Command::Verify(a) => verify(&store, a),
        Command::Explain(a) => explain(&store, a),
        Command::Plane(p) => plane(cli, &store, p),
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline_run(cli, &store, a),
        Command::Infer(a) => infer(&store, a),
    }
}

fn simulate(a: &SimulateArgs) -> Result<Value> {
    let (ds, scenarios) = match &a.config {
        Some(path) => {
            let cfg = SimConfig::from_json(&read_text(path, "--config")?)?;
            (run_simulation(&cfg)?, 1)
        }
        None => {
            let grid = reference_scenarios(a.steps, a.seed);
            (run_pooled(&grid)?, grid.len())
        }
    };
    let bytes = ds.to_csv_bytes();
    write(&a.out, &bytes)?;
    Ok(json!({
        "out": path_str(&a.out),
        "scenarios": scenarios,
        "rows": ds.len(),
        "class_counts": ds.class_counts(),
        "dataset_hash": ds.content_hash(),
    }))
}

fn train_cmd(cli: &Cli, store: &ArtifactStore, a: &TrainArgs) -> Result<Value> {
    let ds = read_dataset(&a.data, "--data")?;
    let cfg: TrainConfig = match &a.config {
        Some(p) => json_file(p, "--config")?,
        None => TrainConfig::default(),
    };
    cfg.validate()?;
    let out = train(&ds, &cfg)?;
    let split = split_dataset(&ds, &cfg);
    let test_accuracy = evaluate(&out.model, &out.normalizer, &split.test)?;
    let meta = ModelMetadata { seed: cfg.seed, train_config: Some(cfg.clone()), dataset_hash: Some(ds.content_hash()) };
    let doc = save_model(&out.model, &out.normalizer, meta);
    let uri = store.put(&doc)?;

    let files = [
        ("model", a.out_dir.join("model.json"), doc),
        ("history", a.out_dir.join("history.jsonl"), out.history.to_jsonl().into_bytes()),
        ("train", a.out_dir.join("train.csv"), split.train.to_csv_bytes()),
        ("validation", a.out_dir.join("validation.csv"), split.validation.to_csv_bytes()),
        ("test", a.out_dir.join("test.csv"), split.test.to_csv_bytes()),
    ];
    let mut written = serde_json::Map::new();
    for (name, path, bytes) in &files {
        write(path, bytes)?;
        written.insert(name.to_string(), json!(path_str(path)));
    }

    let clock = clock(cli);
    let run_id = format!("train-{}", &uri.digest_hex()[..16]);
    for e in &out.history.epochs {
        store.log_metric(&MetricsRecord { ts: clock.now_ms(), run_id: run_id.clone(), key: "train.loss".into(), value: e.loss })?;
    }
    store.log_metric(&MetricsRecord { ts: clock.now_ms(), run_id: run_id.clone(), key: "test.accuracy".into(), value: test_accuracy })?;

    let last = out.history.epochs.last().expect("at least one epoch");
    Ok(json!({
        "model_uri": uri,
        "run_id": run_id,
        "dataset_hash": ds.content_hash(),
        "rows": { "train": split.train.len(), "validation": split.validation.len(), "test": split.test.len() },
        "epochs": cfg.epochs,
        "final_loss": last.loss,
        "val_accuracy": last.val_accuracy,
        "test_accuracy": test_accuracy,
        "files": written,
    }))
}

fn verify(store: &ArtifactStore, a: &VerifyArgs) -> Result<Value> {
    let spec = PerturbationSpec::new(a.epsilon).map_err(|e| usage("--epsilon", e))?;
    let method: BoundMethod = a.method.parse().map_err(|e| usage("--method", e))?;
    let (model, norm, _) = load_model_ref(store, &a.model)?;
    let test = read_dataset(&a.data, "--data")?;
    let report = separation_metric(&model, &norm, &test, spec, method)?;
    if let Some(out) = &a.out {
        write(out, &serde_json::to_vec_pretty(&report).expect("report serializes"))?;
    }
    if let Some(plot) = &a.plot_data {
        write(plot, report.plot_csv().as_bytes())?;
    }
    Ok(json!({
        "model": a.model,
        "epsilon": report.epsilon,
        "method": report.method,
        "n_test": report.n_test,
        "n_correct": report.n_correct,
        "n_separated": report.n_separated,
        "fraction": report.fraction,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "out": a.out.as_deref().map(path_str),
        "plot_data": a.plot_data.as_deref().map(path_str),
    }))
}

fn explain(store: &ArtifactStore, a: &ExplainArgs) -> Result<Value> {
    if a.max_samples == 0 {
        return Err(usage("--max-samples", "must be at least 1"));
    }
    let (model, norm, _) = load_model_ref(store, &a.model)?;
    let data = read_dataset(&a.data, "--data")?;
    let bg_rows = match &a.background {
        Some(p) => read_dataset(p, "--background")?,
        None => data.clone(),
    };
    let background = Background::sample(&norm.apply_dataset(&bg_rows), a.background_size, a.seed)?;
    let cfg = RankingConfig { n_permutations: a.permutations, seed: a.seed, max_samples: Some(a.max_samples) };
    let ranking = importance_ranking(&model, &norm, &data, &background, &cfg)?;
    if let Some(out) = &a.out {
        write(out, ranking.to_csv().as_bytes())?;
    }
    Ok(json!({
        "model": a.model,
        "n_samples": ranking.n_samples,
        "n_permutations": ranking.n_permutations,
        "ranking": ranking.entries,
        "out": a.out.as_deref().map(path_str),
    }))
}

fn plane_state_path(store: &ArtifactStore) -> PathBuf {
    store.root().join("plane").join("state.json")
}

fn load_plane(cli: &Cli, store: &ArtifactStore, pool: Option<&Path>) -> Result<AiPlane> {
    let path = plane_state_path(store);
    if path.exists() {
        let mut plane: AiPlane = json_file(&path, "--store")?;
        plane.set_clock(clock(cli));
        return Ok(plane);
    }
    let pool = match pool {
        Some(p) => ResourcePool::from_config(&PoolConfig::from_json(&read_text(p, "--pool")?)?),
        None => return Err(usage("--pool", "required when no plane state exists yet")),
    };
    Ok(AiPlane::new(pool, clock(cli)))
}

fn save_plane(store: &ArtifactStore, plane: &AiPlane) -> Result<()> {
    write(&plane_state_path(store), &serde_json::to_vec_pretty(plane).expect("plane serializes"))
}

fn plane(cli: &Cli, store: &ArtifactStore, cmd: &PlaneCommand) -> Result<Value> {
    match cmd {
        PlaneCommand::Register { manifest, pool } => {
            let mut plane = load_plane(cli, store, pool.as_deref())?;
            let m = PipelineManifest::from_json(&read_text(manifest, "--manifest")?)?;
            let id = plane.register_pipeline(m)?;
            save_plane(store, &plane)?;
            Ok(json!({ "registered": id, "pipelines": plane.registry.ids().collect::<Vec<_>>() }))
        }
        PlaneCommand::Deploy { manifest, pool } => {
            let mut plane = load_plane(cli, store, pool.as_deref())?;
            let path = Path::new(manifest);
            let id = if path.is_file() {
                plane.register_pipeline(PipelineManifest::from_json(&read_text(path, "--manifest")?)?)?
            } else {
                manifest.clone()
            };
            let outcome = plane.deploy(&id);
            save_plane(store, &plane)?;
            Ok(json!({
                "deployment_id": outcome.deployment_id,
                "state": outcome.state,
                "trace": outcome.trace(),
                "events": outcome.events,
                "available": plane.pool.available(),
            }))
        }
        PlaneCommand::Status { deployment } => {
            let plane = load_plane(cli, store, None)?;
            match deployment {
                Some(id) => Ok(json!({
                    "deployment": plane.deployment(id)?,
                    "reservation": plane.pool.reservation(id),
                    "events": plane.events_for(id),
                })),
                None => Ok(json!({
                    "pipelines": plane.registry.ids().collect::<Vec<_>>(),
                    "deployments": plane.deployments,
                    "capacity": plane.pool.capacity(),
                    "available": plane.pool.available(),
                })),
            }
        }
        PlaneCommand::Release { deployment } => {
            let mut plane = load_plane(cli, store, None)?;
            let released = plane.release(deployment)?;
            save_plane(store, &plane)?;
            Ok(json!({ "deployment_id": deployment, "released": released, "available": plane.pool.available() }))
        }
    }
}

/// Blocking approve/reject prompt on the terminal.
struct PromptOperator {
    operator_id: String,
}

impl OperatorChannel for PromptOperator {
    fn decide(&mut self, pending: &GateDecision) -> OperatorOverride {
        let mut err = std::io::stderr();
        for r in &pending.reasons {
            let _ = writeln!(err, "  {}: {}", r.criterion, if r.passed { "pass" } else { "FAIL" });
        }
        let _ = write!(err, "publish? [y/N] ");
        let _ = err.flush();
        let mut line = String::new();
        let _ = std::io::stdin().lock().read_line(&mut line);
        let action = match line.trim().to_ascii_lowercase().as_str() {
            "y" | "yes" => OperatorAction::Approve,
            _ => OperatorAction::Reject,
        };
        OperatorOverride { action, operator_id: self.operator_id.clone() }
    }
}

fn pipeline_registry(cli: &Cli, store: &ArtifactStore, manifest: &str) -> Result<(PipelineRegistry, String)> {
    let mut registry = if plane_state_path(store).exists() {
        load_plane(cli, store, None)?.registry
    } else {
        PipelineRegistry::default()
    };
    let path = Path::new(manifest);
    if path.is_file() {
        let id = registry.register(PipelineManifest::from_json(&read_text(path, "--manifest")?)?)?;
        return Ok((registry, id));
    }
    if manifest == DEFAULT_MANIFEST && registry.get(manifest).is_err() {
        registry.register(PipelineManifest::linear(DEFAULT_MANIFEST, Preconditions::default()))?;
    }
    Ok((registry, manifest.to_string()))
}

fn pipeline_run(cli: &Cli, store: &ArtifactStore, a: &PipelineRunArgs) -> Result<Value> {
    let (registry, manifest_id) = pipeline_registry(cli, store, &a.manifest)?;
    let source = match &a.data {
        Some(p) => DataSource::Dataset(read_dataset(p, "--data")?),
        None => DataSource::Simulate(reference_scenarios(a.steps, a.seed)),
    };
    let mut req = MlopsRequest::new(manifest_id.clone(), source);
    if let Some(p) = &a.criteria {
        req.criteria = TrustCriteria::from_json(&read_text(p, "--criteria")?).map_err(|e| usage("--criteria", e))?;
    }
    if let Some(p) = &a.train_config {
        req.train = json_file(p, "--train-config")?;
    }
    req.ranking.n_permutations = a.permutations;
    req.explain = !a.no_explain;

    let mut operator: Box<dyn OperatorChannel> = if a.auto_approve {
        Box::new(FixedOperator::approve(&a.operator_id))
    } else {
        Box::new(PromptOperator { operator_id: a.operator_id.clone() })
    };
    let out = run_mlops(store, &registry, &req, operator.as_mut(), &clock(cli))?;
    let package = if out.decision.verdict == Verdict::Publish {
        let mut index = XAppIndex::open(store)?;
        Some(index.publish(store, &manifest_id, &out.decision, &out.artifacts)?)
    } else {
        None
    };
    Ok(json!({
        "run_id": out.run_id,
        "manifest_id": out.manifest_id,
        "dataset_hash": out.dataset_hash,
        "verdict": out.decision.verdict,
        "decision": out.decision,
        "measurements": out.measurements,
        "artifacts": out.artifacts,
        "stage_log": out.stage_log,
        "xapp_id": package.as_ref().map(|p| p.xapp_id.clone()),
        "package": package,
    }))
}

fn parse_input(text: &str) -> Result<Vec<f64>> {
    let v: Value = serde_json::from_str(text).map_err(|e| usage("--input", e))?;
    let arr = match &v {
        Value::Array(a) => a,
        Value::Object(o) => o.get("features").and_then(Value::as_array).ok_or_else(|| usage("--input", "object has no `features` array"))?,
        _ => return Err(usage("--input", "expected an array of numbers")),
    };
    arr.iter().map(|x| x.as_f64().ok_or_else(|| usage("--input", format!("{x} is not a number")))).collect()
}

fn infer(store: &ArtifactStore, a: &InferArgs) -> Result<Value> {
    let index = XAppIndex::open(store)?;
    let pkg = index
        .get(&a.xapp)
        .or_else(|| index.latest(&a.xapp))
        .ok_or_else(|| CliError::from(PipelineError::UnpublishedXApp(a.xapp.clone())))?;
    let x = parse_input(&read_text(&a.input, "--input")?)?;
    let out = online_infer(&index, store, pkg, &x, a.explain)?;
    Ok(serde_json::to_value(out).expect("inference output serializes"))
}
