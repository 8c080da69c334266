//! MLOps run: ingest → validate → train → analyze (certified bounds and
//! attribution) → execute → monitor, then the publish gate, xApp packaging
//! and online inference with an attached explanation.
//!
//! Every stage output is written to the [`ArtifactStore`](crate::store::ArtifactStore)
//! and later stages read their inputs back from it, so a run can be replayed
//! from the stored dataset alone.

mod gate;
mod run;
mod xapp;

pub use gate::{
    evaluate_gate, CriterionResult, FixedOperator, GateDecision, OperatorAction, OperatorChannel, OperatorOverride,
    TrustCriteria, TrustMeasurements, Verdict,
};
pub use run::{
    run_mlops, stage_log_to_jsonl, DataSource, MlopsArtifacts, MlopsOutcome, MlopsRequest, StageRecord, StageStatus,
    DEFAULT_BACKGROUND_ROWS,
};
pub use xapp::{online_infer, InferenceOutput, XAppIndex, XAppPackage, ONLINE_PERMUTATIONS};

use thiserror::Error;

use crate::store::{ArtifactUri, StoreError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid trust criteria: {0}")]
    InvalidCriteria(String),
    #[error(transparent)]
    AiPlane(#[from] crate::aiplane::AiPlaneError),
    #[error("stage {stage} failed: {message}")]
    Stage {
        stage: String,
        message: String,
        /// Records of the stages that ran, ending with the failed one.
        stage_log: Vec<StageRecord>,
    },
    #[error("gate verdict is {0:?}; only Publish decisions can be packaged")]
    NotApproved(Verdict),
    #[error("gate decision is inconsistent with its criteria")]
    InconsistentDecision,
    #[error("decision does not match the stored decision {0}")]
    DecisionMismatch(ArtifactUri),
    #[error("run produced no {0} artifact")]
    MissingArtifact(&'static str),
    #[error("xApp {0:?} is not published")]
    UnpublishedXApp(String),
    #[error("dimension mismatch: expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("corrupt xApp index: {0}")]
    CorruptIndex(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Explain(#[from] crate::explain::ExplainError),
}
