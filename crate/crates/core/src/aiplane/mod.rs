//! Deployment protocol across the orchestration (AIO), cognition (COG) and
//! monitoring (AIM) planes.
//!
//! A deployment request looks the pipeline up in the registry, checks its
//! preconditions against the resource pool and then either stops (unknown
//! pipeline, or a COG risk assessment when resources are short) or walks
//! KPM subscription, provisioning, deployment and probe activation to
//! `Running`. Every transition lands in an ordered event log.

mod deploy;
mod manifest;
mod probes;
mod resources;
mod service;

pub use deploy::{
    can_transition, events_to_jsonl, AiPlane, Deployment, DeploymentEvent, DeploymentOutcome, DeploymentState,
    KpmSubscription, DEFAULT_KPM_PERIOD_MS,
};
pub use manifest::{validate_pipeline_task, PipelineManifest, PipelineRegistry, VertexKind};
pub use probes::{collect_probe_metrics, inference_flops, ProbeRecord, ProbeSample, ProbeTarget, CPU_CORE_FLOPS};
pub use resources::{
    are_preconditions_met, cog_evaluate_risk, PoolConfig, Preconditions, ResourcePool, Resources,
    RiskAssessment, RiskVerdict, DEFAULT_RISK_THRESHOLD, RESOURCE_NAMES,
};
pub use service::{PlaneHandle, PlaneService};

use thiserror::Error;

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum AiPlaneError {
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("unknown pipeline {0:?}")]
    UnknownPipeline(String),
    #[error("vertex {0:?} is not part of the pipeline")]
    UnknownVertex(VertexKind),
    #[error("insufficient resources: need {required:?}, available {available:?}")]
    InsufficientResources { required: Resources, available: Resources },
    #[error("unknown deployment {0:?}")]
    UnknownDeployment(String),
    #[error("deployment {0:?} already holds or held a reservation")]
    DuplicateDeployment(String),
    #[error("deployment {deployment_id} in state {state} holds no resources")]
    NotReleasable { deployment_id: String, state: String },
    #[error("deployment {deployment_id} is {state}; probes are not active")]
    NotRunning { deployment_id: String, state: String },
    #[error("invalid probe window: {0}")]
    InvalidWindow(String),
    #[error("invalid pool config: {0}")]
    InvalidPoolConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
