use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    are_preconditions_met, cog_evaluate_risk, AiPlaneError, PipelineManifest, PipelineRegistry, ResourcePool,
    RiskAssessment, RiskVerdict, DEFAULT_RISK_THRESHOLD,
};
use crate::clock::Clock;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum DeploymentState {
    Requested,
    NotFound,
    PreconditionsChecked,
    RiskEvaluated { assessment: RiskAssessment },
    KPMSubscribed,
    Provisioned,
    Deployed,
    ProbesActive,
    Running,
    Released,
}

impl DeploymentState {
    pub fn name(&self) -> &'static str {
        match self {
            DeploymentState::Requested => "Requested",
            DeploymentState::NotFound => "NotFound",
            DeploymentState::PreconditionsChecked => "PreconditionsChecked",
            DeploymentState::RiskEvaluated { .. } => "RiskEvaluated",
            DeploymentState::KPMSubscribed => "KPMSubscribed",
            DeploymentState::Provisioned => "Provisioned",
            DeploymentState::Deployed => "Deployed",
            DeploymentState::ProbesActive => "ProbesActive",
            DeploymentState::Running => "Running",
            DeploymentState::Released => "Released",
        }
    }

    pub fn holds_resources(&self) -> bool {
        matches!(
            self,
            DeploymentState::Provisioned | DeploymentState::Deployed | DeploymentState::ProbesActive | DeploymentState::Running
        )
    }

    pub fn probes_active(&self) -> bool {
        matches!(self, DeploymentState::ProbesActive | DeploymentState::Running)
    }
}

/// The allowed transitions; `None` is the state before the request.
pub fn can_transition(from: Option<&DeploymentState>, to: &DeploymentState) -> bool {
    use DeploymentState::*;
    match (from, to) {
        (None, Requested) => true,
        (Some(Requested), NotFound | PreconditionsChecked) => true,
        (Some(PreconditionsChecked), RiskEvaluated { .. } | KPMSubscribed) => true,
        (Some(KPMSubscribed), Provisioned) => true,
        (Some(Provisioned), Deployed) => true,
        (Some(Deployed), ProbesActive) => true,
        (Some(ProbesActive), Running) => true,
        (Some(s), Released) => s.holds_resources(),
        _ => false,
    }
}

/// One line of the deployment event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentEvent {
    pub ts: u64,
    pub deployment_id: String,
    pub from: Option<String>,
    pub to: String,
    pub detail: String,
}

pub fn events_to_jsonl(events: &[DeploymentEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("plain event serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpmSubscription {
    pub metrics: Vec<String>,
    pub period_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deployment {
    pub id: String,
    pub pipeline_id: String,
    pub state: DeploymentState,
    pub subscription: Option<KpmSubscription>,
}

/// Result of one `deploy` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentOutcome {
    pub deployment_id: String,
    pub state: DeploymentState,
    pub events: Vec<DeploymentEvent>,
}

impl DeploymentOutcome {
    /// The `to` state of every event, in order.
    pub fn trace(&self) -> Vec<&str> {
        self.events.iter().map(|e| e.to.as_str()).collect()
    }
}

/// Registry, resource pool and deployments owned together, so that every
/// command sees and leaves a consistent state.
#[derive(Debug, Serialize, Deserialize)]
pub struct AiPlane {
    pub registry: PipelineRegistry,
    pub pool: ResourcePool,
    pub deployments: BTreeMap<String, Deployment>,
    pub events: Vec<DeploymentEvent>,
    pub risk_threshold: f64,
    pub kpm_period_ms: u64,
    next_deployment: u64,
    #[serde(skip)]
    clock: Clock,
}

pub const DEFAULT_KPM_PERIOD_MS: u64 = 1_000;

impl AiPlane {
    pub fn new(pool: ResourcePool, clock: Clock) -> Self {
        AiPlane {
            registry: PipelineRegistry::default(),
            pool,
            deployments: BTreeMap::new(),
            events: Vec::new(),
            risk_threshold: DEFAULT_RISK_THRESHOLD,
            kpm_period_ms: DEFAULT_KPM_PERIOD_MS,
            next_deployment: 0,
            clock,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.risk_threshold = threshold;
        self
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn register_pipeline(&mut self, manifest: PipelineManifest) -> Result<String, AiPlaneError> {
        self.registry.register(manifest)
    }

    pub fn get_pipeline(&self, id: &str) -> Result<&PipelineManifest, AiPlaneError> {
        self.registry.get(id)
    }

    pub fn deployment(&self, id: &str) -> Result<&Deployment, AiPlaneError> {
        self.deployments.get(id).ok_or_else(|| AiPlaneError::UnknownDeployment(id.to_string()))
    }

    fn now(&self) -> u64 {
        let t = self.clock.now_ms();
        self.events.last().map_or(t, |e| t.max(e.ts))
    }

    fn record(&mut self, dep_id: &str, from: Option<&DeploymentState>, to: &DeploymentState, detail: String) -> DeploymentEvent {
        assert!(can_transition(from, to), "illegal transition {:?} -> {}", from.map(|s| s.name()), to.name());
        let event = DeploymentEvent {
            ts: self.now(),
            deployment_id: dep_id.to_string(),
            from: from.map(|s| s.name().to_string()),
            to: to.name().to_string(),
            detail,
        };
        self.events.push(event.clone());
        event
    }

    fn request(&mut self, dep_id: &str, pipeline_id: &str) -> DeploymentEvent {
        let event = self.record(dep_id, None, &DeploymentState::Requested, format!("deployPipeline({pipeline_id})"));
        let dep = Deployment {
            id: dep_id.to_string(),
            pipeline_id: pipeline_id.to_string(),
            state: DeploymentState::Requested,
            subscription: None,
        };
        self.deployments.insert(dep_id.to_string(), dep);
        event
    }

    fn transition(&mut self, dep_id: &str, to: DeploymentState, detail: String) -> DeploymentEvent {
        let from = self.deployments[dep_id].state.clone();
        let event = self.record(dep_id, Some(&from), &to, detail);
        self.deployments.get_mut(dep_id).expect("deployment exists").state = to;
        event
    }

    /// Runs the deployment protocol for `pipeline_id` to its first stable
    /// state: NotFound, RiskEvaluated or Running.
    pub fn deploy(&mut self, pipeline_id: &str) -> DeploymentOutcome {
        let dep_id = format!("dep-{:04}", self.next_deployment);
        self.next_deployment += 1;
        let mut events = vec![self.request(&dep_id, pipeline_id)];

        let manifest = match self.registry.get(pipeline_id) {
            Ok(m) => m.clone(),
            Err(_) => {
                events.push(self.transition(
                    &dep_id,
                    DeploymentState::NotFound,
                    format!("conflict: pipeline {pipeline_id} not found in registry"),
                ));
                return self.outcome(dep_id, events);
            }
        };

        let met = are_preconditions_met(&manifest.preconditions, &self.pool);
        events.push(self.transition(&dep_id, DeploymentState::PreconditionsChecked, format!("preconditions met: {met}")));
        if !met {
            let assessment = cog_evaluate_risk(&manifest.preconditions, &self.pool, self.risk_threshold);
            let advice = match assessment.verdict {
                RiskVerdict::Abort => "abort",
                RiskVerdict::ProceedWithWarning => "proceed with warning; awaiting operator",
            };
            let detail = format!("max deficit {:.6}, threshold {}: {advice}", assessment.max_deficit(), assessment.threshold);
            events.push(self.transition(&dep_id, DeploymentState::RiskEvaluated { assessment }, detail));
            return self.outcome(dep_id, events);
        }

        let subscription = KpmSubscription { metrics: manifest.kpm_metrics.clone(), period_ms: self.kpm_period_ms };
        let detail = format!("subscribeKPM([{}], period {} ms)", subscription.metrics.join(","), subscription.period_ms);
        self.deployments.get_mut(&dep_id).expect("inserted").subscription = Some(subscription);
        events.push(self.transition(&dep_id, DeploymentState::KPMSubscribed, detail));

        self.pool
            .provision(&manifest.preconditions, &dep_id)
            .expect("preconditions were checked against this pool in the same command");
        events.push(self.transition(&dep_id, DeploymentState::Provisioned, "provisionResources()".into()));
        events.push(self.transition(&dep_id, DeploymentState::Deployed, format!("{} vertices", manifest.vertices.len())));
        events.push(self.transition(&dep_id, DeploymentState::ProbesActive, "AIM probes activated".into()));
        events.push(self.transition(&dep_id, DeploymentState::Running, "runPipeline()".into()));
        self.outcome(dep_id, events)
    }

    fn outcome(&self, deployment_id: String, events: Vec<DeploymentEvent>) -> DeploymentOutcome {
        let state = self.deployments[&deployment_id].state.clone();
        DeploymentOutcome { deployment_id, state, events }
    }

    /// Stops a deployment and returns its resources. Releasing twice is a
    /// no-op that returns `Ok(false)`.
    pub fn release(&mut self, deployment_id: &str) -> Result<bool, AiPlaneError> {
        let state = self.deployment(deployment_id)?.state.clone();
        if state == DeploymentState::Released {
            return Ok(false);
        }
        if !state.holds_resources() {
            return Err(AiPlaneError::NotReleasable { deployment_id: deployment_id.to_string(), state: state.name().into() });
        }
        self.pool.release(deployment_id)?;
        self.transition(deployment_id, DeploymentState::Released, "releaseResources()".into());
        Ok(true)
    }

    pub fn events_for(&self, deployment_id: &str) -> Vec<&DeploymentEvent> {
        self.events.iter().filter(|e| e.deployment_id == deployment_id).collect()
    }
}
