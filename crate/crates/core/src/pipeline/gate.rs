use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::verify::PerturbationSpec;

/// What a model must show before it may be published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustCriteria {
    pub min_accuracy: f64,
    pub min_separation_fraction: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub require_explanation_report: bool,
}

impl Default for TrustCriteria {
    fn default() -> Self {
        TrustCriteria { min_accuracy: 0.95, min_separation_fraction: 0.30, epsilon: 0.05, require_explanation_report: true }
    }
}

impl TrustCriteria {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.min_accuracy) || !unit(self.min_separation_fraction) {
            return Err(PipelineError::InvalidCriteria("thresholds must lie in [0,1]".into()));
        }
        PerturbationSpec::new(self.epsilon).map_err(|e| PipelineError::InvalidCriteria(e.to_string()))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let c: TrustCriteria = serde_json::from_str(text).map_err(|e| PipelineError::InvalidCriteria(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn perturbation(&self) -> PerturbationSpec {
        PerturbationSpec { epsilon: self.epsilon }
    }
}

/// Outputs of the trust checks that the gate compares against the criteria.
/// A `None` measurement means the stage that produces it did not run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrustMeasurements {
    pub accuracy: Option<f64>,
    pub separation_fraction: Option<f64>,
    pub explanation_present: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Publish,
    Reject,
    AwaitOperator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub criterion: String,
    pub threshold: Option<f64>,
    pub measured: Option<f64>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorAction {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorOverride {
    pub action: OperatorAction,
    pub operator_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    pub reasons: Vec<CriterionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_override: Option<OperatorOverride>,
}

impl GateDecision {
    pub fn failed(&self) -> impl Iterator<Item = &CriterionResult> {
        self.reasons.iter().filter(|r| !r.passed)
    }

    /// Applies the operator's answer to a pending decision. Decisions that
    /// are not pending are returned unchanged.
    pub fn resolve(mut self, answer: OperatorOverride) -> GateDecision {
        if self.verdict != Verdict::AwaitOperator {
            return self;
        }
        self.verdict = match answer.action {
            OperatorAction::Approve => Verdict::Publish,
            OperatorAction::Reject => Verdict::Reject,
        };
        self.operator_override = Some(answer);
        self
    }
}

/// Automated part of the gate. Any failed numeric criterion rejects; if all
/// pass but a required explanation report is missing, the decision is left
/// to the operator.
pub fn evaluate_gate(criteria: &TrustCriteria, measured: &TrustMeasurements) -> GateDecision {
    let numeric = |name: &str, threshold: f64, value: Option<f64>| CriterionResult {
        criterion: name.to_string(),
        threshold: Some(threshold),
        measured: value,
        passed: value.is_some_and(|v| v >= threshold),
    };
    let mut reasons = vec![
        numeric("min_accuracy", criteria.min_accuracy, measured.accuracy),
        numeric("min_separation_fraction", criteria.min_separation_fraction, measured.separation_fraction),
    ];
    let numeric_pass = reasons.iter().all(|r| r.passed);
    let explanation_ok = !criteria.require_explanation_report || measured.explanation_present;
    reasons.push(CriterionResult {
        criterion: "explanation_report".into(),
        threshold: None,
        measured: None,
        passed: explanation_ok,
    });
    let verdict = match (numeric_pass, explanation_ok) {
        (false, _) => Verdict::Reject,
        (true, false) => Verdict::AwaitOperator,
        (true, true) => Verdict::Publish,
    };
    GateDecision { verdict, reasons, operator_override: None }
}

/// Source of the approve/reject answer for a pending gate decision.
pub trait OperatorChannel {
    fn decide(&mut self, pending: &GateDecision) -> OperatorOverride;
}

/// Answers every prompt the same way.
#[derive(Debug, Clone)]
pub struct FixedOperator {
    pub action: OperatorAction,
    pub operator_id: String,
}

impl FixedOperator {
    pub fn approve(operator_id: &str) -> Self {
        FixedOperator { action: OperatorAction::Approve, operator_id: operator_id.to_string() }
    }

    pub fn reject(operator_id: &str) -> Self {
        FixedOperator { action: OperatorAction::Reject, operator_id: operator_id.to_string() }
    }
}

impl OperatorChannel for FixedOperator {
    fn decide(&mut self, _pending: &GateDecision) -> OperatorOverride {
        OperatorOverride { action: self.action, operator_id: self.operator_id.clone() }
    }
}
