use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AiPlaneError, Preconditions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VertexKind {
    DataIngestion,
    DataValidation,
    ModelTrain,
    ModelAnalysis,
    ModelExecution,
    Monitoring,
}

impl VertexKind {
    pub const ALL: [VertexKind; 6] = [
        VertexKind::DataIngestion,
        VertexKind::DataValidation,
        VertexKind::ModelTrain,
        VertexKind::ModelAnalysis,
        VertexKind::ModelExecution,
        VertexKind::Monitoring,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VertexKind::DataIngestion => "data_ingestion",
            VertexKind::DataValidation => "data_validation",
            VertexKind::ModelTrain => "model_train",
            VertexKind::ModelAnalysis => "model_analysis",
            VertexKind::ModelExecution => "model_execution",
            VertexKind::Monitoring => "monitoring",
        }
    }
}

/// An MLOps pipeline: at most one successor per vertex, no cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineManifest {
    pub id: String,
    pub vertices: Vec<VertexKind>,
    pub edges: Vec<(VertexKind, VertexKind)>,
    #[serde(default)]
    pub preconditions: Preconditions,
    #[serde(default)]
    pub kpm_metrics: Vec<String>,
}

impl PipelineManifest {
    /// The six stages chained start to finish.
    pub fn linear(id: impl Into<String>, preconditions: Preconditions) -> Self {
        PipelineManifest {
            id: id.into(),
            vertices: VertexKind::ALL.to_vec(),
            edges: VertexKind::ALL.windows(2).map(|w| (w[0], w[1])).collect(),
            preconditions,
            kpm_metrics: ["latency_ms", "throughput", "accuracy", "cpu_usage", "mem_usage"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AiPlaneError> {
        let m: PipelineManifest =
            serde_json::from_str(text).map_err(|e| AiPlaneError::InvalidManifest(format!("json: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), AiPlaneError> {
        let bad = |msg: String| Err(AiPlaneError::InvalidManifest(msg));
        if self.id.is_empty() {
            return bad("empty pipeline id".into());
        }
        let mut seen = BTreeSet::new();
        for v in &self.vertices {
            if !seen.insert(*v) {
                return bad(format!("duplicate vertex {v:?}"));
            }
        }
        let mut next = BTreeMap::new();
        for &(a, b) in &self.edges {
            if !seen.contains(&a) || !seen.contains(&b) {
                return bad(format!("edge {a:?} -> {b:?} references a vertex not in the pipeline"));
            }
            if next.insert(a, b).is_some() {
                return bad(format!("vertex {a:?} feeds more than one vertex"));
            }
        }
        // With out-degree ≤ 1 a cycle is a successor chain that revisits a vertex.
        for &start in &self.vertices {
            let mut cur = start;
            for _ in 0..=self.vertices.len() {
                match next.get(&cur) {
                    Some(&n) if n == start => return bad(format!("cycle through {start:?}")),
                    Some(&n) => cur = n,
                    None => break,
                }
            }
        }
        if !self.kpm_metrics.iter().all(|k| !k.is_empty()) {
            return bad("empty KPM metric name".into());
        }
        Ok(())
    }

    pub fn successor(&self, v: VertexKind) -> Option<VertexKind> {
        self.edges.iter().find(|(a, _)| *a == v).map(|&(_, b)| b)
    }

    /// Vertices in execution order: every vertex once, after all of its
    /// predecessors, ties broken by declaration order.
    pub fn execution_order(&self) -> Vec<VertexKind> {
        let mut pending: BTreeMap<VertexKind, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for &(_, b) in &self.edges {
            *pending.entry(b).or_default() += 1;
        }
        let mut out = Vec::with_capacity(self.vertices.len());
        while out.len() < self.vertices.len() {
            let Some(&v) = self.vertices.iter().find(|v| pending.get(v) == Some(&0)) else { break };
            pending.remove(&v);
            out.push(v);
            if let Some(n) = self.successor(v) {
                if let Some(c) = pending.get_mut(&n) {
                    *c -= 1;
                }
            }
        }
        out
    }
}

/// True iff `task` (taken as a set) is exactly the vertex set of one
/// directed path in the pipeline. A single vertex is a path of length 0.
pub fn validate_pipeline_task(manifest: &PipelineManifest, task: &[VertexKind]) -> Result<bool, AiPlaneError> {
    if let Some(v) = task.iter().find(|v| !manifest.vertices.contains(v)) {
        return Err(AiPlaneError::UnknownVertex(*v));
    }
    let set: BTreeSet<VertexKind> = task.iter().copied().collect();
    if set.is_empty() {
        return Ok(false);
    }
    for &start in &set {
        let mut visited = BTreeSet::from([start]);
        let mut cur = start;
        while let Some(n) = manifest.successor(cur) {
            if !set.contains(&n) || !visited.insert(n) {
                break;
            }
            cur = n;
        }
        if visited == set {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Pipelines by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineRegistry {
    pipelines: BTreeMap<String, PipelineManifest>,
}

impl PipelineRegistry {
    /// Validates and stores `manifest`, replacing any manifest with the same id.
    pub fn register(&mut self, manifest: PipelineManifest) -> Result<String, AiPlaneError> {
        manifest.validate()?;
        let id = manifest.id.clone();
        self.pipelines.insert(id.clone(), manifest);
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<&PipelineManifest, AiPlaneError> {
        self.pipelines.get(id).ok_or_else(|| AiPlaneError::UnknownPipeline(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pipelines.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.pipelines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pipelines.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VertexKind::*;

    fn manifest(vertices: Vec<VertexKind>, edges: Vec<(VertexKind, VertexKind)>) -> PipelineManifest {
        PipelineManifest { id: "p".into(), vertices, edges, preconditions: Preconditions::default(), kpm_metrics: vec![] }
    }

    #[test]
    fn register_then_get_round_trips() {
        let mut reg = PipelineRegistry::default();
        let m = PipelineManifest::linear("xapp", Preconditions::default());
        assert_eq!(reg.register(m.clone()).unwrap(), "xapp");
        assert_eq!(reg.get("xapp").unwrap(), &m);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(PipelineManifest::from_json(&json).unwrap(), m);
        assert!(matches!(reg.get("absent"), Err(AiPlaneError::UnknownPipeline(_))));
    }

    #[test]
    fn upsert_replaces() {
        let mut reg = PipelineRegistry::default();
        reg.register(PipelineManifest::linear("a", Preconditions::default())).unwrap();
        let mut m = PipelineManifest::linear("a", Preconditions::default());
        m.kpm_metrics = vec!["latency_ms".into()];
        reg.register(m.clone()).unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(reg.get("a").unwrap(), &m);
    }

    #[test]
    fn fan_out_is_rejected() {
        let m = manifest(vec![DataIngestion, DataValidation, ModelTrain], vec![(DataIngestion, DataValidation), (DataIngestion, ModelTrain)]);
        assert!(matches!(m.validate(), Err(AiPlaneError::InvalidManifest(_))));
    }

    #[test]
    fn fan_in_is_allowed() {
        let m = manifest(vec![DataIngestion, DataValidation, ModelTrain], vec![(DataIngestion, ModelTrain), (DataValidation, ModelTrain)]);
        assert!(m.validate().is_ok());
        assert_eq!(m.execution_order(), vec![DataIngestion, DataValidation, ModelTrain]);
    }

    #[test]
    fn cycles_duplicates_and_dangling_edges_are_rejected() {
        let cyc = manifest(vec![ModelTrain, ModelAnalysis], vec![(ModelTrain, ModelAnalysis), (ModelAnalysis, ModelTrain)]);
        assert!(cyc.validate().is_err());
        let selfloop = manifest(vec![ModelTrain], vec![(ModelTrain, ModelTrain)]);
        assert!(selfloop.validate().is_err());
        assert!(manifest(vec![ModelTrain, ModelTrain], vec![]).validate().is_err());
        assert!(manifest(vec![ModelTrain], vec![(ModelTrain, Monitoring)]).validate().is_err());
    }

    #[test]
    fn pipeline_tasks() {
        let m = PipelineManifest::linear("p", Preconditions::default());
        assert!(validate_pipeline_task(&m, &[DataIngestion, DataValidation]).unwrap());
        assert!(validate_pipeline_task(&m, &[DataValidation, DataIngestion]).unwrap());
        assert!(validate_pipeline_task(&m, &[ModelTrain, ModelAnalysis, ModelExecution]).unwrap());
        assert!(!validate_pipeline_task(&m, &[DataIngestion, ModelTrain]).unwrap());
        assert!(validate_pipeline_task(&m, &[Monitoring]).unwrap());
        assert!(!validate_pipeline_task(&m, &[]).unwrap());
        let short = manifest(vec![ModelTrain], vec![]);
        assert!(matches!(validate_pipeline_task(&short, &[Monitoring]), Err(AiPlaneError::UnknownVertex(Monitoring))));
    }
}
