use serde::{Deserialize, Serialize};

use super::{AiPlaneError, Deployment, KpmSubscription, Resources};
use crate::dataset::Dataset;
use crate::model::{evaluate, MlpModel, Normalizer};

/// Nominal flop/s of one CPU core, used when no GPU is reserved.
pub const CPU_CORE_FLOPS: f64 = 1e9;

/// One AIM probe sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub ts: u64,
    pub latency_ms: f64,
    /// inferences/s
    pub throughput: f64,
    /// `None` when no inference fell into this sample's period.
    pub accuracy: Option<f64>,
    pub cpu_usage: f64,
    pub mem_usage: f64,
    pub inferences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub deployment_id: String,
    pub subscription: KpmSubscription,
    pub window_start: u64,
    pub window_ms: u64,
    pub samples: Vec<ProbeSample>,
    /// Accuracy over every inference in the window.
    pub window_accuracy: f64,
}

/// The running xApp the probes watch and the labeled inferences it served
/// during the window.
pub struct ProbeTarget<'a> {
    pub model: &'a MlpModel,
    pub normalizer: &'a Normalizer,
    pub inferences: &'a Dataset,
}

/// Multiply-adds of one forward pass, counted as two flops each.
pub fn inference_flops(model: &MlpModel) -> f64 {
    model.layers.iter().map(|l| 2.0 * (l.inputs * l.outputs) as f64).sum()
}

/// Emits `window_ms / period_ms` samples. The inferences are spread over
/// the samples in order, and each sample's accuracy is [`evaluate`] over
/// its share. Latency and utilization follow from the model's flop count
/// and the deployment's reservation, so the output is deterministic.
pub fn collect_probe_metrics(
    deployment: &Deployment,
    reservation: Resources,
    target: &ProbeTarget<'_>,
    window_start: u64,
    window_ms: u64,
) -> Result<ProbeRecord, AiPlaneError> {
    if !deployment.state.probes_active() {
        return Err(AiPlaneError::NotRunning { deployment_id: deployment.id.clone(), state: deployment.state.name().into() });
    }
    let subscription = deployment.subscription.clone().expect("probes are active only after KPM subscription");
    if subscription.period_ms == 0 {
        return Err(AiPlaneError::InvalidWindow("KPM period is zero".into()));
    }
    if target.inferences.is_empty() {
        return Err(AiPlaneError::InvalidWindow("no inferences in window".into()));
    }
    let n_samples = (window_ms / subscription.period_ms) as usize;
    if n_samples == 0 {
        return Err(AiPlaneError::InvalidWindow(format!("window {window_ms} ms is shorter than the {} ms period", subscription.period_ms)));
    }
    let window_accuracy = evaluate(target.model, target.normalizer, target.inferences)?;

    let rate = if reservation.gpu_flops > 0 {
        reservation.gpu_flops as f64
    } else {
        CPU_CORE_FLOPS * reservation.cpu_cores.max(1) as f64
    };
    let per_inference_s = inference_flops(target.model) / rate;
    let model_bytes = (target.model.parameter_count() * std::mem::size_of::<f64>()) as f64;
    let mem_usage = if reservation.mem > 0 { (model_bytes / reservation.mem as f64).min(1.0) } else { 0.0 };
    let period_s = subscription.period_ms as f64 / 1e3;

    let rows = &target.inferences.rows;
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let lo = i * rows.len() / n_samples;
        let hi = (i + 1) * rows.len() / n_samples;
        let share = Dataset::new(rows[lo..hi].to_vec());
        let accuracy = if share.is_empty() { None } else { Some(evaluate(target.model, target.normalizer, &share)?) };
        let busy_s = share.len() as f64 * per_inference_s;
        samples.push(ProbeSample {
            ts: window_start + (i as u64 + 1) * subscription.period_ms,
            latency_ms: per_inference_s * 1e3,
            throughput: share.len() as f64 / period_s,
            accuracy,
            cpu_usage: (busy_s / period_s).min(1.0),
            mem_usage,
            inferences: share.len(),
        });
    }
    Ok(ProbeRecord {
        deployment_id: deployment.id.clone(),
        subscription,
        window_start,
        window_ms,
        samples,
        window_accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aiplane::{AiPlane, PipelineManifest, Preconditions, ResourcePool};
    use crate::clock::Clock;
    use crate::dataset::{FeatureVector, FEATURE_COUNT};
    use crate::model::ARCHITECTURE;

    fn running() -> (AiPlane, String) {
        let pool = ResourcePool::new(Resources { gpu_flops: 1_000_000_000, gpu_mem: 1 << 30, mem: 1 << 30, cpu_cores: 4 });
        let mut plane = AiPlane::new(pool, Clock::logical(0));
        plane.register_pipeline(PipelineManifest::linear("x", Preconditions { min_gpu_flops: 1_000_000, ..Default::default() })).unwrap();
        let out = plane.deploy("x");
        (plane, out.deployment_id)
    }

    fn toy_rows(n: usize) -> Dataset {
        let rows = (0..n)
            .map(|i| {
                let mut f = [0.0; FEATURE_COUNT];
                f[0] = i as f64;
                FeatureVector::new(i as u64, if i % 3 == 0 { 1 } else { 2 }, f).unwrap()
            })
            .collect();
        Dataset::new(rows)
    }

    #[test]
    fn ten_periods_give_ten_samples() {
        let (plane, id) = running();
        let dep = plane.deployment(&id).unwrap();
        let model = MlpModel::zeros(&ARCHITECTURE);
        let norm = Normalizer::identity(FEATURE_COUNT);
        let data = toy_rows(37);
        let target = ProbeTarget { model: &model, normalizer: &norm, inferences: &data };
        let rec = collect_probe_metrics(dep, plane.pool.reservation(&id).unwrap(), &target, 0, 10 * dep.subscription.as_ref().unwrap().period_ms).unwrap();
        assert_eq!(rec.samples.len(), 10);
        assert_eq!(rec.samples.iter().map(|s| s.inferences).sum::<usize>(), 37);
        let overall = evaluate(&model, &norm, &data).unwrap();
        assert_eq!(rec.window_accuracy, overall);
        let rows = &data.rows;
        let mut lo = 0;
        for s in &rec.samples {
            let share = Dataset::new(rows[lo..lo + s.inferences].to_vec());
            assert_eq!(s.accuracy, Some(evaluate(&model, &norm, &share).unwrap()));
            lo += s.inferences;
        }
    }

    #[test]
    fn deployed_but_not_probed_is_not_running() {
        let (plane, id) = running();
        let mut dep = plane.deployment(&id).unwrap().clone();
        dep.state = crate::aiplane::DeploymentState::Deployed;
        let model = MlpModel::zeros(&ARCHITECTURE);
        let norm = Normalizer::identity(FEATURE_COUNT);
        let data = toy_rows(5);
        let target = ProbeTarget { model: &model, normalizer: &norm, inferences: &data };
        assert!(matches!(
            collect_probe_metrics(&dep, Resources::default(), &target, 0, 10_000),
            Err(AiPlaneError::NotRunning { .. })
        ));
    }
}
