use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AiPlaneError;

/// Minimum resources a pipeline needs before it may be provisioned.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preconditions {
    /// flop/s
    #[serde(default)]
    pub min_gpu_flops: u64,
    /// bytes
    #[serde(default)]
    pub min_gpu_mem: u64,
    /// bytes
    #[serde(default)]
    pub min_mem: u64,
    #[serde(default)]
    pub min_cpu_cores: u64,
}

impl Preconditions {
    pub fn as_resources(&self) -> Resources {
        Resources { gpu_flops: self.min_gpu_flops, gpu_mem: self.min_gpu_mem, mem: self.min_mem, cpu_cores: self.min_cpu_cores }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resources {
    pub gpu_flops: u64,
    pub gpu_mem: u64,
    pub mem: u64,
    pub cpu_cores: u64,
}

pub const RESOURCE_NAMES: [&str; 4] = ["gpu_flops", "gpu_mem", "mem", "cpu_cores"];

impl Resources {
    pub fn as_array(&self) -> [u64; 4] {
        [self.gpu_flops, self.gpu_mem, self.mem, self.cpu_cores]
    }

    fn from_array(a: [u64; 4]) -> Self {
        Resources { gpu_flops: a[0], gpu_mem: a[1], mem: a[2], cpu_cores: a[3] }
    }

    pub fn fits_within(&self, other: &Resources) -> bool {
        self.as_array().iter().zip(other.as_array()).all(|(a, b)| *a <= b)
    }

    pub fn checked_sub(&self, other: &Resources) -> Option<Resources> {
        let (a, b) = (self.as_array(), other.as_array());
        let mut out = [0; 4];
        for i in 0..4 {
            out[i] = a[i].checked_sub(b[i])?;
        }
        Some(Resources::from_array(out))
    }

    pub fn checked_add(&self, other: &Resources) -> Option<Resources> {
        let (a, b) = (self.as_array(), other.as_array());
        let mut out = [0; 4];
        for i in 0..4 {
            out[i] = a[i].checked_add(b[i])?;
        }
        Some(Resources::from_array(out))
    }
}

/// Pool config document: `{"capacity": {...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub capacity: Resources,
}

impl PoolConfig {
    pub fn from_json(text: &str) -> Result<Self, AiPlaneError> {
        serde_json::from_str(text).map_err(|e| AiPlaneError::InvalidPoolConfig(e.to_string()))
    }
}

/// Compute resources with a ledger of reservations by deployment id.
/// `available + Σ reservations = capacity` holds after every operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourcePool {
    capacity: Resources,
    available: Resources,
    reservations: BTreeMap<String, Resources>,
    /// Ids whose reservation has been returned.
    #[serde(default)]
    released: BTreeSet<String>,
}

impl ResourcePool {
    pub fn new(capacity: Resources) -> Self {
        ResourcePool { capacity, available: capacity, reservations: BTreeMap::new(), released: BTreeSet::new() }
    }

    pub fn from_config(cfg: &PoolConfig) -> Self {
        ResourcePool::new(cfg.capacity)
    }

    pub fn capacity(&self) -> Resources {
        self.capacity
    }

    pub fn available(&self) -> Resources {
        self.available
    }

    pub fn reservations(&self) -> &BTreeMap<String, Resources> {
        &self.reservations
    }

    pub fn reservation(&self, deployment_id: &str) -> Option<Resources> {
        self.reservations.get(deployment_id).copied()
    }

    /// `available + Σ reservations == capacity` for every resource.
    pub fn is_conserved(&self) -> bool {
        let reserved = self
            .reservations
            .values()
            .try_fold(Resources::default(), |acc, r| acc.checked_add(r));
        reserved.and_then(|r| r.checked_add(&self.available)) == Some(self.capacity)
    }

    /// Reserves `pre` for `deployment_id`.
    pub fn provision(&mut self, pre: &Preconditions, deployment_id: &str) -> Result<(), AiPlaneError> {
        if self.reservations.contains_key(deployment_id) || self.released.contains(deployment_id) {
            return Err(AiPlaneError::DuplicateDeployment(deployment_id.to_string()));
        }
        let need = pre.as_resources();
        let rest = self
            .available
            .checked_sub(&need)
            .ok_or_else(|| AiPlaneError::InsufficientResources { required: need, available: self.available })?;
        self.available = rest;
        self.reservations.insert(deployment_id.to_string(), need);
        Ok(())
    }

    /// Returns a reservation to the pool. Releasing an id a second time is
    /// a no-op; an id that never held a reservation is an error.
    pub fn release(&mut self, deployment_id: &str) -> Result<bool, AiPlaneError> {
        match self.reservations.remove(deployment_id) {
            Some(r) => {
                self.available = self.available.checked_add(&r).expect("conserved pool cannot overflow capacity");
                self.released.insert(deployment_id.to_string());
                Ok(true)
            }
            None if self.released.contains(deployment_id) => Ok(false),
            None => Err(AiPlaneError::UnknownDeployment(deployment_id.to_string())),
        }
    }
}

/// Every requirement is at most the corresponding availability.
pub fn are_preconditions_met(pre: &Preconditions, pool: &ResourcePool) -> bool {
    pre.as_resources().fits_within(&pool.available())
}

pub const DEFAULT_RISK_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskVerdict {
    Abort,
    ProceedWithWarning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAssessment {
    /// Fraction of each requirement that is missing, in [`RESOURCE_NAMES`] order.
    pub deficits: [f64; 4],
    pub threshold: f64,
    pub verdict: RiskVerdict,
}

impl RiskAssessment {
    pub fn max_deficit(&self) -> f64 {
        self.deficits.iter().cloned().fold(0.0, f64::max)
    }
}

/// `deficit = max(0, (required − available) / required)`, 0 when nothing is
/// required; Abort iff some deficit exceeds `threshold`.
pub fn cog_evaluate_risk(pre: &Preconditions, pool: &ResourcePool, threshold: f64) -> RiskAssessment {
    let need = pre.as_resources().as_array();
    let have = pool.available().as_array();
    let mut deficits = [0.0; 4];
    for i in 0..4 {
        if need[i] > have[i] {
            deficits[i] = (need[i] - have[i]) as f64 / need[i] as f64;
        }
    }
    let verdict = if deficits.iter().any(|&d| d > threshold) { RiskVerdict::Abort } else { RiskVerdict::ProceedWithWarning };
    RiskAssessment { deficits, threshold, verdict }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap() -> Resources {
        Resources { gpu_flops: 1_000, gpu_mem: 2_000, mem: 4_000, cpu_cores: 8 }
    }

    fn pre(m: u64) -> Preconditions {
        Preconditions { min_mem: m, ..Preconditions::default() }
    }

    #[test]
    fn precondition_boundaries() {
        let pool = ResourcePool::new(cap());
        assert!(are_preconditions_met(&Preconditions::default(), &pool));
        assert!(are_preconditions_met(&pre(4_000), &pool));
        assert!(!are_preconditions_met(&pre(4_001), &pool));
    }

    #[test]
    fn risk_examples() {
        let pool = ResourcePool::new(Resources { mem: 5, ..Resources::default() });
        let a = cog_evaluate_risk(&pre(10), &pool, 0.25);
        assert_eq!(a.deficits[2], 0.5);
        assert_eq!(a.verdict, RiskVerdict::Abort);
        let pool = ResourcePool::new(Resources { mem: 9, ..Resources::default() });
        let b = cog_evaluate_risk(&pre(10), &pool, 0.25);
        assert!((b.deficits[2] - 0.1).abs() < 1e-15);
        assert_eq!(b.verdict, RiskVerdict::ProceedWithWarning);
        let c = cog_evaluate_risk(&Preconditions::default(), &ResourcePool::new(Resources::default()), 0.25);
        assert_eq!(c.deficits, [0.0; 4]);
    }

    #[test]
    fn provision_release_restores_pool() {
        let mut pool = ResourcePool::new(cap());
        let initial = pool.clone();
        pool.provision(&Preconditions { min_gpu_flops: 10, min_gpu_mem: 20, min_mem: 30, min_cpu_cores: 2 }, "d1").unwrap();
        assert!(pool.is_conserved());
        assert!(pool.release("d1").unwrap());
        assert_eq!(pool.available(), initial.available());
        assert_eq!(pool.reservations(), initial.reservations());
        assert!(!pool.release("d1").unwrap());
        assert_eq!(pool.available(), initial.available());
        assert!(matches!(pool.release("never"), Err(AiPlaneError::UnknownDeployment(_))));
    }

    #[test]
    fn second_provision_exceeding_capacity_fails() {
        let mut pool = ResourcePool::new(cap());
        pool.provision(&pre(3_000), "a").unwrap();
        assert!(matches!(pool.provision(&pre(3_000), "b"), Err(AiPlaneError::InsufficientResources { .. })));
        assert_eq!(pool.available().mem, 1_000);
        assert!(pool.is_conserved());
    }

    #[test]
    fn pool_config_json() {
        let cfg = PoolConfig::from_json(r#"{"capacity":{"gpu_flops":1000,"gpu_mem":2000,"mem":4000,"cpu_cores":8}}"#).unwrap();
        assert_eq!(cfg.capacity, cap());
        assert!(PoolConfig::from_json(r#"{"capacity":{"gpu_flops":-1}}"#).is_err());
    }
}
