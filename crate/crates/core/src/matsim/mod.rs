//! Discrete-time multi-access traffic simulator.
//!
//! UEs move under Gauss-Markov mobility inside a square served by one WiFi,
//! one LiFi and one 5G access point. Every step each UE steers its whole
//! demand through one link chosen by the configured policy, and the window
//! is summarized into one [`FeatureVector`] per UE. The link columns are the
//! UE's own; PACKET_SIZE and DEMAND_RATE describe the traffic mix of the
//! whole cell in that window, like ALGORITHM and NUM_UES describe the
//! scenario.

mod link;
mod mobility;
mod steering;
mod traffic;

pub use link::{compute_link_state, default_access_points, validate_access_points, AccessPoint, LinkState, Technology};
pub use mobility::{step_mobility, MobilityParams};
pub use steering::{LinkSelector, SteeringPolicy};
pub use traffic::{generate_window, TrafficParams, WindowTraffic, ACK_SIZE, MTU_SIZE};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{
    link_column, Dataset, FeatureVector, COL_ALGORITHM, COL_DEMAND_RATE, COL_NUM_UES, COL_PACKET_SIZE, FEATURE_COUNT,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no access link available{}", describe_location(*.ue, *.step))]
    NoLinkAvailable { ue: Option<usize>, step: Option<u64> },
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
}

fn describe_location(ue: Option<usize>, step: Option<u64>) -> String {
    match (ue, step) {
        (Some(ue), Some(step)) => format!(" for UE {ue} at step {step}"),
        _ => String::new(),
    }
}

/// Packet size and offered rate of one application class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    /// bytes
    pub packet_size: f64,
    /// bits/s
    pub demand_rate: f64,
}

/// Class 1: small packets at a high rate. Class 2: large packets at a low rate.
pub const APP_PROFILES: [AppProfile; 2] = [
    AppProfile { packet_size: 200.0, demand_rate: 2.0e6 },
    AppProfile { packet_size: 1200.0, demand_rate: 0.5e6 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    /// Direction of the mean velocity, radians.
    pub heading: f64,
    pub app_class: u8,
    pub packet_size: f64,
    pub demand_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub num_ues: usize,
    /// Side length of the square area, meters.
    pub area_side: f64,
    /// Number of steps.
    pub duration: u64,
    /// Seconds per step.
    pub dt: f64,
    pub seed: u64,
    pub policy: SteeringPolicy,
    #[serde(default)]
    pub mobility: MobilityParams,
    #[serde(default)]
    pub traffic: TrafficParams,
    /// Fraction of UEs running application class 1.
    pub app_mix: f64,
    /// Overrides the default layout from [`default_access_points`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access_points: Option<[AccessPoint; 3]>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            num_ues: 10,
            area_side: 70.0,
            duration: 100,
            dt: 1.0,
            seed: 1,
            policy: SteeringPolicy::PriorityActiveStandby,
            mobility: MobilityParams::default(),
            traffic: TrafficParams::default(),
            app_mix: 0.5,
            access_points: None,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<SimConfig, SimError> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_ues < 1 {
            return Err(SimError::InvalidConfig("num_ues must be >= 1".into()));
        }
        if !(self.area_side > 0.0 && self.area_side.is_finite()) {
            return Err(SimError::InvalidConfig("area_side must be > 0".into()));
        }
        if self.duration < 1 {
            return Err(SimError::InvalidConfig("duration must be >= 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig("dt must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.app_mix) {
            return Err(SimError::InvalidConfig("app_mix must lie in [0,1]".into()));
        }
        self.mobility.validate()?;
        self.traffic.validate()?;
        validate_access_points(&self.access_points())?;
        Ok(())
    }

    pub fn access_points(&self) -> [AccessPoint; 3] {
        self.access_points.clone().unwrap_or_else(|| default_access_points(self.area_side))
    }

    /// Number of UEs assigned application class 1; UEs `0..n` get class 1.
    pub fn class1_ues(&self) -> usize {
        ((self.app_mix * self.num_ues as f64).round() as usize).min(self.num_ues)
    }
}

/// The pooled scenario grid: 10, 20 and 30 UEs under each of the four policies.
pub fn reference_scenarios(duration: u64, seed: u64) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for (i, &num_ues) in [10usize, 20, 30].iter().enumerate() {
        for (j, &policy) in SteeringPolicy::ALL.iter().enumerate() {
            out.push(SimConfig {
                num_ues,
                duration,
                seed: seed.wrapping_add((i * 4 + j) as u64),
                policy,
                ..SimConfig::default()
            });
        }
    }
    out
}

/// Runs every scenario and pools the rows with sequential sample ids.
pub fn run_pooled(configs: &[SimConfig]) -> Result<Dataset, SimError> {
    let parts = configs.iter().map(run_simulation).collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::pooled(parts))
}

const STREAM_INIT: u64 = 0;
const STREAM_MOBILITY: u64 = 1;
const STREAM_TRAFFIC: u64 = 2;
const STREAM_STEERING: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Simulates `duration` windows of `num_ues` UEs. Row `t * num_ues + u` is UE
/// `u` at step `t`, and `sample_id` equals the row index.
pub fn run_simulation(config: &SimConfig) -> Result<Dataset, SimError> {
    config.validate()?;
    let aps = config.access_points();
    let priorities = [aps[0].priority, aps[1].priority, aps[2].priority];
    let side = config.area_side;

    let mut init_rng = stream(config.seed, STREAM_INIT);
    let mut mobility_rng = stream(config.seed, STREAM_MOBILITY);
    let mut traffic_rng = stream(config.seed, STREAM_TRAFFIC);
    let mut steering_rng = stream(config.seed, STREAM_STEERING);

    let class1 = config.class1_ues();
    let mut ues: Vec<UeState> = (0..config.num_ues)
        .map(|u| {
            let app_class = if u < class1 { 1 } else { 2 };
            let profile = APP_PROFILES[usize::from(app_class - 1)];
            let heading = init_rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let position = [init_rng.random_range(0.0..=side), init_rng.random_range(0.0..=side)];
            let speed = config.mobility.mean_speed;
            UeState {
                position,
                velocity: [speed * heading.cos(), speed * heading.sin()],
                heading,
                app_class,
                packet_size: profile.packet_size,
                demand_rate: profile.demand_rate,
            }
        })
        .collect();
    let mut selectors: Vec<LinkSelector> =
        (0..config.num_ues).map(|_| LinkSelector::new(config.policy, priorities)).collect();

    let mut load = [0.0; 3];
    let mut rows = Vec::with_capacity(config.num_ues * config.duration as usize);
    for step in 0..config.duration {
        let windows: Vec<WindowTraffic> =
            ues.iter().map(|ue| generate_window(ue, &config.traffic, config.dt, &mut traffic_rng)).collect();
        let cell = CellSummary::of(&windows, config.dt);
        let mut next_load = [0.0; 3];
        for (u, ue) in ues.iter_mut().enumerate() {
            let mut links = compute_link_state(ue, &aps, &load);
            let chosen = selectors[u]
                .select(&links, &mut steering_rng)
                .map_err(|_| SimError::NoLinkAvailable { ue: Some(u), step: Some(step) })?;

            let tx_bytes = windows[u].bytes;
            let link = &mut links[chosen];
            link.tx_bytes = tx_bytes;
            link.rx_bytes = tx_bytes * (1.0 - link.loss);
            link.throughput = link.rx_bytes * 8.0 / config.dt;
            next_load[chosen] += tx_bytes * 8.0 / config.dt;

            rows.push(FeatureVector {
                sample_id: step * config.num_ues as u64 + u as u64,
                label: ue.app_class,
                features: window_features(&links, config, &cell),
            });

            *ue = step_mobility(ue, &config.mobility, side, config.dt, &mut mobility_rng);
        }
        load = next_load;
    }
    Ok(Dataset::new(rows))
}

/// Traffic mix of the whole cell in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
struct CellSummary {
    /// Mean packet size over every packet offered in the cell, bytes.
    packet_size: f64,
    /// Mean offered rate per UE, bits/s.
    demand_rate: f64,
}

impl CellSummary {
    fn of(windows: &[WindowTraffic], dt: f64) -> Self {
        let total = windows.iter().fold(WindowTraffic::default(), |acc, w| WindowTraffic {
            packets: acc.packets + w.packets,
            bytes: acc.bytes + w.bytes,
        });
        CellSummary { packet_size: total.mean_packet_size(), demand_rate: total.offered_rate(dt) / windows.len() as f64 }
    }
}

fn window_features(links: &[LinkState; 3], config: &SimConfig, cell: &CellSummary) -> [f64; FEATURE_COUNT] {
    let mut f = [0.0; FEATURE_COUNT];
    for (tech, l) in links.iter().enumerate() {
        let metrics = [l.tx_bytes, l.rx_bytes, l.occupied, l.delay, l.throughput, l.loss, l.snr];
        for (m, v) in metrics.into_iter().enumerate() {
            f[link_column(tech, m)] = v;
        }
    }
    f[COL_ALGORITHM] = f64::from(config.policy.id());
    f[COL_NUM_UES] = config.num_ues as f64;
    f[COL_PACKET_SIZE] = cell.packet_size;
    f[COL_DEMAND_RATE] = cell.demand_rate;
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_count_is_duration_times_ues() {
        let cfg = SimConfig { num_ues: 10, duration: 100, ..SimConfig::default() };
        assert_eq!(run_simulation(&cfg).unwrap().len(), 1000);
    }

    #[test]
    fn identical_config_gives_identical_csv() {
        let cfg = SimConfig { num_ues: 7, duration: 40, seed: 99, policy: SteeringPolicy::RandomScheduling, ..SimConfig::default() };
        let a = run_simulation(&cfg).unwrap().to_csv_bytes();
        let b = run_simulation(&cfg).unwrap().to_csv_bytes();
        assert_eq!(a, b);
        let other = run_simulation(&SimConfig { seed: 100, ..cfg }).unwrap().to_csv_bytes();
        assert_ne!(a, other);
    }

    #[test]
    fn half_mix_splits_evenly_every_step() {
        let cfg = SimConfig { num_ues: 30, duration: 5, app_mix: 0.5, ..SimConfig::default() };
        let ds = run_simulation(&cfg).unwrap();
        for step in ds.rows.chunks(30) {
            let ones = step.iter().filter(|r| r.label == 1).count();
            assert_eq!(ones, 15);
        }
    }

    #[test]
    fn feature_ranges_hold() {
        for policy in SteeringPolicy::ALL {
            let cfg = SimConfig { num_ues: 30, duration: 30, policy, ..SimConfig::default() };
            for row in run_simulation(&cfg).unwrap().rows {
                for tech in 0..3 {
                    let occ = row.features[link_column(tech, 2)];
                    let loss = row.features[link_column(tech, 5)];
                    assert!((0.0..=1.0).contains(&occ));
                    assert!((0.0..=1.0).contains(&loss));
                    assert!(row.features[link_column(tech, 0)] >= 0.0);
                    assert!(row.features[link_column(tech, 1)] >= 0.0);
                }
                assert_eq!(row.features[COL_ALGORITHM], f64::from(policy.id()));
            }
        }
    }

    #[test]
    fn no_coverage_reports_ue_and_step() {
        let mut aps = default_access_points(70.0);
        for ap in &mut aps {
            ap.position = [1e6, 1e6];
        }
        let cfg = SimConfig { access_points: Some(aps), ..SimConfig::default() };
        match run_simulation(&cfg) {
            Err(SimError::NoLinkAvailable { ue: Some(0), step: Some(0) }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = SimConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
        let bad = text.replace("\"app_mix\":0.5", "\"app_mix\":1.5");
        assert!(matches!(SimConfig::from_json(&bad), Err(SimError::InvalidConfig(_))));
        let minimal = r#"{"num_ues":3,"area_side":70,"duration":2,"dt":1,"seed":5,"policy":"SmallestDelay","app_mix":0.3}"#;
        let parsed = SimConfig::from_json(minimal).unwrap();
        assert_eq!(parsed.mobility, MobilityParams::default());
        assert_eq!(parsed.class1_ues(), 1);
    }

    #[test]
    fn reference_grid_has_twelve_scenarios() {
        let grid = reference_scenarios(10, 0);
        assert_eq!(grid.len(), 12);
        let rows: usize = grid.iter().map(|c| c.num_ues * c.duration as usize).sum();
        assert_eq!(rows, 2400);
    }
}
