//! Per-window traffic of one UE: a bursty application flow plus background
//! traffic (ACKs and full-size segments) sharing the selected link.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::{SimError, UeState};

/// bytes
pub const ACK_SIZE: f64 = 64.0;
/// bytes
pub const MTU_SIZE: f64 = 1500.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    /// Shape of the Gamma(κ, 1/κ) activity factor scaling the application
    /// rate each window; smaller is burstier.
    pub burst_shape: f64,
    /// Median background rate, bits/s.
    pub background_rate: f64,
    /// Log-scale spread of the background rate.
    pub background_sigma: f64,
    /// Share of background packets that are ACK-sized; the rest are MTU-sized.
    pub ack_share: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        TrafficParams { burst_shape: 60.0, background_rate: 0.05e6, background_sigma: 0.3, ack_share: 0.5 }
    }
}

impl TrafficParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.burst_shape > 0.0 && self.burst_shape.is_finite()) {
            return Err(SimError::InvalidConfig("traffic.burst_shape must be > 0".into()));
        }
        if !(self.background_rate >= 0.0 && self.background_rate.is_finite()) {
            return Err(SimError::InvalidConfig("traffic.background_rate must be >= 0".into()));
        }
        if !(self.background_sigma >= 0.0 && self.background_sigma.is_finite()) {
            return Err(SimError::InvalidConfig("traffic.background_sigma must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.ack_share) {
            return Err(SimError::InvalidConfig("traffic.ack_share must lie in [0,1]".into()));
        }
        Ok(())
    }
}

/// What one UE offers to its link during one window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowTraffic {
    pub packets: u64,
    pub bytes: f64,
}

impl WindowTraffic {
    /// Mean packet size in bytes, 0 for an empty window.
    pub fn mean_packet_size(&self) -> f64 {
        if self.packets == 0 {
            0.0
        } else {
            self.bytes / self.packets as f64
        }
    }

    /// Offered rate in bits/s.
    pub fn offered_rate(&self, dt: f64) -> f64 {
        self.bytes * 8.0 / dt
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
    } else {
        0
    }
}

pub fn generate_window<R: Rng + ?Sized>(ue: &UeState, params: &TrafficParams, dt: f64, rng: &mut R) -> WindowTraffic {
    let activity = Gamma::new(params.burst_shape, 1.0 / params.burst_shape).expect("validated shape").sample(rng);
    let app_packets = poisson(ue.demand_rate * activity * dt / (8.0 * ue.packet_size), rng);

    let bg_rate = if params.background_sigma > 0.0 {
        params.background_rate * LogNormal::new(0.0, params.background_sigma).expect("validated sigma").sample(rng)
    } else {
        params.background_rate
    };
    let bg_mean_size = params.ack_share * ACK_SIZE + (1.0 - params.ack_share) * MTU_SIZE;
    let bg_packets = poisson(bg_rate * dt / (8.0 * bg_mean_size), rng);
    let acks = if bg_packets > 0 {
        Binomial::new(bg_packets, params.ack_share).expect("share in [0,1]").sample(rng)
    } else {
        0
    };

    WindowTraffic {
        packets: app_packets + bg_packets,
        bytes: app_packets as f64 * ue.packet_size + acks as f64 * ACK_SIZE + (bg_packets - acks) as f64 * MTU_SIZE,
    }
}
