//! Abstract per-technology channel: log-distance SNR, hard range cutoff,
//! load-driven occupancy, delay and loss.

use serde::{Deserialize, Serialize};

use super::{SimError, UeState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technology {
    WiFi,
    LiFi,
    FiveG,
}

impl Technology {
    /// Slot order used by feature columns and link triples.
    pub const ALL: [Technology; 3] = [Technology::WiFi, Technology::LiFi, Technology::FiveG];

    pub fn index(self) -> usize {
        match self {
            Technology::WiFi => 0,
            Technology::LiFi => 1,
            Technology::FiveG => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub kind: Technology,
    pub position: [f64; 2],
    /// bits/s
    pub capacity: f64,
    /// ms
    pub base_delay: f64,
    /// meters
    pub range: f64,
    /// 1 = highest
    pub priority: u8,
    /// SNR at the 1 m reference distance, dB.
    pub snr_ref_db: f64,
    pub path_loss_exponent: f64,
    pub snr_floor_db: f64,
    /// Loss fraction of an idle link.
    pub base_loss: f64,
}

/// One technology's view from one UE during one window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkState {
    pub up: bool,
    pub delay: f64,
    pub occupied: f64,
    pub tx_bytes: f64,
    pub rx_bytes: f64,
    pub throughput: f64,
    pub loss: f64,
    pub snr: f64,
}

/// WiFi, LiFi, 5G access points laid out for a square of side `area_side`.
///
/// WiFi sits in the middle with the highest priority and covers all but the
/// corners, LiFi is a short high-capacity cell, and 5G covers the whole
/// square at the lowest priority.
pub fn default_access_points(area_side: f64) -> [AccessPoint; 3] {
    let s = area_side / 70.0;
    [
        AccessPoint {
            kind: Technology::WiFi,
            position: [35.0 * s, 35.0 * s],
            capacity: 60e6,
            base_delay: 6.0,
            range: 42.0 * s,
            priority: 1,
            snr_ref_db: 50.0,
            path_loss_exponent: 3.0,
            snr_floor_db: 0.0,
            base_loss: 0.002,
        },
        AccessPoint {
            kind: Technology::LiFi,
            position: [52.0 * s, 52.0 * s],
            capacity: 200e6,
            base_delay: 2.0,
            range: 12.0 * s,
            priority: 2,
            snr_ref_db: 60.0,
            path_loss_exponent: 2.0,
            snr_floor_db: 10.0,
            base_loss: 0.001,
        },
        AccessPoint {
            kind: Technology::FiveG,
            position: [35.0 * s, 35.0 * s],
            capacity: 80e6,
            base_delay: 10.0,
            range: 60.0 * s,
            priority: 3,
            snr_ref_db: 40.0,
            path_loss_exponent: 2.5,
            snr_floor_db: -20.0,
            base_loss: 0.005,
        },
    ]
}

pub fn validate_access_points(aps: &[AccessPoint; 3]) -> Result<(), SimError> {
    let mut seen = [false; 3];
    for (slot, ap) in aps.iter().enumerate() {
        if ap.kind.index() != slot {
            return Err(SimError::InvalidConfig(format!("access point {slot} must be {:?}", Technology::ALL[slot])));
        }
        if !(ap.capacity > 0.0 && ap.capacity.is_finite()) || !(ap.range > 0.0 && ap.range.is_finite()) {
            return Err(SimError::InvalidConfig(format!("{:?}: capacity and range must be positive", ap.kind)));
        }
        if !(ap.base_delay >= 0.0 && ap.base_delay.is_finite()) || !(0.0..=1.0).contains(&ap.base_loss) {
            return Err(SimError::InvalidConfig(format!("{:?}: bad base delay or loss", ap.kind)));
        }
        let finite = [ap.position[0], ap.position[1], ap.snr_ref_db, ap.path_loss_exponent, ap.snr_floor_db];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidConfig(format!("{:?}: non-finite channel parameter", ap.kind)));
        }
        match ap.priority {
            p @ 1..=3 if !seen[usize::from(p - 1)] => seen[usize::from(p - 1)] = true,
            p => return Err(SimError::InvalidConfig(format!("priorities must permute 1..=3, got {p}"))),
        }
    }
    Ok(())
}

/// Link conditions seen by `ue` given per-AP offered `load` in bits/s.
/// Byte counters and throughput are left at zero; the simulator fills them
/// for the link that carries the UE's traffic.
pub fn compute_link_state(ue: &UeState, aps: &[AccessPoint; 3], load: &[f64; 3]) -> [LinkState; 3] {
    let mut out = [LinkState::default(); 3];
    for (i, ap) in aps.iter().enumerate() {
        let dx = ue.position[0] - ap.position[0];
        let dy = ue.position[1] - ap.position[1];
        let distance = (dx * dx + dy * dy).sqrt();
        let snr = ap.snr_ref_db - 10.0 * ap.path_loss_exponent * distance.max(1.0).log10();
        let occupied = (load[i].max(0.0) / ap.capacity).min(1.0);
        out[i] = LinkState {
            up: distance <= ap.range && snr >= ap.snr_floor_db,
            delay: ap.base_delay * (1.0 + occupied),
            occupied,
            tx_bytes: 0.0,
            rx_bytes: 0.0,
            throughput: 0.0,
            loss: (ap.base_loss + 0.2 * occupied * occupied).min(1.0),
            snr,
        };
    }
    out
}
