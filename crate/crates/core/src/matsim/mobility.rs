//! Gauss-Markov mobility with reflecting area boundaries.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{SimError, UeState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    /// Memory factor in `[0, 1]`; 1 keeps the previous velocity, 0 is memoryless.
    pub alpha: f64,
    /// Magnitude of the per-UE mean velocity, m/s.
    pub mean_speed: f64,
    /// Randomness scale, m/s.
    pub sigma: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams { alpha: 0.85, mean_speed: 1.0, sigma: 0.3 }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SimError::InvalidConfig(format!("mobility.alpha {} outside [0,1]", self.alpha)));
        }
        if !(self.mean_speed >= 0.0 && self.mean_speed.is_finite()) {
            return Err(SimError::InvalidConfig(format!("mobility.mean_speed {} must be >= 0", self.mean_speed)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(SimError::InvalidConfig(format!("mobility.sigma {} must be >= 0", self.sigma)));
        }
        Ok(())
    }
}

/// Advances one UE by one step of length `dt`.
///
/// Per dimension: `v' = α·v + (1−α)·μ + σ·√(1−α²)·w` with `w ~ N(0,1)` and
/// `μ = mean_speed·(cos h, sin h)` for the UE's mean heading `h`. The position
/// moves by `v'·dt` and is reflected into `[0, area_side]²`; a reflection
/// mirrors both the velocity component and the mean heading.
pub fn step_mobility<R: Rng + ?Sized>(
    ue: &UeState,
    params: &MobilityParams,
    area_side: f64,
    dt: f64,
    rng: &mut R,
) -> UeState {
    let alpha = params.alpha;
    let noise_scale = params.sigma * (1.0 - alpha * alpha).max(0.0).sqrt();
    let mean = [params.mean_speed * ue.heading.cos(), params.mean_speed * ue.heading.sin()];

    let mut next = ue.clone();
    for d in 0..2 {
        let w: f64 = if noise_scale > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        next.velocity[d] = alpha * ue.velocity[d] + (1.0 - alpha) * mean[d] + noise_scale * w;
        next.position[d] = ue.position[d] + next.velocity[d] * dt;
    }

    let mut flip = [false; 2];
    for d in 0..2 {
        let (pos, flipped) = reflect(next.position[d], area_side);
        next.position[d] = pos;
        flip[d] = flipped;
    }
    if flip[0] {
        next.velocity[0] = -next.velocity[0];
        next.heading = std::f64::consts::PI - next.heading;
    }
    if flip[1] {
        next.velocity[1] = -next.velocity[1];
        next.heading = -next.heading;
    }
    next
}

/// Folds `x` into `[0, side]`, returning whether an odd number of reflections happened.
fn reflect(mut x: f64, side: f64) -> (f64, bool) {
    let mut flipped = false;
    for _ in 0..64 {
        if x < 0.0 {
            x = -x;
        } else if x > side {
            x = 2.0 * side - x;
        } else {
            return (x, flipped);
        }
        flipped = !flipped;
    }
    (x.clamp(0.0, side), flipped)
}
