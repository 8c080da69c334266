//! Legacy traffic steering policies over the three access links.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::link::LinkState;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SteeringPolicy {
    PriorityActiveStandby,
    SmallestDelay,
    LoadBalancing,
    RandomScheduling,
}

impl SteeringPolicy {
    pub const ALL: [SteeringPolicy; 4] = [
        SteeringPolicy::PriorityActiveStandby,
        SteeringPolicy::SmallestDelay,
        SteeringPolicy::LoadBalancing,
        SteeringPolicy::RandomScheduling,
    ];

    /// Value of the `ALGORITHM` feature column.
    pub fn id(self) -> u8 {
        match self {
            SteeringPolicy::PriorityActiveStandby => 0,
            SteeringPolicy::SmallestDelay => 1,
            SteeringPolicy::LoadBalancing => 2,
            SteeringPolicy::RandomScheduling => 3,
        }
    }
}

/// Per-UE link selector. Holds the round-robin counter for `LoadBalancing`.
#[derive(Debug, Clone)]
pub struct LinkSelector {
    policy: SteeringPolicy,
    /// Priority rank per technology slot, 1 = highest.
    priorities: [u8; 3],
    counter: u64,
}

impl LinkSelector {
    pub fn new(policy: SteeringPolicy, priorities: [u8; 3]) -> Self {
        LinkSelector { policy, priorities, counter: 0 }
    }

    pub fn policy(&self) -> SteeringPolicy {
        self.policy
    }

    /// Picks the technology slot carrying this window's traffic.
    pub fn select<R: Rng + ?Sized>(&mut self, links: &[LinkState; 3], rng: &mut R) -> Result<usize, SimError> {
        let up: Vec<usize> = (0..3).filter(|&i| links[i].up).collect();
        if up.is_empty() {
            return Err(SimError::NoLinkAvailable { ue: None, step: None });
        }
        let choice = match self.policy {
            SteeringPolicy::PriorityActiveStandby => {
                *up.iter().min_by_key(|&&i| self.priorities[i]).expect("non-empty")
            }
            SteeringPolicy::SmallestDelay => {
                // First minimum wins ties, i.e. the lowest slot index.
                let mut best = up[0];
                for &i in &up[1..] {
                    if links[i].delay < links[best].delay {
                        best = i;
                    }
                }
                best
            }
            SteeringPolicy::LoadBalancing => {
                let i = up[(self.counter % up.len() as u64) as usize];
                self.counter += 1;
                i
            }
            SteeringPolicy::RandomScheduling => up[rng.random_range(0..up.len())],
        };
        Ok(choice)
    }
}
