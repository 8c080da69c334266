//! Timestamp sources for event logs, stage logs and metrics.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

/// Millisecond timestamps. `Logical` hands out strictly increasing ticks
/// from a fixed origin so that replayed runs produce identical documents.
#[derive(Debug)]
pub enum Clock {
    System,
    Logical(AtomicU64),
}

impl Clock {
    pub fn system() -> Self {
        Clock::System
    }

    pub fn logical(origin: u64) -> Self {
        Clock::Logical(AtomicU64::new(origin))
    }

    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            Clock::Logical(next) => next.fetch_add(1, Ordering::SeqCst),
        }
    }
}

impl Default for Clock {
    fn default() -> Self {
        Clock::System
    }
}
