use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeDelta, Utc};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: every reading advances by a fixed step.
#[derive(Debug)]
pub struct SteppedClock {
    start: DateTime<Utc>,
    step: TimeDelta,
    ticks: AtomicI64,
}

impl SteppedClock {
    pub fn new(start: DateTime<Utc>, step: TimeDelta) -> Self {
        Self {
            start,
            step,
            ticks: AtomicI64::new(0),
        }
    }
}

impl Default for SteppedClock {
    fn default() -> Self {
        // 2020-01-01T00:00:00Z, one second per reading
        Self::new(
            DateTime::from_timestamp(1_577_836_800, 0).expect("valid timestamp"),
            TimeDelta::seconds(1),
        )
    }
}

impl Clock for SteppedClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * n as i32
    }
}
