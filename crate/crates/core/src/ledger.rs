//! Bookkeeping of active time, downtime and failures.

use serde::{Deserialize, Serialize};

/// Simulated seconds charged for one primitive.
pub const SECONDS_PER_PRIMITIVE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureEvent {
    pub step: u64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UptimeLedger {
    pub active_steps: u64,
    pub active_seconds: f64,
    pub downtime_seconds: f64,
    pub failure_events: Vec<FailureEvent>,
}

impl UptimeLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_primitive(&mut self) {
        self.record_steps(1);
    }

    pub fn record_steps(&mut self, steps: u64) {
        self.active_steps += steps;
        self.active_seconds = self.active_steps as f64 * SECONDS_PER_PRIMITIVE;
    }

    pub fn record_downtime(&mut self, seconds: f64) {
        assert!(seconds >= 0.0, "downtime cannot be negative");
        self.downtime_seconds += seconds;
    }

    pub fn record_failure(&mut self, step: u64, description: impl Into<String>) {
        self.failure_events.push(FailureEvent {
            step,
            description: description.into(),
        });
    }

    pub fn active_days(&self) -> f64 {
        self.active_seconds / 86_400.0
    }

    /// `active / (active + downtime)`, or 1 before anything happened.
    pub fn uptime_fraction(&self) -> f64 {
        let total = self.active_seconds + self.downtime_seconds;
        if total > 0.0 {
            self.active_seconds / total
        } else {
            1.0
        }
    }
}
