//! Time-to-collision (TTC) baseline.
//!
//! TTC extrapolates the state along its current (estimated) velocity and
//! reports the first sampling instant at which the safety level goes
//! negative. With a black-box system the velocity is the first backward
//! difference, so TTC is exactly the degree-1 Taylor monitor.

use crate::error::Result;
use crate::monitor::{Monitor, MonitorConfig, MonitorVerdict, SafetySpec};

/// Builds the degree-1 monitor used as the TTC baseline.
pub fn ttc_monitor_new(tau: f64, horizon: usize, spec: SafetySpec) -> Result<Monitor> {
    Monitor::new(MonitorConfig::new(tau, 1, horizon, spec))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TtcVerdict {
    pub verdict: MonitorVerdict,
    /// Predicted time to violation in units of `τ`.
    pub ttc_steps: Option<usize>,
}

impl TtcVerdict {
    pub fn from_verdict(verdict: &MonitorVerdict) -> Self {
        Self {
            ttc_steps: verdict.first_violation,
            verdict: verdict.clone(),
        }
    }

    pub fn ttc_seconds(&self, tau: f64) -> Option<f64> {
        self.ttc_steps.map(|m| m as f64 * tau)
    }
}
