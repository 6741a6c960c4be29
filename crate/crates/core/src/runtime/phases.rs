use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulated durations of the management phases, in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseCosts {
    /// High/low paired profiling.
    pub profile_ms: f64,
    /// The three concurrent reconstructions.
    pub reconstruct_ms: f64,
    /// Parallel DDS over the homogeneous space.
    pub search_ms: f64,
    /// Power profiling before core gating.
    pub gating_profile_ms: f64,
    /// Big/small paired sampling on fully provisioned cores.
    pub hetero_pair_ms: f64,
    /// 3MM3 replicated sampling of big-core configurations.
    pub hetero_sampling_ms: f64,
    /// Per-class search on the big/small system, before sync overhead.
    pub hetero_search_ms: f64,
    /// Fractional synchronization overhead added to hetero search.
    pub sync_overhead: f64,
    /// Joint sampling of the one-step algorithm.
    pub one_step_sampling_ms: f64,
    /// One-step search time as a multiple of the two-step search.
    pub one_step_search_factor: f64,
    /// Charged once per quantum in which any core changes configuration.
    pub reconfig_ms: f64,
}

impl Default for PhaseCosts {
    fn default() -> Self {
        PhaseCosts {
            profile_ms: 2.0,
            reconstruct_ms: 4.8,
            search_ms: 1.3,
            gating_profile_ms: 1.0,
            hetero_pair_ms: 2.0,
            hetero_sampling_ms: 8.0,
            hetero_search_ms: 0.9,
            sync_overhead: 0.10,
            one_step_sampling_ms: 18.0,
            one_step_search_factor: 2.0,
            reconfig_ms: 0.0,
        }
    }
}

impl PhaseCosts {
    pub fn two_step_search_ms(&self) -> f64 {
        self.hetero_search_ms * (1.0 + self.sync_overhead)
    }

    pub fn one_step_search_ms(&self) -> f64 {
        self.one_step_search_factor * self.two_step_search_ms()
    }

    pub fn validate(&self, quantum_ms: f64) -> Result<()> {
        let all = [
            self.profile_ms,
            self.reconstruct_ms,
            self.search_ms,
            self.gating_profile_ms,
            self.hetero_pair_ms,
            self.hetero_sampling_ms,
            self.hetero_search_ms,
            self.sync_overhead,
            self.one_step_sampling_ms,
            self.one_step_search_factor,
            self.reconfig_ms,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("phase costs must be finite and non-negative"));
        }
        let longest = [
            self.profile_ms + self.reconstruct_ms + self.search_ms,
            self.hetero_pair_ms + self.hetero_sampling_ms + self.two_step_search_ms(),
            self.one_step_sampling_ms + self.one_step_search_ms(),
            self.gating_profile_ms,
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if longest + self.reconfig_ms >= quantum_ms {
            return Err(Error::domain("management phases leave no steady state in the quantum"));
        }
        Ok(())
    }
}
