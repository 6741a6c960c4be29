//! Ground-truth application behaviour: the simulated hardware.
//!
//! An [`AppProfile`] holds the exact throughput of an application at every
//! configuration index, its power at every core configuration, and (for
//! latency-critical services) its tail latency over a load grid.

mod generate;
mod io;
mod lattice;
mod scenario;

pub use generate::{generate_synthetic, generate_synthetic_with_exact, GeneratorConfig, SyntheticSet, WorkloadGenerator};
pub use io::{load_profiles, save_profiles, save_training_db, LoadedProfiles, ProfileSummary};
pub use lattice::Lattice;
pub use scenario::{Scenario, ScenarioBuilder, ScenarioFile, Schedule};

use serde::{Deserialize, Serialize};

use crate::config_space::Space;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppKind {
    Batch,
    LatencyCritical,
}

impl AppKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AppKind::Batch => "batch",
            AppKind::LatencyCritical => "latency_critical",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "batch" => Some(AppKind::Batch),
            "latency_critical" => Some(AppKind::LatencyCritical),
            _ => None,
        }
    }
}

/// Tail latency (ms) over an ascending load grid, per configuration index.
/// Between grid points latency is interpolated linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySurface {
    loads: Vec<f64>,
    /// `values[index * loads.len() + l]`
    values: Vec<f64>,
}

impl LatencySurface {
    pub fn new(loads: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if loads.is_empty() || !values.len().is_multiple_of(loads.len()) {
            return Err(Error::domain("latency surface shape does not match its load grid"));
        }
        if loads.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("load grid must be strictly increasing"));
        }
        Ok(LatencySurface { loads, values })
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    pub fn index_count(&self) -> usize {
        self.values.len() / self.loads.len()
    }

    pub fn grid_value(&self, index: usize, load_point: usize) -> f64 {
        self.values[index * self.loads.len() + load_point]
    }

    /// Latency at `index` and `load`; load is clamped to the grid.
    pub fn at(&self, index: usize, load: f64) -> f64 {
        let row = &self.values[index * self.loads.len()..(index + 1) * self.loads.len()];
        let loads = &self.loads;
        if load <= loads[0] {
            return row[0];
        }
        let last = loads.len() - 1;
        if load >= loads[last] {
            return row[last];
        }
        let hi = loads.partition_point(|&l| l < load);
        let lo = hi - 1;
        let t = (load - loads[lo]) / (loads[hi] - loads[lo]);
        row[lo] + t * (row[hi] - row[lo])
    }
}

/// Exact behaviour of one application across the whole design space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub id: String,
    pub kind: AppKind,
    /// BIPS per configuration index.
    pub throughput: Vec<f64>,
    /// Watts per core configuration (cache-independent).
    pub power: Vec<f64>,
    pub latency: Option<LatencySurface>,
}

/// Oracle values at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub bips: f64,
    pub watts: f64,
    pub latency_ms: Option<f64>,
}

impl AppProfile {
    pub fn is_latency_critical(&self) -> bool {
        self.kind == AppKind::LatencyCritical
    }

    pub fn bips(&self, index: usize) -> f64 {
        self.throughput[index]
    }

    /// Power at a configuration index (looks up its core configuration).
    pub fn watts(&self, space: &Space, index: usize) -> f64 {
        self.power[space.core_of(index)]
    }

    pub fn tail_latency(&self, index: usize, load: f64) -> Option<f64> {
        self.latency.as_ref().map(|l| l.at(index, load))
    }

    /// Checks shape against `space`.
    pub fn validate(&self, space: &Space) -> Result<()> {
        if self.throughput.len() != space.len() {
            return Err(Error::domain(format!(
                "app {}: {} throughput entries for a space of {}",
                self.id,
                self.throughput.len(),
                space.len()
            )));
        }
        if self.power.len() != space.core_count() {
            return Err(Error::domain(format!(
                "app {}: {} power entries for {} core configurations",
                self.id,
                self.power.len(),
                space.core_count()
            )));
        }
        match (&self.latency, self.kind) {
            (Some(l), AppKind::LatencyCritical) if l.index_count() == space.len() => Ok(()),
            (None, AppKind::Batch) => Ok(()),
            _ => Err(Error::domain(format!(
                "app {}: latency surface does not match kind {}",
                self.id,
                self.kind.as_str()
            ))),
        }
    }

    /// Lists violations of the monotonicity invariants (empty when none).
    pub fn monotonicity_violations(&self, space: &Space) -> Vec<String> {
        let full = Lattice::full(space);
        let cores = Lattice::cores(space);
        let mut out = Vec::new();
        for (i, preds) in full.preds.iter().enumerate() {
            for &p in preds {
                if self.throughput[p] > self.throughput[i] * (1.0 + 1e-12) {
                    out.push(format!("throughput decreases from index {p} to {i}"));
                }
                if let Some(lat) = &self.latency {
                    for l in 0..lat.loads.len() {
                        if lat.grid_value(p, l) < lat.grid_value(i, l) * (1.0 - 1e-12) {
                            out.push(format!("latency increases from index {p} to {i}"));
                        }
                    }
                }
            }
        }
        for (j, preds) in cores.preds.iter().enumerate() {
            for &p in preds {
                if self.power[p] > self.power[j] * (1.0 + 1e-12) {
                    out.push(format!("power decreases from core config {p} to {j}"));
                }
            }
        }
        if let Some(lat) = &self.latency {
            for i in 0..lat.index_count() {
                for l in 1..lat.loads.len() {
                    if lat.grid_value(i, l) < lat.grid_value(i, l - 1) {
                        out.push(format!("latency decreases with load at index {i}"));
                    }
                }
            }
        }
        out
    }
}

/// Oracle lookup. `load` is ignored for batch applications.
pub fn ground_truth(profile: &AppProfile, space: &Space, index: usize, load: f64) -> Result<GroundTruth> {
    if index >= space.len() {
        return Err(Error::domain(format!(
            "configuration index {index} out of range 0..{}",
            space.len()
        )));
    }
    let latency_ms = match profile.kind {
        AppKind::Batch => None,
        AppKind::LatencyCritical => {
            if !(0.0..=1.0).contains(&load) {
                return Err(Error::domain(format!("load {load} outside [0, 1]")));
            }
            profile.tail_latency(index, load)
        }
    };
    Ok(GroundTruth {
        bips: profile.bips(index),
        watts: profile.watts(space, index),
        latency_ms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> (Space, SyntheticSet) {
        let space = Space::default();
        let set = WorkloadGenerator::new(3, space.clone(), GeneratorConfig::default())
            .unwrap()
            .generate(3, 2);
        (space, set)
    }

    #[test]
    fn batch_apps_have_no_latency() {
        let (space, set) = set();
        for i in [0, 17, 107] {
            let gt = ground_truth(&set.batch[0], &space, i, 0.9).unwrap();
            assert!(gt.latency_ms.is_none());
        }
    }

    #[test]
    fn latency_grows_with_load() {
        let (space, set) = set();
        let lc = &set.latency_critical[0];
        for i in 0..space.len() {
            let lo = ground_truth(lc, &space, i, 0.2).unwrap().latency_ms.unwrap();
            let hi = ground_truth(lc, &space, i, 0.8).unwrap().latency_ms.unwrap();
            assert!(hi >= lo, "index {i}: {hi} < {lo}");
        }
    }

    #[test]
    fn power_is_cache_independent() {
        let (space, set) = set();
        let app = &set.batch[1];
        for j in 0..space.core_count() {
            let w0 = ground_truth(app, &space, space.index_of(j, 0), 0.0).unwrap().watts;
            for k in 1..space.cache_count() {
                let wk = ground_truth(app, &space, space.index_of(j, k), 0.0).unwrap().watts;
                assert_eq!(w0, wk);
            }
        }
    }

    #[test]
    fn ground_truth_rejects_bad_inputs() {
        let (space, set) = set();
        assert!(ground_truth(&set.batch[0], &space, 108, 0.0).is_err());
        assert!(ground_truth(&set.latency_critical[0], &space, 0, 1.5).is_err());
        // load is ignored for batch apps
        assert!(ground_truth(&set.batch[0], &space, 0, 1.5).is_ok());
    }

    #[test]
    fn latency_interpolates_linearly() {
        let s = LatencySurface::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.at(0, 0.25), 1.5);
        assert_eq!(s.at(0, 0.75), 3.0);
        assert_eq!(s.at(0, 2.0), 4.0);
        assert_eq!(s.at(0, -1.0), 1.0);
    }
}
