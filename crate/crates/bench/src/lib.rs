//! Fixed benchmark instances shared by `benches/algorithms.rs`.

use reconfig_sched::reconstruct::{RatingsMatrix, RowKind};
use reconfig_sched::sampling::{profiling_indices, three_mm3_design};
use reconfig_sched::search::{AllocationProblem, Budget};
use reconfig_sched::surrogate::coords;
use reconfig_sched::workload::{GeneratorConfig, WorkloadGenerator};
use reconfig_sched::Space;

/// 16 fully observed training rows and 16 active rows with the two
/// profiling samples, over the 108 homogeneous configurations.
pub fn ratings(seed: u64) -> RatingsMatrix {
    let space = Space::default();
    let (hi, lo) = profiling_indices(space.as_homogeneous().expect("homogeneous"));
    let set = WorkloadGenerator::new(seed, space, GeneratorConfig::default())
        .expect("generator")
        .generate(32, 0);
    let mut r = RatingsMatrix::new(108);
    for a in &set.batch[..16] {
        r.push_full(RowKind::Training, &a.throughput).expect("row");
    }
    for a in &set.batch[16..] {
        r.push_sparse(RowKind::Active, &[(hi, a.bips(hi)), (lo, a.bips(lo))]).expect("row");
    }
    r
}

/// Ground-truth tables for a batch-only allocation over `n_apps` cores.
pub struct Tables {
    pub space: Space,
    pub bips: Vec<Vec<f64>>,
    pub power: Vec<Vec<f64>>,
    pub budget: Budget,
}

impl Tables {
    pub fn new(seed: u64, n_apps: usize, cap: f64) -> Self {
        let space = Space::default();
        let set = WorkloadGenerator::new(seed, space.clone(), GeneratorConfig::default())
            .expect("generator")
            .generate(n_apps, 0);
        let bips: Vec<Vec<f64>> = set.batch.iter().map(|a| a.throughput.clone()).collect();
        let power: Vec<Vec<f64>> = set.batch.iter().map(|a| a.power.clone()).collect();
        let peak: f64 = power.iter().map(|p| p[0]).sum();
        let budget = Budget {
            max_power: cap * peak,
            cache_ways: 32.0,
            qos_ms: f64::INFINITY,
        };
        Tables {
            space,
            bips,
            power,
            budget,
        }
    }

    pub fn problem(&self) -> AllocationProblem<'_> {
        AllocationProblem::new(&self.space, 0, &[], &self.bips, &self.power, self.budget, 2.0)
    }
}

/// The nine 3MM3 centers with a smooth positive response.
pub fn rbf_points() -> Vec<([f64; 3], f64)> {
    three_mm3_design()
        .runs
        .iter()
        .map(|&c| {
            let x = coords(c);
            (x, 1.0 + 0.5 * x[0] + 0.3 * x[1] * x[1] + 0.2 * x[0] * x[2])
        })
        .collect()
}
