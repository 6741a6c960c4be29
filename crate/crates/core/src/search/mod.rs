//! Constrained design-space exploration.
//!
//! A decision vector assigns one configuration index per dimension. The
//! objective is the geometric mean of predicted batch throughput minus a
//! soft penalty proportional to power and cache overshoot. Latency-critical
//! dimensions are pinned and excluded from the mean.

mod dds;
mod ga;

pub use dds::{dds_search, DdsParams, DdsResult};
pub use ga::{ga_search, GaParams, GaResult};

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config_space::{HeteroSpace, Space};
use crate::error::{Error, Result};

/// `(prod v)^(1/n)`, computed in log space.
pub fn geomean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("geometric mean of an empty list"));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("geometric mean needs positive values, got {v}")));
    }
    Ok((values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp())
}

/// Resource limits of one decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_power: f64,
    pub cache_ways: f64,
    pub qos_ms: f64,
}

/// Score and resource use of one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub score: f64,
    pub power: f64,
    pub cache: f64,
    pub feasible: bool,
}

/// A maximization problem over integer vectors.
pub trait Objective: Sync {
    fn dims(&self) -> usize;
    /// Allowed values of dimension `dim`.
    fn domain(&self, dim: usize) -> Range<usize>;
    fn evaluate(&self, x: &[usize]) -> Evaluation;
}

/// Wraps a closure as an unconstrained objective over `0..confs` per dim.
pub struct FnObjective<F> {
    pub dims: usize,
    pub confs: usize,
    pub f: F,
}

impl<F: Fn(&[usize]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dims(&self) -> usize {
        self.dims
    }
    fn domain(&self, _: usize) -> Range<usize> {
        0..self.confs
    }
    fn evaluate(&self, x: &[usize]) -> Evaluation {
        Evaluation {
            score: (self.f)(x),
            power: 0.0,
            cache: 0.0,
            feasible: true,
        }
    }
}

/// Core-count limits checked by the joint big/small search.
#[derive(Debug, Clone, Copy)]
pub struct ClassLimits<'a> {
    pub hetero: &'a HeteroSpace,
    pub n_big: usize,
    pub n_small: usize,
}

/// The allocation objective.
///
/// Dimensions `0..lc_dims` belong to latency-critical cores and use the
/// `lc_power` table; the remaining dimensions are batch apps with their
/// own predicted throughput (per index) and power (per core config).
pub struct AllocationProblem<'a> {
    pub space: &'a Space,
    pub lc_dims: usize,
    pub lc_power: &'a [f64],
    pub bips: &'a [Vec<f64>],
    pub power: &'a [Vec<f64>],
    pub domains: Vec<Range<usize>>,
    /// Fraction of time each batch app runs (below 1 when time-multiplexed).
    pub batch_share: f64,
    pub budget: Budget,
    pub penalty_wt: f64,
    pub class_limits: Option<ClassLimits<'a>>,
}

impl<'a> AllocationProblem<'a> {
    /// Every dimension may take any index of the space.
    pub fn new(
        space: &'a Space,
        lc_dims: usize,
        lc_power: &'a [f64],
        bips: &'a [Vec<f64>],
        power: &'a [Vec<f64>],
        budget: Budget,
        penalty_wt: f64,
    ) -> Self {
        AllocationProblem {
            space,
            lc_dims,
            lc_power,
            bips,
            power,
            domains: vec![0..space.len(); lc_dims + bips.len()],
            batch_share: 1.0,
            budget,
            penalty_wt,
            class_limits: None,
        }
    }

    /// Per-dimension power at `x` (time share applied to batch dims).
    pub fn dim_power(&self, x: &[usize]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(d, &i)| {
                let j = self.space.core_of(i);
                if d < self.lc_dims {
                    self.lc_power[j]
                } else {
                    self.batch_share * self.power[d - self.lc_dims][j]
                }
            })
            .collect()
    }

    pub fn batch_geomean(&self, x: &[usize]) -> f64 {
        let logs: f64 = x[self.lc_dims..]
            .iter()
            .enumerate()
            .map(|(b, &i)| self.bips[b][i].max(1e-9).ln())
            .sum();
        (logs / (x.len() - self.lc_dims).max(1) as f64).exp()
    }
}

impl Objective for AllocationProblem<'_> {
    fn dims(&self) -> usize {
        self.lc_dims + self.bips.len()
    }

    fn domain(&self, dim: usize) -> Range<usize> {
        self.domains[dim].clone()
    }

    fn evaluate(&self, x: &[usize]) -> Evaluation {
        let power: f64 = self.dim_power(x).iter().sum();
        let cache = system_cache(x, self.space);
        if let Some(l) = &self.class_limits {
            if !one_step_validity(x, l.hetero, l.n_big, l.n_small) {
                return Evaluation {
                    score: f64::NEG_INFINITY,
                    power,
                    cache,
                    feasible: false,
                };
            }
        }
        let over_p = (power - self.budget.max_power).max(0.0);
        let over_c = (cache - self.budget.cache_ways).max(0.0);
        Evaluation {
            score: self.batch_geomean(x) - self.penalty_wt * over_p - self.penalty_wt * over_c,
            power,
            cache,
            feasible: over_p <= 1e-9 * self.budget.max_power && over_c == 0.0,
        }
    }
}

/// Sum of per-dimension power; `power[d]` is indexed by core config.
pub fn system_power(x: &[usize], power: &[&[f64]], space: &Space) -> f64 {
    x.iter().zip(power).map(|(&i, p)| p[space.core_of(i)]).sum()
}

/// Total cache ways allocated by `x`.
pub fn system_cache(x: &[usize], space: &Space) -> f64 {
    x.iter().map(|&i| space.cache_ways_of(i).unwrap_or(0.0)).sum()
}

/// Cheapest configuration meeting QoS: minimal power, then minimal cache,
/// then lowest index. `power` is per core config.
pub fn lc_config_select(latency: &[f64], power: &[f64], space: &Space, qos_ms: f64) -> Option<usize> {
    let key = |i: usize| (power[space.core_of(i)], space.cache_ways_of(i).unwrap_or(f64::INFINITY), i);
    (0..latency.len()).filter(|&i| latency[i] <= qos_ms).min_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).then(ka.2.cmp(&kb.2))
    })
}

/// Deactivates unprotected dimensions in descending power (lower index on
/// ties) until the total fits `max_power`. Returns the deactivated dims.
pub fn power_repair(dim_power: &[f64], protected: &[bool], max_power: f64) -> Result<Vec<usize>> {
    let mut total: f64 = dim_power.iter().sum();
    let mut order: Vec<usize> = (0..dim_power.len())
        .filter(|&d| !protected.get(d).copied().unwrap_or(false))
        .collect();
    order.sort_by(|&a, &b| dim_power[b].total_cmp(&dim_power[a]).then(a.cmp(&b)));
    let mut off = Vec::new();
    for d in order {
        if total <= max_power {
            break;
        }
        total -= dim_power[d];
        off.push(d);
    }
    if total > max_power * (1.0 + 1e-12) {
        return Err(Error::Infeasible(format!(
            "{total:.3} W with every unprotected core off exceeds the {max_power:.3} W budget"
        )));
    }
    Ok(off)
}

/// Whether `x` uses at most `n_big` big and `n_small` small cores.
pub fn one_step_validity(x: &[usize], hetero: &HeteroSpace, n_big: usize, n_small: usize) -> bool {
    let big = x.iter().filter(|i| hetero.big_range().contains(i)).count();
    let small = x.iter().filter(|i| hetero.small_range().contains(i)).count();
    big <= n_big && small <= n_small && big + small == x.len()
}

/// Exhaustive argmax over the free dimensions in lexicographic order; the
/// first optimum found wins ties.
pub fn brute_force<O: Objective + ?Sized>(obj: &O, fixed: &[(usize, usize)]) -> Result<(Vec<usize>, Evaluation)> {
    const LIMIT: f64 = 1e7;
    let n = obj.dims();
    let mut x: Vec<usize> = (0..n).map(|d| obj.domain(d).start).collect();
    for &(d, v) in fixed {
        x[d] = v;
    }
    let free: Vec<usize> = (0..n).filter(|d| !fixed.iter().any(|f| f.0 == *d)).collect();
    let points: f64 = free.iter().map(|&d| obj.domain(d).len() as f64).product();
    if points > LIMIT {
        return Err(Error::SpaceTooLarge { points, limit: LIMIT });
    }
    let mut best = (x.clone(), obj.evaluate(&x));
    'outer: loop {
        // advance the odometer; the last free dimension turns fastest
        let mut k = free.len();
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            let d = free[k];
            x[d] += 1;
            if x[d] < obj.domain(d).end {
                break;
            }
            x[d] = obj.domain(d).start;
        }
        let e = obj.evaluate(&x);
        if e.score > best.1.score {
            best = (x.clone(), e);
        }
    }
    Ok(best)
}

/// One logged candidate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iter: usize,
    pub worker: usize,
    pub eval: Evaluation,
}

pub fn write_evaluation_log(log: &[LogEntry], path: &Path, header: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}").expect("string write");
        }
    }
    out.push_str("iter,worker,score,power,cache,feasible\n");
    for e in log {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.iter,
            e.worker,
            e.eval.score,
            e.eval.power,
            e.eval.cache,
            u8::from(e.eval.feasible)
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn geomean_examples() {
        assert_relative_eq!(geomean(&[2.0, 8.0]).unwrap(), 4.0, max_relative = 1e-12);
        assert_relative_eq!(geomean(&[3.5; 3]).unwrap(), 3.5, max_relative = 1e-12);
        assert_relative_eq!(geomean(&[1.0, 4.0, 16.0]).unwrap(), 4.0, max_relative = 1e-12);
        assert!(geomean(&[1.0, 0.0]).is_err());
        assert!(geomean(&[-1.0]).is_err());
        assert!(geomean(&[]).is_err());
    }

    fn toy() -> (Space, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let space = Space::default();
        let bips = vec![(0..108).map(|i| 1.0 + (107 - i) as f64 / 50.0).collect(); 2];
        let power = vec![(0..27).map(|j| 1.0 - j as f64 / 40.0).collect(); 2];
        (space, bips, power)
    }

    #[test]
    fn feasible_score_is_the_geomean() {
        let (space, bips, power) = toy();
        let budget = Budget {
            max_power: 10.0,
            cache_ways: 32.0,
            qos_ms: 1.0,
        };
        let p = AllocationProblem::new(&space, 0, &[], &bips, &power, budget, 2.0);
        let x = [5, 40];
        let e = p.evaluate(&x);
        assert!(e.feasible);
        assert_relative_eq!(e.score, geomean(&[bips[0][5], bips[1][40]]).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn one_watt_over_costs_the_penalty_weight() {
        let (space, bips, power) = toy();
        let x = [0, 0]; // 2 W, 8 ways
        let budget = Budget {
            max_power: 1.0,
            cache_ways: 32.0,
            qos_ms: 1.0,
        };
        let p = AllocationProblem::new(&space, 0, &[], &bips, &power, budget, 2.0);
        let e = p.evaluate(&x);
        assert!(!e.feasible);
        assert_relative_eq!(e.score, p.batch_geomean(&x) - 2.0, max_relative = 1e-12);
    }

    #[test]
    fn smaller_violation_never_scores_lower() {
        let (space, bips, power) = toy();
        let budget = Budget {
            max_power: 1.5,
            cache_ways: 4.0,
            qos_ms: 1.0,
        };
        let p = AllocationProblem::new(&space, 0, &[], &bips, &power, budget, 2.0);
        // same throughput row, so equal geomean; first uses less cache
        let a = p.evaluate(&[1, 0]);
        let b = p.evaluate(&[0, 1]);
        assert_relative_eq!(a.score, b.score);
        let bips2 = vec![vec![1.0; 108]; 2];
        let q = AllocationProblem::new(&space, 0, &[], &bips2, &power, budget, 2.0);
        assert!(q.evaluate(&[2, 2]).score > q.evaluate(&[3, 3]).score);
    }

    #[test]
    fn lc_dims_are_outside_the_mean_but_inside_the_power() {
        let (space, bips, power) = toy();
        let lc_power: Vec<f64> = vec![0.5; 27];
        let budget = Budget {
            max_power: 100.0,
            cache_ways: 32.0,
            qos_ms: 1.0,
        };
        let p = AllocationProblem::new(&space, 2, &lc_power, &bips, &power, budget, 2.0);
        let x = [107, 107, 0, 0];
        let e = p.evaluate(&x);
        assert_relative_eq!(e.score, bips[0][0], max_relative = 1e-12);
        assert_relative_eq!(e.power, 0.5 + 0.5 + 1.0 + 1.0, max_relative = 1e-12);
        assert_relative_eq!(e.cache, 4.0 + 4.0 + 0.5 + 0.5);
    }

    #[test]
    fn system_sums() {
        let space = Space::default();
        let pw: Vec<f64> = (0..27).map(|j| j as f64).collect();
        assert_eq!(system_power(&[4 * 7 + 2], &[&pw], &space), 7.0);
        assert_eq!(system_cache(&vec![0; 32], &space), 16.0);
        let x = [3, 9, 50];
        let tables = [&pw[..], &pw[..], &pw[..]];
        let expect: f64 = x.iter().map(|&i| pw[i / 4]).sum();
        assert_eq!(system_power(&x, &tables, &space), expect);
    }

    #[test]
    fn lc_selection_rules() {
        let space = Space::default();
        let power: Vec<f64> = (0..27).map(|j| 2.0 - j as f64 * 0.05).collect();
        assert_eq!(lc_config_select(&[10.0; 108], &power, &space, 5.0), None);
        let mut lat = vec![10.0; 108];
        lat[17] = 4.0;
        assert_eq!(lc_config_select(&lat, &power, &space, 5.0), Some(17));
        // equal power within a core config: least cache wins
        lat[18] = 4.0;
        lat[19] = 4.0;
        assert_eq!(lc_config_select(&lat, &power, &space, 5.0), Some(17));
        lat[16] = 4.0;
        assert_eq!(lc_config_select(&lat, &power, &space, 5.0), Some(16));
    }

    #[test]
    fn power_repair_sheds_largest_first() {
        assert_eq!(power_repair(&[5.0, 3.0, 2.0], &[], 6.0).unwrap(), vec![0]);
        assert!(power_repair(&[5.0, 3.0, 2.0], &[], 10.0).unwrap().is_empty());
        assert!(matches!(power_repair(&[5.0, 3.0], &[true, false], 4.0), Err(Error::Infeasible(_))));
        assert_eq!(power_repair(&[5.0, 3.0, 2.0], &[true, false, false], 5.0).unwrap(), vec![1, 2]);
    }

    #[test]
    fn validity_counts_classes() {
        let h = HeteroSpace::default();
        let (b, s) = (10, 3);
        assert!(one_step_validity(&[b, b, s, s], &h, 2, 2));
        assert!(!one_step_validity(&[b, b, b, s], &h, 2, 2));
    }

    #[test]
    fn brute_force_scans_and_breaks_ties_low() {
        let o = FnObjective {
            dims: 1,
            confs: 5,
            f: |x: &[usize]| -(x[0] as f64 - 3.0).abs(),
        };
        assert_eq!(brute_force(&o, &[]).unwrap().0, vec![3]);
        let sym = FnObjective {
            dims: 2,
            confs: 4,
            f: |x: &[usize]| (x[0] as f64 - 1.5).abs() + (x[1] as f64 - 1.5).abs(),
        };
        assert_eq!(brute_force(&sym, &[]).unwrap().0, vec![0, 0]);
        let pinned = brute_force(&sym, &[(0, 2)]).unwrap();
        assert_eq!(pinned.0, vec![2, 0]);
        let big = FnObjective {
            dims: 5,
            confs: 108,
            f: |_: &[usize]| 0.0,
        };
        assert!(matches!(brute_force(&big, &[]), Err(Error::SpaceTooLarge { .. })));
    }
}
