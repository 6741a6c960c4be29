//! Parallel dynamically dimensioned search.
//!
//! After a random initial population, every iteration has each worker
//! generate candidates around its local best by perturbing a random subset
//! of free dimensions. The subset shrinks as iterations progress: each
//! dimension is included with probability `1 - ln(i) / ln(max_iter)`.
//! Workers synchronize at the end of each iteration, where the global best
//! is reduced from the local bests and seeds the next iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Evaluation, LogEntry, Objective};

/// A point with its evaluation.
type Incumbent = (Vec<usize>, Evaluation);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdsParams {
    pub initial_random_points: usize,
    /// Perturbation scales, one per quarter of the workers.
    pub r_values: [f64; 4],
    pub penalty_wt: f64,
    pub points_per_iteration: usize,
    pub max_iter: usize,
    pub workers: usize,
    pub seed: u64,
}

impl Default for DdsParams {
    fn default() -> Self {
        DdsParams {
            initial_random_points: 50,
            r_values: [0.2, 0.3, 0.4, 0.5],
            penalty_wt: 2.0,
            points_per_iteration: 10,
            max_iter: 40,
            workers: 4,
            seed: 0,
        }
    }
}

impl DdsParams {
    /// Inclusion probability at iteration `i` (1-based).
    pub fn inclusion_probability(&self, i: usize) -> f64 {
        if self.max_iter <= 1 {
            return 1.0;
        }
        (1.0 - (i as f64).ln() / (self.max_iter as f64).ln()).clamp(0.0, 1.0)
    }

    /// Perturbation scale of worker `w`.
    pub fn r_for_worker(&self, w: usize) -> f64 {
        let group = (w * 4 / self.workers.max(1)).min(3);
        self.r_values[group]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdsResult {
    pub best: Vec<usize>,
    pub eval: Evaluation,
    pub log: Vec<LogEntry>,
    pub initial_evaluations: usize,
    pub iteration_evaluations: usize,
    /// Best score after the initial population and after each iteration.
    pub best_history: Vec<f64>,
}

impl DdsResult {
    pub fn evaluations(&self) -> usize {
        self.initial_evaluations + self.iteration_evaluations
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mirrors `v` into `[lo, hi]` as if reflected off each violated bound.
pub fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let t = (v - lo).rem_euclid(2.0 * w);
    lo + if t > w { 2.0 * w - t } else { t }
}

fn step(rng: &mut ChaCha8Rng, current: usize, lo: usize, hi: usize, r: f64) -> usize {
    let n = (hi - lo + 1) as f64;
    let draw = |rng: &mut ChaCha8Rng| {
        let z: f64 = StandardNormal.sample(rng);
        reflect(current as f64 + r * n * z, lo as f64, hi as f64).round() as usize
    };
    let v = draw(rng);
    if v != current {
        v
    } else {
        draw(rng)
    }
}

fn random_point<O: Objective + ?Sized>(obj: &O, base: &[usize], free: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut x = base.to_vec();
    for &d in free {
        x[d] = rng.random_range(obj.domain(d));
    }
    x
}

/// Maximizes `obj` with dimensions in `fixed` pinned to the given values.
pub fn dds_search<O: Objective + ?Sized>(params: &DdsParams, obj: &O, fixed: &[(usize, usize)]) -> DdsResult {
    let n = obj.dims();
    let workers = params.workers.max(1);
    let mut base: Vec<usize> = (0..n).map(|d| obj.domain(d).start).collect();
    for &(d, v) in fixed {
        base[d] = v;
    }
    let free: Vec<usize> = (0..n).filter(|d| !fixed.iter().any(|f| f.0 == *d)).collect();

    let mut init_rng = rng_for(params.seed, 0);
    let initial: Vec<Vec<usize>> = (0..params.initial_random_points.max(1))
        .map(|_| random_point(obj, &base, &free, &mut init_rng))
        .collect();
    let evals: Vec<Evaluation> = initial.par_iter().map(|x| obj.evaluate(x)).collect();
    let mut log: Vec<LogEntry> = evals.iter().map(|&eval| LogEntry { iter: 0, worker: 0, eval }).collect();
    let mut best_idx = 0;
    for (k, e) in evals.iter().enumerate() {
        if e.score > evals[best_idx].score {
            best_idx = k;
        }
    }
    let mut best = (initial[best_idx].clone(), evals[best_idx]);
    let mut history = vec![best.1.score];
    let mut rngs: Vec<ChaCha8Rng> = (0..workers).map(|w| rng_for(params.seed, w as u64 + 1)).collect();
    let mut iteration_evaluations = 0;

    if !free.is_empty() {
        for it in 1..=params.max_iter {
            let p = params.inclusion_probability(it);
            let start = best.clone();
            let results: Vec<(Incumbent, Vec<LogEntry>)> = rngs
                .par_iter_mut()
                .enumerate()
                .map(|(w, rng)| {
                    let r = params.r_for_worker(w);
                    let mut local = start.clone();
                    let mut wlog = Vec::with_capacity(params.points_per_iteration);
                    for _ in 0..params.points_per_iteration {
                        let mut chosen: Vec<usize> = free.iter().copied().filter(|_| rng.random::<f64>() < p).collect();
                        if chosen.is_empty() {
                            chosen.push(free[rng.random_range(0..free.len())]);
                        }
                        let mut cand = local.0.clone();
                        for d in chosen {
                            let dom = obj.domain(d);
                            cand[d] = step(rng, cand[d], dom.start, dom.end - 1, r);
                        }
                        let e = obj.evaluate(&cand);
                        wlog.push(LogEntry {
                            iter: it,
                            worker: w,
                            eval: e,
                        });
                        if e.score > local.1.score {
                            local = (cand, e);
                        }
                    }
                    (local, wlog)
                })
                .collect();
            for (local, wlog) in results {
                iteration_evaluations += wlog.len();
                log.extend(wlog);
                if local.1.score > best.1.score {
                    best = local;
                }
            }
            history.push(best.1.score);
        }
    }
    DdsResult {
        best: best.0,
        eval: best.1,
        log,
        initial_evaluations: initial.len(),
        iteration_evaluations,
        best_history: history,
    }
}
