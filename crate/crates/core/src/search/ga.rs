//! Generational genetic algorithm: binary tournaments, uniform crossover,
//! per-gene uniform mutation and one elite. Each worker evolves an
//! independent population from its own random stream; the best individual
//! over all workers is returned.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Evaluation, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1 / free dims`.
    pub mutation_rate: Option<f64>,
    pub elitism: usize,
    pub workers: usize,
    /// Optional cap on evaluations per worker.
    pub max_evaluations: Option<usize>,
    /// Initial population; random when `None`.
    pub seed_population: Option<Vec<Vec<usize>>>,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population: 20,
            generations: 25,
            tournament: 2,
            crossover_rate: 0.9,
            mutation_rate: None,
            elitism: 1,
            workers: 1,
            max_evaluations: None,
            seed_population: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: Vec<usize>,
    pub eval: Evaluation,
    pub evaluations: usize,
    /// Best score after each generation (first worker).
    pub best_history: Vec<f64>,
}

struct Run {
    best: (Vec<usize>, Evaluation),
    evaluations: usize,
    history: Vec<f64>,
}

fn evolve<O: Objective + ?Sized>(params: &GaParams, obj: &O, base: &[usize], free: &[usize], mut rng: ChaCha8Rng) -> Run {
    let pop_size = params.population.max(1);
    let budget = params.max_evaluations.unwrap_or(usize::MAX);
    let mutation = params.mutation_rate.unwrap_or(1.0 / free.len().max(1) as f64);
    let mut pop: Vec<Vec<usize>> = match &params.seed_population {
        Some(seeded) => seeded.iter().cycle().take(pop_size).cloned().collect(),
        None => (0..pop_size)
            .map(|_| {
                let mut x = base.to_vec();
                for &d in free {
                    x[d] = rng.random_range(obj.domain(d));
                }
                x
            })
            .collect(),
    };
    let mut evaluations = 0;
    let mut best: Option<(Vec<usize>, Evaluation)> = None;
    let mut history = Vec::with_capacity(params.generations);
    for _ in 0..params.generations {
        let take = pop.len().min(budget - evaluations);
        if take == 0 {
            break;
        }
        pop.truncate(take);
        let scored: Vec<(Vec<usize>, Evaluation)> = pop
            .drain(..)
            .map(|x| {
                let e = obj.evaluate(&x);
                (x, e)
            })
            .collect();
        evaluations += scored.len();
        for (x, e) in &scored {
            if best.as_ref().is_none_or(|b| e.score > b.1.score) {
                best = Some((x.clone(), *e));
            }
        }
        history.push(best.as_ref().expect("evaluated").1.score);

        let mut ranked: Vec<usize> = (0..scored.len()).collect();
        ranked.sort_by(|&a, &b| scored[b].1.score.total_cmp(&scored[a].1.score).then(a.cmp(&b)));
        let mut next: Vec<Vec<usize>> = ranked
            .iter()
            .take(params.elitism.min(pop_size))
            .map(|&k| scored[k].0.clone())
            .collect();
        let pick = |rng: &mut ChaCha8Rng| -> usize {
            let mut winner = rng.random_range(0..scored.len());
            for _ in 1..params.tournament.max(1) {
                let c = rng.random_range(0..scored.len());
                if scored[c].1.score > scored[winner].1.score {
                    winner = c;
                }
            }
            winner
        };
        while next.len() < pop_size {
            let a = &scored[pick(&mut rng)].0;
            let b = &scored[pick(&mut rng)].0;
            let mut child = a.clone();
            if rng.random::<f64>() < params.crossover_rate {
                for &d in free {
                    if rng.random::<bool>() {
                        child[d] = b[d];
                    }
                }
            }
            for &d in free {
                if rng.random::<f64>() < mutation {
                    child[d] = rng.random_range(obj.domain(d));
                }
            }
            next.push(child);
        }
        pop = next;
    }
    let best = best.unwrap_or_else(|| {
        let e = obj.evaluate(base);
        (base.to_vec(), e)
    });
    Run {
        best,
        evaluations,
        history,
    }
}

/// Maximizes `obj` with dimensions in `fixed` pinned.
pub fn ga_search<O: Objective + ?Sized>(params: &GaParams, obj: &O, fixed: &[(usize, usize)]) -> GaResult {
    let n = obj.dims();
    let mut base: Vec<usize> = (0..n).map(|d| obj.domain(d).start).collect();
    for &(d, v) in fixed {
        base[d] = v;
    }
    let free: Vec<usize> = (0..n).filter(|d| !fixed.iter().any(|f| f.0 == *d)).collect();
    let runs: Vec<Run> = (0..params.workers.max(1))
        .into_par_iter()
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(w as u64 + 1);
            evolve(params, obj, &base, &free, rng)
        })
        .collect();
    let evaluations = runs.iter().map(|r| r.evaluations).sum();
    let history = runs[0].history.clone();
    let best = runs
        .into_iter()
        .map(|r| r.best)
        .reduce(|a, b| if b.1.score > a.1.score { b } else { a })
        .expect("at least one worker");
    GaResult {
        best: best.0,
        eval: best.1,
        evaluations,
        best_history: history,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::FnObjective;

    #[test]
    fn evaluation_budget_per_worker() {
        let o = FnObjective {
            dims: 5,
            confs: 10,
            f: |x: &[usize]| x[0] as f64,
        };
        let r = ga_search(&GaParams::default(), &o, &[]);
        assert_eq!(r.evaluations, 500);
        let capped = GaParams {
            workers: 3,
            max_evaluations: Some(130),
            ..GaParams::default()
        };
        assert_eq!(ga_search(&capped, &o, &[]).evaluations, 390);
    }

    #[test]
    fn degenerate_population_stays_put() {
        let o = FnObjective {
            dims: 3,
            confs: 10,
            f: |x: &[usize]| x.iter().sum::<usize>() as f64,
        };
        let params = GaParams {
            mutation_rate: Some(0.0),
            seed_population: Some(vec![vec![4, 1, 7]]),
            ..GaParams::default()
        };
        let r = ga_search(&params, &o, &[]);
        assert_eq!(r.best, vec![4, 1, 7]);
    }

    #[test]
    fn best_is_monotone_and_fixed_dims_hold() {
        let o = FnObjective {
            dims: 4,
            confs: 8,
            f: |x: &[usize]| (x[1] * x[2]) as f64 - x[3] as f64,
        };
        let r = ga_search(
            &GaParams {
                seed: 5,
                ..GaParams::default()
            },
            &o,
            &[(0, 6)],
        );
        assert_eq!(r.best[0], 6);
        assert!(r.best_history.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(
            r,
            ga_search(
                &GaParams {
                    seed: 5,
                    ..GaParams::default()
                },
                &o,
                &[(0, 6)]
            )
        );
    }
}
