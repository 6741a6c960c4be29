//! Two-step and one-step management of a big/small multicore.

use std::ops::Range;

use super::{derive_seed, enforce_budget, Decision, PhaseKind, Simulator, Slot};
use crate::config_space::{CoreClass, HeteroSpace};
use crate::error::{Error, Result};
use crate::sampling::{paired_sampling, replicated_sample, three_mm3_design};
use crate::search::{dds_search, AllocationProblem, Budget, ClassLimits, DdsParams};
use crate::surrogate::{coords, fit_rbf};
use crate::workload::AppProfile;

/// Sub-samples per 1 ms replicated sample.
const REPLICATES: usize = 8;

/// Maps apps to core classes by descending big/small throughput ratio;
/// the top `n_big` go to big cores. Ties go to the lower app id.
pub fn greedy_map(ids: &[&str], big: &[f64], small: &[f64], n_big: usize, n_small: usize) -> Result<Vec<CoreClass>> {
    let n = ids.len();
    if big.len() != n || small.len() != n {
        return Err(Error::domain("one big and one small sample per app are required"));
    }
    if n > n_big + n_small {
        return Err(Error::domain(format!("{n} apps for {} cores", n_big + n_small)));
    }
    let ratio = |a: usize| big[a] / small[a].max(f64::MIN_POSITIVE);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(ids[a].cmp(ids[b])));
    let mut out = vec![CoreClass::Small; n];
    for &a in order.iter().take(n_big) {
        out[a] = CoreClass::Big;
    }
    // more apps than small cores spill onto big cores
    let spill = n.saturating_sub(n_big).saturating_sub(n_small);
    for &a in order.iter().skip(n_big).take(spill) {
        out[a] = CoreClass::Big;
    }
    Ok(out)
}

/// First half of the apps on fully provisioned big cores, the rest small.
pub(super) fn initial_mapping(h: &HeteroSpace, n: usize) -> Vec<Option<usize>> {
    (0..n)
        .map(|a| {
            let class = if a < n / 2 { CoreClass::Big } else { CoreClass::Small };
            Some(h.full_index(class))
        })
        .collect()
}

/// Hetero indices of the 3MM3 big-core design, paired with level coordinates.
fn big_design(h: &HeteroSpace) -> Vec<(usize, [f64; 3])> {
    let design = three_mm3_design();
    let configs = design.configs(h.big()).expect("three-level big space");
    design
        .runs
        .iter()
        .zip(configs)
        .map(|(code, cfg)| (h.encode(CoreClass::Big, cfg).expect("in space"), coords(*code)))
        .collect()
}

fn small_configs(h: &HeteroSpace) -> Vec<usize> {
    h.small_range().collect()
}

/// Throughput and power tables of one app over the whole hetero space.
#[derive(Debug, Clone)]
struct Tables {
    bips: Vec<f64>,
    watts: Vec<f64>,
}

impl Tables {
    fn new(len: usize) -> Self {
        Tables {
            bips: vec![1e-9; len],
            watts: vec![0.0; len],
        }
    }

    fn set(&mut self, index: usize, bips: f64, watts: f64) {
        self.bips[index] = bips;
        self.watts[index] = watts;
    }

    /// Fills every big configuration from an RBF fit of the samples.
    fn fill_big(&mut self, h: &HeteroSpace, samples: &[([f64; 3], f64, f64)]) -> Result<()> {
        let b: Vec<_> = samples.iter().map(|s| (s.0, s.1)).collect();
        let w: Vec<_> = samples.iter().map(|s| (s.0, s.2)).collect();
        let (fb, fw) = (fit_rbf(&b)?, fit_rbf(&w)?);
        let big = h.big();
        for j in 0..big.core_count() {
            let code = big.level_code(j)?;
            let idx = h.encode(CoreClass::Big, big.core_config(j)?)?;
            let x = coords(code);
            self.set(idx, fb.predict(&x).max(1e-6), fw.predict(&x).max(1e-6));
        }
        Ok(())
    }
}

fn class_range(h: &HeteroSpace, class: CoreClass) -> Range<usize> {
    match class {
        CoreClass::Small => h.small_range(),
        _ => h.big_range(),
    }
}

fn search_problem<'a>(
    sim: &'a Simulator<'_>,
    bips: &'a [Vec<f64>],
    watts: &'a [Vec<f64>],
    domains: Vec<Range<usize>>,
    cap_w: f64,
) -> AllocationProblem<'a> {
    let sc = sim.sc;
    let mut p = AllocationProblem::new(
        &sc.space,
        0,
        &[],
        bips,
        watts,
        Budget {
            max_power: cap_w,
            cache_ways: sc.cache_ways,
            qos_ms: sc.qos_target_ms,
        },
        sim.opts.dds.penalty_wt,
    );
    p.domains = domains;
    p
}

fn sample(app: &AppProfile, sim: &mut Simulator<'_>, index: usize, ms: f64) -> Result<(f64, f64)> {
    let sc = sim.sc;
    let s = replicated_sample(app, &sc.space, index, 0.0, REPLICATES, ms, &sc.noise, &mut sim.state.noise)?;
    Ok((s.bips, s.watts))
}

pub(super) fn run_two_step(sim: &mut Simulator<'_>, t0: f64) -> Result<Decision> {
    let sc = sim.sc;
    let h = sc.space.as_hetero().expect("hetero scenario");
    let costs = &sc.phases;
    let q = sim.state.quantum;
    let cap_w = sc.power_cap.value_at(t0) * sc.max_power();
    let apps: Vec<&AppProfile> = sc.batch_apps().iter().collect();
    let n = apps.len();
    let (n_big, n_small) = (sc.n_cores / 2, sc.n_cores - sc.n_cores / 2);
    let (big_full, small_full) = (h.full_index(CoreClass::Big), h.full_index(CoreClass::Small));

    // Paired sampling on fully provisioned cores; no useful work.
    let pair_ms = costs.hetero_pair_ms / 2.0;
    let pairs = paired_sampling(
        &sc.space,
        &apps,
        &vec![0.0; n],
        big_full,
        small_full,
        pair_ms,
        &sc.noise,
        &mut sim.state.noise,
    )?;
    let mut slots: Vec<Slot> = (0..2)
        .map(|k| Slot {
            kind: PhaseKind::Sampling,
            ms: pair_ms,
            productive: false,
            lc: None,
            batch: (0..n).map(|a| Some(pairs[2 * a + k].config_index)).collect(),
            share: 1.0,
        })
        .collect();
    let at = |a: usize, idx: usize| pairs[2 * a..2 * a + 2].iter().find(|s| s.config_index == idx).expect("sampled");
    let big_b: Vec<f64> = (0..n).map(|a| at(a, big_full).bips).collect();
    let small_b: Vec<f64> = (0..n).map(|a| at(a, small_full).bips).collect();
    let ids: Vec<&str> = apps.iter().map(|a| a.id.as_str()).collect();
    let map = greedy_map(&ids, &big_b, &small_b, n_big, n_small)?;
    let full: Vec<usize> = map.iter().map(|&c| h.full_index(c)).collect();
    let mapped_watts: f64 = (0..n).map(|a| at(a, full[a]).watts).sum();
    let domains: Vec<Range<usize>> = map.iter().map(|&c| class_range(h, c)).collect();

    if mapped_watts <= cap_w {
        let (steady, infeasible) = enforce_budget(sc, None, full.clone(), 1.0, &domains, None, cap_w);
        slots.push(Slot {
            kind: PhaseKind::Steady,
            ms: sc.quantum_ms - costs.hetero_pair_ms,
            productive: true,
            lc: None,
            batch: steady.clone(),
            share: 1.0,
        });
        return Ok(Decision {
            slots,
            steady_lc: None,
            steady_batch: steady,
            share: 1.0,
            events: Vec::new(),
            evaluations: 0,
            infeasible,
        });
    }

    // Replicated 3MM3 sampling on big cores, every config on small cores.
    let design: Vec<_> = big_design(h).into_iter().filter(|d| d.0 != big_full).collect();
    let small_cfgs = small_configs(h);
    let steps = design.len().max(small_cfgs.len());
    let step_ms = costs.hetero_sampling_ms / steps as f64;
    let mut tables: Vec<Tables> = (0..n).map(|_| Tables::new(sc.space.len())).collect();
    let mut big_samples: Vec<Vec<([f64; 3], f64, f64)>> = vec![Vec::new(); n];
    for a in 0..n {
        let s = at(a, full[a]);
        tables[a].set(full[a], s.bips, s.watts);
        if map[a] == CoreClass::Big {
            big_samples[a].push((coords([2, 2, 2]), s.bips, s.watts));
        }
    }
    for k in 0..steps {
        let mut batch = Vec::with_capacity(n);
        for a in 0..n {
            let idx = match map[a] {
                CoreClass::Small => small_cfgs.get(k).copied(),
                _ => design.get(k).map(|d| d.0),
            };
            let idx = idx.unwrap_or(full[a]);
            let (b, w) = sample(apps[a], sim, idx, step_ms)?;
            tables[a].set(idx, b, w);
            if map[a] == CoreClass::Big {
                if let Some(d) = design.get(k) {
                    big_samples[a].push((d.1, b, w));
                }
            }
            batch.push(Some(idx));
        }
        slots.push(Slot {
            kind: PhaseKind::Sampling,
            ms: step_ms,
            productive: true,
            lc: None,
            batch,
            share: 1.0,
        });
    }
    for a in 0..n {
        if map[a] == CoreClass::Big {
            tables[a].fill_big(h, &big_samples[a])?;
        }
    }

    let bips: Vec<Vec<f64>> = tables.iter().map(|t| t.bips.clone()).collect();
    let watts: Vec<Vec<f64>> = tables.iter().map(|t| t.watts.clone()).collect();
    let problem = search_problem(sim, &bips, &watts, domains.clone(), cap_w);
    let params = DdsParams {
        seed: derive_seed(sc.seed, 3, q),
        ..sim.opts.dds.clone()
    };
    let found = dds_search(&params, &problem, &[]);
    let (steady, infeasible) = enforce_budget(sc, None, found.best.clone(), 1.0, &domains, Some(&bips), cap_w);

    let search_ms = costs.two_step_search_ms();
    slots.push(Slot {
        kind: PhaseKind::Search,
        ms: search_ms,
        productive: false,
        lc: None,
        batch: full.iter().map(|&i| Some(i)).collect(),
        share: 1.0,
    });
    slots.push(Slot {
        kind: PhaseKind::Steady,
        ms: sc.quantum_ms - costs.hetero_pair_ms - costs.hetero_sampling_ms - search_ms,
        productive: true,
        lc: None,
        batch: steady.clone(),
        share: 1.0,
    });
    Ok(Decision {
        slots,
        steady_lc: None,
        steady_batch: steady,
        share: 1.0,
        events: Vec::new(),
        evaluations: found.iteration_evaluations,
        infeasible,
    })
}

pub(super) fn run_one_step(sim: &mut Simulator<'_>, t0: f64) -> Result<Decision> {
    let sc = sim.sc;
    let h = sc.space.as_hetero().expect("hetero scenario");
    let costs = &sc.phases;
    let q = sim.state.quantum;
    let cap_w = sc.power_cap.value_at(t0) * sc.max_power();
    let apps: Vec<&AppProfile> = sc.batch_apps().iter().collect();
    let n = apps.len();
    let (n_big, n_small) = (sc.n_cores / 2, sc.n_cores - sc.n_cores / 2);
    let design = big_design(h);
    let small_cfgs = small_configs(h);
    let small_full = h.full_index(CoreClass::Small);

    // Half the apps sample big configs while the other half sample small
    // ones, then the groups swap.
    let per_group = design.len().max(small_cfgs.len());
    let step_ms = costs.one_step_sampling_ms / (2 * per_group) as f64;
    let mut tables: Vec<Tables> = (0..n).map(|_| Tables::new(sc.space.len())).collect();
    let mut big_samples: Vec<Vec<([f64; 3], f64, f64)>> = vec![Vec::new(); n];
    let mut slots = Vec::with_capacity(2 * per_group + 2);
    for round in 0..2 {
        for k in 0..per_group {
            let mut batch = Vec::with_capacity(n);
            for a in 0..n {
                let on_big = (a < n / 2) == (round == 0);
                let planned = if on_big {
                    design.get(k).map(|d| d.0)
                } else {
                    small_cfgs.get(k).copied()
                };
                match planned {
                    Some(idx) => {
                        let (b, w) = sample(apps[a], sim, idx, step_ms)?;
                        tables[a].set(idx, b, w);
                        if on_big {
                            big_samples[a].push((design[k].1, b, w));
                        }
                        batch.push(Some(idx));
                    }
                    None => batch.push(Some(if on_big { h.full_index(CoreClass::Big) } else { small_full })),
                }
            }
            slots.push(Slot {
                kind: PhaseKind::Sampling,
                ms: step_ms,
                productive: true,
                lc: None,
                batch,
                share: 1.0,
            });
        }
    }
    for a in 0..n {
        tables[a].fill_big(h, &big_samples[a])?;
    }

    let bips: Vec<Vec<f64>> = tables.iter().map(|t| t.bips.clone()).collect();
    let watts: Vec<Vec<f64>> = tables.iter().map(|t| t.watts.clone()).collect();
    let mut problem = search_problem(sim, &bips, &watts, vec![0..sc.space.len(); n], cap_w);
    problem.class_limits = Some(ClassLimits { hetero: h, n_big, n_small });
    let params = DdsParams {
        seed: derive_seed(sc.seed, 4, q),
        max_iter: 2 * sim.opts.dds.max_iter,
        ..sim.opts.dds.clone()
    };
    let found = dds_search(&params, &problem, &[]);
    let mut infeasible = false;
    let x = if found.eval.score.is_finite() {
        found.best.clone()
    } else {
        log::warn!("t={t0} ms: one-step search found no valid mapping, using the greedy map");
        infeasible = true;
        let ids: Vec<&str> = apps.iter().map(|a| a.id.as_str()).collect();
        let bf = h.full_index(CoreClass::Big);
        let big_b: Vec<f64> = bips.iter().map(|b| b[bf]).collect();
        let small_b: Vec<f64> = bips.iter().map(|b| b[small_full]).collect();
        greedy_map(&ids, &big_b, &small_b, n_big, n_small)?
            .into_iter()
            .map(|c| h.full_index(c))
            .collect()
    };
    let domains: Vec<Range<usize>> = x.iter().map(|&i| class_range(h, h.class_of(i).expect("in space"))).collect();
    let (steady, over) = enforce_budget(sc, None, x, 1.0, &domains, Some(&bips), cap_w);

    let search_ms = costs.one_step_search_ms();
    slots.push(Slot {
        kind: PhaseKind::Search,
        ms: search_ms,
        productive: false,
        lc: None,
        batch: sim.state.configs.clone(),
        share: 1.0,
    });
    slots.push(Slot {
        kind: PhaseKind::Steady,
        ms: sc.quantum_ms - costs.one_step_sampling_ms - search_ms,
        productive: true,
        lc: None,
        batch: steady.clone(),
        share: 1.0,
    });
    Ok(Decision {
        slots,
        steady_lc: None,
        steady_batch: steady,
        share: 1.0,
        events: Vec::new(),
        evaluations: found.iteration_evaluations,
        infeasible: infeasible || over,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{ManagerKind, SimOptions};
    use crate::workload::{ScenarioBuilder, Schedule};

    #[test]
    fn highest_ratio_goes_big() {
        let m = greedy_map(&["a", "b"], &[3.0, 1.1], &[1.0, 1.0], 1, 1).unwrap();
        assert_eq!(m, vec![CoreClass::Big, CoreClass::Small]);
    }

    #[test]
    fn equal_ratios_favor_the_lower_id() {
        let m = greedy_map(&["b", "a"], &[2.0, 2.0], &[1.0, 1.0], 1, 1).unwrap();
        assert_eq!(m, vec![CoreClass::Small, CoreClass::Big]);
    }

    #[test]
    fn greedy_is_close_to_the_best_mapping() {
        let ids = ["a0", "a1", "a2", "a3", "a4", "a5", "a6", "a7"];
        let big = [3.0, 2.5, 4.0, 1.8, 2.2, 3.3, 1.2, 2.9];
        let small = [1.0, 1.5, 1.1, 1.2, 0.8, 2.0, 1.0, 1.4];
        let m = greedy_map(&ids, &big, &small, 4, 4).unwrap();
        let total = |m: &[bool]| (0..8).map(|a| if m[a] { big[a] } else { small[a] }).sum::<f64>();
        let greedy: Vec<bool> = m.iter().map(|&c| c == CoreClass::Big).collect();
        let best = (0u32..256)
            .filter(|mask| mask.count_ones() == 4)
            .map(|mask| total(&(0..8).map(|a| mask >> a & 1 == 1).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        assert!(total(&greedy) >= 0.9 * best);
    }

    #[test]
    fn too_many_apps_is_an_error() {
        assert!(greedy_map(&["a", "b", "c"], &[1.0; 3], &[1.0; 3], 1, 1).is_err());
    }

    fn run(kind: ManagerKind, cap: f64) -> (crate::runtime::QuantumPlan, crate::runtime::QuantumReport) {
        let mut sc = ScenarioBuilder::new(8, 8)
            .hetero(true)
            .cap(Schedule::constant(cap))
            .build()
            .unwrap();
        sc.noise = crate::sampling::NoiseModel::exact();
        let mut sim = Simulator::new(&sc, kind, SimOptions::for_scenario(&sc)).unwrap();
        sim.step().unwrap()
    }

    #[test]
    fn two_step_feasible_path_runs_98_ms() {
        let (plan, _) = run(ManagerKind::TwoStep, 1.0);
        assert_eq!(plan.phase_ms(PhaseKind::Steady), 98.0);
        assert_eq!(plan.evaluations, 0);
    }

    #[test]
    fn two_step_infeasible_path_searches() {
        let (plan, report) = run(ManagerKind::TwoStep, 0.5);
        assert!((plan.phase_ms(PhaseKind::Steady) - 89.01).abs() < 1e-9);
        assert_eq!(plan.evaluations, 8 * 400);
        assert!(report.total_instr > 0.0);
    }

    #[test]
    fn one_step_ledger() {
        let sc = ScenarioBuilder::new(8, 8)
            .hetero(true)
            .cap(Schedule::constant(0.6))
            .build()
            .unwrap();
        let h = sc.space.as_hetero().unwrap();
        let mut sim = Simulator::new(&sc, ManagerKind::OneStep, SimOptions::for_scenario(&sc)).unwrap();
        let (plan, _) = sim.step().unwrap();
        assert_eq!(plan.phase_ms(PhaseKind::Sampling), 18.0);
        assert!((plan.phase_ms(PhaseKind::Steady) - 80.02).abs() < 1e-9);
        assert_eq!(plan.evaluations, 8 * 800);
        let x: Vec<usize> = plan.chosen.iter().map(|c| c.unwrap_or(h.small_range().start)).collect();
        assert!(crate::search::one_step_validity(&x, h, 4, 4));
    }
}
