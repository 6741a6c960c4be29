use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{batch_share, derive_seed, enforce_budget, per_core_load, Decision, LcEvent, PhaseKind, Simulator, Slot};
use crate::error::Result;
use crate::reconstruct::{run_three_reconstructions, ReconstructionInputs};
use crate::sampling::{measure, profile_pair};
use crate::search::{dds_search, AllocationProblem, Budget, DdsParams};

/// Latency-critical outcome seen at a quantum boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosOutcome {
    /// QoS met over the last quantum (`true` before the first one).
    pub met: bool,
    pub tail_ms: f64,
    pub qos_ms: f64,
    pub slack: f64,
    /// Whether some configuration is predicted to meet QoS now.
    pub feasible_config: bool,
    /// Whether the service already ran its fastest predicted configuration,
    /// so no upgrade is left to try.
    pub at_fastest: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relocation {
    Keep,
    Reclaim,
    Yield,
    /// A core is needed but none can be taken from batch apps.
    Saturated,
}

/// Core relocation rule, applied once per boundary: take one core from the
/// batch apps when QoS was missed, no configuration is predicted to fix it
/// and the fastest one was already tried; give one back when latency sits below `(1 - slack) * QoS` and the
/// service holds more than its initial cores. At least one batch core is
/// always kept.
pub fn relocate_cores(lc_cores: usize, initial: usize, n_cores: usize, o: &QosOutcome) -> Relocation {
    if !o.met && !o.feasible_config && o.at_fastest {
        if lc_cores + 1 < n_cores {
            Relocation::Reclaim
        } else {
            Relocation::Saturated
        }
    } else if o.met && o.tail_ms <= (1.0 - o.slack) * o.qos_ms && lc_cores > initial {
        Relocation::Yield
    } else {
        Relocation::Keep
    }
}

/// Lowest predicted latency, ties to lower predicted power then index.
fn fastest(latency: &[f64], power: &[f64], allowed: &[bool], space: &crate::config_space::Space) -> usize {
    (0..latency.len())
        .filter(|&i| allowed[i])
        .min_by(|&a, &b| {
            latency[a]
                .total_cmp(&latency[b])
                .then(power[space.core_of(a)].total_cmp(&power[space.core_of(b)]))
                .then(a.cmp(&b))
        })
        .unwrap_or(0)
}

pub(super) fn run_quantum(sim: &mut Simulator<'_>, t0: f64) -> Result<Decision> {
    let sc = sim.sc;
    let space = &sc.space;
    let cs = space.as_homogeneous().expect("homogeneous scenario");
    let costs = &sc.phases;
    let q = sim.state.quantum;
    let cap_w = sc.power_cap.value_at(t0) * sc.max_power();
    let load0 = sc.load.value_at(t0);
    let lc_app = sc.lc_app();
    let batch = sc.batch_apps();
    let n_batch = batch.len();
    let offset = usize::from(lc_app.is_some());

    let prev_lc = sim.state.lc_config.zip(lc_app.map(|_| sim.state.lc_cores));
    let prev_batch = sim.state.configs.clone();
    let prev_share = sim.state.share;
    let mut cores = sim.state.lc_cores;
    let pc_load = per_core_load(sc, load0, cores);

    // Profiling: every app at the widest and the narrowest core.
    let apps: Vec<_> = sc.apps.iter().collect();
    let loads: Vec<f64> = sc
        .apps
        .iter()
        .map(|a| if a.is_latency_critical() { pc_load } else { 0.0 })
        .collect();
    let samples = profile_pair(cs, &apps, &loads, &sc.noise, &mut sim.state.noise)?;
    let mut slots = Vec::with_capacity(5);
    for slot in 0..2 {
        let cfg = |a: usize| samples[2 * a + slot].config_index;
        slots.push(Slot {
            kind: PhaseKind::Profile,
            ms: costs.profile_ms / 2.0,
            productive: true,
            lc: lc_app.map(|_| (cfg(0), cores)),
            batch: (0..n_batch).map(|b| prev_batch[b].map(|_| cfg(b + offset))).collect(),
            share: prev_share,
        });
    }
    for (a, s) in samples.iter().enumerate() {
        let obs = &mut sim.state.obs[a / 2];
        obs.throughput.insert(s.config_index, s.bips);
        obs.power.insert(space.core_of(s.config_index), s.watts);
        if let Some(l) = s.latency_ms {
            obs.latency.insert(s.config_index, (pc_load, l));
        }
    }

    // Three concurrent reconstructions.
    let active_batch: Vec<_> = (0..n_batch).map(|b| sim.state.obs[b + offset].active(pc_load)).collect();
    let active_lc = lc_app.map(|_| sim.state.obs[0].active(pc_load));
    let inputs = ReconstructionInputs {
        space,
        training_batch: sc.training_batch().collect(),
        training_lc: sc.training_lc().collect(),
        active_batch: &active_batch,
        active_lc: active_lc.as_ref(),
        lc_load: pc_load,
        params: crate::reconstruct::SgdParams {
            seed: derive_seed(sc.seed, 1, q),
            ..sim.opts.sgd
        },
        workers: sim.opts.sgd_workers,
    };
    let rec = run_three_reconstructions(&inputs)?;

    // Latency-critical configuration and core relocation.
    let mut events = Vec::new();
    let mut lc_cfg = None;
    if lc_app.is_some() {
        let lat = rec.latency.as_ref().expect("latency reconstruction");
        let lc_pow = &rec.power[0];
        let min_ways = cs.cache_options()[0];
        let room = sc.cache_ways - n_batch as f64 * min_ways;
        let fits = |n: usize| -> Vec<bool> {
            (0..space.len())
                .map(|i| n as f64 * space.cache_ways_of(i).unwrap_or(0.0) <= room + 1e-9)
                .collect()
        };
        let mut allowed = fits(cores);
        let (met, tail) = sim.state.last_qos.unwrap_or((true, 0.0));
        let top = fastest(lat, lc_pow, &allowed, space);
        let at_fastest = prev_lc.is_some_and(|(c, _)| c == top);
        if !met {
            // The last choice missed QoS at this load: do not repeat it.
            if let Some((c, _)) = prev_lc {
                if sim.state.obs[0].latency.get(&c).is_some_and(|(l, _)| (l - pc_load).abs() < 1e-9) {
                    allowed[c] = false;
                }
            }
        }
        let masked: Vec<f64> = (0..space.len()).map(|i| if allowed[i] { lat[i] } else { f64::INFINITY }).collect();
        let sel = crate::search::lc_config_select(&masked, lc_pow, space, sc.qos_target_ms);
        let outcome = QosOutcome {
            met,
            tail_ms: tail,
            qos_ms: sc.qos_target_ms,
            slack: sc.qos_slack,
            feasible_config: sel.is_some(),
            at_fastest,
        };
        // Borrowed cores are held only with the fastest configuration; they
        // are returned before the service downgrades.
        let hold_fastest = met && cores > sc.lc_count;
        let chosen = match relocate_cores(cores, sc.lc_count, sc.n_cores, &outcome) {
            Relocation::Keep if hold_fastest => top,
            Relocation::Keep => sel.unwrap_or_else(|| fastest(lat, lc_pow, &allowed, space)),
            Relocation::Reclaim => {
                cores += 1;
                events.push(LcEvent::CoreReclaim);
                fastest(lat, lc_pow, &fits(cores), space)
            }
            Relocation::Yield => {
                cores -= 1;
                events.push(LcEvent::CoreYield);
                top
            }
            Relocation::Saturated => {
                log::warn!("t={t0} ms: QoS missed with no batch core left to reclaim");
                events.push(LcEvent::Saturated);
                top
            }
        };
        if let Some((old, _)) = prev_lc {
            if chosen != old {
                let e = if lat[chosen] < lat[old] {
                    LcEvent::ConfigUpgrade
                } else {
                    LcEvent::ConfigDowngrade
                };
                events.insert(0, e);
            }
        }
        lc_cfg = Some(chosen);
    }
    let share = batch_share(sc, cores);

    // Batch search with the latency-critical dims pinned.
    let lc_power_zero = vec![0.0; space.core_count()];
    let lc_power: &[f64] = if lc_app.is_some() { &rec.power[0] } else { &lc_power_zero };
    let batch_power = &rec.power[offset..];
    let mut problem = AllocationProblem::new(
        space,
        cores * offset,
        lc_power,
        &rec.throughput,
        batch_power,
        Budget {
            max_power: cap_w,
            cache_ways: sc.cache_ways,
            qos_ms: sc.qos_target_ms,
        },
        sim.opts.dds.penalty_wt,
    );
    problem.batch_share = share;
    let fixed: Vec<(usize, usize)> = lc_cfg.map_or(Vec::new(), |c| (0..cores).map(|d| (d, c)).collect());
    let params = DdsParams {
        seed: derive_seed(sc.seed, 2, q),
        ..sim.opts.dds.clone()
    };
    let found = dds_search(&params, &problem, &fixed);
    let x: Vec<usize> = found.best[problem.lc_dims..].to_vec();
    let domains: Vec<Range<usize>> = vec![0..space.len(); n_batch];
    let steady_lc = lc_cfg.map(|c| (c, cores));
    let (steady, infeasible) = enforce_budget(sc, steady_lc, x, share, &domains, Some(&rec.throughput), cap_w);

    for (kind, ms) in [(PhaseKind::Reconstruct, costs.reconstruct_ms), (PhaseKind::Search, costs.search_ms)] {
        slots.push(Slot {
            kind,
            ms,
            productive: true,
            lc: prev_lc,
            batch: prev_batch.clone(),
            share: prev_share,
        });
    }
    let steady_ms = sc.quantum_ms - costs.profile_ms - costs.reconstruct_ms - costs.search_ms;
    let reconfigured = steady != prev_batch || steady_lc != prev_lc;
    let reconfig_ms = if reconfigured { costs.reconfig_ms.min(steady_ms) } else { 0.0 };
    if reconfig_ms > 0.0 {
        slots.push(Slot {
            kind: PhaseKind::Steady,
            ms: reconfig_ms,
            productive: false,
            lc: steady_lc,
            batch: steady.clone(),
            share,
        });
    }
    slots.push(Slot {
        kind: PhaseKind::Steady,
        ms: steady_ms - reconfig_ms,
        productive: true,
        lc: steady_lc,
        batch: steady.clone(),
        share,
    });

    // Write the executed configurations back as observations.
    let t_steady = t0 + sc.quantum_ms - steady_ms;
    let constant_load = sc.load.segments(t_steady, t0 + sc.quantum_ms).len() == 1;
    let steady_load = per_core_load(sc, sc.load.value_at(t_steady), cores);
    for (b, cfg) in steady.iter().enumerate() {
        if let Some(i) = *cfg {
            let s = measure(&batch[b], space, i, 0.0, steady_ms, &sc.noise, &mut sim.state.noise)?;
            let obs = &mut sim.state.obs[b + offset];
            obs.throughput.insert(i, s.bips);
            obs.power.insert(space.core_of(i), s.watts);
        }
    }
    if let (Some(app), Some(i)) = (lc_app, lc_cfg) {
        let s = measure(app, space, i, steady_load, steady_ms, &sc.noise, &mut sim.state.noise)?;
        let obs = &mut sim.state.obs[0];
        obs.power.insert(space.core_of(i), s.watts);
        if constant_load {
            if let Some(l) = s.latency_ms {
                obs.latency.insert(i, (steady_load, l));
            }
        }
    }

    Ok(Decision {
        slots,
        steady_lc,
        steady_batch: steady,
        share,
        events,
        evaluations: found.iteration_evaluations,
        infeasible,
    })
}
