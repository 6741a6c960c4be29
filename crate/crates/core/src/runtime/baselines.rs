//! Baseline managers: core-level gating, asymmetric multicores and an
//! unconstrained reference.

use super::hetero::greedy_map;
use super::{batch_share, equal_share_cache, per_core_load, Decision, PhaseKind, Simulator, Slot};
use crate::config_space::{CoreClass, Space};
use crate::error::{Error, Result};
use crate::sampling::measure;
use crate::search::power_repair;
use crate::workload::Scenario;

/// Core-gating rule: turn off unprotected cores in descending power, except
/// that as soon as one remaining core alone covers the remaining excess,
/// the smallest such core is turned off instead and gating stops.
pub fn gating_order(power: &[f64], protected: &[bool], budget: f64) -> Result<Vec<usize>> {
    let mut total: f64 = power.iter().sum();
    let mut left: Vec<usize> = (0..power.len()).filter(|&d| !protected.get(d).copied().unwrap_or(false)).collect();
    left.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
    let mut gated = Vec::new();
    while total > budget * (1.0 + 1e-12) {
        let need = total - budget;
        let pick = left
            .iter()
            .copied()
            .filter(|&d| power[d] >= need)
            .min_by(|&a, &b| power[a].total_cmp(&power[b]).then(a.cmp(&b)))
            .or_else(|| left.first().copied());
        let Some(d) = pick else {
            return Err(Error::Infeasible(format!(
                "{total:.3} W with every unprotected core off exceeds the {budget:.3} W budget"
            )));
        };
        left.retain(|&x| x != d);
        total -= power[d];
        gated.push(d);
    }
    Ok(gated)
}

/// Fully provisioned configuration of every batch app, with `cache` as the
/// cache option on a homogeneous space. Big/small apps are mapped by their
/// true big/small throughput ratio.
fn full_configs(sc: &Scenario, cache: usize) -> Result<Vec<usize>> {
    let batch = sc.batch_apps();
    match &sc.space {
        Space::Homogeneous(cs) => Ok(vec![cs.encode(cs.widest(), cache)?; batch.len()]),
        Space::Hetero(h) => {
            let (bf, sf) = (h.full_index(CoreClass::Big), h.full_index(CoreClass::Small));
            let ids: Vec<&str> = batch.iter().map(|a| a.id.as_str()).collect();
            let big: Vec<f64> = batch.iter().map(|a| a.bips(bf)).collect();
            let small: Vec<f64> = batch.iter().map(|a| a.bips(sf)).collect();
            let map = greedy_map(&ids, &big, &small, sc.n_cores / 2, sc.n_cores - sc.n_cores / 2)?;
            Ok(map.into_iter().map(|c| h.full_index(c)).collect())
        }
    }
}

fn steady(ms: f64, lc: Option<(usize, usize)>, batch: Vec<Option<usize>>, share: f64) -> Slot {
    Slot {
        kind: PhaseKind::Steady,
        ms,
        productive: true,
        lc,
        batch,
        share,
    }
}

fn decision(slots: Vec<Slot>, lc: Option<(usize, usize)>, batch: Vec<Option<usize>>, share: f64, infeasible: bool) -> Decision {
    Decision {
        slots,
        steady_lc: lc,
        steady_batch: batch,
        share,
        events: Vec::new(),
        evaluations: 0,
        infeasible,
    }
}

/// Every core fully provisioned, cache split equally, power ignored.
pub(super) fn run_no_gating(sim: &mut Simulator<'_>, _t0: f64) -> Result<Decision> {
    let sc = sim.sc;
    let k = equal_share_cache(&sc.space, sc.cache_ways, sc.n_cores);
    let x = full_configs(sc, k)?;
    let lc = sc.lc_app().map(|_| (x.first().copied().unwrap_or(0), sc.lc_count));
    let share = batch_share(sc, sc.lc_count);
    let batch: Vec<Option<usize>> = x.into_iter().map(Some).collect();
    let slots = vec![steady(sc.quantum_ms, lc, batch.clone(), share)];
    Ok(decision(slots, lc, batch, share, false))
}

/// Cores stay fully provisioned; after a short power profile, batch cores
/// are gated until the measured power fits the cap. Latency-critical
/// cores are never gated. With way-partitioning the cache is split equally
/// over the cores left on; without it every app keeps the share of an
/// unpartitioned cache shared by all cores.
pub(super) fn run_core_gating(sim: &mut Simulator<'_>, t0: f64, waypart: bool) -> Result<Decision> {
    let sc = sim.sc;
    let space = &sc.space;
    let costs = &sc.phases;
    let cap_w = sc.power_cap.value_at(t0) * sc.max_power();
    let batch = sc.batch_apps();
    let k0 = equal_share_cache(space, sc.cache_ways, sc.n_cores);
    let x = full_configs(sc, k0)?;
    let share = batch_share(sc, sc.lc_count);
    let lc = sc.lc_app().map(|_| (x.first().copied().unwrap_or(0), sc.lc_count));

    let mut lc_w = 0.0;
    if let (Some(app), Some((i, cores))) = (sc.lc_app(), lc) {
        let load = per_core_load(sc, sc.load.value_at(t0), cores);
        lc_w = cores as f64 * measure(app, space, i, load, costs.gating_profile_ms, &sc.noise, &mut sim.state.noise)?.watts;
    }
    let mut measured = Vec::with_capacity(batch.len());
    for (app, &i) in batch.iter().zip(&x) {
        let s = measure(app, space, i, 0.0, costs.gating_profile_ms, &sc.noise, &mut sim.state.noise)?;
        measured.push(share * s.watts);
    }
    let all_on: Vec<Option<usize>> = x.iter().copied().map(Some).collect();
    let mut slots = vec![Slot {
        kind: PhaseKind::Profile,
        ms: costs.gating_profile_ms,
        productive: true,
        lc,
        batch: all_on,
        share,
    }];

    let mut infeasible = false;
    let mut on = vec![true; batch.len()];
    match gating_order(&measured, &[], cap_w - lc_w) {
        Ok(g) => g.into_iter().for_each(|d| on[d] = false),
        Err(_) => {
            on.iter_mut().for_each(|o| *o = false);
            infeasible = true;
        }
    }

    let mut cfg = x.clone();
    let mut lc_final = lc;
    if waypart {
        if let Some(cs) = space.as_homogeneous() {
            let active = sc.lc_count * usize::from(lc.is_some()) + on.iter().filter(|&&o| o).count();
            let k = equal_share_cache(space, sc.cache_ways, active);
            let full = cs.encode(cs.widest(), k)?;
            cfg = vec![full; batch.len()];
            lc_final = lc.map(|(_, c)| (full, c));
        }
    }

    // The power meter reads true power once the gating is applied.
    let lc_true = match (sc.lc_app(), lc_final) {
        (Some(app), Some((i, c))) => c as f64 * app.watts(space, i),
        _ => 0.0,
    };
    let active: Vec<usize> = (0..batch.len()).filter(|&d| on[d]).collect();
    let p: Vec<f64> = active.iter().map(|&d| share * batch[d].watts(space, cfg[d])).collect();
    match power_repair(&p, &[], cap_w - lc_true) {
        Ok(off) => off.into_iter().for_each(|k| on[active[k]] = false),
        Err(_) => {
            on.iter_mut().for_each(|o| *o = false);
            infeasible = true;
        }
    }
    let out: Vec<Option<usize>> = (0..batch.len()).map(|d| on[d].then_some(cfg[d])).collect();
    slots.push(steady(sc.quantum_ms - costs.gating_profile_ms, lc_final, out.clone(), share));
    Ok(decision(slots, lc_final, out, share, infeasible))
}

/// Asymmetric multicore with big `{6,6,6}` and small `{2,2,2}` cores and
/// zero management overhead, using true application behaviour. The oracle
/// picks the big/small split with the best batch geomean under the cap;
/// the fixed variant has half the cores big. Apps are assigned to big
/// cores by descending big/small throughput ratio.
pub(super) fn run_asym(sim: &mut Simulator<'_>, t0: f64, oracle: bool) -> Result<Decision> {
    let sc = sim.sc;
    let space = &sc.space;
    let cs = space.as_homogeneous().expect("homogeneous scenario");
    let cap_w = sc.power_cap.value_at(t0) * sc.max_power();
    let batch = sc.batch_apps();
    let n = batch.len();
    let k = equal_share_cache(space, sc.cache_ways, sc.n_cores);
    let (big, small) = (cs.encode(cs.widest(), k)?, cs.encode(cs.narrowest(), k)?);
    let share = batch_share(sc, sc.lc_count);

    let mut lc = None;
    let mut lc_w = 0.0;
    let mut lc_big = false;
    if let Some(app) = sc.lc_app() {
        let peak = sc.load.segments(t0, t0 + sc.quantum_ms).iter().map(|s| s.2).fold(0.0, f64::max);
        let load = per_core_load(sc, peak, sc.lc_count);
        lc_big = app.tail_latency(small, load).is_some_and(|l| l > sc.qos_target_ms);
        let i = if lc_big { big } else { small };
        lc = Some((i, sc.lc_count));
        lc_w = sc.lc_count as f64 * app.watts(space, i);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let ratio = |d: usize| batch[d].bips(big) / batch[d].bips(small);
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)).then(batch[a].id.cmp(&batch[b].id)));
    let assign = |nb: usize| {
        let mut x = vec![small; n];
        for &d in order.iter().take(nb) {
            x[d] = big;
        }
        x
    };
    let power = |x: &[usize]| lc_w + x.iter().zip(batch).map(|(&i, a)| share * a.watts(space, i)).sum::<f64>();
    let score = |x: &[usize]| x.iter().zip(batch).map(|(&i, a)| (share * a.bips(i)).ln()).sum::<f64>();

    let chosen = if oracle {
        (0..=n)
            .map(assign)
            .filter(|x| power(x) <= cap_w)
            .max_by(|a, b| score(a).total_cmp(&score(b)))
            .unwrap_or_else(|| assign(0))
    } else {
        let big_cores = (sc.n_cores / 2).saturating_sub(if lc_big { sc.lc_count } else { 0 });
        assign(big_cores.min(n))
    };

    let mut infeasible = false;
    let dim_power: Vec<f64> = chosen.iter().zip(batch).map(|(&i, a)| share * a.watts(space, i)).collect();
    let mut out: Vec<Option<usize>> = chosen.iter().copied().map(Some).collect();
    match power_repair(&dim_power, &[], cap_w - lc_w) {
        Ok(off) => off.into_iter().for_each(|d| out[d] = None),
        Err(_) => {
            out.iter_mut().for_each(|c| *c = None);
            infeasible = true;
        }
    }
    let slots = vec![steady(sc.quantum_ms, lc, out.clone(), share)];
    Ok(decision(slots, lc, out, share, infeasible))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{ManagerKind, SimOptions};
    use crate::workload::{ScenarioBuilder, Schedule};

    #[test]
    fn smallest_slack_core_is_gated() {
        assert_eq!(gating_order(&[5.0, 4.0, 3.0], &[], 10.0).unwrap(), vec![2]);
        assert_eq!(gating_order(&[5.0, 4.0, 3.0], &[], 5.0).unwrap(), vec![0, 2]);
        assert!(gating_order(&[5.0, 4.0, 3.0], &[], 12.0).unwrap().is_empty());
    }

    #[test]
    fn protected_cores_are_never_gated() {
        assert_eq!(gating_order(&[5.0, 4.0, 3.0], &[true], 8.0).unwrap(), vec![1]);
        assert_eq!(gating_order(&[5.0, 4.0, 3.0], &[true], 7.0).unwrap(), vec![1, 2]);
        assert!(gating_order(&[5.0, 4.0], &[true, true], 1.0).is_err());
    }

    fn report(kind: ManagerKind, cap: f64) -> (crate::runtime::QuantumPlan, crate::runtime::QuantumReport) {
        let sc = ScenarioBuilder::new(12, 8).cap(Schedule::constant(cap)).build().unwrap();
        let mut sim = Simulator::new(&sc, kind, SimOptions::for_scenario(&sc)).unwrap();
        sim.step().unwrap()
    }

    #[test]
    fn full_cap_gates_nothing() {
        let (plan, _) = report(ManagerKind::CoreGating, 1.0);
        assert!(plan.chosen.iter().all(|c| c.is_some()));
        assert_eq!(plan.phase_ms(PhaseKind::Profile), 1.0);
    }

    #[test]
    fn gated_cores_do_no_work() {
        let (plan, r) = report(ManagerKind::CoreGating, 0.6);
        let off: Vec<usize> = plan.chosen[1..]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none())
            .map(|(d, _)| d)
            .collect();
        assert!(!off.is_empty());
        let sc = ScenarioBuilder::new(12, 8).build().unwrap();
        for d in off {
            // only the profiling millisecond counts
            let b = sc.batch_apps()[d].bips(plan.chosen[0].unwrap());
            assert!(r.instructions[d] <= b * 1e-3 + 1e-12);
        }
    }

    #[test]
    fn latency_critical_cores_stay_on() {
        let (plan, _) = report(ManagerKind::CoreGating, 0.3);
        assert!(plan.chosen[0].is_some());
        assert_eq!(plan.lc_cores, 4);
    }

    #[test]
    fn asym_at_full_cap_is_all_big() {
        let (plan, _) = report(ManagerKind::AsymOracle, 1.0);
        let sc = ScenarioBuilder::new(12, 8).build().unwrap();
        let cs = sc.space.as_homogeneous().unwrap();
        let big = cs.encode(cs.widest(), 3).unwrap();
        assert!(plan.chosen[1..].iter().all(|&c| c == Some(big)));
    }

    #[test]
    fn oracle_dominates_the_fixed_split() {
        for cap in [0.5, 0.6, 0.7, 0.8, 0.9] {
            let (_, o) = report(ManagerKind::AsymOracle, cap);
            let (_, f) = report(ManagerKind::AsymFixed, cap);
            assert!(o.geomean_bips >= f.geomean_bips * (1.0 - 1e-12), "cap {cap}");
        }
    }

    #[test]
    fn no_gating_upper_bounds_instructions() {
        let (_, ng) = report(ManagerKind::NoGating, 1.0);
        for m in [
            ManagerKind::CoreGating,
            ManagerKind::CoreGatingWaypart,
            ManagerKind::AsymOracle,
            ManagerKind::Cuttlesys,
        ] {
            let (_, r) = report(m, 1.0);
            assert!(r.total_instr <= ng.total_instr * (1.0 + 1e-9), "{m}");
        }
    }
}
