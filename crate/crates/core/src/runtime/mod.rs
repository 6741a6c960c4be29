//! Quantum-by-quantum simulation of the resource managers.
//!
//! Each manager turns one decision quantum into a list of [`Slot`]s: spans
//! of time during which every core runs a fixed configuration. Accounting
//! then integrates ground-truth throughput, power and tail latency over the
//! slots, split at every power-cap and load change.

mod baselines;
mod cuttlesys;
mod hetero;
mod phases;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baselines::gating_order;
pub use cuttlesys::{relocate_cores, QosOutcome, Relocation};
pub use hetero::greedy_map;
pub use phases::PhaseCosts;

use crate::config_space::Space;
use crate::error::{Error, Result};
use crate::reconstruct::{ActiveObservations, SgdParams};
use crate::sampling::NoiseSource;
use crate::search::{geomean, power_repair, DdsParams};
use crate::workload::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManagerKind {
    Cuttlesys,
    TwoStep,
    OneStep,
    CoreGating,
    CoreGatingWaypart,
    AsymOracle,
    /// Asymmetric multicore with a fixed half-big, half-small split.
    AsymFixed,
    NoGating,
}

impl ManagerKind {
    pub const ALL: [ManagerKind; 8] = [
        ManagerKind::Cuttlesys,
        ManagerKind::TwoStep,
        ManagerKind::OneStep,
        ManagerKind::CoreGating,
        ManagerKind::CoreGatingWaypart,
        ManagerKind::AsymOracle,
        ManagerKind::AsymFixed,
        ManagerKind::NoGating,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ManagerKind::Cuttlesys => "cuttlesys",
            ManagerKind::TwoStep => "two_step",
            ManagerKind::OneStep => "one_step",
            ManagerKind::CoreGating => "core_gating",
            ManagerKind::CoreGatingWaypart => "core_gating_waypart",
            ManagerKind::AsymOracle => "asym_oracle",
            ManagerKind::AsymFixed => "asym_fixed",
            ManagerKind::NoGating => "no_gating",
        }
    }

    /// Whether the manager can drive a scenario on `space`.
    pub fn supports(&self, space: &Space) -> bool {
        let hetero = matches!(space, Space::Hetero(_));
        match self {
            ManagerKind::TwoStep | ManagerKind::OneStep => hetero,
            ManagerKind::Cuttlesys | ManagerKind::AsymOracle | ManagerKind::AsymFixed => !hetero,
            ManagerKind::CoreGating | ManagerKind::CoreGatingWaypart | ManagerKind::NoGating => true,
        }
    }
}

impl fmt::Display for ManagerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ManagerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ManagerKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown manager {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    Profile,
    Reconstruct,
    Sampling,
    Search,
    Steady,
}

impl PhaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseKind::Profile => "profile",
            PhaseKind::Reconstruct => "reconstruct",
            PhaseKind::Sampling => "sampling",
            PhaseKind::Search => "search",
            PhaseKind::Steady => "steady",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub kind: PhaseKind,
    pub duration_ms: f64,
}

/// Changes to the latency-critical allocation made at a quantum boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcEvent {
    ConfigUpgrade,
    ConfigDowngrade,
    CoreReclaim,
    CoreYield,
    /// QoS unmet with no configuration or core left to add.
    Saturated,
}

/// What a manager decided for one quantum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumPlan {
    pub phases: Vec<Phase>,
    /// Steady-state configuration per scenario app; `None` when turned off.
    /// The latency-critical entry holds the config of all its cores.
    pub chosen: Vec<Option<usize>>,
    /// Per core, whether it is powered during steady state.
    pub core_active: Vec<bool>,
    pub lc_cores: usize,
    pub events: Vec<LcEvent>,
    /// Objective evaluations spent by the search phase.
    pub evaluations: usize,
    /// Power could not be brought under the cap with every batch core off,
    /// or the search found no valid candidate.
    pub infeasible: bool,
    /// Cache ways held at steady state, counting every latency-critical core.
    pub steady_cache_ways: f64,
    /// Highest ground-truth power during steady state.
    pub steady_peak_power: f64,
    /// Steady-state time spent above the cap in force.
    pub steady_over_budget_ms: f64,
}

impl QuantumPlan {
    pub fn total_ms(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_ms).sum()
    }

    pub fn phase_ms(&self, kind: PhaseKind) -> f64 {
        self.phases.iter().filter(|p| p.kind == kind).map(|p| p.duration_ms).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumReport {
    pub t_ms: f64,
    pub manager: ManagerKind,
    /// Cap fraction in force at the start of the quantum.
    pub cap: f64,
    /// Time-averaged offered load.
    pub qps_load: f64,
    pub lc_config: Option<usize>,
    pub lc_cores: usize,
    pub qos_met: Option<bool>,
    pub tail_ms: Option<f64>,
    /// Tail latency over steady state only, the window the manager's
    /// decision controlled.
    pub steady_tail_ms: Option<f64>,
    /// Geometric mean over batch apps of their average BIPS in the quantum.
    pub geomean_bips: f64,
    /// Billions of instructions per batch app.
    pub instructions: Vec<f64>,
    pub total_instr: f64,
    pub mean_power: f64,
    pub peak_power: f64,
    pub over_budget_ms: f64,
}

/// A span of time with fixed configurations on every core.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Slot {
    pub kind: PhaseKind,
    pub ms: f64,
    /// Whether batch apps retire useful instructions.
    pub productive: bool,
    /// `(config, cores)` of the latency-critical service.
    pub lc: Option<(usize, usize)>,
    /// Config per batch app (`None` = off).
    pub batch: Vec<Option<usize>>,
    /// Fraction of time each batch app holds a core.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tally {
    pub instructions: Vec<f64>,
    pub mean_power: f64,
    pub peak_power: f64,
    pub over_budget_ms: f64,
    pub tail_ms: Option<f64>,
    pub mean_load: f64,
}

/// Breakpoints of both schedules inside `[a, b)`.
fn cut_points(sc: &Scenario, a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![a, b];
    for (s, e, _) in sc.power_cap.segments(a, b).into_iter().chain(sc.load.segments(a, b)) {
        pts.push(s);
        pts.push(e);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Load seen by each latency-critical core when `cores` share the service.
pub(crate) fn per_core_load(sc: &Scenario, load: f64, cores: usize) -> f64 {
    (load * sc.lc_count as f64 / cores.max(1) as f64).clamp(0.0, 1.0)
}

/// Time-weighted 99th percentile: the smallest latency exceeded for at
/// most 1% of the time.
fn tail_percentile(mut samples: Vec<(f64, f64)>) -> Option<f64> {
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if samples.is_empty() || total <= 0.0 {
        return None;
    }
    samples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut acc = 0.0;
    for (lat, dt) in &samples {
        acc += dt;
        if acc > 0.01 * total * (1.0 + 1e-12) {
            return Some(*lat);
        }
    }
    samples.last().map(|s| s.0)
}

/// Integrates ground truth over `slots`, which start at `t0`.
pub(crate) fn account(sc: &Scenario, t0: f64, slots: &[Slot]) -> Tally {
    let batch = sc.batch_apps();
    let lc_app = sc.lc_app();
    let max_power = sc.max_power();
    let mut instr = vec![0.0; batch.len()];
    let (mut energy, mut peak, mut over, mut load_int, mut span) = (0.0, 0.0f64, 0.0, 0.0, 0.0);
    let mut lat = Vec::new();
    let mut t = t0;
    for slot in slots {
        let end = t + slot.ms;
        let pts = cut_points(sc, t, end);
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let dt = b - a;
            if dt <= 0.0 {
                continue;
            }
            let load = sc.load.value_at(a);
            let cap = sc.power_cap.value_at(a) * max_power;
            let mut power = 0.0;
            for (k, cfg) in slot.batch.iter().enumerate() {
                if let Some(i) = *cfg {
                    power += slot.share * batch[k].watts(&sc.space, i);
                    if slot.productive {
                        instr[k] += slot.share * batch[k].bips(i) * dt * 1e-3;
                    }
                }
            }
            if let (Some(app), Some((i, cores))) = (lc_app, slot.lc) {
                power += cores as f64 * app.watts(&sc.space, i);
                let l = app.tail_latency(i, per_core_load(sc, load, cores)).unwrap_or(0.0);
                lat.push((l, dt));
            }
            energy += power * dt;
            peak = peak.max(power);
            if power > cap * (1.0 + 1e-9) {
                over += dt;
            }
            load_int += load * dt;
            span += dt;
        }
        t = end;
    }
    let span = span.max(f64::MIN_POSITIVE);
    Tally {
        instructions: instr,
        mean_power: energy / span,
        peak_power: peak,
        over_budget_ms: over,
        tail_ms: tail_percentile(lat),
        mean_load: load_int / span,
    }
}

/// Accounts only the steady-state slots.
fn steady_tally(sc: &Scenario, t0: f64, slots: &[Slot]) -> Option<Tally> {
    let mut t = t0;
    let mut out: Option<Tally> = None;
    for s in slots {
        if s.kind == PhaseKind::Steady {
            let x = account(sc, t, std::slice::from_ref(s));
            out = Some(match out {
                None => x,
                Some(o) => Tally {
                    peak_power: o.peak_power.max(x.peak_power),
                    over_budget_ms: o.over_budget_ms + x.over_budget_ms,
                    ..o
                },
            });
        }
        t += s.ms;
    }
    out
}

fn steady_cache(sc: &Scenario, lc: Option<(usize, usize)>, batch: &[Option<usize>]) -> f64 {
    let ways = |i: usize| sc.space.cache_ways_of(i).unwrap_or(0.0);
    lc.map_or(0.0, |(i, n)| ways(i) * n as f64) + batch.iter().flatten().map(|&i| ways(i)).sum::<f64>()
}

/// Merges consecutive slots of the same kind into phases.
pub(crate) fn phases_of(slots: &[Slot]) -> Vec<Phase> {
    let mut out: Vec<Phase> = Vec::new();
    for s in slots {
        match out.last_mut() {
            Some(p) if p.kind == s.kind => p.duration_ms += s.ms,
            _ => out.push(Phase {
                kind: s.kind,
                duration_ms: s.ms,
            }),
        }
    }
    out
}

/// Largest cache option not above an equal split of `ways` over `n` cores.
pub(crate) fn equal_share_cache(space: &Space, ways: f64, n: usize) -> usize {
    match space.as_homogeneous() {
        None => 0,
        Some(cs) => {
            let share = ways / n.max(1) as f64;
            cs.cache_options().iter().rposition(|&w| w <= share + 1e-12).unwrap_or(0)
        }
    }
}

/// Per-core on/off flags: latency-critical cores first, then batch cores,
/// with one powered batch core per active app (up to the available cores).
pub(crate) fn core_flags(n_cores: usize, lc_cores: usize, active_batch: usize) -> Vec<bool> {
    let batch_cores = n_cores - lc_cores;
    (0..n_cores)
        .map(|c| c < lc_cores || c - lc_cores < active_batch.min(batch_cores))
        .collect()
}

/// Deterministic seed derivation.
pub(crate) fn derive_seed(seed: u64, tag: u64, q: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(tag ^ mix(q)))
}

/// What the simulator has measured for one app so far; newer values win.
#[derive(Debug, Clone, Default)]
pub(crate) struct AppObs {
    pub throughput: BTreeMap<usize, f64>,
    pub power: BTreeMap<usize, f64>,
    /// index -> (per-core load, ms)
    pub latency: BTreeMap<usize, (f64, f64)>,
}

impl AppObs {
    pub fn active(&self, load: f64) -> ActiveObservations {
        ActiveObservations {
            throughput: self.throughput.iter().map(|(&i, &v)| (i, v)).collect(),
            power: self.power.iter().map(|(&j, &v)| (j, v)).collect(),
            latency: self
                .latency
                .iter()
                .filter(|(_, (l, _))| (l - load).abs() < 1e-9)
                .map(|(&i, &(_, v))| (i, v))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub dds: DdsParams,
    pub sgd: SgdParams,
    /// Workers per SGD fit. More than one uses the lock-free fit, whose
    /// results depend on thread timing.
    pub sgd_workers: usize,
}

impl SimOptions {
    /// Defaults with one search worker per core.
    pub fn for_scenario(sc: &Scenario) -> Self {
        SimOptions {
            dds: DdsParams {
                workers: sc.n_cores,
                ..DdsParams::default()
            },
            sgd: SgdParams::default(),
            sgd_workers: 1,
        }
    }
}

/// Mutable state carried from one quantum to the next.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub quantum: u64,
    pub lc_cores: usize,
    pub lc_config: Option<usize>,
    /// Steady configuration per batch app at the end of the last quantum.
    pub configs: Vec<Option<usize>>,
    pub share: f64,
    /// `(met, tail ms)` of the last steady state, the window the decision
    /// controlled.
    pub last_qos: Option<(bool, f64)>,
    /// Indexed like `Scenario::apps`.
    pub obs: Vec<AppObs>,
    pub noise: NoiseSource,
}

/// Output of one manager for one quantum.
pub(crate) struct Decision {
    pub slots: Vec<Slot>,
    pub steady_lc: Option<(usize, usize)>,
    pub steady_batch: Vec<Option<usize>>,
    pub share: f64,
    pub events: Vec<LcEvent>,
    pub evaluations: usize,
    pub infeasible: bool,
}

/// Runs one manager over a scenario, one quantum per [`Simulator::step`].
pub struct Simulator<'a> {
    pub(crate) sc: &'a Scenario,
    pub(crate) kind: ManagerKind,
    pub(crate) opts: SimOptions,
    pub(crate) state: State,
}

impl<'a> Simulator<'a> {
    pub fn new(sc: &'a Scenario, kind: ManagerKind, opts: SimOptions) -> Result<Self> {
        sc.validate()?;
        if !kind.supports(&sc.space) {
            return Err(Error::domain(format!("manager {kind} does not support this scenario's core space")));
        }
        let n_batch = sc.batch_apps().len();
        let configs = match &sc.space {
            Space::Homogeneous(cs) => {
                let (_, low) = crate::sampling::profiling_indices(cs);
                vec![Some(low); n_batch]
            }
            Space::Hetero(h) => hetero::initial_mapping(h, n_batch),
        };
        let lc_config = match (&sc.space, sc.lc_app()) {
            (Space::Homogeneous(cs), Some(_)) => Some(crate::sampling::profiling_indices(cs).0),
            _ => None,
        };
        let state = State {
            quantum: 0,
            lc_cores: sc.lc_count,
            lc_config,
            configs,
            share: batch_share(sc, sc.lc_count),
            last_qos: None,
            obs: vec![AppObs::default(); sc.apps.len()],
            noise: NoiseSource::with_stream(sc.seed, 0x5eed),
        };
        Ok(Simulator { sc, kind, opts, state })
    }

    pub fn manager(&self) -> ManagerKind {
        self.kind
    }

    pub fn lc_cores(&self) -> usize {
        self.state.lc_cores
    }

    /// Simulates the next quantum.
    pub fn step(&mut self) -> Result<(QuantumPlan, QuantumReport)> {
        let sc = self.sc;
        let t0 = self.state.quantum as f64 * sc.quantum_ms;
        let d = match self.kind {
            ManagerKind::Cuttlesys => cuttlesys::run_quantum(self, t0)?,
            ManagerKind::TwoStep => hetero::run_two_step(self, t0)?,
            ManagerKind::OneStep => hetero::run_one_step(self, t0)?,
            ManagerKind::CoreGating => baselines::run_core_gating(self, t0, false)?,
            ManagerKind::CoreGatingWaypart => baselines::run_core_gating(self, t0, true)?,
            ManagerKind::AsymOracle => baselines::run_asym(self, t0, true)?,
            ManagerKind::AsymFixed => baselines::run_asym(self, t0, false)?,
            ManagerKind::NoGating => baselines::run_no_gating(self, t0)?,
        };
        let tally = account(sc, t0, &d.slots);
        let steady = steady_tally(sc, t0, &d.slots);
        let phases = phases_of(&d.slots);
        let total: f64 = phases.iter().map(|p| p.duration_ms).sum();
        debug_assert!((total - sc.quantum_ms).abs() < 1e-9, "phases cover {total} ms");

        let qos_met = tally.tail_ms.map(|t| t <= sc.qos_target_ms);
        let steady_tail = steady.as_ref().and_then(|t| t.tail_ms);
        self.state.last_qos = steady_tail.or(tally.tail_ms).map(|t| (t <= sc.qos_target_ms, t));
        self.state.configs = d.steady_batch.clone();
        self.state.share = d.share;
        if let Some((cfg, cores)) = d.steady_lc {
            self.state.lc_config = Some(cfg);
            self.state.lc_cores = cores;
        }
        self.state.quantum += 1;

        let mut chosen = Vec::with_capacity(sc.apps.len());
        if sc.lc_app().is_some() {
            chosen.push(d.steady_lc.map(|l| l.0));
        }
        chosen.extend(d.steady_batch.iter().copied());
        let lc_cores = d.steady_lc.map_or(0, |l| l.1);
        let active = d.steady_batch.iter().filter(|c| c.is_some()).count();
        let plan = QuantumPlan {
            phases,
            chosen,
            core_active: core_flags(sc.n_cores, lc_cores, active),
            lc_cores,
            events: d.events,
            evaluations: d.evaluations,
            infeasible: d.infeasible,
            steady_cache_ways: steady_cache(sc, d.steady_lc, &d.steady_batch),
            steady_peak_power: steady.as_ref().map_or(0.0, |t| t.peak_power),
            steady_over_budget_ms: steady.map_or(0.0, |t| t.over_budget_ms),
        };
        let secs = sc.quantum_ms * 1e-3;
        let rates: Vec<f64> = tally.instructions.iter().map(|i| (i / secs).max(1e-9)).collect();
        let report = QuantumReport {
            t_ms: t0,
            manager: self.kind,
            cap: sc.power_cap.value_at(t0),
            qps_load: tally.mean_load,
            lc_config: d.steady_lc.map(|l| l.0),
            lc_cores,
            qos_met,
            tail_ms: tally.tail_ms,
            steady_tail_ms: steady_tail,
            geomean_bips: geomean(&rates).unwrap_or(0.0),
            total_instr: tally.instructions.iter().sum(),
            instructions: tally.instructions,
            mean_power: tally.mean_power,
            peak_power: tally.peak_power,
            over_budget_ms: tally.over_budget_ms,
        };
        if plan.infeasible {
            log::warn!("{} at t={t0} ms: budget infeasible", self.kind);
        }
        Ok((plan, report))
    }

    /// Simulates `duration_ms`, which must be a whole number of quanta.
    pub fn run(&mut self, duration_ms: f64) -> Result<Vec<(QuantumPlan, QuantumReport)>> {
        let n = quanta_in(duration_ms, self.sc.quantum_ms)?;
        (0..n).map(|_| self.step()).collect()
    }
}

/// Number of quanta in `duration_ms`; errors unless it divides evenly.
pub fn quanta_in(duration_ms: f64, quantum_ms: f64) -> Result<usize> {
    let n = (duration_ms / quantum_ms).round();
    if !(duration_ms > 0.0) || n < 1.0 || (n * quantum_ms - duration_ms).abs() > 1e-9 * duration_ms {
        return Err(Error::domain(format!(
            "duration {duration_ms} ms is not a positive multiple of the {quantum_ms} ms quantum"
        )));
    }
    Ok(n as usize)
}

/// Time share of each batch app when `lc_cores` cores serve the
/// latency-critical app and the rest round-robin the batch apps.
pub(crate) fn batch_share(sc: &Scenario, lc_cores: usize) -> f64 {
    let n_batch = sc.batch_apps().len().max(1);
    ((sc.n_cores - lc_cores) as f64 / n_batch as f64).min(1.0)
}

/// Brings a batch assignment within the cache and power budgets using
/// ground-truth power, as read from the chip's power meter once the plan
/// is applied.
///
/// Cache: batch apps with the most ways give one cache option back until
/// the partition fits. Power: repeatedly move the batch app whose predicted
/// throughput loses least per watt saved to a cheaper core config (same
/// cache option, inside its domain); then turn apps off in descending power.
/// Returns the final assignment and whether the budget was unreachable.
#[allow(clippy::too_many_arguments)]
pub(crate) fn enforce_budget(
    sc: &Scenario,
    lc: Option<(usize, usize)>,
    mut x: Vec<usize>,
    share: f64,
    domains: &[Range<usize>],
    pred_bips: Option<&[Vec<f64>]>,
    cap_watts: f64,
) -> (Vec<Option<usize>>, bool) {
    let space = &sc.space;
    let batch = sc.batch_apps();
    let ways = |i: usize| space.cache_ways_of(i).unwrap_or(0.0);
    let lc_ways = lc.map_or(0.0, |(i, c)| c as f64 * ways(i));
    let lc_watts = match (sc.lc_app(), lc) {
        (Some(app), Some((i, c))) => c as f64 * app.watts(space, i),
        _ => 0.0,
    };

    let mut infeasible = false;
    loop {
        let used: f64 = lc_ways + x.iter().map(|&i| ways(i)).sum::<f64>();
        if used <= sc.cache_ways + 1e-9 {
            break;
        }
        let pick = (0..x.len())
            .filter(|&d| space.cache_of(x[d]) > 0 && domains[d].contains(&(x[d] - 1)))
            .max_by(|&a, &b| ways(x[a]).total_cmp(&ways(x[b])).then(b.cmp(&a)));
        match pick {
            Some(d) => x[d] -= 1,
            None => {
                infeasible = true;
                break;
            }
        }
    }

    let watts = |d: usize, i: usize| share * batch[d].watts(space, i);
    if let Some(pred) = pred_bips {
        loop {
            let total: f64 = lc_watts + (0..x.len()).map(|d| watts(d, x[d])).sum::<f64>();
            if total <= cap_watts {
                break;
            }
            let mut best: Option<(f64, usize, usize)> = None;
            for d in 0..x.len() {
                let (cur, cache) = (x[d], space.cache_of(x[d]));
                let p_cur = watts(d, cur);
                for core in 0..space.core_count() {
                    let cand = space.index_of(core, cache);
                    if !domains[d].contains(&cand) {
                        continue;
                    }
                    let saved = p_cur - watts(d, cand);
                    if saved <= 1e-12 {
                        continue;
                    }
                    let loss = pred[d][cur].max(1e-9).ln() - pred[d][cand].max(1e-9).ln();
                    let rate = loss / saved;
                    if best.is_none_or(|b| rate < b.0) {
                        best = Some((rate, d, cand));
                    }
                }
            }
            match best {
                Some((_, d, cand)) => x[d] = cand,
                None => break,
            }
        }
    }

    let dim_power: Vec<f64> = (0..x.len()).map(|d| watts(d, x[d])).collect();
    let mut out: Vec<Option<usize>> = x.into_iter().map(Some).collect();
    match power_repair(&dim_power, &[], cap_watts - lc_watts) {
        Ok(off) => {
            for d in off {
                out[d] = None;
            }
        }
        Err(_) => {
            out.iter_mut().for_each(|c| *c = None);
            infeasible = true;
        }
    }
    (out, infeasible)
}

/// Writes per-quantum rows with the columns
/// `t_ms,manager,cap,qps_load,lc_config,lc_cores,qos_met,tail_ms,geomean_bips,total_instr,mean_power,over_budget_ms`.
pub fn write_quantum_csv(reports: &[QuantumReport], path: &Path, header: Option<&str>) -> Result<()> {
    std::fs::write(path, quantum_csv(reports, header))?;
    Ok(())
}

pub fn quantum_csv(reports: &[QuantumReport], header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}").expect("string write");
        }
    }
    out.push_str("t_ms,manager,cap,qps_load,lc_config,lc_cores,qos_met,tail_ms,geomean_bips,total_instr,mean_power,over_budget_ms\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in reports {
        writeln!(
            out,
            "{},{},{},{:.6},{},{},{},{},{:.6},{:.9},{:.6},{:.6}",
            r.t_ms,
            r.manager,
            r.cap,
            r.qps_load,
            opt(r.lc_config.map(|c| c.to_string())),
            r.lc_cores,
            opt(r.qos_met.map(|m| u8::from(m).to_string())),
            opt(r.tail_ms.map(|t| format!("{t:.6}"))),
            r.geomean_bips,
            r.total_instr,
            r.mean_power,
            r.over_budget_ms,
        )
        .expect("string write");
    }
    out
}
