//! Multi-manager runs and power-cap sweeps with file output.
//!
//! Instruction totals are normalized against the `no_gating` manager, which
//! ignores the cap and therefore yields one reference total per scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{quantum_csv, ManagerKind, QuantumPlan, QuantumReport, SimOptions, Simulator};
use crate::short_hash;
use crate::workload::{Scenario, Schedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub managers: Vec<ManagerKind>,
    /// Constant caps to run; empty keeps the scenario's own cap schedule.
    pub caps: Vec<f64>,
    pub duration_ms: f64,
    /// SGD workers per reconstruction.
    pub workers: usize,
    /// Overrides the scenario's quantum length.
    pub quantum_ms: Option<f64>,
}

impl ExperimentConfig {
    pub fn validate(&self, sc: &Scenario) -> Result<()> {
        if self.managers.is_empty() {
            return Err(Error::domain("at least one manager is required"));
        }
        if let Some(m) = self.managers.iter().find(|m| !m.supports(&sc.space)) {
            return Err(Error::domain(format!("manager {m} does not support this scenario's core space")));
        }
        if self.caps.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return Err(Error::domain("caps must lie in (0, 1]"));
        }
        if self.workers == 0 {
            return Err(Error::domain("workers must be at least 1"));
        }
        crate::runtime::quanta_in(self.duration_ms, self.quantum_ms.unwrap_or(sc.quantum_ms))?;
        Ok(())
    }

    /// Header line embedded in every output file.
    pub fn header(&self, sc: &Scenario) -> String {
        let text = format!(
            "{}|{:?}|{:?}|{}|{}|{:?}",
            sc.config_hash(),
            self.managers,
            self.caps,
            self.duration_ms,
            self.workers,
            self.quantum_ms
        );
        format!("seed={} config={}", sc.seed, short_hash(text.as_bytes()))
    }
}

/// One manager at one cap.
#[derive(Debug, Clone, PartialEq)]
pub struct ManagerRun {
    pub manager: ManagerKind,
    /// The constant cap, or `None` when the scenario schedule was used.
    pub cap: Option<f64>,
    pub plans: Vec<QuantumPlan>,
    pub reports: Vec<QuantumReport>,
}

impl ManagerRun {
    pub fn total_instr(&self) -> f64 {
        self.reports.iter().map(|r| r.total_instr).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manager: ManagerKind,
    pub cap: Option<f64>,
    pub quanta: usize,
    pub total_instr: f64,
    /// Total instructions relative to `no_gating`.
    pub normalized_instr: f64,
    pub qos_met_fraction: Option<f64>,
    pub mean_power: f64,
    pub over_budget_ms: f64,
    pub infeasible_quanta: usize,
}

/// Applies the experiment's overrides to a copy of the scenario.
pub fn scenario_for(sc: &Scenario, cfg: &ExperimentConfig, cap: Option<f64>) -> Result<Scenario> {
    let mut s = sc.clone();
    if let Some(c) = cap {
        s.power_cap = Schedule::constant(c);
    }
    if let Some(q) = cfg.quantum_ms {
        s.quantum_ms = q;
    }
    s.validate()?;
    Ok(s)
}

pub fn run_one(sc: &Scenario, cfg: &ExperimentConfig, manager: ManagerKind, cap: Option<f64>) -> Result<ManagerRun> {
    let s = scenario_for(sc, cfg, cap)?;
    let mut opts = SimOptions::for_scenario(&s);
    opts.sgd_workers = cfg.workers;
    let mut sim = Simulator::new(&s, manager, opts)?;
    let (plans, reports) = sim.run(cfg.duration_ms)?.into_iter().unzip();
    Ok(ManagerRun {
        manager,
        cap,
        plans,
        reports,
    })
}

/// Runs every manager at every cap (or once on the scenario schedule).
pub fn run_all(sc: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<ManagerRun>> {
    cfg.validate(sc)?;
    let caps: Vec<Option<f64>> = if cfg.caps.is_empty() {
        vec![None]
    } else {
        cfg.caps.iter().copied().map(Some).collect()
    };
    let mut out = Vec::new();
    for &cap in &caps {
        for &m in &cfg.managers {
            log::info!("running {m} at cap {cap:?}");
            out.push(run_one(sc, cfg, m, cap)?);
        }
    }
    Ok(out)
}

/// Total instructions of `no_gating` over the experiment duration.
pub fn reference_total(sc: &Scenario, cfg: &ExperimentConfig, runs: &[ManagerRun]) -> Result<f64> {
    if let Some(r) = runs.iter().find(|r| r.manager == ManagerKind::NoGating) {
        return Ok(r.total_instr());
    }
    Ok(run_one(sc, cfg, ManagerKind::NoGating, None)?.total_instr())
}

pub fn summarize(runs: &[ManagerRun], reference: f64) -> Vec<RunSummary> {
    runs.iter()
        .map(|r| {
            let n = r.reports.len();
            let qos: Vec<bool> = r.reports.iter().filter_map(|q| q.qos_met).collect();
            RunSummary {
                manager: r.manager,
                cap: r.cap,
                quanta: n,
                total_instr: r.total_instr(),
                normalized_instr: r.total_instr() / reference,
                qos_met_fraction: (!qos.is_empty()).then(|| qos.iter().filter(|&&m| m).count() as f64 / qos.len() as f64),
                mean_power: r.reports.iter().map(|q| q.mean_power).sum::<f64>() / n.max(1) as f64,
                over_budget_ms: r.reports.iter().map(|q| q.over_budget_ms).sum(),
                infeasible_quanta: r.plans.iter().filter(|p| p.infeasible).count(),
            }
        })
        .collect()
}

/// Files written by [`write_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub quanta_csv: PathBuf,
    pub summary_json: PathBuf,
    pub summaries: Vec<RunSummary>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    seed: u64,
    config: &'a str,
    duration_ms: f64,
    reference_instr: f64,
    managers: &'a [RunSummary],
}

/// Runs the experiment and writes `quanta.csv` and `summary.json` into `out`.
pub fn write_run(sc: &Scenario, cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let runs = run_all(sc, cfg)?;
    let reference = reference_total(sc, cfg, &runs)?;
    let summaries = summarize(&runs, reference);
    fs::create_dir_all(out)?;
    let header = cfg.header(sc);
    let reports: Vec<QuantumReport> = runs.iter().flat_map(|r| r.reports.iter().cloned()).collect();
    let quanta_csv = out.join("quanta.csv");
    fs::write(&quanta_csv, quantum_csv(&reports, Some(&header)))?;
    let config = header.split("config=").nth(1).unwrap_or_default();
    let file = SummaryFile {
        seed: sc.seed,
        config,
        duration_ms: cfg.duration_ms,
        reference_instr: reference,
        managers: &summaries,
    };
    let summary_json = out.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&file)? + "\n")?;
    Ok(RunOutput {
        quanta_csv,
        summary_json,
        summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub manager: ManagerKind,
    pub cap: f64,
    pub total_instr: f64,
    pub normalized_instr: f64,
}

/// One row per (manager, cap); caps must be given.
pub fn sweep(sc: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    if cfg.caps.is_empty() {
        return Err(Error::domain("a sweep needs at least one cap"));
    }
    let runs = run_all(sc, cfg)?;
    let reference = reference_total(sc, cfg, &runs)?;
    Ok(runs
        .iter()
        .map(|r| SweepRow {
            manager: r.manager,
            cap: r.cap.expect("sweeps use constant caps"),
            total_instr: r.total_instr(),
            normalized_instr: r.total_instr() / reference,
        })
        .collect())
}

pub fn sweep_csv(rows: &[SweepRow], header: &str) -> String {
    let mut out = format!("# {header}\nmanager,cap,total_instr,normalized_instr\n");
    for r in rows {
        writeln!(out, "{},{},{:.9},{:.6}", r.manager, r.cap, r.total_instr, r.normalized_instr).expect("string write");
    }
    out
}

/// Runs a sweep and writes `sweep.csv` into `out`.
pub fn write_sweep(sc: &Scenario, cfg: &ExperimentConfig, out: &Path) -> Result<(PathBuf, Vec<SweepRow>)> {
    let rows = sweep(sc, cfg)?;
    fs::create_dir_all(out)?;
    let path = out.join("sweep.csv");
    fs::write(&path, sweep_csv(&rows, &cfg.header(sc)))?;
    Ok((path, rows))
}
