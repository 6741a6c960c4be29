//! Scenarios: the applications, core split, budgets and time schedules of
//! one experiment, plus their on-disk TOML form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_profiles, save_profiles, save_training_db, AppProfile, GeneratorConfig, WorkloadGenerator};
use crate::config_space::{CoreClass, HeteroSpace, Space, SpaceFile};
use crate::error::{Error, Result};
use crate::runtime::PhaseCosts;
use crate::sampling::NoiseModel;
use crate::short_hash;

/// Piecewise-constant signal over time: `(start_ms, value)` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<(f64, f64)>);

impl Schedule {
    pub fn constant(value: f64) -> Self {
        Schedule(vec![(0.0, value)])
    }

    /// Value in effect at `t_ms`; before the first step, the first value.
    pub fn value_at(&self, t_ms: f64) -> f64 {
        let mut v = self.0[0].1;
        for &(t, x) in &self.0 {
            if t <= t_ms {
                v = x;
            } else {
                break;
            }
        }
        v
    }

    /// Constant pieces covering `[start, end)` as `(from, to, value)`.
    pub fn segments(&self, start: f64, end: f64) -> Vec<(f64, f64, f64)> {
        let mut cuts = vec![start];
        cuts.extend(self.0.iter().map(|s| s.0).filter(|&t| t > start && t < end));
        cuts.push(end);
        cuts.windows(2).map(|w| (w[0], w[1], self.value_at(w[0]))).collect()
    }

    fn validate(&self, what: &str, lo_open: f64, hi: f64) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::domain(format!("{what} schedule is empty")));
        }
        if self.0.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::domain(format!("{what} schedule times must increase")));
        }
        if let Some(&(_, v)) = self.0.iter().find(|s| !(s.1 > lo_open && s.1 <= hi)) {
            return Err(Error::domain(format!("{what} value {v} outside ({lo_open}, {hi}]")));
        }
        Ok(())
    }
}

/// A complete experiment setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub space: Space,
    /// Active applications: the latency-critical service (if any) first.
    pub apps: Vec<AppProfile>,
    /// Fully characterized offline applications.
    pub training: Vec<AppProfile>,
    pub n_cores: usize,
    /// Cores initially given to the latency-critical service.
    pub lc_count: usize,
    pub qos_target_ms: f64,
    pub qos_slack: f64,
    pub cache_ways: f64,
    pub quantum_ms: f64,
    pub power_cap: Schedule,
    pub load: Schedule,
    pub noise: NoiseModel,
    pub phases: PhaseCosts,
}

fn default_slack() -> f64 {
    0.2
}
fn default_ways() -> f64 {
    32.0
}
fn default_quantum() -> f64 {
    100.0
}
fn default_profiles() -> String {
    "profiles.csv".into()
}
fn default_training() -> String {
    "training.csv".into()
}

/// TOML form of a [`Scenario`]; profile paths are relative to the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub seed: u64,
    pub n_cores: usize,
    pub lc_count: usize,
    pub qos_target_ms: f64,
    #[serde(default = "default_slack")]
    pub qos_slack: f64,
    #[serde(default = "default_ways")]
    pub cache_ways: f64,
    #[serde(default = "default_quantum")]
    pub quantum_ms: f64,
    #[serde(default = "default_profiles")]
    pub profiles: String,
    #[serde(default = "default_training")]
    pub training: String,
    pub power_cap_schedule: Schedule,
    pub load_schedule: Schedule,
    pub space: SpaceFile,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub phases: PhaseCosts,
}

impl Scenario {
    pub fn lc_app(&self) -> Option<&AppProfile> {
        self.apps.first().filter(|a| a.is_latency_critical())
    }

    pub fn batch_apps(&self) -> &[AppProfile] {
        match self.lc_app() {
            Some(_) => &self.apps[1..],
            None => &self.apps,
        }
    }

    pub fn training_lc(&self) -> impl Iterator<Item = &AppProfile> {
        self.training.iter().filter(|a| a.is_latency_critical())
    }

    pub fn training_batch(&self) -> impl Iterator<Item = &AppProfile> {
        self.training.iter().filter(|a| !a.is_latency_critical())
    }

    /// System power with every core fully provisioned. On a big/small
    /// system this is the peak over app-to-class mappings: every app at
    /// full small power plus the largest big-minus-small increments for
    /// the big cores.
    pub fn max_power(&self) -> f64 {
        match &self.space {
            Space::Homogeneous(_) => {
                let lc = self.lc_app().map(|a| self.lc_count as f64 * a.power[0]).unwrap_or(0.0);
                lc + self.batch_apps().iter().map(|a| a.power[0]).sum::<f64>()
            }
            Space::Hetero(h) => {
                let (b, s) = (h.full_index(CoreClass::Big), h.full_index(CoreClass::Small));
                let mut extra: Vec<f64> = self.apps.iter().map(|a| (a.power[b] - a.power[s]).max(0.0)).collect();
                extra.sort_by(|x, y| y.total_cmp(x));
                let small: f64 = self.apps.iter().map(|a| a.power[s]).sum();
                small + extra.iter().take(self.n_cores / 2).sum::<f64>()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        for app in self.apps.iter().chain(&self.training) {
            app.validate(&self.space)?;
        }
        if self.apps.iter().skip(1).any(|a| a.is_latency_critical()) {
            return Err(Error::domain("at most one latency-critical app, listed first"));
        }
        let lc = usize::from(self.lc_app().is_some());
        if lc == 1 && self.lc_count == 0 {
            return Err(Error::domain("a latency-critical app needs at least one core"));
        }
        if lc == 0 && self.lc_count != 0 {
            return Err(Error::domain("lc_count set without a latency-critical app"));
        }
        if self.lc_count >= self.n_cores {
            return Err(Error::domain("no cores left for batch apps"));
        }
        if self.batch_apps().is_empty() {
            return Err(Error::domain("a scenario needs at least one batch app"));
        }
        if lc == 1 && self.training_lc().next().is_none() {
            return Err(Error::domain("latency reconstruction needs latency-critical training apps"));
        }
        if self.training_batch().next().is_none() {
            return Err(Error::domain("reconstruction needs batch training apps"));
        }
        if let Space::Hetero(_) = self.space {
            if lc == 1 {
                return Err(Error::domain("big/small scenarios are batch-only"));
            }
            if self.apps.len() != self.n_cores || !self.n_cores.is_multiple_of(2) {
                return Err(Error::domain("big/small scenarios need one app per core and an even core count"));
            }
        }
        if !(self.quantum_ms > 0.0 && self.cache_ways > 0.0 && self.qos_target_ms > 0.0) {
            return Err(Error::domain("quantum, cache ways and QoS target must be positive"));
        }
        if !(0.0..1.0).contains(&self.qos_slack) {
            return Err(Error::domain("QoS slack must lie in [0, 1)"));
        }
        self.power_cap.validate("power cap", 0.0, 1.0)?;
        self.load.validate("load", -f64::MIN_POSITIVE, 1.0)?;
        self.phases.validate(self.quantum_ms)?;
        Ok(())
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            seed: self.seed,
            n_cores: self.n_cores,
            lc_count: self.lc_count,
            qos_target_ms: self.qos_target_ms,
            qos_slack: self.qos_slack,
            cache_ways: self.cache_ways,
            quantum_ms: self.quantum_ms,
            profiles: default_profiles(),
            training: default_training(),
            power_cap_schedule: self.power_cap.clone(),
            load_schedule: self.load.clone(),
            space: self.space.to_file(),
            noise: self.noise,
            phases: self.phases.clone(),
        }
    }

    /// Digest of the scenario definition (without the profile data).
    pub fn config_hash(&self) -> String {
        short_hash(toml::to_string(&self.to_file()).expect("scenario serializes").as_bytes())
    }

    /// Writes `scenario.toml`, `profiles.csv` and `training.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let header = format!("seed={} config={}", self.seed, self.config_hash());
        let body = toml::to_string(&self.to_file())?;
        fs::write(dir.join("scenario.toml"), format!("# {header}\n{body}"))?;
        save_profiles(&self.apps, &self.space, &dir.join(default_profiles()), Some(&header))?;
        save_training_db(&self.training, &self.space, &dir.join(default_training()), Some(&header))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file: ScenarioFile = toml::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let space = Space::from_file(&file.space)?;
        let apps = load_profiles(&dir.join(&file.profiles), &space)?.profiles;
        let training = load_profiles(&dir.join(&file.training), &space)?.profiles;
        let scenario = Scenario {
            seed: file.seed,
            space,
            apps,
            training,
            n_cores: file.n_cores,
            lc_count: file.lc_count,
            qos_target_ms: file.qos_target_ms,
            qos_slack: file.qos_slack,
            cache_ways: file.cache_ways,
            quantum_ms: file.quantum_ms,
            power_cap: file.power_cap_schedule,
            load: file.load_schedule,
            noise: file.noise,
            phases: file.phases,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Builds reference synthetic scenarios.
#[derive(Debug, Clone)]
pub struct ScenarioBuilder {
    pub seed: u64,
    pub n_cores: usize,
    pub hetero: bool,
    pub generator: GeneratorConfig,
    pub training_batch: usize,
    pub training_lc: usize,
    pub power_cap: Schedule,
    pub load: Schedule,
    /// QoS target as a multiple of the best achievable latency at `qos_ref_load`.
    pub qos_factor: f64,
    pub qos_ref_load: f64,
    pub noise: NoiseModel,
    pub phases: PhaseCosts,
}

impl ScenarioBuilder {
    pub fn new(seed: u64, n_cores: usize) -> Self {
        ScenarioBuilder {
            seed,
            n_cores,
            hetero: false,
            generator: GeneratorConfig::default(),
            training_batch: 16,
            training_lc: 4,
            power_cap: Schedule::constant(0.7),
            load: Schedule::constant(0.5),
            qos_factor: 1.5,
            qos_ref_load: 0.8,
            noise: NoiseModel::default(),
            phases: PhaseCosts::default(),
        }
    }

    pub fn hetero(mut self, hetero: bool) -> Self {
        self.hetero = hetero;
        self
    }

    pub fn cap(mut self, cap: Schedule) -> Self {
        self.power_cap = cap;
        self
    }

    pub fn load(mut self, load: Schedule) -> Self {
        self.load = load;
        self
    }

    pub fn build(&self) -> Result<Scenario> {
        if self.n_cores < 2 {
            return Err(Error::domain("a scenario needs at least two cores"));
        }
        let space = if self.hetero {
            Space::Hetero(HeteroSpace::default())
        } else {
            Space::default()
        };
        let (lc_count, n_batch, n_lc) = if self.hetero {
            (0, self.n_cores, 0)
        } else {
            (self.n_cores / 2, self.n_cores - self.n_cores / 2, self.training_lc + 1)
        };
        let gen = WorkloadGenerator::new(self.seed, space.clone(), self.generator.clone())?;
        let set = gen.generate(self.training_batch + n_batch, n_lc);
        let mut batch = set.batch;
        let active_batch = batch.split_off(self.training_batch);
        let mut lc = set.latency_critical;
        let mut apps = Vec::with_capacity(n_batch + 1);
        let mut qos = 1.0;
        if n_lc > 0 {
            let active = lc.pop().expect("generated");
            qos = self.qos_factor
                * (0..space.len())
                    .map(|i| active.tail_latency(i, self.qos_ref_load).expect("lc app"))
                    .fold(f64::INFINITY, f64::min);
            apps.push(active);
        }
        apps.extend(active_batch);
        let mut training = lc;
        training.extend(batch);
        let scenario = Scenario {
            seed: self.seed,
            space,
            apps,
            training,
            n_cores: self.n_cores,
            lc_count,
            qos_target_ms: qos,
            qos_slack: 0.2,
            cache_ways: 32.0,
            quantum_ms: 100.0,
            power_cap: self.power_cap.clone(),
            load: self.load.clone(),
            noise: self.noise,
            phases: self.phases.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
