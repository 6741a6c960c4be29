//! Simulated runtime profiling.
//!
//! A measurement perturbs the ground truth with two zero-mean terms:
//! a slow sinusoidal program phase, averaged over the sample window, and
//! white noise whose standard deviation shrinks as `sigma0 / sqrt(ms)`.
//! The phase offset is drawn fresh for every measurement, so measurements
//! are unbiased. Replicated sampling spreads sub-samples evenly over one
//! phase period, which cancels the phase term.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config_space::Space;
use crate::config_space::{ConfigSpace, CoreConfig};
use crate::error::{Error, Result};
use crate::workload::AppProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// White-noise standard deviation of a 1 ms sample (relative).
    pub white_sigma: f64,
    /// Amplitude of the phase component (relative).
    pub phase_amplitude: f64,
    pub phase_period_ms: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            white_sigma: 0.03,
            phase_amplitude: 0.04,
            phase_period_ms: 8.0,
        }
    }
}

impl NoiseModel {
    /// No noise at all: samples equal ground truth.
    pub fn exact() -> Self {
        NoiseModel {
            white_sigma: 0.0,
            phase_amplitude: 0.0,
            phase_period_ms: 8.0,
        }
    }

    /// Mean of `A sin(2 pi t / T + phi)` over `[start, start + len]`.
    fn phase_mean(&self, phi: f64, start: f64, len: f64) -> f64 {
        if self.phase_amplitude == 0.0 {
            return 0.0;
        }
        let k = TAU / self.phase_period_ms;
        let a = k * start + phi;
        let b = k * (start + len) + phi;
        self.phase_amplitude * (a.cos() - b.cos()) / (k * len)
    }
}

/// Seeded random source for measurements.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        NoiseSource {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `stream` of `seed`.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NoiseSource { rng }
    }

    fn phase(&mut self) -> f64 {
        self.rng.random_range(0.0..TAU)
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub app_id: String,
    pub config_index: usize,
    /// Offset of the sample within its profiling phase.
    pub start_ms: f64,
    pub duration_ms: f64,
    pub bips: f64,
    pub watts: f64,
    pub latency_ms: Option<f64>,
}

/// One contiguous sample of `app` at `index`.
pub fn measure(
    app: &AppProfile,
    space: &Space,
    index: usize,
    load: f64,
    duration_ms: f64,
    model: &NoiseModel,
    src: &mut NoiseSource,
) -> Result<Sample> {
    replicated_sample(app, space, index, load, 1, duration_ms, model, src)
}

/// Splits `total_ms` into `replicates` sub-samples spaced `period / replicates`
/// apart and returns their mean. With one replicate this is a plain sample.
#[allow(clippy::too_many_arguments)]
pub fn replicated_sample(
    app: &AppProfile,
    space: &Space,
    index: usize,
    load: f64,
    replicates: usize,
    total_ms: f64,
    model: &NoiseModel,
    src: &mut NoiseSource,
) -> Result<Sample> {
    if !(total_ms > 0.0) {
        return Err(Error::domain(format!("sample duration must be positive, got {total_ms}")));
    }
    if replicates == 0 {
        return Err(Error::domain("at least one replicate is required"));
    }
    if index >= space.len() {
        return Err(Error::domain(format!("configuration index {index} out of range")));
    }
    let truth_b = app.bips(index);
    let truth_w = app.watts(space, index);
    let truth_l = app.tail_latency(index, load.clamp(0.0, 1.0));
    let r = replicates as f64;
    let sub = total_ms / r;
    let white = model.white_sigma / sub.sqrt();
    let phi = src.phase();
    let (mut b, mut w, mut l) = (0.0, 0.0, 0.0);
    for k in 0..replicates {
        let start = k as f64 * model.phase_period_ms / r;
        let phase = model.phase_mean(phi, start, sub);
        b += truth_b * (1.0 + phase + white * src.normal());
        w += truth_w * (1.0 + phase + white * src.normal());
        if let Some(t) = truth_l {
            l += t * (1.0 + phase + white * src.normal());
        }
    }
    Ok(Sample {
        app_id: app.id.clone(),
        config_index: index,
        start_ms: 0.0,
        duration_ms: total_ms,
        bips: (b / r).max(0.0),
        watts: (w / r).max(0.0),
        latency_ms: truth_l.map(|_| (l / r).max(0.0)),
    })
}

/// Indices sampled by the 2 ms profiling phase: widest and narrowest core,
/// each with the cache option closest to one way.
pub fn profiling_indices(space: &ConfigSpace) -> (usize, usize) {
    let k = space.nearest_cache_index(1.0);
    let high = space.encode(space.widest(), k).expect("in space");
    let low = space.encode(space.narrowest(), k).expect("in space");
    (high, low)
}

/// Paired profiling: every app is sampled once at `high` and once at `low`
/// for `sample_ms` each. The first half of the apps start high, the rest
/// start low, and the halves swap for the second slot, so the phase lasts
/// `2 * sample_ms` regardless of app count.
#[allow(clippy::too_many_arguments)]
pub fn paired_sampling(
    space: &Space,
    apps: &[&AppProfile],
    loads: &[f64],
    high: usize,
    low: usize,
    sample_ms: f64,
    model: &NoiseModel,
    src: &mut NoiseSource,
) -> Result<Vec<Sample>> {
    if apps.len() < 2 {
        return Err(Error::domain("paired profiling needs at least two apps"));
    }
    if loads.len() != apps.len() {
        return Err(Error::domain("one load value per app is required"));
    }
    let half = apps.len().div_ceil(2);
    let mut out = Vec::with_capacity(2 * apps.len());
    for (a, app) in apps.iter().enumerate() {
        let order = if a < half { [high, low] } else { [low, high] };
        for (slot, &index) in order.iter().enumerate() {
            let mut s = measure(app, space, index, loads[a], sample_ms, model, src)?;
            s.start_ms = slot as f64 * sample_ms;
            out.push(s);
        }
    }
    Ok(out)
}

/// The 2 ms high/low profiling phase on a homogeneous space.
pub fn profile_pair(
    space: &ConfigSpace,
    apps: &[&AppProfile],
    loads: &[f64],
    model: &NoiseModel,
    src: &mut NoiseSource,
) -> Result<Vec<Sample>> {
    let (high, low) = profiling_indices(space);
    let wrapped = Space::Homogeneous(space.clone());
    paired_sampling(&wrapped, apps, loads, high, low, 1.0, model, src)
}

/// Wall time of a paired profiling phase.
pub const PROFILE_PAIR_MS: f64 = 2.0;

/// A three-factor, three-level sampling design in level codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingDesign {
    pub runs: Vec<[usize; 3]>,
}

impl SamplingDesign {
    /// Maps level codes onto the widths of a three-level space.
    pub fn configs(&self, space: &ConfigSpace) -> Result<Vec<CoreConfig>> {
        let levels = space.levels();
        self.runs
            .iter()
            .map(|r| {
                let w = |c: usize| {
                    levels
                        .get(c)
                        .copied()
                        .ok_or_else(|| Error::domain(format!("level code {c} outside a {}-level space", levels.len())))
                };
                Ok(CoreConfig::new(w(r[0])?, w(r[1])?, w(r[2])?))
            })
            .collect()
    }
}

/// 3MM3: the nine level triples whose codes sum to 0 mod 3.
pub fn three_mm3_design() -> SamplingDesign {
    let mut runs = Vec::with_capacity(9);
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                if (a + b + c) % 3 == 0 {
                    runs.push([a, b, c]);
                }
            }
        }
    }
    SamplingDesign { runs }
}

pub fn write_samples_csv(samples: &[Sample], path: &Path, header: Option<&str>) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            writeln!(out, "# {line}").expect("string write");
        }
    }
    out.push_str("app_id,config_index,duration_ms,bips,watts,latency_ms\n");
    for s in samples {
        let lat = s.latency_ms.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.app_id, s.config_index, s.duration_ms, s.bips, s.watts, lat
        )
        .expect("string write");
    }
    fs::write(path, out)?;
    Ok(())
}
