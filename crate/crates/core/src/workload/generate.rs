//! Synthetic workload generator.
//!
//! Each application is a random mixture of `family_count` base response
//! surfaces. A family surface is a product of saturating factors, one per
//! pipeline section plus one for cache ways:
//!
//! ```text
//! S_f(w, ways) = prod_s sat(w_s; a_s, h_s) / sat(w_max; a_s, h_s) * g(ways) / g(ways_max)
//! sat(w; a, h) = w^a / (w^a + h^a)
//! ```
//!
//! so the exact throughput matrix of a batch has rank at most
//! `family_count`. Multiplicative log-normal noise is applied once, then a
//! monotone envelope restores the width/cache ordering invariants.
//!
//! Randomness comes from ChaCha8 streams keyed by the seed: stream 0 draws
//! families, stream 1 batch apps, stream 2 latency-critical apps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::lattice::Lattice;
use super::{AppKind, AppProfile, LatencySurface};
use crate::config_space::{CoreClass, Space};
use crate::error::{Error, Result};

/// Knobs of the synthetic generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub family_count: usize,
    /// Standard deviation of the multiplicative log-normal noise.
    pub noise_sigma: f64,
    /// Dirichlet concentration of per-app family weights. Small values make
    /// each app resemble one family; large values blend them evenly.
    pub mixture_concentration: f64,
    /// Log-normal spread of per-app throughput scale.
    pub scale_sigma: f64,
    /// Number of points on the LC load grid spanning [0, 1].
    pub load_points: usize,
    /// Latency ceiling as a multiple of the best-case service time.
    pub saturation_factor: f64,
    /// Range of section saturation exponents.
    pub alpha_range: (f64, f64),
    /// Range of section half-saturation widths, relative to the mid width.
    pub half_range: (f64, f64),
    /// Range of cache saturation exponents.
    pub cache_beta_range: (f64, f64),
    /// Range of cache half-saturation points, in ways.
    pub cache_half_range: (f64, f64),
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            family_count: 4,
            noise_sigma: 0.03,
            mixture_concentration: 0.5,
            scale_sigma: 0.25,
            load_points: 21,
            saturation_factor: 50.0,
            alpha_range: (1.0, 2.0),
            half_range: (0.15, 0.5),
            cache_beta_range: (0.8, 1.2),
            cache_half_range: (0.2, 0.6),
        }
    }
}

#[derive(Debug, Clone)]
struct Family {
    alpha: [f64; 3],
    half: [f64; 3],
    cache_beta: f64,
    cache_half: f64,
    small_speed: f64,
    static_frac: f64,
    dyn_share: [f64; 3],
}

impl Family {
    fn draw(rng: &mut ChaCha8Rng, w_ref: f64, cfg: &GeneratorConfig) -> Self {
        let range = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..hi) } else { lo };
        let mut dyn_share = [0.0; 3];
        let mut total = 0.0;
        for s in &mut dyn_share {
            *s = rng.random_range(0.5..1.5);
            total += *s;
        }
        dyn_share.iter_mut().for_each(|s| *s /= total);
        Family {
            alpha: std::array::from_fn(|_| range(rng, cfg.alpha_range)),
            half: std::array::from_fn(|_| w_ref * range(rng, cfg.half_range)),
            cache_beta: range(rng, cfg.cache_beta_range),
            cache_half: range(rng, cfg.cache_half_range),
            small_speed: rng.random_range(0.8..0.95),
            static_frac: rng.random_range(0.1..0.2),
            dyn_share,
        }
    }
}

fn sat(w: f64, a: f64, h: f64) -> f64 {
    let wa = w.powf(a);
    wa / (wa + h.powf(a))
}

/// Precomputed per-configuration coordinates of a space.
#[derive(Debug, Clone)]
struct Coords {
    class: Vec<CoreClass>,
    widths: Vec<[f64; 3]>,
    ways: Vec<f64>,
    w_max: f64,
    ways_max: f64,
}

impl Coords {
    fn new(space: &Space) -> Self {
        let mut class = Vec::with_capacity(space.core_count());
        let mut widths = Vec::with_capacity(space.core_count());
        for j in 0..space.core_count() {
            let (c, cfg, _) = space.describe_core(j).expect("in range");
            class.push(c);
            widths.push(cfg.widths().map(f64::from));
        }
        let ways: Vec<f64> = (0..space.cache_count())
            .map(|k| space.cache_ways_of(k).expect("in range"))
            .collect();
        let w_max = widths.iter().flatten().cloned().fold(0.0, f64::max);
        let ways_max = ways.iter().cloned().fold(0.0, f64::max);
        Coords {
            class,
            widths,
            ways,
            w_max,
            ways_max,
        }
    }

    fn w_ref(&self) -> f64 {
        let w_min = self.widths.iter().flatten().cloned().fold(f64::MAX, f64::min);
        0.5 * (w_min + self.w_max)
    }

    fn speed(&self, f: &Family, j: usize, k: usize) -> f64 {
        let w = &self.widths[j];
        let mut v = 1.0;
        for s in 0..3 {
            v *= sat(w[s], f.alpha[s], f.half[s]) / sat(self.w_max, f.alpha[s], f.half[s]);
        }
        v *= sat(self.ways[k], f.cache_beta, f.cache_half) / sat(self.ways_max, f.cache_beta, f.cache_half);
        if self.class[j] == CoreClass::Small {
            v *= f.small_speed;
        }
        v
    }

    fn power(&self, f: &Family, j: usize) -> f64 {
        let w = &self.widths[j];
        let dynamic: f64 = (0..3).map(|s| f.dyn_share[s] * w[s] / self.w_max).sum();
        match self.class[j] {
            CoreClass::Small => 0.6 * f.static_frac + 0.8 * (1.0 - f.static_frac) * dynamic,
            _ => f.static_frac + (1.0 - f.static_frac) * dynamic,
        }
    }
}

/// Generated applications.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSet {
    pub batch: Vec<AppProfile>,
    pub latency_critical: Vec<AppProfile>,
    /// Pre-noise batch throughput, one row per batch app.
    pub exact_batch_throughput: Vec<Vec<f64>>,
}

/// Draws families once, then any number of applications sharing them.
#[derive(Debug, Clone)]
pub struct WorkloadGenerator {
    seed: u64,
    space: Space,
    config: GeneratorConfig,
    coords: Coords,
    families: Vec<Family>,
    lc_families: Vec<Family>,
}

impl WorkloadGenerator {
    pub fn new(seed: u64, space: Space, config: GeneratorConfig) -> Result<Self> {
        if config.family_count < 2 {
            return Err(Error::domain("family_count must be at least 2"));
        }
        if config.load_points < 2 {
            return Err(Error::domain("the load grid needs at least 2 points"));
        }
        if !(config.mixture_concentration > 0.0) {
            return Err(Error::domain("mixture concentration must be positive"));
        }
        let coords = Coords::new(&space);
        let mut rng = stream(seed, 0);
        let w_ref = coords.w_ref();
        let families = (0..config.family_count).map(|_| Family::draw(&mut rng, w_ref, &config)).collect();
        let lc_families = (0..config.family_count).map(|_| Family::draw(&mut rng, w_ref, &config)).collect();
        Ok(WorkloadGenerator {
            seed,
            space,
            config,
            coords,
            families,
            lc_families,
        })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    /// `n_batch` batch apps `b0..` and `n_lc` latency-critical apps `lc0..`.
    pub fn generate(&self, n_batch: usize, n_lc: usize) -> SyntheticSet {
        let full = Lattice::full(&self.space);
        let cores = Lattice::cores(&self.space);
        let mut rng = stream(self.seed, 1);
        let mut batch = Vec::with_capacity(n_batch);
        let mut exact = Vec::with_capacity(n_batch);
        for a in 0..n_batch {
            let (app, ex) = self.draw_batch(&mut rng, format!("b{a}"), &full, &cores);
            batch.push(app);
            exact.push(ex);
        }
        let mut rng = stream(self.seed, 2);
        let latency_critical = (0..n_lc).map(|a| self.draw_lc(&mut rng, format!("lc{a}"), &full, &cores)).collect();
        SyntheticSet {
            batch,
            latency_critical,
            exact_batch_throughput: exact,
        }
    }

    fn weights(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let gamma = Gamma::new(self.config.mixture_concentration, 1.0).expect("positive shape");
        let mut w: Vec<f64> = (0..self.config.family_count).map(|_| gamma.sample(rng).max(1e-12)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> f64 {
        let s = self.config.noise_sigma;
        let z: f64 = StandardNormal.sample(rng);
        (s * z - 0.5 * s * s).exp()
    }

    fn mixture_speed(&self, families: &[Family], w: &[f64]) -> Vec<f64> {
        let p = self.space.cache_count();
        (0..self.space.len())
            .map(|i| families.iter().zip(w).map(|(f, wt)| wt * self.coords.speed(f, i / p, i % p)).sum())
            .collect()
    }

    fn mixture_power(&self, families: &[Family], w: &[f64], rng: &mut ChaCha8Rng, cores: &Lattice) -> Vec<f64> {
        let scale = rng.random_range(0.8..1.0);
        let mut power: Vec<f64> = (0..self.space.core_count())
            .map(|j| {
                let base: f64 = families.iter().zip(w).map(|(f, wt)| wt * self.coords.power(f, j)).sum();
                scale * base
            })
            .collect();
        for v in &mut power {
            *v *= self.noise(rng);
        }
        cores.envelope(&mut power);
        power
    }

    fn draw_batch(&self, rng: &mut ChaCha8Rng, id: String, full: &Lattice, cores: &Lattice) -> (AppProfile, Vec<f64>) {
        let w = self.weights(rng);
        let z: f64 = StandardNormal.sample(rng);
        let scale = 2.0 * (self.config.scale_sigma * z).exp();
        let exact: Vec<f64> = self.mixture_speed(&self.families, &w).into_iter().map(|v| scale * v).collect();
        let mut throughput = exact.clone();
        for v in &mut throughput {
            *v *= self.noise(rng);
        }
        full.envelope(&mut throughput);
        let power = self.mixture_power(&self.families, &w, rng, cores);
        let app = AppProfile {
            id,
            kind: AppKind::Batch,
            throughput,
            power,
            latency: None,
        };
        (app, exact)
    }

    fn draw_lc(&self, rng: &mut ChaCha8Rng, id: String, full: &Lattice, cores: &Lattice) -> AppProfile {
        let w = self.weights(rng);
        let mut speed = self.mixture_speed(&self.lc_families, &w);
        for v in &mut speed {
            *v *= self.noise(rng);
        }
        full.envelope(&mut speed);
        let top = speed.iter().cloned().fold(0.0, f64::max);
        speed.iter_mut().for_each(|v| *v /= top);

        let s_min = rng.random_range(0.5..2.0);
        let rho_full = rng.random_range(0.55..0.75);
        let bips_scale = rng.random_range(1.0..2.0);
        let cap = self.config.saturation_factor * s_min;
        let n = self.config.load_points;
        let loads: Vec<f64> = (0..n).map(|l| l as f64 / (n - 1) as f64).collect();
        let mut values = Vec::with_capacity(speed.len() * n);
        for &sp in &speed {
            let service = s_min / sp;
            for &load in &loads {
                let rho = load * rho_full / sp;
                let t = if rho < 1.0 { service / (1.0 - rho) } else { cap };
                values.push(t.min(cap));
            }
        }
        let power = self.mixture_power(&self.lc_families, &w, rng, cores);
        AppProfile {
            id,
            kind: AppKind::LatencyCritical,
            throughput: speed.iter().map(|v| bips_scale * v).collect(),
            power,
            latency: Some(LatencySurface::new(loads, values).expect("well-formed grid")),
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `n_batch` batch apps drawn from `family_count` shared families.
pub fn generate_synthetic(seed: u64, n_batch: usize, space: &Space, family_count: usize) -> Result<Vec<AppProfile>> {
    Ok(generate_synthetic_with_exact(seed, n_batch, space, family_count)?.batch)
}

/// As [`generate_synthetic`], also returning the pre-noise throughput matrix.
pub fn generate_synthetic_with_exact(seed: u64, n_batch: usize, space: &Space, family_count: usize) -> Result<SyntheticSet> {
    if n_batch == 0 {
        return Err(Error::domain("n_batch must be at least 1"));
    }
    let config = GeneratorConfig {
        family_count,
        ..GeneratorConfig::default()
    };
    Ok(WorkloadGenerator::new(seed, space.clone(), config)?.generate(n_batch, 0))
}
