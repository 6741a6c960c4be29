use serde::{Deserialize, Serialize};

use super::{complete, FitDiagnostics, RatingsMatrix, RowKind, Scaling, SgdParams};
use crate::config_space::Space;
use crate::error::{Error, Result};
use crate::workload::AppProfile;

/// What has been measured for one active application.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActiveObservations {
    /// `(config index, bips)`
    pub throughput: Vec<(usize, f64)>,
    /// `(core config, watts)`
    pub power: Vec<(usize, f64)>,
    /// `(config index, ms)`, latency-critical apps only, at the current load.
    pub latency: Vec<(usize, f64)>,
}

pub struct ReconstructionInputs<'a> {
    pub space: &'a Space,
    pub training_batch: Vec<&'a AppProfile>,
    pub training_lc: Vec<&'a AppProfile>,
    pub active_batch: &'a [ActiveObservations],
    pub active_lc: Option<&'a ActiveObservations>,
    /// Per-core load at which the latency matrix is built.
    pub lc_load: f64,
    pub params: SgdParams,
    /// SGD workers per fit.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructions {
    /// One row per active batch app, one column per configuration index.
    pub throughput: Vec<Vec<f64>>,
    /// Latency of the active latency-critical app per configuration index.
    pub latency: Option<Vec<f64>>,
    /// One row per active app (latency-critical first), one column per core config.
    pub power: Vec<Vec<f64>>,
    pub diagnostics: Vec<FitDiagnostics>,
}

fn tag(matrix: &'static str) -> impl Fn(Error) -> Error {
    move |e| Error::Reconstruction {
        matrix,
        source: Box::new(e),
    }
}

fn fit(
    matrix: &'static str,
    r: RatingsMatrix,
    params: SgdParams,
    scaling: Scaling,
    workers: usize,
    active_from: usize,
) -> Result<(Vec<Vec<f64>>, FitDiagnostics)> {
    let (mut dense, model) = complete(&r, &params, scaling, workers, true).map_err(tag(matrix))?;
    let diag = FitDiagnostics::new(matrix, &r, &model);
    Ok((dense.split_off(active_from), diag))
}

/// Builds and fits the throughput, latency and power matrices concurrently.
///
/// All three share the training applications as their fully observed rows.
/// Throughput covers every active batch app jointly; latency covers the
/// latency-critical training apps plus the one active service; power has
/// one column per core configuration and covers every app.
pub fn run_three_reconstructions(inp: &ReconstructionInputs<'_>) -> Result<Reconstructions> {
    let space = inp.space;
    let n = space.len();
    let m = space.core_count();

    let mut thr = RatingsMatrix::new(n);
    for app in &inp.training_batch {
        thr.push_full(RowKind::Training, &app.throughput).map_err(tag("throughput"))?;
    }
    for obs in inp.active_batch {
        thr.push_sparse(RowKind::Active, &obs.throughput).map_err(tag("throughput"))?;
    }

    let mut pow = RatingsMatrix::new(m);
    for app in inp.training_batch.iter().chain(&inp.training_lc) {
        pow.push_full(RowKind::Training, &app.power).map_err(tag("power"))?;
    }
    for obs in inp.active_lc.into_iter().chain(inp.active_batch) {
        pow.push_sparse(RowKind::Active, &obs.power).map_err(tag("power"))?;
    }

    let lat = match inp.active_lc {
        None => None,
        Some(obs) => {
            let mut r = RatingsMatrix::new(n);
            for app in &inp.training_lc {
                let row: Vec<f64> = (0..n).map(|i| app.tail_latency(i, inp.lc_load).unwrap_or(0.0)).collect();
                r.push_full(RowKind::Training, &row).map_err(tag("latency"))?;
            }
            r.push_sparse(RowKind::Active, &obs.latency).map_err(tag("latency"))?;
            Some(r)
        }
    };

    let p = inp.params;
    let seeded = |k: u64| SgdParams {
        seed: p.seed.wrapping_add(k),
        ..p
    };
    let (n_tb, n_tl) = (inp.training_batch.len(), inp.training_lc.len());
    let (thr_scaling, pow_scaling) = (thr.relative_scaling(), pow.relative_scaling());
    let (thr_res, pow_res, lat_res) = std::thread::scope(|s| {
        let t = s.spawn(|| fit("throughput", thr, seeded(0), thr_scaling, inp.workers, n_tb));
        let w = s.spawn(|| fit("power", pow, seeded(1), pow_scaling, inp.workers, n_tb + n_tl));
        let l = lat.map(|r| fit("latency", r, seeded(2), Scaling::LogGlobal, inp.workers, n_tl));
        (t.join().expect("fit thread"), w.join().expect("fit thread"), l)
    });
    let (throughput, d0) = thr_res?;
    let (power, d1) = pow_res?;
    let mut diagnostics = vec![d0, d1];
    let latency = match lat_res {
        None => None,
        Some(res) => {
            let (mut rows, d2) = res?;
            diagnostics.push(d2);
            rows.pop()
        }
    };
    Ok(Reconstructions {
        throughput,
        latency,
        power,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{GeneratorConfig, WorkloadGenerator};

    #[test]
    fn shapes_and_observation_precedence() {
        let space = Space::default();
        let set = WorkloadGenerator::new(8, space.clone(), GeneratorConfig::default())
            .unwrap()
            .generate(10, 3);
        let (train, active) = set.batch.split_at(6);
        let (train_lc, lc) = set.latency_critical.split_at(2);
        let obs = |a: &AppProfile| ActiveObservations {
            throughput: vec![(1, a.bips(1)), (105, a.bips(105))],
            power: vec![(0, a.power[0]), (26, a.power[26])],
            latency: a
                .latency
                .as_ref()
                .map(|_| vec![(1, a.tail_latency(1, 0.5).unwrap()), (105, a.tail_latency(105, 0.5).unwrap())])
                .unwrap_or_default(),
        };
        let active_obs: Vec<_> = active.iter().map(obs).collect();
        let lc_obs = obs(&lc[0]);
        let inp = ReconstructionInputs {
            space: &space,
            training_batch: train.iter().collect(),
            training_lc: train_lc.iter().collect(),
            active_batch: &active_obs,
            active_lc: Some(&lc_obs),
            lc_load: 0.5,
            params: SgdParams::default(),
            workers: 1,
        };
        let out = run_three_reconstructions(&inp).unwrap();
        assert_eq!(out.throughput.len(), 4);
        assert_eq!(out.power.len(), 5);
        assert!(out.power.iter().all(|r| r.len() == space.core_count()));
        assert_eq!(out.latency.as_ref().unwrap().len(), 108);
        assert_eq!(out.diagnostics[2].rows, 3);
        assert_eq!(out.throughput[0][1], active[0].bips(1));
        assert_eq!(out.power[1][26], active[0].power[26]);
        assert!(out.throughput.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn errors_name_the_matrix() {
        let space = Space::default();
        let inp = ReconstructionInputs {
            space: &space,
            training_batch: vec![],
            training_lc: vec![],
            active_batch: &[],
            active_lc: None,
            lc_load: 0.5,
            params: SgdParams::default(),
            workers: 1,
        };
        match run_three_reconstructions(&inp) {
            Err(Error::Reconstruction { matrix, .. }) => assert!(matrix == "throughput" || matrix == "power"),
            other => panic!("{other:?}"),
        }
    }
}
