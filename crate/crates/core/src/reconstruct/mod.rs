//! Matrix completion by stochastic gradient descent.
//!
//! A sparse ratings matrix `R` (applications x configurations) is factored
//! as `R ~ Q P^T` with `Q` holding one latent row per application and `P`
//! one per configuration. Each epoch sweeps the observed entries in
//! row-major order and applies, for residual `e = R_ij - q_i . p_j`,
//!
//! ```text
//! q_i += eta * (e * p_j - lambda * q_i)
//! p_j += eta * (e * q_i - lambda * p_j)
//! ```
//!
//! where both right-hand sides use the factor values from before the step.

mod three;

pub use three::{run_three_reconstructions, ActiveObservations, ReconstructionInputs, Reconstructions};

use std::cell::Cell;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Training,
    Active,
}

/// Dense storage with an observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    cols: usize,
    values: Vec<f64>,
    observed: Vec<bool>,
    row_kind: Vec<RowKind>,
}

impl RatingsMatrix {
    pub fn new(cols: usize) -> Self {
        RatingsMatrix {
            cols,
            values: Vec::new(),
            observed: Vec::new(),
            row_kind: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.row_kind.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Appends a fully observed row.
    pub fn push_full(&mut self, kind: RowKind, values: &[f64]) -> Result<usize> {
        if values.len() != self.cols {
            return Err(Error::domain(format!("row of {} values for {} columns", values.len(), self.cols)));
        }
        self.values.extend_from_slice(values);
        self.observed.extend(std::iter::repeat_n(true, self.cols));
        self.row_kind.push(kind);
        Ok(self.rows() - 1)
    }

    /// Appends a row observed only at the given `(column, value)` pairs.
    pub fn push_sparse(&mut self, kind: RowKind, entries: &[(usize, f64)]) -> Result<usize> {
        let row = self.rows();
        self.values.extend(std::iter::repeat_n(0.0, self.cols));
        self.observed.extend(std::iter::repeat_n(false, self.cols));
        self.row_kind.push(kind);
        for &(j, v) in entries {
            self.observe(row, j, v)?;
        }
        Ok(row)
    }

    pub fn observe(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.rows() || col >= self.cols {
            return Err(Error::domain(format!("entry ({row}, {col}) outside the matrix")));
        }
        if !value.is_finite() {
            return Err(Error::domain(format!("non-finite observation at ({row}, {col})")));
        }
        self.values[row * self.cols + col] = value;
        self.observed[row * self.cols + col] = true;
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let k = row * self.cols + col;
        self.observed[k].then(|| self.values[k])
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        self.observed[row * self.cols + col]
    }

    /// First column observed in every row with a positive value.
    pub fn shared_column(&self) -> Option<usize> {
        (0..self.cols).find(|&c| (0..self.rows()).all(|r| self.get(r, c).is_some_and(|v| v > 0.0)))
    }

    /// Row-relative scaling on the shared column, or `Global` without one.
    pub fn relative_scaling(&self) -> Scaling {
        self.shared_column()
            .map_or(Scaling::Global, |reference| Scaling::RowRelative { reference })
    }

    pub fn row_kind(&self, row: usize) -> RowKind {
        self.row_kind[row]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }

    /// Observed `(row, col, value)` triples in row-major order.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.observed
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(k, _)| (k / self.cols, k % self.cols, self.values[k]))
            .collect()
    }

    fn check_fit_preconditions(&self) -> Result<()> {
        if self.cols == 0 || self.observed_count() == 0 {
            return Err(Error::domain("no observed entries to fit"));
        }
        if !self.row_kind.contains(&RowKind::Training) {
            return Err(Error::domain("at least one training row is required"));
        }
        for r in 0..self.rows() {
            let n = (0..self.cols).filter(|&c| self.is_observed(r, c)).count();
            if self.row_kind[r] == RowKind::Active && n < 2 {
                return Err(Error::domain(format!("active row {r} has {n} observations, at least 2 needed")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdParams {
    pub eta: f64,
    pub lambda: f64,
    pub max_iter: usize,
    /// Latent dimension; `None` means `min(16, cols)`.
    pub factors: Option<usize>,
    pub seed: u64,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            eta: 0.01,
            lambda: 0.05,
            max_iter: 200,
            factors: None,
            seed: 0,
        }
    }
}

impl SgdParams {
    pub fn latent_dim(&self, cols: usize) -> usize {
        self.factors.unwrap_or(16.min(cols)).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain("eta must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::domain("lambda must be non-negative"));
        }
        if self.max_iter == 0 || self.factors == Some(0) {
            return Err(Error::domain("max_iter and the latent dimension must be positive"));
        }
        Ok(())
    }
}

/// Learned factors. `q` is `rows x f`, `p` is `cols x f`, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModel {
    pub rows: usize,
    pub cols: usize,
    pub f: usize,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// RMSE over observed entries after each epoch.
    pub rmse_history: Vec<f64>,
}

impl FactorModel {
    pub fn predict(&self, row: usize, col: usize) -> f64 {
        dot(&self.q[row * self.f..(row + 1) * self.f], &self.p[col * self.f..(col + 1) * self.f])
    }

    /// Dense `Q P^T`.
    pub fn product(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.predict(i, j)).collect())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn init_factors(rows: usize, cols: usize, f: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hi = 1.0 / (f as f64).sqrt();
    let q = (0..rows * f).map(|_| rng.random_range(0.0..hi)).collect();
    let p = (0..cols * f).map(|_| rng.random_range(0.0..hi)).collect();
    (q, p)
}

/// Shared factor storage for the update kernel.
trait Factors {
    fn load(&self, k: usize) -> f64;
    fn store(&self, k: usize, v: f64);
}

impl Factors for [Cell<f64>] {
    #[inline]
    fn load(&self, k: usize) -> f64 {
        self[k].get()
    }
    #[inline]
    fn store(&self, k: usize, v: f64) {
        self[k].set(v)
    }
}

/// Racy storage: every load and store is atomic on its own, but a
/// read-modify-write is not, so concurrent updates may be lost.
impl Factors for [AtomicU64] {
    #[inline]
    fn load(&self, k: usize) -> f64 {
        f64::from_bits(self[k].load(Ordering::Relaxed))
    }
    #[inline]
    fn store(&self, k: usize, v: f64) {
        self[k].store(v.to_bits(), Ordering::Relaxed)
    }
}

fn sweep<F: Factors + ?Sized>(q: &F, p: &F, f: usize, entries: &[(usize, usize, f64)], eta: f64, lambda: f64) {
    for &(i, j, r) in entries {
        let (qi, pj) = (i * f, j * f);
        let mut pred = 0.0;
        for k in 0..f {
            pred += q.load(qi + k) * p.load(pj + k);
        }
        let err = r - pred;
        for k in 0..f {
            let qk = q.load(qi + k);
            let pk = p.load(pj + k);
            q.store(qi + k, qk + eta * (err * pk - lambda * qk));
            p.store(pj + k, pk + eta * (err * qk - lambda * pk));
        }
    }
}

fn rmse(q: &[f64], p: &[f64], f: usize, entries: &[(usize, usize, f64)]) -> f64 {
    let sse: f64 = entries
        .iter()
        .map(|&(i, j, r)| {
            let e = r - dot(&q[i * f..(i + 1) * f], &p[j * f..(j + 1) * f]);
            e * e
        })
        .sum();
    (sse / entries.len() as f64).sqrt()
}

fn check_rmse(value: f64, eta: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Diverged { eta })
    }
}

/// Single-threaded, deterministic fit.
pub fn sgd_fit(r: &RatingsMatrix, params: &SgdParams) -> Result<FactorModel> {
    params.validate()?;
    r.check_fit_preconditions()?;
    let f = params.latent_dim(r.cols());
    let entries = r.entries();
    let (mut q, mut p) = init_factors(r.rows(), r.cols(), f, params.seed);
    let mut history = Vec::with_capacity(params.max_iter);
    for _ in 0..params.max_iter {
        let qc = Cell::from_mut(q.as_mut_slice()).as_slice_of_cells();
        let pc = Cell::from_mut(p.as_mut_slice()).as_slice_of_cells();
        sweep(qc, pc, f, &entries, params.eta, params.lambda);
        history.push(check_rmse(rmse(&q, &p, f, &entries), params.eta)?);
    }
    Ok(FactorModel {
        rows: r.rows(),
        cols: r.cols(),
        f,
        q,
        p,
        rmse_history: history,
    })
}

/// Lock-free parallel fit: observed entries are split into `workers`
/// contiguous chunks that update shared factors without synchronization.
/// Workers rejoin after every epoch to record the training error.
pub fn parallel_sgd_fit(r: &RatingsMatrix, params: &SgdParams, workers: usize) -> Result<FactorModel> {
    if workers == 0 {
        return Err(Error::domain("workers must be at least 1"));
    }
    params.validate()?;
    r.check_fit_preconditions()?;
    let f = params.latent_dim(r.cols());
    let entries = r.entries();
    let (q0, p0) = init_factors(r.rows(), r.cols(), f, params.seed);
    let q: Vec<AtomicU64> = q0.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let p: Vec<AtomicU64> = p0.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let chunk = entries.len().div_ceil(workers);
    let snapshot = |s: &[AtomicU64]| -> Vec<f64> { s.iter().map(|a| f64::from_bits(a.load(Ordering::Relaxed))).collect() };
    let mut history = Vec::with_capacity(params.max_iter);
    for _ in 0..params.max_iter {
        if chunk >= entries.len() {
            sweep(q.as_slice(), p.as_slice(), f, &entries, params.eta, params.lambda);
        } else {
            std::thread::scope(|scope| {
                for part in entries.chunks(chunk) {
                    let (q, p) = (q.as_slice(), p.as_slice());
                    scope.spawn(move || sweep(q, p, f, part, params.eta, params.lambda));
                }
            });
        }
        let (qs, ps) = (snapshot(&q), snapshot(&p));
        history.push(check_rmse(rmse(&qs, &ps, f, &entries), params.eta)?);
    }
    Ok(FactorModel {
        rows: r.rows(),
        cols: r.cols(),
        f,
        q: snapshot(&q),
        p: snapshot(&p),
        rmse_history: history,
    })
}

/// Dense completion: observed entries verbatim, the rest from `Q P^T`.
/// With `clamp_non_negative`, predictions are floored at zero.
pub fn reconstruct(model: &FactorModel, r: &RatingsMatrix, clamp_non_negative: bool) -> Result<Vec<Vec<f64>>> {
    if model.rows != r.rows() || model.cols != r.cols() {
        return Err(Error::domain(format!(
            "model is {}x{}, matrix is {}x{}",
            model.rows,
            model.cols,
            r.rows(),
            r.cols()
        )));
    }
    Ok((0..r.rows())
        .map(|i| {
            (0..r.cols())
                .map(|j| match r.get(i, j) {
                    Some(v) => v,
                    None if clamp_non_negative => model.predict(i, j).max(0.0),
                    None => model.predict(i, j),
                })
                .collect()
        })
        .collect())
}

/// Rescaling applied before fitting and undone after.
///
/// Optionally each row is first divided by its own value at a reference
/// column observed in every row, which removes per-application scale. Then
/// each column is shifted by an offset and divided by a scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Per column `(offset, scale)`: `x' = (x / row - offset) / scale`.
    cols: Vec<(f64, f64)>,
    /// Per row divisor (all ones unless relative scaling is used).
    rows: Vec<f64>,
    log: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Min-max over every observed entry of the matrix.
    Global,
    /// Min-max per column over its observed entries.
    PerColumn,
    /// Global min-max of `ln(x)`.
    LogGlobal,
    /// Rows divided by their value at the reference column, columns
    /// centered on their observed mean, one global scale. Regularization
    /// then shrinks sparse rows toward the average shape. Falls back to
    /// `Global` when some row lacks a positive reference entry.
    RowRelative { reference: usize },
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    let s = hi - lo;
    if s > 1e-12 * hi.abs().max(1.0) {
        (lo, s)
    } else {
        (lo, 1.0)
    }
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Normalizer {
    pub fn fit(r: &RatingsMatrix, scaling: Scaling) -> Self {
        let entries = r.entries();
        let ones = vec![1.0; r.rows()];
        match scaling {
            Scaling::Global | Scaling::LogGlobal => {
                let log = scaling == Scaling::LogGlobal;
                let tx = |v: f64| if log { v.max(1e-12).ln() } else { v };
                let (lo, hi) = min_max(entries.iter().map(|e| tx(e.2)));
                Normalizer {
                    cols: vec![span(lo, hi); r.cols()],
                    rows: ones,
                    log,
                }
            }
            Scaling::PerColumn => {
                let cols = (0..r.cols())
                    .map(|j| {
                        let (lo, hi) = min_max(entries.iter().filter(|e| e.1 == j).map(|e| e.2));
                        if lo.is_finite() {
                            span(lo, hi)
                        } else {
                            (0.0, 1.0)
                        }
                    })
                    .collect();
                Normalizer {
                    cols,
                    rows: ones,
                    log: false,
                }
            }
            Scaling::RowRelative { reference } => {
                let rows: Option<Vec<f64>> = (0..r.rows()).map(|i| r.get(i, reference).filter(|v| *v > 0.0)).collect();
                let Some(rows) = rows else {
                    return Normalizer::fit(r, Scaling::Global);
                };
                let mut sum = vec![0.0; r.cols()];
                let mut count = vec![0usize; r.cols()];
                for &(i, j, v) in &entries {
                    sum[j] += v / rows[i];
                    count[j] += 1;
                }
                let mean: Vec<f64> = sum
                    .iter()
                    .zip(&count)
                    .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
                    .collect();
                let (lo, hi) = min_max(entries.iter().map(|&(i, j, v)| v / rows[i] - mean[j]));
                let scale = span(lo, hi).1;
                Normalizer {
                    cols: mean.into_iter().map(|m| (m, scale)).collect(),
                    rows,
                    log: false,
                }
            }
        }
    }

    pub fn forward(&self, row: usize, col: usize, v: f64) -> f64 {
        let v = if self.log { v.max(1e-12).ln() } else { v };
        let (o, s) = self.cols[col];
        (v / self.rows[row] - o) / s
    }

    pub fn inverse(&self, row: usize, col: usize, v: f64) -> f64 {
        let (o, s) = self.cols[col];
        let x = (v * s + o) * self.rows[row];
        if self.log {
            x.exp()
        } else {
            x
        }
    }

    pub fn apply(&self, r: &RatingsMatrix) -> RatingsMatrix {
        let mut out = r.clone();
        for (k, v) in out.values.iter_mut().enumerate() {
            if out.observed[k] {
                *v = self.forward(k / r.cols, k % r.cols, *v);
            }
        }
        out
    }
}

/// Normalizes, fits (in parallel when `workers > 1`), and returns the dense
/// completion in the original units, observed entries unchanged.
pub fn complete(
    r: &RatingsMatrix,
    params: &SgdParams,
    scaling: Scaling,
    workers: usize,
    clamp_non_negative: bool,
) -> Result<(Vec<Vec<f64>>, FactorModel)> {
    let norm = Normalizer::fit(r, scaling);
    let scaled = norm.apply(r);
    let model = if workers > 1 {
        parallel_sgd_fit(&scaled, params, workers)?
    } else {
        sgd_fit(&scaled, params)?
    };
    let dense = (0..r.rows())
        .map(|i| {
            (0..r.cols())
                .map(|j| match r.get(i, j) {
                    Some(v) => v,
                    None => {
                        let v = norm.inverse(i, j, model.predict(i, j));
                        if clamp_non_negative {
                            v.max(0.0)
                        } else {
                            v
                        }
                    }
                })
                .collect()
        })
        .collect();
    Ok((dense, model))
}

/// Diagnostic summary of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub matrix: String,
    pub rows: usize,
    pub cols: usize,
    pub latent_dim: usize,
    pub observed: usize,
    pub rmse_history: Vec<f64>,
}

impl FitDiagnostics {
    pub fn new(matrix: &str, r: &RatingsMatrix, model: &FactorModel) -> Self {
        FitDiagnostics {
            matrix: matrix.to_string(),
            rows: r.rows(),
            cols: r.cols(),
            latent_dim: model.f,
            observed: r.observed_count(),
            rmse_history: model.rmse_history.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
