//! Diagonal-covariance Gaussian mixture models.
//!
//! A species model is `p(x) = Σ_i p_i · N(x; μ_i, diag(σ²_i))`. Training is
//! maximum likelihood by EM, started from k-means++ seeded k-means centres,
//! the full-data per-dimension variance and uniform weights. Densities are
//! evaluated in the log domain throughout.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use crate::scalar::{log_sum_exp, Real};

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("{frames} frames cannot fit {components} components")]
    TooFewFrames { frames: usize, components: usize },
    #[error("dimension mismatch: model has {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty feature matrix")]
    EmptyMatrix,
    #[error("training data contains non-finite values")]
    NonFiniteData,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub num_components: usize,
    pub max_iterations: usize,
    /// Stop when the mean per-frame log-likelihood improves by less than this.
    pub log_likelihood_tolerance: f64,
    /// Variance floor as a fraction of each dimension's data variance.
    pub variance_floor: f64,
    pub kmeans_iterations: usize,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            num_components: 64,
            max_iterations: 200,
            log_likelihood_tolerance: 1e-6,
            variance_floor: 1e-4,
            kmeans_iterations: 50,
            rng_seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn with_components(mut self, m: usize) -> Self {
        self.num_components = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    fn validate(&self) -> Result<(), GmmError> {
        if self.num_components == 0 {
            return Err(GmmError::InvalidConfig(
                "num_components must be >= 1".into(),
            ));
        }
        if !(self.log_likelihood_tolerance > 0.0) {
            return Err(GmmError::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(GmmError::InvalidConfig(
                "variance_floor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Record of an EM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStats {
    pub iterations: usize,
    pub converged: bool,
    /// Mean per-frame log-likelihood after the last update.
    pub final_log_likelihood: f64,
    /// Mean per-frame log-likelihood before each update, plus the final value.
    pub log_likelihood_history: Vec<f64>,
    pub reinitialized_components: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel<T> {
    weights: Vec<T>,
    means: Vec<T>,
    variances: Vec<T>,
    dim: usize,
    pub species_code: String,
    pub feature_spec_fingerprint: String,
    pub training_seconds: f64,
    pub stats: Option<TrainingStats>,
    // ln p_i - D/2 ln 2π - 1/2 Σ_d ln σ²_id
    log_norm: Vec<T>,
    inv_var: Vec<T>,
}

impl<T: Real> GmmModel<T> {
    /// `means` and `variances` are `M × D` row-major.
    pub fn new(
        weights: Vec<T>,
        means: Vec<T>,
        variances: Vec<T>,
        dim: usize,
    ) -> Result<Self, GmmError> {
        let m = weights.len();
        if m == 0 || dim == 0 {
            return Err(GmmError::InvalidModel("need M >= 1 and D >= 1".into()));
        }
        if means.len() != m * dim || variances.len() != m * dim {
            return Err(GmmError::InvalidModel(format!(
                "expected {m}×{dim} means/variances, got {} and {}",
                means.len(),
                variances.len()
            )));
        }
        if weights.iter().any(|w| !(w.as_f64() >= 0.0)) {
            return Err(GmmError::InvalidModel("negative or NaN weight".into()));
        }
        let sum: f64 = weights.iter().map(|w| w.as_f64()).sum();
        let tol = (64.0 * T::epsilon().as_f64() * m as f64).max(1e-9);
        if (sum - 1.0).abs() > tol {
            return Err(GmmError::InvalidModel(format!("weights sum to {sum}")));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::InvalidModel("non-finite mean".into()));
        }
        if variances
            .iter()
            .any(|v| !(v.is_finite() && v.as_f64() > 0.0))
        {
            return Err(GmmError::InvalidModel("variances must be positive".into()));
        }
        let mut model = Self {
            weights,
            means,
            variances,
            dim,
            species_code: String::new(),
            feature_spec_fingerprint: String::new(),
            training_seconds: 0.0,
            stats: None,
            log_norm: Vec::new(),
            inv_var: Vec::new(),
        };
        model.refresh_cache();
        Ok(model)
    }

    fn refresh_cache(&mut self) {
        let half_log_2pi = T::of(0.5 * (2.0 * std::f64::consts::PI).ln());
        let d = T::of(self.dim as f64);
        let half = T::of(0.5);
        self.inv_var = self.variances.iter().map(|&v| v.recip()).collect();
        self.log_norm = self
            .weights
            .iter()
            .zip(self.variances.chunks_exact(self.dim))
            .map(|(&w, var)| {
                let log_det: T = var.iter().map(|v| v.ln()).sum();
                w.ln() - d * half_log_2pi - half * log_det
            })
            .collect();
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn mean(&self, i: usize) -> &[T] {
        &self.means[i * self.dim..(i + 1) * self.dim]
    }

    pub fn variance(&self, i: usize) -> &[T] {
        &self.variances[i * self.dim..(i + 1) * self.dim]
    }

    /// `ln p_i + ln N(x; μ_i, Σ_i)` for every component.
    fn component_log_terms(&self, frame: &[T], out: &mut [T]) {
        let half = T::of(0.5);
        for (i, o) in out.iter_mut().enumerate() {
            let mu = &self.means[i * self.dim..(i + 1) * self.dim];
            let iv = &self.inv_var[i * self.dim..(i + 1) * self.dim];
            let mut q = T::zero();
            for ((&x, &m), &w) in frame.iter().zip(mu).zip(iv) {
                let diff = x - m;
                q = q + diff * diff * w;
            }
            *o = self.log_norm[i] - half * q;
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), GmmError> {
        if got != self.dim {
            return Err(GmmError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// `ln p(x | λ)`.
    pub fn log_density(&self, frame: &[T]) -> Result<T, GmmError> {
        self.check_dim(frame.len())?;
        let mut terms = vec![T::zero(); self.num_components()];
        self.component_log_terms(frame, &mut terms);
        Ok(log_sum_exp(&terms))
    }

    /// Mean per-frame log-likelihood `(1/T) Σ_t ln p(x_t | λ)`.
    pub fn avg_log_likelihood(&self, features: &FeatureMatrix<T>) -> Result<T, GmmError> {
        if features.rows() == 0 {
            return Err(GmmError::EmptyMatrix);
        }
        self.check_dim(features.cols())?;
        let mut terms = vec![T::zero(); self.num_components()];
        let mut total = T::zero();
        for row in features.iter_rows() {
            self.component_log_terms(row, &mut terms);
            total = total + log_sum_exp(&terms);
        }
        Ok(total / T::of(features.rows() as f64))
    }
}

pub fn log_density<T: Real>(model: &GmmModel<T>, frame: &[T]) -> Result<T, GmmError> {
    model.log_density(frame)
}

pub fn avg_log_likelihood<T: Real>(
    model: &GmmModel<T>,
    features: &FeatureMatrix<T>,
) -> Result<T, GmmError> {
    model.avg_log_likelihood(features)
}

fn check_data<T: Real>(data: &FeatureMatrix<T>, m: usize) -> Result<(), GmmError> {
    if data.rows() == 0 || data.cols() == 0 {
        return Err(GmmError::EmptyMatrix);
    }
    if data.rows() < m {
        return Err(GmmError::TooFewFrames {
            frames: data.rows(),
            components: m,
        });
    }
    if !data.is_finite() {
        return Err(GmmError::NonFiniteData);
    }
    Ok(())
}

/// Biased per-column variance.
fn column_variances<T: Real>(data: &FeatureMatrix<T>) -> Vec<T> {
    let d = data.cols();
    let n = T::of(data.rows() as f64);
    let mut mean = vec![T::zero(); d];
    for row in data.iter_rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m = *m + x;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / n);
    let mut var = vec![T::zero(); d];
    for row in data.iter_rows() {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
            *v = *v + (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v = *v / n);
    var
}

/// Relative floor; a constant dimension gets the bare fraction as an
/// absolute floor.
fn variance_floors<T: Real>(data_var: &[T], fraction: f64) -> Vec<T> {
    let f = T::of(fraction);
    data_var
        .iter()
        .map(|&v| if v > T::zero() { v * f } else { f })
        .collect()
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Real>(row: &[T], centres: &[T], dim: usize) -> usize {
    let mut best = (0, T::infinity());
    for (c, centre) in centres.chunks_exact(dim).enumerate() {
        let d = sq_dist(row, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// k-means++ seeding followed by Lloyd refinement (at most `max_iter` passes).
pub fn kmeans<T: Real>(
    data: &FeatureMatrix<T>,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<T>, GmmError> {
    check_data(data, k)?;
    let (n, d) = (data.rows(), data.cols());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres: Vec<T> = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centres.extend_from_slice(data.row(first));
    let mut d2: Vec<f64> = data
        .iter_rows()
        .map(|r| sq_dist(r, data.row(first)).as_f64())
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                if acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave target just above the final sum
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap_or(0))
        } else {
            rng.random_range(0..n)
        };
        let centre = data.row(pick).to_vec();
        for (w, r) in d2.iter_mut().zip(data.iter_rows()) {
            *w = w.min(sq_dist(r, &centre).as_f64());
        }
        centres.extend_from_slice(&centre);
    }

    let mut assign: Vec<usize> = data.iter_rows().map(|r| nearest(r, &centres, d)).collect();
    for _ in 0..max_iter {
        let mut sums = vec![T::zero(); k * d];
        let mut counts = vec![0usize; k];
        for (row, &a) in data.iter_rows().zip(&assign) {
            counts[a] += 1;
            for (s, &x) in sums[a * d..(a + 1) * d].iter_mut().zip(row) {
                *s = *s + x;
            }
        }
        for c in 0..k {
            // an empty cluster keeps its previous centre
            if counts[c] > 0 {
                let cnt = T::of(counts[c] as f64);
                for j in 0..d {
                    centres[c * d + j] = sums[c * d + j] / cnt;
                }
            }
        }
        let next: Vec<usize> = data.iter_rows().map(|r| nearest(r, &centres, d)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(centres)
}

/// Initial model: k-means++/k-means means, full-data diagonal variance for
/// every component, uniform weights.
pub fn kmeans_pp_init<T: Real>(
    data: &FeatureMatrix<T>,
    m: usize,
    seed: u64,
) -> Result<GmmModel<T>, GmmError> {
    init_with(data, m, seed, &TrainingConfig::default())
}

fn init_with<T: Real>(
    data: &FeatureMatrix<T>,
    m: usize,
    seed: u64,
    cfg: &TrainingConfig,
) -> Result<GmmModel<T>, GmmError> {
    if m == 0 {
        return Err(GmmError::InvalidConfig(
            "num_components must be >= 1".into(),
        ));
    }
    let means = kmeans(data, m, seed, cfg.kmeans_iterations)?;
    let var = column_variances(data);
    let floors = variance_floors(&var, cfg.variance_floor);
    let comp_var: Vec<T> = var.iter().zip(&floors).map(|(&v, &f)| v.max(f)).collect();
    let variances = comp_var
        .iter()
        .copied()
        .cycle()
        .take(m * data.cols())
        .collect();
    let weights = vec![T::one() / T::of(m as f64); m];
    GmmModel::new(weights, means, variances, data.cols())
}

/// Maximum-likelihood fit by EM.
pub fn em_fit<T: Real>(
    data: &FeatureMatrix<T>,
    cfg: &TrainingConfig,
) -> Result<GmmModel<T>, GmmError> {
    cfg.validate()?;
    let m = cfg.num_components;
    check_data(data, m)?;
    let n = data.rows();
    let data_var = column_variances(data);
    let floors = variance_floors(&data_var, cfg.variance_floor);

    let mut model = init_with(data, m, cfg.rng_seed, cfg)?;
    let mut resp = vec![T::zero(); n * m];
    let mut frame_ll = vec![T::zero(); n];
    let mut history: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut reinitialized = 0;

    loop {
        let ll = e_step(&model, data, &mut resp, &mut frame_ll);
        history.push(ll);
        if let [.., prev, last] = history[..] {
            if last - prev < cfg.log_likelihood_tolerance {
                converged = true;
                break;
            }
        }
        if iterations == cfg.max_iterations {
            break;
        }
        reinitialized += m_step(&mut model, data, &resp, &frame_ll, &floors, &data_var);
        iterations += 1;
    }

    model.stats = Some(TrainingStats {
        iterations,
        converged,
        final_log_likelihood: *history.last().unwrap_or(&f64::NAN),
        log_likelihood_history: history,
        reinitialized_components: reinitialized,
        frames: n,
    });
    Ok(model)
}

/// Fills responsibilities and per-frame log-likelihoods; returns the mean
/// per-frame log-likelihood.
fn e_step<T: Real>(
    model: &GmmModel<T>,
    data: &FeatureMatrix<T>,
    resp: &mut [T],
    frame_ll: &mut [T],
) -> f64 {
    let m = model.num_components();
    let mut total = 0.0;
    for ((row, r), fl) in data
        .iter_rows()
        .zip(resp.chunks_exact_mut(m))
        .zip(frame_ll.iter_mut())
    {
        model.component_log_terms(row, r);
        let lse = log_sum_exp(r);
        for v in r.iter_mut() {
            *v = (*v - lse).exp();
        }
        *fl = lse;
        total += lse.as_f64();
    }
    total / data.rows() as f64
}

/// Returns how many components had to be re-seeded.
fn m_step<T: Real>(
    model: &mut GmmModel<T>,
    data: &FeatureMatrix<T>,
    resp: &[T],
    frame_ll: &[T],
    floors: &[T],
    data_var: &[T],
) -> usize {
    let (m, d) = (model.num_components(), model.dim);
    let mut mass = vec![T::zero(); m];
    let mut sums = vec![T::zero(); m * d];
    for (row, r) in data.iter_rows().zip(resp.chunks_exact(m)) {
        for i in 0..m {
            let g = r[i];
            mass[i] = mass[i] + g;
            for (s, &x) in sums[i * d..(i + 1) * d].iter_mut().zip(row) {
                *s = *s + g * x;
            }
        }
    }

    let degenerate: Vec<usize> = (0..m)
        .filter(|&i| !(mass[i] > T::min_positive_value()))
        .collect();
    let mut reseed_frames: Vec<usize> = Vec::new();
    if !degenerate.is_empty() {
        let mut order: Vec<usize> = (0..data.rows()).collect();
        order.sort_by(|&a, &b| {
            frame_ll[a]
                .partial_cmp(&frame_ll[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        reseed_frames = order.into_iter().take(degenerate.len()).collect();
    }

    let mut means = vec![T::zero(); m * d];
    for i in 0..m {
        if mass[i] > T::min_positive_value() {
            for j in 0..d {
                means[i * d + j] = sums[i * d + j] / mass[i];
            }
        }
    }
    let mut vars = vec![T::zero(); m * d];
    for (row, r) in data.iter_rows().zip(resp.chunks_exact(m)) {
        for i in 0..m {
            let g = r[i];
            for j in 0..d {
                let diff = row[j] - means[i * d + j];
                vars[i * d + j] = vars[i * d + j] + g * diff * diff;
            }
        }
    }
    let n = T::of(data.rows() as f64);
    let mut weights = vec![T::zero(); m];
    for i in 0..m {
        if mass[i] > T::min_positive_value() {
            weights[i] = mass[i] / n;
            for j in 0..d {
                vars[i * d + j] = (vars[i * d + j] / mass[i]).max(floors[j]);
            }
        }
    }
    for (&i, &frame) in degenerate.iter().zip(&reseed_frames) {
        warn!("GMM component {i} lost all responsibility; re-seeding at frame {frame}");
        means[i * d..(i + 1) * d].copy_from_slice(data.row(frame));
        for j in 0..d {
            vars[i * d + j] = data_var[j].max(floors[j]);
        }
        weights[i] = T::one() / n;
    }
    let total: T = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w = *w / total);

    model.weights = weights;
    model.means = means;
    model.variances = vars;
    model.refresh_cache();
    degenerate.len()
}
