//! Diagonal-covariance Gaussian mixture fitted by EM.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;
use crate::linalg::{log_sum_exp, Matrix};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
/// Floor applied when a dimension of the data has zero variance.
const ABS_VARIANCE_FLOOR: f64 = 1e-12;
/// Components whose soft count falls below this are re-seeded.
const EMPTY_COMPONENT_MASS: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("fewer descriptors than components ({rows} rows, {k} components)")]
    TooFewRows { rows: usize, k: usize },
    #[error("component count must be at least 1")]
    NoComponents,
    #[error("descriptor data contains non-finite values")]
    NonFinite,
    #[error("dimension mismatch: model has {expected} dims, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmInit {
    KmeansPp,
    RandomPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub max_iters: usize,
    pub ll_rel_tol: f64,
    /// Variance floor as a fraction of each dimension's data variance.
    pub variance_floor_rel: f64,
    pub seed: u64,
    pub init: EmInit,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 100,
            ll_rel_tol: 1e-6,
            variance_floor_rel: 1e-6,
            seed: 1,
            init: EmInit::KmeansPp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub d: usize,
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EmReport {
    /// Total log-likelihood of the initial model, then after every iteration.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub reseeded_components: usize,
}

fn check_finite(data: &Matrix) -> Result<(), GmmError> {
    if data.all_finite() {
        Ok(())
    } else {
        Err(GmmError::NonFinite)
    }
}

impl GmmModel {
    pub fn validate(&self) -> Result<(), GmmError> {
        let bad = |m: String| Err(GmmError::InvalidModel(m));
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        if self.weights.len() != self.k || self.means.len() != self.k || self.variances.len() != self.k {
            return bad(format!("expected {} weights, means and variances", self.k));
        }
        if self.means.iter().chain(&self.variances).any(|r| r.len() != self.d) {
            return bad(format!("every mean and variance row must have {} entries", self.d));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("weights must be positive".into());
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("weights sum to {total}"));
        }
        if self.variances.iter().flatten().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("variances must be positive".into());
        }
        if self.means.iter().flatten().any(|v| !v.is_finite()) {
            return bad("means must be finite".into());
        }
        Ok(())
    }

    /// log π_k + log N(x; μ_k, σ²_k) for every component.
    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let (mu, var) = (&self.means[k], &self.variances[k]);
            let mut acc = 0.0;
            for j in 0..self.d {
                let diff = x[j] - mu[j];
                acc += LN_2PI + var[j].ln() + diff * diff / var[j];
            }
            *o = self.weights[k].ln() - 0.5 * acc;
        }
    }

    fn check_dim(&self, found: usize) -> Result<(), GmmError> {
        if found != self.d {
            return Err(GmmError::DimensionMismatch { expected: self.d, found });
        }
        Ok(())
    }

    /// Posterior component probabilities for one descriptor, computed in
    /// log-space.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>, GmmError> {
        self.check_dim(x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::NonFinite);
        }
        let mut logp = vec![0.0; self.k];
        self.component_log_densities(x, &mut logp);
        normalize_log_weights(&mut logp);
        Ok(logp)
    }

    /// Sum over rows of the log mixture density.
    pub fn log_likelihood(&self, data: &Matrix) -> Result<f64, GmmError> {
        self.check_dim(data.cols())?;
        check_finite(data)?;
        let mut logp = vec![0.0; self.k];
        Ok(data
            .iter_rows()
            .map(|x| {
                self.component_log_densities(x, &mut logp);
                log_sum_exp(&logp)
            })
            .sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GmmError> {
        let m: GmmModel =
            serde_json::from_str(text).map_err(|e| GmmError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), GmmError> {
        write_atomic(path, self.to_json().as_bytes())
            .map_err(|e| GmmError::File { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, GmmError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GmmError::File { path: path.to_path_buf(), msg: e.to_string() })?;
        Self::from_json(&text).map_err(|e| GmmError::File { path: path.to_path_buf(), msg: e.to_string() })
    }
}

/// Replaces log-weights by their normalized exponentials and returns the
/// log of their sum.
fn normalize_log_weights(logp: &mut [f64]) -> f64 {
    let m = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logp.iter_mut() {
        *l = (*l - m).exp();
        sum += *l;
    }
    logp.iter_mut().for_each(|l| *l /= sum);
    m + sum.ln()
}

fn column_stats(data: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (data.rows() as f64, data.cols());
    let mut mean = vec![0.0; d];
    for x in data.iter_rows() {
        for j in 0..d {
            mean[j] += x[j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for x in data.iter_rows() {
        for j in 0..d {
            let diff = x[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp_centers(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut centers = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.iter_rows().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                acc += w;
                if acc > u {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, x) in data.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &c));
        }
        centers.push(c);
    }
    centers
}

fn random_point_centers(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    rand::seq::index::sample(rng, data.rows(), k)
        .into_iter()
        .map(|i| data.row(i).to_vec())
        .collect()
}

/// E-step: fills `resp` (n×K) and returns the total log-likelihood.
fn e_step(model: &GmmModel, data: &Matrix, resp: &mut Matrix, point_ll: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for (i, x) in data.iter_rows().enumerate() {
        let row = resp.row_mut(i);
        model.component_log_densities(x, row);
        let lse = normalize_log_weights(row);
        point_ll[i] = lse;
        total += lse;
    }
    total
}

/// M-step with variance flooring. Returns the number of re-seeded components.
fn m_step(
    model: &mut GmmModel,
    data: &Matrix,
    resp: &Matrix,
    point_ll: &[f64],
    floor: &[f64],
    data_var: &[f64],
) -> usize {
    let (n, d) = (data.rows(), data.cols());
    let mut reseeded = 0;
    let mut used = Vec::new();
    for k in 0..model.k {
        let nk: f64 = (0..n).map(|i| resp.get(i, k)).sum();
        if nk < EMPTY_COMPONENT_MASS {
            // worst-explained point not already taken this step
            let pick = (0..n)
                .filter(|i| !used.contains(i))
                .min_by(|&a, &b| point_ll[a].total_cmp(&point_ll[b]))
                .unwrap_or(0);
            used.push(pick);
            model.means[k] = data.row(pick).to_vec();
            model.variances[k] = data_var.iter().zip(floor).map(|(v, f)| v.max(*f)).collect();
            model.weights[k] = 1.0 / n as f64;
            reseeded += 1;
            continue;
        }
        let mut mean = vec![0.0; d];
        for (i, x) in data.iter_rows().enumerate() {
            let r = resp.get(i, k);
            for j in 0..d {
                mean[j] += r * x[j];
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut var = vec![0.0; d];
        for (i, x) in data.iter_rows().enumerate() {
            let r = resp.get(i, k);
            for j in 0..d {
                let diff = x[j] - mean[j];
                var[j] += r * diff * diff;
            }
        }
        for j in 0..d {
            var[j] = (var[j] / nk).max(floor[j]);
        }
        model.means[k] = mean;
        model.variances[k] = var;
        model.weights[k] = nk / n as f64;
    }
    let total: f64 = model.weights.iter().sum();
    model.weights.iter_mut().for_each(|w| *w /= total);
    reseeded
}

/// Fits a K-component diagonal GMM to the rows of `data`.
///
/// Stops after `max_iters` iterations or once the relative log-likelihood
/// improvement drops below `ll_rel_tol`.
pub fn fit_gmm(data: &Matrix, k: usize, cfg: &EmConfig) -> Result<(GmmModel, EmReport), GmmError> {
    if k == 0 {
        return Err(GmmError::NoComponents);
    }
    if cfg.max_iters == 0 {
        return Err(GmmError::InvalidConfig("max_iters must be at least 1".into()));
    }
    if !(cfg.ll_rel_tol > 0.0) || !(cfg.variance_floor_rel > 0.0) {
        return Err(GmmError::InvalidConfig("tolerances must be positive".into()));
    }
    if data.rows() < k {
        return Err(GmmError::TooFewRows { rows: data.rows(), k });
    }
    check_finite(data)?;

    let (n, d) = (data.rows(), data.cols());
    let (_, data_var) = column_stats(data);
    let floor: Vec<f64> = data_var
        .iter()
        .map(|v| (v * cfg.variance_floor_rel).max(ABS_VARIANCE_FLOOR))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let means = match cfg.init {
        EmInit::KmeansPp => kmeans_pp_centers(data, k, &mut rng),
        EmInit::RandomPoints => random_point_centers(data, k, &mut rng),
    };
    let init_var: Vec<f64> = data_var.iter().zip(&floor).map(|(v, f)| v.max(*f)).collect();
    let mut model = GmmModel {
        k,
        d,
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![init_var; k],
    };

    let mut resp = Matrix::zeros(n, k);
    let mut point_ll = vec![0.0; n];
    let mut report = EmReport::default();
    let mut ll = e_step(&model, data, &mut resp, &mut point_ll);
    report.log_likelihood.push(ll);

    for _ in 0..cfg.max_iters {
        let reseeded = m_step(&mut model, data, &resp, &point_ll, &floor, &data_var);
        report.reseeded_components += reseeded;
        let new_ll = e_step(&model, data, &mut resp, &mut point_ll);
        report.log_likelihood.push(new_ll);
        report.iterations += 1;
        let improvement = new_ll - ll;
        ll = new_ll;
        if reseeded == 0 && improvement.abs() <= cfg.ll_rel_tol * ll.abs() {
            report.converged = true;
            break;
        }
    }
    Ok((model, report))
}
