//! Two-layer regression network from Fisher-vector space to tag space.
//!
//! `y = W2 · tanh(W1 · x + b1) + b2`, trained with squared error against the
//! tag vector of each video's class word plus an L2 penalty on the weight
//! matrices (biases are not penalized).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::write_atomic;
use crate::linalg::{l2_distance, Matrix};

const NET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("no training pairs")]
    NoPairs,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("divergence: non-finite loss at iteration {iteration}")]
    Divergence { iteration: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no class vector for '{0}'")]
    MissingClass(String),
    #[error("{path}: {msg}")]
    File { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingNet {
    /// h×f
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// d×h
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// One training example: a video's Fisher vector and its class word vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub fisher: Vec<f64>,
    pub target: Vec<f64>,
    pub class_stem: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    FullBatchGdMomentum,
    MinibatchSgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub hidden: usize,
    pub max_iters: usize,
    pub optimizer: Optimizer,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_init_scale: f64,
    pub seed: u64,
    pub l2_reg: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            hidden: 600,
            max_iters: 1000,
            optimizer: Optimizer::FullBatchGdMomentum,
            lr: 1e-2,
            momentum: 0.9,
            batch_size: 64,
            weight_init_scale: 0.01,
            seed: 1,
            l2_reg: 1e-4,
        }
    }
}

impl NetConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        let bad = |m: &str| Err(EmbedError::InvalidConfig(m.into()));
        if self.hidden == 0 {
            return bad("hidden must be at least 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.l2_reg >= 0.0) || !(self.weight_init_scale >= 0.0) {
            return bad("l2_reg and weight_init_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainReport {
    /// Loss of each accepted parameter set, starting with the initial one.
    pub losses: Vec<f64>,
    pub iterations: usize,
    pub rejected_steps: usize,
    pub final_lr: f64,
    pub best_loss: f64,
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    version: u32,
    f: usize,
    h: usize,
    d: usize,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

impl EmbeddingNet {
    pub fn zeros(f: usize, h: usize, d: usize) -> Self {
        EmbeddingNet { w1: Matrix::zeros(h, f), b1: vec![0.0; h], w2: Matrix::zeros(d, h), b2: vec![0.0; d] }
    }

    /// Gaussian weights with the given standard deviation, zero biases.
    pub fn random(f: usize, h: usize, d: usize, scale: f64, seed: u64) -> Self {
        let mut net = Self::zeros(f, h, d);
        if scale > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, scale).expect("positive scale");
            for w in net.w1.as_mut_slice().iter_mut().chain(net.w2.as_mut_slice()) {
                *w = normal.sample(&mut rng);
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    fn check_shapes(&self) -> Result<(), EmbedError> {
        let h = self.hidden_dim();
        if self.b1.len() != h || self.w2.cols() != h || self.b2.len() != self.output_dim() {
            return Err(EmbedError::Shape("inconsistent parameter shapes".into()));
        }
        Ok(())
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden_dim())
            .map(|i| {
                let row = self.w1.row(i);
                let z: f64 = self.b1[i] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                z.tanh()
            })
            .collect()
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.output_dim())
            .map(|o| self.b2[o] + self.w2.row(o).iter().zip(hidden).map(|(w, a)| w * a).sum::<f64>())
            .collect()
    }

    /// Maps a Fisher vector into tag space.
    pub fn project(&self, fv: &[f64]) -> Result<Vec<f64>, EmbedError> {
        if fv.len() != self.input_dim() {
            return Err(EmbedError::Shape(format!(
                "input has {} values, net expects {}",
                fv.len(),
                self.input_dim()
            )));
        }
        Ok(self.output(&self.hidden(fv)))
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.w1.as_slice().iter().chain(&self.b1).chain(self.w2.as_slice()).chain(&self.b2)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .as_mut_slice()
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.as_mut_slice().iter_mut())
            .chain(self.b2.iter_mut())
    }

    /// Flattened parameters: W1, b1, W2, b2 in row-major order.
    pub fn flat(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    /// Inverse of [`flat`](Self::flat). Panics on a length mismatch.
    pub fn set_flat(&mut self, values: &[f64]) {
        let mut n = 0;
        for (p, v) in self.params_mut().zip(values) {
            *p = *v;
            n += 1;
        }
        assert_eq!(n, values.len(), "parameter count");
    }

    pub fn all_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> String {
        let file = NetFile {
            version: NET_FORMAT_VERSION,
            f: self.input_dim(),
            h: self.hidden_dim(),
            d: self.output_dim(),
            w1: self.w1.to_rows(),
            b1: self.b1.clone(),
            w2: self.w2.to_rows(),
            b2: self.b2.clone(),
        };
        serde_json::to_string(&file).expect("net serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EmbedError> {
        let file: NetFile = serde_json::from_str(text).map_err(|e| EmbedError::Shape(e.to_string()))?;
        if file.version != NET_FORMAT_VERSION {
            return Err(EmbedError::Shape(format!("unsupported net version {}", file.version)));
        }
        let w1 = if file.w1.is_empty() { Some(Matrix::zeros(0, file.f)) } else { Matrix::from_rows(&file.w1) };
        let w2 = if file.w2.is_empty() { Some(Matrix::zeros(0, file.h)) } else { Matrix::from_rows(&file.w2) };
        let (w1, w2) = match (w1, w2) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(EmbedError::Shape("ragged weight matrix".into())),
        };
        if w1.rows() != file.h || w1.cols() != file.f || w2.rows() != file.d || w2.cols() != file.h {
            return Err(EmbedError::Shape("weight shapes disagree with f, h, d".into()));
        }
        let net = EmbeddingNet { w1, b1: file.b1, w2, b2: file.b2 };
        net.check_shapes()?;
        if !net.all_finite() {
            return Err(EmbedError::Shape("non-finite parameters".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        write_atomic(path, self.to_json().as_bytes())
            .map_err(|e| EmbedError::File { path: path.to_path_buf(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let file_err = |msg: String| EmbedError::File { path: path.to_path_buf(), msg };
        let text = fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        Self::from_json(&text).map_err(|e| file_err(e.to_string()))
    }
}

/// Mean squared error over the batch plus `l2_reg·(‖W1‖² + ‖W2‖²)`, and its
/// exact gradient laid out like the network.
pub fn loss_and_grad(net: &EmbeddingNet, batch: &[TrainPair], l2_reg: f64) -> Result<(f64, EmbeddingNet), EmbedError> {
    if batch.is_empty() {
        return Err(EmbedError::NoPairs);
    }
    net.check_shapes()?;
    let (f, h, d) = (net.input_dim(), net.hidden_dim(), net.output_dim());
    for p in batch {
        if p.fisher.len() != f || p.target.len() != d {
            return Err(EmbedError::Shape(format!(
                "pair for '{}' has fisher {} / target {}, net is {f} -> {d}",
                p.class_stem,
                p.fisher.len(),
                p.target.len()
            )));
        }
    }

    let scale = 1.0 / batch.len() as f64;
    let mut grad = EmbeddingNet::zeros(f, h, d);
    let mut data_loss = 0.0;
    let mut dz = vec![0.0; h];
    for p in batch {
        let a = net.hidden(&p.fisher);
        let y = net.output(&a);
        let dy: Vec<f64> = y.iter().zip(&p.target).map(|(yo, t)| yo - t).collect();
        data_loss += dy.iter().map(|e| e * e).sum::<f64>();

        for o in 0..d {
            let g = 2.0 * scale * dy[o];
            grad.b2[o] += g;
            for (gw, ai) in grad.w2.row_mut(o).iter_mut().zip(&a) {
                *gw += g * ai;
            }
        }
        for i in 0..h {
            let back: f64 = (0..d).map(|o| net.w2.get(o, i) * dy[o]).sum();
            dz[i] = 2.0 * scale * back * (1.0 - a[i] * a[i]);
        }
        for i in 0..h {
            grad.b1[i] += dz[i];
            if dz[i] != 0.0 {
                for (gw, xj) in grad.w1.row_mut(i).iter_mut().zip(&p.fisher) {
                    *gw += dz[i] * xj;
                }
            }
        }
    }
    let loss = scale * data_loss + l2_reg * (net.w1.frobenius_sq() + net.w2.frobenius_sq());
    if l2_reg != 0.0 {
        for (g, w) in grad.w1.as_mut_slice().iter_mut().zip(net.w1.as_slice()) {
            *g += 2.0 * l2_reg * w;
        }
        for (g, w) in grad.w2.as_mut_slice().iter_mut().zip(net.w2.as_slice()) {
            *g += 2.0 * l2_reg * w;
        }
    }
    Ok((loss, grad))
}

fn check_pairs(pairs: &[TrainPair]) -> Result<(usize, usize), EmbedError> {
    let first = pairs.first().ok_or(EmbedError::NoPairs)?;
    let (f, d) = (first.fisher.len(), first.target.len());
    if let Some(p) = pairs.iter().find(|p| p.fisher.len() != f || p.target.len() != d) {
        return Err(EmbedError::Shape(format!(
            "pair for '{}' has fisher {} / target {}, expected {f} / {d}",
            p.class_stem,
            p.fisher.len(),
            p.target.len()
        )));
    }
    Ok((f, d))
}

/// Trains a network on the pairs and returns the lowest-loss parameters.
///
/// Full-batch mode takes momentum steps and, whenever a step would raise
/// the loss, rejects it, halves the learning rate and clears the momentum,
/// so accepted losses never increase. Each attempted step counts toward
/// `max_iters`.
pub fn train_embedding(pairs: &[TrainPair], cfg: &NetConfig) -> Result<(EmbeddingNet, TrainReport), EmbedError> {
    cfg.validate()?;
    let (f, d) = check_pairs(pairs)?;
    let net = EmbeddingNet::random(f, cfg.hidden, d, cfg.weight_init_scale, cfg.seed);
    match cfg.optimizer {
        Optimizer::FullBatchGdMomentum => train_full_batch(net, pairs, cfg),
        Optimizer::MinibatchSgd => train_minibatch(net, pairs, cfg),
    }
}

fn train_full_batch(mut net: EmbeddingNet, pairs: &[TrainPair], cfg: &NetConfig) -> Result<(EmbeddingNet, TrainReport), EmbedError> {
    let (mut loss, mut grad) = loss_and_grad(&net, pairs, cfg.l2_reg)?;
    if !loss.is_finite() {
        return Err(EmbedError::Divergence { iteration: 0 });
    }
    let mut params = net.flat();
    let mut velocity = vec![0.0; params.len()];
    let mut lr = cfg.lr;
    let mut report = TrainReport { losses: vec![loss], ..Default::default() };
    let mut candidate = net.clone();

    for it in 1..=cfg.max_iters {
        report.iterations = it;
        let g = grad.flat();
        let trial: Vec<f64> = params
            .iter()
            .zip(&mut velocity)
            .zip(&g)
            .map(|((p, v), gi)| {
                *v = cfg.momentum * *v - lr * gi;
                p + *v
            })
            .collect();
        candidate.set_flat(&trial);
        let (trial_loss, trial_grad) = loss_and_grad(&candidate, pairs, cfg.l2_reg)?;
        if !trial_loss.is_finite() {
            return Err(EmbedError::Divergence { iteration: it });
        }
        if trial_loss <= loss {
            params = trial;
            loss = trial_loss;
            grad = trial_grad;
            report.losses.push(loss);
        } else {
            lr *= 0.5;
            velocity.iter_mut().for_each(|v| *v = 0.0);
            report.rejected_steps += 1;
        }
    }
    net.set_flat(&params);
    report.final_lr = lr;
    report.best_loss = loss;
    Ok((net, report))
}

fn train_minibatch(mut net: EmbeddingNet, pairs: &[TrainPair], cfg: &NetConfig) -> Result<(EmbeddingNet, TrainReport), EmbedError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut velocity = vec![0.0; net.flat().len()];
    let (initial, _) = loss_and_grad(&net, pairs, cfg.l2_reg)?;
    let mut best = (initial, net.clone());
    let mut report = TrainReport { losses: vec![initial], ..Default::default() };
    let mut step = 0;
    'outer: loop {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            if step == cfg.max_iters {
                break 'outer;
            }
            step += 1;
            let batch: Vec<TrainPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            let (batch_loss, grad) = loss_and_grad(&net, &batch, cfg.l2_reg)?;
            if !batch_loss.is_finite() {
                return Err(EmbedError::Divergence { iteration: step });
            }
            let mut params = net.flat();
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(grad.flat()) {
                *v = cfg.momentum * *v - cfg.lr * g;
                *p += *v;
            }
            net.set_flat(&params);
        }
        // one full-data evaluation per pass over the pairs
        let (full, _) = loss_and_grad(&net, pairs, cfg.l2_reg)?;
        if !full.is_finite() {
            return Err(EmbedError::Divergence { iteration: step });
        }
        report.losses.push(full);
        if full < best.0 {
            best = (full, net.clone());
        }
    }
    let (full, _) = loss_and_grad(&net, pairs, cfg.l2_reg)?;
    if full.is_finite() && full < best.0 {
        best = (full, net);
    }
    report.iterations = step;
    report.final_lr = cfg.lr;
    report.best_loss = best.0;
    Ok((best.1, report))
}

/// Fraction of pairs whose projection is L2-closest to their own class
/// vector. Ties go to the lexicographically first class.
pub fn nearest_class_accuracy(
    net: &EmbeddingNet,
    pairs: &[TrainPair],
    class_vectors: &BTreeMap<String, Vec<f64>>,
) -> Result<f64, EmbedError> {
    if pairs.is_empty() {
        return Err(EmbedError::NoPairs);
    }
    if let Some(p) = pairs.iter().find(|p| !class_vectors.contains_key(&p.class_stem)) {
        return Err(EmbedError::MissingClass(p.class_stem.clone()));
    }
    let mut hits = 0usize;
    for p in pairs {
        let y = net.project(&p.fisher)?;
        let mut best: Option<(&str, f64)> = None;
        for (stem, v) in class_vectors {
            if v.len() != y.len() {
                return Err(EmbedError::Shape(format!("class vector '{stem}' has {} dims", v.len())));
            }
            let dist = l2_distance(&y, v);
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((stem, dist));
            }
        }
        if best.map(|(s, _)| s) == Some(p.class_stem.as_str()) {
            hits += 1;
        }
    }
    Ok(hits as f64 / pairs.len() as f64)
}
