//! Independent reference implementations used by the integration and
//! acceptance tests. Everything here is written directly from the textbook
//! formulas, without sharing code paths with the library.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tagforge_core::{EmbeddingNet, GmmModel, TrainPair};

pub const PORTER_REFERENCE: &str = include_str!("../data/porter_reference.tsv");

/// (word, expected stem) pairs produced by an external Porter implementation.
pub fn porter_reference() -> Vec<(&'static str, &'static str)> {
    PORTER_REFERENCE
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| l.split_once('\t').expect("tab separated"))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random diagonal GMM with weights bounded away from zero.
pub fn random_gmm(k: usize, d: usize, r: &mut ChaCha8Rng) -> GmmModel {
    let raw: Vec<f64> = (0..k).map(|_| r.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    GmmModel {
        k,
        d,
        weights: raw.iter().map(|w| w / total).collect(),
        means: (0..k).map(|_| (0..d).map(|_| r.gen_range(-2.0..2.0)).collect()).collect(),
        variances: (0..k).map(|_| (0..d).map(|_| r.gen_range(0.3..2.0)).collect()).collect(),
    }
}

pub fn random_rows(n: usize, d: usize, r: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| r.gen_range(-3.0..3.0)).collect()).collect()
}

/// π_k N(x; μ_k, σ²_k) evaluated as a plain product.
pub fn weighted_density(g: &GmmModel, k: usize, x: &[f64]) -> f64 {
    let mut p = g.weights[k];
    for j in 0..g.d {
        let v = g.variances[k][j];
        let diff = x[j] - g.means[k][j];
        p *= (-(diff * diff) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    }
    p
}

pub fn naive_responsibilities(g: &GmmModel, x: &[f64]) -> Vec<f64> {
    let dens: Vec<f64> = (0..g.k).map(|k| weighted_density(g, k, x)).collect();
    let total: f64 = dens.iter().sum();
    dens.iter().map(|p| p / total).collect()
}

pub fn naive_log_likelihood(g: &GmmModel, rows: &[Vec<f64>]) -> f64 {
    rows.iter().map(|x| (0..g.k).map(|k| weighted_density(g, k, x)).sum::<f64>().ln()).sum()
}

/// Unnormalized Fisher vector straight from the gradient formulas.
pub fn brute_fisher(g: &GmmModel, rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut mean_block = vec![0.0; g.k * g.d];
    let mut var_block = vec![0.0; g.k * g.d];
    for k in 0..g.k {
        for j in 0..g.d {
            let sigma = g.variances[k][j].sqrt();
            let mut su = 0.0;
            let mut sv = 0.0;
            for x in rows {
                let gamma = naive_responsibilities(g, x)[k];
                let z = (x[j] - g.means[k][j]) / sigma;
                su += gamma * z;
                sv += gamma * (z * z - 1.0);
            }
            mean_block[k * g.d + j] = su / (n * g.weights[k].sqrt());
            var_block[k * g.d + j] = sv / (n * (2.0 * g.weights[k]).sqrt());
        }
    }
    mean_block.extend(var_block);
    mean_block
}

/// Central-difference gradient of the training loss, flattened in the
/// order w1, b1, w2, b2.
pub fn finite_difference_grad(net: &EmbeddingNet, batch: &[TrainPair], l2_reg: f64, step: f64) -> Vec<f64> {
    let base = net.flat();
    let mut out = Vec::with_capacity(base.len());
    let mut probe = net.clone();
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + step;
        probe.set_flat(&p);
        let up = direct_loss(&probe, batch, l2_reg);
        p[i] = base[i] - step;
        probe.set_flat(&p);
        let down = direct_loss(&probe, batch, l2_reg);
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Mean over the batch of ‖W2·tanh(W1·x + b1) + b2 − t‖² plus the weight
/// penalty, computed with explicit loops.
pub fn direct_loss(net: &EmbeddingNet, batch: &[TrainPair], l2_reg: f64) -> f64 {
    let (h, d) = (net.b1.len(), net.b2.len());
    let mut total = 0.0;
    for p in batch {
        let a: Vec<f64> = (0..h)
            .map(|i| (net.b1[i] + p.fisher.iter().enumerate().map(|(j, x)| net.w1.get(i, j) * x).sum::<f64>()).tanh())
            .collect();
        for o in 0..d {
            let y = net.b2[o] + (0..h).map(|i| net.w2.get(o, i) * a[i]).sum::<f64>();
            total += (y - p.target[o]).powi(2);
        }
    }
    let reg: f64 = net.w1.as_slice().iter().chain(net.w2.as_slice()).map(|w| w * w).sum();
    total / batch.len() as f64 + l2_reg * reg
}

/// Reference ranking: score everything, sort by (distance, stem), then walk
/// the list applying exclusion and surface collapsing.
pub fn full_sort_rank(
    point: &[f64],
    stems: &[String],
    vectors: &[Vec<f64>],
    surfaces: &BTreeMap<String, String>,
    k: usize,
    exclude: &BTreeSet<String>,
    collapse: bool,
) -> Vec<(String, String, f64)> {
    let mut all: Vec<(f64, String)> = stems
        .iter()
        .zip(vectors)
        .map(|(s, v)| (point.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(), s.clone()))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (dist, stem) in all {
        if out.len() == k {
            break;
        }
        if exclude.contains(&stem) {
            continue;
        }
        let surface = surfaces.get(&stem).cloned().unwrap_or_else(|| stem.clone());
        if collapse && !seen.insert(surface.clone()) {
            continue;
        }
        out.push((stem, surface, dist));
    }
    out
}

/// Cosine similarity by its definition, for checking tag-space geometry.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    let scale = got.abs().max(want.abs());
    if scale == 0.0 {
        0.0
    } else {
        (got - want).abs() / scale
    }
}
