//! Skip-gram with negative sampling over hash-tag sentences, plus the
//! similarity and neighbor queries answered from the learned space.
//!
//! Training follows the classic word2vec recipe: input vectors start
//! uniform in `(-0.5/dim, 0.5/dim)`, context vectors start at zero, each
//! center token uses a window radius drawn uniformly from `1..=window`, and
//! negatives are drawn from the unigram distribution raised to 0.75. The
//! learning rate decays linearly from `initial_lr` to [`MIN_LR`] over the
//! planned number of tokens.
//!
//! Parameters live in relaxed atomics so that the optional multi-worker
//! mode can update them without locks. With `threads == 1` every update
//! happens in a fixed order and the result is bit-reproducible.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::io::write_atomic;
use crate::linalg::{cosine, l2_distance, Matrix};

pub const MIN_LR: f64 = 1e-4;
const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Error)]
pub enum T2VError {
    #[error("no trainable sentences")]
    NoTrainableSentences,
    #[error("vocabulary too small for negative sampling")]
    VocabularyTooSmall,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown stem: {0}")]
    UnknownStem(String),
    #[error("query vector has {found} dimensions, model has {expected}")]
    QueryDimension { expected: usize, found: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: dimension mismatch, expected {expected} values, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("truncated payload: header declares {expected} words, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    MalformedRow { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct T2VConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    /// Frequent-token subsampling threshold; 0 disables.
    pub subsample_t: f64,
    pub seed: u64,
    /// Worker count. Only `1` is bit-reproducible.
    pub threads: usize,
}

impl Default for T2VConfig {
    fn default() -> Self {
        T2VConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 15,
            initial_lr: 0.025,
            subsample_t: 1e-4,
            seed: 1,
            threads: 1,
        }
    }
}

impl T2VConfig {
    pub fn validate(&self) -> Result<(), T2VError> {
        let bad = |m: &str| Err(T2VError::InvalidConfig(m.to_string()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("initial_lr must be positive");
        }
        if !(self.subsample_t >= 0.0 && self.subsample_t.is_finite()) {
            return bad("subsample_t must be non-negative");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }
}

/// The learned tag space. Rows of `input` are the published embedding;
/// `context` holds the training-side output vectors when available.
#[derive(Debug, Clone, PartialEq)]
pub struct TagVectors {
    stems: Vec<String>,
    index: HashMap<String, usize>,
    input: Matrix,
    context: Option<Matrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2,
    Cosine,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(Metric::L2),
            "cosine" => Ok(Metric::Cosine),
            other => Err(format!("unknown metric '{other}' (expected l2 or cosine)")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Stem(&'a str),
    Vector(&'a [f64]),
}

impl TagVectors {
    /// Panics if `stems.len() != input.rows()` or stems repeat.
    pub fn new(stems: Vec<String>, input: Matrix) -> Self {
        assert_eq!(stems.len(), input.rows(), "one row per stem");
        let index: HashMap<String, usize> =
            stems.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        assert_eq!(index.len(), stems.len(), "stems must be unique");
        TagVectors { stems, index, input, context: None }
    }

    pub fn len(&self) -> usize {
        self.stems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stems.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.input.cols()
    }

    pub fn stems(&self) -> &[String] {
        &self.stems
    }

    pub fn index_of(&self, stem: &str) -> Option<usize> {
        self.index.get(stem).copied()
    }

    pub fn vector(&self, stem: &str) -> Option<&[f64]> {
        self.index_of(stem).map(|i| self.input.row(i))
    }

    pub fn input_vectors(&self) -> &Matrix {
        &self.input
    }

    pub fn context_vectors(&self) -> Option<&Matrix> {
        self.context.as_ref()
    }

    fn lookup(&self, stem: &str) -> Result<&[f64], T2VError> {
        self.vector(stem).ok_or_else(|| T2VError::UnknownStem(stem.to_string()))
    }

    /// Cosine similarity of two stems' input vectors.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, T2VError> {
        Ok(cosine(self.lookup(a)?, self.lookup(b)?))
    }

    /// Exhaustive neighbor scan. L2 results ascend by distance, cosine
    /// results descend by similarity; equal scores order by stem.
    pub fn nearest_tags(
        &self,
        query: Query<'_>,
        k: usize,
        metric: Metric,
        exclude: &BTreeSet<String>,
    ) -> Result<Vec<(String, f64)>, T2VError> {
        if k == 0 {
            return Err(T2VError::InvalidConfig("k must be at least 1".into()));
        }
        let q = match query {
            Query::Stem(s) => self.lookup(s)?,
            Query::Vector(v) => {
                if v.len() != self.dim() {
                    return Err(T2VError::QueryDimension { expected: self.dim(), found: v.len() });
                }
                v
            }
        };
        let mut scored: Vec<(&str, f64)> = self
            .stems
            .iter()
            .enumerate()
            .filter(|(_, s)| !exclude.contains(s.as_str()))
            .map(|(i, s)| {
                let row = self.input.row(i);
                let score = match metric {
                    Metric::L2 => l2_distance(q, row),
                    Metric::Cosine => cosine(q, row),
                };
                (s.as_str(), score)
            })
            .collect();
        match metric {
            Metric::L2 => scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0))),
            Metric::Cosine => scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))),
        }
        scored.truncate(k);
        Ok(scored.into_iter().map(|(s, d)| (s.to_string(), d)).collect())
    }

    /// Text header `T2V <words> <dim>`, then one line per stem with each
    /// value as the hex of its little-endian IEEE-754 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.len() * (self.dim() * 17 + 16));
        // writing into a Vec cannot fail
        writeln!(out, "T2V {} {}", self.len(), self.dim()).unwrap();
        for (i, stem) in self.stems.iter().enumerate() {
            out.extend_from_slice(stem.as_bytes());
            for v in self.input.row(i) {
                out.push(b' ');
                out.extend_from_slice(hex::encode(v.to_le_bytes()).as_bytes());
            }
            out.push(b'\n');
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, T2VError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|_| T2VError::MalformedHeader("file is not UTF-8".into()))?;
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| T2VError::MalformedHeader("missing header line".into()))?;
        let fields: Vec<&str> = header.split(' ').collect();
        if fields.len() != 3 || fields[0] != "T2V" {
            return Err(T2VError::MalformedHeader(format!("expected 'T2V <words> <dim>', got '{header}'")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| T2VError::MalformedHeader(format!("bad count '{s}'")))
        };
        let (words, dim) = (parse(fields[1])?, parse(fields[2])?);

        // every complete row ends in '\n'; a trailing fragment counts as missing
        let complete = match body.rfind('\n') {
            Some(pos) => &body[..pos + 1],
            None => "",
        };
        let rows: Vec<&str> = complete.lines().collect();
        if rows.len() < words {
            return Err(T2VError::TruncatedPayload { expected: words, found: rows.len() });
        }
        let trailing = &body[complete.len()..];
        if rows.len() > words || !trailing.is_empty() {
            return Err(T2VError::MalformedRow {
                line: words + 2,
                msg: "data after the declared word count".into(),
            });
        }

        let mut stems = Vec::with_capacity(words);
        let mut data = Vec::with_capacity(words * dim);
        let mut seen = BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            let line = i + 2;
            let mut toks = row.split(' ');
            let stem = toks.next().unwrap_or_default();
            if stem.is_empty() {
                return Err(T2VError::MalformedRow { line, msg: "empty stem".into() });
            }
            if !seen.insert(stem) {
                return Err(T2VError::MalformedRow { line, msg: format!("duplicate stem '{stem}'") });
            }
            let vals: Vec<&str> = toks.collect();
            if vals.len() != dim {
                return Err(T2VError::DimensionMismatch { line, expected: dim, found: vals.len() });
            }
            for tok in vals {
                let mut buf = [0u8; 8];
                hex::decode_to_slice(tok, &mut buf)
                    .map_err(|_| T2VError::MalformedRow { line, msg: format!("bad value '{tok}'") })?;
                data.push(f64::from_le_bytes(buf));
            }
            stems.push(stem.to_string());
        }
        Ok(TagVectors::new(stems, Matrix::from_vec(words, dim, data)))
    }

    pub fn save(&self, path: &Path) -> Result<(), T2VError> {
        write_atomic(path, &self.to_bytes())
            .map_err(|source| T2VError::Io { path: path.to_path_buf(), source })
    }

    pub fn load(path: &Path) -> Result<Self, T2VError> {
        let bytes = fs::read(path).map_err(|source| T2VError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes)
    }
}

/// Draws negatives from count^0.75 by inverse-CDF lookup.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(vocab: &Vocabulary) -> Self {
        Self::from_counts(vocab.entries().iter().map(|e| e.count))
    }

    pub fn from_counts<I: IntoIterator<Item = u64>>(counts: I) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .into_iter()
            .map(|c| {
                acc += (c as f64).powf(UNIGRAM_POWER);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    /// Probability of drawing index `i`.
    pub fn probability(&self, i: usize) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        let prev = if i == 0 { 0.0 } else { self.cumulative[i - 1] };
        (self.cumulative[i] - prev) / total
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("non-empty sampler");
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainStats {
    /// Mean SGNS loss per (center, context) pair, one entry per epoch.
    pub epoch_loss: Vec<f64>,
    pub epoch_pairs: Vec<u64>,
}

struct SharedMatrix {
    cols: usize,
    data: Vec<AtomicU64>,
}

impl SharedMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        SharedMatrix {
            cols: m.cols(),
            data: m.as_slice().iter().map(|v| AtomicU64::new(v.to_bits())).collect(),
        }
    }

    #[inline]
    fn get(&self, row: usize, j: usize) -> f64 {
        f64::from_bits(self.data[row * self.cols + j].load(Ordering::Relaxed))
    }

    #[inline]
    fn add(&self, row: usize, j: usize, delta: f64) {
        let cell = &self.data[row * self.cols + j];
        let v = f64::from_bits(cell.load(Ordering::Relaxed)) + delta;
        cell.store(v.to_bits(), Ordering::Relaxed);
    }

    fn into_matrix(self, rows: usize) -> Matrix {
        let data = self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        Matrix::from_vec(rows, self.cols, data)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct TrainContext<'a> {
    cfg: &'a T2VConfig,
    input: SharedMatrix,
    context: SharedMatrix,
    sampler: NegativeSampler,
    keep_prob: Vec<f64>,
    planned_tokens: f64,
    processed: AtomicU64,
}

impl TrainContext<'_> {
    fn lr(&self) -> f64 {
        let done = self.processed.load(Ordering::Relaxed) as f64 / self.planned_tokens;
        let lr = self.cfg.initial_lr - (self.cfg.initial_lr - MIN_LR) * done;
        lr.max(MIN_LR)
    }

    /// One (center, context) update; returns the pair loss.
    fn train_pair(&self, center: usize, target: usize, lr: f64, rng: &mut ChaCha8Rng, grad: &mut [f64]) -> f64 {
        let dim = self.cfg.dim;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for n in 0..=self.cfg.negatives {
            let (word, label) = if n == 0 {
                (target, 1.0)
            } else {
                let w = self.sampler.sample(rng);
                if w == target {
                    continue;
                }
                (w, 0.0)
            };
            let mut f = 0.0;
            for j in 0..dim {
                f += self.input.get(center, j) * self.context.get(word, j);
            }
            loss -= if label == 1.0 { log_sigmoid(f) } else { log_sigmoid(-f) };
            let g = (label - sigmoid(f)) * lr;
            for (j, gj) in grad.iter_mut().enumerate() {
                *gj += g * self.context.get(word, j);
                self.context.add(word, j, g * self.input.get(center, j));
            }
        }
        for (j, gj) in grad.iter().enumerate() {
            self.input.add(center, j, *gj);
        }
        loss
    }

    fn train_sentence(&self, tokens: &[usize], rng: &mut ChaCha8Rng, grad: &mut [f64]) -> (f64, u64) {
        let kept: Vec<usize> = if self.cfg.subsample_t > 0.0 {
            tokens.iter().copied().filter(|&w| rng.gen::<f64>() < self.keep_prob[w]).collect()
        } else {
            tokens.to_vec()
        };
        let lr = self.lr();
        let (mut loss, mut pairs) = (0.0, 0u64);
        for (pos, &center) in kept.iter().enumerate() {
            let radius = rng.gen_range(1..=self.cfg.window);
            let lo = pos.saturating_sub(radius);
            let hi = (pos + radius).min(kept.len() - 1);
            for (ctx_pos, &ctx) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                if ctx_pos == pos {
                    continue;
                }
                loss += self.train_pair(center, ctx, lr, rng, grad);
                pairs += 1;
            }
        }
        self.processed.fetch_add(tokens.len() as u64, Ordering::Relaxed);
        (loss, pairs)
    }
}

/// Trains the tag space on the corpus's trainable sentences.
pub fn train_tag2vec(corpus: &Corpus, cfg: &T2VConfig) -> Result<(TagVectors, TrainStats), T2VError> {
    cfg.validate()?;
    let vocab = &corpus.vocab;
    if vocab.len() < 2 {
        return Err(T2VError::VocabularyTooSmall);
    }
    let sentences: Vec<Vec<usize>> = corpus
        .trainable_sentences()
        .map(|s| s.stems.iter().filter_map(|st| vocab.index_of(st)).collect())
        .collect();
    if sentences.is_empty() {
        return Err(T2VError::NoTrainableSentences);
    }

    let (v, dim) = (vocab.len(), cfg.dim);
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = Matrix::zeros(v, dim);
    for x in input.as_mut_slice() {
        *x = (init_rng.gen::<f64>() - 0.5) / dim as f64;
    }

    let total = vocab.total_count() as f64;
    let keep_prob = vocab
        .entries()
        .iter()
        .map(|e| {
            if cfg.subsample_t <= 0.0 {
                return 1.0;
            }
            let f = e.count as f64;
            let tn = cfg.subsample_t * total;
            (((f / tn).sqrt() + 1.0) * tn / f).min(1.0)
        })
        .collect();

    let tokens_per_epoch: usize = sentences.iter().map(Vec::len).sum();
    let ctx = TrainContext {
        cfg,
        input: SharedMatrix::from_matrix(&input),
        context: SharedMatrix::from_matrix(&Matrix::zeros(v, dim)),
        sampler: NegativeSampler::new(vocab),
        keep_prob,
        planned_tokens: (tokens_per_epoch * cfg.epochs) as f64,
        processed: AtomicU64::new(0),
    };

    let workers = cfg.threads.min(sentences.len());
    let chunk = sentences.len().div_ceil(workers);
    let mut rngs: Vec<ChaCha8Rng> = (0..workers)
        .map(|w| ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1 + w as u64)))
        .collect();
    let mut stats = TrainStats::default();

    for _epoch in 0..cfg.epochs {
        let results: Vec<(f64, u64)> = if workers == 1 {
            let mut grad = vec![0.0; dim];
            let rng = &mut rngs[0];
            let mut acc = (0.0, 0);
            for s in &sentences {
                let (l, p) = ctx.train_sentence(s, rng, &mut grad);
                acc.0 += l;
                acc.1 += p;
            }
            vec![acc]
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = sentences
                    .chunks(chunk)
                    .zip(rngs.iter_mut())
                    .map(|(part, rng)| {
                        let ctx = &ctx;
                        scope.spawn(move || {
                            let mut grad = vec![0.0; dim];
                            let mut acc = (0.0, 0);
                            for s in part {
                                let (l, p) = ctx.train_sentence(s, rng, &mut grad);
                                acc.0 += l;
                                acc.1 += p;
                            }
                            acc
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
            })
        };
        let loss: f64 = results.iter().map(|r| r.0).sum();
        let pairs: u64 = results.iter().map(|r| r.1).sum();
        stats.epoch_loss.push(if pairs > 0 { loss / pairs as f64 } else { 0.0 });
        stats.epoch_pairs.push(pairs);
    }

    let stems = vocab.stems().map(str::to_string).collect();
    let mut tv = TagVectors::new(stems, ctx.input.into_matrix(v));
    tv.context = Some(ctx.context.into_matrix(v));
    if !tv.input.all_finite() {
        return Err(T2VError::InvalidConfig("training diverged to non-finite vectors".into()));
    }
    Ok((tv, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_corpus, TagRecord};

    fn line_space() -> TagVectors {
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        TagVectors::new(vec!["origin".into(), "one".into(), "three".into()], m)
    }

    #[test]
    fn nearest_on_a_line() {
        let tv = line_space();
        let got = tv.nearest_tags(Query::Vector(&[0.9, 0.0]), 2, Metric::L2, &BTreeSet::new()).unwrap();
        assert_eq!(got[0].0, "one");
        assert!((got[0].1 - 0.1).abs() < 1e-12);
        assert_eq!(got[1].0, "origin");
        assert!((got[1].1 - 0.9).abs() < 1e-12);
    }

    #[test]
    fn self_query_is_first_at_zero() {
        let tv = line_space();
        let got = tv.nearest_tags(Query::Stem("three"), 1, Metric::L2, &BTreeSet::new()).unwrap();
        assert_eq!(got, vec![("three".to_string(), 0.0)]);
    }

    #[test]
    fn exclude_and_saturation() {
        let tv = line_space();
        let ex: BTreeSet<String> = ["one".to_string()].into();
        let got = tv.nearest_tags(Query::Vector(&[0.9, 0.0]), 10, Metric::L2, &ex).unwrap();
        let names: Vec<&str> = got.iter().map(|g| g.0.as_str()).collect();
        assert_eq!(names, vec!["origin", "three"]);
    }

    #[test]
    fn unknown_stem_is_named() {
        let tv = line_space();
        let err = tv.similarity("one", "nope").unwrap_err();
        assert_eq!(err.to_string(), "unknown stem: nope");
        assert!(tv.nearest_tags(Query::Stem("nope"), 1, Metric::L2, &BTreeSet::new()).is_err());
    }

    #[test]
    fn ties_break_by_stem() {
        let m = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0]]).unwrap();
        let tv = TagVectors::new(vec!["c".into(), "b".into(), "a".into()], m);
        let got = tv.nearest_tags(Query::Vector(&[0.0]), 3, Metric::L2, &BTreeSet::new()).unwrap();
        let names: Vec<&str> = got.iter().map(|g| g.0.as_str()).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }

    #[test]
    fn single_repeated_stem_is_too_small() {
        let recs = vec![TagRecord { video_id: "v".into(), raw_tags: vec!["lol".into(), "lol".into()] }];
        let (c, _) = build_corpus(recs, 1).unwrap();
        let err = train_tag2vec(&c, &T2VConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "vocabulary too small for negative sampling");
    }

    #[test]
    fn no_trainable_sentences() {
        let recs = vec![
            TagRecord { video_id: "a".into(), raw_tags: vec!["lol".into()] },
            TagRecord { video_id: "b".into(), raw_tags: vec!["cat".into()] },
        ];
        let (c, _) = build_corpus(recs, 1).unwrap();
        let err = train_tag2vec(&c, &T2VConfig::default()).unwrap_err();
        assert_eq!(err.to_string(), "no trainable sentences");
    }

    #[test]
    fn config_validation() {
        let cfg = T2VConfig { window: 0, ..T2VConfig::default() };
        assert!(matches!(cfg.validate(), Err(T2VError::InvalidConfig(_))));
    }

    #[test]
    fn truncated_and_malformed_files() {
        let tv = line_space();
        let bytes = tv.to_bytes();
        let text = String::from_utf8(bytes).unwrap();
        let claims_more = text.replacen("T2V 3 2", "T2V 4 2", 1);
        assert!(matches!(
            TagVectors::from_bytes(claims_more.as_bytes()),
            Err(T2VError::TruncatedPayload { expected: 4, found: 3 })
        ));
        let wrong_dim = text.replacen("T2V 3 2", "T2V 3 3", 1);
        assert!(matches!(
            TagVectors::from_bytes(wrong_dim.as_bytes()),
            Err(T2VError::DimensionMismatch { line: 2, .. })
        ));
        assert!(matches!(TagVectors::from_bytes(b"W2V 3 2\n"), Err(T2VError::MalformedHeader(_))));
        let cut = &text.as_bytes()[..text.len() - 5];
        assert!(matches!(TagVectors::from_bytes(cut), Err(T2VError::TruncatedPayload { .. })));
    }

    #[test]
    fn sampler_probabilities_follow_power() {
        let s = NegativeSampler::from_counts([16u64, 1]);
        let p0 = 16f64.powf(0.75) / (16f64.powf(0.75) + 1.0);
        assert!((s.probability(0) - p0).abs() < 1e-15);
    }
}
