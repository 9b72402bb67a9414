//! `pipeline run`: every stage in order from one TOML config, with
//! content-hash stamps so finished stages are skipped on rerun.
//!
//! A stage's stamp key hashes its name, its effective parameters and the
//! contents of its inputs. The stage is skipped when the stored key matches
//! and its outputs still hash to what the stage last wrote.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use tagforge_core::io::{derive_seed, fnv1a64, labels_to_tsv, write_atomic};
use tagforge_core::synth::{SynthDescriptorConfig, SynthTagsConfig};
use tagforge_core::{nearest_class_accuracy, EmConfig, NetConfig, Normalization, SuggestConfig, T2VConfig};
use tagforge_core::gmm::EmInit;

use crate::error::{at, data, CliError, Result};
use crate::stages;

pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub force: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusStage {
    /// Tag records; required unless `[synth_tags]` is present.
    input: Option<PathBuf>,
    #[serde(default = "default_min_count")]
    min_count: u64,
}

impl Default for CorpusStage {
    fn default() -> Self {
        CorpusStage { input: None, min_count: default_min_count() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorsStage {
    dir: PathBuf,
    labels: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SplitStage {
    test_fraction: f64,
}

impl Default for SplitStage {
    fn default() -> Self {
        SplitStage { test_fraction: 0.2 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmStage {
    k: usize,
    #[serde(default = "default_em_iters")]
    max_iters: usize,
    #[serde(default = "default_em_tol")]
    ll_rel_tol: f64,
    #[serde(default = "default_em_tol")]
    variance_floor_rel: f64,
    #[serde(default = "default_init")]
    init: EmInit,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FvStage {
    normalize: String,
}

impl Default for FvStage {
    fn default() -> Self {
        FvStage { normalize: "ssqrt_l2".into() }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct StoreStage {
    media_prefix: String,
}

impl Default for StoreStage {
    fn default() -> Self {
        StoreStage { media_prefix: "media/".into() }
    }
}

fn default_min_count() -> u64 {
    tagforge_core::corpus::DEFAULT_MIN_COUNT
}
fn default_em_iters() -> usize {
    EmConfig::default().max_iters
}
fn default_em_tol() -> f64 {
    1e-6
}
fn default_init() -> EmInit {
    EmInit::KmeansPp
}
fn default_seed() -> u64 {
    1
}
fn default_threads() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineConfig {
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_threads")]
    threads: usize,
    /// Output directory, relative to the config file.
    workdir: PathBuf,
    synth_tags: Option<SynthTagsConfig>,
    #[serde(default)]
    corpus: CorpusStage,
    #[serde(default)]
    t2v: T2VConfig,
    synth_descriptors: Option<SynthDescriptorConfig>,
    descriptors: Option<DescriptorsStage>,
    #[serde(default)]
    split: SplitStage,
    gmm: GmmStage,
    #[serde(default)]
    fv: FvStage,
    #[serde(default)]
    embed: NetConfig,
    #[serde(default)]
    suggest: SuggestConfig,
    #[serde(default)]
    store: StoreStage,
}

/// Metrics written by the evaluation stage.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub k: usize,
    pub train_videos: usize,
    pub test_videos: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub test_hits: usize,
    pub hit_rate: f64,
}

impl Summary {
    pub fn line(&self) -> String {
        format!(
            "held-out top-{} hit-rate {:.3} ({}/{}); nearest-class accuracy held-out {:.3}, train {:.3}",
            self.k, self.hit_rate, self.test_hits, self.test_videos, self.test_accuracy, self.train_accuracy
        )
    }
}

fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = fs::read_to_string(path).map_err(|e| at(path, e))?;
    let table: toml::Table = text.parse().map_err(|e| at(path, e))?;
    for (name, value) in &table {
        if let Some(stage) = value.as_table() {
            for key in ["seed", "threads"] {
                if stage.contains_key(key) {
                    return Err(at(path, format!("[{name}] may not set '{key}'; set it at the top level")));
                }
            }
        }
    }
    let cfg: PipelineConfig = toml::from_str(&text).map_err(|e| at(path, e))?;
    if cfg.synth_tags.is_some() == cfg.corpus.input.is_some() {
        return Err(at(path, "give exactly one of [synth_tags] or corpus.input"));
    }
    if cfg.synth_descriptors.is_some() == cfg.descriptors.is_some() {
        return Err(at(path, "give exactly one of [synth_descriptors] or [descriptors]"));
    }
    if !(0.0..1.0).contains(&cfg.split.test_fraction) {
        return Err(at(path, "split.test_fraction must be in [0, 1)"));
    }
    Ok(cfg)
}

fn hash_path(path: &Path, h: &mut Sha256) -> Result<()> {
    let meta = fs::metadata(path).map_err(|e| at(path, e))?;
    if meta.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| at(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| !p.extension().is_some_and(|x| x == "tmp"))
            .collect();
        entries.sort();
        h.update(b"d");
        for e in entries {
            h.update(e.file_name().unwrap_or_default().as_encoded_bytes());
            h.update([0]);
            hash_path(&e, h)?;
        }
    } else {
        let bytes = fs::read(path).map_err(|e| at(path, e))?;
        h.update(b"f");
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(())
}

fn content_hash(path: &Path) -> Result<String> {
    let mut h = Sha256::new();
    hash_path(path, &mut h)?;
    Ok(format!("{:x}", h.finalize()))
}

#[derive(Serialize, Deserialize, PartialEq)]
struct Stamp {
    key: String,
    outputs: Vec<String>,
}

struct Runner {
    stamps: PathBuf,
    force: bool,
}

impl Runner {
    fn stage<P: Serialize>(
        &self,
        name: &str,
        params: &P,
        inputs: &[&Path],
        outputs: &[&Path],
        run: impl FnOnce() -> Result<String>,
    ) -> Result<()> {
        let mut h = Sha256::new();
        h.update(name.as_bytes());
        h.update(serde_json::to_vec(params).expect("params serialize"));
        for input in inputs {
            if !input.exists() {
                return Err(at(input, format!("input of stage '{name}' not found")));
            }
            h.update(content_hash(input)?.as_bytes());
        }
        let key = format!("{:x}", h.finalize());
        let stamp_path = self.stamps.join(format!("{name}.json"));

        if !self.force && self.up_to_date(&stamp_path, &key, outputs) {
            println!("[{name}] up to date");
            return Ok(());
        }
        for out in outputs {
            let removed = if out.is_dir() { fs::remove_dir_all(out) } else if out.exists() { fs::remove_file(out) } else { Ok(()) };
            removed.map_err(|e| at(out, e))?;
        }
        let start = Instant::now();
        let note = run()?;
        let stamp = Stamp { key, outputs: outputs.iter().map(|o| content_hash(o)).collect::<Result<_>>()? };
        write_atomic(&stamp_path, serde_json::to_string(&stamp).expect("stamp serializes").as_bytes())
            .map_err(|e| at(&stamp_path, e))?;
        println!("[{name}] done in {:.2}s: {note}", start.elapsed().as_secs_f64());
        Ok(())
    }

    fn up_to_date(&self, stamp_path: &Path, key: &str, outputs: &[&Path]) -> bool {
        let Ok(text) = fs::read_to_string(stamp_path) else { return false };
        let Ok(stamp) = serde_json::from_str::<Stamp>(&text) else { return false };
        if stamp.key != key || stamp.outputs.len() != outputs.len() {
            return false;
        }
        outputs.iter().zip(&stamp.outputs).all(|(o, want)| content_hash(o).is_ok_and(|got| &got == want))
    }
}

/// Per class, orders videos by a seeded hash and holds out the first
/// `round(fraction · n)`.
fn split_labels(labels: &BTreeMap<String, String>, fraction: f64, seed: u64) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (video, class) in labels {
        by_class.entry(class).or_default().push(video);
    }
    let (mut train, mut test) = (BTreeMap::new(), BTreeMap::new());
    for (class, mut videos) in by_class {
        videos.sort_by_key(|v| (fnv1a64(format!("{seed}:{v}").as_bytes()), *v));
        let held = (fraction * videos.len() as f64).round() as usize;
        for (i, v) in videos.into_iter().enumerate() {
            let side = if i < held { &mut test } else { &mut train };
            side.insert(v.to_string(), class.to_string());
        }
    }
    (train, test)
}

fn tsv(labels: &BTreeMap<String, String>) -> String {
    labels_to_tsv(labels.iter().map(|(v, c)| (v.as_str(), c.as_str())))
}

pub fn run(config_path: &Path, ov: Overrides) -> Result<Summary> {
    let mut cfg = load_config(config_path)?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let threads = ov.threads.unwrap_or(cfg.threads);
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let base = config_path.parent().unwrap_or(Path::new("")).to_path_buf();
    let rel = |p: &Path| base.join(p);
    let work = rel(&cfg.workdir);
    fs::create_dir_all(&work).map_err(|e| at(&work, e))?;
    let runner = Runner { stamps: work.join(".stamps"), force: ov.force };

    let records = match &mut cfg.synth_tags {
        Some(st) => {
            st.seed = derive_seed(seed, "synth_tags");
            let out = work.join("records.jsonl");
            runner.stage("synth_tags", st, &[], &[&out], || {
                Ok(format!("{} records", stages::synth_tags(st, &out)?))
            })?;
            out
        }
        None => rel(cfg.corpus.input.as_deref().expect("checked in load_config")),
    };

    let corpus_dir = work.join("corpus");
    let min_count = cfg.corpus.min_count;
    runner.stage("corpus", &min_count, &[&records], &[&corpus_dir], || {
        let (c, d) = stages::corpus_build(&records, &corpus_dir, min_count)?;
        Ok(format!("{} sentences, {} stems, {} malformed records", c.sentences.len(), c.vocab.len(), d.malformed_records))
    })?;

    let t2v_path = work.join("tags.t2v");
    cfg.t2v.seed = derive_seed(seed, "t2v");
    cfg.t2v.threads = threads;
    cfg.t2v.validate().map_err(|e| at(config_path, e))?;
    runner.stage("t2v", &cfg.t2v, &[&corpus_dir], &[&t2v_path], || {
        let (tv, stats) = stages::t2v_train(&corpus_dir, &cfg.t2v, &t2v_path)?;
        Ok(format!("{} stems, final epoch loss {:.4}", tv.len(), stats.epoch_loss.last().copied().unwrap_or(f64::NAN)))
    })?;

    let (desc_dir, labels_path) = match &mut cfg.synth_descriptors {
        Some(sd) => {
            sd.seed = derive_seed(seed, "synth_descriptors");
            let (dir, labels) = (work.join("descriptors"), work.join("labels.tsv"));
            runner.stage("synth_descriptors", sd, &[], &[&dir, &labels], || {
                Ok(format!("{} videos", stages::synth_descriptors_to(sd, &dir, &labels)?))
            })?;
            (dir, labels)
        }
        None => {
            let d = cfg.descriptors.as_ref().expect("checked in load_config");
            (rel(&d.dir), rel(&d.labels))
        }
    };

    let (train_path, test_path) = (work.join("train_labels.tsv"), work.join("test_labels.tsv"));
    let split_seed = derive_seed(seed, "split");
    runner.stage("split", &(&cfg.split, split_seed), &[&labels_path], &[&train_path, &test_path], || {
        let (train, test) = split_labels(&stages::labels(&labels_path)?, cfg.split.test_fraction, split_seed);
        write_atomic(&train_path, tsv(&train).as_bytes()).map_err(|e| at(&train_path, e))?;
        write_atomic(&test_path, tsv(&test).as_bytes()).map_err(|e| at(&test_path, e))?;
        Ok(format!("{} train, {} held out", train.len(), test.len()))
    })?;

    let gmm_path = work.join("gmm.json");
    let em = EmConfig {
        max_iters: cfg.gmm.max_iters,
        ll_rel_tol: cfg.gmm.ll_rel_tol,
        variance_floor_rel: cfg.gmm.variance_floor_rel,
        seed: derive_seed(seed, "gmm"),
        init: cfg.gmm.init,
    };
    let k = cfg.gmm.k;
    runner.stage("gmm", &(&em, k), &[&desc_dir, &train_path], &[&gmm_path], || {
        let train: BTreeSet<String> = stages::labels(&train_path)?.into_keys().collect();
        let (_, report) = stages::gmm_fit(&desc_dir, Some(&train), k, &em, &gmm_path)?;
        Ok(format!("{} iterations, converged {}", report.iterations, report.converged))
    })?;

    let fv_dir = work.join("fv");
    let normalize: Normalization = cfg.fv.normalize.parse().map_err(|e: String| at(config_path, e))?;
    runner.stage("fv", &cfg.fv.normalize, &[&gmm_path, &desc_dir], &[&fv_dir], || {
        let (n, degenerate) = stages::fv_encode(&gmm_path, &desc_dir, normalize, &fv_dir)?;
        Ok(format!("{n} videos, {degenerate} degenerate"))
    })?;

    let net_path = work.join("net.json");
    cfg.embed.seed = derive_seed(seed, "embed");
    runner.stage("embed", &cfg.embed, &[&fv_dir, &train_path, &t2v_path], &[&net_path], || {
        let (o, _) = stages::embed_train(&fv_dir, &train_path, &t2v_path, &cfg.embed, &net_path)?;
        Ok(format!("{} pairs, {} iterations, loss {:.5}", o.pairs, o.iterations, o.best_loss))
    })?;

    let destem_path = corpus_dir.join("destem.tsv");
    let store_dir = work.join("store");
    let store_params = (&cfg.suggest, &cfg.store);
    runner.stage("store", &store_params, &[&net_path, &t2v_path, &destem_path, &fv_dir, &test_path], &[&store_dir], || {
        let models = stages::SuggestModels::load(&net_path, &t2v_path, &destem_path)?;
        let n = stages::store_build(&models, &fv_dir, &test_path, &cfg.suggest, &cfg.store.media_prefix, &store_dir)?;
        Ok(format!("{n} videos"))
    })?;

    let eval_dir = work.join("eval");
    let summary_path = eval_dir.join("summary.json");
    let suggestions_path = eval_dir.join("suggestions.tsv");
    runner.stage(
        "evaluate",
        &cfg.suggest,
        &[&net_path, &t2v_path, &destem_path, &fv_dir, &train_path, &test_path],
        &[&summary_path, &suggestions_path],
        || {
            let s = evaluate(&net_path, &t2v_path, &destem_path, &fv_dir, &train_path, &test_path, &cfg.suggest, &suggestions_path)?;
            let json = serde_json::to_string_pretty(&s).expect("summary serializes");
            write_atomic(&summary_path, json.as_bytes()).map_err(|e| at(&summary_path, e))?;
            Ok(format!("{} held-out videos", s.test_videos))
        },
    )?;

    let text = fs::read_to_string(&summary_path).map_err(|e| at(&summary_path, e))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| at(&summary_path, e))?;
    println!("{}", summary.line());
    Ok(summary)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    net_path: &Path,
    t2v_path: &Path,
    destem_path: &Path,
    fv_dir: &Path,
    train_path: &Path,
    test_path: &Path,
    suggest_cfg: &SuggestConfig,
    suggestions_out: &Path,
) -> Result<Summary> {
    let models = stages::SuggestModels::load(net_path, t2v_path, destem_path)?;
    let fvs = stages::load_fvs(fv_dir)?;
    let train = stages::training_pairs(&fvs, &stages::labels(train_path)?, train_path, &models.tv)?;
    let test = stages::training_pairs(&fvs, &stages::labels(test_path)?, test_path, &models.tv)?;
    let mut classes = stages::class_vectors(&train);
    classes.extend(stages::class_vectors(&test));
    let acc = |pairs: &[tagforge_core::TrainPair]| -> Result<f64> {
        if pairs.is_empty() {
            return Ok(f64::NAN);
        }
        nearest_class_accuracy(&models.net, pairs, &classes).map_err(data)
    };

    let test_labels = stages::labels(test_path)?;
    let by_id: BTreeMap<&str, _> = fvs.iter().map(|f| (f.video_id.as_str(), f)).collect();
    let mut hits = 0;
    let mut rows = String::from("video_id\tclass\trank\tsurface\tstem\tdistance\n");
    for (video, class) in &test_labels {
        let suggestions = models.suggest(by_id[video.as_str()], suggest_cfg)?;
        let want = models.dm.destem(class);
        if suggestions.iter().any(|s| s.surface == want) {
            hits += 1;
        }
        for s in &suggestions {
            rows.push_str(&format!("{video}\t{class}\t{}\t{}\t{}\t{}\n", s.rank, s.surface, s.stem, s.distance));
        }
    }
    write_atomic(suggestions_out, rows.as_bytes()).map_err(|e| at(suggestions_out, e))?;
    let n = test_labels.len();
    Ok(Summary {
        k: suggest_cfg.k,
        train_videos: train.len(),
        test_videos: n,
        train_accuracy: acc(&train)?,
        test_accuracy: acc(&test)?,
        test_hits: hits,
        hit_rate: if n == 0 { f64::NAN } else { hits as f64 / n as f64 },
    })
}
