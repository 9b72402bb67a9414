//! Stage implementations shared by the individual subcommands and
//! `pipeline run`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use tagforge_core::corpus::{read_records, BuildDiagnostics, RawTagRecord};
use tagforge_core::crossmodal::TrainReport;
use tagforge_core::descriptors::{load_descriptor_dir, pool_descriptors};
use tagforge_core::fisher::load_fisher_dir;
use tagforge_core::gmm::EmReport;
use tagforge_core::io::{labels_to_tsv, read_labels, write_atomic};
use tagforge_core::synth::{synth_descriptors, synth_tag_records, SynthDescriptorConfig, SynthTagsConfig};
use tagforge_core::tag2vec::TrainStats;
use tagforge_core::{
    build_corpus, encode_fisher, fit_gmm, nearest_class_accuracy, suggest_tags, train_embedding, train_tag2vec,
    Corpus, DestemMap, EmConfig, EmbeddingNet, FisherVector, GmmModel, NetConfig, Normalization, SuggestConfig,
    Suggestion, T2VConfig, TagVectors, TrainPair,
};
use tagforge_service::{build_store, StoreVideo};

use crate::error::{at, data, Result};

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| at(path, e))
}

pub fn labels(path: &Path) -> Result<BTreeMap<String, String>> {
    read_labels(path).map_err(data)
}

pub fn synth_tags(cfg: &SynthTagsConfig, out: &Path) -> Result<usize> {
    let records = synth_tag_records(cfg);
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::json!({ "video_id": r.video_id, "tags": r.raw_tags }).to_string());
        text.push('\n');
    }
    write(out, text.as_bytes())?;
    Ok(records.len())
}

pub fn corpus_build(input: &Path, out: &Path, min_count: u64) -> Result<(Corpus, BuildDiagnostics)> {
    let file = fs::File::open(input).map_err(|e| at(input, e))?;
    let records: Vec<RawTagRecord> = read_records(file, input).map_err(data)?;
    let (corpus, diag) = build_corpus(records, min_count).map_err(|e| at(input, e))?;
    corpus.save(out).map_err(data)?;
    Ok((corpus, diag))
}

pub fn t2v_train(corpus_dir: &Path, cfg: &T2VConfig, out: &Path) -> Result<(TagVectors, TrainStats)> {
    let corpus = Corpus::load(corpus_dir).map_err(data)?;
    let (tv, stats) = train_tag2vec(&corpus, cfg).map_err(|e| at(corpus_dir, e))?;
    tv.save(out).map_err(data)?;
    Ok((tv, stats))
}

pub fn load_t2v(path: &Path) -> Result<TagVectors> {
    TagVectors::load(path).map_err(|e| at(path, e))
}

/// Writes one `.tfds` file per video plus `labels.tsv` into `out`.
pub fn synth_descriptors_to(cfg: &SynthDescriptorConfig, out: &Path, labels_out: &Path) -> Result<usize> {
    let videos = synth_descriptors(cfg);
    fs::create_dir_all(out).map_err(|e| at(out, e))?;
    for v in &videos {
        v.descriptors.save(&out.join(format!("{}.tfds", v.descriptors.video_id))).map_err(data)?;
    }
    let tsv = labels_to_tsv(videos.iter().map(|v| (v.descriptors.video_id.as_str(), v.class_stem.as_str())));
    write(labels_out, tsv.as_bytes())?;
    Ok(videos.len())
}

/// Fits on the pooled descriptors of every video in `dir`, or only of the
/// videos listed in `only`.
pub fn gmm_fit(dir: &Path, only: Option<&BTreeSet<String>>, k: usize, cfg: &EmConfig, out: &Path) -> Result<(GmmModel, EmReport)> {
    let sets = load_descriptor_dir(dir).map_err(data)?;
    let chosen: Vec<_> = sets.iter().filter(|s| only.is_none_or(|ids| ids.contains(&s.video_id))).collect();
    if chosen.is_empty() {
        return Err(at(dir, "no descriptor sets to fit"));
    }
    let pooled = pool_descriptors(chosen);
    let (model, report) = fit_gmm(&pooled, k, cfg).map_err(|e| at(dir, e))?;
    model.save(out).map_err(data)?;
    Ok((model, report))
}

/// Encodes every descriptor set in `dir` into `out/<video_id>.fv`; returns
/// the number of degenerate encodings.
pub fn fv_encode(gmm_path: &Path, dir: &Path, normalize: Normalization, out: &Path) -> Result<(usize, usize)> {
    let gmm = GmmModel::load(gmm_path).map_err(data)?;
    let sets = load_descriptor_dir(dir).map_err(data)?;
    fs::create_dir_all(out).map_err(|e| at(out, e))?;
    let mut degenerate = 0;
    for ds in &sets {
        let path = dir.join(format!("{}.tfds", ds.video_id));
        let fv = encode_fisher(&gmm, ds, normalize).map_err(|e| at(&path, e))?;
        degenerate += usize::from(fv.degenerate);
        fv.save(&out.join(format!("{}.fv", ds.video_id))).map_err(data)?;
    }
    Ok((sets.len(), degenerate))
}

/// Pairs each labeled video's Fisher vector with its class tag vector.
/// Every labeled video must have an encoding; unlabeled encodings are
/// ignored.
pub fn training_pairs(
    fvs: &[FisherVector],
    labels: &BTreeMap<String, String>,
    labels_path: &Path,
    tv: &TagVectors,
) -> Result<Vec<TrainPair>> {
    let by_id: BTreeMap<&str, &FisherVector> = fvs.iter().map(|f| (f.video_id.as_str(), f)).collect();
    labels
        .iter()
        .map(|(video, class)| {
            let fv = by_id.get(video.as_str()).ok_or_else(|| at(labels_path, format!("no Fisher vector for video '{video}'")))?;
            let target = tv.vector(class).ok_or_else(|| at(labels_path, format!("class '{class}' has no tag vector")))?;
            Ok(TrainPair { fisher: fv.values.clone(), target: target.to_vec(), class_stem: class.clone() })
        })
        .collect()
}

pub fn class_vectors(pairs: &[TrainPair]) -> BTreeMap<String, Vec<f64>> {
    pairs.iter().map(|p| (p.class_stem.clone(), p.target.clone())).collect()
}

pub fn load_fvs(dir: &Path) -> Result<Vec<FisherVector>> {
    load_fisher_dir(dir).map_err(data)
}

#[derive(Debug, Serialize)]
pub struct EmbedOutcome {
    pub pairs: usize,
    pub train_accuracy: f64,
    pub iterations: usize,
    pub best_loss: f64,
}

pub fn embed_train(fv_dir: &Path, labels_path: &Path, t2v: &Path, cfg: &NetConfig, out: &Path) -> Result<(EmbedOutcome, TrainReport)> {
    let tv = load_t2v(t2v)?;
    let fvs = load_fvs(fv_dir)?;
    let pairs = training_pairs(&fvs, &labels(labels_path)?, labels_path, &tv)?;
    let (net, report) = train_embedding(&pairs, cfg).map_err(|e| at(fv_dir, e))?;
    let acc = nearest_class_accuracy(&net, &pairs, &class_vectors(&pairs)).map_err(data)?;
    net.save(out).map_err(data)?;
    let outcome = EmbedOutcome { pairs: pairs.len(), train_accuracy: acc, iterations: report.iterations, best_loss: report.best_loss };
    Ok((outcome, report))
}

pub fn load_net(path: &Path) -> Result<EmbeddingNet> {
    EmbeddingNet::load(path).map_err(data)
}

pub fn load_destem(path: &Path) -> Result<DestemMap> {
    DestemMap::load(path).map_err(data)
}

pub struct SuggestModels {
    pub net: EmbeddingNet,
    pub tv: TagVectors,
    pub dm: DestemMap,
}

impl SuggestModels {
    pub fn load(net: &Path, t2v: &Path, destem: &Path) -> Result<Self> {
        Ok(SuggestModels { net: load_net(net)?, tv: load_t2v(t2v)?, dm: load_destem(destem)? })
    }

    pub fn suggest(&self, fv: &FisherVector, cfg: &SuggestConfig) -> Result<Vec<Suggestion>> {
        suggest_tags(fv, &self.net, &self.tv, &self.dm, cfg).map_err(|e| data(format!("video '{}': {e}", fv.video_id)))
    }
}

/// Precomputes suggestions for every labeled video and writes the survey
/// store.
pub fn store_build(
    models: &SuggestModels,
    fv_dir: &Path,
    labels_path: &Path,
    cfg: &SuggestConfig,
    media_prefix: &str,
    out: &Path,
) -> Result<usize> {
    let labels = labels(labels_path)?;
    let fvs: BTreeMap<String, FisherVector> = load_fvs(fv_dir)?.into_iter().map(|f| (f.video_id.clone(), f)).collect();
    let mut videos = Vec::with_capacity(labels.len());
    for (video, class) in &labels {
        let fv = fvs.get(video).ok_or_else(|| at(labels_path, format!("no Fisher vector for video '{video}'")))?;
        videos.push(StoreVideo {
            video_id: video.clone(),
            media_url: format!("{media_prefix}{video}.mp4"),
            class_stem: class.clone(),
            suggestions: models.suggest(fv, cfg)?,
        });
    }
    build_store(out, &videos).map_err(data)?;
    Ok(videos.len())
}
