//! Tag normalization, hash-tag sentences, vocabulary and the de-stem map.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::io::write_atomic;
use crate::porter;

pub const DEFAULT_MIN_COUNT: u64 = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("min_count must be at least 1")]
    InvalidMinCount,
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.to_path_buf(), source }
    }
}

/// One video's tags as scraped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRecord {
    pub video_id: String,
    pub raw_tags: Vec<String>,
}

/// A tag after normalization: the display surface and its stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedTag {
    pub surface: String,
    pub stem: String,
}

/// Lowercases, drops everything outside `[a-z0-9]` and stems purely
/// alphabetic surfaces. Returns `None` when nothing survives.
///
/// Input is NFC-normalized first, so a precomposed and a decomposed accented
/// letter are both removed whole. A hyphenated `-like` suffix is dropped
/// before other characters are removed, so `fish-like` becomes `fish`.
pub fn normalize_tag(raw: &str) -> Option<NormalizedTag> {
    let lowered: String = raw.nfc().flat_map(char::to_lowercase).collect();
    let base = match lowered.strip_suffix("-like") {
        Some(head) if head.chars().any(|c| c.is_ascii_alphanumeric()) => head,
        _ => lowered.as_str(),
    };
    let surface: String = base
        .chars()
        .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        .collect();
    if surface.is_empty() {
        return None;
    }
    let stem = if surface.bytes().all(|b| b.is_ascii_lowercase()) {
        let s = porter::stem(&surface);
        if s.is_empty() {
            surface.clone()
        } else {
            s
        }
    } else {
        surface.clone()
    };
    Some(NormalizedTag { surface, stem })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashTagSentence {
    pub video_id: String,
    pub stems: Vec<String>,
    /// At least two stems of the sentence are in the vocabulary.
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabEntry {
    pub stem: String,
    pub count: u64,
}

/// Stems with at least `min_count` occurrences, indexed 0..len in
/// descending-count order with lexicographic tie-break.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
    min_count: u64,
}

impl Vocabulary {
    /// Builds from raw counts, dropping entries under `min_count`.
    pub fn from_counts<I>(counts: I, min_count: u64) -> Self
    where
        I: IntoIterator<Item = (String, u64)>,
    {
        let mut entries: Vec<VocabEntry> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count && *c > 0)
            .map(|(stem, count)| VocabEntry { stem, count })
            .collect();
        entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.stem.cmp(&b.stem)));
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.stem.clone(), i))
            .collect();
        Vocabulary { entries, index, min_count }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn index_of(&self, stem: &str) -> Option<usize> {
        self.index.get(stem).copied()
    }

    pub fn count_of(&self, stem: &str) -> Option<u64> {
        self.index_of(stem).map(|i| self.entries[i].count)
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn stems(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.stem.as_str())
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|e| e.count).sum()
    }
}

/// Stem to surface forms with their corpus counts, most common first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DestemMap {
    forms: BTreeMap<String, Vec<(String, u64)>>,
}

impl DestemMap {
    pub fn from_counts<I>(counts: I) -> Self
    where
        I: IntoIterator<Item = (String, String, u64)>,
    {
        let mut forms: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
        for (stem, surface, count) in counts {
            if count == 0 {
                continue;
            }
            *forms.entry(stem).or_default().entry(surface).or_insert(0) += count;
        }
        let forms = forms
            .into_iter()
            .map(|(stem, by_surface)| {
                let mut v: Vec<(String, u64)> = by_surface.into_iter().collect();
                v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                (stem, v)
            })
            .collect();
        DestemMap { forms }
    }

    /// Most frequent surface form of `stem`, or `stem` itself when unknown.
    pub fn destem<'a>(&'a self, stem: &'a str) -> &'a str {
        self.forms
            .get(stem)
            .and_then(|v| v.first())
            .map(|(s, _)| s.as_str())
            .unwrap_or(stem)
    }

    pub fn forms(&self, stem: &str) -> Option<&[(String, u64)]> {
        self.forms.get(stem).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[(String, u64)])> {
        self.forms.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Writes `stem TAB surface TAB count` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (stem, forms) in &self.forms {
            for (surface, count) in forms {
                out.push_str(&format!("{stem}\t{surface}\t{count}\n"));
            }
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
        let mut triples = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let parse_err = |msg: &str| CorpusError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: msg.to_string(),
            };
            if parts.len() != 3 {
                return Err(parse_err("expected stem, surface and count"));
            }
            let count: u64 = parts[2].parse().map_err(|_| parse_err("bad count"))?;
            triples.push((parts[0].to_string(), parts[1].to_string(), count));
        }
        Ok(DestemMap::from_counts(triples))
    }
}

/// Tally of records that could not contribute a sentence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildDiagnostics {
    pub records_seen: usize,
    pub malformed_records: usize,
    pub empty_records: usize,
    pub dropped_tags: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<HashTagSentence>,
    pub vocab: Vocabulary,
    pub destem: DestemMap,
}

/// A record as read from input, before validation.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct RawTagRecord {
    #[serde(default)]
    pub video_id: Option<String>,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl From<TagRecord> for RawTagRecord {
    fn from(r: TagRecord) -> Self {
        RawTagRecord { video_id: Some(r.video_id), tags: r.raw_tags }
    }
}

fn valid_video_id(id: &str) -> bool {
    !id.is_empty() && !id.chars().any(char::is_whitespace)
}

/// Builds sentences, vocabulary and de-stem map from records in order.
///
/// Records without a usable `video_id` (missing, empty or containing
/// whitespace, which the sentence file cannot represent) are skipped and
/// tallied.
pub fn build_corpus<I, R>(records: I, min_count: u64) -> Result<(Corpus, BuildDiagnostics), CorpusError>
where
    I: IntoIterator<Item = R>,
    R: Into<RawTagRecord>,
{
    if min_count == 0 {
        return Err(CorpusError::InvalidMinCount);
    }
    let mut diag = BuildDiagnostics::default();
    let mut sentences = Vec::new();
    let mut stem_counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut surface_counts: BTreeMap<(String, String), u64> = BTreeMap::new();

    for rec in records {
        let rec: RawTagRecord = rec.into();
        diag.records_seen += 1;
        let video_id = match rec.video_id {
            Some(id) if valid_video_id(&id) => id,
            _ => {
                diag.malformed_records += 1;
                continue;
            }
        };
        let mut stems = Vec::with_capacity(rec.tags.len());
        for raw in &rec.tags {
            match normalize_tag(raw) {
                Some(t) => {
                    *stem_counts.entry(t.stem.clone()).or_insert(0) += 1;
                    *surface_counts.entry((t.stem.clone(), t.surface)).or_insert(0) += 1;
                    stems.push(t.stem);
                }
                None => diag.dropped_tags += 1,
            }
        }
        if stems.is_empty() {
            diag.empty_records += 1;
            continue;
        }
        sentences.push(HashTagSentence { video_id, stems, trainable: false });
    }

    let vocab = Vocabulary::from_counts(stem_counts, min_count);
    mark_trainable(&mut sentences, &vocab);
    let destem = DestemMap::from_counts(surface_counts.into_iter().map(|((st, su), c)| (st, su, c)));
    Ok((Corpus { sentences, vocab, destem }, diag))
}

fn mark_trainable(sentences: &mut [HashTagSentence], vocab: &Vocabulary) {
    for s in sentences {
        let in_vocab = s.stems.iter().filter(|st| vocab.index_of(st).is_some()).count();
        s.trainable = in_vocab >= 2;
    }
}

/// Reads line-delimited JSON records `{"video_id": ..., "tags": [...]}`.
/// Lines that are not valid JSON are a parse error naming the line; records
/// missing `video_id` are passed through for `build_corpus` to tally.
pub fn read_records<R: Read>(reader: R, path: &Path) -> Result<Vec<RawTagRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawTagRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

impl Corpus {
    pub fn trainable_sentences(&self) -> impl Iterator<Item = &HashTagSentence> {
        self.sentences.iter().filter(|s| s.trainable)
    }

    pub fn sentences_txt(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.video_id);
            for st in &s.stems {
                out.push(' ');
                out.push_str(st);
            }
            out.push('\n');
        }
        out
    }

    pub fn vocab_tsv(&self) -> String {
        self.vocab
            .entries()
            .iter()
            .map(|e| format!("{}\t{}\n", e.stem, e.count))
            .collect()
    }

    /// Writes `sentences.txt`, `vocab.tsv` and `destem.tsv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        for (name, body) in [
            ("sentences.txt", self.sentences_txt()),
            ("vocab.tsv", self.vocab_tsv()),
            ("destem.tsv", self.destem.to_tsv()),
        ] {
            let p = dir.join(name);
            write_atomic(&p, body.as_bytes()).map_err(|e| CorpusError::io(&p, e))?;
        }
        Ok(())
    }

    /// Loads an archive written by [`Corpus::save`]. The vocabulary threshold
    /// is taken as the smallest stored count.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let sent_path = dir.join("sentences.txt");
        let text = fs::read_to_string(&sent_path).map_err(|e| CorpusError::io(&sent_path, e))?;
        let mut sentences = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let mut toks = line.split(' ');
            let video_id = toks.next().unwrap_or_default();
            let stems: Vec<String> = toks.map(str::to_string).collect();
            if video_id.is_empty() || stems.is_empty() || stems.iter().any(String::is_empty) {
                return Err(CorpusError::Parse {
                    path: sent_path.clone(),
                    line: i + 1,
                    msg: "expected video id followed by stems".into(),
                });
            }
            sentences.push(HashTagSentence { video_id: video_id.to_string(), stems, trainable: false });
        }

        let vocab_path = dir.join("vocab.tsv");
        let text = fs::read_to_string(&vocab_path).map_err(|e| CorpusError::io(&vocab_path, e))?;
        let mut counts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let parsed = line
                .split_once('\t')
                .and_then(|(s, c)| c.parse::<u64>().ok().map(|c| (s.to_string(), c)));
            match parsed {
                Some(p) => counts.push(p),
                None => {
                    return Err(CorpusError::Parse {
                        path: vocab_path.clone(),
                        line: i + 1,
                        msg: "expected stem TAB count".into(),
                    })
                }
            }
        }
        let min_count = counts.iter().map(|(_, c)| *c).min().unwrap_or(1).max(1);
        let vocab = Vocabulary::from_counts(counts, min_count);
        mark_trainable(&mut sentences, &vocab);
        let destem = DestemMap::load(&dir.join("destem.tsv"))?;
        Ok(Corpus { sentences, vocab, destem })
    }
}
