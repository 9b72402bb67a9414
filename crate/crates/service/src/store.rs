use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use tagforge_core::io::write_atomic;
use tagforge_core::{aggregate_relevance, RelevanceMark, RelevanceReport, Suggestion};

pub const VIDEOS_FILE: &str = "videos.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

/// One surveyed video with its fixed suggestion list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreVideo {
    pub video_id: String,
    pub media_url: String,
    pub class_stem: String,
    pub suggestions: Vec<Suggestion>,
}

impl StoreVideo {
    pub fn shown_stems(&self) -> Vec<String> {
        self.suggestions.iter().map(|s| s.stem.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MarkOutcome {
    Accepted,
    Rejected(String),
}

/// Writes `videos.jsonl` into `dir`, one video per line in the given order.
pub fn build_store(dir: &Path, videos: &[StoreVideo]) -> Result<(), StoreError> {
    let path = dir.join(VIDEOS_FILE);
    let mut text = String::new();
    for v in videos {
        text.push_str(&serde_json::to_string(v).expect("video serializes"));
        text.push('\n');
    }
    write_atomic(&path, text.as_bytes()).map_err(|source| StoreError::Io { path, source })
}

struct MarkLog {
    file: File,
    marks: Vec<RelevanceMark>,
    seen: HashSet<(String, String)>,
}

pub struct SurveyStore {
    videos: Vec<StoreVideo>,
    by_id: BTreeMap<String, usize>,
    k: usize,
    marks_path: PathBuf,
    log: Mutex<MarkLog>,
}

fn user_seed(user_id: &str) -> u64 {
    let digest = Sha256::digest(user_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn check_mark(
    videos: &[StoreVideo],
    by_id: &BTreeMap<String, usize>,
    seen: &HashSet<(String, String)>,
    mark: &RelevanceMark,
) -> Result<(), String> {
    if mark.user_id.trim().is_empty() {
        return Err("missing user".into());
    }
    let video = by_id.get(&mark.video_id).map(|i| &videos[*i]).ok_or("unknown video")?;
    if seen.contains(&(mark.video_id.clone(), mark.user_id.clone())) {
        return Err("already marked".into());
    }
    if mark.shown != video.shown_stems() {
        return Err("shown list does not match served suggestions".into());
    }
    if !mark.selection_is_subset() {
        return Err("unknown selection".into());
    }
    Ok(())
}

fn read_videos(path: &Path) -> Result<Vec<StoreVideo>, StoreError> {
    let file = File::open(path).map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| StoreError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let v: StoreVideo = serde_json::from_str(&line)
            .map_err(|e| StoreError::Parse { path: path.to_path_buf(), line: i + 1, msg: e.to_string() })?;
        out.push(v);
    }
    Ok(out)
}

impl SurveyStore {
    /// Loads the store and replays the marks log. An unterminated final
    /// line can only come from a write that was never acknowledged, so it is
    /// discarded.
    pub fn open(store_dir: &Path, marks_path: &Path) -> Result<Self, StoreError> {
        let videos_path = store_dir.join(VIDEOS_FILE);
        let videos = read_videos(&videos_path)?;
        let invalid = |msg: String| StoreError::Invalid { path: videos_path.clone(), msg };
        let k = videos.first().map_or(0, |v| v.suggestions.len());
        let mut by_id = BTreeMap::new();
        for (i, v) in videos.iter().enumerate() {
            if v.suggestions.len() != k {
                return Err(invalid(format!("video '{}' has {} suggestions, expected {k}", v.video_id, v.suggestions.len())));
            }
            if by_id.insert(v.video_id.clone(), i).is_some() {
                return Err(invalid(format!("duplicate video '{}'", v.video_id)));
            }
        }

        let io_err = |source| StoreError::Io { path: marks_path.to_path_buf(), source };
        let mut text = match fs::read_to_string(marks_path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io_err(e)),
        };
        let complete = text.rfind('\n').map_or(0, |p| p + 1);
        let torn = complete < text.len();
        text.truncate(complete);

        let mut marks = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse = |msg: String| StoreError::Parse { path: marks_path.to_path_buf(), line: i + 1, msg };
            let mark: RelevanceMark = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
            check_mark(&videos, &by_id, &seen, &mark).map_err(parse)?;
            seen.insert((mark.video_id.clone(), mark.user_id.clone()));
            marks.push(mark);
        }
        if torn {
            write_atomic(marks_path, text.as_bytes()).map_err(io_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(marks_path).map_err(io_err)?;
        Ok(SurveyStore {
            videos,
            by_id,
            k,
            marks_path: marks_path.to_path_buf(),
            log: Mutex::new(MarkLog { file, marks, seen }),
        })
    }

    pub fn videos(&self) -> &[StoreVideo] {
        &self.videos
    }

    /// Suggestions per video.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn marks_path(&self) -> &Path {
        &self.marks_path
    }

    pub fn labels(&self) -> BTreeMap<String, String> {
        self.videos.iter().map(|v| (v.video_id.clone(), v.class_stem.clone())).collect()
    }

    /// Presentation order for one user, fixed by a hash of the user id.
    pub fn order_for(&self, user_id: &str) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.videos.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(user_seed(user_id)));
        order
    }

    /// First video in the user's order that they have not marked yet.
    pub fn next_for(&self, user_id: &str) -> Option<&StoreVideo> {
        let log = self.log.lock().expect("marks lock");
        self.order_for(user_id)
            .into_iter()
            .map(|i| &self.videos[i])
            .find(|v| !log.seen.contains(&(v.video_id.clone(), user_id.to_string())))
    }

    /// Validates the mark and appends it to the log, syncing the file before
    /// returning `Accepted`.
    pub fn post_mark(&self, mark: RelevanceMark) -> Result<MarkOutcome, StoreError> {
        let mut log = self.log.lock().expect("marks lock");
        if let Err(reason) = check_mark(&self.videos, &self.by_id, &log.seen, &mark) {
            return Ok(MarkOutcome::Rejected(reason));
        }
        let mut line = serde_json::to_string(&mark).expect("mark serializes");
        line.push('\n');
        let io_err = |source| StoreError::Io { path: self.marks_path.clone(), source };
        log.file.write_all(line.as_bytes()).map_err(io_err)?;
        log.file.sync_data().map_err(io_err)?;
        log.seen.insert((mark.video_id.clone(), mark.user_id.clone()));
        log.marks.push(mark);
        Ok(MarkOutcome::Accepted)
    }

    pub fn mark_count(&self) -> usize {
        self.log.lock().expect("marks lock").marks.len()
    }

    pub fn report(&self) -> RelevanceReport {
        let log = self.log.lock().expect("marks lock");
        aggregate_relevance(&log.marks, &self.labels(), self.k).expect("logged marks were validated on entry")
    }
}
