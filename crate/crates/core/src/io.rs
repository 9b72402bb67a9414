use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
#[error("{path}:{line}: {msg}")]
pub struct LabelsError {
    pub path: PathBuf,
    pub line: usize,
    pub msg: String,
}

/// Reads `video_id TAB class_stem` lines.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>, LabelsError> {
    let text = fs::read_to_string(path)
        .map_err(|e| LabelsError { path: path.to_path_buf(), line: 0, msg: e.to_string() })?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| LabelsError { path: path.to_path_buf(), line: i + 1, msg: msg.to_string() };
        let (video, class) = line.split_once('\t').ok_or_else(|| err("expected video_id TAB class_stem"))?;
        if video.is_empty() || class.is_empty() || class.contains('\t') {
            return Err(err("expected video_id TAB class_stem"));
        }
        if out.insert(video.to_string(), class.to_string()).is_some() {
            return Err(err("duplicate video id"));
        }
    }
    Ok(out)
}

pub fn labels_to_tsv<'a, I>(labels: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    labels.into_iter().map(|(v, c)| format!("{v}\t{c}\n")).collect()
}

/// Writes `bytes` to a sibling temp file, syncs it and renames it over
/// `path`, so readers never observe a partially written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for one pipeline stage: the global seed XOR a hash of the stage tag.
pub fn derive_seed(global: u64, stage: &str) -> u64 {
    global ^ fnv1a64(stage.as_bytes())
}
