//! Aggregation of survey relevance marks into per-class statistics.
//!
//! Averages are taken over (video, user) marks; a video is zero-relevant
//! when every user who marked it selected nothing.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Average number of hash-tags on a typical video of the source platform,
/// carried in reports as a point of comparison.
pub const REFERENCE_TAGS_PER_VIDEO: f64 = 4.79;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("mark {index} (video '{video_id}', user '{user_id}'): video has no class label")]
    Unlabeled { index: usize, video_id: String, user_id: String },
    #[error("mark {index} (video '{video_id}', user '{user_id}'): selection is not a subset of shown tags")]
    NotSubset { index: usize, video_id: String, user_id: String },
    #[error("mark {index} (video '{video_id}', user '{user_id}'): shows {found} tags, expected {expected}")]
    ShownLength { index: usize, video_id: String, user_id: String, expected: usize, found: usize },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceMark {
    pub video_id: String,
    pub user_id: String,
    pub shown: Vec<String>,
    pub selected: Vec<String>,
}

impl RelevanceMark {
    pub fn selection_is_subset(&self) -> bool {
        self.selected.iter().all(|s| self.shown.contains(s))
    }

    /// Distinct selected stems.
    pub fn relevant_count(&self) -> usize {
        self.selected.iter().collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_stem: String,
    pub video_count: usize,
    pub mark_count: usize,
    pub avg_relevant: f64,
    pub zero_relevant_videos: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceReport {
    pub k: usize,
    pub classes: Vec<ClassReport>,
    pub overall_avg: f64,
    pub total_marks: usize,
    pub total_videos: usize,
    pub total_zero_videos: usize,
    pub reference_tags_per_video: f64,
}

#[derive(Default)]
struct ClassAcc {
    marks: usize,
    selected: usize,
    // video -> any selection so far
    videos: BTreeMap<String, bool>,
}

/// Per-class and overall relevance statistics; classes sorted by stem.
pub fn aggregate_relevance(
    marks: &[RelevanceMark],
    labels: &BTreeMap<String, String>,
    k: usize,
) -> Result<RelevanceReport, EvalError> {
    let mut classes: BTreeMap<&str, ClassAcc> = BTreeMap::new();
    let mut total_selected = 0usize;
    for (index, m) in marks.iter().enumerate() {
        let ids = || (m.video_id.clone(), m.user_id.clone());
        let class = labels.get(&m.video_id).ok_or_else(|| {
            let (video_id, user_id) = ids();
            EvalError::Unlabeled { index, video_id, user_id }
        })?;
        if m.shown.len() != k {
            let (video_id, user_id) = ids();
            return Err(EvalError::ShownLength { index, video_id, user_id, expected: k, found: m.shown.len() });
        }
        if !m.selection_is_subset() {
            let (video_id, user_id) = ids();
            return Err(EvalError::NotSubset { index, video_id, user_id });
        }
        let n = m.relevant_count();
        let acc = classes.entry(class.as_str()).or_default();
        acc.marks += 1;
        acc.selected += n;
        *acc.videos.entry(m.video_id.clone()).or_insert(false) |= n > 0;
        total_selected += n;
    }

    let classes: Vec<ClassReport> = classes
        .into_iter()
        .map(|(stem, acc)| ClassReport {
            class_stem: stem.to_string(),
            video_count: acc.videos.len(),
            mark_count: acc.marks,
            avg_relevant: acc.selected as f64 / acc.marks as f64,
            zero_relevant_videos: acc.videos.values().filter(|any| !**any).count(),
        })
        .collect();
    Ok(RelevanceReport {
        k,
        overall_avg: if marks.is_empty() { 0.0 } else { total_selected as f64 / marks.len() as f64 },
        total_marks: marks.len(),
        total_videos: classes.iter().map(|c| c.video_count).sum(),
        total_zero_videos: classes.iter().map(|c| c.zero_relevant_videos).sum(),
        reference_tags_per_video: REFERENCE_TAGS_PER_VIDEO,
        classes,
    })
}

impl RelevanceReport {
    /// `class TAB video_count TAB avg_relevant TAB zero_relevant_videos`
    /// rows, then a `# overall` summary line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("class\tvideo_count\tavg_relevant\tzero_relevant_videos\n");
        for c in &self.classes {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", c.class_stem, c.video_count, c.avg_relevant, c.zero_relevant_videos));
        }
        out.push_str(&format!(
            "# overall\t{}\tavg_relevant {} of {}\tzero_relevant {} of {}\treference_tags_per_video {}\n",
            self.total_videos, self.overall_avg, self.k, self.total_zero_videos, self.total_videos, self.reference_tags_per_video
        ));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Reads line-delimited JSON marks.
pub fn read_marks<R: Read>(reader: R, path: &Path) -> Result<Vec<RelevanceMark>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let perr = |msg: String| EvalError::Parse { path: path.to_path_buf(), line: i + 1, msg };
        let line = line.map_err(|e| perr(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shown() -> Vec<String> {
        (0..15).map(|i| format!("t{i}")).collect()
    }

    fn mark(video: &str, user: &str, n: usize) -> RelevanceMark {
        RelevanceMark { video_id: video.into(), user_id: user.into(), shown: shown(), selected: shown()[..n].to_vec() }
    }

    fn labels() -> BTreeMap<String, String> {
        [("a1", "alpha"), ("a2", "alpha"), ("b1", "beta"), ("b2", "beta")]
            .into_iter()
            .map(|(v, c)| (v.to_string(), c.to_string()))
            .collect()
    }

    #[test]
    fn hand_fixture() {
        let marks = vec![mark("a1", "u", 7), mark("a2", "u", 7), mark("b1", "u", 1), mark("b2", "u", 2)];
        let r = aggregate_relevance(&marks, &labels(), 15).unwrap();
        assert_eq!(r.classes[0].avg_relevant, 7.0);
        assert_eq!(r.classes[1].avg_relevant, 1.5);
        assert_eq!(r.overall_avg, 4.25);
        assert_eq!(r.total_zero_videos, 0);
    }

    #[test]
    fn all_empty_selections() {
        let marks = vec![mark("a1", "u", 0), mark("b1", "u", 0), mark("b1", "w", 0)];
        let r = aggregate_relevance(&marks, &labels(), 15).unwrap();
        assert!(r.classes.iter().all(|c| c.avg_relevant == 0.0));
        assert!(r.classes.iter().all(|c| c.zero_relevant_videos == c.video_count));
        assert_eq!(r.overall_avg, 0.0);
        assert_eq!(r.total_zero_videos, 2);
    }

    #[test]
    fn zero_relevance_needs_unanimity() {
        let marks = vec![mark("a1", "u", 0), mark("a1", "w", 1)];
        let r = aggregate_relevance(&marks, &labels(), 15).unwrap();
        assert_eq!(r.classes[0].zero_relevant_videos, 0);
        assert_eq!(r.classes[0].avg_relevant, 0.5);
    }

    #[test]
    fn errors_identify_mark() {
        let err = aggregate_relevance(&[mark("zz", "u", 0)], &labels(), 15).unwrap_err();
        assert!(matches!(err, EvalError::Unlabeled { index: 0, .. }));
        let mut m = mark("a1", "u", 1);
        m.selected.push("other".into());
        let err = aggregate_relevance(&[mark("a2", "u", 0), m], &labels(), 15).unwrap_err();
        assert!(matches!(err, EvalError::NotSubset { index: 1, .. }));
        let err = aggregate_relevance(&[mark("a1", "u", 0)], &labels(), 10).unwrap_err();
        assert!(matches!(err, EvalError::ShownLength { expected: 10, found: 15, .. }));
    }

    #[test]
    fn tsv_layout() {
        let marks = vec![mark("a1", "u", 7), mark("a2", "u", 7), mark("b1", "u", 1), mark("b2", "u", 2)];
        let tsv = aggregate_relevance(&marks, &labels(), 15).unwrap().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[1], "alpha\t2\t7\t0");
        assert_eq!(lines[2], "beta\t2\t1.5\t0");
        assert!(lines[3].starts_with("# overall\t4\tavg_relevant 4.25 of 15"));
    }
}
