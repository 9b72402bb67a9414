//! Tag suggestion for a query video: project its Fisher vector into tag
//! space and scan every tag vector by L2 distance.
//!
//! Only the network, the tag space and the de-stem map are consulted.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DestemMap;
use crate::crossmodal::{EmbedError, EmbeddingNet};
use crate::fisher::FisherVector;
use crate::linalg::l2_distance;
use crate::tag2vec::TagVectors;

pub const DEFAULT_K: usize = 15;

#[derive(Debug, Error)]
pub enum SuggestError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("tag vocabulary is empty")]
    EmptyVocabulary,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub rank: usize,
    pub stem: String,
    pub surface: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuggestConfig {
    pub k: usize,
    pub exclude_stems: BTreeSet<String>,
    /// Skip stems whose de-stemmed surface was already suggested.
    pub collapse_to_surface: bool,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        SuggestConfig { k: DEFAULT_K, exclude_stems: BTreeSet::new(), collapse_to_surface: true }
    }
}

/// Ranks the tag space around an already-projected point.
pub fn rank_tags(point: &[f64], tv: &TagVectors, dm: &DestemMap, cfg: &SuggestConfig) -> Result<Vec<Suggestion>, SuggestError> {
    if cfg.k == 0 {
        return Err(SuggestError::ZeroK);
    }
    if tv.is_empty() {
        return Err(SuggestError::EmptyVocabulary);
    }
    if point.len() != tv.dim() {
        return Err(SuggestError::Dimension(format!(
            "projected point has {} dims, tag space has {}",
            point.len(),
            tv.dim()
        )));
    }
    let vectors = tv.input_vectors();
    let mut scored: Vec<(usize, f64)> = tv
        .stems()
        .iter()
        .enumerate()
        .filter(|(_, s)| !cfg.exclude_stems.contains(*s))
        .map(|(i, _)| (i, l2_distance(point, vectors.row(i))))
        .collect();
    let stems = tv.stems();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| stems[a.0].cmp(&stems[b.0])));

    let mut seen_surfaces = HashSet::new();
    let mut out = Vec::with_capacity(cfg.k.min(scored.len()));
    for (i, distance) in scored {
        if out.len() == cfg.k {
            break;
        }
        let stem = &stems[i];
        let surface = dm.destem(stem);
        if cfg.collapse_to_surface && !seen_surfaces.insert(surface.to_string()) {
            continue;
        }
        out.push(Suggestion { rank: out.len() + 1, stem: stem.clone(), surface: surface.to_string(), distance });
    }
    Ok(out)
}

/// Top-k de-stemmed suggestions for one video.
pub fn suggest_tags(
    fv: &FisherVector,
    net: &EmbeddingNet,
    tv: &TagVectors,
    dm: &DestemMap,
    cfg: &SuggestConfig,
) -> Result<Vec<Suggestion>, SuggestError> {
    if net.output_dim() != tv.dim() {
        return Err(SuggestError::Dimension(format!(
            "net outputs {} dims, tag space has {}",
            net.output_dim(),
            tv.dim()
        )));
    }
    let point = net.project(&fv.values)?;
    rank_tags(&point, tv, dm, cfg)
}

/// `rank TAB surface TAB stem TAB distance` lines.
pub fn to_tsv(suggestions: &[Suggestion]) -> String {
    suggestions
        .iter()
        .map(|s| format!("{}\t{}\t{}\t{}\n", s.rank, s.surface, s.stem, s.distance))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn space() -> (TagVectors, DestemMap) {
        let m = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let tv = TagVectors::new(vec!["zero".into(), "one".into(), "three".into()], m);
        (tv, DestemMap::default())
    }

    fn const_net(out: Vec<f64>) -> EmbeddingNet {
        let mut net = EmbeddingNet::zeros(2, 1, out.len());
        net.b2 = out;
        net
    }

    #[test]
    fn line_example() {
        let (tv, dm) = space();
        let fv = FisherVector { video_id: "q".into(), values: vec![0.3, 0.4], degenerate: false };
        let cfg = SuggestConfig { k: 2, ..Default::default() };
        let got = suggest_tags(&fv, &const_net(vec![0.9, 0.0]), &tv, &dm, &cfg).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].rank, got[0].stem.as_str()), (1, "one"));
        assert!((got[0].distance - 0.1).abs() < 1e-12);
        assert_eq!((got[1].rank, got[1].stem.as_str()), (2, "zero"));
        assert!((got[1].distance - 0.9).abs() < 1e-12);
    }

    #[test]
    fn k_saturates_at_vocabulary() {
        let (tv, dm) = space();
        let cfg = SuggestConfig { k: 50, ..Default::default() };
        let got = rank_tags(&[0.0, 0.0], &tv, &dm, &cfg).unwrap();
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn collapse_duplicate_surfaces() {
        let m = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let tv = TagVectors::new(vec!["a".into(), "b".into(), "c".into()], m);
        let dm = DestemMap::from_counts(vec![
            ("a".to_string(), "same".to_string(), 2),
            ("b".to_string(), "same".to_string(), 5),
        ]);
        let on = rank_tags(&[0.0], &tv, &dm, &SuggestConfig::default()).unwrap();
        let names: Vec<&str> = on.iter().map(|s| s.stem.as_str()).collect();
        assert_eq!(names, vec!["a", "c"]);
        assert_eq!(on[1].rank, 2);
        let off = SuggestConfig { collapse_to_surface: false, ..Default::default() };
        assert_eq!(rank_tags(&[0.0], &tv, &dm, &off).unwrap().len(), 3);
    }

    #[test]
    fn errors() {
        let (tv, dm) = space();
        let cfg = SuggestConfig { k: 0, ..Default::default() };
        assert!(matches!(rank_tags(&[0.0, 0.0], &tv, &dm, &cfg), Err(SuggestError::ZeroK)));
        let empty = TagVectors::new(vec![], Matrix::zeros(0, 2));
        assert!(matches!(rank_tags(&[0.0, 0.0], &empty, &dm, &SuggestConfig::default()), Err(SuggestError::EmptyVocabulary)));
        let fv = FisherVector { video_id: "q".into(), values: vec![0.0, 0.0], degenerate: false };
        assert!(matches!(
            suggest_tags(&fv, &const_net(vec![0.0, 0.0, 0.0]), &tv, &dm, &SuggestConfig::default()),
            Err(SuggestError::Dimension(_))
        ));
    }
}
