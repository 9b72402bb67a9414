#![allow(dead_code)]

use std::path::Path;

use tagforge_core::{RelevanceMark, Suggestion};
use tagforge_service::{build_store, StoreVideo};

pub fn video(id: &str, class: &str, k: usize) -> StoreVideo {
    StoreVideo {
        video_id: id.into(),
        media_url: format!("media/{id}.mp4"),
        class_stem: class.into(),
        suggestions: (0..k)
            .map(|i| Suggestion { rank: i + 1, stem: format!("{class}{i}"), surface: format!("{class}{i}s"), distance: i as f64 * 0.1 })
            .collect(),
    }
}

/// Two classes with two videos each, 15 suggestions per video.
pub fn write_fixture(dir: &Path) -> Vec<StoreVideo> {
    let videos = vec![video("a1", "alpha", 15), video("a2", "alpha", 15), video("b1", "beta", 15), video("b2", "beta", 15)];
    build_store(dir, &videos).unwrap();
    videos
}

pub fn mark_for(v: &StoreVideo, user: &str, n: usize) -> RelevanceMark {
    let shown = v.shown_stems();
    RelevanceMark { video_id: v.video_id.clone(), user_id: user.into(), selected: shown[..n].to_vec(), shown }
}
