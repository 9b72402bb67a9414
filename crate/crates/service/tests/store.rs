mod common;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;

use tagforge_service::{build_store, MarkOutcome, SurveyStore};

#[test]
fn each_user_sees_every_video_once() {
    let dir = tempfile::tempdir().unwrap();
    let videos = common::write_fixture(dir.path());
    let store = SurveyStore::open(dir.path(), &dir.path().join("marks.jsonl")).unwrap();
    let mut served = BTreeSet::new();
    while let Some(v) = store.next_for("ann") {
        assert_eq!(v.suggestions.len(), 15);
        assert!(served.insert(v.video_id.clone()));
        let v = v.clone();
        assert_eq!(store.post_mark(common::mark_for(&v, "ann", 1)).unwrap(), MarkOutcome::Accepted);
    }
    assert_eq!(served.len(), videos.len());
    assert!(store.next_for("someone-else").is_some());
}

#[test]
fn empty_store_is_immediately_done() {
    let dir = tempfile::tempdir().unwrap();
    build_store(dir.path(), &[]).unwrap();
    let store = SurveyStore::open(dir.path(), &dir.path().join("marks.jsonl")).unwrap();
    assert!(store.next_for("u").is_none());
}

#[test]
fn order_is_per_user_and_stable_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let videos: Vec<_> = (0..12).map(|i| common::video(&format!("v{i}"), "c", 15)).collect();
    build_store(dir.path(), &videos).unwrap();
    let marks = dir.path().join("marks.jsonl");
    let a = SurveyStore::open(dir.path(), &marks).unwrap().order_for("alice");
    let b = SurveyStore::open(dir.path(), &marks).unwrap().order_for("alice");
    assert_eq!(a, b);
    let others: BTreeSet<Vec<usize>> = ["bob", "carol", "dave"].iter().map(|u| SurveyStore::open(dir.path(), &marks).unwrap().order_for(u)).collect();
    assert!(others.iter().any(|o| *o != a));
}

#[test]
fn rejections() {
    let dir = tempfile::tempdir().unwrap();
    let videos = common::write_fixture(dir.path());
    let store = SurveyStore::open(dir.path(), &dir.path().join("marks.jsonl")).unwrap();
    let m = common::mark_for(&videos[0], "u", 3);
    assert_eq!(store.post_mark(m.clone()).unwrap(), MarkOutcome::Accepted);
    assert_eq!(store.mark_count(), 1);
    assert_eq!(store.post_mark(m).unwrap(), MarkOutcome::Rejected("already marked".into()));

    let mut bad = common::mark_for(&videos[1], "u", 0);
    bad.selected.push("nothere".into());
    assert_eq!(store.post_mark(bad).unwrap(), MarkOutcome::Rejected("unknown selection".into()));

    let mut short = common::mark_for(&videos[1], "u", 0);
    short.shown.pop();
    assert!(matches!(store.post_mark(short).unwrap(), MarkOutcome::Rejected(_)));
    assert_eq!(store.mark_count(), 1);

    let empty = common::mark_for(&videos[1], "u", 0);
    assert_eq!(store.post_mark(empty).unwrap(), MarkOutcome::Accepted);
}

#[test]
fn acknowledged_marks_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let videos = common::write_fixture(dir.path());
    let marks = dir.path().join("marks.jsonl");
    {
        let store = SurveyStore::open(dir.path(), &marks).unwrap();
        for (i, v) in videos.iter().enumerate() {
            assert_eq!(store.post_mark(common::mark_for(v, "u", i)).unwrap(), MarkOutcome::Accepted);
        }
    }
    // simulate a crash in the middle of an unacknowledged append
    fs::OpenOptions::new().append(true).open(&marks).unwrap().write_all(b"{\"video_id\":\"a1\",\"us").unwrap();

    let store = SurveyStore::open(dir.path(), &marks).unwrap();
    assert_eq!(store.mark_count(), 4);
    assert!(store.next_for("u").is_none());
    assert_eq!(
        store.post_mark(common::mark_for(&videos[0], "u", 0)).unwrap(),
        MarkOutcome::Rejected("already marked".into())
    );
    assert_eq!(store.post_mark(common::mark_for(&videos[0], "w", 0)).unwrap(), MarkOutcome::Accepted);
    drop(store);
    assert_eq!(SurveyStore::open(dir.path(), &marks).unwrap().mark_count(), 5);
}

#[test]
fn corrupt_log_line_is_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    common::write_fixture(dir.path());
    let marks = dir.path().join("marks.jsonl");
    fs::write(&marks, "not json\n").unwrap();
    let err = SurveyStore::open(dir.path(), &marks).err().unwrap().to_string();
    assert!(err.contains("marks.jsonl:1"), "{err}");
}
