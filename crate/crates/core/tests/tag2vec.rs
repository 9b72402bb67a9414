mod oracles;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use tagforge_core::synth::{class_groups, synth_tag_records, SynthTagsConfig};
use tagforge_core::tag2vec::{NegativeSampler, T2VError};
use tagforge_core::{build_corpus, linalg::Matrix, train_tag2vec, Corpus, Metric, Query, T2VConfig, TagVectors};

fn grouped_corpus() -> (Corpus, BTreeMap<String, usize>) {
    let records = synth_tag_records(&SynthTagsConfig::default());
    let (corpus, _) = build_corpus(records, 5).unwrap();
    let mut group_of = BTreeMap::new();
    for (g, group) in class_groups(5).iter().enumerate() {
        for t in &group.tags {
            group_of.insert(tagforge_core::normalize_tag(t).unwrap().stem, g);
        }
    }
    (corpus, group_of)
}

fn demo_config() -> T2VConfig {
    T2VConfig { dim: 25, epochs: 15, seed: 1, subsample_t: 0.0, ..Default::default() }
}

#[test]
fn groups_separate_in_tag_space() {
    let (corpus, group_of) = grouped_corpus();
    assert_eq!(corpus.vocab.len(), 40);
    let (tv, stats) = train_tag2vec(&corpus, &demo_config()).unwrap();

    let stems = tv.stems().to_vec();
    let mut same = 0;
    let (mut intra, mut inter) = (Vec::new(), Vec::new());
    for a in &stems {
        let mut best: Option<(&String, f64)> = None;
        for b in &stems {
            if a == b {
                continue;
            }
            let c = oracles::cosine(tv.vector(a).unwrap(), tv.vector(b).unwrap());
            if group_of[a] == group_of[b] {
                intra.push(c);
            } else {
                inter.push(c);
            }
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((b, c));
            }
        }
        if group_of[best.unwrap().0] == group_of[a] {
            same += 1;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let frac = same as f64 / stems.len() as f64;
    let gap = mean(&intra) - mean(&inter);
    assert!(frac >= 0.9, "same-group nearest neighbor fraction {frac}");
    assert!(gap >= 0.3, "intra-inter cosine gap {gap}");

    let l = &stats.epoch_loss;
    assert!(l[1] <= l[0] && l[2] <= l[1], "epoch losses {l:?}");
}

#[test]
fn training_is_deterministic() {
    let (corpus, _) = grouped_corpus();
    let cfg = T2VConfig { epochs: 2, ..demo_config() };
    let a = train_tag2vec(&corpus, &cfg).unwrap().0.to_bytes();
    let b = train_tag2vec(&corpus, &cfg).unwrap().0.to_bytes();
    assert_eq!(a, b);
}

#[test]
fn degenerate_corpora_are_rejected() {
    let (corpus, _) = build_corpus(
        vec![tagforge_core::TagRecord { video_id: "a".into(), raw_tags: vec!["x".into(); 6] }],
        1,
    )
    .unwrap();
    let err = train_tag2vec(&corpus, &T2VConfig::default()).unwrap_err();
    assert_eq!(err.to_string(), "vocabulary too small for negative sampling");
}

#[test]
fn negative_sampler_matches_smoothed_unigram() {
    let mut r = oracles::rng(11);
    // every stem needs enough expected draws for a 2% bound to sit well
    // outside binomial noise
    let counts: Vec<u64> = (0..20).map(|_| r.gen_range(100..300)).collect();
    let sampler = NegativeSampler::from_counts(counts.iter().copied());
    let weights: Vec<f64> = counts.iter().map(|c| (*c as f64).powf(0.75)).collect();
    let z: f64 = weights.iter().sum();
    let draws = 1_000_000;
    let mut hist = vec![0u64; counts.len()];
    for _ in 0..draws {
        hist[sampler.sample(&mut r)] += 1;
    }
    for (i, w) in weights.iter().enumerate() {
        let want = w / z;
        let got = hist[i] as f64 / draws as f64;
        assert!(oracles::rel_err(got, want) < 0.02, "stem {i}: {got} vs {want}");
        assert!(oracles::rel_err(sampler.probability(i), want) < 1e-9);
    }
}

fn random_space(seed: u64, n: usize, dim: usize) -> TagVectors {
    let mut r = oracles::rng(seed);
    let stems: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
    // small integer grid makes exact distance ties common
    let data: Vec<f64> = (0..n * dim).map(|_| r.gen_range(-3..=3) as f64).collect();
    TagVectors::new(stems, Matrix::from_vec(n, dim, data))
}

#[test]
fn l2_neighbors_match_brute_force() {
    for seed in 0..40 {
        let tv = random_space(seed, 30, 3);
        let mut r = oracles::rng(seed + 1000);
        let q: Vec<f64> = (0..3).map(|_| r.gen_range(-3..=3) as f64).collect();
        let k = r.gen_range(1..40);
        let exclude: BTreeSet<String> = tv.stems().iter().filter(|_| r.gen_bool(0.1)).cloned().collect();
        let got = tv.nearest_tags(Query::Vector(&q), k, Metric::L2, &exclude).unwrap();
        let mut want: Vec<(String, f64)> = tv
            .stems()
            .iter()
            .filter(|s| !exclude.contains(*s))
            .map(|s| {
                let v = tv.vector(s).unwrap();
                (s.clone(), q.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            })
            .collect();
        want.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        want.truncate(k);
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn self_neighbor_and_self_similarity() {
    let (corpus, _) = grouped_corpus();
    let (tv, _) = train_tag2vec(&corpus, &T2VConfig { epochs: 1, ..demo_config() }).unwrap();
    for s in tv.stems() {
        let top = tv.nearest_tags(Query::Stem(s), 1, Metric::L2, &BTreeSet::new()).unwrap();
        assert_eq!(top, vec![(s.clone(), 0.0)]);
        assert!((tv.similarity(s, s).unwrap() - 1.0).abs() < 1e-12);
    }
    let err = tv.similarity("nosuchstem", tv.stems()[0].as_str()).unwrap_err();
    assert!(err.to_string().contains("nosuchstem"));
}

#[test]
fn cosine_ignores_positive_rescaling() {
    let tv = random_space(3, 6, 4);
    let mut scaled = tv.input_vectors().clone();
    for (i, f) in [0.5, 3.0, 17.0, 1e-3, 2.0, 1.0].iter().enumerate() {
        scaled.row_mut(i).iter_mut().for_each(|v| *v *= f);
    }
    let other = TagVectors::new(tv.stems().to_vec(), scaled);
    for a in tv.stems() {
        for b in tv.stems() {
            let (x, y) = (tv.similarity(a, b).unwrap(), other.similarity(a, b).unwrap());
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn vector_file_round_trip_and_errors() {
    let tv = random_space(5, 7, 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tags.t2v");
    tv.save(&path).unwrap();
    let back = TagVectors::load(&path).unwrap();
    assert_eq!(back.stems(), tv.stems());
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.input_vectors()), bits(tv.input_vectors()));

    let text = String::from_utf8(tv.to_bytes()).unwrap();
    let truncated = text.replacen("T2V 7 3", "T2V 8 3", 1);
    assert!(matches!(TagVectors::from_bytes(truncated.as_bytes()), Err(T2VError::TruncatedPayload { .. })));
    let bad_dim = text.replacen("T2V 7 3", "T2V 7 4", 1);
    assert!(matches!(TagVectors::from_bytes(bad_dim.as_bytes()), Err(T2VError::DimensionMismatch { .. })));
    assert!(matches!(TagVectors::from_bytes(b"W2V 1 1\n"), Err(T2VError::MalformedHeader(_))));
}

// Written by an external tool: struct.pack('<d', v).hex() for each value.
const FOREIGN_T2V: &str = include_str!("data/foreign.t2v");

#[test]
fn reads_independently_written_file() {
    let tv = TagVectors::from_bytes(FOREIGN_T2V.as_bytes()).unwrap();
    assert_eq!(tv.stems(), ["dunk", "hoop", "nba"]);
    assert_eq!(tv.vector("dunk").unwrap(), [0.1, -2.5]);
    assert_eq!(tv.vector("hoop").unwrap(), [1e-300, f64::MAX]);
    assert_eq!(tv.vector("nba").unwrap(), [-0.0, 1.0 / 3.0]);
    assert_eq!(tv.to_bytes(), FOREIGN_T2V.as_bytes());
}
