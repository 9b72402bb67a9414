//! Synthetic stand-ins for scraped tags and precomputed video descriptors.
//!
//! Each class owns a group of related hash-tags whose first entry is the
//! class word. Tag records draw several tags from one group; descriptor sets
//! are Gaussian draws around class-specific prototypes mixed with shared
//! background prototypes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tag, TagRecord};
use crate::descriptors::DescriptorSet;
use crate::linalg::Matrix;

const NAMED_GROUPS: &[[&str; 8]] = &[
    ["basketball", "dunk", "nba", "hoops", "ballislife", "layup", "court", "rebound"],
    ["billiards", "pool", "cue", "snooker", "eightball", "trickshot", "felt", "pocket"],
    ["pushups", "workout", "gym", "fitness", "armday", "reps", "sweat", "gains"],
    ["salsa", "dance", "latin", "bachata", "partner", "rhythm", "spin", "merengue"],
    ["yoyo", "string", "throw", "kendama", "tricks", "spinner", "loop", "walkthedog"],
    ["volleyball", "spike", "beach", "serve", "setter", "block", "dig", "net"],
    ["surfing", "wave", "ocean", "board", "barrel", "swell", "wetsuit", "paddle"],
    ["juggling", "clubs", "circus", "balls", "juggler", "cascade", "toss", "siteswap"],
    ["skateboarding", "kickflip", "skatepark", "ollie", "grind", "deck", "halfpipe", "skater"],
    ["cooking", "recipe", "kitchen", "chef", "foodie", "dinner", "baking", "yummy"],
];

/// Tags belonging to one class; `tags[0]` is the class word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagGroup {
    pub tags: Vec<String>,
}

impl TagGroup {
    pub fn class_surface(&self) -> &str {
        &self.tags[0]
    }

    pub fn class_stem(&self) -> String {
        normalize_tag(&self.tags[0]).expect("class words are non-empty").stem
    }
}

/// Deterministic tag groups for `classes` classes. The first ten use real
/// words; later ones use digit-bearing tokens that bypass stemming.
pub fn class_groups(classes: usize) -> Vec<TagGroup> {
    (0..classes)
        .map(|c| match NAMED_GROUPS.get(c) {
            Some(g) => TagGroup { tags: g.iter().map(|s| s.to_string()).collect() },
            None => TagGroup { tags: (0..8).map(|j| format!("cls{c}tag{j}")).collect() },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthTagsConfig {
    pub classes: usize,
    pub sentences: usize,
    pub tags_per_sentence: usize,
    /// Chance that a tag is written with a leading '#' and capitalized,
    /// exercising normalization.
    pub decorate_prob: f64,
    pub seed: u64,
}

impl Default for SynthTagsConfig {
    fn default() -> Self {
        SynthTagsConfig { classes: 5, sentences: 2000, tags_per_sentence: 4, decorate_prob: 0.25, seed: 1 }
    }
}

fn decorate(tag: &str) -> String {
    let mut chars = tag.chars();
    match chars.next() {
        Some(first) => format!("#{}{}", first.to_ascii_uppercase(), chars.as_str()),
        None => String::new(),
    }
}

/// Records whose tags are distinct draws from one uniformly chosen group.
pub fn synth_tag_records(cfg: &SynthTagsConfig) -> Vec<TagRecord> {
    let groups = class_groups(cfg.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let per = cfg.tags_per_sentence.min(8);
    (0..cfg.sentences)
        .map(|i| {
            let g = &groups[rng.gen_range(0..groups.len())];
            let raw_tags = g
                .tags
                .choose_multiple(&mut rng, per)
                .map(|t| if rng.gen::<f64>() < cfg.decorate_prob { decorate(t) } else { t.clone() })
                .collect();
            TagRecord { video_id: format!("s{i:06}"), raw_tags }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthDescriptorConfig {
    pub classes: usize,
    pub per_class: usize,
    /// Descriptors per video.
    pub n: usize,
    pub d: usize,
    pub prototypes_per_class: usize,
    pub background_prototypes: usize,
    /// Fraction of each video's descriptors drawn from background prototypes.
    pub background_frac: f64,
    pub prototype_spread: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthDescriptorConfig {
    fn default() -> Self {
        SynthDescriptorConfig {
            classes: 5,
            per_class: 20,
            n: 200,
            d: 16,
            prototypes_per_class: 2,
            background_prototypes: 3,
            background_frac: 0.3,
            prototype_spread: 2.0,
            noise: 1.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub descriptors: DescriptorSet,
    pub class_stem: String,
}

fn draw_prototypes(count: usize, d: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, spread).expect("positive spread");
    (0..count).map(|_| (0..d).map(|_| normal.sample(rng)).collect()).collect()
}

/// Videos ordered by class then index; ids are `v<class>_<index>`.
pub fn synth_descriptors(cfg: &SynthDescriptorConfig) -> Vec<SynthVideo> {
    let groups = class_groups(cfg.classes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let background = draw_prototypes(cfg.background_prototypes, cfg.d, cfg.prototype_spread, &mut rng);
    let class_protos: Vec<Vec<Vec<f64>>> = (0..cfg.classes)
        .map(|_| draw_prototypes(cfg.prototypes_per_class.max(1), cfg.d, cfg.prototype_spread, &mut rng))
        .collect();
    let noise = Normal::new(0.0, cfg.noise).expect("positive noise");

    let mut out = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (c, group) in groups.iter().enumerate() {
        let class_stem = group.class_stem();
        for v in 0..cfg.per_class {
            let mut data = Vec::with_capacity(cfg.n * cfg.d);
            for _ in 0..cfg.n {
                let from_bg = !background.is_empty() && rng.gen::<f64>() < cfg.background_frac;
                let proto = if from_bg {
                    &background[rng.gen_range(0..background.len())]
                } else {
                    &class_protos[c][rng.gen_range(0..class_protos[c].len())]
                };
                // stored on disk as f32, so generate f32-exact values
                data.extend(proto.iter().map(|m| (m + noise.sample(&mut rng)) as f32 as f64));
            }
            let id = format!("v{c:02}_{v:04}");
            let descriptors = DescriptorSet::new(id, Matrix::from_vec(cfg.n, cfg.d, data))
                .expect("synthetic descriptors are finite and non-empty");
            out.push(SynthVideo { descriptors, class_stem: class_stem.clone() });
        }
    }
    out
}
