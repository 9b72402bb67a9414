//! Hash-tag suggestion for short videos.
//!
//! The pipeline learns a vector space of hash-tag stems from tag
//! co-occurrence ([`tag2vec`]), encodes each video's low-level descriptors
//! as a Fisher vector under a diagonal GMM ([`gmm`], [`fisher`]), learns a
//! nonlinear map from Fisher space into the tag space ([`crossmodal`]) and
//! suggests the tags nearest to a projected video ([`suggest`]). Survey
//! marks collected on those suggestions are summarized by [`evalstats`].

pub mod corpus;
pub mod crossmodal;
pub mod descriptors;
pub mod evalstats;
pub mod fisher;
pub mod gmm;
pub mod io;
pub mod linalg;
pub mod porter;
pub mod suggest;
pub mod synth;
pub mod tag2vec;

pub use corpus::{build_corpus, normalize_tag, Corpus, DestemMap, TagRecord, Vocabulary};
pub use crossmodal::{loss_and_grad, nearest_class_accuracy, train_embedding, EmbeddingNet, NetConfig, TrainPair};
pub use descriptors::DescriptorSet;
pub use evalstats::{aggregate_relevance, RelevanceMark, RelevanceReport};
pub use fisher::{encode_fisher, FisherVector, Normalization};
pub use gmm::{fit_gmm, EmConfig, GmmModel};
pub use linalg::Matrix;
pub use suggest::{suggest_tags, SuggestConfig, Suggestion};
pub use tag2vec::{train_tag2vec, Metric, Query, T2VConfig, TagVectors};
