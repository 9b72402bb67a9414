//! Survey service: hands each annotator the precomputed suggestions for one
//! video at a time, records their relevance marks in an append-only log and
//! serves the aggregate report.

pub mod http;
pub mod store;

pub use http::{router, serve, AppState};
pub use store::{build_store, MarkOutcome, StoreError, StoreVideo, SurveyStore};
