//! Web usage mining engine at desk scale.
//!
//! The pipeline: generate or ingest enriched pageview data in the fixed CSV
//! wire format ([`ingest`]), aggregate pageviews into enriched sessions and
//! build task feature matrices ([`enrich`]), train and evaluate from-scratch
//! learners ([`learn`], [`eval`]), and run per-server Isolation Forest
//! anomaly detection on page load times ([`iforest`]). The [`farmsim`]
//! generator stands in for the real portal's proprietary data with planted,
//! testable signal.
//!
//! Everything is deterministic for a fixed seed, independent of thread
//! count; see [`seed`].

pub mod enrich;
pub mod error;
pub mod eval;
pub mod farmsim;
pub mod fingerprint;
pub mod iforest;
pub mod ingest;
pub mod learn;
pub mod matrix;
pub mod seed;
pub mod timefmt;
pub mod types;
pub mod viz;

pub use error::{Error, Result};
pub use matrix::{ColumnKind, FeatureMatrix};
pub use types::{PageviewRecord, Service, SessionRecord};
