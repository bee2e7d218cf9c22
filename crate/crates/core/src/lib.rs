//! Nightly-price regression for short-term rental listings.
//!
//! The crate covers the whole batch flow: parsing InsideAirbnb-style
//! listing and review exports ([`ingest`]), review sentiment and
//! description TF-IDF features ([`textfeat`]), coordinate clustering and
//! neighbourhood statistics ([`geofeat`]), scaling/encoding into a dense
//! matrix ([`transform`]), ridge / gradient-boosted trees / MLP regressors
//! with grid search ([`models`]), and deterministic evaluation reports
//! ([`evalreport`]). [`synth`] generates datasets with a known price
//! function and [`pipeline`] wires the stages behind a JSON config.
//!
//! All targets and metrics are in natural-log price space.

pub mod error;
pub mod evalreport;
pub mod geofeat;
pub mod ingest;
pub mod models;
pub mod pipeline;
pub mod synth;
pub mod textfeat;
pub mod transform;

mod fmt;
pub mod matrix;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
