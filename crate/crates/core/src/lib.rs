//! Neural pseudo relevance feedback (NPRF) for ad-hoc retrieval.
//!
//! A first-stage BM25 ranking supplies feedback documents; a neural
//! relevance model (DRMM or K-NRM) scores each candidate against every
//! feedback document, and the gated scores are combined into the final
//! ranking. The crate also covers indexing, training with cross-validation
//! and TREC-style evaluation.

pub mod config;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod feedback;
pub mod first_stage;
pub mod nirm;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
