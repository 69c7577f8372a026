//! Retrieval, generalization, scoring and evaluation of two-fact reasoning
//! chains that explain question/answer pairs.

pub mod dataset;
pub mod delex;
pub mod error;
pub mod hypothesis;
pub mod index;
pub mod metrics;
pub mod records;
pub mod retrieval;
pub mod scoring;
pub mod text;

pub use error::{Error, Result};
