//! Embeddings for relational tables, and the tasks they serve.
//!
//! This crate trains skip-gram embeddings over four views of a table corpus
//! (words, headings, all entities, core-column entities) and uses them for
//! three tasks: row population, column population, and keyword table
//! retrieval. It also ships the knowledge-base similarity baselines those
//! tasks are mixed with, a TREC-style evaluation toolkit (MAP, MRR, NDCG,
//! paired t-tests), and the benchmark protocol generators.

pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod kb;
pub mod population;
pub mod rank;
pub mod retrieval;
pub mod synth;

pub use error::{Error, Result};
