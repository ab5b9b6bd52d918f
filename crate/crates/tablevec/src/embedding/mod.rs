//! Skip-gram embeddings with negative sampling.
//!
//! Training maximizes the average log probability of context terms around
//! each center term, with the softmax replaced by the usual
//! negative-sampling surrogate: one logistic term for the observed context
//! plus `negatives` logistic terms for draws from a unigram^power noise
//! distribution. Input vectors are the embeddings proper; output vectors are
//! the context-side parameters.

mod io;
mod matrix;
mod sampler;
mod sgns;
mod train;
mod vocab;

pub use io::{load_vectors, save_vectors, save_vectors_with_header};
pub use matrix::{cosine, EmbeddingMatrix};
pub use sampler::SamplerTable;
pub use sgns::{sgns_loss, sgns_step};
pub use train::{train, train_with_vocab, TrainingConfig};
pub use vocab::{build_vocab, Vocabulary};
