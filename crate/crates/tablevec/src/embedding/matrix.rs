use crate::embedding::Vocabulary;
use crate::error::{Error, Result};

/// Paired input/output vector matrices over a vocabulary, both `V x dim`.
///
/// Input vectors are the embeddings handed to downstream tasks; output
/// vectors exist only as training-side parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    pub(crate) input: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeroed(vocab: Vocabulary, dim: usize) -> EmbeddingMatrix {
        let n = vocab.len() * dim;
        EmbeddingMatrix {
            vocab,
            dim,
            input: vec![0.0; n],
            output: vec![0.0; n],
        }
    }

    pub(crate) fn from_parts(
        vocab: Vocabulary,
        dim: usize,
        input: Vec<f64>,
        output: Vec<f64>,
    ) -> Result<EmbeddingMatrix> {
        let n = vocab.len() * dim;
        if input.len() != n || output.len() != n {
            return Err(Error::Internal(format!(
                "matrix shape mismatch: want {n}, got {} / {}",
                input.len(),
                output.len()
            )));
        }
        Ok(EmbeddingMatrix {
            vocab,
            dim,
            input,
            output,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_vector(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_vector(&self, id: usize) -> &[f64] {
        &self.output[id * self.dim..(id + 1) * self.dim]
    }

    pub fn input_vector_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn output_vector_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.output[id * self.dim..(id + 1) * self.dim]
    }

    /// Input vector of a term, `None` when out of vocabulary.
    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.vocab.id(term).map(|id| self.input_vector(id))
    }

    /// True when every entry of both matrices is finite.
    pub fn all_finite(&self) -> bool {
        self.input.iter().chain(self.output.iter()).all(|x| x.is_finite())
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Cosine similarity in `[-1, 1]`; zero when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}
