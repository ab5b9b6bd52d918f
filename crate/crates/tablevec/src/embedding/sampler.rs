use rand::Rng;

use crate::embedding::Vocabulary;
use crate::error::{Error, Result};

/// Noise distribution for negative sampling, stored as a cumulative
/// distribution over term ids. `P(term) ∝ count(term)^power`.
#[derive(Debug, Clone)]
pub struct SamplerTable {
    cdf: Vec<f64>,
}

impl SamplerTable {
    pub fn new(vocab: &Vocabulary, power: f64) -> Result<SamplerTable> {
        if vocab.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let weights: Vec<f64> = (0..vocab.len())
            .map(|id| (vocab.count(id) as f64).powf(power))
            .collect();
        let total: f64 = weights.iter().sum();
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cdf.push(acc);
        }
        // Pin the tail so a draw of u -> 1.0 can never fall off the table.
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(SamplerTable { cdf })
    }

    pub fn len(&self) -> usize {
        self.cdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cdf.is_empty()
    }

    /// Probability mass assigned to `id`.
    pub fn probability(&self, id: usize) -> f64 {
        if id == 0 {
            self.cdf[0]
        } else {
            self.cdf[id] - self.cdf[id - 1]
        }
    }

    /// Draws one term id.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn vocab_with_counts(counts: &[(&str, u64)]) -> Vocabulary {
        let map: HashMap<String, u64> =
            counts.iter().map(|(t, c)| (t.to_string(), *c)).collect();
        Vocabulary::from_counts(map, 1)
    }

    #[test]
    fn uniform_counts_power_one() {
        let v = vocab_with_counts(&[("a", 1), ("b", 1)]);
        let s = SamplerTable::new(&v, 1.0).unwrap();
        assert!((s.probability(0) - 0.5).abs() < 1e-12);
        assert!((s.probability(1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn skewed_counts_power_three_quarters() {
        // counts (8, 1), power 0.75: 8^0.75 / (8^0.75 + 1).
        let v = vocab_with_counts(&[("big", 8), ("small", 1)]);
        let s = SamplerTable::new(&v, 0.75).unwrap();
        let expected = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        let id_big = v.id("big").unwrap();
        assert!((s.probability(id_big) - expected).abs() < 1e-12);
        assert!((s.probability(1 - id_big) - (1.0 - expected)).abs() < 1e-12);
        assert!((expected - 0.82629).abs() < 5e-5);
    }

    #[test]
    fn single_term_table() {
        let v = vocab_with_counts(&[("only", 4)]);
        let s = SamplerTable::new(&v, 0.75).unwrap();
        assert!((s.probability(0) - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(s.sample(&mut rng), 0);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let v = vocab_with_counts(&[("a", 3), ("b", 14), ("c", 1), ("d", 159)]);
        let s = SamplerTable::new(&v, 0.75).unwrap();
        let sum: f64 = (0..v.len()).map(|id| s.probability(id)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!((0..v.len()).all(|id| s.probability(id) > 0.0));
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let v = Vocabulary::from_counts(HashMap::new(), 1);
        assert!(SamplerTable::new(&v, 0.75).is_err());
    }
}
