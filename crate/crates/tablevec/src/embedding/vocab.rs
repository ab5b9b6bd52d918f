use std::cmp::Reverse;
use std::collections::HashMap;

use crate::corpus::TermSequence;

/// Term/id maps with occurrence counts.
///
/// Ids are dense in `[0, len)` and assigned deterministically: descending
/// count, ties broken by ascending term. `total_terms` sums the raw counts of
/// the retained terms only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    term_to_id: HashMap<String, usize>,
    terms: Vec<String>,
    counts: Vec<u64>,
    total_terms: u64,
    min_count: u64,
}

impl Vocabulary {
    /// Builds a vocabulary from raw term counts, dropping terms below
    /// `min_count`.
    pub fn from_counts(counts: HashMap<String, u64>, min_count: u64) -> Vocabulary {
        let mut retained: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(_, c)| *c >= min_count)
            .collect();
        retained.sort_by(|a, b| Reverse(a.1).cmp(&Reverse(b.1)).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Vocabulary {
            term_to_id: HashMap::with_capacity(retained.len()),
            terms: Vec::with_capacity(retained.len()),
            counts: Vec::with_capacity(retained.len()),
            total_terms: 0,
            min_count,
        };
        for (term, count) in retained {
            vocab.term_to_id.insert(term.clone(), vocab.terms.len());
            vocab.terms.push(term);
            vocab.counts.push(count);
            vocab.total_terms += count;
        }
        vocab
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.term_to_id.get(term).copied()
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_terms(&self) -> u64 {
        self.total_terms
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

/// Counts every token in the sequences and keeps terms occurring at least
/// `min_count` times. An empty stream yields an empty (still valid) vocabulary.
pub fn build_vocab<'a, I>(sequences: I, min_count: u64) -> Vocabulary
where
    I: IntoIterator<Item = &'a TermSequence>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for seq in sequences {
        for tok in &seq.tokens {
            *counts.entry(tok.clone()).or_insert(0) += 1;
        }
    }
    Vocabulary::from_counts(counts, min_count)
}
