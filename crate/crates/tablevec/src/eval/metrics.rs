use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::rank::RankedList;

/// Rank depth at which average precision and reciprocal rank stop scanning.
pub const RANK_CUTOFF: usize = 1000;

/// Average precision over a binary relevant set, to rank [`RANK_CUTOFF`].
/// Returns `None` when there are no relevant items (the case is skipped).
pub fn average_precision(ranking: &RankedList, relevant: &HashSet<String>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, item) in ranking.ranked_items().take(RANK_CUTOFF).enumerate() {
        if relevant.contains(item) {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Some(sum / relevant.len() as f64)
}

/// Reciprocal rank of the first relevant item within [`RANK_CUTOFF`];
/// 0 when none is retrieved, `None` when the case has no relevant items.
pub fn reciprocal_rank(ranking: &RankedList, relevant: &HashSet<String>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    for (rank0, item) in ranking.ranked_items().take(RANK_CUTOFF).enumerate() {
        if relevant.contains(item) {
            return Some(1.0 / (rank0 + 1) as f64);
        }
    }
    Some(0.0)
}

/// NDCG at cutoff `k` with linear gain (the grade itself) and `1/log2(rank+1)`
/// discount, normalized by the ideal DCG over all judged grades. Returns
/// `None` when the ideal DCG is zero.
pub fn ndcg_at_k(ranking: &RankedList, grades: &HashMap<String, u32>, k: usize) -> Option<f64> {
    let discount = |rank0: usize| 1.0 / ((rank0 + 2) as f64).log2();
    let dcg: f64 = ranking
        .ranked_items()
        .take(k)
        .enumerate()
        .map(|(rank0, item)| {
            *grades.get(item).unwrap_or(&0) as f64 * discount(rank0)
        })
        .sum();

    let mut ideal: Vec<u32> = grades.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(rank0, &g)| g as f64 * discount(rank0))
        .sum();

    if idcg == 0.0 {
        return None;
    }
    Some(dcg / idcg)
}

/// The evaluation metrics this toolkit reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Mean average precision (per-case value is AP).
    Map,
    /// Mean reciprocal rank (per-case value is RR).
    Mrr,
    /// Normalized discounted cumulative gain at a cutoff.
    NdcgAt(usize),
}

impl Metric {
    /// Scores one case; `None` means the metric is undefined on it.
    pub fn evaluate(&self, ranking: &RankedList, judgments: &HashMap<String, u32>) -> Option<f64> {
        match self {
            Metric::Map => {
                let relevant: HashSet<String> = judgments
                    .iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(item, _)| item.clone())
                    .collect();
                average_precision(ranking, &relevant)
            }
            Metric::Mrr => {
                let relevant: HashSet<String> = judgments
                    .iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(item, _)| item.clone())
                    .collect();
                reciprocal_rank(ranking, &relevant)
            }
            Metric::NdcgAt(k) => ndcg_at_k(ranking, judgments, *k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Map => write!(f, "MAP"),
            Metric::Mrr => write!(f, "MRR"),
            Metric::NdcgAt(k) => write!(f, "NDCG@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Metric, Error> {
        match s.to_ascii_lowercase().as_str() {
            "map" => Ok(Metric::Map),
            "mrr" => Ok(Metric::Mrr),
            other => {
                if let Some(k) = other.strip_prefix("ndcg@").or_else(|| other.strip_prefix("ndcg")) {
                    let k: usize = k
                        .parse()
                        .map_err(|_| Error::Config(format!("bad metric {s:?}")))?;
                    Ok(Metric::NdcgAt(k))
                } else {
                    Err(Error::Config(format!("unknown metric {s:?}")))
                }
            }
        }
    }
}
