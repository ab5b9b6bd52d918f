//! Keyword table retrieval.
//!
//! A pointwise learning-to-rank model over a documented baseline feature set
//! (query length, table shape, Dirichlet-smoothed lexical field scores) plus
//! eight semantic matching features: early fusion (centroid cosine) and
//! late fusion (max/sum/avg over pairwise cosines) for both the word-level
//! and entity-level table embeddings.

mod forest;

pub use forest::{ForestParams, RandomForest};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    extract_sequence, tokenize_words, CollectionStats, EntityId, FieldStats, TableRecord, Variant,
};
use crate::embedding::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::kb::KnowledgeBase;
use crate::rank::{RankedList, Run};

/// A keyword query with its word terms and any linked entities.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub query_id: String,
    pub raw: String,
    pub words: Vec<String>,
    pub entities: Vec<EntityId>,
}

impl Query {
    /// Tokenizes the query like corpus words and links entities via the
    /// optional linker. Errors when no word terms survive tokenization.
    pub fn parse(
        query_id: impl Into<String>,
        text: &str,
        stopwords: &HashSet<String>,
        linker: Option<&EntityLinker>,
    ) -> Result<Query> {
        let query_id = query_id.into();
        let words = tokenize_words(text, stopwords);
        if words.is_empty() {
            return Err(Error::Invalid(format!(
                "query {query_id:?} has no word terms after tokenization"
            )));
        }
        let entities = linker.map_or_else(Vec::new, |l| l.link(text));
        Ok(Query {
            query_id,
            raw: text.to_string(),
            words,
            entities,
        })
    }
}

/// Exact-match lookup of query n-grams against knowledge-base entity labels.
/// The label of an entity id is the id lowercased with underscores read as
/// spaces.
pub struct EntityLinker {
    labels: HashMap<String, EntityId>,
}

/// Longest n-gram length tried during query entity linking.
const MAX_LINK_NGRAM: usize = 5;

impl EntityLinker {
    pub fn new(kb: &KnowledgeBase) -> EntityLinker {
        let mut labels: HashMap<String, EntityId> = HashMap::new();
        for e in kb.known_entities() {
            let label = e.as_str().to_lowercase().replace('_', " ");
            // Label collisions keep the lexicographically smallest id.
            match labels.entry(label) {
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(e.clone());
                }
                std::collections::hash_map::Entry::Occupied(mut slot) => {
                    if e < slot.get() {
                        slot.insert(e.clone());
                    }
                }
            }
        }
        EntityLinker { labels }
    }

    /// All entities whose label matches a contiguous n-gram of the text,
    /// longest n-grams first, deduplicated.
    pub fn link(&self, text: &str) -> Vec<EntityId> {
        let lowered = text.to_lowercase();
        let tokens: Vec<&str> = lowered.split_whitespace().collect();
        let mut found: Vec<EntityId> = Vec::new();
        for n in (1..=MAX_LINK_NGRAM.min(tokens.len())).rev() {
            for window in tokens.windows(n) {
                let phrase = window.join(" ");
                if let Some(e) = self.labels.get(&phrase) {
                    if !found.contains(e) {
                        found.push(e.clone());
                    }
                }
            }
        }
        found
    }
}

/// How pairwise cosines are combined in late fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    Max,
    Sum,
    Avg,
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Aggregator> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Aggregator::Max),
            "sum" => Ok(Aggregator::Sum),
            "avg" => Ok(Aggregator::Avg),
            other => Err(Error::Config(format!("unknown aggregator {other:?}"))),
        }
    }
}

/// Cosine between the centroid of the query vectors and the centroid of the
/// table vectors; 0 when either side has no vectors.
pub fn early_fusion(q_vectors: &[&[f64]], t_vectors: &[&[f64]]) -> f64 {
    let (q, t) = match (centroid(q_vectors), centroid(t_vectors)) {
        (Some(q), Some(t)) => (q, t),
        _ => return 0.0,
    };
    cosine(&q, &t).unwrap_or(0.0)
}

fn centroid(vectors: &[&[f64]]) -> Option<Vec<f64>> {
    let first = vectors.first()?;
    let mut sum = vec![0.0; first.len()];
    for v in vectors {
        debug_assert_eq!(v.len(), sum.len());
        for (s, x) in sum.iter_mut().zip(*v) {
            *s += x;
        }
    }
    for s in &mut sum {
        *s /= vectors.len() as f64;
    }
    Some(sum)
}

/// Aggregates all pairwise query-term x table-term cosines; 0 on an empty
/// pair set.
pub fn late_fusion(q_vectors: &[&[f64]], t_vectors: &[&[f64]], agg: Aggregator) -> f64 {
    if q_vectors.is_empty() || t_vectors.is_empty() {
        return 0.0;
    }
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    let mut count = 0usize;
    for q in q_vectors {
        for t in t_vectors {
            let c = cosine(q, t).unwrap_or(0.0);
            max = max.max(c);
            sum += c;
            count += 1;
        }
    }
    match agg {
        Aggregator::Max => max,
        Aggregator::Sum => sum,
        Aggregator::Avg => sum / count as f64,
    }
}

/// Names of the feature slots, in vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "query_terms",
    "table_rows",
    "table_cols",
    "table_entity_mentions",
    "lm_page_title",
    "lm_caption",
    "lm_headings",
    "lm_body",
    "early_words",
    "late_max_words",
    "late_sum_words",
    "late_avg_words",
    "early_entities",
    "late_max_entities",
    "late_sum_entities",
    "late_avg_entities",
];

pub const FEATURE_COUNT: usize = 16;

/// Fixed-arity feature vector for one (query, table) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: [f64; FEATURE_COUNT],
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }
}

/// Corpus-level inputs for feature extraction.
pub struct FeatureContext<'a> {
    pub collection: &'a CollectionStats,
    pub stopwords: &'a HashSet<String>,
    /// Dirichlet smoothing parameter of the lexical field scores.
    pub mu: f64,
}

pub const DIRICHLET_MU: f64 = 2000.0;

/// Query log-likelihood under a Dirichlet-smoothed field language model.
/// Query terms unseen in the whole collection field are skipped so the score
/// stays finite.
fn dirichlet_loglik(
    query_words: &[String],
    field_tokens: &[String],
    stats: &FieldStats,
    mu: f64,
) -> f64 {
    let mut tf: HashMap<&str, f64> = HashMap::new();
    for tok in field_tokens {
        *tf.entry(tok.as_str()).or_insert(0.0) += 1.0;
    }
    let len = field_tokens.len() as f64;
    let mut score = 0.0;
    for w in query_words {
        let pc = stats.probability(w);
        if pc == 0.0 {
            continue;
        }
        let t = tf.get(w.as_str()).copied().unwrap_or(0.0);
        score += ((t + mu * pc) / (len + mu)).ln();
    }
    score
}

fn matrix_vectors(terms: impl Iterator<Item = String>, m: &EmbeddingMatrix) -> Vec<&[f64]> {
    terms.filter_map(|t| m.vector(&t)).collect()
}

/// Fills every baseline and semantic feature slot for one (query, table)
/// pair. Embedding matrices may be absent, in which case the corresponding
/// semantic features are 0 — as are features whose side has no
/// in-vocabulary terms.
pub fn extract_features(
    q: &Query,
    t: &TableRecord,
    m_words: Option<&EmbeddingMatrix>,
    m_entities: Option<&EmbeddingMatrix>,
    ctx: &FeatureContext,
) -> FeatureVector {
    let mut values = [0.0f64; FEATURE_COUNT];
    values[0] = q.words.len() as f64;
    values[1] = t.rows.len() as f64;
    values[2] = t.headings.len() as f64;
    values[3] = t
        .rows
        .iter()
        .flatten()
        .map(|cell| cell.entities.len())
        .sum::<usize>() as f64;

    let page_title = tokenize_words(&t.page_title, ctx.stopwords);
    let caption = tokenize_words(&t.caption, ctx.stopwords);
    let headings: Vec<String> = t
        .headings
        .iter()
        .flat_map(|h| tokenize_words(h, ctx.stopwords))
        .collect();
    let body: Vec<String> = t
        .rows
        .iter()
        .flatten()
        .flat_map(|cell| tokenize_words(&cell.raw_text, ctx.stopwords))
        .collect();
    values[4] = dirichlet_loglik(&q.words, &page_title, &ctx.collection.page_title, ctx.mu);
    values[5] = dirichlet_loglik(&q.words, &caption, &ctx.collection.caption, ctx.mu);
    values[6] = dirichlet_loglik(&q.words, &headings, &ctx.collection.headings, ctx.mu);
    values[7] = dirichlet_loglik(&q.words, &body, &ctx.collection.body, ctx.mu);

    if let Some(m) = m_words {
        let qv = matrix_vectors(q.words.iter().cloned(), m);
        let table_words = extract_sequence(t, Variant::Words)
            .expect("word extraction cannot fail")
            .map(|seq| seq.tokens)
            .unwrap_or_default();
        let tv = matrix_vectors(table_words.into_iter(), m);
        values[8] = early_fusion(&qv, &tv);
        values[9] = late_fusion(&qv, &tv, Aggregator::Max);
        values[10] = late_fusion(&qv, &tv, Aggregator::Sum);
        values[11] = late_fusion(&qv, &tv, Aggregator::Avg);
    }
    if let Some(m) = m_entities {
        let qv = matrix_vectors(q.entities.iter().map(|e| e.as_str().to_string()), m);
        let table_entities = extract_sequence(t, Variant::Entities)
            .expect("entity extraction cannot fail")
            .map(|seq| seq.tokens)
            .unwrap_or_default();
        let tv = matrix_vectors(table_entities.into_iter(), m);
        values[12] = early_fusion(&qv, &tv);
        values[13] = late_fusion(&qv, &tv, Aggregator::Max);
        values[14] = late_fusion(&qv, &tv, Aggregator::Sum);
        values[15] = late_fusion(&qv, &tv, Aggregator::Avg);
    }

    FeatureVector { values }
}

/// One judged (query, table) pair with its extracted features.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub query_id: String,
    pub table_id: String,
    pub features: FeatureVector,
    pub grade: f64,
}

/// Cross-validated pointwise ranking: folds are partitioned by query, each
/// fold's pairs are scored by a forest trained on the other folds, and
/// per-query ranked lists are assembled from the held-out scores.
///
/// Fold assignment is a seeded shuffle of the sorted query ids, so permuting
/// the input pair order never changes the result.
pub fn train_and_rank(
    pairs: &[LabeledPair],
    folds: usize,
    seed: u64,
    params: &ForestParams,
) -> Result<Run> {
    if pairs.is_empty() {
        return Err(Error::Invalid("no labeled pairs".into()));
    }
    if folds < 2 {
        return Err(Error::Config("cross-validation needs >= 2 folds".into()));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        (&pairs[a].query_id, &pairs[a].table_id).cmp(&(&pairs[b].query_id, &pairs[b].table_id))
    });

    let mut queries: Vec<&str> = pairs.iter().map(|p| p.query_id.as_str()).collect();
    queries.sort_unstable();
    queries.dedup();
    let folds = folds.min(queries.len());
    if folds < 2 {
        return Err(Error::Invalid(
            "cross-validation needs at least 2 distinct queries".into(),
        ));
    }

    let mut shuffled = queries.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let fold_of: HashMap<&str, usize> = shuffled
        .iter()
        .enumerate()
        .map(|(pos, q)| (*q, pos % folds))
        .collect();

    let mut run = Run::new();
    for fold in 0..folds {
        let train_idx: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| fold_of[pairs[i].query_id.as_str()] != fold)
            .collect();
        let test_idx: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| fold_of[pairs[i].query_id.as_str()] == fold)
            .collect();
        if test_idx.is_empty() {
            continue;
        }
        let train_queries: HashSet<&str> =
            train_idx.iter().map(|&i| pairs[i].query_id.as_str()).collect();
        if test_idx
            .iter()
            .any(|&i| train_queries.contains(pairs[i].query_id.as_str()))
        {
            return Err(Error::Internal(
                "query appears in both train and test of a fold".into(),
            ));
        }

        let x: Vec<Vec<f64>> = train_idx
            .iter()
            .map(|&i| pairs[i].features.values().to_vec())
            .collect();
        let y: Vec<f64> = train_idx.iter().map(|&i| pairs[i].grade).collect();
        let fold_params = ForestParams {
            seed: seed
                .wrapping_add(0xD1B5_4A32_D192_ED03u64.wrapping_mul(fold as u64 + 1)),
            ..params.clone()
        };
        let forest = RandomForest::fit(&x, &y, &fold_params)?;

        let mut per_query: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
        for &i in &test_idx {
            let p = &pairs[i];
            per_query
                .entry(p.query_id.as_str())
                .or_default()
                .push((p.table_id.clone(), forest.predict(p.features.values())));
        }
        for (query_id, scores) in per_query {
            if run
                .insert(query_id.to_string(), RankedList::from_scores(scores))
                .is_some()
            {
                return Err(Error::Internal(format!(
                    "query {query_id:?} scored in two folds"
                )));
            }
        }
    }
    Ok(run)
}
