//! Row and column population.
//!
//! Candidates are scored by a linear mixture
//! `alpha * P_base + (1 - alpha) * P_emb`, where the base component comes
//! from the knowledge base (rows) or corpus co-occurrence (columns) and the
//! embedding component is a mean cosine against the seeds. Cosines are
//! rescaled to `[0, 1]` via `(x + 1) / 2` and both components are min-max
//! normalized over the candidate set before mixing, so `alpha` weighs
//! comparable quantities; rankings at the endpoints `alpha = 1` / `alpha = 0`
//! reproduce the pure component orders.

use std::collections::{HashMap, HashSet};

use crate::corpus::{CorpusIndex, EntityId};
use crate::embedding::{cosine, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::kb::{self, KnowledgeBase};
use crate::rank::RankedList;

/// The partial table to be populated: its core-column entities and headings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedTable {
    entities: Vec<EntityId>,
    headings: Vec<String>,
}

impl SeedTable {
    /// Errors on duplicate seed entities or duplicate seed headings.
    pub fn new(entities: Vec<EntityId>, headings: Vec<String>) -> Result<SeedTable> {
        let unique_e: HashSet<&EntityId> = entities.iter().collect();
        if unique_e.len() != entities.len() {
            return Err(Error::Invalid("duplicate seed entities".into()));
        }
        let unique_h: HashSet<&String> = headings.iter().collect();
        if unique_h.len() != headings.len() {
            return Err(Error::Invalid("duplicate seed headings".into()));
        }
        Ok(SeedTable { entities, headings })
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn headings(&self) -> &[String] {
        &self.headings
    }
}

/// Which knowledge-base scorer backs the base component of row population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbMethod {
    /// Mean Jaccard of RDF relation keys against the seeds.
    Relations,
    /// Wikipedia Link-based Measure, averaged over the seeds.
    Wlm,
    /// Jaccard of outgoing links, averaged over the seeds.
    Jaccard,
}

impl std::str::FromStr for KbMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<KbMethod> {
        match s.to_ascii_lowercase().as_str() {
            "relations" => Ok(KbMethod::Relations),
            "wlm" => Ok(KbMethod::Wlm),
            "jaccard" => Ok(KbMethod::Jaccard),
            other => Err(Error::Config(format!("unknown kb method {other:?}"))),
        }
    }
}

/// Mean cosine between a candidate entity and the seed entities; terms
/// missing from the vocabulary contribute cosine 0.
pub fn entity_sim(e: &EntityId, seeds: &[EntityId], m: &EmbeddingMatrix) -> f64 {
    mean_cosine(m.vector(e.as_str()), seeds.iter().map(|s| m.vector(s.as_str())))
}

/// Mean cosine between a candidate heading and the seed headings, matched
/// verbatim (`"year:"` and `"year"` are different terms).
pub fn heading_sim(l: &str, seeds: &[String], m_h: &EmbeddingMatrix) -> f64 {
    mean_cosine(m_h.vector(l), seeds.iter().map(|s| m_h.vector(s)))
}

fn mean_cosine<'a, I>(candidate: Option<&[f64]>, seeds: I) -> f64
where
    I: ExactSizeIterator<Item = Option<&'a [f64]>>,
{
    let n = seeds.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = match candidate {
        None => 0.0,
        Some(cv) => seeds
            .map(|sv| sv.map_or(0.0, |sv| cosine(cv, sv).unwrap_or(0.0)))
            .sum(),
    };
    sum / n as f64
}

/// Base knowledge-base similarity of one candidate against the seed set.
pub fn kb_score(e: &EntityId, seeds: &[EntityId], method: KbMethod, kb: &KnowledgeBase) -> f64 {
    match method {
        KbMethod::Relations => kb::relation_sim(e, seeds, kb),
        KbMethod::Wlm => {
            if seeds.is_empty() {
                return 0.0;
            }
            seeds.iter().map(|s| kb::wlm(e, s, kb)).sum::<f64>() / seeds.len() as f64
        }
        KbMethod::Jaccard => {
            if seeds.is_empty() {
                return 0.0;
            }
            seeds.iter().map(|s| kb::jaccard_outlinks(e, s, kb)).sum::<f64>()
                / seeds.len() as f64
        }
    }
}

/// Maps values onto `[0, 1]` by min-max; a constant column maps to 0.5
/// (monotone where it matters, so endpoint rankings are preserved).
fn min_max_normalize(values: &mut [f64]) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max - min > 0.0 {
        for v in values.iter_mut() {
            *v = (*v - min) / (max - min);
        }
    } else {
        values.iter_mut().for_each(|v| *v = 0.5);
    }
}

/// Mixes pre-computed base and embedding component scores over one candidate
/// set: both are min-max normalized, then combined as
/// `alpha * base + (1 - alpha) * emb`.
pub fn mix_scores(
    items: &[String],
    mut base: Vec<f64>,
    mut emb: Vec<f64>,
    alpha: f64,
) -> Result<RankedList> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    if items.len() != base.len() || items.len() != emb.len() {
        return Err(Error::Internal("component length mismatch".into()));
    }
    min_max_normalize(&mut base);
    min_max_normalize(&mut emb);
    Ok(RankedList::from_scores(items.iter().enumerate().map(
        |(i, item)| (item.clone(), alpha * base[i] + (1.0 - alpha) * emb[i]),
    )))
}

/// Ranks candidate entities for row population.
pub fn score_rows(
    candidates: &[EntityId],
    seeds: &[EntityId],
    method: KbMethod,
    kb: &KnowledgeBase,
    m: &EmbeddingMatrix,
    alpha: f64,
) -> Result<RankedList> {
    let items: Vec<String> = candidates.iter().map(|e| e.as_str().to_string()).collect();
    let base: Vec<f64> = candidates
        .iter()
        .map(|e| kb_score(e, seeds, method, kb))
        .collect();
    let emb: Vec<f64> = candidates
        .iter()
        .map(|e| (entity_sim(e, seeds, m) + 1.0) / 2.0)
        .collect();
    mix_scores(&items, base, emb, alpha)
}

/// Corpus baseline for column population: retrieves the `k` tables sharing
/// the most seed headings (ties prefer rarer matched headings, then table
/// id), weighs each by its match count, and normalizes heading weights into a
/// distribution over all headings seen in those tables minus the seeds.
pub fn baseline_heading_distribution(
    seeds: &[String],
    index: &CorpusIndex,
    k: usize,
) -> HashMap<String, f64> {
    let seed_set: HashSet<&str> = seeds.iter().map(String::as_str).collect();

    let mut table_ids: HashSet<usize> = HashSet::new();
    for l in seeds {
        table_ids.extend(index.tables_with_heading(l));
    }

    struct Relevant {
        idx: usize,
        matches: u64,
        rarest: u64,
    }
    let mut relevant: Vec<Relevant> = table_ids
        .into_iter()
        .map(|idx| {
            let table = &index.tables()[idx];
            let headings: HashSet<&str> = table.headings.iter().map(String::as_str).collect();
            let matched: Vec<&str> = headings
                .iter()
                .copied()
                .filter(|h| seed_set.contains(h))
                .collect();
            let rarest = matched
                .iter()
                .map(|h| index.heading_frequency(h))
                .min()
                .unwrap_or(u64::MAX);
            Relevant {
                idx,
                matches: matched.len() as u64,
                rarest,
            }
        })
        .collect();
    relevant.sort_by(|a, b| {
        b.matches
            .cmp(&a.matches)
            .then_with(|| a.rarest.cmp(&b.rarest))
            .then_with(|| {
                index.tables()[a.idx]
                    .table_id
                    .cmp(&index.tables()[b.idx].table_id)
            })
    });
    relevant.truncate(k);

    let mut weights: HashMap<String, f64> = HashMap::new();
    for r in &relevant {
        let table = &index.tables()[r.idx];
        let unique: HashSet<&str> = table.headings.iter().map(String::as_str).collect();
        for h in unique {
            if !seed_set.contains(h) {
                *weights.entry(h.to_string()).or_insert(0.0) += r.matches as f64;
            }
        }
    }
    let total: f64 = weights.values().sum();
    if total > 0.0 {
        for w in weights.values_mut() {
            *w /= total;
        }
    }
    weights
}

/// Probability of one candidate heading under the corpus baseline.
pub fn baseline_heading_prob(l: &str, seeds: &[String], index: &CorpusIndex, k: usize) -> f64 {
    baseline_heading_distribution(seeds, index, k)
        .get(l)
        .copied()
        .unwrap_or(0.0)
}

/// Number of embedding nearest neighbours added to the column candidate pool.
const HEADING_NEIGHBOURS: usize = 100;

/// Ranks candidate headings for column population. Candidates are the corpus
/// baseline candidates plus the vocabulary headings nearest to the seed
/// centroid, so corpus-unseen but semantically close headings can surface.
pub fn score_columns(
    seeds: &[String],
    index: &CorpusIndex,
    m_h: &EmbeddingMatrix,
    alpha: f64,
    k: usize,
) -> Result<RankedList> {
    let distribution = baseline_heading_distribution(seeds, index, k);
    let seed_set: HashSet<&str> = seeds.iter().map(String::as_str).collect();

    let mut candidates: HashSet<String> = distribution.keys().cloned().collect();
    candidates.extend(
        nearest_headings(seeds, m_h, HEADING_NEIGHBOURS)
            .into_iter()
            .filter(|h| !seed_set.contains(h.as_str())),
    );

    let mut items: Vec<String> = candidates.into_iter().collect();
    items.sort();
    let base: Vec<f64> = items
        .iter()
        .map(|l| distribution.get(l).copied().unwrap_or(0.0))
        .collect();
    let emb: Vec<f64> = items
        .iter()
        .map(|l| (heading_sim(l, seeds, m_h) + 1.0) / 2.0)
        .collect();
    mix_scores(&items, base, emb, alpha)
}

/// The `n` vocabulary terms whose vectors lie closest (by cosine) to the
/// centroid of the in-vocabulary seed headings.
fn nearest_headings(seeds: &[String], m_h: &EmbeddingMatrix, n: usize) -> Vec<String> {
    let dim = m_h.dim();
    let mut centroid = vec![0.0; dim];
    let mut found = 0usize;
    for s in seeds {
        if let Some(v) = m_h.vector(s) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x;
            }
            found += 1;
        }
    }
    if found == 0 {
        return Vec::new();
    }
    for c in &mut centroid {
        *c /= found as f64;
    }
    let mut scored: Vec<(String, f64)> = m_h
        .vocab()
        .terms()
        .filter(|t| !seeds.iter().any(|s| s == t))
        .map(|t| {
            let sim = cosine(&centroid, m_h.vector(t).expect("vocab term")).unwrap_or(0.0);
            (t.to_string(), sim)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(n);
    scored.into_iter().map(|(t, _)| t).collect()
}

/// Result of an interpolation-parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCurve {
    pub best_alpha: f64,
    /// `(alpha, mean metric)` points in grid order.
    pub points: Vec<(f64, f64)>,
}

/// Sweeps `alpha` over `{0, step, 2*step, ..., 1}` and returns the value
/// maximizing the mean metric (lowest alpha on ties) plus the full curve.
///
/// `score` ranks one case at a given alpha; `metric` evaluates the ranking
/// (`None` skips the case, e.g. when it has no relevant items).
pub fn grid_search_alpha<C>(
    cases: &[C],
    mut score: impl FnMut(&C, f64) -> Result<RankedList>,
    mut metric: impl FnMut(&C, &RankedList) -> Option<f64>,
    step: f64,
) -> Result<AlphaCurve> {
    if cases.is_empty() {
        return Err(Error::Invalid("grid search needs at least one case".into()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Config(format!("bad grid step {step}")));
    }
    let n_steps = (1.0 / step).round() as usize;
    let mut points = Vec::with_capacity(n_steps + 1);
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=n_steps {
        // Snap accumulated grid points (3 * 0.1 = 0.30000000000000004) back
        // onto round values.
        let alpha = ((i as f64 * step * 1e9).round() / 1e9).min(1.0);
        let mut sum = 0.0;
        let mut counted = 0usize;
        for case in cases {
            let ranking = score(case, alpha)?;
            if let Some(value) = metric(case, &ranking) {
                sum += value;
                counted += 1;
            }
        }
        let mean = if counted > 0 { sum / counted as f64 } else { 0.0 };
        points.push((alpha, mean));
        match best {
            Some((_, best_mean)) if mean <= best_mean => {}
            _ => best = Some((alpha, mean)),
        }
    }
    let (best_alpha, _) = best.expect("at least one grid point");
    Ok(AlphaCurve { best_alpha, points })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::corpus::{CollectionStats, TableSummary};
    use crate::embedding::Vocabulary;

    fn entity(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    /// Matrix with fixed vectors per term.
    fn matrix_of(vectors: &[(&str, Vec<f64>)]) -> EmbeddingMatrix {
        let dim = vectors[0].1.len();
        let counts = vectors
            .iter()
            .map(|(t, _)| (t.to_string(), 1u64))
            .collect();
        let vocab = Vocabulary::from_counts(counts, 1);
        let mut m = EmbeddingMatrix::zeroed(vocab, dim);
        for (term, v) in vectors {
            let id = m.vocab().id(term).unwrap();
            m.input_vector_mut(id).copy_from_slice(v);
        }
        m
    }

    #[test]
    fn entity_sim_identity_and_oov() {
        let m = matrix_of(&[("e", vec![1.0, 0.0]), ("s", vec![1.0, 0.0])]);
        let seeds = vec![entity("s")];
        assert!((entity_sim(&entity("e"), &seeds, &m) - 1.0).abs() < 1e-12);
        assert_eq!(entity_sim(&entity("missing"), &seeds, &m), 0.0);
    }

    #[test]
    fn entity_sim_averages_cosines() {
        // cos(e, s1) = 1, cos(e, s2) = 0 -> 0.5; then a 0.8/0.4 -> 0.6 case.
        let m = matrix_of(&[
            ("e", vec![1.0, 0.0]),
            ("s1", vec![1.0, 0.0]),
            ("s2", vec![0.0, 1.0]),
        ]);
        let got = entity_sim(&entity("e"), &[entity("s1"), entity("s2")], &m);
        assert!((got - 0.5).abs() < 1e-12);

        let a = 0.8f64;
        let b = 0.4f64;
        let m2 = matrix_of(&[
            ("e", vec![1.0, 0.0]),
            ("s1", vec![a, (1.0 - a * a).sqrt()]),
            ("s2", vec![b, (1.0 - b * b).sqrt()]),
        ]);
        let got2 = entity_sim(&entity("e"), &[entity("s1"), entity("s2")], &m2);
        assert!((got2 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mix_scores_hand_fixture() {
        // (P_base, P_emb) = (1,0), (0,1), (0.5,0.5) at alpha = 0.4
        // -> 0.4, 0.6, 0.5 -> order c2, c3, c1.
        let items = vec!["c1".to_string(), "c2".to_string(), "c3".to_string()];
        let list = mix_scores(&items, vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.5], 0.4).unwrap();
        let order: Vec<&str> = list.ranked_items().collect();
        assert_eq!(order, vec!["c2", "c3", "c1"]);
        assert!((list.items()[0].1 - 0.6).abs() < 1e-12);
        assert!((list.items()[1].1 - 0.5).abs() < 1e-12);
        assert!((list.items()[2].1 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn mix_rejects_bad_alpha() {
        let items = vec!["a".to_string()];
        assert!(matches!(
            mix_scores(&items, vec![1.0], vec![0.0], 1.5),
            Err(Error::AlphaOutOfRange(_))
        ));
        assert!(matches!(
            mix_scores(&items, vec![1.0], vec![0.0], -0.1),
            Err(Error::AlphaOutOfRange(_))
        ));
    }

    #[test]
    fn mixture_endpoints_reproduce_pure_orders() {
        let items: Vec<String> = (0..20).map(|i| format!("c{i:02}")).collect();
        let base: Vec<f64> = (0..20).map(|i| ((i * 7) % 13) as f64).collect();
        let emb: Vec<f64> = (0..20).map(|i| ((i * 5) % 11) as f64).collect();

        let pure_base = RankedList::from_scores(
            items.iter().cloned().zip(base.iter().copied()),
        );
        let pure_emb = RankedList::from_scores(
            items.iter().cloned().zip(emb.iter().copied()),
        );

        let at_one = mix_scores(&items, base.clone(), emb.clone(), 1.0).unwrap();
        let at_zero = mix_scores(&items, base, emb, 0.0).unwrap();

        let order = |l: &RankedList| l.ranked_items().map(str::to_string).collect::<Vec<_>>();
        assert_eq!(order(&at_one), order(&pure_base));
        assert_eq!(order(&at_zero), order(&pure_emb));
    }

    fn summary(table_id: &str, headings: &[&str]) -> TableSummary {
        TableSummary {
            table_id: table_id.to_string(),
            headings: headings.iter().map(|s| s.to_string()).collect(),
            core_cells: vec![],
            n_rows: 0,
            n_cols: headings.len(),
            n_entity_mentions: 0,
        }
    }

    fn index_of(tables: Vec<TableSummary>) -> CorpusIndex {
        CorpusIndex::from_summaries(tables, CollectionStats::default())
    }

    #[test]
    fn baseline_single_candidate_gets_full_mass() {
        let seeds = vec!["a".to_string(), "b".to_string()];
        let index = index_of(vec![summary("t1", &["a", "b", "kit"])]);
        assert!((baseline_heading_prob("kit", &seeds, &index, 256) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_counts_weighted_occurrences() {
        // h1 appears in both equally relevant tables, h2 in one: 2:1 mass.
        let seeds = vec!["s".to_string()];
        let index = index_of(vec![
            summary("t1", &["s", "h1", "h2"]),
            summary("t2", &["s", "h1"]),
        ]);
        let dist = baseline_heading_distribution(&seeds, &index, 256);
        let h1 = dist["h1"];
        let h2 = dist["h2"];
        assert!((h1 / h2 - 2.0).abs() < 1e-12);
        assert!((h1 + h2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_no_match_is_empty() {
        let seeds = vec!["nope".to_string()];
        let index = index_of(vec![summary("t1", &["a", "b"])]);
        assert!(baseline_heading_distribution(&seeds, &index, 256).is_empty());
        assert_eq!(baseline_heading_prob("a", &seeds, &index, 256), 0.0);
    }

    #[test]
    fn baseline_is_a_subdistribution() {
        let seeds = vec!["x".to_string(), "y".to_string()];
        let index = index_of(vec![
            summary("t1", &["x", "p", "q"]),
            summary("t2", &["y", "p"]),
            summary("t3", &["x", "y", "r"]),
        ]);
        let dist = baseline_heading_distribution(&seeds, &index, 256);
        let sum: f64 = dist.values().sum();
        assert!(dist.values().all(|&v| v >= 0.0));
        assert!(sum <= 1.0 + 1e-9);
    }

    #[test]
    fn heading_sim_identity_and_oov() {
        let m = matrix_of(&[("year", vec![1.0, 0.0]), ("month", vec![0.8, 0.6])]);
        let seeds = vec!["year".to_string()];
        assert!((heading_sim("year", &seeds, &m) - 1.0).abs() < 1e-12);
        // Verbatim matching: "year:" is a different term.
        assert_eq!(heading_sim("year:", &seeds, &m), 0.0);
    }

    #[test]
    fn heading_sim_averages() {
        // cosines 0.9 and 0.1 -> 0.5 mean.
        let a = 0.9f64;
        let b = 0.1f64;
        let m = matrix_of(&[
            ("l", vec![1.0, 0.0]),
            ("s1", vec![a, (1.0 - a * a).sqrt()]),
            ("s2", vec![b, (1.0 - b * b).sqrt()]),
        ]);
        let got = heading_sim("l", &["s1".to_string(), "s2".to_string()], &m);
        assert!((got - 0.5).abs() < 1e-12);
    }

    #[test]
    fn score_columns_tie_breaks_lexicographically() {
        // Two candidates with (base, emb) = (1,0) and (0,1) at alpha = 0.5:
        // exact tie, lexicographic order.
        let items = vec!["b-cand".to_string(), "a-cand".to_string()];
        let list = mix_scores(&items, vec![1.0, 0.0], vec![0.0, 1.0], 0.5).unwrap();
        let order: Vec<&str> = list.ranked_items().collect();
        assert_eq!(order, vec!["a-cand", "b-cand"]);
    }

    #[test]
    fn score_columns_pools_neighbours() {
        // "season" never co-occurs with the seeds in the corpus but sits next
        // to them in the embedding space, so it must enter the pool.
        let m = matrix_of(&[
            ("year", vec![1.0, 0.0]),
            ("season", vec![0.95, 0.3122]),
            ("club", vec![0.0, 1.0]),
        ]);
        let index = index_of(vec![summary("t1", &["year", "club"])]);
        let seeds = vec!["year".to_string()];
        let list = score_columns(&seeds, &index, &m, 0.5, 256).unwrap();
        let items: BTreeSet<&str> = list.ranked_items().collect();
        assert!(items.contains("season"));
        assert!(items.contains("club"));
        assert!(!items.contains("year"));
    }

    #[test]
    fn grid_search_prefers_lowest_alpha_on_ties() {
        // Identical components at every alpha -> flat curve -> alpha = 0.
        let cases = vec![()];
        let curve = grid_search_alpha(
            &cases,
            |_, alpha| {
                mix_scores(
                    &["a".to_string(), "b".to_string()],
                    vec![1.0, 0.0],
                    vec![1.0, 0.0],
                    alpha,
                )
            },
            |_, ranking| Some(if ranking.ranked_items().next() == Some("a") { 1.0 } else { 0.0 }),
            0.1,
        )
        .unwrap();
        assert_eq!(curve.best_alpha, 0.0);
        assert_eq!(curve.points.len(), 11);
        assert!(curve.points.iter().all(|&(_, v)| v == 1.0));
    }

    #[test]
    fn grid_search_finds_informative_component() {
        // Base scores are anti-correlated with relevance, embedding is
        // perfect: the argmax must be alpha = 0.
        let cases = vec![0usize, 1, 2];
        let items: Vec<String> = vec!["good".into(), "bad".into()];
        let curve = grid_search_alpha(
            &cases,
            |_, alpha| mix_scores(&items, vec![0.0, 1.0], vec![1.0, 0.0], alpha),
            |_, ranking| Some(if ranking.ranked_items().next() == Some("good") { 1.0 } else { 0.0 }),
            0.1,
        )
        .unwrap();
        assert_eq!(curve.best_alpha, 0.0);
        assert_eq!(curve.points[0].1, 1.0);
        assert_eq!(curve.points[10].1, 0.0);
    }
}
