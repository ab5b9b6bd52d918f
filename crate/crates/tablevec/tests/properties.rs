//! Property tests for the crate-wide invariants, plus the seeded fuzz loops
//! for the knowledge-base scorers.

use std::collections::{BTreeSet, HashMap, HashSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tablevec::corpus::{
    default_stopwords, detect_core_column, extract_sequence, tokenize_words, Cell, EntityId,
    TableRecord, Variant,
};
use tablevec::embedding::{build_vocab, EmbeddingMatrix, SamplerTable, Vocabulary};
use tablevec::eval::{average_precision, ndcg_at_k, reciprocal_rank};
use tablevec::kb::{candidate_entities, jaccard_outlinks, relation_sim, wlm, KnowledgeBase};
use tablevec::population::mix_scores;
use tablevec::rank::RankedList;

fn entity(s: &str) -> EntityId {
    EntityId::new(s).unwrap()
}

// --- strategies -------------------------------------------------------------

fn arb_cell() -> impl Strategy<Value = Cell> {
    (
        "[a-z0-9< >/]{0,8}",
        prop::collection::vec("[A-Z][a-z_]{0,4}", 0..3),
    )
        .prop_map(|(text, entities)| {
            Cell::new(
                text,
                entities.into_iter().filter_map(EntityId::new).collect(),
            )
        })
}

fn arb_record() -> impl Strategy<Value = TableRecord> {
    (1usize..5)
        .prop_flat_map(|width| {
            (
                "[a-z]{1,8}",
                "[a-zA-Z0-9 .<>-]{0,12}",
                prop::collection::vec("[a-zA-Z ]{0,6}", width..=width),
                prop::collection::vec(
                    prop::collection::vec(arb_cell(), width..=width),
                    0..5,
                ),
                prop::option::of(0..width),
            )
        })
        .prop_map(|(id, title, headings, rows, core_column)| TableRecord {
            table_id: id,
            page_title: title.clone(),
            section_title: String::new(),
            caption: title,
            headings,
            rows,
            core_column,
        })
}

// --- corpus invariants -------------------------------------------------------

proptest! {
    #[test]
    fn tokenizer_output_is_clean(s in ".{0,60}") {
        let stop = default_stopwords();
        for tok in tokenize_words(&s, stop) {
            prop_assert!(!tok.is_empty());
            prop_assert!(!tok.chars().any(|c| c.is_uppercase()), "uppercase in {tok:?}");
            prop_assert!(!tok.chars().all(|c| c.is_numeric()), "number {tok:?}");
            prop_assert!(!stop.contains(&tok), "stopword {tok:?}");
        }
    }

    #[test]
    fn record_round_trip_is_identity(record in arb_record()) {
        let json = serde_json::to_string(&record).unwrap();
        let back: TableRecord = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, record);
    }

    #[test]
    fn heading_sequence_length_matches(record in arb_record()) {
        let seq = extract_sequence(&record, Variant::Headings).unwrap();
        match seq {
            Some(seq) => prop_assert_eq!(seq.tokens.len(), record.headings.len()),
            None => prop_assert!(record.headings.is_empty()),
        }
    }

    #[test]
    fn core_sequence_is_subsequence_of_entity_sequence(record in arb_record()) {
        let mut record = record;
        record.core_column = Some(detect_core_column(&record));
        let all = extract_sequence(&record, Variant::Entities)
            .unwrap()
            .map(|s| s.tokens)
            .unwrap_or_default();
        let core = extract_sequence(&record, Variant::CoreEntities)
            .unwrap()
            .map(|s| s.tokens)
            .unwrap_or_default();
        // Subsequence scan.
        let mut it = all.iter();
        for want in &core {
            prop_assert!(
                it.any(|tok| tok == want),
                "core token {want:?} missing in order from {all:?}"
            );
        }
    }
}

// --- sampler and vector store invariants -------------------------------------

proptest! {
    #[test]
    fn sampler_distribution_is_normalized(counts in prop::collection::vec(1u64..500, 1..40)) {
        let map: HashMap<String, u64> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (format!("t{i:02}"), c))
            .collect();
        let vocab = Vocabulary::from_counts(map, 1);
        let sampler = SamplerTable::new(&vocab, 0.75).unwrap();
        let sum: f64 = (0..vocab.len()).map(|id| sampler.probability(id)).sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!((0..vocab.len()).all(|id| sampler.probability(id) > 0.0));
    }

    #[test]
    fn vector_file_round_trip(values in prop::collection::vec(-10.0f64..10.0, 6)) {
        let counts: HashMap<String, u64> =
            [("aa", 2u64), ("bb", 1)].map(|(t, c)| (t.to_string(), c)).into();
        let mut m = EmbeddingMatrix::zeroed(Vocabulary::from_counts(counts, 1), 3);
        m.input_vector_mut(0).copy_from_slice(&values[..3]);
        m.input_vector_mut(1).copy_from_slice(&values[3..]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.tsv");
        tablevec::embedding::save_vectors(&m, &path).unwrap();
        let back = tablevec::embedding::load_vectors(&path).unwrap();
        for term in ["aa", "bb"] {
            for (x, y) in m.vector(term).unwrap().iter().zip(back.vector(term).unwrap()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}

/// Explicit softmax of the model's output-vector scores over a small
/// vocabulary; used as an oracle only, training never materializes it.
#[test]
fn softmax_oracle_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let v = 50;
    let dim = 16;
    let counts: HashMap<String, u64> = (0..v).map(|i| (format!("t{i:02}"), 1)).collect();
    let mut m = EmbeddingMatrix::zeroed(Vocabulary::from_counts(counts, 1), dim);
    for id in 0..v {
        for k in 0..dim {
            m.input_vector_mut(id)[k] = rng.gen_range(-1.0..1.0);
            m.output_vector_mut(id)[k] = rng.gen_range(-1.0..1.0);
        }
    }
    for center in 0..v {
        let vc = m.input_vector(center).to_vec();
        let scores: Vec<f64> = (0..v)
            .map(|o| {
                m.output_vector(o)
                    .iter()
                    .zip(&vc)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let total: f64 = scores.iter().map(|s| (s - max).exp() / z).sum();
        assert!((total - 1.0).abs() < 1e-9, "center {center}: {total}");
    }
}

// --- knowledge-base scorer fuzz ----------------------------------------------

fn random_kb(rng: &mut ChaCha8Rng, n_entities: usize) -> (KnowledgeBase, Vec<EntityId>) {
    let ids: Vec<EntityId> = (0..n_entities).map(|i| entity(&format!("e{i:02}"))).collect();
    let mut outlinks: HashMap<EntityId, BTreeSet<EntityId>> = HashMap::new();
    let mut relations: HashMap<EntityId, BTreeSet<String>> = HashMap::new();
    for e in &ids {
        let n_links = rng.gen_range(0..8);
        let links: BTreeSet<EntityId> = (0..n_links)
            .map(|_| ids[rng.gen_range(0..n_entities)].clone())
            .collect();
        if !links.is_empty() {
            outlinks.insert(e.clone(), links);
        }
        let n_rel = rng.gen_range(0..5);
        let rels: BTreeSet<String> = (0..n_rel)
            .map(|_| format!("r{}", rng.gen_range(0..10)))
            .collect();
        if !rels.is_empty() {
            relations.insert(e.clone(), rels);
        }
    }
    let kb = KnowledgeBase::from_parts(outlinks, relations, n_entities).unwrap();
    (kb, ids)
}

#[test]
fn kb_scorers_fuzz_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for round in 0..10 {
        let (kb, ids) = random_kb(&mut rng, 30);
        for _ in 0..1000 {
            let a = &ids[rng.gen_range(0..ids.len())];
            let b = &ids[rng.gen_range(0..ids.len())];
            let w_ab = wlm(a, b, &kb);
            let w_ba = wlm(b, a, &kb);
            assert!((w_ab - w_ba).abs() < 1e-12, "wlm not symmetric (round {round})");
            assert!((0.0..=1.0).contains(&w_ab), "wlm out of range: {w_ab}");

            let j_ab = jaccard_outlinks(a, b, &kb);
            let j_ba = jaccard_outlinks(b, a, &kb);
            assert_eq!(j_ab, j_ba, "jaccard not symmetric");
            assert!((0.0..=1.0).contains(&j_ab));

            let seeds: Vec<EntityId> = (0..rng.gen_range(1..4))
                .map(|_| ids[rng.gen_range(0..ids.len())].clone())
                .collect();
            let r = relation_sim(a, &seeds, &kb);
            assert!((0.0..=1.0).contains(&r), "relation_sim out of range: {r}");
        }
    }
}

#[test]
fn wlm_self_similarity_is_one_with_outlinks() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (kb, ids) = random_kb(&mut rng, 40);
    for e in &ids {
        if kb.outlinks(e).is_some_and(|l| !l.is_empty()) {
            assert!((wlm(e, e, &kb) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn candidates_never_contain_seeds() {
    use tablevec::corpus::{CollectionStats, CorpusIndex, TableSummary};
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (kb, ids) = random_kb(&mut rng, 30);
    let tables: Vec<TableSummary> = (0..25)
        .map(|t| {
            let core: Vec<Vec<EntityId>> = (0..6)
                .map(|_| vec![ids[rng.gen_range(0..ids.len())].clone()])
                .collect();
            TableSummary {
                table_id: format!("t{t}"),
                headings: vec!["a".into(), "b".into(), "c".into(), "d".into()],
                n_rows: core.len(),
                n_cols: 4,
                n_entity_mentions: core.len(),
                core_cells: core,
            }
        })
        .collect();
    let index = CorpusIndex::from_summaries(tables, CollectionStats::default());
    for _ in 0..200 {
        let n_seeds = rng.gen_range(1..4);
        let seeds: Vec<EntityId> = (0..n_seeds)
            .map(|_| ids[rng.gen_range(0..ids.len())].clone())
            .collect();
        let candidates = candidate_entities(&seeds, &index, &kb, 1000);
        for c in candidates.entities() {
            assert!(!seeds.contains(c), "seed {c} leaked into candidates");
        }
    }
}

// --- ranking and metric invariants --------------------------------------------

proptest! {
    /// Metrics depend only on rank order, not on the score values.
    #[test]
    fn metrics_ignore_score_magnitudes(
        n in 3usize..25,
        relevant_mask in prop::collection::vec(prop::bool::ANY, 25),
        scale in 0.5f64..100.0,
    ) {
        let items: Vec<String> = (0..n).map(|i| format!("d{i:02}")).collect();
        let linear = RankedList::from_scores(
            items.iter().enumerate().map(|(i, it)| (it.clone(), (n - i) as f64)),
        );
        let warped = RankedList::from_scores(
            items.iter().enumerate().map(|(i, it)| (it.clone(), ((n - i) as f64 * scale).exp())),
        );
        let relevant: HashSet<String> = items
            .iter()
            .zip(&relevant_mask)
            .filter(|(_, &keep)| keep)
            .map(|(it, _)| it.clone())
            .collect();
        prop_assume!(!relevant.is_empty());
        let grades: HashMap<String, u32> =
            items.iter().map(|it| (it.clone(), u32::from(relevant.contains(it)))).collect();

        prop_assert_eq!(
            average_precision(&linear, &relevant),
            average_precision(&warped, &relevant)
        );
        prop_assert_eq!(
            reciprocal_rank(&linear, &relevant),
            reciprocal_rank(&warped, &relevant)
        );
        prop_assert_eq!(ndcg_at_k(&linear, &grades, 10), ndcg_at_k(&warped, &grades, 10));
    }

    /// Raising one candidate's embedding component with the base component
    /// fixed never pushes that candidate down.
    #[test]
    fn mixture_is_monotone_per_candidate(
        base in prop::collection::vec(0.0f64..1.0, 5..15),
        emb in prop::collection::vec(0.0f64..1.0, 5..15),
        bump in 0.01f64..1.0,
        alpha in 0.0f64..=1.0,
        pick in 0usize..15,
    ) {
        let n = base.len().min(emb.len());
        let base = &base[..n];
        let emb = &emb[..n];
        let pick = pick % n;
        let items: Vec<String> = (0..n).map(|i| format!("c{i:02}")).collect();

        let before = mix_scores(&items, base.to_vec(), emb.to_vec(), alpha).unwrap();
        let mut bumped = emb.to_vec();
        bumped[pick] += bump;
        let after = mix_scores(&items, base.to_vec(), bumped, alpha).unwrap();

        let rank_of = |l: &RankedList| {
            l.ranked_items().position(|it| it == items[pick]).unwrap()
        };
        prop_assert!(rank_of(&after) <= rank_of(&before));
    }

    /// Serialization of a ranked list is a pure function of its inputs.
    #[test]
    fn ranked_list_serialization_is_deterministic(
        scores in prop::collection::vec((0u32..50, -100i32..100), 1..30),
    ) {
        let pairs: Vec<(String, f64)> = scores
            .iter()
            .map(|(id, s)| (format!("i{id:02}"), *s as f64 / 7.0))
            .collect();
        let a = RankedList::from_scores(pairs.clone());
        let mut reversed = pairs.clone();
        reversed.reverse();
        let b = RankedList::from_scores(reversed);
        prop_assert_eq!(a, b);
    }
}

// --- vocabulary invariants -----------------------------------------------------

proptest! {
    #[test]
    fn vocabulary_respects_min_count(
        tokens in prop::collection::vec("[a-e]", 0..60),
        min_count in 1u64..4,
    ) {
        let seq = tablevec::corpus::TermSequence {
            variant: Variant::Words,
            table_id: "t".into(),
            tokens: tokens.clone(),
        };
        let vocab = build_vocab([&seq], min_count);
        let mut raw: HashMap<&str, u64> = HashMap::new();
        for tok in &tokens {
            *raw.entry(tok).or_insert(0) += 1;
        }
        let expected_total: u64 = raw.values().filter(|&&c| c >= min_count).sum();
        prop_assert_eq!(vocab.total_terms(), expected_total);
        for id in 0..vocab.len() {
            prop_assert!(vocab.count(id) >= min_count);
            prop_assert_eq!(vocab.id(vocab.term(id)), Some(id));
        }
    }
}
