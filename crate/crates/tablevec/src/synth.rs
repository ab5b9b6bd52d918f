//! Synthetic benchmark corpus with planted co-occurrence structure.
//!
//! Entities are split into groups; each table's core column samples one
//! group (with a little cross-group contamination) so entity embeddings can
//! discover the groups from co-occurrence alone. The generated knowledge
//! base carries a deliberately noisy version of the same structure, which
//! makes it a weaker signal than the embeddings. Queries and graded
//! judgments over the tables exercise the retrieval path end to end.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Cell, EntityId, TableRecord};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::kb::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthParams {
    pub n_tables: usize,
    pub n_groups: usize,
    pub group_size: usize,
    pub rows_per_table: usize,
    pub n_queries: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> SynthParams {
        SynthParams {
            n_tables: 200,
            n_groups: 10,
            group_size: 20,
            rows_per_table: 8,
            n_queries: 12,
            seed: 42,
        }
    }
}

/// Everything the generator produces, in memory.
pub struct SynthData {
    pub tables: Vec<TableRecord>,
    pub outlinks: Vec<(EntityId, EntityId)>,
    pub relations: Vec<(EntityId, String)>,
    /// `(query_id, text)` pairs.
    pub queries: Vec<(String, String)>,
    pub qrels: Qrels,
}

/// Paths written by [`SynthData::write_to`].
pub struct SynthFiles {
    pub corpus: PathBuf,
    pub outlinks: PathBuf,
    pub relations: PathBuf,
    pub queries: PathBuf,
    pub qrels: PathBuf,
}

fn entity_name(group: usize, member: usize) -> EntityId {
    EntityId::new(format!("G{group:02}_member_{member:02}")).expect("non-empty")
}

fn hub_name(group: usize) -> EntityId {
    EntityId::new(format!("Hub_{group:02}")).expect("non-empty")
}

/// Generates the corpus, knowledge base and retrieval benchmark. Fully
/// deterministic for a given parameter set.
pub fn generate(params: &SynthParams) -> SynthData {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n_entities = params.n_groups * params.group_size;

    // Heading pools: a shared lead column plus six group-flavoured labels.
    let heading_pool: Vec<Vec<String>> = (0..params.n_groups)
        .map(|g| (0..6).map(|j| format!("attr{g:02}_{j}")).collect())
        .collect();

    let mut tables = Vec::with_capacity(params.n_tables);
    for t in 0..params.n_tables {
        let group = t % params.n_groups;

        // Core column: rows-1 entities of the table's group plus one foreign
        // entity, so candidate pools reach beyond a single group.
        let mut members: Vec<usize> = (0..params.group_size).collect();
        members.shuffle(&mut rng);
        let mut core: Vec<EntityId> = members
            .iter()
            .take(params.rows_per_table - 1)
            .map(|&k| entity_name(group, k))
            .collect();
        let foreign_group = (group + 1 + rng.gen_range(0..params.n_groups - 1)) % params.n_groups;
        core.push(entity_name(foreign_group, rng.gen_range(0..params.group_size)));
        core.shuffle(&mut rng);

        let mut headings = vec!["name".to_string()];
        let mut pool = heading_pool[group].clone();
        pool.shuffle(&mut rng);
        headings.extend(pool.into_iter().take(3));

        let rows: Vec<Vec<Cell>> = core
            .iter()
            .map(|e| {
                vec![
                    Cell::new(e.as_str().replace('_', " "), vec![e.clone()]),
                    Cell::new(format!("detail{}", rng.gen_range(0..50)), vec![]),
                    Cell::new(format!("theme{group:02} note{}", rng.gen_range(0..20)), vec![]),
                    Cell::new(format!("misc{}", rng.gen_range(0..100)), vec![]),
                ]
            })
            .collect();

        tables.push(TableRecord {
            table_id: format!("table-{t:03}"),
            page_title: format!("Theme{group:02} catalogue {t:03}"),
            section_title: format!("Series {}", t % 4),
            caption: format!("theme{group:02} listing"),
            headings,
            rows,
            core_column: None,
        });
    }

    // Knowledge base: each entity links to its group hub, a shared hub, and
    // two random hubs; relations carry the group type with 30% label noise.
    let mut outlinks = Vec::new();
    let mut relations = Vec::new();
    for g in 0..params.n_groups {
        for k in 0..params.group_size {
            let e = entity_name(g, k);
            let mut targets: BTreeSet<EntityId> = BTreeSet::new();
            targets.insert(hub_name(g));
            targets.insert(EntityId::new("Hub_common").expect("non-empty"));
            while targets.len() < 4 {
                targets.insert(hub_name(rng.gen_range(0..params.n_groups)));
            }
            for target in targets {
                outlinks.push((e.clone(), target));
            }

            let claimed_group = if rng.gen::<f64>() < 0.7 {
                g
            } else {
                rng.gen_range(0..params.n_groups)
            };
            relations.push((e.clone(), format!("type|Group{claimed_group:02}")));
            relations.push((e.clone(), format!("origin|Src{}", rng.gen_range(0..6))));
        }
    }
    debug_assert_eq!(relations.len(), 2 * n_entities);

    // Retrieval benchmark: every query targets one theme; same-theme tables
    // are highly relevant, next-theme tables marginally, a few others judged
    // non-relevant.
    let mut queries = Vec::new();
    let mut qrels = Qrels::new();
    for q in 0..params.n_queries {
        let group = q % params.n_groups;
        let query_id = format!("q{q:02}");
        queries.push((
            query_id.clone(),
            format!("theme{group:02} catalogue records"),
        ));
        for (t, table) in tables.iter().enumerate() {
            let table_group = t % params.n_groups;
            if table_group == group {
                qrels.insert(query_id.clone(), table.table_id.clone(), 2);
            } else if table_group == (group + 1) % params.n_groups {
                qrels.insert(query_id.clone(), table.table_id.clone(), 1);
            } else if t % 7 == q % 7 {
                qrels.insert(query_id.clone(), table.table_id.clone(), 0);
            }
        }
    }

    SynthData {
        tables,
        outlinks,
        relations,
        queries,
        qrels,
    }
}

impl SynthData {
    /// Builds the knowledge base in memory (same contents as the TSV files).
    pub fn kb(&self) -> Result<KnowledgeBase> {
        let mut outlinks: HashMap<EntityId, BTreeSet<EntityId>> = HashMap::new();
        let mut entities: BTreeSet<EntityId> = BTreeSet::new();
        for (source, target) in &self.outlinks {
            entities.insert(source.clone());
            entities.insert(target.clone());
            outlinks.entry(source.clone()).or_default().insert(target.clone());
        }
        let mut relations: HashMap<EntityId, BTreeSet<String>> = HashMap::new();
        for (source, key) in &self.relations {
            entities.insert(source.clone());
            relations.entry(source.clone()).or_default().insert(key.clone());
        }
        KnowledgeBase::from_parts(outlinks, relations, entities.len())
    }

    /// Writes the five benchmark files into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<SynthFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = SynthFiles {
            corpus: dir.join("corpus.jsonl"),
            outlinks: dir.join("kb_outlinks.tsv"),
            relations: dir.join("kb_relations.tsv"),
            queries: dir.join("queries.tsv"),
            qrels: dir.join("qrels.tsv"),
        };

        write_jsonl(&files.corpus, &self.tables)?;
        write_tsv_pairs(
            &files.outlinks,
            self.outlinks.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        )?;
        write_tsv_pairs(
            &files.relations,
            self.relations.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        )?;
        write_tsv_pairs(
            &files.queries,
            self.queries.iter().map(|(a, b)| (a.as_str(), b.as_str())),
        )?;
        self.qrels.save(&files.qrels, &["synthetic benchmark".to_string()])?;
        Ok(files)
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| Error::parse(path, 0, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_tsv_pairs<'a>(
    path: &Path,
    pairs: impl Iterator<Item = (&'a str, &'a str)>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (a, b) in pairs {
        writeln!(w, "{a}\t{b}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::detect_core_column;

    #[test]
    fn generation_is_deterministic() {
        let params = SynthParams::default();
        let a = generate(&params);
        let b = generate(&params);
        assert_eq!(a.tables, b.tables);
        assert_eq!(a.outlinks, b.outlinks);
        assert_eq!(a.qrels, b.qrels);
    }

    #[test]
    fn tables_meet_protocol_thresholds() {
        let data = generate(&SynthParams::default());
        assert_eq!(data.tables.len(), 200);
        for t in &data.tables {
            assert!(t.rows.len() >= 6);
            assert!(t.headings.len() >= 4);
            assert_eq!(detect_core_column(t), 0);
        }
    }

    #[test]
    fn kb_covers_all_entities() {
        let data = generate(&SynthParams::default());
        let kb = data.kb().unwrap();
        for t in &data.tables {
            for cell in t.rows.iter().flatten() {
                for e in &cell.entities {
                    assert!(kb.outlinks(e).is_some(), "missing outlinks for {e}");
                    assert!(kb.relations(e).is_some(), "missing relations for {e}");
                }
            }
        }
    }

    #[test]
    fn files_round_trip_through_the_parsers() {
        let data = generate(&SynthParams {
            n_tables: 20,
            ..SynthParams::default()
        });
        let dir = tempfile::tempdir().unwrap();
        let files = data.write_to(dir.path()).unwrap();

        let records: Vec<TableRecord> = crate::corpus::parse_corpus(&files.corpus)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(records, data.tables);

        let kb = crate::kb::load_kb(&files.outlinks, &files.relations).unwrap();
        assert_eq!(kb.skipped_lines(), 0);

        let qrels = Qrels::load(&files.qrels).unwrap();
        assert_eq!(qrels, data.qrels);
    }
}
