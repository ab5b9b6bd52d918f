use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{EntityId, TableSummary};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::population::SeedTable;

/// Which population task a benchmark case belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationMode {
    Row,
    Column,
}

impl fmt::Display for PopulationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PopulationMode::Row => "row",
            PopulationMode::Column => "column",
        })
    }
}

impl FromStr for PopulationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<PopulationMode> {
        match s.to_ascii_lowercase().as_str() {
            "row" => Ok(PopulationMode::Row),
            "column" | "col" => Ok(PopulationMode::Column),
            other => Err(Error::Config(format!("unknown population mode {other:?}"))),
        }
    }
}

/// One benchmark case: a seed table carved out of a corpus table.
#[derive(Debug, Clone)]
pub struct PopulationCase {
    pub case_id: String,
    pub table_id: String,
    pub mode: PopulationMode,
    /// Number of seed rows (row mode) or seed columns (column mode) taken.
    pub seed_size: usize,
    pub seed: SeedTable,
}

/// Cases plus their binary ground truth.
#[derive(Debug, Clone)]
pub struct PopulationProtocol {
    pub cases: Vec<PopulationCase>,
    pub qrels: Qrels,
    /// Tables excluded for being below the size threshold.
    pub excluded_tables: u64,
}

/// Number of seed rows tried per table in row mode (`i in 1..=5`).
pub const ROW_SEED_SIZES: usize = 5;
/// Number of seed columns tried per table in column mode (`j in 1..=3`).
pub const COLUMN_SEED_SIZES: usize = 3;

const MIN_ROWS: usize = 6;
const MIN_COLS: usize = 4;

fn dedup_preserving_order<T: Clone + Eq + std::hash::Hash>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for item in items {
        if seen.insert(item.clone()) {
            out.push(item);
        }
    }
    out
}

/// Builds benchmark cases from qualifying tables (at least 6 rows and 4
/// columns; smaller tables are excluded and counted).
///
/// Row mode emits one case per seed size `i in 1..=5`: the core-column
/// entities of the first `i` rows become seeds, the remaining core-column
/// entities (deduplicated, seeds removed) become the binary ground truth.
/// Column mode does the same over headings with `j in 1..=3`. Cases with an
/// empty seed or empty ground truth are not emitted.
pub fn make_population_cases(
    tables: &[TableSummary],
    mode: PopulationMode,
) -> Result<PopulationProtocol> {
    let mut cases = Vec::new();
    let mut qrels = Qrels::new();
    let mut excluded = 0u64;

    for table in tables {
        if table.n_rows < MIN_ROWS || table.n_cols < MIN_COLS {
            excluded += 1;
            continue;
        }
        match mode {
            PopulationMode::Row => {
                for i in 1..=ROW_SEED_SIZES {
                    let seeds: Vec<EntityId> = dedup_preserving_order(
                        table.core_cells.iter().take(i).flatten().cloned(),
                    );
                    if seeds.is_empty() {
                        continue;
                    }
                    let seed_set: HashSet<&EntityId> = seeds.iter().collect();
                    let truth: Vec<EntityId> = dedup_preserving_order(
                        table
                            .core_cells
                            .iter()
                            .skip(i)
                            .flatten()
                            .filter(|e| !seed_set.contains(e))
                            .cloned(),
                    );
                    if truth.is_empty() {
                        continue;
                    }
                    let case_id = format!("{}-i{i}", table.table_id);
                    for e in &truth {
                        qrels.insert(case_id.clone(), e.as_str(), 1);
                    }
                    cases.push(PopulationCase {
                        case_id,
                        table_id: table.table_id.clone(),
                        mode,
                        seed_size: i,
                        seed: SeedTable::new(seeds, Vec::new())?,
                    });
                }
            }
            PopulationMode::Column => {
                for j in 1..=COLUMN_SEED_SIZES {
                    let seeds: Vec<String> =
                        dedup_preserving_order(table.headings.iter().take(j).cloned());
                    if seeds.is_empty() {
                        continue;
                    }
                    let seed_set: HashSet<&String> = seeds.iter().collect();
                    let truth: Vec<String> = dedup_preserving_order(
                        table
                            .headings
                            .iter()
                            .skip(j)
                            .filter(|h| !seed_set.contains(h))
                            .cloned(),
                    );
                    if truth.is_empty() {
                        continue;
                    }
                    let case_id = format!("{}-j{j}", table.table_id);
                    for h in &truth {
                        qrels.insert(case_id.clone(), h.clone(), 1);
                    }
                    cases.push(PopulationCase {
                        case_id,
                        table_id: table.table_id.clone(),
                        mode,
                        seed_size: j,
                        seed: SeedTable::new(Vec::new(), seeds)?,
                    });
                }
            }
        }
    }

    Ok(PopulationProtocol {
        cases,
        qrels,
        excluded_tables: excluded,
    })
}
