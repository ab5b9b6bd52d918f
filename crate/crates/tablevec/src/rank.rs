//! Ranked result lists and TREC run file I/O.
//!
//! A [`RankedList`] keeps `(item, score)` pairs in a canonical order: scores
//! non-increasing, ties broken by ascending item string, no duplicate items.
//! Every ranking produced by this crate goes through this type, so identical
//! inputs always serialize to identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// An ordered list of `(item, score)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    items: Vec<(String, f64)>,
}

impl RankedList {
    /// Builds a ranked list from arbitrary scores.
    ///
    /// Sorts by descending score with ascending lexicographic tie-break. If an
    /// item occurs more than once, its highest score wins.
    pub fn from_scores<I>(scores: I) -> RankedList
    where
        I: IntoIterator<Item = (String, f64)>,
    {
        let mut best: BTreeMap<String, f64> = BTreeMap::new();
        for (item, score) in scores {
            let entry = best.entry(item).or_insert(f64::NEG_INFINITY);
            if score > *entry {
                *entry = score;
            }
        }
        let mut items: Vec<(String, f64)> = best.into_iter().collect();
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        RankedList { items }
    }

    pub fn items(&self) -> &[(String, f64)] {
        &self.items
    }

    /// Items only, in rank order (rank 1 first).
    pub fn ranked_items(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|(item, _)| item.as_str())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Truncates the list to at most `k` items.
    pub fn truncate(&mut self, k: usize) {
        self.items.truncate(k);
    }
}

/// A run: one ranked list per case, keyed by case id.
pub type Run = BTreeMap<String, RankedList>;

/// Writes a run in TREC format: `case_id Q0 item rank score tag`.
///
/// Fields are TAB-separated because items (headings, entity ids) may contain
/// spaces. Lines starting with `#` carry configuration comments.
pub fn write_run(path: &Path, run: &Run, tag: &str, header: &[String]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_run_to(&mut w, run, tag, header).map_err(|e| Error::io(path, e))
}

pub fn write_run_to<W: Write>(w: &mut W, run: &Run, tag: &str, header: &[String]) -> std::io::Result<()> {
    for line in header {
        writeln!(w, "# {line}")?;
    }
    for (case_id, list) in run {
        for (rank, (item, score)) in list.items().iter().enumerate() {
            writeln!(w, "{case_id}\tQ0\t{item}\t{}\t{score}\t{tag}", rank + 1)?;
        }
    }
    Ok(())
}

/// Reads a TREC run file back into a [`Run`].
///
/// Accepts both TAB-separated (ours) and whitespace-separated (classic)
/// layouts; `#` lines and blank lines are skipped. Lists are re-sorted into
/// canonical order, which is a no-op for files we wrote ourselves.
pub fn read_run(path: &Path) -> Result<Run> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut scores: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_fields(trimmed);
        if fields.len() != 6 {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("expected 6 fields in run line, found {}", fields.len()),
            ));
        }
        let score: f64 = fields[4].parse().map_err(|_| {
            Error::parse(path, idx + 1, format!("bad score {:?}", fields[4]))
        })?;
        scores
            .entry(fields[0].to_string())
            .or_default()
            .push((fields[2].to_string(), score));
    }
    Ok(scores
        .into_iter()
        .map(|(case, pairs)| (case, RankedList::from_scores(pairs)))
        .collect())
}

/// Splits a record line on TABs when present, otherwise on whitespace.
pub(crate) fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split_whitespace().collect()
    }
}
