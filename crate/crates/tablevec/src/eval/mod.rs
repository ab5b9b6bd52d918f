//! Evaluation toolkit: rank metrics, paired significance testing, TREC
//! qrels I/O, and the benchmark protocol generators for the population tasks.

mod metrics;
mod protocol;
mod ttest;

pub use metrics::{average_precision, ndcg_at_k, reciprocal_rank, Metric, RANK_CUTOFF};
pub use protocol::{make_population_cases, PopulationCase, PopulationMode, PopulationProtocol};
pub use ttest::paired_ttest;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rank::{split_fields, Run};

/// Graded relevance judgments: case id -> item -> grade (>= 0). Binary tasks
/// use grades {0, 1}.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    cases: BTreeMap<String, HashMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Qrels {
        Qrels::default()
    }

    pub fn insert(&mut self, case_id: impl Into<String>, item: impl Into<String>, grade: u32) {
        self.cases
            .entry(case_id.into())
            .or_default()
            .insert(item.into(), grade);
    }

    pub fn get(&self, case_id: &str) -> Option<&HashMap<String, u32>> {
        self.cases.get(case_id)
    }

    pub fn case_ids(&self) -> impl Iterator<Item = &str> {
        self.cases.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    /// Items with grade >= 1 for one case.
    pub fn relevant_items(&self, case_id: &str) -> HashSet<String> {
        self.cases
            .get(case_id)
            .map(|items| {
                items
                    .iter()
                    .filter(|(_, &g)| g >= 1)
                    .map(|(item, _)| item.clone())
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Reads TREC qrels lines: `case_id 0 item grade`. TAB-separated when a
    /// TAB is present (items may contain spaces), whitespace otherwise.
    pub fn load(path: &Path) -> Result<Qrels> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut qrels = Qrels::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim_end_matches(['\r', '\n']);
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields = split_fields(trimmed);
            if fields.len() != 4 {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("expected 4 qrels fields, found {}", fields.len()),
                ));
            }
            let grade: u32 = fields[3].parse().map_err(|_| {
                Error::parse(path, idx + 1, format!("bad grade {:?}", fields[3]))
            })?;
            qrels.insert(fields[0], fields[2], grade);
        }
        Ok(qrels)
    }

    pub fn save(&self, path: &Path, header: &[String]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for line in header {
            writeln!(w, "# {line}").map_err(io)?;
        }
        for (case_id, items) in &self.cases {
            let mut sorted: Vec<(&String, &u32)> = items.iter().collect();
            sorted.sort();
            for (item, grade) in sorted {
                writeln!(w, "{case_id}\t0\t{item}\t{grade}").map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Two-tailed paired t-test outcome markers at the 0.05 / 0.01 levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Significance {
    NotSignificant,
    AtFivePercent,
    AtOnePercent,
}

impl Significance {
    pub fn from_p(p: f64) -> Significance {
        if p < 0.01 {
            Significance::AtOnePercent
        } else if p < 0.05 {
            Significance::AtFivePercent
        } else {
            Significance::NotSignificant
        }
    }
}

impl fmt::Display for Significance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Significance::NotSignificant => "∘",
            Significance::AtFivePercent => "†",
            Significance::AtOnePercent => "‡",
        })
    }
}

/// Per-case metric values for one run, plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: Metric,
    pub per_case: BTreeMap<String, f64>,
    pub mean: f64,
    /// Cases skipped because the metric is undefined on them (no relevant
    /// items / zero ideal gain).
    pub skipped: Vec<String>,
}

impl MetricReport {
    /// Evaluates every case of `run`. Each run case must be judged in
    /// `qrels`; unjudged run cases are an error listing the offenders.
    pub fn evaluate(run: &Run, qrels: &Qrels, metric: Metric) -> Result<MetricReport> {
        let unjudged: Vec<&str> = run
            .keys()
            .filter(|case| qrels.get(case).is_none())
            .map(String::as_str)
            .collect();
        if !unjudged.is_empty() {
            return Err(Error::Invalid(format!(
                "run cases missing from qrels: {}",
                unjudged.join(", ")
            )));
        }
        let mut per_case = BTreeMap::new();
        let mut skipped = Vec::new();
        for (case_id, ranking) in run {
            let judgments = qrels.get(case_id).expect("checked above");
            match metric.evaluate(ranking, judgments) {
                Some(value) => {
                    per_case.insert(case_id.clone(), value);
                }
                None => skipped.push(case_id.clone()),
            }
        }
        let mean = if per_case.is_empty() {
            0.0
        } else {
            per_case.values().sum::<f64>() / per_case.len() as f64
        };
        Ok(MetricReport {
            metric,
            per_case,
            mean,
            skipped,
        })
    }

    /// Paired two-tailed t-test of this report against a reference report.
    /// Both must score exactly the same cases.
    pub fn compare(&self, reference: &MetricReport) -> Result<(f64, Significance)> {
        let ours: Vec<&String> = self.per_case.keys().collect();
        let theirs: Vec<&String> = reference.per_case.keys().collect();
        if ours != theirs {
            return Err(Error::Invalid(
                "reports score different case sets; cannot pair".into(),
            ));
        }
        let a: Vec<f64> = self.per_case.values().copied().collect();
        let b: Vec<f64> = reference.per_case.values().copied().collect();
        let p = paired_ttest(&a, &b)?;
        Ok((p, Significance::from_p(p)))
    }

    /// TSV rows: one per case, then the mean.
    pub fn write_tsv<W: Write>(&self, w: &mut W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "case\t{}", self.metric)?;
        for (case_id, value) in &self.per_case {
            writeln!(w, "{case_id}\t{value}")?;
        }
        writeln!(w, "MEAN\t{}", self.mean)?;
        for case_id in &self.skipped {
            writeln!(w, "# skipped (metric undefined): {case_id}")?;
        }
        Ok(())
    }
}
