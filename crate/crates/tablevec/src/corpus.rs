//! Table corpus ingestion: JSON-lines parsing, core-column detection, word
//! tokenization, and extraction of the per-variant term sequences that feed
//! embedding training.
//!
//! The ingest format is JSON-lines, one table object per line. Field names
//! follow this crate's canonical schema but the public Wikipedia tables dump
//! names are accepted as aliases (`pgTitle` → `page_title`, `secondTitle` →
//! `section_title`, `tableCaption` → `caption`, `title` → `headings`,
//! `data` → `rows`, `_id` → `table_id`). Cells may be plain strings, in which
//! case `[Entity|anchor text]` spans encode pre-linked entities, or objects
//! `{"text": ..., "entities": [...]}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

/// A canonical entity identifier, treated as one atomic term in sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    /// Returns `None` for the empty string; entity ids are always non-empty.
    pub fn new(s: impl Into<String>) -> Option<EntityId> {
        let s = s.into();
        if s.is_empty() {
            None
        } else {
            Some(EntityId(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        EntityId::new(s).ok_or_else(|| serde::de::Error::custom("entity id must be non-empty"))
    }
}

/// One table cell: raw text plus the entities linked in it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cell {
    pub raw_text: String,
    pub entities: Vec<EntityId>,
}

impl Cell {
    pub fn new(raw_text: impl Into<String>, entities: Vec<EntityId>) -> Cell {
        let mut cell = Cell {
            raw_text: raw_text.into(),
            entities: Vec::new(),
        };
        for e in entities {
            cell.push_entity(e);
        }
        cell
    }

    /// Adds an entity unless the cell already holds it.
    pub fn push_entity(&mut self, e: EntityId) {
        if !self.entities.contains(&e) {
            self.entities.push(e);
        }
    }
}

/// Decodes `[Entity|anchor]` / `[Entity]` spans from a pre-linked cell string.
/// The returned text has each span replaced by its anchor.
fn parse_cell_markup(s: &str) -> Cell {
    let mut cell = Cell::default();
    let mut rest = s;
    while let Some(start) = rest.find('[') {
        let after = &rest[start + 1..];
        match after.find(']') {
            Some(len) => {
                cell.raw_text.push_str(&rest[..start]);
                let inner = &after[..len];
                let (entity, anchor) = match inner.split_once('|') {
                    Some((e, a)) => (e, a),
                    None => (inner, inner),
                };
                if let Some(id) = EntityId::new(entity.trim()) {
                    cell.push_entity(id);
                }
                cell.raw_text.push_str(anchor);
                rest = &after[len + 1..];
            }
            None => break,
        }
    }
    cell.raw_text.push_str(rest);
    cell
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            text: &'a str,
            entities: &'a [EntityId],
        }
        Repr {
            text: &self.raw_text,
            entities: &self.entities,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Full {
                #[serde(default, alias = "raw_text")]
                text: String,
                #[serde(default)]
                entities: Vec<String>,
            },
            Text(String),
        }
        Ok(match Repr::deserialize(deserializer)? {
            Repr::Full { text, entities } => {
                let mut cell = Cell {
                    raw_text: text,
                    entities: Vec::new(),
                };
                for e in entities {
                    if let Some(id) = EntityId::new(e) {
                        cell.push_entity(id);
                    }
                }
                cell
            }
            Repr::Text(s) => parse_cell_markup(&s),
        })
    }
}

/// One relational table.
///
/// After ingest every row has exactly `headings.len()` cells (short rows are
/// right-padded with empty cells, over-long rows truncated) and, when set,
/// `core_column < headings.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    #[serde(default, alias = "_id", alias = "id")]
    pub table_id: String,
    #[serde(default, alias = "pgTitle")]
    pub page_title: String,
    #[serde(default, alias = "secondTitle", alias = "sectionTitle")]
    pub section_title: String,
    #[serde(default, alias = "tableCaption")]
    pub caption: String,
    #[serde(alias = "title")]
    pub headings: Vec<String>,
    #[serde(alias = "data")]
    pub rows: Vec<Vec<Cell>>,
    #[serde(default, alias = "coreColumn", skip_serializing_if = "Option::is_none")]
    pub core_column: Option<usize>,
}

impl TableRecord {
    /// Enforces the shape invariants; returns a message for unusable records.
    fn normalize(&mut self) -> std::result::Result<(), String> {
        if self.headings.is_empty() {
            return Err("table has no headings".to_string());
        }
        let width = self.headings.len();
        for row in &mut self.rows {
            row.resize(width, Cell::default());
        }
        if let Some(core) = self.core_column {
            if core >= width {
                return Err(format!(
                    "core column {core} out of range for {width} headings"
                ));
            }
        }
        Ok(())
    }

    /// Cells of the core column, top-down. Errors if the core column is unset.
    pub fn core_cells(&self) -> Result<impl Iterator<Item = &Cell>> {
        let core = self
            .core_column
            .ok_or_else(|| Error::MissingCoreColumn(self.table_id.clone()))?;
        Ok(self.rows.iter().map(move |row| &row[core]))
    }
}

/// Counters kept while streaming a corpus file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    /// Well-formed records yielded.
    pub records: u64,
    /// Malformed lines skipped (bad JSON, missing headings/rows, bad core column).
    pub skipped: u64,
    /// Lines dropped because their table id was already seen.
    pub duplicate_ids: u64,
}

/// Streaming reader over a JSON-lines table dump.
///
/// Malformed lines are counted and skipped, not fatal; only I/O failures are
/// surfaced as errors. Iterate with `by_ref()` to keep access to [`ParseStats`].
pub struct CorpusReader {
    path: PathBuf,
    lines: Lines<BufReader<File>>,
    line_no: usize,
    stats: ParseStats,
    seen_ids: HashSet<String>,
}

impl CorpusReader {
    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

/// Opens a JSON-lines corpus for streaming. The file must exist and be
/// readable; individual line errors are handled by the reader.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<CorpusReader> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    Ok(CorpusReader {
        path,
        lines: BufReader::new(file).lines(),
        line_no: 0,
        stats: ParseStats::default(),
        seen_ids: HashSet::new(),
    })
}

impl Iterator for CorpusReader {
    type Item = Result<TableRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(Error::io(&self.path, e))),
            };
            self.line_no += 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut record: TableRecord = match serde_json::from_str(trimmed) {
                Ok(r) => r,
                Err(_) => {
                    self.stats.skipped += 1;
                    continue;
                }
            };
            if record.normalize().is_err() {
                self.stats.skipped += 1;
                continue;
            }
            if record.table_id.is_empty() {
                record.table_id = format!("line-{}", self.line_no);
            }
            if !self.seen_ids.insert(record.table_id.clone()) {
                self.stats.duplicate_ids += 1;
                continue;
            }
            self.stats.records += 1;
            return Some(Ok(record));
        }
    }
}

/// Picks the column with the highest fraction of entity-bearing cells;
/// ties go to the leftmost column. A table with no entity links maps to
/// column 0.
pub fn detect_core_column(t: &TableRecord) -> usize {
    let width = t.headings.len();
    if width == 0 {
        return 0;
    }
    // Rows all have the same width, so comparing counts equals comparing ratios.
    let mut counts = vec![0usize; width];
    for row in &t.rows {
        for (col, cell) in row.iter().enumerate() {
            if !cell.entities.is_empty() {
                counts[col] += 1;
            }
        }
    }
    let mut best = 0;
    for (col, &count) in counts.iter().enumerate() {
        if count > counts[best] {
            best = col;
        }
    }
    best
}

/// Runs [`detect_core_column`] unless the record already carries one.
pub fn ensure_core_column(t: &mut TableRecord) {
    if t.core_column.is_none() {
        t.core_column = Some(detect_core_column(t));
    }
}

static STOPWORDS: OnceLock<HashSet<String>> = OnceLock::new();

/// The stopword list shipped with the crate (`data/stopwords_en.txt`).
pub fn default_stopwords() -> &'static HashSet<String> {
    STOPWORDS.get_or_init(|| {
        include_str!("../data/stopwords_en.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect()
    })
}

/// Removes `<...>` spans. An unterminated `<` swallows the rest of the string.
fn strip_html_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(start) = rest.find('<') {
        out.push_str(&rest[..start]);
        match rest[start..].find('>') {
            Some(end) => rest = &rest[start + end + 1..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

/// Word tokenization for the word-level table view: lowercases, strips HTML
/// tags, splits on non-alphanumeric runs, and drops empty tokens, pure
/// numbers, and stopwords. A handful of codepoints (mathematical
/// alphanumerics) count as uppercase yet have no lowercase mapping; tokens
/// containing them are dropped so output is guaranteed lowercase.
pub fn tokenize_words(s: &str, stopwords: &HashSet<String>) -> Vec<String> {
    strip_html_tags(s)
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|tok| !tok.is_empty())
        .filter(|tok| !tok.chars().any(|c| c.is_uppercase()))
        .filter(|tok| !tok.chars().all(|c| c.is_numeric()))
        .filter(|tok| !stopwords.contains(*tok))
        .map(str::to_string)
        .collect()
}

/// The four table views an embedding can be trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// All words in the table: page title, section title, caption, headings,
    /// then cell text row by row.
    Words,
    /// Headings as atomic terms, left to right, verbatim.
    Headings,
    /// All linked entities, row-major over the cells.
    Entities,
    /// Entities of the core column only, top-down.
    CoreEntities,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Words,
        Variant::Headings,
        Variant::Entities,
        Variant::CoreEntities,
    ];

    /// Short lowercase code used in file names and CLI flags.
    pub fn code(self) -> &'static str {
        match self {
            Variant::Words => "w",
            Variant::Headings => "h",
            Variant::Entities => "e",
            Variant::CoreEntities => "estar",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Words => "W",
            Variant::Headings => "H",
            Variant::Entities => "E",
            Variant::CoreEntities => "E*",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s.to_ascii_lowercase().as_str() {
            "w" | "words" => Ok(Variant::Words),
            "h" | "headings" => Ok(Variant::Headings),
            "e" | "entities" => Ok(Variant::Entities),
            "e*" | "estar" | "core" | "core-entities" => Ok(Variant::CoreEntities),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// One training sequence: the terms a single table contributes to a variant.
/// Sequences are never concatenated across tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSequence {
    pub variant: Variant,
    pub table_id: String,
    pub tokens: Vec<String>,
}

/// Extracts the term sequence of `variant` from one table, or `None` when the
/// table contributes nothing (e.g. no linked entities for an entity variant).
///
/// The core-entities variant requires `core_column` to be set; run
/// [`detect_core_column`] first.
pub fn extract_sequence(t: &TableRecord, variant: Variant) -> Result<Option<TermSequence>> {
    let tokens = match variant {
        Variant::Words => {
            let stop = default_stopwords();
            let mut tokens = Vec::new();
            tokens.extend(tokenize_words(&t.page_title, stop));
            tokens.extend(tokenize_words(&t.section_title, stop));
            tokens.extend(tokenize_words(&t.caption, stop));
            for h in &t.headings {
                tokens.extend(tokenize_words(h, stop));
            }
            for row in &t.rows {
                for cell in row {
                    tokens.extend(tokenize_words(&cell.raw_text, stop));
                }
            }
            tokens
        }
        Variant::Headings => t.headings.clone(),
        Variant::Entities => t
            .rows
            .iter()
            .flatten()
            .flat_map(|cell| cell.entities.iter())
            .map(|e| e.as_str().to_string())
            .collect(),
        Variant::CoreEntities => t
            .core_cells()?
            .flat_map(|cell| cell.entities.iter())
            .map(|e| e.as_str().to_string())
            .collect(),
    };
    if tokens.is_empty() {
        return Ok(None);
    }
    Ok(Some(TermSequence {
        variant,
        table_id: t.table_id.clone(),
        tokens,
    }))
}

/// Replaces separator characters so a term survives TAB-separated files.
fn sanitize_term(tok: &str) -> String {
    tok.replace(['\t', '\n', '\r'], " ")
}

/// Writes sequences one per line, tokens TAB-separated. TAB is the only
/// separator because headings and entity ids may contain spaces.
pub fn write_sequences<'a, I>(path: &Path, sequences: I, header: &[String]) -> Result<u64>
where
    I: IntoIterator<Item = &'a TermSequence>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut total_tokens = 0u64;
    let io = |e| Error::io(path, e);
    for line in header {
        writeln!(w, "# {line}").map_err(io)?;
    }
    for seq in sequences {
        let line: Vec<String> = seq.tokens.iter().map(|t| sanitize_term(t)).collect();
        writeln!(w, "{}", line.join("\t")).map_err(io)?;
        total_tokens += seq.tokens.len() as u64;
    }
    w.flush().map_err(io)?;
    Ok(total_tokens)
}

/// Reads a sequence file written by [`write_sequences`]. Table ids are not
/// stored in the file, so each sequence gets a synthetic `seq-<line>` id.
pub fn read_sequences(path: &Path, variant: Variant) -> Result<Vec<TermSequence>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut sequences = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<String> = line.split('\t').map(str::to_string).collect();
        sequences.push(TermSequence {
            variant,
            table_id: format!("seq-{}", idx + 1),
            tokens,
        });
    }
    Ok(sequences)
}

/// Per-field collection language model statistics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldStats {
    pub total: u64,
    pub counts: BTreeMap<String, u64>,
}

impl FieldStats {
    fn add_tokens<I: IntoIterator<Item = String>>(&mut self, tokens: I) {
        for tok in tokens {
            *self.counts.entry(tok).or_insert(0) += 1;
            self.total += 1;
        }
    }

    /// Collection probability of `term`, zero when the field is empty.
    pub fn probability(&self, term: &str) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        *self.counts.get(term).unwrap_or(&0) as f64 / self.total as f64
    }
}

/// Corpus-wide term statistics for the four retrievable table fields.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CollectionStats {
    pub page_title: FieldStats,
    pub caption: FieldStats,
    pub headings: FieldStats,
    pub body: FieldStats,
}

/// The slice of a table the population and retrieval tasks need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    pub table_id: String,
    pub headings: Vec<String>,
    /// Entity ids of the core-column cells, one entry per row, top-down.
    pub core_cells: Vec<Vec<EntityId>>,
    pub n_rows: usize,
    pub n_cols: usize,
    /// Total linked entity mentions across all cells.
    pub n_entity_mentions: usize,
}

impl TableSummary {
    /// Summarizes a record whose core column has been set.
    pub fn from_record(t: &TableRecord) -> Result<TableSummary> {
        let core_cells = t
            .core_cells()?
            .map(|cell| cell.entities.clone())
            .collect();
        Ok(TableSummary {
            table_id: t.table_id.clone(),
            headings: t.headings.clone(),
            core_cells,
            n_rows: t.rows.len(),
            n_cols: t.headings.len(),
            n_entity_mentions: t
                .rows
                .iter()
                .flatten()
                .map(|cell| cell.entities.len())
                .sum(),
        })
    }

    /// Core-column entities top-down, duplicates preserved.
    pub fn core_entities(&self) -> impl Iterator<Item = &EntityId> {
        self.core_cells.iter().flatten()
    }
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    tables: Vec<TableSummary>,
    collection: CollectionStats,
}

/// In-memory corpus index: table summaries plus inverted maps from entities
/// and headings to the tables containing them.
pub struct CorpusIndex {
    tables: Vec<TableSummary>,
    collection: CollectionStats,
    entity_tables: HashMap<EntityId, Vec<usize>>,
    heading_tables: HashMap<String, Vec<usize>>,
}

impl CorpusIndex {
    pub fn from_summaries(tables: Vec<TableSummary>, collection: CollectionStats) -> CorpusIndex {
        let mut entity_tables: HashMap<EntityId, Vec<usize>> = HashMap::new();
        let mut heading_tables: HashMap<String, Vec<usize>> = HashMap::new();
        for (idx, table) in tables.iter().enumerate() {
            let mut seen_entities = HashSet::new();
            for e in table.core_entities() {
                if seen_entities.insert(e) {
                    entity_tables.entry(e.clone()).or_default().push(idx);
                }
            }
            let mut seen_headings = HashSet::new();
            for h in &table.headings {
                if seen_headings.insert(h) {
                    heading_tables.entry(h.clone()).or_default().push(idx);
                }
            }
        }
        CorpusIndex {
            tables,
            collection,
            entity_tables,
            heading_tables,
        }
    }

    pub fn tables(&self) -> &[TableSummary] {
        &self.tables
    }

    pub fn collection(&self) -> &CollectionStats {
        &self.collection
    }

    /// Indexes of tables whose core column contains `e`.
    pub fn tables_with_core_entity(&self, e: &EntityId) -> &[usize] {
        self.entity_tables.get(e).map_or(&[], Vec::as_slice)
    }

    /// Indexes of tables whose header row contains `h` verbatim.
    pub fn tables_with_heading(&self, h: &str) -> &[usize] {
        self.heading_tables.get(h).map_or(&[], Vec::as_slice)
    }

    /// Number of tables whose core column contains `e`.
    pub fn entity_frequency(&self, e: &EntityId) -> u64 {
        self.tables_with_core_entity(e).len() as u64
    }

    /// Number of tables containing heading `h`.
    pub fn heading_frequency(&self, h: &str) -> u64 {
        self.tables_with_heading(h).len() as u64
    }

    pub fn save(&self, path: &Path, header: &[String]) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for line in header {
            writeln!(w, "# {line}").map_err(|e| Error::io(path, e))?;
        }
        let body = IndexFile {
            tables: self.tables.clone(),
            collection: self.collection.clone(),
        };
        serde_json::to_writer(&mut w, &body)
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        writeln!(w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<CorpusIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut body = String::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.starts_with('#') {
                continue;
            }
            if !body.is_empty() && !line.trim().is_empty() {
                return Err(Error::parse(path, idx + 1, "multiple JSON documents"));
            }
            if !line.trim().is_empty() {
                body = line;
            }
        }
        let parsed: IndexFile = serde_json::from_str(&body)
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(CorpusIndex::from_summaries(parsed.tables, parsed.collection))
    }
}

/// Incremental [`CorpusIndex`] construction while streaming records.
#[derive(Default)]
pub struct CorpusIndexBuilder {
    tables: Vec<TableSummary>,
    collection: CollectionStats,
}

impl CorpusIndexBuilder {
    pub fn new() -> CorpusIndexBuilder {
        CorpusIndexBuilder::default()
    }

    /// Adds one record (core column must be set).
    pub fn push(&mut self, record: &TableRecord) -> Result<()> {
        let stop = default_stopwords();
        self.collection
            .page_title
            .add_tokens(tokenize_words(&record.page_title, stop));
        self.collection
            .caption
            .add_tokens(tokenize_words(&record.caption, stop));
        for h in &record.headings {
            self.collection.headings.add_tokens(tokenize_words(h, stop));
        }
        for cell in record.rows.iter().flatten() {
            self.collection
                .body
                .add_tokens(tokenize_words(&cell.raw_text, stop));
        }
        self.tables.push(TableSummary::from_record(record)?);
        Ok(())
    }

    pub fn finish(self) -> CorpusIndex {
        CorpusIndex::from_summaries(self.tables, self.collection)
    }
}
