use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::embedding::{EmbeddingMatrix, Vocabulary};
use crate::error::{Error, Result};

/// Writes the input vectors as TSV: optional `#` comment lines, a
/// `V<TAB>dim` header, then one `term<TAB>v1<TAB>...<TAB>v_dim` line per
/// term. Values use the shortest round-tripping decimal form.
pub fn save_vectors_with_header(
    m: &EmbeddingMatrix,
    path: &Path,
    header: &[String],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for line in header {
        writeln!(w, "# {line}").map_err(io)?;
    }
    writeln!(w, "{}\t{}", m.vocab().len(), m.dim()).map_err(io)?;
    for id in 0..m.vocab().len() {
        let term = m.vocab().term(id).replace(['\t', '\n', '\r'], " ");
        write!(w, "{term}").map_err(io)?;
        for value in m.input_vector(id) {
            write!(w, "\t{value}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_vectors(m: &EmbeddingMatrix, path: &Path) -> Result<()> {
    save_vectors_with_header(m, path, &[])
}

/// Loads a vector TSV back into an [`EmbeddingMatrix`].
///
/// Only input vectors are stored in the file, so output vectors come back
/// zeroed and counts are unknown (all set to 1). This is also the entry point
/// for externally trained vectors converted to the same TSV layout.
pub fn load_vectors(path: &Path) -> Result<EmbeddingMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let mut header: Option<(usize, usize)> = None;
    let mut terms: Vec<String> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut last_line = 0usize;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match header {
            None => {
                if fields.len() != 2 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "header must be V<TAB>dim",
                    ));
                }
                let v: usize = fields[0].parse().map_err(|_| {
                    Error::parse(path, line_no, format!("bad vocabulary size {:?}", fields[0]))
                })?;
                let dim: usize = fields[1].parse().map_err(|_| {
                    Error::parse(path, line_no, format!("bad dimension {:?}", fields[1]))
                })?;
                if dim == 0 {
                    return Err(Error::parse(path, line_no, "dimension must be >= 1"));
                }
                header = Some((v, dim));
            }
            Some((v, dim)) => {
                if terms.len() == v {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected {v} vector rows, found more"),
                    ));
                }
                if fields.len() != dim + 1 {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("expected {} fields, found {}", dim + 1, fields.len()),
                    ));
                }
                terms.push(fields[0].to_string());
                for f in &fields[1..] {
                    let x: f64 = f.parse().map_err(|_| {
                        Error::parse(path, line_no, format!("bad vector value {f:?}"))
                    })?;
                    values.push(x);
                }
            }
        }
    }

    let (v, dim) = header.ok_or_else(|| Error::parse(path, last_line, "missing header"))?;
    if terms.len() != v {
        return Err(Error::parse(
            path,
            last_line + 1,
            format!("expected {v} vector rows, found {} at end of file", terms.len()),
        ));
    }

    let mut counts: HashMap<String, u64> = HashMap::with_capacity(terms.len());
    for term in &terms {
        if counts.insert(term.clone(), 1).is_some() {
            return Err(Error::parse(
                path,
                0,
                format!("duplicate term {term:?} in vector file"),
            ));
        }
    }
    let vocab = Vocabulary::from_counts(counts, 1);
    // Vocabulary orders ids deterministically, which may differ from file
    // order; place each row where its term landed.
    let mut input = vec![0.0; v * dim];
    for (row, term) in terms.iter().enumerate() {
        let id = vocab.id(term).expect("term inserted above");
        input[id * dim..(id + 1) * dim].copy_from_slice(&values[row * dim..(row + 1) * dim]);
    }
    let output = vec![0.0; v * dim];
    EmbeddingMatrix::from_parts(vocab, dim, input, output)
}
