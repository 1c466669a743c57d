//! Text formats for counts, graphs and dense matrices.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::CountMatrix;
use crate::error::{GplsiError, Result};
use crate::graph::DocumentGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountFormat {
    /// `%%MatrixMarket matrix coordinate integer general`, 1-based indices.
    MatrixMarket,
    /// Dense CSV, one document per row, with a header row.
    Csv,
}

impl CountFormat {
    /// `.mtx` files are MatrixMarket, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("mtx") => CountFormat::MatrixMarket,
            _ => CountFormat::Csv,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GplsiError::io(path, e))
}

pub fn load_counts(path: &Path, format: CountFormat) -> Result<CountMatrix> {
    match format {
        CountFormat::MatrixMarket => load_matrix_market(path),
        CountFormat::Csv => load_counts_csv(path),
    }
}

fn load_matrix_market(path: &Path) -> Result<CountMatrix> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (ln, header) = lines
        .next()
        .ok_or_else(|| GplsiError::parse(path, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() < 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
        || fields[3] != "integer"
        || fields[4] != "general"
    {
        return Err(GplsiError::parse(
            path,
            ln,
            "expected '%%MatrixMarket matrix coordinate integer general'",
        ));
    }
    let mut body = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (ln, size) = body
        .next()
        .ok_or_else(|| GplsiError::parse(path, ln, "missing size line"))?;
    let dims = parse_fields::<usize>(path, ln, size, 3)?;
    let (rows, cols, nnz) = (dims[0], dims[1], dims[2]);
    let mut counts = DMatrix::<u64>::zeros(rows, cols);
    let mut seen = 0;
    for (ln, line) in body {
        let f = parse_fields::<u64>(path, ln, line, 3)?;
        let (i, j) = (f[0] as usize, f[1] as usize);
        if i == 0 || j == 0 || i > rows || j > cols {
            return Err(GplsiError::parse(path, ln, format!("entry ({i}, {j}) outside {rows}x{cols}")));
        }
        counts[(i - 1, j - 1)] += f[2];
        seen += 1;
    }
    if seen != nnz {
        return Err(GplsiError::parse(path, 0, format!("size line declares {nnz} entries, found {seen}")));
    }
    CountMatrix::from_counts(counts)
}

fn parse_fields<T: std::str::FromStr>(path: &Path, ln: usize, line: &str, expected: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != expected {
        return Err(GplsiError::parse(path, ln, format!("expected {expected} fields, found {}", parts.len())));
    }
    parts
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| GplsiError::parse(path, ln, format!("cannot parse '{s}'")))
        })
        .collect()
}

fn load_counts_csv(path: &Path) -> Result<CountMatrix> {
    let rows = read_csv_rows::<u64>(path)?;
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let flat: Vec<u64> = rows.into_iter().flatten().collect();
    CountMatrix::from_counts(DMatrix::from_row_slice(n, p, &flat))
}

/// Parses a headered CSV of numbers into rows of equal width.
fn read_csv_rows<T: std::str::FromStr>(path: &Path) -> Result<Vec<Vec<T>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => GplsiError::io(path, std::io::Error::other(e.to_string())),
            _ => GplsiError::Csv(e),
        })?;
    let width = reader.headers()?.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            GplsiError::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(GplsiError::parse(path, line, format!("expected {width} columns, found {}", record.len())));
        }
        let row = record
            .iter()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| GplsiError::parse(path, line, format!("cannot parse '{s}'")))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| GplsiError::io(path, e))?))
}

pub fn save_counts_matrix_market(path: &Path, counts: &CountMatrix) -> Result<()> {
    let d = counts.counts();
    let mut out = create(path)?;
    let nnz = d.iter().filter(|&&c| c > 0).count();
    let mut body = String::from("%%MatrixMarket matrix coordinate integer general\n");
    body.push_str(&format!("{} {} {}\n", d.nrows(), d.ncols(), nnz));
    for i in 0..d.nrows() {
        for j in 0..d.ncols() {
            if d[(i, j)] > 0 {
                body.push_str(&format!("{} {} {}\n", i + 1, j + 1, d[(i, j)]));
            }
        }
    }
    out.write_all(body.as_bytes()).map_err(|e| GplsiError::io(path, e))
}

pub fn save_counts_csv(path: &Path, counts: &CountMatrix) -> Result<()> {
    let d = counts.counts();
    let header: Vec<String> = (0..d.ncols()).map(|j| format!("w{j}")).collect();
    let mut body = header.join(",");
    body.push('\n');
    for row in d.row_iter() {
        let cells: Vec<String> = row.iter().map(u64::to_string).collect();
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    create(path)?
        .write_all(body.as_bytes())
        .map_err(|e| GplsiError::io(path, e))
}

/// Reads an `i j [weight]` edge list with 0-based ids; `#` starts a comment.
///
/// With `n_nodes` given, ids at or beyond it are a dimension mismatch;
/// otherwise the node count is one past the largest id. Repeated pairs keep
/// their first weight.
pub fn load_graph(path: &Path, n_nodes: Option<usize>) -> Result<DocumentGraph> {
    let text = read_to_string(path)?;
    let mut edges = Vec::new();
    let mut max_id = None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&parts.len()) {
            return Err(GplsiError::parse(path, ln, format!("expected 'i j [weight]', found '{line}'")));
        }
        let id = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| GplsiError::parse(path, ln, format!("bad node id '{s}'")))
        };
        let (i, j) = (id(parts[0])?, id(parts[1])?);
        let w = match parts.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| GplsiError::parse(path, ln, format!("bad weight '{s}'")))?,
            None => 1.0,
        };
        if i == j {
            return Err(GplsiError::parse(path, ln, format!("self-loop on node {i}")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(GplsiError::parse(path, ln, format!("weight must be positive, got {w}")));
        }
        if let Some(n) = n_nodes {
            if i.max(j) >= n {
                return Err(GplsiError::DimensionMismatch(format!(
                    "{}:{ln}: node {} but the corpus has {n} documents",
                    path.display(),
                    i.max(j)
                )));
            }
        }
        max_id = Some(max_id.map_or(i.max(j), |m: usize| m.max(i).max(j)));
        edges.push((i, j, w));
    }
    let n = n_nodes.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
    DocumentGraph::from_edges_dedup(n, edges)
}

pub fn save_graph(path: &Path, g: &DocumentGraph) -> Result<()> {
    let mut body = String::new();
    for e in g.edges() {
        body.push_str(&format!("{} {} {}\n", e.i, e.j, e.weight));
    }
    create(path)?
        .write_all(body.as_bytes())
        .map_err(|e| GplsiError::io(path, e))
}

/// Writes a matrix as CSV with header `{prefix}0,{prefix}1,…`.
///
/// Values use the shortest representation that parses back to the same bits.
pub fn write_dense_csv(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("{prefix}{j}")).collect();
    let mut body = header.join(",");
    body.push('\n');
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        body.push_str(&cells.join(","));
        body.push('\n');
    }
    create(path)?
        .write_all(body.as_bytes())
        .map_err(|e| GplsiError::io(path, e))
}

pub fn read_dense_csv(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_csv_rows::<f64>(path)?;
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, p, &flat))
}
