//! Dense per-node vectors and the `node v1 ... vdim` feature file format.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("row {row}: invalid token `{token}`")]
    Parse { row: usize, token: String },
    #[error("row {row}: expected {expected} values, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: duplicate node {node}")]
    Duplicate { row: usize, node: u64 },
    #[error("no features for node {node} ({missing} nodes missing)")]
    MissingFeatures { node: u64, missing: usize },
    #[error("feature file has no rows")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_vec(rows: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * dim, "data length must equal rows * dim");
        Self { rows, dim, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dim), "ragged rows");
        Self {
            rows: rows.len(),
            dim,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.rows)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes one `id v1 ... vdim` row per node. Values use the shortest
    /// representation that round-trips exactly.
    pub fn write<W: Write>(&self, ids: &[u64], mut w: W) -> std::io::Result<()> {
        assert_eq!(ids.len(), self.rows);
        for (i, &id) in ids.iter().enumerate() {
            write!(w, "{id}")?;
            for v in self.row(i) {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Reads a feature file as-is: external ids in file order plus the table.
pub fn read_table<R: BufRead>(reader: R) -> Result<(Vec<u64>, EmbeddingTable), FeatureError> {
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    let mut seen = HashMap::new();
    let mut row = 0;
    for line in reader.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        row += 1;
        let mut tok = text.split_whitespace();
        let id_tok = tok.next().unwrap_or_default();
        let id: u64 = id_tok.parse().map_err(|_| FeatureError::Parse {
            row,
            token: id_tok.to_string(),
        })?;
        if seen.insert(id, row).is_some() {
            return Err(FeatureError::Duplicate { row, node: id });
        }
        let before = data.len();
        for t in tok {
            let v: f64 = t.parse().map_err(|_| FeatureError::Parse {
                row,
                token: t.to_string(),
            })?;
            data.push(v);
        }
        let found = data.len() - before;
        match dim {
            None => dim = Some(found),
            Some(expected) if expected != found => {
                return Err(FeatureError::Ragged {
                    row,
                    expected,
                    found,
                })
            }
            _ => {}
        }
        ids.push(id);
    }
    let dim = dim.ok_or(FeatureError::Empty)?;
    Ok((ids.clone(), EmbeddingTable::from_vec(ids.len(), dim, data)))
}

/// Loads a feature file aligned to a graph's external ids. Rows for nodes
/// outside `ids` are ignored.
pub fn load_features<R: BufRead>(reader: R, ids: &[u64]) -> Result<EmbeddingTable, FeatureError> {
    let (file_ids, table) = read_table(reader)?;
    let by_id: HashMap<u64, usize> = file_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let missing: Vec<u64> = ids.iter().copied().filter(|id| !by_id.contains_key(id)).collect();
    if let Some(&node) = missing.first() {
        return Err(FeatureError::MissingFeatures {
            node,
            missing: missing.len(),
        });
    }
    let mut out = EmbeddingTable::zeros(ids.len(), table.dim());
    for (i, id) in ids.iter().enumerate() {
        out.row_mut(i).copy_from_slice(table.row(by_id[id]));
    }
    Ok(out)
}
