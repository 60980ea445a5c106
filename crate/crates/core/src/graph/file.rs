use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::builder::{CondensedDistances, Edge, FaultGraph, GraphMeta};
use crate::data::io::{read_to_string, write_atomic};
use crate::error::{Error, Result};

pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// On-disk JSON layout of a [`FaultGraph`].
///
/// Floats are written in shortest round-trip form, so reading a file back
/// reproduces every value bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub format_version: u32,
    pub meta: GraphMeta,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub edges: Vec<Edge>,
    pub raw_features: Vec<Vec<f64>>,
    pub segments: Vec<Vec<f64>>,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(format!("ragged {what} rows in graph file")));
    }
    Array2::from_shape_vec((rows.len(), ncols), rows.concat()).map_err(|e| Error::invalid(e.to_string()))
}

impl From<&FaultGraph> for GraphFile {
    fn from(g: &FaultGraph) -> Self {
        GraphFile {
            format_version: GRAPH_FORMAT_VERSION,
            meta: g.meta.clone(),
            features: rows(&g.features),
            labels: g.labels.clone(),
            edges: g.edges.clone(),
            raw_features: rows(&g.raw_features),
            segments: g.segments.clone(),
        }
    }
}

impl GraphFile {
    pub fn into_graph(self) -> Result<FaultGraph> {
        if self.format_version != GRAPH_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported graph format version {}",
                self.format_version
            )));
        }
        let m = self.labels.len();
        if self.features.len() != m || self.raw_features.len() != m || self.segments.len() != m {
            return Err(Error::invalid("graph file arrays disagree on node count"));
        }
        for e in &self.edges {
            if e.0 >= e.1 || e.1 >= m || !(e.2 > 0.0 && e.2 <= 1.0) {
                return Err(Error::invalid(format!("invalid edge [{}, {}, {}]", e.0, e.1, e.2)));
            }
        }
        Ok(FaultGraph {
            features: matrix(&self.features, "feature")?,
            raw_features: matrix(&self.raw_features, "raw feature")?,
            meta: self.meta,
            labels: self.labels,
            edges: self.edges,
            segments: self.segments,
        })
    }

    pub fn save(graph: &FaultGraph, path: &Path) -> Result<()> {
        let json = serde_json::to_string(&GraphFile::from(graph))?;
        write_atomic(path, json.as_bytes())
    }

    pub fn load(path: &Path) -> Result<FaultGraph> {
        let text = read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&text)?;
        file.into_graph()
    }
}

/// Dense distance matrix as CSV, one row per node, no header.
pub fn distance_matrix_csv(d: &CondensedDistances) -> String {
    let m = d.node_count();
    let mut out = String::with_capacity(m * m * 8);
    for i in 0..m {
        let row: Vec<String> = (0..m).map(|j| format!("{:?}", d.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
