use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dtw::{dtw_distance_banded, similarity};
use crate::autodiff::Neighborhoods;
use crate::error::{Error, Result};
use crate::features::MinMaxScaler;
use crate::segmentation::Segment;

/// Upper-triangular pairwise distance store.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensedDistances {
    m: usize,
    data: Vec<f64>,
}

impl CondensedDistances {
    pub fn node_count(&self) -> usize {
        self.m
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * self.m - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Distance between nodes `i` and `j` (order irrelevant, zero on the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    /// Off-diagonal distances in `(0,1), (0,2), ..., (m-2,m-1)` order.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.m, self.m), |(i, j)| self.get(i, j))
    }
}

/// All-pairs DTW distances. Fails rather than subsampling when the pair count
/// exceeds `max_pairs`.
pub fn pairwise_distances(segments: &[Segment], max_pairs: usize, band: Option<usize>) -> Result<CondensedDistances> {
    let m = segments.len();
    if m < 2 {
        return Err(Error::invalid(format!(
            "pairwise distances need at least 2 segments, got {m}"
        )));
    }
    let pairs = m * (m - 1) / 2;
    if pairs > max_pairs {
        return Err(Error::Budget {
            pairs,
            segments: m,
            budget: max_pairs,
        });
    }
    let mut data = Vec::with_capacity(pairs);
    for i in 0..m {
        for j in i + 1..m {
            data.push(dtw_distance_banded(&segments[i].values, &segments[j].values, band)?);
        }
    }
    Ok(CondensedDistances { m, data })
}

/// `pct`-th percentile of the distances with linear interpolation between
/// order statistics.
pub fn threshold_from_percentile(distances: &[f64], pct: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::invalid("percentile of an empty distance set"));
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::invalid(format!("percentile {pct} outside (0, 100]")));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Construction parameters stored with every graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub source_id: String,
    pub w_star: usize,
    pub step: usize,
    pub theta: f64,
    pub theta_percentile: f64,
    pub bin_count: usize,
    pub scaler: MinMaxScaler,
    pub config_hash: String,
    pub seed: u64,
}

/// Weighted undirected edge `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge(pub usize, pub usize, pub f64);

/// Segment graph: normalized features, labels, and DTW-similarity edges.
#[derive(Clone, Debug, PartialEq)]
pub struct FaultGraph {
    pub meta: GraphMeta,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub edges: Vec<Edge>,
    /// Unscaled features, kept so another scaler can be applied later.
    pub raw_features: Array2<f64>,
    /// Segment values, kept for distance exports.
    pub segments: Vec<Vec<f64>>,
}

impl FaultGraph {
    /// Graph over hand-made features, without segments. The features are
    /// stored as given and a scaler is fitted to them for later rescaling.
    pub fn from_features(features: Array2<f64>, labels: Vec<usize>, edges: Vec<Edge>) -> Result<FaultGraph> {
        let m = features.nrows();
        if labels.len() != m {
            return Err(Error::invalid(format!("{m} feature rows but {} labels", labels.len())));
        }
        if let Some(e) = edges.iter().find(|e| e.0 >= e.1 || e.1 >= m) {
            return Err(Error::invalid(format!("edge ({}, {}) is not i < j < {m}", e.0, e.1)));
        }
        let scaler = MinMaxScaler::fit(&features)?;
        Ok(FaultGraph {
            meta: GraphMeta {
                source_id: String::new(),
                w_star: 0,
                step: 0,
                theta: 0.0,
                theta_percentile: 0.0,
                bin_count: 0,
                scaler,
                config_hash: String::new(),
                seed: 0,
            },
            raw_features: features.clone(),
            features,
            labels,
            edges,
            segments: vec![Vec::new(); m],
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    /// Neighbor lists for message passing, self-loops included.
    pub fn neighborhoods(&self) -> Arc<Neighborhoods> {
        Arc::new(Neighborhoods::with_self_loops(
            self.node_count(),
            self.edges.iter().map(|e| (e.0, e.1)),
        ))
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count()];
        for e in &self.edges {
            deg[e.0] += 1;
            deg[e.1] += 1;
        }
        deg
    }

    pub fn class_count(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |c| c + 1)
    }

    /// Same graph with features rescaled by another scaler.
    pub fn rescaled(&self, scaler: &MinMaxScaler) -> Result<FaultGraph> {
        let mut g = self.clone();
        g.features = scaler.transform(&self.raw_features)?;
        g.meta.scaler = scaler.clone();
        Ok(g)
    }

    /// Relabel nodes: new node `k` is old node `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> FaultGraph {
        let m = self.node_count();
        assert_eq!(perm.len(), m);
        let mut inverse = vec![0; m];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (inverse[e.0], inverse[e.1]);
                Edge(a.min(b), a.max(b), e.2)
            })
            .collect();
        FaultGraph {
            meta: self.meta.clone(),
            features: self.features.select(ndarray::Axis(0), perm),
            labels: perm.iter().map(|&k| self.labels[k]).collect(),
            edges,
            raw_features: self.raw_features.select(ndarray::Axis(0), perm),
            segments: perm.iter().map(|&k| self.segments[k].clone()).collect(),
        }
    }
}

/// Edges between every pair closer than `theta`, weighted by similarity.
/// A node left without edges is joined to its nearest neighbor (lowest index
/// on ties).
pub fn threshold_edges(distances: &CondensedDistances, theta: f64) -> Result<Vec<Edge>> {
    let m = distances.node_count();
    let mut edges = Vec::new();
    let mut degree = vec![0usize; m];
    for i in 0..m {
        for j in i + 1..m {
            let d = distances.get(i, j);
            if d < theta {
                edges.push(Edge(i, j, similarity(d)?));
                degree[i] += 1;
                degree[j] += 1;
            }
        }
    }
    let isolated: Vec<usize> = (0..m).filter(|&i| degree[i] == 0).collect();
    for i in isolated {
        let nearest = (0..m)
            .filter(|&j| j != i)
            .min_by(|&a, &b| distances.get(i, a).total_cmp(&distances.get(i, b)).then(a.cmp(&b)))
            .expect("at least two nodes");
        let (a, b) = (i.min(nearest), i.max(nearest));
        if !edges.iter().any(|e| e.0 == a && e.1 == b) {
            edges.push(Edge(a, b, similarity(distances.get(a, b))?));
        }
    }
    edges.sort_by_key(|e| (e.0, e.1));
    Ok(edges)
}

/// Assemble a [`FaultGraph`] from segments, their features, and precomputed
/// distances.
pub fn build_graph(
    segments: &[Segment],
    raw_features: &Array2<f64>,
    distances: &CondensedDistances,
    theta: f64,
    meta: GraphMeta,
) -> Result<FaultGraph> {
    if segments.is_empty() {
        return Err(Error::invalid("build_graph of zero segments"));
    }
    if raw_features.nrows() != segments.len() || distances.node_count() != segments.len() {
        return Err(Error::invalid(format!(
            "{} segments, {} feature rows, {} distance nodes",
            segments.len(),
            raw_features.nrows(),
            distances.node_count()
        )));
    }
    Ok(FaultGraph {
        features: meta.scaler.transform(raw_features)?,
        labels: segments.iter().map(|s| s.label).collect(),
        edges: threshold_edges(distances, theta)?,
        raw_features: raw_features.clone(),
        segments: segments.iter().map(|s| s.values.clone()).collect(),
        meta: GraphMeta { theta, ..meta },
    })
}
