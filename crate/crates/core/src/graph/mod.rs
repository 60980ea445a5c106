//! DTW similarity graphs over segments.

mod builder;
mod dtw;
mod file;

pub use builder::{
    build_graph, pairwise_distances, threshold_edges, threshold_from_percentile, CondensedDistances, Edge, FaultGraph,
    GraphMeta,
};
pub use dtw::{dtw_distance, dtw_distance_banded, similarity};
pub use file::{distance_matrix_csv, GraphFile};
