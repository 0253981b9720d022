//! Isomap: k-nearest-neighbor graph, graph geodesics by Dijkstra, and
//! classical multidimensional scaling of the geodesic matrix.

mod geodesic;
mod knn;
mod mds;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

pub use geodesic::{connected_components, geodesics, GeodesicMatrix};
pub use knn::{bridge_edges, knn_graph, NeighborGraph};
pub use mds::{classical_mds, double_center, Embedding};

/// Neighbors used when none are given.
pub const DEFAULT_NEIGHBORS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("k = {k} neighbors needs at least k + 1 points, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroNeighbors,
    #[error("vector {index} has dimension {got}, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("non-finite coordinate in vector {0}")]
    NonFinite(usize),
    #[error("neighbor graph is disconnected ({}); raise the number of neighbors", describe_components(.components))]
    Disconnected { components: Vec<Vec<usize>> },
    #[error("distance matrix must be square, symmetric and zero on the diagonal")]
    InvalidDistances,
}

fn describe_components(components: &[Vec<usize>]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{} components:", components.len());
    for (i, c) in components.iter().enumerate().take(8) {
        let _ = write!(out, " #{i} size {} starting at node {}", c.len(), c[0]);
        if i + 1 < components.len().min(8) {
            out.push(';');
        }
    }
    if components.len() > 8 {
        out.push_str(" ...");
    }
    out
}

/// What to do when the neighbor graph falls apart.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disconnected {
    #[default]
    Error,
    /// Join every pair of components by their closest pair of points.
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IsomapOptions {
    pub neighbors: usize,
    pub dims: usize,
    pub disconnected: Disconnected,
}

impl Default for IsomapOptions {
    fn default() -> Self {
        IsomapOptions {
            neighbors: DEFAULT_NEIGHBORS,
            dims: 2,
            disconnected: Disconnected::Error,
        }
    }
}

/// Embedding plus the number of graph components found before bridging.
#[derive(Clone, Debug, PartialEq)]
pub struct IsomapOutput {
    pub embedding: Embedding,
    pub components: usize,
}

/// kNN graph, then geodesics, then classical MDS into `dims` coordinates.
pub fn isomap<V: AsRef<[f64]>>(vectors: &[V], k: usize, dims: usize) -> Result<Embedding, EmbeddingError> {
    let options = IsomapOptions {
        neighbors: k,
        dims,
        disconnected: Disconnected::Error,
    };
    isomap_with(vectors, options).map(|o| o.embedding)
}

pub fn isomap_with<V: AsRef<[f64]>>(vectors: &[V], options: IsomapOptions) -> Result<IsomapOutput, EmbeddingError> {
    let mut graph = knn_graph(vectors, options.neighbors)?;
    let components = connected_components(&graph);
    let count = components.len();
    if count > 1 && options.disconnected == Disconnected::Bridge {
        graph = graph.with_edges(bridge_edges(vectors, &components));
    }
    let geo = geodesics(&graph)?;
    Ok(IsomapOutput {
        embedding: classical_mds(geo.matrix(), options.dims)?,
        components: count,
    })
}
