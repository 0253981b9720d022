use alloc::vec::Vec;

use super::EmbeddingError;

/// Undirected weighted graph; each adjacency list is sorted by neighbor index.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    /// Build from an undirected edge list; duplicate edges keep the smaller weight.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut adjacency = alloc::vec![Vec::new(); n];
        for (a, b, w) in edges {
            if a == b {
                continue;
            }
            adjacency[a].push((b, w));
            adjacency[b].push((a, w));
        }
        for list in &mut adjacency {
            list.sort_by(|x: &(usize, f64), y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            list.dedup_by_key(|e| e.0);
        }
        NeighborGraph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Copy of the graph with extra undirected edges.
    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let existing = self
            .adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().map(move |&(b, w)| (a, b, w)));
        NeighborGraph::from_edges(self.len(), existing.chain(edges).collect::<Vec<_>>())
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        self.adjacency[a]
            .binary_search_by_key(&b, |e| e.0)
            .ok()
            .map(|i| self.adjacency[a][i].1)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Connect every vector to its `k` nearest neighbors (ties by smaller index)
/// and symmetrize by union. Edge weights are Euclidean distances.
pub fn knn_graph<V: AsRef<[f64]>>(vectors: &[V], k: usize) -> Result<NeighborGraph, EmbeddingError> {
    let n = vectors.len();
    if k == 0 {
        return Err(EmbeddingError::ZeroNeighbors);
    }
    if k >= n {
        return Err(EmbeddingError::TooFewPoints { n, k });
    }
    let dim = vectors[0].as_ref().len();
    for (index, v) in vectors.iter().enumerate() {
        let v = v.as_ref();
        if v.len() != dim {
            return Err(EmbeddingError::DimensionMismatch { index, expected: dim, got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbeddingError::NonFinite(index));
        }
    }

    let mut edges = Vec::with_capacity(n * k);
    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        candidates.clear();
        let vi = vectors[i].as_ref();
        candidates.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| (euclidean(vi, vectors[j].as_ref()), j)),
        );
        let by_distance = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < candidates.len() {
            candidates.select_nth_unstable_by(k - 1, by_distance);
        }
        edges.extend(candidates[..k].iter().map(|&(d, j)| (i, j, d)));
    }
    Ok(NeighborGraph::from_edges(n, edges))
}

/// For every pair of components, the shortest Euclidean edge between them.
pub fn bridge_edges<V: AsRef<[f64]>>(vectors: &[V], components: &[Vec<usize>]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (ci, a) in components.iter().enumerate() {
        for b in &components[ci + 1..] {
            let mut best = (f64::INFINITY, 0, 0);
            for &i in a {
                for &j in b {
                    let d = euclidean(vectors[i].as_ref(), vectors[j].as_ref());
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
            out.push((best.1, best.2, best.0));
        }
    }
    out
}
