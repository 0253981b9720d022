use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{EmbeddingError, NeighborGraph};
use crate::linalg::Matrix;

/// All-pairs shortest-path distances over a connected neighbor graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GeodesicMatrix(Matrix);

impl GeodesicMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }
}

/// Connected components in order of their smallest node; members ascending.
pub fn connected_components(graph: &NeighborGraph) -> Vec<Vec<usize>> {
    let n = graph.len();
    let mut seen = vec![false; n];
    let mut components = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut members = Vec::new();
        while let Some(u) = stack.pop() {
            members.push(u);
            for &(v, _) in graph.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        components.push(members);
    }
    components
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on distance.
        other.dist.total_cmp(&self.dist).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(graph: &NeighborGraph, source: usize, dist: &mut [f64], heap: &mut BinaryHeap<Frontier>) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    heap.clear();
    heap.push(Frontier { dist: 0.0, node: source });
    while let Some(Frontier { dist: d, node: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Frontier { dist: nd, node: v });
            }
        }
    }
}

/// Exact shortest paths from every node. Disconnected graphs are rejected.
pub fn geodesics(graph: &NeighborGraph) -> Result<GeodesicMatrix, EmbeddingError> {
    let components = connected_components(graph);
    if components.len() > 1 {
        return Err(EmbeddingError::Disconnected { components });
    }
    let n = graph.len();
    let mut m = Matrix::zeros(n, n);
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        dijkstra(graph, s, m.row_mut(s), &mut heap);
    }
    // Summation order can differ between the two directions; keep the shorter.
    for i in 0..n {
        for j in 0..i {
            let d = m[(i, j)].min(m[(j, i)]);
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    Ok(GeodesicMatrix(m))
}
