//! Finite connected graphs with unit-length edges.
//!
//! A [`MetricGraph`] is immutable once built. All-pairs distances are
//! materialized lazily on the first call that needs them and shared by every
//! later reader; graphs above [`APSP_LIMIT`] vertices fall back to one BFS per
//! query source.

mod blocks;
pub mod generators;
pub mod io;
pub mod paths;

use std::collections::{HashSet, VecDeque};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub use blocks::biconnected_blocks;
pub use generators::{FreeGroupBall, GraphSpec};
pub use paths::{Ball, GeodesicPath};

pub type Vertex = u32;

/// Largest vertex count for which the full distance matrix is cached.
pub const APSP_LIMIT: usize = 4096;

pub const UNREACHABLE: u32 = u32::MAX;

/// Dense all-pairs shortest-path table; entries are hop counts.
#[derive(Debug)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u16>,
}

impl DistanceMatrix {
    #[inline]
    pub fn get(&self, u: Vertex, v: Vertex) -> u32 {
        self.data[u as usize * self.n + v as usize] as u32
    }

    #[inline]
    pub fn row(&self, u: Vertex) -> &[u16] {
        let start = u as usize * self.n;
        &self.data[start..start + self.n]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Clone, Debug)]
pub struct MetricGraph {
    adjacency: Vec<Vec<Vertex>>,
    edge_count: usize,
    max_valence: usize,
    apsp: OnceLock<Arc<DistanceMatrix>>,
}

impl PartialEq for MetricGraph {
    fn eq(&self, other: &Self) -> bool {
        self.adjacency == other.adjacency
    }
}

impl Eq for MetricGraph {}

/// Build a validated graph from an edge list with dense ids `0..n-1`.
pub fn build_graph(edges: &[(Vertex, Vertex)]) -> Result<MetricGraph> {
    if edges.is_empty() {
        return Err(CoreError::EmptyGraph);
    }
    let n = edges.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) as usize + 1;
    let graph = MetricGraph::from_edges(n, edges)?;
    if let Some(v) = (0..n).find(|&v| graph.adjacency[v].is_empty()) {
        return Err(CoreError::SparseVertexIds { missing: v as u32 });
    }
    Ok(graph)
}

impl MetricGraph {
    /// Graph on `n` vertices; rejects self-loops, duplicate edges and
    /// disconnected results.
    pub fn from_edges(n: usize, edges: &[(Vertex, Vertex)]) -> Result<Self> {
        let graph = Self::from_edges_unchecked_connectivity(n, edges)?;
        if n == 0 {
            return Err(CoreError::EmptyGraph);
        }
        if let Some(v) = graph.first_unreached() {
            return Err(CoreError::DisconnectedGraph { unreached: v });
        }
        Ok(graph)
    }

    /// Like [`MetricGraph::from_edges`] but allows several components. Used
    /// internally when validating candidate fibers.
    pub(crate) fn from_edges_unchecked_connectivity(
        n: usize,
        edges: &[(Vertex, Vertex)],
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(edges.len());
        for &(u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(CoreError::InvalidVertex {
                    vertex: u.max(v),
                    vertex_count: n,
                });
            }
            if u == v {
                return Err(CoreError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(CoreError::DuplicateEdge(key.0, key.1));
            }
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let max_valence = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(MetricGraph {
            adjacency,
            edge_count: seen.len(),
            max_valence,
            apsp: OnceLock::new(),
        })
    }

    pub fn singleton() -> Self {
        MetricGraph {
            adjacency: vec![Vec::new()],
            edge_count: 0,
            max_valence: 0,
            apsp: OnceLock::new(),
        }
    }

    fn first_unreached(&self) -> Option<Vertex> {
        if self.adjacency.is_empty() {
            return None;
        }
        let dist = self.bfs(0);
        dist.iter()
            .position(|&d| d == UNREACHABLE)
            .map(|v| v as Vertex)
    }

    pub(crate) fn is_connected(&self) -> bool {
        self.first_unreached().is_none()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn max_valence(&self) -> usize {
        self.max_valence
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        0..self.adjacency.len() as Vertex
    }

    #[inline]
    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.adjacency[v as usize]
    }

    pub fn valence(&self, v: Vertex) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.adjacency[u as usize].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> Vec<(Vertex, Vertex)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (u, list) in self.adjacency.iter().enumerate() {
            for &v in list {
                if (u as Vertex) < v {
                    out.push((u as Vertex, v));
                }
            }
        }
        out
    }

    pub fn check_vertex(&self, v: Vertex) -> Result<()> {
        if (v as usize) < self.adjacency.len() {
            Ok(())
        } else {
            Err(CoreError::InvalidVertex {
                vertex: v,
                vertex_count: self.adjacency.len(),
            })
        }
    }

    /// Hop distances from `source`; unreachable vertices get [`UNREACHABLE`].
    pub fn bfs(&self, source: Vertex) -> Vec<u32> {
        self.multi_source_bfs(std::iter::once(source))
    }

    pub fn multi_source_bfs<I: IntoIterator<Item = Vertex>>(&self, sources: I) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.adjacency.len()];
        let mut queue = VecDeque::new();
        for s in sources {
            if dist[s as usize] != 0 {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &w in &self.adjacency[u as usize] {
                if dist[w as usize] == UNREACHABLE {
                    dist[w as usize] = du + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Vertices within `radius` of `source` paired with their distance, in
    /// BFS order.
    pub fn bfs_within(&self, source: Vertex, radius: u32) -> Vec<(Vertex, u32)> {
        let mut seen = HashSet::new();
        let mut out = vec![(source, 0)];
        seen.insert(source);
        let mut head = 0;
        while head < out.len() {
            let (u, du) = out[head];
            head += 1;
            if du == radius {
                continue;
            }
            for &w in &self.adjacency[u as usize] {
                if seen.insert(w) {
                    out.push((w, du + 1));
                }
            }
        }
        out
    }

    /// The cached distance table, or `None` above [`APSP_LIMIT`].
    pub fn apsp(&self) -> Option<&DistanceMatrix> {
        let n = self.adjacency.len();
        if n > APSP_LIMIT {
            return self.apsp.get().map(Arc::as_ref);
        }
        Some(self.apsp.get_or_init(|| Arc::new(self.compute_apsp())))
    }

    /// Whether the distance table has already been built.
    pub fn apsp_materialized(&self) -> bool {
        self.apsp.get().is_some()
    }

    fn compute_apsp(&self) -> DistanceMatrix {
        let n = self.adjacency.len();
        let mut data = vec![0u16; n * n];
        if n > 0 {
            data.par_chunks_mut(n).enumerate().for_each(|(s, row)| {
                for (slot, d) in row.iter_mut().zip(self.bfs(s as Vertex)) {
                    debug_assert!(d < u16::MAX as u32);
                    *slot = d.min(u16::MAX as u32) as u16;
                }
            });
        }
        DistanceMatrix { n, data }
    }

    /// Shortest-path length between two vertices.
    pub fn distance(&self, u: Vertex, v: Vertex) -> Result<u32> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        Ok(self.dist(u, v))
    }

    /// Unchecked distance; panics on invalid ids.
    #[inline]
    pub fn dist(&self, u: Vertex, v: Vertex) -> u32 {
        match self.apsp() {
            Some(m) => m.get(u, v),
            None => {
                if u == v {
                    0
                } else {
                    self.bfs(u)[v as usize]
                }
            }
        }
    }

    /// Full distance row from `u`, from the cache when available.
    pub fn row(&self, u: Vertex) -> Vec<u32> {
        match self.apsp() {
            Some(m) => m.row(u).iter().map(|&d| d as u32).collect(),
            None => self.bfs(u),
        }
    }

    pub fn eccentricity(&self, v: Vertex) -> u32 {
        self.row(v).into_iter().max().unwrap_or(0)
    }

    pub fn diameter(&self) -> u32 {
        self.vertices()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&v| self.eccentricity(v))
            .max()
            .unwrap_or(0)
    }

    /// Rim of a truncated graph: vertices whose valence is below the maximum.
    /// Vertex-transitive graphs have an empty rim.
    pub fn rim(&self) -> Vec<Vertex> {
        self.vertices()
            .filter(|&v| self.valence(v) < self.max_valence)
            .collect()
    }

    /// Distance from each vertex to the rim; [`UNREACHABLE`] everywhere when
    /// the rim is empty.
    pub fn rim_distances(&self) -> Vec<u32> {
        self.multi_source_bfs(self.rim())
    }

    /// Subgraph induced on `vertices` (listed in the order that defines the
    /// new ids) with the old id of each new vertex.
    pub fn induced_subgraph(&self, vertices: &[Vertex]) -> Result<(MetricGraph, Vec<Vertex>)> {
        let mut index = vec![UNREACHABLE; self.adjacency.len()];
        for (i, &v) in vertices.iter().enumerate() {
            self.check_vertex(v)?;
            index[v as usize] = i as u32;
        }
        let mut edges = Vec::new();
        for (i, &v) in vertices.iter().enumerate() {
            for &w in self.neighbors(v) {
                let j = index[w as usize];
                if j != UNREACHABLE && (i as u32) < j {
                    edges.push((i as u32, j));
                }
            }
        }
        let sub = MetricGraph::from_edges(vertices.len(), &edges)?;
        Ok((sub, vertices.to_vec()))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertex_count: usize,
    edges: Vec<(Vertex, Vertex)>,
}

impl Serialize for MetricGraph {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        GraphRepr {
            vertex_count: self.vertex_count(),
            edges: self.edges(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MetricGraph {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = GraphRepr::deserialize(d)?;
        MetricGraph::from_edges(repr.vertex_count, &repr.edges).map_err(serde::de::Error::custom)
    }
}
