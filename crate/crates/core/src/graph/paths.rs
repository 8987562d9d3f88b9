use serde::{Deserialize, Serialize};

use super::{MetricGraph, Vertex};
use crate::error::{CoreError, Result};

/// Closed ball `{ v : d(center, v) <= radius }`, members ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vertex,
    pub radius: u32,
    pub members: Vec<Vertex>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub vertices: Vec<Vertex>,
    /// Produced by the lowest-id parent rule rather than supplied externally.
    pub canonical: bool,
}

impl GeodesicPath {
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn first(&self) -> Vertex {
        self.vertices[0]
    }

    pub fn last(&self) -> Vertex {
        *self.vertices.last().expect("non-empty path")
    }
}

pub fn ball(g: &MetricGraph, center: Vertex, radius: u32) -> Result<Ball> {
    g.check_vertex(center)?;
    let mut members: Vec<Vertex> = g
        .bfs_within(center, radius)
        .into_iter()
        .map(|(v, _)| v)
        .collect();
    members.sort_unstable();
    Ok(Ball {
        center,
        radius,
        members,
    })
}

/// Vertices at exactly `radius` from `center`, ascending.
pub fn sphere(g: &MetricGraph, center: Vertex, radius: u32) -> Vec<Vertex> {
    let mut out: Vec<Vertex> = g
        .bfs_within(center, radius)
        .into_iter()
        .filter(|&(_, d)| d == radius)
        .map(|(v, _)| v)
        .collect();
    out.sort_unstable();
    out
}

/// Canonical geodesic from `u` to `v`: walk back from `v` always stepping to
/// the lowest-id neighbor one unit closer to `u`.
pub fn geodesic(g: &MetricGraph, u: Vertex, v: Vertex) -> Result<GeodesicPath> {
    g.check_vertex(u)?;
    g.check_vertex(v)?;
    Ok(geodesic_unchecked(g, u, v))
}

pub(crate) fn geodesic_unchecked(g: &MetricGraph, u: Vertex, v: Vertex) -> GeodesicPath {
    if u == v {
        return GeodesicPath {
            vertices: vec![u],
            canonical: true,
        };
    }
    let walk = |dist: &dyn Fn(Vertex) -> u32| {
        let mut out = vec![v];
        let mut cur = v;
        while cur != u {
            let dc = dist(cur);
            cur = *g
                .neighbors(cur)
                .iter()
                .find(|&&w| dist(w) + 1 == dc)
                .expect("BFS parent exists");
            out.push(cur);
        }
        out.reverse();
        out
    };
    let vertices = match g.apsp() {
        Some(m) => walk(&|w| m.get(u, w)),
        None => {
            let row = g.bfs(u);
            walk(&|w| row[w as usize])
        }
    };
    GeodesicPath {
        vertices,
        canonical: true,
    }
}

/// Canonical side between an unordered pair: oriented from the smaller id.
pub(crate) fn canonical_side(g: &MetricGraph, a: Vertex, b: Vertex) -> Vec<Vertex> {
    geodesic_unchecked(g, a.min(b), a.max(b)).vertices
}

/// Every geodesic from `u` to `v`, in lexicographic order. Returns `None`
/// when there are more than `cap` of them.
pub fn all_geodesics(
    g: &MetricGraph,
    u: Vertex,
    v: Vertex,
    cap: usize,
) -> Option<Vec<Vec<Vertex>>> {
    let du = g.row(u);
    let dv = g.row(v);
    let total = du[v as usize];
    let mut out = Vec::new();
    let mut stack: Vec<Vertex> = vec![u];
    fn extend(
        g: &MetricGraph,
        du: &[u32],
        dv: &[u32],
        total: u32,
        v: Vertex,
        stack: &mut Vec<Vertex>,
        out: &mut Vec<Vec<Vertex>>,
        cap: usize,
    ) -> bool {
        let cur = *stack.last().unwrap();
        if cur == v {
            if out.len() == cap {
                return false;
            }
            out.push(stack.clone());
            return true;
        }
        for &w in g.neighbors(cur) {
            if du[w as usize] == du[cur as usize] + 1 && du[w as usize] + dv[w as usize] == total {
                stack.push(w);
                let ok = extend(g, du, dv, total, v, stack, out, cap);
                stack.pop();
                if !ok {
                    return false;
                }
            }
        }
        true
    }
    if extend(g, &du, &dv, total, v, &mut stack, &mut out, cap) {
        Some(out)
    } else {
        None
    }
}

/// Distance from every vertex to the nearest member of `set`.
pub fn distance_to_set(g: &MetricGraph, set: &[Vertex]) -> Vec<u32> {
    g.multi_source_bfs(set.iter().copied())
}

pub fn hausdorff_distance(g: &MetricGraph, a: &[Vertex], b: &[Vertex]) -> Result<u32> {
    if a.is_empty() || b.is_empty() {
        return Err(CoreError::EmptySet);
    }
    for &v in a.iter().chain(b) {
        g.check_vertex(v)?;
    }
    let to_b = distance_to_set(g, b);
    let to_a = distance_to_set(g, a);
    let ab = a.iter().map(|&x| to_b[x as usize]).max().unwrap();
    let ba = b.iter().map(|&y| to_a[y as usize]).max().unwrap();
    Ok(ab.max(ba))
}

/// Check that `seq` is a walk in `g` (consecutive vertices adjacent).
pub fn validate_walk(g: &MetricGraph, seq: &[Vertex]) -> Result<()> {
    if seq.is_empty() {
        return Err(CoreError::BadPath("empty vertex sequence".into()));
    }
    for &v in seq {
        g.check_vertex(v)?;
    }
    for w in seq.windows(2) {
        if !g.has_edge(w[0], w[1]) {
            return Err(CoreError::BadPath(format!(
                "{} and {} are not adjacent",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Whether `seq` is a geodesic (a walk whose length equals the endpoint distance).
pub fn is_geodesic(g: &MetricGraph, seq: &[Vertex]) -> bool {
    validate_walk(g, seq).is_ok() && g.dist(seq[0], *seq.last().unwrap()) as usize == seq.len() - 1
}
