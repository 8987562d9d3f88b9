//! Finite stand-ins for ideal-triangle barycenters and the inductive
//! embedding of the trivalent tree.
//!
//! Boundary points are replaced by tips on a sphere of radius `R`
//! ([`DirectionProxy`]); every statement is checked away from the rim of a
//! truncated graph.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::graph::generators::regular_tree;
use crate::graph::paths::{canonical_side, geodesic_unchecked, sphere, GeodesicPath};
use crate::graph::{MetricGraph, Vertex, UNREACHABLE};
use crate::numeric::{fit_qi_constant, qi_pair_holds, HalfInt};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionProxy {
    pub base: Vertex,
    pub radius: u32,
    pub tip: Vertex,
    pub ray: GeodesicPath,
}

impl DirectionProxy {
    pub fn new(g: &MetricGraph, base: Vertex, tip: Vertex) -> Result<Self> {
        g.check_vertex(base)?;
        g.check_vertex(tip)?;
        let ray = geodesic_unchecked(g, base, tip);
        Ok(DirectionProxy {
            base,
            radius: ray.len() as u32,
            tip,
            ray,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleCenter {
    pub corners: [Vertex; 3],
    pub center: Vertex,
    /// Largest of the three side distances from the center.
    pub slack: u32,
    pub side_distances: [u32; 3],
}

/// Vertex minimizing the largest distance to the three canonical sides of
/// the triangle on `t1, t2, t3`; lowest id wins ties.
pub fn triangle_center(
    g: &MetricGraph,
    t1: Vertex,
    t2: Vertex,
    t3: Vertex,
) -> Result<TriangleCenter> {
    for t in [t1, t2, t3] {
        g.check_vertex(t)?;
    }
    if t1 == t2 || t2 == t3 || t1 == t3 {
        return Err(CoreError::DegenerateTriangle);
    }
    let sides = [
        canonical_side(g, t1, t2),
        canonical_side(g, t2, t3),
        canonical_side(g, t1, t3),
    ];
    let rows: Vec<Vec<u32>> = sides
        .iter()
        .map(|s| g.multi_source_bfs(s.iter().copied()))
        .collect();
    let (slack, center) = g
        .vertices()
        .map(|v| (rows.iter().map(|r| r[v as usize]).max().unwrap(), v))
        .min()
        .expect("graph is non-empty");
    Ok(TriangleCenter {
        corners: [t1, t2, t3],
        center,
        slack,
        side_distances: [0, 1, 2].map(|i| rows[i][center as usize]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Surjectivity {
    Bounded {
        constant: u32,
        worst_vertex: Vertex,
    },
    /// Some interior vertex has no triangle of tips to be near.
    Unbounded {
        vertex: Vertex,
    },
}

fn graph_radius(g: &MetricGraph) -> u32 {
    g.vertices()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&v| g.eccentricity(v))
        .min()
        .unwrap_or(0)
}

/// Tips on `S(u, R)`, ordered so that one representative per first-step
/// branch comes first; the rest follow in ascending id.
pub(crate) fn ordered_tips(g: &MetricGraph, u: Vertex, r: u32) -> Vec<Vertex> {
    let tips = sphere(g, u, r);
    let mut branch_rep: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    for &t in &tips {
        let step = if r == 0 {
            t
        } else {
            geodesic_unchecked(g, u, t).vertices[1]
        };
        branch_rep.entry(step).or_insert(t);
    }
    let mut reps: Vec<Vertex> = branch_rep.into_values().collect();
    reps.sort_unstable();
    let rest: Vec<Vertex> = tips.iter().copied().filter(|t| !reps.contains(t)).collect();
    reps.extend(rest);
    reps
}

/// Coarse surjectivity of the barycenter map at radius `R`.
///
/// Interior vertices are those with `d(v, rim) > R/2` (all vertices when
/// the rim is empty). Each is assigned its nearest deep vertex `u`, deep
/// meaning `d(u, rim) >= R`, lowest id on ties. Triangles are formed from
/// tips on `S(u, R)`: first one tip per branch at `u`, then every other
/// triple in lexicographic order, stopping once every vertex assigned to
/// `u` is at distance 0 from some center. `L(v)` is the distance from `v`
/// to the nearest center found and the result is the max over `v`.
pub fn coarse_surjectivity_constant(g: &MetricGraph, r: u32) -> Result<Surjectivity> {
    let graph_radius = graph_radius(g);
    if r > graph_radius {
        return Err(CoreError::RadiusTooLarge {
            radius: r,
            graph_radius,
        });
    }
    let rim = g.rim_distances();
    let interior: Vec<Vertex> = g
        .vertices()
        .filter(|&v| rim[v as usize] == UNREACHABLE || 2 * rim[v as usize] > r)
        .collect();
    let deep: Vec<Vertex> = g
        .vertices()
        .filter(|&v| rim[v as usize] == UNREACHABLE || rim[v as usize] >= r)
        .collect();
    if interior.is_empty() {
        return Ok(Surjectivity::Bounded {
            constant: 0,
            worst_vertex: 0,
        });
    }
    let Some(&first_deep) = deep.first() else {
        return Ok(Surjectivity::Unbounded {
            vertex: interior[0],
        });
    };
    let to_deep = g.multi_source_bfs(deep.iter().copied());
    let is_deep: HashSet<Vertex> = deep.iter().copied().collect();
    let mut groups: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for &v in &interior {
        let reach = to_deep[v as usize];
        let u = g
            .bfs_within(v, reach)
            .into_iter()
            .filter(|&(w, d)| d == reach && is_deep.contains(&w))
            .map(|(w, _)| w)
            .min()
            .unwrap_or(first_deep);
        groups.entry(u).or_default().push(v);
    }
    let per_vertex: Vec<(Vertex, Option<u32>)> = groups
        .into_par_iter()
        .flat_map_iter(|(u, members)| {
            let rows: Vec<Vec<u32>> = members.iter().map(|&v| g.bfs(v)).collect();
            let mut best: Vec<Option<u32>> = vec![None; members.len()];
            let tips = ordered_tips(g, u, r);
            'outer: for i in 0..tips.len() {
                for j in i + 1..tips.len() {
                    for k in j + 1..tips.len() {
                        let c = triangle_center(g, tips[i], tips[j], tips[k])
                            .expect("distinct tips")
                            .center;
                        for (slot, row) in best.iter_mut().zip(&rows) {
                            let d = row[c as usize];
                            *slot = Some(slot.map_or(d, |b| b.min(d)));
                        }
                        if best.iter().all(|b| *b == Some(0)) {
                            break 'outer;
                        }
                    }
                }
            }
            members.into_iter().zip(best).collect::<Vec<_>>()
        })
        .collect();
    let mut worst = (0u32, Vertex::MAX);
    for (v, l) in per_vertex {
        match l {
            None => return Ok(Surjectivity::Unbounded { vertex: v }),
            Some(l) => {
                if l > worst.0 || (l == worst.0 && v < worst.1) {
                    worst = (l, v);
                }
            }
        }
    }
    Ok(Surjectivity::Bounded {
        constant: worst.0,
        worst_vertex: worst.1,
    })
}

/// Parameters of the inductive construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedConfig {
    /// Cap on Gromov products at each branching.
    pub c: HalfInt,
    /// Length of the image of one tree edge.
    pub d_step: u32,
    pub depth: u32,
    /// Proxy radius; sets the rim margin `R/2`.
    pub r: u32,
}

impl EmbedConfig {
    /// `C = δ`, `D_step = 2⌈C⌉ + 2`.
    pub fn from_delta(delta: HalfInt, depth: u32, r: u32) -> Self {
        EmbedConfig {
            c: delta,
            d_step: 2 * delta.ceil().max(0) as u32 + 2,
            depth,
            r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_step == 0 || (2 * self.d_step as i64) <= self.c.doubled() {
            return Err(CoreError::InvalidParams(format!(
                "D_step = {} must exceed C = {}",
                self.d_step, self.c
            )));
        }
        if self.c < HalfInt::ZERO {
            return Err(CoreError::InvalidParams("C must be non-negative".into()));
        }
        Ok(())
    }

    /// Twice the rim margin needed at a branching vertex.
    fn margin_doubled(&self) -> u64 {
        2 * self.d_step as u64 + self.r as u64
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeEmbedding {
    pub tree: MetricGraph,
    /// `images[t]` is the graph vertex of tree vertex `t`.
    pub images: Vec<Vertex>,
    /// Against the tree metric.
    pub k_measured: HalfInt,
    /// Against the tree metric scaled by `d_step`.
    pub k_scaled: HalfInt,
    pub d_step: u32,
    pub min_pair_distance: u32,
}

#[derive(Serialize, Deserialize)]
struct TreeEmbeddingRepr {
    tree_vertex_count: usize,
    tree_edges: Vec<(Vertex, Vertex)>,
    images: Vec<Vertex>,
    k_measured: HalfInt,
    k_scaled: HalfInt,
    d_step: u32,
    min_pair_distance: u32,
}

impl Serialize for TreeEmbedding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TreeEmbeddingRepr {
            tree_vertex_count: self.tree.vertex_count(),
            tree_edges: self.tree.edges(),
            images: self.images.clone(),
            k_measured: self.k_measured,
            k_scaled: self.k_scaled,
            d_step: self.d_step,
            min_pair_distance: self.min_pair_distance,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TreeEmbedding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = TreeEmbeddingRepr::deserialize(d)?;
        let tree = if r.tree_edges.is_empty() {
            MetricGraph::singleton()
        } else {
            MetricGraph::from_edges(r.tree_vertex_count, &r.tree_edges)
                .map_err(serde::de::Error::custom)?
        };
        Ok(TreeEmbedding {
            tree,
            images: r.images,
            k_measured: r.k_measured,
            k_scaled: r.k_scaled,
            d_step: r.d_step,
            min_pair_distance: r.min_pair_distance,
        })
    }
}

/// Distances in `g` between all pairs of `points`, from one BFS per point.
fn image_distances(g: &MetricGraph, points: &[Vertex]) -> Vec<Vec<u32>> {
    points
        .par_iter()
        .map(|&p| {
            let row = g.row(p);
            points.iter().map(|&q| row[q as usize]).collect()
        })
        .collect()
}

impl TreeEmbedding {
    /// Measure distortion of an arbitrary map from `tree` into `g`.
    pub fn measure(
        g: &MetricGraph,
        tree: MetricGraph,
        images: Vec<Vertex>,
        d_step: u32,
    ) -> Result<Self> {
        if images.len() != tree.vertex_count() {
            return Err(CoreError::InvalidParams(format!(
                "{} images for {} tree vertices",
                images.len(),
                tree.vertex_count()
            )));
        }
        for &v in &images {
            g.check_vertex(v)?;
        }
        let dg = image_distances(g, &images);
        let n = images.len();
        let mut raw = Vec::new();
        let mut scaled = Vec::new();
        let mut min_pair = if n > 1 { u32::MAX } else { 0 };
        for s in 0..n {
            for t in s + 1..n {
                let dt = tree.dist(s as Vertex, t as Vertex) as u64;
                let d = dg[s][t];
                raw.push((dt, d as u64));
                scaled.push((dt * d_step as u64, d as u64));
                min_pair = min_pair.min(d);
            }
        }
        Ok(TreeEmbedding {
            tree,
            images,
            k_measured: fit_qi_constant(raw),
            k_scaled: fit_qi_constant(scaled),
            d_step,
            min_pair_distance: min_pair,
        })
    }
}

fn product_at(g: &MetricGraph, a: Vertex, b: Vertex, dya: u32, dyb: u32, cap: u32) -> HalfInt {
    // d(a, b) <= d(y, a) + d(y, b) <= cap, so a bounded search suffices
    let dab = g
        .bfs_within(a, cap)
        .into_iter()
        .find(|&(w, _)| w == b)
        .map(|(_, d)| d)
        .expect("within the triangle bound");
    HalfInt::from_doubled(dya as i64 + dyb as i64 - dab as i64)
}

fn check_interior(rim: &[u32], y: Vertex, cfg: &EmbedConfig) -> Result<()> {
    let rd = rim[y as usize];
    if rd != UNREACHABLE && 2 * (rd as u64) <= cfg.margin_doubled() {
        return Err(CoreError::NotInterior {
            vertex: y,
            rim_distance: rd,
            required: HalfInt::from_doubled(cfg.margin_doubled() as i64).to_string(),
        });
    }
    Ok(())
}

/// Two vertices on `S(y, D_step)` whose pairwise products at `y`, and
/// products with the incoming direction `x`, are all at most `C`.
pub fn find_branch_pair(
    g: &MetricGraph,
    y: Vertex,
    x: Vertex,
    cfg: &EmbedConfig,
) -> Result<(Vertex, Vertex)> {
    g.check_vertex(y)?;
    g.check_vertex(x)?;
    cfg.validate()?;
    let rim = g.rim_distances();
    check_interior(&rim, y, cfg)?;
    branch_pair(g, y, Some(x), cfg, &HashSet::new()).ok_or(CoreError::NoBranchPair {
        vertex: y,
        tree_vertex: None,
    })
}

fn branch_pair(
    g: &MetricGraph,
    y: Vertex,
    x: Option<Vertex>,
    cfg: &EmbedConfig,
    used: &HashSet<Vertex>,
) -> Option<(Vertex, Vertex)> {
    let d = cfg.d_step;
    let cap = 2 * d;
    let candidates: Vec<Vertex> = sphere(g, y, d)
        .into_iter()
        .filter(|v| !used.contains(v))
        .collect();
    let dyx = x.map(|x| (x, g.row(y)[x as usize]));
    let ok_with_x = |c: Vertex| match dyx {
        Some((x, dx)) => product_at(g, x, c, dx, d, dx + d) <= cfg.c,
        None => true,
    };
    let good: Vec<Vertex> = candidates.into_iter().filter(|&c| ok_with_x(c)).collect();
    for (i, &a) in good.iter().enumerate() {
        for &b in &good[i + 1..] {
            if product_at(g, a, b, d, d, cap) <= cfg.c {
                return Some((a, b));
            }
        }
    }
    None
}

fn initial_triple(g: &MetricGraph, root: Vertex, cfg: &EmbedConfig) -> Option<[Vertex; 3]> {
    let d = cfg.d_step;
    let tips = sphere(g, root, d);
    let ok = |a: Vertex, b: Vertex| product_at(g, a, b, d, d, 2 * d) <= cfg.c;
    for i in 0..tips.len() {
        for j in i + 1..tips.len() {
            if !ok(tips[i], tips[j]) {
                continue;
            }
            for k in j + 1..tips.len() {
                if ok(tips[i], tips[k]) && ok(tips[j], tips[k]) {
                    return Some([tips[i], tips[j], tips[k]]);
                }
            }
        }
    }
    None
}

/// Embed the trivalent tree of depth `cfg.depth` breadth-first: three
/// spread-out points around `root`, then two new branch points beyond each
/// current leaf. Images stay injective because used vertices are skipped.
pub fn embed_t3(g: &MetricGraph, root: Vertex, cfg: &EmbedConfig) -> Result<TreeEmbedding> {
    g.check_vertex(root)?;
    let tree = regular_tree(3, cfg.depth as usize);
    if cfg.depth == 0 {
        return TreeEmbedding::measure(g, tree, vec![root], cfg.d_step);
    }
    cfg.validate()?;
    let rim = g.rim_distances();
    let rd = rim[root as usize];
    // images sit up to d_step * depth from the root and the last branching
    // happens one step earlier, so the root needs this much room
    if rd != UNREACHABLE
        && 2 * rd as u64 <= 2 * (cfg.d_step as u64 * cfg.depth as u64) + cfg.r as u64
    {
        return Err(CoreError::DepthExceedsGraph {
            depth: cfg.depth,
            rim_distance: rd,
        });
    }
    let n = tree.vertex_count();
    let mut images = vec![UNREACHABLE; n];
    let mut used = HashSet::new();
    images[0] = root;
    used.insert(root);
    let first = initial_triple(g, root, cfg).ok_or(CoreError::NoBranchPair {
        vertex: root,
        tree_vertex: Some(0),
    })?;
    for (child, img) in tree.neighbors(0).iter().zip(first) {
        images[*child as usize] = img;
        used.insert(img);
    }
    for t in 1..n as Vertex {
        let children: Vec<Vertex> = tree
            .neighbors(t)
            .iter()
            .copied()
            .filter(|&c| c > t)
            .collect();
        if children.is_empty() {
            continue;
        }
        let parent = tree.neighbors(t)[0];
        let y = images[t as usize];
        let x = images[parent as usize];
        check_interior(&rim, y, cfg)?;
        let (a, b) = branch_pair(g, y, Some(x), cfg, &used).ok_or(CoreError::NoBranchPair {
            vertex: y,
            tree_vertex: Some(t),
        })?;
        images[children[0] as usize] = a;
        images[children[1] as usize] = b;
        used.insert(a);
        used.insert(b);
    }
    TreeEmbedding::measure(g, tree, images, cfg.d_step)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub injective: bool,
    pub k: HalfInt,
    pub violations: usize,
    pub min_pair_distance: u32,
    pub pass: bool,
}

/// Re-check every tree pair against `emb.k_measured`, plus injectivity.
pub fn verify_embedding(g: &MetricGraph, emb: &TreeEmbedding) -> EmbeddingReport {
    let mut seen = HashMap::new();
    let injective = emb
        .images
        .iter()
        .enumerate()
        .all(|(t, &v)| *seen.entry(v).or_insert(t) == t);
    let dg = image_distances(g, &emb.images);
    let n = emb.images.len();
    let mut violations = 0;
    let mut min_pair = if n > 1 { u32::MAX } else { 0 };
    for s in 0..n {
        for t in s + 1..n {
            let dt = emb.tree.dist(s as Vertex, t as Vertex) as u64;
            if !qi_pair_holds(emb.k_measured, dt, dg[s][t] as u64) {
                violations += 1;
            }
            min_pair = min_pair.min(dg[s][t]);
        }
    }
    EmbeddingReport {
        injective,
        k: emb.k_measured,
        violations,
        min_pair_distance: min_pair,
        pass: injective && violations == 0 && (n == 1 || min_pair > 0),
    }
}
