//! Graph bundles over the truncated ray `[0, N]`.
//!
//! A bundle is a sequence of connected fibers `F_0..F_N` with cross edges
//! between consecutive fibers such that every vertex has a neighbor in each
//! adjacent fiber. The total space is the disjoint union of the fibers plus
//! the cross edges.
//!
//! Total vertex ids are assigned level by level: `(i, v)` maps to
//! `offset(i) + v`.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycenter::{ordered_tips, triangle_center};
use crate::error::{CoreError, Result};
use crate::graph::generators::{
    parse_word, reduce, word_to_string, FreeGroupBall, GraphSpec, Letter,
};
use crate::graph::io::{format_edge_list, parse_edge_list};
use crate::graph::{MetricGraph, Vertex};
use crate::numeric::{fit_qi_constant, HalfInt};

/// Radius up to which the properness profile is measured by default.
pub const DEFAULT_PROFILE_RADIUS: u32 = 8;

/// Fibers above this size get a sampled rather than exhaustive pair scan.
const EXHAUSTIVE_PAIR_LIMIT: usize = 300;
const SAMPLED_PAIRS: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BundleKind {
    Product,
    Horoball,
    /// Consecutive fibers glued along a graph automorphism.
    Glued,
    /// Free-group balls glued along an endomorphism; `truncated` lists the
    /// vertices whose image left the ball and was cut back to the rim.
    Automorphism {
        rank: usize,
        images: Vec<String>,
        truncated: Vec<Vertex>,
    },
    Sampled,
    Custom,
}

/// One fiber as supplied to [`validate_bundle`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberSpec {
    pub vertex_count: usize,
    pub edges: Vec<(Vertex, Vertex)>,
}

impl FiberSpec {
    pub fn from_graph(g: &MetricGraph) -> Self {
        FiberSpec {
            vertex_count: g.vertex_count(),
            edges: g.edges(),
        }
    }
}

/// Unvalidated bundle data. `cross_edges[i]` holds pairs `(v, w)` with `v`
/// in `F_i` and `w` in `F_{i+1}`, both as fiber-local ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BundleCandidate {
    pub fibers: Vec<FiberSpec>,
    pub cross_edges: Vec<Vec<(Vertex, Vertex)>>,
    /// Designated upward step per level and vertex, when the bundle comes
    /// with a gluing map. Each entry must be a cross edge.
    pub preferred_up: Option<Vec<Vec<Vertex>>>,
    pub kind: BundleKind,
}

#[derive(Clone, Debug)]
pub struct GraphBundle {
    fibers: Vec<MetricGraph>,
    offsets: Vec<Vertex>,
    cross_edges: Vec<Vec<(Vertex, Vertex)>>,
    up: Vec<Vec<Vec<Vertex>>>,
    down: Vec<Vec<Vec<Vertex>>>,
    preferred_up: Vec<Vec<Vertex>>,
    preferred_down: Vec<Vec<Vertex>>,
    total: MetricGraph,
    profile: Vec<u32>,
    kind: BundleKind,
}

/// Check the bundle axioms and measure the properness profile up to
/// `r_max`.
pub fn validate_bundle(candidate: BundleCandidate, r_max: u32) -> Result<GraphBundle> {
    let BundleCandidate {
        fibers,
        cross_edges,
        preferred_up,
        kind,
    } = candidate;
    if fibers.is_empty() {
        return Err(CoreError::InvalidParams("bundle has no fibers".into()));
    }
    let top = fibers.len() - 1;
    if cross_edges.len() != top {
        return Err(CoreError::InvalidParams(format!(
            "{} fibers need {} cross-edge levels, got {}",
            fibers.len(),
            top,
            cross_edges.len()
        )));
    }
    let mut graphs = Vec::with_capacity(fibers.len());
    for (level, f) in fibers.iter().enumerate() {
        if f.vertex_count == 0 {
            return Err(CoreError::FiberDisconnected { level });
        }
        let g = MetricGraph::from_edges_unchecked_connectivity(f.vertex_count, &f.edges)?;
        if !g.is_connected() {
            return Err(CoreError::FiberDisconnected { level });
        }
        graphs.push(g);
    }
    let sizes: Vec<usize> = graphs.iter().map(MetricGraph::vertex_count).collect();
    let mut up: Vec<Vec<Vec<Vertex>>> = sizes[..top].iter().map(|&n| vec![Vec::new(); n]).collect();
    let mut down: Vec<Vec<Vec<Vertex>>> = sizes.iter().map(|&n| vec![Vec::new(); n]).collect();
    let mut levels = Vec::with_capacity(top);
    for (i, edges) in cross_edges.into_iter().enumerate() {
        let set: BTreeSet<(Vertex, Vertex)> = edges.iter().copied().collect();
        if set.len() != edges.len() {
            let dup = edges
                .iter()
                .enumerate()
                .find(|(j, e)| edges[..*j].contains(e))
                .map(|(_, &e)| e)
                .unwrap();
            return Err(CoreError::DuplicateEdge(dup.0, dup.1));
        }
        for &(v, w) in &set {
            if v as usize >= sizes[i] || w as usize >= sizes[i + 1] {
                return Err(CoreError::BadCrossEdge(v, w, i));
            }
            up[i][v as usize].push(w);
            down[i + 1][w as usize].push(v);
        }
        levels.push(set.into_iter().collect::<Vec<_>>());
    }
    for (i, per_vertex) in up.iter().enumerate() {
        if let Some(v) = per_vertex.iter().position(Vec::is_empty) {
            return Err(CoreError::MissingCrossEdge {
                level: i,
                vertex: v as Vertex,
                toward: i + 1,
            });
        }
    }
    for (i, per_vertex) in down.iter().enumerate().skip(1) {
        if let Some(v) = per_vertex.iter().position(Vec::is_empty) {
            return Err(CoreError::MissingCrossEdge {
                level: i,
                vertex: v as Vertex,
                toward: i - 1,
            });
        }
    }
    for lists in up.iter_mut().chain(down.iter_mut()) {
        for l in lists.iter_mut() {
            l.sort_unstable();
        }
    }

    let preferred_up = match preferred_up {
        Some(p) => {
            if p.len() != top || p.iter().zip(&sizes).any(|(m, &n)| m.len() != n) {
                return Err(CoreError::InvalidParams(
                    "gluing map has the wrong shape".into(),
                ));
            }
            for (i, m) in p.iter().enumerate() {
                for (v, &w) in m.iter().enumerate() {
                    if up[i][v].binary_search(&w).is_err() {
                        return Err(CoreError::BadCrossEdge(v as Vertex, w, i));
                    }
                }
            }
            p
        }
        None => up
            .iter()
            .map(|lists| lists.iter().map(|l| l[0]).collect())
            .collect(),
    };
    // downward step: the lowest preimage under the preferred upward map,
    // else the lowest cross neighbor
    let mut preferred_down: Vec<Vec<Vertex>> = down
        .iter()
        .map(|lists| {
            lists
                .iter()
                .map(|l| l.first().copied().unwrap_or(0))
                .collect()
        })
        .collect();
    for (i, m) in preferred_up.iter().enumerate() {
        let mut seen = vec![false; sizes[i + 1]];
        for (v, &w) in m.iter().enumerate() {
            if !seen[w as usize] {
                seen[w as usize] = true;
                preferred_down[i + 1][w as usize] = v as Vertex;
            }
        }
    }

    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut acc: Vertex = 0;
    for &n in &sizes {
        offsets.push(acc);
        acc += n as Vertex;
    }
    offsets.push(acc);
    let mut total_edges = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        total_edges.extend(
            g.edges()
                .into_iter()
                .map(|(u, v)| (u + offsets[i], v + offsets[i])),
        );
    }
    for (i, edges) in levels.iter().enumerate() {
        total_edges.extend(
            edges
                .iter()
                .map(|&(v, w)| (v + offsets[i], w + offsets[i + 1])),
        );
    }
    let total = MetricGraph::from_edges_unchecked_connectivity(acc as usize, &total_edges)?;
    if !total.is_connected() {
        return Err(CoreError::TotalDisconnected);
    }
    graphs.par_iter().for_each(|g| {
        g.apsp();
    });

    let mut bundle = GraphBundle {
        fibers: graphs,
        offsets,
        cross_edges: levels,
        up,
        down,
        preferred_up,
        preferred_down,
        total,
        profile: Vec::new(),
        kind,
    };
    bundle.profile = bundle.measure_profile(r_max);
    Ok(bundle)
}

impl GraphBundle {
    /// Number of fibers, `N + 1`.
    pub fn level_count(&self) -> usize {
        self.fibers.len()
    }

    /// The last base level `N`.
    pub fn top(&self) -> usize {
        self.fibers.len() - 1
    }

    pub fn fiber(&self, i: usize) -> &MetricGraph {
        &self.fibers[i]
    }

    pub fn fibers(&self) -> &[MetricGraph] {
        &self.fibers
    }

    pub fn cross_edges(&self, i: usize) -> &[(Vertex, Vertex)] {
        &self.cross_edges[i]
    }

    /// Cross neighbors of `(i, v)` in `F_{i+1}`, ascending.
    pub fn up(&self, i: usize, v: Vertex) -> &[Vertex] {
        &self.up[i][v as usize]
    }

    /// Cross neighbors of `(i, v)` in `F_{i-1}`, ascending.
    pub fn down(&self, i: usize, v: Vertex) -> &[Vertex] {
        &self.down[i][v as usize]
    }

    /// The designated upward step: the gluing map when there is one, else
    /// the lowest-id cross neighbor.
    pub fn step_up(&self, i: usize, v: Vertex) -> Vertex {
        self.preferred_up[i][v as usize]
    }

    pub fn step_down(&self, i: usize, v: Vertex) -> Vertex {
        self.preferred_down[i][v as usize]
    }

    pub fn total(&self) -> &MetricGraph {
        &self.total
    }

    pub fn kind(&self) -> &BundleKind {
        &self.kind
    }

    pub fn total_id(&self, level: usize, v: Vertex) -> Vertex {
        self.offsets[level] + v
    }

    /// Level and fiber-local id of a total vertex.
    pub fn locate(&self, x: Vertex) -> (usize, Vertex) {
        let level = self.offsets.partition_point(|&o| o <= x) - 1;
        (level, x - self.offsets[level])
    }

    pub fn projection(&self, x: Vertex) -> usize {
        self.locate(x).0
    }

    /// `f̂(r)` for `r = 0..=r_max`: the largest fiber distance between two
    /// vertices of one fiber at total distance at most `r`.
    pub fn properness_profile(&self) -> &[u32] {
        &self.profile
    }

    pub fn f_hat(&self, r: u32) -> Option<u32> {
        self.profile.get(r as usize).copied()
    }

    /// `f̂(r)`, measuring afresh when `r` lies beyond the stored profile.
    pub fn f_hat_measured(&self, r: u32) -> u32 {
        self.f_hat(r)
            .unwrap_or_else(|| self.measure_profile(r)[r as usize])
    }

    /// Measure `f̂` up to a larger radius than the one computed at
    /// validation.
    pub fn with_profile_radius(mut self, r_max: u32) -> Self {
        if r_max as usize + 1 > self.profile.len() {
            self.profile = self.measure_profile(r_max);
        }
        self
    }

    /// `max(2, largest fiber valence)`.
    pub fn fiber_valence_bound(&self) -> usize {
        self.fibers
            .iter()
            .map(MetricGraph::max_valence)
            .max()
            .unwrap_or(0)
            .max(2)
    }

    fn measure_profile(&self, r_max: u32) -> Vec<u32> {
        let n = self.total.vertex_count();
        let width = r_max as usize + 1;
        // per-thread scratch: bounded BFS with a reusable distance buffer
        let mut prof = (0..n as Vertex)
            .into_par_iter()
            .fold(
                || (vec![0u32; width], vec![u32::MAX; n], Vec::new()),
                |(mut acc, mut dist, mut seen): (Vec<u32>, Vec<u32>, Vec<Vertex>), x| {
                    let (li, lx) = self.locate(x);
                    let lo = self.offsets[li];
                    let hi = self.offsets[li + 1];
                    dist[x as usize] = 0;
                    seen.push(x);
                    let mut head = 0;
                    while head < seen.len() {
                        let u = seen[head];
                        head += 1;
                        let du = dist[u as usize];
                        if u > x && u < hi {
                            let fd = self.fibers[li].dist(lx, u - lo);
                            acc[du as usize] = acc[du as usize].max(fd);
                        }
                        if du == r_max {
                            continue;
                        }
                        for &w in self.total.neighbors(u) {
                            if dist[w as usize] == u32::MAX {
                                dist[w as usize] = du + 1;
                                seen.push(w);
                            }
                        }
                    }
                    for &u in &seen {
                        dist[u as usize] = u32::MAX;
                    }
                    seen.clear();
                    (acc, dist, seen)
                },
            )
            .map(|(acc, _, _)| acc)
            .reduce(
                || vec![0u32; width],
                |a, b| a.iter().zip(&b).map(|(x, y)| *x.max(y)).collect(),
            );
        for r in 1..prof.len() {
            prof[r] = prof[r].max(prof[r - 1]);
        }
        prof
    }

    /// The data this bundle was validated from.
    pub fn to_candidate(&self) -> BundleCandidate {
        BundleCandidate {
            fibers: self.fibers.iter().map(FiberSpec::from_graph).collect(),
            cross_edges: self.cross_edges.clone(),
            preferred_up: Some(self.preferred_up.clone()),
            kind: self.kind.clone(),
        }
    }
}

fn vertical_edges(n: usize) -> Vec<(Vertex, Vertex)> {
    (0..n as Vertex).map(|v| (v, v)).collect()
}

fn assemble(
    fibers: Vec<FiberSpec>,
    cross: Vec<Vec<(Vertex, Vertex)>>,
    preferred: Option<Vec<Vec<Vertex>>>,
    kind: BundleKind,
) -> GraphBundle {
    validate_bundle(
        BundleCandidate {
            fibers,
            cross_edges: cross,
            preferred_up: preferred,
            kind,
        },
        DEFAULT_PROFILE_RADIUS,
    )
    .expect("constructor output satisfies the bundle axioms")
}

/// `F × [0, N]` with vertical edges only.
pub fn product_bundle(f: &MetricGraph, levels: usize) -> GraphBundle {
    let spec = FiberSpec::from_graph(f);
    let n = f.vertex_count();
    assemble(
        vec![spec; levels + 1],
        vec![vertical_edges(n); levels],
        None,
        BundleKind::Product,
    )
}

/// Combinatorial horoball over `F`, truncated at level `N`: level `i`
/// joins `u` and `v` whenever `0 < d_F(u, v) <= 2^i`, and `(u, i)` is
/// joined to `(u, i + 1)`.
pub fn horoball_bundle(f: &MetricGraph, levels: usize) -> GraphBundle {
    let n = f.vertex_count();
    let diam = f.diameter();
    let fibers: Vec<FiberSpec> = (0..=levels)
        .into_par_iter()
        .map(|i| {
            let reach = if i >= 31 {
                diam
            } else {
                (1u32 << i).min(diam.max(1))
            };
            let mut edges = Vec::new();
            for u in f.vertices() {
                for (v, _) in f.bfs_within(u, reach) {
                    if v > u {
                        edges.push((u, v));
                    }
                }
            }
            edges.sort_unstable();
            FiberSpec {
                vertex_count: n,
                edges,
            }
        })
        .collect();
    assemble(
        fibers,
        vec![vertical_edges(n); levels],
        None,
        BundleKind::Horoball,
    )
}

fn check_automorphism(f: &MetricGraph, map: &[Vertex]) -> Result<()> {
    let n = f.vertex_count();
    if map.len() != n {
        return Err(CoreError::InvalidParams(format!(
            "map has {} entries for {n} vertices",
            map.len()
        )));
    }
    let mut hit = vec![false; n];
    for &w in map {
        if w as usize >= n || std::mem::replace(&mut hit[w as usize], true) {
            return Err(CoreError::InvalidParams("map is not a bijection".into()));
        }
    }
    for (u, v) in f.edges() {
        if !f.has_edge(map[u as usize], map[v as usize]) {
            return Err(CoreError::InvalidParams(format!(
                "map does not preserve edge ({u}, {v})"
            )));
        }
    }
    Ok(())
}

/// `F × [0, N]` with `(v, i)` joined to `(map(v), i + 1)` for a graph
/// automorphism `map` of `F`.
pub fn glued_bundle(f: &MetricGraph, map: &[Vertex], levels: usize) -> Result<GraphBundle> {
    check_automorphism(f, map)?;
    let cross: Vec<(Vertex, Vertex)> = map
        .iter()
        .enumerate()
        .map(|(v, &w)| (v as Vertex, w))
        .collect();
    Ok(assemble(
        vec![FiberSpec::from_graph(f); levels + 1],
        vec![cross; levels],
        Some(vec![map.to_vec(); levels]),
        BundleKind::Glued,
    ))
}

/// Rotate the children of vertex 0 one step and carry every subtree along.
/// Defined for rooted trees with BFS ids whose vertices at equal depth have
/// equal child counts, such as [`crate::graph::generators::regular_tree`].
pub fn root_rotation(tree: &MetricGraph) -> Result<Vec<Vertex>> {
    let n = tree.vertex_count();
    let children = |v: Vertex| -> Vec<Vertex> {
        tree.neighbors(v)
            .iter()
            .copied()
            .filter(|&w| w > v)
            .collect()
    };
    let mut map = vec![Vertex::MAX; n];
    map[0] = 0;
    let root_children = children(0);
    let m = root_children.len();
    let mut queue = std::collections::VecDeque::new();
    for (j, &c) in root_children.iter().enumerate() {
        map[c as usize] = root_children[(j + 1) % m];
        queue.push_back(c);
    }
    while let Some(v) = queue.pop_front() {
        let (a, b) = (children(v), children(map[v as usize]));
        if a.len() != b.len() {
            return Err(CoreError::InvalidParams(format!(
                "subtrees at {v} and {} differ",
                map[v as usize]
            )));
        }
        for (&x, &y) in a.iter().zip(&b) {
            map[x as usize] = y;
            queue.push_back(x);
        }
    }
    check_automorphism(tree, &map)?;
    Ok(map)
}

/// A fixed nontrivial automorphism for generated families: reflection of
/// paths and grids, rotation of cycles, root rotation of regular trees.
pub fn standard_automorphism(spec: &GraphSpec) -> Result<Vec<Vertex>> {
    match *spec {
        GraphSpec::Path { n } => Ok((0..n as Vertex).rev().collect()),
        GraphSpec::Cycle { n } => Ok((0..n as Vertex).map(|v| (v + 1) % n as Vertex).collect()),
        GraphSpec::Grid { width, height } => Ok((0..height)
            .flat_map(|y| (0..width).map(move |x| (y * width + (width - 1 - x)) as Vertex))
            .collect()),
        GraphSpec::RegularTree { .. } | GraphSpec::Star { .. } => root_rotation(&spec.build()?),
        ref other => Err(CoreError::InvalidParams(format!(
            "no standard automorphism for {}",
            other.label()
        ))),
    }
}

fn apply_endomorphism(word: &[Letter], images: &[Vec<Letter>]) -> Vec<Letter> {
    let mut out = Vec::new();
    for &l in word {
        let img = &images[(l.unsigned_abs() - 1) as usize];
        if l > 0 {
            out.extend_from_slice(img);
        } else {
            out.extend(img.iter().rev().map(|&x| -x));
        }
    }
    reduce(&out)
}

/// Free-group balls of radius `fiber_radius` glued along the endomorphism
/// sending generator `j` to `word_images[j]`. Images longer than the radius
/// are cut back to their length-`radius` prefix; vertices missed by the map
/// get an identity cross edge from below.
pub fn automorphism_bundle(
    rank: usize,
    word_images: &[String],
    levels: usize,
    fiber_radius: usize,
) -> Result<GraphBundle> {
    if rank == 0 || word_images.len() != rank {
        return Err(CoreError::InvalidParams(format!(
            "rank {rank} needs {rank} generator images, got {}",
            word_images.len()
        )));
    }
    let images: Vec<Vec<Letter>> = word_images
        .iter()
        .map(|s| parse_word(s))
        .collect::<Result<_>>()?;
    if images
        .iter()
        .flatten()
        .any(|l| l.unsigned_abs() as usize > rank)
    {
        return Err(CoreError::InvalidParams(
            "image uses a letter beyond the rank".into(),
        ));
    }
    let ball = FreeGroupBall::new(rank, fiber_radius);
    let mut seen: HashMap<Vec<Letter>, Vertex> = HashMap::new();
    let mut map = Vec::with_capacity(ball.words.len());
    let mut truncated = Vec::new();
    for (v, w) in ball.words.iter().enumerate() {
        let img = apply_endomorphism(w, &images);
        if let Some(&other) = seen.get(&img) {
            return Err(CoreError::NotInjectiveOnBall(
                ball.word_string(other),
                ball.word_string(v as Vertex),
            ));
        }
        seen.insert(img.clone(), v as Vertex);
        let cut = if img.len() > fiber_radius {
            truncated.push(v as Vertex);
            &img[..fiber_radius]
        } else {
            &img[..]
        };
        map.push(
            ball.vertex_of(cut)
                .expect("reduced prefix lies in the ball"),
        );
    }
    let n = ball.words.len();
    let mut cross: Vec<(Vertex, Vertex)> = map
        .iter()
        .enumerate()
        .map(|(v, &w)| (v as Vertex, w))
        .collect();
    let mut hit = vec![false; n];
    for &w in &map {
        hit[w as usize] = true;
    }
    cross.extend(
        (0..n)
            .filter(|&u| !hit[u])
            .map(|u| (u as Vertex, u as Vertex)),
    );
    cross.sort_unstable();
    cross.dedup();
    Ok(assemble(
        vec![FiberSpec::from_graph(&ball.graph); levels + 1],
        vec![cross; levels],
        Some(vec![map; levels]),
        BundleKind::Automorphism {
            rank,
            images: images.iter().map(|w| word_to_string(w)).collect(),
            truncated,
        },
    ))
}

/// Pairs `(x, y)` with `x < y` used for a pair scan of an `n`-vertex fiber.
fn scan_pairs(n: usize, seed: u64) -> (Vec<(Vertex, Vertex)>, bool) {
    if n <= EXHAUSTIVE_PAIR_LIMIT {
        let pairs = (0..n as Vertex)
            .flat_map(|x| (x + 1..n as Vertex).map(move |y| (x, y)))
            .collect();
        return (pairs, true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..SAMPLED_PAIRS)
        .map(|_| loop {
            let x = rng.gen_range(0..n as Vertex);
            let y = rng.gen_range(0..n as Vertex);
            if x != y {
                break (x.min(y), x.max(y));
            }
        })
        .collect();
    (pairs, false)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiberMap {
    pub level: usize,
    pub assignment: Vec<Vertex>,
    pub k_measured: HalfInt,
    pub exhaustive: bool,
    pub pairs_checked: usize,
}

/// The natural map `F_i -> F_{i+1}` along cross edges, with its measured
/// quasi-isometry constant.
pub fn fiber_map(b: &GraphBundle, i: usize) -> Result<FiberMap> {
    if i >= b.top() {
        return Err(CoreError::InvalidParams(format!(
            "level {i} has no fiber above it (N = {})",
            b.top()
        )));
    }
    let assignment = b.preferred_up[i].clone();
    let (src, dst) = (b.fiber(i), b.fiber(i + 1));
    let (pairs, exhaustive) = scan_pairs(src.vertex_count(), i as u64);
    let k_measured = fit_qi_constant(
        pairs
            .par_iter()
            .map(|&(x, y)| {
                (
                    src.dist(x, y) as u64,
                    dst.dist(assignment[x as usize], assignment[y as usize]) as u64,
                )
            })
            .collect::<Vec<_>>(),
    );
    Ok(FiberMap {
        level: i,
        pairs_checked: pairs.len(),
        assignment,
        k_measured,
        exhaustive,
    })
}

/// One vertex per level, `levels[i]` in `F_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QiSection {
    pub levels: Vec<Vertex>,
    pub k_measured: HalfInt,
}

impl QiSection {
    /// Build a section from per-level vertices, measuring `k` by a full
    /// pair scan in the total space.
    pub fn measure(b: &GraphBundle, levels: Vec<Vertex>) -> Result<Self> {
        if levels.len() != b.level_count() {
            return Err(CoreError::SectionMismatch(levels.len(), b.level_count()));
        }
        for (i, &v) in levels.iter().enumerate() {
            b.fiber(i).check_vertex(v)?;
        }
        let ids: Vec<Vertex> = levels
            .iter()
            .enumerate()
            .map(|(i, &v)| b.total_id(i, v))
            .collect();
        let pairs: Vec<(u64, u64)> = (0..ids.len())
            .into_par_iter()
            .flat_map_iter(|s| {
                let row = b.total().row(ids[s]);
                let ids = &ids;
                (s + 1..ids.len()).map(move |t| ((t - s) as u64, row[ids[t] as usize] as u64))
            })
            .collect();
        Ok(QiSection {
            levels,
            k_measured: fit_qi_constant(pairs),
        })
    }

    pub fn total_ids(&self, b: &GraphBundle) -> Vec<Vertex> {
        self.levels
            .iter()
            .enumerate()
            .map(|(i, &v)| b.total_id(i, v))
            .collect()
    }
}

/// Section through the total vertex `x`, extended greedily level by level
/// along designated cross edges in both directions. Fails only if the
/// measured constant exceeds `2 * k_step + 1`.
pub fn section_through(b: &GraphBundle, x: Vertex, k_step: u32) -> Result<QiSection> {
    b.total().check_vertex(x)?;
    let (level, v) = b.locate(x);
    let mut levels = vec![0; b.level_count()];
    levels[level] = v;
    for i in level..b.top() {
        levels[i + 1] = b.step_up(i, levels[i]);
    }
    for i in (1..=level).rev() {
        levels[i - 1] = b.step_down(i, levels[i]);
    }
    let s = QiSection::measure(b, levels)?;
    let ceiling = HalfInt::from_int(2 * k_step as i64 + 1);
    if s.k_measured > ceiling {
        return Err(CoreError::NotQuasigeodesic {
            k: ceiling.to_string(),
            s: 0,
            t: b.top(),
            distance: 0,
        });
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodSection {
    pub section: QiSection,
    /// Transported tips per level.
    pub tips: Vec<[Vertex; 3]>,
    /// Largest side distance of each level's center.
    pub slack: Vec<u32>,
}

/// Centers of a transported triangle of tips: three tips on `S(c, R)` in
/// `F_0` from distinct branches at the lowest-id central vertex `c` are
/// pushed up through the fiber maps and each level takes the triangle
/// center in its own fiber.
pub fn good_section(b: &GraphBundle, radius: u32) -> Result<GoodSection> {
    let f0 = b.fiber(0);
    let center = f0
        .vertices()
        .map(|v| (f0.eccentricity(v), v))
        .min()
        .map(|(_, v)| v)
        .expect("fiber is non-empty");
    let tips0 = ordered_tips(f0, center, radius);
    if tips0.len() < 3 {
        return Err(CoreError::NoDirectionTriple { level: 0 });
    }
    let mut tips = vec![[tips0[0], tips0[1], tips0[2]]];
    for i in 0..b.top() {
        let t = tips[i].map(|x| b.step_up(i, x));
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(CoreError::NoDirectionTriple { level: i + 1 });
        }
        tips.push(t);
    }
    let centers: Vec<_> = tips
        .par_iter()
        .enumerate()
        .map(|(i, t)| triangle_center(b.fiber(i), t[0], t[1], t[2]))
        .collect::<Result<_>>()?;
    let section = QiSection::measure(b, centers.iter().map(|c| c.center).collect())?;
    Ok(GoodSection {
        section,
        tips,
        slack: centers.iter().map(|c| c.slack).collect(),
    })
}

/// `d_{F_i}(s1(i), s2(i))` for every level, in the fiber path metric.
pub fn section_distance_profile(
    b: &GraphBundle,
    s1: &QiSection,
    s2: &QiSection,
) -> Result<Vec<u32>> {
    for s in [s1, s2] {
        if s.levels.len() != b.level_count() {
            return Err(CoreError::SectionMismatch(s.levels.len(), b.level_count()));
        }
    }
    Ok((0..b.level_count())
        .map(|i| b.fiber(i).dist(s1.levels[i], s2.levels[i]))
        .collect())
}

/// Serializable description of a generated bundle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BundleSpec {
    Product {
        fiber: GraphSpec,
        levels: usize,
    },
    Horoball {
        fiber: GraphSpec,
        levels: usize,
    },
    /// Glued along [`standard_automorphism`] of the fiber.
    Glued {
        fiber: GraphSpec,
        levels: usize,
    },
    Automorphism {
        rank: usize,
        images: Vec<String>,
        levels: usize,
        fiber_radius: usize,
    },
}

impl BundleSpec {
    pub fn build(&self) -> Result<GraphBundle> {
        match self {
            BundleSpec::Product { fiber, levels } => Ok(product_bundle(&fiber.build()?, *levels)),
            BundleSpec::Horoball { fiber, levels } => Ok(horoball_bundle(&fiber.build()?, *levels)),
            BundleSpec::Glued { fiber, levels } => {
                glued_bundle(&fiber.build()?, &standard_automorphism(fiber)?, *levels)
            }
            BundleSpec::Automorphism {
                rank,
                images,
                levels,
                fiber_radius,
            } => automorphism_bundle(*rank, images, *levels, *fiber_radius),
        }
    }

    pub fn levels(&self) -> usize {
        match *self {
            BundleSpec::Product { levels, .. }
            | BundleSpec::Horoball { levels, .. }
            | BundleSpec::Glued { levels, .. }
            | BundleSpec::Automorphism { levels, .. } => levels,
        }
    }

    pub fn label(&self) -> String {
        match self {
            BundleSpec::Product { fiber, levels } => {
                format!("product({}, {levels})", fiber.label())
            }
            BundleSpec::Horoball { fiber, levels } => {
                format!("horoball({}, {levels})", fiber.label())
            }
            BundleSpec::Glued { fiber, levels } => format!("glued({}, {levels})", fiber.label()),
            BundleSpec::Automorphism {
                images,
                levels,
                fiber_radius,
                ..
            } => format!(
                "automorphism({}; r={fiber_radius}, {levels})",
                images.join(",")
            ),
        }
    }
}

/// On-disk bundle: one edge-list file per fiber plus the cross edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub fibers: Vec<String>,
    pub cross_edges: Vec<Vec<[Vertex; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<BundleSpec>,
}

impl BundleManifest {
    /// Write fiber edge lists as `{stem}.fiber{i}.edges` under `dir` and
    /// return the manifest referring to them.
    pub fn write(
        b: &GraphBundle,
        dir: &Path,
        stem: &str,
        generator: Option<BundleSpec>,
    ) -> Result<Self> {
        let mut fibers = Vec::new();
        for (i, f) in b.fibers().iter().enumerate() {
            let name = format!("{stem}.fiber{i}.edges");
            std::fs::write(dir.join(&name), format_edge_list(f))?;
            fibers.push(name);
        }
        Ok(BundleManifest {
            fibers,
            cross_edges: b
                .cross_edges
                .iter()
                .map(|l| l.iter().map(|&(v, w)| [v, w]).collect())
                .collect(),
            generator,
        })
    }

    /// Read fibers relative to `base_dir` and validate. When a generator is
    /// recorded the generated bundle must have the same fibers and cross
    /// edges.
    pub fn load(&self, base_dir: &Path) -> Result<GraphBundle> {
        let mut fibers = Vec::new();
        for name in &self.fibers {
            let edges = parse_edge_list(&std::fs::read_to_string(base_dir.join(name))?)?;
            let vertex_count = edges
                .iter()
                .map(|&(u, v)| u.max(v) as usize + 1)
                .max()
                .unwrap_or(1);
            fibers.push(FiberSpec {
                vertex_count,
                edges,
            });
        }
        let candidate = BundleCandidate {
            fibers,
            cross_edges: self
                .cross_edges
                .iter()
                .map(|l| l.iter().map(|&[v, w]| (v, w)).collect())
                .collect(),
            preferred_up: None,
            kind: BundleKind::Custom,
        };
        let Some(spec) = &self.generator else {
            return validate_bundle(candidate, DEFAULT_PROFILE_RADIUS);
        };
        let generated = spec.build()?;
        let mut expected = generated.to_candidate();
        let mut got = candidate;
        for c in [&mut expected, &mut got] {
            for f in &mut c.fibers {
                f.edges = f.edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
                f.edges.sort_unstable();
            }
        }
        if expected.fibers != got.fibers || expected.cross_edges != got.cross_edges {
            return Err(CoreError::InvalidParams(format!(
                "bundle files do not match generator {}",
                spec.label()
            )));
        }
        Ok(generated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generators::{cycle, path, regular_tree};
    use crate::numeric::qi_pair_holds;

    fn brute_profile(b: &GraphBundle, r_max: u32) -> Vec<u32> {
        let t = b.total();
        let mut out = vec![0; r_max as usize + 1];
        for x in t.vertices() {
            for y in t.vertices() {
                let ((i, u), (j, v)) = (b.locate(x), b.locate(y));
                let d = t.dist(x, y);
                if i == j && d <= r_max {
                    for slot in &mut out[d as usize..] {
                        *slot = (*slot).max(b.fiber(i).dist(u, v));
                    }
                }
            }
        }
        out
    }

    fn total_le_fiber(b: &GraphBundle) -> bool {
        (0..b.level_count()).all(|i| {
            let f = b.fiber(i);
            f.vertices().all(|u| {
                f.vertices()
                    .all(|v| b.total().dist(b.total_id(i, u), b.total_id(i, v)) <= f.dist(u, v))
            })
        })
    }

    #[test]
    fn product_metric_is_fiber_plus_height() {
        let f = path(3);
        let b = product_bundle(&f, 2);
        assert_eq!(b.total().vertex_count(), 9);
        for u in f.vertices() {
            for w in f.vertices() {
                assert_eq!(
                    b.total().dist(b.total_id(0, u), b.total_id(2, w)),
                    f.dist(u, w) + 2
                );
            }
        }
        // f̂(r) = r until the fiber diameter caps it
        assert_eq!(&b.properness_profile()[..4], &[0, 1, 2, 2]);
        assert_eq!(
            b.properness_profile(),
            &brute_profile(&b, DEFAULT_PROFILE_RADIUS)[..]
        );
        assert!(total_le_fiber(&b));
        let single = product_bundle(&f, 0);
        assert_eq!(single.level_count(), 1);
    }

    #[test]
    fn horoball_fibers_shortcut_distances() {
        let f = path(9);
        let b = horoball_bundle(&f, 2);
        assert_eq!(b.fiber(1).diameter(), 4);
        assert_eq!(b.fiber(2).diameter(), 2);
        for i in 0..3 {
            for u in f.vertices() {
                for v in f.vertices() {
                    assert_eq!(b.fiber(i).dist(u, v), f.dist(u, v).div_ceil(1 << i));
                }
            }
        }
        assert!(total_le_fiber(&b));
        assert_eq!(
            b.properness_profile(),
            &brute_profile(&b, DEFAULT_PROFILE_RADIUS)[..]
        );
        let edge = horoball_bundle(&path(2), 3);
        assert!(edge.fibers().iter().all(|g| g == &path(2)));
    }

    #[test]
    fn validation_errors() {
        let f = path(3);
        let mut c = product_bundle(&f, 2).to_candidate();
        c.cross_edges[0].retain(|&(v, _)| v != 1);
        assert_eq!(
            validate_bundle(c, 4).unwrap_err(),
            CoreError::MissingCrossEdge {
                level: 0,
                vertex: 1,
                toward: 1
            }
        );
        let mut c = product_bundle(&f, 2).to_candidate();
        c.preferred_up = None;
        c.cross_edges[1].retain(|&(_, w)| w != 2);
        c.cross_edges[1].push((1, 1));
        assert!(matches!(
            validate_bundle(c, 4),
            Err(CoreError::DuplicateEdge(1, 1))
        ));
        let mut c = product_bundle(&f, 2).to_candidate();
        c.preferred_up = None;
        c.cross_edges[1].retain(|&(_, w)| w != 2);
        c.cross_edges[1].push((2, 1));
        assert_eq!(
            validate_bundle(c, 4).unwrap_err(),
            CoreError::MissingCrossEdge {
                level: 2,
                vertex: 2,
                toward: 1
            }
        );
        let mut c = product_bundle(&f, 1).to_candidate();
        c.fibers[1].edges = vec![(0, 1)];
        assert_eq!(
            validate_bundle(c, 4).unwrap_err(),
            CoreError::FiberDisconnected { level: 1 }
        );
        let mut c = product_bundle(&f, 1).to_candidate();
        c.cross_edges[0].push((0, 7));
        assert_eq!(
            validate_bundle(c, 4).unwrap_err(),
            CoreError::BadCrossEdge(0, 7, 0)
        );
    }

    #[test]
    fn glued_and_identity_automorphism_bundles() {
        let id = automorphism_bundle(2, &["a".into(), "b".into()], 2, 2).unwrap();
        let prod = product_bundle(&crate::graph::generators::free_group_ball(2, 2), 2);
        assert_eq!(id.total(), prod.total());
        let c = cycle(6);
        let map = standard_automorphism(&GraphSpec::Cycle { n: 6 }).unwrap();
        let b = glued_bundle(&c, &map, 3).unwrap();
        assert_eq!(b.step_up(0, 5), 0);
        let s = section_through(&b, b.total_id(0, 2), 1).unwrap();
        assert_eq!(s.levels, vec![2, 3, 4, 5]);
        assert!(glued_bundle(&c, &[0, 1, 2, 3, 4, 4], 2).is_err());
        let t = regular_tree(3, 3);
        let rot = root_rotation(&t).unwrap();
        assert_eq!(&rot[..4], &[0, 2, 3, 1]);
        assert!(glued_bundle(&t, &rot, 2).is_ok());
    }

    #[test]
    fn automorphism_bundle_truncates_at_rim() {
        let b = automorphism_bundle(2, &["ab".into(), "a".into()], 3, 3).unwrap();
        let BundleKind::Automorphism { truncated, .. } = b.kind() else {
            panic!("wrong kind")
        };
        assert!(!truncated.is_empty());
        let ball = FreeGroupBall::new(2, 3);
        let a = ball.vertex_of(&[1]).unwrap();
        let ab = ball.vertex_of(&[1, 2]).unwrap();
        assert_eq!(b.step_up(0, a), ab);
        // a rim vertex still gets a section
        let rim = ball.vertex_of(&[1, 1, 1]).unwrap();
        let s = section_through(&b, b.total_id(0, rim), 1).unwrap();
        assert_eq!(s.levels.len(), 4);
        let fm = fiber_map(&b, 0).unwrap();
        assert!(fm.exhaustive);
        assert!(fm
            .assignment
            .iter()
            .enumerate()
            .all(|(v, &w)| b.up(0, v as Vertex).contains(&w)));
        // a -> a, b -> a collapses generators
        assert!(matches!(
            automorphism_bundle(2, &["a".into(), "a".into()], 2, 2),
            Err(CoreError::NotInjectiveOnBall(..))
        ));
    }

    #[test]
    fn fiber_maps_and_sections() {
        let f = path(9);
        let prod = product_bundle(&f, 3);
        let m = fiber_map(&prod, 0).unwrap();
        assert_eq!(m.assignment, (0..9).collect::<Vec<_>>());
        assert_eq!(m.k_measured, HalfInt::ONE);
        assert!(fiber_map(&prod, 3).is_err());
        let hb = horoball_bundle(&f, 3);
        let m = fiber_map(&hb, 0).unwrap();
        assert_eq!(m.assignment, (0..9).collect::<Vec<_>>());
        // d_1 = ceil(d_0 / 2); the end pair 8 -> 4 rules out k = 1 and
        // every pair satisfies l/k - k <= ceil(l/2) <= k*l + k at k = 3/2
        assert!(!qi_pair_holds(HalfInt::ONE, 8, 4));
        assert!((1..=8).all(|l| qi_pair_holds(HalfInt::from_doubled(3), l, l.div_ceil(2))));
        assert_eq!(m.k_measured, HalfInt::from_doubled(3));
        for b in [&prod, &hb] {
            for x in b.total().vertices() {
                let s = section_through(b, x, 1).unwrap();
                let (l, v) = b.locate(x);
                assert_eq!(s.levels[l], v);
                assert!(s.levels.iter().all(|&w| w == v));
                assert_eq!(s.k_measured, HalfInt::ONE);
            }
        }
    }

    #[test]
    fn distance_profiles() {
        let f = path(17);
        let prod = product_bundle(&f, 4);
        let hb = horoball_bundle(&f, 4);
        for b in [&prod, &hb] {
            let s1 = section_through(b, b.total_id(0, 0), 1).unwrap();
            let s2 = section_through(b, b.total_id(0, 16), 1).unwrap();
            assert_eq!(section_distance_profile(b, &s1, &s1).unwrap(), vec![0; 5]);
            let p = section_distance_profile(b, &s1, &s2).unwrap();
            if std::ptr::eq(b, &prod) {
                assert_eq!(p, vec![16; 5]);
            } else {
                assert_eq!(p, vec![16, 8, 4, 2, 1]);
            }
        }
        let short = QiSection {
            levels: vec![0],
            k_measured: HalfInt::ONE,
        };
        assert_eq!(
            section_distance_profile(&prod, &short, &short).unwrap_err(),
            CoreError::SectionMismatch(1, 5)
        );
    }

    #[test]
    fn good_sections() {
        let t4 = regular_tree(4, 4);
        let prod = product_bundle(&t4, 3);
        let g = good_section(&prod, 2).unwrap();
        assert!(g.section.levels.iter().all(|&v| v == g.section.levels[0]));
        assert_eq!(g.section.levels[0], 0);
        let hb = horoball_bundle(&regular_tree(3, 6), 3);
        let g = good_section(&hb, 3).unwrap();
        for (i, &c) in g.section.levels.iter().enumerate() {
            assert!(hb.fiber(i).dist(c, 0) <= 1, "level {i} center {c}");
        }
        assert!(g.section.k_measured <= HalfInt::from_int(2));
        let pb = product_bundle(&path(9), 2);
        assert_eq!(
            good_section(&pb, 2).unwrap_err(),
            CoreError::NoDirectionTriple { level: 0 }
        );
    }

    #[test]
    fn manifest_round_trip() {
        let dir = std::env::temp_dir().join(format!("coarselab-bundle-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let spec = BundleSpec::Horoball {
            fiber: GraphSpec::Path { n: 5 },
            levels: 2,
        };
        let b = spec.build().unwrap();
        let m = BundleManifest::write(&b, &dir, "hb", Some(spec.clone())).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: BundleManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back.load(&dir).unwrap().total(), b.total());
        let mut plain = back.clone();
        plain.generator = None;
        assert_eq!(plain.load(&dir).unwrap().total(), b.total());
        let mut wrong = back;
        wrong.generator = Some(BundleSpec::Product {
            fiber: GraphSpec::Path { n: 5 },
            levels: 2,
        });
        assert!(matches!(wrong.load(&dir), Err(CoreError::InvalidParams(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
