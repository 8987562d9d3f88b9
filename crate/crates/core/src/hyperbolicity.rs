//! Hyperbolicity constants, Gromov products, quasigeodesic fitting and
//! detour divergence on finite graphs.
//!
//! All certified quantities are exact: distances are integers and Gromov
//! products are [`HalfInt`]s.

use std::cmp::Reverse;
use std::collections::VecDeque;
use std::sync::atomic::{AtomicI64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{CoreError, Result};
use crate::graph::paths::{canonical_side, geodesic_unchecked, hausdorff_distance, validate_walk};
use crate::graph::{
    biconnected_blocks, DistanceMatrix, MetricGraph, Vertex, APSP_LIMIT, UNREACHABLE,
};
use crate::numeric::{
    divergence_base, fit_qi_constant, length_exceeds_divergence_bound, HalfInt, Rational,
};
use crate::report::Record;

/// Largest graph accepted by the exhaustive slim-triangle mode.
pub const EXHAUSTIVE_LIMIT: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperbolicityEstimate {
    pub delta_four_point: HalfInt,
    pub delta_slim_canonical: HalfInt,
    /// Sorted; `[v, v, v, v]` when the value is 0.
    pub witness_quadruple: [Vertex; 4],
    /// Sorted; `[v, v, v]` when the value is 0.
    pub witness_triangle: [Vertex; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlimMode {
    Canonical,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlimEstimate {
    pub value: HalfInt,
    pub witness: [Vertex; 3],
}

/// `(y, z)_base = (d(base, y) + d(base, z) - d(y, z)) / 2`.
pub fn gromov_product(g: &MetricGraph, base: Vertex, y: Vertex, z: Vertex) -> Result<HalfInt> {
    g.check_vertex(base)?;
    g.check_vertex(y)?;
    g.check_vertex(z)?;
    Ok(gp(g, base, y, z))
}

pub(crate) fn gp(g: &MetricGraph, base: Vertex, y: Vertex, z: Vertex) -> HalfInt {
    let v = g.dist(base, y) as i64 + g.dist(base, z) as i64 - g.dist(y, z) as i64;
    HalfInt::from_doubled(v)
}

/// Four-point value of one quadruple: half the gap between the two largest
/// of the three pair-sums.
pub fn four_point_value(g: &MetricGraph, q: [Vertex; 4]) -> HalfInt {
    let d = |a: usize, b: usize| g.dist(q[a], q[b]) as i64;
    HalfInt::from_doubled(top_gap([
        d(0, 1) + d(2, 3),
        d(0, 2) + d(1, 3),
        d(0, 3) + d(1, 2),
    ]))
}

#[inline]
fn top_gap(mut s: [i64; 3]) -> i64 {
    s.sort_unstable();
    s[2] - s[1]
}

/// Four-point δ. The maximum over quadruples equals the maximum over
/// biconnected blocks, so tree-like parts cost nothing. Inside a block,
/// pairs are scanned by decreasing distance and a pair-pair is dropped as
/// soon as the smaller distance falls below the best doubled value found.
///
/// A block larger than the distance cache is refused with
/// `TooLargeForExhaustive`.
pub fn delta_four_point(g: &MetricGraph) -> Result<HyperbolicityEstimate> {
    let mut best = 0i64;
    let mut witness: Option<[Vertex; 4]> = None;
    for block in biconnected_blocks(g) {
        if block.len() < 4 {
            continue;
        }
        if block.len() > APSP_LIMIT {
            return Err(CoreError::TooLargeForExhaustive {
                vertex_count: block.len(),
                limit: APSP_LIMIT,
            });
        }
        // blocks are isometrically embedded, so their own APSP suffices
        let (sub, ids) = if block.len() == g.vertex_count() {
            (None, block)
        } else {
            let (s, ids) = g.induced_subgraph(&block).expect("block is connected");
            (Some(s), ids)
        };
        let graph = sub.as_ref().unwrap_or(g);
        // beyond the cache limit the quartic scan is out of reach anyway
        let m = graph.apsp().expect("block fits the distance cache");
        let (value, quad) = scan_block(m);
        if let Some(q) = quad {
            let mut global = q.map(|v| ids[v as usize]);
            global.sort_unstable();
            if value > best || (value == best && witness.is_none_or(|w| global < w)) {
                best = value;
                witness = Some(global);
            }
        }
    }
    Ok(HyperbolicityEstimate {
        delta_four_point: HalfInt::from_doubled(best),
        delta_slim_canonical: HalfInt::ZERO,
        witness_quadruple: witness.unwrap_or([0; 4]),
        witness_triangle: [0; 3],
    })
}

fn scan_block(m: &DistanceMatrix) -> (i64, Option<[Vertex; 4]>) {
    let n = m.len() as Vertex;
    let mut pairs: Vec<(u32, Vertex, Vertex)> = Vec::with_capacity((n as usize).pow(2) / 2);
    for x in 0..n {
        for y in x + 1..n {
            pairs.push((m.get(x, y), x, y));
        }
    }
    pairs.sort_unstable_by_key(|&(d, x, y)| (Reverse(d), x, y));
    let best = AtomicI64::new(1);
    let merge = |a: (i64, Option<[Vertex; 4]>), b: (i64, Option<[Vertex; 4]>)| match (a.1, b.1) {
        (None, _) => b,
        (_, None) => a,
        (Some(qa), Some(qb)) => {
            if a.0 > b.0 || (a.0 == b.0 && qa <= qb) {
                a
            } else {
                b
            }
        }
    };
    (0..pairs.len())
        .into_par_iter()
        .fold(
            || (0i64, None),
            |mut acc, i| {
                let (d1, x, y) = pairs[i];
                if (d1 as i64) < best.load(Ordering::Relaxed) {
                    return acc;
                }
                for &(d2, z, w) in &pairs[i + 1..] {
                    if (d2 as i64) < best.load(Ordering::Relaxed) {
                        break;
                    }
                    if z == x || z == y || w == x || w == y {
                        continue;
                    }
                    let v = top_gap([
                        (d1 + d2) as i64,
                        (m.get(x, z) + m.get(y, w)) as i64,
                        (m.get(x, w) + m.get(y, z)) as i64,
                    ]);
                    if v <= 0 || v < acc.0 {
                        continue;
                    }
                    let mut q = [x, y, z, w];
                    q.sort_unstable();
                    acc = merge(acc, (v, Some(q)));
                    best.fetch_max(v, Ordering::Relaxed);
                }
                acc
            },
        )
        .reduce(|| (0, None), merge)
}

/// Largest distance from a point on one side of a triangle to the union of
/// the other two sides, using the canonical geodesic between each pair.
pub fn slim_value(g: &MetricGraph, t: [Vertex; 3]) -> HalfInt {
    let sides = [
        canonical_side(g, t[0], t[1]),
        canonical_side(g, t[1], t[2]),
        canonical_side(g, t[0], t[2]),
    ];
    HalfInt::from_int(slim_of_sides(g, &sides, 0) as i64)
}

fn slim_of_sides(g: &MetricGraph, sides: &[Vec<Vertex>; 3], floor: u32) -> u32 {
    let mut best = 0;
    for i in 0..3 {
        let (a, b) = (&sides[(i + 1) % 3], &sides[(i + 2) % 3]);
        let end_a = sides[i][0];
        let end_b = *sides[i].last().unwrap();
        for &p in &sides[i] {
            if g.dist(p, end_a).min(g.dist(p, end_b)) <= best.max(floor) {
                continue;
            }
            let d = a.iter().chain(b).map(|&q| g.dist(p, q)).min().unwrap();
            best = best.max(d);
        }
    }
    best
}

pub fn delta_slim(g: &MetricGraph, mode: SlimMode) -> Result<SlimEstimate> {
    match mode {
        SlimMode::Canonical => Ok(slim_canonical(g)),
        SlimMode::Exhaustive => slim_exhaustive(g),
    }
}

fn pick_better(a: (u32, [Vertex; 3]), b: (u32, [Vertex; 3])) -> (u32, [Vertex; 3]) {
    if a.0 > b.0 || (a.0 == b.0 && a.1 <= b.1) {
        a
    } else {
        b
    }
}

fn slim_canonical(g: &MetricGraph) -> SlimEstimate {
    let n = g.vertex_count() as Vertex;
    let best = AtomicI64::new(1);
    let (value, witness) = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut acc = (0u32, [0; 3]);
            for y in x + 1..n {
                for z in y + 1..n {
                    let longest = g.dist(x, y).max(g.dist(y, z)).max(g.dist(x, z));
                    // a side point is never farther than half the side from its endpoints
                    if ((longest / 2) as i64) < best.load(Ordering::Relaxed) {
                        continue;
                    }
                    let sides = [
                        canonical_side(g, x, y),
                        canonical_side(g, y, z),
                        canonical_side(g, x, z),
                    ];
                    let v = slim_of_sides(g, &sides, 0);
                    if v > 0 {
                        acc = pick_better(acc, (v, [x, y, z]));
                        best.fetch_max(v as i64, Ordering::Relaxed);
                    }
                }
            }
            acc
        })
        .reduce(|| (0, [0; 3]), pick_better);
    SlimEstimate {
        value: HalfInt::from_int(value as i64),
        witness,
    }
}

/// For the pair `(a, b)` and every vertex `p`, the largest distance from `p`
/// to a geodesic from `a` to `b`, over all such geodesics. Bottleneck
/// dynamic program over the geodesic interval, visited by distance from `a`.
fn farthest_geodesic(g: &MetricGraph, a: Vertex, b: Vertex) -> Vec<u32> {
    let n = g.vertex_count();
    let dab = g.dist(a, b);
    let mut interval: Vec<Vertex> = g
        .vertices()
        .filter(|&v| g.dist(a, v) + g.dist(v, b) == dab)
        .collect();
    interval.sort_by_key(|&v| g.dist(a, v));
    let mut out = vec![0u32; n];
    let mut reach = vec![0u32; n];
    for p in g.vertices() {
        for &v in &interval {
            let own = g.dist(p, v);
            reach[v as usize] = if v == a {
                own
            } else {
                let prev = g
                    .neighbors(v)
                    .iter()
                    .filter(|&&w| {
                        g.dist(a, w) + 1 == g.dist(a, v) && g.dist(w, b) == g.dist(v, b) + 1
                    })
                    .map(|&w| reach[w as usize])
                    .max()
                    .expect("interval vertex has a predecessor");
                own.min(prev)
            };
        }
        out[p as usize] = reach[b as usize];
    }
    out
}

fn slim_exhaustive(g: &MetricGraph) -> Result<SlimEstimate> {
    let n = g.vertex_count();
    if n > EXHAUSTIVE_LIMIT {
        return Err(CoreError::TooLargeForExhaustive {
            vertex_count: n,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    // far[a][b][p] for a <= b
    let far: Vec<Vec<Vec<u32>>> = (0..n as Vertex)
        .into_par_iter()
        .map(|a| {
            (0..n as Vertex)
                .map(|b| {
                    if a <= b {
                        farthest_geodesic(g, a, b)
                    } else {
                        Vec::new()
                    }
                })
                .collect()
        })
        .collect();
    let f = |a: Vertex, b: Vertex, p: Vertex| {
        let (lo, hi) = (a.min(b), a.max(b));
        far[lo as usize][hi as usize][p as usize]
    };
    let on_interval = |a: Vertex, b: Vertex, p: Vertex| g.dist(a, p) + g.dist(p, b) == g.dist(a, b);
    let side_value = |a: Vertex, b: Vertex, c: Vertex| {
        // points on some geodesic [a, b] against worst-case choices of [b, c] and [a, c]
        g.vertices()
            .filter(|&p| on_interval(a, b, p))
            .map(|p| f(b, c, p).min(f(a, c, p)))
            .max()
            .unwrap_or(0)
    };
    let nv = n as Vertex;
    let (value, witness) = (0..nv)
        .into_par_iter()
        .map(|x| {
            let mut acc = (0u32, [0; 3]);
            for y in x..nv {
                for z in y..nv {
                    if x == z {
                        continue;
                    }
                    let v = side_value(x, y, z)
                        .max(side_value(y, z, x))
                        .max(side_value(x, z, y));
                    if v > 0 {
                        acc = pick_better(acc, (v, [x, y, z]));
                    }
                }
            }
            acc
        })
        .reduce(|| (0, [0; 3]), pick_better);
    Ok(SlimEstimate {
        value: HalfInt::from_int(value as i64),
        witness,
    })
}

/// Both estimates. The slim scan is cubic in the vertex count and is the
/// slower of the two on dense blocks.
pub fn estimate(g: &MetricGraph) -> Result<HyperbolicityEstimate> {
    let mut est = delta_four_point(g)?;
    let slim = slim_canonical(g);
    est.delta_slim_canonical = slim.value;
    est.witness_triangle = slim.witness;
    Ok(est)
}

/// Smallest `k` on the half-integer grid with
/// `|s-t|/k - k <= d(p_s, p_t) <= k|s-t| + k` over all index pairs.
pub fn fit_path_k(g: &MetricGraph, path: &[Vertex]) -> HalfInt {
    let pairs = (0..path.len()).flat_map(|s| {
        (s + 1..path.len()).map(move |t| ((t - s) as u64, g.dist(path[s], path[t]) as u64))
    });
    fit_qi_constant(pairs.collect::<Vec<_>>())
}

/// First index pair violating the `(k, k)` inequalities, if any.
fn qi_violation(g: &MetricGraph, path: &[Vertex], k: Rational) -> Option<(usize, usize, u32)> {
    let (p, q) = (*k.numer() as i128, *k.denom() as i128);
    for s in 0..path.len() {
        for t in s + 1..path.len() {
            let l = (t - s) as i128;
            let d = g.dist(path[s], path[t]);
            let di = d as i128;
            // L/k - k <= d  <=>  L q^2 <= p q d + p^2 ;  d <= kL + k  <=>  d q <= p (L + 1)
            if l * q * q > p * q * di + p * p || di * q > p * (l + 1) {
                return Some((s, t, d));
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuasiGeodesicCert {
    pub path: Vec<Vertex>,
    pub k_fit: HalfInt,
    pub hausdorff_to_geodesic: u32,
}

impl QuasiGeodesicCert {
    fn measure(g: &MetricGraph, path: Vec<Vertex>) -> Result<Self> {
        let geo = geodesic_unchecked(g, path[0], *path.last().unwrap());
        let hausdorff_to_geodesic = hausdorff_distance(g, &path, &geo.vertices)?;
        Ok(QuasiGeodesicCert {
            k_fit: fit_path_k(g, &path),
            path,
            hausdorff_to_geodesic,
        })
    }
}

/// Fit `k` for a walk and measure how far it strays from the canonical
/// geodesic between its endpoints.
pub fn stability_audit(g: &MetricGraph, path: &[Vertex]) -> Result<QuasiGeodesicCert> {
    validate_walk(g, path)?;
    QuasiGeodesicCert::measure(g, path.to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CornerReport {
    pub y: Vertex,
    pub z: Vertex,
    pub w: Vertex,
    pub k: Rational,
    pub delta: HalfInt,
    pub path: Vec<Vertex>,
    /// `max_x min((x,z)_y, (x,w)_y)`
    pub max_min_product: HalfInt,
    pub witness_x: Vertex,
    /// `(z,w)_y`
    pub corner_product: HalfInt,
    pub bound: Rational,
    pub pass: bool,
}

impl CornerReport {
    pub fn to_record(&self) -> Record {
        Record::new(
            "corner_product_check",
            json!({"y": self.y, "z": self.z, "w": self.w, "k": self.k.to_string(), "delta": self.delta}),
            json!({"max_min_product": self.max_min_product, "witness_x": self.witness_x, "corner_product": self.corner_product}),
            json!(self.bound.to_string()),
            self.pass,
        )
    }
}

/// Corner products at `y` along `[z, y] ∪ [y, w]` against `kδ + k²/2`.
pub fn corner_product_check(
    g: &MetricGraph,
    y: Vertex,
    z: Vertex,
    w: Vertex,
    k: Rational,
    delta: HalfInt,
) -> Result<CornerReport> {
    for v in [y, z, w] {
        g.check_vertex(v)?;
    }
    if k < Rational::from_integer(1) {
        return Err(CoreError::InvalidParams(format!("k = {k} < 1")));
    }
    let mut path = geodesic_unchecked(g, z, y).vertices;
    path.extend_from_slice(&geodesic_unchecked(g, y, w).vertices[1..]);
    if let Some((s, t, distance)) = qi_violation(g, &path, k) {
        return Err(CoreError::NotQuasigeodesic {
            k: k.to_string(),
            s,
            t,
            distance,
        });
    }
    let (max_min_product, witness_x) = g
        .vertices()
        .map(|x| (gp(g, y, x, z).min(gp(g, y, x, w)), x))
        .fold((HalfInt::from_doubled(i64::MIN), 0), |a, b| {
            if b.0 > a.0 {
                b
            } else {
                a
            }
        });
    let corner_product = gp(g, y, z, w);
    let bound = k * delta.to_rational() + k * k / 2;
    let pass = max_min_product.to_rational() <= bound && corner_product.to_rational() <= bound;
    Ok(CornerReport {
        y,
        z,
        w,
        k,
        delta,
        path,
        max_min_product,
        witness_x,
        corner_product,
        bound,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub anchors: Vec<Vertex>,
    pub leg_lengths: Vec<u32>,
    /// Entry `i` is the product at anchor `i + 1` of its two neighbors.
    pub junction_products: Vec<HalfInt>,
}

impl ChainSpec {
    pub fn new(g: &MetricGraph, anchors: &[Vertex]) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(CoreError::InvalidParams(
                "a chain needs at least two anchors".into(),
            ));
        }
        for &v in anchors {
            g.check_vertex(v)?;
        }
        Ok(ChainSpec {
            anchors: anchors.to_vec(),
            leg_lengths: anchors.windows(2).map(|w| g.dist(w[0], w[1])).collect(),
            junction_products: anchors
                .windows(3)
                .map(|w| gp(g, w[1], w[0], w[2]))
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainCertificate {
    pub cert: QuasiGeodesicCert,
    pub cap: HalfInt,
    pub d_min: u32,
    pub shortest_leg: u32,
    pub legs_meet_threshold: bool,
}

impl ChainCertificate {
    pub fn to_record(&self, anchors: &[Vertex]) -> Record {
        Record::new(
            "chain_certify",
            json!({"anchors": anchors, "cap": self.cap, "d_min": self.d_min}),
            json!({"k_fit": self.cert.k_fit, "hausdorff_to_geodesic": self.cert.hausdorff_to_geodesic, "shortest_leg": self.shortest_leg}),
            json!({"legs_meet_threshold": self.legs_meet_threshold}),
            true,
        )
    }
}

/// Concatenate canonical geodesics between consecutive anchors and measure
/// the resulting quasigeodesic constant.
pub fn chain_certify(
    chain: &ChainSpec,
    g: &MetricGraph,
    cap: HalfInt,
    d_min: u32,
) -> Result<ChainCertificate> {
    if let Some((i, p)) = chain
        .junction_products
        .iter()
        .enumerate()
        .find(|(_, &p)| p > cap)
    {
        return Err(CoreError::JunctionTooSharp {
            index: i + 1,
            product: p.to_string(),
            cap: cap.to_string(),
        });
    }
    let mut path = vec![chain.anchors[0]];
    for w in chain.anchors.windows(2) {
        path.extend_from_slice(&geodesic_unchecked(g, w[0], w[1]).vertices[1..]);
    }
    let shortest_leg = chain.leg_lengths.iter().copied().min().unwrap_or(0);
    Ok(ChainCertificate {
        cert: QuasiGeodesicCert::measure(g, path)?,
        cap,
        d_min,
        shortest_leg,
        legs_meet_threshold: shortest_leg >= d_min,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetourReport {
    pub n: u32,
    pub length: u64,
    pub delta: HalfInt,
    /// `b^(n-1)` in floating point, for display only.
    pub bound: f64,
    pub pass: bool,
    pub vacuous: bool,
}

impl DetourReport {
    pub fn to_record(&self, center: Vertex) -> Record {
        Record::new(
            "detour_check",
            json!({"center": center, "delta": self.delta, "n": self.n}),
            json!(self.length),
            json!(self.bound),
            self.pass,
        )
    }
}

/// Check `length(detour) >= b^(n-1)` with `b = 2^(1/(δ+1))`, where `n` is
/// the closest approach of the detour to `center`.
pub fn detour_check(
    g: &MetricGraph,
    geo: &[Vertex],
    center: Vertex,
    detour: &[Vertex],
    delta: HalfInt,
) -> Result<DetourReport> {
    validate_walk(g, geo)?;
    validate_walk(g, detour)?;
    if g.dist(geo[0], *geo.last().unwrap()) as usize != geo.len() - 1 {
        return Err(CoreError::BadPath(
            "reference path is not a geodesic".into(),
        ));
    }
    if !geo.contains(&center) {
        return Err(CoreError::InvalidParams(format!(
            "center {center} is not on the geodesic"
        )));
    }
    let same = detour[0] == geo[0] && detour.last() == geo.last();
    let flipped = detour[0] == *geo.last().unwrap() && detour.last() == geo.first();
    if !same && !flipped {
        return Err(CoreError::DetourEndpointsMismatch);
    }
    let row = g.row(center);
    let n = detour.iter().map(|&v| row[v as usize]).min().unwrap();
    let length = (detour.len() - 1) as u64;
    let base = divergence_base(delta);
    if n == 0 {
        return Ok(DetourReport {
            n,
            length,
            delta,
            bound: base.powi(-1),
            pass: true,
            vacuous: true,
        });
    }
    Ok(DetourReport {
        n,
        length,
        delta,
        bound: base.powi(n as i32 - 1),
        pass: length_exceeds_divergence_bound(length, delta, (n - 1) as u64),
        vacuous: false,
    })
}

/// Shortest path from `p` to `q` staying at distance at least `radius` from
/// `center`, with lowest-id parent tie-breaks.
pub fn shortest_detour(
    g: &MetricGraph,
    p: Vertex,
    q: Vertex,
    center: Vertex,
    radius: u32,
) -> Result<Vec<Vertex>> {
    for v in [p, q, center] {
        g.check_vertex(v)?;
    }
    let from_center = g.row(center);
    let allowed = |v: Vertex| from_center[v as usize] >= radius;
    if !allowed(p) || !allowed(q) {
        return Err(CoreError::InvalidParams(format!(
            "endpoints must lie outside the ball of radius {} at {center}",
            radius.saturating_sub(1)
        )));
    }
    let mut dist = vec![UNREACHABLE; g.vertex_count()];
    dist[p as usize] = 0;
    let mut queue = VecDeque::from([p]);
    while let Some(u) = queue.pop_front() {
        if u == q {
            break;
        }
        for &w in g.neighbors(u) {
            if dist[w as usize] == UNREACHABLE && allowed(w) {
                dist[w as usize] = dist[u as usize] + 1;
                queue.push_back(w);
            }
        }
    }
    if dist[q as usize] == UNREACHABLE {
        return Err(CoreError::NoDetour { center, radius });
    }
    let mut out = vec![q];
    let mut cur = q;
    while cur != p {
        let dc = dist[cur as usize];
        cur = *g
            .neighbors(cur)
            .iter()
            .find(|&&w| dist[w as usize] != UNREACHABLE && dist[w as usize] + 1 == dc)
            .expect("BFS parent exists");
        out.push(cur);
    }
    out.reverse();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetourSample {
    pub p: Vertex,
    pub q: Vertex,
    pub center: Vertex,
    pub radius: u32,
    pub report: DetourReport,
}

/// Draw random geodesics, centers on them and avoidance radii, and check
/// the shortest avoiding path for each draw that has one.
pub fn sample_detours(
    g: &MetricGraph,
    delta: HalfInt,
    count: usize,
    seed: u64,
) -> Result<Vec<DetourSample>> {
    let n = g.vertex_count() as Vertex;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count.max(1) {
        attempts += 1;
        let p = rng.gen_range(0..n);
        let q = rng.gen_range(0..n);
        if g.dist(p, q) < 2 {
            continue;
        }
        let geo = geodesic_unchecked(g, p, q).vertices;
        let center = geo[rng.gen_range(1..geo.len() - 1)];
        let reach = g.dist(center, p).min(g.dist(center, q));
        let radius = rng.gen_range(1..=reach);
        let detour = match shortest_detour(g, p, q, center, radius) {
            Ok(d) => d,
            Err(CoreError::NoDetour { .. }) => continue,
            Err(e) => return Err(e),
        };
        let report = detour_check(g, &geo, center, &detour, delta)?;
        out.push(DetourSample {
            p,
            q,
            center,
            radius,
            report,
        });
    }
    Ok(out)
}
