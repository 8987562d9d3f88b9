//! Discretization of sampled metric spaces: separated nets, approximating
//! graphs, covering numbers, approximating bundles and the path-family
//! (Bowditch) hyperbolicity criterion.

use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::bundle::{
    validate_bundle, BundleCandidate, BundleKind, FiberSpec, GraphBundle, DEFAULT_PROFILE_RADIUS,
};
use crate::error::{CoreError, Result};
use crate::graph::paths::validate_walk;
use crate::graph::{MetricGraph, Vertex};
use crate::numeric::{rational_flex, HalfInt, Rational};

/// Spaces up to this size get an exhaustive triangle-inequality check.
pub const EXHAUSTIVE_TRIANGLE_LIMIT: usize = 200;
const SAMPLED_TRIANGLES: usize = 200_000;

/// Any finite metric on points `0..point_count()`.
pub trait FiniteMetric: Sync {
    fn point_count(&self) -> usize;
    fn distance(&self, a: usize, b: usize) -> Rational;
}

impl FiniteMetric for MetricGraph {
    fn point_count(&self) -> usize {
        self.vertex_count()
    }

    fn distance(&self, a: usize, b: usize) -> Rational {
        Rational::from_integer(self.dist(a as Vertex, b as Vertex) as i64)
    }
}

/// Finite sample of a metric space with a dense distance table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampledSpace {
    n: usize,
    /// Strict lower triangle, row by row.
    lower: Vec<Rational>,
}

impl FiniteMetric for SampledSpace {
    fn point_count(&self) -> usize {
        self.n
    }

    fn distance(&self, a: usize, b: usize) -> Rational {
        self.d(a, b)
    }
}

impl SampledSpace {
    /// Build from a distance function and validate the metric axioms.
    pub fn from_fn<F: Fn(usize, usize) -> Rational + Sync>(n: usize, f: F) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::EmptySet);
        }
        let lower: Vec<Rational> = (1..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        let space = SampledSpace { n, lower };
        space.validate()?;
        Ok(space)
    }

    pub fn from_lower(rows: &[Vec<Rational>]) -> Result<Self> {
        let n = rows.len() + 1;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(CoreError::MetricAxiomViolation(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    i + 1
                )));
            }
        }
        Self::from_fn(n, |i, j| {
            if i == j {
                Rational::from_integer(0)
            } else {
                rows[i.max(j) - 1][i.min(j)]
            }
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, a: usize, b: usize) -> Rational {
        if a == b {
            return Rational::from_integer(0);
        }
        let (i, j) = (a.max(b), a.min(b));
        self.lower[i * (i - 1) / 2 + j]
    }

    /// Non-negativity everywhere; the triangle inequality on every triple up
    /// to [`EXHAUSTIVE_TRIANGLE_LIMIT`] points and on seeded random triples
    /// above. Symmetry and the zero diagonal hold by construction.
    pub fn validate(&self) -> Result<()> {
        if let Some(pos) = self.lower.iter().position(|d| *d.numer() < 0) {
            return Err(CoreError::MetricAxiomViolation(format!(
                "negative distance at entry {pos}"
            )));
        }
        let violation = |x: usize, y: usize, z: usize| -> Option<String> {
            let (a, b, c) = (self.d(x, y), self.d(y, z), self.d(x, z));
            if a > b + c || b > a + c || c > a + b {
                Some(format!("triangle ({x}, {y}, {z}) has sides {a}, {b}, {c}"))
            } else {
                None
            }
        };
        let n = self.n;
        let found = if n <= EXHAUSTIVE_TRIANGLE_LIMIT {
            (0..n).into_par_iter().find_map_first(|x| {
                (x + 1..n).find_map(|y| (y + 1..n).find_map(|z| violation(x, y, z)))
            })
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..SAMPLED_TRIANGLES).find_map(|_| {
                violation(
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                    rng.gen_range(0..n),
                )
            })
        };
        match found {
            Some(msg) => Err(CoreError::MetricAxiomViolation(msg)),
            None => Ok(()),
        }
    }
}

/// Sampled points of the horoball over the path `P_n`: horizontal positions
/// `x = j * spacing` in `[0, n-1]` at integer heights `0..=levels`. A path
/// climbs to some height `l`, crosses at cost `|x - y| / 2^l`, and comes
/// down, so `d((x, s), (y, t)) = min over max(s, t) <= l <= levels of
/// (2l - s - t) + |x - y| / 2^l`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoroballSampler {
    pub n: usize,
    #[serde(with = "rational_flex")]
    pub spacing: Rational,
    pub levels: usize,
}

impl HoroballSampler {
    pub fn positions(&self) -> Result<Vec<Rational>> {
        if self.n < 1 || *self.spacing.numer() <= 0 {
            return Err(CoreError::InvalidParams(
                "horoball sample needs n >= 1 and positive spacing".into(),
            ));
        }
        let len = Rational::from_integer(self.n as i64 - 1);
        let steps = (len / self.spacing).to_integer();
        if self.spacing * Rational::from_integer(steps) != len {
            return Err(CoreError::InvalidParams(format!(
                "spacing {} does not divide {}",
                self.spacing, len
            )));
        }
        Ok((0..=steps)
            .map(|j| self.spacing * Rational::from_integer(j))
            .collect())
    }

    fn scale(l: usize) -> Rational {
        Rational::new(1, 1i64 << l)
    }

    pub fn total_distance_at(&self, s: usize, x: Rational, t: usize, y: Rational) -> Rational {
        let gap = (x - y).abs();
        (s.max(t)..=self.levels)
            .map(|l| Rational::from_integer((2 * l - s - t) as i64) + gap * Self::scale(l))
            .min()
            .expect("some admissible height")
    }

    /// Send each vertex of an approximating bundle of this sampler to the
    /// horoball vertex at its rounded sample position.
    pub fn horoball_map(&self, ab: &ApproxBundle, hb: &GraphBundle) -> Result<Vec<Vertex>> {
        let pos = self.positions()?;
        let b = &ab.bundle;
        if b.level_count() != hb.level_count() {
            return Err(CoreError::InvalidParams(format!(
                "bundles have {} and {} levels",
                b.level_count(),
                hb.level_count()
            )));
        }
        b.total()
            .vertices()
            .map(|x| {
                let (i, v) = b.locate(x);
                let u = pos[ab.nets[i].members[v as usize]].round().to_integer();
                if u < 0 || u as usize >= hb.fiber(i).vertex_count() {
                    return Err(CoreError::InvalidVertex {
                        vertex: u.max(0) as Vertex,
                        vertex_count: hb.fiber(i).vertex_count(),
                    });
                }
                Ok(hb.total_id(i, u as Vertex))
            })
            .collect()
    }

    /// All sample points in one space, point id `level * m + j`.
    pub fn total_space(&self) -> Result<SampledSpace> {
        let pos = self.positions()?;
        let m = pos.len();
        SampledSpace::from_fn(m * (self.levels + 1), |a, b| {
            self.total_distance_at(a / m, pos[a % m], b / m, pos[b % m])
        })
    }
}

/// A metric bundle over `[0, N]` given by samples: a fiber sample per level
/// and the total distance between sample points.
pub trait MetricBundleSampler: Sync {
    fn levels(&self) -> usize;
    fn fiber(&self, level: usize) -> Result<SampledSpace>;
    fn total_distance(&self, i: usize, p: usize, j: usize, q: usize) -> Rational;
}

impl MetricBundleSampler for HoroballSampler {
    fn levels(&self) -> usize {
        self.levels
    }

    /// The horizontal line at height `level` with its own path metric
    /// `|x - y| / 2^level`.
    fn fiber(&self, level: usize) -> Result<SampledSpace> {
        let pos = self.positions()?;
        let s = Self::scale(level);
        SampledSpace::from_fn(pos.len(), |a, b| (pos[a] - pos[b]).abs() * s)
    }

    fn total_distance(&self, i: usize, p: usize, j: usize, q: usize) -> Rational {
        let at = |k: usize| self.spacing * Rational::from_integer(k as i64);
        self.total_distance_at(i, at(p), j, at(q))
    }
}

/// The same fiber sample at every level with `d = d_F + |i - j|`.
#[derive(Clone, Debug)]
pub struct ProductSampler {
    pub fiber: SampledSpace,
    pub levels: usize,
}

impl MetricBundleSampler for ProductSampler {
    fn levels(&self) -> usize {
        self.levels
    }

    fn fiber(&self, _level: usize) -> Result<SampledSpace> {
        Ok(self.fiber.clone())
    }

    fn total_distance(&self, i: usize, p: usize, j: usize, q: usize) -> Rational {
        self.fiber.d(p, q) + Rational::from_integer(i.abs_diff(j) as i64)
    }
}

/// Serializable sampled space: an explicit strict lower triangle or a
/// registered formula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSpaceSpec {
    pub point_count: usize,
    pub metric: MetricSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    /// Row `i` holds `d(i+1, 0), ..., d(i+1, i)`.
    Explicit { lower: Vec<Vec<FlexRational>> },
    /// `line {spacing}`, `horoball {n, spacing, levels}`,
    /// `horoball_fiber {n, spacing, level}`, or
    /// `clusters {sizes: [a, b], spacing, gap}`.
    Formula {
        name: String,
        #[serde(default)]
        params: Value,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlexRational(#[serde(with = "rational_flex")] pub Rational);

fn param<T: for<'de> Deserialize<'de>>(params: &Value, key: &str) -> Result<T> {
    let v = params
        .get(key)
        .cloned()
        .ok_or_else(|| CoreError::InvalidParams(format!("missing parameter {key:?}")))?;
    serde_json::from_value(v)
        .map_err(|e| CoreError::InvalidParams(format!("parameter {key:?}: {e}")))
}

fn rational_param(params: &Value, key: &str) -> Result<Rational> {
    Ok(param::<FlexRational>(params, key)?.0)
}

impl SampledSpaceSpec {
    pub fn build(&self) -> Result<SampledSpace> {
        let space = match &self.metric {
            MetricSpec::Explicit { lower } => {
                let rows: Vec<Vec<Rational>> = lower
                    .iter()
                    .map(|r| r.iter().map(|x| x.0).collect())
                    .collect();
                SampledSpace::from_lower(&rows)?
            }
            MetricSpec::Formula { name, params } => match name.as_str() {
                "line" => {
                    let h = rational_param(params, "spacing")?;
                    SampledSpace::from_fn(self.point_count, |a, b| {
                        h * Rational::from_integer(a.abs_diff(b) as i64)
                    })?
                }
                "horoball" => HoroballSampler {
                    n: param(params, "n")?,
                    spacing: rational_param(params, "spacing")?,
                    levels: param(params, "levels")?,
                }
                .total_space()?,
                "horoball_fiber" => HoroballSampler {
                    n: param(params, "n")?,
                    spacing: rational_param(params, "spacing")?,
                    levels: param(params, "level")?,
                }
                .fiber(param(params, "level")?)?,
                "clusters" => {
                    let sizes: [usize; 2] = param(params, "sizes")?;
                    let h = rational_param(params, "spacing")?;
                    let gap = rational_param(params, "gap")?;
                    let pos: Vec<Rational> =
                        (0..sizes[0])
                            .map(|j| h * Rational::from_integer(j as i64))
                            .chain((0..sizes[1]).map(|j| {
                                h * Rational::from_integer((sizes[0] - 1 + j) as i64) + gap
                            }))
                            .collect();
                    SampledSpace::from_fn(pos.len(), |a, b| (pos[a] - pos[b]).abs())?
                }
                other => {
                    return Err(CoreError::InvalidParams(format!(
                        "unknown metric formula {other:?}"
                    )))
                }
            },
        };
        if space.len() != self.point_count {
            return Err(CoreError::InvalidParams(format!(
                "metric has {} points, point_count says {}",
                space.len(),
                self.point_count
            )));
        }
        Ok(space)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Net {
    pub members: Vec<usize>,
    #[serde(with = "rational_flex")]
    pub separation: Rational,
    #[serde(with = "rational_flex")]
    pub covering_radius: Rational,
}

/// Greedy maximal 1-separated subset in ascending point order.
pub fn separated_net(space: &SampledSpace) -> Result<Net> {
    space.validate()?;
    let one = Rational::from_integer(1);
    let mut members: Vec<usize> = Vec::new();
    for p in 0..space.len() {
        if members.iter().all(|&m| space.d(p, m) >= one) {
            members.push(p);
        }
    }
    let covering_radius = (0..space.len())
        .map(|p| members.iter().map(|&m| space.d(p, m)).min().unwrap())
        .max()
        .unwrap();
    let net = Net {
        members,
        separation: one,
        covering_radius,
    };
    debug_assert!(net_invariants(space, &net).is_ok());
    Ok(net)
}

/// Separation of members and maximality (every point within `< 1` of a
/// member, or a member itself).
pub fn net_invariants(space: &SampledSpace, net: &Net) -> Result<()> {
    let one = Rational::from_integer(1);
    for (i, &a) in net.members.iter().enumerate() {
        for &b in &net.members[i + 1..] {
            if space.d(a, b) < one {
                return Err(CoreError::InvalidParams(format!(
                    "members {a} and {b} are closer than 1"
                )));
            }
        }
    }
    for p in 0..space.len() {
        if !net.members.contains(&p) && net.members.iter().all(|&m| space.d(p, m) >= one) {
            return Err(CoreError::InvalidParams(format!(
                "point {p} could be added to the net"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct NetGraph {
    pub graph: MetricGraph,
    /// Sample point of each graph vertex.
    pub members: Vec<usize>,
    /// Nearest member's vertex for every sample point, lowest id on ties.
    pub nearest: Vec<Vertex>,
}

/// Graph on the net members with an edge whenever `d <= 3`.
pub fn net_graph(net: &Net, space: &SampledSpace) -> Result<NetGraph> {
    let three = Rational::from_integer(3);
    let m = &net.members;
    let mut edges = Vec::new();
    for i in 0..m.len() {
        for j in i + 1..m.len() {
            if space.d(m[i], m[j]) <= three {
                edges.push((i as Vertex, j as Vertex));
            }
        }
    }
    let graph = if m.len() == 1 {
        MetricGraph::singleton()
    } else {
        let g = MetricGraph::from_edges_unchecked_connectivity(m.len(), &edges)?;
        if !g.is_connected() {
            return Err(CoreError::DisconnectedNetGraph);
        }
        g
    };
    let nearest = (0..space.len())
        .map(|p| (0..m.len()).min_by_key(|&i| (space.d(p, m[i]), i)).unwrap() as Vertex)
        .collect();
    Ok(NetGraph {
        graph,
        members: m.clone(),
        nearest,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distortion {
    pub pairs_checked: usize,
    pub exhaustive: bool,
    /// Smallest half-integer `K >= 1` with `d/K - C <= d' <= K d + C` at
    /// `C = K`.
    pub multiplicative: HalfInt,
    /// Smallest `C` making the two-sided bound hold at that `K`.
    #[serde(with = "rational_flex")]
    pub additive: Rational,
    /// Pure bi-Lipschitz ratio; `None` when the map identifies points at
    /// positive distance or separates points at distance zero.
    pub bilipschitz: Option<FlexRational>,
    pub pass: bool,
}

fn pair_k_min(d: Rational, e: Rational) -> HalfInt {
    // k = h/2: d/k - k <= e  <=>  4d <= 2he + h^2 ;  e <= k(d+1)  <=>  2e <= h(d+1)
    let holds = |h: i64| {
        let h = Rational::from_integer(h);
        Rational::from_integer(4) * d <= Rational::from_integer(2) * h * e + h * h
            && Rational::from_integer(2) * e <= h * (d + Rational::from_integer(1))
    };
    let (df, ef) = (
        crate::numeric::ratio_to_f64(d),
        crate::numeric::ratio_to_f64(e),
    );
    let guess = ((ef * ef + 4.0 * df).sqrt() - ef)
        .max(2.0 * ef / (df + 1.0))
        .max(2.0)
        .floor() as i64;
    let mut h = guess.max(2);
    while h > 2 && holds(h - 1) {
        h -= 1;
    }
    while !holds(h) {
        h += 1;
    }
    HalfInt::from_doubled(h)
}

/// Distortion of `map` from `space` into `g` over point pairs: all of them
/// when `pair_samples` is `None` or covers every pair, else a seeded
/// sample.
pub fn qi_audit<M: FiniteMetric>(
    space: &M,
    map: &[Vertex],
    g: &MetricGraph,
    pair_samples: Option<usize>,
    seed: u64,
) -> Result<Distortion> {
    let n = space.point_count();
    if map.len() != n {
        return Err(CoreError::InvalidParams(format!(
            "map has {} entries for {n} points",
            map.len()
        )));
    }
    for &v in map {
        g.check_vertex(v)?;
    }
    let all = n * n.saturating_sub(1) / 2;
    let exhaustive = pair_samples.is_none_or(|s| s >= all);
    let pairs: Vec<(usize, usize)> = if exhaustive {
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..pair_samples.unwrap())
            .map(|_| loop {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if a != b {
                    break (a.min(b), a.max(b));
                }
            })
            .collect()
    };
    let measured: Vec<(Rational, Rational)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            (
                space.distance(a, b),
                Rational::from_integer(g.dist(map[a], map[b]) as i64),
            )
        })
        .collect();
    let multiplicative = measured
        .iter()
        .map(|&(d, e)| pair_k_min(d, e))
        .max()
        .unwrap_or(HalfInt::ONE);
    let k = multiplicative.to_rational();
    let zero = Rational::from_integer(0);
    let additive = measured
        .iter()
        .map(|&(d, e)| (e - k * d).max(d / k - e).max(zero))
        .max()
        .unwrap_or(zero);
    let mut ratio = Some(Rational::from_integer(1));
    for &(d, e) in &measured {
        ratio = match (ratio, d == zero, e == zero) {
            (r, true, true) => r,
            (_, true, false) | (_, false, true) => None,
            (Some(r), false, false) => Some(r.max(d / e).max(e / d)),
            (None, ..) => None,
        };
    }
    Ok(Distortion {
        pairs_checked: pairs.len(),
        exhaustive,
        multiplicative,
        additive,
        pass: ratio.is_some(),
        bilipschitz: ratio.map(FlexRational),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringEntry {
    #[serde(with = "rational_flex")]
    pub big_r: Rational,
    #[serde(with = "rational_flex")]
    pub small_r: Rational,
    /// Worst greedy count over all centers.
    pub raw: usize,
    /// After the monotone closure in both radii.
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StronglyProperParams {
    pub table: Vec<CoveringEntry>,
}

impl StronglyProperParams {
    pub fn get(&self, big_r: Rational, small_r: Rational) -> Option<usize> {
        self.table
            .iter()
            .find(|e| e.big_r == big_r && e.small_r == small_r)
            .map(|e| e.count)
    }
}

/// Greedy covering of `B(p, R)` by `r`-balls centered at ball points,
/// starting with `p` itself, then the lowest uncovered point.
fn greedy_cover(space: &SampledSpace, p: usize, big_r: Rational, small_r: Rational) -> usize {
    let ball: Vec<usize> = (0..space.len())
        .filter(|&q| space.d(p, q) <= big_r)
        .collect();
    let mut covered = vec![false; ball.len()];
    let mut count = 0;
    let mut next = Some(0);
    let pos_p = ball.iter().position(|&q| q == p).unwrap();
    let mut center = pos_p;
    while next.is_some() {
        count += 1;
        for (i, &q) in ball.iter().enumerate() {
            if space.d(ball[center], q) <= small_r {
                covered[i] = true;
            }
        }
        next = covered.iter().position(|c| !c);
        if let Some(i) = next {
            center = i;
        }
    }
    count
}

/// Covering numbers `N(R, r)` for every pair from the two lists: the most
/// `r`-balls the greedy cover needs for any `R`-ball, then closed so that
/// `N` is non-decreasing in `R` and non-increasing in `r`.
pub fn strongly_proper_estimate(
    space: &SampledSpace,
    big_rs: &[Rational],
    small_rs: &[Rational],
) -> Result<StronglyProperParams> {
    if big_rs.is_empty() || small_rs.is_empty() {
        return Err(CoreError::EmptySet);
    }
    if small_rs.iter().any(|r| *r.numer() <= 0) {
        return Err(CoreError::InvalidParams(
            "covering radius must be positive".into(),
        ));
    }
    let raw: Vec<Vec<usize>> = big_rs
        .iter()
        .map(|&big| {
            small_rs
                .iter()
                .map(|&small| {
                    (0..space.len())
                        .into_par_iter()
                        .map(|p| greedy_cover(space, p, big, small))
                        .max()
                        .unwrap()
                })
                .collect()
        })
        .collect();
    let mut table = Vec::new();
    for (i, &big) in big_rs.iter().enumerate() {
        for (j, &small) in small_rs.iter().enumerate() {
            let count = big_rs
                .iter()
                .enumerate()
                .filter(|(_, &b)| b <= big)
                .flat_map(|(a, _)| {
                    small_rs
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s >= small)
                        .map(move |(c, _)| (a, c))
                })
                .map(|(a, c)| raw[a][c])
                .max()
                .unwrap();
            table.push(CoveringEntry {
                big_r: big,
                small_r: small,
                raw: raw[i][j],
                count,
            });
        }
    }
    Ok(StronglyProperParams { table })
}

#[derive(Clone, Debug)]
pub struct ApproxBundle {
    pub bundle: GraphBundle,
    pub nets: Vec<Net>,
    pub cross_threshold: Rational,
}

/// Approximating graph bundle of a sampled metric bundle: a net graph per
/// fiber and cross edges between net points of consecutive levels at total
/// distance at most `6c + 3`.
pub fn approx_bundle<S: MetricBundleSampler + ?Sized>(
    sampler: &S,
    c: Rational,
) -> Result<ApproxBundle> {
    if *c.numer() < 0 {
        return Err(CoreError::InvalidParams("c must be non-negative".into()));
    }
    let threshold = Rational::from_integer(6) * c + Rational::from_integer(3);
    let levels = sampler.levels();
    let per_level: Vec<(Net, NetGraph)> = (0..=levels)
        .into_par_iter()
        .map(|i| -> Result<_> {
            let space = sampler.fiber(i)?;
            let net = separated_net(&space)?;
            let ng = net_graph(&net, &space)?;
            Ok((net, ng))
        })
        .collect::<Result<_>>()?;
    let cross: Vec<Vec<(Vertex, Vertex)>> = (0..levels)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = (&per_level[i].0.members, &per_level[i + 1].0.members);
            let mut edges = Vec::new();
            for (a, &p) in lo.iter().enumerate() {
                for (b, &q) in hi.iter().enumerate() {
                    if sampler.total_distance(i, p, i + 1, q) <= threshold {
                        edges.push((a as Vertex, b as Vertex));
                    }
                }
            }
            edges
        })
        .collect();
    let fibers = per_level
        .iter()
        .map(|(_, ng)| FiberSpec::from_graph(&ng.graph))
        .collect();
    let bundle = validate_bundle(
        BundleCandidate {
            fibers,
            cross_edges: cross,
            preferred_up: None,
            kind: BundleKind::Sampled,
        },
        DEFAULT_PROFILE_RADIUS,
    )?;
    Ok(ApproxBundle {
        bundle,
        nets: per_level.into_iter().map(|(n, _)| n).collect(),
        cross_threshold: threshold,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowditchWitness {
    pub x: Vertex,
    pub y: Vertex,
    pub z: Vertex,
    /// Point of `c(x, y)` farthest from the other two paths.
    pub point: Vertex,
    pub distance: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowditchReport {
    /// Smallest `D` for the thin-triangle condition over all triples.
    pub condition1: u32,
    pub condition1_witness: Option<BowditchWitness>,
    /// Largest diameter of `c(x, y)` over adjacent `x, y`.
    pub condition2: u32,
    pub smallest_d: u32,
    pub d: u32,
    pub pass: bool,
}

/// Check both conditions of the path-family criterion with constant `D`:
/// `c(x, y)` lies in the `D`-neighborhood of `c(y, z) ∪ c(z, x)` for every
/// triple, and `c(x, y)` has diameter at most `D` when `x ~ y`.
pub fn bowditch_check<F>(g: &MetricGraph, family: F, d: u32) -> Result<BowditchReport>
where
    F: Fn(Vertex, Vertex) -> Vec<Vertex> + Sync,
{
    let n = g.vertex_count();
    let paths: Vec<Vec<Vertex>> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (x, y) = ((idx / n) as Vertex, (idx % n) as Vertex);
            let p = family(x, y);
            if p.first() != Some(&x) || p.last() != Some(&y) {
                return Err(CoreError::BadPathFamily(format!(
                    "c({x}, {y}) does not join its endpoints"
                )));
            }
            validate_walk(g, &p)
                .map_err(|e| CoreError::BadPathFamily(format!("c({x}, {y}): {e}")))?;
            Ok(p)
        })
        .collect::<Result<_>>()?;
    let to_path: Vec<Vec<u32>> = paths
        .par_iter()
        .map(|p| g.multi_source_bfs(p.iter().copied()))
        .collect();
    let at = |x: usize, y: usize| x * n + y;
    let best = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut local: Option<BowditchWitness> = None;
            for y in 0..n {
                let cxy = &paths[at(x, y)];
                for z in 0..n {
                    let (r1, r2) = (&to_path[at(y, z)], &to_path[at(z, x)]);
                    for &p in cxy {
                        let dist = r1[p as usize].min(r2[p as usize]);
                        if local.as_ref().is_none_or(|w| dist > w.distance) {
                            local = Some(BowditchWitness {
                                x: x as Vertex,
                                y: y as Vertex,
                                z: z as Vertex,
                                point: p,
                                distance: dist,
                            });
                        }
                    }
                }
            }
            local
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None::<BowditchWitness>, |acc, w| match acc {
            Some(a) if a.distance >= w.distance => Some(a),
            _ => Some(w),
        });
    let condition1 = best.as_ref().map_or(0, |w| w.distance);
    let condition2 = g
        .edges()
        .par_iter()
        .flat_map_iter(|&(x, y)| [(x, y), (y, x)])
        .map(|(x, y)| {
            let p = &paths[at(x as usize, y as usize)];
            p.iter()
                .flat_map(|&a| p.iter().map(move |&b| g.dist(a, b)))
                .max()
                .unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    let smallest_d = condition1.max(condition2);
    Ok(BowditchReport {
        condition1,
        condition1_witness: best.filter(|w| w.distance > 0),
        condition2,
        smallest_d,
        d,
        pass: smallest_d <= d,
    })
}

/// The family of canonical geodesics.
pub fn geodesic_family(g: &MetricGraph) -> impl Fn(Vertex, Vertex) -> Vec<Vertex> + Sync + '_ {
    move |x, y| crate::graph::paths::geodesic_unchecked(g, x, y).vertices
}

/// Paths in the level-`level` horoball fiber over `base`: the canonical
/// geodesic of `base` from `x` to `y`, keeping every `2^level`-th vertex
/// and the endpoint. Consecutive waypoints are at base distance at most
/// `2^level`, hence adjacent in the fiber.
pub fn waypoint_family(
    base: &MetricGraph,
    level: usize,
) -> impl Fn(Vertex, Vertex) -> Vec<Vertex> + Sync + '_ {
    let stride = 1usize << level.min(31);
    move |x, y| {
        let geo = crate::graph::paths::geodesic_unchecked(base, x, y).vertices;
        let mut out: Vec<Vertex> = geo.iter().copied().step_by(stride).collect();
        if out.last() != geo.last() {
            out.push(*geo.last().unwrap());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::horoball_bundle;
    use crate::graph::generators::{cycle, path, regular_tree};
    use crate::hyperbolicity::delta_four_point;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn line(points: usize, spacing: Rational) -> SampledSpace {
        SampledSpaceSpec {
            point_count: points,
            metric: MetricSpec::Formula {
                name: "line".into(),
                params: serde_json::json!({"spacing": spacing.to_string()}),
            },
        }
        .build()
        .unwrap()
    }

    #[test]
    fn metric_validation() {
        let ok = SampledSpace::from_lower(&[vec![r(1, 1)], vec![r(2, 1), r(1, 1)]]).unwrap();
        assert_eq!(ok.d(2, 0), r(2, 1));
        let bad = SampledSpace::from_lower(&[vec![r(1, 1)], vec![r(3, 1), r(1, 1)]]);
        assert!(matches!(bad, Err(CoreError::MetricAxiomViolation(_))));
        let neg = SampledSpace::from_lower(&[vec![r(-1, 1)]]);
        assert!(matches!(neg, Err(CoreError::MetricAxiomViolation(_))));
        let hb = HoroballSampler {
            n: 9,
            spacing: r(1, 2),
            levels: 3,
        };
        assert_eq!(hb.total_space().unwrap().len(), 17 * 4);
        let json =
            r#"{"point_count": 3, "metric": {"kind": "explicit", "lower": [[1], ["1/2", "1/2"]]}}"#;
        let spec: SampledSpaceSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.build().unwrap().d(1, 2), r(1, 2));
    }

    #[test]
    fn nets_on_lines() {
        let sp = line(41, r(1, 2));
        let net = separated_net(&sp).unwrap();
        assert_eq!(net.members, (0..41).step_by(2).collect::<Vec<_>>());
        assert_eq!(net.covering_radius, r(1, 2));
        net_invariants(&sp, &net).unwrap();
        let spread = line(5, r(1, 1));
        assert_eq!(separated_net(&spread).unwrap().members, vec![0, 1, 2, 3, 4]);
        let twin = SampledSpace::from_lower(&[vec![r(0, 1)]]).unwrap();
        assert_eq!(separated_net(&twin).unwrap().members, vec![0]);
    }

    #[test]
    fn net_graph_of_line_is_a_quasi_isometry() {
        let sp = line(41, r(1, 2));
        let net = separated_net(&sp).unwrap();
        let ng = net_graph(&net, &sp).unwrap();
        assert_eq!(ng.graph.vertex_count(), 21);
        // members at integer positions, joined when at most 3 apart
        assert_eq!(ng.graph.max_valence(), 6);
        assert_eq!(ng.graph.dist(0, 20), 7);
        let audit = qi_audit(&sp, &ng.nearest, &ng.graph, None, 0).unwrap();
        assert!(audit.exhaustive);
        assert!(audit.multiplicative <= HalfInt::from_int(3));
        assert!(audit.additive <= r(3, 1));
        let single = SampledSpace::from_fn(1, |_, _| r(0, 1)).unwrap();
        let ng1 = net_graph(&separated_net(&single).unwrap(), &single).unwrap();
        assert_eq!(ng1.graph.vertex_count(), 1);
        let clusters = SampledSpaceSpec {
            point_count: 6,
            metric: MetricSpec::Formula {
                name: "clusters".into(),
                params: serde_json::json!({"sizes": [3, 3], "spacing": 1, "gap": 10}),
            },
        }
        .build()
        .unwrap();
        let net = separated_net(&clusters).unwrap();
        assert_eq!(
            net_graph(&net, &clusters).unwrap_err(),
            CoreError::DisconnectedNetGraph
        );
    }

    #[test]
    fn audits() {
        let g = cycle(8);
        let id: Vec<Vertex> = g.vertices().collect();
        let a = qi_audit(&g, &id, &g, None, 0).unwrap();
        assert_eq!((a.multiplicative, a.additive), (HalfInt::ONE, r(0, 1)));
        assert_eq!(a.bilipschitz, Some(FlexRational(r(1, 1))));
        let collapse = vec![0; 8];
        let a = qi_audit(&g, &collapse, &g, None, 0).unwrap();
        assert!(!a.pass && a.bilipschitz.is_none());
        let sampled = qi_audit(&g, &id, &g, Some(10), 3).unwrap();
        assert!(!sampled.exhaustive && sampled.pairs_checked == 10);
    }

    #[test]
    fn covering_numbers() {
        let sp = line(41, r(1, 2));
        let est = strongly_proper_estimate(&sp, &[r(1, 1), r(4, 1)], &[r(1, 3), r(1, 1), r(4, 1)])
            .unwrap();
        // r below the spacing: every point of an R-ball needs its own ball
        assert_eq!(est.get(r(4, 1), r(1, 3)), Some(17));
        assert_eq!(est.get(r(1, 1), r(4, 1)), Some(1));
        assert_eq!(est.get(r(4, 1), r(4, 1)), Some(1));
        for e in &est.table {
            for f in &est.table {
                if e.big_r <= f.big_r && e.small_r >= f.small_r {
                    assert!(e.count <= f.count);
                }
            }
        }
        let ng = net_graph(&separated_net(&sp).unwrap(), &sp).unwrap();
        assert!(ng.graph.max_valence() <= est.get(r(4, 1), r(1, 3)).unwrap());
        assert_eq!(
            strongly_proper_estimate(&sp, &[], &[r(1, 1)]).unwrap_err(),
            CoreError::EmptySet
        );
    }

    #[test]
    fn approximating_horoball_bundle() {
        for c in [r(0, 1), r(1, 2), r(1, 1)] {
            let hs = HoroballSampler {
                n: 9,
                spacing: r(1, 2),
                levels: 3,
            };
            let ab = approx_bundle(&hs, c).unwrap();
            for (i, net) in ab.nets.iter().enumerate() {
                net_invariants(&hs.fiber(i).unwrap(), net).unwrap();
                assert!(net.covering_radius <= r(1, 1));
            }
            let hb = horoball_bundle(&path(9), 3);
            let map = hs.horoball_map(&ab, &hb).unwrap();
            let audit = qi_audit(ab.bundle.total(), &map, hb.total(), None, 0).unwrap();
            assert!(audit.exhaustive && audit.pass);
            let bound = Rational::from_integer(6) * c + Rational::from_integer(4);
            assert!(
                audit.multiplicative.to_rational() <= bound,
                "c = {c}: {audit:?}"
            );
        }
        let prod = ProductSampler {
            fiber: line(9, r(1, 1)),
            levels: 2,
        };
        let ab = approx_bundle(&prod, r(0, 1)).unwrap();
        assert_eq!(ab.bundle.level_count(), 3);
        assert!(ab.bundle.fibers().iter().all(|f| f == ab.bundle.fiber(0)));
    }

    #[test]
    fn bowditch_examples() {
        let t = regular_tree(3, 3);
        let rep = bowditch_check(&t, geodesic_family(&t), 1).unwrap();
        assert_eq!((rep.condition1, rep.condition2), (0, 1));
        assert!(rep.pass);
        let broken = |x: Vertex, y: Vertex| {
            if x == 0 && y == 9 {
                vec![0, 9]
            } else {
                geodesic_family(&t)(x, y)
            }
        };
        assert!(matches!(
            bowditch_check(&t, broken, 1),
            Err(CoreError::BadPathFamily(_))
        ));
        for base in [path(17), regular_tree(3, 4)] {
            let delta = delta_four_point(&base).unwrap().delta_four_point;
            let hb = horoball_bundle(&base, 4);
            for i in 0..=4 {
                let rep = bowditch_check(hb.fiber(i), waypoint_family(&base, i), 0).unwrap();
                assert!(
                    rep.smallest_d as i64 <= 2 + delta.ceil(),
                    "level {i}: {rep:?}"
                );
            }
        }
    }
}
