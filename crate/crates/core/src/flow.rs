//! Flows of fiber subsets through a bundle, the exponential front bound,
//! flaring and divergence of section pairs, and the shadowing search.
//!
//! Flows are computed by stepwise relaxation: `x` in `F_i` reaches `y` in
//! `F_{i+1}` when `d_total(x, y) <= 2k`. A `k`-qi section moves at most
//! `2k` per unit step, so the relaxation contains the true flow and every
//! upper bound checked on it holds for the flow as well.

use std::collections::VecDeque;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bundle::{section_distance_profile, section_through, GraphBundle, QiSection};
use crate::error::{CoreError, Result};
use crate::graph::{MetricGraph, Vertex, UNREACHABLE};
use crate::numeric::{divergence_base, length_exceeds_divergence_bound, HalfInt, Rational};
use crate::report::{to_csv, Record};

pub const STEP_RULE: &str =
    "x in F_i reaches y in F_(i+1) iff d_total(x, y) <= 2k; contains the k-flow";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowFront {
    pub base_set: Vec<Vertex>,
    pub k: u32,
    /// Fiber-local ids per level, ascending.
    pub fronts: Vec<Vec<Vertex>>,
    pub step_rule: String,
}

/// Vertices of `g` within `radius` of some source.
fn within_of_set(g: &MetricGraph, sources: &[Vertex], radius: u32) -> Vec<Vertex> {
    let mut dist = vec![UNREACHABLE; g.vertex_count()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s as usize] == UNREACHABLE {
            dist[s as usize] = 0;
            queue.push_back(s);
        }
    }
    let mut out = Vec::new();
    while let Some(u) = queue.pop_front() {
        out.push(u);
        let du = dist[u as usize];
        if du == radius {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist[w as usize] == UNREACHABLE {
                dist[w as usize] = du + 1;
                queue.push_back(w);
            }
        }
    }
    out
}

/// Relaxation flow of `a` (fiber-local ids in `F_0`) with step constant `k`.
pub fn flow(b: &GraphBundle, a: &[Vertex], k: u32) -> Result<FlowFront> {
    if a.is_empty() {
        return Err(CoreError::EmptySet);
    }
    if k == 0 {
        return Err(CoreError::InvalidParams("flow needs k >= 1".into()));
    }
    for &v in a {
        b.fiber(0).check_vertex(v)?;
    }
    let mut base: Vec<Vertex> = a.to_vec();
    base.sort_unstable();
    base.dedup();
    let mut fronts = vec![base.clone()];
    for i in 0..b.top() {
        let sources: Vec<Vertex> = fronts[i].iter().map(|&v| b.total_id(i, v)).collect();
        let mut next: Vec<Vertex> = within_of_set(b.total(), &sources, 2 * k)
            .into_iter()
            .filter_map(|x| {
                let (l, v) = b.locate(x);
                (l == i + 1).then_some(v)
            })
            .collect();
        next.sort_unstable();
        fronts.push(next);
    }
    Ok(FlowFront {
        base_set: base,
        k,
        fronts,
        step_rule: STEP_RULE.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowBoundRow {
    pub level: usize,
    pub front_size: usize,
    /// `|A| * c^level`, as a decimal string.
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowBoundReport {
    pub k: u32,
    pub base_size: usize,
    pub valence_bound: usize,
    /// Measured `f̂(4k)`.
    pub f_hat_4k: u32,
    /// `c = D^(f̂(4k) + 1)` as a decimal string.
    pub c: String,
    pub rows: Vec<FlowBoundRow>,
    pub pass: bool,
    pub step_rule: String,
}

impl FlowBoundReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.level.to_string(),
                    r.front_size.to_string(),
                    r.bound.clone(),
                    r.pass.to_string(),
                ]
            })
            .collect();
        to_csv(&["level", "front_size", "bound", "pass"], &rows)
    }

    /// Level with the smallest ratio of bound to front size.
    pub fn tightest_level(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter(|r| r.front_size > 0)
            .min_by(|x, y| {
                let bx: BigUint = x.bound.parse().unwrap();
                let by: BigUint = y.bound.parse().unwrap();
                // bx / fx < by / fy  <=>  bx * fy < by * fx
                (bx * y.front_size).cmp(&(by * x.front_size))
            })
            .map(|r| r.level)
    }

    pub fn to_record(&self) -> Record {
        Record::new(
            "flow_bound",
            json!({"k": self.k, "base_size": self.base_size}),
            json!(self.rows.iter().map(|r| r.front_size).collect::<Vec<_>>()),
            json!({"c": self.c, "valence_bound": self.valence_bound, "f_hat_4k": self.f_hat_4k}),
            self.pass,
        )
    }
}

/// Check `|front_i| <= |A| * c^i` with `c = D^(f̂(4k) + 1)` and
/// `D = max(2, fiber valence)`.
pub fn flow_bound_check(b: &GraphBundle, a: &[Vertex], k: u32) -> Result<FlowBoundReport> {
    let fl = flow(b, a, k)?;
    let d = b.fiber_valence_bound();
    let f_hat_4k = b.f_hat_measured(4 * k);
    let c = BigUint::from(d).pow(f_hat_4k + 1);
    let base_size = fl.base_set.len();
    let mut bound = BigUint::from(base_size);
    let mut rows = Vec::with_capacity(fl.fronts.len());
    for (level, front) in fl.fronts.iter().enumerate() {
        if level > 0 {
            bound *= &c;
        }
        rows.push(FlowBoundRow {
            level,
            front_size: front.len(),
            pass: BigUint::from(front.len()) <= bound,
            bound: bound.to_string(),
        });
    }
    Ok(FlowBoundReport {
        k,
        base_size,
        valence_bound: d,
        f_hat_4k,
        c: c.to_string(),
        pass: rows.iter().all(|r| r.pass),
        rows,
        step_rule: STEP_RULE.into(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaringViolation {
    /// Total ids the two sections were started from.
    pub starts: [Vertex; 2],
    pub middle: usize,
    pub d_minus: u32,
    pub d_mid: u32,
    pub d_plus: u32,
}

impl FlaringViolation {
    /// Rebuild both sections and confirm the window still fails.
    pub fn recheck(&self, b: &GraphBundle, k: u32, n_k: usize, lambda: Rational) -> Result<bool> {
        let s1 = section_through(b, self.starts[0], k)?;
        let s2 = section_through(b, self.starts[1], k)?;
        let d = section_distance_profile(b, &s1, &s2)?;
        let (m, n) = (self.middle, n_k);
        Ok(d[m - n] == self.d_minus
            && d[m] == self.d_mid
            && d[m + n] == self.d_plus
            && !flares(lambda, d[m], d[m - n].max(d[m + n])))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaringReport {
    pub k: u32,
    pub n_k: usize,
    pub lambda: Rational,
    pub m_k: Rational,
    pub samples: usize,
    /// Windows whose middle distance exceeded `M_k`.
    pub windows_checked: usize,
    pub violations: Vec<FlaringViolation>,
    pub pass: bool,
}

impl FlaringReport {
    pub fn to_record(&self) -> Record {
        Record::new(
            "flaring",
            json!({"k": self.k, "n_k": self.n_k, "lambda": self.lambda, "m_k": self.m_k, "samples": self.samples}),
            json!({"windows_checked": self.windows_checked, "violations": self.violations.len()}),
            json!(0),
            self.pass,
        )
    }
}

/// `lambda * mid < side`, exactly.
fn flares(lambda: Rational, mid: u32, side: u32) -> bool {
    (*lambda.numer() as i128) * (mid as i128) < (*lambda.denom() as i128) * (side as i128)
}

fn exceeds(d: u32, m: Rational) -> bool {
    (d as i128) * (*m.denom() as i128) > *m.numer() as i128
}

/// Sample section pairs and test every window `[m - n_k, m + n_k]` whose
/// middle distance exceeds `M_k` for `lambda * d_m < max(d_{m-n_k}, d_{m+n_k})`.
///
/// Pairs start in a random fiber; their fiber distance cycles through
/// `1..=diam` so that large separations are represented.
pub fn flaring_check(
    b: &GraphBundle,
    k: u32,
    n_k: usize,
    lambda: Rational,
    m_k: Rational,
    samples: usize,
    seed: u64,
) -> Result<FlaringReport> {
    if lambda <= Rational::from_integer(1) {
        return Err(CoreError::InvalidParams(format!(
            "lambda must exceed 1, got {lambda}"
        )));
    }
    if n_k == 0 {
        return Err(CoreError::InvalidParams("n_k must be at least 1".into()));
    }
    if 2 * n_k > b.top() {
        return Err(CoreError::WindowTooLong {
            n_k: n_k as u32,
            levels: b.top(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let diams: Vec<u32> = b.fibers().iter().map(MetricGraph::diameter).collect();
    let mut starts = Vec::with_capacity(samples);
    let mut attempts = 0;
    while starts.len() < samples && attempts < 20 * samples.max(1) {
        attempts += 1;
        let level = rng.gen_range(0..b.level_count());
        let f = b.fiber(level);
        if diams[level] == 0 {
            continue;
        }
        let target = (starts.len() as u32 % diams[level]) + 1;
        let x = rng.gen_range(0..f.vertex_count() as Vertex);
        let row = f.row(x);
        let at: Vec<Vertex> = f
            .vertices()
            .filter(|&y| row[y as usize] == target)
            .collect();
        if at.is_empty() {
            continue;
        }
        let y = at[rng.gen_range(0..at.len())];
        starts.push([b.total_id(level, x), b.total_id(level, y)]);
    }
    let per_pair: Vec<(usize, Vec<FlaringViolation>)> = starts
        .par_iter()
        .map(|&pair| -> Result<_> {
            let s1 = section_through(b, pair[0], k)?;
            let s2 = section_through(b, pair[1], k)?;
            let d = section_distance_profile(b, &s1, &s2)?;
            let mut checked = 0;
            let mut bad = Vec::new();
            for m in n_k..=b.top() - n_k {
                if !exceeds(d[m], m_k) {
                    continue;
                }
                checked += 1;
                if !flares(lambda, d[m], d[m - n_k].max(d[m + n_k])) {
                    bad.push(FlaringViolation {
                        starts: pair,
                        middle: m,
                        d_minus: d[m - n_k],
                        d_mid: d[m],
                        d_plus: d[m + n_k],
                    });
                }
            }
            Ok((checked, bad))
        })
        .collect::<Result<_>>()?;
    let windows_checked = per_pair.iter().map(|(c, _)| c).sum();
    let violations: Vec<FlaringViolation> = per_pair.into_iter().flat_map(|(_, v)| v).collect();
    Ok(FlaringReport {
        k,
        n_k,
        lambda,
        m_k,
        samples: starts.len(),
        windows_checked,
        pass: violations.is_empty(),
        violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub delta: HalfInt,
    /// `2^(1/(delta+1))`, for display.
    pub b: f64,
    pub profile: Vec<u32>,
    /// Level attaining `a = min_i d_i / b^i`.
    pub argmin_level: usize,
    pub a: f64,
    pub c: u32,
    pub pass: bool,
    /// `a <= C * b^(-N)`: the fitted rate says nothing beyond the start.
    pub vacuous_weak: bool,
    pub a_at_least_one: bool,
}

impl DivergenceReport {
    /// A pass that is not vacuous.
    pub fn strong_pass(&self) -> bool {
        self.pass && !self.vacuous_weak
    }

    pub fn to_record(&self) -> Record {
        Record::new(
            "divergence",
            json!({"delta": self.delta, "c": self.c}),
            json!({"profile": self.profile, "a": self.a, "argmin_level": self.argmin_level}),
            json!({"b": self.b, "vacuous_weak": self.vacuous_weak}),
            self.pass,
        )
    }
}

/// `d^(h+2) * 2^(2e)` with `h = 2 delta`, the exact scale used to compare
/// values of the form `d * b^e`.
fn scaled(d: u32, h: u32, e: usize) -> BigUint {
    BigUint::from(d).pow(h + 2) << (2 * e)
}

/// Fit the largest `a` with `d_i >= a * b^i`, `b = 2^(1/(delta+1))`, for
/// two sections whose fiber distance stays above `M_k` and starts at most
/// `C`.
pub fn divergence_check(
    b: &GraphBundle,
    s1: &QiSection,
    s2: &QiSection,
    delta_total: HalfInt,
    m_k: Rational,
    c: u32,
) -> Result<DivergenceReport> {
    let profile = section_distance_profile(b, s1, s2)?;
    if let Some(level) = profile.iter().position(|&d| !exceeds(d, m_k)) {
        return Err(CoreError::HypothesisUnmet {
            level,
            reason: format!("distance {} <= M_k = {m_k}", profile[level]),
        });
    }
    if profile[0] > c {
        return Err(CoreError::HypothesisUnmet {
            level: 0,
            reason: format!("starting distance {} > C = {c}", profile[0]),
        });
    }
    let h = delta_total.doubled().max(0) as u32;
    let top = profile.len() - 1;
    // d_i / b^i < d_j / b^j  <=>  d_i * b^(top-i) < d_j * b^(top-j)
    let argmin_level = (0..profile.len())
        .min_by(|&i, &j| {
            scaled(profile[i], h, top - i)
                .cmp(&scaled(profile[j], h, top - j))
                .then(i.cmp(&j))
        })
        .unwrap();
    let base = divergence_base(delta_total);
    let d_min = profile[argmin_level];
    let a = d_min as f64 / base.powi(argmin_level as i32);
    let vacuous_weak = scaled(d_min, h, top - argmin_level) <= BigUint::from(c).pow(h + 2);
    Ok(DivergenceReport {
        delta: delta_total,
        b: base,
        argmin_level,
        a,
        c,
        pass: d_min > 0,
        vacuous_weak,
        a_at_least_one: length_exceeds_divergence_bound(
            d_min as u64,
            delta_total,
            argmin_level as u64,
        ),
        profile,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowWitness {
    pub p: Vertex,
    pub section: QiSection,
    pub meet_level: usize,
    pub meet_distance: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowResult {
    pub target: QiSection,
    pub m: u32,
    pub min_start_distance: u32,
    pub candidates: usize,
    pub witnesses: Vec<ShadowWitness>,
}

impl ShadowResult {
    /// Recompute every witness distance.
    pub fn recheck(&self, b: &GraphBundle) -> bool {
        self.witnesses.iter().all(|w| {
            let l = w.meet_level;
            b.fiber(l).dist(w.section.levels[l], self.target.levels[l]) <= w.meet_distance
                && w.meet_distance <= self.m
        })
    }

    pub fn to_record(&self) -> Record {
        Record::new(
            "shadow",
            json!({"m": self.m, "min_start_distance": self.min_start_distance}),
            json!({"candidates": self.candidates, "witnesses": self.witnesses.len()}),
            json!(self.m),
            !self.witnesses.is_empty(),
        )
    }
}

/// For every `p` in `F_0` at distance at least `min_start_distance` from
/// `target(0)`, follow the section through `p` and report the first level
/// where it comes within `m` of the target.
pub fn shadow_search(
    b: &GraphBundle,
    target: &QiSection,
    m: u32,
    min_start_distance: u32,
) -> Result<ShadowResult> {
    if target.levels.len() != b.level_count() {
        return Err(CoreError::SectionMismatch(
            target.levels.len(),
            b.level_count(),
        ));
    }
    let f0 = b.fiber(0);
    let row = f0.row(target.levels[0]);
    let candidates: Vec<Vertex> = f0
        .vertices()
        .filter(|&p| row[p as usize] >= min_start_distance)
        .collect();
    let runs: Vec<(Vertex, QiSection, Vec<u32>)> = candidates
        .par_iter()
        .map(|&p| -> Result<_> {
            let s = section_through(b, b.total_id(0, p), 1)?;
            let d = section_distance_profile(b, &s, target)?;
            Ok((p, s, d))
        })
        .collect::<Result<_>>()?;
    let closest = runs.iter().flat_map(|(_, _, d)| d.iter().copied()).min();
    let witnesses: Vec<ShadowWitness> = runs
        .into_iter()
        .filter_map(|(p, section, d)| {
            d.iter().position(|&x| x <= m).map(|l| ShadowWitness {
                p,
                section,
                meet_level: l,
                meet_distance: d[l],
            })
        })
        .collect();
    if witnesses.is_empty() {
        return Err(CoreError::NoWitness {
            candidates: candidates.len(),
            closest,
        });
    }
    Ok(ShadowResult {
        target: target.clone(),
        m,
        min_start_distance,
        candidates: candidates.len(),
        witnesses,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubclaimRow {
    pub level: usize,
    pub radius: Option<u32>,
    pub ball_size: usize,
    pub missing: Vec<Vertex>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubclaimReport {
    pub a: Rational,
    pub delta: HalfInt,
    pub rows: Vec<SubclaimRow>,
    pub pass: bool,
}

/// Largest integer `r >= 0` with `r <= a * 2^(i/(delta+1)) - 1`, if any.
fn subclaim_radius(a: Rational, h: u32, i: usize) -> Option<u32> {
    // (r+1) <= (p/q) * 2^(2i/(h+2))  <=>  ((r+1) q)^(h+2) <= p^(h+2) 2^(2i)
    let (p, q) = (*a.numer(), *a.denom());
    if p <= 0 {
        return None;
    }
    let rhs = BigUint::from(p as u64).pow(h + 2) << (2 * i);
    let fits = |r: u32| BigUint::from((r as u64 + 1) * q as u64).pow(h + 2) <= rhs;
    if !fits(0) {
        return None;
    }
    let mut r = 0;
    while fits(r + 1) {
        r += 1;
    }
    Some(r)
}

/// Check that `B_{F_i}(sigma(i), [a b^i - 1])` lies in the relaxation
/// 1-flow of `a_set` at every level.
pub fn subclaim_check(
    b: &GraphBundle,
    a_set: &[Vertex],
    sigma: &QiSection,
    a: Rational,
    delta: HalfInt,
) -> Result<SubclaimReport> {
    if sigma.levels.len() != b.level_count() {
        return Err(CoreError::SectionMismatch(
            sigma.levels.len(),
            b.level_count(),
        ));
    }
    let fl = flow(b, a_set, 1)?;
    let h = delta.doubled().max(0) as u32;
    let rows: Vec<SubclaimRow> = (0..b.level_count())
        .map(|i| {
            let radius = subclaim_radius(a, h, i);
            let Some(r) = radius else {
                return SubclaimRow {
                    level: i,
                    radius,
                    ball_size: 0,
                    missing: Vec::new(),
                };
            };
            let ball: Vec<Vertex> = b
                .fiber(i)
                .bfs_within(sigma.levels[i], r)
                .into_iter()
                .map(|(v, _)| v)
                .collect();
            let mut missing: Vec<Vertex> = ball
                .iter()
                .copied()
                .filter(|v| fl.fronts[i].binary_search(v).is_err())
                .collect();
            missing.sort_unstable();
            SubclaimRow {
                level: i,
                radius,
                ball_size: ball.len(),
                missing,
            }
        })
        .collect();
    Ok(SubclaimReport {
        a,
        delta,
        pass: rows.iter().all(|r| r.missing.is_empty()),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{automorphism_bundle, horoball_bundle, product_bundle};
    use crate::graph::generators::{cycle, path, regular_tree};

    /// Reachability oracle straight from the step rule: all pairs at total
    /// distance `<= 2k`.
    fn brute_flow(b: &GraphBundle, a: &[Vertex], k: u32) -> Vec<Vec<Vertex>> {
        let mut fronts = vec![a.to_vec()];
        for i in 0..b.top() {
            let next: Vec<Vertex> = b
                .fiber(i + 1)
                .vertices()
                .filter(|&y| {
                    fronts[i]
                        .iter()
                        .any(|&x| b.total().dist(b.total_id(i, x), b.total_id(i + 1, y)) <= 2 * k)
                })
                .collect();
            fronts.push(next);
        }
        fronts
    }

    #[test]
    fn product_flow_matches_oracle() {
        let f = path(9);
        let b = product_bundle(&f, 3);
        let fl = flow(&b, &[4], 1).unwrap();
        assert_eq!(fl.fronts, brute_flow(&b, &[4], 1));
        // d((x, i), (y, i+1)) = d_F(x, y) + 1 <= 2 spreads one step per level
        assert_eq!(fl.fronts[1], vec![3, 4, 5]);
        assert_eq!(fl.fronts[3], (1..=7).collect::<Vec<_>>());
        let all: Vec<Vertex> = f.vertices().collect();
        let fl = flow(&b, &all, 1).unwrap();
        assert!(fl.fronts.iter().all(|fr| fr == &all));
        assert_eq!(flow(&b, &[], 1).unwrap_err(), CoreError::EmptySet);
    }

    #[test]
    fn horoball_flow_matches_oracle_and_is_monotone() {
        let b = horoball_bundle(&path(17), 4);
        for k in [1, 2] {
            let small = flow(&b, &[8], k).unwrap();
            assert_eq!(small.fronts, brute_flow(&b, &[8], k));
            let big = flow(&b, &[7, 8, 9], k).unwrap();
            for (s, l) in small.fronts.iter().zip(&big.fronts) {
                assert!(s.iter().all(|v| l.contains(v)));
            }
        }
        let fl = flow(&b, &[8], 1).unwrap();
        assert!(fl.fronts[4].len() > fl.fronts[1].len());
    }

    #[test]
    fn flow_bound_passes() {
        let bundles = [
            product_bundle(&path(9), 3),
            horoball_bundle(&cycle(12), 4),
            horoball_bundle(&regular_tree(3, 4), 3),
        ];
        for b in &bundles {
            for k in [1, 2] {
                let r = flow_bound_check(b, &[0], k).unwrap();
                assert!(r.pass);
                assert_eq!(r.rows.len(), b.level_count());
                let all: Vec<Vertex> = b.fiber(0).vertices().collect();
                assert!(flow_bound_check(b, &all, k).unwrap().pass);
            }
        }
        let r = flow_bound_check(&bundles[0], &[4], 1).unwrap();
        // product: f̂(4) = 4 on P9, valence 2, c = 2^5
        assert_eq!((r.f_hat_4k, r.c.as_str()), (4, "32"));
        assert!(r
            .csv()
            .starts_with("level,front_size,bound,pass\n0,1,1,true\n1,3,32,true\n"));
        assert_eq!(r.tightest_level(), Some(0));
    }

    #[test]
    fn flaring_product_fails_horoball_passes() {
        let lambda = Rational::new(3, 2);
        let m_k = Rational::from_integer(2);
        let prod = product_bundle(&path(17), 4);
        let r = flaring_check(&prod, 1, 1, lambda, m_k, 60, 7).unwrap();
        assert!(!r.pass);
        assert_eq!(r.windows_checked, r.violations.len());
        assert!(r
            .violations
            .iter()
            .all(|v| v.d_mid > 2 && v.d_mid == v.d_plus));
        assert!(r
            .violations
            .iter()
            .all(|v| v.recheck(&prod, 1, 1, lambda).unwrap()));
        let hb = horoball_bundle(&path(33), 6);
        let r = flaring_check(&hb, 1, 1, lambda, m_k, 60, 7).unwrap();
        assert!(r.windows_checked > 0);
        assert!(r.pass, "{:?}", r.violations.first());
        assert_eq!(r, flaring_check(&hb, 1, 1, lambda, m_k, 60, 7).unwrap());
        assert!(matches!(
            flaring_check(&hb, 1, 1, Rational::from_integer(1), m_k, 5, 0),
            Err(CoreError::InvalidParams(_))
        ));
        assert!(matches!(
            flaring_check(&hb, 1, 4, lambda, m_k, 5, 0),
            Err(CoreError::WindowTooLong { n_k: 4, levels: 6 })
        ));
    }

    #[test]
    fn divergence_reports() {
        let prod = product_bundle(&path(17), 6);
        let s1 = section_through(&prod, prod.total_id(0, 0), 1).unwrap();
        let s2 = section_through(&prod, prod.total_id(0, 16), 1).unwrap();
        assert!(matches!(
            divergence_check(&prod, &s1, &s1, HalfInt::ONE, Rational::from_integer(0), 20),
            Err(CoreError::HypothesisUnmet { level: 0, .. })
        ));
        let r =
            divergence_check(&prod, &s1, &s2, HalfInt::ONE, Rational::from_integer(2), 16).unwrap();
        assert!(r.pass && r.vacuous_weak && !r.strong_pass());
        assert_eq!(r.argmin_level, 6);
        // a = 16 / 2^(6/2) = 2
        assert!((r.a - 2.0).abs() < 1e-12);
        assert!(r.a_at_least_one);

        let auto = automorphism_bundle(2, &["ab".into(), "a".into()], 4, 5).unwrap();
        let ball = crate::graph::FreeGroupBall::new(2, 5);
        let a = ball.vertex_of(&[1]).unwrap();
        let t1 = section_through(&auto, auto.total_id(0, 0), 1).unwrap();
        let t2 = section_through(&auto, auto.total_id(0, a), 1).unwrap();
        // the identity is fixed and a -> ab -> aba -> abaab has Fibonacci
        // lengths until the ball radius caps it
        let p = section_distance_profile(&auto, &t1, &t2).unwrap();
        assert_eq!(p, vec![1, 2, 3, 5, 5]);
        let r =
            divergence_check(&auto, &t1, &t2, HalfInt::ONE, Rational::from_integer(0), 1).unwrap();
        assert_eq!(r.argmin_level, 0);
        assert!(r.strong_pass() && r.a_at_least_one);
    }

    #[test]
    fn shadowing_dichotomy() {
        let hb = horoball_bundle(&path(33), 6);
        let target = section_through(&hb, hb.total_id(0, 16), 1).unwrap();
        let r = shadow_search(&hb, &target, 2, 10).unwrap();
        assert_eq!(r.candidates, 14);
        assert_eq!(r.witnesses.len(), r.candidates);
        assert!(r.recheck(&hb));
        // d_0 = 16 meets d_l <= 2 at l = 3
        assert_eq!(r.witnesses.iter().map(|w| w.meet_level).max(), Some(3));
        let trivial = shadow_search(&hb, &target, 2, 0).unwrap();
        assert_eq!(
            (trivial.witnesses[16].p, trivial.witnesses[16].meet_level),
            (16, 0)
        );

        let prod = product_bundle(&path(33), 6);
        let target = section_through(&prod, prod.total_id(0, 16), 1).unwrap();
        assert_eq!(
            shadow_search(&prod, &target, 3, 5).unwrap_err(),
            CoreError::NoWitness {
                candidates: 24,
                closest: Some(5)
            }
        );
    }

    #[test]
    fn subclaim_on_horoball() {
        let hb = horoball_bundle(&path(17), 4);
        let sigma = section_through(&hb, hb.total_id(0, 8), 1).unwrap();
        let a_set: Vec<Vertex> = (6..=10).collect();
        // radii floor(3 * 2^(i/2) - 1): 2, 3, 5, 7, 11
        let r = subclaim_check(&hb, &a_set, &sigma, Rational::new(3, 1), HalfInt::ONE).unwrap();
        let radii: Vec<Option<u32>> = r.rows.iter().map(|x| x.radius).collect();
        assert_eq!(radii, vec![Some(2), Some(3), Some(5), Some(7), Some(11)]);
        // level 1: the ball |y - 8| <= 6 against the front 4..=12
        assert!(!r.pass);
        assert_eq!(r.rows[1].missing, vec![2, 3, 13, 14]);
        let r = subclaim_check(&hb, &a_set, &sigma, Rational::new(2, 1), HalfInt::ONE).unwrap();
        assert!(r.pass);
        assert_eq!(subclaim_radius(Rational::new(1, 2), 2, 0), None);
    }
}
