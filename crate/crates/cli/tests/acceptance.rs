//! Acceptance suite: one test per criterion, each printing a single
//! PASS/FAIL line. Every derived quantity is rechecked by an oracle
//! written here from the definitions, independent of the library code
//! that produced it.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use coarselab::barycenter::{coarse_surjectivity_constant, verify_embedding, Surjectivity};
use coarselab::bundle::{section_distance_profile, section_through};
use coarselab::bundle::{validate_bundle, BundleSpec, GraphBundle};
use coarselab::discretize::{
    approx_bundle, bowditch_check, net_invariants, qi_audit, waypoint_family, HoroballSampler,
    MetricBundleSampler,
};
use coarselab::flow::{flow_bound_check, shadow_search};
use coarselab::graph::generators::{free_group_ball, path, regular_tree, GraphSpec};
use coarselab::growth::{
    ball_counts, barycenter_growth_pipeline, growth_fit, qi_growth_transfer, PipelineOptions,
};
use coarselab::hyperbolicity::{delta_four_point, sample_detours};
use coarselab::{CoreError, HalfInt, MetricGraph, Rational, Vertex};
use coarselab_cli::{execute, suite, ExperimentConfig, Matrix, Op, Status};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::json;

// Pinned tolerances and limits.
const TREE_DELTA_TIME_LIMIT: Duration = Duration::from_secs(1);
const TREE_DELTA_TIMED_VERTICES: usize = 500;
const GROWTH_B_SLACK: (i64, i64) = (1, 1_000_000_000);
const PIPELINE_TIME_LIMIT: Duration = Duration::from_secs(60);
const UNIFORMITY_SLACK: i64 = 2;
const BOWDITCH_BASE: i64 = 2;
const MIN_DETOURS: usize = 100;
const SHADOW_M: u32 = 2;
const CONTROL_MIN_START: u32 = 5;
const F64_REL_TOL: f64 = 1e-9;

fn verdict(id: u32, title: &str, failures: &[String], detail: String) {
    let ok = failures.is_empty();
    println!(
        "criterion {id:>2} {} {title}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {id} ({title}) failed: {failures:#?}");
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn bpow(base: &BigRational, e: i64) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..e.unsigned_abs() {
        out *= base;
    }
    if e < 0 {
        out.recip()
    } else {
        out
    }
}

/// Plain BFS distances; the oracle's own, not the library's.
fn bfs(g: &MetricGraph, s: Vertex, allowed: impl Fn(Vertex) -> bool) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.vertex_count()];
    if !allowed(s) {
        return dist;
    }
    dist[s as usize] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        let du = dist[u as usize].unwrap();
        for &w in g.neighbors(u) {
            if dist[w as usize].is_none() && allowed(w) {
                dist[w as usize] = Some(du + 1);
                q.push_back(w);
            }
        }
    }
    dist
}

fn all_rows(g: &MetricGraph) -> Vec<Vec<u32>> {
    g.vertices()
        .map(|v| {
            bfs(g, v, |_| true)
                .into_iter()
                .map(|d| d.unwrap())
                .collect()
        })
        .collect()
}

fn central(g: &MetricGraph) -> Vertex {
    let rows = all_rows(g);
    (0..g.vertex_count())
        .min_by_key(|&v| (*rows[v].iter().max().unwrap(), v))
        .unwrap() as Vertex
}

fn base_fibers() -> Vec<(&'static str, GraphSpec)> {
    vec![
        ("P9", GraphSpec::Path { n: 9 }),
        ("P17", GraphSpec::Path { n: 17 }),
        (
            "T3-depth-4",
            GraphSpec::RegularTree {
                valence: 3,
                depth: 4,
            },
        ),
        ("C12", GraphSpec::Cycle { n: 12 }),
    ]
}

const LEVELS: usize = 4;

#[test]
fn criterion_01_tree_delta_is_zero() {
    let mut failures = Vec::new();
    let mut slowest = Duration::ZERO;
    let mut checked = 0;
    for (m, max_depth) in [(3usize, 6usize), (4, 6)] {
        for d in 0..=max_depth {
            let t = regular_tree(m, d);
            let start = Instant::now();
            let est = delta_four_point(&t).unwrap();
            let took = start.elapsed();
            checked += 1;
            if est.delta_four_point != HalfInt::ZERO {
                failures.push(format!("T{m} depth {d}: delta {}", est.delta_four_point));
            }
            if t.vertex_count() <= TREE_DELTA_TIMED_VERTICES {
                slowest = slowest.max(took);
                if took >= TREE_DELTA_TIME_LIMIT {
                    failures.push(format!("T{m} depth {d}: {took:?}"));
                }
            }
        }
    }
    // brute quadruple oracle on a small tree
    let t = regular_tree(3, 2);
    let rows = all_rows(&t);
    let n = t.vertex_count();
    let mut brute = 0i64;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    let mut s = [
                        (rows[x][y] + rows[z][w]) as i64,
                        (rows[x][z] + rows[y][w]) as i64,
                        (rows[x][w] + rows[y][z]) as i64,
                    ];
                    s.sort();
                    brute = brute.max(s[2] - s[1]);
                }
            }
        }
    }
    if brute != 0 {
        failures.push(format!(
            "brute four-point on T3-2 gives doubled delta {brute}"
        ));
    }
    let cfg = ExperimentConfig::new(Op::Delta).with_graph(GraphSpec::RegularTree {
        valence: 3,
        depth: 4,
    });
    let out = execute(&cfg);
    if out.report.value["delta_four_point"] != json!(0) || out.report.exit_code() != 0 {
        failures.push(format!("runner delta on T3: {}", out.report.value));
    }
    verdict(
        1,
        "tree delta",
        &failures,
        format!("{checked} trees, slowest timed run {slowest:?}"),
    );
}

#[test]
fn criterion_02_t3_growth() {
    let mut failures = Vec::new();
    let t = regular_tree(3, 10);
    let counts = ball_counts(&t, 0, 10).unwrap();
    for n in 1..=10usize {
        let exact = 3 * (1u64 << n) - 2;
        if counts[n] != exact {
            failures.push(format!("n = {n}: count {} != {exact}", counts[n]));
        }
        // count >= (3/2) 2^n
        if 2 * counts[n] < 3 * (1u64 << n) {
            failures.push(format!("n = {n}: count {} below (3/2) 2^n", counts[n]));
        }
    }
    let fit = growth_fit(&counts, 1..=10).unwrap();
    let floor = ratio(2, 1) - ratio(GROWTH_B_SLACK.0, GROWTH_B_SLACK.1);
    if fit.b < floor {
        failures.push(format!("fitted b = {} < 2 - 1e-9", fit.b));
    }
    // the fit must hold on every count of its window
    for n in 1..=10 {
        let c = BigRational::from_integer(BigInt::from(counts[n]));
        if c < &fit.a * bpow(&fit.b, n as i64) {
            failures.push(format!("fit exceeds count at n = {n}"));
        }
    }
    verdict(
        2,
        "T3 growth",
        &failures,
        format!("counts {:?}, b = {}", &counts[1..], fit.b),
    );
}

/// Independent evaluation of the transferred law: `a' = min{a D^-(⌊k²⌋+2),
/// 1} b^(-3k)`, `b' = b^(1/k)`, and the decision `count >= a' b'^n` raised
/// to the power `p q` for `k = p/q`.
struct TransferOracle {
    coeff: BigRational,
    b: BigRational,
    p: i64,
    q: i64,
}

impl TransferOracle {
    fn new(a: &BigRational, b: &BigRational, k: Rational, d: i64) -> Self {
        let (p, q) = (*k.numer(), *k.denom());
        let k_sq_floor = (p * p) / (q * q);
        let scaled = a.clone()
            * bpow(
                &BigRational::from_integer(BigInt::from(d)),
                -(k_sq_floor + 2),
            );
        let coeff = if scaled < BigRational::one() {
            scaled
        } else {
            BigRational::one()
        };
        TransferOracle {
            coeff,
            b: b.clone(),
            p,
            q,
        }
    }

    fn holds(&self, n: u32, count: u64) -> bool {
        // count >= coeff * b^(n/k - 3k)  <=>  (count/coeff)^(pq) >= b^(n q^2 - 3 p^2)
        let lhs = bpow(
            &(BigRational::from_integer(BigInt::from(count)) / &self.coeff),
            self.p * self.q,
        );
        let rhs = bpow(&self.b, n as i64 * self.q * self.q - 3 * self.p * self.p);
        lhs >= rhs
    }

    fn a_prime_f64(&self) -> f64 {
        let k = self.p as f64 / self.q as f64;
        to_f64(&self.coeff) * to_f64(&self.b).powf(-3.0 * k)
    }

    fn b_prime_f64(&self) -> f64 {
        to_f64(&self.b).powf(self.q as f64 / self.p as f64)
    }
}

fn to_f64(r: &BigRational) -> f64 {
    let s = format!("{}", r);
    match s.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap(),
        None => s.parse().unwrap(),
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= F64_REL_TOL * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_03_growth_transfer() {
    let mut failures = Vec::new();
    let d = 3i64;
    let mut points = 0;
    let mut decisions = 0;
    for a in [ratio(1, 1), ratio(3, 2)] {
        for b in [ratio(2, 1), ratio(3, 1)] {
            for k in [
                Rational::from_integer(1),
                Rational::new(3, 2),
                Rational::from_integer(2),
            ] {
                points += 1;
                let t = qi_growth_transfer(&a, &b, k, d as u64).unwrap();
                let o = TransferOracle::new(&a, &b, k, d);
                if t.a_coeff != o.coeff {
                    failures.push(format!(
                        "({a}, {b}, {k}): coefficient {} != {}",
                        t.a_coeff, o.coeff
                    ));
                }
                if !close(t.a_prime_f64(), o.a_prime_f64())
                    || !close(t.b_prime_f64(), o.b_prime_f64())
                {
                    failures.push(format!("({a}, {b}, {k}): a', b' disagree"));
                }
                // b'^k = b exactly: b' = radicand^(1/index) with radicand^(q) ... compare b'^p = b^q
                let bp = t.b_prime();
                let lhs = bpow(&bp.radicand, *k.numer());
                let rhs = bpow(&bpow(&b, *k.denom()), bp.index as i64);
                if lhs != rhs {
                    failures.push(format!("({a}, {b}, {k}): b'^k != b"));
                }
                if k.is_integer() {
                    let exact = &o.coeff * bpow(&b, -3 * k.to_integer());
                    if t.a_prime_exact() != Some(exact.clone()) {
                        failures.push(format!(
                            "({a}, {b}, {k}): a' exact {:?} != {exact}",
                            t.a_prime_exact()
                        ));
                    }
                }
                for n in 0..=8u32 {
                    let bound = o.a_prime_f64() * o.b_prime_f64().powi(n as i32);
                    let f = bound.floor().max(0.0) as u64;
                    for count in [f.max(1), f + 1, f + 2, 2 * f + 1] {
                        decisions += 1;
                        if t.holds(n, count) != o.holds(n, count) {
                            failures.push(format!(
                                "({a}, {b}, {k}) n = {n} count {count}: decision differs"
                            ));
                        }
                    }
                }
            }
        }
    }
    // the pinned parameters of the trivalent tree with k = 1, D = 3
    let t = qi_growth_transfer(&ratio(3, 2), &ratio(2, 1), Rational::from_integer(1), 3).unwrap();
    if t.a_prime_exact() != Some(ratio(1, 144)) {
        failures.push(format!(
            "(3/2, 2, 1, 3): a' = {:?}, expected 1/144",
            t.a_prime_exact()
        ));
    }
    verdict(
        3,
        "growth transfer",
        &failures,
        format!("{points} grid points, {decisions} exact decisions"),
    );
}

#[test]
fn criterion_04_barycenter_growth_pipeline() {
    let mut failures = Vec::new();
    let start = Instant::now();
    let mut rows_checked = 0;
    for (name, g) in [
        ("F2(8)", free_group_ball(2, 8)),
        ("T(4,8)", regular_tree(4, 8)),
    ] {
        let opts = PipelineOptions {
            depth: 3,
            r: 2,
            n_max: 4,
        };
        let surj = coarse_surjectivity_constant(&g, opts.r).unwrap();
        let constant = match surj {
            Surjectivity::Bounded { constant, .. } => Some(constant),
            Surjectivity::Unbounded { .. } => None,
        };
        let report = match barycenter_growth_pipeline(&g, constant, opts) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let check = verify_embedding(&g, &report.embedding);
        if !check.injective || report.embedding.tree.vertex_count() != 22 {
            failures.push(format!("{name}: embedding not injective or wrong depth"));
        }
        let k = report.embedding.k_measured.to_f64();
        let valence = g.max_valence().max(2) as f64;
        let coeff = (1.5 * valence.powi(-((k * k).floor() as i32 + 2))).min(1.0);
        let a_prime = coeff * 2f64.powf(-3.0 * k);
        let b_prime = 2f64.powf(1.0 / k);
        // interior means every vertex of the ball has full valence
        let max_valence = g.max_valence();
        let rim: Vec<Vertex> = g
            .vertices()
            .filter(|&v| g.valence(v) < max_valence)
            .collect();
        let mut by_center: std::collections::BTreeMap<Vertex, Vec<(u32, u64)>> = Default::default();
        for r in &report.rows {
            by_center.entry(r.center).or_default().push((r.n, r.count));
        }
        for (&c, rows) in &by_center {
            let dist = bfs(&g, c, |_| true);
            for &(n, count) in rows {
                rows_checked += 1;
                let recount = dist.iter().filter(|d| d.is_some_and(|d| d <= n)).count() as u64;
                if recount != count {
                    failures.push(format!(
                        "{name}: |B({c}, {n})| = {recount}, reported {count}"
                    ));
                }
                if (count as f64) < a_prime * b_prime.powi(n as i32) * (1.0 - F64_REL_TOL) {
                    failures.push(format!(
                        "{name}: center {c} n {n} count {count} below bound"
                    ));
                }
                if rim
                    .iter()
                    .any(|&v| dist[v as usize].is_some_and(|d| d <= n))
                {
                    failures.push(format!("{name}: center {c} is not interior at n = {n}"));
                }
            }
        }
        if !report.rows.iter().any(|r| r.n == 4) {
            failures.push(format!("{name}: no center checked at n = 4"));
        }
    }
    let took = start.elapsed();
    if took > PIPELINE_TIME_LIMIT {
        failures.push(format!("pipeline took {took:?}"));
    }
    verdict(
        4,
        "barycenter growth pipeline",
        &failures,
        format!("{rows_checked} rows rechecked in {took:?}"),
    );
}

/// Brute relaxation fronts: `y` in level `i+1` is reached when some front
/// vertex lies within `2k` of it in the total space.
fn brute_fronts(b: &GraphBundle, rows: &[Vec<u32>], a: &[Vertex], k: u32) -> Vec<Vec<Vertex>> {
    let mut fronts = vec![a.to_vec()];
    for i in 0..b.top() {
        let next: Vec<Vertex> = (0..b.fiber(i + 1).vertex_count() as Vertex)
            .filter(|&y| {
                let ty = b.total_id(i + 1, y);
                fronts[i]
                    .iter()
                    .any(|&x| rows[b.total_id(i, x) as usize][ty as usize] <= 2 * k)
            })
            .collect();
        fronts.push(next);
    }
    fronts
}

/// `f̂(r)`: largest fiber distance between points of one fiber at total
/// distance at most `r`.
fn brute_f_hat(b: &GraphBundle, rows: &[Vec<u32>], r: u32) -> u32 {
    let mut best = 0;
    for i in 0..b.level_count() {
        let f = b.fiber(i);
        let frows = all_rows(f);
        for x in 0..f.vertex_count() {
            for y in 0..f.vertex_count() {
                let t =
                    rows[b.total_id(i, x as Vertex) as usize][b.total_id(i, y as Vertex) as usize];
                if t <= r {
                    best = best.max(frows[x][y]);
                }
            }
        }
    }
    best
}

#[test]
fn criterion_05_flow_bound() {
    let mut failures = Vec::new();
    let mut checks = 0;
    let mut levels = 0;
    for (label, fiber) in base_fibers() {
        let specs = [
            BundleSpec::Horoball {
                fiber: fiber.clone(),
                levels: LEVELS,
            },
            BundleSpec::Product {
                fiber: fiber.clone(),
                levels: LEVELS,
            },
            BundleSpec::Glued {
                fiber: fiber.clone(),
                levels: LEVELS,
            },
        ];
        for spec in specs {
            let b = spec.build().unwrap();
            let rows = all_rows(b.total());
            let f0 = b.fiber(0);
            let c = central(f0);
            let mut a: Vec<Vertex> = std::iter::once(c)
                .chain(f0.neighbors(c).iter().copied())
                .collect();
            a.sort_unstable();
            let valence = b
                .fibers()
                .iter()
                .map(|f| f.max_valence())
                .max()
                .unwrap()
                .max(2);
            for k in [1u32, 2] {
                checks += 1;
                let report = flow_bound_check(&b, &a, k).unwrap();
                let fronts = brute_fronts(&b, &rows, &a, k);
                let f_hat = brute_f_hat(&b, &rows, 4 * k);
                if report.f_hat_4k != f_hat || report.valence_bound != valence {
                    failures.push(format!(
                        "{} k={k}: f̂/D {}/{} vs oracle {f_hat}/{valence}",
                        spec.label(),
                        report.f_hat_4k,
                        report.valence_bound
                    ));
                }
                let cst = BigUint::from(valence as u64).pow(f_hat + 1);
                for (i, row) in report.rows.iter().enumerate() {
                    levels += 1;
                    let bound = BigUint::from(a.len()) * cst.pow(i as u32);
                    if row.front_size != fronts[i].len() {
                        failures.push(format!(
                            "{} k={k} level {i}: front {} vs oracle {}",
                            spec.label(),
                            row.front_size,
                            fronts[i].len()
                        ));
                    }
                    if BigUint::from(fronts[i].len()) > bound || !row.pass {
                        failures.push(format!(
                            "{} k={k} level {i}: |front| {} exceeds {bound}",
                            spec.label(),
                            fronts[i].len()
                        ));
                    }
                }
                if !report.pass {
                    failures.push(format!("{} ({label}) k={k}: report fails", spec.label()));
                }
            }
        }
    }
    verdict(
        5,
        "flow bound",
        &failures,
        format!("{checks} bundle/k pairs, {levels} levels, 0 violations allowed"),
    );
}

/// Smallest `D` for both path-family conditions, from the definitions.
fn brute_bowditch(g: &MetricGraph, family: &dyn Fn(Vertex, Vertex) -> Vec<Vertex>) -> u32 {
    let n = g.vertex_count() as Vertex;
    let rows = all_rows(g);
    let paths: Vec<Vec<Vec<Vertex>>> = (0..n)
        .map(|x| (0..n).map(|y| family(x, y)).collect())
        .collect();
    let mut c1 = 0;
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let others: Vec<Vertex> = paths[y as usize][z as usize]
                    .iter()
                    .chain(&paths[z as usize][x as usize])
                    .copied()
                    .collect();
                for &p in &paths[x as usize][y as usize] {
                    let d = others
                        .iter()
                        .map(|&o| rows[p as usize][o as usize])
                        .min()
                        .unwrap();
                    c1 = c1.max(d);
                }
            }
        }
    }
    let mut c2 = 0;
    for x in 0..n {
        for &y in g.neighbors(x) {
            let p = &paths[x as usize][y as usize];
            for &s in p {
                for &t in p {
                    c2 = c2.max(rows[s as usize][t as usize]);
                }
            }
        }
    }
    c1.max(c2)
}

#[test]
fn criterion_06_horoball_fiber_uniformity() {
    let mut failures = Vec::new();
    let mut fibers = 0;
    for (label, spec) in base_fibers() {
        let base = spec.build().unwrap();
        let b = BundleSpec::Horoball {
            fiber: spec.clone(),
            levels: LEVELS,
        }
        .build()
        .unwrap();
        let delta0 = delta_four_point(b.fiber(0)).unwrap().delta_four_point;
        for i in 0..=LEVELS {
            fibers += 1;
            let fi = b.fiber(i);
            let delta_i = delta_four_point(fi).unwrap().delta_four_point;
            if delta_i > delta0 + HalfInt::from_int(UNIFORMITY_SLACK) {
                failures.push(format!("{label} level {i}: delta {delta_i} > {delta0} + 2"));
            }
            let family = waypoint_family(&base, i);
            // D <= 2 + delta(F_0) + 2 on the half-integer grid
            let limit_doubled = 2 * (BOWDITCH_BASE + UNIFORMITY_SLACK) + delta0.doubled();
            let d = (limit_doubled / 2) as u32;
            let rep = bowditch_check(fi, &family, d).unwrap();
            let oracle = brute_bowditch(fi, &family);
            if rep.smallest_d != oracle {
                failures.push(format!(
                    "{label} level {i}: smallest D {} vs oracle {oracle}",
                    rep.smallest_d
                ));
            }
            if 2 * oracle as i64 > limit_doubled || !rep.pass {
                failures.push(format!(
                    "{label} level {i}: D = {oracle} exceeds 4 + {delta0}"
                ));
            }
        }
        let cfg = ExperimentConfig::new(Op::Bowditch).with_bundle(BundleSpec::Horoball {
            fiber: spec,
            levels: LEVELS,
        });
        if execute(&cfg).report.status != Status::Pass {
            failures.push(format!("{label}: runner bowditch does not pass"));
        }
    }
    verdict(
        6,
        "horoball fiber uniformity",
        &failures,
        format!("{fibers} fibers"),
    );
}

#[test]
fn criterion_07_exponential_divergence() {
    let mut failures = Vec::new();
    let mut total = 0;
    let mut nonvacuous = 0;
    for (label, spec) in base_fibers() {
        let b = BundleSpec::Horoball {
            fiber: spec,
            levels: LEVELS,
        }
        .build()
        .unwrap();
        let g = b.total();
        let delta = delta_four_point(g).unwrap().delta_four_point;
        let samples = sample_detours(g, delta, MIN_DETOURS, 11).unwrap();
        if samples.len() < MIN_DETOURS {
            failures.push(format!("{label}: only {} detours drawn", samples.len()));
        }
        for s in &samples {
            total += 1;
            let dc = bfs(g, s.center, |_| true);
            let avoid = bfs(g, s.p, |v| dc[v as usize].unwrap() >= s.radius);
            let len = avoid[s.q as usize].map(|d| d as u64);
            if len != Some(s.report.length) {
                failures.push(format!(
                    "{label}: detour length {} vs oracle {len:?}",
                    s.report.length
                ));
            }
            if s.report.n < s.radius {
                failures.push(format!("{label}: detour enters the avoided ball"));
            }
            if s.report.vacuous {
                continue;
            }
            nonvacuous += 1;
            // length >= 2^((n-1)/(delta+1))
            let bound = 2f64.powf((s.report.n as f64 - 1.0) / (delta.to_f64() + 1.0));
            if (s.report.length as f64) < bound * (1.0 - F64_REL_TOL) || !s.report.pass {
                failures.push(format!("{label}: length {} < {bound}", s.report.length));
            }
        }
    }
    if total < MIN_DETOURS {
        failures.push(format!("{total} detours in all"));
    }
    verdict(
        7,
        "exponential divergence",
        &failures,
        format!("{total} detours, {nonvacuous} non-vacuous, 0 violations"),
    );
}

#[test]
fn criterion_08_shadowing_dichotomy() {
    let mut failures = Vec::new();
    let mut witnesses = 0;
    let mut controls_with_candidates = 0;
    for n in [9usize, 17, 33] {
        let diam = (n - 1) as u32;
        let levels = (u32::BITS - (diam - 1).leading_zeros()) as usize + 1;
        let f = path(n);
        let hb = coarselab::bundle::horoball_bundle(&f, levels);
        let t = (n / 2) as Vertex;
        let target = section_through(&hb, hb.total_id(0, t), 1).unwrap();
        match shadow_search(&hb, &target, SHADOW_M, 1) {
            Ok(res) => {
                let expected: Vec<Vertex> = (0..n as Vertex).filter(|&p| p != t).collect();
                let got: Vec<Vertex> = res.witnesses.iter().map(|w| w.p).collect();
                if got != expected || res.candidates != expected.len() {
                    failures.push(format!("horoball P{n}: witnesses {got:?}"));
                }
                for w in &res.witnesses {
                    witnesses += 1;
                    // vertical sections; level-l distance ceil(|p - t| / 2^l)
                    let gap = w.p.abs_diff(t);
                    let meet = (0..=levels).find(|&l| gap.div_ceil(1 << l) <= SHADOW_M);
                    if meet != Some(w.meet_level) {
                        failures.push(format!(
                            "horoball P{n} p {}: meet {} vs oracle {meet:?}",
                            w.p, w.meet_level
                        ));
                    }
                }
            }
            Err(e) => failures.push(format!("horoball P{n} with N = {levels}: {e}")),
        }
        let prod = coarselab::bundle::product_bundle(&f, levels);
        let target = section_through(&prod, prod.total_id(0, t), 1).unwrap();
        let expected_candidates = (0..n as Vertex)
            .filter(|&p| p.abs_diff(t) >= CONTROL_MIN_START)
            .count();
        match shadow_search(&prod, &target, SHADOW_M, CONTROL_MIN_START) {
            Err(CoreError::NoWitness {
                candidates,
                closest,
            }) => {
                let expected_closest = (expected_candidates > 0).then_some(CONTROL_MIN_START);
                controls_with_candidates += usize::from(candidates > 0);
                if candidates != expected_candidates || closest != expected_closest {
                    failures.push(format!(
                        "product P{n}: NoWitness({candidates}, {closest:?})"
                    ));
                }
            }
            other => failures.push(format!("product P{n}: expected NoWitness, got {other:?}")),
        }
        let cfg = ExperimentConfig::new(Op::Shadow)
            .with_bundle(BundleSpec::Product {
                fiber: GraphSpec::Path { n },
                levels,
            })
            .with_params(json!({"m": 0, "min_start": CONTROL_MIN_START}));
        let out = execute(&cfg);
        if out.report.exit_code() != 2
            || out.report.error.as_ref().map(|e| e.kind.as_str()) != Some("NoWitness")
        {
            failures.push(format!(
                "runner product P{n}: exit {}",
                out.report.exit_code()
            ));
        }
        // the profile of two vertical product sections never changes
        let other = section_through(&prod, prod.total_id(0, 0), 1).unwrap();
        let prof = section_distance_profile(&prod, &target, &other).unwrap();
        if prof.iter().any(|&d| d != t) {
            failures.push(format!("product P{n}: profile {prof:?}"));
        }
    }
    if controls_with_candidates == 0 {
        failures.push("every product control was vacuous".into());
    }
    verdict(
        8,
        "shadowing dichotomy",
        &failures,
        format!("{witnesses} horoball witnesses, {controls_with_candidates} non-vacuous product controls"),
    );
}

#[test]
fn criterion_09_approximating_bundle() {
    let mut failures = Vec::new();
    let hs = HoroballSampler {
        n: 9,
        spacing: Rational::new(1, 2),
        levels: 3,
    };
    let hb = coarselab::bundle::horoball_bundle(&path(9), 3);
    let hrows = all_rows(hb.total());
    let one = Rational::from_integer(1);
    let mut pairs = 0;
    for c in [
        Rational::from_integer(0),
        Rational::new(1, 2),
        Rational::from_integer(1),
    ] {
        let ab = match approx_bundle(&hs, c) {
            Ok(ab) => ab,
            Err(e) => {
                failures.push(format!("c = {c}: {e}"));
                continue;
            }
        };
        if let Err(e) = validate_bundle(ab.bundle.to_candidate(), 4) {
            failures.push(format!("c = {c}: revalidation {e}"));
        }
        for (i, net) in ab.nets.iter().enumerate() {
            let space = hs.fiber(i).unwrap();
            for (j, &a) in net.members.iter().enumerate() {
                for &b in &net.members[j + 1..] {
                    if space.d(a, b) < one {
                        failures.push(format!("c = {c} level {i}: members {a}, {b} closer than 1"));
                    }
                }
            }
            for p in 0..space.len() {
                if net.members.iter().all(|&m| space.d(p, m) > one) {
                    failures.push(format!("c = {c} level {i}: point {p} not covered"));
                }
            }
            if net_invariants(&space, net).is_err() {
                failures.push(format!("c = {c} level {i}: net is not maximal"));
            }
        }
        let map = hs.horoball_map(&ab, &hb).unwrap();
        let audit = qi_audit(ab.bundle.total(), &map, hb.total(), None, 0).unwrap();
        let arows = all_rows(ab.bundle.total());
        let n = ab.bundle.total().vertex_count();
        // oracle: the reported K satisfies every pair and K - 1/2 does not
        let fits = |h: i64| {
            (0..n).all(|x| {
                (x + 1..n).all(|y| {
                    let d = arows[x][y] as i64;
                    let e = hrows[map[x] as usize][map[y] as usize] as i64;
                    // d/K - K <= e <= K d + K with K = h/2
                    4 * d <= 2 * h * e + h * h && 2 * e <= h * (d + 1)
                })
            })
        };
        pairs += n * (n - 1) / 2;
        let h = audit.multiplicative.doubled();
        if !fits(h) || (h > 2 && fits(h - 1)) || !audit.exhaustive {
            failures.push(format!(
                "c = {c}: K = {} is not the exhaustive minimum",
                audit.multiplicative
            ));
        }
        let bound = Rational::from_integer(6) * c + Rational::from_integer(4);
        if audit.multiplicative.to_rational() > bound || !audit.pass {
            failures.push(format!(
                "c = {c}: K = {} > 6c + 4 = {bound}",
                audit.multiplicative
            ));
        }
        if ab.cross_threshold != Rational::from_integer(6) * c + Rational::from_integer(3)
            || c.is_negative()
        {
            failures.push(format!("c = {c}: cross threshold {}", ab.cross_threshold));
        }
        if ab.cross_threshold.is_zero() {
            failures.push("zero cross threshold".into());
        }
    }
    verdict(
        9,
        "approximating bundle",
        &failures,
        format!("{pairs} exhaustive pairs over c in {{0, 1/2, 1}}"),
    );
}

fn matrix_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("matrices/acceptance.json")
}

fn collect_files(dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(&p, out);
        } else {
            out.push((p.clone(), fs::read(&p).unwrap()));
        }
    }
}

#[test]
fn criterion_10_determinism() {
    let mut failures = Vec::new();
    let matrix = Matrix::load(&matrix_path()).unwrap();
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let s = suite(&matrix, Some(7), Some(dir.path())).unwrap();
        if !s.summary.all_met {
            let unmet: Vec<_> = s
                .summary
                .entries
                .iter()
                .filter(|e| !e.met)
                .map(|e| e.name.clone())
                .collect();
            failures.push(format!("unmet expectations: {unmet:?}"));
        }
        let mut files = Vec::new();
        collect_files(dir.path(), &mut files);
        let rel: Vec<(PathBuf, Vec<u8>)> = files
            .into_iter()
            .map(|(p, b)| (p.strip_prefix(dir.path()).unwrap().to_path_buf(), b))
            .collect();
        snapshots.push((rel, s.summary.total));
    }
    let (a, b) = (&snapshots[0], &snapshots[1]);
    if a.0.len() != b.0.len() {
        failures.push(format!("{} vs {} files", a.0.len(), b.0.len()));
    }
    for ((pa, ba), (pb, bb)) in a.0.iter().zip(&b.0) {
        if pa != pb || ba != bb {
            failures.push(format!("{} differs", pa.display()));
        }
    }
    verdict(
        10,
        "determinism",
        &failures,
        format!("{} configs, {} files byte-identical", a.1, a.0.len()),
    );
}
