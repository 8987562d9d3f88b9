//! Ball counts, certified exponential-growth parameters and their transfer
//! along quasi-isometric embeddings.

use std::ops::RangeInclusive;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::barycenter::{embed_t3, EmbedConfig, TreeEmbedding};
use crate::error::{CoreError, Result};
use crate::graph::{MetricGraph, Vertex, UNREACHABLE};
use crate::hyperbolicity::delta_four_point;
use crate::numeric::{big, big_int, big_str, big_to_f64, pow_big, HalfInt, KthRoot, Rational};
use rayon::prelude::*;

/// `counts[n] = |B(u, n)|` for `n = 0..=n_max`.
pub fn ball_counts(g: &MetricGraph, u: Vertex, n_max: u32) -> Result<Vec<u64>> {
    g.check_vertex(u)?;
    let mut layers = vec![0u64; n_max as usize + 1];
    for (_, d) in g.bfs_within(u, n_max) {
        layers[d as usize] += 1;
    }
    let mut total = 0;
    Ok(layers
        .into_iter()
        .map(|c| {
            total += c;
            total
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrowthFit {
    #[serde(with = "big_str")]
    pub a: BigRational,
    #[serde(with = "big_str")]
    pub b: BigRational,
    pub counts: Vec<u64>,
    /// Inclusive index range `[start, end]` the fit was taken over.
    pub fit_window: (usize, usize),
    /// `b - 1`: the margin by which growth is certified exponential.
    #[serde(with = "big_str")]
    pub min_ratio_slack: BigRational,
}

impl GrowthFit {
    /// Exact test of `count >= a * b^n`.
    pub fn holds(&self, n: u32, count: u64) -> bool {
        big_int(count as i64) >= &self.a * pow_big(&self.b, n as i64)
    }

    pub fn a_f64(&self) -> f64 {
        big_to_f64(&self.a)
    }

    pub fn b_f64(&self) -> f64 {
        big_to_f64(&self.b)
    }
}

/// Conservative fit: `b` is the smallest consecutive ratio inside the
/// window and `a` the smallest `counts[n] / b^n`, so every count in the
/// window satisfies `counts[n] >= a * b^n` exactly.
pub fn growth_fit(counts: &[u64], window: RangeInclusive<usize>) -> Result<GrowthFit> {
    let (start, end) = (*window.start(), *window.end());
    let len = (end + 1).saturating_sub(start);
    if len < 3 {
        return Err(CoreError::WindowTooShort { len });
    }
    if end >= counts.len() {
        return Err(CoreError::InvalidParams(format!(
            "window end {end} beyond {} counts",
            counts.len()
        )));
    }
    if counts.contains(&0) || counts.windows(2).any(|w| w[1] < w[0]) {
        return Err(CoreError::InvalidParams(
            "counts must be positive and non-decreasing".into(),
        ));
    }
    let b = (start..end)
        .map(|n| BigRational::new(BigInt::from(counts[n + 1]), BigInt::from(counts[n])))
        .min()
        .expect("window has at least two ratios");
    if b <= BigRational::one() {
        return Err(CoreError::NotExponential {
            ratio: b.to_string(),
        });
    }
    let a = (start..=end)
        .map(|n| big_int(counts[n] as i64) / pow_big(&b, n as i64))
        .min()
        .expect("window is non-empty");
    Ok(GrowthFit {
        min_ratio_slack: &b - BigRational::one(),
        a,
        b,
        counts: counts.to_vec(),
        fit_window: (start, end),
    })
}

/// Growth parameters after pulling `(a, b)` through a `k`-qi embedding into
/// a graph of valence at most `D`:
/// `a' = min{a·D^-(⌊k²⌋+2)·b^-3k, b^-3k}` and `b' = b^(1/k)`.
///
/// With `k = p/q` both are kept symbolic: `a' = a_coeff · (b^-3p)^(1/q)`
/// and `b' = (b^q)^(1/p)`, where `a_coeff = min{a·D^-(⌊k²⌋+2), 1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferredGrowth {
    #[serde(with = "big_str")]
    pub a: BigRational,
    #[serde(with = "big_str")]
    pub b: BigRational,
    pub k: Rational,
    pub valence: u64,
    #[serde(with = "big_str")]
    pub a_coeff: BigRational,
}

impl TransferredGrowth {
    fn kp(&self) -> i64 {
        *self.k.numer()
    }

    fn kq(&self) -> i64 {
        *self.k.denom()
    }

    /// `b^(-3k)` as a root.
    pub fn b_power(&self) -> KthRoot {
        KthRoot::new(pow_big(&self.b, -3 * self.kp()), self.kq() as u32)
    }

    pub fn b_prime(&self) -> KthRoot {
        KthRoot::new(pow_big(&self.b, self.kq()), self.kp() as u32)
    }

    /// `a'` exactly, when `k` is an integer.
    pub fn a_prime_exact(&self) -> Option<BigRational> {
        (self.kq() == 1).then(|| &self.a_coeff * pow_big(&self.b, -3 * self.kp()))
    }

    pub fn a_prime_f64(&self) -> f64 {
        big_to_f64(&self.a_coeff) * self.b_power().to_f64()
    }

    pub fn b_prime_f64(&self) -> f64 {
        self.b_prime().to_f64()
    }

    /// `a'·b'^n` in floating point, for display.
    pub fn bound_f64(&self, n: u32) -> f64 {
        self.a_prime_f64() * self.b_prime_f64().powi(n as i32)
    }

    /// Exact test of `count >= a'·b'^n`.
    pub fn holds(&self, n: u32, count: u64) -> bool {
        // a'·b'^n = a_coeff · b^E with E = n/k - 3k = (n q² - 3 p²) / (p q)
        let (p, q) = (self.kp(), self.kq());
        let num = n as i64 * q * q - 3 * p * p;
        let den = p * q;
        let lhs = pow_big(&(big_int(count as i64) / &self.a_coeff), den);
        lhs >= pow_big(&self.b, num)
    }
}

pub fn qi_growth_transfer(
    a: &BigRational,
    b: &BigRational,
    k: Rational,
    valence: u64,
) -> Result<TransferredGrowth> {
    if !a.is_positive() {
        return Err(CoreError::InvalidParams(format!(
            "a = {a} must be positive"
        )));
    }
    if k < Rational::one() {
        return Err(CoreError::InvalidParams(format!(
            "k = {k} must be at least 1"
        )));
    }
    if valence < 2 {
        return Err(CoreError::InvalidParams(format!(
            "valence bound {valence} < 2"
        )));
    }
    if *b <= BigRational::one() {
        return Err(CoreError::NotExponential {
            ratio: b.to_string(),
        });
    }
    let k_sq_floor = (k * k).to_integer();
    let d = big_int(valence as i64);
    let scaled = a * pow_big(&d, -(k_sq_floor + 2));
    let a_coeff = scaled.min(BigRational::one());
    Ok(TransferredGrowth {
        a: a.clone(),
        b: b.clone(),
        k,
        valence,
        a_coeff,
    })
}

/// Convenience for `Rational` inputs.
pub fn qi_growth_transfer_small(
    a: Rational,
    b: Rational,
    k: Rational,
    valence: u64,
) -> Result<TransferredGrowth> {
    qi_growth_transfer(&big(a), &big(b), k, valence)
}

/// Options for [`barycenter_growth_pipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub depth: u32,
    pub r: u32,
    /// Largest ball radius checked.
    pub n_max: u32,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            depth: 3,
            r: 2,
            n_max: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheckRow {
    pub center: Vertex,
    pub n: u32,
    pub count: u64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub surjectivity_constant: u32,
    pub root: Vertex,
    pub delta: HalfInt,
    pub config: EmbedConfig,
    pub embedding: TreeEmbedding,
    pub transfer: TransferredGrowth,
    /// Certified fit of the root's own ball counts on `1..=n_max`.
    pub fit: Option<GrowthFit>,
    pub rows: Vec<GrowthCheckRow>,
}

impl PipelineReport {
    pub fn csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.center.to_string(),
                    r.n.to_string(),
                    r.count.to_string(),
                    format!("{:e}", r.bound),
                    r.pass.to_string(),
                ]
            })
            .collect();
        crate::report::to_csv(&["center", "n", "count", "bound", "pass"], &rows)
    }
}

/// Embed the trivalent tree, pull its growth `(3/2, 2)` through the
/// measured quasi-isometry constant, and check the transferred lower bound
/// on every center far enough from the rim.
///
/// `surjectivity_constant` is the coarse-surjectivity constant measured
/// beforehand; it is recorded, and `None` (unbounded) is refused.
pub fn barycenter_growth_pipeline(
    g: &MetricGraph,
    surjectivity_constant: Option<u32>,
    opts: PipelineOptions,
) -> Result<PipelineReport> {
    let Some(l) = surjectivity_constant else {
        return Err(CoreError::EmbeddingFailed(
            "barycenter map is not coarsely surjective".into(),
        ));
    };
    let rim = g.rim_distances();
    let root = g
        .vertices()
        .max_by_key(|&v| (rim[v as usize], std::cmp::Reverse(v)))
        .expect("graph is non-empty");
    let delta = delta_four_point(g)?.delta_four_point;
    let config = EmbedConfig::from_delta(delta, opts.depth, opts.r);
    let embedding =
        embed_t3(g, root, &config).map_err(|e| CoreError::EmbeddingFailed(e.to_string()))?;
    let k = embedding.k_measured.to_rational();
    let valence = (g.max_valence() as u64).max(2);
    let transfer =
        qi_growth_transfer_small(Rational::new(3, 2), Rational::from_integer(2), k, valence)?;
    let centers: Vec<Vertex> = g.vertices().collect();
    let rows: Vec<GrowthCheckRow> = centers
        .par_iter()
        .flat_map_iter(|&c| {
            let rd = rim[c as usize];
            let top = if rd == UNREACHABLE {
                opts.n_max
            } else {
                opts.n_max.min(rd.saturating_sub(1))
            };
            let interior = rd == UNREACHABLE || rd > 0;
            let counts = if interior {
                ball_counts(g, c, top).expect("valid center")
            } else {
                Vec::new()
            };
            let transfer = &transfer;
            counts.into_iter().enumerate().map(move |(n, count)| {
                let n = n as u32;
                GrowthCheckRow {
                    center: c,
                    n,
                    count,
                    bound: transfer.bound_f64(n),
                    pass: transfer.holds(n, count),
                }
            })
        })
        .collect();
    if let Some(bad) = rows.iter().find(|r| !r.pass) {
        return Err(CoreError::GrowthViolation {
            center: bad.center,
            n: bad.n,
            count: bad.count,
            bound: format!("{:e}", bad.bound),
        });
    }
    let root_counts = ball_counts(g, root, opts.n_max)?;
    let fit = growth_fit(&root_counts, 1..=opts.n_max as usize).ok();
    Ok(PipelineReport {
        surjectivity_constant: l,
        root,
        delta,
        config,
        embedding,
        transfer,
        fit,
        rows,
    })
}
