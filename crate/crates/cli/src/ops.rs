//! One handler per operation. Each reads its typed params, runs the
//! library routine and returns the report payload.

use std::path::Path;

use coarselab::barycenter::{
    coarse_surjectivity_constant, embed_t3, verify_embedding, EmbedConfig, Surjectivity,
};
use coarselab::bundle::{
    horoball_bundle, section_through, BundleKind, BundleManifest, GraphBundle,
};
use coarselab::discretize::{
    approx_bundle, bowditch_check, geodesic_family, net_graph, net_invariants, qi_audit,
    separated_net, strongly_proper_estimate, waypoint_family, FlexRational, HoroballSampler,
    MetricBundleSampler,
};
use coarselab::flow::{divergence_check, flaring_check, flow_bound_check, shadow_search};
use coarselab::graph::generators::{path, GraphSpec};
use coarselab::graph::io::{format_edge_list, GeneratorRef, GraphManifest};
use coarselab::growth::{ball_counts, barycenter_growth_pipeline, growth_fit, PipelineOptions};
use coarselab::hyperbolicity::{
    chain_certify, corner_product_check, delta_four_point, delta_slim, gromov_product,
    sample_detours, ChainSpec, SlimMode,
};
use coarselab::numeric::big;
use coarselab::report::{to_csv, Record};
use coarselab::{HalfInt, MetricGraph, Rational, Vertex};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Op};
use crate::RunError;

/// Payload of a finished op.
pub(crate) struct OpOutput {
    pub value: Value,
    pub records: Vec<Record>,
    pub pass: bool,
    pub csv: Option<String>,
}

impl OpOutput {
    fn new(value: Value, records: Vec<Record>, pass: bool) -> Self {
        OpOutput {
            value,
            records,
            pass,
            csv: None,
        }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

type OpResult = Result<OpOutput, RunError>;

pub(crate) fn dispatch(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> OpResult {
    match cfg.op {
        Op::Gen => gen(cfg, out_dir),
        Op::Delta => delta(cfg),
        Op::Gromov => gromov(cfg),
        Op::Chain => chain(cfg),
        Op::Detour => detour(cfg),
        Op::Growth => growth(cfg),
        Op::EmbedT3 => embed(cfg),
        Op::SurjConst => surj_const(cfg),
        Op::Bundle => bundle(cfg, out_dir),
        Op::Flow => flow(cfg),
        Op::Flare => flare(cfg),
        Op::Diverge => diverge(cfg),
        Op::Shadow => shadow(cfg),
        Op::Net => net(cfg),
        Op::ApproxBundle => approx(cfg),
        Op::Bowditch => bowditch(cfg),
    }
}

fn params<T: DeserializeOwned>(cfg: &ExperimentConfig) -> Result<T, RunError> {
    let raw = match &cfg.params {
        Value::Null => json!({}),
        v => v.clone(),
    };
    serde_json::from_value(raw)
        .map_err(|e| RunError::ConfigInvalid(format!("{} params: {e}", cfg.op)))
}

fn require_graph(cfg: &ExperimentConfig) -> Result<MetricGraph, RunError> {
    let spec = cfg
        .graph
        .as_ref()
        .ok_or_else(|| RunError::ConfigInvalid(format!("{} needs a graph", cfg.op)))?;
    Ok(spec.build()?)
}

fn require_bundle(cfg: &ExperimentConfig) -> Result<GraphBundle, RunError> {
    let spec = cfg
        .bundle
        .as_ref()
        .ok_or_else(|| RunError::ConfigInvalid(format!("{} needs a bundle", cfg.op)))?;
    Ok(spec.build()?)
}

/// The graph itself, or the total space when a bundle is given.
fn metric_target(cfg: &ExperimentConfig) -> Result<MetricGraph, RunError> {
    if cfg.graph.is_some() {
        require_graph(cfg)
    } else if cfg.bundle.is_some() {
        Ok(require_bundle(cfg)?.total().clone())
    } else {
        Err(RunError::ConfigInvalid(format!(
            "{} needs a graph or a bundle",
            cfg.op
        )))
    }
}

/// Minimum-eccentricity vertex, lowest id on ties.
fn central_vertex(g: &MetricGraph) -> Vertex {
    g.vertices()
        .map(|v| (g.eccentricity(v), v))
        .min()
        .map(|(_, v)| v)
        .expect("graph is non-empty")
}

fn check_fiber_vertex(b: &GraphBundle, level: usize, v: Vertex) -> Result<(), RunError> {
    Ok(b.fiber(level).check_vertex(v)?)
}

fn file_stem(cfg: &ExperimentConfig) -> String {
    let raw = cfg.name.clone().unwrap_or_else(|| cfg.label());
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn gen(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> OpResult {
    let stem = file_stem(cfg);
    let mut files = Vec::new();
    let value = if let Some(spec) = &cfg.bundle {
        let b = spec.build()?;
        if let Some(dir) = out_dir {
            let manifest = BundleManifest::write(&b, dir, &stem, Some(spec.clone()))?;
            let name = format!("{stem}.bundle.json");
            write_json(&dir.join(&name), &to_value(&manifest))?;
            files.extend(manifest.fibers.iter().cloned());
            files.push(name);
        }
        json!({
            "label": spec.label(),
            "levels": b.level_count(),
            "fiber_sizes": b.fibers().iter().map(|f| f.vertex_count()).collect::<Vec<_>>(),
            "total_vertices": b.total().vertex_count(),
            "total_edges": b.total().edge_count(),
        })
    } else {
        let spec = cfg
            .graph
            .as_ref()
            .ok_or_else(|| RunError::ConfigInvalid("gen needs a graph or a bundle".into()))?;
        let g = spec.build()?;
        if let Some(dir) = out_dir {
            let edges_file = format!("{stem}.edges");
            std::fs::write(dir.join(&edges_file), format_edge_list(&g))?;
            let manifest = GraphManifest {
                name: spec.label(),
                edges_file: edges_file.clone(),
                generator: generator_ref(spec),
            };
            let name = format!("{stem}.json");
            write_json(&dir.join(&name), &to_value(&manifest))?;
            files.push(edges_file);
            files.push(name);
        }
        json!({
            "label": spec.label(),
            "vertex_count": g.vertex_count(),
            "edge_count": g.edge_count(),
            "max_valence": g.max_valence(),
            "diameter": g.diameter(),
        })
    };
    let mut value = value;
    value["files"] = json!(files);
    Ok(OpOutput::new(value, Vec::new(), true))
}

fn generator_ref(spec: &GraphSpec) -> Option<GeneratorRef> {
    if matches!(spec, GraphSpec::EdgeList { .. }) {
        return None;
    }
    let Value::Object(mut obj) = to_value(spec) else {
        return None;
    };
    let kind = obj.remove("kind")?.as_str()?.to_string();
    Some(GeneratorRef {
        kind,
        params: Value::Object(obj),
    })
}

pub(crate) fn write_json(path: &Path, v: &Value) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(v).expect("json values serialize");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DeltaParams {
    /// Also compute the slim-triangle delta in this mode. It is cubic in
    /// the vertex count, so it is off by default.
    #[serde(default)]
    slim: Option<SlimMode>,
    #[serde(default)]
    max_delta: Option<HalfInt>,
}

fn delta(cfg: &ExperimentConfig) -> OpResult {
    let p: DeltaParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let est = delta_four_point(&g)?;
    let mut value = json!({
        "delta_four_point": est.delta_four_point,
        "witness_quadruple": est.witness_quadruple,
    });
    if let Some(mode) = p.slim {
        let slim = delta_slim(&g, mode)?;
        value["delta_slim"] = json!({"mode": mode, "value": slim.value, "witness": slim.witness});
    }
    let pass = p.max_delta.is_none_or(|m| est.delta_four_point <= m);
    let record = Record::new(
        "delta_four_point",
        json!({"graph": cfg.label(), "vertices": g.vertex_count()}),
        json!(est.delta_four_point),
        json!(p.max_delta),
        pass,
    );
    Ok(OpOutput::new(value, vec![record], pass))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GromovParams {
    base: Vertex,
    y: Vertex,
    z: Vertex,
    /// With `w` and `k`, also check the corner products at `y` along
    /// `[z, y] ∪ [y, w]`.
    #[serde(default)]
    w: Option<Vertex>,
    #[serde(default)]
    k: Option<FlexRational>,
}

fn gromov(cfg: &ExperimentConfig) -> OpResult {
    let p: GromovParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let product = gromov_product(&g, p.base, p.y, p.z)?;
    let mut value = json!({"base": p.base, "y": p.y, "z": p.z, "product": product});
    let mut records = vec![Record::measured(
        "gromov_product",
        json!({"base": p.base, "y": p.y, "z": p.z}),
        json!(product),
    )];
    let mut pass = true;
    if let Some(w) = p.w {
        let k = p.k.map_or(Rational::from_integer(1), |k| k.0);
        let delta = delta_four_point(&g)?.delta_four_point;
        let corner = corner_product_check(&g, p.y, p.z, w, k, delta)?;
        pass = corner.pass;
        records.push(corner.to_record());
        value["corner"] = to_value(&corner);
    }
    Ok(OpOutput::new(value, records, pass))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainParams {
    anchors: Vec<Vertex>,
    cap: HalfInt,
    #[serde(default)]
    d_min: u32,
}

fn chain(cfg: &ExperimentConfig) -> OpResult {
    let p: ChainParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let spec = ChainSpec::new(&g, &p.anchors)?;
    let cert = chain_certify(&spec, &g, p.cap, p.d_min)?;
    let record = cert.to_record(&p.anchors);
    let pass = record.pass;
    let mut value = to_value(&cert);
    value["junction_products"] = to_value(&spec.junction_products);
    Ok(OpOutput::new(value, vec![record], pass))
}

fn default_detours() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DetourParams {
    #[serde(default = "default_detours")]
    count: usize,
    /// Defaults to the measured four-point delta.
    #[serde(default)]
    delta: Option<HalfInt>,
}

fn detour(cfg: &ExperimentConfig) -> OpResult {
    let p: DetourParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let delta = match p.delta {
        Some(d) => d,
        None => delta_four_point(&g)?.delta_four_point,
    };
    let samples = sample_detours(&g, delta, p.count, cfg.seed)?;
    let violations = samples.iter().filter(|s| !s.report.pass).count();
    let vacuous = samples.iter().filter(|s| s.report.vacuous).count();
    let pass = violations == 0 && samples.len() >= p.count;
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            vec![
                s.p.to_string(),
                s.q.to_string(),
                s.center.to_string(),
                s.radius.to_string(),
                s.report.n.to_string(),
                s.report.length.to_string(),
                format!("{:e}", s.report.bound),
                s.report.pass.to_string(),
            ]
        })
        .collect();
    let csv = to_csv(
        &["p", "q", "center", "radius", "n", "length", "bound", "pass"],
        &rows,
    );
    let value = json!({
        "delta": delta,
        "requested": p.count,
        "drawn": samples.len(),
        "violations": violations,
        "vacuous": vacuous,
    });
    let record = Record::new(
        "detour_check",
        json!({"graph": cfg.label(), "delta": delta, "count": p.count, "seed": cfg.seed}),
        json!({"drawn": samples.len(), "violations": violations}),
        json!(0),
        pass,
    );
    Ok(OpOutput::new(value, vec![record], pass).with_csv(csv))
}

fn default_n_max() -> u32 {
    10
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GrowthParams {
    #[serde(default)]
    center: Vertex,
    #[serde(default = "default_n_max")]
    n_max: u32,
    /// Inclusive fit window; defaults to `[1, n_max]`.
    #[serde(default)]
    window: Option<[usize; 2]>,
    #[serde(default)]
    min_a: Option<FlexRational>,
    #[serde(default)]
    min_b: Option<FlexRational>,
}

fn growth(cfg: &ExperimentConfig) -> OpResult {
    let p: GrowthParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let counts = ball_counts(&g, p.center, p.n_max)?;
    let [lo, hi] = p.window.unwrap_or([1, p.n_max as usize]);
    let fit = growth_fit(&counts, lo..=hi)?;
    let a_ok = p.min_a.is_none_or(|m| fit.a >= big(m.0));
    let b_ok = p.min_b.is_none_or(|m| fit.b >= big(m.0));
    let pass = a_ok && b_ok;
    let bound = json!({"min_a": p.min_a, "min_b": p.min_b});
    let record = Record::new(
        "growth_fit",
        json!({"graph": cfg.label(), "center": p.center, "window": [lo, hi]}),
        json!({"a": fit.a.to_string(), "b": fit.b.to_string()}),
        bound,
        pass,
    );
    let rows: Vec<Vec<String>> = counts
        .iter()
        .enumerate()
        .map(|(n, c)| vec![n.to_string(), c.to_string()])
        .collect();
    let value = json!({"center": p.center, "counts": counts, "fit": fit});
    Ok(OpOutput::new(value, vec![record], pass).with_csv(to_csv(&["n", "count"], &rows)))
}

fn default_depth() -> u32 {
    3
}

fn default_r() -> u32 {
    2
}

fn default_pipeline_n() -> u32 {
    4
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbedParams {
    #[serde(default)]
    root: Option<Vertex>,
    #[serde(default = "default_depth")]
    depth: u32,
    #[serde(default = "default_r")]
    r: u32,
    #[serde(default)]
    c: Option<HalfInt>,
    #[serde(default)]
    d_step: Option<u32>,
    /// Run the full embedding-to-growth pipeline instead of the embedding
    /// alone.
    #[serde(default)]
    pipeline: bool,
    #[serde(default = "default_pipeline_n")]
    n_max: u32,
}

fn embed(cfg: &ExperimentConfig) -> OpResult {
    let p: EmbedParams = params(cfg)?;
    let g = metric_target(cfg)?;
    if p.pipeline {
        let surj = coarse_surjectivity_constant(&g, p.r)?;
        let constant = match surj {
            Surjectivity::Bounded { constant, .. } => Some(constant),
            Surjectivity::Unbounded { .. } => None,
        };
        let opts = PipelineOptions {
            depth: p.depth,
            r: p.r,
            n_max: p.n_max,
        };
        let report = barycenter_growth_pipeline(&g, constant, opts)?;
        let pass = report.rows.iter().all(|r| r.pass);
        let record = Record::new(
            "barycenter_growth_pipeline",
            json!({"graph": cfg.label(), "depth": p.depth, "r": p.r, "n_max": p.n_max}),
            json!({"rows": report.rows.len(), "k": report.embedding.k_measured}),
            json!({"a_prime": report.transfer.a_prime_f64(), "b_prime": report.transfer.b_prime_f64()}),
            pass,
        );
        let csv = report.csv();
        let mut value = to_value(&report);
        value["surjectivity"] = to_value(&surj);
        return Ok(OpOutput::new(value, vec![record], pass).with_csv(csv));
    }
    let delta = delta_four_point(&g)?.delta_four_point;
    let mut ec = EmbedConfig::from_delta(delta, p.depth, p.r);
    if let Some(c) = p.c {
        ec.c = c;
    }
    if let Some(d) = p.d_step {
        ec.d_step = d;
    }
    ec.validate()?;
    let root = match p.root {
        Some(r) => r,
        None => {
            let rim = g.rim_distances();
            g.vertices()
                .max_by_key(|&v| (rim[v as usize], std::cmp::Reverse(v)))
                .expect("graph is non-empty")
        }
    };
    let emb = embed_t3(&g, root, &ec)?;
    let check = verify_embedding(&g, &emb);
    let record = Record::new(
        "embed_t3",
        json!({"graph": cfg.label(), "root": root, "depth": p.depth}),
        json!({"k_measured": emb.k_measured, "min_pair_distance": emb.min_pair_distance}),
        json!({"injective": check.injective, "violations": check.violations}),
        check.pass,
    );
    let value = json!({"root": root, "config": ec, "embedding": emb, "verification": check});
    Ok(OpOutput::new(value, vec![record], check.pass))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SurjParams {
    #[serde(default = "default_r")]
    r: u32,
    #[serde(default)]
    max_l: Option<u32>,
}

fn surj_const(cfg: &ExperimentConfig) -> OpResult {
    let p: SurjParams = params(cfg)?;
    let g = metric_target(cfg)?;
    let s = coarse_surjectivity_constant(&g, p.r)?;
    let pass = match s {
        Surjectivity::Bounded { constant, .. } => p.max_l.is_none_or(|m| constant <= m),
        Surjectivity::Unbounded { .. } => false,
    };
    let record = Record::new(
        "coarse_surjectivity_constant",
        json!({"graph": cfg.label(), "r": p.r}),
        to_value(&s),
        json!(p.max_l),
        pass,
    );
    Ok(OpOutput::new(to_value(&s), vec![record], pass))
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleParams {
    #[serde(default)]
    profile_radius: Option<u32>,
    #[serde(default = "default_true")]
    fiber_maps: bool,
    /// Tip radius of a good section over `F_0`, when one is wanted.
    #[serde(default)]
    good_section: Option<u32>,
}

fn bundle(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> OpResult {
    let p: BundleParams = params(cfg)?;
    let mut b = require_bundle(cfg)?;
    if let Some(r) = p.profile_radius {
        b = b.with_profile_radius(r);
    }
    let mut value = json!({
        "label": cfg.label(),
        "kind": b.kind(),
        "levels": b.level_count(),
        "fiber_sizes": b.fibers().iter().map(|f| f.vertex_count()).collect::<Vec<_>>(),
        "fiber_diameters": b.fibers().iter().map(|f| f.diameter()).collect::<Vec<_>>(),
        "total_vertices": b.total().vertex_count(),
        "total_edges": b.total().edge_count(),
        "fiber_valence_bound": b.fiber_valence_bound(),
        "properness_profile": b.properness_profile(),
    });
    if p.fiber_maps {
        let maps = (0..b.top())
            .map(|i| coarselab::bundle::fiber_map(&b, i))
            .collect::<Result<Vec<_>, _>>()?;
        value["fiber_map_k"] = json!(maps.iter().map(|m| m.k_measured).collect::<Vec<_>>());
    }
    if let Some(r) = p.good_section {
        value["good_section"] = to_value(&coarselab::bundle::good_section(&b, r)?);
    }
    if let Some(dir) = out_dir {
        let stem = file_stem(cfg);
        let manifest = BundleManifest::write(&b, dir, &stem, cfg.bundle.clone())?;
        write_json(
            &dir.join(format!("{stem}.bundle.json")),
            &to_value(&manifest),
        )?;
    }
    let record = Record::measured(
        "validate_bundle",
        json!({"bundle": cfg.label()}),
        json!({"levels": b.level_count(), "properness_profile": b.properness_profile()}),
    );
    Ok(OpOutput::new(value, vec![record], true))
}

fn default_k() -> u32 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowParams {
    /// Fiber-local ids in `F_0`; defaults to its central vertex.
    #[serde(default)]
    base_set: Option<Vec<Vertex>>,
    #[serde(default = "default_k")]
    k: u32,
}

fn flow(cfg: &ExperimentConfig) -> OpResult {
    let p: FlowParams = params(cfg)?;
    let b = require_bundle(cfg)?;
    let a = p
        .base_set
        .unwrap_or_else(|| vec![central_vertex(b.fiber(0))]);
    let report = flow_bound_check(&b, &a, p.k)?;
    let csv = report.csv();
    let record = report.to_record();
    let pass = report.pass;
    let mut value = to_value(&report);
    value["base_set"] = json!(a);
    value["tightest_level"] = json!(report.tightest_level());
    Ok(OpOutput::new(value, vec![record], pass).with_csv(csv))
}

fn default_lambda() -> FlexRational {
    FlexRational(Rational::new(3, 2))
}

fn default_m_k() -> FlexRational {
    FlexRational(Rational::from_integer(2))
}

fn default_samples() -> usize {
    200
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlareParams {
    #[serde(default = "default_k")]
    k: u32,
    #[serde(default = "default_n_k")]
    n_k: u32,
    #[serde(default = "default_lambda")]
    lambda: FlexRational,
    #[serde(default = "default_m_k")]
    m_k: FlexRational,
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_n_k() -> u32 {
    1
}

fn flare(cfg: &ExperimentConfig) -> OpResult {
    let p: FlareParams = params(cfg)?;
    let b = require_bundle(cfg)?;
    let report = flaring_check(
        &b,
        p.k,
        p.n_k as usize,
        p.lambda.0,
        p.m_k.0,
        p.samples,
        cfg.seed,
    )?;
    let rows: Vec<Vec<String>> = report
        .violations
        .iter()
        .map(|v| {
            vec![
                v.starts[0].to_string(),
                v.starts[1].to_string(),
                v.middle.to_string(),
                v.d_minus.to_string(),
                v.d_mid.to_string(),
                v.d_plus.to_string(),
            ]
        })
        .collect();
    let csv = to_csv(
        &["start_a", "start_b", "middle", "d_minus", "d_mid", "d_plus"],
        &rows,
    );
    let pass = report.pass;
    Ok(OpOutput::new(to_value(&report), vec![report.to_record()], pass).with_csv(csv))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DivergeParams {
    /// Two vertices of `F_0`; the sections through them are compared.
    starts: [Vertex; 2],
    /// Total-space delta; defaults to the measured four-point delta.
    #[serde(default)]
    delta: Option<HalfInt>,
    #[serde(default)]
    m_k: Option<FlexRational>,
    /// Starting-distance cap; defaults to the starting distance.
    #[serde(default)]
    c: Option<u32>,
    /// Require a non-vacuous pass.
    #[serde(default)]
    strong: bool,
}

fn diverge(cfg: &ExperimentConfig) -> OpResult {
    let p: DivergeParams = params(cfg)?;
    let b = require_bundle(cfg)?;
    for &x in &p.starts {
        check_fiber_vertex(&b, 0, x)?;
    }
    let s1 = section_through(&b, b.total_id(0, p.starts[0]), 1)?;
    let s2 = section_through(&b, b.total_id(0, p.starts[1]), 1)?;
    let delta = match p.delta {
        Some(d) => d,
        None => delta_four_point(b.total())?.delta_four_point,
    };
    let c =
        p.c.unwrap_or_else(|| b.fiber(0).dist(p.starts[0], p.starts[1]));
    let m_k = p.m_k.map_or(Rational::from_integer(0), |m| m.0);
    let report = divergence_check(&b, &s1, &s2, delta, m_k, c)?;
    let pass = if p.strong {
        report.strong_pass()
    } else {
        report.pass
    };
    let rows: Vec<Vec<String>> = report
        .profile
        .iter()
        .enumerate()
        .map(|(i, d)| vec![i.to_string(), d.to_string()])
        .collect();
    let mut value = to_value(&report);
    value["strong_pass"] = json!(report.strong_pass());
    Ok(OpOutput::new(value, vec![report.to_record()], pass)
        .with_csv(to_csv(&["level", "distance"], &rows)))
}

fn default_m() -> u32 {
    2
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShadowParams {
    /// Vertex of `F_0` the target section starts from; defaults to the
    /// central vertex.
    #[serde(default)]
    target: Option<Vertex>,
    #[serde(default = "default_m")]
    m: u32,
    #[serde(default)]
    min_start: u32,
}

fn shadow(cfg: &ExperimentConfig) -> OpResult {
    let p: ShadowParams = params(cfg)?;
    let b = require_bundle(cfg)?;
    let t = p.target.unwrap_or_else(|| central_vertex(b.fiber(0)));
    check_fiber_vertex(&b, 0, t)?;
    let target = section_through(&b, b.total_id(0, t), 1)?;
    let res = shadow_search(&b, &target, p.m, p.min_start)?;
    let pass = !res.witnesses.is_empty() && res.recheck(&b);
    let rows: Vec<Vec<String>> = res
        .witnesses
        .iter()
        .map(|w| {
            vec![
                w.p.to_string(),
                w.meet_level.to_string(),
                w.meet_distance.to_string(),
            ]
        })
        .collect();
    let csv = to_csv(&["p", "meet_level", "meet_distance"], &rows);
    let value = json!({
        "target": target.levels,
        "m": res.m,
        "min_start_distance": res.min_start_distance,
        "candidates": res.candidates,
        "witnesses": res.witnesses.len(),
        "max_meet_level": res.witnesses.iter().map(|w| w.meet_level).max(),
    });
    Ok(OpOutput::new(value, vec![res.to_record()], pass).with_csv(csv))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoveringParams {
    big: Vec<FlexRational>,
    small: Vec<FlexRational>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetParams {
    #[serde(default)]
    covering: Option<CoveringParams>,
}

fn net(cfg: &ExperimentConfig) -> OpResult {
    let p: NetParams = params(cfg)?;
    let spec = cfg
        .space
        .as_ref()
        .ok_or_else(|| RunError::ConfigInvalid("net needs a sampled space".into()))?;
    let space = spec.build()?;
    space.validate()?;
    let net = separated_net(&space)?;
    let one = Rational::from_integer(1);
    let maximal = net_invariants(&space, &net).map_err(|e| e.to_string());
    let pass = maximal.is_ok() && net.separation >= one && net.covering_radius <= one;
    let ng = net_graph(&net, &space)?;
    let mut value = json!({
        "points": space.len(),
        "net": net,
        "maximal": maximal.err(),
        "net_graph": {"vertices": ng.graph.vertex_count(), "edges": ng.graph.edge_count()},
    });
    if let Some(c) = p.covering {
        let big: Vec<Rational> = c.big.iter().map(|r| r.0).collect();
        let small: Vec<Rational> = c.small.iter().map(|r| r.0).collect();
        value["covering"] = to_value(&strongly_proper_estimate(&space, &big, &small)?);
    }
    let record = Record::new(
        "net_invariants",
        json!({"points": space.len()}),
        json!({"separation": net.separation.to_string(), "covering_radius": net.covering_radius.to_string()}),
        json!({"separation": ">= 1", "covering_radius": "<= 1"}),
        pass,
    );
    Ok(OpOutput::new(value, vec![record], pass))
}

fn default_sample_n() -> usize {
    9
}

fn default_spacing() -> FlexRational {
    FlexRational(Rational::new(1, 2))
}

fn default_levels() -> usize {
    3
}

fn zero() -> FlexRational {
    FlexRational(Rational::from_integer(0))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproxParams {
    /// Sampled horoball over the segment `[0, n - 1]`.
    #[serde(default = "default_sample_n")]
    n: usize,
    #[serde(default = "default_spacing")]
    spacing: FlexRational,
    #[serde(default = "default_levels")]
    levels: usize,
    #[serde(default = "zero")]
    c: FlexRational,
    /// Audit against `horoball_bundle(P_n, levels)`.
    #[serde(default = "default_true")]
    audit: bool,
    #[serde(default)]
    pair_samples: Option<usize>,
}

fn approx(cfg: &ExperimentConfig) -> OpResult {
    let p: ApproxParams = params(cfg)?;
    let hs = HoroballSampler {
        n: p.n,
        spacing: p.spacing.0,
        levels: p.levels,
    };
    let c = p.c.0;
    let ab = approx_bundle(&hs, c)?;
    let one = Rational::from_integer(1);
    let mut nets_ok = true;
    let mut net_rows = Vec::new();
    for (i, net) in ab.nets.iter().enumerate() {
        let fiber = hs.fiber(i)?;
        let maximal = net_invariants(&fiber, net).is_ok();
        let ok = maximal && net.separation >= one && net.covering_radius <= one;
        nets_ok &= ok;
        net_rows.push(json!({
            "level": i,
            "members": net.members.len(),
            "separation": net.separation.to_string(),
            "covering_radius": net.covering_radius.to_string(),
            "maximal": maximal,
            "pass": ok,
        }));
    }
    let six_c_four = Rational::from_integer(6) * c + Rational::from_integer(4);
    let mut records = vec![Record::new(
        "net_invariants",
        json!({"n": p.n, "spacing": p.spacing, "levels": p.levels}),
        json!(net_rows.len()),
        json!({"separation": ">= 1", "covering_radius": "<= 1"}),
        nets_ok,
    )];
    let mut value = json!({
        "levels": ab.bundle.level_count(),
        "total_vertices": ab.bundle.total().vertex_count(),
        "cross_threshold": ab.cross_threshold.to_string(),
        "nets": net_rows,
    });
    let mut pass = nets_ok;
    if p.audit {
        let hb = horoball_bundle(&path(p.n), p.levels);
        let map = hs.horoball_map(&ab, &hb)?;
        let d = qi_audit(
            ab.bundle.total(),
            &map,
            hb.total(),
            p.pair_samples,
            cfg.seed,
        )?;
        let ok = d.pass && d.multiplicative.to_rational() <= six_c_four;
        pass &= ok;
        records.push(Record::new(
            "qi_audit",
            json!({"against": format!("horoball(P{}, {})", p.n, p.levels), "c": p.c}),
            json!({"multiplicative": d.multiplicative, "additive": d.additive.to_string(), "exhaustive": d.exhaustive}),
            json!({"multiplicative": six_c_four.to_string()}),
            ok,
        ));
        value["audit"] = to_value(&d);
        value["bound"] = json!(six_c_four.to_string());
    }
    Ok(OpOutput::new(value, records, pass))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BowditchParams {
    /// Defaults to `delta(F_0) + 4`, rounded up.
    #[serde(default)]
    d: Option<u32>,
    #[serde(default)]
    max_level: Option<usize>,
}

fn bowditch(cfg: &ExperimentConfig) -> OpResult {
    let p: BowditchParams = params(cfg)?;
    let default_d = |delta: HalfInt| p.d.unwrap_or((delta.ceil().max(0) + 4) as u32);
    if cfg.bundle.is_none() {
        let g = require_graph(cfg)?;
        let delta = delta_four_point(&g)?.delta_four_point;
        let d = default_d(delta);
        let rep = bowditch_check(&g, geodesic_family(&g), d)?;
        let record = Record::new(
            "bowditch_check",
            json!({"graph": cfg.label(), "family": "geodesic"}),
            json!({"smallest_d": rep.smallest_d}),
            json!(d),
            rep.pass,
        );
        let pass = rep.pass;
        return Ok(OpOutput::new(
            json!({"delta": delta, "report": rep}),
            vec![record],
            pass,
        ));
    }
    let spec = cfg.bundle.as_ref().expect("checked above");
    let b = spec.build()?;
    let horoball_base = match (b.kind(), spec) {
        (BundleKind::Horoball, coarselab::bundle::BundleSpec::Horoball { fiber, .. }) => {
            Some(fiber.build()?)
        }
        _ => None,
    };
    let top = p.max_level.map_or(b.top(), |m| m.min(b.top()));
    let delta0 = delta_four_point(b.fiber(0))?.delta_four_point;
    let d = default_d(delta0);
    let mut rows = Vec::new();
    let mut csv_rows = Vec::new();
    let mut records = Vec::new();
    let mut pass = true;
    for i in 0..=top {
        let fiber = b.fiber(i);
        let delta_i = delta_four_point(fiber)?.delta_four_point;
        let uniform = delta_i <= delta0 + HalfInt::from_int(2);
        let rep = match &horoball_base {
            Some(base) => bowditch_check(fiber, waypoint_family(base, i), d)?,
            None => bowditch_check(fiber, geodesic_family(fiber), d)?,
        };
        let ok = uniform && rep.pass;
        pass &= ok;
        records.push(Record::new(
            "fiber_uniformity",
            json!({"bundle": cfg.label(), "level": i}),
            json!({"delta": delta_i, "smallest_d": rep.smallest_d}),
            json!({"delta": delta0 + HalfInt::from_int(2), "d": d}),
            ok,
        ));
        csv_rows.push(vec![
            i.to_string(),
            delta_i.to_string(),
            rep.condition1.to_string(),
            rep.condition2.to_string(),
            rep.smallest_d.to_string(),
            d.to_string(),
            ok.to_string(),
        ]);
        rows.push(json!({"level": i, "delta": delta_i, "uniform": uniform, "report": rep}));
    }
    let family = if horoball_base.is_some() {
        "waypoint"
    } else {
        "geodesic"
    };
    let csv = to_csv(
        &[
            "level",
            "delta",
            "condition1",
            "condition2",
            "smallest_d",
            "d",
            "pass",
        ],
        &csv_rows,
    );
    let value = json!({"family": family, "delta_f0": delta0, "d": d, "levels": rows});
    Ok(OpOutput::new(value, records, pass).with_csv(csv))
}
