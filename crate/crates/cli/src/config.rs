//! Experiment configs, suite matrices and the command-line shorthands that
//! build them.

use std::fmt;
use std::path::Path;

use coarselab::bundle::BundleSpec;
use coarselab::discretize::SampledSpaceSpec;
use coarselab::graph::generators::GraphSpec;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::RunError;

/// Operations a config can name. Kebab-case names match the subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Op {
    Gen,
    Delta,
    Gromov,
    Chain,
    Detour,
    Growth,
    EmbedT3,
    SurjConst,
    Bundle,
    #[serde(alias = "flow-bound")]
    Flow,
    Flare,
    Diverge,
    Shadow,
    Net,
    ApproxBundle,
    Bowditch,
}

impl Op {
    pub const ALL: [Op; 16] = [
        Op::Gen,
        Op::Delta,
        Op::Gromov,
        Op::Chain,
        Op::Detour,
        Op::Growth,
        Op::EmbedT3,
        Op::SurjConst,
        Op::Bundle,
        Op::Flow,
        Op::Flare,
        Op::Diverge,
        Op::Shadow,
        Op::Net,
        Op::ApproxBundle,
        Op::Bowditch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Gen => "gen",
            Op::Delta => "delta",
            Op::Gromov => "gromov",
            Op::Chain => "chain",
            Op::Detour => "detour",
            Op::Growth => "growth",
            Op::EmbedT3 => "embed-t3",
            Op::SurjConst => "surj-const",
            Op::Bundle => "bundle",
            Op::Flow => "flow",
            Op::Flare => "flare",
            Op::Diverge => "diverge",
            Op::Shadow => "shadow",
            Op::Net => "net",
            Op::ApproxBundle => "approx-bundle",
            Op::Bowditch => "bowditch",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        if name == "flow-bound" {
            return Some(Op::Flow);
        }
        Op::ALL.into_iter().find(|op| op.name() == name)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome a suite entry is expected to have.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    #[default]
    Pass,
    /// A control: the checked property is expected to fail (exit 2).
    Violation,
}

/// Artifact file names, relative to the output directory.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

impl Outputs {
    fn is_empty(&self) -> bool {
        self.report.is_none() && self.csv.is_none()
    }
}

/// One experiment: a generator, an operation and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<BundleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SampledSpaceSpec>,
    #[serde(default = "empty_object", skip_serializing_if = "is_empty_object")]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Outputs::is_empty")]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "is_pass")]
    pub expect: Expect,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

fn is_empty_object(v: &Value) -> bool {
    matches!(v, Value::Object(m) if m.is_empty())
}

fn is_pass(e: &Expect) -> bool {
    *e == Expect::Pass
}

impl ExperimentConfig {
    pub fn new(op: Op) -> Self {
        ExperimentConfig {
            name: None,
            seed: 0,
            op,
            graph: None,
            bundle: None,
            space: None,
            params: empty_object(),
            outputs: Outputs::default(),
            expect: Expect::Pass,
        }
    }

    pub fn with_graph(mut self, g: GraphSpec) -> Self {
        self.graph = Some(g);
        self
    }

    pub fn with_bundle(mut self, b: BundleSpec) -> Self {
        self.bundle = Some(b);
        self
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.params = params;
        self
    }

    pub fn expecting(mut self, e: Expect) -> Self {
        self.expect = e;
        self
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Short description of what the op runs on.
    pub fn label(&self) -> String {
        if let Some(b) = &self.bundle {
            b.label()
        } else if let Some(g) = &self.graph {
            g.label()
        } else if let Some(s) = &self.space {
            format!("sampled({})", s.point_count)
        } else {
            self.op.name().to_string()
        }
    }

    /// Set `key` in the params object, parsing `value` as JSON when it
    /// parses and keeping it as a string otherwise.
    pub fn set_param(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        let parsed =
            serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        match &mut self.params {
            Value::Object(m) => {
                m.insert(key.to_string(), parsed);
                Ok(())
            }
            other => Err(RunError::ConfigInvalid(format!(
                "params must be an object, got {other}"
            ))),
        }
    }
}

/// A list of configs run together by `suite`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub configs: Vec<ExperimentConfig>,
}

impl Matrix {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        serde_json::from_str(text).map_err(|e| RunError::ConfigInvalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn bad(text: &str, why: &str) -> RunError {
    RunError::ConfigInvalid(format!("{text:?}: {why}"))
}

fn num(text: &str, s: &str) -> Result<usize, RunError> {
    s.trim()
        .parse()
        .map_err(|_| bad(text, "expected a non-negative integer"))
}

/// Parse a graph generator from JSON or from the shorthand `path:9`,
/// `cycle:12`, `star:5`, `grid:3x4`, `tree:3,4` (valence, depth),
/// `free:2,3` (rank, radius) or `edges:FILE`.
pub fn parse_graph_spec(text: &str) -> Result<GraphSpec, RunError> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| RunError::ConfigInvalid(e.to_string()));
    }
    let (kind, args) = text
        .split_once(':')
        .ok_or_else(|| bad(text, "expected KIND:ARGS"))?;
    let pair = |sep: char| -> Result<(usize, usize), RunError> {
        let (a, b) = args
            .split_once(sep)
            .ok_or_else(|| bad(text, "expected two numbers"))?;
        Ok((num(text, a)?, num(text, b)?))
    };
    Ok(match kind {
        "path" => GraphSpec::Path {
            n: num(text, args)?,
        },
        "cycle" => GraphSpec::Cycle {
            n: num(text, args)?,
        },
        "star" => GraphSpec::Star {
            leaves: num(text, args)?,
        },
        "grid" => {
            let (width, height) = pair('x')?;
            GraphSpec::Grid { width, height }
        }
        "tree" => {
            let (valence, depth) = pair(',')?;
            GraphSpec::RegularTree { valence, depth }
        }
        "free" => {
            let (rank, radius) = pair(',')?;
            GraphSpec::FreeGroupBall { rank, radius }
        }
        "edges" => GraphSpec::EdgeList {
            path: args.to_string(),
        },
        _ => return Err(bad(text, "unknown graph kind")),
    })
}

/// Parse a bundle from JSON or from `KIND(GRAPH, N)` with KIND one of
/// `product`, `horoball`, `glued`, e.g. `horoball(path:17, 4)`.
pub fn parse_bundle_spec(text: &str) -> Result<BundleSpec, RunError> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| RunError::ConfigInvalid(e.to_string()));
    }
    let (kind, rest) = text
        .split_once('(')
        .ok_or_else(|| bad(text, "expected KIND(GRAPH, N)"))?;
    let inner = rest
        .strip_suffix(')')
        .ok_or_else(|| bad(text, "missing ')'"))?;
    let (graph, levels) = inner
        .rsplit_once(',')
        .ok_or_else(|| bad(text, "expected GRAPH, N"))?;
    let fiber = parse_graph_spec(graph)?;
    let levels = num(text, levels)?;
    Ok(match kind.trim() {
        "product" => BundleSpec::Product { fiber, levels },
        "horoball" => BundleSpec::Horoball { fiber, levels },
        "glued" => BundleSpec::Glued { fiber, levels },
        _ => return Err(bad(text, "unknown bundle kind")),
    })
}
