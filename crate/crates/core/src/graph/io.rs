//! Edge-list text format and graph manifests.
//!
//! One `u v` pair per line, 0-based ids, `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generators::GraphSpec;
use super::{build_graph, MetricGraph, Vertex};
use crate::error::{CoreError, Result};

pub fn parse_edge_list(text: &str) -> Result<Vec<(Vertex, Vertex)>> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut next = || -> Result<Vertex> {
            let tok = parts.next().ok_or_else(|| CoreError::Parse {
                line: i + 1,
                message: "expected two vertex ids".into(),
            })?;
            tok.parse().map_err(|_| CoreError::Parse {
                line: i + 1,
                message: format!("bad vertex id {tok:?}"),
            })
        };
        let u = next()?;
        let v = next()?;
        if parts.next().is_some() {
            return Err(CoreError::Parse {
                line: i + 1,
                message: "trailing tokens".into(),
            });
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn format_edge_list(g: &MetricGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} vertices, {} edges",
        g.vertex_count(),
        g.edge_count()
    );
    for (u, v) in g.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

pub fn read_edge_list_file<P: AsRef<Path>>(path: P) -> Result<MetricGraph> {
    let text = std::fs::read_to_string(path)?;
    build_graph(&parse_edge_list(&text)?)
}

/// Generator reference inside a manifest: a kind plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRef {
    pub kind: String,
    #[serde(default)]
    pub params: serde_json::Value,
}

impl GeneratorRef {
    pub fn to_spec(&self) -> Result<GraphSpec> {
        let mut obj = match &self.params {
            serde_json::Value::Object(m) => m.clone(),
            serde_json::Value::Null => serde_json::Map::new(),
            other => {
                return Err(CoreError::InvalidParams(format!(
                    "generator params must be an object, got {other}"
                )))
            }
        };
        obj.insert("kind".into(), serde_json::Value::String(self.kind.clone()));
        serde_json::from_value(serde_json::Value::Object(obj))
            .map_err(|e| CoreError::InvalidParams(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphManifest {
    pub name: String,
    pub edges_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorRef>,
}

impl GraphManifest {
    /// Load the graph, resolving `edges_file` relative to `base_dir`. When a
    /// generator is recorded the generated graph must match the file.
    pub fn load(&self, base_dir: &Path) -> Result<MetricGraph> {
        let g = read_edge_list_file(base_dir.join(&self.edges_file))?;
        if let Some(gen) = &self.generator {
            let expected = gen.to_spec()?.build()?;
            if expected != g {
                return Err(CoreError::InvalidParams(format!(
                    "edges file {} does not match generator {}",
                    self.edges_file, gen.kind
                )));
            }
        }
        Ok(g)
    }
}
