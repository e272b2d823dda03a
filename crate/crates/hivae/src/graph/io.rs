//! Graph file loading and saving.
//!
//! The on-disk format is a single JSON object:
//! `{"format_version": 1, "nodes": [{"id", "x", "y"}...],
//!   "edges": [{"src", "dst", "length"}...], "goals": [int...]}`.
//! Unknown top-level keys are rejected so schema drift fails loudly.

use super::{EdgeRecord, NodeRecord, SpatialGraph};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    pub nodes: Vec<NodeJson>,
    pub edges: Vec<EdgeJson>,
    pub goals: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeJson {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeJson {
    pub src: usize,
    pub dst: usize,
    pub length: f64,
}

/// Parses and validates a graph from a JSON string.
pub fn load_graph_str(text: &str) -> Result<SpatialGraph> {
    let parsed: GraphJson =
        serde_json::from_str(text).map_err(|e| Error::GraphParse(e.to_string()))?;
    if let Some(v) = parsed.format_version {
        if v != 1 {
            return Err(Error::GraphParse(format!("unsupported format_version {v}")));
        }
    }
    let nodes = parsed
        .nodes
        .into_iter()
        .map(|n| NodeRecord { id: n.id, x: n.x, y: n.y })
        .collect();
    let edges = parsed
        .edges
        .into_iter()
        .map(|e| EdgeRecord { src: e.src, dst: e.dst, length: e.length })
        .collect();
    SpatialGraph::new(nodes, edges, parsed.goals)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SpatialGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    load_graph_str(&text).map_err(|e| match e {
        Error::GraphParse(msg) => Error::GraphParse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_graph_json(g: &SpatialGraph) -> GraphJson {
    GraphJson {
        format_version: Some(1),
        nodes: g
            .nodes()
            .iter()
            .map(|n| NodeJson { id: n.id, x: n.x, y: n.y })
            .collect(),
        edges: g
            .edges()
            .iter()
            .map(|e| EdgeJson { src: e.src, dst: e.dst, length: e.length })
            .collect(),
        goals: g.goal_set().to_vec(),
    }
}

pub fn save_graph(g: &SpatialGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&to_graph_json(g))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}
