//! Spatial graph representation, ingestion, and path algorithms.
//!
//! A [`SpatialGraph`] is a directed weighted graph of walkable nodes with a
//! designated candidate-goal subset. It is immutable after construction and
//! shared read-only by the simulator, the Bayesian baselines, and the neural
//! encoders. Edge lengths are authoritative for all path costs; coordinates
//! are only used for "nearness" tests.

mod io;
mod paths;
mod synth;

pub use io::{load_graph, load_graph_str, save_graph, to_graph_json};
pub use paths::{cost_to_go, k_shortest_paths, shortest_path, PathResult};
pub use synth::{generate_synthetic_graph, GeneratorSpec};

use crate::error::{Error, Result};
use sha2::{Digest, Sha256};

/// Dense node identifier in `[0, |V|)`.
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct SpatialGraph {
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    goal_set: Vec<NodeId>,
    /// Outgoing `(dst, length)` pairs per node, sorted by destination id.
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl SpatialGraph {
    /// Builds a graph and checks every structural invariant.
    pub fn new(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>, goal_set: Vec<NodeId>) -> Result<Self> {
        let n = nodes.len();
        for (ix, node) in nodes.iter().enumerate() {
            if node.id != ix {
                return Err(Error::NonDenseNodeIds {
                    expected: n,
                    detail: format!("node at position {ix} has id {}", node.id),
                });
            }
        }
        let mut adjacency: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for e in &edges {
            if e.src >= n || e.dst >= n {
                let missing = if e.src >= n { e.src } else { e.dst };
                return Err(Error::DanglingEndpoint { src: e.src, dst: e.dst, missing });
            }
            if !(e.length > 0.0) {
                return Err(Error::NonPositiveLength { src: e.src, dst: e.dst, length: e.length });
            }
            adjacency[e.src].push((e.dst, e.length));
        }
        for adj in &mut adjacency {
            adj.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        if goal_set.is_empty() {
            return Err(Error::EmptyGoalSet);
        }
        let mut seen = vec![false; n];
        for &g in &goal_set {
            if g >= n {
                return Err(Error::GoalNotANode(g));
            }
            if seen[g] {
                return Err(Error::DuplicateGoal(g));
            }
            seen[g] = true;
        }
        Ok(SpatialGraph { nodes, edges, goal_set, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    /// Candidate goals, in their designated order.
    pub fn goal_set(&self) -> &[NodeId] {
        &self.goal_set
    }

    /// Position of `node` within the goal set, if it is a goal.
    pub fn goal_index(&self, node: NodeId) -> Option<usize> {
        self.goal_set.iter().position(|&g| g == node)
    }

    /// Outgoing `(dst, length)` pairs of `node`, sorted by destination id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, f64)] {
        &self.adjacency[node]
    }

    pub fn has_edge(&self, src: NodeId, dst: NodeId) -> bool {
        self.adjacency[src].iter().any(|&(d, _)| d == dst)
    }

    /// Length of the shortest parallel edge `src -> dst`, if any.
    pub fn edge_length(&self, src: NodeId, dst: NodeId) -> Option<f64> {
        self.adjacency[src]
            .iter()
            .filter(|&&(d, _)| d == dst)
            .map(|&(_, l)| l)
            .min_by(f64::total_cmp)
    }

    pub fn check_node(&self, node: NodeId) -> Result<()> {
        if node >= self.nodes.len() {
            return Err(Error::NodeOutOfRange(node, self.nodes.len()));
        }
        Ok(())
    }

    /// Euclidean coordinate distance between two nodes.
    pub fn coord_distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (na, nb) = (&self.nodes[a], &self.nodes[b]);
        ((na.x - nb.x).powi(2) + (na.y - nb.y).powi(2)).sqrt()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        self.edges.iter().map(|e| e.length).sum::<f64>() / self.edges.len() as f64
    }

    /// True when every node reaches every node.
    pub fn is_strongly_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return true;
        }
        let forward = self.reachable_from(0, false);
        let backward = self.reachable_from(0, true);
        forward.iter().all(|&r| r) && backward.iter().all(|&r| r)
    }

    fn reachable_from(&self, start: NodeId, reversed: bool) -> Vec<bool> {
        let n = self.nodes.len();
        let mut seen = vec![false; n];
        let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        if reversed {
            for e in &self.edges {
                incoming[e.dst].push(e.src);
            }
        }
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            let nexts: Vec<NodeId> = if reversed {
                incoming[v].clone()
            } else {
                self.adjacency[v].iter().map(|&(d, _)| d).collect()
            };
            for w in nexts {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Content hash over the canonical JSON serialization (hex SHA-256).
    pub fn content_hash(&self) -> String {
        let json = to_graph_json(self);
        let text = serde_json::to_string(&json).expect("graph serialization is infallible");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Projects geographic coordinates to local planar meters around a reference
/// point (equirectangular approximation).
pub fn project_equirectangular(lat: f64, lon: f64, ref_lat: f64, ref_lon: f64) -> (f64, f64) {
    const EARTH_RADIUS_M: f64 = 6_371_000.0;
    let x = (lon - ref_lon).to_radians() * ref_lat.to_radians().cos() * EARTH_RADIUS_M;
    let y = (lat - ref_lat).to_radians() * EARTH_RADIUS_M;
    (x, y)
}
