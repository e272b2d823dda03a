//! Seeded synthetic graph generation.
//!
//! Produces jittered grid graphs with reciprocal edges (optionally with
//! random diagonals) as a desk-scale stand-in for imported street networks.

use super::{EdgeRecord, NodeId, NodeRecord, SpatialGraph};
use crate::error::{Error, Result};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Grid spacing in meters between adjacent intersections.
const GRID_SPACING_M: f64 = 10.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub grid_width: usize,
    pub grid_height: usize,
    /// Probability of adding a reciprocal diagonal edge per grid cell.
    pub diagonal_probability: f64,
    /// Max absolute coordinate jitter in meters.
    pub jitter: f64,
    pub num_goals: usize,
    pub seed: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            grid_width: 20,
            grid_height: 15,
            diagonal_probability: 0.15,
            jitter: 2.0,
            num_goals: 20,
            seed: 0,
        }
    }
}

/// Builds a connected directed grid graph; deterministic for a fixed spec.
pub fn generate_synthetic_graph(spec: &GeneratorSpec) -> Result<SpatialGraph> {
    if spec.grid_width < 2 || spec.grid_height < 2 {
        return Err(Error::InfeasibleSpec(format!(
            "grid dims must be >= 2, got {}x{}",
            spec.grid_width, spec.grid_height
        )));
    }
    let n = spec.grid_width * spec.grid_height;
    if spec.num_goals < 2 || spec.num_goals > n {
        return Err(Error::InfeasibleSpec(format!(
            "num_goals must be in [2, {n}], got {}",
            spec.num_goals
        )));
    }
    if !(0.0..=1.0).contains(&spec.diagonal_probability) {
        return Err(Error::InfeasibleSpec(format!(
            "diagonal_probability must be in [0, 1], got {}",
            spec.diagonal_probability
        )));
    }
    // Jitter is clamped so neighboring nodes can never coincide.
    let jitter = spec.jitter.abs().min(0.45 * GRID_SPACING_M);

    let mut coord_rng = rng::stream(spec.seed, "graph/coords", &[]);
    let mut nodes = Vec::with_capacity(n);
    for row in 0..spec.grid_height {
        for col in 0..spec.grid_width {
            let dx: f64 = if jitter > 0.0 { coord_rng.gen_range(-jitter..jitter) } else { 0.0 };
            let dy: f64 = if jitter > 0.0 { coord_rng.gen_range(-jitter..jitter) } else { 0.0 };
            nodes.push(NodeRecord {
                id: row * spec.grid_width + col,
                x: col as f64 * GRID_SPACING_M + dx,
                y: row as f64 * GRID_SPACING_M + dy,
            });
        }
    }

    let index = |row: usize, col: usize| -> NodeId { row * spec.grid_width + col };
    let mut edges = Vec::new();
    let push_pair = |edges: &mut Vec<EdgeRecord>, a: NodeId, b: NodeId| {
        let len = (((nodes[a].x - nodes[b].x).powi(2) + (nodes[a].y - nodes[b].y).powi(2)).sqrt())
            .max(1e-6);
        edges.push(EdgeRecord { src: a, dst: b, length: len });
        edges.push(EdgeRecord { src: b, dst: a, length: len });
    };
    for row in 0..spec.grid_height {
        for col in 0..spec.grid_width {
            if col + 1 < spec.grid_width {
                push_pair(&mut edges, index(row, col), index(row, col + 1));
            }
            if row + 1 < spec.grid_height {
                push_pair(&mut edges, index(row, col), index(row + 1, col));
            }
        }
    }
    let mut diag_rng = rng::stream(spec.seed, "graph/diagonals", &[]);
    for row in 0..spec.grid_height - 1 {
        for col in 0..spec.grid_width - 1 {
            // one diagonal direction per cell, coin-flipped
            let roll: f64 = diag_rng.gen();
            if roll < spec.diagonal_probability {
                let down_right: bool = diag_rng.gen();
                if down_right {
                    push_pair(&mut edges, index(row, col), index(row + 1, col + 1));
                } else {
                    push_pair(&mut edges, index(row, col + 1), index(row + 1, col));
                }
            }
        }
    }

    let mut goal_rng = rng::stream(spec.seed, "graph/goals", &[]);
    let mut all: Vec<NodeId> = (0..n).collect();
    all.shuffle(&mut goal_rng);
    let mut goal_set: Vec<NodeId> = all[..spec.num_goals].to_vec();
    goal_set.sort_unstable();

    SpatialGraph::new(nodes, edges, goal_set)
}
