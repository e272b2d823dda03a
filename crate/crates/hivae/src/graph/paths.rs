//! Shortest-path queries: Dijkstra with deterministic tie-breaking and
//! loopless k-shortest paths via Yen's deviation algorithm.
//!
//! Ties between equal-length shortest paths are broken by the
//! lexicographically smallest node sequence, which keeps every downstream
//! dataset deterministic. Two path lengths are considered tied when they
//! agree within 1e-9 relative.

use super::{NodeId, SpatialGraph};
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

const TIE_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub nodes: Vec<NodeId>,
    pub length: f64,
}

fn tie_tol(total: f64) -> f64 {
    TIE_REL_TOL * total.abs().max(1.0)
}

/// Edge filter used by Yen's spur searches.
#[derive(Default)]
struct Restrictions {
    banned_nodes: HashSet<NodeId>,
    banned_edges: HashSet<(NodeId, NodeId)>,
}

impl Restrictions {
    fn allows_node(&self, v: NodeId) -> bool {
        !self.banned_nodes.contains(&v)
    }

    fn allows_edge(&self, src: NodeId, dst: NodeId) -> bool {
        !self.banned_edges.contains(&(src, dst))
    }
}

#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: NodeId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, node id as deterministic tiebreak
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Distances from `start` to all nodes (forward) or to `start` from all nodes
/// (reversed), honoring the restrictions. Unreachable nodes get `INFINITY`.
fn dijkstra_distances(
    g: &SpatialGraph,
    start: NodeId,
    reversed: bool,
    restrict: &Restrictions,
) -> Vec<f64> {
    let n = g.num_nodes();
    let mut dist = vec![f64::INFINITY; n];
    if !restrict.allows_node(start) {
        return dist;
    }
    // Reverse adjacency is built on demand; spur searches are small.
    let reverse_adj: Option<Vec<Vec<(NodeId, f64)>>> = if reversed {
        let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
        for e in g.edges() {
            adj[e.dst].push((e.src, e.length));
        }
        Some(adj)
    } else {
        None
    };
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { dist: 0.0, node: start });
    while let Some(HeapEntry { dist: d, node: v }) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        let neighbors: &[(NodeId, f64)] = match &reverse_adj {
            Some(adj) => &adj[v],
            None => g.neighbors(v),
        };
        for &(w, len) in neighbors {
            if !restrict.allows_node(w) {
                continue;
            }
            let edge_ok = if reversed {
                restrict.allows_edge(w, v)
            } else {
                restrict.allows_edge(v, w)
            };
            if !edge_ok {
                continue;
            }
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                heap.push(HeapEntry { dist: nd, node: w });
            }
        }
    }
    dist
}

/// Shortest path under restrictions, lexicographic tie-break.
fn shortest_path_restricted(
    g: &SpatialGraph,
    src: NodeId,
    dst: NodeId,
    restrict: &Restrictions,
) -> Option<PathResult> {
    if !restrict.allows_node(src) || !restrict.allows_node(dst) {
        return None;
    }
    if src == dst {
        return Some(PathResult { nodes: vec![src], length: 0.0 });
    }
    let dist_to_dst = dijkstra_distances(g, dst, true, restrict);
    let total = dist_to_dst[src];
    if !total.is_finite() {
        return None;
    }
    // Greedy reconstruction: repeatedly take the smallest-id successor that
    // still lies on some shortest path to dst.
    let tol = tie_tol(total);
    let mut nodes = vec![src];
    let mut acc = 0.0;
    let mut current = src;
    while current != dst {
        let mut chosen: Option<(NodeId, f64)> = None;
        for &(w, len) in g.neighbors(current) {
            if !restrict.allows_node(w) || !restrict.allows_edge(current, w) {
                continue;
            }
            if acc + len + dist_to_dst[w] <= total + tol {
                match chosen {
                    Some((prev, _)) if prev <= w => {}
                    _ => chosen = Some((w, len)),
                }
            }
        }
        let (w, len) = chosen?;
        acc += len;
        nodes.push(w);
        current = w;
        if nodes.len() > g.num_nodes() {
            // numerically impossible on valid graphs; bail rather than loop
            return None;
        }
    }
    Some(PathResult { nodes, length: acc })
}

/// Shortest-path distance from every node to `goal` (the cost-to-go table).
/// Nodes that cannot reach the goal get `INFINITY`.
pub fn cost_to_go(g: &SpatialGraph, goal: NodeId) -> Result<Vec<f64>> {
    g.check_node(goal)?;
    Ok(dijkstra_distances(g, goal, true, &Restrictions::default()))
}

/// Minimum-length path from `src` to `dst`; equal-length ties resolved to the
/// lexicographically smallest node sequence.
pub fn shortest_path(g: &SpatialGraph, src: NodeId, dst: NodeId) -> Result<PathResult> {
    g.check_node(src)?;
    g.check_node(dst)?;
    shortest_path_restricted(g, src, dst, &Restrictions::default())
        .ok_or(Error::NoPath { src, dst })
}

fn path_order(a: &PathResult, b: &PathResult) -> Ordering {
    let tol = tie_tol(a.length.max(b.length));
    if (a.length - b.length).abs() <= tol {
        a.nodes.cmp(&b.nodes)
    } else {
        a.length.total_cmp(&b.length)
    }
}

/// Up to `k` loopless paths in nondecreasing length order (Yen's algorithm).
pub fn k_shortest_paths(g: &SpatialGraph, src: NodeId, dst: NodeId, k: usize) -> Result<Vec<PathResult>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be >= 1".into()));
    }
    let first = shortest_path(g, src, dst)?;
    let mut accepted: Vec<PathResult> = vec![first];
    let mut candidates: Vec<PathResult> = Vec::new();
    let mut seen: HashSet<Vec<NodeId>> = HashSet::new();
    seen.insert(accepted[0].nodes.clone());

    while accepted.len() < k {
        let prev = accepted.last().unwrap().clone();
        for spur_ix in 0..prev.nodes.len() - 1 {
            let spur_node = prev.nodes[spur_ix];
            let root = &prev.nodes[..=spur_ix];
            let mut restrict = Restrictions::default();
            // Ban the next edge of every accepted path sharing this root.
            for p in &accepted {
                if p.nodes.len() > spur_ix + 1 && p.nodes[..=spur_ix] == *root {
                    restrict
                        .banned_edges
                        .insert((p.nodes[spur_ix], p.nodes[spur_ix + 1]));
                }
            }
            // Ban root nodes except the spur node itself (looplessness).
            for &v in &root[..spur_ix] {
                restrict.banned_nodes.insert(v);
            }
            let Some(spur) = shortest_path_restricted(g, spur_node, dst, &restrict) else {
                continue;
            };
            let mut nodes = root[..spur_ix].to_vec();
            nodes.extend_from_slice(&spur.nodes);
            let mut length = spur.length;
            for pair in root.windows(2) {
                length += g
                    .edge_length(pair[0], pair[1])
                    .expect("root edges come from valid paths");
            }
            if seen.insert(nodes.clone()) {
                candidates.push(PathResult { nodes, length });
            }
        }
        if candidates.is_empty() {
            break;
        }
        let best_ix = candidates
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| path_order(a, b))
            .map(|(ix, _)| ix)
            .unwrap();
        accepted.push(candidates.swap_remove(best_ix));
    }
    Ok(accepted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeRecord, NodeRecord};

    fn diamond() -> SpatialGraph {
        // 0->1 (1m), 1->3 (1m), 0->2 (3m), 2->3 (0.5m)
        let nodes = (0..4)
            .map(|id| NodeRecord { id, x: id as f64, y: 0.0 })
            .collect();
        let edges = vec![
            EdgeRecord { src: 0, dst: 1, length: 1.0 },
            EdgeRecord { src: 1, dst: 3, length: 1.0 },
            EdgeRecord { src: 0, dst: 2, length: 3.0 },
            EdgeRecord { src: 2, dst: 3, length: 0.5 },
        ];
        SpatialGraph::new(nodes, edges, vec![3]).unwrap()
    }

    #[test]
    fn trivial_self_path() {
        let g = diamond();
        let p = shortest_path(&g, 1, 1).unwrap();
        assert_eq!(p.nodes, vec![1]);
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn diamond_shortest() {
        let g = diamond();
        let p = shortest_path(&g, 0, 3).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 3]);
        assert!((p.length - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_is_no_path() {
        let g = diamond();
        assert!(matches!(shortest_path(&g, 3, 0), Err(Error::NoPath { src: 3, dst: 0 })));
    }

    #[test]
    fn k_one_matches_shortest() {
        let g = diamond();
        let ks = k_shortest_paths(&g, 0, 3, 1).unwrap();
        assert_eq!(ks.len(), 1);
        assert_eq!(ks[0], shortest_path(&g, 0, 3).unwrap());
    }

    #[test]
    fn diamond_k3_finds_both_paths() {
        let g = diamond();
        let ks = k_shortest_paths(&g, 0, 3, 3).unwrap();
        assert_eq!(ks.len(), 2);
        assert_eq!(ks[0].nodes, vec![0, 1, 3]);
        assert_eq!(ks[1].nodes, vec![0, 2, 3]);
        assert!((ks[1].length - 3.5).abs() < 1e-12);
    }

    #[test]
    fn equal_length_tie_is_lexicographic() {
        // two equal-length routes 0->1->3 and 0->2->3
        let nodes = (0..4)
            .map(|id| NodeRecord { id, x: 0.0, y: 0.0 })
            .collect();
        let edges = vec![
            EdgeRecord { src: 0, dst: 2, length: 1.0 },
            EdgeRecord { src: 2, dst: 3, length: 1.0 },
            EdgeRecord { src: 0, dst: 1, length: 1.0 },
            EdgeRecord { src: 1, dst: 3, length: 1.0 },
        ];
        let g = SpatialGraph::new(nodes, edges, vec![3]).unwrap();
        let p = shortest_path(&g, 0, 3).unwrap();
        assert_eq!(p.nodes, vec![0, 1, 3]);
    }
}
