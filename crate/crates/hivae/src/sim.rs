//! Synthetic pedestrian dataset generation.
//!
//! Agents carry Dirichlet-drawn preference vectors over the graph's goal set.
//! Episodes sample a goal from the preferences, a uniform origin, and a route
//! from a categorical over the top-k shortest paths where shorter paths are
//! more probable. Every random draw comes from a stream derived as
//! `(master_seed, agent, episode)`, so generation order and parallelism never
//! change the data.

use crate::error::{Error, Result};
use crate::graph::{k_shortest_paths, shortest_path, NodeId, SpatialGraph};
use crate::rng::{self, Stream};
use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Default rationality temperature for path choice.
pub const DEFAULT_TAU: f64 = 0.2;
/// Default Dirichlet concentration (sparse, habit-like preferences).
pub const DEFAULT_ALPHA: f64 = 0.5;

const ORIGIN_RETRIES: usize = 64;
const KL_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: usize,
    /// Probability over the graph's goal set; sums to 1.
    pub preferences: Vec<f64>,
    pub rationality_temperature: f64,
}

impl AgentProfile {
    /// Most preferred goal index; ties broken by lowest index.
    pub fn preferred_goal(&self) -> usize {
        argmax(&self.preferences)
    }

    /// Least preferred goal index; ties broken by lowest index.
    pub fn least_preferred_goal(&self) -> usize {
        argmin(&self.preferences)
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v < xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    #[serde(rename = "agent")]
    pub agent_id: usize,
    #[serde(rename = "episode")]
    pub episode_id: usize,
    pub origin: NodeId,
    pub goal: NodeId,
    pub path: Vec<NodeId>,
    #[serde(rename = "ts")]
    pub timestamps: Vec<u64>,
    pub split: Split,
}

impl Episode {
    /// Checks the structural invariants against a graph.
    pub fn validate(&self, g: &SpatialGraph) -> Result<()> {
        if self.path.is_empty() {
            return Err(Error::Data("episode has an empty path".into()));
        }
        if self.path[0] != self.origin || *self.path.last().unwrap() != self.goal {
            return Err(Error::Data(format!(
                "episode {}/{} endpoints do not match origin/goal",
                self.agent_id, self.episode_id
            )));
        }
        if self.timestamps.len() != self.path.len() {
            return Err(Error::Data(format!(
                "episode {}/{} has {} timestamps for {} steps",
                self.agent_id,
                self.episode_id,
                self.timestamps.len(),
                self.path.len()
            )));
        }
        for pair in self.timestamps.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Data(format!(
                    "episode {}/{} timestamps are not increasing",
                    self.agent_id, self.episode_id
                )));
            }
        }
        for pair in self.path.windows(2) {
            g.check_node(pair[0])?;
            g.check_node(pair[1])?;
            if !g.has_edge(pair[0], pair[1]) {
                return Err(Error::Data(format!(
                    "episode {}/{} traverses missing edge {} -> {}",
                    self.agent_id, self.episode_id, pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub num_agents: usize,
    pub episodes_per_agent: usize,
    pub dirichlet_alpha: f64,
    pub tau: f64,
    pub k_paths: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            num_agents: 10,
            episodes_per_agent: 100,
            dirichlet_alpha: DEFAULT_ALPHA,
            tau: DEFAULT_TAU,
            k_paths: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub graph_hash: String,
    pub master_seed: u64,
    pub params: SimParams,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn train(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &Episode> {
        self.episodes.iter().filter(|e| e.split == Split::Test)
    }

    pub fn validate(&self, g: &SpatialGraph) -> Result<()> {
        if self.graph_hash != g.content_hash() {
            return Err(Error::Data("dataset graph hash does not match graph".into()));
        }
        for e in &self.episodes {
            e.validate(g)?;
        }
        Ok(())
    }
}

/// Draws independent symmetric-Dirichlet preference vectors for each agent.
pub fn sample_agent_profiles(
    g: &SpatialGraph,
    num_agents: usize,
    dirichlet_alpha: f64,
    tau: f64,
    seed: u64,
) -> Result<Vec<AgentProfile>> {
    if g.goal_set().is_empty() {
        return Err(Error::EmptyGoalSet);
    }
    if num_agents == 0 || dirichlet_alpha <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "need num_agents >= 1 and dirichlet_alpha > 0, got {num_agents} and {dirichlet_alpha}"
        )));
    }
    (0..num_agents)
        .map(|agent_id| {
            let mut stream = rng::stream(seed, "sim/profile", &[agent_id as u64]);
            let preferences = dirichlet_draw(g.goal_set().len(), dirichlet_alpha, &mut stream);
            Ok(AgentProfile { agent_id, preferences, rationality_temperature: tau })
        })
        .collect()
}

fn dirichlet_draw(dim: usize, alpha: f64, stream: &mut Stream) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    let dist = Dirichlet::new_with_size(alpha, dim).expect("valid Dirichlet parameters");
    dist.sample(stream)
}

fn categorical(weights: &[f64], stream: &mut Stream) -> usize {
    let total: f64 = weights.iter().sum();
    let roll: f64 = stream.gen_range(0.0..total);
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if roll < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Path-choice weights over the k shortest paths:
/// `P(path_j) ∝ exp(-length_j / (tau * length_1))`.
fn path_weights(lengths: &[f64], tau: f64) -> Vec<f64> {
    let scale = tau * lengths[0].max(1e-12);
    let min = lengths[0];
    lengths.iter().map(|&l| (-(l - min) / scale).exp()).collect()
}

/// Samples one episode for an agent from its derived stream.
pub fn generate_episode(
    g: &SpatialGraph,
    profile: &AgentProfile,
    episode_id: usize,
    k_paths: usize,
    stream: &mut Stream,
) -> Result<Episode> {
    let goal_ix = categorical(&profile.preferences, stream);
    let goal = g.goal_set()[goal_ix];
    let n = g.num_nodes();
    for _ in 0..ORIGIN_RETRIES {
        let origin = {
            let mut v = stream.gen_range(0..n - 1);
            if v >= goal {
                v += 1;
            }
            v
        };
        let Ok(paths) = k_shortest_paths(g, origin, goal, k_paths) else {
            continue;
        };
        let lengths: Vec<f64> = paths.iter().map(|p| p.length).collect();
        let weights = path_weights(&lengths, profile.rationality_temperature);
        let chosen = &paths[categorical(&weights, stream)];
        let timestamps = (1..=chosen.nodes.len() as u64).collect();
        return Ok(Episode {
            agent_id: profile.agent_id,
            episode_id,
            origin,
            goal,
            path: chosen.nodes.clone(),
            timestamps,
            split: Split::Train,
        });
    }
    Err(Error::Generation {
        agent: profile.agent_id,
        reason: format!("no reachable origin for goal {goal} after {ORIGIN_RETRIES} retries"),
    })
}

/// Generates the full dataset; per-agent test split is the last ~30% of
/// episode ids.
pub fn generate_dataset(
    g: &SpatialGraph,
    profiles: &[AgentProfile],
    params: &SimParams,
    master_seed: u64,
) -> Result<Dataset> {
    if params.episodes_per_agent == 0 {
        return Err(Error::InvalidInput("episodes_per_agent must be >= 1".into()));
    }
    let n_test = test_count(params.episodes_per_agent);
    let mut episodes = Vec::with_capacity(profiles.len() * params.episodes_per_agent);
    for profile in profiles {
        for episode_id in 0..params.episodes_per_agent {
            let mut stream = rng::stream(
                master_seed,
                "sim/episode",
                &[profile.agent_id as u64, episode_id as u64],
            );
            let mut e = generate_episode(g, profile, episode_id, params.k_paths, &mut stream)?;
            e.split = if episode_id >= params.episodes_per_agent - n_test {
                Split::Test
            } else {
                Split::Train
            };
            episodes.push(e);
        }
    }
    Ok(Dataset {
        graph_hash: g.content_hash(),
        master_seed,
        params: params.clone(),
        episodes,
    })
}

fn test_count(episodes_per_agent: usize) -> usize {
    ((episodes_per_agent as f64) * 0.3).round() as usize
}

/// Redraws preferences until `KL(original || new) > kl_threshold`.
pub fn generate_drifted_profiles(
    profiles: &[AgentProfile],
    kl_threshold: f64,
    dirichlet_alpha: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<Vec<AgentProfile>> {
    profiles
        .iter()
        .map(|profile| {
            let mut stream = rng::stream(seed, "sim/drift", &[profile.agent_id as u64]);
            for _ in 0..max_attempts {
                let candidate = dirichlet_draw(profile.preferences.len(), dirichlet_alpha, &mut stream);
                if kl_divergence(&profile.preferences, &candidate)? > kl_threshold {
                    return Ok(AgentProfile {
                        agent_id: profile.agent_id,
                        preferences: candidate,
                        rationality_temperature: profile.rationality_temperature,
                    });
                }
            }
            Err(Error::DriftInfeasible {
                agent: profile.agent_id,
                threshold: kl_threshold,
                attempts: max_attempts,
            })
        })
        .collect()
}

/// `KL(p || q) = Σ p_i ln(p_i / q_i)` with q clamped at 1e-12 and
/// renormalized, so disjoint supports stay finite.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch(p.len(), q.len()));
    }
    for (name, v) in [("p", p), ("q", q)] {
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || v.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidInput(format!("{name} is not a probability vector")));
        }
    }
    let q_clamped: Vec<f64> = q.iter().map(|&x| x.max(KL_EPSILON)).collect();
    let q_norm: f64 = q_clamped.iter().sum();
    let mut kl = 0.0;
    for (&pi, qi) in p.iter().zip(&q_clamped) {
        if pi > 0.0 {
            kl += pi * (pi / (qi / q_norm)).ln();
        }
    }
    Ok(kl.max(0.0))
}

/// Metadata attached to a synthesized false-goal episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalseGoalMeta {
    /// Node of the least preferred goal.
    pub false_goal: NodeId,
    /// Step index of the path's closest coordinate approach to the false goal.
    pub pass_index: usize,
}

/// Builds an episode that heads to the agent's most preferred goal while
/// passing within `near_radius` of its least preferred goal.
pub fn synthesize_false_goal_episode(
    g: &SpatialGraph,
    profile: &AgentProfile,
    near_radius: f64,
) -> Result<(Episode, FalseGoalMeta)> {
    let true_goal = g.goal_set()[profile.preferred_goal()];
    let false_goal = g.goal_set()[profile.least_preferred_goal()];
    if true_goal == false_goal {
        return Err(Error::InvalidInput(
            "most and least preferred goals coincide".into(),
        ));
    }
    // Waypoint candidates near the false goal, nearest first.
    let mut waypoints: Vec<NodeId> = (0..g.num_nodes())
        .filter(|&v| g.coord_distance(v, false_goal) <= near_radius)
        .collect();
    waypoints.sort_by(|&a, &b| {
        g.coord_distance(a, false_goal)
            .total_cmp(&g.coord_distance(b, false_goal))
            .then(a.cmp(&b))
    });
    for origin in 0..g.num_nodes() {
        if origin == true_goal || origin == false_goal {
            continue;
        }
        let Ok(direct) = shortest_path(g, origin, true_goal) else { continue };
        for &w in &waypoints {
            let Ok(leg_in) = shortest_path(g, origin, w) else { continue };
            let Ok(leg_out) = shortest_path(g, w, true_goal) else { continue };
            let detour = leg_in.length + leg_out.length;
            // keep the trajectory plausible: detour overhead at most 50%
            if detour > 1.5 * direct.length {
                continue;
            }
            let mut path = leg_in.nodes.clone();
            path.extend_from_slice(&leg_out.nodes[1..]);
            if path.len() < 3 {
                continue;
            }
            let pass_index = path
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| {
                    g.coord_distance(a, false_goal)
                        .total_cmp(&g.coord_distance(b, false_goal))
                })
                .map(|(ix, _)| ix)
                .unwrap();
            if pass_index == 0 {
                continue;
            }
            let timestamps = (1..=path.len() as u64).collect();
            let episode = Episode {
                agent_id: profile.agent_id,
                episode_id: 0,
                origin,
                goal: true_goal,
                path,
                timestamps,
                split: Split::Test,
            };
            return Ok((episode, FalseGoalMeta { false_goal, pass_index }));
        }
    }
    Err(Error::FalseGoalSynthesis { false_goal, radius: near_radius })
}

/// First `ceil(fraction * T)` steps (at least one). The goal field is kept as
/// the ground-truth label; inference must not read it.
pub fn truncate(e: &Episode, fraction: f64) -> Episode {
    assert!(
        fraction > 0.0 && fraction <= 1.0,
        "fraction must be in (0, 1], got {fraction}"
    );
    let keep = ((fraction * e.path.len() as f64).ceil() as usize).clamp(1, e.path.len());
    Episode {
        agent_id: e.agent_id,
        episode_id: e.episode_id,
        origin: e.origin,
        goal: e.goal,
        path: e.path[..keep].to_vec(),
        timestamps: e.timestamps[..keep].to_vec(),
        split: e.split,
    }
}

/// Writes the dataset as JSON-lines plus a sidecar header.
pub fn save_dataset(ds: &Dataset, jsonl_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<()> {
    let jsonl_path = jsonl_path.as_ref();
    let file = std::fs::File::create(jsonl_path)
        .map_err(|e| Error::io(jsonl_path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for e in &ds.episodes {
        let line = serde_json::to_string(e)?;
        writeln!(w, "{line}").map_err(|e| Error::io(jsonl_path.display().to_string(), e))?;
    }
    w.flush().map_err(|e| Error::io(jsonl_path.display().to_string(), e))?;
    let header = serde_json::json!({
        "graph_hash": ds.graph_hash,
        "master_seed": ds.master_seed,
        "params": ds.params,
    });
    let header_path = header_path.as_ref();
    std::fs::write(header_path, serde_json::to_string_pretty(&header)?)
        .map_err(|e| Error::io(header_path.display().to_string(), e))
}

pub fn load_dataset(jsonl_path: impl AsRef<Path>, header_path: impl AsRef<Path>) -> Result<Dataset> {
    #[derive(Deserialize)]
    struct Header {
        graph_hash: String,
        master_seed: u64,
        params: SimParams,
    }
    let header_path = header_path.as_ref();
    let header_text = std::fs::read_to_string(header_path)
        .map_err(|e| Error::io(header_path.display().to_string(), e))?;
    let header: Header = serde_json::from_str(&header_text)?;
    let jsonl_path = jsonl_path.as_ref();
    let file = std::fs::File::open(jsonl_path)
        .map_err(|e| Error::io(jsonl_path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut episodes = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(jsonl_path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        episodes.push(serde_json::from_str(&line)?);
    }
    Ok(Dataset {
        graph_hash: header.graph_hash,
        master_seed: header.master_seed,
        params: header.params,
        episodes,
    })
}
