//! Goal-inference baselines: inverse-planning models (Bayesian theory of
//! mind, with and without learned per-agent priors) and learned sequence
//! models (GRU, LSTM, and a ToMNet-style character-conditioned predictor).

use crate::error::{Error, Result};
use crate::graph::{cost_to_go, NodeId, SpatialGraph};
use crate::model::{prefix_samples, GoalPosterior, TrainSample};
use crate::nn::{self, EncoderConfig};
use crate::rng::{self};
use crate::sim::Dataset;
use crate::tensor::{bind_params, init_uniform, Adam, ParamSet, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Default inverse rationality temperature, in units of the graph's mean edge
/// length (so the same value behaves comparably across map scales).
pub const DEFAULT_BTOM_BETA: f64 = 1.0;

/// Common interface: posterior over the goal set from a partial trajectory.
/// `agent_id` lets identity-aware models apply per-agent knowledge; models
/// without it must ignore the argument.
pub trait GoalInferenceModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        agent_id: Option<usize>,
    ) -> Result<GoalPosterior>;

    fn name(&self) -> &'static str;
}

fn check_path(g: &SpatialGraph, path: &[NodeId]) -> Result<()> {
    if path.is_empty() {
        return Err(Error::InvalidInput("cannot infer from an empty trajectory".into()));
    }
    for &v in path {
        g.check_node(v)?;
    }
    Ok(())
}

fn softmax_in_place(log_weights: &mut [f64]) {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // every hypothesis has zero likelihood; fall back to uniform
        let n = log_weights.len() as f64;
        log_weights.iter_mut().for_each(|w| *w = 1.0 / n);
        return;
    }
    let mut sum = 0.0;
    for w in log_weights.iter_mut() {
        *w = (*w - max).exp();
        sum += *w;
    }
    log_weights.iter_mut().for_each(|w| *w /= sum);
}

// ---------------------------------------------------------------------------
// Inverse planning
// ---------------------------------------------------------------------------

/// Bayesian theory-of-mind via inverse planning: each observed step is scored
/// by a Boltzmann policy over the neighbor set, with energies given by
/// edge length plus remaining cost-to-go under the hypothesized goal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BTomModel {
    /// Inverse temperature in mean-edge-length units.
    pub beta: f64,
    /// `cost_tables[k][v]` = shortest distance from `v` to goal `k`.
    cost_tables: Vec<Vec<f64>>,
    mean_edge_length: f64,
    graph_hash: String,
}

impl BTomModel {
    pub fn new(g: &SpatialGraph, beta: f64) -> Result<Self> {
        if beta <= 0.0 || !beta.is_finite() {
            return Err(Error::Config(format!("btom beta must be positive, got {beta}")));
        }
        let cost_tables = g
            .goal_set()
            .iter()
            .map(|&goal| cost_to_go(g, goal))
            .collect::<Result<Vec<_>>>()?;
        Ok(BTomModel {
            beta,
            cost_tables,
            mean_edge_length: g.mean_edge_length(),
            graph_hash: g.content_hash(),
        })
    }

    fn check_graph(&self, g: &SpatialGraph) -> Result<()> {
        if g.content_hash() != self.graph_hash {
            return Err(Error::Data("btom model was built for a different graph".into()));
        }
        Ok(())
    }

    /// Log-likelihood of the observed steps under the Boltzmann policy for
    /// goal index `k`. `NEG_INFINITY` if the goal is unreachable anywhere
    /// along the path.
    fn step_log_likelihood(&self, g: &SpatialGraph, path: &[NodeId], k: usize) -> f64 {
        let table = &self.cost_tables[k];
        let scale = self.beta / self.mean_edge_length;
        let mut total = 0.0;
        for w in path.windows(2) {
            let (v, next) = (w[0], w[1]);
            // energy of each available action: step cost plus cost-to-go
            let mut log_norm_terms: Vec<f64> = Vec::new();
            let mut chosen: Option<f64> = None;
            for &(u, len) in g.neighbors(v) {
                let e = if table[u].is_finite() {
                    -scale * (len + table[u])
                } else {
                    f64::NEG_INFINITY
                };
                if u == next {
                    chosen = Some(e);
                }
                log_norm_terms.push(e);
            }
            let chosen = match chosen {
                Some(c) => c,
                // observed step is not an edge; the hypothesis cannot
                // explain the data
                None => return f64::NEG_INFINITY,
            };
            if !chosen.is_finite() {
                return f64::NEG_INFINITY;
            }
            let max = log_norm_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + log_norm_terms.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
            total += chosen - log_z;
        }
        total
    }

    fn log_likelihoods(&self, g: &SpatialGraph, path: &[NodeId]) -> Vec<f64> {
        (0..self.cost_tables.len())
            .map(|k| self.step_log_likelihood(g, path, k))
            .collect()
    }
}

impl GoalInferenceModel for BTomModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        _agent_id: Option<usize>,
    ) -> Result<GoalPosterior> {
        check_path(g, path)?;
        self.check_graph(g)?;
        let mut log_post = self.log_likelihoods(g, path);
        softmax_in_place(&mut log_post);
        Ok(log_post)
    }

    fn name(&self) -> &'static str {
        "btom"
    }
}

/// BToM extended with per-agent empirical goal priors estimated from the
/// training split (Laplace-smoothed). Unknown agents fall back to the
/// population-level prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtendedBTomModel {
    pub base: BTomModel,
    /// Smoothed log-prior per known agent.
    agent_log_priors: BTreeMap<usize, Vec<f64>>,
    population_log_prior: Vec<f64>,
}

impl ExtendedBTomModel {
    pub fn fit(g: &SpatialGraph, dataset: &Dataset, beta: f64) -> Result<Self> {
        let base = BTomModel::new(g, beta)?;
        let num_goals = g.goal_set().len();
        let mut agent_counts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut population = vec![0.0; num_goals];
        for e in dataset.train() {
            let k = g
                .goal_index(e.goal)
                .ok_or_else(|| Error::Data(format!("episode goal {} not in goal set", e.goal)))?;
            agent_counts
                .entry(e.agent_id)
                .or_insert_with(|| vec![0.0; num_goals])
                [k] += 1.0;
            population[k] += 1.0;
        }
        let to_log_prior = |counts: &[f64]| -> Vec<f64> {
            let total: f64 = counts.iter().sum::<f64>() + counts.len() as f64;
            counts.iter().map(|&c| ((c + 1.0) / total).ln()).collect()
        };
        let agent_log_priors = agent_counts
            .iter()
            .map(|(&a, counts)| (a, to_log_prior(counts)))
            .collect();
        Ok(ExtendedBTomModel {
            base,
            agent_log_priors,
            population_log_prior: to_log_prior(&population),
        })
    }

    fn log_prior(&self, agent_id: Option<usize>) -> &[f64] {
        agent_id
            .and_then(|a| self.agent_log_priors.get(&a))
            .map(|v| v.as_slice())
            .unwrap_or(&self.population_log_prior)
    }
}

impl GoalInferenceModel for ExtendedBTomModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        agent_id: Option<usize>,
    ) -> Result<GoalPosterior> {
        check_path(g, path)?;
        self.base.check_graph(g)?;
        let mut log_post = self.base.log_likelihoods(g, path);
        for (lp, prior) in log_post.iter_mut().zip(self.log_prior(agent_id)) {
            *lp += prior;
        }
        softmax_in_place(&mut log_post);
        Ok(log_post)
    }

    fn name(&self) -> &'static str {
        "extended_btom"
    }
}

// ---------------------------------------------------------------------------
// Recurrent baselines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RnnKind {
    Gru,
    Lstm,
}

impl RnnKind {
    pub fn label(self) -> &'static str {
        match self {
            RnnKind::Gru => "gru",
            RnnKind::Lstm => "lstm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub d_model: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fractions: Vec<f64>,
}

impl Default for RnnConfig {
    fn default() -> Self {
        RnnConfig {
            d_model: 32,
            hidden_dim: 64,
            learning_rate: 2e-3,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            train_fractions: vec![0.25, 0.5, 0.75, 0.95],
        }
    }
}

/// Single-layer recurrent classifier: embed nodes, run the cell over the
/// prefix, map the final hidden state to goal logits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnModel {
    pub kind: RnnKind,
    pub config: RnnConfig,
    pub params: ParamSet,
    pub num_nodes: usize,
    pub num_goals: usize,
    pub graph_hash: String,
}

fn init_gate(params: &mut ParamSet, name: &str, d_in: usize, d_h: usize, stream: &mut crate::rng::Stream) {
    params.insert(format!("{name}_wx"), init_uniform(&[d_in, d_h], d_in, stream));
    params.insert(format!("{name}_wh"), init_uniform(&[d_h, d_h], d_h, stream));
    params.insert(format!("{name}_b"), Tensor::zeros(&[d_h]));
}

fn gate(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    name: &str,
    x: Var,
    h: Var,
) -> Var {
    let xi = tape.matmul(x, vars[&format!("{name}_wx")]);
    let hi = tape.matmul(h, vars[&format!("{name}_wh")]);
    let s = tape.add(xi, hi);
    tape.add(s, vars[&format!("{name}_b")])
}

impl RnnModel {
    pub fn new(g: &SpatialGraph, kind: RnnKind, config: RnnConfig) -> Self {
        let mut params = ParamSet::new();
        let mut stream = rng::stream(config.seed, "rnn/init", &[]);
        let d = config.d_model;
        let h = config.hidden_dim;
        params.insert("embed", init_uniform(&[g.num_nodes(), d], d, &mut stream));
        match kind {
            RnnKind::Gru => {
                for gname in ["gru.z", "gru.r", "gru.c"] {
                    init_gate(&mut params, gname, d, h, &mut stream);
                }
            }
            RnnKind::Lstm => {
                for gname in ["lstm.i", "lstm.f", "lstm.o", "lstm.g"] {
                    init_gate(&mut params, gname, d, h, &mut stream);
                }
            }
        }
        let num_goals = g.goal_set().len();
        params.insert("out_w", init_uniform(&[h, num_goals], h, &mut stream));
        params.insert("out_b", Tensor::zeros(&[num_goals]));
        RnnModel {
            kind,
            config,
            params,
            num_nodes: g.num_nodes(),
            num_goals,
            graph_hash: g.content_hash(),
        }
    }

    /// Runs the recurrence and returns the `(1, num_goals)` logit row.
    fn logits(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        path: &[NodeId],
    ) -> Var {
        let h_dim = self.config.hidden_dim;
        let mut h = tape.constant(Tensor::zeros(&[1, h_dim]));
        let mut c = tape.constant(Tensor::zeros(&[1, h_dim]));
        let embeds = tape.rows(vars["embed"], path);
        for t in 0..path.len() {
            let x = tape.slice(embeds, 0, t, t + 1);
            match self.kind {
                RnnKind::Gru => {
                    let z_pre = gate(tape, vars, "gru.z", x, h);
                    let z = tape.sigmoid(z_pre);
                    let r_pre = gate(tape, vars, "gru.r", x, h);
                    let r = tape.sigmoid(r_pre);
                    let rh = tape.mul(r, h);
                    let c_pre = gate(tape, vars, "gru.c", x, rh);
                    let cand = tape.tanh(c_pre);
                    // h <- (1 - z) * h + z * cand
                    let zh = tape.mul(z, cand);
                    let keep = tape.mul(z, h);
                    let h_minus = tape.sub(h, keep);
                    h = tape.add(h_minus, zh);
                }
                RnnKind::Lstm => {
                    let i_pre = gate(tape, vars, "lstm.i", x, h);
                    let i = tape.sigmoid(i_pre);
                    let f_pre = gate(tape, vars, "lstm.f", x, h);
                    let f = tape.sigmoid(f_pre);
                    let o_pre = gate(tape, vars, "lstm.o", x, h);
                    let o = tape.sigmoid(o_pre);
                    let g_pre = gate(tape, vars, "lstm.g", x, h);
                    let gcell = tape.tanh(g_pre);
                    let fc = tape.mul(f, c);
                    let ig = tape.mul(i, gcell);
                    c = tape.add(fc, ig);
                    let ct = tape.tanh(c);
                    h = tape.mul(o, ct);
                }
            }
        }
        let out = tape.matmul(h, vars["out_w"]);
        tape.add(out, vars["out_b"])
    }

    fn check_graph(&self, g: &SpatialGraph) -> Result<()> {
        if g.content_hash() != self.graph_hash {
            return Err(Error::Data("rnn model was built for a different graph".into()));
        }
        Ok(())
    }
}

impl GoalInferenceModel for RnnModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        _agent_id: Option<usize>,
    ) -> Result<GoalPosterior> {
        check_path(g, path)?;
        self.check_graph(g)?;
        let mut tape = Tape::new();
        let vars: BTreeMap<String, Var> = self
            .params
            .iter()
            .map(|(name, t)| (name.clone(), tape.constant(t.clone())))
            .collect();
        let logits = self.logits(&mut tape, &vars, path);
        let probs = tape.softmax(logits, 1);
        Ok(tape.value(probs).data().to_vec())
    }

    fn name(&self) -> &'static str {
        match self.kind {
            RnnKind::Gru => "gru",
            RnnKind::Lstm => "lstm",
        }
    }
}

/// Cross-entropy minibatch training shared by both recurrent baselines.
pub fn train_rnn(
    dataset: &Dataset,
    g: &SpatialGraph,
    kind: RnnKind,
    config: RnnConfig,
) -> Result<(RnnModel, Vec<f64>)> {
    let episodes: Vec<_> = dataset.train().collect();
    if episodes.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    let mut model = RnnModel::new(g, kind, config);
    let samples = prefix_samples(g, &episodes, &model.config.train_fractions);
    let mut adam = Adam::new(model.config.learning_rate);
    let mut trace = Vec::with_capacity(model.config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..model.config.epochs {
        let mut shuffle = rng::stream(model.config.seed, "rnn/shuffle", &[epoch as u64]);
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_ix, chunk) in order.chunks(model.config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let vars = bind_params(&mut tape, &model.params);
            let rows: Vec<Var> = chunk
                .iter()
                .map(|&i| model.logits(&mut tape, &vars, &samples[i].path))
                .collect();
            let goal_ixs: Vec<usize> = chunk.iter().map(|&i| samples[i].goal_index).collect();
            let logits = tape.concat(&rows, 0);
            let lp = tape.log_softmax(logits, 1);
            let picked = tape.gather_last(lp, &goal_ixs);
            let mean_lp = tape.mean_all(picked);
            let loss = tape.neg(mean_lp);
            let loss_v = tape.value(loss).item();
            if !loss_v.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_ix });
            }
            let grads = tape.backward(loss);
            let mut grad_map = BTreeMap::new();
            for (name, var) in &vars {
                if let Some(gr) = grads.get(*var) {
                    grad_map.insert(name.clone(), gr.clone());
                }
            }
            adam.step(&mut model.params, &grad_map);
            epoch_loss += loss_v;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok((model, trace))
}

// ---------------------------------------------------------------------------
// ToMNet-lite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToMNetConfig {
    pub encoder: EncoderConfig,
    /// Max past episodes averaged into the character embedding.
    pub n_past: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub train_fractions: Vec<f64>,
}

impl Default for ToMNetConfig {
    fn default() -> Self {
        ToMNetConfig {
            encoder: EncoderConfig::default(),
            n_past: 3,
            hidden_dim: 64,
            learning_rate: 1e-3,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            train_fractions: vec![0.25, 0.5, 0.75, 0.95],
        }
    }
}

/// Character-conditioned goal predictor: a character embedding (mean of
/// transformer encodings of the agent's past full episodes, separate
/// parameters from the current-trajectory encoder) is concatenated with the
/// current-prefix encoding and mapped to goal logits. Agents with no past
/// episodes get a zero character vector, which is exactly equivalent to
/// dropping the character branch because the first predictor layer is linear
/// in the concatenated input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToMNetModel {
    pub config: ToMNetConfig,
    pub params: ParamSet,
    /// Full past paths per agent, captured from the training split.
    pub past_paths: BTreeMap<usize, Vec<Vec<NodeId>>>,
    pub num_nodes: usize,
    pub num_goals: usize,
    pub graph_hash: String,
}

impl ToMNetModel {
    pub fn new(g: &SpatialGraph, config: ToMNetConfig) -> Self {
        let mut params = ParamSet::new();
        let mut stream = rng::stream(config.seed, "tomnet/init", &[]);
        nn::init_trajectory_params(&mut params, "cur", &config.encoder, g.num_nodes(), &mut stream);
        nn::init_trajectory_params(&mut params, "char", &config.encoder, g.num_nodes(), &mut stream);
        let d = config.encoder.d_model;
        let num_goals = g.goal_set().len();
        params.insert("pred.w1", init_uniform(&[2 * d, config.hidden_dim], 2 * d, &mut stream));
        params.insert("pred.b1", Tensor::zeros(&[config.hidden_dim]));
        params.insert(
            "pred.w2",
            init_uniform(&[config.hidden_dim, num_goals], config.hidden_dim, &mut stream),
        );
        params.insert("pred.b2", Tensor::zeros(&[num_goals]));
        ToMNetModel {
            config,
            params,
            past_paths: BTreeMap::new(),
            num_nodes: g.num_nodes(),
            num_goals,
            graph_hash: g.content_hash(),
        }
    }

    /// Character embedding for an agent: mean encoding of up to `n_past`
    /// stored episodes, or a zero vector when none exist.
    fn character_embedding(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        agent_id: Option<usize>,
    ) -> Var {
        let d = self.config.encoder.d_model;
        let paths = agent_id.and_then(|a| self.past_paths.get(&a));
        match paths {
            Some(paths) if !paths.is_empty() => {
                let take = paths.len().min(self.config.n_past);
                let encodings: Vec<Var> = paths[..take]
                    .iter()
                    .map(|p| nn::encode_trajectory(tape, vars, "char", &self.config.encoder, p))
                    .collect();
                let mut acc = encodings[0];
                for &e in &encodings[1..] {
                    acc = tape.add(acc, e);
                }
                tape.scale(acc, 1.0 / take as f64)
            }
            _ => tape.constant(Tensor::zeros(&[d])),
        }
    }

    fn logits(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        path: &[NodeId],
        agent_id: Option<usize>,
    ) -> Var {
        let h_cur = nn::encode_trajectory(tape, vars, "cur", &self.config.encoder, path);
        let e_char = self.character_embedding(tape, vars, agent_id);
        let joined = tape.concat(&[e_char, h_cur], 0);
        let in_dim = tape.value(joined).len();
        let row = tape.reshape(joined, vec![1, in_dim]);
        let h = nn::linear(tape, row, vars["pred.w1"], vars["pred.b1"]);
        let h = tape.relu(h);
        nn::linear(tape, h, vars["pred.w2"], vars["pred.b2"])
    }

    fn check_graph(&self, g: &SpatialGraph) -> Result<()> {
        if g.content_hash() != self.graph_hash {
            return Err(Error::Data("tomnet model was built for a different graph".into()));
        }
        Ok(())
    }
}

impl GoalInferenceModel for ToMNetModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        agent_id: Option<usize>,
    ) -> Result<GoalPosterior> {
        check_path(g, path)?;
        self.check_graph(g)?;
        let mut tape = Tape::new();
        let vars: BTreeMap<String, Var> = self
            .params
            .iter()
            .map(|(name, t)| (name.clone(), tape.constant(t.clone())))
            .collect();
        let logits = self.logits(&mut tape, &vars, path, agent_id);
        let probs = tape.softmax(logits, 1);
        Ok(tape.value(probs).data().to_vec())
    }

    fn name(&self) -> &'static str {
        "tomnet"
    }
}

/// Trains ToMNet-lite: past paths are held out from the prediction targets
/// (an agent's stored episodes are its earliest train episodes, predictions
/// are trained on the rest), so the character embedding summarizes history
/// rather than leaking the current label.
pub fn train_tomnet(
    dataset: &Dataset,
    g: &SpatialGraph,
    config: ToMNetConfig,
) -> Result<(ToMNetModel, Vec<f64>)> {
    let episodes: Vec<_> = dataset.train().collect();
    if episodes.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    let mut model = ToMNetModel::new(g, config);
    // earliest n_past episodes per agent become that agent's character set
    let mut prediction_episodes = Vec::new();
    for e in &episodes {
        let past = model.past_paths.entry(e.agent_id).or_default();
        if past.len() < model.config.n_past {
            past.push(e.path.clone());
        } else {
            prediction_episodes.push(*e);
        }
    }
    if prediction_episodes.is_empty() {
        return Err(Error::Data(
            "all train episodes were consumed as character history; need more episodes per agent"
                .into(),
        ));
    }
    let samples = prefix_samples(g, &prediction_episodes, &model.config.train_fractions);
    let mut adam = Adam::new(model.config.learning_rate);
    let mut trace = Vec::with_capacity(model.config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..model.config.epochs {
        let mut shuffle = rng::stream(model.config.seed, "tomnet/shuffle", &[epoch as u64]);
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_ix, chunk) in order.chunks(model.config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let vars = bind_params(&mut tape, &model.params);
            // character embeddings are shared across a batch's samples of the
            // same agent to avoid redundant encoding
            let mut char_cache: BTreeMap<usize, Var> = BTreeMap::new();
            let mut rows = Vec::with_capacity(chunk.len());
            let mut goal_ixs = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let s: &TrainSample = &samples[i];
                let e_char = match char_cache.get(&s.agent_id) {
                    Some(&v) => v,
                    None => {
                        let v = model.character_embedding(&mut tape, &vars, Some(s.agent_id));
                        char_cache.insert(s.agent_id, v);
                        v
                    }
                };
                let h_cur =
                    nn::encode_trajectory(&mut tape, &vars, "cur", &model.config.encoder, &s.path);
                let joined = tape.concat(&[e_char, h_cur], 0);
                let in_dim = tape.value(joined).len();
                let row = tape.reshape(joined, vec![1, in_dim]);
                let h = nn::linear(&mut tape, row, vars["pred.w1"], vars["pred.b1"]);
                let h = tape.relu(h);
                rows.push(nn::linear(&mut tape, h, vars["pred.w2"], vars["pred.b2"]));
                goal_ixs.push(s.goal_index);
            }
            let logits = tape.concat(&rows, 0);
            let lp = tape.log_softmax(logits, 1);
            let picked = tape.gather_last(lp, &goal_ixs);
            let mean_lp = tape.mean_all(picked);
            let loss = tape.neg(mean_lp);
            let loss_v = tape.value(loss).item();
            if !loss_v.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_ix });
            }
            let grads = tape.backward(loss);
            let mut grad_map = BTreeMap::new();
            for (name, var) in &vars {
                if let Some(gr) = grads.get(*var) {
                    grad_map.insert(name.clone(), gr.clone());
                }
            }
            adam.step(&mut model.params, &grad_map);
            epoch_loss += loss_v;
            batches += 1;
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok((model, trace))
}
