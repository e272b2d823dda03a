//! The hierarchical belief-desire-intention VAE: sequential latent levels
//! conditioned on the fused trajectory/graph encoding, a goal predictor over
//! the concatenated mental states, the composite loss, and the training loop.

use crate::error::{Error, Result};
use crate::graph::{NodeId, SpatialGraph};
use crate::nn::{self, EncoderConfig};
use crate::rng::{self, Stream};
use crate::sim::{truncate, Dataset, Episode};
use crate::tensor::{
    bind_params, gaussian_kl, init_uniform, reparameterize, Adam, ParamSet, Tape, Tensor, Var,
};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Normalized probability vector over the graph's goal set.
pub type GoalPosterior = Vec<f64>;

pub const LEVEL_NAMES: [&str; 3] = ["belief", "desire", "intention"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    /// Latent dimensions for (belief, desire, intention).
    pub latent_dims: [usize; 3],
    /// 1 = belief only, 2 = belief+desire, 3 = full hierarchy.
    pub num_levels: usize,
    pub beta_kl: f64,
    pub beta_recon: f64,
    pub learning_rate: f64,
    /// Decoupled weight decay (AdamW); 0 disables it.
    #[serde(default)]
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub kl_warmup_epochs: usize,
    /// Epochs during which the trajectory-transformer parameters (node
    /// embedding table + attention blocks) stay frozen. The sequence branch
    /// can memorize episode-specific token bags much faster than the graph
    /// branch learns transferable spatial structure; letting the graph path
    /// converge first prevents that shortcut from starving it.
    #[serde(default)]
    pub traj_freeze_epochs: usize,
    /// Hidden width of level encoders, decoders, and the goal predictor.
    pub hidden_dim: usize,
    /// Observation fractions each training episode contributes as prefixes.
    pub train_fractions: Vec<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            latent_dims: [16, 16, 16],
            num_levels: 3,
            beta_kl: 0.1,
            beta_recon: 0.5,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            epochs: 40,
            batch_size: 32,
            seed: 0,
            kl_warmup_epochs: 5,
            traj_freeze_epochs: 0,
            hidden_dim: 64,
            train_fractions: vec![0.25, 0.5, 0.75, 0.95],
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.num_levels) {
            return Err(Error::Config(format!(
                "num_levels must be 1, 2, or 3, got {}",
                self.num_levels
            )));
        }
        if self.latent_dims.iter().any(|&d| d == 0) || self.hidden_dim == 0 {
            return Err(Error::Config("latent and hidden dims must be >= 1".into()));
        }
        if self.beta_kl < 0.0 || self.beta_recon < 0.0 {
            return Err(Error::Config("beta coefficients must be >= 0".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be >= 0".into()));
        }
        if self.train_fractions.iter().any(|&f| !(0.0 < f && f <= 1.0)) {
            return Err(Error::Config("train fractions must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn latent_input_dim(&self, level: usize) -> usize {
        self.encoder.d_fused + self.latent_dims[..level].iter().sum::<usize>()
    }

    fn predictor_input_dim(&self) -> usize {
        self.latent_dims[..self.num_levels].iter().sum()
    }
}

/// Per-level `(mu, logvar, z)` values from one inference pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub mu: Vec<Tensor>,
    pub logvar: Vec<Tensor>,
    pub z: Vec<Tensor>,
}

/// Loss components of one batch; `total` satisfies
/// `goal_ce + beta_kl * kl_sum + beta_recon * recon_sum` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub goal_ce: f64,
    pub kl_per_level: Vec<f64>,
    pub kl_sum: f64,
    pub recon_per_level: Vec<f64>,
    pub recon_sum: f64,
    pub beta_kl_used: f64,
    pub beta_recon_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub total: f64,
    pub goal_ce: f64,
    pub kl_sum: f64,
    pub recon_sum: f64,
}

/// One training example: an observed prefix plus its hidden goal label.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub agent_id: usize,
    pub path: Vec<NodeId>,
    pub goal_index: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HiVaeModel {
    pub config: ModelConfig,
    pub params: ParamSet,
    pub num_nodes: usize,
    pub num_goals: usize,
    pub graph_hash: String,
}

struct LevelVars {
    mu: Var,
    logvar: Var,
    z: Var,
}

/// How latent samples are drawn during a forward pass.
pub enum LatentMode<'a> {
    /// Reparameterized sampling (training).
    Sample(&'a mut Stream),
    /// `z = mu` (evaluation).
    Deterministic,
}

impl HiVaeModel {
    pub fn new(g: &SpatialGraph, config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut params = ParamSet::new();
        let mut stream = rng::stream(config.seed, "model/init", &[]);
        nn::init_encoder_params(&mut params, "enc", &config.encoder, g.num_nodes(), &mut stream);
        for level in 0..config.num_levels {
            let z_dim = config.latent_dims[level];
            let in_dim = config.latent_input_dim(level);
            let h = config.hidden_dim;
            params.insert(
                format!("lvl{level}.enc_w1"),
                init_uniform(&[in_dim, h], in_dim, &mut stream),
            );
            params.insert(format!("lvl{level}.enc_b1"), Tensor::zeros(&[h]));
            params.insert(
                format!("lvl{level}.enc_w2"),
                init_uniform(&[h, 2 * z_dim], h, &mut stream),
            );
            // start the posterior sharp (sigma ~ e^-2) so early training is
            // not drowned in latent noise
            let mut enc_b2 = vec![0.0; 2 * z_dim];
            enc_b2[z_dim..].fill(-2.0);
            params.insert(format!("lvl{level}.enc_b2"), Tensor::new(vec![2 * z_dim], enc_b2));
            if level > 0 {
                let parent_dim: usize = config.latent_dims[..level].iter().sum();
                params.insert(
                    format!("lvl{level}.prior_w"),
                    init_uniform(&[parent_dim, 2 * z_dim], parent_dim, &mut stream),
                );
                params.insert(format!("lvl{level}.prior_b"), Tensor::zeros(&[2 * z_dim]));
            }
            params.insert(
                format!("lvl{level}.dec_w1"),
                init_uniform(&[z_dim, h], z_dim, &mut stream),
            );
            params.insert(format!("lvl{level}.dec_b1"), Tensor::zeros(&[h]));
            params.insert(
                format!("lvl{level}.dec_w2"),
                init_uniform(&[h, config.encoder.d_fused], h, &mut stream),
            );
            params.insert(format!("lvl{level}.dec_b2"), Tensor::zeros(&[config.encoder.d_fused]));
        }
        let pred_in = config.predictor_input_dim();
        let num_goals = g.goal_set().len();
        params.insert(
            "pred.w1",
            init_uniform(&[pred_in, config.hidden_dim], pred_in, &mut stream),
        );
        params.insert("pred.b1", Tensor::zeros(&[config.hidden_dim]));
        params.insert(
            "pred.w2",
            init_uniform(&[config.hidden_dim, num_goals], config.hidden_dim, &mut stream),
        );
        params.insert("pred.b2", Tensor::zeros(&[num_goals]));
        Ok(HiVaeModel {
            config,
            params,
            num_nodes: g.num_nodes(),
            num_goals,
            graph_hash: g.content_hash(),
        })
    }

    fn infer_levels(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        h_fused: Var,
        mode: &mut LatentMode,
    ) -> Vec<LevelVars> {
        let mut levels: Vec<LevelVars> = Vec::with_capacity(self.config.num_levels);
        for level in 0..self.config.num_levels {
            let mut inputs = vec![h_fused];
            inputs.extend(levels.iter().map(|l| l.z));
            let joined = tape.concat(&inputs, 0);
            let in_dim = tape.value(joined).len();
            let row = tape.reshape(joined, vec![1, in_dim]);
            let h = nn::linear(tape, row, vars[&format!("lvl{level}.enc_w1")], vars[&format!("lvl{level}.enc_b1")]);
            let h = tape.relu(h);
            let out = nn::linear(tape, h, vars[&format!("lvl{level}.enc_w2")], vars[&format!("lvl{level}.enc_b2")]);
            let z_dim = self.config.latent_dims[level];
            let mu_row = tape.slice(out, 1, 0, z_dim);
            let logvar_row = tape.slice(out, 1, z_dim, 2 * z_dim);
            let mu = tape.reshape(mu_row, vec![z_dim]);
            let logvar = tape.reshape(logvar_row, vec![z_dim]);
            let z = match mode {
                LatentMode::Sample(stream) => reparameterize(tape, mu, logvar, stream),
                LatentMode::Deterministic => mu,
            };
            levels.push(LevelVars { mu, logvar, z });
        }
        levels
    }

    fn predict_logits(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        levels: &[LevelVars],
    ) -> Var {
        let zs: Vec<Var> = levels.iter().map(|l| l.z).collect();
        let joined = tape.concat(&zs, 0);
        let in_dim = tape.value(joined).len();
        let row = tape.reshape(joined, vec![1, in_dim]);
        let h = nn::linear(tape, row, vars["pred.w1"], vars["pred.b1"]);
        let h = tape.relu(h);
        nn::linear(tape, h, vars["pred.w2"], vars["pred.b2"])
    }

    /// Per-level KL against the hierarchical prior: standard normal at the
    /// belief level, learned linear-Gaussian conditionals above it.
    fn level_kls(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        levels: &[LevelVars],
    ) -> Vec<Var> {
        let mut kls = Vec::with_capacity(levels.len());
        for (level, lv) in levels.iter().enumerate() {
            let z_dim = self.config.latent_dims[level];
            let (mu_p, logvar_p) = if level == 0 {
                let zero_mu = tape.constant(Tensor::zeros(&[z_dim]));
                let zero_lv = tape.constant(Tensor::zeros(&[z_dim]));
                (zero_mu, zero_lv)
            } else {
                let parents: Vec<Var> = levels[..level].iter().map(|l| l.z).collect();
                let joined = tape.concat(&parents, 0);
                let in_dim = tape.value(joined).len();
                let row = tape.reshape(joined, vec![1, in_dim]);
                let out = nn::linear(
                    tape,
                    row,
                    vars[&format!("lvl{level}.prior_w")],
                    vars[&format!("lvl{level}.prior_b")],
                );
                let mu_row = tape.slice(out, 1, 0, z_dim);
                let lv_row = tape.slice(out, 1, z_dim, 2 * z_dim);
                (tape.reshape(mu_row, vec![z_dim]), tape.reshape(lv_row, vec![z_dim]))
            };
            kls.push(gaussian_kl(tape, lv.mu, lv.logvar, mu_p, logvar_p));
        }
        kls
    }

    /// Per-level reconstruction of the fused encoding from the latent sample.
    /// The target is detached so the encoder is not pulled toward its own
    /// reconstruction.
    fn level_recons(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        levels: &[LevelVars],
        h_fused: Var,
    ) -> Vec<Var> {
        let target = tape.constant(tape.value(h_fused).clone());
        let d_fused = self.config.encoder.d_fused;
        levels
            .iter()
            .enumerate()
            .map(|(level, lv)| {
                let z_dim = self.config.latent_dims[level];
                let row = tape.reshape(lv.z, vec![1, z_dim]);
                let h = nn::linear(tape, row, vars[&format!("lvl{level}.dec_w1")], vars[&format!("lvl{level}.dec_b1")]);
                let h = tape.relu(h);
                let out = nn::linear(tape, h, vars[&format!("lvl{level}.dec_w2")], vars[&format!("lvl{level}.dec_b2")]);
                let flat = tape.reshape(out, vec![d_fused]);
                let diff = tape.sub(flat, target);
                let sq = tape.square(diff);
                tape.mean_all(sq)
            })
            .collect()
    }

    /// Full composite loss over a batch. `noise_seed` pins the latent noise,
    /// making the loss a deterministic function of the parameters.
    pub fn forward_loss(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        batch: &[TrainSample],
        beta_kl_eff: f64,
        noise_seed: (u64, u64),
        mask: &Tensor,
    ) -> Result<(Var, LossBreakdown)> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut stream = rng::stream(self.config.seed, "model/noise", &[noise_seed.0, noise_seed.1]);
        let mask_var = tape.constant(mask.clone());
        let gat_out = nn::gat_stack(tape, vars, "enc", &self.config.encoder, mask_var);

        let n_levels = self.config.num_levels;
        let mut logit_rows = Vec::with_capacity(batch.len());
        let mut goal_ixs = Vec::with_capacity(batch.len());
        let mut kl_acc: Vec<Option<Var>> = vec![None; n_levels];
        let mut recon_acc: Vec<Option<Var>> = vec![None; n_levels];
        for sample in batch {
            let h_traj = nn::encode_trajectory(tape, vars, "enc", &self.config.encoder, &sample.path);
            let h_graph = nn::pool_graph(tape, gat_out, &sample.path);
            let h_fused = nn::fuse(tape, vars, "enc", h_traj, h_graph);
            let mut mode = LatentMode::Sample(&mut stream);
            let levels = self.infer_levels(tape, vars, h_fused, &mut mode);
            logit_rows.push(self.predict_logits(tape, vars, &levels));
            goal_ixs.push(sample.goal_index);
            for (l, kl) in self.level_kls(tape, vars, &levels).into_iter().enumerate() {
                kl_acc[l] = Some(match kl_acc[l] {
                    Some(acc) => tape.add(acc, kl),
                    None => kl,
                });
            }
            for (l, rc) in self
                .level_recons(tape, vars, &levels, h_fused)
                .into_iter()
                .enumerate()
            {
                recon_acc[l] = Some(match recon_acc[l] {
                    Some(acc) => tape.add(acc, rc),
                    None => rc,
                });
            }
        }
        let b = batch.len() as f64;
        let logits = tape.concat(&logit_rows, 0);
        let log_probs = tape.log_softmax(logits, 1);
        let picked = tape.gather_last(log_probs, &goal_ixs);
        let mean_lp = tape.mean_all(picked);
        let goal_ce = tape.neg(mean_lp);

        let mut kl_levels_v = Vec::new();
        let mut kl_sum_var: Option<Var> = None;
        for acc in kl_acc.into_iter().flatten() {
            let mean = tape.scale(acc, 1.0 / b);
            kl_levels_v.push(mean);
            kl_sum_var = Some(match kl_sum_var {
                Some(s) => tape.add(s, mean),
                None => mean,
            });
        }
        let mut recon_levels_v = Vec::new();
        let mut recon_sum_var: Option<Var> = None;
        for acc in recon_acc.into_iter().flatten() {
            let mean = tape.scale(acc, 1.0 / b);
            recon_levels_v.push(mean);
            recon_sum_var = Some(match recon_sum_var {
                Some(s) => tape.add(s, mean),
                None => mean,
            });
        }
        let kl_sum = kl_sum_var.expect("at least one level");
        let recon_sum = recon_sum_var.expect("at least one level");
        let kl_term = tape.scale(kl_sum, beta_kl_eff);
        let recon_term = tape.scale(recon_sum, self.config.beta_recon);
        let total = tape.add(goal_ce, kl_term);
        let total = tape.add(total, recon_term);

        let breakdown = LossBreakdown {
            total: tape.value(total).item(),
            goal_ce: tape.value(goal_ce).item(),
            kl_per_level: kl_levels_v.iter().map(|&v| tape.value(v).item()).collect(),
            kl_sum: tape.value(kl_sum).item(),
            recon_per_level: recon_levels_v.iter().map(|&v| tape.value(v).item()).collect(),
            recon_sum: tape.value(recon_sum).item(),
            beta_kl_used: beta_kl_eff,
            beta_recon_used: self.config.beta_recon,
        };
        Ok((total, breakdown))
    }

    /// Evaluation-mode latent inference (deterministic, `z = mu`).
    pub fn infer_mind_states(&self, g: &SpatialGraph, path: &[NodeId]) -> Result<LatentState> {
        let mut tape = Tape::new();
        let vars = self.bind_frozen(&mut tape);
        let h_fused = self.fused_encoding(&mut tape, &vars, g, path)?;
        let levels = self.infer_levels(&mut tape, &vars, h_fused, &mut LatentMode::Deterministic);
        Ok(LatentState {
            mu: levels.iter().map(|l| tape.value(l.mu).clone()).collect(),
            logvar: levels.iter().map(|l| tape.value(l.logvar).clone()).collect(),
            z: levels.iter().map(|l| tape.value(l.z).clone()).collect(),
        })
    }

    fn bind_frozen(&self, tape: &mut Tape) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(name, tensor)| (name.clone(), tape.constant(tensor.clone())))
            .collect()
    }

    fn fused_encoding(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        g: &SpatialGraph,
        path: &[NodeId],
    ) -> Result<Var> {
        if path.is_empty() {
            return Err(Error::InvalidInput("cannot infer from an empty trajectory".into()));
        }
        for &v in path {
            g.check_node(v)?;
        }
        let mask = tape.constant(nn::attention_mask(g, self.config.encoder.gat_self_loops));
        let gat_out = nn::gat_stack(tape, vars, "enc", &self.config.encoder, mask);
        let h_traj = nn::encode_trajectory(tape, vars, "enc", &self.config.encoder, path);
        let h_graph = nn::pool_graph(tape, gat_out, path);
        Ok(nn::fuse(tape, vars, "enc", h_traj, h_graph))
    }

    /// Full deterministic inference pipeline: partial trajectory to goal
    /// posterior.
    pub fn infer(&self, g: &SpatialGraph, path: &[NodeId]) -> Result<GoalPosterior> {
        let mut tape = Tape::new();
        let vars = self.bind_frozen(&mut tape);
        let h_fused = self.fused_encoding(&mut tape, &vars, g, path)?;
        let levels = self.infer_levels(&mut tape, &vars, h_fused, &mut LatentMode::Deterministic);
        let logits = self.predict_logits(&mut tape, &vars, &levels);
        let probs = tape.softmax(logits, 1);
        Ok(tape.value(probs).data().to_vec())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>, g: &SpatialGraph) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: HiVaeModel = serde_json::from_str(&text)?;
        if model.num_goals != g.goal_set().len() {
            return Err(Error::Data(format!(
                "checkpoint expects {} goals but graph has {}",
                model.num_goals,
                g.goal_set().len()
            )));
        }
        if model.num_nodes != g.num_nodes() {
            return Err(Error::Data(format!(
                "checkpoint expects {} nodes but graph has {}",
                model.num_nodes,
                g.num_nodes()
            )));
        }
        Ok(model)
    }
}

impl crate::baselines::GoalInferenceModel for HiVaeModel {
    fn infer_goal(
        &self,
        g: &SpatialGraph,
        path: &[NodeId],
        _agent_id: Option<usize>,
    ) -> Result<GoalPosterior> {
        if g.content_hash() != self.graph_hash {
            return Err(Error::Data("hivae model was built for a different graph".into()));
        }
        self.infer(g, path)
    }

    fn name(&self) -> &'static str {
        "hivae"
    }
}

/// Expands episodes into prefix samples at the configured fractions.
pub fn prefix_samples(
    g: &SpatialGraph,
    episodes: &[&Episode],
    fractions: &[f64],
) -> Vec<TrainSample> {
    let mut samples = Vec::with_capacity(episodes.len() * fractions.len());
    for e in episodes {
        let goal_index = g
            .goal_index(e.goal)
            .expect("episode goals are members of the goal set");
        for &f in fractions {
            let prefix = truncate(e, f);
            samples.push(TrainSample {
                agent_id: e.agent_id,
                path: prefix.path,
                goal_index,
            });
        }
    }
    samples
}

/// Minibatch Adam training with linear KL warmup.
pub fn train(dataset: &Dataset, g: &SpatialGraph, config: ModelConfig) -> Result<(HiVaeModel, Vec<EpochStats>)> {
    let train_episodes: Vec<&Episode> = dataset.train().collect();
    if train_episodes.is_empty() {
        return Err(Error::Data("train split is empty".into()));
    }
    let mut model = HiVaeModel::new(g, config)?;
    let samples = prefix_samples(g, &train_episodes, &model.config.train_fractions);
    let mask = nn::attention_mask(g, model.config.encoder.gat_self_loops);
    let mut adam =
        Adam::with_weight_decay(model.config.learning_rate, model.config.weight_decay);
    let mut trace = Vec::with_capacity(model.config.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..model.config.epochs {
        let mut shuffle_stream = rng::stream(model.config.seed, "model/shuffle", &[epoch as u64]);
        order.shuffle(&mut shuffle_stream);
        let warmup = model.config.kl_warmup_epochs;
        let beta_kl_eff = if warmup == 0 {
            model.config.beta_kl
        } else {
            model.config.beta_kl * (((epoch + 1) as f64) / warmup as f64).min(1.0)
        };
        let mut sums = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for (batch_ix, chunk) in order.chunks(model.config.batch_size).enumerate() {
            let batch: Vec<TrainSample> = chunk.iter().map(|&i| samples[i].clone()).collect();
            let mut tape = Tape::new();
            let vars = bind_params(&mut tape, &model.params);
            let (total, breakdown) = model.forward_loss(
                &mut tape,
                &vars,
                &batch,
                beta_kl_eff,
                (epoch as u64, batch_ix as u64),
                &mask,
            )?;
            if !breakdown.total.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_ix });
            }
            let grads = tape.backward(total);
            let freeze_traj = epoch < model.config.traj_freeze_epochs;
            let mut grad_map = BTreeMap::new();
            for (name, var) in &vars {
                if freeze_traj && (name == "enc.node_embed" || name.starts_with("enc.block")) {
                    continue;
                }
                if let Some(gr) = grads.get(*var) {
                    grad_map.insert(name.clone(), gr.clone());
                }
            }
            adam.step(&mut model.params, &grad_map);
            sums.0 += breakdown.total;
            sums.1 += breakdown.goal_ce;
            sums.2 += breakdown.kl_sum;
            sums.3 += breakdown.recon_sum;
            batches += 1;
        }
        let b = batches as f64;
        trace.push(EpochStats {
            epoch,
            total: sums.0 / b,
            goal_ce: sums.1 / b,
            kl_sum: sums.2 / b,
            recon_sum: sums.3 / b,
        });
    }
    Ok((model, trace))
}
