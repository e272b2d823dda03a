//! Neural building blocks: node embeddings, sinusoidal time encoding, a
//! transformer trajectory encoder, graph attention layers, and the fusion MLP.
//!
//! Parameters live in a flat [`ParamSet`] under a caller-chosen prefix, so
//! several models can host their own copies of the same blocks. All functions
//! operate on a [`Tape`] and pre-bound parameter vars.

use crate::graph::{NodeId, SpatialGraph};
use crate::rng::Stream;
use crate::tensor::{init_uniform, ParamSet, Tape, Tensor, Var};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const LN_EPS: f64 = 1e-5;
const MASKED: f64 = -1e30;
/// Geometric weight ratio for the recency-weighted context pool in
/// [`pool_graph`]: step `t-k` gets weight proportional to `RECENCY_DECAY^k`.
pub const RECENCY_DECAY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub d_fused: usize,
    pub num_heads: usize,
    pub num_blocks: usize,
    pub ff_dim: usize,
    pub gat_layers: usize,
    pub gat_self_loops: bool,
    pub leaky_slope: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            d_fused: 64,
            num_heads: 4,
            num_blocks: 2,
            ff_dim: 128,
            gat_layers: 2,
            gat_self_loops: true,
            leaky_slope: 0.2,
        }
    }
}

impl EncoderConfig {
    pub fn head_dim(&self) -> usize {
        assert!(
            self.d_model % self.num_heads == 0,
            "d_model {} not divisible by {} heads",
            self.d_model,
            self.num_heads
        );
        self.d_model / self.num_heads
    }
}

/// Sinusoidal time encoding for step `t` (interleaved sin/cos).
pub fn time_embed(t: u64, dim: usize) -> Vec<f64> {
    assert!(dim % 2 == 0, "time embedding dim must be even, got {dim}");
    let mut out = vec![0.0; dim];
    for i in 0..dim / 2 {
        let rate = 10000f64.powf(2.0 * i as f64 / dim as f64);
        out[2 * i] = (t as f64 / rate).sin();
        out[2 * i + 1] = (t as f64 / rate).cos();
    }
    out
}

/// `(T, dim)` matrix of time encodings for steps `1..=len`.
pub fn time_embed_matrix(len: usize, dim: usize) -> Tensor {
    let mut data = Vec::with_capacity(len * dim);
    for t in 1..=len as u64 {
        data.extend(time_embed(t, dim));
    }
    Tensor::new(vec![len, dim], data)
}

/// Registers all trajectory/graph encoder parameters under `prefix`.
/// Initializes only the trajectory-transformer parameters (node embedding
/// table plus attention blocks) under `prefix`.
pub fn init_trajectory_params(
    params: &mut ParamSet,
    prefix: &str,
    cfg: &EncoderConfig,
    num_nodes: usize,
    stream: &mut Stream,
) {
    let d = cfg.d_model;
    params.insert(
        format!("{prefix}.node_embed"),
        init_uniform(&[num_nodes, d], d, stream),
    );
    for b in 0..cfg.num_blocks {
        for name in ["wq", "wk", "wv", "wo"] {
            params.insert(
                format!("{prefix}.block{b}.{name}"),
                init_uniform(&[d, d], d, stream),
            );
        }
        params.insert(
            format!("{prefix}.block{b}.ff_w1"),
            init_uniform(&[d, cfg.ff_dim], d, stream),
        );
        params.insert(format!("{prefix}.block{b}.ff_b1"), Tensor::zeros(&[cfg.ff_dim]));
        params.insert(
            format!("{prefix}.block{b}.ff_w2"),
            init_uniform(&[cfg.ff_dim, d], cfg.ff_dim, stream),
        );
        params.insert(format!("{prefix}.block{b}.ff_b2"), Tensor::zeros(&[d]));
        for ln in ["ln1", "ln2"] {
            params.insert(format!("{prefix}.block{b}.{ln}_g"), Tensor::filled(&[d], 1.0));
            params.insert(format!("{prefix}.block{b}.{ln}_b"), Tensor::zeros(&[d]));
        }
    }
}

/// Initializes the full encoder parameter family: trajectory transformer,
/// graph attention stack, and the fusion head.
pub fn init_encoder_params(
    params: &mut ParamSet,
    prefix: &str,
    cfg: &EncoderConfig,
    num_nodes: usize,
    stream: &mut Stream,
) {
    let d = cfg.d_model;
    init_trajectory_params(params, prefix, cfg, num_nodes, stream);
    params.insert(
        format!("{prefix}.graph_embed"),
        init_uniform(&[num_nodes, d], d, stream),
    );
    for l in 0..cfg.gat_layers {
        params.insert(format!("{prefix}.gat{l}.w"), init_uniform(&[d, d], d, stream));
        params.insert(format!("{prefix}.gat{l}.a_src"), init_uniform(&[d, 1], 2 * d, stream));
        params.insert(format!("{prefix}.gat{l}.a_dst"), init_uniform(&[d, 1], 2 * d, stream));
    }
    params.insert(
        format!("{prefix}.fuse.w1"),
        init_uniform(&[2 * d, cfg.d_fused], 2 * d, stream),
    );
    params.insert(format!("{prefix}.fuse.b1"), Tensor::zeros(&[cfg.d_fused]));
    params.insert(
        format!("{prefix}.fuse.w2"),
        init_uniform(&[cfg.d_fused, cfg.d_fused], cfg.d_fused, stream),
    );
    params.insert(format!("{prefix}.fuse.b2"), Tensor::zeros(&[cfg.d_fused]));
}

fn layer_norm_affine(
    tape: &mut Tape,
    x: Var,
    gain: Var,
    bias: Var,
) -> Var {
    let normed = tape.layer_norm(x, LN_EPS);
    let scaled = tape.mul(normed, gain);
    tape.add(scaled, bias)
}

fn transformer_block(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    key: &str,
    cfg: &EncoderConfig,
    x: Var,
) -> Var {
    let dh = cfg.head_dim();
    let q = tape.matmul(x, vars[&format!("{key}.wq")]);
    let k = tape.matmul(x, vars[&format!("{key}.wk")]);
    let v = tape.matmul(x, vars[&format!("{key}.wv")]);
    let mut heads = Vec::with_capacity(cfg.num_heads);
    for h in 0..cfg.num_heads {
        let (lo, hi) = (h * dh, (h + 1) * dh);
        let qh = tape.slice(q, 1, lo, hi);
        let kh = tape.slice(k, 1, lo, hi);
        let vh = tape.slice(v, 1, lo, hi);
        let kt = tape.transpose(kh);
        let scores = tape.matmul(qh, kt);
        let scaled = tape.scale(scores, 1.0 / (dh as f64).sqrt());
        let attn = tape.softmax(scaled, 1);
        heads.push(tape.matmul(attn, vh));
    }
    let merged = tape.concat(&heads, 1);
    let projected = tape.matmul(merged, vars[&format!("{key}.wo")]);
    let residual = tape.add(x, projected);
    let x1 = layer_norm_affine(
        tape,
        residual,
        vars[&format!("{key}.ln1_g")],
        vars[&format!("{key}.ln1_b")],
    );
    let h1 = tape.matmul(x1, vars[&format!("{key}.ff_w1")]);
    let h1 = tape.add(h1, vars[&format!("{key}.ff_b1")]);
    let h1 = tape.relu(h1);
    let h2 = tape.matmul(h1, vars[&format!("{key}.ff_w2")]);
    let h2 = tape.add(h2, vars[&format!("{key}.ff_b2")]);
    let residual2 = tape.add(x1, h2);
    layer_norm_affine(
        tape,
        residual2,
        vars[&format!("{key}.ln2_g")],
        vars[&format!("{key}.ln2_b")],
    )
}

/// Mean-pooled transformer encoding of a node path: per-step inputs are
/// `Embed(v_t) + TimeEmbed(t)`.
pub fn encode_trajectory(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &EncoderConfig,
    path: &[NodeId],
) -> Var {
    assert!(!path.is_empty(), "cannot encode an empty path");
    let embed = tape.rows(vars[&format!("{prefix}.node_embed")], path);
    let times = tape.constant(time_embed_matrix(path.len(), cfg.d_model));
    let mut x = tape.add(embed, times);
    for b in 0..cfg.num_blocks {
        x = transformer_block(tape, vars, &format!("{prefix}.block{b}"), cfg, x);
    }
    let pooled = tape.mean_axis(x, 0);
    pooled
}

/// Dense `(|V|, |V|)` attention mask: 0 where `j` is attendable from `i`,
/// a large negative constant elsewhere.
pub fn attention_mask(g: &SpatialGraph, self_loops: bool) -> Tensor {
    let n = g.num_nodes();
    let mut data = vec![MASKED; n * n];
    for i in 0..n {
        if self_loops {
            data[i * n + i] = 0.0;
        }
        for &(j, _) in g.neighbors(i) {
            data[i * n + j] = 0.0;
        }
    }
    Tensor::new(vec![n, n], data)
}

/// One graph-attention layer:
/// `out_i = Σ_j α_ij W h_j` with
/// `α_ij ∝ exp(LeakyReLU(a^T [W h_i ‖ W h_j]))` normalized over the
/// attendable set of `i`.
pub fn gat_layer(
    tape: &mut Tape,
    features: Var,
    w: Var,
    a_src: Var,
    a_dst: Var,
    leaky_slope: f64,
    mask: Var,
) -> Var {
    let n = tape.value(features).shape()[0];
    let wh = tape.matmul(features, w);
    let s_src = tape.matmul(wh, a_src); // (n, 1)
    let s_dst = tape.matmul(wh, a_dst); // (n, 1)
    let s_dst_row = tape.reshape(s_dst, vec![n]); // broadcasts as a row
    let scores = tape.add(s_src, s_dst_row); // (n, n): e_ij = s_src_i + s_dst_j
    let scores = tape.leaky_relu(scores, leaky_slope);
    let masked = tape.add(scores, mask);
    let attn = tape.softmax(masked, 1);
    tape.matmul(attn, wh)
}

/// Runs the configured GAT stack over the graph embedding table.
pub fn gat_stack(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &EncoderConfig,
    mask: Var,
) -> Var {
    let mut features = vars[&format!("{prefix}.graph_embed")];
    for l in 0..cfg.gat_layers {
        features = gat_layer(
            tape,
            features,
            vars[&format!("{prefix}.gat{l}.w")],
            vars[&format!("{prefix}.gat{l}.a_src")],
            vars[&format!("{prefix}.gat{l}.a_dst")],
            cfg.leaky_slope,
            mask,
        );
    }
    features
}

/// `h_graph`: recency-weighted mean of the final GAT rows at the context
/// path's nodes. The agent's current position carries most of the predictive
/// spatial context, so weights decay geometrically into the past — a uniform
/// mean dilutes the endpoint signal and generalizes poorly across routes.
pub fn pool_graph(tape: &mut Tape, gat_output: Var, context_path: &[NodeId]) -> Var {
    assert!(!context_path.is_empty(), "cannot pool over an empty context path");
    let picked = tape.rows(gat_output, context_path);
    let t = context_path.len();
    let mut weights: Vec<f64> = (0..t).map(|i| RECENCY_DECAY.powi((t - 1 - i) as i32)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let w = tape.constant(Tensor::new(vec![1, t], weights));
    let pooled = tape.matmul(w, picked);
    let d = tape.value(pooled).len();
    tape.reshape(pooled, vec![d])
}

/// `h_fused = MLP([h_traj ‖ h_graph])`, two layers with ReLU.
pub fn fuse(
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    prefix: &str,
    h_traj: Var,
    h_graph: Var,
) -> Var {
    let joined = tape.concat(&[h_traj, h_graph], 0);
    let d2 = tape.value(joined).len();
    let row = tape.reshape(joined, vec![1, d2]);
    let h = tape.matmul(row, vars[&format!("{prefix}.fuse.w1")]);
    let h = tape.add(h, vars[&format!("{prefix}.fuse.b1")]);
    let h = tape.relu(h);
    let out = tape.matmul(h, vars[&format!("{prefix}.fuse.w2")]);
    let out = tape.add(out, vars[&format!("{prefix}.fuse.b2")]);
    let d_out = tape.value(out).len();
    tape.reshape(out, vec![d_out])
}

/// Plain MLP layer helper used by predictors and decoders.
pub fn linear(tape: &mut Tape, x_row: Var, w: Var, b: Var) -> Var {
    let h = tape.matmul(x_row, w);
    tape.add(h, b)
}
