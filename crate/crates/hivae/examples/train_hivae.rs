//! Trains a small hierarchical belief-desire-intention VAE and inspects its
//! goal posterior and latent mental states on a held-out episode.
//!
//! Run with: `cargo run --release --example train_hivae`

use hivae::graph::{generate_synthetic_graph, GeneratorSpec};
use hivae::model::{train, ModelConfig};
use hivae::nn::EncoderConfig;
use hivae::sim::{generate_dataset, sample_agent_profiles, truncate, SimParams, DEFAULT_TAU};

fn main() -> hivae::Result<()> {
    let g = generate_synthetic_graph(&GeneratorSpec {
        grid_width: 6,
        grid_height: 5,
        diagonal_probability: 0.0,
        jitter: 0.0,
        num_goals: 3,
        seed: 17,
    })?;
    let params = SimParams { num_agents: 4, episodes_per_agent: 30, ..Default::default() };
    let profiles =
        sample_agent_profiles(&g, params.num_agents, params.dirichlet_alpha, DEFAULT_TAU, 17)?;
    let dataset = generate_dataset(&g, &profiles, &params, 17)?;

    let config = ModelConfig {
        encoder: EncoderConfig {
            d_model: 16,
            d_fused: 16,
            num_heads: 2,
            num_blocks: 1,
            ff_dim: 32,
            gat_layers: 1,
            ..Default::default()
        },
        latent_dims: [8, 8, 8],
        epochs: 15,
        hidden_dim: 32,
        learning_rate: 2e-3,
        seed: 17,
        ..Default::default()
    };
    println!("training on {} episodes...", dataset.train().count());
    let (model, trace) = train(&dataset, &g, config)?;
    for s in trace.iter().step_by(3).chain(trace.last()) {
        println!(
            "epoch {:>2}: total {:.3}  ce {:.3}  kl {:.3}  recon {:.3}",
            s.epoch, s.total, s.goal_ce, s.kl_sum, s.recon_sum
        );
    }

    let episode = dataset.test().next().expect("test split is non-empty");
    let prefix = truncate(episode, 0.75);
    let posterior = model.infer(&g, &prefix.path)?;
    let true_ix = g.goal_index(episode.goal).unwrap();
    println!("\nheld-out episode, 75% observed; true goal index {true_ix}");
    for (i, p) in posterior.iter().enumerate() {
        let marker = if i == true_ix { "  <- true" } else { "" };
        println!("  goal {}: {:.3}{marker}", g.goal_set()[i], p);
    }

    let latents = model.infer_mind_states(&g, &prefix.path)?;
    println!("\nlatent mental-state means (belief / desire / intention):");
    for (level, mu) in latents.mu.iter().enumerate() {
        let head: Vec<String> = mu.data().iter().take(4).map(|v| format!("{v:+.2}")).collect();
        println!("  level {level}: [{} ...]", head.join(", "));
    }
    Ok(())
}
