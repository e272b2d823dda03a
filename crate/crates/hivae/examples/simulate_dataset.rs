//! Samples agent preference profiles and simulates goal-directed episodes.
//!
//! Run with: `cargo run --example simulate_dataset`

use hivae::graph::{generate_synthetic_graph, GeneratorSpec};
use hivae::sim::{generate_dataset, sample_agent_profiles, SimParams, DEFAULT_TAU};

fn main() -> hivae::Result<()> {
    let g = generate_synthetic_graph(&GeneratorSpec {
        grid_width: 8,
        grid_height: 6,
        num_goals: 6,
        ..Default::default()
    })?;

    let master_seed = 13;
    let params = SimParams { num_agents: 3, episodes_per_agent: 20, ..Default::default() };
    let profiles = sample_agent_profiles(
        &g,
        params.num_agents,
        params.dirichlet_alpha,
        DEFAULT_TAU,
        master_seed,
    )?;
    for p in &profiles {
        let top = p.preferred_goal();
        println!(
            "agent {}: favorite goal {} (p = {:.2})",
            p.agent_id,
            g.goal_set()[top],
            p.preferences[top]
        );
    }

    let dataset = generate_dataset(&g, &profiles, &params, master_seed)?;
    println!(
        "\n{} episodes, {} train / {} test",
        dataset.episodes.len(),
        dataset.train().count(),
        dataset.test().count()
    );
    let e = &dataset.episodes[0];
    println!(
        "first episode: agent {} walks {} steps from {} to goal {}",
        e.agent_id,
        e.path.len() - 1,
        e.origin,
        e.goal
    );
    Ok(())
}
