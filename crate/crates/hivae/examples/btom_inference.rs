//! Watches a Bayesian inverse-planning posterior sharpen as more of a
//! trajectory is observed.
//!
//! Run with: `cargo run --example btom_inference`

use hivae::baselines::{BTomModel, GoalInferenceModel, DEFAULT_BTOM_BETA};
use hivae::graph::{generate_synthetic_graph, shortest_path, GeneratorSpec};

fn main() -> hivae::Result<()> {
    let g = generate_synthetic_graph(&GeneratorSpec {
        grid_width: 8,
        grid_height: 8,
        num_goals: 5,
        seed: 3,
        ..Default::default()
    })?;
    let btom = BTomModel::new(&g, DEFAULT_BTOM_BETA)?;

    // walk optimally toward the last goal in the set
    let goal = *g.goal_set().last().unwrap();
    let origin = 0;
    let path = shortest_path(&g, origin, goal)?.nodes;
    let goal_ix = g.goal_index(goal).unwrap();

    println!("true goal: node {goal} (index {goal_ix} in goal set {:?})\n", g.goal_set());
    println!("{:<10}{:<12}posterior", "steps", "P(true)");
    for t in 1..=path.len() {
        let posterior = btom.infer_goal(&g, &path[..t], None)?;
        let cells: Vec<String> = posterior.iter().map(|p| format!("{p:.2}")).collect();
        println!("{:<10}{:<12.3}[{}]", t - 1, posterior[goal_ix], cells.join(", "));
    }
    Ok(())
}
