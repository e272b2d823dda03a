//! Compares goal-inference models with Brier curves and a Wilcoxon
//! signed-rank test on a small synthetic setup.
//!
//! Run with: `cargo run --release --example evaluate_models`

use hivae::baselines::{train_rnn, BTomModel, ExtendedBTomModel, GoalInferenceModel, RnnConfig, RnnKind, DEFAULT_BTOM_BETA};
use hivae::eval::{evaluate_brier_curve, wilcoxon_signed_rank, EVAL_FRACTIONS};
use hivae::graph::{generate_synthetic_graph, GeneratorSpec};
use hivae::sim::{generate_dataset, sample_agent_profiles, Episode, SimParams, DEFAULT_TAU};

fn main() -> hivae::Result<()> {
    let g = generate_synthetic_graph(&GeneratorSpec {
        grid_width: 8,
        grid_height: 6,
        num_goals: 5,
        seed: 29,
        ..Default::default()
    })?;
    let params = SimParams { num_agents: 4, episodes_per_agent: 40, ..Default::default() };
    let profiles =
        sample_agent_profiles(&g, params.num_agents, params.dirichlet_alpha, DEFAULT_TAU, 29)?;
    let dataset = generate_dataset(&g, &profiles, &params, 29)?;
    let test: Vec<&Episode> = dataset.test().collect();

    let btom = BTomModel::new(&g, DEFAULT_BTOM_BETA)?;
    let ext = ExtendedBTomModel::fit(&g, &dataset, DEFAULT_BTOM_BETA)?;
    println!("training gru baseline...");
    let (gru, _) = train_rnn(
        &dataset,
        &g,
        RnnKind::Gru,
        RnnConfig { d_model: 16, hidden_dim: 32, epochs: 12, seed: 29, ..Default::default() },
    )?;

    let models: Vec<&dyn GoalInferenceModel> = vec![&btom, &ext, &gru];
    println!("\n{:<16}f25     f50     f75     f95", "model");
    let mut curves = Vec::new();
    for m in models {
        let curve = evaluate_brier_curve(m, &g, &test, &EVAL_FRACTIONS)?;
        let cells: Vec<String> = curve.means.iter().map(|v| format!("{v:.4}")).collect();
        println!("{:<16}{}", curve.model, cells.join("  "));
        curves.push(curve);
    }

    // paired test between the two inverse-planning variants at 95%
    let last = EVAL_FRACTIONS.len() - 1;
    match wilcoxon_signed_rank(&curves[1].per_episode[last], &curves[0].per_episode[last]) {
        Ok(w) => println!(
            "\nwilcoxon extended_btom vs btom at f95: W = {}, z = {:.2}, p = {:.4} (n = {})",
            w.w, w.z_approx, w.p_two_sided, w.n_effective
        ),
        Err(e) => println!("\nwilcoxon not applicable: {e}"),
    }
    Ok(())
}
