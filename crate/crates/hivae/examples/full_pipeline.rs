//! Drives the whole pipeline programmatically — simulate, train two models,
//! run every experiment — exactly as `hivae run-all` does, writing all
//! artifacts into a temporary directory.
//!
//! Run with: `cargo run --release --example full_pipeline`

use hivae::cli::{cmd_eval, cmd_simulate, cmd_train, Experiment, RunConfig};
use hivae::graph::GeneratorSpec;
use hivae::sim::SimParams;

fn main() -> hivae::Result<()> {
    let out_dir = std::env::temp_dir().join("hivae_full_pipeline");
    let mut cfg = RunConfig {
        master_seed: 5,
        out_dir,
        generator: GeneratorSpec {
            grid_width: 5,
            grid_height: 4,
            diagonal_probability: 0.0,
            jitter: 0.0,
            num_goals: 4,
            seed: 0,
        },
        sim: SimParams { num_agents: 3, episodes_per_agent: 15, ..Default::default() },
        models: vec!["btom".into(), "extended_btom".into()],
        ..Default::default()
    };
    cfg.propagate_seed();
    cfg.validate()?;

    cmd_simulate(&cfg)?;
    for name in cfg.models.clone() {
        cmd_train(&cfg, &name)?;
    }
    cmd_eval(&cfg, Experiment::All, 2)?;

    println!("\nartifacts:");
    for entry in walk(&cfg.out_dir) {
        println!("  {}", entry.display());
    }
    Ok(())
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir) {
        let mut entries: Vec<_> = entries.flatten().map(|e| e.path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                out.extend(walk(&path));
            } else {
                out.push(path);
            }
        }
    }
    out
}
