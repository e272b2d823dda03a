//! Generates a synthetic street-like graph and prints its basic statistics.
//!
//! Run with: `cargo run --example generate_graph`

use hivae::graph::{generate_synthetic_graph, save_graph, GeneratorSpec};

fn main() -> hivae::Result<()> {
    let spec = GeneratorSpec {
        grid_width: 10,
        grid_height: 8,
        diagonal_probability: 0.2,
        jitter: 1.5,
        num_goals: 8,
        seed: 42,
    };
    let g = generate_synthetic_graph(&spec)?;

    println!("nodes:            {}", g.num_nodes());
    println!("directed edges:   {}", g.num_edges());
    println!("goal set:         {:?}", g.goal_set());
    println!("mean edge length: {:.2} m", g.mean_edge_length());
    println!("strongly connected: {}", g.is_strongly_connected());
    println!("content hash:     {}", &g.content_hash()[..16]);

    let out = std::env::temp_dir().join("hivae_example_graph.json");
    save_graph(&g, &out)?;
    println!("saved to {}", out.display());
    Ok(())
}
