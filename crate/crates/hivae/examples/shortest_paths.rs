//! Shortest and k-shortest path queries on a generated graph.
//!
//! Run with: `cargo run --example shortest_paths`

use hivae::graph::{generate_synthetic_graph, k_shortest_paths, shortest_path, GeneratorSpec};

fn main() -> hivae::Result<()> {
    let g = generate_synthetic_graph(&GeneratorSpec {
        grid_width: 6,
        grid_height: 5,
        diagonal_probability: 0.25,
        jitter: 1.0,
        num_goals: 4,
        seed: 7,
    })?;

    let (src, dst) = (0, g.num_nodes() - 1);
    let best = shortest_path(&g, src, dst)?;
    println!("shortest {src} -> {dst}: length {:.2}", best.length);
    println!("  nodes: {:?}", best.nodes);

    println!("\ntop 5 loopless alternatives:");
    for (i, p) in k_shortest_paths(&g, src, dst, 5)?.iter().enumerate() {
        println!("  #{}: length {:.2}, {} nodes", i + 1, p.length, p.nodes.len());
    }
    Ok(())
}
