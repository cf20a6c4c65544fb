//! A chain of random mutations from a three-node body.

use graph_evo::morphology::AttrSpace;
use graph_evo::mutation::{mutate, random_graph, MutationConfig};
use graph_evo::util::rng_for;

fn main() {
    let space = AttrSpace::default();
    let cfg = MutationConfig::default();
    let mut rng = rng_for(3, &[0]);
    let mut g = random_graph(3, &space, &mut rng);
    println!("start: {} nodes", g.len());
    for step in 1..=25 {
        let (next, prim) = mutate(&g, &cfg, &space, &mut rng);
        assert!(next.validate(&space).is_ok());
        let angles: Vec<String> = next.nodes.iter().map(|n| format!("{:+.2}", n.attr.attach_angle)).collect();
        println!("{step:>2} {:<10} |V| = {:>2}  angles [{}]", prim.name(), next.len(), angles.join(" "));
        g = next;
    }

    let constrained = MutationConfig { constrained_mode: true, ..cfg };
    let (h, prim) = mutate(&g, &constrained, &space, &mut rng);
    println!("constrained mode picked {} and kept the edges: {}", prim.name(), h.edges == g.edges);
}
