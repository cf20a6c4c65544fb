//! Full evolutionary loop with surrogate pruning on the closed-form
//! landscape (peak at seven nodes with zero attach angles). No RL.

use graph_evo::baselines::Method;
use graph_evo::cli::{evaluator, setup};
use graph_evo::config::{FitnessKind, RunConfig};
use graph_evo::evolution::{genealogy_dot, EvolutionConfig};

fn main() {
    let cfg = RunConfig {
        method: Method::Nge,
        fitness: FitnessKind::Synthetic,
        evolution: EvolutionConfig { max_generations: 15, ..EvolutionConfig::default() },
        seed: 2,
        ..RunConfig::default()
    }
    .resolved()
    .unwrap();
    let ev = evaluator(&cfg);
    let s = setup(&cfg, ev.as_ref());
    let state = s.run_from(s.init_state(), |st| {
        let m = st.metrics.last().unwrap();
        println!("gen {:>2}  best {:+8.3}  mean {:+8.3}  |V| {:.1}", m.gen, m.best_af, m.mean_af, m.mean_nodes);
    });
    let best = state.best.as_ref().unwrap();
    println!("best body: {} nodes, fitness {:.3}", best.graph.len(), best.fitness.unwrap());
    let dot = genealogy_dot(&state.genealogy);
    println!("genealogy: {} species, {} DOT lines", state.genealogy.len(), dot.lines().count());
}
