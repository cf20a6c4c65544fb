//! Fits the fitness surrogate on random bodies scored by the closed-form
//! landscape, then compares greedy and dropout-Thompson pruning.

use graph_evo::evolution::Landscape;
use graph_evo::morphology::{AttrSpace, MorphGraph};
use graph_evo::mutation::random_graph;
use graph_evo::surrogate::{fit, predict_all, prune_greedy, prune_thompson, DataPoint, SurrogateConfig, SurrogateModel};
use graph_evo::util::{rng_for, spearman};
use rand::Rng;

fn sample(n: usize, rng: &mut impl Rng) -> Vec<MorphGraph> {
    let space = AttrSpace::default();
    (0..n).map(|_| random_graph(rng.random_range(1..=12), &space, rng)).collect()
}

fn main() {
    let land = Landscape::default();
    let mut rng = rng_for(5, &[]);
    let train = sample(150, &mut rng);
    let test = sample(100, &mut rng);

    let mut model = SurrogateModel::new(SurrogateConfig::default(), AttrSpace::default(), &mut rng);
    model.add_observations(train.iter().map(|g| DataPoint { graph: g.clone(), fitness: land.fitness(g), generation: 0 }));
    let curve = fit(&mut model, 400, &mut rng);
    println!("training loss: first {:.3}, last {:.3}", curve[0], curve[curve.len() - 1]);

    let truth: Vec<f64> = test.iter().map(|g| land.fitness(g)).collect();
    println!("held-out Spearman: {:.3}", spearman(&predict_all(&model, &test, None), &truth));

    let greedy = prune_greedy(&model, &test, 5);
    println!("greedy keeps  {:?}", greedy.selected);
    for round in 0..3 {
        let picked = prune_thompson(&model, &test, 5, &mut rng).selected;
        let sizes: Vec<usize> = picked.iter().map(|&i| test[i].len()).collect();
        println!("thompson #{round} {picked:?}  sizes {sizes:?}");
    }
}
