//! Builds the five-node fish body, checks it, relabels it and shows that
//! the canonical form does not care about node ids.

use graph_evo::fixtures::fish5;
use graph_evo::morphology::{AttrSpace, MorphGraph, Node};

fn main() {
    let space = AttrSpace::default();
    let fish = fish5();
    fish.validate(&space).expect("fixture is valid");
    println!("fish5: {} nodes, root {}, edges {:?}", fish.len(), fish.root_id, fish.edges);

    // Same body, scrambled ids and edge order.
    let shuffled = MorphGraph {
        root_id: 40,
        nodes: fish.nodes.iter().rev().map(|n| Node { id: 40 - 10 * n.id, attr: n.attr }).collect(),
        edges: fish.edges.iter().rev().map(|&(p, c)| (40 - 10 * p, 40 - 10 * c)).collect(),
    };
    let canon = shuffled.canonicalize().unwrap();
    println!("relabeled copy canonicalizes back to fish5: {}", canon == fish);

    let json = fish.to_json_pretty();
    let back = MorphGraph::from_json(&json, &space).unwrap();
    println!("JSON round trip exact: {} ({} bytes)", back == fish, json.len());
    println!("{}", fish.to_json());

    let mut broken = fish.clone();
    broken.edges.push((3, 1));
    println!("extra edge (3,1): {:?}", broken.validate(&space).unwrap_err());
    let mut flipped = fish.clone();
    flipped.edges[0] = (flipped.edges[0].1, flipped.edges[0].0);
    println!("flipped first edge: {:?}", flipped.validate(&space).unwrap_err());
}
