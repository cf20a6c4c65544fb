//! The four graph mutation primitives and the categorical choice between
//! them. Every primitive returns a canonical graph.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::{AttrSpace, AttributeVector, MorphGraph, Node, ATTR_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    AddNode,
    AddGraph,
    DelGraph,
    PertGraph,
}

impl Primitive {
    pub const ALL: [Primitive; 4] = [Primitive::AddNode, Primitive::AddGraph, Primitive::DelGraph, Primitive::PertGraph];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::AddNode => "add_node",
            Primitive::AddGraph => "add_graph",
            Primitive::DelGraph => "del_graph",
            Primitive::PertGraph => "pert_graph",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("graph is at capacity ({0} nodes)")]
    Capacity(usize),
    #[error("nothing to delete from a single-node graph")]
    NothingToDelete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationConfig {
    pub p_add_node: f64,
    pub p_add_graph: f64,
    pub p_del_graph: f64,
    pub p_pert_graph: f64,
    /// Per-attribute noise scale; `None` means 10% of each attribute range.
    pub pert_sigma: Option<[f64; ATTR_DIM]>,
    pub mirror_on_add_graph: bool,
    /// Attributes-only mode: every mutation is a perturbation.
    pub constrained_mode: bool,
}

impl Default for MutationConfig {
    fn default() -> Self {
        MutationConfig {
            p_add_node: 0.15,
            p_add_graph: 0.15,
            p_del_graph: 0.15,
            p_pert_graph: 0.55,
            pert_sigma: None,
            mirror_on_add_graph: true,
            constrained_mode: false,
        }
    }
}

impl MutationConfig {
    pub fn check(&self) -> Result<(), String> {
        let p = [self.p_add_node, self.p_add_graph, self.p_del_graph, self.p_pert_graph];
        if p.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err("primitive probabilities must be nonnegative".into());
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(format!("primitive probabilities must sum to 1 (got {s})"));
        }
        if let Some(sig) = self.pert_sigma {
            if sig.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                return Err("pert_sigma: entries must be nonnegative".into());
            }
        }
        Ok(())
    }

    /// Distribution actually used, in [`Primitive::ALL`] order.
    pub fn effective_probs(&self) -> [f64; 4] {
        if self.constrained_mode {
            [0.0, 0.0, 0.0, 1.0]
        } else {
            [self.p_add_node, self.p_add_graph, self.p_del_graph, self.p_pert_graph]
        }
    }

    pub fn sigma(&self, space: &AttrSpace) -> [f64; ATTR_DIM] {
        self.pert_sigma.unwrap_or_else(|| space.bounds().map(|b| 0.1 * b.width()))
    }
}

fn canonical(g: MorphGraph) -> MorphGraph {
    g.canonicalize().expect("mutation keeps graphs connected")
}

fn ensure_canonical(g: &MorphGraph) -> MorphGraph {
    canonical(g.clone())
}

/// Appends a new leaf with attributes `attr` under `parent`.
pub fn add_node_at(graph: &MorphGraph, parent: usize, attr: AttributeVector) -> MorphGraph {
    let mut g = graph.clone();
    let id = g.len();
    g.nodes.push(Node { id, attr });
    g.edges.push((parent, id));
    canonical(g)
}

/// M1: a new leaf with uniformly drawn attributes under a uniformly chosen
/// node.
pub fn add_node<R: Rng + ?Sized>(graph: &MorphGraph, space: &AttrSpace, rng: &mut R) -> Result<MorphGraph, MutationError> {
    let g = ensure_canonical(graph);
    if g.len() >= space.max_nodes {
        return Err(MutationError::Capacity(g.len()));
    }
    let parent = rng.random_range(0..g.len());
    let attr = space.sample_uniform(rng);
    Ok(add_node_at(&g, parent, attr))
}

/// Copies the subtree rooted at `source` below `placement`, optionally
/// negating the copied root's attachment angle.
pub fn add_graph_at(graph: &MorphGraph, source: usize, placement: usize, mirror: bool) -> MorphGraph {
    let g = ensure_canonical(graph);
    let sub = g.subtree(source);
    let parents = g.parents();
    let base = g.len();
    let mut out = g.clone();
    for (k, &u) in sub.iter().enumerate() {
        let mut attr = g.nodes[u].attr;
        if k == 0 && mirror {
            attr.attach_angle = -attr.attach_angle;
        }
        out.nodes.push(Node { id: base + k, attr });
        let parent = if k == 0 {
            placement
        } else {
            let p = parents[u].expect("non-root subtree node has a parent");
            base + sub.iter().position(|&v| v == p).expect("parent lies in the subtree")
        };
        out.edges.push((parent, base + k));
    }
    canonical(out)
}

/// M2: duplicates a uniformly chosen subtree (among those that fit) onto a
/// uniformly chosen node, mirroring the copy with probability 1/2 when
/// enabled.
pub fn add_graph<R: Rng + ?Sized>(
    graph: &MorphGraph,
    space: &AttrSpace,
    mirror_enabled: bool,
    rng: &mut R,
) -> Result<MorphGraph, MutationError> {
    let g = ensure_canonical(graph);
    let room = space.max_nodes.saturating_sub(g.len());
    let fitting: Vec<usize> = (0..g.len()).filter(|&u| g.subtree(u).len() <= room).collect();
    if fitting.is_empty() {
        return Err(MutationError::Capacity(g.len()));
    }
    let source = fitting[rng.random_range(0..fitting.len())];
    let placement = rng.random_range(0..g.len());
    let mirror = mirror_enabled && rng.random_bool(0.5);
    Ok(add_graph_at(&g, source, placement, mirror))
}

/// Removes node `u` and its descendants.
pub fn del_graph_at(graph: &MorphGraph, u: usize) -> MorphGraph {
    let g = ensure_canonical(graph);
    assert_ne!(u, 0, "the root cannot be deleted");
    let gone = g.subtree(u);
    let keep = |v: &usize| !gone.contains(v);
    let nodes = g.nodes.iter().filter(|n| keep(&n.id)).cloned().collect();
    let edges = g.edges.iter().filter(|(_, c)| keep(c)).copied().collect();
    canonical(MorphGraph { root_id: 0, nodes, edges })
}

/// M3: deletes a uniformly chosen non-root subtree.
pub fn del_graph<R: Rng + ?Sized>(graph: &MorphGraph, rng: &mut R) -> Result<MorphGraph, MutationError> {
    let g = ensure_canonical(graph);
    if g.len() < 2 {
        return Err(MutationError::NothingToDelete);
    }
    let u = rng.random_range(1..g.len());
    Ok(del_graph_at(&g, u))
}

/// M4: adds independent Gaussian noise to every attribute of a uniformly
/// chosen subtree, then clamps into the attribute space.
pub fn pert_graph<R: Rng + ?Sized>(
    graph: &MorphGraph,
    space: &AttrSpace,
    sigma: &[f64; ATTR_DIM],
    rng: &mut R,
) -> MorphGraph {
    let g = ensure_canonical(graph);
    let root = rng.random_range(0..g.len());
    let mut out = g.clone();
    for u in g.subtree(root) {
        let mut a = out.nodes[u].attr.to_array();
        for (x, &s) in a.iter_mut().zip(sigma) {
            if s > 0.0 {
                *x += Normal::new(0.0, s).expect("finite sigma").sample(rng);
            }
        }
        out.nodes[u].attr = space.clamp(AttributeVector::from_array(a));
    }
    canonical(out)
}

/// Applies one primitive drawn from the configured distribution. A
/// primitive that cannot apply is dropped and the choice is redrawn among
/// the rest.
pub fn mutate<R: Rng + ?Sized>(
    graph: &MorphGraph,
    cfg: &MutationConfig,
    space: &AttrSpace,
    rng: &mut R,
) -> (MorphGraph, Primitive) {
    let mut probs = cfg.effective_probs();
    let sigma = cfg.sigma(space);
    loop {
        let total: f64 = probs.iter().sum();
        let prim = if total <= 0.0 {
            Primitive::PertGraph
        } else {
            let mut x = rng.random::<f64>() * total;
            let mut pick = 3;
            for (k, &p) in probs.iter().enumerate() {
                if p > 0.0 && x < p {
                    pick = k;
                    break;
                }
                x -= p;
            }
            Primitive::ALL[pick]
        };
        let res = match prim {
            Primitive::AddNode => add_node(graph, space, rng),
            Primitive::AddGraph => add_graph(graph, space, cfg.mirror_on_add_graph, rng),
            Primitive::DelGraph => del_graph(graph, rng),
            Primitive::PertGraph => Ok(pert_graph(graph, space, &sigma, rng)),
        };
        match res {
            Ok(g) => return (g, prim),
            Err(_) => {
                let k = Primitive::ALL.iter().position(|&p| p == prim).unwrap();
                probs[k] = 0.0;
                if probs.iter().all(|&p| p == 0.0) {
                    // Only perturbation can always apply.
                    probs[3] = 1.0;
                }
            }
        }
    }
}

/// Random graph of `size` nodes grown by repeated [`add_node`].
pub fn random_graph<R: Rng + ?Sized>(size: usize, space: &AttrSpace, rng: &mut R) -> MorphGraph {
    let mut g = MorphGraph::single(space.sample_uniform(rng));
    while g.len() < size.min(space.max_nodes) {
        g = add_node(&g, space, rng).expect("below capacity");
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> AttrSpace {
        AttrSpace::default()
    }

    fn interior_attr() -> AttributeVector {
        AttributeVector { geom_a: 0.25, geom_b: 0.1, attach_angle: 0.3, joint_range: 0.8, joint_gear: 150.0 }
    }

    fn path(n: usize) -> MorphGraph {
        MorphGraph {
            root_id: 0,
            nodes: (0..n).map(|id| Node { id, attr: interior_attr() }).collect(),
            edges: (1..n).map(|c| (c - 1, c)).collect(),
        }
    }

    #[test]
    fn add_node_on_single_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = add_node(&MorphGraph::single(interior_attr()), &space(), &mut rng).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
        assert!(validate(&g, &space()).is_ok());
    }

    #[test]
    fn add_node_at_capacity_fails() {
        let s = AttrSpace { max_nodes: 3, ..space() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(add_node(&path(3), &s, &mut rng), Err(MutationError::Capacity(3)));
        assert!(add_graph(&path(3), &s, true, &mut rng).is_err());
    }

    #[test]
    fn add_node_placement_is_uniform() {
        // On a path 0-1-2 the three placements give three distinct shapes.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = path(3);
        let shapes: Vec<Vec<(usize, usize)>> =
            (0..3).map(|p| add_node_at(&g, p, interior_attr()).edges).collect();
        let mut counts = [0usize; 3];
        let trials = 10_000;
        for _ in 0..trials {
            let e = add_node(&g, &space(), &mut rng).unwrap().edges;
            counts[shapes.iter().position(|s| *s == e).unwrap()] += 1;
        }
        let expect = trials as f64 / 3.0;
        let sd = (trials as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn add_graph_sizes_and_star() {
        let g = add_graph_at(&path(2), 1, 0, false);
        assert_eq!(g.len(), 3);
        assert_eq!(g.edges, vec![(0, 1), (0, 2)]);
        let five = path(5);
        let grown = add_graph_at(&five, 2, 0, false);
        assert_eq!(grown.len(), 8);
        assert!(validate(&grown, &space()).is_ok());
    }

    #[test]
    fn mirror_flips_sign_half_the_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = path(2);
        let mut negative = 0;
        let trials = 10_000;
        for _ in 0..trials {
            let out = add_graph(&g, &space(), true, &mut rng).unwrap();
            let n = out.nodes.iter().filter(|n| n.attr.attach_angle < 0.0).count();
            negative += n.min(1);
        }
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((negative as f64 - trials as f64 / 2.0).abs() < 3.0 * sd, "{negative}");
    }

    #[test]
    fn del_graph_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(del_graph(&path(2), &mut rng).unwrap().len(), 1);
        assert_eq!(del_graph(&path(1), &mut rng), Err(MutationError::NothingToDelete));
        let eight = add_graph_at(&path(5), 2, 0, false);
        // Node 2's subtree in the 8-node graph has three nodes.
        let three = (1..8).find(|&u| eight.subtree(u).len() == 3).unwrap();
        assert_eq!(del_graph_at(&eight, three).len(), 5);
    }

    #[test]
    fn zero_sigma_perturbation_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = path(4).canonicalize().unwrap();
        assert_eq!(pert_graph(&g, &space(), &[0.0; ATTR_DIM], &mut rng), g);
    }

    #[test]
    fn perturbation_keeps_topology() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = space();
        for _ in 0..200 {
            let g = random_graph(rng.random_range(1..9), &s, &mut rng);
            let p = pert_graph(&g, &s, &MutationConfig::default().sigma(&s), &mut rng);
            assert_eq!(p.edges, g.edges);
        }
    }

    #[test]
    fn constrained_mode_only_perturbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = MutationConfig { constrained_mode: true, ..MutationConfig::default() };
        let g = path(4);
        for _ in 0..100 {
            assert_eq!(mutate(&g, &cfg, &space(), &mut rng).1, Primitive::PertGraph);
        }
    }

    #[test]
    fn infeasible_choice_falls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = MutationConfig { p_add_node: 0.0, p_add_graph: 0.0, p_del_graph: 1.0, p_pert_graph: 0.0, ..Default::default() };
        let (g, tag) = mutate(&MorphGraph::single(interior_attr()), &cfg, &space(), &mut rng);
        assert_eq!(tag, Primitive::PertGraph);
        assert!(validate(&g, &space()).is_ok());
    }

    #[test]
    fn primitive_frequencies_follow_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = MutationConfig::default();
        let g = path(5);
        let trials = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..trials {
            let (_, tag) = mutate(&g, &cfg, &space(), &mut rng);
            counts[Primitive::ALL.iter().position(|&p| p == tag).unwrap()] += 1;
        }
        for (c, p) in counts.iter().zip(cfg.effective_probs()) {
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - trials as f64 * p).abs() < 3.0 * sd, "{counts:?}");
        }
    }
}
