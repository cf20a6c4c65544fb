//! Hand-built starting bodies for fine-tuning.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::morphology::{AttributeVector, MorphGraph, Node};

fn attr(geom_a: f64, geom_b: f64, attach_angle: f64, joint_range: f64, joint_gear: f64) -> AttributeVector {
    AttributeVector { geom_a, geom_b, attach_angle, joint_range, joint_gear }
}

fn build(attrs: Vec<AttributeVector>, edges: Vec<(usize, usize)>) -> MorphGraph {
    let nodes = attrs.into_iter().enumerate().map(|(id, attr)| Node { id, attr }).collect();
    MorphGraph { root_id: 0, nodes, edges }.canonicalize().expect("fixture is a valid tree")
}

/// Torso, a two-segment tail and a pair of swept-back fins.
pub fn fish5() -> MorphGraph {
    build(
        vec![
            attr(0.30, 0.10, 0.0, 0.5, 50.0),
            attr(0.15, 0.06, PI, 0.7, 60.0),
            attr(0.12, 0.05, 0.0, 0.7, 40.0),
            attr(0.10, 0.03, 2.2, 0.6, 30.0),
            attr(0.10, 0.03, -2.2, 0.6, 30.0),
        ],
        vec![(0, 1), (1, 2), (0, 3), (0, 4)],
    )
}

/// Horizontal torso with two legs of thigh, shin and a forward foot.
pub fn walker7() -> MorphGraph {
    build(
        vec![
            attr(0.25, 0.06, 0.0, 0.5, 100.0),
            attr(0.20, 0.05, -1.8, 1.0, 120.0),
            attr(0.20, 0.04, 0.0, 1.0, 100.0),
            attr(0.08, 0.03, FRAC_PI_2, 0.6, 40.0),
            attr(0.20, 0.05, -1.35, 1.0, 120.0),
            attr(0.20, 0.04, 0.0, 1.0, 100.0),
            attr(0.08, 0.03, FRAC_PI_2, 0.6, 40.0),
        ],
        vec![(0, 1), (1, 2), (2, 3), (0, 4), (4, 5), (5, 6)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::AttrSpace;

    #[test]
    fn fixtures_are_valid() {
        let space = AttrSpace::default();
        for (g, n) in [(fish5(), 5), (walker7(), 7)] {
            assert_eq!(g.len(), n);
            assert!(g.validate(&space).is_ok());
            assert!(g.is_dense_bfs());
        }
    }
}
