//! Attributed tree model for robot bodies.
//!
//! A body is a tree of rigid parts. Each node carries an [`AttributeVector`]
//! describing its geometry and the hinge that attaches it to its parent. The
//! root node is the torso; its joint fields are carried but unused.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::PolicyParams;
use crate::ppo::TrainState;

/// Number of scalar attributes per node.
pub const ATTR_DIM: usize = 5;

/// Field names in the order used by [`AttributeVector::to_array`].
pub const ATTR_NAMES: [&str; ATTR_DIM] =
    ["geom_a", "geom_b", "attach_angle", "joint_range", "joint_gear"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeVector {
    /// Primary radius (ellipse) or half-length (capsule).
    pub geom_a: f64,
    /// Secondary radius or thickness.
    pub geom_b: f64,
    /// Placement direction on the parent's perimeter, parent frame.
    pub attach_angle: f64,
    /// Hinge half-range.
    pub joint_range: f64,
    /// Torque scale applied to the normalized action.
    pub joint_gear: f64,
}

impl AttributeVector {
    pub fn to_array(&self) -> [f64; ATTR_DIM] {
        [self.geom_a, self.geom_b, self.attach_angle, self.joint_range, self.joint_gear]
    }

    pub fn from_array(v: [f64; ATTR_DIM]) -> Self {
        AttributeVector {
            geom_a: v[0],
            geom_b: v[1],
            attach_angle: v[2],
            joint_range: v[3],
            joint_gear: v[4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Interval { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }
}

/// Axis-aligned attribute box plus the node-count cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttrSpace {
    pub geom_a: Interval,
    pub geom_b: Interval,
    pub attach_angle: Interval,
    pub joint_range: Interval,
    pub joint_gear: Interval,
    pub max_nodes: usize,
}

impl Default for AttrSpace {
    fn default() -> Self {
        AttrSpace {
            geom_a: Interval::new(0.05, 0.4),
            geom_b: Interval::new(0.02, 0.2),
            attach_angle: Interval::new(-PI, PI),
            joint_range: Interval::new(0.2, 1.4),
            joint_gear: Interval::new(10.0, 300.0),
            max_nodes: 12,
        }
    }
}

impl AttrSpace {
    pub fn bounds(&self) -> [Interval; ATTR_DIM] {
        [self.geom_a, self.geom_b, self.attach_angle, self.joint_range, self.joint_gear]
    }

    /// Checks that the box itself admits valid attribute vectors.
    pub fn check(&self) -> Result<(), String> {
        for (name, b) in ATTR_NAMES.iter().zip(self.bounds()) {
            if !(b.min.is_finite() && b.max.is_finite() && b.min <= b.max) {
                return Err(format!("{name}: empty or non-finite interval"));
            }
        }
        if self.geom_b.min <= 0.0 {
            return Err("geom_b: lower bound must be positive".into());
        }
        if self.joint_range.min <= 0.0 || self.joint_range.max > PI {
            return Err("joint_range: must lie in (0, pi]".into());
        }
        if self.attach_angle.min < -PI || self.attach_angle.max > PI {
            return Err("attach_angle: must lie in [-pi, pi]".into());
        }
        if self.geom_a.max < self.geom_b.min {
            return Err("geom_a/geom_b: no attribute vector satisfies geom_a >= geom_b".into());
        }
        if self.max_nodes == 0 {
            return Err("max_nodes: must be at least 1".into());
        }
        Ok(())
    }

    pub fn contains(&self, attr: &AttributeVector) -> bool {
        self.bounds()
            .iter()
            .zip(attr.to_array())
            .all(|(b, x)| b.contains(x))
            && attr.geom_a >= attr.geom_b
    }

    /// Uniform sample from the feasible part of the box (rejection on
    /// `geom_a >= geom_b`).
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> AttributeVector {
        let bounds = self.bounds();
        let draw = |b: &Interval, rng: &mut R| {
            if b.width() > 0.0 {
                rng.random_range(b.min..=b.max)
            } else {
                b.min
            }
        };
        for _ in 0..256 {
            let mut v = [0.0; ATTR_DIM];
            for (slot, b) in v.iter_mut().zip(bounds.iter()) {
                *slot = draw(b, rng);
            }
            let attr = AttributeVector::from_array(v);
            if attr.geom_a >= attr.geom_b {
                return attr;
            }
        }
        // Only reachable when the feasible region is a sliver of the box.
        let mut v = [0.0; ATTR_DIM];
        for (slot, b) in v.iter_mut().zip(bounds.iter()) {
            *slot = draw(b, rng);
        }
        self.clamp(AttributeVector::from_array(v))
    }

    /// Projects an attribute vector back into the feasible region.
    pub fn clamp(&self, attr: AttributeVector) -> AttributeVector {
        let mut v = attr.to_array();
        for (x, b) in v.iter_mut().zip(self.bounds()) {
            *x = b.clamp(*x);
        }
        if v[1] > v[0] {
            let lo = self.geom_a.min.max(self.geom_b.min);
            let hi = self.geom_a.max.min(self.geom_b.max);
            let mid = (0.5 * (v[0] + v[1])).clamp(lo, hi);
            v[0] = mid;
            v[1] = mid;
        }
        AttributeVector::from_array(v)
    }

    /// Maps each field linearly onto [-1, 1].
    pub fn normalize(&self, attr: &AttributeVector) -> [f64; ATTR_DIM] {
        let mut out = attr.to_array();
        for (x, b) in out.iter_mut().zip(self.bounds()) {
            let w = b.width();
            *x = if w > 0.0 { 2.0 * (*x - b.min) / w - 1.0 } else { 0.0 };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: usize,
    pub attr: AttributeVector,
}

/// A body tree. Edges are stored as `(parent, child)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphGraph {
    pub root_id: usize,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Empty,
    TooManyNodes { count: usize, max: usize },
    DuplicateId(usize),
    MissingRoot(usize),
    DanglingEdge(usize, usize),
    SelfLoop(usize),
    Cycle(usize, usize),
    Disconnected(usize),
    /// Edge listed child-first: its second endpoint is nearer the root.
    Reversed(usize, usize),
    AttributeOrder(usize),
    OutOfBounds { node: usize, field: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty graph"),
            Violation::TooManyNodes { count, max } => {
                write!(f, "too many nodes: {count} > {max}")
            }
            Violation::DuplicateId(id) => write!(f, "duplicate node id {id}"),
            Violation::MissingRoot(id) => write!(f, "root id {id} is not a node"),
            Violation::DanglingEdge(p, c) => write!(f, "edge ({p},{c}) references a missing node"),
            Violation::SelfLoop(u) => write!(f, "self loop on node {u}"),
            Violation::Cycle(p, c) => write!(f, "cycle closed by edge ({p},{c})"),
            Violation::Disconnected(u) => write!(f, "node {u} is disconnected from the root"),
            Violation::Reversed(p, c) => write!(f, "edge ({p},{c}) points toward the root"),
            Violation::AttributeOrder(u) => {
                write!(f, "attribute order: geom_b > geom_a on node {u}")
            }
            Violation::OutOfBounds { node, field } => {
                write!(f, "attribute {field} of node {node} is out of bounds")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid graph json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid graph: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("graph is not connected from root {0}")]
    Disconnected(usize),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Returns `Ok(())` iff every structural and attribute invariant holds.
pub fn validate(graph: &MorphGraph, space: &AttrSpace) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let n = graph.nodes.len();
    if n == 0 {
        return Err(vec![Violation::Empty]);
    }
    if n > space.max_nodes {
        out.push(Violation::TooManyNodes { count: n, max: space.max_nodes });
    }
    let mut index: HashMap<usize, usize> = HashMap::with_capacity(n);
    for (i, node) in graph.nodes.iter().enumerate() {
        if index.insert(node.id, i).is_some() {
            out.push(Violation::DuplicateId(node.id));
        }
    }
    if !index.contains_key(&graph.root_id) {
        out.push(Violation::MissingRoot(graph.root_id));
    }

    let mut dsu = DisjointSets::new(n);
    let mut adjacency = vec![Vec::new(); n];
    let mut kept = Vec::with_capacity(graph.edges.len());
    for &(p, c) in &graph.edges {
        let (Some(&pi), Some(&ci)) = (index.get(&p), index.get(&c)) else {
            out.push(Violation::DanglingEdge(p, c));
            continue;
        };
        if pi == ci {
            out.push(Violation::SelfLoop(p));
            continue;
        }
        if !dsu.union(pi, ci) {
            out.push(Violation::Cycle(p, c));
            continue;
        }
        adjacency[pi].push(ci);
        adjacency[ci].push(pi);
        kept.push((pi, ci));
    }
    if let Some(&ri) = index.get(&graph.root_id) {
        let mut depth = vec![usize::MAX; n];
        let mut queue = VecDeque::from([ri]);
        depth[ri] = 0;
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for (i, node) in graph.nodes.iter().enumerate() {
            if depth[i] == usize::MAX {
                out.push(Violation::Disconnected(node.id));
            }
        }
        for &(pi, ci) in &kept {
            if depth[pi] != usize::MAX && depth[ci] < depth[pi] {
                out.push(Violation::Reversed(graph.nodes[pi].id, graph.nodes[ci].id));
            }
        }
    }

    for node in &graph.nodes {
        let attr = node.attr.to_array();
        for ((name, b), x) in ATTR_NAMES.iter().zip(space.bounds()).zip(attr) {
            if !b.contains(x) {
                out.push(Violation::OutOfBounds { node: node.id, field: name });
            }
        }
        if !(node.attr.geom_b <= node.attr.geom_a) {
            out.push(Violation::AttributeOrder(node.id));
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[rb] = ra;
        true
    }
}

/// Unlabeled rooted tree shape, children sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ShapeKey(Vec<ShapeKey>);

/// Ordering key for a rooted, attributed subtree. Equal keys mean the
/// subtrees are identical up to relabeling. Shape compares first, so the
/// canonical edge list depends on the topology alone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SubtreeKey {
    shape: ShapeKey,
    attr: [u64; ATTR_DIM],
    children: Vec<SubtreeKey>,
}

impl MorphGraph {
    /// A graph with just a torso.
    pub fn single(attr: AttributeVector) -> Self {
        MorphGraph { root_id: 0, nodes: vec![Node { id: 0, attr }], edges: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn validate(&self, space: &AttrSpace) -> Result<(), Vec<Violation>> {
        validate(self, space)
    }

    /// Children lists keyed by node id, following an undirected traversal
    /// from the root. Fails if some node is unreachable.
    fn rooted_children(&self) -> Result<BTreeMap<usize, Vec<usize>>, GraphError> {
        let mut adjacency: HashMap<usize, Vec<usize>> =
            self.nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for &(p, c) in &self.edges {
            if p == c || !adjacency.contains_key(&p) || !adjacency.contains_key(&c) {
                return Err(GraphError::Invalid(vec![Violation::DanglingEdge(p, c)]));
            }
            adjacency.get_mut(&p).unwrap().push(c);
            adjacency.get_mut(&c).unwrap().push(p);
        }
        if !adjacency.contains_key(&self.root_id) {
            return Err(GraphError::Invalid(vec![Violation::MissingRoot(self.root_id)]));
        }
        let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut seen = HashSet::from([self.root_id]);
        let mut queue = VecDeque::from([self.root_id]);
        while let Some(u) = queue.pop_front() {
            let mut kids = Vec::new();
            for &v in &adjacency[&u] {
                if seen.insert(v) {
                    kids.push(v);
                    queue.push_back(v);
                }
            }
            children.insert(u, kids);
        }
        if seen.len() != self.nodes.len() || self.edges.len() + 1 != self.nodes.len() {
            return Err(GraphError::Disconnected(self.root_id));
        }
        Ok(children)
    }

    /// Relabels nodes in breadth-first order from the root, visiting
    /// siblings in a canonical order so that isomorphic inputs produce equal
    /// outputs. Idempotent.
    pub fn canonicalize(&self) -> Result<MorphGraph, GraphError> {
        let children = self.rooted_children()?;
        let attrs: HashMap<usize, AttributeVector> =
            self.nodes.iter().map(|n| (n.id, n.attr)).collect();

        fn key_of(
            u: usize,
            children: &BTreeMap<usize, Vec<usize>>,
            attrs: &HashMap<usize, AttributeVector>,
            memo: &mut HashMap<usize, SubtreeKey>,
        ) -> SubtreeKey {
            let mut kids: Vec<SubtreeKey> =
                children[&u].iter().map(|&c| key_of(c, children, attrs, memo)).collect();
            kids.sort();
            let shape = ShapeKey(kids.iter().map(|k| k.shape.clone()).collect());
            let key = SubtreeKey { shape, attr: attrs[&u].to_array().map(f64::to_bits), children: kids };
            memo.insert(u, key.clone());
            key
        }
        let mut memo = HashMap::new();
        key_of(self.root_id, &children, &attrs, &mut memo);

        let mut order = Vec::with_capacity(self.nodes.len());
        let mut new_id = HashMap::with_capacity(self.nodes.len());
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut queue = VecDeque::from([self.root_id]);
        new_id.insert(self.root_id, 0);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut kids = children[&u].clone();
            kids.sort_by(|a, b| memo[a].cmp(&memo[b]));
            for c in kids {
                let id = new_id.len();
                new_id.insert(c, id);
                edges.push((new_id[&u], id));
                queue.push_back(c);
            }
        }
        let nodes = order
            .iter()
            .map(|u| Node { id: new_id[u], attr: attrs[u] })
            .collect();
        Ok(MorphGraph { root_id: 0, nodes, edges })
    }

    /// True when ids are `0..n` in breadth-first order with edges listed in
    /// that order. Does not check sibling order.
    pub fn is_dense_bfs(&self) -> bool {
        self.root_id == 0
            && self.nodes.iter().enumerate().all(|(i, n)| n.id == i)
            && self.edges.len() + 1 == self.nodes.len()
            && self.edges.iter().enumerate().all(|(i, &(p, c))| c == i + 1 && p < c)
    }

    /// Parent of each node for a dense BFS graph; `None` for the root.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.nodes.len()];
        for &(p, c) in &self.edges {
            parent[c] = Some(p);
        }
        parent
    }

    /// Children of each node for a dense BFS graph.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.nodes.len()];
        for &(p, c) in &self.edges {
            out[p].push(c);
        }
        out
    }

    /// Node `u` and all of its descendants, dense BFS graphs only.
    pub fn subtree(&self, u: usize) -> Vec<usize> {
        let children = self.children();
        let mut out = vec![u];
        let mut i = 0;
        while i < out.len() {
            out.extend_from_slice(&children[out[i]]);
            i += 1;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialization cannot fail")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization cannot fail")
    }

    /// Parses and validates a graph. The node order and ids in the text are
    /// kept as given.
    pub fn from_json(text: &str, space: &AttrSpace) -> Result<MorphGraph, GraphError> {
        let graph: MorphGraph = serde_json::from_str(text)?;
        validate(&graph, space).map_err(GraphError::Invalid)?;
        Ok(graph)
    }
}

/// A morphology paired with its controller and lineage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Species {
    pub species_id: u64,
    pub parent_id: Option<u64>,
    pub birth_generation: usize,
    pub graph: MorphGraph,
    pub params: PolicyParams,
    /// Optimizer and penalty state carried along with `params`.
    pub train: TrainState,
    #[serde(with = "crate::util::opt_f64")]
    pub fitness: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn attr(a: f64, b: f64, angle: f64) -> AttributeVector {
        AttributeVector { geom_a: a, geom_b: b, attach_angle: angle, joint_range: 0.8, joint_gear: 100.0 }
    }

    fn graph(ids: &[usize], edges: &[(usize, usize)]) -> MorphGraph {
        MorphGraph {
            root_id: ids[0],
            nodes: ids
                .iter()
                .enumerate()
                .map(|(k, &id)| Node { id, attr: attr(0.2, 0.1, 0.1 * k as f64) })
                .collect(),
            edges: edges.to_vec(),
        }
    }

    #[test]
    fn single_root_is_valid() {
        let g = MorphGraph::single(attr(0.2, 0.1, 0.0));
        assert_eq!(validate(&g, &AttrSpace::default()), Ok(()));
    }

    #[test]
    fn triangle_reports_cycle() {
        let g = graph(&[0, 1, 2], &[(0, 1), (1, 2), (2, 0)]);
        let errs = validate(&g, &AttrSpace::default()).unwrap_err();
        assert!(errs.iter().any(|v| v.to_string().contains("cycle")), "{errs:?}");
    }

    #[test]
    fn child_first_edge_is_rejected() {
        let g = graph(&[0, 1, 2], &[(0, 1), (2, 1)]);
        let errs = validate(&g, &AttrSpace::default()).unwrap_err();
        assert_eq!(errs, vec![Violation::Reversed(2, 1)]);
        assert!(validate(&graph(&[0, 1, 2], &[(1, 2), (0, 1)]), &AttrSpace::default()).is_ok());
    }

    #[test]
    fn attribute_order_violation() {
        let mut g = MorphGraph::single(attr(0.1, 0.15, 0.0));
        let errs = validate(&g, &AttrSpace::default()).unwrap_err();
        assert!(errs.iter().any(|v| v.to_string().contains("attribute order")));
        g.nodes[0].attr.geom_b = 0.1;
        assert!(validate(&g, &AttrSpace::default()).is_ok());
    }

    #[test]
    fn out_of_bounds_and_capacity() {
        let mut g = MorphGraph::single(attr(0.2, 0.1, 0.0));
        g.nodes[0].attr.joint_gear = 1000.0;
        let errs = validate(&g, &AttrSpace::default()).unwrap_err();
        assert_eq!(errs, vec![Violation::OutOfBounds { node: 0, field: "joint_gear" }]);

        let ids: Vec<usize> = (0..13).collect();
        let edges: Vec<_> = (1..13).map(|c| (0, c)).collect();
        let errs = validate(&graph(&ids, &edges), &AttrSpace::default()).unwrap_err();
        assert_eq!(errs, vec![Violation::TooManyNodes { count: 13, max: 12 }]);
    }

    #[test]
    fn sparse_ids_are_relabelled() {
        let g = graph(&[0, 5, 9], &[(0, 5), (5, 9)]);
        assert!(validate(&g, &AttrSpace::default()).is_ok());
        let c = g.canonicalize().unwrap();
        assert_eq!(c.nodes.iter().map(|n| n.id).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(c.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(c.nodes[2].attr, g.nodes[2].attr);
        assert_eq!(c.canonicalize().unwrap(), c);
    }

    #[test]
    fn canonicalize_rejects_disconnected() {
        let g = graph(&[0, 1, 2], &[(0, 1)]);
        assert!(matches!(g.canonicalize(), Err(GraphError::Disconnected(0))));
    }

    #[test]
    fn missing_root_field_is_reported() {
        let text = r#"{"nodes":[{"id":0,"attr":{"geom_a":0.2,"geom_b":0.1,"attach_angle":0.0,"joint_range":0.5,"joint_gear":50.0}}],"edges":[]}"#;
        let err = MorphGraph::from_json(text, &AttrSpace::default()).unwrap_err();
        assert!(err.to_string().contains("missing field"), "{err}");
    }

    #[test]
    fn from_json_rejects_bad_edges_and_bounds() {
        let space = AttrSpace::default();
        let mut g = graph(&[0, 1, 2], &[(0, 1), (1, 2)]);
        g.edges.push((2, 0));
        assert!(matches!(MorphGraph::from_json(&g.to_json(), &space), Err(GraphError::Invalid(_))));
        let mut g = graph(&[0, 1], &[(0, 1)]);
        g.nodes[1].attr.geom_a = 5.0;
        assert!(matches!(MorphGraph::from_json(&g.to_json(), &space), Err(GraphError::Invalid(_))));
        assert!(matches!(MorphGraph::from_json("{", &space), Err(GraphError::Json(_))));
    }

    #[test]
    fn uniform_samples_are_feasible() {
        let space = AttrSpace::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            assert!(space.contains(&space.sample_uniform(&mut rng)));
        }
    }

    #[test]
    fn clamp_projects_into_space() {
        let space = AttrSpace::default();
        let raw = AttributeVector::from_array([0.01, 0.3, 4.0, 0.0, 1e6]);
        let c = space.clamp(raw);
        assert!(space.contains(&c), "{c:?}");
    }

    #[test]
    fn normalize_maps_box_to_unit_cube() {
        let space = AttrSpace::default();
        let lo = AttributeVector::from_array(space.bounds().map(|b| b.min));
        let hi = AttributeVector::from_array(space.bounds().map(|b| b.max));
        assert_eq!(space.normalize(&lo), [-1.0; ATTR_DIM]);
        assert_eq!(space.normalize(&hi), [1.0; ATTR_DIM]);
    }
}
