//! Deterministic planar articulated-body environments.
//!
//! Bodies use maximal coordinates: every link carries its own position,
//! angle and velocities. Each substep applies forces with semi-implicit
//! Euler, projects velocities onto the joint constraints (an exact
//! mass-weighted projection, so it never adds kinetic energy), integrates
//! positions and finally projects positions back onto the joint manifold.
//!
//! * `fish2d`: no gravity, anisotropic viscous drag, reward is torso
//!   velocity along +y.
//! * `walker2d`: gravity, penalty-spring ground contact with capped
//!   friction, reward is torso velocity along +x minus a small control cost.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::morphology::MorphGraph;

/// Per-node observation width shared by both environments.
pub const OBS_WIDTH: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Fish2d,
    Walker2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FishParams {
    pub density: f64,
    /// Drag coefficient across the link's long axis.
    pub c_normal: f64,
    /// Drag coefficient along the long axis.
    pub c_tangent: f64,
}

impl Default for FishParams {
    fn default() -> Self {
        FishParams { density: 1000.0, c_normal: 50.0, c_tangent: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkerParams {
    pub density: f64,
    pub gravity: f64,
    /// Ground normal stiffness.
    pub k_normal: f64,
    /// Ground normal damping.
    pub c_normal: f64,
    /// Coulomb friction coefficient.
    pub friction: f64,
    pub ctrl_cost: f64,
    /// Initial clearance between the lowest point and the ground.
    pub drop_height: f64,
}

impl Default for WalkerParams {
    fn default() -> Self {
        WalkerParams {
            density: 500.0,
            gravity: -9.81,
            k_normal: 1e4,
            c_normal: 100.0,
            friction: 1.0,
            ctrl_cost: 1e-4,
            drop_height: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub dt: f64,
    pub frame_skip: usize,
    pub horizon: usize,
    pub fish: FishParams,
    pub walker: WalkerParams,
}

impl Default for EnvSpec {
    fn default() -> Self {
        EnvSpec::fish()
    }
}

impl EnvSpec {
    pub fn fish() -> Self {
        EnvSpec {
            kind: EnvKind::Fish2d,
            dt: 0.01,
            frame_skip: 5,
            horizon: 500,
            fish: FishParams::default(),
            walker: WalkerParams::default(),
        }
    }

    pub fn walker() -> Self {
        EnvSpec { kind: EnvKind::Walker2d, ..EnvSpec::fish() }
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err("dt: must be positive".into());
        }
        if self.frame_skip == 0 {
            return Err("frame_skip: must be positive".into());
        }
        if self.horizon == 0 {
            return Err("horizon: must be positive".into());
        }
        Ok(())
    }

    fn density(&self) -> f64 {
        match self.kind {
            EnvKind::Fish2d => self.fish.density,
            EnvKind::Walker2d => self.walker.density,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Ellipse { a: f64, b: f64 },
    /// Segment of half-length `half_len` along local x, swept by `radius`.
    Capsule { half_len: f64, radius: f64 },
}

impl Shape {
    pub fn area(&self) -> f64 {
        match *self {
            Shape::Ellipse { a, b } => PI * a * b,
            Shape::Capsule { half_len, radius } => 4.0 * half_len * radius + PI * radius * radius,
        }
    }

    fn inertia(&self, mass: f64) -> f64 {
        match *self {
            Shape::Ellipse { a, b } => mass * (a * a + b * b) / 4.0,
            Shape::Capsule { half_len, radius } => {
                let area = self.area();
                let m_box = mass * 4.0 * half_len * radius / area;
                let m_caps = mass - m_box;
                let (l, r) = (2.0 * half_len, 2.0 * radius);
                m_box * (l * l + r * r) / 12.0 + m_caps * (radius * radius / 2.0 + half_len * half_len)
            }
        }
    }

    /// Boundary point in local direction `phi`.
    fn perimeter(&self, phi: f64) -> [f64; 2] {
        let (c, s) = (phi.cos(), phi.sin());
        let dist = match *self {
            Shape::Ellipse { a, b } => a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt(),
            Shape::Capsule { half_len, radius } => {
                if s.abs() > 1e-12 && (radius * c / s).abs() <= half_len {
                    radius / s.abs()
                } else {
                    let e = c.signum() * half_len;
                    let de = c * e;
                    de + (de * de - e * e + radius * radius).max(0.0).sqrt()
                }
            }
        };
        [dist * c, dist * s]
    }

    /// Extent along local +x.
    fn half_extent(&self) -> f64 {
        match *self {
            Shape::Ellipse { a, .. } => a,
            Shape::Capsule { half_len, radius } => half_len + radius,
        }
    }

    /// Drag reference lengths (across, along) the long axis.
    fn drag_lengths(&self) -> (f64, f64) {
        match *self {
            Shape::Ellipse { a, b } => (2.0 * a, 2.0 * b),
            Shape::Capsule { half_len, radius } => (2.0 * (half_len + radius), 2.0 * radius),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Link {
    pub shape: Shape,
    pub mass: f64,
    pub inertia: f64,
}

/// Hinge between `parent` and `child`.
#[derive(Debug, Clone)]
pub struct Joint {
    pub parent: usize,
    pub child: usize,
    /// Anchor in the parent frame.
    pub anchor_parent: [f64; 2],
    /// Anchor in the child frame.
    pub anchor_child: [f64; 2],
    /// Child angle relative to the parent at zero joint angle.
    pub rest_angle: f64,
    pub range: f64,
    pub gear: f64,
}

/// Kinematic state in maximal coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub pos: Vec<[f64; 2]>,
    pub angle: Vec<f64>,
    pub vel: Vec<[f64; 2]>,
    pub omega: Vec<f64>,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        self.pos.iter().flatten().chain(self.vel.iter().flatten()).all(|x| x.is_finite())
            && self.angle.iter().chain(&self.omega).all(|x| x.is_finite())
    }
}

fn rot(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// An articulated body compiled from a canonical [`MorphGraph`].
#[derive(Debug, Clone)]
pub struct Body {
    pub links: Vec<Link>,
    /// `joints[k]` actuates link `k + 1`.
    pub joints: Vec<Joint>,
}

impl Body {
    pub fn from_graph(graph: &MorphGraph, spec: &EnvSpec) -> Body {
        assert!(graph.is_dense_bfs(), "environment bodies need canonical graphs");
        let density = spec.density();
        let links: Vec<Link> = graph
            .nodes
            .iter()
            .map(|n| {
                let (a, b) = (n.attr.geom_a, n.attr.geom_b);
                let shape = match spec.kind {
                    EnvKind::Fish2d => Shape::Ellipse { a, b },
                    EnvKind::Walker2d => Shape::Capsule { half_len: (a - b).max(0.0), radius: b },
                };
                let mass = density * shape.area();
                Link { shape, mass, inertia: shape.inertia(mass) }
            })
            .collect();
        let joints = graph
            .edges
            .iter()
            .map(|&(p, c)| {
                let attr = graph.nodes[c].attr;
                Joint {
                    parent: p,
                    child: c,
                    anchor_parent: links[p].shape.perimeter(attr.attach_angle),
                    anchor_child: [-links[c].shape.half_extent(), 0.0],
                    rest_angle: attr.attach_angle,
                    range: attr.joint_range,
                    gear: attr.joint_gear,
                }
            })
            .collect();
        Body { links, joints }
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn num_actuators(&self) -> usize {
        self.joints.len()
    }

    /// Zero-velocity configuration with all joints at rest and the root at
    /// `root_pos` with angle `root_angle`.
    pub fn rest_state(&self, root_pos: [f64; 2], root_angle: f64) -> BodyState {
        let n = self.links.len();
        let mut st = BodyState {
            pos: vec![[0.0; 2]; n],
            angle: vec![0.0; n],
            vel: vec![[0.0; 2]; n],
            omega: vec![0.0; n],
        };
        st.pos[0] = root_pos;
        st.angle[0] = root_angle;
        for j in &self.joints {
            st.angle[j.child] = st.angle[j.parent] + j.rest_angle;
            st.pos[j.child] = self.anchor_target(&st, j);
        }
        st
    }

    /// Child centre that puts both anchors of `j` at the same point.
    fn anchor_target(&self, st: &BodyState, j: &Joint) -> [f64; 2] {
        let ap = rot(st.angle[j.parent], j.anchor_parent);
        let ac = rot(st.angle[j.child], j.anchor_child);
        let pp = st.pos[j.parent];
        [pp[0] + ap[0] - ac[0], pp[1] + ap[1] - ac[1]]
    }

    pub fn joint_angle(&self, st: &BodyState, k: usize) -> f64 {
        let j = &self.joints[k];
        wrap_angle(st.angle[j.child] - st.angle[j.parent] - j.rest_angle)
    }

    pub fn joint_velocity(&self, st: &BodyState, k: usize) -> f64 {
        let j = &self.joints[k];
        st.omega[j.child] - st.omega[j.parent]
    }

    /// Largest anchor mismatch over all joints.
    pub fn joint_drift(&self, st: &BodyState) -> f64 {
        self.joints
            .iter()
            .map(|j| {
                let t = self.anchor_target(st, j);
                let p = st.pos[j.child];
                ((t[0] - p[0]).powi(2) + (t[1] - p[1]).powi(2)).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self, st: &BodyState) -> f64 {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| {
                0.5 * l.mass * (st.vel[i][0].powi(2) + st.vel[i][1].powi(2)) + 0.5 * l.inertia * st.omega[i].powi(2)
            })
            .sum()
    }

    fn centre_of_mass(&self, st: &BodyState) -> [f64; 2] {
        let m = self.total_mass();
        let mut c = [0.0; 2];
        for (l, p) in self.links.iter().zip(&st.pos) {
            c[0] += l.mass * p[0];
            c[1] += l.mass * p[1];
        }
        [c[0] / m, c[1] / m]
    }

    /// Lowest point of any link, assuming capsule geometry.
    fn lowest_point(&self, st: &BodyState) -> f64 {
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| match l.shape {
                Shape::Capsule { half_len, radius } => {
                    let e = rot(st.angle[i], [half_len, 0.0]);
                    st.pos[i][1] - e[1].abs() - radius
                }
                Shape::Ellipse { a, b } => {
                    let (s, c) = st.angle[i].sin_cos();
                    st.pos[i][1] - ((a * s).powi(2) + (b * c).powi(2)).sqrt()
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Advances one substep of length `dt` under the given joint torques.
    pub fn substep(&self, spec: &EnvSpec, st: &mut BodyState, torques: &[f64]) {
        let n = self.links.len();
        let dt = spec.dt;
        let mut force = vec![[0.0; 2]; n];
        let mut torque = vec![0.0; n];
        for (j, &tau) in self.joints.iter().zip(torques) {
            torque[j.child] += tau;
            torque[j.parent] -= tau;
        }
        if spec.kind == EnvKind::Walker2d {
            let w = &spec.walker;
            for (i, l) in self.links.iter().enumerate() {
                force[i][1] += l.mass * w.gravity;
            }
            self.ground_contact(w, dt, st, &mut force, &mut torque);
        }
        for (i, l) in self.links.iter().enumerate() {
            st.vel[i][0] += dt * force[i][0] / l.mass;
            st.vel[i][1] += dt * force[i][1] / l.mass;
            st.omega[i] += dt * torque[i] / l.inertia;
        }
        if spec.kind == EnvKind::Fish2d {
            self.apply_drag(&spec.fish, dt, st);
        }
        self.project_velocities(st);
        for i in 0..n {
            st.pos[i][0] += dt * st.vel[i][0];
            st.pos[i][1] += dt * st.vel[i][1];
            st.angle[i] += dt * st.omega[i];
        }
        self.project_positions(st);
    }

    /// Exact exponential decay of each link's velocity components in its own
    /// frame; rotational drag integrates the normal drag along the link.
    fn apply_drag(&self, fish: &FishParams, dt: f64, st: &mut BodyState) {
        for (i, l) in self.links.iter().enumerate() {
            let (across, along) = l.shape.drag_lengths();
            let local = rot(-st.angle[i], st.vel[i]);
            let decay_t = (-dt * fish.c_tangent * along / l.mass).exp();
            let decay_n = (-dt * fish.c_normal * across / l.mass).exp();
            st.vel[i] = rot(st.angle[i], [local[0] * decay_t, local[1] * decay_n]);
            let c_rot = fish.c_normal * across.powi(3) / 12.0;
            st.omega[i] *= (-dt * c_rot / l.inertia).exp();
        }
    }

    fn ground_contact(&self, w: &WalkerParams, dt: f64, st: &BodyState, force: &mut [[f64; 2]], torque: &mut [f64]) {
        for (i, l) in self.links.iter().enumerate() {
            let (half_len, radius) = match l.shape {
                Shape::Capsule { half_len, radius } => (half_len, radius),
                Shape::Ellipse { a, b } => (a - b, b),
            };
            for sign in [-1.0, 1.0] {
                let e = rot(st.angle[i], [sign * half_len, 0.0]);
                let centre_y = st.pos[i][1] + e[1];
                let depth = radius - centre_y;
                if depth <= 0.0 {
                    continue;
                }
                // Contact point offset from the link centre.
                let r = [e[0], e[1] - radius];
                let v = [st.vel[i][0] - st.omega[i] * r[1], st.vel[i][1] + st.omega[i] * r[0]];
                let fn_ = (w.k_normal * depth - w.c_normal * v[1]).max(0.0);
                // Coulomb cap, and never more than what stops the point in one step.
                let stop = 0.5 * l.mass * v[0].abs() / dt;
                let ft = -v[0].signum() * stop.min(w.friction * fn_);
                force[i][0] += ft;
                force[i][1] += fn_;
                torque[i] += r[0] * fn_ - r[1] * ft;
            }
        }
    }

    /// Mass-weighted projection of velocities onto the joint constraints,
    /// including joint limits that are active and being pushed outward.
    fn project_velocities(&self, st: &mut BodyState) {
        let n = self.links.len();
        if self.joints.is_empty() {
            return;
        }
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(3 * self.joints.len());
        for (k, j) in self.joints.iter().enumerate() {
            let rp = rot(st.angle[j.parent], j.anchor_parent);
            let rc = rot(st.angle[j.child], j.anchor_child);
            let (p, c) = (j.parent, j.child);
            // anchor velocity: v + ω × r = (vx - ω r_y, vy + ω r_x)
            rows.push(vec![(3 * c, 1.0), (3 * c + 2, -rc[1]), (3 * p, -1.0), (3 * p + 2, rp[1])]);
            rows.push(vec![(3 * c + 1, 1.0), (3 * c + 2, rc[0]), (3 * p + 1, -1.0), (3 * p + 2, -rp[0])]);
            let q = self.joint_angle(st, k);
            let qd = self.joint_velocity(st, k);
            if (q >= j.range && qd > 0.0) || (q <= -j.range && qd < 0.0) {
                rows.push(vec![(3 * c + 2, 1.0), (3 * p + 2, -1.0)]);
            }
        }
        let inv_mass: Vec<f64> = self
            .links
            .iter()
            .flat_map(|l| [1.0 / l.mass, 1.0 / l.mass, 1.0 / l.inertia])
            .collect();
        let mut v = vec![0.0; 3 * n];
        for i in 0..n {
            v[3 * i] = st.vel[i][0];
            v[3 * i + 1] = st.vel[i][1];
            v[3 * i + 2] = st.omega[i];
        }
        let m = rows.len();
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        // Dense scatter of each sparse row keeps A = J M⁻¹ Jᵀ cheap to build.
        let mut dense = vec![0.0; 3 * n];
        for (r, row) in rows.iter().enumerate() {
            rhs[r] = -row.iter().map(|&(k, x)| x * v[k]).sum::<f64>();
            for &(k, x) in row {
                dense[k] += x * inv_mass[k];
            }
            for (s, other) in rows.iter().enumerate().skip(r) {
                let val: f64 = other.iter().map(|&(k, x)| x * dense[k]).sum();
                a[(r, s)] = val;
                a[(s, r)] = val;
            }
            for &(k, _) in row {
                dense[k] = 0.0;
            }
        }
        let lambda = match a.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => match a.lu().solve(&rhs) {
                Some(x) => x,
                None => return,
            },
        };
        for (row, &l) in rows.iter().zip(lambda.iter()) {
            for &(k, x) in row {
                v[k] += inv_mass[k] * x * l;
            }
        }
        for i in 0..n {
            st.vel[i] = [v[3 * i], v[3 * i + 1]];
            st.omega[i] = v[3 * i + 2];
        }
    }

    /// Clamps joint angles into their limits, then re-seats every child on
    /// its parent's anchor and shifts the whole body to keep the centre of
    /// mass fixed. Parents are processed before children.
    fn project_positions(&self, st: &mut BodyState) {
        if self.joints.is_empty() {
            return;
        }
        let com = self.centre_of_mass(st);
        for k in 0..self.joints.len() {
            let j = &self.joints[k];
            let q = self.joint_angle(st, k);
            if q.abs() > j.range {
                st.angle[j.child] = st.angle[j.parent] + j.rest_angle + q.clamp(-j.range, j.range);
            }
            st.pos[j.child] = self.anchor_target(st, j);
        }
        let moved = self.centre_of_mass(st);
        let shift = [com[0] - moved[0], com[1] - moved[1]];
        for p in &mut st.pos {
            p[0] += shift[0];
            p[1] += shift[1];
        }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<Vec<f64>>,
    pub reward: f64,
    pub done: bool,
    /// Set when the simulator produced a non-finite state.
    pub diverged: bool,
}

/// An environment instance for one body.
#[derive(Debug, Clone)]
pub struct Env {
    pub spec: EnvSpec,
    pub body: Body,
    pub state: BodyState,
    pub t: usize,
}

impl Env {
    pub fn new(graph: &MorphGraph, spec: &EnvSpec) -> Env {
        let body = Body::from_graph(graph, spec);
        let state = Env::initial_state(&body, spec);
        Env { spec: spec.clone(), body, state, t: 0 }
    }

    fn initial_state(body: &Body, spec: &EnvSpec) -> BodyState {
        match spec.kind {
            // Torso long axis along the swimming direction.
            EnvKind::Fish2d => body.rest_state([0.0, 0.0], PI / 2.0),
            EnvKind::Walker2d => {
                let mut st = body.rest_state([0.0, 0.0], 0.0);
                let lift = spec.walker.drop_height - body.lowest_point(&st);
                for p in &mut st.pos {
                    p[1] += lift;
                }
                st
            }
        }
    }

    pub fn action_dim(&self) -> usize {
        self.body.num_actuators()
    }

    pub fn reset(&mut self) -> Vec<Vec<f64>> {
        self.state = Env::initial_state(&self.body, &self.spec);
        self.t = 0;
        self.observe()
    }

    pub fn observe(&self) -> Vec<Vec<f64>> {
        observe(&self.body, &self.spec, &self.state)
    }

    /// Pure transition from `state`. Actions are clamped to [-1, 1].
    pub fn transition(&self, state: &BodyState, action: &[f64]) -> (BodyState, f64, bool) {
        assert_eq!(action.len(), self.action_dim(), "action dimension mismatch");
        let clamped: Vec<f64> = action.iter().map(|a| if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) }).collect();
        let torques: Vec<f64> = clamped.iter().zip(&self.body.joints).map(|(a, j)| a * j.gear).collect();
        let mut st = state.clone();
        for _ in 0..self.spec.frame_skip {
            self.body.substep(&self.spec, &mut st, &torques);
        }
        if !st.is_finite() {
            return (st, 0.0, true);
        }
        let reward = match self.spec.kind {
            EnvKind::Fish2d => st.vel[0][1],
            EnvKind::Walker2d => {
                st.vel[0][0] - self.spec.walker.ctrl_cost * clamped.iter().map(|a| a * a).sum::<f64>()
            }
        };
        let fell = self.spec.kind == EnvKind::Walker2d && st.pos[0][1] < 0.0;
        (st, reward, fell)
    }

    pub fn step(&mut self, action: &[f64]) -> StepResult {
        let (st, reward, terminal) = self.transition(&self.state, action);
        let diverged = !st.is_finite();
        self.state = st;
        self.t += 1;
        let done = terminal || diverged || self.t >= self.spec.horizon;
        let obs = if diverged { vec![vec![0.0; OBS_WIDTH]; self.body.links.len()] } else { self.observe() };
        StepResult { obs, reward, done, diverged }
    }

    /// Torso position.
    pub fn torso(&self) -> [f64; 2] {
        self.state.pos[0]
    }
}

/// Per-node observations, zero-padded to [`OBS_WIDTH`].
///
/// Root: `[vx, vy, ω, sin θ, cos θ, height]` (height is 0 for the fish).
/// Other nodes: `[q, q̇, sin θ, cos θ, 0, 0]`.
pub fn observe(body: &Body, spec: &EnvSpec, st: &BodyState) -> Vec<Vec<f64>> {
    let n = body.links.len();
    let mut out = vec![vec![0.0; OBS_WIDTH]; n];
    let height = match spec.kind {
        EnvKind::Fish2d => 0.0,
        EnvKind::Walker2d => st.pos[0][1],
    };
    let (s, c) = st.angle[0].sin_cos();
    out[0][..6].copy_from_slice(&[st.vel[0][0], st.vel[0][1], st.omega[0], s, c, height]);
    for k in 0..body.joints.len() {
        let u = body.joints[k].child;
        let (s, c) = st.angle[u].sin_cos();
        out[u][..4].copy_from_slice(&[body.joint_angle(st, k), body.joint_velocity(st, k), s, c]);
    }
    out
}

/// Writes `t,torso_x,torso_y,reward` rows.
pub fn write_trajectory<W: Write>(mut w: W, rows: &[(usize, [f64; 2], f64)]) -> std::io::Result<()> {
    writeln!(w, "t,torso_x,torso_y,reward")?;
    for (t, p, r) in rows {
        writeln!(w, "{t},{},{},{}", p[0], p[1], r)?;
    }
    Ok(())
}
