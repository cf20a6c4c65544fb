//! Graph-network policy with persistent per-node memory.
//!
//! Every node embeds its observation and its body attributes, then runs
//! `t_prop` rounds of message passing (linear message, sum aggregation, GRU
//! update). Hidden states carry over between environment steps. Each
//! non-root node reads its hidden state out as the mean of a Gaussian over
//! its hinge torque; the value head mean-pools all hidden states.
//!
//! No parameter shape depends on the graph, so one parameter set drives any
//! body.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Backend;
use crate::morphology::{AttrSpace, MorphGraph, ATTR_DIM};
use crate::params::{orthogonal, scaled_uniform, Tensor};

/// Lower and upper clamp for the shared action log-std.
pub const LOG_STD_MIN: f64 = -4.605_170_185_988_091; // ln 0.01
pub const LOG_STD_MAX: f64 = std::f64::consts::LN_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphArch {
    pub d_h: usize,
    pub d_obs: usize,
    pub d_attr: usize,
    /// Per-node observation width of the environment.
    pub obs_width: usize,
    /// Message-passing rounds per environment step.
    pub t_prop: usize,
    /// When false, aggregated messages are replaced by zeros and each step
    /// runs a single update round.
    pub messages: bool,
}

impl GraphArch {
    pub fn new(d_h: usize, d_obs: usize, d_attr: usize, obs_width: usize, t_prop: usize) -> Self {
        GraphArch { d_h, d_obs, d_attr, obs_width, t_prop, messages: true }
    }

    pub fn gru_input(&self) -> usize {
        self.d_h + self.d_obs + self.d_attr
    }

    pub fn rounds(&self) -> usize {
        if self.messages {
            self.t_prop
        } else {
            1
        }
    }

    /// Tensor names and shapes in declaration order.
    pub fn layout(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (h, o, a, w, i) = (self.d_h, self.d_obs, self.d_attr, self.obs_width, self.gru_input());
        vec![
            ("phi_w1", vec![h, w]),
            ("phi_b1", vec![h]),
            ("phi_w2", vec![o, h]),
            ("phi_b2", vec![o]),
            ("zeta_w1", vec![h, ATTR_DIM]),
            ("zeta_b1", vec![h]),
            ("zeta_w2", vec![a, h]),
            ("zeta_b2", vec![a]),
            ("msg_w", vec![h, h]),
            ("msg_b", vec![h]),
            ("gru_wz", vec![h, i]),
            ("gru_uz", vec![h, h]),
            ("gru_bz", vec![h]),
            ("gru_wr", vec![h, i]),
            ("gru_ur", vec![h, h]),
            ("gru_br", vec![h]),
            ("gru_wn", vec![h, i]),
            ("gru_un", vec![h, h]),
            ("gru_bn", vec![h]),
            ("gru_bhn", vec![h]),
            ("out_w", vec![1, h]),
            ("out_b", vec![1]),
            ("log_std", vec![1]),
            ("val_w", vec![1, h]),
            ("val_b", vec![1]),
        ]
    }

    pub fn zeros(&self) -> Vec<Tensor> {
        self.layout().iter().map(|(n, s)| Tensor::zeros(n, s)).collect()
    }

    /// Orthogonal GRU matrices, scaled-uniform elsewhere, small output
    /// layer, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, log_std: f64, rng: &mut R) -> Vec<Tensor> {
        let mut ts = self.zeros();
        for t in &mut ts {
            let (rows, cols) = (t.shape[0], t.shape.get(1).copied().unwrap_or(1));
            match t.name.as_str() {
                "gru_wz" | "gru_wr" | "gru_wn" | "gru_uz" | "gru_ur" | "gru_un" => {
                    orthogonal(t, rows, cols, 1.0, rng)
                }
                "out_w" => scaled_uniform(t, cols, 0.1, rng),
                "log_std" => t.data.fill(log_std),
                name if name.contains("_w") => scaled_uniform(t, cols, 1.0, rng),
                _ => {}
            }
        }
        ts
    }
}

/// Positions of the tensors in [`GraphArch::layout`].
mod ix {
    pub const PHI_W1: usize = 0;
    pub const PHI_B1: usize = 1;
    pub const PHI_W2: usize = 2;
    pub const PHI_B2: usize = 3;
    pub const ZETA_W1: usize = 4;
    pub const ZETA_B1: usize = 5;
    pub const ZETA_W2: usize = 6;
    pub const ZETA_B2: usize = 7;
    pub const MSG_W: usize = 8;
    pub const MSG_B: usize = 9;
    pub const GRU: usize = 10;
    pub const OUT_W: usize = 20;
    pub const OUT_B: usize = 21;
    pub const LOG_STD: usize = 22;
    pub const VAL_W: usize = 23;
    pub const VAL_B: usize = 24;
}

/// Per-graph data the network needs: adjacency, normalized attributes and
/// the actuated node list.
#[derive(Debug, Clone)]
pub struct GraphCtx {
    pub neighbors: Vec<Vec<usize>>,
    pub attrs: Vec<[f64; ATTR_DIM]>,
    pub root: usize,
    /// Nodes carrying a hinge actuator, in action order.
    pub actuated: Vec<usize>,
}

impl GraphCtx {
    /// Requires dense ids (`0..n`); any node order is accepted.
    pub fn new(graph: &MorphGraph, space: &AttrSpace) -> Self {
        let n = graph.len();
        let mut attrs = vec![[0.0; ATTR_DIM]; n];
        for node in &graph.nodes {
            assert!(node.id < n, "graph ids must be dense");
            attrs[node.id] = space.normalize(&node.attr);
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(p, c) in &graph.edges {
            neighbors[p].push(c);
            neighbors[c].push(p);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let actuated = (0..n).filter(|&u| u != graph.root_id).collect();
        GraphCtx { neighbors, attrs, root: graph.root_id, actuated }
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }
}

/// Per-node hidden vectors plus the environment step they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub nodes: Vec<Vec<f64>>,
    pub timestep: usize,
}

impl HiddenState {
    pub fn zeros(n: usize, d_h: usize) -> Self {
        HiddenState { nodes: vec![vec![0.0; d_h]; n], timestep: 0 }
    }
}

fn mlp1<B: Backend>(b: &mut B, w1: &B::V, b1: &B::V, w2: &B::V, b2: &B::V, x: &B::V) -> B::V {
    let h = b.affine(w1, b1, x);
    let h = b.tanh(&h);
    b.affine(w2, b2, &h)
}

/// Attribute half of the node features, `ζ(A(u))` for every node. Constant
/// over an episode, so callers compute it once per window.
pub fn attr_features<B: Backend>(b: &mut B, p: &[B::V], ctx: &GraphCtx) -> Vec<B::V> {
    ctx.attrs
        .iter()
        .map(|a| {
            let x = b.constant(a);
            mlp1(b, &p[ix::ZETA_W1], &p[ix::ZETA_B1], &p[ix::ZETA_W2], &p[ix::ZETA_B2], &x)
        })
        .collect()
}

/// Node features `x_u = [Φ(o_u); ζ(A_u)]`.
pub fn embed_inputs<B: Backend>(
    b: &mut B,
    p: &[B::V],
    arch: &GraphArch,
    attr_x: &[B::V],
    obs: &[Vec<f64>],
) -> Vec<B::V> {
    assert_eq!(obs.len(), attr_x.len(), "one observation per node");
    obs.iter()
        .zip(attr_x)
        .map(|(o, xa)| {
            assert_eq!(o.len(), arch.obs_width, "observation width mismatch");
            let o = b.constant(o);
            let xo = mlp1(b, &p[ix::PHI_W1], &p[ix::PHI_B1], &p[ix::PHI_W2], &p[ix::PHI_B2], &o);
            b.concat(&[xo, xa.clone()])
        })
        .collect()
}

/// GRU update of state `h`. `g` holds, in order, `wz uz bz wr ur br wn un
/// bn bhn`.
pub fn gru_cell<B: Backend>(b: &mut B, g: &[B::V], d_h: usize, h: &B::V, input: &B::V) -> B::V {
    let (wz, uz, bz, wr, ur, br, wn, un, bn, bhn) =
        (&g[0], &g[1], &g[2], &g[3], &g[4], &g[5], &g[6], &g[7], &g[8], &g[9]);
    let zi = b.affine(wz, bz, input);
    let zh = b.matvec(uz, d_h, h);
    let z = b.add(&zi, &zh);
    let z = b.sigmoid(&z);
    let ri = b.affine(wr, br, input);
    let rh = b.matvec(ur, d_h, h);
    let r = b.add(&ri, &rh);
    let r = b.sigmoid(&r);
    let ni = b.affine(wn, bn, input);
    let nh = b.affine(un, bhn, h);
    let nh = b.mul(&r, &nh);
    let n = b.add(&ni, &nh);
    let n = b.tanh(&n);
    // (1 - z) ⊙ n + z ⊙ h
    let diff = b.sub(h, &n);
    let zd = b.mul(&z, &diff);
    b.add(&n, &zd)
}

/// Runs the message-passing rounds for one environment step.
pub fn propagate<B: Backend>(
    b: &mut B,
    p: &[B::V],
    arch: &GraphArch,
    ctx: &GraphCtx,
    x: &[B::V],
    mut h: Vec<B::V>,
) -> Vec<B::V> {
    let d_h = arch.d_h;
    for _ in 0..arch.rounds() {
        let agg: Vec<B::V> = if arch.messages {
            let msgs: Vec<B::V> = h.iter().map(|hv| b.affine(&p[ix::MSG_W], &p[ix::MSG_B], hv)).collect();
            ctx.neighbors
                .iter()
                .map(|nb| {
                    if nb.is_empty() {
                        b.zeros(d_h)
                    } else {
                        let parts: Vec<B::V> = nb.iter().map(|&v| msgs[v].clone()).collect();
                        b.sum_n(&parts)
                    }
                })
                .collect()
        } else {
            (0..ctx.len()).map(|_| b.zeros(d_h)).collect()
        };
        h = h
            .iter()
            .zip(agg.iter().zip(x))
            .map(|(hv, (r, xv))| {
                let input = b.concat(&[r.clone(), xv.clone()]);
                gru_cell(b, &p[ix::GRU..ix::GRU + 10], d_h, hv, &input)
            })
            .collect();
    }
    h
}

/// Clamped shared log-std, repeated once per actuator.
pub fn log_std<B: Backend>(b: &mut B, p: &[B::V], k: usize) -> B::V {
    let ls = b.clamp(&p[ix::LOG_STD], LOG_STD_MIN, LOG_STD_MAX);
    b.broadcast(&ls, k)
}

/// Action means for the actuated nodes, in [`GraphCtx::actuated`] order.
pub fn policy_mean<B: Backend>(b: &mut B, p: &[B::V], ctx: &GraphCtx, h: &[B::V]) -> B::V {
    let mus: Vec<B::V> = ctx.actuated.iter().map(|&u| b.affine(&p[ix::OUT_W], &p[ix::OUT_B], &h[u])).collect();
    if mus.is_empty() {
        b.constant(&[])
    } else {
        b.concat(&mus)
    }
}

/// Per-node `(mu_u, sigma_u)` pairs.
pub fn policy_out<B: Backend>(b: &mut B, p: &[B::V], ctx: &GraphCtx, h: &[B::V]) -> (B::V, B::V) {
    let mu = policy_mean(b, p, ctx, h);
    let ls = log_std(b, p, ctx.actuated.len());
    let sigma = b.exp(&ls);
    (mu, sigma)
}

/// Scalar value estimate from mean-pooled hidden states.
pub fn value_out<B: Backend>(b: &mut B, p: &[B::V], h: &[B::V]) -> B::V {
    let pooled = b.mean_n(h);
    b.affine(&p[ix::VAL_W], &p[ix::VAL_B], &pooled)
}
