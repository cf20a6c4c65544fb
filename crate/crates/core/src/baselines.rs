//! Reference methods: the evolve-structure family with fully connected
//! controllers, the message-free graph policy, and random graph search.
//!
//! | method          | policy          | inheritance                  | pruning  |
//! |-----------------|-----------------|------------------------------|----------|
//! | `NGE`           | graph network   | always copy parent           | Thompson |
//! | `ESS_SIMS`      | MLP             | never, survivors restart     | random   |
//! | `ESS_SIMS_AF`   | MLP             | copy iff topology identical  | random   |
//! | `ESS_GMUC`      | MLP             | copy iff topology identical  | Thompson |
//! | `ESS_BODYSHARE` | graph, no msgs  | always copy parent           | random   |
//! | `RGS`           | MLP             | none, no evolution           | none     |

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Backend;
use crate::morphology::{MorphGraph, Species};
use crate::nervenet::{GraphArch, LOG_STD_MAX, LOG_STD_MIN};
use crate::params::{scaled_uniform, Tensor};
use crate::policy::{init_params, PolicyArch, PolicyParams};
use crate::ppo::{PpoConfig, TrainState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "NGE")]
    Nge,
    #[serde(rename = "RGS")]
    Rgs,
    #[serde(rename = "ESS_SIMS")]
    EssSims,
    #[serde(rename = "ESS_SIMS_AF")]
    EssSimsAf,
    #[serde(rename = "ESS_GMUC")]
    EssGmuc,
    #[serde(rename = "ESS_BODYSHARE")]
    EssBodyshare,
}

/// Baselines only; [`Method`] adds `NGE`.
pub type BaselineKind = Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyFamily {
    Graph,
    GraphNoMessages,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inheritance {
    /// Child copies the parent's controller.
    Share,
    /// Copy only when parent and child topologies are identical.
    SameTopology,
    /// Always start from scratch; survivors also restart every generation.
    Never,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Nge, Method::Rgs, Method::EssSims, Method::EssSimsAf, Method::EssGmuc, Method::EssBodyshare];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nge => "NGE",
            Method::Rgs => "RGS",
            Method::EssSims => "ESS_SIMS",
            Method::EssSimsAf => "ESS_SIMS_AF",
            Method::EssGmuc => "ESS_GMUC",
            Method::EssBodyshare => "ESS_BODYSHARE",
        }
    }

    pub fn family(self) -> PolicyFamily {
        match self {
            Method::Nge => PolicyFamily::Graph,
            Method::EssBodyshare => PolicyFamily::GraphNoMessages,
            _ => PolicyFamily::Mlp,
        }
    }

    pub fn inheritance(self) -> Inheritance {
        match self {
            Method::Nge | Method::EssBodyshare => Inheritance::Share,
            Method::EssSimsAf | Method::EssGmuc => Inheritance::SameTopology,
            Method::EssSims | Method::Rgs => Inheritance::Never,
        }
    }

    /// Whether candidates are pruned with the surrogate rather than at random.
    pub fn uses_surrogate(self) -> bool {
        matches!(self, Method::Nge | Method::EssGmuc)
    }
}

/// Network sizes shared by all methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub d_h: usize,
    pub d_obs: usize,
    pub d_attr: usize,
    /// Message-passing rounds per environment step.
    pub t_prop: usize,
    pub mlp_hidden: usize,
    pub init_log_std: f64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig { d_h: 64, d_obs: 32, d_attr: 32, t_prop: 3, mlp_hidden: 64, init_log_std: -0.5 }
    }
}

impl NetConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.d_h == 0 || self.d_obs == 0 || self.d_attr == 0 || self.mlp_hidden == 0 {
            return Err("network widths must be positive".into());
        }
        if self.t_prop == 0 {
            return Err("t_prop: must be at least 1".into());
        }
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&self.init_log_std) {
            return Err(format!("init_log_std: must lie in [{LOG_STD_MIN}, {LOG_STD_MAX}]"));
        }
        Ok(())
    }
}

/// Three tanh hidden layers for the policy mean, a separate network of the
/// same shape for the value, and one log-std per output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArch {
    pub input: usize,
    pub outputs: usize,
    pub hidden: usize,
}

const MLP_DEPTH: usize = 3;

impl MlpArch {
    pub fn for_graph(graph: &MorphGraph, obs_width: usize, hidden: usize) -> Self {
        MlpArch { input: graph.len() * obs_width, outputs: graph.len() - 1, hidden }
    }

    pub fn layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for head in ["pi", "v"] {
            let mut fan_in = self.input;
            for l in 0..MLP_DEPTH {
                out.push((format!("{head}_w{l}"), vec![self.hidden, fan_in]));
                out.push((format!("{head}_b{l}"), vec![self.hidden]));
                fan_in = self.hidden;
            }
            let rows = if head == "pi" { self.outputs } else { 1 };
            out.push((format!("{head}_out_w"), vec![rows, self.hidden]));
            out.push((format!("{head}_out_b"), vec![rows]));
        }
        out.push(("log_std".into(), vec![self.outputs]));
        out
    }

    pub fn init<R: Rng + ?Sized>(&self, log_std: f64, rng: &mut R) -> Vec<Tensor> {
        self.layout()
            .iter()
            .map(|(name, shape)| {
                let mut t = Tensor::zeros(name, shape);
                if name == "log_std" {
                    t.data.fill(log_std);
                } else if name == "pi_out_w" {
                    scaled_uniform(&mut t, shape[1], 0.1, rng);
                } else if shape.len() == 2 {
                    scaled_uniform(&mut t, shape[1], 1.0, rng);
                }
                t
            })
            .collect()
    }
}

fn mlp_head<B: Backend>(b: &mut B, p: &[B::V], x: &B::V) -> B::V {
    let mut h = x.clone();
    for l in 0..MLP_DEPTH {
        h = b.affine(&p[2 * l], &p[2 * l + 1], &h);
        h = b.tanh(&h);
    }
    b.affine(&p[2 * MLP_DEPTH], &p[2 * MLP_DEPTH + 1], &h)
}

/// Forward pass on the concatenated per-node observations. Returns
/// `(mu, log_std, value)`.
pub fn mlp_step<B: Backend>(b: &mut B, arch: &MlpArch, p: &[B::V], obs: &[Vec<f64>]) -> (B::V, B::V, B::V) {
    let flat: Vec<f64> = obs.iter().flatten().copied().collect();
    assert_eq!(flat.len(), arch.input, "MLP input width is fixed by the graph it was built for");
    let x = b.constant(&flat);
    let per_head = 2 * MLP_DEPTH + 2;
    let mu = mlp_head(b, &p[..per_head], &x);
    let value = mlp_head(b, &p[per_head..2 * per_head], &x);
    let log_std = b.clamp(&p[2 * per_head], LOG_STD_MIN, LOG_STD_MAX);
    (mu, log_std, value)
}

/// Policy architecture a method uses for `graph`.
pub fn make_arch(method: Method, graph: &MorphGraph, net: &NetConfig, obs_width: usize) -> PolicyArch {
    match method.family() {
        PolicyFamily::Graph => PolicyArch::Graph(GraphArch::new(net.d_h, net.d_obs, net.d_attr, obs_width, net.t_prop)),
        PolicyFamily::GraphNoMessages => PolicyArch::Graph(GraphArch {
            messages: false,
            ..GraphArch::new(net.d_h, net.d_obs, net.d_attr, obs_width, net.t_prop)
        }),
        PolicyFamily::Mlp => PolicyArch::Mlp(MlpArch::for_graph(graph, obs_width, net.mlp_hidden)),
    }
}

/// Freshly initialized controller for `graph`.
pub fn make_policy<R: Rng + ?Sized>(
    method: Method,
    graph: &MorphGraph,
    net: &NetConfig,
    obs_width: usize,
    rng: &mut R,
) -> PolicyParams {
    init_params(&make_arch(method, graph, net, obs_width), net.init_log_std, rng)
}

/// Canonical edge lists are equal exactly when the unlabeled rooted trees
/// are isomorphic.
pub fn same_topology(a: &MorphGraph, b: &MorphGraph) -> bool {
    a.edges == b.edges
}

/// Controller and optimizer state for a child with graph `child` born from
/// `parent`. Both graphs must be canonical.
pub fn inherit<R: Rng + ?Sized>(
    method: Method,
    parent: &Species,
    child: &MorphGraph,
    net: &NetConfig,
    ppo: &PpoConfig,
    obs_width: usize,
    rng: &mut R,
) -> (PolicyParams, TrainState) {
    let reuse = match method.inheritance() {
        Inheritance::Share => true,
        Inheritance::SameTopology => same_topology(&parent.graph, child),
        Inheritance::Never => false,
    };
    if reuse && parent.params.arch != PolicyArch::Empty {
        (parent.params.clone(), parent.train.clone())
    } else {
        (make_policy(method, child, net, obs_width, rng), TrainState::new(ppo))
    }
}

/// Random graph search: `n * max_generations` random bodies, each trained
/// once from scratch, reported `n` per generation.
pub fn run_rgs(setup: &crate::evolution::Setup<'_>) -> crate::evolution::EvolutionState {
    assert_eq!(setup.method, Method::Rgs, "run_rgs needs the RGS method");
    setup.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Eval;
    use crate::morphology::{AttributeVector, Node};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn star(n: usize) -> MorphGraph {
        let attr = AttributeVector { geom_a: 0.2, geom_b: 0.05, attach_angle: 0.4, joint_range: 0.8, joint_gear: 50.0 };
        MorphGraph {
            root_id: 0,
            nodes: (0..n).map(|id| Node { id, attr }).collect(),
            edges: (1..n).map(|c| (0, c)).collect(),
        }
    }

    #[test]
    fn mlp_widths_follow_the_graph() {
        let net = NetConfig::default();
        let a = make_arch(Method::EssSimsAf, &star(3), &net, 6);
        let b = make_arch(Method::EssSimsAf, &star(4), &net, 6);
        assert_ne!(a, b);
        let PolicyArch::Mlp(m) = a else { panic!() };
        assert_eq!((m.input, m.outputs), (18, 2));
    }

    #[test]
    fn mlp_matches_matrix_chain_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let arch = MlpArch { input: 12, outputs: 1, hidden: 5 };
        let mut ts = arch.init(-0.3, &mut rng);
        for t in &mut ts {
            for x in &mut t.data {
                *x += rng.random_range(-0.2..0.2);
            }
        }
        let obs = vec![(0..6).map(|i| i as f64 * 0.1).collect::<Vec<_>>(), vec![0.5, -0.5, 0.2, 0.0, 1.0, -1.0]];
        let p: Vec<Vec<f64>> = ts.iter().map(|t| t.data.clone()).collect();
        let (mu, ls, v) = mlp_step(&mut Eval, &arch, &p, &obs);

        let matmul = |w: &Tensor, bias: &Tensor, x: &[f64]| -> Vec<f64> {
            (0..w.shape[0])
                .map(|r| bias.data[r] + (0..w.shape[1]).map(|c| w.data[r * w.shape[1] + c] * x[c]).sum::<f64>())
                .collect()
        };
        let x: Vec<f64> = obs.concat();
        let chain = |off: usize| {
            let mut h = x.clone();
            for l in 0..3 {
                h = matmul(&ts[off + 2 * l], &ts[off + 2 * l + 1], &h).iter().map(|z| z.tanh()).collect();
            }
            matmul(&ts[off + 6], &ts[off + 7], &h)
        };
        assert!((chain(0)[0] - mu[0]).abs() < 1e-14);
        assert!((chain(8)[0] - v[0]).abs() < 1e-14);
        assert_eq!(ls, ts[16].data);
    }

    #[test]
    fn same_topology_children_keep_parameters_only_when_allowed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = NetConfig { d_h: 4, d_obs: 2, d_attr: 2, mlp_hidden: 4, ..NetConfig::default() };
        let ppo = PpoConfig::default();
        let g = star(3);
        let parent = Species {
            species_id: 0,
            parent_id: None,
            birth_generation: 0,
            graph: g.clone(),
            params: make_policy(Method::EssSimsAf, &g, &net, 6, &mut rng),
            train: TrainState::new(&ppo),
            fitness: None,
        };
        let (same, _) = inherit(Method::EssSimsAf, &parent, &g, &net, &ppo, 6, &mut rng);
        assert_eq!(same, parent.params);
        let (grown, _) = inherit(Method::EssSimsAf, &parent, &star(4), &net, &ppo, 6, &mut rng);
        assert_ne!(grown.manifest(), parent.params.manifest());
        let (fresh, _) = inherit(Method::EssSims, &parent, &g, &net, &ppo, 6, &mut rng);
        assert_eq!(fresh.manifest(), parent.params.manifest());
        assert_ne!(fresh, parent.params);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            let s = serde_json::to_string(&m).unwrap();
            assert_eq!(s, format!("\"{}\"", m.name()));
            assert_eq!(serde_json::from_str::<Method>(&s).unwrap(), m);
        }
    }
}
