//! Policy parameter sets, architecture dispatch and the binary checkpoint
//! format.

use std::io::{self, Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Backend, Eval, Gradients, Tape, Var};
use crate::baselines::{self, MlpArch};
use crate::nervenet::{self, GraphArch, GraphCtx};
use crate::params::{manifest, ShapeManifest, Tensor};

/// Checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyArch {
    Graph(GraphArch),
    Mlp(MlpArch),
    /// No controller; used when fitness does not involve control.
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: PolicyArch,
    pub tensors: Vec<Tensor>,
}

/// Output of one policy step.
pub struct StepOut<V> {
    pub mu: V,
    pub log_std: V,
    pub value: V,
    pub hidden: Vec<V>,
}

impl PolicyParams {
    pub fn empty() -> Self {
        PolicyParams { arch: PolicyArch::Empty, tensors: Vec::new() }
    }

    pub fn manifest(&self) -> ShapeManifest {
        manifest(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Size of each per-node hidden vector (0 for stateless policies).
    pub fn hidden_size(&self) -> usize {
        match &self.arch {
            PolicyArch::Graph(a) => a.d_h,
            _ => 0,
        }
    }

    /// Zero hidden state for a graph with `n` nodes.
    pub fn zero_hidden(&self, n: usize) -> Vec<Vec<f64>> {
        match &self.arch {
            PolicyArch::Graph(a) => vec![vec![0.0; a.d_h]; n],
            _ => Vec::new(),
        }
    }

    /// Loads every tensor onto a backend, in declaration order.
    pub fn load<B: Backend>(&self, b: &mut B) -> Vec<B::V> {
        self.tensors.iter().map(|t| b.constant(&t.data)).collect()
    }

    /// Loads every tensor as a differentiable leaf.
    pub fn load_tape(&self, tape: &mut Tape) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.param(&t.data)).collect()
    }

    /// Reads the gradient of every tensor.
    pub fn collect_grads(&self, grads: &Gradients, vars: &[Var]) -> Vec<Vec<f64>> {
        vars.iter().map(|&v| grads.of(v).to_vec()).collect()
    }

    pub fn add_grads(acc: &mut [Vec<f64>], grads: &Gradients, vars: &[Var]) {
        for (a, &v) in acc.iter_mut().zip(vars) {
            for (x, g) in a.iter_mut().zip(grads.of(v)) {
                *x += g;
            }
        }
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.tensors.iter().map(|t| vec![0.0; t.len()]).collect()
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (d_h, d_obs, d_attr, code, obs_width, t_prop, flag) = match &self.arch {
            PolicyArch::Graph(a) => (a.d_h, a.d_obs, a.d_attr, 0, a.obs_width, a.t_prop, a.messages as usize),
            PolicyArch::Mlp(a) => (a.hidden, a.input, 0, 1, a.outputs, 0, 0),
            PolicyArch::Empty => (0, 0, 0, 2, 0, 0, 0),
        };
        let header = [d_h, d_obs, d_attr, CHECKPOINT_VERSION as usize, code, obs_width, t_prop, flag, self.tensors.len()];
        for h in header {
            w.write_all(&(h as u32).to_le_bytes())?;
        }
        for t in &self.tensors {
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
        }
        for t in &self.tensors {
            for x in &t.data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_checkpoint(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        fn u32_of<R: Read>(r: &mut R) -> io::Result<usize> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b) as usize)
        }
        let mut header = [0usize; 9];
        for h in &mut header {
            *h = u32_of(&mut r)?;
        }
        let [d_h, d_obs, d_attr, version, code, obs_width, t_prop, flag, count] = header;
        if version != CHECKPOINT_VERSION as usize {
            return Err(CheckpointError::Version(version as u32));
        }
        let arch = match code {
            0 => PolicyArch::Graph(GraphArch { d_h, d_obs, d_attr, obs_width, t_prop, messages: flag != 0 }),
            1 => PolicyArch::Mlp(MlpArch { input: d_obs, outputs: obs_width, hidden: d_h }),
            2 => PolicyArch::Empty,
            other => return Err(CheckpointError::Arch(other as u32)),
        };
        let layout = layout_of(&arch);
        if layout.len() != count {
            return Err(CheckpointError::Layout(format!("expected {} tensors, found {count}", layout.len())));
        }
        let mut tensors = Vec::with_capacity(count);
        for (name, shape) in &layout {
            let ndim = u32_of(&mut r)?;
            let dims = (0..ndim).map(|_| u32_of(&mut r)).collect::<io::Result<Vec<_>>>()?;
            if &dims != shape {
                return Err(CheckpointError::Layout(format!("{name}: shape {dims:?} != {shape:?}")));
            }
            tensors.push(Tensor::zeros(name, shape));
        }
        for t in &mut tensors {
            for x in &mut t.data {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                *x = f64::from_le_bytes(b);
            }
        }
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(CheckpointError::Layout(format!("{} trailing bytes", rest.len())));
        }
        Ok(PolicyParams { arch, tensors })
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] io::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("unknown architecture code {0}")]
    Arch(u32),
    #[error("checkpoint layout mismatch: {0}")]
    Layout(String),
}

fn layout_of(arch: &PolicyArch) -> Vec<(String, Vec<usize>)> {
    match arch {
        PolicyArch::Graph(a) => a.layout().into_iter().map(|(n, s)| (n.to_string(), s)).collect(),
        PolicyArch::Mlp(a) => a.layout(),
        PolicyArch::Empty => Vec::new(),
    }
}

/// Fresh parameters. `n_nodes` is only consulted by graph-dependent
/// architectures.
pub fn init_params<R: Rng + ?Sized>(arch: &PolicyArch, log_std: f64, rng: &mut R) -> PolicyParams {
    let tensors = match arch {
        PolicyArch::Graph(a) => a.init(log_std, rng),
        PolicyArch::Mlp(a) => a.init(log_std, rng),
        PolicyArch::Empty => Vec::new(),
    };
    PolicyParams { arch: arch.clone(), tensors }
}

/// Per-window constants derived from the parameters and graph (attribute
/// embeddings for graph policies).
pub fn prepare<B: Backend>(b: &mut B, params: &PolicyParams, p: &[B::V], ctx: &GraphCtx) -> Vec<B::V> {
    match &params.arch {
        PolicyArch::Graph(_) => nervenet::attr_features(b, p, ctx),
        _ => Vec::new(),
    }
}

/// One environment step of the policy and value function.
pub fn step<B: Backend>(
    b: &mut B,
    params: &PolicyParams,
    p: &[B::V],
    ctx: &GraphCtx,
    prepared: &[B::V],
    obs: &[Vec<f64>],
    hidden: Vec<B::V>,
) -> StepOut<B::V> {
    match &params.arch {
        PolicyArch::Graph(arch) => {
            let x = nervenet::embed_inputs(b, p, arch, prepared, obs);
            let h = nervenet::propagate(b, p, arch, ctx, &x, hidden);
            let mu = nervenet::policy_mean(b, p, ctx, &h);
            let log_std = nervenet::log_std(b, p, ctx.actuated.len());
            let value = nervenet::value_out(b, p, &h);
            StepOut { mu, log_std, value, hidden: h }
        }
        PolicyArch::Mlp(arch) => {
            let (mu, log_std, value) = baselines::mlp_step(b, arch, p, obs);
            StepOut { mu, log_std, value, hidden }
        }
        PolicyArch::Empty => {
            let k = ctx.actuated.len();
            StepOut { mu: b.zeros(k), log_std: b.zeros(k), value: b.zeros(1), hidden }
        }
    }
}

/// Log-density of `action` under a diagonal Gaussian.
pub fn gaussian_log_prob<B: Backend>(b: &mut B, mu: &B::V, log_std: &B::V, action: &[f64]) -> B::V {
    let k = action.len();
    if k == 0 {
        return b.zeros(1);
    }
    let a = b.constant(action);
    let d = b.sub(&a, mu);
    let d2 = b.square(&d);
    let m2 = b.scale(log_std, -2.0);
    let inv_var = b.exp(&m2);
    let q = b.mul(&d2, &inv_var);
    let q = b.sum(&q);
    let q = b.scale(&q, -0.5);
    let s = b.sum(log_std);
    let lp = b.sub(&q, &s);
    b.offset(&lp, -0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// `KL[N(mu, σ) ‖ N(mu_old, σ_old)]` summed over dimensions, with the old
/// distribution held constant.
pub fn gaussian_kl<B: Backend>(
    b: &mut B,
    mu: &B::V,
    log_std: &B::V,
    mu_old: &[f64],
    log_std_old: &[f64],
) -> B::V {
    let k = mu_old.len();
    if k == 0 {
        return b.zeros(1);
    }
    let inv2var_old: Vec<f64> = log_std_old.iter().map(|ls| 0.5 * (-2.0 * ls).exp()).collect();
    let c = b.constant(&inv2var_old);
    let mo = b.constant(mu_old);
    let dm = b.sub(mu, &mo);
    let dm2 = b.square(&dm);
    let two_ls = b.scale(log_std, 2.0);
    let var = b.exp(&two_ls);
    let num = b.add(&var, &dm2);
    let frac = b.mul(&num, &c);
    let t = b.sub(&frac, log_std);
    let t = b.sum(&t);
    let offset: f64 = log_std_old.iter().map(|ls| ls - 0.5).sum();
    b.offset(&t, offset)
}

/// Convenience evaluation of a full step on plain vectors.
pub fn eval_step(
    params: &PolicyParams,
    p: &[Vec<f64>],
    ctx: &GraphCtx,
    prepared: &[Vec<f64>],
    obs: &[Vec<f64>],
    hidden: Vec<Vec<f64>>,
) -> StepOut<Vec<f64>> {
    step(&mut Eval, params, p, ctx, prepared, obs, hidden)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn log_prob_at_mean() {
        let mu = vec![0.3, -0.2, 0.1];
        let ls = vec![-0.5, 0.2, -1.0];
        let lp = gaussian_log_prob(&mut Eval, &mu, &ls, &mu)[0];
        let expected: f64 =
            ls.iter().map(|l: &f64| -(l.exp() * (2.0 * std::f64::consts::PI).sqrt()).ln()).sum();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn log_prob_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let k = rng.random_range(1..6);
            let mu: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let ls: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..0.5)).collect();
            let a: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
            let oracle: f64 = (0..k)
                .map(|i| {
                    let s = ls[i].exp();
                    let z = (a[i] - mu[i]) / s;
                    (1.0 / (s * (2.0 * std::f64::consts::PI).sqrt())).ln() - 0.5 * z * z
                })
                .sum();
            let lp = gaussian_log_prob(&mut Eval, &mu, &ls, &a)[0];
            assert!((lp - oracle).abs() < 1e-10, "{lp} vs {oracle}");
        }
    }

    #[test]
    fn kl_is_zero_for_identical_and_positive_otherwise() {
        let mu = vec![0.1, 0.4];
        let ls = vec![-0.3, -0.7];
        let kl = gaussian_kl(&mut Eval, &mu, &ls, &mu, &ls)[0];
        assert!(kl.abs() < 1e-14);
        let kl = gaussian_kl(&mut Eval, &vec![0.2, 0.1], &vec![-0.1, -0.9], &mu, &ls)[0];
        // Closed form per dimension.
        let oracle: f64 = [(0.2, -0.1, 0.1, -0.3), (0.1, -0.9, 0.4, -0.7)]
            .iter()
            .map(|&(m1, l1, m0, l0): &(f64, f64, f64, f64)| {
                let (s1, s0) = (l1.exp(), l0.exp());
                (s0 / s1).ln() + (s1 * s1 + (m1 - m0) * (m1 - m0)) / (2.0 * s0 * s0) - 0.5
            })
            .sum();
        assert!(kl > 0.0 && (kl - oracle).abs() < 1e-14);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for arch in [
            PolicyArch::Graph(GraphArch::new(8, 4, 4, 6, 2)),
            PolicyArch::Mlp(MlpArch { input: 18, outputs: 2, hidden: 16 }),
        ] {
            let p = init_params(&arch, -0.5, &mut rng);
            let bytes = p.to_checkpoint_bytes();
            let q = PolicyParams::read_checkpoint(&bytes[..]).unwrap();
            assert_eq!(q.to_checkpoint_bytes(), bytes);
            assert_eq!(p, q);
        }
    }

    #[test]
    fn checkpoint_rejects_truncation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = init_params(&PolicyArch::Graph(GraphArch::new(4, 2, 2, 6, 1)), 0.0, &mut rng);
        let bytes = p.to_checkpoint_bytes();
        assert!(PolicyParams::read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    }
}
