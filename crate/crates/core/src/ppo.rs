//! Rollout collection and KL-penalized policy optimization with truncated
//! backpropagation through time.
//!
//! A rollout is cut into windows of at most `truncation` steps that never
//! cross an episode boundary. The hidden state entering each window is
//! stored during collection and treated as a constant when training, so
//! gradients flow through at most one window.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Backend, Eval, Tape};
use crate::envs::{BodyState, Env};
use crate::nervenet::GraphCtx;
use crate::params::{grad_norm, Adam, AdamConfig};
use crate::policy::{self, gaussian_kl, gaussian_log_prob, PolicyParams};
use crate::util::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub kl_target: f64,
    pub beta_init: f64,
    pub timesteps_per_update: usize,
    /// Collect-then-optimize iterations per generation.
    pub epochs_per_generation: usize,
    /// Windows per minibatch.
    pub minibatch_windows: usize,
    pub learning_rate: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    /// Truncation length in timesteps.
    pub truncation: usize,
    pub value_coef: f64,
    pub normalize_advantages: bool,
    /// Global gradient-norm clip; 0 disables it.
    pub max_grad_norm: f64,
    pub adam: AdamConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lam: 0.95,
            kl_target: 0.01,
            beta_init: 1.0,
            timesteps_per_update: 2000,
            epochs_per_generation: 10,
            minibatch_windows: 25,
            learning_rate: 3e-4,
            lr_min: 1e-5,
            lr_max: 1e-2,
            truncation: 20,
            value_coef: 0.5,
            normalize_advantages: true,
            max_grad_norm: 0.0,
            adam: AdamConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn check(&self, horizon: usize) -> Result<(), String> {
        let unit = |name: &str, x: f64, closed: bool| {
            let ok = if closed { (0.0..=1.0).contains(&x) } else { x > 0.0 && x < 1.0 };
            if ok {
                Ok(())
            } else {
                Err(format!("{name}: out of range"))
            }
        };
        unit("gamma", self.gamma, false)?;
        unit("lam", self.lam, true)?;
        for (name, x) in [
            ("kl_target", self.kl_target),
            ("beta_init", self.beta_init),
            ("learning_rate", self.learning_rate),
            ("lr_min", self.lr_min),
            ("lr_max", self.lr_max),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(format!("{name}: must be positive"));
            }
        }
        if self.lr_min > self.learning_rate || self.learning_rate > self.lr_max {
            return Err("learning_rate: must lie in [lr_min, lr_max]".into());
        }
        if self.timesteps_per_update == 0 || self.epochs_per_generation == 0 || self.minibatch_windows == 0 {
            return Err("timesteps_per_update, epochs_per_generation and minibatch_windows must be positive".into());
        }
        if self.truncation == 0 || self.truncation > horizon {
            return Err(format!("truncation: must lie in [1, horizon = {horizon}]"));
        }
        if self.value_coef < 0.0 || self.max_grad_norm < 0.0 {
            return Err("value_coef and max_grad_norm must be nonnegative".into());
        }
        Ok(())
    }
}

/// Optimizer and penalty state that travels with a controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub adam: Option<Adam>,
    pub beta: f64,
    pub lr: f64,
    /// Optimizer steps skipped because of non-finite gradients or weights.
    pub skipped_steps: u64,
}

impl TrainState {
    pub fn new(cfg: &PpoConfig) -> Self {
        TrainState { adam: None, beta: cfg.beta_init, lr: cfg.learning_rate, skipped_steps: 0 }
    }

    /// State for a controller that is never trained.
    pub fn idle() -> Self {
        TrainState { adam: None, beta: 1.0, lr: 0.0, skipped_steps: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub obs: Vec<Vec<Vec<f64>>>,
    /// Simulator state before each step, for replay.
    pub states: Vec<BodyState>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    /// Behaviour-policy mean and log-std, for the KL penalty.
    pub mu: Vec<Vec<f64>>,
    pub log_std: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub episode_start: Vec<bool>,
    /// Steps at which a window starts, with the hidden state entering it.
    pub windows: Vec<(usize, Vec<Vec<f64>>)>,
    /// Value of the state after the last step (0 if that step ended an
    /// episode).
    pub last_value: f64,
    pub episode_returns: Vec<f64>,
    /// Return of the trailing unfinished episode.
    pub partial_return: f64,
    pub diverged_episodes: usize,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// `(start, end)` step range of window `w`.
    pub fn window_range(&self, w: usize) -> (usize, usize) {
        let start = self.windows[w].0;
        let end = self.windows.get(w + 1).map_or(self.len(), |x| x.0);
        (start, end)
    }

    /// Mean undiscounted return of completed episodes, or the partial
    /// return if none completed.
    pub fn mean_return(&self) -> f64 {
        if self.episode_returns.is_empty() {
            self.partial_return
        } else {
            self.episode_returns.iter().sum::<f64>() / self.episode_returns.len() as f64
        }
    }
}

/// Runs the stochastic policy for `n` steps from a fresh episode.
pub fn collect<R: Rng + ?Sized>(
    params: &PolicyParams,
    ctx: &GraphCtx,
    env: &mut Env,
    n: usize,
    truncation: usize,
    rng: &mut R,
) -> Rollout {
    let p = params.load(&mut Eval);
    let prepared = policy::prepare(&mut Eval, params, &p, ctx);
    let mut ro = Rollout {
        obs: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        actions: Vec::with_capacity(n),
        log_probs: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        log_std: Vec::with_capacity(n),
        rewards: Vec::with_capacity(n),
        values: Vec::with_capacity(n),
        dones: Vec::with_capacity(n),
        episode_start: Vec::with_capacity(n),
        windows: Vec::new(),
        last_value: 0.0,
        episode_returns: Vec::new(),
        partial_return: 0.0,
        diverged_episodes: 0,
    };
    let mut obs = env.reset();
    let mut hidden = params.zero_hidden(ctx.len());
    let mut new_episode = true;
    let mut since_window = 0;
    let mut ep_return = 0.0;
    for _ in 0..n {
        if new_episode || since_window == truncation {
            ro.windows.push((ro.len(), hidden.clone()));
            since_window = 0;
        }
        let out = policy::eval_step(params, &p, ctx, &prepared, &obs, hidden);
        let action: Vec<f64> = out
            .mu
            .iter()
            .zip(&out.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = gaussian_log_prob(&mut Eval, &out.mu, &out.log_std, &action)[0];
        ro.states.push(env.state.clone());
        let res = env.step(&action);
        ro.obs.push(obs);
        ro.actions.push(action);
        ro.log_probs.push(lp);
        ro.mu.push(out.mu);
        ro.log_std.push(out.log_std);
        ro.rewards.push(res.reward);
        ro.values.push(out.value[0]);
        ro.dones.push(res.done);
        ro.episode_start.push(new_episode);
        ep_return += res.reward;
        since_window += 1;
        if res.diverged {
            ro.diverged_episodes += 1;
        }
        if res.done {
            ro.episode_returns.push(ep_return);
            ep_return = 0.0;
            obs = env.reset();
            hidden = params.zero_hidden(ctx.len());
            new_episode = true;
        } else {
            obs = res.obs;
            hidden = out.hidden;
            new_episode = false;
        }
    }
    ro.partial_return = ep_return;
    if !new_episode {
        let out = policy::eval_step(params, &p, ctx, &prepared, &obs, hidden);
        ro.last_value = out.value[0];
    }
    ro
}

/// GAE(λ) advantages and returns. Episodes are cut at `dones`; the tail of
/// an unfinished episode bootstraps from `last_value`.
pub fn advantages(ro: &Rollout, gamma: f64, lam: f64) -> (Vec<f64>, Vec<f64>) {
    let n = ro.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = ro.last_value;
    for t in (0..n).rev() {
        if ro.dones[t] {
            next_adv = 0.0;
            next_value = 0.0;
        }
        let delta = ro.rewards[t] + gamma * next_value - ro.values[t];
        adv[t] = delta + gamma * lam * next_adv;
        next_adv = adv[t];
        next_value = ro.values[t];
    }
    let ret = adv.iter().zip(&ro.values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Per-step training targets.
#[derive(Debug, Clone)]
pub struct Targets {
    pub adv: Vec<f64>,
    pub ret: Vec<f64>,
}

impl Targets {
    pub fn new(ro: &Rollout, cfg: &PpoConfig) -> Self {
        let (mut adv, ret) = advantages(ro, cfg.gamma, cfg.lam);
        if cfg.normalize_advantages && adv.len() > 1 {
            let n = adv.len() as f64;
            let mean = adv.iter().sum::<f64>() / n;
            let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
            for a in &mut adv {
                *a = (*a - mean) / (std + 1e-8);
            }
        }
        Targets { adv, ret }
    }
}

/// Loss terms summed over a set of steps.
pub struct LossParts<V> {
    pub total: V,
    pub surrogate: f64,
    pub kl: f64,
    pub value: f64,
}

/// Per-step objective `-ratio·A + β·KL[new‖old] + c·(V − R)²`, summed over
/// the steps `range`, starting from `hidden` (treated as a constant).
#[allow(clippy::too_many_arguments)]
pub fn segment_loss<B: Backend>(
    b: &mut B,
    params: &PolicyParams,
    p: &[B::V],
    ctx: &GraphCtx,
    ro: &Rollout,
    tg: &Targets,
    range: (usize, usize),
    hidden: &[Vec<f64>],
    beta: f64,
    value_coef: f64,
) -> LossParts<B::V> {
    let prepared = policy::prepare(b, params, p, ctx);
    let mut h: Vec<B::V> = hidden.iter().map(|x| b.constant(x)).collect();
    let mut terms = Vec::with_capacity(range.1 - range.0);
    let (mut s_pg, mut s_kl, mut s_v) = (0.0, 0.0, 0.0);
    for t in range.0..range.1 {
        if t > range.0 && ro.episode_start[t] {
            h = params.zero_hidden(ctx.len()).iter().map(|x| b.constant(x)).collect();
        }
        let out = policy::step(b, params, p, ctx, &prepared, &ro.obs[t], h);
        let lp = gaussian_log_prob(b, &out.mu, &out.log_std, &ro.actions[t]);
        let lr = b.offset(&lp, -ro.log_probs[t]);
        let ratio = b.exp(&lr);
        let pg = b.scale(&ratio, -tg.adv[t]);
        let kl = gaussian_kl(b, &out.mu, &out.log_std, &ro.mu[t], &ro.log_std[t]);
        let err = b.offset(&out.value, -tg.ret[t]);
        let v2 = b.square(&err);
        s_pg += b.scalar(&pg);
        s_kl += b.scalar(&kl);
        s_v += b.scalar(&v2);
        let klb = b.scale(&kl, beta);
        let vb = b.scale(&v2, value_coef);
        terms.push(b.sum_n(&[pg, klb, vb]));
        h = out.hidden;
    }
    let total = if terms.is_empty() { b.zeros(1) } else { b.sum_n(&terms) };
    LossParts { total, surrogate: s_pg, kl: s_kl, value: s_v }
}

/// Gradient of the mean per-step loss over the given windows. Each window
/// gets its own tape, so recorded memory is bounded by the window length.
#[allow(clippy::too_many_arguments)]
pub fn window_gradients(
    params: &PolicyParams,
    ctx: &GraphCtx,
    ro: &Rollout,
    tg: &Targets,
    windows: &[usize],
    beta: f64,
    value_coef: f64,
    tape: &mut Tape,
) -> (f64, Vec<Vec<f64>>) {
    let steps: usize = windows.iter().map(|&w| ro.window_range(w)).map(|(a, b)| b - a).sum();
    let scale = 1.0 / steps.max(1) as f64;
    let mut grads = params.zero_grads();
    let mut loss = 0.0;
    for &w in windows {
        tape.clear();
        let vars = params.load_tape(tape);
        let parts = segment_loss(tape, params, &vars, ctx, ro, tg, ro.window_range(w), &ro.windows[w].1, beta, value_coef);
        let out = tape.scale(&parts.total, scale);
        loss += tape.scalar(&out);
        let g = tape.backward(out);
        PolicyParams::add_grads(&mut grads, &g, &vars);
    }
    (loss, grads)
}

/// Untruncated reference: one tape over the whole rollout, hidden state
/// carried through every step and reset only at episode starts.
pub fn full_bptt_gradients(
    params: &PolicyParams,
    ctx: &GraphCtx,
    ro: &Rollout,
    tg: &Targets,
    beta: f64,
    value_coef: f64,
    tape: &mut Tape,
) -> (f64, Vec<Vec<f64>>) {
    tape.clear();
    let vars = params.load_tape(tape);
    let zero = params.zero_hidden(ctx.len());
    let parts = segment_loss(tape, params, &vars, ctx, ro, tg, (0, ro.len()), &zero, beta, value_coef);
    let out = tape.scale(&parts.total, 1.0 / ro.len().max(1) as f64);
    let loss = tape.scalar(&out);
    let g = tape.backward(out);
    (loss, params.collect_grads(&g, &vars))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean per-step KL between the updated and the behaviour policy.
    pub kl: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    /// Penalty coefficient after adaptation.
    pub beta: f64,
    pub lr: f64,
    pub skipped: u64,
}

/// Mean KL, surrogate and value loss of `params` over the whole rollout.
pub fn evaluate_objective(params: &PolicyParams, ctx: &GraphCtx, ro: &Rollout, tg: &Targets) -> (f64, f64, f64) {
    let p = params.load(&mut Eval);
    let (mut s, mut k, mut v) = (0.0, 0.0, 0.0);
    for w in 0..ro.windows.len() {
        let parts = segment_loss(&mut Eval, params, &p, ctx, ro, tg, ro.window_range(w), &ro.windows[w].1, 0.0, 0.0);
        s += parts.surrogate;
        k += parts.kl;
        v += parts.value;
    }
    let n = ro.len().max(1) as f64;
    (k / n, s / n, v / n)
}

/// One optimization epoch over shuffled minibatches of windows, followed by
/// KL-driven adaptation of the penalty and the step size.
pub fn update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    state: &mut TrainState,
    ctx: &GraphCtx,
    ro: &Rollout,
    cfg: &PpoConfig,
    tape: &mut Tape,
    rng: &mut R,
) -> UpdateStats {
    let tg = Targets::new(ro, cfg);
    let mut order: Vec<usize> = (0..ro.windows.len()).collect();
    order.shuffle(rng);
    let mut skipped = 0;
    for batch in order.chunks(cfg.minibatch_windows) {
        let (loss, mut grads) = window_gradients(params, ctx, ro, &tg, batch, state.beta, cfg.value_coef, tape);
        let norm = grad_norm(&grads);
        if !loss.is_finite() || !norm.is_finite() {
            skipped += 1;
            state.lr = (state.lr * 0.5).max(cfg.lr_min);
            continue;
        }
        if cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm {
            let c = cfg.max_grad_norm / norm;
            grads.iter_mut().flatten().for_each(|g| *g *= c);
        }
        let backup = params.tensors.clone();
        let adam_backup = state.adam.clone();
        let adam = state.adam.get_or_insert_with(|| Adam::new(&params.tensors));
        adam.step(&cfg.adam, state.lr, &mut params.tensors, &grads);
        if !params.is_finite() {
            params.tensors = backup;
            state.adam = adam_backup;
            skipped += 1;
            state.lr = (state.lr * 0.5).max(cfg.lr_min);
        }
    }
    state.skipped_steps += skipped;
    let (kl, surrogate, value_loss) = evaluate_objective(params, ctx, ro, &tg);
    if kl > 2.0 * cfg.kl_target {
        state.beta *= 1.5;
        state.lr = (state.lr / 1.5).max(cfg.lr_min);
    } else if kl < cfg.kl_target / 2.0 {
        state.beta /= 1.5;
        state.lr = (state.lr * 1.5).min(cfg.lr_max);
    }
    UpdateStats { kl, surrogate, value_loss, beta: state.beta, lr: state.lr, skipped }
}

/// One row of the training statistics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub generation: usize,
    pub species_id: u64,
    #[serde(with = "crate::util::any_f64")]
    pub mean_reward: f64,
    #[serde(with = "crate::util::any_f64")]
    pub kl: f64,
    pub beta: f64,
    #[serde(with = "crate::util::any_f64")]
    pub value_loss: f64,
}

pub fn write_train_rows<W: Write>(mut w: W, rows: &[TrainRow]) -> std::io::Result<()> {
    writeln!(w, "generation,species_id,mean_reward,kl,beta,value_loss")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.generation,
            r.species_id,
            fmt_f64(r.mean_reward),
            fmt_f64(r.kl),
            fmt_f64(r.beta),
            fmt_f64(r.value_loss)
        )?;
    }
    Ok(())
}
