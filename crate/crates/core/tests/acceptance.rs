//! Acceptance checks, one line per criterion.
//!
//! Runs at desk scale by default. `GRAPH_EVO_ACCEPTANCE=full` switches the
//! two comparative experiments (8 and 9) to their full budgets.
//!
//! Criteria 1-5, 10 and 11 are correctness properties and must pass.
//! Criteria 6-9 are empirical claims about search performance: they are
//! measured at their stated thresholds and reported, but a miss does not
//! fail the test run.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use graph_evo::autodiff::{Backend, Eval, Tape};
use graph_evo::baselines::{inherit, make_policy, Method, NetConfig};
use graph_evo::cli::{evaluator, run_session, setup, Common};
use graph_evo::config::{FinetuneConfig, FinetuneMode, FitnessKind, RunConfig};
use graph_evo::envs::{Env, EnvSpec, OBS_WIDTH};
use graph_evo::evolution::{EvolutionConfig, EvolutionState, Landscape};
use graph_evo::morphology::{validate, AttrSpace, AttributeVector, MorphGraph, Node, Species};
use graph_evo::mutation::{mutate, random_graph, MutationConfig};
use graph_evo::nervenet::{attr_features, embed_inputs, policy_mean, propagate, GraphArch, GraphCtx};
use graph_evo::policy::{eval_step, init_params, PolicyArch, PolicyParams};
use graph_evo::ppo::{collect, full_bptt_gradients, segment_loss, window_gradients, PpoConfig, Targets, TrainState};
use graph_evo::surrogate::{predict, SurrogateConfig};
use graph_evo::util::{mann_whitney_greater, mean, median, spearman};

struct Outcome {
    id: usize,
    pass: bool,
    asserted: bool,
}

fn report(id: usize, name: &str, pass: bool, asserted: bool, detail: String, t0: Instant) -> Outcome {
    let tag = match (pass, asserted) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (empirical, not asserted)",
    };
    println!("criterion {id:>2} [{tag}] {name}: {detail} ({:.1}s)", t0.elapsed().as_secs_f64());
    Outcome { id, pass, asserted }
}

fn full_scale() -> bool {
    std::env::var("GRAPH_EVO_ACCEPTANCE").is_ok_and(|v| v == "full")
}

fn attr(angle: f64) -> AttributeVector {
    AttributeVector { geom_a: 0.15, geom_b: 0.05, attach_angle: angle, joint_range: 0.9, joint_gear: 60.0 }
}

fn path(n: usize) -> MorphGraph {
    MorphGraph {
        root_id: 0,
        nodes: (0..n).map(|id| Node { id, attr: attr(0.3 * id as f64) }).collect(),
        edges: (1..n).map(|c| (c - 1, c)).collect(),
    }
}

// 1 ---------------------------------------------------------------------

fn gradient_fidelity() -> Outcome {
    let t0 = Instant::now();
    let space = AttrSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let graph = random_graph(4, &space, &mut rng);
    let ctx = GraphCtx::new(&graph, &space);
    let arch = GraphArch::new(8, 8, 8, OBS_WIDTH, 3);
    let behaviour = init_params(&PolicyArch::Graph(arch), -0.5, &mut rng);
    let mut env = Env::new(&graph, &EnvSpec::fish());
    let ro = collect(&behaviour, &ctx, &mut env, 20, 20, &mut rng);
    let tg = Targets::new(&ro, &PpoConfig::default());
    // Move away from the behaviour policy so ratio and KL terms are active.
    let mut params = behaviour.clone();
    for t in &mut params.tensors {
        for x in &mut t.data {
            *x += 0.05 * rng.random_range(-1.0..1.0);
        }
    }
    let (beta, vc) = (1.3, 0.5);
    let mut tape = Tape::new();
    let (_, grads) = window_gradients(&params, &ctx, &ro, &tg, &[0], beta, vc, &mut tape);
    let loss = |p: &PolicyParams| {
        let v = p.load(&mut Eval);
        let parts = segment_loss(&mut Eval, p, &v, &ctx, &ro, &tg, (0, 20), &ro.windows[0].1, beta, vc);
        Eval.scalar(&parts.total) / 20.0
    };
    let h = 1e-5;
    let floor = 1e-6;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut probe = params.clone();
    for (ti, t) in params.tensors.iter().enumerate() {
        for j in 0..t.data.len() {
            probe.tensors[ti].data[j] = t.data[j] + h;
            let up = loss(&probe);
            probe.tensors[ti].data[j] = t.data[j] - h;
            let down = loss(&probe);
            probe.tensors[ti].data[j] = t.data[j];
            let fd = (up - down) / (2.0 * h);
            let g = grads[ti][j];
            worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(floor));
            count += 1;
        }
    }
    report(
        1,
        "gradient fidelity",
        worst < 1e-4 && t0.elapsed().as_secs() < 60,
        true,
        format!("{count} parameters, max relative error {worst:.2e} (< 1e-4, floor {floor:.0e})"),
        t0,
    )
}

// 2 ---------------------------------------------------------------------

fn truncation_oracle() -> Outcome {
    let t0 = Instant::now();
    let space = AttrSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let graph = random_graph(4, &space, &mut rng);
    let ctx = GraphCtx::new(&graph, &space);
    let params = init_params(&PolicyArch::Graph(GraphArch::new(8, 8, 8, OBS_WIDTH, 3)), -0.5, &mut rng);
    let spec = EnvSpec { horizon: 30, ..EnvSpec::fish() };
    let mut env = Env::new(&graph, &spec);
    let cfg = PpoConfig::default();

    let ro = collect(&params, &ctx, &mut env, 60, 30, &mut rng.clone());
    let tg = Targets::new(&ro, &cfg);
    let all: Vec<usize> = (0..ro.windows.len()).collect();
    let (_, gw) = window_gradients(&params, &ctx, &ro, &tg, &all, 1.0, 0.5, &mut Tape::new());
    let mut full_tape = Tape::new();
    let (_, gf) = full_bptt_gradients(&params, &ctx, &ro, &tg, 1.0, 0.5, &mut full_tape);
    let scale = gf.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let err = gw.iter().flatten().zip(gf.iter().flatten()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / scale;

    let ro10 = collect(&params, &ctx, &mut env, 60, 10, &mut rng.clone());
    let tg10 = Targets::new(&ro10, &cfg);
    let all10: Vec<usize> = (0..ro10.windows.len()).collect();
    let mut short = Tape::new();
    window_gradients(&params, &ctx, &ro10, &tg10, &all10, 1.0, 0.5, &mut short);
    let mut long = Tape::new();
    full_bptt_gradients(&params, &ctx, &ro10, &tg10, 1.0, 0.5, &mut long);
    let (p10, pfull) = (short.peak_floats(), long.peak_floats());
    report(
        2,
        "truncation oracle",
        err <= 1e-10 && p10 < pfull,
        true,
        format!("episode-length windows vs BPTT rel err {err:.1e} (<= 1e-10); peak tape floats {p10} (window 10) < {pfull} (full)"),
        t0,
    )
}

// 3 ---------------------------------------------------------------------

fn mutation_closure() -> Outcome {
    let t0 = Instant::now();
    let space = AttrSpace::default();
    let cfg = MutationConfig::default();
    let (seeds, chain) = (50u64, 2000usize);
    let mut violations = 0usize;
    let mut max_seen = 0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let size = rng.random_range(1..=space.max_nodes);
        let mut g = random_graph(size, &space, &mut rng);
        for _ in 0..chain {
            g = mutate(&g, &cfg, &space, &mut rng).0;
            max_seen = max_seen.max(g.len());
            if validate(&g, &space).is_err() {
                violations += 1;
            }
        }
    }
    report(
        3,
        "mutation closure",
        violations == 0,
        true,
        format!("{} chained mutations, {violations} violations, largest graph {max_seen}", seeds as usize * chain),
        t0,
    )
}

// 4 ---------------------------------------------------------------------

fn policy_sharing() -> Outcome {
    let t0 = Instant::now();
    let space = AttrSpace::default();
    let mcfg = MutationConfig::default();
    let net = NetConfig { d_h: 16, d_obs: 8, d_attr: 8, mlp_hidden: 16, ..NetConfig::default() };
    let ppo = PpoConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (mut shape_breaks, mut non_finite, mut fc_equal_when_resized, mut resized) = (0, 0, 0, 0);
    for _ in 0..1000 {
        let size = rng.random_range(1..=space.max_nodes);
        let parent_graph = random_graph(size, &space, &mut rng);
        let child = mutate(&parent_graph, &mcfg, &space, &mut rng).0;
        let parent = Species {
            species_id: 0,
            parent_id: None,
            birth_generation: 0,
            params: make_policy(Method::Nge, &parent_graph, &net, OBS_WIDTH, &mut rng),
            graph: parent_graph.clone(),
            train: TrainState::new(&ppo),
            fitness: None,
        };
        let (cp, _) = inherit(Method::Nge, &parent, &child, &net, &ppo, OBS_WIDTH, &mut rng);
        if cp.manifest() != parent.params.manifest() {
            shape_breaks += 1;
        }
        let ctx = GraphCtx::new(&child, &space);
        let mut env = Env::new(&child, &EnvSpec::fish());
        let obs = env.reset();
        let p = cp.load(&mut Eval);
        let prepared = graph_evo::policy::prepare(&mut Eval, &cp, &p, &ctx);
        let out = eval_step(&cp, &p, &ctx, &prepared, &obs, cp.zero_hidden(ctx.len()));
        let finite = out.mu.iter().chain(&out.log_std).chain(&out.value).all(|x| x.is_finite());
        if !finite || out.mu.len() != child.len() - 1 {
            non_finite += 1;
        }
        if child.len() != parent_graph.len() {
            resized += 1;
            let a = make_policy(Method::EssSimsAf, &parent_graph, &net, OBS_WIDTH, &mut rng).manifest();
            let b = make_policy(Method::EssSimsAf, &child, &net, OBS_WIDTH, &mut rng).manifest();
            if a == b {
                fc_equal_when_resized += 1;
            }
        }
    }
    report(
        4,
        "policy sharing",
        shape_breaks == 0 && non_finite == 0 && fc_equal_when_resized == 0 && resized > 0,
        true,
        format!(
            "1000 mutations: {shape_breaks} manifest changes, {non_finite} bad forward passes; \
             FC baseline kept its shapes in {fc_equal_when_resized}/{resized} resizes"
        ),
        t0,
    )
}

// 5 ---------------------------------------------------------------------

/// Does perturbing the observation at node 0 change the far end?
fn far_end_moves(n: usize, t_prop: usize) -> bool {
    let space = AttrSpace::default();
    let g = path(n);
    let ctx = GraphCtx::new(&g, &space);
    let arch = GraphArch::new(8, 4, 4, OBS_WIDTH, t_prop);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let p: Vec<Vec<f64>> = arch.init(-0.5, &mut rng).into_iter().map(|t| t.data).collect();
    let obs: Vec<Vec<f64>> = (0..n).map(|_| (0..OBS_WIDTH).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let run = |obs: &[Vec<f64>]| {
        let mut e = Eval;
        let xa = attr_features(&mut e, &p, &ctx);
        let x = embed_inputs(&mut e, &p, &arch, &xa, obs);
        let h = propagate(&mut e, &p, &arch, &ctx, &x, vec![vec![0.0; 8]; n]);
        let mu = policy_mean(&mut e, &p, &ctx, &h);
        (h[n - 1].clone(), mu[n - 2])
    };
    let base = run(&obs);
    let mut moved = obs.clone();
    moved[0][2] += 0.5;
    let after = run(&moved);
    assert_eq!(base.0 != after.0, base.1 != after.1, "hidden state and action disagree");
    base.0 != after.0
}

fn reachability() -> Outcome {
    let t0 = Instant::now();
    let mut wrong = Vec::new();
    for d in 2..=6 {
        for t in 1..=7 {
            if far_end_moves(d, t) != (t >= d) {
                wrong.push((d, t));
            }
        }
    }
    report(
        5,
        "propagation reachability",
        wrong.is_empty(),
        true,
        format!(
            "paths of d = 2..6 nodes, T = 1..7: far end reacts iff T >= d in all but {} cases {wrong:?}",
            wrong.len()
        ),
        t0,
    )
}

// 6, 7 ------------------------------------------------------------------

fn synthetic_config(seed: u64, gmuc: bool, generations: usize) -> RunConfig {
    RunConfig {
        method: if gmuc { Method::Nge } else { Method::EssSimsAf },
        fitness: FitnessKind::Synthetic,
        evolution: EvolutionConfig {
            n: 16,
            candidates: 200,
            max_generations: generations,
            use_gmuc: Some(gmuc),
            ..EvolutionConfig::default()
        },
        surrogate: SurrogateConfig::default(),
        seed,
        ..RunConfig::default()
    }
    .resolved()
    .expect("valid config")
}

fn run_in_memory(cfg: &RunConfig) -> EvolutionState {
    let ev = evaluator(cfg);
    setup(cfg, ev.as_ref()).run()
}

/// Generations until the best fitness reaches `threshold`, stopping early;
/// `cap + 1` if it never does.
fn generations_to(cfg: &RunConfig, threshold: f64) -> usize {
    let ev = evaluator(cfg);
    let s = setup(cfg, ev.as_ref());
    let mut state = s.init_state();
    while state.generation < cfg.evolution.max_generations {
        s.step(&mut state);
        if state.metrics.last().is_some_and(|r| r.best_af >= threshold) {
            return state.generation;
        }
    }
    cfg.evolution.max_generations + 1
}

fn gmuc_speedup() -> Outcome {
    let t0 = Instant::now();
    let cap = 150;
    let mut thompson = Vec::new();
    let mut uniform = Vec::new();
    for seed in 0..10 {
        thompson.push(generations_to(&synthetic_config(seed, true, cap), -0.5) as f64);
        uniform.push(generations_to(&synthetic_config(seed, false, cap), -0.5) as f64);
    }
    let (mt, mu) = (median(&thompson), median(&uniform));
    report(
        6,
        "GM-UC on the synthetic landscape",
        mt <= 0.6 * mu && t0.elapsed().as_secs() < 300,
        false,
        format!(
            "median generations to >= -0.5: Thompson {mt} vs uniform {mu} (ratio {:.2}, need <= 0.60 within 300s; cap {cap}, unreached counts as {}); per seed {thompson:?} vs {uniform:?}",
            mt / mu,
            cap + 1
        ),
        t0,
    )
}

fn surrogate_quality() -> Outcome {
    let t0 = Instant::now();
    let cfg = synthetic_config(7, true, 20);
    let ev = evaluator(&cfg);
    let s = setup(&cfg, ev.as_ref());
    let state = s.run();
    let model = state.surrogate.as_ref().expect("surrogate in use");
    // Held out: fresh mutants of the final population, never observed.
    let survivors = &state.population;
    let candidates = s.spawn_candidates(survivors, 10_000, 200);
    let ls = Landscape::default();
    let pred: Vec<f64> = candidates.iter().map(|c| predict(model, &c.graph, None)).collect();
    let truth: Vec<f64> = candidates.iter().map(|c| ls.fitness(&c.graph)).collect();
    let rho = spearman(&pred, &truth);
    report(
        7,
        "surrogate quality",
        rho > 0.5,
        false,
        format!("Spearman(prediction, fitness) on 200 unseen mutants after 20 generations = {rho:.3} (> 0.5)"),
        t0,
    )
}

// 8, 9 ------------------------------------------------------------------

fn ppo_config(method: Method, seed: u64) -> RunConfig {
    let full = full_scale();
    RunConfig {
        method,
        env: EnvSpec { horizon: if full { 500 } else { 100 }, ..EnvSpec::fish() },
        evolution: EvolutionConfig {
            n: 16,
            max_generations: 20,
            candidates: if full { 200 } else { 64 },
            ..EvolutionConfig::default()
        },
        ppo: PpoConfig {
            epochs_per_generation: 10,
            timesteps_per_update: if full { 2000 } else { 200 },
            minibatch_windows: if full { 25 } else { 5 },
            truncation: 20,
            ..PpoConfig::default()
        },
        net: if full {
            NetConfig::default()
        } else {
            NetConfig { d_h: 16, d_obs: 8, d_attr: 8, mlp_hidden: 32, ..NetConfig::default() }
        },
        surrogate: if full {
            SurrogateConfig::default()
        } else {
            SurrogateConfig { d_h: 16, d_emb: 8, d_fc: 16, epochs: 50, ..SurrogateConfig::default() }
        },
        seed,
        ..RunConfig::default()
    }
}

fn comparative_trend() -> Outcome {
    let t0 = Instant::now();
    let methods = [Method::Nge, Method::EssSimsAf, Method::Rgs];
    let mut best: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut budgets = Vec::new();
    for seed in 0..5 {
        for (m, out) in methods.iter().zip(best.iter_mut()) {
            let cfg = ppo_config(*m, seed).resolved().expect("valid");
            let st = run_in_memory(&cfg);
            out.push(st.best_ever());
            budgets.push(st.total_timesteps);
        }
    }
    let equal = budgets.iter().all(|&b| b == budgets[0]);
    let (m0, m1, m2) = (mean(&best[0]), mean(&best[1]), mean(&best[2]));
    let (_, p01) = mann_whitney_greater(&best[0], &best[1]);
    let (_, p12) = mann_whitney_greater(&best[1], &best[2]);
    let pass = equal && m0 > m1 && m1 > m2 && p01 < 0.1 && p12 < 0.1;
    report(
        8,
        "comparative trend",
        pass,
        false,
        format!(
            "{} scale, mean best AF NGE {m0:.3} / ESS-Sims-AF {m1:.3} / RGS {m2:.3}; \
             one-sided p NGE>ESS {p01:.3}, ESS>RGS {p12:.3} (need < 0.1); equal budgets {equal} ({} steps each)",
            if full_scale() { "full" } else { "desk" },
            budgets[0]
        ),
        t0,
    )
}

fn finetune_trend() -> Outcome {
    let t0 = Instant::now();
    let mut evolved = Vec::new();
    let mut fixed = Vec::new();
    let mut budgets = Vec::new();
    for seed in 0..5 {
        for (mode, out) in [(FinetuneMode::Unconstrained, &mut evolved), (FinetuneMode::Fixed, &mut fixed)] {
            let mut cfg = ppo_config(Method::Nge, seed);
            cfg.finetune = Some(FinetuneConfig { seed_graph: "fish5".into(), mode });
            let cfg = cfg.resolved().expect("valid");
            let st = run_in_memory(&cfg);
            out.push(st.metrics.last().expect("ran").best_af);
            budgets.push(st.total_timesteps);
        }
    }
    let equal = budgets.iter().all(|&b| b == budgets[0]);
    let (me, mf) = (mean(&evolved), mean(&fixed));
    report(
        9,
        "fine-tuning trend",
        equal && me >= mf,
        false,
        format!("final-generation best AF from fish5: unconstrained {me:.3} vs fixed graph {mf:.3}; equal budgets {equal}"),
        t0,
    )
}

// 10 --------------------------------------------------------------------

fn determinism() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let mut small = ppo_config(Method::Nge, 3);
    small.evolution = EvolutionConfig { n: 6, candidates: 12, max_generations: 3, ..EvolutionConfig::default() };
    small.ppo.epochs_per_generation = 2;
    small.ppo.timesteps_per_update = 100;
    let small = small.resolved().expect("valid");
    let synth = synthetic_config(3, true, 10);
    let mut same = true;
    let mut detail = Vec::new();
    for (name, cfg) in [("ppo", &small), ("synthetic", &synth)] {
        for workers in [1, 2] {
            let mut csv = Vec::new();
            for rep in 0..2 {
                let out = dir.path().join(format!("{name}-{workers}-{rep}"));
                let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("pool");
                pool.install(|| run_session(cfg, &out, &Common::default())).expect("run");
                csv.push(std::fs::read(out.join("metrics.csv")).expect("metrics"));
            }
            let eq = csv[0] == csv[1];
            same &= eq;
            detail.push(format!("{name}/{workers}w {}", if eq { "identical" } else { "DIFFERENT" }));
        }
    }
    report(10, "determinism", same, true, format!("repeated runs: {}", detail.join(", ")), t0)
}

// 11 --------------------------------------------------------------------

fn physics() -> Outcome {
    let t0 = Instant::now();
    let space = AttrSpace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    // Free fall: a lone walker link far above the ground.
    let mut spec = EnvSpec::walker();
    spec.walker.drop_height = 1e4;
    let g = MorphGraph::single(attr(0.0));
    let mut env = Env::new(&g, &spec);
    env.reset();
    let mut fall_err: f64 = 0.0;
    for k in 1..=200 {
        env.step(&[]);
        let exact = spec.walker.gravity * spec.dt * (k * spec.frame_skip) as f64;
        let v = env.state.vel[0];
        fall_err = fall_err.max(((v[1] - exact) / exact).abs()).max(v[0].abs());
    }

    // Passive fish: kinetic energy never increases.
    let fish = EnvSpec::fish();
    let mut increases = 0;
    for _ in 0..10_000 {
        let g = random_graph(rng.random_range(1..=8), &space, &mut rng);
        let mut env = Env::new(&g, &fish);
        env.reset();
        for _ in 0..rng.random_range(0..5) {
            let a: Vec<f64> = (0..env.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            env.step(&a);
        }
        for (v, w) in env.state.vel.iter_mut().zip(env.state.omega.iter_mut()) {
            v[0] += rng.random_range(-1.0..1.0);
            v[1] += rng.random_range(-1.0..1.0);
            *w += rng.random_range(-3.0..3.0);
        }
        let zero = vec![0.0; env.action_dim()];
        let mut st = env.state.clone();
        let mut ke = f64::INFINITY;
        for _ in 0..5 {
            env.body.substep(&fish, &mut st, &zero);
            let now = env.body.kinetic_energy(&st);
            if now > ke * (1.0 + 1e-12) + 1e-15 {
                increases += 1;
            }
            ke = now;
        }
    }

    // Joint limits under random actions.
    let mut worst_excess: f64 = 0.0;
    let mut steps = 0usize;
    let per_body = 10_000;
    for b in 0..100 {
        let spec = if b % 2 == 0 { EnvSpec::fish() } else { EnvSpec::walker() };
        let g = random_graph(rng.random_range(2..=8), &space, &mut rng);
        let mut env = Env::new(&g, &spec);
        env.reset();
        for _ in 0..per_body {
            let a: Vec<f64> = (0..env.action_dim()).map(|_| rng.random_range(-1.5..1.5)).collect();
            let r = env.step(&a);
            steps += 1;
            for (k, j) in env.body.joints.iter().enumerate() {
                worst_excess = worst_excess.max(env.body.joint_angle(&env.state, k).abs() - j.range);
            }
            if r.done {
                env.reset();
            }
        }
    }
    report(
        11,
        "physics sanity",
        fall_err <= 1e-12 && increases == 0 && worst_excess <= 1e-9,
        true,
        format!(
            "free-fall rel err {fall_err:.1e} (<= 1e-12); {increases} energy increases over 10^4 passive fish states; \
             max joint-limit excess {worst_excess:.1e} over {steps} random-action steps"
        ),
        t0,
    )
}

fn main() {
    // `cargo test -- --list` and filters: this target has exactly one entry.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let all: [(usize, fn() -> Outcome); 11] = [
        (1, gradient_fidelity),
        (2, truncation_oracle),
        (3, mutation_closure),
        (4, policy_sharing),
        (5, reachability),
        (6, gmuc_speedup),
        (7, surrogate_quality),
        (8, comparative_trend),
        (9, finetune_trend),
        (10, determinism),
        (11, physics),
    ];
    // GRAPH_EVO_ACCEPTANCE_ONLY=6,7 runs a subset.
    let only: Option<Vec<usize>> = std::env::var("GRAPH_EVO_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let outcomes: Vec<Outcome> = all
        .iter()
        .filter(|(id, _)| only.as_ref().is_none_or(|o| o.contains(id)))
        .map(|(_, f)| f())
        .collect();
    let failed: Vec<usize> = outcomes.iter().filter(|o| o.asserted && !o.pass).map(|o| o.id).collect();
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", outcomes.len());
    assert!(failed.is_empty(), "asserted criteria failed: {failed:?}");
}
