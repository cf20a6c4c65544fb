//! The outer evolutionary loop.
//!
//! Each generation: train and score every species, log, drop the worst K,
//! mutate C candidates from uniformly chosen survivors, prune the
//! candidates to K (surrogate-guided or uniformly at random) and carry
//! survivors plus kept children into the next generation.
//!
//! Every random draw comes from a stream derived from the run seed and the
//! draw's role (generation, species, purpose), so results do not depend on
//! the number of worker threads.

use std::fmt::Write as _;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::baselines::{inherit, make_policy, Inheritance, Method, NetConfig};
use crate::envs::{Env, EnvSpec, OBS_WIDTH};
use crate::morphology::{AttrSpace, MorphGraph, Species};
use crate::mutation::{mutate, random_graph, MutationConfig, Primitive};
use crate::nervenet::GraphCtx;
use crate::policy::PolicyParams;
use crate::ppo::{collect, update, PpoConfig, TrainRow, TrainState};
use crate::surrogate::{fit, heldout_spearman, monitor_loss, prune_thompson, DataPoint, SurrogateConfig, SurrogateModel, SurrogateRow};
use crate::util::{fmt_f64, purpose, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    /// Species per generation.
    pub n: usize,
    pub elim_rate: f64,
    /// Mutated candidates before pruning.
    pub candidates: usize,
    pub max_generations: usize,
    pub reset_controllers: bool,
    pub reset_freq: usize,
    /// Surrogate-guided pruning; `None` uses the method's default.
    pub use_gmuc: Option<bool>,
    /// Initial graphs have a uniformly drawn size in `1..=init_max_nodes`.
    pub init_max_nodes: usize,
    /// Set from the run seed.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig {
            n: 16,
            elim_rate: 0.2,
            candidates: 200,
            max_generations: 400,
            reset_controllers: false,
            reset_freq: 50,
            use_gmuc: None,
            init_max_nodes: 4,
            seed: 0,
        }
    }
}

impl EvolutionConfig {
    /// Species eliminated (and children kept) per generation.
    pub fn k(&self) -> usize {
        (self.elim_rate * self.n as f64 - 1e-9).ceil().max(0.0) as usize
    }

    pub fn check(&self) -> Result<(), String> {
        if !(self.elim_rate > 0.0 && self.elim_rate < 1.0) {
            return Err("evolution.elim_rate: must lie in (0, 1)".into());
        }
        let k = self.k();
        if k < 1 || k >= self.n {
            return Err(format!("evolution: need n > K >= 1 (n = {}, K = {k})", self.n));
        }
        if self.candidates < k {
            return Err(format!("evolution.candidates: must be at least K = {k}"));
        }
        if self.reset_controllers && self.reset_freq == 0 {
            return Err("evolution.reset_freq: must be positive".into());
        }
        if self.init_max_nodes == 0 {
            return Err("evolution.init_max_nodes: must be positive".into());
        }
        Ok(())
    }
}

/// Result of training and scoring one species for one generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub af: f64,
    pub timesteps: u64,
    pub rows: Vec<TrainRow>,
}

/// Trains (if applicable) and scores a species in place.
pub trait FitnessEvaluator: Sync {
    fn evaluate(&self, species: &mut Species, generation: usize, seed: u64) -> Evaluation;
    /// False when fitness ignores the controller; species then carry no
    /// parameters.
    fn uses_policy(&self) -> bool {
        true
    }
}

/// Amortized fitness: continue PPO from the inherited parameters, then
/// score the mean episode return of the final rollout.
#[derive(Debug, Clone)]
pub struct PpoEvaluator {
    pub env: EnvSpec,
    pub ppo: PpoConfig,
    pub space: AttrSpace,
}

impl FitnessEvaluator for PpoEvaluator {
    fn evaluate(&self, s: &mut Species, generation: usize, seed: u64) -> Evaluation {
        let ctx = GraphCtx::new(&s.graph, &self.space);
        let mut env = Env::new(&s.graph, &self.env);
        let mut tape = Tape::new();
        let mut rows = Vec::with_capacity(self.ppo.epochs_per_generation);
        let mut af = f64::NEG_INFINITY;
        for e in 0..self.ppo.epochs_per_generation {
            let mut rng = rng_for(seed, &[purpose::TRAIN, generation as u64, s.species_id, e as u64]);
            let ro = collect(&s.params, &ctx, &mut env, self.ppo.timesteps_per_update, self.ppo.truncation, &mut rng);
            af = ro.mean_return();
            let st = update(&mut s.params, &mut s.train, &ctx, &ro, &self.ppo, &mut tape, &mut rng);
            rows.push(TrainRow {
                generation,
                species_id: s.species_id,
                mean_reward: af,
                kl: st.kl,
                beta: st.beta,
                value_loss: st.value_loss,
            });
        }
        if !af.is_finite() || !s.params.is_finite() {
            af = f64::NEG_INFINITY;
        }
        let timesteps = (self.ppo.epochs_per_generation * self.ppo.timesteps_per_update) as u64;
        Evaluation { af, timesteps, rows }
    }
}

/// Closed-form fitness used to exercise the search without any control:
/// `-(|V| - target)² - Σ attach_angle² / 10`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landscape {
    pub target_nodes: usize,
}

impl Default for Landscape {
    fn default() -> Self {
        Landscape { target_nodes: 7 }
    }
}

impl Landscape {
    pub fn fitness(&self, g: &MorphGraph) -> f64 {
        let d = g.len() as f64 - self.target_nodes as f64;
        -d * d - g.nodes.iter().map(|n| n.attr.attach_angle.powi(2)).sum::<f64>() / 10.0
    }
}

impl FitnessEvaluator for Landscape {
    fn evaluate(&self, s: &mut Species, _generation: usize, _seed: u64) -> Evaluation {
        Evaluation { af: self.fitness(&s.graph), timesteps: 0, rows: Vec::new() }
    }

    fn uses_policy(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessEntry {
    pub generation: usize,
    #[serde(with = "crate::util::any_f64")]
    pub af: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenealogyRecord {
    pub species_id: u64,
    pub parent_id: Option<u64>,
    pub birth_generation: usize,
    pub mutation: Option<Primitive>,
    pub nodes: usize,
    pub history: Vec<FitnessEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: Method,
    pub gen: usize,
    #[serde(with = "crate::util::any_f64")]
    pub best_af: f64,
    /// Mean over species with finite fitness.
    #[serde(with = "crate::util::any_f64")]
    pub mean_af: f64,
    #[serde(with = "crate::util::any_f64")]
    pub worst_af: f64,
    pub mean_nodes: f64,
}

pub fn write_metrics<W: Write>(mut w: W, rows: &[MetricsRow]) -> std::io::Result<()> {
    writeln!(w, "method,gen,best_af,mean_af,worst_af,mean_nodes")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.method.name(),
            r.gen,
            fmt_f64(r.best_af),
            fmt_f64(r.mean_af),
            fmt_f64(r.worst_af),
            fmt_f64(r.mean_nodes)
        )?;
    }
    Ok(())
}

/// Everything needed to continue a run after the last completed generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionState {
    /// Next generation to evaluate.
    pub generation: usize,
    pub population: Vec<Species>,
    pub next_id: u64,
    pub genealogy: Vec<GenealogyRecord>,
    pub surrogate: Option<SurrogateModel>,
    pub metrics: Vec<MetricsRow>,
    pub surrogate_rows: Vec<SurrogateRow>,
    pub train_rows: Vec<TrainRow>,
    /// Best evaluated species so far, with its fitness at that time.
    pub best: Option<Species>,
    pub total_timesteps: u64,
    /// Species trained so far.
    pub evaluations: u64,
}

impl EvolutionState {
    /// Highest fitness observed in any generation.
    pub fn best_ever(&self) -> f64 {
        self.metrics.iter().map(|r| r.best_af).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// How graphs evolve across generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    /// Mutation as configured.
    Evolve,
    /// Children copy their parent's graph unchanged; only controllers
    /// train.
    Fixed,
}

/// Static description of a run.
pub struct Setup<'a> {
    pub method: Method,
    pub evo: EvolutionConfig,
    pub mutation: MutationConfig,
    pub net: NetConfig,
    pub ppo: PpoConfig,
    pub surrogate: SurrogateConfig,
    pub space: AttrSpace,
    pub evaluator: &'a dyn FitnessEvaluator,
    /// Every initial species starts from this graph when set.
    pub seed_graph: Option<MorphGraph>,
    pub graph_mode: GraphMode,
}

/// A mutated graph waiting to be pruned.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub parent: usize,
    pub graph: MorphGraph,
    pub tag: Option<Primitive>,
}

/// Removes the `k` lowest-fitness species; among equal fitness the older
/// (earlier birth, then lower id) goes first. Returns survivor indices in
/// population order.
pub fn select_survivors(population: &[Species], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    let fit = |s: &Species| s.fitness.unwrap_or(f64::NEG_INFINITY);
    order.sort_by(|&a, &b| {
        let (sa, sb) = (&population[a], &population[b]);
        fit(sa)
            .total_cmp(&fit(sb))
            .then(sa.birth_generation.cmp(&sb.birth_generation))
            .then(sa.species_id.cmp(&sb.species_id))
    });
    let mut keep: Vec<usize> = order[k.min(order.len())..].to_vec();
    keep.sort_unstable();
    keep
}

impl Setup<'_> {
    fn seed(&self) -> u64 {
        self.evo.seed
    }

    pub fn use_gmuc(&self) -> bool {
        self.method != Method::Rgs && self.evo.use_gmuc.unwrap_or(self.method.uses_surrogate())
    }

    fn fresh_params<R: Rng + ?Sized>(&self, graph: &MorphGraph, rng: &mut R) -> (PolicyParams, TrainState) {
        if self.evaluator.uses_policy() {
            (make_policy(self.method, graph, &self.net, OBS_WIDTH, rng), TrainState::new(&self.ppo))
        } else {
            (PolicyParams::empty(), TrainState::idle())
        }
    }

    fn new_species(&self, id: u64, parent: Option<u64>, gen: usize, graph: MorphGraph) -> Species {
        let mut rng = rng_for(self.seed(), &[purpose::INIT, id]);
        let (params, train) = self.fresh_params(&graph, &mut rng);
        Species { species_id: id, parent_id: parent, birth_generation: gen, graph, params, train, fitness: None }
    }

    /// Graph number `j` of random graph search.
    pub fn random_search_graph(&self, j: u64) -> MorphGraph {
        let mut rng = rng_for(self.seed(), &[purpose::RANDOM_GRAPHS, j]);
        let size = rng.random_range(1..=self.evo.init_max_nodes.min(self.space.max_nodes));
        random_graph(size, &self.space, &mut rng)
    }

    /// Initial population of `n` species with ids `0..n`.
    pub fn init_generation(&self) -> Vec<Species> {
        (0..self.evo.n as u64)
            .map(|id| {
                let graph = if self.method == Method::Rgs {
                    self.random_search_graph(id)
                } else if let Some(g) = &self.seed_graph {
                    g.canonicalize().expect("seed graph is valid")
                } else {
                    let mut rng = rng_for(self.seed(), &[purpose::INIT, u64::MAX, id]);
                    let size = rng.random_range(1..=self.evo.init_max_nodes.min(self.space.max_nodes));
                    random_graph(size, &self.space, &mut rng)
                };
                self.new_species(id, None, 0, graph)
            })
            .collect()
    }

    pub fn init_state(&self) -> EvolutionState {
        let population = self.init_generation();
        let genealogy = population
            .iter()
            .map(|s| GenealogyRecord {
                species_id: s.species_id,
                parent_id: None,
                birth_generation: 0,
                mutation: None,
                nodes: s.graph.len(),
                history: Vec::new(),
            })
            .collect();
        let surrogate = self.use_gmuc().then(|| {
            let mut rng = rng_for(self.seed(), &[purpose::SURROGATE, u64::MAX]);
            SurrogateModel::new(self.surrogate.clone(), self.space.clone(), &mut rng)
        });
        EvolutionState {
            generation: 0,
            next_id: population.len() as u64,
            population,
            genealogy,
            surrogate,
            metrics: Vec::new(),
            surrogate_rows: Vec::new(),
            train_rows: Vec::new(),
            best: None,
            total_timesteps: 0,
            evaluations: 0,
        }
    }

    /// Trains and scores every species of the current generation.
    pub fn evaluate(&self, state: &mut EvolutionState) {
        let gen = state.generation;
        if self.method.inheritance() == Inheritance::Never && self.evaluator.uses_policy() {
            for s in state.population.iter_mut().filter(|s| s.birth_generation < gen) {
                let mut rng = rng_for(self.seed(), &[purpose::RESET, gen as u64, s.species_id]);
                (s.params, s.train) = self.fresh_params(&s.graph, &mut rng);
            }
        }
        let seed = self.seed();
        let evals: Vec<Evaluation> =
            state.population.par_iter_mut().map(|s| self.evaluator.evaluate(s, gen, seed)).collect();
        for (s, ev) in state.population.iter_mut().zip(evals) {
            s.fitness = Some(ev.af);
            state.total_timesteps += ev.timesteps;
            state.evaluations += 1;
            state.train_rows.extend(ev.rows);
            if let Some(r) = state.genealogy.iter_mut().find(|r| r.species_id == s.species_id) {
                r.history.push(FitnessEntry { generation: gen, af: ev.af });
            }
            let better = match &state.best {
                None => true,
                Some(b) => ev.af > b.fitness.unwrap_or(f64::NEG_INFINITY),
            };
            if better {
                state.best = Some(s.clone());
            }
        }
        let fits: Vec<f64> = state.population.iter().map(|s| s.fitness.unwrap()).collect();
        let finite: Vec<f64> = fits.iter().copied().filter(|f| f.is_finite()).collect();
        state.metrics.push(MetricsRow {
            method: self.method,
            gen,
            best_af: fits.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_af: if finite.is_empty() { f64::NAN } else { finite.iter().sum::<f64>() / finite.len() as f64 },
            worst_af: fits.iter().copied().fold(f64::INFINITY, f64::min),
            mean_nodes: state.population.iter().map(|s| s.graph.len() as f64).sum::<f64>() / fits.len() as f64,
        });
    }

    /// Scores the new generation with the current surrogate, then refits on
    /// everything observed so far.
    fn refit_surrogate(&self, state: &mut EvolutionState) {
        let gen = state.generation;
        let Some(model) = state.surrogate.as_mut() else { return };
        let points: Vec<DataPoint> = state
            .population
            .iter()
            .map(|s| DataPoint { graph: s.graph.clone(), fitness: s.fitness.unwrap(), generation: gen })
            .collect();
        // Survivors were already fitted on; only newcomers are held out.
        let unseen: Vec<DataPoint> = state
            .population
            .iter()
            .zip(&points)
            .filter(|(s, _)| s.birth_generation == gen)
            .map(|(_, p)| p.clone())
            .collect();
        let rho = if model.dataset.is_empty() || unseen.len() < 2 {
            f64::NAN
        } else {
            heldout_spearman(model, &unseen)
        };
        model.add_observations(points);
        let mut rng = rng_for(self.seed(), &[purpose::SURROGATE, gen as u64]);
        fit(model, self.surrogate.epochs, &mut rng);
        let train_loss = monitor_loss(model);
        state.surrogate_rows.push(SurrogateRow { generation: gen, train_loss, heldout_spearman: rho });
    }

    /// Mutates `c` candidates from uniformly chosen survivors.
    pub fn spawn_candidates(&self, survivors: &[Species], gen: usize, c: usize) -> Vec<Candidate> {
        (0..c)
            .map(|i| {
                let mut rng = rng_for(self.seed(), &[purpose::MUTATE, gen as u64, i as u64]);
                let parent = rng.random_range(0..survivors.len());
                let pg = &survivors[parent].graph;
                let (graph, tag) = match self.graph_mode {
                    GraphMode::Fixed => (pg.clone(), None),
                    GraphMode::Evolve => {
                        let (g, t) = mutate(pg, &self.mutation, &self.space, &mut rng);
                        (g, Some(t))
                    }
                };
                Candidate { parent, graph, tag }
            })
            .collect()
    }

    /// Chooses `k` of the candidates.
    pub fn prune(&self, state: &EvolutionState, candidates: &[Candidate], k: usize) -> Vec<usize> {
        let mut rng = rng_for(self.seed(), &[purpose::PRUNE, state.generation as u64]);
        match state.surrogate.as_ref() {
            Some(model) if self.use_gmuc() && !model.dataset.is_empty() => {
                let graphs: Vec<MorphGraph> = candidates.iter().map(|c| c.graph.clone()).collect();
                prune_thompson(model, &graphs, k, &mut rng).selected
            }
            _ => {
                let mut pick = index::sample(&mut rng, candidates.len(), k).into_vec();
                pick.sort_unstable();
                pick
            }
        }
    }

    /// Selection, mutation, pruning and optional controller reset; advances
    /// to the next generation.
    pub fn advance(&self, state: &mut EvolutionState) {
        let gen = state.generation;
        let k = self.evo.k();
        if self.method == Method::Rgs {
            // No evolution: the next generation is the next batch of random graphs.
            let base = state.next_id;
            state.population = (0..self.evo.n as u64)
                .map(|j| self.new_species(base + j, None, gen + 1, self.random_search_graph(base + j)))
                .collect();
            for s in &state.population {
                state.genealogy.push(GenealogyRecord {
                    species_id: s.species_id,
                    parent_id: None,
                    birth_generation: gen + 1,
                    mutation: None,
                    nodes: s.graph.len(),
                    history: Vec::new(),
                });
            }
            state.next_id += self.evo.n as u64;
            state.generation += 1;
            return;
        }
        self.refit_surrogate(state);
        let keep = select_survivors(&state.population, k);
        let survivors: Vec<Species> = keep.iter().map(|&i| state.population[i].clone()).collect();
        let candidates = self.spawn_candidates(&survivors, gen, self.evo.candidates);
        let chosen = self.prune(state, &candidates, k);
        let mut children = Vec::with_capacity(k);
        for &i in &chosen {
            let cand = &candidates[i];
            let parent = &survivors[cand.parent];
            let id = state.next_id;
            state.next_id += 1;
            let mut rng = rng_for(self.seed(), &[purpose::INIT, gen as u64, i as u64]);
            let (params, train) = if self.evaluator.uses_policy() {
                inherit(self.method, parent, &cand.graph, &self.net, &self.ppo, OBS_WIDTH, &mut rng)
            } else {
                (PolicyParams::empty(), TrainState::idle())
            };
            state.genealogy.push(GenealogyRecord {
                species_id: id,
                parent_id: Some(parent.species_id),
                birth_generation: gen + 1,
                mutation: cand.tag,
                nodes: cand.graph.len(),
                history: Vec::new(),
            });
            children.push(Species {
                species_id: id,
                parent_id: Some(parent.species_id),
                birth_generation: gen + 1,
                graph: cand.graph.clone(),
                params,
                train,
                fitness: None,
            });
        }
        let mut next = survivors;
        next.extend(children);
        if self.evo.reset_controllers && (gen + 1) % self.evo.reset_freq == 0 {
            for s in &mut next {
                let mut rng = rng_for(self.seed(), &[purpose::RESET, u64::MAX, gen as u64, s.species_id]);
                (s.params, s.train) = self.fresh_params(&s.graph, &mut rng);
            }
        }
        state.population = next;
        state.generation += 1;
    }

    /// One full generation.
    pub fn step(&self, state: &mut EvolutionState) {
        self.evaluate(state);
        self.advance(state);
    }

    /// Runs until `max_generations`, calling `on_generation` after each.
    pub fn run_from(&self, mut state: EvolutionState, mut on_generation: impl FnMut(&EvolutionState)) -> EvolutionState {
        while state.generation < self.evo.max_generations {
            self.step(&mut state);
            on_generation(&state);
        }
        state
    }

    pub fn run(&self) -> EvolutionState {
        self.run_from(self.init_state(), |_| {})
    }
}

pub fn genealogy_json(records: &[GenealogyRecord]) -> String {
    serde_json::to_string_pretty(records).expect("genealogy serializes")
}

/// Lineage tree in Graphviz DOT; each node is labelled with its id, size
/// and latest fitness.
pub fn genealogy_dot(records: &[GenealogyRecord]) -> String {
    let mut s = String::from("digraph genealogy {\n  node [shape=box];\n");
    for r in records {
        let af = r.history.last().map_or("-".to_string(), |h| format!("{:.3}", h.af));
        let tag = r.mutation.map_or(String::new(), |t| format!("\\n{t}"));
        let _ = writeln!(s, "  s{} [label=\"#{} |V|={}\\nAF={af}{tag}\"];", r.species_id, r.species_id, r.nodes);
    }
    for r in records {
        if let Some(p) = r.parent_id {
            let _ = writeln!(s, "  s{p} -> s{};", r.species_id);
        }
    }
    s.push_str("}\n");
    s
}
