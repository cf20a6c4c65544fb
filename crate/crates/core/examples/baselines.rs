//! Every search method on the fish task at toy scale, same budget each.

use graph_evo::baselines::{Method, NetConfig};
use graph_evo::cli::{evaluator, setup};
use graph_evo::config::RunConfig;
use graph_evo::envs::EnvSpec;
use graph_evo::evolution::EvolutionConfig;
use graph_evo::ppo::PpoConfig;
use graph_evo::surrogate::SurrogateConfig;

fn main() {
    for method in [Method::Nge, Method::EssSims, Method::EssSimsAf, Method::EssGmuc, Method::EssBodyshare, Method::Rgs] {
        let cfg = RunConfig {
            method,
            env: EnvSpec { horizon: 60, ..EnvSpec::fish() },
            evolution: EvolutionConfig { n: 6, candidates: 20, max_generations: 3, ..EvolutionConfig::default() },
            ppo: PpoConfig { timesteps_per_update: 120, epochs_per_generation: 2, minibatch_windows: 4, ..PpoConfig::default() },
            net: NetConfig { d_h: 12, d_obs: 6, d_attr: 6, mlp_hidden: 16, ..NetConfig::default() },
            surrogate: SurrogateConfig { d_h: 12, d_emb: 6, d_fc: 12, epochs: 20, ..SurrogateConfig::default() },
            seed: 1,
            ..RunConfig::default()
        }
        .resolved()
        .unwrap();
        let ev = evaluator(&cfg);
        let state = setup(&cfg, ev.as_ref()).run();
        let curve: Vec<String> = state.metrics.iter().map(|m| format!("{:+.3}", m.best_af)).collect();
        println!("{:<14} best per gen [{}]  timesteps {}", method.name(), curve.join(" "), state.total_timesteps);
    }
}
