//! Trains a controller for the fixed fish body with the KL-penalized PPO
//! loop and prints the learning curve.

use graph_evo::autodiff::Tape;
use graph_evo::baselines::{make_policy, Method, NetConfig};
use graph_evo::envs::{Env, EnvSpec, OBS_WIDTH};
use graph_evo::fixtures::fish5;
use graph_evo::morphology::AttrSpace;
use graph_evo::nervenet::GraphCtx;
use graph_evo::ppo::{collect, update, PpoConfig, TrainState};
use graph_evo::util::rng_for;

fn main() {
    let spec = EnvSpec { horizon: 200, ..EnvSpec::fish() };
    let cfg = PpoConfig { timesteps_per_update: 800, ..PpoConfig::default() };
    let net = NetConfig { d_h: 32, ..NetConfig::default() };
    let fish = fish5();
    let ctx = GraphCtx::new(&fish, &AttrSpace::default());
    let mut rng = rng_for(11, &[]);
    let mut params = make_policy(Method::Nge, &fish, &net, OBS_WIDTH, &mut rng);
    let mut state = TrainState::new(&cfg);
    let mut env = Env::new(&fish, &spec);
    let mut tape = Tape::new();
    println!("update  mean_return       kl     beta       lr");
    for i in 0..15 {
        let ro = collect(&params, &ctx, &mut env, cfg.timesteps_per_update, cfg.truncation, &mut rng);
        let stats = update(&mut params, &mut state, &ctx, &ro, &cfg, &mut tape, &mut rng);
        println!("{i:>6}  {:>11.4}  {:>7.4}  {:>7.4}  {:.1e}", ro.mean_return(), stats.kl, stats.beta, stats.lr);
    }
}
