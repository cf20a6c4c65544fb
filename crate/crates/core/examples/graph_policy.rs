//! One graph-network controller shape serves every body: the fish and the
//! walker get parameter sets with identical manifests.

use graph_evo::baselines::{make_policy, Method, NetConfig};
use graph_evo::envs::{Env, EnvSpec, OBS_WIDTH};
use graph_evo::fixtures::{fish5, walker7};
use graph_evo::morphology::AttrSpace;
use graph_evo::nervenet::GraphCtx;
use graph_evo::policy::{eval_step, prepare, PolicyParams};
use graph_evo::autodiff::Eval;
use graph_evo::util::rng_for;

fn main() {
    let net = NetConfig::default();
    let space = AttrSpace::default();
    let mut rng = rng_for(0, &[]);
    let fish = fish5();
    let params = make_policy(Method::Nge, &fish, &net, OBS_WIDTH, &mut rng);
    let other = make_policy(Method::Nge, &walker7(), &net, OBS_WIDTH, &mut rng);
    println!("{} scalars; same manifest for walker7: {}", params.num_scalars(), params.manifest() == other.manifest());

    let ctx = GraphCtx::new(&fish, &space);
    let mut env = Env::new(&fish, &EnvSpec::fish());
    let p = params.load(&mut Eval);
    let prepared = prepare(&mut Eval, &params, &p, &ctx);
    let mut hidden = params.zero_hidden(ctx.len());
    let mut obs = env.reset();
    for t in 0..3 {
        let out = eval_step(&params, &p, &ctx, &prepared, &obs, hidden);
        println!("t={t} mean action {:?} value {:+.4}", out.mu.iter().map(|m| (m * 1e3).round() / 1e3).collect::<Vec<_>>(), out.value[0]);
        obs = env.step(&out.mu).obs;
        hidden = out.hidden;
    }

    let bytes = params.to_checkpoint_bytes();
    let back = PolicyParams::read_checkpoint(bytes.as_slice()).unwrap();
    println!("checkpoint: {} bytes, round trip exact: {}", bytes.len(), back == params);
}
