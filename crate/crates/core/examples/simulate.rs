//! Drives both environments: a passive fish coasting to rest and a walker
//! flailing under random torques.

use graph_evo::envs::{Env, EnvSpec};
use graph_evo::fixtures::{fish5, walker7};
use rand::Rng;
use graph_evo::util::rng_for;

fn main() {
    let mut fish = Env::new(&fish5(), &EnvSpec::fish());
    let kick = vec![1.0; fish.action_dim()];
    fish.step(&kick);
    let zero = vec![0.0; fish.action_dim()];
    for t in 0..=200 {
        if t % 40 == 0 {
            let ke = fish.body.kinetic_energy(&fish.state);
            let [x, y] = fish.torso();
            println!("fish   t={t:>3}  KE {ke:.3e}  torso ({x:+.4}, {y:+.4})");
        }
        fish.step(&zero);
    }

    let mut walker = Env::new(&walker7(), &EnvSpec::walker());
    let mut rng = rng_for(1, &[]);
    let mut ret = 0.0;
    for t in 1..=300 {
        let a: Vec<f64> = (0..walker.action_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = walker.step(&a);
        ret += r.reward;
        if t % 60 == 0 {
            let [x, y] = walker.torso();
            println!(
                "walker t={t:>3}  torso ({x:+.3}, {y:+.3})  return {ret:+.3}  joint drift {:.1e}",
                walker.body.joint_drift(&walker.state)
            );
        }
        if r.done {
            break;
        }
    }
}
