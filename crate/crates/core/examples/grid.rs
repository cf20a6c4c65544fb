//! Config handling: defaults, field-level errors and grid expansion.

use graph_evo::config::{expand_grid, RunConfig};
use serde_json::json;

fn main() {
    let doc = json!({
        "method": "NGE",
        "evolution": {"elim_rate": [0.15, 0.2, 0.3], "n": 16},
        "ppo": {"truncation": [10, 20]},
    });
    for (label, point) in expand_grid(&doc) {
        let cfg = RunConfig::from_value(point).unwrap();
        println!("{label:<36} K = {}", cfg.evolution.k());
    }

    let err = RunConfig::from_value(json!({"ppo": {"gamma": 1.5}})).unwrap_err();
    println!("rejected: {err}");
    let err = RunConfig::from_value(json!({"evolution": {"elim": 0.2}})).unwrap_err();
    println!("rejected: {err}");
}
