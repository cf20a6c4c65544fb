//! Run configuration: one JSON document with a section per module.
//!
//! Missing fields take defaults; unknown fields are rejected with their
//! path. A grid file is an ordinary config where some scalar fields hold
//! arrays; each combination becomes a run.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::baselines::{Method, NetConfig};
use crate::envs::EnvSpec;
use crate::evolution::EvolutionConfig;
use crate::fixtures;
use crate::morphology::{AttrSpace, MorphGraph};
use crate::mutation::MutationConfig;
use crate::ppo::PpoConfig;
use crate::surrogate::SurrogateConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {msg}")]
    Field { path: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessKind {
    /// Train each controller with PPO and score its returns.
    Ppo,
    /// Closed-form landscape over graphs; no control.
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneMode {
    /// Only node attributes change.
    Constrained,
    /// Full mutation set.
    Unconstrained,
    /// The graph never changes; only controllers train.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    /// `fish5`, `walker7`, or a path to a graph JSON file.
    pub seed_graph: String,
    pub mode: FinetuneMode,
}

impl FinetuneConfig {
    pub fn load_graph(&self, space: &AttrSpace) -> Result<MorphGraph, ConfigError> {
        let g = match self.seed_graph.as_str() {
            "fish5" => fixtures::fish5(),
            "walker7" => fixtures::walker7(),
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|source| ConfigError::Io { path: path.into(), source })?;
                MorphGraph::from_json(&text, space).map_err(|e| ConfigError::Field {
                    path: "finetune.seed_graph".into(),
                    msg: e.to_string(),
                })?
            }
        };
        g.validate(space).map_err(|v| ConfigError::Field {
            path: "finetune.seed_graph".into(),
            msg: format!("{} violation(s), first: {}", v.len(), v[0]),
        })?;
        Ok(g.canonicalize().expect("validated graph"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub env: EnvSpec,
    pub evolution: EvolutionConfig,
    pub ppo: PpoConfig,
    pub mutation: MutationConfig,
    pub net: NetConfig,
    pub surrogate: SurrogateConfig,
    pub attr_space: AttrSpace,
    pub fitness: FitnessKind,
    pub finetune: Option<FinetuneConfig>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: Method::Nge,
            env: EnvSpec::default(),
            evolution: EvolutionConfig::default(),
            ppo: PpoConfig::default(),
            mutation: MutationConfig::default(),
            net: NetConfig::default(),
            surrogate: SurrogateConfig::default(),
            attr_space: AttrSpace::default(),
            fitness: FitnessKind::Ppo,
            finetune: None,
            output_dir: None,
            seed: 0,
        }
    }
}

fn field(section: &str, r: Result<(), String>) -> Result<(), ConfigError> {
    r.map_err(|msg| match msg.split_once(": ") {
        Some((f, m)) if !f.contains(' ') => {
            let f = f.strip_prefix(&format!("{section}.")).unwrap_or(f);
            ConfigError::Field { path: format!("{section}.{f}"), msg: m.to_string() }
        }
        _ => ConfigError::Field { path: section.to_string(), msg },
    })
}

impl RunConfig {
    pub fn from_value(v: Value) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(v).map_err(|e| ConfigError::Field {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        cfg.resolved()
    }

    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Field {
            path: e.path().to_string(),
            msg: e.inner().to_string(),
        })?;
        cfg.resolved()
    }

    /// Fills derived fields and checks every section plus cross-field rules.
    pub fn resolved(mut self) -> Result<RunConfig, ConfigError> {
        self.evolution.seed = self.seed;
        if let Some(ft) = &self.finetune {
            match ft.mode {
                FinetuneMode::Constrained => self.mutation.constrained_mode = true,
                FinetuneMode::Unconstrained | FinetuneMode::Fixed => {}
            }
        }
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        field("env", self.env.check())?;
        field("evolution", self.evolution.check())?;
        field("ppo", self.ppo.check(self.env.horizon))?;
        field("mutation", self.mutation.check())?;
        field("net", self.net.check())?;
        field("surrogate", self.surrogate.check())?;
        field("attr_space", self.attr_space.check())?;
        if self.mutation.constrained_mode && self.finetune.is_none() {
            return Err(ConfigError::Field {
                path: "mutation.constrained_mode".into(),
                msg: "constrained mode needs finetune.seed_graph".into(),
            });
        }
        if self.evolution.init_max_nodes > self.attr_space.max_nodes {
            return Err(ConfigError::Field {
                path: "evolution.init_max_nodes".into(),
                msg: "exceeds attr_space.max_nodes".into(),
            });
        }
        if let Some(ft) = &self.finetune {
            if self.method == Method::Rgs {
                return Err(ConfigError::Invalid("finetune: RGS has no seed graph to refine".into()));
            }
            ft.load_graph(&self.attr_space)?;
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// One grid point: `(label, config document)`.
pub type GridPoint = (String, Value);

/// Expands array values found where the default config holds a scalar
/// into the cartesian product of runs. Axis order follows the document.
pub fn expand_grid(doc: &Value) -> Vec<GridPoint> {
    let defaults = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
    let mut axes = Vec::new();
    find_axes(doc, Some(&defaults), &mut Vec::new(), &mut axes);
    let mut points: Vec<GridPoint> = vec![(String::new(), doc.clone())];
    for (path, values) in axes {
        let key = path.last().cloned().unwrap_or_default();
        let mut next = Vec::with_capacity(points.len() * values.len());
        for (label, d) in &points {
            for v in &values {
                let mut d = d.clone();
                *pointer_mut(&mut d, &path) = v.clone();
                let part = format!("{key}={}", compact(v));
                let label = if label.is_empty() { part } else { format!("{label}__{part}") };
                next.push((label, d));
            }
        }
        points = next;
    }
    points
}

fn compact(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn pointer_mut<'a>(doc: &'a mut Value, path: &[String]) -> &'a mut Value {
    path.iter().fold(doc, |d, k| d.get_mut(k).expect("axis path exists"))
}

fn is_axis(value: &[Value], default: Option<&Value>) -> bool {
    match default {
        Some(Value::Array(_)) => false,
        // Optional fields default to null; a flat numeric array there is a
        // value (e.g. per-attribute sigmas), anything else a list of options.
        Some(Value::Null) => !value.iter().all(Value::is_number),
        _ => true,
    }
}

fn find_axes(doc: &Value, default: Option<&Value>, path: &mut Vec<String>, out: &mut Vec<(Vec<String>, Vec<Value>)>) {
    match doc {
        Value::Object(map) => {
            for (k, v) in map {
                path.push(k.clone());
                let d = default.and_then(|d| d.get(k));
                find_axes(v, d, path, out);
                path.pop();
            }
        }
        Value::Array(items) if !items.is_empty() && is_axis(items, default) => {
            out.push((path.clone(), items.clone()));
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::from_json("{}").unwrap();
        let again = RunConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_field_reports_path() {
        let err = RunConfig::from_json(r#"{"ppo": {"gama": 0.9}}"#).unwrap_err();
        assert!(err.to_string().starts_with("ppo"), "{err}");
    }

    #[test]
    fn bad_type_reports_path() {
        let err = RunConfig::from_json(r#"{"evolution": {"n": "many"}}"#).unwrap_err();
        assert!(err.to_string().starts_with("evolution.n"), "{err}");
    }

    #[test]
    fn cross_field_checks() {
        let err = RunConfig::from_json(r#"{"evolution": {"n": 10, "candidates": 1}}"#).unwrap_err();
        assert!(err.to_string().contains("evolution"), "{err}");
        let err = RunConfig::from_json(r#"{"mutation": {"constrained_mode": true}}"#).unwrap_err();
        assert!(err.to_string().contains("seed_graph"), "{err}");
        let ok = RunConfig::from_json(r#"{"finetune": {"seed_graph": "fish5", "mode": "constrained"}}"#).unwrap();
        assert!(ok.mutation.constrained_mode);
    }

    #[test]
    fn seed_flows_into_evolution() {
        let cfg = RunConfig::from_json(r#"{"seed": 9}"#).unwrap();
        assert_eq!(cfg.evolution.seed, 9);
    }

    #[test]
    fn grid_product() {
        let doc = json!({"evolution": {"elim_rate": [0.15, 0.2, 0.3], "n": [8, 16]}, "method": "NGE"});
        let pts = expand_grid(&doc);
        assert_eq!(pts.len(), 6);
        for (_, d) in &pts {
            RunConfig::from_value(d.clone()).unwrap();
        }
        assert!(pts[0].0.contains("elim_rate=0.15"));
    }

    #[test]
    fn array_valued_fields_are_not_axes() {
        let doc = json!({"mutation": {"pert_sigma": [0.1, 0.1, 0.1, 0.1, 5.0]}});
        assert_eq!(expand_grid(&doc).len(), 1);
        let doc = json!({"method": ["NGE", "RGS"]});
        assert_eq!(expand_grid(&doc).len(), 2);
    }
}
