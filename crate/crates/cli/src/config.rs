//! Experiment configuration.
//!
//! Two encodings of one schema are accepted. JSON maps directly onto
//! [`ExperimentConfig`]. The key-value form has one `key = value` per line,
//! `#` comments, and optional `[sweep]` and `[assert]` sections; sweep values
//! are comma-separated lists:
//!
//! ```text
//! model = checkerboard51
//! n = 200
//! coarse = threshold
//! lambda_max = 2
//!
//! [sweep]
//! a_min = 1e-2, 1e-3
//! subdomains = 4, 16
//! ```

use std::path::Path;

use msras_core::assembly::Discretization;
use msras_core::decomp::{LayerConfig, PuMode};
use msras_core::pipeline::{CoarseRule, PartitionSpec, SolverSetup};
use msras_core::problem::{model_defaults, ModelName, ModelParams};
use msras_core::solver::{KrylovConfig, KrylovVariant};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Structured,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseKind {
    None,
    Pou,
    Fixed,
    Threshold,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub a_min: Option<Vec<f64>>,
    pub subdomains: Option<Vec<usize>>,
    pub oversample_layers: Option<Vec<usize>>,
    pub n_sd: Option<Vec<usize>>,
    pub lambda_max: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    /// Upper bound on the iteration count of every run.
    pub max_iterations: Option<usize>,
    /// Upper bound on max/min iteration count across the sweep.
    pub max_iteration_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: Option<ModelName>,
    pub n: Option<usize>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub tiles: Option<usize>,
    pub discretization: Discretization,
    pub partition: PartitionKind,
    pub px: Option<usize>,
    pub py: Option<usize>,
    pub subdomains: Option<usize>,
    pub seed: u64,
    pub overlap_layers: usize,
    pub oversample_layers: usize,
    pub pu: PuMode,
    pub coarse: CoarseKind,
    pub lambda_max: f64,
    pub n_sd: usize,
    pub pou_degree: usize,
    pub solver: KrylovVariant,
    pub epsilon: f64,
    pub restart: usize,
    pub max_iters: usize,
    pub out: Option<String>,
    pub vtk: bool,
    pub sweep: Option<Sweep>,
    #[serde(rename = "assert")]
    pub assertions: Assertions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let k = KrylovConfig::default();
        let l = LayerConfig::default();
        Self {
            name: "experiment".into(),
            model: None,
            n: None,
            a_min: None,
            a_max: None,
            tiles: None,
            discretization: Discretization::Dg,
            partition: PartitionKind::Structured,
            px: None,
            py: None,
            subdomains: None,
            seed: 42,
            overlap_layers: l.overlap_layers,
            oversample_layers: l.oversample_layers,
            pu: PuMode::default(),
            coarse: CoarseKind::Threshold,
            lambda_max: 2.0,
            n_sd: 4,
            pou_degree: 1,
            solver: k.variant,
            epsilon: k.epsilon,
            restart: k.restart,
            max_iters: k.max_iters,
            out: None,
            vtk: false,
            sweep: None,
            assertions: Assertions::default(),
        }
    }
}

/// One point of the sweep with every swept parameter resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPoint {
    pub index: usize,
    pub a_min: f64,
    pub subdomains: usize,
    pub oversample_layers: usize,
    pub n_sd: usize,
    pub lambda_max: f64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with('{');
        let cfg = if json { Self::from_json(&text)? } else { Self::from_key_value(&text)? };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Validation(format!("config: {e}")))
    }

    pub fn from_key_value(text: &str) -> Result<Self, Failure> {
        let value = key_value_to_json(text)?;
        serde_json::from_value(value).map_err(|e| Failure::Validation(format!("config: {e}")))
    }

    pub fn model(&self) -> Result<ModelName, Failure> {
        self.model.ok_or_else(|| Failure::Validation("config: `model` is required".into()))
    }

    pub fn model_params(&self, point: &RunPoint) -> ModelParams {
        ModelParams { n: self.n, a_min: Some(point.a_min), a_max: self.a_max, tiles: self.tiles }
    }

    /// Cartesian product of the sweep lists; a single point without a sweep.
    pub fn points(&self) -> Result<Vec<RunPoint>, Failure> {
        let model = self.model()?;
        let sweep = self.sweep.clone().unwrap_or_default();
        let list = |name: &str, v: Option<Vec<f64>>, base: f64| -> Result<Vec<f64>, Failure> {
            match v {
                Some(v) if v.is_empty() => Err(Failure::Validation(format!("sweep list `{name}` is empty"))),
                Some(v) => Ok(v),
                None => Ok(vec![base]),
            }
        };
        let ulist = |name: &str, v: Option<Vec<usize>>, base: usize| -> Result<Vec<usize>, Failure> {
            match v {
                Some(v) if v.is_empty() => Err(Failure::Validation(format!("sweep list `{name}` is empty"))),
                Some(v) => Ok(v),
                None => Ok(vec![base]),
            }
        };
        let a_min = list("a_min", sweep.a_min, self.a_min.unwrap_or(model_defaults(model).a_min))?;
        let subdomains = ulist("subdomains", sweep.subdomains, self.default_subdomains())?;
        let layers = ulist("oversample_layers", sweep.oversample_layers, self.oversample_layers)?;
        let n_sd = ulist("n_sd", sweep.n_sd, self.n_sd)?;
        let lambda_max = list("lambda_max", sweep.lambda_max, self.lambda_max)?;
        let mut points = Vec::new();
        for &a in &a_min {
            for &m in &subdomains {
                for &l in &layers {
                    for &k in &n_sd {
                        for &lm in &lambda_max {
                            points.push(RunPoint {
                                index: points.len(),
                                a_min: a,
                                subdomains: m,
                                oversample_layers: l,
                                n_sd: k,
                                lambda_max: lm,
                            });
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    fn default_subdomains(&self) -> usize {
        match (self.px, self.py) {
            (Some(px), Some(py)) => px * py,
            _ => self.subdomains.unwrap_or(16),
        }
    }

    pub fn partition_spec(&self, point: &RunPoint) -> Result<PartitionSpec, Failure> {
        match self.partition {
            PartitionKind::Greedy => Ok(PartitionSpec::Greedy { m: point.subdomains, seed: self.seed }),
            PartitionKind::Structured => {
                if let (Some(px), Some(py)) = (self.px, self.py) {
                    if px * py == point.subdomains {
                        return Ok(PartitionSpec::Structured { px, py });
                    }
                }
                let s = (point.subdomains as f64).sqrt().round() as usize;
                if s * s != point.subdomains {
                    return Err(Failure::Validation(format!(
                        "structured partition needs a square subdomain count, got {}",
                        point.subdomains
                    )));
                }
                Ok(PartitionSpec::Structured { px: s, py: s })
            }
        }
    }

    pub fn coarse_rule(&self, point: &RunPoint) -> CoarseRule {
        match self.coarse {
            CoarseKind::None => CoarseRule::None,
            CoarseKind::Pou => CoarseRule::Pou(self.pou_degree),
            CoarseKind::Fixed => CoarseRule::Fixed(point.n_sd),
            CoarseKind::Threshold => CoarseRule::Threshold(point.lambda_max),
        }
    }

    pub fn solver_setup(&self, point: &RunPoint) -> Result<SolverSetup, Failure> {
        let mut s = SolverSetup::new(self.discretization, self.partition_spec(point)?, self.coarse_rule(point));
        s.layers = LayerConfig { overlap_layers: self.overlap_layers, oversample_layers: point.oversample_layers };
        s.pu_mode = self.pu;
        s.krylov = KrylovConfig { epsilon: self.epsilon, restart: self.restart, max_iters: self.max_iters, variant: self.solver };
        s.eigen.seed = self.seed;
        s.validate().map_err(|e| Failure::Validation(format!("run {}: {e}", point.index)))?;
        Ok(s)
    }

    /// Checks everything that can be checked without assembling a system.
    pub fn validate(&self) -> Result<(), Failure> {
        self.model()?;
        if self.overlap_layers == 0 {
            return Err(Failure::Validation("overlap_layers must be at least 1".into()));
        }
        if let Some(r) = self.assertions.max_iteration_ratio {
            if !(r >= 1.0) {
                return Err(Failure::Validation(format!("max_iteration_ratio must be at least 1, got {r}")));
            }
        }
        for p in self.points()? {
            if p.subdomains == 0 {
                return Err(Failure::Validation("subdomain count must be positive".into()));
            }
            if !(p.a_min.is_finite() && p.a_min >= 0.0) {
                return Err(Failure::Validation(format!("a_min must be finite and nonnegative, got {}", p.a_min)));
            }
            self.solver_setup(&p)?;
        }
        Ok(())
    }
}

fn scalar(raw: &str) -> Value {
    let s = raw.trim();
    if let Some(q) = s.strip_prefix('"').and_then(|s| s.strip_suffix('"')) {
        return Value::String(q.to_string());
    }
    match s {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        _ => {}
    }
    if let Ok(i) = s.parse::<u64>() {
        return Value::from(i);
    }
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(x) = s.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(x) {
            return Value::Number(n);
        }
    }
    Value::String(s.to_string())
}

/// Converts the key-value form into the JSON object of the same schema.
pub fn key_value_to_json(text: &str) -> Result<Value, Failure> {
    let mut root = Map::new();
    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Failure::Validation(format!("config line {}: {msg}", lineno + 1));
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if !matches!(name.as_str(), "sweep" | "assert") {
                return Err(err(format!("unknown section `{name}`")));
            }
            if root.contains_key(&name) {
                return Err(err(format!("section `{name}` appears twice")));
            }
            root.insert(name.clone(), Value::Object(Map::new()));
            section = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        let (target, value) = match &section {
            Some(s) if s == "sweep" => {
                let items: Vec<Value> = value.split(',').map(str::trim).filter(|v| !v.is_empty()).map(scalar).collect();
                (root.get_mut(s).and_then(Value::as_object_mut).unwrap(), Value::Array(items))
            }
            Some(s) => (root.get_mut(s).and_then(Value::as_object_mut).unwrap(), scalar(value)),
            None => (&mut root, scalar(value)),
        };
        if target.insert(key.clone(), value).is_some() {
            return Err(err(format!("duplicate key `{key}`")));
        }
    }
    Ok(Value::Object(root))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_and_json_agree() {
        let kv = "model = checkerboard51\nn = 32 # grid\ncoarse = fixed\n[sweep]\nn_sd = 2, 4\n[assert]\nmax_iterations = 30\n";
        let json = r#"{"model":"checkerboard51","n":32,"coarse":"fixed","sweep":{"n_sd":[2,4]},"assert":{"max_iterations":30}}"#;
        let a = ExperimentConfig::from_key_value(kv).unwrap();
        assert_eq!(a, ExperimentConfig::from_json(json).unwrap());
        assert_eq!(a.points().unwrap().len(), 2);
        assert_eq!(a.seed, 42);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in ["model = checkerboard51\nbogus = 1", "model checkerboard51", "model = x\nmodel = y", "[extra]\nk = 1"] {
            assert!(matches!(ExperimentConfig::from_key_value(bad), Err(Failure::Validation(_))), "{bad}");
        }
        let empty = ExperimentConfig::from_key_value("model = checkerboard51\n[sweep]\na_min =\n").unwrap();
        assert!(empty.validate().is_err());
        let c = ExperimentConfig::from_key_value("model = checkerboard51\nlambda_max = 0").unwrap();
        assert!(matches!(c.validate(), Err(Failure::Validation(_))));
    }

    #[test]
    fn structured_partition_requires_square_count() {
        let c = ExperimentConfig::from_key_value("model = checkerboard51\n[sweep]\nsubdomains = 4, 8\n").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_key_value("model = checkerboard51\npartition = greedy\n[sweep]\nsubdomains = 4, 8\n").unwrap();
        assert!(c.validate().is_ok());
    }
}
