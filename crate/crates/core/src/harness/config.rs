//! JSON run configuration: parsing, default-fill, dotted overrides.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::model::{default_t1, default_t2, RateParam, SystemParams, DEFAULT_OMEGA_FRACTION};

pub const DEFAULT_SWEEP_POINTS: usize = 21;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Single,
    Sweep,
    Check,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Single => "single",
            Self::Sweep => "sweep",
            Self::Check => "check",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepMetric {
    F,
    N2max,
}

impl SweepMetric {
    pub fn name(self) -> &'static str {
        match self {
            Self::F => "F",
            Self::N2max => "N2max",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: RateParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    /// Default range for `param`, 21 points from zero.
    pub fn default_for(param: RateParam) -> Self {
        let max = match param {
            RateParam::GammaQ => 0.05,
            RateParam::GammaPhi => 0.5,
            _ => 2.5,
        };
        Self { name: param, min: 0.0, max, points: DEFAULT_SWEEP_POINTS }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: [AxisSpec; 2],
    pub metrics: Vec<SweepMetric>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: None, formats: vec![OutputFormat::Csv, OutputFormat::Json] }
    }
}

impl OutputSpec {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub integrator: IntegratorConfig,
    pub experiment: ExperimentSpec,
    pub output: OutputSpec,
    /// Dotted paths filled from defaults rather than the document.
    #[serde(skip)]
    pub defaulted: BTreeSet<String>,
}

impl RunConfig {
    pub fn defaults(kind: ExperimentKind) -> Result<Self> {
        parse_config(&format!(r#"{{"experiment": {{"kind": "{}"}}}}"#, kind.name()))
    }

    /// The config as a document that parses back to the same values.
    pub fn to_value(&self) -> Result<Value> {
        Ok(serde_json::to_value(self)?)
    }

    pub fn sweep(&self) -> Result<&SweepSpec> {
        self.experiment
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("sweep experiment needs a sweep block".into()))
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn json_err(e: serde_json::Error, section: &str) -> Error {
    config_err(format!("{section}: {e}"))
}

fn take_object(root: &mut Map<String, Value>, key: &str) -> Result<Option<Map<String, Value>>> {
    match root.remove(key) {
        None => Ok(None),
        Some(Value::Object(m)) => Ok(Some(m)),
        Some(other) => Err(config_err(format!("section \"{key}\" must be an object, got {other}"))),
    }
}

/// Parse a config document, filling defaults and validating every section.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| config_err(format!("parse error at line {}, column {}: {e}", e.line(), e.column())))?;
    resolve(value)
}

/// Resolve an already-parsed document.
pub fn resolve(value: Value) -> Result<RunConfig> {
    let Value::Object(mut root) = value else {
        return Err(config_err("config must be a JSON object"));
    };
    let mut defaulted = BTreeSet::new();

    let experiment = take_object(&mut root, "experiment")?.unwrap_or_default();
    if !experiment.contains_key("kind") {
        return Err(config_err("experiment kind required"));
    }
    let system = take_object(&mut root, "system")?.unwrap_or_default();
    let integrator = take_object(&mut root, "integrator")?.unwrap_or_default();
    let output = take_object(&mut root, "output")?.unwrap_or_default();
    if let Some(key) = root.keys().next() {
        return Err(config_err(format!(
            "unknown key \"{key}\"; expected one of system, integrator, experiment, output"
        )));
    }

    let system = resolve_system(system, &mut defaulted)?;
    for key in ["dt", "record_stride", "method", "trace_tol", "herm_tol"] {
        if !integrator.contains_key(key) {
            defaulted.insert(format!("integrator.{key}"));
        }
    }
    let integrator: IntegratorConfig =
        serde_json::from_value(Value::Object(integrator)).map_err(|e| json_err(e, "integrator"))?;
    integrator.validate()?;
    let experiment = resolve_experiment(experiment, &mut defaulted)?;
    let output: OutputSpec = serde_json::from_value(Value::Object(output)).map_err(|e| json_err(e, "output"))?;

    Ok(RunConfig { system, integrator, experiment, output, defaulted })
}

fn resolve_system(mut given: Map<String, Value>, defaulted: &mut BTreeSet<String>) -> Result<SystemParams> {
    let num = |m: &Map<String, Value>, k: &str| m.get(k).and_then(Value::as_f64);
    let Value::Object(base) = serde_json::to_value(SystemParams::default())? else {
        unreachable!("params serialize to an object")
    };
    // Derived defaults follow whatever the document sets.
    let g = num(&given, "g_wg").unwrap_or(SystemParams::default().g_wg);
    let t1 = num(&given, "T1").unwrap_or_else(default_t1);
    let mut fill = base;
    fill.insert("T1".into(), t1.into());
    fill.insert("T2".into(), default_t2(t1, g).into());
    fill.insert("Omega".into(), (DEFAULT_OMEGA_FRACTION * g).into());
    for (k, v) in fill {
        if !given.contains_key(&k) {
            defaulted.insert(format!("system.{k}"));
            given.insert(k, v);
        }
    }
    let params: SystemParams = serde_json::from_value(Value::Object(given)).map_err(|e| json_err(e, "system"))?;
    params.validate().map_err(|e| config_err(format!("system: {e}")))?;
    Ok(params)
}

fn resolve_experiment(mut exp: Map<String, Value>, defaulted: &mut BTreeSet<String>) -> Result<ExperimentSpec> {
    let kind: ExperimentKind = serde_json::from_value(exp.remove("kind").unwrap_or(Value::Null))
        .map_err(|e| json_err(e, "experiment.kind"))?;
    let sweep = exp.remove("sweep");
    if let Some(key) = exp.keys().next() {
        return Err(config_err(format!("experiment: unknown key \"{key}\"; expected kind, sweep")));
    }
    let sweep = match (kind, sweep) {
        (ExperimentKind::Sweep, None) => return Err(config_err("sweep experiment needs a sweep block with two axes")),
        (ExperimentKind::Sweep, Some(block)) => Some(resolve_sweep(block, defaulted)?),
        (_, Some(_)) => return Err(config_err(format!("sweep block given for a {} experiment", kind.name()))),
        (_, None) => None,
    };
    Ok(ExperimentSpec { kind, sweep })
}

fn resolve_sweep(block: Value, defaulted: &mut BTreeSet<String>) -> Result<SweepSpec> {
    let Value::Object(mut block) = block else {
        return Err(config_err("experiment.sweep must be an object"));
    };
    let axes = match block.remove("axes") {
        Some(Value::Array(a)) => a,
        _ => return Err(config_err("experiment.sweep.axes must be a list of two axis specs")),
    };
    if axes.len() != 2 {
        return Err(config_err(format!("experiment.sweep.axes needs exactly two axes, got {}", axes.len())));
    }
    let metrics = match block.remove("metrics") {
        None => {
            defaulted.insert("experiment.sweep.metrics".into());
            vec![SweepMetric::F, SweepMetric::N2max]
        }
        Some(v) => serde_json::from_value(v).map_err(|e| json_err(e, "experiment.sweep.metrics"))?,
    };
    if metrics.is_empty() {
        return Err(config_err("experiment.sweep.metrics must not be empty"));
    }
    if let Some(key) = block.keys().next() {
        return Err(config_err(format!("experiment.sweep: unknown key \"{key}\"; expected axes, metrics")));
    }
    let mut resolved = Vec::with_capacity(2);
    for (n, axis) in axes.into_iter().enumerate() {
        let Value::Object(mut axis) = axis else {
            return Err(config_err(format!("axis {n} must be an object")));
        };
        let name = match axis.get("name").and_then(Value::as_str) {
            Some(s) => RateParam::from_name(s)?,
            None => return Err(config_err(format!("axis {n} needs a name"))),
        };
        let Value::Object(default) = serde_json::to_value(AxisSpec::default_for(name))? else { unreachable!() };
        for (k, v) in default {
            if !axis.contains_key(&k) {
                defaulted.insert(format!("experiment.sweep.axes[{n}].{k}"));
                axis.insert(k, v);
            }
        }
        let spec: AxisSpec =
            serde_json::from_value(Value::Object(axis)).map_err(|e| json_err(e, &format!("axis {n}")))?;
        if spec.points < 2 {
            return Err(config_err(format!("axis {} needs at least 2 points, got {}", name.name(), spec.points)));
        }
        if !(spec.min >= 0.0) || !(spec.max >= spec.min) || !spec.max.is_finite() {
            return Err(config_err(format!(
                "axis {} needs 0 <= min <= max, got [{}, {}]",
                name.name(),
                spec.min,
                spec.max
            )));
        }
        resolved.push(spec);
    }
    if resolved[0].name == resolved[1].name {
        return Err(config_err(format!("sweep axes must name distinct parameters, both are {}", resolved[0].name.name())));
    }
    let [a, b]: [AxisSpec; 2] = resolved.try_into().expect("two axes");
    Ok(SweepSpec { axes: [a, b], metrics })
}

/// Apply `path=value` with a dotted path; the value is read as JSON when it
/// parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override \"{assignment}\" must look like key.path=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad override path \"{path}\"")));
    }
    if !doc.is_object() {
        *doc = Value::Object(Map::new());
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        let Value::Object(map) = node else {
            return Err(config_err(format!("override path \"{path}\" runs through a non-object")));
        };
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let Value::Object(map) = node else {
        return Err(config_err(format!("override path \"{path}\" runs through a non-object")));
    };
    map.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}
