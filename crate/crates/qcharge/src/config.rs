//! Experiment configuration: one JSON document, optionally patched with
//! dotted-path overrides before validation.

use std::path::PathBuf;

use qcharge_core::mcp::InitialBlock;
use qcharge_core::pmp::Objective;
use qcharge_core::{BangBangProtocol, BlochState, QubitModel, Vec3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Result, RunError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    DcpScan,
    DcpOptimize,
    PmpCheck,
    TwoField,
    OscillatorScan,
    Mcp,
    Work,
}

impl Experiment {
    pub const ALL: [(&'static str, Experiment); 7] = [
        ("dcp-scan", Experiment::DcpScan),
        ("dcp-optimize", Experiment::DcpOptimize),
        ("pmp-check", Experiment::PmpCheck),
        ("two-field", Experiment::TwoField),
        ("oscillator-scan", Experiment::OscillatorScan),
        ("mcp", Experiment::Mcp),
        ("work", Experiment::Work),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|(_, e)| *e == self).map(|(n, _)| *n).unwrap_or("?")
    }

    fn parse(name: &str) -> Option<Experiment> {
        Self::ALL.iter().find(|(n, _)| *n == name).map(|(_, e)| *e)
    }

    /// Paths under `params` that have no default.
    fn required(self, params: &Value) -> Vec<&'static str> {
        const MODEL: [&str; 4] = ["model.omega0", "model.axis", "model.lambda_min", "model.lambda_max"];
        let mut out: Vec<&'static str> = Vec::new();
        match self {
            Experiment::DcpScan => {
                out.extend(MODEL);
                out.extend(["tau_max", "tau_points", "n_budgets"]);
            }
            Experiment::DcpOptimize => {
                out.extend(MODEL);
                out.extend(["tau", "max_switches"]);
            }
            Experiment::PmpCheck => {
                out.extend(MODEL);
                out.extend(["protocol.tau", "protocol.switch_times", "protocol.levels"]);
            }
            Experiment::TwoField => out.extend(["omega0", "r_max", "tau_max", "tau_points"]),
            Experiment::OscillatorScan => out.extend([
                "omega0",
                "lambda_max",
                "tau",
                "omega_bar_min",
                "omega_bar_max",
                "omega_bar_points",
            ]),
            Experiment::Mcp => {
                out.extend(["charger", "omega_a", "omega_b", "lambda_min", "lambda_max", "tau", "max_switches"]);
                if params.get("charger").and_then(Value::as_str) == Some("oscillator") {
                    out.push("n");
                }
            }
            Experiment::Work => out.extend(["rho_eigs", "h_eigs"]),
        }
        out
    }
}

/// Qubit model shared by the single-field experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitParams {
    pub omega0: f64,
    pub axis: [f64; 3],
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(default = "ground")]
    pub a0: [f64; 3],
}

fn ground() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn yes() -> bool {
    true
}

impl QubitParams {
    pub fn model(&self) -> Result<QubitModel> {
        let [x, y, z] = self.axis;
        QubitModel::new(self.omega0, Vec3::new(x, y, z), self.lambda_min, self.lambda_max)
            .map_err(|e| RunError::field("params.model", e))
    }

    pub fn initial(&self) -> Result<BlochState> {
        bloch(self.a0, "params.model.a0")
    }
}

pub(crate) fn bloch(a: [f64; 3], field: &str) -> Result<BlochState> {
    BlochState::new(Vec3::new(a[0], a[1], a[2])).map_err(|e| RunError::field(field, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcpScanParams {
    pub model: QubitParams,
    #[serde(default)]
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_points: usize,
    pub n_budgets: Vec<usize>,
    #[serde(default)]
    pub level_set: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcpOptimizeParams {
    pub model: QubitParams,
    pub tau: f64,
    pub max_switches: usize,
    #[serde(default)]
    pub level_set: Option<Vec<f64>>,
    #[serde(default = "samples")]
    pub samples_per_segment: usize,
}

fn samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolParams {
    pub tau: f64,
    pub switch_times: Vec<f64>,
    pub levels: Vec<f64>,
}

impl ProtocolParams {
    pub fn protocol(&self) -> Result<BangBangProtocol> {
        BangBangProtocol::new(self.tau, self.switch_times.clone(), self.levels.clone())
            .map_err(|e| RunError::field("params.protocol", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmpCheckParams {
    pub model: QubitParams,
    pub protocol: ProtocolParams,
    #[serde(default = "maximize")]
    pub objective: Objective,
    #[serde(default = "samples")]
    pub samples_per_segment: usize,
}

fn maximize() -> Objective {
    Objective::Maximize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoFieldParams {
    pub omega0: f64,
    pub r_max: f64,
    #[serde(default = "ground")]
    pub a0: [f64; 3],
    #[serde(default)]
    pub tau_min: f64,
    pub tau_max: f64,
    pub tau_points: usize,
    /// Switch budget of the two single-field comparison curves.
    #[serde(default = "m1_budget")]
    pub m1_max_switches: usize,
    /// Step of the lab-frame cross-check run by `verify`.
    #[serde(default = "lab_dt")]
    pub dt: f64,
    #[serde(default = "trajectory_samples")]
    pub trajectory_samples: usize,
}

fn m1_budget() -> usize {
    5
}

fn lab_dt() -> f64 {
    1e-4
}

fn trajectory_samples() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorScanParams {
    pub omega0: f64,
    pub lambda_max: f64,
    /// Lower square-wave level; `-lambda_max` when absent.
    #[serde(default)]
    pub lambda_min: Option<f64>,
    pub tau: f64,
    pub omega_bar_min: f64,
    pub omega_bar_max: f64,
    pub omega_bar_points: usize,
    #[serde(default = "osc_samples")]
    pub samples_per_segment: usize,
}

fn osc_samples() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Charger {
    Qubit,
    Oscillator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McpParams {
    pub charger: Charger,
    pub omega_a: f64,
    pub omega_b: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Starting block of a qubit charger.
    #[serde(default = "charged")]
    pub initial: InitialBlock,
    /// Excitations in an oscillator charger.
    #[serde(default)]
    pub n: Option<u32>,
    pub tau: f64,
    pub max_switches: usize,
    #[serde(default = "samples")]
    pub samples_per_segment: usize,
}

fn charged() -> InitialBlock {
    InitialBlock::Charged
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkParams {
    pub rho_eigs: Vec<f64>,
    pub h_eigs: Vec<f64>,
    /// `sum rho_i h_i` when absent.
    #[serde(default)]
    pub mean_energy: Option<f64>,
    #[serde(default)]
    pub beta_bar: Option<f64>,
    #[serde(default = "entropy_tol")]
    pub tol: f64,
}

fn entropy_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    DcpScan(DcpScanParams),
    DcpOptimize(DcpOptimizeParams),
    PmpCheck(PmpCheckParams),
    TwoField(TwoFieldParams),
    OscillatorScan(OscillatorScanParams),
    Mcp(McpParams),
    Work(WorkParams),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub restarts: usize,
    pub params: Params,
}

pub const DEFAULT_RESTARTS: usize = 32;

/// Parses, applies `path=value` overrides, and validates.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| RunError::Parse {
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut v, o)?;
    }
    from_value(&v)
}

/// Sets `a.b.c` to the JSON value after `=`, or to the raw text when it is
/// not JSON. Missing objects along the path are created.
pub fn apply_override(root: &mut Value, arg: &str) -> Result<()> {
    let bad = |message: &str| RunError::Override {
        arg: arg.to_string(),
        message: message.to_string(),
    };
    let (path, raw) = arg.split_once('=').ok_or_else(|| bad("expected path=value"))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(bad("empty path segment"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            if node.is_null() {
                *node = Value::Object(Default::default());
            } else {
                return Err(bad("path crosses a non-object value"));
            }
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        node = map.entry((*key).to_string()).or_insert(Value::Null);
    }
    unreachable!("path has at least one segment")
}

fn lookup<'a>(v: &'a Value, dotted: &str) -> Option<&'a Value> {
    dotted.split('.').try_fold(v, |node, key| node.get(key))
}

fn typed<T: DeserializeOwned>(v: &Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let inner = e.path().to_string();
        let field = if inner == "." { prefix.to_string() } else { format!("{prefix}.{inner}") };
        RunError::field(field, e.into_inner())
    })
}

pub fn from_value(v: &Value) -> Result<ExperimentConfig> {
    let obj = v
        .as_object()
        .ok_or_else(|| RunError::field("$", "config must be a JSON object"))?;
    let mut missing: Vec<String> = ["experiment", "output_dir", "params"]
        .iter()
        .filter(|k| !obj.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let kind = match obj.get("experiment") {
        None => None,
        Some(Value::String(s)) => Some(Experiment::parse(s).ok_or_else(|| RunError::UnknownExperiment {
            value: s.clone(),
            known: Experiment::ALL.iter().map(|(n, _)| *n).collect(),
        })?),
        Some(_) => return Err(RunError::field("experiment", "must be a string")),
    };
    let empty = Value::Object(Default::default());
    let params = obj.get("params").unwrap_or(&empty);
    if let Some(kind) = kind {
        missing.extend(
            kind.required(params)
                .into_iter()
                .filter(|p| lookup(params, p).is_none())
                .map(|p| format!("params.{p}")),
        );
    }
    if !missing.is_empty() {
        return Err(RunError::MissingFields { fields: missing });
    }
    let kind = kind.expect("checked above");
    for key in obj.keys() {
        if !["experiment", "output_dir", "params", "seed", "restarts"].contains(&key.as_str()) {
            return Err(RunError::field(key.clone(), "unknown field"));
        }
    }
    let output_dir: PathBuf = typed(&obj["output_dir"], "output_dir")?;
    let seed: u64 = obj.get("seed").map(|s| typed(s, "seed")).transpose()?.unwrap_or(0);
    let restarts: usize = obj
        .get("restarts")
        .map(|s| typed(s, "restarts"))
        .transpose()?
        .unwrap_or(DEFAULT_RESTARTS);
    if restarts == 0 {
        return Err(RunError::field("restarts", "must be at least 1"));
    }
    let params = match kind {
        Experiment::DcpScan => Params::DcpScan(typed(params, "params")?),
        Experiment::DcpOptimize => Params::DcpOptimize(typed(params, "params")?),
        Experiment::PmpCheck => Params::PmpCheck(typed(params, "params")?),
        Experiment::TwoField => Params::TwoField(typed(params, "params")?),
        Experiment::OscillatorScan => Params::OscillatorScan(typed(params, "params")?),
        Experiment::Mcp => Params::Mcp(typed(params, "params")?),
        Experiment::Work => Params::Work(typed(params, "params")?),
    };
    let config = ExperimentConfig {
        experiment: kind,
        output_dir,
        seed,
        restarts,
        params,
    };
    config.validate()?;
    Ok(config)
}

fn positive(x: f64, field: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(RunError::field(field, "must be positive and finite"))
    }
}

fn grid_ok(min: f64, max: f64, points: usize, prefix: &str) -> Result<()> {
    if !(min >= 0.0 && min.is_finite()) {
        return Err(RunError::field(format!("{prefix}_min"), "must be non-negative and finite"));
    }
    if !(max >= min && max.is_finite()) {
        return Err(RunError::field(format!("{prefix}_max"), "must be finite and not below the minimum"));
    }
    if points == 0 || (points == 1 && max != min) {
        return Err(RunError::field(
            format!("{prefix}_points"),
            "need at least two points, or one when min equals max",
        ));
    }
    Ok(())
}

/// `points` evenly spaced values from `min` to `max`, both included.
pub fn linspace(min: f64, max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![min];
    }
    let step = (max - min) / (points - 1) as f64;
    (0..points)
        .map(|i| if i + 1 == points { max } else { min + step * i as f64 })
        .collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.params {
            Params::DcpScan(p) => {
                p.model.model()?;
                p.model.initial()?;
                grid_ok(p.tau_min, p.tau_max, p.tau_points, "params.tau")?;
                if p.n_budgets.is_empty() {
                    return Err(RunError::field("params.n_budgets", "must not be empty"));
                }
            }
            Params::DcpOptimize(p) => {
                p.model.model()?;
                p.model.initial()?;
                positive(p.tau, "params.tau")?;
            }
            Params::PmpCheck(p) => {
                let model = p.model.model()?;
                p.model.initial()?;
                p.protocol
                    .protocol()?
                    .check_bounds(model.lambda_min, model.lambda_max)
                    .map_err(|e| RunError::field("params.protocol.levels", e))?;
            }
            Params::TwoField(p) => {
                positive(p.omega0, "params.omega0")?;
                positive(p.r_max, "params.r_max")?;
                bloch(p.a0, "params.a0")?;
                grid_ok(p.tau_min, p.tau_max, p.tau_points, "params.tau")?;
                positive(p.dt, "params.dt")?;
                if p.trajectory_samples == 0 {
                    return Err(RunError::field("params.trajectory_samples", "must be at least 1"));
                }
            }
            Params::OscillatorScan(p) => {
                positive(p.omega0, "params.omega0")?;
                positive(p.lambda_max, "params.lambda_max")?;
                positive(p.tau, "params.tau")?;
                positive(p.omega_bar_min, "params.omega_bar_min")?;
                grid_ok(p.omega_bar_min, p.omega_bar_max, p.omega_bar_points, "params.omega_bar")?;
                if let Some(lo) = p.lambda_min {
                    if !(lo <= p.lambda_max) {
                        return Err(RunError::field("params.lambda_min", "must not exceed lambda_max"));
                    }
                }
            }
            Params::Mcp(p) => {
                positive(p.omega_b, "params.omega_b")?;
                if !(p.omega_a > 0.0 && p.omega_a.is_finite()) {
                    return Err(RunError::field("params.omega_a", "must be positive and finite"));
                }
                positive(p.tau, "params.tau")?;
                if !(p.lambda_min <= p.lambda_max) {
                    return Err(RunError::field("params.lambda_min", "must not exceed lambda_max"));
                }
                if p.charger == Charger::Oscillator && p.n == Some(0) {
                    return Err(RunError::field("params.n", "must be at least 1"));
                }
            }
            Params::Work(p) => {
                qcharge_core::work::SpectralPair::new(p.rho_eigs.clone(), p.h_eigs.clone())
                    .map_err(|e| RunError::field("params.rho_eigs", e))?;
                if let Some(b) = p.beta_bar {
                    positive(b, "params.beta_bar")?;
                }
                positive(p.tol, "params.tol")?;
            }
        }
        Ok(())
    }

    /// Energy unit of the run, recorded in the manifest.
    pub fn omega0(&self) -> Option<f64> {
        match &self.params {
            Params::DcpScan(p) => Some(p.model.omega0),
            Params::DcpOptimize(p) => Some(p.model.omega0),
            Params::PmpCheck(p) => Some(p.model.omega0),
            Params::TwoField(p) => Some(p.omega0),
            Params::OscillatorScan(p) => Some(p.omega0),
            Params::Mcp(p) => Some(p.omega_b),
            Params::Work(_) => None,
        }
    }
}
