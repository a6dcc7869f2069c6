//! Runs one configured experiment and writes its artifacts and manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qcharge_core::mcp::{self, EffectiveTwoLevelModel, QubitQubitModel};
use qcharge_core::optimizer::{self, OptimizeSpec, ScanOptions, StaircasePoint};
use qcharge_core::oscillator::{self, OscillatorMoments, SquareWaveSpec};
use qcharge_core::pmp::{self, PmpOptions};
use qcharge_core::two_field::{self, TwoFieldModel};
use qcharge_core::work::{self, SpectralPair};
use qcharge_core::{evolve, BangBangProtocol, BlochState, QubitModel, Trajectory, Vec3};
use serde::{Deserialize, Serialize};

use crate::config::{self, linspace, Charger, ExperimentConfig, Params};
use crate::error::{Result, RunError};
use crate::format::{fmt_sig, json_f64, to_json_text};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the manifest's directory.
    pub path: String,
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub qcharge: String,
    pub qcharge_core: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub config: serde_json::Value,
    pub versions: Versions,
    pub wall_time_seconds: f64,
    /// Energies are in units of this value and times in its inverse.
    pub omega0: Option<f64>,
    pub files: Vec<FileEntry>,
}

/// Protocol as written to JSON artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRecord {
    pub tau: f64,
    pub switch_times: Vec<f64>,
    pub levels: Vec<f64>,
}

impl From<&BangBangProtocol> for ProtocolRecord {
    fn from(p: &BangBangProtocol) -> Self {
        ProtocolRecord {
            tau: p.tau(),
            switch_times: p.switch_times().to_vec(),
            levels: p.levels().to_vec(),
        }
    }
}

impl ProtocolRecord {
    pub fn protocol(&self) -> qcharge_core::error::Result<BangBangProtocol> {
        BangBangProtocol::new(self.tau, self.switch_times.clone(), self.levels.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumRecord {
    pub tau: f64,
    pub n_budget: usize,
    pub best_energy: f64,
    pub protocol: ProtocolRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McpRecord {
    pub tau: f64,
    pub battery_energy: f64,
    pub initial_population: f64,
    pub transferred_population: f64,
    /// Effective-model protocol (physical coupling times `lambda_scale`).
    pub protocol: ProtocolRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkReport {
    pub dimension: usize,
    pub mean_energy: f64,
    pub ergotropy: f64,
    pub anti_ergotropy: f64,
    pub max_unitary_energy: f64,
    pub passive_energy: f64,
    pub total_ergotropy: f64,
    /// A number, or `"inf"` for a pure-ground limit.
    pub total_ergotropy_beta: serde_json::Value,
    pub entropy: f64,
    pub beta_bar: Option<f64>,
    pub free_energy_gap: Option<f64>,
}

/// Computes the work functionals for the `work` experiment and subcommand.
pub fn work_report(
    rho_eigs: Vec<f64>,
    h_eigs: Vec<f64>,
    mean_energy: Option<f64>,
    beta_bar: Option<f64>,
    tol: f64,
) -> Result<WorkReport> {
    let sp = SpectralPair::new(rho_eigs, h_eigs).map_err(|e| RunError::field("rho_eigs", e))?;
    let mean = mean_energy.unwrap_or_else(|| work::diagonal_mean_energy(&sp));
    let total = work::total_ergotropy(&sp, mean, tol).map_err(|e| RunError::model("total_ergotropy", e))?;
    let free = beta_bar
        .map(|b| work::free_energy_gap(&sp, mean, b))
        .transpose()
        .map_err(|e| RunError::field("beta_bar", e))?;
    Ok(WorkReport {
        dimension: sp.dimension(),
        mean_energy: mean,
        ergotropy: work::ergotropy(&sp, mean),
        anti_ergotropy: work::anti_ergotropy(&sp, mean),
        max_unitary_energy: sp.max_unitary_energy(),
        passive_energy: sp.passive_energy(),
        total_ergotropy: total.value,
        total_ergotropy_beta: json_f64(total.beta),
        entropy: sp.entropy(),
        beta_bar,
        free_energy_gap: free,
    })
}

struct Sink {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Sink {
    fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| RunError::io(&path, e))?;
        w.write_record(header).map_err(|e| RunError::io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| RunError::io(&path, e))?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            format: "csv".into(),
            columns: Some(header.to_vec()),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let text = to_json_text(value).map_err(|e| RunError::io(&path, e))?;
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        self.files.push(FileEntry {
            path: name.to_string(),
            format: "json".into(),
            columns: None,
        });
        Ok(())
    }
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|&v| fmt_sig(v)).collect()
}

pub const TRAJECTORY_COLUMNS: [&str; 5] = ["t", "a1", "a2", "a3", "energy"];

fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .zip(&traj.energy)
        .map(|((&t, s), &e)| {
            let a = s.vector();
            row(&[t, a.x, a.y, a.z, e])
        })
        .collect()
}

/// Staircase columns for a largest budget of `max_n`: switch and level
/// slots padded with empty fields.
pub fn staircase_header(max_n: usize) -> Vec<String> {
    let mut h = strings(&["tau", "n_budget", "best_energy"]);
    h.extend((1..=max_n).map(|i| format!("switch_{i}")));
    h.extend((1..=max_n + 1).map(|i| format!("level_{i}")));
    h
}

fn staircase_rows(points: &[StaircasePoint], max_n: usize) -> Vec<Vec<String>> {
    points
        .iter()
        .map(|p| {
            let mut r = vec![fmt_sig(p.tau), p.n_budget.to_string(), fmt_sig(p.best_energy)];
            let s = p.best_protocol.switch_times();
            let l = p.best_protocol.levels();
            r.extend((0..max_n).map(|i| s.get(i).map_or(String::new(), |&x| fmt_sig(x))));
            r.extend((0..=max_n).map(|i| l.get(i).map_or(String::new(), |&x| fmt_sig(x))));
            r
        })
        .collect()
}

fn core_err(context: &str) -> impl Fn(qcharge_core::Error) -> RunError + '_ {
    move |e| RunError::model(context, e)
}

/// Runs the experiment, writing every artifact and `manifest.json` under
/// `config.output_dir`.
pub fn run(config: &ExperimentConfig) -> Result<Manifest> {
    let start = Instant::now();
    let dir = config.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| RunError::io(&dir, e))?;
    let mut sink = Sink { dir, files: Vec::new() };
    match &config.params {
        Params::DcpScan(p) => dcp_scan(p, config, &mut sink)?,
        Params::DcpOptimize(p) => dcp_optimize(p, config, &mut sink)?,
        Params::PmpCheck(p) => pmp_check(p, &mut sink)?,
        Params::TwoField(p) => two_field_run(p, config, &mut sink)?,
        Params::OscillatorScan(p) => oscillator_scan(p, &mut sink)?,
        Params::Mcp(p) => mcp_run(p, config, &mut sink)?,
        Params::Work(p) => {
            let report = work_report(p.rho_eigs.clone(), p.h_eigs.clone(), p.mean_energy, p.beta_bar, p.tol)?;
            sink.json("work.json", &report)?;
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: config.experiment.name().to_string(),
        config: serde_json::to_value(config).map_err(|e| RunError::model("config echo", e))?,
        versions: Versions {
            qcharge: env!("CARGO_PKG_VERSION").to_string(),
            qcharge_core: qcharge_core::VERSION.to_string(),
        },
        wall_time_seconds: start.elapsed().as_secs_f64(),
        omega0: config.omega0(),
        files: sink.files.clone(),
    };
    let path = sink.dir.join(MANIFEST);
    let text = to_json_text(&manifest).map_err(|e| RunError::io(&path, e))?;
    fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
    Ok(manifest)
}

fn dcp_scan(p: &config::DcpScanParams, c: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let model = p.model.model()?;
    let grid = linspace(p.tau_min, p.tau_max, p.tau_points);
    let options = ScanOptions {
        level_set: p.level_set.clone(),
        warm_start: p.warm_start,
        ..ScanOptions::default()
    };
    let points = optimizer::staircase_scan_with(&model, p.model.initial()?, &grid, &p.n_budgets, c.restarts, c.seed, &options)
        .map_err(core_err("staircase_scan"))?;
    let max_n = p.n_budgets.iter().copied().max().unwrap_or(0);
    sink.csv("staircase.csv", &staircase_header(max_n), &staircase_rows(&points, max_n))
}

fn dcp_optimize(p: &config::DcpOptimizeParams, c: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let model = p.model.model()?;
    let a0 = p.model.initial()?;
    let mut spec = OptimizeSpec::new(model, a0, p.tau, p.max_switches);
    if let Some(levels) = &p.level_set {
        spec.level_set = levels.clone();
    }
    spec.restarts = c.restarts;
    spec.seed = c.seed;
    let best = optimizer::optimize_energy(&spec).map_err(core_err("optimize_energy"))?;
    sink.json(
        "optimum.json",
        &OptimumRecord {
            tau: best.tau,
            n_budget: best.n_budget,
            best_energy: best.best_energy,
            protocol: (&best.best_protocol).into(),
        },
    )?;
    let traj = evolve(a0, &model, &best.best_protocol, p.samples_per_segment).map_err(core_err("evolve"))?;
    sink.csv("trajectory.csv", &strings(&TRAJECTORY_COLUMNS), &trajectory_rows(&traj))
}

fn pmp_check(p: &config::PmpCheckParams, sink: &mut Sink) -> Result<()> {
    let model = p.model.model()?;
    let a0 = p.model.initial()?;
    let protocol = p.protocol.protocol()?;
    let mut opts = PmpOptions::for_omega0(model.omega0);
    opts.objective = p.objective;
    let report = pmp::pmp_check(&model, a0.vector(), &protocol, &opts);
    sink.json("pmp_report.json", &report)?;
    let traj = evolve(a0, &model, &protocol, p.samples_per_segment).map_err(core_err("evolve"))?;
    sink.csv("trajectory.csv", &strings(&TRAJECTORY_COLUMNS), &trajectory_rows(&traj))
}

/// Single-field comparison model with the two-field intensity as its bound.
pub fn m1_model(omega0: f64, r_max: f64, symmetric: bool) -> qcharge_core::error::Result<QubitModel> {
    QubitModel::new(omega0, Vec3::X, if symmetric { -r_max } else { 0.0 }, r_max)
}

pub const TWO_FIELD_COLUMNS: [&str; 4] = ["tau", "E_m2", "E_m1_pos", "E_m1_sym"];

fn two_field_run(p: &config::TwoFieldParams, c: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let model = TwoFieldModel::new(p.omega0, p.r_max).map_err(core_err("two-field model"))?;
    let a0 = config::bloch(p.a0, "params.a0")?;
    let grid = linspace(p.tau_min, p.tau_max, p.tau_points);
    let budgets = [p.m1_max_switches];
    let mut curves = Vec::new();
    for symmetric in [false, true] {
        let m1 = m1_model(p.omega0, p.r_max, symmetric).map_err(core_err("single-field model"))?;
        let pts = optimizer::staircase_scan(&m1, a0, &grid, &budgets, c.restarts, c.seed)
            .map_err(core_err("staircase_scan"))?;
        curves.push(pts);
    }
    let rows: Vec<Vec<String>> = grid
        .iter()
        .enumerate()
        .map(|(i, &tau)| {
            row(&[
                tau,
                two_field::energy_m2(&model, &a0, tau),
                curves[0][i].best_energy,
                curves[1][i].best_energy,
            ])
        })
        .collect();
    sink.csv("energies.csv", &strings(&TWO_FIELD_COLUMNS), &rows)?;
    let control = two_field::optimal_control_m2(&model, &a0, p.tau_max).map_err(core_err("optimal_control_m2"))?;
    let rows: Vec<Vec<String>> = linspace(0.0, p.tau_max, p.trajectory_samples + 1)
        .into_iter()
        .map(|t| {
            let a = two_field::rotating_frame_state(&model, &a0, &control, t);
            let e = p.omega0 * (1.0 - a.z) / 2.0;
            row(&[t, a.x, a.y, a.z, e])
        })
        .collect();
    sink.csv("m2_trajectory.csv", &strings(&TRAJECTORY_COLUMNS), &rows)
}

pub const SCAN_COLUMNS: [&str; 3] = ["omega_bar", "tau", "energy"];
pub const RUN_COLUMNS: [&str; 7] = ["t", "v1", "v2", "v3", "lambda", "energy", "g1"];

/// Square wave at the natural frequency.
pub fn resonant_wave(p: &config::OscillatorScanParams) -> SquareWaveSpec {
    SquareWaveSpec {
        lambda_min: p.lambda_min,
        ..SquareWaveSpec::new(p.omega0, p.lambda_max, p.tau)
    }
}

fn oscillator_scan(p: &config::OscillatorScanParams, sink: &mut Sink) -> Result<()> {
    let grid = linspace(p.omega_bar_min, p.omega_bar_max, p.omega_bar_points);
    let mut rows = Vec::with_capacity(grid.len());
    for &w in &grid {
        let spec = SquareWaveSpec {
            lambda_min: p.lambda_min,
            ..SquareWaveSpec::new(w, p.lambda_max, p.tau)
        };
        let e = oscillator::square_wave_energy(&spec, p.omega0).map_err(core_err("square_wave_energy"))?;
        rows.push(row(&[w, p.tau, e]));
    }
    sink.csv("scan.csv", &strings(&SCAN_COLUMNS), &rows)?;
    let protocol = resonant_wave(p).protocol().map_err(core_err("square wave"))?;
    let run = oscillator::simulate_oscillator(p.omega0, OscillatorMoments::VACUUM, &protocol, p.samples_per_segment);
    let rows: Vec<Vec<String>> = (0..run.times.len())
        .map(|i| {
            let v = run.moments[i];
            row(&[run.times[i], v.v1, v.v2, v.v3, run.levels[i], run.energy[i], run.g1[i]])
        })
        .collect();
    sink.csv("run.csv", &strings(&RUN_COLUMNS), &rows)
}

/// Effective model of the configured charger.
pub fn effective_model(p: &config::McpParams) -> Result<EffectiveTwoLevelModel> {
    match p.charger {
        Charger::Qubit => Ok(mcp::reduce_qubit_qubit(&QubitQubitModel {
            omega_a: p.omega_a,
            omega_b: p.omega_b,
            lambda_min: p.lambda_min,
            lambda_max: p.lambda_max,
            initial: p.initial,
        })),
        Charger::Oscillator => {
            let n = p.n.ok_or_else(|| RunError::field("params.n", "required for an oscillator charger"))?;
            mcp::reduce_oscillator_qubit(p.omega_a, p.omega_b, n, p.lambda_min, p.lambda_max)
                .map_err(|e| RunError::field("params.n", e))
        }
    }
}

fn mcp_run(p: &config::McpParams, c: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let model = effective_model(p)?;
    sink.json("reduction.json", &model.report())?;
    let best = mcp::optimize_battery(&model, p.tau, p.max_switches, c.restarts, c.seed)
        .map_err(core_err("optimize_battery"))?;
    sink.json(
        "optimum.json",
        &McpRecord {
            tau: best.tau,
            battery_energy: best.battery_energy,
            initial_population: best.populations.initial,
            transferred_population: best.populations.transferred,
            protocol: (&best.protocol).into(),
        },
    )?;
    let qubit = model.qubit_model().map_err(core_err("effective model"))?;
    let traj = evolve(BlochState::ground(), &qubit, &best.protocol, p.samples_per_segment)
        .map_err(core_err("evolve"))?;
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            let a = s.vector();
            row(&[t, a.x, a.y, a.z, mcp::battery_energy(&model, s)])
        })
        .collect();
    sink.csv("trajectory.csv", &strings(&TRAJECTORY_COLUMNS), &rows)
}

/// Reads a manifest and returns it with the directory its paths are
/// relative to.
pub fn read_manifest(path: &Path) -> Result<(Manifest, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| RunError::artifact(path, e))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(RunError::artifact(
            path,
            format!("schema_version {} is not {}", manifest.schema_version, SCHEMA_VERSION),
        ));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((manifest, dir))
}
