//! Re-checks a finished run from its manifest: PMP verdicts and invariants
//! over the listed artifacts, aggregated into one report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use qcharge_core::mcp::{self, SqrtNOptions};
use qcharge_core::optimizer;
use qcharge_core::oscillator::{self, OscillatorModel, OscillatorMoments};
use qcharge_core::pmp::{self, EnergyExtremum, PmpOptions, PmpReport, SingularClass, Verdict};
use qcharge_core::two_field::{self, M2CheckOptions, TwoFieldModel};
use qcharge_core::{evolve, BangBangProtocol, BlochState, QubitModel};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Charger, ExperimentConfig, Params};
use crate::error::{Result, RunError};
use crate::run::{self, FileEntry, Manifest, McpRecord, OptimumRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub experiment: String,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Checks that do not apply to this run, with the reason.
    pub skipped: Vec<String>,
}

struct Checks(Vec<Check>, Vec<String>);

impl Checks {
    fn skip(&mut self, reason: String) {
        self.1.push(reason);
    }

    fn add(&mut self, name: &str, pass: bool, detail: Value) {
        self.0.push(Check {
            name: name.to_string(),
            pass,
            detail,
        });
    }
}

/// Numeric table read back from a CSV artifact; empty cells are `None`.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Values of a column that must be filled in every row.
    pub fn values(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| RunError::artifact(path, format!("no column {name}")))?;
        self.rows
            .iter()
            .map(|r| r[c].ok_or_else(|| RunError::artifact(path, format!("empty cell in {name}"))))
            .collect()
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(|e| RunError::io(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| RunError::artifact(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| RunError::artifact(path, e))?;
        let parsed: Result<Vec<Option<f64>>> = rec
            .iter()
            .map(|cell| {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|e| RunError::artifact(path, format!("{cell:?}: {e}")))
                }
            })
            .collect();
        rows.push(parsed?);
    }
    Ok(Table { header, rows })
}

/// Artifact access restricted to the files a manifest lists.
struct Listed<'a> {
    dir: PathBuf,
    files: &'a [FileEntry],
}

impl Listed<'_> {
    fn path(&self, name: &str) -> Result<PathBuf> {
        if self.files.iter().any(|f| f.path == name) {
            Ok(self.dir.join(name))
        } else {
            Err(RunError::artifact(self.dir.join(name), "not listed in the manifest"))
        }
    }

    fn table(&self, name: &str) -> Result<(Table, PathBuf)> {
        let path = self.path(name)?;
        let table = read_table(&path)?;
        let entry = self.files.iter().find(|f| f.path == name).expect("listed");
        if let Some(cols) = &entry.columns {
            if *cols != table.header {
                return Err(RunError::artifact(&path, "header differs from the manifest"));
            }
        }
        Ok((table, path))
    }

    fn json<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<T> {
        let path = self.path(name)?;
        let text = fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| RunError::artifact(&path, e))
    }
}

/// Loads `manifest.json` and checks every artifact it lists.
pub fn verify(manifest_path: &Path) -> Result<VerifyReport> {
    let (manifest, dir) = run::read_manifest(manifest_path)?;
    let config = config::from_value(&manifest.config)?;
    verify_run(&manifest, &config, dir)
}

fn verify_run(manifest: &Manifest, config: &ExperimentConfig, dir: PathBuf) -> Result<VerifyReport> {
    let files = Listed {
        dir,
        files: &manifest.files,
    };
    let mut checks = Checks(Vec::new(), Vec::new());
    match &config.params {
        Params::DcpScan(p) => dcp_scan(p, &files, &mut checks)?,
        Params::DcpOptimize(p) => dcp_optimize(p, &files, &mut checks)?,
        Params::PmpCheck(p) => pmp_check(p, &files, &mut checks)?,
        Params::TwoField(p) => two_field_checks(p, config, &files, &mut checks)?,
        Params::OscillatorScan(p) => oscillator_checks(p, &files, &mut checks)?,
        Params::Mcp(p) => mcp_checks(p, config, &files, &mut checks)?,
        Params::Work(p) => work_checks(p, &files, &mut checks)?,
    }
    Ok(VerifyReport {
        schema_version: run::SCHEMA_VERSION,
        experiment: manifest.experiment.clone(),
        pass: checks.0.iter().all(|c| c.pass),
        checks: checks.0,
        skipped: checks.1,
    })
}

/// How a qubit energy optimum fares against the minimum principle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    Consistent,
    /// Singular arcs only where the state already sits at the energy
    /// maximum.
    SingularAtMaximum,
    SingularOther,
    Violated,
}

impl Certificate {
    pub fn acceptable(self) -> bool {
        matches!(self, Certificate::Consistent | Certificate::SingularAtMaximum)
    }
}

pub fn certify_qubit(model: &QubitModel, a0: BlochState, protocol: &BangBangProtocol) -> (Certificate, PmpReport) {
    let report = pmp::pmp_check(model, a0.vector(), protocol, &PmpOptions::for_omega0(model.omega0));
    let cert = match report.verdict {
        Verdict::Consistent => Certificate::Consistent,
        Verdict::Violated => Certificate::Violated,
        Verdict::SingularArcPresent => {
            let at_max = report.singular_intervals.iter().all(|&arc| {
                pmp::singular_classify(model, a0.vector(), protocol, arc, 1e-7)
                    == SingularClass::Condition2(EnergyExtremum::EnergyMax)
            });
            if at_max {
                Certificate::SingularAtMaximum
            } else {
                Certificate::SingularOther
            }
        }
    };
    (cert, report)
}

fn final_energy(model: &QubitModel, a0: BlochState, protocol: &BangBangProtocol) -> Result<f64> {
    Ok(evolve(a0, model, protocol, 1)
        .map_err(|e| RunError::model("evolve", e))?
        .final_energy())
}

/// Staircase row back to a protocol.
pub fn staircase_protocol(table: &Table, row: &[Option<f64>], path: &Path) -> Result<BangBangProtocol> {
    let tau = row[0].ok_or_else(|| RunError::artifact(path, "missing tau"))?;
    let pick = |prefix: &str| -> Vec<f64> {
        table
            .header
            .iter()
            .zip(row)
            .filter(|(h, _)| h.starts_with(prefix))
            .filter_map(|(_, v)| *v)
            .collect()
    };
    BangBangProtocol::new(tau, pick("switch_"), pick("level_")).map_err(|e| RunError::artifact(path, e))
}

fn dcp_scan(p: &config::DcpScanParams, files: &Listed, checks: &mut Checks) -> Result<()> {
    let model = p.model.model()?;
    let a0 = p.model.initial()?;
    let (table, path) = files.table("staircase.csv")?;
    let taus = table.values("tau", &path)?;
    let budgets = table.values("n_budget", &path)?;
    let energies = table.values("best_energy", &path)?;
    let ceiling = optimizer::unbounded_max_energy(&a0, model.omega0);
    let mut counts: BTreeMap<String, BTreeMap<Certificate, usize>> = BTreeMap::new();
    let mut flagged = Vec::new();
    let mut max_recompute: f64 = 0.0;
    let mut over_ceiling = 0;
    for (i, r) in table.rows.iter().enumerate() {
        let protocol = staircase_protocol(&table, r, &path)?;
        max_recompute = max_recompute.max((final_energy(&model, a0, &protocol)? - energies[i]).abs());
        if energies[i] > ceiling + 1e-12 {
            over_ceiling += 1;
        }
        let (cert, report) = certify_qubit(&model, a0, &protocol);
        *counts.entry(format!("{}", budgets[i])).or_default().entry(cert).or_default() += 1;
        if !cert.acceptable() {
            flagged.push(json!({
                "tau": taus[i],
                "n_budget": budgets[i],
                "certificate": cert,
                "violation_times": report.violations.iter().map(|v| v.t).collect::<Vec<_>>(),
            }));
        }
    }
    checks.add("pmp", flagged.is_empty(), json!({"counts": counts, "flagged": flagged}));
    checks.add("energy-recompute", max_recompute <= 1e-9, json!({"max_abs_error": max_recompute}));
    checks.add("ceiling", over_ceiling == 0, json!({"ceiling": ceiling, "rows_above": over_ceiling}));
    // Larger budgets dominate at each tau.
    let mut worst: f64 = 0.0;
    let mut by_tau: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for i in 0..taus.len() {
        by_tau.entry(taus[i].to_bits()).or_default().push((budgets[i], energies[i]));
    }
    for pts in by_tau.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in pts.windows(2) {
            worst = worst.max(w[0].1 - w[1].1);
        }
    }
    checks.add("budget-dominance", worst <= 1e-9, json!({"max_deficit": worst}));
    Ok(())
}

fn trajectory_checks(path: &Path, table: &Table, r0: f64, checks: &mut Checks) -> Result<f64> {
    let cols: Result<Vec<Vec<f64>>> = ["a1", "a2", "a3", "energy"].iter().map(|c| table.values(c, path)).collect();
    let cols = cols?;
    let drift = (0..cols[0].len())
        .map(|i| ((cols[0][i].powi(2) + cols[1][i].powi(2) + cols[2][i].powi(2)).sqrt() - r0).abs())
        .fold(0.0, f64::max);
    checks.add("trajectory-norm", drift <= 1e-9, json!({"max_norm_drift": drift}));
    Ok(*cols[3].last().unwrap_or(&f64::NAN))
}

fn dcp_optimize(p: &config::DcpOptimizeParams, files: &Listed, checks: &mut Checks) -> Result<()> {
    let model = p.model.model()?;
    let a0 = p.model.initial()?;
    let best: OptimumRecord = files.json("optimum.json")?;
    let path = files.path("optimum.json")?;
    let protocol = best.protocol.protocol().map_err(|e| RunError::artifact(&path, e))?;
    let e = final_energy(&model, a0, &protocol)?;
    checks.add(
        "energy-recompute",
        (e - best.best_energy).abs() <= 1e-9,
        json!({"reported": best.best_energy, "recomputed": e}),
    );
    let (cert, report) = certify_qubit(&model, a0, &protocol);
    checks.add("pmp", cert.acceptable(), json!({"certificate": cert, "report": report}));
    let (table, tpath) = files.table("trajectory.csv")?;
    let last = trajectory_checks(&tpath, &table, a0.norm(), checks)?;
    checks.add("trajectory-final-energy", (last - e).abs() <= 1e-9, json!({"last_row": last}));
    Ok(())
}

fn pmp_check(p: &config::PmpCheckParams, files: &Listed, checks: &mut Checks) -> Result<()> {
    let model = p.model.model()?;
    let a0 = p.model.initial()?;
    let protocol = p.protocol.protocol()?;
    let stored: PmpReport = files.json("pmp_report.json")?;
    let mut opts = PmpOptions::for_omega0(model.omega0);
    opts.objective = p.objective;
    let fresh = pmp::pmp_check(&model, a0.vector(), &protocol, &opts);
    checks.add(
        "report-reproduces",
        fresh.verdict == stored.verdict && fresh.violations.len() == stored.violations.len(),
        json!({"stored": stored.verdict, "recomputed": fresh.verdict}),
    );
    checks.add(
        "pmp",
        stored.verdict == Verdict::Consistent,
        json!({
            "verdict": stored.verdict,
            "violation_times": stored.violations.iter().map(|v| v.t).collect::<Vec<_>>(),
            "singular_intervals": stored.singular_intervals,
        }),
    );
    let (table, tpath) = files.table("trajectory.csv")?;
    trajectory_checks(&tpath, &table, a0.norm(), checks)?;
    Ok(())
}

fn two_field_checks(p: &config::TwoFieldParams, c: &ExperimentConfig, files: &Listed, checks: &mut Checks) -> Result<()> {
    let model = TwoFieldModel::new(p.omega0, p.r_max).map_err(|e| RunError::model("two-field model", e))?;
    let a0 = config::bloch(p.a0, "params.a0")?;
    let (table, path) = files.table("energies.csv")?;
    let taus = table.values("tau", &path)?;
    let e_m2 = table.values("E_m2", &path)?;
    let e_pos = table.values("E_m1_pos", &path)?;
    let e_sym = table.values("E_m1_sym", &path)?;
    let ceiling = optimizer::unbounded_max_energy(&a0, p.omega0);
    let mut closed_err: f64 = 0.0;
    let mut sim_err: f64 = 0.0;
    let mut deficit: f64 = f64::NEG_INFINITY;
    let mut saturation_ok = true;
    let mut verdicts = Vec::new();
    let mut pmp_ok = true;
    let opts = M2CheckOptions {
        seed: c.seed,
        ..M2CheckOptions::default()
    };
    for (i, &tau) in taus.iter().enumerate() {
        let exact = two_field::energy_m2(&model, &a0, tau);
        closed_err = closed_err.max((exact - e_m2[i]).abs());
        deficit = deficit.max(e_pos[i].max(e_sym[i]) - e_m2[i]);
        let control = two_field::optimal_control_m2(&model, &a0, tau).map_err(|e| RunError::model("optimal_control_m2", e))?;
        if tau >= control.tau1 && exact != ceiling {
            saturation_ok = false;
        }
        let sim = two_field::simulate_m2(&model, &a0, &control, p.dt).map_err(|e| RunError::model("simulate_m2", e))?;
        sim_err = sim_err.max((sim.final_energy() - exact).abs());
        let v = two_field::verify_pmp_m2(&model, &a0, &control, &opts);
        let expected = if tau >= control.tau1 && tau > 0.0 {
            Verdict::SingularArcPresent
        } else {
            Verdict::Consistent
        };
        pmp_ok &= v.report.verdict == expected;
        verdicts.push(json!({
            "tau": tau,
            "verdict": v.report.verdict,
            "max_cross_drift": v.max_cross_drift,
            "antiparallel_angle": v.antiparallel_angle,
            "min_slack": v.min_slack,
        }));
    }
    checks.add("closed-form", closed_err <= 1e-9, json!({"max_abs_error": closed_err}));
    checks.add("lab-simulation", sim_err <= 1e-6, json!({"dt": p.dt, "max_abs_error": sim_err}));
    checks.add("saturation", saturation_ok, json!({"ceiling": ceiling}));
    checks.add("m2-dominates-m1", deficit <= 1e-6, json!({"max_m1_excess": deficit}));
    checks.add("pmp-m2", pmp_ok, json!(verdicts));
    let (traj, tpath) = files.table("m2_trajectory.csv")?;
    let last = trajectory_checks(&tpath, &traj, a0.norm(), checks)?;
    let end = two_field::energy_m2(&model, &a0, p.tau_max);
    checks.add("trajectory-final-energy", (last - end).abs() <= 1e-9, json!({"last_row": last}));
    Ok(())
}

fn oscillator_checks(p: &config::OscillatorScanParams, files: &Listed, checks: &mut Checks) -> Result<()> {
    let (scan, path) = files.table("scan.csv")?;
    let w = scan.values("omega_bar", &path)?;
    let e = scan.values("energy", &path)?;
    let mut best = 0;
    for i in 1..e.len() {
        if e[i] > e[best] {
            best = i;
        }
    }
    let step = if w.len() > 1 { (w[w.len() - 1] - w[0]) / (w.len() - 1) as f64 } else { 0.0 };
    checks.add(
        "resonance-peak",
        (w[best] - p.omega0).abs() <= step * (1.0 + 1e-9),
        json!({"omega_bar": w[best], "energy": e[best], "grid_step": step}),
    );
    let (run, rpath) = files.table("run.csv")?;
    let t = run.values("t", &rpath)?;
    let v1 = run.values("v1", &rpath)?;
    let v2 = run.values("v2", &rpath)?;
    let v3 = run.values("v3", &rpath)?;
    let energy = run.values("energy", &rpath)?;
    let gap = (0..t.len())
        .map(|i| (v1[i] - v2[i] * v2[i] - v3[i] * v3[i]).abs() / v1[i].max(1.0))
        .fold(0.0, f64::max);
    checks.add("coherence-identity", gap <= 1e-9, json!({"max_relative_gap": gap}));
    // Energies at whole half-periods, from the 10th up to the 100th.
    let half = std::f64::consts::PI / p.omega0;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..t.len() {
        let n = (t[i] / half).round();
        if (10.0..=100.0).contains(&n) && (t[i] - n * half).abs() <= 1e-9 * t[i] && xs.last() != Some(&n) {
            xs.push(n);
            ys.push(energy[i]);
        }
    }
    if xs.len() < 5 {
        checks.skip("growth-exponent: fewer than five half periods between the 10th and the 100th".into());
    } else {
        let (_, exponent) = oscillator::fit_power_law(&xs, &ys).map_err(|e| RunError::model("fit_power_law", e))?;
        checks.add(
            "growth-exponent",
            (exponent - 2.0).abs() <= 0.05,
            json!({"exponent": exponent, "half_periods": [xs[0], xs[xs.len() - 1]]}),
        );
    }
    let protocol = run::resonant_wave(p).protocol().map_err(|e| RunError::model("square wave", e))?;
    let fresh = oscillator::simulate_oscillator(p.omega0, OscillatorMoments::VACUUM, &protocol, p.samples_per_segment);
    let singular = oscillator::singular_check_osc(&fresh, p.omega0, 1e-9, half / 4.0);
    checks.add("no-singular-arcs", singular.intervals.is_empty(), json!(singular));
    // The switching function is anchored at tau, so a wave phased from
    // t = 0 lines up with its zeros only on a whole number of half periods.
    let periods = p.tau / half;
    if (periods - periods.round()).abs() > 1e-9 * periods.max(1.0) {
        checks.skip(format!("pmp: tau = {} is not a whole number of half periods", p.tau));
        return Ok(());
    }
    let model = OscillatorModel::new(p.omega0, p.lambda_min.unwrap_or(-p.lambda_max), p.lambda_max)
        .map_err(|e| RunError::model("oscillator model", e))?;
    let report = oscillator::pmp_check_osc(&model, OscillatorMoments::VACUUM, &protocol, &PmpOptions::for_omega0(p.omega0));
    checks.add(
        "pmp",
        report.verdict == Verdict::Consistent,
        json!({"verdict": report.verdict, "violations": report.violations.len()}),
    );
    Ok(())
}

fn mcp_checks(p: &config::McpParams, c: &ExperimentConfig, files: &Listed, checks: &mut Checks) -> Result<()> {
    let model = run::effective_model(p)?;
    let stored: mcp::ReductionReport = files.json("reduction.json")?;
    let fresh = model.report();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-11 * a.abs().max(1.0);
    checks.add(
        "reduction",
        close(stored.splitting, fresh.splitting)
            && close(stored.offset, fresh.offset)
            && close(stored.lambda_scale, fresh.lambda_scale)
            && stored.objective_sign == fresh.objective_sign,
        json!(fresh),
    );
    let best: McpRecord = files.json("optimum.json")?;
    let path = files.path("optimum.json")?;
    let protocol = best.protocol.protocol().map_err(|e| RunError::artifact(&path, e))?;
    let qubit = model.qubit_model().map_err(|e| RunError::model("effective model", e))?;
    let a = BlochState::new(qcharge_core::dynamics::final_state(qcharge_core::Vec3::Z, &qubit, &protocol))
        .map_err(|e| RunError::model("final state", e))?;
    let e = mcp::battery_energy(&model, &a);
    checks.add(
        "energy-recompute",
        (e - best.battery_energy).abs() <= 1e-9,
        json!({"reported": best.battery_energy, "recomputed": e}),
    );
    let leak = (best.initial_population + best.transferred_population - 1.0).abs();
    checks.add("block-populations", leak <= 1e-11, json!({"sum_error": leak}));
    let report = mcp::pmp_check_effective(&model, &protocol, &PmpOptions::for_omega0(p.omega_b))
        .map_err(|e| RunError::model("pmp_check_effective", e))?;
    checks.add(
        "pmp",
        report.verdict != Verdict::Violated,
        json!({"verdict": report.verdict, "violation_times": report.violations.iter().map(|v| v.t).collect::<Vec<_>>()}),
    );
    if p.charger == Charger::Oscillator {
        let n = p.n.unwrap_or(1);
        let opts = SqrtNOptions {
            max_switches: p.max_switches,
            restarts: c.restarts,
            seed: c.seed,
        };
        let r = mcp::sqrt_n_equivalence_check(p.omega_a, p.omega_b, n, (p.lambda_min, p.lambda_max), p.tau, &opts)
            .map_err(|e| RunError::model("sqrt_n_equivalence_check", e))?;
        checks.add("sqrt-n-equivalence", r.difference <= 1e-6 && r.protocols_match, json!(r));
    }
    Ok(())
}

fn work_checks(p: &config::WorkParams, files: &Listed, checks: &mut Checks) -> Result<()> {
    let stored: Value = files.json("work.json")?;
    let fresh = serde_json::to_value(run::work_report(
        p.rho_eigs.clone(),
        p.h_eigs.clone(),
        p.mean_energy,
        p.beta_bar,
        p.tol,
    )?)
    .map_err(|e| RunError::model("work report", e))?;
    let mut worst: f64 = 0.0;
    for key in ["ergotropy", "anti_ergotropy", "total_ergotropy", "mean_energy"] {
        let a = stored[key].as_f64().unwrap_or(f64::NAN);
        let b = fresh[key].as_f64().unwrap_or(f64::NAN);
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    checks.add("report-reproduces", worst <= 1e-11, json!({"max_relative_error": worst}));
    let erg = fresh["ergotropy"].as_f64().unwrap_or(f64::NAN);
    let anti = fresh["anti_ergotropy"].as_f64().unwrap_or(f64::NAN);
    let total = fresh["total_ergotropy"].as_f64().unwrap_or(f64::NAN);
    checks.add(
        "inequalities",
        erg >= 0.0 && anti <= 0.0 && total >= erg - 1e-10,
        json!({"ergotropy": erg, "anti_ergotropy": anti, "total_ergotropy": total}),
    );
    Ok(())
}
