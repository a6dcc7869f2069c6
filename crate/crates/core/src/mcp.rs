//! Mediated charging: a battery qubit `B` charged through a charger `A`
//! (a qubit or an oscillator) with a tunable coupling.
//!
//! Both chargers leave a two-dimensional block invariant, and inside it the
//! problem is a single qubit with `H0' = splitting sigma_z + offset` and
//! `H1' = lambda_scale sigma_x`. The block basis is ordered so that the
//! starting state is `a = (0, 0, 1)` and the battery excited state is
//! `a = (0, 0, -1)`; the battery energy is then `omega_b (1 - a3) / 2`.

use crate::dynamics::{BlochState, QubitModel};
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::dynamics::BangBangProtocol;
use crate::optimizer::{min_time_to_target, optimize_energy, OptimizeSpec, TargetOptions};
use crate::pmp::{pmp_check_scaled, Objective, PmpOptions, PmpReport};
use crate::vec3::Vec3;

/// Initial state of the qubit-qubit system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum InitialBlock {
    /// Charger excited, battery empty: `|10>`, block `{|10>, |01>}`.
    Charged,
    /// Both empty: `|00>`, block `{|00>, |11>}`.
    Vacuum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QubitQubitModel {
    pub omega_a: f64,
    pub omega_b: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub initial: InitialBlock,
}

/// Single-qubit problem equivalent to a charger-battery block.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EffectiveTwoLevelModel {
    /// Coefficient of `sigma_z` in `H0'`.
    pub splitting: f64,
    /// Coefficient of the identity in `H0'`; irrelevant to the dynamics.
    pub identity_offset: f64,
    pub charging_axis: Vec3,
    pub lambda_scale: f64,
    pub omega_b: f64,
    /// Bounds of the physical coupling.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `+1` when raising the battery energy raises `<H0'>`, else `-1`.
    pub objective_sign: f64,
}

impl EffectiveTwoLevelModel {
    /// Reference qubit with `omega0 = -2 splitting` and the coupling bounds
    /// multiplied by `lambda_scale`.
    pub fn qubit_model(&self) -> Result<QubitModel> {
        QubitModel::new(
            -2.0 * self.splitting,
            self.charging_axis,
            self.lambda_scale * self.lambda_min,
            self.lambda_scale * self.lambda_max,
        )
    }

    /// Direction in which `<H0'>` has to be pushed to charge the battery.
    pub fn objective(&self) -> Objective {
        if self.objective_sign >= 0.0 {
            Objective::Maximize
        } else {
            Objective::Minimize
        }
    }

    /// `omega_b |beta|^2` for an excited-block population `|beta|^2`.
    pub fn battery_weight(&self, population: f64) -> f64 {
        population * self.omega_b
    }

    pub fn report(&self) -> ReductionReport {
        ReductionReport {
            splitting: self.splitting,
            offset: self.identity_offset,
            lambda_scale: self.lambda_scale,
            objective_sign: self.objective_sign,
        }
    }
}

/// Serializable summary of a reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReductionReport {
    pub splitting: f64,
    pub offset: f64,
    pub lambda_scale: f64,
    pub objective_sign: f64,
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn reduce_qubit_qubit(model: &QubitQubitModel) -> EffectiveTwoLevelModel {
    let (wa, wb) = (model.omega_a, model.omega_b);
    let (splitting, objective_sign) = match model.initial {
        InitialBlock::Charged => (0.5 * (wa - wb), sign(wb - wa)),
        InitialBlock::Vacuum => (-0.5 * (wa + wb), sign(wa + wb)),
    };
    EffectiveTwoLevelModel {
        splitting,
        identity_offset: 0.5 * (wa + wb),
        charging_axis: Vec3::X,
        lambda_scale: 1.0,
        omega_b: wb,
        lambda_min: model.lambda_min,
        lambda_max: model.lambda_max,
        objective_sign,
    }
}

/// Oscillator charger holding `n` excitations, battery empty: block
/// `{|n, 0>, |n - 1, 1>}` with coupling element `sqrt(n)`.
pub fn reduce_oscillator_qubit(
    omega_a: f64,
    omega_b: f64,
    n: u32,
    lambda_min: f64,
    lambda_max: f64,
) -> Result<EffectiveTwoLevelModel> {
    if n == 0 {
        return Err(Error::Parameter {
            name: "n",
            reason: "the charger needs at least one excitation",
        });
    }
    let nf = f64::from(n);
    Ok(EffectiveTwoLevelModel {
        splitting: 0.5 * (omega_a - omega_b),
        identity_offset: 0.5 * (omega_a * (2.0 * nf - 1.0) + omega_b),
        charging_axis: Vec3::X,
        lambda_scale: sqrt(nf),
        omega_b,
        lambda_min,
        lambda_max,
        objective_sign: sign(omega_b - omega_a),
    })
}

/// Battery energy `omega_b (1 - a3) / 2` of an effective-model state.
pub fn battery_energy(model: &EffectiveTwoLevelModel, state: &BlochState) -> f64 {
    model.battery_weight(state.excited_population())
}

/// Populations of the two block states.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockPopulations {
    /// Population of the starting block state (`|10>` or `|00>`).
    pub initial: f64,
    /// Population of the other block state (`|01>` or `|11>`).
    pub transferred: f64,
}

pub fn block_populations(state: &BlochState) -> BlockPopulations {
    let excited = state.excited_population();
    BlockPopulations {
        initial: 1.0 - excited,
        transferred: excited,
    }
}

/// Best battery charge found on the effective model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct McpOptimum {
    pub tau: f64,
    /// Protocol in effective units (physical coupling times `lambda_scale`).
    pub protocol: BangBangProtocol,
    pub battery_energy: f64,
    pub populations: BlockPopulations,
}

/// Optimizes the battery energy from the starting block state.
pub fn optimize_battery(
    model: &EffectiveTwoLevelModel,
    tau: f64,
    max_switches: usize,
    restarts: usize,
    seed: u64,
) -> Result<McpOptimum> {
    let qubit = model.qubit_model()?;
    let mut spec = OptimizeSpec::new(qubit, BlochState::ground(), tau, max_switches);
    spec.restarts = restarts;
    spec.seed = seed;
    spec.objective = model.objective();
    let point = optimize_energy(&spec)?;
    let a = BlochState::new(crate::dynamics::final_state(Vec3::Z, &qubit, &point.best_protocol))?;
    Ok(McpOptimum {
        tau,
        battery_energy: battery_energy(model, &a),
        populations: block_populations(&a),
        protocol: point.best_protocol,
    })
}

/// Sign-rule certification of an effective protocol for the battery
/// objective `omega_b (1 - a3) / 2`. This stays informative on resonance,
/// where the effective `omega0` vanishes.
pub fn pmp_check_effective(
    model: &EffectiveTwoLevelModel,
    protocol: &BangBangProtocol,
    opts: &PmpOptions,
) -> Result<PmpReport> {
    let qubit = model.qubit_model()?;
    Ok(pmp_check_scaled(&qubit, Vec3::Z, protocol, model.omega_b, opts))
}

/// Shortest horizon after which the battery can be fully charged, up to
/// `tol_state` in the Bloch vector.
pub fn full_transfer_time(model: &EffectiveTwoLevelModel, options: &TargetOptions) -> Result<f64> {
    let qubit = model.qubit_model()?;
    let hit = min_time_to_target(&qubit, BlochState::ground(), BlochState::excited(), options)?;
    Ok(hit.tau)
}

/// Comparison of the oscillator charger and a qubit charger whose bound is
/// enlarged by `sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SqrtNReport {
    pub n: u32,
    pub energy_oscillator: f64,
    pub energy_qubit_scaled: f64,
    pub difference: f64,
    /// Oscillator protocol levels times `sqrt(n)` equal the qubit ones.
    pub protocols_match: bool,
}

/// Parameters shared by both optimizations of [`sqrt_n_equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtNOptions {
    pub max_switches: usize,
    pub restarts: usize,
    pub seed: u64,
}

pub fn sqrt_n_equivalence_check(
    omega_a: f64,
    omega_b: f64,
    n: u32,
    bounds: (f64, f64),
    tau: f64,
    options: &SqrtNOptions,
) -> Result<SqrtNReport> {
    let osc = reduce_oscillator_qubit(omega_a, omega_b, n, bounds.0, bounds.1)?;
    let root = sqrt(f64::from(n));
    let qubit = reduce_qubit_qubit(&QubitQubitModel {
        omega_a,
        omega_b,
        lambda_min: root * bounds.0,
        lambda_max: root * bounds.1,
        initial: InitialBlock::Charged,
    });
    let osc_best = optimize_battery(&osc, tau, options.max_switches, options.restarts, options.seed)?;
    let qub_best = optimize_battery(&qubit, tau, options.max_switches, options.restarts, options.seed)?;
    let (e_osc, p_osc) = (osc_best.battery_energy, osc_best.protocol);
    let (e_qub, p_qub) = (qub_best.battery_energy, qub_best.protocol);
    // Effective levels of both reductions are physical levels times their
    // scale; map them back to physical couplings and compare.
    let osc_physical = p_osc.scaled_levels(1.0 / osc.lambda_scale);
    let qubit_physical = p_qub.scaled_levels(1.0 / qubit.lambda_scale);
    let protocols_match = osc_physical.switch_times().len() == qubit_physical.switch_times().len()
        && osc_physical
            .switch_times()
            .iter()
            .zip(qubit_physical.switch_times())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * tau.max(1.0))
        && osc_physical
            .levels()
            .iter()
            .zip(qubit_physical.levels())
            .all(|(a, b)| (a * root - b).abs() <= 1e-12 * (1.0f64).max(b.abs()));
    Ok(SqrtNReport {
        n,
        energy_oscillator: e_osc,
        energy_qubit_scaled: e_qub,
        difference: (e_osc - e_qub).abs(),
        protocols_match,
    })
}
