//! Harmonic-oscillator battery driven by a linear force.
//!
//! The state is tracked through the moments `v1 = <a^dag a>`,
//! `v2 = Im <a>` and `v3 = Re <a>`, which obey the closed system
//! `v1' = -2 lambda v2`, `v2' = -omega0 v3 - lambda`, `v3' = omega0 v2`.
//! For constant `lambda` the pair `(v2, v3)` rotates about the displaced
//! point `(0, -lambda / omega0)`, so every segment is propagated exactly.
//! The costates obey `p2' = -omega0 p3 - 2 omega0 lambda`, `p3' = omega0 p2`
//! with `p(tau) = 0`; `p1` stays zero.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::dynamics::BangBangProtocol;
use crate::error::{Error, Result};
use crate::math::{abs, floor, ln, sin_cos};
use crate::pmp::{certify, LevelRule, PmpOptions, PmpReport};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillatorMoments {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

impl OscillatorMoments {
    pub const VACUUM: OscillatorMoments = OscillatorMoments {
        v1: 0.0,
        v2: 0.0,
        v3: 0.0,
    };

    /// `v1 - (v2^2 + v3^2)`, zero on the coherent states reached from vacuum.
    pub fn coherence_gap(&self) -> f64 {
        self.v1 - (self.v2 * self.v2 + self.v3 * self.v3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillatorCostates {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
}

impl OscillatorCostates {
    pub const TERMINAL: OscillatorCostates = OscillatorCostates {
        p1: 0.0,
        p2: 0.0,
        p3: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillatorModel {
    pub omega0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl OscillatorModel {
    pub fn new(omega0: f64, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        if !(omega0 > 0.0) || !omega0.is_finite() {
            return Err(Error::Parameter {
                name: "omega0",
                reason: "must be positive and finite",
            });
        }
        if !(lambda_min <= lambda_max) {
            return Err(Error::InvertedBounds {
                min: lambda_min,
                max: lambda_max,
            });
        }
        Ok(OscillatorModel {
            omega0,
            lambda_min,
            lambda_max,
        })
    }

    /// Bounds `[-lambda_max, lambda_max]`.
    pub fn symmetric(omega0: f64, lambda_max: f64) -> Result<Self> {
        Self::new(omega0, -lambda_max, lambda_max)
    }
}

/// Exact update of the moments over `dt` at constant `lambda`.
pub fn moments_step(v: OscillatorMoments, lambda: f64, dt: f64, omega0: f64) -> OscillatorMoments {
    let theta = omega0 * dt;
    let (s, c) = sin_cos(theta);
    let w2 = v.v2;
    let w3 = v.v3 + lambda / omega0;
    let v2 = w2 * c - w3 * s;
    let v3 = w3 * c + w2 * s - lambda / omega0;
    let v1 = v.v1 - 2.0 * lambda * (w2 * s + w3 * (c - 1.0)) / omega0;
    OscillatorMoments { v1, v2, v3 }
}

/// Exact backward update of the costates from `t` to `t - dt`.
pub fn costate_step_backward(
    p: OscillatorCostates,
    lambda: f64,
    dt: f64,
    omega0: f64,
) -> OscillatorCostates {
    let theta = omega0 * dt;
    let (s, c) = sin_cos(theta);
    let q2 = p.p2;
    let q3 = p.p3 + 2.0 * lambda;
    OscillatorCostates {
        p1: 0.0,
        p2: q2 * c + q3 * s,
        p3: q3 * c - q2 * s - 2.0 * lambda,
    }
}

/// `G1 = 2 omega0 v2 - 2 p1 v2 - p2`.
pub fn switching_function_osc(v: &OscillatorMoments, p: &OscillatorCostates, omega0: f64) -> f64 {
    2.0 * omega0 * v.v2 - 2.0 * p.p1 * v.v2 - p.p2
}

pub fn oscillator_energy(v: &OscillatorMoments, omega0: f64) -> f64 {
    omega0 * v.v1
}

/// Sampled oscillator run with its costates and switching function.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorRun {
    pub times: Vec<f64>,
    pub moments: Vec<OscillatorMoments>,
    pub costates: Vec<OscillatorCostates>,
    pub levels: Vec<f64>,
    pub energy: Vec<f64>,
    pub g1: Vec<f64>,
}

/// State and costate of one protocol, evaluable at any time.
#[derive(Debug, Clone)]
pub struct OscillatorPropagation<'a> {
    omega0: f64,
    protocol: &'a BangBangProtocol,
    bounds: Vec<(f64, f64)>,
    v_start: Vec<OscillatorMoments>,
    p_end: Vec<OscillatorCostates>,
}

impl<'a> OscillatorPropagation<'a> {
    pub fn new(omega0: f64, v0: OscillatorMoments, protocol: &'a BangBangProtocol) -> Self {
        let bounds: Vec<(f64, f64)> = protocol.segments().map(|(s, e, _)| (s, e)).collect();
        let levels = protocol.levels();
        let mut v_start = Vec::with_capacity(levels.len());
        let mut v = v0;
        for (k, &(s, e)) in bounds.iter().enumerate() {
            v_start.push(v);
            v = moments_step(v, levels[k], e - s, omega0);
        }
        let mut p_end = alloc::vec![OscillatorCostates::TERMINAL; levels.len()];
        let mut p = OscillatorCostates::TERMINAL;
        for k in (0..levels.len()).rev() {
            p_end[k] = p;
            let (s, e) = bounds[k];
            p = costate_step_backward(p, levels[k], e - s, omega0);
        }
        OscillatorPropagation {
            omega0,
            protocol,
            bounds,
            v_start,
            p_end,
        }
    }

    pub fn at_segment(&self, t: f64, k: usize) -> (OscillatorMoments, OscillatorCostates) {
        let (s, e) = self.bounds[k];
        let level = self.protocol.levels()[k];
        let v = moments_step(self.v_start[k], level, t - s, self.omega0);
        let p = if t == e {
            self.p_end[k]
        } else {
            costate_step_backward(self.p_end[k], level, e - t, self.omega0)
        };
        (v, p)
    }

    pub fn at(&self, t: f64) -> (OscillatorMoments, OscillatorCostates) {
        self.at_segment(t, self.protocol.segment_index(t))
    }

    pub fn g1(&self, t: f64) -> f64 {
        let (v, p) = self.at(t);
        switching_function_osc(&v, &p, self.omega0)
    }

    pub fn final_moments(&self) -> OscillatorMoments {
        let k = self.bounds.len() - 1;
        let (s, e) = self.bounds[k];
        moments_step(self.v_start[k], self.protocol.levels()[k], e - s, self.omega0)
    }
}

/// Samples a run on the `evolve`-style grid (segment starts and `tau`
/// included). The terminal sample carries `p(tau) = 0` exactly.
pub fn simulate_oscillator(
    omega0: f64,
    v0: OscillatorMoments,
    protocol: &BangBangProtocol,
    samples_per_segment: usize,
) -> OscillatorRun {
    let prop = OscillatorPropagation::new(omega0, v0, protocol);
    let grid = crate::dynamics::sample_grid(protocol, samples_per_segment);
    let last = grid.len() - 1;
    let mut run = OscillatorRun {
        times: Vec::with_capacity(grid.len()),
        moments: Vec::with_capacity(grid.len()),
        costates: Vec::with_capacity(grid.len()),
        levels: Vec::with_capacity(grid.len()),
        energy: Vec::with_capacity(grid.len()),
        g1: Vec::with_capacity(grid.len()),
    };
    for (i, &(t, k)) in grid.iter().enumerate() {
        let (v, p) = if i == last {
            (prop.final_moments(), OscillatorCostates::TERMINAL)
        } else {
            prop.at_segment(t, k)
        };
        run.times.push(t);
        run.moments.push(v);
        run.costates.push(p);
        run.levels.push(protocol.levels()[k]);
        run.energy.push(oscillator_energy(&v, omega0));
        run.g1.push(switching_function_osc(&v, &p, omega0));
    }
    run
}

/// Square-wave drive switching every half period `pi / omega_bar`, starting
/// at `lambda_max` and alternating with the lower level.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SquareWaveSpec {
    pub omega_bar: f64,
    pub lambda_max: f64,
    /// Lower bang; `-lambda_max` when absent.
    pub lambda_min: Option<f64>,
    pub tau: f64,
}

impl SquareWaveSpec {
    pub fn new(omega_bar: f64, lambda_max: f64, tau: f64) -> Self {
        SquareWaveSpec {
            omega_bar,
            lambda_max,
            lambda_min: None,
            tau,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lambda_min.unwrap_or(-self.lambda_max)
    }

    pub fn half_period(&self) -> f64 {
        PI / self.omega_bar
    }

    pub fn protocol(&self) -> Result<BangBangProtocol> {
        if !(self.omega_bar > 0.0) || !self.omega_bar.is_finite() {
            return Err(Error::Parameter {
                name: "omega_bar",
                reason: "must be positive and finite",
            });
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::BadDuration { tau: self.tau });
        }
        let half = self.half_period();
        let count = floor(self.tau / half) as usize;
        let mut switches = Vec::with_capacity(count);
        for n in 1..=count {
            let t = half * n as f64;
            if t < self.tau {
                switches.push(t);
            }
        }
        let levels = (0..=switches.len())
            .map(|k| if k % 2 == 0 { self.lambda_max } else { self.lower() })
            .collect();
        BangBangProtocol::new(self.tau, switches, levels)
    }
}

/// Energy `omega0 v1(tau)` of the square wave started from vacuum.
pub fn square_wave_energy(spec: &SquareWaveSpec, omega0: f64) -> Result<f64> {
    let protocol = spec.protocol()?;
    let mut v = OscillatorMoments::VACUUM;
    for (s, e, level) in protocol.segments() {
        v = moments_step(v, level, e - s, omega0);
    }
    Ok(oscillator_energy(&v, omega0))
}

/// Square-wave energy at `tau` for every drive frequency in the grid, and
/// the frequency with the largest energy (first one on ties).
pub fn frequency_scan(
    omega_bar_grid: &[f64],
    lambda_max: f64,
    tau: f64,
    omega0: f64,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if omega_bar_grid.is_empty() {
        return Err(Error::Parameter {
            name: "omega_bar_grid",
            reason: "must not be empty",
        });
    }
    let mut table = Vec::with_capacity(omega_bar_grid.len());
    let mut best = (omega_bar_grid[0], f64::NEG_INFINITY);
    for &w in omega_bar_grid {
        let e = square_wave_energy(&SquareWaveSpec::new(w, lambda_max, tau), omega0)?;
        if e > best.1 {
            best = (w, e);
        }
        table.push((w, e));
    }
    Ok((best.0, table))
}

/// Result of the singular-interval search on an oscillator run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularOscReport {
    /// Intervals where `p2 = 2 omega0 v2` and `p3 = 2 omega0 v3` both hold.
    pub intervals: Vec<(f64, f64)>,
    /// Every flagged interval has all moments and costates at zero.
    pub degenerate: bool,
    /// `|<a>(tau)|`.
    pub terminal_displacement: f64,
    /// Either no interval was found, or the run ends with `<a> = 0` as the
    /// singular analysis requires.
    pub consistent: bool,
}

/// Flags runs of samples where both singular conditions hold within `tol`
/// for at least `min_length`.
pub fn singular_check_osc(run: &OscillatorRun, omega0: f64, tol: f64, min_length: f64) -> SingularOscReport {
    let holds = |i: usize| {
        let v = &run.moments[i];
        let p = &run.costates[i];
        abs(p.p2 - 2.0 * omega0 * v.v2) <= tol && abs(p.p3 - 2.0 * omega0 * v.v3) <= tol
    };
    let zero = |i: usize| {
        let v = &run.moments[i];
        let p = &run.costates[i];
        [v.v1, v.v2, v.v3, p.p2, p.p3].iter().all(|x| abs(*x) <= tol)
    };
    let mut intervals = Vec::new();
    let mut degenerate = true;
    let mut start: Option<usize> = None;
    let n = run.times.len();
    for i in 0..=n {
        let ok = i < n && holds(i);
        match (ok, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let e = i - 1;
                if run.times[e] - run.times[s] >= min_length {
                    intervals.push((run.times[s], run.times[e]));
                    if !(s..=e).all(zero) {
                        degenerate = false;
                    }
                }
                start = None;
            }
            _ => {}
        }
    }
    let last = run.moments.last().copied().unwrap_or_default();
    let terminal_displacement = crate::math::sqrt(last.v2 * last.v2 + last.v3 * last.v3);
    let degenerate = degenerate && !intervals.is_empty();
    SingularOscReport {
        consistent: intervals.is_empty() || terminal_displacement <= tol,
        intervals,
        degenerate,
        terminal_displacement,
    }
}

/// Sign-rule certification of an oscillator protocol (energy maximization).
/// No singular level exists, so interior levels always count as violations.
pub fn pmp_check_osc(
    model: &OscillatorModel,
    v0: OscillatorMoments,
    protocol: &BangBangProtocol,
    opts: &PmpOptions,
) -> PmpReport {
    let prop = OscillatorPropagation::new(model.omega0, v0, protocol);
    let rule = LevelRule {
        min: model.lambda_min,
        max: model.lambda_max,
        singular: None,
    };
    certify(|t| prop.g1(t), protocol, &rule, opts)
}

/// Least-squares fit of `y = c x^p` on logarithmic axes; returns `(c, p)`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Parameter {
            name: "samples",
            reason: "need at least two paired points",
        });
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::Parameter {
            name: "samples",
            reason: "power-law fit needs positive data",
        });
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|&x| ln(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| ln(y)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let p = sxy / sxx;
    let c = crate::math::exp(my - p * mx);
    Ok((c, p))
}
