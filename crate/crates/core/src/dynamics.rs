//! Exact propagation of qubit Bloch vectors under piecewise-constant
//! Hamiltonians, and the protocol data model shared by the other modules.
//!
//! The reference qubit has `H0 = (omega0 / 2)(1 - sigma_z)` and a single
//! charging term `H1 = x . sigma` scaled by the control `lambda(t)`. Writing
//! `H = n . sigma / 2 + const`, the Bloch vector obeys `da/dt = n x a` with
//! `n = 2 (lambda x - (omega0 / 2) z)`. For a constant control this is a rigid
//! rotation, so each segment is propagated in closed form.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, sin_cos};
use crate::vec3::Vec3;

/// Default number of samples per protocol segment in [`evolve`].
pub const DEFAULT_SAMPLES_PER_SEGMENT: usize = 64;

const NORM_SLACK: f64 = 1e-12;

/// Bloch vector `a` of a qubit density matrix `rho = (1 + a . sigma) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BlochState(Vec3);

impl BlochState {
    pub fn new(a: Vec3) -> Result<Self> {
        let norm = a.norm();
        if !(norm <= 1.0 + NORM_SLACK) {
            return Err(Error::NotAState { norm });
        }
        Ok(BlochState(a))
    }

    /// For vectors produced by rotating a valid state, whose norm can creep
    /// past one by rounding over long runs.
    pub(crate) fn from_rotation(a: Vec3) -> Self {
        BlochState(a)
    }

    /// Ground state of `H0`, `a = (0, 0, 1)`.
    pub const fn ground() -> Self {
        BlochState(Vec3::Z)
    }

    /// Fully excited state, `a = (0, 0, -1)`.
    pub const fn excited() -> Self {
        BlochState(Vec3::new(0.0, 0.0, -1.0))
    }

    pub fn vector(self) -> Vec3 {
        self.0
    }

    pub fn norm(self) -> f64 {
        self.0.norm()
    }

    /// Rotates the state about `n` for a time `dt` (`da/dt = n x a`).
    pub fn rotated(self, n: Vec3, dt: f64) -> Self {
        BlochState(rotate(self.0, n, dt))
    }

    /// Upper-level population `(1 - a3) / 2`.
    pub fn excited_population(self) -> f64 {
        0.5 * (1.0 - self.0.z)
    }
}

/// Single-field qubit: `H(t) = (omega0/2)(1 - sigma_z) + lambda(t) x . sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QubitModel {
    pub omega0: f64,
    pub axis: Vec3,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl QubitModel {
    pub fn new(omega0: f64, axis: Vec3, lambda_min: f64, lambda_max: f64) -> Result<Self> {
        let model = QubitModel {
            omega0,
            axis,
            lambda_min,
            lambda_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.axis.norm();
        if !(abs(norm - 1.0) <= 1e-12) {
            return Err(Error::AxisNotUnit { norm });
        }
        if !(self.lambda_min <= self.lambda_max) {
            return Err(Error::InvertedBounds {
                min: self.lambda_min,
                max: self.lambda_max,
            });
        }
        if !self.omega0.is_finite() {
            return Err(Error::Parameter {
                name: "omega0",
                reason: "must be finite",
            });
        }
        Ok(())
    }

    pub fn contains(&self, level: f64) -> bool {
        level_in_bounds(level, self.lambda_min, self.lambda_max)
    }
}

pub(crate) fn level_in_bounds(level: f64, min: f64, max: f64) -> bool {
    let slack = 1e-12 * (1.0f64).max(abs(min)).max(abs(max));
    level >= min - slack && level <= max + slack
}

/// Piecewise-constant control on `[0, tau]`.
///
/// Segment `k` covers `[t_{k-1}, t_k)` with `t_0 = 0` and `t_{N+1} = tau`;
/// the final instant `tau` takes the last level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BangBangProtocol {
    tau: f64,
    switch_times: Vec<f64>,
    levels: Vec<f64>,
}

impl BangBangProtocol {
    pub fn new(tau: f64, switch_times: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::BadDuration { tau });
        }
        if levels.len() != switch_times.len() + 1 {
            return Err(Error::LevelCount {
                switches: switch_times.len(),
                expected: switch_times.len() + 1,
                got: levels.len(),
            });
        }
        let mut prev = 0.0;
        for (index, &time) in switch_times.iter().enumerate() {
            if !(time > prev) || !(time < tau) {
                return Err(Error::SwitchOrder { index, time });
            }
            prev = time;
        }
        Ok(BangBangProtocol {
            tau,
            switch_times,
            levels,
        })
    }

    pub fn constant(tau: f64, level: f64) -> Result<Self> {
        Self::new(tau, Vec::new(), alloc::vec![level])
    }

    /// Builds a protocol from per-segment durations, dropping empty segments
    /// and merging neighbours that share a level.
    pub fn from_durations(levels: &[f64], durations: &[f64]) -> Result<Self> {
        if levels.len() != durations.len() || levels.is_empty() {
            return Err(Error::LevelCount {
                switches: durations.len().saturating_sub(1),
                expected: durations.len(),
                got: levels.len(),
            });
        }
        let mut bounds = Vec::with_capacity(durations.len());
        let mut t = 0.0;
        for &d in durations {
            if !(d >= 0.0) {
                return Err(Error::BadDuration { tau: d });
            }
            t += d;
            bounds.push(t);
        }
        let tau = t;
        let switches = &bounds[..bounds.len() - 1];
        Self::from_sorted_switches(tau, switches, levels, 0.0)
    }

    /// Normalizes a candidate produced by a search: segments shorter than
    /// `min_segment` are removed and equal neighbouring levels merged.
    /// `switches` must be sorted and lie in `[0, tau]`.
    pub fn from_sorted_switches(
        tau: f64,
        switches: &[f64],
        levels: &[f64],
        min_segment: f64,
    ) -> Result<Self> {
        if levels.len() != switches.len() + 1 {
            return Err(Error::LevelCount {
                switches: switches.len(),
                expected: switches.len() + 1,
                got: levels.len(),
            });
        }
        let mut kept_levels: Vec<f64> = Vec::with_capacity(levels.len());
        let mut kept_switches: Vec<f64> = Vec::with_capacity(switches.len());
        let mut start = 0.0;
        for (k, &level) in levels.iter().enumerate() {
            let end = if k < switches.len() { switches[k] } else { tau };
            let end = end.clamp(start, tau);
            if end - start <= min_segment {
                continue;
            }
            match kept_levels.last() {
                Some(&last) if last == level => {}
                Some(_) => {
                    kept_switches.push(start);
                    kept_levels.push(level);
                }
                None => kept_levels.push(level),
            }
            start = end;
        }
        if kept_levels.is_empty() {
            kept_levels.push(levels[0]);
        }
        Self::new(tau, kept_switches, kept_levels)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn n_switches(&self) -> usize {
        self.switch_times.len()
    }

    /// Index of the segment active at time `t` (right-open convention).
    pub fn segment_index(&self, t: f64) -> usize {
        self.switch_times.partition_point(|&s| s <= t)
    }

    /// Control value at time `t`.
    pub fn level_at(&self, t: f64) -> f64 {
        self.levels[self.segment_index(t)]
    }

    /// `(start, end, level)` for each segment.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.levels.iter().enumerate().map(move |(k, &level)| {
            let start = if k == 0 { 0.0 } else { self.switch_times[k - 1] };
            let end = if k < self.switch_times.len() {
                self.switch_times[k]
            } else {
                self.tau
            };
            (start, end, level)
        })
    }

    /// Checks every level against `[min, max]`.
    pub fn check_bounds(&self, min: f64, max: f64) -> Result<()> {
        for (index, &level) in self.levels.iter().enumerate() {
            if !level_in_bounds(level, min, max) {
                return Err(Error::LevelOutOfBounds {
                    index,
                    level,
                    min,
                    max,
                });
            }
        }
        Ok(())
    }

    /// Splits into the protocols on `[0, s]` and `[s, tau]`, the latter
    /// shifted to start at zero.
    pub fn split_at(&self, s: f64) -> Result<(BangBangProtocol, BangBangProtocol)> {
        if !(s > 0.0 && s < self.tau) {
            return Err(Error::BadDuration { tau: s });
        }
        let before = self.switch_times.partition_point(|&t| t < s);
        let active = self.segment_index(s);
        let left = BangBangProtocol {
            tau: s,
            switch_times: self.switch_times[..before].to_vec(),
            levels: self.levels[..=before].to_vec(),
        };
        let right = BangBangProtocol {
            tau: self.tau - s,
            switch_times: self.switch_times[active..].iter().map(|&t| t - s).collect(),
            levels: self.levels[active..].to_vec(),
        };
        Ok((left, right))
    }

    /// Same switch times with every level multiplied by `factor`.
    pub fn scaled_levels(&self, factor: f64) -> BangBangProtocol {
        BangBangProtocol {
            tau: self.tau,
            switch_times: self.switch_times.clone(),
            levels: self.levels.iter().map(|&l| l * factor).collect(),
        }
    }
}

/// Sampled qubit evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochState>,
    pub energy: Vec<f64>,
    /// Control value active at each sample.
    pub levels: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> BlochState {
        *self.states.last().expect("trajectory has at least one sample")
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy.last().expect("trajectory has at least one sample")
    }
}

/// Rotation axis `n = 2 (x1 lambda, x2 lambda, x3 lambda - omega0 / 2)`.
pub fn rotation_axis(model: &QubitModel, lambda: f64) -> Vec3 {
    let x = model.axis;
    Vec3::new(
        2.0 * x.x * lambda,
        2.0 * x.y * lambda,
        2.0 * (x.z * lambda - 0.5 * model.omega0),
    )
}

/// Exact solution of `da/dt = n x a` for constant `n` after a time `dt`:
/// a rotation of `a` about `n / |n|` by the angle `|n| dt` (Rodrigues form).
pub fn rotate(a: Vec3, n: Vec3, dt: f64) -> Vec3 {
    let rate = n.norm();
    if rate == 0.0 || dt == 0.0 {
        return a;
    }
    let k = n * (1.0 / rate);
    let angle = rate * dt;
    let (s, c) = sin_cos(angle);
    a * c + k.cross(a) * s + k * (k.dot(a) * (1.0 - c))
}

/// Stored energy `omega0 (1 - a3) / 2`.
pub fn energy(a: &BlochState, omega0: f64) -> f64 {
    0.5 * omega0 * (1.0 - a.0.z)
}

/// Sample times for a protocol: `samples` equally spaced points per segment
/// (segment starts included, hence every switch time) plus `tau`.
/// Returns `(t, segment index)` pairs.
pub(crate) fn sample_grid(protocol: &BangBangProtocol, samples: usize) -> Vec<(f64, usize)> {
    let samples = samples.max(1);
    let mut grid = Vec::with_capacity(protocol.levels.len() * samples + 1);
    if protocol.tau == 0.0 {
        grid.push((0.0, 0));
        return grid;
    }
    for (k, (start, end, _)) in protocol.segments().enumerate() {
        let width = end - start;
        for j in 0..samples {
            grid.push((start + width * (j as f64) / (samples as f64), k));
        }
    }
    grid.push((protocol.tau, protocol.levels.len() - 1));
    grid
}

/// State at each segment boundary: entry `k` is the state at the start of
/// segment `k`; the last entry is the state at `tau`.
pub(crate) fn boundary_states(a0: Vec3, model: &QubitModel, protocol: &BangBangProtocol) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(protocol.levels.len() + 1);
    let mut a = a0;
    out.push(a);
    for (start, end, level) in protocol.segments() {
        a = rotate(a, rotation_axis(model, level), end - start);
        out.push(a);
    }
    out
}

/// Final Bloch vector without sampling or validation; the optimizer's
/// inner loop.
pub fn final_state(a0: Vec3, model: &QubitModel, protocol: &BangBangProtocol) -> Vec3 {
    let mut a = a0;
    for (start, end, level) in protocol.segments() {
        a = rotate(a, rotation_axis(model, level), end - start);
    }
    a
}

/// Propagates `a0` through `protocol`, sampling `samples_per_segment` points
/// per segment. Rejects protocols whose levels leave the model bounds.
pub fn evolve(
    a0: BlochState,
    model: &QubitModel,
    protocol: &BangBangProtocol,
    samples_per_segment: usize,
) -> Result<Trajectory> {
    model.validate()?;
    protocol.check_bounds(model.lambda_min, model.lambda_max)?;
    let starts = boundary_states(a0.0, model, protocol);
    let segments: Vec<(f64, f64, f64)> = protocol.segments().collect();
    let grid = sample_grid(protocol, samples_per_segment);
    let mut traj = Trajectory {
        times: Vec::with_capacity(grid.len()),
        states: Vec::with_capacity(grid.len()),
        energy: Vec::with_capacity(grid.len()),
        levels: Vec::with_capacity(grid.len()),
    };
    let last = grid.len() - 1;
    for (i, &(t, k)) in grid.iter().enumerate() {
        let (start, _, level) = segments[k];
        let a = if i == last {
            starts[starts.len() - 1]
        } else {
            rotate(starts[k], rotation_axis(model, level), t - start)
        };
        let state = BlochState(a);
        traj.times.push(t);
        traj.states.push(state);
        traj.energy.push(energy(&state, model.omega0));
        traj.levels.push(level);
    }
    Ok(traj)
}
