//! Qubit charged by two orthogonal fields `lambda1 sigma_x + lambda2 sigma_y`
//! under the joint bound `lambda1^2 + lambda2^2 <= r_max^2`.
//!
//! In the frame co-rotating with `H0` the optimal control is a constant
//! vector `r_max k` with `k = z x a0 / |z x a0|`: the Bloch vector turns
//! about `k` at the largest admissible rate `2 r_max` until it points down,
//! after which the drive is switched off. In the lab frame this is the field
//! phase `theta(t) = -omega0 t + theta0`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{energy, rotate, BlochState, Trajectory};
use crate::error::{Error, Result};
use crate::math::{abs, acos, atan2, cos, sin, sin_cos, sqrt};
use crate::pmp::{PmpReport, Verdict, Violation};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoFieldModel {
    pub omega0: f64,
    pub r_max: f64,
}

impl TwoFieldModel {
    pub fn new(omega0: f64, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::Parameter {
                name: "r_max",
                reason: "must be positive and finite",
            });
        }
        if !omega0.is_finite() {
            return Err(Error::Parameter {
                name: "omega0",
                reason: "must be finite",
            });
        }
        Ok(TwoFieldModel { omega0, r_max })
    }
}

/// Optimal control in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotatingFrameControl {
    /// Initial field phase, the azimuth of `k`.
    pub theta0: f64,
    pub k_hat: Vec3,
    /// `min(tau, tau1)`.
    pub drive_duration: f64,
    pub tau: f64,
    /// Polar angle of `a0`.
    pub alpha0: f64,
    /// Time needed to invert the state, `(pi - alpha0) / (2 r_max)`.
    pub tau1: f64,
}

/// `z x a0 / |z x a0|`, or `(1, 0, 0)` when `a0` is along `z` (or zero).
pub fn rotation_direction(a0: Vec3) -> Vec3 {
    Vec3::Z.cross(a0).normalized().unwrap_or(Vec3::X)
}

fn polar_angle(a0: Vec3) -> f64 {
    let r = a0.norm();
    if r == 0.0 {
        return 0.0;
    }
    acos((a0.z / r).clamp(-1.0, 1.0))
}

pub fn optimal_control_m2(
    model: &TwoFieldModel,
    a0: &BlochState,
    tau: f64,
) -> Result<RotatingFrameControl> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::BadDuration { tau });
    }
    let a = a0.vector();
    let k_hat = rotation_direction(a);
    let alpha0 = polar_angle(a);
    let tau1 = (PI - alpha0) / (2.0 * model.r_max);
    Ok(RotatingFrameControl {
        theta0: atan2(k_hat.y, k_hat.x),
        k_hat,
        drive_duration: tau.min(tau1),
        tau,
        alpha0,
        tau1,
    })
}

/// Closed-form optimal energy; constant at `omega0 (1 + |a0|) / 2` from
/// `tau1` on, and `omega0 / 2` for the fully mixed state.
pub fn energy_m2(model: &TwoFieldModel, a0: &BlochState, tau: f64) -> f64 {
    let r = a0.norm();
    if r == 0.0 {
        return 0.5 * model.omega0;
    }
    let alpha0 = polar_angle(a0.vector());
    let tau1 = (PI - alpha0) / (2.0 * model.r_max);
    if tau >= tau1 {
        0.5 * model.omega0 * (1.0 + r)
    } else {
        0.5 * model.omega0 * (1.0 - r * cos(2.0 * model.r_max * tau + alpha0))
    }
}

/// Rotating-frame state under the optimal control at time `t`.
pub fn rotating_frame_state(
    model: &TwoFieldModel,
    a0: &BlochState,
    control: &RotatingFrameControl,
    t: f64,
) -> Vec3 {
    let a = a0.vector();
    let s = t.min(control.drive_duration);
    let angle = 2.0 * model.r_max * s;
    a * cos(angle) + control.k_hat.cross(a) * sin(angle)
}

/// Lab-frame field `(lambda1, lambda2)` at time `t`.
pub fn lab_control(model: &TwoFieldModel, control: &RotatingFrameControl, t: f64) -> (f64, f64) {
    if t >= control.drive_duration {
        return (0.0, 0.0);
    }
    let theta = -model.omega0 * t + control.theta0;
    (model.r_max * cos(theta), model.r_max * sin(theta))
}

fn lab_axis(model: &TwoFieldModel, l1: f64, l2: f64) -> Vec3 {
    Vec3::new(2.0 * l1, 2.0 * l2, -model.omega0)
}

/// Undoes the free precession: `R_z(omega0 t) a`.
pub fn to_rotating_frame(omega0: f64, t: f64, a: Vec3) -> Vec3 {
    let (s, c) = sin_cos(omega0 * t);
    Vec3::new(c * a.x - s * a.y, s * a.x + c * a.y, a.z)
}

/// Lab-frame simulation with the field held constant over each step at its
/// midpoint value (steps are split at the end of the drive). The returned
/// states are expressed in the rotating frame; `levels` holds the field
/// amplitude.
pub fn simulate_m2(
    model: &TwoFieldModel,
    a0: &BlochState,
    control: &RotatingFrameControl,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Parameter {
            name: "dt",
            reason: "must be positive",
        });
    }
    let tau = control.tau;
    let steps = crate::math::ceil(tau / dt) as usize;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
        levels: Vec::with_capacity(steps + 1),
    };
    let mut a = a0.vector();
    let push = |t: f64, a: Vec3, amp: f64, traj: &mut Trajectory| {
        let state = BlochState::from_rotation(to_rotating_frame(model.omega0, t, a));
        traj.times.push(t);
        traj.states.push(state);
        traj.energy.push(energy(&state, model.omega0));
        traj.levels.push(amp);
    };
    let amp_at = |t: f64| if t < control.drive_duration { model.r_max } else { 0.0 };
    push(0.0, a, amp_at(0.0), &mut traj);
    for j in 0..steps {
        let t0 = tau * (j as f64) / (steps as f64);
        let t1 = tau * ((j + 1) as f64) / (steps as f64);
        let d = control.drive_duration;
        let pieces: [(f64, f64); 2] = if t0 < d && d < t1 { [(t0, d), (d, t1)] } else { [(t0, t1), (t1, t1)] };
        for (s, e) in pieces {
            if e <= s {
                continue;
            }
            let (l1, l2) = lab_control(model, control, 0.5 * (s + e));
            a = rotate(a, lab_axis(model, l1, l2), e - s);
        }
        push(t1, a, amp_at(t1), &mut traj);
    }
    Ok(traj)
}

/// Outcome of the minimum-principle check of the two-field protocol.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct M2Verification {
    pub report: PmpReport,
    /// `b x a` at the start of the run.
    pub cross_product: Vec3,
    /// Largest deviation of `b x a` from its initial value during the drive.
    pub max_cross_drift: f64,
    /// Angle between `b x a` and `-k` (radians), when `b x a` is nonzero.
    pub antiparallel_angle: Option<f64>,
    /// Smallest `lambda . (b x a) - lambda* . (b x a)` over the competitors.
    pub min_slack: f64,
    pub competitors: usize,
}

/// Tolerances and sample counts for [`verify_pmp_m2`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M2CheckOptions {
    pub samples: usize,
    pub competitors: usize,
    pub seed: u64,
    pub tol_cross: f64,
    pub tol_angle: f64,
    pub tol_slack: f64,
}

impl Default for M2CheckOptions {
    fn default() -> Self {
        M2CheckOptions {
            samples: 1000,
            competitors: 1000,
            seed: 0,
            tol_cross: 1e-9,
            tol_angle: 1e-6,
            tol_slack: 1e-10,
        }
    }
}

/// Rotating-frame costate, `b(tau) = (0, 0, -1)` carried back along the
/// same rotation as the state.
fn rotating_costate(model: &TwoFieldModel, control: &RotatingFrameControl, t: f64) -> Vec3 {
    let terminal = Vec3::new(0.0, 0.0, -1.0);
    let d = control.drive_duration;
    if t >= d {
        return terminal;
    }
    rotate(terminal, control.k_hat * (2.0 * model.r_max), t - d)
}

/// Checks that `b x a` is constant and anti-parallel to `k` during the
/// drive, that `r_max k` minimizes `lambda . (b x a)` over random
/// competitors on the disk, and reports the whole run as singular when
/// `b x a` vanishes (inverted state reached).
pub fn verify_pmp_m2(
    model: &TwoFieldModel,
    a0: &BlochState,
    control: &RotatingFrameControl,
    opts: &M2CheckOptions,
) -> M2Verification {
    let d = control.drive_duration;
    let tau = control.tau;
    let cross_at = |t: f64| rotating_costate(model, control, t).cross(rotating_frame_state(model, a0, control, t));
    let c0 = cross_at(0.0);
    let samples = opts.samples.max(2);
    let mut max_drift: f64 = 0.0;
    let mut max_norm: f64 = 0.0;
    for i in 0..samples {
        let t = tau * (i as f64) / ((samples - 1) as f64);
        let c = cross_at(t);
        max_norm = max_norm.max(c.norm());
        if t <= d {
            max_drift = max_drift.max((c - c0).norm());
        }
    }
    let antiparallel_angle = if c0.norm() > opts.tol_cross {
        let u = c0 * (1.0 / c0.norm());
        let minus_k = -control.k_hat;
        Some(atan2(u.cross(minus_k).norm(), u.dot(minus_k)))
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut min_slack = f64::INFINITY;
    let mut violations = Vec::new();
    let star = control.k_hat * model.r_max;
    if d > 0.0 {
        for _ in 0..opts.competitors {
            let t = d * rng.gen::<f64>();
            let rho = model.r_max * sqrt(rng.gen::<f64>());
            let phi = 2.0 * PI * rng.gen::<f64>();
            let lambda = Vec3::new(rho * cos(phi), rho * sin(phi), 0.0);
            let c = cross_at(t);
            let slack = lambda.dot(c) - star.dot(c);
            min_slack = min_slack.min(slack);
            if slack < -opts.tol_slack {
                violations.push(Violation {
                    t,
                    lambda: rho,
                    g1: slack,
                });
            }
        }
    }
    if !min_slack.is_finite() {
        min_slack = 0.0;
    }
    if max_drift > opts.tol_cross {
        violations.push(Violation {
            t: 0.0,
            lambda: model.r_max,
            g1: max_drift,
        });
    }
    if let Some(angle) = antiparallel_angle {
        if angle > opts.tol_angle {
            violations.push(Violation {
                t: 0.0,
                lambda: model.r_max,
                g1: angle,
            });
        }
    }
    let singular_intervals = if max_norm <= opts.tol_cross && tau > 0.0 {
        alloc::vec![(0.0, tau)]
    } else {
        Vec::new()
    };
    let verdict = if !violations.is_empty() {
        Verdict::Violated
    } else if !singular_intervals.is_empty() {
        Verdict::SingularArcPresent
    } else {
        Verdict::Consistent
    };
    M2Verification {
        report: PmpReport {
            verdict,
            violations,
            zero_crossings: Vec::new(),
            singular_intervals,
        },
        cross_product: c0,
        max_cross_drift: max_drift,
        antiparallel_angle,
        min_slack,
        competitors: if d > 0.0 { opts.competitors } else { 0 },
    }
}

/// `|a0| sin(2 r_max tau + alpha0)`, the magnitude of `b x a` during the
/// drive for `tau < tau1`.
pub fn cross_magnitude(model: &TwoFieldModel, a0: &BlochState, tau: f64) -> f64 {
    let alpha0 = polar_angle(a0.vector());
    abs(a0.norm() * sin(2.0 * model.r_max * tau + alpha0))
}
