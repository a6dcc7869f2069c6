//! Pontryagin machinery for the single-field qubit: backward costate,
//! switching function, sign-rule certification and singular-arc analysis.
//!
//! The costate is carried as a Bloch-like vector `b(t)` that obeys the same
//! rotation as the state. For the energy objective `b(tau) = (0, 0, -1)` and
//! the switching function is `G1 = omega0 x . (b x a)`. The minimum principle
//! then asks for `lambda_min` where `G1 > 0`, `lambda_max` where `G1 < 0`, and
//! allows other values only where `G1` vanishes identically.

use alloc::vec::Vec;

use crate::dynamics::{level_in_bounds, rotate, rotation_axis, BangBangProtocol, QubitModel};
use crate::math::{abs, ceil, sqrt};
use crate::vec3::Vec3;

/// Direction of the energy objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Objective {
    #[default]
    Maximize,
    Minimize,
}

impl Objective {
    pub fn sign(self) -> f64 {
        match self {
            Objective::Maximize => 1.0,
            Objective::Minimize => -1.0,
        }
    }
}

/// Costate `pi'(t) = scale (1 + b . sigma) / 2 + trace_part / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostateBloch {
    pub b: Vec3,
    pub scale: f64,
    pub trace_part: f64,
}

impl CostateBloch {
    /// Terminal costate of the energy problem.
    pub fn energy_terminal(omega0: f64) -> Self {
        CostateBloch {
            b: Vec3::new(0.0, 0.0, -1.0),
            scale: -omega0,
            trace_part: 0.0,
        }
    }
}

/// Costate vectors on the same grid that [`crate::evolve`] uses.
#[derive(Debug, Clone, PartialEq)]
pub struct CostateTrajectory {
    pub times: Vec<f64>,
    pub b: Vec<Vec3>,
    pub scale: f64,
}

/// State and costate of one protocol, evaluable at any time.
#[derive(Debug, Clone)]
pub struct Propagation<'a> {
    model: QubitModel,
    protocol: &'a BangBangProtocol,
    axes: Vec<Vec3>,
    bounds: Vec<(f64, f64)>,
    a_start: Vec<Vec3>,
    b_end: Vec<Vec3>,
}

impl<'a> Propagation<'a> {
    pub fn new(model: &QubitModel, a0: Vec3, protocol: &'a BangBangProtocol, b_tau: Vec3) -> Self {
        let bounds: Vec<(f64, f64)> = protocol.segments().map(|(s, e, _)| (s, e)).collect();
        let axes: Vec<Vec3> = protocol
            .levels()
            .iter()
            .map(|&l| rotation_axis(model, l))
            .collect();
        let mut a_start = Vec::with_capacity(axes.len());
        let mut a = a0;
        for (k, &(s, e)) in bounds.iter().enumerate() {
            a_start.push(a);
            a = rotate(a, axes[k], e - s);
        }
        let mut b_end = alloc::vec![Vec3::ZERO; axes.len()];
        let mut b = b_tau;
        for k in (0..axes.len()).rev() {
            b_end[k] = b;
            let (s, e) = bounds[k];
            b = rotate(b, axes[k], s - e);
        }
        Propagation {
            model: *model,
            protocol,
            axes,
            bounds,
            a_start,
            b_end,
        }
    }

    pub fn model(&self) -> &QubitModel {
        &self.model
    }

    pub fn protocol(&self) -> &BangBangProtocol {
        self.protocol
    }

    /// `(a(t), b(t), segment index)`.
    pub fn at(&self, t: f64) -> (Vec3, Vec3, usize) {
        let k = self.protocol.segment_index(t);
        self.at_segment(t, k)
    }

    /// Evaluates inside segment `k`; used where the segment is already known
    /// (e.g. at a switch time approached from the left).
    pub fn at_segment(&self, t: f64, k: usize) -> (Vec3, Vec3, usize) {
        let (s, e) = self.bounds[k];
        let n = self.axes[k];
        (rotate(self.a_start[k], n, t - s), rotate(self.b_end[k], n, t - e), k)
    }

    pub fn final_state(&self) -> Vec3 {
        let k = self.axes.len() - 1;
        let (s, e) = self.bounds[k];
        rotate(self.a_start[k], self.axes[k], e - s)
    }

    /// Unscaled switching function `x . (b x a)`.
    pub fn g_unit(&self, t: f64) -> f64 {
        let (a, b, _) = self.at(t);
        self.model.axis.dot(b.cross(a))
    }
}

/// Backward costate of the energy problem on the `evolve` grid.
pub fn costate_backward(
    model: &QubitModel,
    protocol: &BangBangProtocol,
    samples_per_segment: usize,
) -> CostateTrajectory {
    let terminal = CostateBloch::energy_terminal(model.omega0);
    let prop = Propagation::new(model, Vec3::Z, protocol, terminal.b);
    let grid = crate::dynamics::sample_grid(protocol, samples_per_segment);
    let last = grid.len() - 1;
    let mut times = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for (i, &(t, k)) in grid.iter().enumerate() {
        times.push(t);
        if i == last {
            b.push(terminal.b);
        } else {
            b.push(prop.at_segment(t, k).1);
        }
    }
    CostateTrajectory {
        times,
        b,
        scale: terminal.scale,
    }
}

/// `G1 = omega0 x . (b x a)`.
pub fn switching_function(a: Vec3, b: Vec3, model: &QubitModel) -> f64 {
    model.omega0 * model.axis.dot(b.cross(a))
}

/// Singular control level `omega0 x3 / 2` when it lies inside the bounds.
pub fn singular_level(model: &QubitModel) -> Option<f64> {
    let level = 0.5 * model.omega0 * model.axis.z;
    if level_in_bounds(level, model.lambda_min, model.lambda_max) {
        Some(level)
    } else {
        None
    }
}

/// Tolerances for the certification. Times are in the model's time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmpOptions {
    /// `|G| <= tol_zero` counts as zero.
    pub tol_zero: f64,
    /// Resolution of the zero-crossing bisection.
    pub tol_time: f64,
    /// Maximum distance between a switch and the matching zero of `G`.
    /// Sign-rule samples closer than this to a switch are not judged.
    pub tol_switch: f64,
    /// Minimum singular-arc length as a fraction of `tau`.
    pub min_arc_fraction: f64,
    pub samples_per_segment: usize,
    /// Upper bound on the sampling step.
    pub max_step: f64,
    pub objective: Objective,
}

impl PmpOptions {
    pub fn for_omega0(omega0: f64) -> Self {
        let w = abs(omega0).max(f64::MIN_POSITIVE);
        PmpOptions {
            tol_zero: 1e-8 * w,
            tol_time: 1e-6 / w,
            tol_switch: 1e-3 / w,
            min_arc_fraction: 1e-3,
            samples_per_segment: crate::dynamics::DEFAULT_SAMPLES_PER_SEGMENT,
            max_step: 0.02 / w,
            objective: Objective::Maximize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Consistent,
    Violated,
    SingularArcPresent,
}

/// A sample (or unmatched switch) that breaks the sign rule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub t: f64,
    pub lambda: f64,
    pub g1: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PmpReport {
    pub verdict: Verdict,
    pub violations: Vec<Violation>,
    pub zero_crossings: Vec<f64>,
    pub singular_intervals: Vec<(f64, f64)>,
}

impl PmpReport {
    /// No sign-rule violation (singular arcs allowed).
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Admissible levels for a sign rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelRule {
    pub min: f64,
    pub max: f64,
    /// Interior level allowed on singular arcs.
    pub singular: Option<f64>,
}

impl LevelRule {
    fn is_min(&self, level: f64) -> bool {
        close(level, self.min)
    }

    fn is_max(&self, level: f64) -> bool {
        close(level, self.max)
    }

    fn violates(&self, level: f64, g: f64, tol: f64) -> bool {
        let at_min = self.is_min(level);
        let at_max = self.is_max(level);
        if at_min && at_max {
            return false;
        }
        if at_min {
            return g < -tol;
        }
        if at_max {
            return g > tol;
        }
        match self.singular {
            Some(s) if close(level, s) => abs(g) > tol,
            _ => true,
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    abs(a - b) <= 1e-12 * (1.0f64).max(abs(a)).max(abs(b))
}

/// Sampling grid: at least `samples_per_segment` points per segment, step at
/// most `max_step`, segment starts and `tau` included.
fn check_grid(protocol: &BangBangProtocol, opts: &PmpOptions) -> Vec<(f64, usize)> {
    let mut grid = Vec::new();
    if protocol.tau() == 0.0 {
        grid.push((0.0, 0));
        return grid;
    }
    for (k, (start, end, _)) in protocol.segments().enumerate() {
        let width = end - start;
        let by_step = if opts.max_step > 0.0 {
            ceil(width / opts.max_step) as usize
        } else {
            0
        };
        let count = opts.samples_per_segment.max(1).max(by_step);
        for j in 0..count {
            grid.push((start + width * (j as f64) / (count as f64), k));
        }
    }
    grid.push((protocol.tau(), protocol.levels().len() - 1));
    grid
}

/// Generic certification of a piecewise-constant control against the sign
/// rule of a switching function `g` (already oriented so that `lambda_max`
/// is admissible where `g < 0`). Shared by the qubit and oscillator checks.
pub fn certify<F: Fn(f64) -> f64>(
    g: F,
    protocol: &BangBangProtocol,
    rule: &LevelRule,
    opts: &PmpOptions,
) -> PmpReport {
    let grid = check_grid(protocol, opts);
    let samples: Vec<(f64, f64, f64)> = grid
        .iter()
        .map(|&(t, k)| (t, protocol.levels()[k], g(t)))
        .collect();
    let tau = protocol.tau();
    let tol = opts.tol_zero;

    // Zero crossings, refined by bisection.
    let mut zero_crossings = Vec::new();
    for w in samples.windows(2) {
        let (t0, _, g0) = w[0];
        let (t1, _, g1) = w[1];
        if (g0 < 0.0 && g1 > 0.0) || (g0 > 0.0 && g1 < 0.0) {
            if abs(g0).max(abs(g1)) <= tol {
                continue;
            }
            zero_crossings.push(bisect(&g, t0, t1, g0, opts.tol_time));
        }
    }

    // Singular arcs: maximal runs with |g| <= tol of sufficient length.
    let min_arc = (opts.min_arc_fraction * tau).max(opts.tol_time);
    let mut singular_intervals = Vec::new();
    let mut run: Option<(f64, f64)> = None;
    for &(t, _, gv) in &samples {
        if abs(gv) <= tol {
            run = Some(match run {
                Some((s, _)) => (s, t),
                None => (t, t),
            });
        } else if let Some((s, e)) = run.take() {
            if e - s >= min_arc && tau > 0.0 {
                singular_intervals.push((s, e));
            }
        }
    }
    if let Some((s, e)) = run {
        if e - s >= min_arc && tau > 0.0 {
            singular_intervals.push((s, e));
        }
    }

    // Sign rule, away from the switches; contiguous offenders are merged
    // into one entry at their worst sample.
    let switches = protocol.switch_times();
    let mut violations = Vec::new();
    let mut current: Option<Violation> = None;
    for &(t, level, gv) in &samples {
        let near_switch = switches.iter().any(|&s| abs(t - s) <= opts.tol_switch);
        let bad = !near_switch && rule.violates(level, gv, tol);
        if bad {
            current = Some(match current {
                Some(v) if abs(v.g1) >= abs(gv) => v,
                _ => Violation { t, lambda: level, g1: gv },
            });
        } else if let Some(v) = current.take() {
            violations.push(v);
        }
    }
    if let Some(v) = current {
        violations.push(v);
    }

    // Each switch needs a nearby zero of g or must sit on a singular arc.
    for (i, &s) in switches.iter().enumerate() {
        let near_zero = zero_crossings.iter().any(|&z| abs(z - s) <= opts.tol_switch);
        let on_arc = singular_intervals
            .iter()
            .any(|&(a, b)| s >= a - opts.tol_switch && s <= b + opts.tol_switch);
        let gs = g(s);
        if !(near_zero || on_arc || abs(gs) <= tol) {
            violations.push(Violation {
                t: s,
                lambda: protocol.levels()[i + 1],
                g1: gs,
            });
        }
    }
    violations.sort_by(|a, b| a.t.total_cmp(&b.t));

    let verdict = if !violations.is_empty() {
        Verdict::Violated
    } else if !singular_intervals.is_empty() {
        Verdict::SingularArcPresent
    } else {
        Verdict::Consistent
    };
    PmpReport {
        verdict,
        violations,
        zero_crossings,
        singular_intervals,
    }
}

fn bisect<F: Fn(f64) -> f64>(g: &F, mut lo: f64, mut hi: f64, g_lo: f64, tol: f64) -> f64 {
    let lo_positive = g_lo > 0.0;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Certifies `protocol` started from `a0` for the energy objective.
pub fn pmp_check(
    model: &QubitModel,
    a0: Vec3,
    protocol: &BangBangProtocol,
    opts: &PmpOptions,
) -> PmpReport {
    pmp_check_scaled(model, a0, protocol, model.omega0 * opts.objective.sign(), opts)
}

/// Same as [`pmp_check`] for an objective `scale (1 - a3) / 2` with an
/// arbitrary weight. `opts.objective` is ignored; the sign of `scale` picks
/// the direction.
pub fn pmp_check_scaled(
    model: &QubitModel,
    a0: Vec3,
    protocol: &BangBangProtocol,
    scale: f64,
    opts: &PmpOptions,
) -> PmpReport {
    let prop = Propagation::new(model, a0, protocol, Vec3::new(0.0, 0.0, -1.0));
    let rule = LevelRule {
        min: model.lambda_min,
        max: model.lambda_max,
        singular: singular_level(model),
    };
    certify(|t| scale * prop.g_unit(t), protocol, &rule, opts)
}

/// Result of the time-optimal certification.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeOptimalReport {
    pub report: PmpReport,
    /// Unit costate direction at `tau` fitted to the switch times.
    pub b_tau: Vec3,
    /// Positive multiplier implied by the terminal normalization, if defined.
    pub implied_scale: Option<f64>,
    /// Largest `|x . (b x a)|` at the switch times for the fitted direction.
    pub switch_residual: f64,
}

/// Time-optimal variant: `G1 = x . (b x a)` with the terminal costate left
/// free. The direction of `b(tau)` orthogonal to `a(tau)` is fitted so that
/// `G1` vanishes at the switch times (least squares), its sign is fixed by
/// requiring a positive scale in the terminal condition, and the resulting
/// scale is reported rather than asserted.
pub fn pmp_check_time_optimal(
    model: &QubitModel,
    a0: Vec3,
    protocol: &BangBangProtocol,
    opts: &PmpOptions,
) -> TimeOptimalReport {
    let a_tau = crate::dynamics::final_state(a0, model, protocol);
    let n_tau = rotation_axis(model, *protocol.levels().last().expect("non-empty levels"));
    let (e1, e2) = orthonormal_complement(a_tau);

    // Constraint vectors: x . (b(t_k) x a(t_k)) = b(tau) . w_k, where w_k is
    // (a(t_k) x x) carried forward to tau.
    let probe = Propagation::new(model, a0, protocol, Vec3::ZERO);
    let mut m = [0.0f64; 3];
    for &s in protocol.switch_times() {
        let (a_s, _, k) = probe.at(s);
        let w = forward_to_tau(model, protocol, a_s.cross(model.axis), s, k);
        let (p, q) = (w.dot(e1), w.dot(e2));
        m[0] += p * p;
        m[1] += p * q;
        m[2] += q * q;
    }
    let drive = a_tau.cross(n_tau);
    let dir = if protocol.switch_times().is_empty() {
        drive.normalized().unwrap_or(e1)
    } else {
        let (u, v) = smallest_eigvec_2x2(m[0], m[1], m[2]);
        e1 * u + e2 * v
    };
    let denom = dir.dot(drive);
    let b_tau = if denom < 0.0 { -dir } else { dir };
    let implied_scale = if abs(denom) > 1e-12 {
        Some(2.0 / abs(denom))
    } else {
        None
    };

    let prop = Propagation::new(model, a0, protocol, b_tau);
    let switch_residual = protocol
        .switch_times()
        .iter()
        .map(|&s| abs(prop.g_unit(s)))
        .fold(0.0, f64::max);
    let rule = LevelRule {
        min: model.lambda_min,
        max: model.lambda_max,
        singular: singular_level(model),
    };
    let s = implied_scale.unwrap_or(1.0);
    let report = certify(|t| s * prop.g_unit(t), protocol, &rule, opts);
    TimeOptimalReport {
        report,
        b_tau,
        implied_scale,
        switch_residual,
    }
}

fn forward_to_tau(model: &QubitModel, protocol: &BangBangProtocol, v: Vec3, t: f64, k: usize) -> Vec3 {
    let mut out = v;
    for (j, (s, e, level)) in protocol.segments().enumerate().skip(k) {
        let from = if j == k { t } else { s };
        out = rotate(out, rotation_axis(model, level), e - from);
    }
    out
}

fn orthonormal_complement(a: Vec3) -> (Vec3, Vec3) {
    let u = a.normalized().unwrap_or(Vec3::Z);
    let helper = if abs(u.x) < 0.9 { Vec3::X } else { Vec3::Y };
    let e1 = helper.cross(u).normalized().expect("helper not parallel");
    let e2 = u.cross(e1);
    (e1, e2)
}

/// Unit eigenvector of `[[p, q], [q, r]]` for the smaller eigenvalue.
fn smallest_eigvec_2x2(p: f64, q: f64, r: f64) -> (f64, f64) {
    let half = 0.5 * (p - r);
    let mu = 0.5 * (p + r) - sqrt(half * half + q * q);
    let c1 = (q, mu - p);
    let c2 = (mu - r, q);
    let n1 = c1.0 * c1.0 + c1.1 * c1.1;
    let n2 = c2.0 * c2.0 + c2.1 * c2.1;
    let (u, v, n) = if n1 >= n2 { (c1.0, c1.1, n1) } else { (c2.0, c2.1, n2) };
    if n <= f64::MIN_POSITIVE {
        return if p <= r { (1.0, 0.0) } else { (0.0, 1.0) };
    }
    let n = sqrt(n);
    (u / n, v / n)
}

/// Which branch of the singular analysis an arc belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SingularClass {
    /// `x` orthogonal to `a x b` with the control held at `omega0 x3 / 2`.
    Condition1,
    /// `a` parallel to `b`; the terminal state is an energy extremum.
    Condition2(EnergyExtremum),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EnergyExtremum {
    EnergyMax,
    EnergyMin,
}

/// Classifies the arc `[t0, t1]` of the energy problem. `tol` bounds
/// `|a x b|` (parallel test) and `|x . (a x b)|` (orthogonality test).
pub fn singular_classify(
    model: &QubitModel,
    a0: Vec3,
    protocol: &BangBangProtocol,
    interval: (f64, f64),
    tol: f64,
) -> SingularClass {
    let prop = Propagation::new(model, a0, protocol, Vec3::new(0.0, 0.0, -1.0));
    let (t0, t1) = interval;
    let probes = 33;
    let mut parallel = true;
    let mut orthogonal = true;
    let mut singular_control = true;
    let level = 0.5 * model.omega0 * model.axis.z;
    for i in 0..probes {
        let t = t0 + (t1 - t0) * (i as f64) / ((probes - 1) as f64);
        let (a, b, k) = prop.at(t);
        let c = a.cross(b);
        if c.norm() > tol {
            parallel = false;
        }
        if abs(model.axis.dot(c)) > tol {
            orthogonal = false;
        }
        if !close(protocol.levels()[k], level) {
            singular_control = false;
        }
    }
    if parallel {
        let a_tau = prop.final_state();
        let r = a_tau.norm();
        if abs(a_tau.z + r) <= tol.max(1e-9) {
            return SingularClass::Condition2(EnergyExtremum::EnergyMax);
        }
        if abs(a_tau.z - r) <= tol.max(1e-9) {
            return SingularClass::Condition2(EnergyExtremum::EnergyMin);
        }
        return SingularClass::None;
    }
    if orthogonal && singular_control {
        return SingularClass::Condition1;
    }
    SingularClass::None
}
