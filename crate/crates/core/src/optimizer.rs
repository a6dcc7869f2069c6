//! Search over bang-bang protocols.
//!
//! For a fixed horizon and switch budget every admissible level sequence over
//! the allowed set is enumerated, and the switch times of each sequence are
//! optimized by multi-start coordinate descent (scan plus golden section),
//! finished by a Levenberg-Marquardt polish that uses the exact derivative
//! of the final Bloch vector with respect to each switch time.
//!
//! Every sequence draws its restarts from its own seeded stream, so the
//! result for a sequence does not depend on which budget asked for it and a
//! larger budget can never do worse than a smaller one.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    energy, final_state, level_in_bounds, rotate, rotation_axis, BangBangProtocol, BlochState,
    QubitModel,
};
use crate::error::{Error, Result};
use crate::math::{abs, sqrt};
use crate::pmp::{singular_level, Objective};
use crate::vec3::Vec3;

const SCAN_POINTS: usize = 16;
const MAX_SWEEPS: usize = 60;
const GOLDEN_ITERS: usize = 80;
const LM_ITERS: usize = 200;
const NEWTON_ITERS: usize = 30;

/// Inputs of a fixed-horizon energy optimization.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizeSpec {
    pub model: QubitModel,
    pub a0: BlochState,
    pub tau: f64,
    pub max_switches: usize,
    pub level_set: Vec<f64>,
    pub restarts: usize,
    pub seed: u64,
    pub objective: Objective,
}

impl OptimizeSpec {
    /// Spec with the default level set, 32 restarts, seed 0, maximization.
    pub fn new(model: QubitModel, a0: BlochState, tau: f64, max_switches: usize) -> Self {
        OptimizeSpec {
            level_set: default_level_set(&model),
            model,
            a0,
            tau,
            max_switches,
            restarts: 32,
            seed: 0,
            objective: Objective::Maximize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.level_set.is_empty() {
            return Err(Error::Infeasible("empty level set"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Infeasible("tau must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::Infeasible("at least one restart is required"));
        }
        for (index, &level) in self.level_set.iter().enumerate() {
            if !level_in_bounds(level, self.model.lambda_min, self.model.lambda_max) {
                return Err(Error::LevelOutOfBounds {
                    index,
                    level,
                    min: self.model.lambda_min,
                    max: self.model.lambda_max,
                });
            }
        }
        Ok(())
    }
}

/// Bounds of the control interval plus the singular level when it is
/// inside, sorted and without duplicates.
pub fn default_level_set(model: &QubitModel) -> Vec<f64> {
    let mut set = alloc::vec![model.lambda_min, model.lambda_max];
    if let Some(s) = singular_level(model) {
        set.push(s);
    }
    normalize_level_set(set)
}

fn normalize_level_set(mut set: Vec<f64>) -> Vec<f64> {
    set.sort_by(f64::total_cmp);
    set.dedup();
    set
}

/// Best protocol found for one `(tau, budget)` pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StaircasePoint {
    pub tau: f64,
    pub n_budget: usize,
    pub best_energy: f64,
    pub best_protocol: BangBangProtocol,
}

/// Largest energy reachable by any unitary: `omega0 (1 + |a0|) / 2`.
pub fn unbounded_max_energy(a0: &BlochState, omega0: f64) -> f64 {
    0.5 * omega0 * (1.0 + a0.norm())
}

/// What the switch-time search minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Goal {
    /// Drive `a3` down to `-|a|` (the top of the energy orbit when `omega0 > 0`).
    Maximize,
    /// Drive `a3` up to `|a|`.
    Minimize,
    /// Squared distance of the final Bloch vector from a target.
    Target(Vec3),
}

impl Goal {
    /// Energy `omega0 (1 - a3) / 2` grows towards the south pole only when
    /// `omega0 >= 0`.
    fn from_objective(o: Objective, omega0: f64) -> Self {
        match (o, omega0 < 0.0) {
            (Objective::Maximize, false) | (Objective::Minimize, true) => Goal::Maximize,
            _ => Goal::Minimize,
        }
    }

    /// Nonnegative cost, monotone in the objective and free of cancellation
    /// near its zero.
    fn cost(self, a: Vec3) -> f64 {
        let r = a.norm();
        let perp = a.x * a.x + a.y * a.y;
        match self {
            Goal::Maximize => {
                if a.z <= 0.0 {
                    if r - a.z > 0.0 {
                        perp / (r - a.z)
                    } else {
                        0.0
                    }
                } else {
                    r + a.z
                }
            }
            Goal::Minimize => {
                if a.z >= 0.0 {
                    if r + a.z > 0.0 {
                        perp / (r + a.z)
                    } else {
                        0.0
                    }
                } else {
                    r - a.z
                }
            }
            Goal::Target(t) => (a - t).norm_squared(),
        }
    }

    /// Point whose squared distance to the final state is proportional to
    /// the cost.
    fn anchor(self, radius: f64) -> Vec3 {
        match self {
            Goal::Maximize => Vec3::new(0.0, 0.0, -radius),
            Goal::Minimize => Vec3::new(0.0, 0.0, radius),
            Goal::Target(t) => t,
        }
    }
}

/// Outcome of optimizing the switch times of one level sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub levels: Vec<f64>,
    pub switch_times: Vec<f64>,
    pub cost: f64,
}

struct LocalCost {
    entering: Vec3,
    lo: f64,
    hi: f64,
    /// Columns of the rotation after segment `i + 1`.
    after: [Vec3; 3],
    i: usize,
}

impl LocalCost {
    fn cost(&self, p: &Problem, x: f64) -> f64 {
        let a = rotate(self.entering, p.axes[self.i], x - self.lo);
        let a = rotate(a, p.axes[self.i + 1], self.hi - x);
        p.goal.cost(self.after[0] * a.x + self.after[1] * a.y + self.after[2] * a.z)
    }
}

struct Problem<'a> {
    a0: Vec3,
    tau: f64,
    axes: Vec<Vec3>,
    levels: &'a [f64],
    goal: Goal,
    radius: f64,
}

impl<'a> Problem<'a> {
    fn new(model: &QubitModel, a0: Vec3, tau: f64, levels: &'a [f64], goal: Goal) -> Self {
        Problem {
            a0,
            tau,
            axes: levels.iter().map(|&l| rotation_axis(model, l)).collect(),
            levels,
            goal,
            radius: a0.norm(),
        }
    }

    fn n_switches(&self) -> usize {
        self.levels.len() - 1
    }

    fn final_state(&self, t: &[f64]) -> Vec3 {
        let mut a = self.a0;
        let mut prev = 0.0;
        for (i, &n) in self.axes.iter().enumerate() {
            let end = if i < t.len() { t[i] } else { self.tau };
            a = rotate(a, n, end - prev);
            prev = end;
        }
        a
    }

    fn cost(&self, t: &[f64]) -> f64 {
        self.goal.cost(self.final_state(t))
    }

    /// Exact derivative of `a(tau)` with respect to each switch time.
    fn jacobian(&self, t: &[f64]) -> Vec<Vec3> {
        let k = t.len();
        let mut at_switch = Vec::with_capacity(k);
        let mut a = self.a0;
        let mut prev = 0.0;
        for i in 0..k {
            a = rotate(a, self.axes[i], t[i] - prev);
            at_switch.push(a);
            prev = t[i];
        }
        (0..k)
            .map(|i| {
                let mut d = (self.axes[i] - self.axes[i + 1]).cross(at_switch[i]);
                for j in (i + 1)..=k {
                    let start = t[j - 1];
                    let end = if j < k { t[j] } else { self.tau };
                    d = rotate(d, self.axes[j], end - start);
                }
                d
            })
            .collect()
    }

    fn line_search(&self, t: &mut [f64], i: usize, f: &mut f64) {
        let lo = if i == 0 { 0.0 } else { t[i - 1] };
        let hi = if i + 1 < t.len() { t[i + 1] } else { self.tau };
        if hi <= lo {
            return;
        }
        let original = t[i];
        let local = self.local(t, i);
        let cost_at = |x: f64| local.cost(self, x);
        let step = (hi - lo) / ((SCAN_POINTS - 1) as f64);
        let mut best_x = original;
        let mut best_f = *f;
        let mut best_j: Option<usize> = None;
        for j in 0..SCAN_POINTS {
            let x = if j + 1 == SCAN_POINTS { hi } else { lo + step * j as f64 };
            let fx = cost_at(x);
            if fx < best_f {
                best_f = fx;
                best_x = x;
                best_j = Some(j);
            }
        }
        let (mut a, mut b) = match best_j {
            Some(j) => (
                (lo + step * (j as f64 - 1.0)).max(lo),
                (lo + step * (j as f64 + 1.0)).min(hi),
            ),
            None => ((original - step).max(lo), (original + step).min(hi)),
        };
        const INV_PHI: f64 = 0.618_033_988_749_894_8;
        let tol = 1e-6 * self.tau.max(1.0);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = cost_at(c);
        let mut fd = cost_at(d);
        for _ in 0..GOLDEN_ITERS {
            if b - a <= tol {
                break;
            }
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = cost_at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = cost_at(d);
            }
        }
        if fc < best_f {
            best_f = fc;
            best_x = c;
        }
        if fd < best_f {
            best_x = d;
        }
        if best_x == original {
            return;
        }
        // Re-evaluated along the full path so every caller compares the
        // same arithmetic; a rounding-level gain that does not survive is
        // dropped.
        t[i] = best_x;
        let full = self.cost(t);
        if full < *f {
            *f = full;
        } else {
            t[i] = original;
        }
    }

    /// Pieces of the cost that do not depend on switch `i`: the state
    /// entering segment `i` and the rotation applied after segment `i + 1`.
    fn local(&self, t: &[f64], i: usize) -> LocalCost {
        let k = t.len();
        let mut a = self.a0;
        let mut prev = 0.0;
        for j in 0..i {
            a = rotate(a, self.axes[j], t[j] - prev);
            prev = t[j];
        }
        let hi = if i + 1 < k { t[i + 1] } else { self.tau };
        let columns = [Vec3::X, Vec3::Y, Vec3::Z].map(|mut e| {
            let mut from = hi;
            for j in (i + 2)..=k {
                let end = if j < k { t[j] } else { self.tau };
                e = rotate(e, self.axes[j], end - from);
                from = end;
            }
            e
        });
        LocalCost {
            entering: a,
            lo: prev,
            hi,
            after: columns,
            i,
        }
    }

    fn coordinate_descent(&self, t: &mut [f64]) -> f64 {
        let mut f = self.cost(t);
        for _ in 0..MAX_SWEEPS {
            let before = f;
            for i in 0..t.len() {
                self.line_search(t, i, &mut f);
            }
            if f == 0.0 || before - f <= 1e-6 * before {
                break;
            }
        }
        f
    }

    /// Levenberg-Marquardt on the residual `a(tau) - anchor`; steps are kept
    /// only when the exact cost decreases.
    fn polish(&self, t: &mut [f64], mut f: f64) -> f64 {
        let k = t.len();
        if k == 0 {
            return f;
        }
        let anchor = self.goal.anchor(self.radius);
        let mut mu = 1e-3;
        let mut trial = t.to_vec();
        for _ in 0..LM_ITERS {
            if f == 0.0 {
                break;
            }
            let r = self.final_state(t) - anchor;
            let jac = self.jacobian(t);
            let mut jtj = alloc::vec![0.0; k * k];
            let mut g = alloc::vec![0.0; k];
            for p in 0..k {
                g[p] = -jac[p].dot(r);
                for q in 0..k {
                    jtj[p * k + q] = jac[p].dot(jac[q]);
                }
            }
            let mut improved = false;
            while mu < 1e12 {
                let mut m = jtj.clone();
                for p in 0..k {
                    m[p * k + p] += mu * (jtj[p * k + p] + 1e-12);
                }
                let Some(delta) = solve(&mut m, &g, k) else {
                    mu *= 4.0;
                    continue;
                };
                for p in 0..k {
                    trial[p] = (t[p] + delta[p]).clamp(0.0, self.tau);
                }
                trial.sort_by(f64::total_cmp);
                let ft = self.cost(&trial);
                if ft < f {
                    t.copy_from_slice(&trial);
                    f = ft;
                    mu = (mu / 3.0).max(1e-12);
                    improved = true;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        f
    }
}

impl<'a> Problem<'a> {
    /// Exact gradient of the cost, written through `a3` for the energy goals
    /// so that it stays accurate where the cost itself is flat.
    fn gradient(&self, t: &[f64]) -> Vec<f64> {
        let jac = self.jacobian(t);
        match self.goal {
            Goal::Maximize => jac.iter().map(|d| d.z).collect(),
            Goal::Minimize => jac.iter().map(|d| -d.z).collect(),
            Goal::Target(target) => {
                let r = self.final_state(t) - target;
                jac.iter().map(|d| 2.0 * d.dot(r)).collect()
            }
        }
    }

    /// Newton iterations on the stationarity condition. Minimizing the cost
    /// only fixes interior switches to about the square root of machine
    /// precision; driving the gradient to zero pins them to full precision,
    /// which is what the switching-function checks resolve.
    fn refine(&self, t: &mut [f64], mut f: f64) -> f64 {
        let k = t.len();
        if k == 0 {
            return f;
        }
        let slack = 64.0 * f64::EPSILON * f.max(self.radius).max(1e-300);
        let mut g = self.gradient(t);
        let mut gnorm = g.iter().fold(0.0f64, |m, v| m.max(abs(*v)));
        for _ in 0..NEWTON_ITERS {
            if gnorm == 0.0 {
                break;
            }
            let mut gap = self.tau;
            for i in 0..=k {
                let lo = if i == 0 { 0.0 } else { t[i - 1] };
                let hi = if i == k { self.tau } else { t[i] };
                gap = gap.min(hi - lo);
            }
            let h = (1e-6 * self.tau.max(1.0)).min(0.25 * gap);
            if !(h > 0.0) {
                break;
            }
            let mut hess = alloc::vec![0.0; k * k];
            let mut probe = t.to_vec();
            for i in 0..k {
                probe[i] = t[i] + h;
                let gp = self.gradient(&probe);
                probe[i] = t[i] - h;
                let gm = self.gradient(&probe);
                probe[i] = t[i];
                for j in 0..k {
                    hess[j * k + i] = (gp[j] - gm[j]) / (2.0 * h);
                }
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    let m = 0.5 * (hess[i * k + j] + hess[j * k + i]);
                    hess[i * k + j] = m;
                    hess[j * k + i] = m;
                }
            }
            let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = solve(&mut hess, &rhs, k) else {
                break;
            };
            let trial: Vec<f64> = t.iter().zip(&delta).map(|(a, d)| a + d).collect();
            let ordered = trial.first().is_some_and(|&x| x > 0.0)
                && trial.last().is_some_and(|&x| x < self.tau)
                && trial.windows(2).all(|w| w[0] < w[1]);
            if !ordered {
                break;
            }
            let ft = self.cost(&trial);
            let gt = self.gradient(&trial);
            let gt_norm = gt.iter().fold(0.0f64, |m, v| m.max(abs(*v)));
            if !(gt_norm < gnorm) || ft > f + slack {
                break;
            }
            t.copy_from_slice(&trial);
            f = ft;
            g = gt;
            gnorm = gt_norm;
        }
        f
    }
}

/// Gaussian elimination with partial pivoting on a dense `k x k` system.
fn solve(m: &mut [f64], rhs: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut b = rhs.to_vec();
    for col in 0..k {
        let mut piv = col;
        for row in (col + 1)..k {
            if abs(m[row * k + col]) > abs(m[piv * k + col]) {
                piv = row;
            }
        }
        if !(abs(m[piv * k + col]) > 0.0) {
            return None;
        }
        if piv != col {
            for c in 0..k {
                m.swap(col * k + c, piv * k + c);
            }
            b.swap(col, piv);
        }
        for row in (col + 1)..k {
            let factor = m[row * k + col] / m[col * k + col];
            for c in col..k {
                m[row * k + c] -= factor * m[col * k + c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = alloc::vec![0.0; k];
    for row in (0..k).rev() {
        let mut s = b[row];
        for c in (row + 1)..k {
            s -= m[row * k + c] * x[c];
        }
        x[row] = s / m[row * k + row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream seed for a level sequence, keyed by the level values themselves.
fn sequence_seed(seed: u64, levels: &[f64]) -> u64 {
    let mut h = mix64(seed);
    h = mix64(h ^ levels.len() as u64);
    for &l in levels {
        h = mix64(h ^ l.to_bits());
    }
    h
}

/// Optimizes the switch times of one fixed level sequence. Restart 0 starts
/// from equally spaced switches; the others from sorted uniform draws of a
/// stream seeded by `(seed, sequence)`. `warm` adds extra starting points.
#[allow(clippy::too_many_arguments)]
pub fn optimize_sequence(
    model: &QubitModel,
    a0: Vec3,
    tau: f64,
    levels: &[f64],
    goal: Goal,
    restarts: usize,
    seed: u64,
    warm: &[Vec<f64>],
) -> SequenceResult {
    optimize_sequence_seeded(model, a0, tau, levels, goal, restarts, sequence_seed(seed, levels), warm)
}

#[allow(clippy::too_many_arguments)]
fn optimize_sequence_seeded(
    model: &QubitModel,
    a0: Vec3,
    tau: f64,
    levels: &[f64],
    goal: Goal,
    restarts: usize,
    stream_seed: u64,
    warm: &[Vec<f64>],
) -> SequenceResult {
    let problem = Problem::new(model, a0, tau, levels, goal);
    let k = problem.n_switches();
    if k == 0 {
        return SequenceResult {
            levels: levels.to_vec(),
            switch_times: Vec::new(),
            cost: problem.cost(&[]),
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |t: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        let mut t = t;
        let f = problem.coordinate_descent(&mut t);
        let f = problem.polish(&mut t, f);
        let better = match best {
            Some((bf, _)) => f < *bf,
            None => true,
        };
        if better {
            *best = Some((f, t));
        }
    };
    for r in 0..restarts.max(1) {
        let mut t: Vec<f64> = if r == 0 {
            (1..=k).map(|i| tau * i as f64 / (k + 1) as f64).collect()
        } else {
            (0..k).map(|_| tau * rng.gen::<f64>()).collect()
        };
        t.sort_by(f64::total_cmp);
        consider(t, &mut best);
    }
    for w in warm {
        if w.len() == k {
            let mut t: Vec<f64> = w.iter().map(|&x| x.clamp(0.0, tau)).collect();
            t.sort_by(f64::total_cmp);
            consider(t, &mut best);
        }
    }
    let (cost, mut switch_times) = best.expect("at least one restart");
    let cost = problem.refine(&mut switch_times, cost);
    let (reduced, mut t) = collapse(levels, &switch_times, tau, 1e-9 * tau.max(1.0));
    if reduced.len() == levels.len() {
        return SequenceResult {
            levels: levels.to_vec(),
            switch_times,
            cost,
        };
    }
    // A segment shrank to nothing: the survivors form a shorter sequence
    // whose switches can be refined again.
    let shorter = Problem::new(model, a0, tau, &reduced, goal);
    let start = shorter.cost(&t);
    let cost = shorter.refine(&mut t, start);
    SequenceResult {
        levels: reduced,
        switch_times: t,
        cost,
    }
}

/// Drops segments no longer than `min_len` and merges equal neighbours.
fn collapse(levels: &[f64], t: &[f64], tau: f64, min_len: f64) -> (Vec<f64>, Vec<f64>) {
    let mut out_levels: Vec<f64> = Vec::with_capacity(levels.len());
    let mut out_t: Vec<f64> = Vec::with_capacity(t.len());
    for (i, &level) in levels.iter().enumerate() {
        let start = if i == 0 { 0.0 } else { t[i - 1] };
        let end = if i < t.len() { t[i] } else { tau };
        if end - start <= min_len {
            continue;
        }
        match out_levels.last() {
            Some(&last) if last == level => {}
            Some(_) => {
                out_t.push(start);
                out_levels.push(level);
            }
            None => out_levels.push(level),
        }
    }
    if out_levels.is_empty() {
        out_levels.push(levels[0]);
    }
    (out_levels, out_t)
}

/// Level sequences of length `1..=max_switches + 1` over `level_set` with no
/// equal neighbours. Sequences of two or more segments whose first level
/// leaves `a0` invariant are dropped: that segment only delays the rest.
pub fn level_sequences(
    model: &QubitModel,
    a0: Vec3,
    level_set: &[f64],
    max_switches: usize,
) -> Vec<Vec<usize>> {
    let s = level_set.len();
    let fixes_start = |i: usize| {
        let n = rotation_axis(model, level_set[i]);
        n.cross(a0).norm() <= 1e-12 * n.norm() * a0.norm()
    };
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<usize>> = (0..s).map(|i| alloc::vec![i]).collect();
    for len in 1..=max_switches + 1 {
        for seq in &frontier {
            if len == 1 || !fixes_start(seq[0]) {
                out.push(seq.clone());
            }
        }
        if len == max_switches + 1 {
            break;
        }
        let mut next = Vec::new();
        for seq in &frontier {
            let last = *seq.last().expect("non-empty");
            for i in 0..s {
                if i != last {
                    let mut n = seq.clone();
                    n.push(i);
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    out
}

struct Search<'a> {
    model: &'a QubitModel,
    a0: Vec3,
    level_set: Vec<f64>,
    goal: Goal,
    restarts: usize,
    seed: u64,
}

impl<'a> Search<'a> {
    fn run_sequence(&self, tau: f64, seq: &[usize], warm: &[Vec<f64>]) -> SequenceResult {
        let levels: Vec<f64> = seq.iter().map(|&i| self.level_set[i]).collect();
        optimize_sequence_seeded(
            self.model,
            self.a0,
            tau,
            &levels,
            self.goal,
            self.restarts,
            sequence_seed(self.seed, &levels),
            warm,
        )
    }
}

fn point_from(
    model: &QubitModel,
    a0: Vec3,
    tau: f64,
    n_budget: usize,
    best: &SequenceResult,
) -> Result<StaircasePoint> {
    let protocol =
        BangBangProtocol::from_sorted_switches(tau, &best.switch_times, &best.levels, 0.0)?;
    let a = final_state(a0, model, &protocol);
    Ok(StaircasePoint {
        tau,
        n_budget,
        best_energy: energy(&BlochState::new(a)?, model.omega0),
        best_protocol: protocol,
    })
}

fn pick_best<'r>(results: impl Iterator<Item = &'r SequenceResult>) -> Option<&'r SequenceResult> {
    let mut best: Option<&SequenceResult> = None;
    for r in results {
        if best.is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    best
}

/// Best protocol for `spec` over all admissible level sequences.
pub fn optimize_energy(spec: &OptimizeSpec) -> Result<StaircasePoint> {
    spec.validate()?;
    let a0 = spec.a0.vector();
    let search = Search {
        model: &spec.model,
        a0,
        level_set: normalize_level_set(spec.level_set.clone()),
        goal: Goal::from_objective(spec.objective, spec.model.omega0),
        restarts: spec.restarts,
        seed: spec.seed,
    };
    let seqs = level_sequences(&spec.model, a0, &search.level_set, spec.max_switches);
    let results: Vec<SequenceResult> = seqs
        .iter()
        .map(|s| search.run_sequence(spec.tau, s, &[]))
        .collect();
    let best = pick_best(results.iter()).ok_or(Error::Infeasible("no level sequence"))?;
    point_from(&spec.model, a0, spec.tau, spec.max_switches, best)
}

/// Options for [`staircase_scan`] beyond the required arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub level_set: Option<Vec<f64>>,
    pub objective: Objective,
    /// Reuse each sequence's optimum at the previous grid point as an extra
    /// start.
    pub warm_start: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            level_set: None,
            objective: Objective::Maximize,
            warm_start: true,
        }
    }
}

/// One point per `(tau, budget)` pair, ordered by `tau` and then by the
/// order of `n_budgets`. Each level sequence is optimized once per `tau`
/// and shared by every budget that admits it.
pub fn staircase_scan(
    model: &QubitModel,
    a0: BlochState,
    tau_grid: &[f64],
    n_budgets: &[usize],
    restarts: usize,
    seed: u64,
) -> Result<Vec<StaircasePoint>> {
    staircase_scan_with(model, a0, tau_grid, n_budgets, restarts, seed, &ScanOptions::default())
}

pub fn staircase_scan_with(
    model: &QubitModel,
    a0: BlochState,
    tau_grid: &[f64],
    n_budgets: &[usize],
    restarts: usize,
    seed: u64,
    options: &ScanOptions,
) -> Result<Vec<StaircasePoint>> {
    model.validate()?;
    if tau_grid.is_empty() || n_budgets.is_empty() {
        return Err(Error::Infeasible("empty scan grid"));
    }
    let level_set = normalize_level_set(
        options
            .level_set
            .clone()
            .unwrap_or_else(|| default_level_set(model)),
    );
    if level_set.is_empty() {
        return Err(Error::Infeasible("empty level set"));
    }
    for (index, &level) in level_set.iter().enumerate() {
        if !model.contains(level) {
            return Err(Error::LevelOutOfBounds {
                index,
                level,
                min: model.lambda_min,
                max: model.lambda_max,
            });
        }
    }
    let a = a0.vector();
    let max_budget = *n_budgets.iter().max().expect("non-empty");
    let seqs = level_sequences(model, a, &level_set, max_budget);
    let search = Search {
        model,
        a0: a,
        level_set: level_set.clone(),
        goal: Goal::from_objective(options.objective, model.omega0),
        restarts: restarts.max(1),
        seed,
    };
    let mut previous: Vec<Option<Vec<f64>>> = alloc::vec![None; seqs.len()];
    let mut out = Vec::with_capacity(tau_grid.len() * n_budgets.len());
    for &tau in tau_grid {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::BadDuration { tau });
        }
        if tau == 0.0 {
            let protocol = BangBangProtocol::constant(0.0, level_set[0])?;
            for &n in n_budgets {
                out.push(StaircasePoint {
                    tau,
                    n_budget: n,
                    best_energy: energy(&a0, model.omega0),
                    best_protocol: protocol.clone(),
                });
            }
            continue;
        }
        let results: Vec<SequenceResult> = seqs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let warm: Vec<Vec<f64>> = if options.warm_start {
                    previous[i].iter().cloned().collect()
                } else {
                    Vec::new()
                };
                search.run_sequence(tau, s, &warm)
            })
            .collect();
        for (i, r) in results.iter().enumerate() {
            previous[i] = Some(r.switch_times.clone());
        }
        for &n in n_budgets {
            let best = pick_best(
                seqs.iter()
                    .zip(results.iter())
                    .filter(|(s, _)| s.len() <= n + 1)
                    .map(|(_, r)| r),
            )
            .ok_or(Error::Infeasible("no level sequence"))?;
            out.push(point_from(model, a, tau, n, best)?);
        }
    }
    Ok(out)
}

/// Shortest horizon found for reaching a target state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeToTarget {
    pub tau: f64,
    pub protocol: BangBangProtocol,
    /// `|a(tau) - a_target|` of the returned protocol.
    pub miss: f64,
}

/// Parameters of [`min_time_to_target`] beyond the states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetOptions {
    pub n_budget: usize,
    pub tol_state: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Give up above this horizon.
    pub tau_cap: f64,
    /// Bisection stops when the bracket is narrower than this.
    pub resolution: f64,
}

impl TargetOptions {
    pub fn new(n_budget: usize) -> Self {
        TargetOptions {
            n_budget,
            tol_state: 1e-4,
            restarts: 32,
            seed: 0,
            tau_cap: 1e3,
            resolution: 1e-4,
        }
    }
}

/// Smallest horizon at which some protocol within the budget brings `a0`
/// within `tol_state` of `a_target`: doubling until feasible, then
/// bisection. Returns `Unreachable` when the cap is hit.
pub fn min_time_to_target(
    model: &QubitModel,
    a0: BlochState,
    a_target: BlochState,
    options: &TargetOptions,
) -> Result<TimeToTarget> {
    model.validate()?;
    let (start, target) = (a0.vector(), a_target.vector());
    let (r0, rt) = (start.norm(), target.norm());
    if abs(r0 - rt) > 1e-9 {
        return Err(Error::NormMismatch {
            initial: r0,
            target: rt,
        });
    }
    let miss0 = sqrt((start - target).norm_squared());
    if miss0 <= options.tol_state {
        return Ok(TimeToTarget {
            tau: 0.0,
            protocol: BangBangProtocol::constant(0.0, model.lambda_min)?,
            miss: miss0,
        });
    }
    let level_set = default_level_set(model);
    let seqs = level_sequences(model, start, &level_set, options.n_budget);
    let search = Search {
        model,
        a0: start,
        level_set,
        goal: Goal::Target(target),
        restarts: options.restarts.max(1),
        seed: options.seed,
    };
    let attempt = |tau: f64| -> Result<(f64, BangBangProtocol)> {
        let results: Vec<SequenceResult> =
            seqs.iter().map(|s| search.run_sequence(tau, s, &[])).collect();
        let best = pick_best(results.iter()).ok_or(Error::Infeasible("no level sequence"))?;
        let p = BangBangProtocol::from_sorted_switches(tau, &best.switch_times, &best.levels, 0.0)?;
        let miss = sqrt((final_state(start, model, &p) - target).norm_squared());
        Ok((miss, p))
    };

    let scale = abs(model.omega0).max(abs(model.lambda_max)).max(abs(model.lambda_min));
    let mut lo = 0.0;
    let mut hi = if scale > 0.0 { 1.0 / scale } else { 1.0 };
    let mut found;
    loop {
        if hi > options.tau_cap {
            return Err(Error::Unreachable {
                cap: options.tau_cap,
            });
        }
        let (miss, p) = attempt(hi)?;
        if miss <= options.tol_state {
            found = (hi, p, miss);
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > options.resolution {
        let mid = 0.5 * (lo + hi);
        let (miss, p) = attempt(mid)?;
        if miss <= options.tol_state {
            hi = mid;
            found = (mid, p, miss);
        } else {
            lo = mid;
        }
    }
    let (tau, protocol, miss) = found;
    Ok(TimeToTarget {
        tau,
        protocol,
        miss,
    })
}
