//! Reference computations for the acceptance run. Nothing here calls into
//! `qcharge` or `qcharge-core`.

use num_complex::Complex64 as C;

pub type Mat = Vec<Vec<C>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

fn identity(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// `exp(-i H t)`: scaling and squaring around a 24-term Taylor series.
pub fn expm_i(h: &Mat, t: f64) -> Mat {
    let n = h.len();
    let norm: f64 = h.iter().flatten().map(|v| v.norm()).sum::<f64>() * t.abs();
    let mut squarings = 0;
    while norm / f64::powi(2.0, squarings) > 0.25 {
        squarings += 1;
    }
    let s = t / f64::powi(2.0, squarings);
    let a: Mat = h
        .iter()
        .map(|row| row.iter().map(|v| v * C::new(0.0, -s)).collect())
        .collect();
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..24 {
        term = mul(&term, &a);
        for v in term.iter_mut().flatten() {
            *v /= k as f64;
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mul(&sum, &sum);
    }
    sum
}

pub fn apply(m: &Mat, psi: &[C]) -> Vec<C> {
    m.iter()
        .map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum())
        .collect()
}

/// Piecewise-constant propagation; `segments` holds `(duration, level)`.
pub fn propagate(h_of: impl Fn(f64) -> Mat, psi0: Vec<C>, segments: &[(f64, f64)]) -> Vec<C> {
    let mut psi = psi0;
    for &(dt, level) in segments {
        psi = apply(&expm_i(&h_of(level), dt), &psi);
    }
    psi
}

/// Qubit with `H = w (1 - sigma_z) / 2 + lambda x . sigma` on `[|g>, |e>]`.
pub fn qubit_h(w: f64, x: [f64; 3], lambda: f64) -> Mat {
    let mut h = zeros(2);
    h[0][0] = C::new(lambda * x[2], 0.0);
    h[1][1] = C::new(w - lambda * x[2], 0.0);
    h[0][1] = C::new(lambda * x[0], -lambda * x[1]);
    h[1][0] = C::new(lambda * x[0], lambda * x[1]);
    h
}

/// Energy reached from the ground state.
pub fn qubit_energy(w: f64, x: [f64; 3], segments: &[(f64, f64)]) -> f64 {
    let psi0 = vec![C::new(1.0, 0.0), C::new(0.0, 0.0)];
    let psi = propagate(|l| qubit_h(w, x, l), psi0, segments);
    w * psi[1].norm_sqr()
}

/// Two qubits on `|ab>`, index `2a + b`, coupled by `sigma_x (x) sigma_x`.
pub fn two_qubit_h(wa: f64, wb: f64, lambda: f64) -> Mat {
    let mut h = zeros(4);
    for a in 0..2 {
        for b in 0..2 {
            let i = 2 * a + b;
            h[i][i] = C::new(wa * a as f64 + wb * b as f64, 0.0);
            h[i][2 * (1 - a) + (1 - b)] = C::new(lambda, 0.0);
        }
    }
    h
}

/// Oscillator truncated to `dim` levels times a qubit, index `2k + b`,
/// coupling `a^dag sigma_- + a sigma_+`.
pub fn osc_qubit_h(wa: f64, wb: f64, lambda: f64, dim: usize) -> Mat {
    let mut h = zeros(2 * dim);
    for k in 0..dim {
        for b in 0..2 {
            h[2 * k + b][2 * k + b] = C::new(wa * k as f64 + wb * b as f64, 0.0);
        }
        if k + 1 < dim {
            let (i, j) = (2 * k + 1, 2 * (k + 1));
            let v = C::new(lambda * ((k + 1) as f64).sqrt(), 0.0);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], t: f64, h_max: f64) -> [f64; N] {
    if t == 0.0 {
        return y0;
    }
    let steps = (t.abs() / h_max).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut y = y0;
    let shift = |y: &[f64; N], k: &[f64; N], s: f64| {
        let mut out = *y;
        for i in 0..N {
            out[i] += s * k[i];
        }
        out
    };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&shift(&y, &k1, 0.5 * h));
        let k3 = f(&shift(&y, &k2, 0.5 * h));
        let k4 = f(&shift(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Oscillator moments `(<a^dag a>, Im <a>, Re <a>)` under
/// `H = w a^dag a + lambda (a + a^dag)`.
pub fn moments_rhs(lambda: f64, w: f64) -> impl Fn(&[f64; 3]) -> [f64; 3] {
    move |v| [-2.0 * lambda * v[1], -w * v[2] - lambda, w * v[1]]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
