//! Reference solvers shared by the integration tests. Nothing here calls
//! into the crate: dense matrix exponentials and a plain RK4 stepper.

#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type Mat = Vec<Vec<C>>;

pub fn zeros(n: usize) -> Mat {
    vec![vec![C::new(0.0, 0.0); n]; n]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C::new(1.0, 0.0);
    }
    m
}

pub fn mul(a: &Mat, b: &Mat) -> Mat {
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

pub fn dagger(a: &Mat) -> Mat {
    let n = a.len();
    let mut out = zeros(n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = a[j][i].conj();
        }
    }
    out
}

/// `exp(-i H t)` by scaling and squaring a 24-term Taylor series.
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
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
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

pub fn apply(u: &Mat, psi: &[C]) -> Vec<C> {
    u.iter()
        .map(|row| row.iter().zip(psi).map(|(a, b)| a * b).sum())
        .collect()
}

/// Qubit Hamiltonian `omega0 (1 - sigma_z) / 2 + lambda x.sigma`.
pub fn qubit_hamiltonian(omega0: f64, x: [f64; 3], lambda: f64) -> Mat {
    let one = C::new(1.0, 0.0);
    let i = C::new(0.0, 1.0);
    vec![
        vec![one * (lambda * x[2]), one * (lambda * x[0]) - i * (lambda * x[1])],
        vec![one * (lambda * x[0]) + i * (lambda * x[1]), one * (omega0 - lambda * x[2])],
    ]
}

/// Evolves the Bloch vector `a` under a sequence of `(duration, H)` pieces.
pub fn bloch_via_matrices(a: [f64; 3], pieces: &[(f64, Mat)]) -> [f64; 3] {
    let one = C::new(1.0, 0.0);
    let i = C::new(0.0, 1.0);
    let mut rho: Mat = vec![
        vec![one * (0.5 * (1.0 + a[2])), (one * a[0] - i * a[1]) * 0.5],
        vec![(one * a[0] + i * a[1]) * 0.5, one * (0.5 * (1.0 - a[2]))],
    ];
    for (dt, h) in pieces {
        let u = expm_i(h, *dt);
        rho = mul(&mul(&u, &rho), &dagger(&u));
    }
    [2.0 * rho[1][0].re, 2.0 * rho[1][0].im, (rho[0][0] - rho[1][1]).re]
}

/// Classical RK4 with a fixed step; the last step is shortened to land on `t`.
pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], y0: [f64; N], t: f64, dt: f64) -> [f64; N] {
    let mut y = y0;
    let mut done = 0.0;
    while done < t {
        let h = dt.min(t - done);
        let k1 = f(&y);
        let k2 = f(&add(&y, &k1, 0.5 * h));
        let k3 = f(&add(&y, &k2, 0.5 * h));
        let k4 = f(&add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        done += h;
    }
    y
}

fn add<const N: usize>(y: &[f64; N], k: &[f64; N], h: f64) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += h * k[i];
    }
    out
}
