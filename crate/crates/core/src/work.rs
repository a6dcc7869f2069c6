//! Work content of a state from its spectrum and the Hamiltonian spectrum:
//! ergotropy, anti-ergotropy, total ergotropy and non-equilibrium free
//! energy.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, exp, ln};

/// Populations `eta_i` and energies `epsilon_i` of equal length.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectralPair {
    rho_eigs: Vec<f64>,
    h_eigs: Vec<f64>,
}

impl SpectralPair {
    pub fn new(rho_eigs: Vec<f64>, h_eigs: Vec<f64>) -> Result<Self> {
        if rho_eigs.len() != h_eigs.len() || rho_eigs.is_empty() {
            return Err(Error::SpectrumLength {
                rho: rho_eigs.len(),
                h: h_eigs.len(),
            });
        }
        let sum: f64 = rho_eigs.iter().sum();
        if abs(sum - 1.0) > 1e-12 || rho_eigs.iter().any(|&p| !(p >= -1e-14)) {
            return Err(Error::NotProbability { sum });
        }
        if h_eigs.iter().any(|e| !e.is_finite()) {
            return Err(Error::Parameter {
                name: "h_eigs",
                reason: "energies must be finite",
            });
        }
        Ok(SpectralPair { rho_eigs, h_eigs })
    }

    pub fn rho_eigs(&self) -> &[f64] {
        &self.rho_eigs
    }

    pub fn h_eigs(&self) -> &[f64] {
        &self.h_eigs
    }

    pub fn dimension(&self) -> usize {
        self.rho_eigs.len()
    }

    fn sorted_energies(&self) -> Vec<f64> {
        let mut e = self.h_eigs.clone();
        e.sort_by(f64::total_cmp);
        e
    }

    fn sorted_populations(&self) -> Vec<f64> {
        let mut p = self.rho_eigs.clone();
        p.sort_by(f64::total_cmp);
        p
    }

    /// Energy of the passive state: decreasing populations on increasing
    /// energies.
    pub fn passive_energy(&self) -> f64 {
        let e = self.sorted_energies();
        let p = self.sorted_populations();
        p.iter().rev().zip(e.iter()).map(|(p, e)| p * e).sum()
    }

    /// Largest energy on the unitary orbit: increasing populations on
    /// increasing energies.
    pub fn max_unitary_energy(&self) -> f64 {
        let e = self.sorted_energies();
        let p = self.sorted_populations();
        p.iter().zip(e.iter()).map(|(p, e)| p * e).sum()
    }

    /// Von Neumann entropy (natural log, `0 ln 0 = 0`).
    pub fn entropy(&self) -> f64 {
        entropy(&self.rho_eigs)
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * ln(x)).sum::<f64>()
}

/// `mean - sum eta_down epsilon_up`.
pub fn ergotropy(sp: &SpectralPair, mean_energy: f64) -> f64 {
    mean_energy - sp.passive_energy()
}

/// `mean - sum eta_up epsilon_up`.
pub fn anti_ergotropy(sp: &SpectralPair, mean_energy: f64) -> f64 {
    mean_energy - sp.max_unitary_energy()
}

/// Total ergotropy with the inverse temperature of the entropy-matched
/// Gibbs state (`f64::INFINITY` when only the ground level is populated in
/// the limit).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TotalErgotropy {
    pub value: f64,
    pub beta: f64,
}

struct Gibbs<'a> {
    energies: &'a [f64],
    e_min: f64,
}

impl<'a> Gibbs<'a> {
    /// `(entropy, mean energy)` at inverse temperature `beta >= 0`.
    fn at(&self, beta: f64) -> (f64, f64) {
        let w: Vec<f64> = self
            .energies
            .iter()
            .map(|&e| exp(-beta * (e - self.e_min)))
            .collect();
        let z: f64 = w.iter().sum();
        let mut s = 0.0;
        let mut u = 0.0;
        for (wi, &e) in w.iter().zip(self.energies) {
            let p = wi / z;
            if p > 0.0 {
                s -= p * ln(p);
            }
            u += p * e;
        }
        (s, u)
    }
}

/// `mean - U(beta)` where the Gibbs state at `beta >= 0` has the entropy of
/// the input state; `tol` bounds the entropy mismatch.
pub fn total_ergotropy(sp: &SpectralPair, mean_energy: f64, tol: f64) -> Result<TotalErgotropy> {
    let energies = sp.sorted_energies();
    let e_min = energies[0];
    let e_max = energies[energies.len() - 1];
    let target = sp.entropy();
    if e_max == e_min {
        return Ok(TotalErgotropy {
            value: mean_energy - e_min,
            beta: 0.0,
        });
    }
    let ground_degeneracy = energies.iter().filter(|&&e| e == e_min).count() as f64;
    if target <= ln(ground_degeneracy) + tol {
        return Ok(TotalErgotropy {
            value: mean_energy - e_min,
            beta: f64::INFINITY,
        });
    }
    let gibbs = Gibbs {
        energies: &energies,
        e_min,
    };
    let mut lo = 0.0;
    let mut hi = 1.0 / (e_max - e_min);
    let mut grow = 0;
    while gibbs.at(hi).0 > target {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Infeasible("entropy bracket not found"));
        }
    }
    // Bisect down to the last bit: an entropy match within `tol` alone can
    // leave an energy error of `tol / beta` at high temperature.
    let mut beta = 0.5 * (lo + hi);
    for _ in 0..2000 {
        beta = 0.5 * (lo + hi);
        if beta <= lo || beta >= hi {
            break;
        }
        let (s, _) = gibbs.at(beta);
        if s > target {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    let (s, u) = gibbs.at(beta);
    if abs(s - target) > tol {
        return Err(Error::Infeasible("entropy match above tolerance"));
    }
    Ok(TotalErgotropy {
        value: mean_energy - u,
        beta,
    })
}

/// `mean - S / beta_bar`.
pub fn free_energy_gap(sp: &SpectralPair, mean_energy: f64, beta_bar: f64) -> Result<f64> {
    if !(beta_bar > 0.0) {
        return Err(Error::Parameter {
            name: "beta_bar",
            reason: "must be positive",
        });
    }
    Ok(mean_energy - sp.entropy() / beta_bar)
}

/// Mean energy of a state diagonal in the energy basis.
pub fn diagonal_mean_energy(sp: &SpectralPair) -> f64 {
    sp.rho_eigs.iter().zip(sp.h_eigs.iter()).map(|(p, e)| p * e).sum()
}
