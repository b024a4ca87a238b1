//! Exact Gibbs states by dense diagonalization.
//!
//! For a Hamiltonian H and inverse temperature beta, the thermal state is
//! `rho_beta = exp(-beta H) / Tr exp(-beta H)`. Diagonalizing H once yields the
//! state, its energy `E = Tr(rho H)`, the von Neumann entropy
//! `S = -Tr(rho ln rho)`, and the free energy `F = E - S / beta`. The
//! Boltzmann weights are computed relative to the ground energy so that no
//! intermediate exponential overflows at large beta.

use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::PauliSum;
use crate::C64;

/// Largest qubit count accepted for dense thermal references.
pub const MAX_DENSE_QUBITS: usize = 8;

/// Exact thermal data for one `(H, beta)` pair.
#[derive(Debug, Clone)]
pub struct ThermalReference {
    beta: f64,
    num_qubits: usize,
    eigenvalues: Vec<f64>,
    weights: Vec<f64>,
    rho: CMatrix,
    sqrt_rho: CMatrix,
    energy: f64,
    entropy: f64,
}

impl ThermalReference {
    /// Diagonalizes `h` and assembles the Gibbs state at inverse temperature
    /// `beta >= 0`. Limited to [`MAX_DENSE_QUBITS`].
    pub fn new(h: &PauliSum, beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid("beta must be finite and non-negative"));
        }
        if h.num_qubits() > MAX_DENSE_QUBITS {
            return Err(Error::capacity(alloc::format!(
                "exact thermal reference limited to {MAX_DENSE_QUBITS} qubits, got {}",
                h.num_qubits()
            )));
        }
        if !h.is_hermitian(1e-10) {
            return Err(Error::invalid("hamiltonian must be hermitian"));
        }
        let hm = h.to_matrix()?;
        let (eigenvalues, vectors) = hm.eigh()?;
        let e0 = eigenvalues[0];
        let mut weights: Vec<f64> = eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= z;
        }
        let energy: f64 = weights.iter().zip(&eigenvalues).map(|(w, e)| w * e).sum();
        let entropy: f64 = weights
            .iter()
            .map(|&w| if w > 0.0 { -w * w.ln() } else { 0.0 })
            .sum();
        let rho = basis_change(&vectors, &weights);
        let sqrt_weights: Vec<f64> = weights.iter().map(|&w| w.sqrt()).collect();
        let sqrt_rho = basis_change(&vectors, &sqrt_weights);
        Ok(ThermalReference {
            beta,
            num_qubits: h.num_qubits(),
            eigenvalues,
            weights,
            rho,
            sqrt_rho,
            energy,
            entropy,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Hamiltonian eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Boltzmann populations aligned with [`ThermalReference::eigenvalues`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// Equilibrium free energy `E - S / beta`; undefined at infinite
    /// temperature, where the entropy term diverges.
    pub fn free_energy(&self) -> Option<f64> {
        if self.beta > 0.0 {
            Some(self.energy - self.entropy / self.beta)
        } else {
            None
        }
    }

    /// Free energy of an arbitrary `(E, S)` pair at this beta.
    pub fn free_energy_of(&self, energy: f64, entropy: f64) -> Option<f64> {
        if self.beta > 0.0 {
            Some(energy - entropy / self.beta)
        } else {
            None
        }
    }

    /// Uhlmann fidelity `Tr sqrt(sqrt(rho_ref) rho sqrt(rho_ref))` between
    /// the reference and an arbitrary density matrix.
    pub fn fidelity_to(&self, rho: &CMatrix) -> Result<f64> {
        if rho.dim() != self.rho.dim() {
            return Err(Error::DimensionMismatch { expected: self.rho.dim(), got: rho.dim() });
        }
        let m = self.sqrt_rho.matmul(rho)?.matmul(&self.sqrt_rho)?;
        let eig = m.eigvalsh()?;
        // Tiny negative eigenvalues are roundoff; clamp before the root.
        Ok(eig.iter().map(|&e| e.max(0.0).sqrt()).sum())
    }
}

/// Builds `V diag(d) V^dagger`.
fn basis_change(vectors: &CMatrix, diag: &[f64]) -> CMatrix {
    CMatrix::from_fn(vectors.dim(), |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &d) in diag.iter().enumerate() {
            if d != 0.0 {
                acc += vectors.get(i, k) * d * vectors.get(j, k).conj();
            }
        }
        acc
    })
}
