//! Sampling and encoding of SYK Hamiltonians.
//!
//! The model couples N Majorana fermions in quartets:
//!
//! ```text
//! H = i^2 * prefactor * sum_{i1<i2<i3<i4} J_{i1 i2 i3 i4} chi_i1 chi_i2 chi_i3 chi_i4
//! ```
//!
//! with couplings drawn i.i.d. from a normal distribution of mean zero and
//! variance `3! / N^3` (in units of the overall coupling strength J = 1).
//! Majoranas map to qubit operators through the Jordan-Wigner encoding
//!
//! ```text
//! chi_{2k-1} = (Z_0 ... Z_{k-2}) X_{k-1} / sqrt(2)
//! chi_{2k}   = (Z_0 ... Z_{k-2}) Y_{k-1} / sqrt(2)
//! ```
//!
//! normalized so that {chi_i, chi_j} = delta_ij. N Majoranas therefore use
//! n = N/2 qubits, and each quartet contributes a single Pauli string of
//! coefficient magnitude |J| / 4.

use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::pauli::{Pauli, PauliString, PauliSum};
use crate::rng::{streams, Rng};
use crate::C64;

/// One quartic coupling: ascending 1-based Majorana indices and a strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub indices: [usize; 4],
    pub value: f64,
}

/// A concrete disorder realization of the SYK model.
#[derive(Debug, Clone, PartialEq)]
pub struct SykInstance {
    majorana_count: usize,
    seed: u64,
    prefactor: f64,
    couplings: Vec<Coupling>,
}

impl SykInstance {
    /// Samples all `C(N, 4)` couplings for `N` Majoranas.
    ///
    /// Quartets are visited in ascending lexicographic order, one normal
    /// draw each, so an instance is reproducible from `(N, seed)` alone.
    pub fn generate(majorana_count: usize, seed: u64) -> Result<Self> {
        Self::generate_with_prefactor(majorana_count, seed, 1.0)
    }

    /// Like [`SykInstance::generate`] with an explicit overall prefactor on
    /// the ordered-sum Hamiltonian.
    pub fn generate_with_prefactor(
        majorana_count: usize,
        seed: u64,
        prefactor: f64,
    ) -> Result<Self> {
        check_majorana_count(majorana_count)?;
        let n = majorana_count as f64;
        let sigma = (6.0 / (n * n * n)).sqrt();
        let mut rng = Rng::stream(seed, streams::COUPLINGS);
        let mut couplings = Vec::new();
        for i1 in 1..=majorana_count {
            for i2 in i1 + 1..=majorana_count {
                for i3 in i2 + 1..=majorana_count {
                    for i4 in i3 + 1..=majorana_count {
                        couplings.push(Coupling {
                            indices: [i1, i2, i3, i4],
                            value: sigma * rng.next_gaussian(),
                        });
                    }
                }
            }
        }
        Ok(SykInstance { majorana_count, seed, prefactor, couplings })
    }

    /// Rebuilds an instance from explicit couplings, e.g. a parsed file.
    ///
    /// The couplings must cover every ascending quartet exactly once, in
    /// lexicographic order.
    pub fn from_parts(
        majorana_count: usize,
        seed: u64,
        prefactor: f64,
        couplings: Vec<Coupling>,
    ) -> Result<Self> {
        check_majorana_count(majorana_count)?;
        let expected = binomial_4(majorana_count);
        if couplings.len() != expected {
            return Err(Error::invalid(alloc::format!(
                "expected {expected} couplings for N = {majorana_count}, got {}",
                couplings.len()
            )));
        }
        let mut k = 0usize;
        for i1 in 1..=majorana_count {
            for i2 in i1 + 1..=majorana_count {
                for i3 in i2 + 1..=majorana_count {
                    for i4 in i3 + 1..=majorana_count {
                        if couplings[k].indices != [i1, i2, i3, i4] {
                            return Err(Error::invalid(alloc::format!(
                                "coupling {k} has indices {:?}, expected [{i1}, {i2}, {i3}, {i4}]",
                                couplings[k].indices
                            )));
                        }
                        k += 1;
                    }
                }
            }
        }
        Ok(SykInstance { majorana_count, seed, prefactor, couplings })
    }

    pub fn majorana_count(&self) -> usize {
        self.majorana_count
    }

    /// Qubits used by the Jordan-Wigner encoding: N / 2.
    pub fn num_qubits(&self) -> usize {
        self.majorana_count / 2
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Population variance of the coupling distribution, `6 / N^3`.
    pub fn coupling_variance(&self) -> f64 {
        let n = self.majorana_count as f64;
        6.0 / (n * n * n)
    }

    /// The encoded Hamiltonian as a canonical Pauli sum.
    pub fn hamiltonian(&self) -> Result<PauliSum> {
        let n = self.num_qubits();
        let mut terms = Vec::with_capacity(self.couplings.len());
        // i^{q/2} = i^2 = -1 multiplies the ordered sum.
        let front = -self.prefactor;
        for c in &self.couplings {
            let mut term = majorana_string(n, c.indices[0]);
            for &idx in &c.indices[1..] {
                term = term.mul(&majorana_string(n, idx))?;
            }
            term.coeff *= C64::new(front * c.value, 0.0);
            terms.push(term);
        }
        PauliSum::from_terms(n, terms)
    }
}

fn check_majorana_count(majorana_count: usize) -> Result<()> {
    if majorana_count < 4 || majorana_count % 2 != 0 {
        return Err(Error::invalid(alloc::format!(
            "majorana count must be even and at least 4, got {majorana_count}"
        )));
    }
    if majorana_count > 64 {
        return Err(Error::capacity(alloc::format!(
            "majorana count limited to 64, got {majorana_count}"
        )));
    }
    Ok(())
}

/// Number of ascending quartets, `C(n, 4)`.
pub fn binomial_4(n: usize) -> usize {
    if n < 4 {
        0
    } else {
        n * (n - 1) * (n - 2) * (n - 3) / 24
    }
}

/// Jordan-Wigner image of the 1-based Majorana `chi_idx`, including the
/// `1/sqrt(2)` normalization.
pub fn majorana_string(num_qubits: usize, idx: usize) -> PauliString {
    debug_assert!(idx >= 1 && idx <= 2 * num_qubits);
    let k = (idx - 1) / 2;
    let mut letters = vec![Pauli::I; num_qubits];
    for letter in letters.iter_mut().take(k) {
        *letter = Pauli::Z;
    }
    letters[k] = if idx % 2 == 1 { Pauli::X } else { Pauli::Y };
    PauliString::new(C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0), letters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;

    fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let mut m = a.matmul(b).unwrap();
        m.add_scaled(&b.matmul(a).unwrap(), C64::new(1.0, 0.0)).unwrap();
        m
    }

    #[test]
    fn majorana_anticommutation_relations() {
        let n = 3;
        for i in 1..=2 * n {
            for j in i..=2 * n {
                let mi = majorana_string(n, i).to_matrix();
                let mj = majorana_string(n, j).to_matrix();
                let ac = anticommutator(&mi, &mj);
                let expect = if i == j {
                    CMatrix::identity(1 << n)
                } else {
                    CMatrix::zeros(1 << n)
                };
                assert!(
                    ac.max_abs_diff(&expect) < 1e-14,
                    "{{chi_{i}, chi_{j}}} wrong"
                );
            }
        }
    }

    #[test]
    fn majorana_strings_are_hermitian() {
        for idx in 1..=6 {
            let m = majorana_string(3, idx).to_matrix();
            assert!(m.is_hermitian(1e-14), "chi_{idx} not hermitian");
        }
    }

    #[test]
    fn four_majoranas_single_coupling_gives_quarter_zz() {
        // With N = 4 and J_{1234} = J, the product chi1 chi2 chi3 chi4 is
        // (X Y/2 on qubit 0) (Z X Z Y / 4 ...); the full Hamiltonian reduces
        // to +J/4 * Z0 Z1.
        let couplings = vec![Coupling { indices: [1, 2, 3, 4], value: 1.0 }];
        let inst = SykInstance::from_parts(4, 0, 1.0, couplings).unwrap();
        let h = inst.hamiltonian().unwrap();
        assert_eq!(h.num_terms(), 1);
        let t = &h.terms()[0];
        assert_eq!(t.letters, vec![Pauli::Z, Pauli::Z]);
        assert!((t.coeff.re - 0.25).abs() < 1e-15);
        assert!(t.coeff.im.abs() < 1e-15);
    }

    #[test]
    fn term_magnitudes_are_quarter_couplings() {
        let inst = SykInstance::generate(8, 11).unwrap();
        let h = inst.hamiltonian().unwrap();
        assert_eq!(h.num_terms(), binomial_4(8));
        // Distinct quartets map to distinct Pauli strings, so each term's
        // magnitude must equal |J|/4 for some sampled J.
        let mut coupling_mags: Vec<f64> =
            inst.couplings().iter().map(|c| c.value.abs() / 4.0).collect();
        let mut term_mags: Vec<f64> = h.terms().iter().map(|t| t.coeff.norm()).collect();
        coupling_mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        term_mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in coupling_mags.iter().zip(term_mags.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_traceless() {
        let inst = SykInstance::generate(8, 3).unwrap();
        let h = inst.hamiltonian().unwrap();
        assert!(h.is_hermitian(1e-12));
        let m = h.to_matrix().unwrap();
        assert!(m.is_hermitian(1e-12));
        assert!(m.trace().norm() < 1e-12);
    }

    #[test]
    fn coupling_count_and_order() {
        let inst = SykInstance::generate(10, 5).unwrap();
        assert_eq!(inst.couplings().len(), 210);
        for w in inst.couplings().windows(2) {
            assert!(w[0].indices < w[1].indices, "not lexicographic");
        }
        for c in inst.couplings() {
            let [a, b, cc, d] = c.indices;
            assert!(a < b && b < cc && cc < d && d <= 10);
            assert!(a >= 1);
        }
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let a = SykInstance::generate(8, 7).unwrap();
        let b = SykInstance::generate(8, 7).unwrap();
        let c = SykInstance::generate(8, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.couplings()[0].value, c.couplings()[0].value);
    }

    #[test]
    fn sampled_variance_matches_model() {
        // Pool couplings over several seeds: C(12,4) = 495 per instance.
        let mut values = Vec::new();
        for seed in 0..20 {
            let inst = SykInstance::generate(12, seed).unwrap();
            values.extend(inst.couplings().iter().map(|c| c.value));
        }
        let n = values.len() as f64;
        let mean: f64 = values.iter().sum::<f64>() / n;
        let var: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let expect = 6.0 / (12.0_f64.powi(3));
        // Relative SE of a variance estimate is sqrt(2/n) ~ 1.4%; allow 5 sigma.
        let tol = 5.0 * (2.0 / n).sqrt() * expect;
        assert!((var - expect).abs() < tol, "var {var} vs {expect}");
        assert!(mean.abs() < 5.0 * (var / n).sqrt());
    }

    #[test]
    fn prefactor_scales_hamiltonian() {
        let a = SykInstance::generate_with_prefactor(8, 2, 1.0).unwrap();
        let b = SykInstance::generate_with_prefactor(8, 2, 2.5).unwrap();
        let ha = a.hamiltonian().unwrap();
        let hb = b.hamiltonian().unwrap();
        for (ta, tb) in ha.terms().iter().zip(hb.terms().iter()) {
            assert!((tb.coeff - ta.coeff * C64::new(2.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_majorana_counts() {
        assert!(SykInstance::generate(3, 0).is_err());
        assert!(SykInstance::generate(7, 0).is_err());
        assert!(SykInstance::generate(2, 0).is_err());
        assert!(SykInstance::generate(66, 0).is_err());
        assert!(SykInstance::generate(4, 0).is_ok());
        assert!(SykInstance::generate(20, 0).is_ok());
    }

    #[test]
    fn from_parts_validates_order() {
        let mut inst = SykInstance::generate(8, 1).unwrap();
        let mut couplings = inst.couplings().to_vec();
        couplings.swap(0, 1);
        assert!(SykInstance::from_parts(8, 1, 1.0, couplings).is_err());
        let couplings = inst.couplings().to_vec();
        let rebuilt = SykInstance::from_parts(8, 1, 1.0, couplings).unwrap();
        assert_eq!(rebuilt, inst);
        inst.couplings.pop();
        assert!(SykInstance::from_parts(8, 1, 1.0, inst.couplings).is_err());
    }
}
