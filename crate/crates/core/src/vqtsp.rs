//! Two-circuit variational preparation of thermal states.
//!
//! The first circuit (three rotations RZ-RY-RZ per qubit followed by an
//! entangling CNOT layer) is measured in the computational basis; its outcome
//! distribution p supplies a classical entropy source
//! `S = -sum_i p_i ln p_i` and the diagonal input state `rho_1 = diag(p)`.
//! The second circuit, grown gate by gate elsewhere, evolves `rho_1` into
//! `rho_2 = U_2 rho_1 U_2^dagger`. The pair is scored by the free energy
//! `F = Tr(rho_2 H) - S / beta`, minimized jointly over both circuits' angles
//! with the simplex optimizer from [`crate::optim`].
//!
//! With noise enabled, every single-qubit rotation is followed by a bit-flip
//! channel and every CNOT by a two-qubit depolarizing channel, and both the
//! entropy source and the evolved state are propagated as density matrices.


use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::backend::{CouplingMap, DensityMatrix, GateOp, StateVector};
use crate::error::{Error, Result};
use crate::optim::{minimize, OptimResult, OptimizerConfig};
use crate::pauli::PauliSum;
use crate::rng::{streams, Rng};
use crate::thermal::ThermalReference;

/// Entangling layer shape of the entropy-source circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entangler {
    /// CNOT(i, i+1 mod n) for every i; the hardware-friendly default.
    CyclicRing,
    /// CNOT(i, j) for every ordered pair with i < j.
    AllToAll,
}

/// Configuration of the fixed-layout entropy-source circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCircuit {
    num_qubits: usize,
    entangler: Entangler,
}

impl EntropyCircuit {
    pub fn new(num_qubits: usize, entangler: Entangler) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::invalid("entropy circuit needs at least one qubit"));
        }
        Ok(EntropyCircuit { num_qubits, entangler })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of rotation angles: three per qubit.
    pub fn num_angles(&self) -> usize {
        3 * self.num_qubits
    }

    /// Gate list for a concrete angle assignment.
    pub fn gates(&self, theta: &[f64]) -> Result<Vec<GateOp>> {
        if theta.len() != self.num_angles() {
            return Err(Error::DimensionMismatch {
                expected: self.num_angles(),
                got: theta.len(),
            });
        }
        let n = self.num_qubits;
        let mut gates = Vec::new();
        for q in 0..n {
            gates.push(GateOp::rz(q, theta[3 * q]));
            gates.push(GateOp::ry(q, theta[3 * q + 1]));
            gates.push(GateOp::rz(q, theta[3 * q + 2]));
        }
        match self.entangler {
            Entangler::CyclicRing => {
                if n >= 2 {
                    for i in 0..n {
                        gates.push(GateOp::cnot(i, (i + 1) % n));
                    }
                }
            }
            Entangler::AllToAll => {
                for i in 0..n {
                    for j in i + 1..n {
                        gates.push(GateOp::cnot(i, j));
                    }
                }
            }
        }
        Ok(gates)
    }

    /// Measurement distribution of the circuit, noiseless or noisy.
    pub fn probabilities(&self, theta: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
        let gates = self.gates(theta)?;
        if noise.enabled {
            let mut dm = DensityMatrix::zero_state(self.num_qubits);
            for g in &gates {
                dm.apply(g)?;
                noise.apply_after(&mut dm, g)?;
            }
            Ok(dm.probabilities())
        } else {
            let mut sv = StateVector::zero_state(self.num_qubits);
            sv.apply_all(&gates)?;
            Ok(sv.probabilities())
        }
    }

    /// Random initial angles, uniform over `[0, 2 pi)`.
    pub fn random_angles(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.num_angles())
            .map(|_| rng.next_range(0.0, 2.0 * core::f64::consts::PI))
            .collect()
    }
}

/// Shannon entropy in nats of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 }).sum()
}

/// Gate noise strengths applied after each gate when enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub enabled: bool,
    /// Bit-flip probability after every single-qubit rotation.
    pub p_bitflip: f64,
    /// Depolarizing probability after every CNOT.
    pub p_depolarizing: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel { enabled: false, p_bitflip: 0.0, p_depolarizing: 0.0 }
    }

    /// Strengths representative of current superconducting hardware.
    pub fn hardware_default() -> Self {
        NoiseModel { enabled: true, p_bitflip: 2.342e-4, p_depolarizing: 8.043e-3 }
    }

    /// Applies the channel matching the gate just executed.
    pub fn apply_after(&self, dm: &mut DensityMatrix, gate: &GateOp) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        match *gate {
            GateOp::Rotation { qubit, .. } => dm.apply_bitflip(qubit, self.p_bitflip),
            GateOp::Cnot { control, target } => {
                dm.apply_depolarizing2(control, target, self.p_depolarizing)
            }
        }
    }
}

/// The trainable expectation-value circuit: an ordered gate list whose
/// rotation angles form the parameter vector phi.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationCircuit {
    num_qubits: usize,
    gates: Vec<GateOp>,
}

impl ExpectationCircuit {
    pub fn empty(num_qubits: usize) -> Self {
        ExpectationCircuit { num_qubits, gates: Vec::new() }
    }

    pub fn from_gates(num_qubits: usize, gates: Vec<GateOp>) -> Result<Self> {
        for g in &gates {
            g.validate(num_qubits)?;
        }
        Ok(ExpectationCircuit { num_qubits, gates })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.is_rotation()).count()
    }

    pub fn push(&mut self, gate: GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    /// Number of rotation angles.
    pub fn num_angles(&self) -> usize {
        self.gates.iter().filter(|g| g.is_rotation()).count()
    }

    /// Current rotation angles in gate order.
    pub fn angles(&self) -> Vec<f64> {
        self.gates
            .iter()
            .filter_map(|g| match g {
                GateOp::Rotation { angle, .. } => Some(*angle),
                GateOp::Cnot { .. } => None,
            })
            .collect()
    }

    /// Overwrites rotation angles in gate order.
    pub fn set_angles(&mut self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.num_angles() {
            return Err(Error::DimensionMismatch {
                expected: self.num_angles(),
                got: phi.len(),
            });
        }
        let mut k = 0;
        for g in &mut self.gates {
            if let GateOp::Rotation { angle, .. } = g {
                *angle = phi[k];
                k += 1;
            }
        }
        Ok(())
    }

    /// Checks every CNOT against a hardware coupling map.
    pub fn respects(&self, map: &CouplingMap) -> bool {
        self.gates.iter().all(|g| match *g {
            GateOp::Rotation { .. } => true,
            GateOp::Cnot { control, target } => map.allows(control, target),
        })
    }

    /// Evolves a diagonal input state through the circuit.
    pub fn evolve(&self, input: &[f64], noise: &NoiseModel) -> Result<DensityMatrix> {
        let mut dm = DensityMatrix::from_probabilities(input)?;
        if dm.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                got: dm.num_qubits(),
            });
        }
        for g in &self.gates {
            dm.apply(g)?;
            noise.apply_after(&mut dm, g)?;
        }
        Ok(dm)
    }
}

/// Scores for one `(theta, phi)` assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub beta: f64,
    pub energy: f64,
    pub entropy: f64,
    /// `E - S / beta`; `None` at beta = 0.
    pub free_energy: Option<f64>,
    /// Uhlmann fidelity against the exact thermal state, when requested.
    pub fidelity: Option<f64>,
}

/// The full protocol for one Hamiltonian at one temperature.
#[derive(Debug, Clone)]
pub struct Protocol {
    entropy_circuit: EntropyCircuit,
    h: PauliSum,
    beta: f64,
    noise: NoiseModel,
}

impl Protocol {
    pub fn new(
        entropy_circuit: EntropyCircuit,
        h: PauliSum,
        beta: f64,
        noise: NoiseModel,
    ) -> Result<Self> {
        if h.num_qubits() != entropy_circuit.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: entropy_circuit.num_qubits(),
                got: h.num_qubits(),
            });
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::invalid("protocol requires finite beta > 0"));
        }
        Ok(Protocol { entropy_circuit, h, beta, noise })
    }

    pub fn entropy_circuit(&self) -> &EntropyCircuit {
        &self.entropy_circuit
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.h
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn num_qubits(&self) -> usize {
        self.entropy_circuit.num_qubits()
    }

    /// Free energy of one parameter assignment, without fidelity.
    pub fn free_energy(&self, theta: &[f64], circuit: &ExpectationCircuit) -> Result<f64> {
        let p = self.entropy_circuit.probabilities(theta, &self.noise)?;
        let entropy = shannon_entropy(&p);
        let rho2 = circuit.evolve(&p, &self.noise)?;
        let energy = rho2.expectation(&self.h)?;
        Ok(energy - entropy / self.beta)
    }

    /// Full evaluation including fidelity against `reference`.
    pub fn evaluate(
        &self,
        theta: &[f64],
        circuit: &ExpectationCircuit,
        reference: Option<&ThermalReference>,
    ) -> Result<Evaluation> {
        let p = self.entropy_circuit.probabilities(theta, &self.noise)?;
        let entropy = shannon_entropy(&p);
        let rho2 = circuit.evolve(&p, &self.noise)?;
        let energy = rho2.expectation(&self.h)?;
        let fidelity = match reference {
            Some(r) => Some(r.fidelity_to(rho2.matrix())?),
            None => None,
        };
        Ok(Evaluation {
            beta: self.beta,
            energy,
            entropy,
            free_energy: Some(energy - entropy / self.beta),
            fidelity,
        })
    }

    /// Jointly minimizes the free energy over `[theta; phi]`.
    ///
    /// `theta0` seeds the entropy-circuit angles; the expectation circuit's
    /// stored angles seed phi. Returns the optimized pair along with the
    /// optimizer diagnostics.
    pub fn minimize_free_energy(
        &self,
        theta0: &[f64],
        circuit: &ExpectationCircuit,
        config: &OptimizerConfig,
    ) -> Result<Minimized> {
        let nt = self.entropy_circuit.num_angles();
        if theta0.len() != nt {
            return Err(Error::DimensionMismatch { expected: nt, got: theta0.len() });
        }
        let mut x0 = theta0.to_vec();
        x0.extend(circuit.angles());
        let mut scratch = circuit.clone();
        let objective = |x: &[f64]| -> f64 {
            let (theta, phi) = x.split_at(nt);
            if scratch.set_angles(phi).is_err() {
                return f64::INFINITY;
            }
            self.free_energy(theta, &scratch).unwrap_or(f64::INFINITY)
        };
        let opt = minimize(objective, &x0, config)?;
        let (theta, phi) = opt.best_point.split_at(nt);
        let mut best_circuit = circuit.clone();
        best_circuit.set_angles(phi)?;
        Ok(Minimized {
            theta: theta.to_vec(),
            circuit: best_circuit,
            free_energy: opt.best_value,
            optimizer: opt.clone(),
        })
    }

    /// Convenience wrapper: fresh random theta from `seed`, then minimize.
    pub fn minimize_from_random_start(
        &self,
        circuit: &ExpectationCircuit,
        seed: u64,
        config: &OptimizerConfig,
    ) -> Result<Minimized> {
        let mut rng = Rng::stream(seed, streams::THETA_INIT);
        let theta0 = self.entropy_circuit.random_angles(&mut rng);
        self.minimize_free_energy(&theta0, circuit, config)
    }
}

/// Result of a joint minimization.
#[derive(Debug, Clone)]
pub struct Minimized {
    pub theta: Vec<f64>,
    pub circuit: ExpectationCircuit,
    pub free_energy: f64,
    pub optimizer: OptimResult,
}

/// Relative entropy `D(rho || rho_beta) = beta (F(rho) - F(rho_beta))` for a
/// state with energy/entropy pair `(e, s)` against an exact reference.
pub fn relative_entropy_to_thermal(e: f64, s: f64, reference: &ThermalReference) -> Option<f64> {
    let beta = reference.beta();
    let f_ref = reference.free_energy()?;
    Some(beta * ((e - s / beta) - f_ref))
}
