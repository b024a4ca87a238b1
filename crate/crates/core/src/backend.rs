//! Statevector and density-matrix simulation of parameterized circuits.
//!
//! Basis states are indexed little-endian: bit q of an index is the state of
//! qubit q. Rotation gates follow the convention `RA(theta) = exp(-i theta A / 2)`
//! for A in {X, Y, Z}.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::pauli::PauliSum;
use crate::C64;

/// Rotation axis of a single-qubit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Stable index used by the circuit tensor encoding: X = 0, Y = 1, Z = 2.
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        match i {
            0 => Some(Axis::X),
            1 => Some(Axis::Y),
            2 => Some(Axis::Z),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "RX",
            Axis::Y => "RY",
            Axis::Z => "RZ",
        }
    }
}

/// One gate of a circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateOp {
    Rotation { axis: Axis, qubit: usize, angle: f64 },
    Cnot { control: usize, target: usize },
}

impl GateOp {
    pub fn rx(qubit: usize, angle: f64) -> Self {
        GateOp::Rotation { axis: Axis::X, qubit, angle }
    }

    pub fn ry(qubit: usize, angle: f64) -> Self {
        GateOp::Rotation { axis: Axis::Y, qubit, angle }
    }

    pub fn rz(qubit: usize, angle: f64) -> Self {
        GateOp::Rotation { axis: Axis::Z, qubit, angle }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        GateOp::Cnot { control, target }
    }

    pub fn is_rotation(&self) -> bool {
        matches!(self, GateOp::Rotation { .. })
    }

    /// Qubits the gate touches, as `(first, Option<second>)`.
    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            GateOp::Rotation { qubit, .. } => (qubit, None),
            GateOp::Cnot { control, target } => (control, Some(target)),
        }
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        match *self {
            GateOp::Rotation { qubit, angle, .. } => {
                if qubit >= num_qubits {
                    return Err(Error::invalid(alloc::format!(
                        "rotation qubit {qubit} out of range for {num_qubits} qubits"
                    )));
                }
                if !angle.is_finite() {
                    return Err(Error::invalid("rotation angle must be finite"));
                }
            }
            GateOp::Cnot { control, target } => {
                if control >= num_qubits || target >= num_qubits {
                    return Err(Error::invalid(alloc::format!(
                        "cnot ({control}, {target}) out of range for {num_qubits} qubits"
                    )));
                }
                if control == target {
                    return Err(Error::invalid("cnot control and target must differ"));
                }
            }
        }
        Ok(())
    }
}

/// 2x2 unitary of a rotation gate, row-major.
pub fn rotation_matrix(axis: Axis, angle: f64) -> [C64; 4] {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match axis {
        Axis::X => [
            C64::new(c, 0.0),
            C64::new(0.0, -s),
            C64::new(0.0, -s),
            C64::new(c, 0.0),
        ],
        Axis::Y => [
            C64::new(c, 0.0),
            C64::new(-s, 0.0),
            C64::new(s, 0.0),
            C64::new(c, 0.0),
        ],
        Axis::Z => [
            C64::new(c, -s),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(c, s),
        ],
    }
}

/// Pure state of `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// |0...0>.
    pub fn zero_state(num_qubits: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = C64::new(1.0, 0.0);
        StateVector { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            GateOp::Rotation { axis, qubit, angle } => {
                let u = rotation_matrix(axis, angle);
                let mask = 1usize << qubit;
                for base in 0..self.amps.len() {
                    if base & mask != 0 {
                        continue;
                    }
                    let a0 = self.amps[base];
                    let a1 = self.amps[base | mask];
                    self.amps[base] = u[0] * a0 + u[1] * a1;
                    self.amps[base | mask] = u[2] * a0 + u[3] * a1;
                }
            }
            GateOp::Cnot { control, target } => {
                let cm = 1usize << control;
                let tm = 1usize << target;
                for base in 0..self.amps.len() {
                    if base & cm != 0 && base & tm == 0 {
                        self.amps.swap(base, base | tm);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn apply_all(&mut self, gates: &[GateOp]) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Computational-basis probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Mixed state of `n` qubits as a dense density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn zero_state(num_qubits: usize) -> Self {
        let mut mat = CMatrix::zeros(1 << num_qubits);
        mat.set(0, 0, C64::new(1.0, 0.0));
        DensityMatrix { num_qubits, mat }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let dim = state.amps.len();
        let mat = CMatrix::from_fn(dim, |i, j| state.amps[i] * state.amps[j].conj());
        DensityMatrix { num_qubits: state.num_qubits, mat }
    }

    /// Diagonal (classical) state from a probability vector.
    pub fn from_probabilities(p: &[f64]) -> Result<Self> {
        let dim = p.len();
        if !dim.is_power_of_two() || dim == 0 {
            return Err(Error::invalid("probability vector length must be a power of two"));
        }
        let sum: f64 = p.iter().sum();
        if p.iter().any(|&x| x < -1e-12) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("probabilities must be non-negative and sum to 1"));
        }
        Ok(DensityMatrix {
            num_qubits: dim.trailing_zeros() as usize,
            mat: CMatrix::from_real_diagonal(p),
        })
    }

    pub fn from_matrix(num_qubits: usize, mat: CMatrix) -> Result<Self> {
        if mat.dim() != 1 << num_qubits {
            return Err(Error::DimensionMismatch { expected: 1 << num_qubits, got: mat.dim() });
        }
        Ok(DensityMatrix { num_qubits, mat })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Unitary conjugation `rho <- U rho U^dagger` for one gate.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        let dim = self.mat.dim();
        match *gate {
            GateOp::Rotation { axis, qubit, angle } => {
                let u = rotation_matrix(axis, angle);
                let mask = 1usize << qubit;
                // Rows: rho <- U rho.
                for i in 0..dim {
                    if i & mask != 0 {
                        continue;
                    }
                    for j in 0..dim {
                        let a0 = self.mat.get(i, j);
                        let a1 = self.mat.get(i | mask, j);
                        self.mat.set(i, j, u[0] * a0 + u[1] * a1);
                        self.mat.set(i | mask, j, u[2] * a0 + u[3] * a1);
                    }
                }
                // Columns: rho <- rho U^dagger.
                for j in 0..dim {
                    if j & mask != 0 {
                        continue;
                    }
                    for i in 0..dim {
                        let a0 = self.mat.get(i, j);
                        let a1 = self.mat.get(i, j | mask);
                        self.mat.set(i, j, a0 * u[0].conj() + a1 * u[1].conj());
                        self.mat.set(i, j | mask, a0 * u[2].conj() + a1 * u[3].conj());
                    }
                }
            }
            GateOp::Cnot { control, target } => {
                let cm = 1usize << control;
                let tm = 1usize << target;
                // Permutation conjugation: swap rows, then columns.
                for i in 0..dim {
                    if i & cm != 0 && i & tm == 0 {
                        for j in 0..dim {
                            let a = self.mat.get(i, j);
                            let b = self.mat.get(i | tm, j);
                            self.mat.set(i, j, b);
                            self.mat.set(i | tm, j, a);
                        }
                    }
                }
                for j in 0..dim {
                    if j & cm != 0 && j & tm == 0 {
                        for i in 0..dim {
                            let a = self.mat.get(i, j);
                            let b = self.mat.get(i, j | tm);
                            self.mat.set(i, j, b);
                            self.mat.set(i, j | tm, a);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Bit-flip channel `rho <- (1-p) rho + p X_q rho X_q`.
    pub fn apply_bitflip(&mut self, qubit: usize, p: f64) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::invalid("bitflip qubit out of range"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("bitflip probability must lie in [0, 1]"));
        }
        if p == 0.0 {
            return Ok(());
        }
        let dim = self.mat.dim();
        let m = 1usize << qubit;
        let q = 1.0 - p;
        for i in 0..dim {
            for j in 0..dim {
                let fi = i ^ m;
                let fj = j ^ m;
                // Visit each {(i,j), (i^m, j^m)} orbit once.
                if (i, j) < (fi, fj) {
                    let a = self.mat.get(i, j);
                    let b = self.mat.get(fi, fj);
                    self.mat.set(i, j, a * q + b * p);
                    self.mat.set(fi, fj, b * q + a * p);
                }
            }
        }
        Ok(())
    }

    /// Two-qubit depolarizing channel
    /// `rho <- (1-p) rho + p Tr_{a,b}(rho) (x) I/4` on the pair `(a, b)`.
    pub fn apply_depolarizing2(&mut self, a: usize, b: usize, p: f64) -> Result<()> {
        if a >= self.num_qubits || b >= self.num_qubits || a == b {
            return Err(Error::invalid("depolarizing pair out of range"));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("depolarizing probability must lie in [0, 1]"));
        }
        if p == 0.0 {
            return Ok(());
        }
        let dim = self.mat.dim();
        let ma = 1usize << a;
        let mb = 1usize << b;
        let rest_mask = !(ma | mb) & (dim - 1);
        // Partial trace over the pair, indexed by the remaining bits.
        let mut traced: Vec<C64> = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            if i & (ma | mb) != 0 {
                continue;
            }
            for j in 0..dim {
                if j & (ma | mb) != 0 {
                    continue;
                }
                let mut acc = C64::new(0.0, 0.0);
                for sub in 0..4usize {
                    let add = if sub & 1 != 0 { ma } else { 0 } | if sub & 2 != 0 { mb } else { 0 };
                    acc += self.mat.get(i | add, j | add);
                }
                traced[i * dim + j] = acc;
            }
        }
        let q = 1.0 - p;
        for i in 0..dim {
            for j in 0..dim {
                let mut v = self.mat.get(i, j) * q;
                if i & (ma | mb) == j & (ma | mb) {
                    v += traced[(i & rest_mask) * dim + (j & rest_mask)] * (p / 4.0);
                }
                self.mat.set(i, j, v);
            }
        }
        Ok(())
    }

    /// Diagonal of the density matrix, clamped to non-negative reals.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.mat.dim()).map(|i| self.mat.get(i, i).re.max(0.0)).collect()
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    /// `Tr(rho H)` using each Pauli term's permutation action, avoiding any
    /// dense matrix product.
    pub fn expectation(&self, h: &PauliSum) -> Result<f64> {
        if h.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                got: h.num_qubits(),
            });
        }
        let dim = self.mat.dim() as u64;
        let mut total = C64::new(0.0, 0.0);
        for term in h.terms() {
            let m = term.masks();
            let mut acc = C64::new(0.0, 0.0);
            // Tr(rho P) = sum_j <j| rho P |j> = sum_j rho[j ^ flip, j]... with
            // rho[j, j ^ flip] ordering fixed by P|j> = amp |j ^ flip>.
            for j in 0..dim {
                acc += self.mat.get(j as usize, (j ^ m.flip) as usize) * m.amplitude(j);
            }
            total += acc;
        }
        Ok(total.re)
    }
}

/// Expectation `<psi| H |psi>` on a pure state.
pub fn pure_expectation(state: &StateVector, h: &PauliSum) -> Result<f64> {
    if h.num_qubits() != state.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: state.num_qubits(),
            got: h.num_qubits(),
        });
    }
    let amps = state.amplitudes();
    let mut total = C64::new(0.0, 0.0);
    for term in h.terms() {
        let m = term.masks();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..amps.len() as u64 {
            acc += amps[(j ^ m.flip) as usize].conj() * m.amplitude(j) * amps[j as usize];
        }
        total += acc;
    }
    Ok(total.re)
}

/// Uhlmann fidelity between two arbitrary density matrices.
pub fn uhlmann_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.num_qubits != sigma.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: rho.num_qubits,
            got: sigma.num_qubits,
        });
    }
    let (w, v) = rho.mat.eigh()?;
    let sqrt_w: Vec<f64> = w.iter().map(|&x| x.max(0.0).sqrt()).collect();
    let sqrt_rho = CMatrix::from_fn(rho.mat.dim(), |i, j| {
        let mut acc = C64::new(0.0, 0.0);
        for (k, &s) in sqrt_w.iter().enumerate() {
            if s != 0.0 {
                acc += v.get(i, k) * s * v.get(j, k).conj();
            }
        }
        acc
    });
    let m = sqrt_rho.matmul(&sigma.mat)?.matmul(&sqrt_rho)?;
    let eig = m.eigvalsh()?;
    Ok(eig.iter().map(|&e| e.max(0.0).sqrt()).sum())
}

/// Directed qubit connectivity restricting CNOT placement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingMap {
    name: String,
    num_qubits: usize,
    pairs: Vec<(usize, usize)>,
}

impl CouplingMap {
    pub fn new(name: impl Into<String>, num_qubits: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = pairs.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != pairs.len() {
            return Err(Error::invalid("coupling map contains duplicate pairs"));
        }
        for &(c, t) in &pairs {
            if c >= num_qubits || t >= num_qubits {
                return Err(Error::invalid(alloc::format!(
                    "pair ({c}, {t}) out of range for {num_qubits} qubits"
                )));
            }
            if c == t {
                return Err(Error::invalid("coupling map pair must join distinct qubits"));
            }
        }
        Ok(CouplingMap { name: name.into(), num_qubits, pairs })
    }

    /// Full directed connectivity on `n` qubits.
    pub fn all_to_all(num_qubits: usize) -> Self {
        let mut pairs = Vec::new();
        for c in 0..num_qubits {
            for t in 0..num_qubits {
                if c != t {
                    pairs.push((c, t));
                }
            }
        }
        CouplingMap { name: String::from("all-to-all"), num_qubits, pairs }
    }

    /// Four qubits in a T shape with links (0-1), (1-2), (1-3), both
    /// directions, as found on heavy-hex superconducting devices.
    pub fn eagle_r3_t4() -> Self {
        let pairs = vec![(0, 1), (1, 0), (1, 2), (2, 1), (1, 3), (3, 1)];
        CouplingMap { name: String::from("eagle-r3-T4"), num_qubits: 4, pairs }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn allows(&self, control: usize, target: usize) -> bool {
        self.pairs.contains(&(control, target))
    }
}
