//! Pauli strings and sums of Pauli strings on n qubits.
//!
//! A string is stored as one letter per qubit plus a complex coefficient.
//! Qubit k of a basis index is its k-th bit (little-endian), matching the
//! statevector layout in [`crate::backend`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::C64;

/// Coefficients below this magnitude are dropped during canonicalization.
pub const COEFF_EPS: f64 = 1e-14;

/// Single-qubit Pauli operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

}

/// Product of two Pauli letters as `(letter, k)` with phase `i^k`.
impl core::ops::Mul for Pauli {
    type Output = (Pauli, u8);

    fn mul(self, other: Pauli) -> (Pauli, u8) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (p, 0),
            (X, X) | (Y, Y) | (Z, Z) => (I, 0),
            (X, Y) => (Z, 1),
            (Y, X) => (Z, 3),
            (Y, Z) => (X, 1),
            (Z, Y) => (X, 3),
            (Z, X) => (Y, 1),
            (X, Z) => (Y, 3),
        }
    }
}

/// A weighted tensor product of Pauli letters.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub coeff: C64,
    pub letters: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString { coeff: C64::new(1.0, 0.0), letters: vec![Pauli::I; n] }
    }

    pub fn new(coeff: C64, letters: Vec<Pauli>) -> Self {
        PauliString { coeff, letters }
    }

    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Product of two strings on the same qubit count, tracking the phase.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        if self.letters.len() != other.letters.len() {
            return Err(Error::DimensionMismatch {
                expected: self.letters.len(),
                got: other.letters.len(),
            });
        }
        let mut phase_quarters: u8 = 0;
        let letters: Vec<Pauli> = self
            .letters
            .iter()
            .zip(other.letters.iter())
            .map(|(&a, &b)| {
                let (p, k) = a * b;
                phase_quarters = (phase_quarters + k) % 4;
                p
            })
            .collect();
        let phase = match phase_quarters {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        Ok(PauliString { coeff: self.coeff * other.coeff * phase, letters })
    }

    /// Bit masks describing the string's action on basis states.
    ///
    /// Acting on |j>, the string maps it to |j ^ flip> with amplitude
    /// `coeff * i^y_count * (-1)^popcount(j & phase_mask)` where `flip` has a
    /// bit per X or Y letter and `phase_mask` a bit per Y or Z letter.
    pub fn masks(&self) -> PauliMasks {
        let mut flip = 0u64;
        let mut phase_mask = 0u64;
        let mut y_count = 0u32;
        for (q, &p) in self.letters.iter().enumerate() {
            match p {
                Pauli::I => {}
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    phase_mask |= 1 << q;
                    y_count += 1;
                }
                Pauli::Z => phase_mask |= 1 << q,
            }
        }
        let y_phase = match y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        PauliMasks { flip, phase_mask, base: self.coeff * y_phase }
    }

    /// Dense matrix representation, mostly for cross-checks in tests.
    pub fn to_matrix(&self) -> CMatrix {
        let n = self.letters.len();
        let dim = 1usize << n;
        let m = self.masks();
        let mut out = CMatrix::zeros(dim);
        for j in 0..dim as u64 {
            let amp = m.amplitude(j);
            // Column j maps to row j ^ flip.
            out.set((j ^ m.flip) as usize, j as usize, amp);
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:+.6}{:+.6}i) ", self.coeff.re, self.coeff.im)?;
        for &p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Precomputed basis action of a [`PauliString`].
#[derive(Debug, Clone, Copy)]
pub struct PauliMasks {
    pub flip: u64,
    pub phase_mask: u64,
    pub base: C64,
}

impl PauliMasks {
    /// Amplitude of `P |j>` on `|j ^ flip>`.
    #[inline]
    pub fn amplitude(&self, j: u64) -> C64 {
        if (j & self.phase_mask).count_ones() % 2 == 1 {
            -self.base
        } else {
            self.base
        }
    }
}

/// A sum of Pauli strings on a fixed qubit count, kept in canonical form:
/// terms sorted by letters, duplicates merged, negligible terms dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n: usize,
    terms: Vec<PauliString>,
}

impl PauliSum {
    pub fn zero(n: usize) -> Self {
        PauliSum { n, terms: Vec::new() }
    }

    pub fn from_terms(n: usize, terms: Vec<PauliString>) -> Result<Self> {
        for t in &terms {
            if t.num_qubits() != n {
                return Err(Error::DimensionMismatch { expected: n, got: t.num_qubits() });
            }
        }
        let mut sum = PauliSum { n, terms };
        sum.canonicalize();
        Ok(sum)
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add_term(&mut self, term: PauliString) -> Result<()> {
        if term.num_qubits() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: term.num_qubits() });
        }
        self.terms.push(term);
        self.canonicalize();
        Ok(())
    }

    fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.letters.cmp(&b.letters));
        let mut merged: Vec<PauliString> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            match merged.last_mut() {
                Some(last) if last.letters == t.letters => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.norm() > COEFF_EPS);
        self.terms = merged;
    }

    /// True when every canonical coefficient is real to tolerance; a
    /// Hermitian sum of Hermitian strings has exactly real coefficients.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.iter().all(|t| t.coeff.im.abs() <= tol)
    }

    pub fn scale(&mut self, s: C64) {
        for t in &mut self.terms {
            t.coeff *= s;
        }
        self.terms.retain(|t| t.coeff.norm() > COEFF_EPS);
    }

    /// Dense matrix representation; intended for qubit counts at most 8.
    pub fn to_matrix(&self) -> Result<CMatrix> {
        if self.n > 8 {
            return Err(Error::capacity(alloc::format!(
                "dense form limited to 8 qubits, got {}",
                self.n
            )));
        }
        let dim = 1usize << self.n;
        let mut out = CMatrix::zeros(dim);
        for t in &self.terms {
            let m = t.masks();
            for j in 0..dim as u64 {
                let amp = m.amplitude(j);
                let i = (j ^ m.flip) as usize;
                let cur = out.get(i, j as usize);
                out.set(i, j as usize, cur + amp);
            }
        }
        Ok(out)
    }

    pub fn to_display_string(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                let _ = write!(s, " + ");
            }
            let _ = write!(s, "{t}");
        }
        s
    }
}
