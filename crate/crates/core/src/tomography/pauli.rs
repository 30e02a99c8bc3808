use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qsim::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (u64, u64) {
        match self {
            Pauli::I => (0, 0),
            Pauli::X => (1, 0),
            Pauli::Y => (1, 1),
            Pauli::Z => (0, 1),
        }
    }

    fn from_bits(x: u64, z: u64) -> Self {
        match (x & 1, z & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    fn code(self) -> u64 {
        self as u64
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis in binary symplectic form: bit `q`
/// of `x`/`z` holds the X/Z component on qubit `q`.
///
/// Words are written with the highest qubit first, so `"XZ"` means X on
/// qubit 1 and Z on qubit 0. Ordering is lexicographic on words with
/// `I < X < Y < Z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub const MAX_QUBITS: usize = 31;

    pub fn identity(n: usize) -> Self {
        Self { n, x: 0, z: 0 }
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        // letters[q] acts on qubit q.
        let (mut x, mut z) = (0, 0);
        for (q, p) in letters.iter().enumerate() {
            let (bx, bz) = p.bits();
            x |= bx << q;
            z |= bz << q;
        }
        Self { n: letters.len(), x, z }
    }

    /// From symplectic bit masks (bit `q` is qubit `q`).
    pub fn from_xz(n: usize, x: u64, z: u64) -> Self {
        let mask = if n >= 64 { u64::MAX } else { (1u64 << n) - 1 };
        Self { n, x: x & mask, z: z & mask }
    }

    /// Inverse of [`PauliString::key`].
    pub fn from_key(n: usize, mut key: u64) -> Self {
        let mut letters = Vec::with_capacity(n);
        for _ in 0..n {
            letters.push(match key % 4 {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            });
            key /= 4;
        }
        Self::from_letters(&letters)
    }

    /// Base-4 index with qubit `n − 1` most significant; increasing keys are
    /// lexicographic word order.
    pub fn key(&self) -> u64 {
        (0..self.n).rev().fold(0, |acc, q| acc * 4 + self.letter(q).code())
    }

    /// `x | z << n` as one GF(2) vector.
    pub(crate) fn symplectic(&self) -> u64 {
        self.x | self.z << self.n
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn letter(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x >> q, self.z >> q)
    }

    pub fn letters(&self) -> Vec<Pauli> {
        (0..self.n).map(|q| self.letter(q)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Product up to phase.
    pub fn mul_unsigned(&self, other: &PauliString) -> PauliString {
        PauliString { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z }
    }

    /// True if every letter lies in `{I, p}`.
    pub fn is_qubitwise_family(&self, p: Pauli) -> bool {
        (0..self.n).all(|q| matches!(self.letter(q), Pauli::I) || self.letter(q) == p)
    }

    /// All `4^n − 1` non-identity strings in key order.
    pub fn all_nontrivial(n: usize) -> Vec<PauliString> {
        (1..4u64.pow(n as u32)).map(|k| Self::from_key(n, k)).collect()
    }

    /// Dense `2^n × 2^n` matrix: `P|j⟩ = i^{#Y} (−1)^{|j ∧ z|} |j ⊕ x⟩`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let d = 1usize << self.n;
        let mut m = DMatrix::zeros(d, d);
        let n_y = (self.x & self.z).count_ones();
        let base = match n_y % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        for j in 0..d {
            let sign = if (j as u64 & self.z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            m[((j as u64 ^ self.x) as usize, j)] = base * sign;
        }
        m
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.n, self.key()).cmp(&(other.n, other.key()))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.n).rev() {
            write!(f, "{}", self.letter(q).as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut letters = s
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'I' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::invalid(format!("bad Pauli letter {other:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if letters.is_empty() || letters.len() > Self::MAX_QUBITS {
            return Err(Error::invalid(format!("bad Pauli word length in {s:?}")));
        }
        letters.reverse();
        Ok(Self::from_letters(&letters))
    }
}
