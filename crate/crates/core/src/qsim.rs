//! Dense statevector engine.
//!
//! Basis convention: qubit `q` is bit `q` of the basis-state index, so qubit 0
//! is the least-significant bit. Two-qubit matrices passed to
//! [`StateVector::apply_2q`] act on the local index `2·b(q_hi) + b(q_lo)`,
//! i.e. the first qubit argument is the more significant factor of the
//! Kronecker product `U = A ⊗ B`.

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

/// Largest allowed deviation `max |U U† − I|` for user-supplied gates.
pub const UNITARY_TOL: f64 = 1e-8;
/// Branch probabilities below this are treated as exactly zero.
pub const BRANCH_CUTOFF: f64 = 1e-14;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

pub mod gates {
    use super::*;

    pub fn identity2() -> Mat2 {
        Mat2::identity()
    }

    pub fn x() -> Mat2 {
        Mat2::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn y() -> Mat2 {
        Mat2::new(ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO)
    }

    pub fn z() -> Mat2 {
        Mat2::new(ONE, ZERO, ZERO, -ONE)
    }

    pub fn hadamard() -> Mat2 {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Mat2::new(h, h, h, -h)
    }

    /// `exp(-i θ Y / 2)`.
    pub fn ry(theta: f64) -> Mat2 {
        let (s, c) = (theta / 2.0).sin_cos();
        Mat2::new(C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0))
    }

    /// CX with the more significant qubit (first argument of `apply_2q`) as
    /// control.
    pub fn cx() -> Mat4 {
        let mut m = Mat4::zeros();
        m[(0, 0)] = ONE;
        m[(1, 1)] = ONE;
        m[(2, 3)] = ONE;
        m[(3, 2)] = ONE;
        m
    }

    /// CX with the less significant qubit as control.
    pub fn cx_reversed() -> Mat4 {
        let mut m = Mat4::zeros();
        m[(0, 0)] = ONE;
        m[(2, 2)] = ONE;
        m[(1, 3)] = ONE;
        m[(3, 1)] = ONE;
        m
    }

    pub fn identity4() -> Mat4 {
        Mat4::identity()
    }

    /// `A ⊗ B` with `A` on the more significant qubit.
    pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
        let mut m = Mat4::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        m[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                    }
                }
            }
        }
        m
    }

    /// Null-type weak-measurement coupling `V(η) = exp(-i g (I − Z) ⊗ Y / 2)`
    /// with `sin² g = η`, system qubit as the more significant factor.
    pub fn weak_coupling(eta: f64) -> Mat4 {
        let g = eta.clamp(0.0, 1.0).sqrt().asin();
        let (s, c) = g.sin_cos();
        let mut m = Mat4::identity();
        m[(2, 2)] = C64::new(c, 0.0);
        m[(2, 3)] = C64::new(-s, 0.0);
        m[(3, 2)] = C64::new(s, 0.0);
        m[(3, 3)] = C64::new(c, 0.0);
        m
    }

    /// Single-CX circuit `Ry(g − π/2)_anc · CX(sys → anc) · Ry(π/2 − g)_anc`.
    ///
    /// Agrees with [`weak_coupling`] on every input whose ancilla is `|0⟩`
    /// (columns 0 and 2) but not on the `|1⟩`-ancilla sector.
    pub fn weak_coupling_single_cx(eta: f64) -> Mat4 {
        let g = eta.clamp(0.0, 1.0).sqrt().asin();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let pre = kron2(&identity2(), &ry(half_pi - g));
        let post = kron2(&identity2(), &ry(g - half_pi));
        post * cx() * pre
    }
}

fn unitarity_deviation2(u: &Mat2) -> f64 {
    (u * u.adjoint() - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn unitarity_deviation4(u: &Mat4) -> f64 {
    (u * u.adjoint() - Mat4::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Insert a zero bit at position `bit` of `k`.
#[inline]
fn insert_zero_bit(k: usize, bit: usize) -> usize {
    let low = k & ((1 << bit) - 1);
    ((k >> bit) << (bit + 1)) | low
}

/// Outcome of a two-outcome null-type weak measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WeakOutcome {
    /// No click; `|1⟩` amplitude damped.
    Plus,
    /// Click; system projected onto `|1⟩`.
    Minus,
}

impl WeakOutcome {
    pub fn as_bit(self) -> u8 {
        match self {
            WeakOutcome::Plus => 0,
            WeakOutcome::Minus => 1,
        }
    }
}

/// Kraus operators `M±(η)` of the null-type weak measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausPair {
    pub eta: f64,
    pub m_plus: Mat2,
    pub m_minus: Mat2,
}

impl KrausPair {
    pub fn null_type(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("measurement strength {eta} outside [0, 1]")));
        }
        let m_plus = Mat2::new(ONE, ZERO, ZERO, C64::new((1.0 - eta).sqrt(), 0.0));
        let m_minus = Mat2::new(ZERO, ZERO, ZERO, C64::new(eta.sqrt(), 0.0));
        Ok(Self { eta, m_plus, m_minus })
    }

    /// `max |M+†M+ + M−†M− − I|`.
    pub fn completeness_deviation(&self) -> f64 {
        let s = self.m_plus.adjoint() * self.m_plus + self.m_minus.adjoint() * self.m_minus;
        (s - Mat2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Pure state of `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Self { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        if index >= 1 << n_qubits {
            return Err(Error::invalid(format!("basis index {index} out of range")));
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Build from raw amplitudes. Length must be a power of two and the norm 1
    /// within `1e-8`; the vector is renormalized exactly.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("amplitude count {len} is not a power of two")));
        }
        let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sqr - 1.0).abs() > 1e-8 {
            return Err(Error::invalid(format!("state norm² {norm_sqr} is not 1")));
        }
        let mut s = Self { n_qubits: len.trailing_zeros() as usize, amps };
        s.renormalize();
        Ok(s)
    }

    /// Haar-random pure state.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        use rand_distr::StandardNormal;
        let amps: Vec<C64> = (0..1usize << n_qubits)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut s = Self { n_qubits, amps };
        s.renormalize();
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn renormalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        let inv = 1.0 / n;
        self.amps.iter_mut().for_each(|a| *a *= inv);
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange { qubit: q, n_qubits: self.n_qubits });
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, u: &Mat2, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        let dev = unitarity_deviation2(u);
        if dev > UNITARY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        self.apply_1q_unchecked(u, q);
        Ok(())
    }

    /// Apply any 2×2 matrix without validation; does not renormalize.
    pub(crate) fn apply_1q_unchecked(&mut self, u: &Mat2, q: usize) {
        let bit = 1 << q;
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        for k in 0..self.amps.len() / 2 {
            let i0 = insert_zero_bit(k, q);
            let i1 = i0 | bit;
            let (a0, a1) = (self.amps[i0], self.amps[i1]);
            self.amps[i0] = u00 * a0 + u01 * a1;
            self.amps[i1] = u10 * a0 + u11 * a1;
        }
    }

    /// Apply a 4×4 unitary on `(q_hi, q_lo)`; see the module docs for the
    /// index convention.
    pub fn apply_2q(&mut self, u: &Mat4, q_hi: usize, q_lo: usize) -> Result<()> {
        self.check_qubit(q_hi)?;
        self.check_qubit(q_lo)?;
        if q_hi == q_lo {
            return Err(Error::RepeatedQubit(q_hi));
        }
        let dev = unitarity_deviation4(u);
        if dev > UNITARY_TOL {
            return Err(Error::NonUnitary(dev));
        }
        self.apply_2q_unchecked(u, q_hi, q_lo);
        Ok(())
    }

    pub(crate) fn apply_2q_unchecked(&mut self, u: &Mat4, q_hi: usize, q_lo: usize) {
        let (b_hi, b_lo) = (1usize << q_hi, 1usize << q_lo);
        let (first, second) = if q_hi < q_lo { (q_hi, q_lo) } else { (q_lo, q_hi) };
        let mut m = [[ZERO; 4]; 4];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, e) in row.iter_mut().enumerate() {
                *e = u[(r, c)];
            }
        }
        for k in 0..self.amps.len() / 4 {
            let base = insert_zero_bit(insert_zero_bit(k, first), second);
            let idx = [base, base | b_lo, base | b_hi, base | b_hi | b_lo];
            let a = [self.amps[idx[0]], self.amps[idx[1]], self.amps[idx[2]], self.amps[idx[3]]];
            for r in 0..4 {
                let row = &m[r];
                self.amps[idx[r]] = row[0] * a[0] + row[1] * a[1] + row[2] * a[2] + row[3] * a[3];
            }
        }
    }

    /// Probability of reading `1` on qubit `q` in the computational basis.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        self.check_qubit(q)?;
        let bit = 1 << q;
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Project qubit `q` onto `outcome` and renormalize.
    fn project(&mut self, q: usize, outcome: u8) {
        let bit = 1 << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if ((i & bit != 0) as u8) != outcome {
                *a = ZERO;
            }
        }
        self.renormalize();
    }

    /// Projective Z measurement of qubit `q`. Exactly one uniform variate is
    /// drawn from `rng`; outcome `1` is chosen iff it falls below `P(1)`.
    pub fn measure_z<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<u8> {
        let p1 = self.prob_one(q)?;
        let r: f64 = rng.random();
        let outcome = if p1 < BRANCH_CUTOFF {
            0
        } else if p1 > 1.0 - BRANCH_CUTOFF {
            1
        } else {
            (r < p1) as u8
        };
        self.project(q, outcome);
        Ok(outcome)
    }

    /// Norm² of `M ψ` for a single-qubit operator `M` on `q`.
    fn branch_weight(&self, m: &Mat2, q: usize) -> f64 {
        let bit = 1 << q;
        let mut w = 0.0;
        for k in 0..self.amps.len() / 2 {
            let i0 = insert_zero_bit(k, q);
            let (a0, a1) = (self.amps[i0], self.amps[i0 | bit]);
            w += (m[(0, 0)] * a0 + m[(0, 1)] * a1).norm_sqr();
            w += (m[(1, 0)] * a0 + m[(1, 1)] * a1).norm_sqr();
        }
        w
    }

    /// Generalized measurement with Kraus pair `kraus` on qubit `q`.
    ///
    /// Draws one uniform variate and selects `Minus` iff it falls below
    /// `‖M− ψ‖²`, matching the branch rule of [`StateVector::measure_z`].
    pub fn apply_weak_kraus<R: Rng + ?Sized>(
        &mut self,
        kraus: &KrausPair,
        q: usize,
        rng: &mut R,
    ) -> Result<WeakOutcome> {
        self.check_qubit(q)?;
        let dev = kraus.completeness_deviation();
        if dev > 1e-10 {
            return Err(Error::invalid(format!("Kraus pair incomplete (deviation {dev:.3e})")));
        }
        let p_minus = self.branch_weight(&kraus.m_minus, q);
        let r: f64 = rng.random();
        let outcome = if p_minus < BRANCH_CUTOFF {
            WeakOutcome::Plus
        } else if p_minus > 1.0 - BRANCH_CUTOFF {
            WeakOutcome::Minus
        } else if r < p_minus {
            WeakOutcome::Minus
        } else {
            WeakOutcome::Plus
        };
        let (m, weight) = match outcome {
            WeakOutcome::Minus => (&kraus.m_minus, p_minus),
            WeakOutcome::Plus => (&kraus.m_plus, 1.0 - p_minus),
        };
        if weight <= 0.0 {
            return Err(Error::ZeroProbabilityBranch);
        }
        self.apply_1q_unchecked(m, q);
        if self.norm_sqr() < BRANCH_CUTOFF {
            return Err(Error::ZeroProbabilityBranch);
        }
        self.renormalize();
        Ok(outcome)
    }

    /// Weak measurement through an explicit ancilla: couple with `V(η)`,
    /// measure the ancilla in Z, then reset it with a conditional X.
    pub fn apply_weak_ancilla<R: Rng + ?Sized>(
        &mut self,
        eta: f64,
        q_sys: usize,
        q_anc: usize,
        rng: &mut R,
    ) -> Result<WeakOutcome> {
        self.check_qubit(q_sys)?;
        self.check_qubit(q_anc)?;
        if q_sys == q_anc {
            return Err(Error::RepeatedQubit(q_sys));
        }
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid(format!("measurement strength {eta} outside [0, 1]")));
        }
        let population = self.prob_one(q_anc)?;
        if population > 1e-10 {
            return Err(Error::AncillaNotReset { qubit: q_anc, population });
        }
        self.apply_2q_unchecked(&gates::weak_coupling(eta), q_sys, q_anc);
        let bit = self.measure_z(q_anc, rng)?;
        if bit == 1 {
            self.apply_1q_unchecked(&gates::x(), q_anc);
        }
        Ok(if bit == 1 { WeakOutcome::Minus } else { WeakOutcome::Plus })
    }

    /// Measure `q` in Z and flip it back to `|0⟩` on outcome 1. Returns the
    /// measured bit.
    pub fn reset_qubit<R: Rng + ?Sized>(&mut self, q: usize, rng: &mut R) -> Result<u8> {
        let bit = self.measure_z(q, rng)?;
        if bit == 1 {
            self.apply_1q_unchecked(&gates::x(), q);
        }
        Ok(bit)
    }

    /// Reduced density matrix on `subsystem`. Local index bit `k` corresponds
    /// to qubit `subsystem[k]`.
    pub fn reduced_density_matrix(&self, subsystem: &[usize]) -> Result<DensityMatrix> {
        if subsystem.is_empty() {
            return Err(Error::invalid("empty subsystem"));
        }
        let mut seen = 0usize;
        for &q in subsystem {
            self.check_qubit(q)?;
            if seen & (1 << q) != 0 {
                return Err(Error::RepeatedQubit(q));
            }
            seen |= 1 << q;
        }
        let k = subsystem.len();
        let d_a = 1usize << k;
        let d_e = self.amps.len() / d_a;
        let contiguous = subsystem.iter().enumerate().all(|(i, &q)| i == q);
        let psi = if contiguous {
            DMatrix::from_column_slice(d_a, d_e, &self.amps)
        } else {
            let env: Vec<usize> = (0..self.n_qubits).filter(|q| seen & (1 << q) == 0).collect();
            let mut psi = DMatrix::from_element(d_a, d_e, ZERO);
            for (i, amp) in self.amps.iter().enumerate() {
                let a = subsystem
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
                let e = env.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
                psi[(a, e)] = *amp;
            }
            psi
        };
        let rho = &psi * psi.adjoint();
        Ok(DensityMatrix::from_matrix_unchecked(k, rho).hermitized())
    }

    /// All amplitudes as a column vector.
    pub fn to_dvector(&self) -> nalgebra::DVector<C64> {
        nalgebra::DVector::from_column_slice(&self.amps)
    }
}

/// Hermitian, unit-trace, positive semi-definite matrix on `n` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub const HERMITIAN_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;
    pub const EIGEN_TOL: f64 = 1e-8;

    /// Validated constructor.
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let d = entries.nrows();
        if d == 0 || !d.is_power_of_two() || entries.ncols() != d {
            return Err(Error::InvalidDensityMatrix(format!(
                "shape {}x{} is not 2^n x 2^n",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let rho = Self { n_qubits: d.trailing_zeros() as usize, entries };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(n_qubits: usize, entries: DMatrix<C64>) -> Self {
        Self { n_qubits, entries }
    }

    pub fn pure(state: &StateVector) -> Self {
        let v = state.to_dvector();
        Self { n_qubits: state.n_qubits(), entries: &v * v.adjoint() }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        let entries = DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0);
        Self { n_qubits, entries }
    }

    pub(crate) fn hermitized(mut self) -> Self {
        let h = (&self.entries + self.entries.adjoint()) * C64::new(0.5, 0.0);
        self.entries = h;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let herm = (&self.entries - self.entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > Self::HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > Self::TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let min_eig = self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -Self::EIGEN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn purity(&self) -> f64 {
        // Tr ρ² = Σ |ρ_ij|² for Hermitian ρ.
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Real eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_with_pure(&self, state: &StateVector) -> f64 {
        let v = state.to_dvector();
        (v.adjoint() * &self.entries * &v)[(0, 0)].re
    }

    /// `ρ ⊗ σ` with `self` on the more significant qubits.
    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            n_qubits: self.n_qubits + other.n_qubits,
            entries: self.entries.kronecker(&other.entries),
        }
    }

    /// `(1 − λ) ρ + λ I/d`.
    pub fn depolarized(&self, lambda: f64) -> DensityMatrix {
        let lambda = lambda.clamp(0.0, 1.0);
        let d = self.dim();
        let mixed = DMatrix::<C64>::identity(d, d) * C64::new(lambda / d as f64, 0.0);
        DensityMatrix {
            n_qubits: self.n_qubits,
            entries: &self.entries * C64::new(1.0 - lambda, 0.0) + mixed,
        }
    }
}
