//! Measurement bases, shot simulation and constrained linear inversion.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::pauli::PauliString;
use crate::error::{Error, Result};
use crate::qsim::{DensityMatrix, StateVector, C64};

/// Orthonormal simultaneous eigenbasis of a commuting group.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    pub strings: Vec<PauliString>,
    /// Basis vectors, one per measurement outcome.
    pub vectors: Vec<DVector<C64>>,
    /// `eigenvalues[k][s]` is the ±1 eigenvalue of `strings[s]` on
    /// `vectors[k]`.
    pub eigenvalues: Vec<Vec<i8>>,
}

/// Positions in `group` of the first independent strings, in group order.
fn generators(group: &[PauliString]) -> Vec<usize> {
    let mut pivots = [0u64; 64];
    let mut out = Vec::new();
    for (i, s) in group.iter().enumerate() {
        let mut v = s.symplectic();
        while v != 0 {
            let top = 63 - v.leading_zeros() as usize;
            if pivots[top] == 0 {
                pivots[top] = v;
                out.push(i);
                break;
            }
            v ^= pivots[top];
        }
    }
    out
}

/// Bit `q` is set when generator `q` reads −1.
fn outcome_label(signs: &[i8], gens: &[usize]) -> usize {
    gens.iter().enumerate().fold(0, |acc, (q, &g)| acc | (usize::from(signs[g] < 0) << q))
}

/// Simultaneously diagonalize a commuting set of Pauli strings.
///
/// Starting from the full space, each string in turn is diagonalized inside
/// every current joint eigenspace, splitting it into its ±1 parts. Any
/// degeneracy left at the end is resolved by the eigenvectors of the last
/// split. Vectors are phased so their first non-negligible component is real
/// and positive.
///
/// For a complete group the outcome index is a bitstring: taking the first
/// `n` independent strings of `group` as generators `g_0, …, g_{n−1}`, bit
/// `q` of the index is set when `g_q` reads −1. For product settings `g_q`
/// is the letter on qubit `q`, so bit `q` is that qubit's reading. Smaller
/// groups are ordered by their full sign pattern (`+` first, first string
/// most significant).
pub fn mub_eigenbasis(group: &[PauliString]) -> Result<Eigenbasis> {
    let Some(first) = group.first() else {
        return Err(Error::invalid("empty Pauli group"));
    };
    let n = first.n();
    for (i, a) in group.iter().enumerate() {
        if a.n() != n {
            return Err(Error::invalid("Pauli strings of different lengths"));
        }
        for b in &group[i + 1..] {
            if !a.commutes_with(b) {
                return Err(Error::NonCommuting(a.to_string(), b.to_string()));
            }
        }
    }
    let d = 1usize << n;
    let mut spaces: Vec<DMatrix<C64>> = vec![DMatrix::identity(d, d)];
    for s in group {
        let op = s.matrix();
        let mut next = Vec::with_capacity(spaces.len() * 2);
        for v in spaces {
            let restricted = v.adjoint() * &op * &v;
            let restricted = (&restricted + restricted.adjoint()) * C64::new(0.5, 0.0);
            let eig = restricted.symmetric_eigen();
            let (mut plus, mut minus) = (Vec::new(), Vec::new());
            for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
                let col = &v * eig.eigenvectors.column(j);
                if lambda > 0.0 {
                    plus.push(col);
                } else {
                    minus.push(col);
                }
            }
            for cols in [plus, minus] {
                if !cols.is_empty() {
                    next.push(DMatrix::from_columns(&cols));
                }
            }
        }
        spaces = next;
    }
    let ops: Vec<DMatrix<C64>> = group.iter().map(|s| s.matrix()).collect();
    let mut entries: Vec<(Vec<i8>, DVector<C64>)> = spaces
        .iter()
        .flat_map(|v| v.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
        .map(|mut vec| {
            if let Some(z) = vec.iter().find(|z| z.norm() > 1e-9).copied() {
                let phase = z.conj() / z.norm();
                vec.iter_mut().for_each(|a| *a *= phase);
            }
            let signs = ops
                .iter()
                .map(|op| {
                    let e = (vec.adjoint() * op * &vec)[(0, 0)].re;
                    if e > 0.0 {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            (signs, vec)
        })
        .collect();
    let gens = generators(group);
    if gens.len() == n {
        entries.sort_by_key(|(signs, _)| outcome_label(signs, &gens));
    } else {
        entries.sort_by(|a, b| b.0.cmp(&a.0));
    }
    let (eigenvalues, vectors) = entries.into_iter().unzip();
    Ok(Eigenbasis { strings: group.to_vec(), vectors, eigenvalues })
}

/// Outcome probabilities `⟨b_k|ρ|b_k⟩`, clipped at zero and renormalized.
pub fn basis_probabilities(rho: &DensityMatrix, basis: &Eigenbasis) -> Vec<f64> {
    let mut probs: Vec<f64> = basis
        .vectors
        .iter()
        .map(|v| (v.adjoint() * rho.matrix() * v)[(0, 0)].re.max(0.0))
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
}

/// Multinomial sample of `shots` outcomes via sequential binomials.
pub fn sample_counts<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("probability in [0, 1]").sample(rng)
        };
        counts[k] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Measure the reduced state of `subsystem` in `basis` `shots` times.
pub fn simulate_shots<R: Rng + ?Sized>(
    state: &StateVector,
    subsystem: &[usize],
    basis: &Eigenbasis,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if shots < 1 {
        return Err(Error::invalid("need at least one shot"));
    }
    let rho = state.reduced_density_matrix(subsystem)?;
    if rho.dim() != basis.vectors.len() {
        return Err(Error::invalid("basis dimension does not match the subsystem"));
    }
    Ok(sample_counts(&basis_probabilities(&rho, basis), shots, rng))
}

/// `⟨σ⟩ = Σ_k λ_k(σ) c_k / Σ_k c_k` for every string of the basis. Counts may
/// be quasi-counts from readout mitigation.
pub fn expectations_from_counts(counts: &[f64], basis: &Eigenbasis) -> Result<BTreeMap<PauliString, f64>> {
    if counts.len() != basis.vectors.len() {
        return Err(Error::invalid("count vector length does not match the basis"));
    }
    let total: f64 = counts.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("empty counts"));
    }
    Ok(basis
        .strings
        .iter()
        .enumerate()
        .map(|(s, string)| {
            let e: f64 = counts.iter().zip(&basis.eigenvalues).map(|(c, ev)| c * ev[s] as f64).sum();
            (*string, (e / total).clamp(-1.0, 1.0))
        })
        .collect())
}

/// Average estimates of strings measured in more than one setting.
pub fn merge_expectations(parts: &[BTreeMap<PauliString, f64>]) -> BTreeMap<PauliString, f64> {
    let mut acc: BTreeMap<PauliString, (f64, usize)> = BTreeMap::new();
    for part in parts {
        for (s, v) in part {
            let e = acc.entry(*s).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(s, (sum, k))| (s, sum / k as f64)).collect()
}

/// `A vec(ρ) = P` over all `4^n` Pauli strings (identity first, key order).
/// Rows of `A` are row-major flattened Pauli matrices acting on the
/// column-stacked `vec(ρ)`, so `row_σ · vec(ρ) = Tr(ρ σ)`.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub n: usize,
    pub a_matrix: DMatrix<C64>,
    pub p_vector: DVector<f64>,
}

/// Tolerance on the identity expectation.
pub const IDENTITY_TOL: f64 = 1e-6;

impl LinearSystem {
    pub fn assemble(n: usize, expectations: &BTreeMap<PauliString, f64>) -> Result<Self> {
        let d = 1usize << n;
        let rows = d * d;
        let mut a = DMatrix::zeros(rows, rows);
        let mut p = DVector::zeros(rows);
        for key in 0..rows as u64 {
            let s = PauliString::from_key(n, key);
            let value = if s.is_identity() {
                expectations.get(&s).copied().unwrap_or(1.0)
            } else {
                *expectations
                    .get(&s)
                    .ok_or_else(|| Error::invalid(format!("missing expectation for {s}")))?
            };
            let m = s.matrix();
            let r = key as usize;
            for i in 0..d {
                for j in 0..d {
                    a[(r, i * d + j)] = m[(i, j)];
                }
            }
            p[r] = value;
        }
        if (p[0] - 1.0).abs() > IDENTITY_TOL {
            return Err(Error::invalid(format!("identity expectation {} != 1", p[0])));
        }
        Ok(Self { n, a_matrix: a, p_vector: p })
    }

    /// Unconstrained least-squares solution. Rows of `A` are mutually
    /// orthogonal with squared norm `2^n`, so `A⁺ = A† / 2^n`.
    pub fn least_squares(&self) -> DMatrix<C64> {
        let d = 1usize << self.n;
        let p = self.p_vector.map(|v| C64::new(v, 0.0));
        let x = self.a_matrix.adjoint() * p / C64::new(d as f64, 0.0);
        // x is column-stacked: x[i + j d] = ρ_ij.
        DMatrix::from_column_slice(d, d, x.as_slice())
    }

    /// `‖A vec(ρ) − P‖₂`.
    pub fn residual(&self, rho: &DMatrix<C64>) -> f64 {
        let v = DVector::from_column_slice(rho.as_slice());
        let ax = &self.a_matrix * v;
        ax.iter().zip(self.p_vector.iter()).map(|(a, p)| (a - C64::new(*p, 0.0)).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Nearest density matrix (Frobenius norm) to a Hermitian unit-trace matrix:
/// eigenvalues are shifted and clipped so negatives become zero while the
/// trace stays one.
pub fn project_to_density(h: &DMatrix<C64>) -> DMatrix<C64> {
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let d = herm.nrows();
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let trace: f64 = mu.iter().sum();
    let mu: Vec<f64> = mu.iter().map(|m| m / trace).collect();

    let mut lambda = vec![0.0; d];
    let mut accumulated = 0.0;
    let mut keep = d;
    while keep > 0 {
        let i = keep - 1;
        if mu[i] + accumulated / (keep as f64) < 0.0 {
            accumulated += mu[i];
            keep -= 1;
        } else {
            break;
        }
    }
    for j in 0..keep {
        lambda[j] = mu[j] + accumulated / keep as f64;
    }
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (rank, &i) in order.iter().enumerate() {
        if lambda[rank] <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        rho += &v * v.adjoint() * C64::new(lambda[rank], 0.0);
    }
    (&rho + rho.adjoint()) * C64::new(0.5, 0.0)
}

/// Constrained least-squares state estimate from a full set of Pauli
/// expectations (identity entry optional, must equal 1 if present).
pub fn reconstruct(n: usize, expectations: &BTreeMap<PauliString, f64>) -> Result<DensityMatrix> {
    if let Some(v) = expectations.get(&PauliString::identity(n)) {
        if (v - 1.0).abs() > IDENTITY_TOL {
            return Err(Error::invalid(format!("identity expectation {v} != 1")));
        }
    }
    let d = 1usize << n;
    // A† P / 2^n without materializing A.
    let mut h = DMatrix::<C64>::identity(d, d);
    for key in 1..(d * d) as u64 {
        let s = PauliString::from_key(n, key);
        let v = *expectations.get(&s).ok_or_else(|| Error::invalid(format!("missing expectation for {s}")))?;
        if v != 0.0 {
            h += s.matrix() * C64::new(v, 0.0);
        }
    }
    h /= C64::new(d as f64, 0.0);
    let rho = project_to_density(&h);
    let tr: f64 = rho.diagonal().iter().map(|z| z.re).sum();
    DensityMatrix::new(rho / C64::new(tr, 0.0))
}

/// Exact expectations `Tr(ρ σ)` for every non-identity string.
pub fn exact_expectations(rho: &DensityMatrix) -> BTreeMap<PauliString, f64> {
    PauliString::all_nontrivial(rho.n_qubits())
        .into_iter()
        .map(|s| {
            let v = (rho.matrix() * s.matrix()).trace().re;
            (s, v)
        })
        .collect()
}
