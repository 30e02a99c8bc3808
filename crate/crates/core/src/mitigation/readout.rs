//! Readout bit-flip noise and its mitigation.
//!
//! Outcome index bit `q` is the reading of qubit `q`. Calibration matrices are
//! column-stochastic: entry `(r, s)` is the probability of reporting `r` when
//! `s` was prepared. Dense matrices are ordered so that qubit `q` is bit `q`
//! of both indices, i.e. the full matrix is `F_{n−1} ⊗ … ⊗ F_0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::sample_counts;

/// Complete calibration is only built up to this many qubits.
pub const COMPLETE_MAX_QUBITS: usize = 5;

/// Independent per-qubit flip rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutNoiseModel {
    /// `P(report 1 | prepared 0)` per qubit.
    pub p01: Vec<f64>,
    /// `P(report 0 | prepared 1)` per qubit.
    pub p10: Vec<f64>,
}

impl ReadoutNoiseModel {
    pub fn new(p01: Vec<f64>, p10: Vec<f64>) -> Result<Self> {
        if p01.len() != p10.len() {
            return Err(Error::invalid("p01 and p10 lengths differ"));
        }
        for &r in p01.iter().chain(&p10) {
            if !(0.0..0.5).contains(&r) {
                return Err(Error::SingularCalibration(format!("flip rate {r} outside [0, 0.5)")));
            }
        }
        Ok(Self { p01, p10 })
    }

    pub fn noiseless(n: usize) -> Self {
        Self { p01: vec![0.0; n], p10: vec![0.0; n] }
    }

    pub fn symmetric(rates: &[f64]) -> Result<Self> {
        Self::new(rates.to_vec(), rates.to_vec())
    }

    pub fn n_qubits(&self) -> usize {
        self.p01.len()
    }

    /// 2×2 factor `[[1 − p01, p10], [p01, 1 − p10]]` of qubit `q`.
    pub fn factor(&self, q: usize) -> DMatrix<f64> {
        let (a, b) = (self.p01[q], self.p10[q]);
        DMatrix::from_row_slice(2, 2, &[1.0 - a, b, a, 1.0 - b])
    }

    fn transition(&self, reported: usize, prepared: usize) -> f64 {
        (0..self.n_qubits())
            .map(|q| {
                let (r, s) = ((reported >> q) & 1, (prepared >> q) & 1);
                match (s, r) {
                    (0, 0) => 1.0 - self.p01[q],
                    (0, _) => self.p01[q],
                    (_, 0) => self.p10[q],
                    _ => 1.0 - self.p10[q],
                }
            })
            .product()
    }

    /// Flip each bit of one reading independently.
    pub fn corrupt_bits<R: Rng + ?Sized>(&self, bits: usize, rng: &mut R) -> usize {
        (0..self.n_qubits()).fold(bits, |acc, q| {
            let rate = if (bits >> q) & 1 == 0 { self.p01[q] } else { self.p10[q] };
            if rate > 0.0 && rng.random_bool(rate) {
                acc ^ (1 << q)
            } else {
                acc
            }
        })
    }
}

/// Corrupt a histogram over `2^n` outcomes. Shots of each true outcome are
/// redistributed by a multinomial draw from that outcome's transition column.
pub fn apply_readout_noise<R: Rng + ?Sized>(
    counts: &[u64],
    model: &ReadoutNoiseModel,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let d = 1usize << model.n_qubits();
    if counts.len() != d {
        return Err(Error::invalid(format!("{} counts for a {}-qubit model", counts.len(), model.n_qubits())));
    }
    let mut out = vec![0u64; d];
    for (prepared, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let column: Vec<f64> = (0..d).map(|r| model.transition(r, prepared)).collect();
        for (o, k) in out.iter_mut().zip(sample_counts(&column, c, rng)) {
            *o += k;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationMode {
    /// One `2^n × 2^n` matrix capturing correlated errors.
    Complete,
    /// Independent per-qubit factors.
    Tensored,
}

/// Readout calibration: either a full matrix or per-qubit 2×2 factors.
#[derive(Clone, Debug, PartialEq)]
pub enum Calibration {
    Complete(DMatrix<f64>),
    Tensored(Vec<DMatrix<f64>>),
}

fn check_invertible(m: &DMatrix<f64>) -> Result<()> {
    let det = m.clone().lu().determinant();
    if det.abs() < 1e-12 {
        return Err(Error::SingularCalibration(format!("determinant {det:.3e}")));
    }
    Ok(())
}

/// Calibration built from a flip-rate model.
pub fn calibration_matrix(model: &ReadoutNoiseModel, mode: CalibrationMode) -> Result<Calibration> {
    let model = ReadoutNoiseModel::new(model.p01.clone(), model.p10.clone())?;
    let n = model.n_qubits();
    match mode {
        CalibrationMode::Complete => {
            if n > COMPLETE_MAX_QUBITS {
                return Err(Error::invalid(format!(
                    "complete calibration limited to {COMPLETE_MAX_QUBITS} qubits, got {n}"
                )));
            }
            let d = 1usize << n;
            Ok(Calibration::Complete(DMatrix::from_fn(d, d, |r, s| model.transition(r, s))))
        }
        CalibrationMode::Tensored => Ok(Calibration::Tensored((0..n).map(|q| model.factor(q)).collect())),
    }
}

/// Complete calibration from measured histograms: `counts[s][r]` is how often
/// `r` was read after preparing `s`.
pub fn calibration_from_counts(counts: &[Vec<u64>]) -> Result<Calibration> {
    let d = counts.len();
    if d == 0 || !d.is_power_of_two() || counts.iter().any(|c| c.len() != d) {
        return Err(Error::invalid("calibration counts must be a 2^n x 2^n table"));
    }
    let mut m = DMatrix::zeros(d, d);
    for (s, col) in counts.iter().enumerate() {
        let total: u64 = col.iter().sum();
        if total == 0 {
            return Err(Error::invalid(format!("no calibration shots for prepared state {s}")));
        }
        for (r, &c) in col.iter().enumerate() {
            m[(r, s)] = c as f64 / total as f64;
        }
    }
    check_invertible(&m)?;
    Ok(Calibration::Complete(m))
}

impl Calibration {
    pub fn n_qubits(&self) -> usize {
        match self {
            Calibration::Complete(m) => m.nrows().trailing_zeros() as usize,
            Calibration::Tensored(f) => f.len(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Calibration::Complete(m) => m.clone(),
            Calibration::Tensored(f) => f
                .iter()
                .rev()
                .fold(DMatrix::from_element(1, 1, 1.0), |acc, m| acc.kronecker(m)),
        }
    }

    fn apply_factors(factors: &[DMatrix<f64>], x: &[f64]) -> Vec<f64> {
        let mut v = x.to_vec();
        for (q, f) in factors.iter().enumerate() {
            let bit = 1 << q;
            for i in 0..v.len() {
                if i & bit == 0 {
                    let (a, b) = (v[i], v[i | bit]);
                    v[i] = f[(0, 0)] * a + f[(0, 1)] * b;
                    v[i | bit] = f[(1, 0)] * a + f[(1, 1)] * b;
                }
            }
        }
        v
    }

    /// `C x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Calibration::Complete(m) => (m * DVector::from_column_slice(x)).as_slice().to_vec(),
            Calibration::Tensored(f) => Self::apply_factors(f, x),
        }
    }

    /// `Cᵀ x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Calibration::Complete(m) => (m.transpose() * DVector::from_column_slice(x)).as_slice().to_vec(),
            Calibration::Tensored(f) => {
                let t: Vec<DMatrix<f64>> = f.iter().map(|m| m.transpose()).collect();
                Self::apply_factors(&t, x)
            }
        }
    }

    /// `C⁻¹ x`.
    pub fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Calibration::Complete(m) => {
                check_invertible(m)?;
                let sol = m.clone().lu().solve(&DVector::from_column_slice(x)).ok_or_else(|| {
                    Error::SingularCalibration("LU solve failed".into())
                })?;
                Ok(sol.as_slice().to_vec())
            }
            Calibration::Tensored(f) => {
                let inv = f
                    .iter()
                    .map(|m| {
                        check_invertible(m)?;
                        m.clone().try_inverse().ok_or_else(|| Error::SingularCalibration("2x2 factor".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::apply_factors(&inv, x))
            }
        }
    }

    /// Bound on the largest singular value squared, `‖C‖₁ ‖C‖_∞`.
    fn lipschitz(&self) -> f64 {
        let bound = |m: &DMatrix<f64>| {
            let col = m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            let row = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            col * row
        };
        match self {
            Calibration::Complete(m) => bound(m),
            Calibration::Tensored(f) => f.iter().map(bound).product(),
        }
    }
}

/// Calibration for the outcomes of `subset` only. Unmeasured qubits are
/// summed out of the reported index and averaged over their prepared values,
/// which keeps the result column-stochastic. Bit `k` of the reduced index is
/// qubit `subset[k]`.
pub fn reduce_calibration(cal: &Calibration, subset: &[usize]) -> Result<Calibration> {
    if subset.is_empty() {
        return Err(Error::invalid("empty measured subset"));
    }
    let n = cal.n_qubits();
    for (i, &q) in subset.iter().enumerate() {
        if q >= n {
            return Err(Error::QubitOutOfRange { qubit: q, n_qubits: n });
        }
        if subset[..i].contains(&q) {
            return Err(Error::RepeatedQubit(q));
        }
    }
    match cal {
        Calibration::Tensored(f) => Ok(Calibration::Tensored(subset.iter().map(|&q| f[q].clone()).collect())),
        Calibration::Complete(m) => {
            let d = 1usize << n;
            let k = subset.len();
            let project = |i: usize| subset.iter().enumerate().fold(0, |acc, (b, &q)| acc | (((i >> q) & 1) << b));
            let mut reduced = DMatrix::zeros(1 << k, 1 << k);
            for s in 0..d {
                for r in 0..d {
                    reduced[(project(r), project(s))] += m[(r, s)];
                }
            }
            reduced /= (1usize << (n - k)) as f64;
            Ok(Calibration::Complete(reduced))
        }
    }
}

/// Euclidean projection onto `{x ≥ 0, Σ x = total}`.
fn project_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Least-squares inversion of readout errors constrained to non-negative
/// quasi-counts with the raw total.
///
/// The direct solve `C⁻¹ raw` is returned when it is already feasible;
/// otherwise accelerated projected gradient on the simplex finishes the job.
pub fn mitigate_counts(raw: &[f64], cal: &Calibration) -> Result<Vec<f64>> {
    let d = 1usize << cal.n_qubits();
    if raw.len() != d {
        return Err(Error::invalid(format!("{} counts for a {}-qubit calibration", raw.len(), cal.n_qubits())));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Ok(raw.to_vec());
    }
    let direct = cal.solve(raw)?;
    let slack = 1e-12 * total;
    if direct.iter().all(|&x| x >= -slack) {
        return Ok(direct.into_iter().map(|x| x.max(0.0)).collect());
    }
    let step = 1.0 / cal.lipschitz();
    let grad = |x: &[f64]| {
        let r: Vec<f64> = cal.apply(x).iter().zip(raw).map(|(a, b)| a - b).collect();
        cal.apply_transpose(&r)
    };
    let mut x = project_simplex(&direct, total);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let g = grad(&y);
        let x_next = project_simplex(&y.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>(), total);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let beta = (t - 1.0) / t_next;
        y = x_next.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        let change: f64 = x_next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = x_next;
        t = t_next;
        if change < 1e-13 * total {
            break;
        }
    }
    Ok(x)
}

/// Total-variation distance between two histograms after normalization.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    0.5 * a.iter().zip(b).map(|(x, y)| (x / sa - y / sb).abs()).sum::<f64>()
}
