//! Synthetic device graphs, per-qubit gate counts, circuit-error estimates
//! and error-aware qubit selection.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, MeasurementKind};
use crate::error::{Error, Result};

/// Scalar gate and readout error rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e1q: f64,
    pub e2q: f64,
    pub ero: f64,
}

impl ErrorRates {
    /// Typical rates of the small (7-qubit) device family.
    pub const SMALL_DEVICE: ErrorRates = ErrorRates { e1q: 3e-4, e2q: 4e-3, ero: 5e-3 };
    /// Typical rates of the large device family, dominated by readout.
    pub const LARGE_DEVICE: ErrorRates = ErrorRates { e1q: 3e-4, e2q: 4e-3, ero: 8e-2 };

    pub fn validate(&self) -> Result<()> {
        if [self.e1q, self.e2q, self.ero].iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::invalid(format!("error rates must be non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Per-qubit single-qubit gate, CX and measurement counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub n1q: Vec<u64>,
    pub n2q: Vec<u64>,
    pub nro: Vec<u64>,
}

impl GateCounts {
    pub fn zeros(n: usize) -> Self {
        Self { n1q: vec![0; n], n2q: vec![0; n], nro: vec![0; n] }
    }

    pub fn n_qubits(&self) -> usize {
        self.n1q.len()
    }

    /// Counts for one sampled circuit followed by a tomography tail on
    /// `subsystem` (one basis rotation and one readout per qubit).
    ///
    /// Each brickwork gate is two single-qubit unitaries and one CX. In weak
    /// mode qubit `L + j` is the ancilla of site `j`; each weak measurement
    /// costs one CX, two rotations and a conditional reset on the ancilla
    /// plus its readout.
    pub fn from_circuit(circuit: &CircuitSpec, subsystem: &[usize]) -> Result<Self> {
        let l = circuit.l();
        let weak = circuit.params.kind == MeasurementKind::Weak;
        let mut c = Self::zeros(if weak { 2 * l } else { l });
        for step in &circuit.layers {
            for g in step.layer_a.iter().chain(&step.layer_b) {
                for q in [g.low, g.high()] {
                    c.n1q[q] += 1;
                    c.n2q[q] += 1;
                }
            }
            for &q in &step.measured {
                if weak {
                    let a = l + q;
                    c.n2q[q] += 1;
                    c.n2q[a] += 1;
                    c.n1q[a] += 3;
                    c.nro[a] += 1;
                } else {
                    c.nro[q] += 1;
                }
            }
        }
        for &q in subsystem {
            if q >= l {
                return Err(Error::QubitOutOfRange { qubit: q, n_qubits: l });
            }
            c.n1q[q] += 1;
            c.nro[q] += 1;
        }
        Ok(c)
    }

    /// Element-wise mean over an ensemble (all members the same width).
    pub fn mean(ensemble: &[GateCounts]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let first = ensemble.first().ok_or_else(|| Error::invalid("empty gate-count ensemble"))?;
        let n = first.n_qubits();
        if ensemble.iter().any(|g| g.n_qubits() != n || g.n2q.len() != n || g.nro.len() != n) {
            return Err(Error::invalid("gate-count ensemble has inconsistent widths"));
        }
        let avg = |f: fn(&GateCounts) -> &Vec<u64>| -> Vec<f64> {
            (0..n).map(|j| ensemble.iter().map(|g| f(g)[j] as f64).sum::<f64>() / ensemble.len() as f64).collect()
        };
        Ok((avg(|g| &g.n1q), avg(|g| &g.n2q), avg(|g| &g.nro)))
    }
}

/// `E[C] ≈ max_j (ε1q N1q_j + ε2q N2q_j + εro Nro_j)`.
pub fn circuit_error(counts: &GateCounts, rates: ErrorRates) -> f64 {
    (0..counts.n_qubits())
        .map(|j| rates.e1q * counts.n1q[j] as f64 + rates.e2q * counts.n2q[j] as f64 + rates.ero * counts.nro[j] as f64)
        .fold(0.0, f64::max)
}

/// Connectivity graph with per-qubit error rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub rates: Vec<ErrorRates>,
    pub edges: Vec<(usize, usize)>,
}

impl DeviceModel {
    pub fn new(rates: Vec<ErrorRates>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = rates.len();
        for r in &rates {
            r.validate()?;
        }
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::QubitOutOfRange { qubit: a.max(b), n_qubits: n });
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on qubit {a}")));
            }
        }
        Ok(Self { rates, edges })
    }

    pub fn uniform(n: usize, rates: ErrorRates, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(vec![rates; n], edges)
    }

    /// Path graph `0 − 1 − … − (n−1)`.
    pub fn line(n: usize, rates: ErrorRates) -> Result<Self> {
        Self::uniform(n, rates, (1..n).map(|i| (i - 1, i)).collect())
    }

    /// Two rails of `len` qubits (`0..len` and `len..2len`) joined by rungs.
    pub fn ladder(len: usize, rates: ErrorRates) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..len {
            edges.push((i, len + i));
            if i + 1 < len {
                edges.push((i, i + 1));
                edges.push((len + i, len + i + 1));
            }
        }
        Self::uniform(2 * len, rates, edges)
    }

    pub fn n_qubits(&self) -> usize {
        self.rates.len()
    }

    pub fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n_qubits()];
        for &(a, b) in &self.edges {
            adj[a].insert(b);
            adj[b].insert(a);
        }
        adj
    }

    /// Rates averaged over `qubits`, used where a single scalar set is needed.
    pub fn mean_rates(&self, qubits: &[usize]) -> ErrorRates {
        let k = qubits.len().max(1) as f64;
        let sum = |f: fn(&ErrorRates) -> f64| qubits.iter().map(|&q| f(&self.rates[q])).sum::<f64>() / k;
        ErrorRates { e1q: sum(|r| r.e1q), e2q: sum(|r| r.e2q), ero: sum(|r| r.ero) }
    }

    /// Text form, one record per line:
    ///
    /// ```text
    /// # comment
    /// qubit <id> <e1q> <e2q> <ero>
    /// edge <a> <b>
    /// ```
    ///
    /// Qubit ids must cover `0..n` exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rates: Vec<Option<ErrorRates>> = Vec::new();
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| Error::invalid(format!("device line {}: {m}", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["qubit", id, e1, e2, ero] => {
                    let id: usize = id.parse().map_err(|_| err("bad qubit id"))?;
                    let num = |s: &str| s.parse::<f64>().map_err(|_| err("bad rate"));
                    if id >= rates.len() {
                        rates.resize(id + 1, None);
                    }
                    if rates[id].is_some() {
                        return Err(err("qubit listed twice"));
                    }
                    rates[id] = Some(ErrorRates { e1q: num(e1)?, e2q: num(e2)?, ero: num(ero)? });
                }
                ["edge", a, b] => {
                    let a: usize = a.parse().map_err(|_| err("bad edge endpoint"))?;
                    let b: usize = b.parse().map_err(|_| err("bad edge endpoint"))?;
                    edges.push((a, b));
                }
                _ => return Err(err("expected `qubit <id> <e1q> <e2q> <ero>` or `edge <a> <b>`")),
            }
        }
        let rates = rates
            .into_iter()
            .enumerate()
            .map(|(i, r)| r.ok_or_else(|| Error::invalid(format!("qubit {i} missing from device file"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rates, edges)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, r) in self.rates.iter().enumerate() {
            let _ = writeln!(out, "qubit {i} {} {} {}", r.e1q, r.e2q, r.ero);
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "edge {a} {b}");
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    Chain,
    /// Chain plus one distinct neighbouring ancilla per system qubit.
    ChainWithAncillas,
}

/// Physical qubits chosen for a logical circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitSelection {
    /// `chain[j]` hosts logical site `j`.
    pub chain: Vec<usize>,
    /// `ancillas[j]` hosts the ancilla of site `j` (empty for [`Layout::Chain`]).
    pub ancillas: Vec<usize>,
    /// Mean summed error `Σ_j ε·N̄` over the ensemble.
    pub cost: f64,
}

struct Selector<'a> {
    adj: Vec<BTreeSet<usize>>,
    /// `site_cost[j][q]`: mean error of logical qubit `j` placed on physical `q`.
    site_cost: Vec<Vec<f64>>,
    l: usize,
    layout: Layout,
    device: &'a DeviceModel,
    best: Option<QubitSelection>,
}

const COST_TOL: f64 = 1e-12;

impl Selector<'_> {
    fn better(&self, cost: f64) -> bool {
        self.best.as_ref().is_none_or(|b| cost < b.cost - COST_TOL)
    }

    /// Costs are non-negative, so a partial layout already above the best
    /// complete one cannot win.
    fn pruned(&self, cost: f64) -> bool {
        self.best.as_ref().is_some_and(|b| cost > b.cost + COST_TOL)
    }

    fn extend_chain(&mut self, chain: &mut Vec<usize>, cost: f64) {
        if self.pruned(cost) {
            return;
        }
        if chain.len() == self.l {
            match self.layout {
                Layout::Chain => {
                    if self.better(cost) {
                        self.best = Some(QubitSelection { chain: chain.clone(), ancillas: Vec::new(), cost });
                    }
                }
                Layout::ChainWithAncillas => {
                    let mut anc = Vec::with_capacity(self.l);
                    self.attach(chain, &mut anc, cost);
                }
            }
            return;
        }
        let candidates: Vec<usize> = match chain.last() {
            None => (0..self.device.n_qubits()).collect(),
            Some(&tail) => self.adj[tail].iter().copied().collect(),
        };
        let j = chain.len();
        for q in candidates {
            if chain.contains(&q) {
                continue;
            }
            chain.push(q);
            self.extend_chain(chain, cost + self.site_cost[j][q]);
            chain.pop();
        }
    }

    fn attach(&mut self, chain: &[usize], anc: &mut Vec<usize>, cost: f64) {
        if self.pruned(cost) {
            return;
        }
        let j = anc.len();
        if j == self.l {
            if self.better(cost) {
                self.best = Some(QubitSelection { chain: chain.to_vec(), ancillas: anc.clone(), cost });
            }
            return;
        }
        let site = chain[j];
        let options: Vec<usize> =
            self.adj[site].iter().copied().filter(|q| !chain.contains(q) && !anc.contains(q)).collect();
        for a in options {
            anc.push(a);
            self.attach(chain, anc, cost + self.site_cost[self.l + j][a]);
            anc.pop();
        }
    }
}

/// Exhaustive search for the placement minimizing the mean summed error.
///
/// `circuits` are logical gate counts; their width must be `l_needed`
/// ([`Layout::Chain`]) or `2 * l_needed` with ancillas last
/// ([`Layout::ChainWithAncillas`]). Chains are simple paths in the device
/// graph. Ties go to the lexicographically smallest `(chain, ancillas)`.
pub fn select_qubits(
    device: &DeviceModel,
    circuits: &[GateCounts],
    l_needed: usize,
    layout: Layout,
) -> Result<QubitSelection> {
    if l_needed == 0 {
        return Err(Error::invalid("need at least one qubit"));
    }
    let width = match layout {
        Layout::Chain => l_needed,
        Layout::ChainWithAncillas => 2 * l_needed,
    };
    let (n1, n2, nr) = GateCounts::mean(circuits)?;
    if n1.len() != width {
        return Err(Error::invalid(format!("gate counts cover {} qubits, layout needs {width}", n1.len())));
    }
    let site_cost = (0..width)
        .map(|j| device.rates.iter().map(|r| r.e1q * n1[j] + r.e2q * n2[j] + r.ero * nr[j]).collect())
        .collect();
    let mut sel = Selector { adj: device.adjacency(), site_cost, l: l_needed, layout, device, best: None };
    sel.extend_chain(&mut Vec::with_capacity(l_needed), 0.0);
    sel.best.ok_or_else(|| {
        Error::NoFeasibleLayout(format!(
            "{}-qubit {:?} layout does not fit a {}-qubit device",
            l_needed,
            layout,
            device.n_qubits()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(rows: &[(u64, u64, u64)]) -> GateCounts {
        GateCounts {
            n1q: rows.iter().map(|r| r.0).collect(),
            n2q: rows.iter().map(|r| r.1).collect(),
            nro: rows.iter().map(|r| r.2).collect(),
        }
    }

    #[test]
    fn circuit_error_examples() {
        let r = ErrorRates::SMALL_DEVICE;
        assert_eq!(circuit_error(&counts(&[(0, 0, 1)]), r), 5e-3);
        let e = circuit_error(&counts(&[(10, 4, 2), (0, 4, 8)]), r);
        assert!((e - 0.056).abs() < 1e-15);
    }

    #[test]
    fn device_text_round_trip() {
        let d = DeviceModel::ladder(3, ErrorRates::SMALL_DEVICE).unwrap();
        let back = DeviceModel::parse(&d.to_text()).unwrap();
        assert_eq!(d, back);
        assert!(DeviceModel::parse("qubit 1 0 0 0\n").is_err());
        assert!(DeviceModel::parse("qubit 0 0 0 0\nedge 0 3\n").is_err());
        assert!(DeviceModel::parse("qubit 0 -1 0 0\n").is_err());
        let d = DeviceModel::parse("# two qubits\nqubit 0 1e-4 2e-3 1e-2\nqubit 1 1e-4 2e-3 1e-2 # tail\nedge 0 1\n")
            .unwrap();
        assert_eq!(d.edges, vec![(0, 1)]);
    }

    #[test]
    fn uniform_line_picks_smallest_chain() {
        let d = DeviceModel::line(5, ErrorRates::SMALL_DEVICE).unwrap();
        let c = counts(&[(3, 2, 1), (3, 2, 1), (3, 2, 1)]);
        let s = select_qubits(&d, &[c], 3, Layout::Chain).unwrap();
        assert_eq!(s.chain, vec![0, 1, 2]);
    }

    #[test]
    fn ladder_ancillas_are_distinct_neighbours() {
        let d = DeviceModel::ladder(3, ErrorRates::SMALL_DEVICE).unwrap();
        let c = counts(&[(3, 2, 0), (3, 2, 0), (3, 2, 0), (3, 1, 1), (3, 1, 1), (3, 1, 1)]);
        let s = select_qubits(&d, &[c], 3, Layout::ChainWithAncillas).unwrap();
        let adj = d.adjacency();
        let mut all: Vec<usize> = s.chain.iter().chain(&s.ancillas).copied().collect();
        for (q, a) in s.chain.iter().zip(&s.ancillas) {
            assert!(adj[*q].contains(a));
        }
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
    }

    #[test]
    fn infeasible_layout() {
        let d = DeviceModel::line(3, ErrorRates::SMALL_DEVICE).unwrap();
        let c = counts(&[(1, 1, 1); 4]);
        assert!(matches!(select_qubits(&d, &[c], 4, Layout::Chain), Err(Error::NoFeasibleLayout(_))));
        let c = counts(&[(1, 1, 1); 4]);
        assert!(select_qubits(&d, &[c], 2, Layout::ChainWithAncillas).is_err());
    }
}
