//! Partition of the non-trivial Pauli strings into mutually unbiased bases.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use super::pauli::{Pauli, PauliString};
use crate::error::{Error, Result};

/// Largest register accepted by [`enumerate_mubs`].
pub const MAX_MUB_QUBITS: usize = 5;

/// `2^n + 1` disjoint commuting groups of `2^n − 1` strings each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MubPartition {
    pub n: usize,
    pub groups: Vec<Vec<PauliString>>,
    /// Group measurable without entangling gates (letters drawn from a
    /// single `{I, P}` per group).
    pub separable_flags: Vec<bool>,
}

fn qubitwise_family(n: usize, p: Pauli) -> Vec<PauliString> {
    PauliString::all_nontrivial(n).into_iter().filter(|s| s.is_qubitwise_family(p)).collect()
}

fn is_separable_group(group: &[PauliString]) -> bool {
    // A product eigenbasis needs a single non-identity letter per qubit.
    let n = group.first().map(|s| s.n()).unwrap_or(0);
    (0..n).all(|q| {
        let letters: HashSet<Pauli> = group.iter().map(|s| s.letter(q)).filter(|&l| l != Pauli::I).collect();
        letters.len() <= 1
    })
}

/// Symmetric `n × n` matrix over GF(2); `cols[i]` is column `i` as a bitmask.
#[derive(Clone)]
struct SymMatrix {
    cols: Vec<u64>,
}

impl SymMatrix {
    fn apply(&self, x: u64) -> u64 {
        self.cols.iter().enumerate().filter(|(i, _)| x >> i & 1 == 1).fold(0, |acc, (_, c)| acc ^ c)
    }

    fn plus(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { cols: self.cols.iter().zip(&other.cols).map(|(a, b)| a ^ b).collect() }
    }

    fn invertible(&self) -> bool {
        // Gaussian elimination on the columns, indexed by leading bit.
        let mut pivots = [0u64; 64];
        'cols: for &c in &self.cols {
            let mut v = c;
            while v != 0 {
                let top = 63 - v.leading_zeros() as usize;
                if pivots[top] == 0 {
                    pivots[top] = v;
                    continue 'cols;
                }
                v ^= pivots[top];
            }
            return false;
        }
        true
    }

    /// The commuting group `{(x, Mx) : x ≠ 0}`, sorted.
    fn group(&self, n: usize) -> Vec<PauliString> {
        let mut g: Vec<PauliString> = (1..1u64 << n).map(|x| PauliString::from_xz(n, x, self.apply(x))).collect();
        g.sort();
        g
    }
}

struct Search {
    n: usize,
    /// Candidate matrices, ordered by their sorted group words.
    cands: Vec<SymMatrix>,
    groups: Vec<Vec<PauliString>>,
}

impl Search {
    /// Pick `needed` more matrices from `live` (indices into `cands`) with
    /// pairwise invertible differences, covering `uncovered`.
    fn solve(&mut self, live: &[usize], uncovered: &mut Vec<bool>, needed: usize) -> bool {
        if needed == 0 {
            return true;
        }
        if live.len() < needed {
            return false;
        }
        let n = self.n;
        // Every uncovered string must still be reachable by a live candidate.
        let mut reachable = vec![false; uncovered.len()];
        for &ci in live {
            for x in 1..1u64 << n {
                reachable[string_index(n, x, self.cands[ci].apply(x))] = true;
            }
        }
        if uncovered.iter().zip(&reachable).any(|(&u, &r)| u && !r) {
            return false;
        }
        let Some(seed) = (0..uncovered.len()).find(|&i| uncovered[i]) else {
            return false;
        };
        let (sx, sz) = index_xz(n, seed);
        let options: Vec<usize> = live.iter().copied().filter(|&ci| self.cands[ci].apply(sx) == sz).collect();
        for ci in options {
            let m = self.cands[ci].clone();
            let next: Vec<usize> =
                live.iter().copied().filter(|&cj| cj != ci && m.plus(&self.cands[cj]).invertible()).collect();
            let covered: Vec<usize> = (1..1u64 << n).map(|x| string_index(n, x, m.apply(x))).collect();
            for &i in &covered {
                uncovered[i] = false;
            }
            self.groups.push(m.group(n));
            if self.solve(&next, uncovered, needed - 1) {
                return true;
            }
            self.groups.pop();
            for &i in &covered {
                uncovered[i] = true;
            }
        }
        false
    }
}

/// Index of the string with symplectic parts `(x, z)`, `x ≠ 0`, in a dense
/// table of `(2^n − 1) · 2^n` slots.
fn string_index(n: usize, x: u64, z: u64) -> usize {
    ((x - 1) << n | z) as usize
}

fn index_xz(n: usize, i: usize) -> (u64, u64) {
    ((i >> n) as u64 + 1, (i & ((1 << n) - 1)) as u64)
}

/// Exhaustive clique-cover search for a MUB partition of the `n`-qubit Pauli
/// strings.
///
/// The three qubit-wise families `{I,X}^n`, `{I,Y}^n`, `{I,Z}^n` are fixed
/// first. Any group disjoint from the Z family contains exactly one string
/// for each X part, so it is the graph `{(x, Mx)}` of a symmetric GF(2)
/// matrix; the X and Y families are `M = 0` and `M = 1`, and two groups are
/// disjoint iff the difference of their matrices is invertible. The search
/// seeds each new group with the smallest uncovered string, tries the
/// compatible groups in word order, and prunes as soon as the live
/// candidates are too few or leave some string uncoverable. The output is
/// deterministic.
pub fn enumerate_mubs(n: usize) -> Result<MubPartition> {
    if !(1..=MAX_MUB_QUBITS).contains(&n) {
        return Err(Error::invalid(format!("MUB enumeration supports 1 <= n <= {MAX_MUB_QUBITS}, got {n}")));
    }
    let mut groups: Vec<Vec<PauliString>> =
        [Pauli::X, Pauli::Y, Pauli::Z].into_iter().map(|p| qubitwise_family(n, p)).collect();

    let zero = SymMatrix { cols: vec![0; n] };
    let one = SymMatrix { cols: (0..n).map(|i| 1 << i).collect() };
    // Free entries: the upper triangle including the diagonal.
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut cands: Vec<(Vec<PauliString>, SymMatrix)> = (0..1u64 << slots.len())
        .map(|bits| {
            let mut cols = vec![0u64; n];
            for (k, &(i, j)) in slots.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    cols[i] |= 1 << j;
                    cols[j] |= 1 << i;
                }
            }
            SymMatrix { cols }
        })
        .filter(|m| m.plus(&zero).invertible() && m.plus(&one).invertible())
        .map(|m| (m.group(n), m))
        .collect();
    cands.sort_by(|a, b| a.0.cmp(&b.0));

    let mut uncovered = vec![false; ((1 << n) - 1) << n];
    for x in 1..1u64 << n {
        for z in 0..1u64 << n {
            uncovered[string_index(n, x, z)] = z != 0 && z != x;
        }
    }
    let mut search = Search { n, cands: cands.into_iter().map(|c| c.1).collect(), groups: Vec::new() };
    let live: Vec<usize> = (0..search.cands.len()).collect();
    if !search.solve(&live, &mut uncovered, (1 << n) - 2) {
        return Err(Error::NoPartition(n));
    }
    groups.extend(search.groups);
    let separable_flags = groups.iter().map(|g| is_separable_group(g)).collect();
    let part = MubPartition { n, groups, separable_flags };
    part.validate()?;
    Ok(part)
}

impl MubPartition {
    /// Count, cover, disjointness and commutation checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let bad = |m: String| Err(Error::invalid(format!("invalid MUB partition: {m}")));
        if self.groups.len() != (1 << n) + 1 {
            return bad(format!("{} groups, expected {}", self.groups.len(), (1 << n) + 1));
        }
        let mut seen = HashSet::new();
        for (gi, g) in self.groups.iter().enumerate() {
            if g.len() != (1 << n) - 1 {
                return bad(format!("group {gi} has {} strings", g.len()));
            }
            for (i, a) in g.iter().enumerate() {
                if a.n() != n || a.is_identity() {
                    return bad(format!("bad string {a} in group {gi}"));
                }
                if !seen.insert(*a) {
                    return bad(format!("string {a} appears twice"));
                }
                for b in &g[i + 1..] {
                    if !a.commutes_with(b) {
                        return Err(Error::NonCommuting(a.to_string(), b.to_string()));
                    }
                }
            }
        }
        if seen.len() != (1 << (2 * n)) - 1 {
            return bad(format!("covers {} strings", seen.len()));
        }
        if self.separable_flags.iter().filter(|&&f| f).count() < 3 {
            return bad("fewer than three separable groups".into());
        }
        Ok(())
    }

    /// One line per string: `group_index<TAB>word`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (gi, g) in self.groups.iter().enumerate() {
            for s in g {
                let _ = writeln!(out, "{gi}\t{s}");
            }
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self> {
        let mut groups: Vec<Vec<PauliString>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(gi), Some(word), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::invalid(format!("line {}: expected two tab-separated columns", lineno + 1)));
            };
            let gi: usize =
                gi.parse().map_err(|_| Error::invalid(format!("line {}: bad group index", lineno + 1)))?;
            let s: PauliString = word.parse()?;
            if gi >= groups.len() {
                groups.resize(gi + 1, Vec::new());
            }
            groups[gi].push(s);
        }
        let n = groups.first().and_then(|g| g.first()).map(|s| s.n()).unwrap_or(0);
        let separable_flags = groups.iter().map(|g| is_separable_group(g)).collect();
        let part = MubPartition { n, groups, separable_flags };
        part.validate()?;
        Ok(part)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_table()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_table(&text)
    }
}

/// The `3^n` product settings `{X, Y, Z}^n`, each given as its single-qubit
/// letters (`letters[q]` on qubit `q`).
pub fn ssqst_settings(n: usize) -> Vec<Vec<Pauli>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<Pauli>| {
                [Pauli::X, Pauli::Y, Pauli::Z].into_iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    // Order by word (qubit n−1 first) for readability.
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Commuting group measured by a product setting: every non-identity string
/// whose letter on qubit `q` is `I` or `letters[q]`.
pub fn setting_group(letters: &[Pauli]) -> Vec<PauliString> {
    let n = letters.len();
    (1u64..1 << n)
        .map(|mask| {
            let word: Vec<Pauli> =
                (0..n).map(|q| if mask >> q & 1 == 1 { letters[q] } else { Pauli::I }).collect();
            PauliString::from_letters(&word)
        })
        .collect()
}
