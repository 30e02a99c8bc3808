//! Finite-size-scaling data collapse.
//!
//! Near the critical rate the ensemble entropy is assumed to follow
//! `S(p, L) − S(p*, L) = L^{γ/ν} F((p − p*) L^{1/ν})`. Data at each size are
//! rescaled to `(q, W)`, interpolated, and the scatter between sizes is
//! minimized over `(γ, ν)`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of rates per size.
pub const MIN_POINTS_PER_SIZE: usize = 4;
/// Sizes used by default: the four largest present.
pub const DEFAULT_SIZE_COUNT: usize = 4;

const P_MATCH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapsePoint {
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub s_mean: f64,
    #[serde(default)]
    pub s_err: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseDataset {
    pub entries: Vec<CollapsePoint>,
    pub p_star: f64,
    pub alpha: f64,
}

impl CollapseDataset {
    pub fn new(entries: Vec<CollapsePoint>, p_star: f64, alpha: f64) -> Result<Self> {
        let ds = Self { entries, p_star, alpha };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_star) {
            return Err(Error::Collapse(format!("p* = {} outside [0, 1]", self.p_star)));
        }
        for e in &self.entries {
            if !(0.0..=1.0).contains(&e.p) || !e.s_mean.is_finite() {
                return Err(Error::Collapse(format!("bad entry L={} p={} S={}", e.l, e.p, e.s_mean)));
            }
        }
        let by_size = self.by_size();
        if by_size.len() < 2 {
            return Err(Error::Collapse(format!(
                "collapse needs at least two system sizes, found {}",
                by_size.len()
            )));
        }
        for (l, pts) in &by_size {
            if pts.len() < MIN_POINTS_PER_SIZE {
                return Err(Error::Collapse(format!(
                    "L = {l} has {} rates, need at least {MIN_POINTS_PER_SIZE}",
                    pts.len()
                )));
            }
            if pts.windows(2).any(|w| (w[1].0 - w[0].0).abs() < P_MATCH_TOL) {
                return Err(Error::Collapse(format!("L = {l} has a repeated rate")));
            }
        }
        Ok(())
    }

    /// `(p, S)` per size, sorted by `p`.
    pub fn by_size(&self) -> BTreeMap<usize, Vec<(f64, f64)>> {
        let mut map: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for e in &self.entries {
            map.entry(e.l).or_default().push((e.p, e.s_mean));
        }
        for v in map.values_mut() {
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        }
        map
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.by_size().into_keys().collect()
    }

    /// Keep only the listed sizes.
    pub fn restrict(&self, sizes: &[usize]) -> Result<Self> {
        let entries = self.entries.iter().filter(|e| sizes.contains(&e.l)).copied().collect();
        Self::new(entries, self.p_star, self.alpha)
    }

    /// Keep the `k` largest sizes.
    pub fn largest(&self, k: usize) -> Result<Self> {
        let sizes = self.sizes();
        let keep = &sizes[sizes.len().saturating_sub(k)..];
        self.restrict(keep)
    }

    /// Three-point moving average of `S` along `p` within each size.
    /// End points are left unchanged.
    pub fn smoothed(&self) -> Self {
        let mut entries = Vec::with_capacity(self.entries.len());
        for (l, pts) in self.by_size() {
            for (i, &(p, s)) in pts.iter().enumerate() {
                let s = if i == 0 || i + 1 == pts.len() { s } else { (pts[i - 1].1 + s + pts[i + 1].1) / 3.0 };
                entries.push(CollapsePoint { l, p, s_mean: s, s_err: None });
            }
        }
        Self { entries, p_star: self.p_star, alpha: self.alpha }
    }

    /// Read `L,p,s_mean,s_err` rows (header required, `s_err` may be empty).
    pub fn read_csv<R: Read>(reader: R, p_star: f64, alpha: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::invalid(e.to_string()))?.clone();
        for col in ["L", "p", "s_mean"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::invalid(format!("collapse table lacks column {col:?}")));
            }
        }
        let entries = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<CollapsePoint>, _>>()
            .map_err(|e| Error::invalid(e.to_string()))?;
        Self::new(entries, p_star, alpha)
    }

    pub fn load_csv(path: &Path, p_star: f64, alpha: f64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, p_star, alpha).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::parse(path, m),
            other => other,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["L", "p", "s_mean", "s_err"]).map_err(|e| Error::invalid(e.to_string()))?;
        for e in &self.entries {
            let err = e.s_err.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([e.l.to_string(), e.p.to_string(), e.s_mean.to_string(), err])
                .map_err(|e| Error::invalid(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::invalid(e.to_string()))
    }
}

/// Rescaled data of one size, sorted by `q`.
#[derive(Clone, Debug, PartialEq)]
pub struct RescaledCurve {
    pub l: usize,
    pub points: Vec<(f64, f64)>,
}

/// `S(p*)` from a sample at `p*` or linear interpolation between the two
/// neighbouring rates.
fn entropy_at(pts: &[(f64, f64)], p_star: f64, l: usize) -> Result<f64> {
    if let Some(&(_, s)) = pts.iter().find(|(p, _)| (p - p_star).abs() < P_MATCH_TOL) {
        return Ok(s);
    }
    let (lo, hi) = (pts[0].0, pts[pts.len() - 1].0);
    if p_star < lo || p_star > hi {
        return Err(Error::Collapse(format!("p* = {p_star} outside the sampled range [{lo}, {hi}] of L = {l}")));
    }
    let k = pts.iter().position(|(p, _)| *p > p_star).expect("p* inside the span");
    let ((p0, s0), (p1, s1)) = (pts[k - 1], pts[k]);
    Ok(s0 + (s1 - s0) * (p_star - p0) / (p1 - p0))
}

/// `q = (p − p*) L^{1/ν}`, `W = (S − S(p*)) L^{−γ/ν}` for every size.
pub fn rescale(dataset: &CollapseDataset, gamma: f64, nu: f64) -> Result<Vec<RescaledCurve>> {
    if !(nu > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("bad exponents gamma={gamma} nu={nu}")));
    }
    dataset
        .by_size()
        .into_iter()
        .map(|(l, pts)| {
            let s_star = entropy_at(&pts, dataset.p_star, l)?;
            let lf = l as f64;
            let (qs, ws) = (lf.powf(1.0 / nu), lf.powf(-gamma / nu));
            let points = pts.iter().map(|&(p, s)| ((p - dataset.p_star) * qs, (s - s_star) * ws)).collect();
            Ok(RescaledCurve { l, points })
        })
        .collect()
}

/// Piecewise-linear interpolant that refuses to extrapolate.
#[derive(Clone, Debug)]
pub struct Interpolant {
    q: Vec<f64>,
    w: Vec<f64>,
}

impl Interpolant {
    pub fn new(points: &[(f64, f64)]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("interpolation needs at least two points"));
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("interpolation knots must be distinct"));
        }
        Ok(Self { q: pts.iter().map(|p| p.0).collect(), w: pts.iter().map(|p| p.1).collect() })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.q[0], self.q[self.q.len() - 1])
    }

    pub fn eval(&self, q: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&q) {
            return Err(Error::invalid(format!("q = {q} outside [{lo}, {hi}]")));
        }
        match self.q.binary_search_by(|k| k.total_cmp(&q)) {
            Ok(i) => Ok(self.w[i]),
            Err(i) => {
                let (q0, q1, w0, w1) = (self.q[i - 1], self.q[i], self.w[i - 1], self.w[i]);
                Ok(w0 + (w1 - w0) * (q - q0) / (q1 - q0))
            }
        }
    }
}

fn loss_from_curves(curves: &[RescaledCurve], gamma: f64, nu: f64) -> Result<f64> {
    let interps = curves.iter().map(|c| Interpolant::new(&c.points)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    let mut any_overlap = false;
    for (i, (curve, f)) in curves.iter().zip(&interps).enumerate() {
        let (lo, hi) = f.domain();
        let mut inner = 0.0;
        for (j, other) in curves.iter().enumerate() {
            if i == j {
                continue;
            }
            for &(q, w) in &other.points {
                if q >= lo && q <= hi {
                    any_overlap = true;
                    let r = f.eval(q)? - w;
                    inner += r * r;
                }
            }
        }
        total += (curve.l as f64).powf(2.0 * gamma / nu) * inner;
    }
    if !any_overlap {
        return Err(Error::Collapse("rescaled q ranges of different sizes do not overlap".into()));
    }
    Ok(total)
}

/// Scatter `R(γ, ν)`: for every ordered pair of distinct sizes `(L, L')`, the
/// squared gaps between `f_L` and the data of `L'` inside the span of `L`,
/// weighted by `L^{2γ/ν}`.
pub fn collapse_loss(dataset: &CollapseDataset, gamma: f64, nu: f64) -> Result<f64> {
    loss_from_curves(&rescale(dataset, gamma, nu)?, gamma, nu)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min: 0.25, max: 4.0, step: 0.05 }
    }
}

impl GridSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.max > self.min && self.min > 0.0) {
            return Err(Error::invalid(format!("bad grid {self:?}")));
        }
        let n = ((self.max - self.min) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentSpec {
    /// Central-difference step.
    pub fd_step: f64,
    pub max_iter: usize,
}

impl Default for DescentSpec {
    fn default() -> Self {
        Self { fd_step: 1e-3, max_iter: 500 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub gamma_grid: GridSpec,
    pub nu_grid: GridSpec,
    pub descent: DescentSpec,
    pub epsilon: f64,
    /// Sizes to use; `None` takes the largest [`DEFAULT_SIZE_COUNT`].
    pub sizes: Option<Vec<usize>>,
    /// Three-point moving average before rescaling.
    pub smooth: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            gamma_grid: GridSpec::default(),
            nu_grid: GridSpec::default(),
            descent: DescentSpec::default(),
            epsilon: 0.01,
            sizes: None,
            smooth: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub gamma0: f64,
    pub nu0: f64,
    pub d_gamma_plus: f64,
    pub d_gamma_minus: f64,
    pub d_nu_plus: f64,
    pub d_nu_minus: f64,
    pub loss_at_min: f64,
    pub p_star_used: f64,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub options: FitOptions,
}

impl CollapseFit {
    /// `max(δγ⁺, δγ⁻)`.
    pub fn d_gamma(&self) -> f64 {
        self.d_gamma_plus.max(self.d_gamma_minus)
    }

    /// `max(δν⁺, δν⁻)`.
    pub fn d_nu(&self) -> f64 {
        self.d_nu_plus.max(self.d_nu_minus)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::invalid(e.to_string()))
    }
}

/// Loss that treats a rejected evaluation as infinitely bad, so descent and
/// error probes never leave the valid region.
fn loss_or_inf(ds: &CollapseDataset, gamma: f64, nu: f64) -> f64 {
    collapse_loss(ds, gamma, nu).unwrap_or(f64::INFINITY)
}

/// `ε x₀ [2 ln(R(x₀ ± ε x₀)/R₀)]^{−1/2}`, or `fallback` where the log-ratio
/// is not positive.
fn width(eps_x: f64, r_shift: f64, r0: f64, fallback: f64) -> f64 {
    if r0 > 0.0 && r_shift > r0 && r_shift.is_finite() {
        eps_x / (2.0 * (r_shift / r0).ln()).sqrt()
    } else {
        fallback
    }
}

/// Grid search over `(γ, ν)` followed by central-difference gradient descent
/// with backtracking, then log-ratio error widths.
pub fn fit_exponents(dataset: &CollapseDataset, opts: &FitOptions) -> Result<CollapseFit> {
    dataset.validate()?;
    let ds = match &opts.sizes {
        Some(sizes) => dataset.restrict(sizes)?,
        None => dataset.largest(DEFAULT_SIZE_COUNT)?,
    };
    let ds = if opts.smooth { ds.smoothed() } else { ds };
    let gammas = opts.gamma_grid.values()?;
    let nus = opts.nu_grid.values()?;

    let cells: Vec<(usize, usize)> = (0..gammas.len()).flat_map(|i| (0..nus.len()).map(move |j| (i, j))).collect();
    let losses: Vec<f64> = cells.par_iter().map(|&(i, j)| loss_or_inf(&ds, gammas[i], nus[j])).collect();
    // First minimum in (γ, ν) order for determinism.
    let (best, r_grid) = losses
        .iter()
        .enumerate()
        .fold((usize::MAX, f64::INFINITY), |acc, (k, &r)| if r < acc.1 { (k, r) } else { acc });
    if !r_grid.is_finite() {
        return Err(Error::Collapse("loss undefined everywhere on the grid".into()));
    }
    let (bi, bj) = cells[best];
    if bi == 0 || bi + 1 == gammas.len() || bj == 0 || bj + 1 == nus.len() {
        return Err(Error::Collapse(format!(
            "grid minimum at the boundary (gamma = {}, nu = {}); widen the search grid",
            gammas[bi], nus[bj]
        )));
    }

    let (g_lo, g_hi) = (opts.gamma_grid.min, opts.gamma_grid.max);
    let (n_lo, n_hi) = (opts.nu_grid.min, opts.nu_grid.max);
    let mut x = [gammas[bi], nus[bj]];
    let mut r = r_grid;
    let h = opts.descent.fd_step;
    let mut step = opts.gamma_grid.step.max(opts.nu_grid.step);
    for _ in 0..opts.descent.max_iter {
        if r == 0.0 {
            break;
        }
        let grad = [
            (loss_or_inf(&ds, x[0] + h, x[1]) - loss_or_inf(&ds, x[0] - h, x[1])) / (2.0 * h),
            (loss_or_inf(&ds, x[0], x[1] + h) - loss_or_inf(&ds, x[0], x[1] - h)) / (2.0 * h),
        ];
        let norm = grad[0].hypot(grad[1]);
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        let mut moved = false;
        while step > 1e-9 {
            let cand = [
                (x[0] - step * grad[0] / norm).clamp(g_lo, g_hi),
                (x[1] - step * grad[1] / norm).clamp(n_lo, n_hi),
            ];
            let rc = loss_or_inf(&ds, cand[0], cand[1]);
            if rc < r {
                x = cand;
                r = rc;
                moved = true;
                step *= 1.5;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }

    let [g0, nu0] = x;
    let eps = opts.epsilon;
    let fb_g = opts.gamma_grid.step;
    let fb_n = opts.nu_grid.step;
    Ok(CollapseFit {
        gamma0: g0,
        nu0,
        d_gamma_plus: width(eps * g0, loss_or_inf(&ds, g0 + eps * g0, nu0), r, fb_g),
        d_gamma_minus: width(eps * g0, loss_or_inf(&ds, g0 - eps * g0, nu0), r, fb_g),
        d_nu_plus: width(eps * nu0, loss_or_inf(&ds, g0, nu0 + eps * nu0), r, fb_n),
        d_nu_minus: width(eps * nu0, loss_or_inf(&ds, g0, nu0 - eps * nu0), r, fb_n),
        loss_at_min: r,
        p_star_used: ds.p_star,
        alpha: ds.alpha,
        sizes: ds.sizes(),
        options: opts.clone(),
    })
}

/// Rows `(L, p, q, W)` of the rescaled data for plotting.
pub fn rescaled_table(dataset: &CollapseDataset, gamma: f64, nu: f64) -> Result<Vec<(usize, f64, f64, f64)>> {
    let curves = rescale(dataset, gamma, nu)?;
    let by_size = dataset.by_size();
    Ok(curves
        .iter()
        .flat_map(|c| {
            let ps = &by_size[&c.l];
            c.points.iter().zip(ps).map(move |(&(q, w), &(p, _))| (c.l, p, q, w))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(l: usize, p: f64, s: f64) -> CollapsePoint {
        CollapsePoint { l, p, s_mean: s, s_err: None }
    }

    /// `S = S* + L^{γ/ν} F((p − p*) L^{1/ν})`.
    fn synthetic(sizes: &[usize], ps: &[f64], gamma: f64, nu: f64, f: impl Fn(f64) -> f64) -> CollapseDataset {
        let p_star = 0.25;
        let entries = sizes
            .iter()
            .flat_map(|&l| {
                let lf = l as f64;
                ps.iter().map(move |&p| (l, p, lf))
            })
            .map(|(l, p, lf)| point(l, p, 1.0 + lf.powf(gamma / nu) * f((p - p_star) * lf.powf(1.0 / nu))))
            .collect();
        CollapseDataset { entries, p_star, alpha: 1.0 }
    }

    #[test]
    fn unit_scaling_is_a_shift() {
        let ds = CollapseDataset {
            entries: vec![point(1, 0.0, 0.5), point(1, 0.25, 0.3), point(1, 0.5, 0.1)],
            p_star: 0.25,
            alpha: 1.0,
        };
        let c = rescale(&ds, 1.7, 1.0).unwrap();
        assert_eq!(c[0].points, vec![(-0.25, 0.2), (0.0, 0.0), (0.25, -0.19999999999999998)]);
    }

    #[test]
    fn p_star_outside_span() {
        let ds = CollapseDataset {
            entries: vec![point(4, 0.3, 0.5), point(4, 0.4, 0.3)],
            p_star: 0.25,
            alpha: 1.0,
        };
        assert!(matches!(rescale(&ds, 1.0, 1.0), Err(Error::Collapse(_))));
    }

    #[test]
    fn interpolant_basics() {
        let f = Interpolant::new(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(f.eval(0.5).unwrap(), 0.5);
        assert_eq!(f.eval(1.0).unwrap(), 1.0);
        assert!(f.eval(1.0 + 1e-9).is_err());
        assert!(Interpolant::new(&[(0.0, 0.0)]).is_err());
        assert!(Interpolant::new(&[(0.0, 0.0), (0.0, 1.0)]).is_err());
    }

    #[test]
    fn perfect_collapse_of_linear_form() {
        let ps: Vec<f64> = (0..=10).map(|i| i as f64 * 0.05).collect();
        let ds = synthetic(&[5, 6, 7, 8], &ps, 1.9, 2.1, |q| -0.8 * q);
        assert!(collapse_loss(&ds, 1.9, 2.1).unwrap() < 1e-10);
        assert!(collapse_loss(&ds, 2.4, 2.1).unwrap() > 1e-6);
    }

    #[test]
    fn validation() {
        let ds = synthetic(&[5], &[0.0, 0.1, 0.2, 0.3, 0.4], 1.0, 1.0, |q| q);
        assert!(ds.validate().is_err());
        assert!(fit_exponents(&ds, &FitOptions::default()).is_err());
        let ds = synthetic(&[5, 6], &[0.0, 0.2, 0.4], 1.0, 1.0, |q| q);
        assert!(ds.validate().is_err());
        assert!(synthetic(&[5, 6], &[0.0, 0.2, 0.4, 0.6], 1.0, 1.0, |q| q).validate().is_ok());
    }

    #[test]
    fn recovers_tanh_exponents() {
        let ps: Vec<f64> = (0..=40).map(|i| i as f64 * 0.0125).collect();
        let ds = synthetic(&[5, 6, 7, 8], &ps, 1.9, 2.1, |q| -q.tanh());
        let fit = fit_exponents(&ds, &FitOptions::default()).unwrap();
        assert!((fit.gamma0 - 1.9).abs() < 0.05, "{fit:?}");
        assert!((fit.nu0 - 2.1).abs() < 0.05, "{fit:?}");
        assert!(fit.d_gamma() > 0.0 && fit.d_nu() > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let ds = synthetic(&[3, 4], &[0.0, 0.2, 0.4, 0.6], 1.0, 1.0, |q| q);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = CollapseDataset::read_csv(buf.as_slice(), 0.25, 1.0).unwrap();
        assert_eq!(back, ds);
        assert!(CollapseDataset::read_csv("p,s_mean\n0.1,0.2\n".as_bytes(), 0.25, 1.0).is_err());
    }
}
