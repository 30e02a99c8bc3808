use mipt::criticality::{
    collapse_loss, fit_exponents, rescale, CollapseDataset, CollapsePoint, FitOptions, GridSpec, Interpolant,
};
use mipt::rng::rng_from_seed;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn point(l: usize, p: f64, s: f64) -> CollapsePoint {
    CollapsePoint { l, p, s_mean: s, s_err: None }
}

/// Built directly so that three points per size are allowed.
fn handmade() -> CollapseDataset {
    CollapseDataset {
        entries: vec![
            point(2, 0.25, 1.0),
            point(2, 0.5, 0.6),
            point(2, 0.75, 0.4),
            point(4, 0.4, 1.4),
            point(4, 0.5, 1.0),
            point(4, 0.6, 0.8),
        ],
        p_star: 0.5,
        alpha: 1.0,
    }
}

#[test]
fn loss_matches_hand_evaluation() {
    // γ = ν = 1: curve 2 is (−0.5, 0.2), (0, 0), (0.5, −0.1); curve 4 is
    // (−0.4, 0.1), (0, 0), (0.4, −0.05). Against f_2 the three points of
    // size 4 leave residuals 0.06, 0, −0.03, weighted by 2²; against f_4
    // only q = 0 of size 2 lies inside, with residual 0.
    let r = collapse_loss(&handmade(), 1.0, 1.0).unwrap();
    assert!((r - 4.0 * (0.06f64.powi(2) + 0.03f64.powi(2))).abs() < 1e-12, "{r}");
    // γ = 2: W picks up another 1/L, residuals 0.055 and −0.0275, weight 2⁴.
    let r = collapse_loss(&handmade(), 2.0, 1.0).unwrap();
    assert!((r - 16.0 * (0.055f64.powi(2) + 0.0275f64.powi(2))).abs() < 1e-12, "{r}");
}

#[test]
fn shared_scaling_form_collapses() {
    let p_star = 0.3;
    let entries: Vec<CollapsePoint> = [4usize, 9]
        .iter()
        .flat_map(|&l| {
            (0..=10).map(move |i| {
                let p = 0.1 * i as f64 * 0.6;
                let lf = l as f64;
                // W = |q| at γ = ν = 1.
                point(l, p, lf * (lf * (p - p_star)).abs())
            })
        })
        .collect();
    let ds = CollapseDataset::new(entries, p_star, 1.0).unwrap();
    for curve in rescale(&ds, 1.0, 1.0).unwrap() {
        for (q, w) in curve.points {
            assert!((w - q.abs()).abs() < 1e-12);
        }
    }
    assert!(collapse_loss(&ds, 1.0, 1.0).unwrap() < 1e-20);
    assert!(collapse_loss(&ds, 1.5, 1.0).unwrap() > 0.0);
}

#[test]
fn interpolation_error_within_second_order_bound() {
    let dq = 0.05;
    let knots: Vec<(f64, f64)> = (0..=62).map(|i| (i as f64 * dq, (i as f64 * dq).sin())).collect();
    let f = Interpolant::new(&knots).unwrap();
    let (lo, hi) = f.domain();
    let bound = dq * dq / 8.0;
    let mut worst: f64 = 0.0;
    for k in 0..=10_000 {
        let q = lo + (hi - lo) * k as f64 / 10_000.0;
        worst = worst.max((f.eval(q).unwrap() - q.sin()).abs());
    }
    assert!(worst < bound, "{worst} vs {bound}");
    assert!(f.eval(hi + 1e-9).is_err());
}

/// `S = S* + L^{γ/ν} tanh(q)` sampled on a common grid.
fn forward(gamma: f64, nu: f64, p_star: f64, sizes: &[usize], noise: &[f64]) -> CollapseDataset {
    let mut k = 0;
    let mut entries = Vec::new();
    for &l in sizes {
        for i in 0..=40 {
            let p = i as f64 * 0.0125;
            let lf = l as f64;
            let s = 1.0 + lf.powf(gamma / nu) * ((p - p_star) * lf.powf(1.0 / nu)).tanh();
            entries.push(point(l, p, s + noise.get(k).copied().unwrap_or(0.0)));
            k += 1;
        }
    }
    CollapseDataset::new(entries, p_star, 1.0).unwrap()
}

#[test]
fn noiseless_forward_data_recovers_exponents() {
    let fit = fit_exponents(&forward(1.9, 2.1, 0.25, &[5, 6, 7, 8], &[]), &FitOptions::default()).unwrap();
    assert!((fit.gamma0 - 1.9).abs() < 0.05 && (fit.nu0 - 2.1).abs() < 0.05, "{fit:?}");
    assert!(fit.loss_at_min >= 0.0);
    assert!(fit.d_gamma() > 0.0 && fit.d_nu() > 0.0);
}

#[test]
fn default_sizes_are_the_four_largest() {
    let fit = fit_exponents(&forward(1.5, 1.8, 0.25, &[3, 4, 5, 6, 7, 8], &[]), &FitOptions::default()).unwrap();
    assert_eq!(fit.sizes, vec![5, 6, 7, 8]);
}

fn small_dataset() -> impl Strategy<Value = CollapseDataset> {
    (prop::collection::vec(-1.0f64..1.0, 24), 0.2f64..0.3).prop_map(|(noise, p_star)| {
        let mut entries = Vec::new();
        for (s, &l) in [4usize, 6, 8].iter().enumerate() {
            for i in 0..8 {
                let p = i as f64 / 14.0;
                entries.push(point(l, p, (l as f64) * (1.0 - p) + 0.1 * noise[s * 8 + i]));
            }
        }
        CollapseDataset::new(entries, p_star, 1.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn loss_is_non_negative(ds in small_dataset(), gamma in 0.25f64..4.0, nu in 0.25f64..4.0) {
        prop_assert!(collapse_loss(&ds, gamma, nu).unwrap() >= 0.0);
    }

    #[test]
    fn loss_ignores_entry_order(ds in small_dataset(), gamma in 0.25f64..4.0, nu in 0.25f64..4.0, seed in any::<u64>()) {
        let mut shuffled = ds.clone();
        shuffled.entries.shuffle(&mut rng_from_seed(seed));
        let a = collapse_loss(&ds, gamma, nu).unwrap();
        let b = collapse_loss(&shuffled, gamma, nu).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn loss_scales_quadratically_with_entropy(ds in small_dataset(), c in 0.1f64..10.0, gamma in 0.25f64..4.0, nu in 0.25f64..4.0) {
        let mut scaled = ds.clone();
        scaled.entries.iter_mut().for_each(|e| e.s_mean *= c);
        let a = collapse_loss(&ds, gamma, nu).unwrap();
        let b = collapse_loss(&scaled, gamma, nu).unwrap();
        prop_assert!((b - c * c * a).abs() <= 1e-9 * b.abs().max(1e-300));
    }
}

#[test]
fn argmin_is_invariant_under_entropy_scaling() {
    let coarse = GridSpec { min: 0.25, max: 4.0, step: 0.25 };
    let opts = FitOptions { gamma_grid: coarse, nu_grid: coarse, ..FitOptions::default() };
    let base = forward(1.2, 1.6, 0.25, &[5, 6, 7, 8], &[]);
    let noise: Vec<f64> = {
        use rand_distr::{Distribution, Normal};
        let d = Normal::new(0.0, 0.05).unwrap();
        let mut rng = rng_from_seed(4);
        (0..base.entries.len()).map(|_| d.sample(&mut rng)).collect()
    };
    let noisy = forward(1.2, 1.6, 0.25, &[5, 6, 7, 8], &noise);
    let reference = fit_exponents(&noisy, &opts).unwrap();
    for c in [0.5, 3.0] {
        let mut scaled = noisy.clone();
        scaled.entries.iter_mut().for_each(|e| e.s_mean *= c);
        let fit = fit_exponents(&scaled, &opts).unwrap();
        assert!((fit.gamma0 - reference.gamma0).abs() < 1e-6, "{c}: {} vs {}", fit.gamma0, reference.gamma0);
        assert!((fit.nu0 - reference.nu0).abs() < 1e-6, "{c}: {} vs {}", fit.nu0, reference.nu0);
    }
}

#[test]
fn single_size_is_rejected() {
    let entries = (0..6).map(|i| point(5, i as f64 * 0.1, 1.0 - i as f64 * 0.1)).collect();
    assert!(CollapseDataset::new(entries, 0.25, 1.0).is_err());
}
