use mipt::circuit::{CircuitParams, MeasurementKind};
use mipt::entropy::{bootstrap_ci, ensemble_entropy, renyi_entropy, BootstrapSpec, SubsystemRule};
use mipt::qsim::{DensityMatrix, C64};
use mipt::rng::rng_from_seed;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// `G G† / Tr` for a complex Gaussian `G` of the given rank.
fn random_density(n: usize, rank: usize, seed: u64) -> DensityMatrix {
    let mut rng = rng_from_seed(seed);
    let d = 1 << n;
    let g = DMatrix::from_fn(d, rank, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(m / C64::new(tr, 0.0)).unwrap()
}

fn density_strategy() -> impl Strategy<Value = DensityMatrix> {
    (1usize..=3, 1usize..=8, any::<u64>()).prop_map(|(n, rank, seed)| random_density(n, rank.min(1 << n), seed))
}

const ORDERS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 64.0];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn renyi_entropy_is_non_increasing_in_order(rho in density_strategy()) {
        let s: Vec<f64> = ORDERS.iter().map(|&a| renyi_entropy(&rho, a).unwrap()).collect();
        for w in s.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{s:?}");
        }
        prop_assert!(renyi_entropy(&rho, f64::INFINITY).unwrap() <= s[4] + 1e-9);
    }

    #[test]
    fn renyi_entropy_is_additive_on_products(a in density_strategy(), b in density_strategy(), alpha in prop::sample::select(ORDERS.to_vec())) {
        let joint = renyi_entropy(&a.kron(&b), alpha).unwrap();
        let sum = renyi_entropy(&a, alpha).unwrap() + renyi_entropy(&b, alpha).unwrap();
        prop_assert!((joint - sum).abs() < 1e-9, "{joint} vs {sum}");
    }

    #[test]
    fn renyi_entropy_is_bounded_by_min_entropy(rho in density_strategy(), alpha in 1.01f64..20.0) {
        let s = renyi_entropy(&rho, alpha).unwrap();
        let s_inf = -rho.eigenvalues().into_iter().fold(0.0, f64::max).log2();
        prop_assert!(s <= alpha / (alpha - 1.0) * s_inf + 1e-9);
        prop_assert!(s >= s_inf - 1e-9);
    }

    #[test]
    fn estimate_brackets_its_mean(samples in prop::collection::vec(-5.0f64..5.0, 2..60), seed in any::<u64>()) {
        let boot = BootstrapSpec { level: 0.9, n_resamples: 200, seed };
        let e = mipt::entropy::EntropyEstimate::from_samples(1.0, &samples, boot).unwrap();
        prop_assert!(e.ci_low <= e.mean && e.mean <= e.ci_high);
        prop_assert!(e.variance >= 0.0);
    }
}

#[test]
fn bootstrap_interval_coverage() {
    let reps = 1000;
    let mut covered = 0;
    for r in 0..reps {
        let mut rng = rng_from_seed(10_000 + r);
        let xs: Vec<f64> = (0..400).map(|_| rng.sample(StandardNormal)).collect();
        let (lo, hi) = bootstrap_ci(&xs, 0.90, 1000, r).unwrap();
        covered += usize::from(lo <= 0.0 && 0.0 <= hi);
    }
    assert!(covered as f64 >= 0.85 * reps as f64, "coverage {covered}/{reps}");
}

#[test]
fn ensemble_mean_is_consistent_with_a_larger_run() {
    let params = CircuitParams { l: 4, t: 16, p: 0.1, eta: 1.0, kind: MeasurementKind::Projective };
    let boot = BootstrapSpec::default();
    let small = ensemble_entropy(params, SubsystemRule::Half, 1.0, 500, 1, boot).unwrap();
    let large = ensemble_entropy(params, SubsystemRule::Half, 1.0, 5000, 2, boot).unwrap();
    let (a, b) = (&small.estimate, &large.estimate);
    // 99% two-sided interval of the difference of means.
    let se = (a.variance / 500.0 + b.variance / 5000.0).sqrt();
    assert!((a.mean - b.mean).abs() < 2.576 * se, "{} vs {} (se {se})", a.mean, b.mean);
}

#[test]
fn quarter_rule_entropies_grow_in_volume_phase_only() {
    let boot = BootstrapSpec::default();
    let mean_at = |l: usize, p: f64| {
        let params = CircuitParams { l, t: 4 * l, p, eta: 1.0, kind: MeasurementKind::Projective };
        ensemble_entropy(params, SubsystemRule::QuarterInterpolated, 2.0, 200, l as u64, boot).unwrap().estimate.mean
    };
    let sizes = [6usize, 8, 10, 12];
    let volume: Vec<f64> = sizes.iter().map(|&l| mean_at(l, 0.1)).collect();
    let xs: Vec<f64> = sizes.iter().map(|&l| l as f64).collect();
    let (slope, r2) = linear_fit(&xs, &volume);
    assert!(slope > 0.1 && r2 > 0.9, "slope {slope}, R² {r2}");
    assert!(mean_at(12, 0.8) - mean_at(8, 0.8) < 0.2);
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxy / sxx, sxy * sxy / (sxx * syy))
}
