use mipt::mitigation::{
    apply_readout_noise, calibration_matrix, circuit_error, mitigate_counts, reduce_calibration,
    residual_entropy_correct, select_qubits, total_variation, Calibration, CalibrationMode, DeviceModel, ErrorRates,
    GateCounts, Layout, ReadoutNoiseModel,
};
use mipt::rng::rng_from_seed;
use mipt::tomography::sample_counts;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    DMatrix::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

/// Exact 4×4 transition matrix of two independent flip channels; entry
/// `(reported, prepared)`, qubit 0 the low bit.
fn two_qubit_oracle(p01: [f64; 2], p10: [f64; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(4, 4, |r, s| {
        (0..2)
            .map(|q| {
                let (sb, rb) = ((s >> q) & 1, (r >> q) & 1);
                let flip = if sb == 0 { p01[q] } else { p10[q] };
                if sb == rb {
                    1.0 - flip
                } else {
                    flip
                }
            })
            .product()
    })
}

#[test]
fn joint_flip_statistics_match_tensor_product() {
    let (p01, p10) = ([0.02, 0.07], [0.05, 0.11]);
    let model = ReadoutNoiseModel::new(p01.to_vec(), p10.to_vec()).unwrap();
    let oracle = two_qubit_oracle(p01, p10);
    let Calibration::Complete(m) = calibration_matrix(&model, CalibrationMode::Complete).unwrap() else {
        panic!("expected a complete calibration");
    };
    assert!((m - &oracle).abs().max() < 1e-15);

    let shots = 200_000u64;
    let mut rng = rng_from_seed(17);
    for s in 0..4 {
        let mut prepared = vec![0u64; 4];
        prepared[s] = shots;
        let noisy = apply_readout_noise(&prepared, &model, &mut rng).unwrap();
        for r in 0..4 {
            let p = oracle[(r, s)];
            let sigma = (p * (1.0 - p) * shots as f64).sqrt().max(1.0);
            assert!((noisy[r] as f64 - p * shots as f64).abs() < 5.0 * sigma, "prepared {s}, read {r}");
        }
    }
}

#[test]
fn tensored_factors_rebuild_the_complete_matrix() {
    let model = ReadoutNoiseModel::new(vec![0.01, 0.04, 0.08], vec![0.03, 0.02, 0.09]).unwrap();
    let tensored = calibration_matrix(&model, CalibrationMode::Tensored).unwrap();
    let Calibration::Tensored(f) = &tensored else { panic!("expected factors") };
    let want = kron(&kron(&f[2], &f[1]), &f[0]);
    let complete = calibration_matrix(&model, CalibrationMode::Complete).unwrap().to_dense();
    assert!((tensored.to_dense() - &want).abs().max() < 1e-15);
    assert!((complete - want).abs().max() < 1e-15);
}

#[test]
fn correlated_reduction_matches_index_summation() {
    // Column-stochastic with correlations that no tensor product reproduces.
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        0.90, 0.05, 0.04, 0.02,
        0.04, 0.85, 0.01, 0.06,
        0.05, 0.02, 0.88, 0.07,
        0.01, 0.08, 0.07, 0.85,
    ]);
    let reduced = reduce_calibration(&Calibration::Complete(m.clone()), &[1]).unwrap().to_dense();
    for r1 in 0..2 {
        for s1 in 0..2 {
            let mut sum = 0.0;
            for r0 in 0..2 {
                for s0 in 0..2 {
                    sum += m[((r1 << 1) | r0, (s1 << 1) | s0)];
                }
            }
            assert!((reduced[(r1, s1)] - sum / 2.0).abs() < 1e-15);
        }
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let t: f64 = v.iter().sum();
    v.iter().map(|x| x / t).collect()
}

#[test]
fn bell_state_readout_correction() {
    let ideal = [0.5, 0.0, 0.0, 0.5];
    let model = ReadoutNoiseModel::symmetric(&[0.05, 0.05]).unwrap();
    let cal = calibration_matrix(&model, CalibrationMode::Complete).unwrap();
    let mut rng = rng_from_seed(23);
    let raw = apply_readout_noise(&sample_counts(&ideal, 100_000, &mut rng), &model, &mut rng).unwrap();
    let raw: Vec<f64> = raw.into_iter().map(|c| c as f64).collect();
    let fixed = mitigate_counts(&raw, &cal).unwrap();
    assert!(fixed.iter().all(|&x| x >= 0.0));
    assert!(total_variation(&normalized(&fixed), &ideal) < 0.02);
    assert!(total_variation(&normalized(&raw), &ideal) > 0.04);
}

#[test]
fn readout_round_trip_at_a_million_shots() {
    let mut rng = rng_from_seed(29);
    for mode in [CalibrationMode::Complete, CalibrationMode::Tensored] {
        let n = 3;
        let p01: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
        let p10: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.1)).collect();
        let model = ReadoutNoiseModel::new(p01, p10).unwrap();
        let cal = calibration_matrix(&model, mode).unwrap();
        let ideal = normalized(&(0..1 << n).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
        let raw = apply_readout_noise(&sample_counts(&ideal, 1_000_000, &mut rng), &model, &mut rng).unwrap();
        let fixed = mitigate_counts(&raw.into_iter().map(|c| c as f64).collect::<Vec<_>>(), &cal).unwrap();
        assert!(total_variation(&normalized(&fixed), &ideal) < 0.01);
    }
}

#[test]
fn circuit_error_hand_example() {
    let counts = GateCounts { n1q: vec![10, 0], n2q: vec![4, 4], nro: vec![2, 8] };
    let e = circuit_error(&counts, ErrorRates::SMALL_DEVICE);
    assert!((e - 0.056).abs() < 1e-15);
    assert_eq!(ErrorRates::SMALL_DEVICE.ero, 5e-3);
    assert_eq!(ErrorRates::LARGE_DEVICE.ero, 8e-2);
}

/// Every ordered simple path of `len` nodes.
fn all_paths(device: &DeviceModel, len: usize) -> Vec<Vec<usize>> {
    let adj = device.adjacency();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..device.n_qubits()).map(|q| vec![q]).collect();
    while let Some(path) = stack.pop() {
        if path.len() == len {
            out.push(path);
            continue;
        }
        for &next in &adj[*path.last().unwrap()] {
            if !path.contains(&next) {
                let mut p = path.clone();
                p.push(next);
                stack.push(p);
            }
        }
    }
    out
}

fn site_cost(device: &DeviceModel, mean: &(Vec<f64>, Vec<f64>, Vec<f64>), j: usize, q: usize) -> f64 {
    let r = device.rates[q];
    r.e1q * mean.0[j] + r.e2q * mean.1[j] + r.ero * mean.2[j]
}

fn brute_force_chain_cost(device: &DeviceModel, counts: &[GateCounts], len: usize) -> Option<f64> {
    let mean = GateCounts::mean(counts).unwrap();
    all_paths(device, len)
        .iter()
        .map(|path| path.iter().enumerate().map(|(j, &q)| site_cost(device, &mean, j, q)).sum::<f64>())
        .min_by(f64::total_cmp)
}

fn brute_force_ancilla_cost(device: &DeviceModel, counts: &[GateCounts], len: usize) -> Option<f64> {
    let mean = GateCounts::mean(counts).unwrap();
    let adj = device.adjacency();
    let mut best: Option<f64> = None;
    for path in all_paths(device, len) {
        let base: f64 = path.iter().enumerate().map(|(j, &q)| site_cost(device, &mean, j, q)).sum();
        // Every assignment of distinct off-chain neighbours.
        fn assign(
            j: usize,
            path: &[usize],
            used: &mut Vec<usize>,
            cost: f64,
            ctx: (&DeviceModel, &(Vec<f64>, Vec<f64>, Vec<f64>), &[std::collections::BTreeSet<usize>]),
            best: &mut Option<f64>,
        ) {
            if j == path.len() {
                *best = Some(best.map_or(cost, |b| b.min(cost)));
                return;
            }
            for &a in &ctx.2[path[j]] {
                if path.contains(&a) || used.contains(&a) {
                    continue;
                }
                used.push(a);
                let c = site_cost(ctx.0, ctx.1, path.len() + j, a);
                assign(j + 1, path, used, cost + c, ctx, best);
                used.pop();
            }
        }
        assign(0, &path, &mut Vec::new(), base, (device, &mean, &adj), &mut best);
    }
    best
}

fn sample_counts_for(width: usize, seed: u64) -> Vec<GateCounts> {
    let mut rng = rng_from_seed(seed);
    (0..3)
        .map(|_| GateCounts {
            n1q: (0..width).map(|_| rng.random_range(0..20)).collect(),
            n2q: (0..width).map(|_| rng.random_range(0..20)).collect(),
            nro: (0..width).map(|_| rng.random_range(0..10)).collect(),
        })
        .collect()
}

#[test]
fn selection_avoids_a_noisy_qubit_on_a_path() {
    let mut rates = vec![ErrorRates::SMALL_DEVICE; 7];
    rates[3].e2q *= 10.0;
    let edges: Vec<(usize, usize)> = (0..6).map(|i| (i, i + 1)).collect();
    let device = DeviceModel::new(rates, edges).unwrap();
    let counts = sample_counts_for(3, 1);
    let sel = select_qubits(&device, &counts, 3, Layout::Chain).unwrap();
    assert!(!sel.chain.contains(&3), "{:?}", sel.chain);
    let oracle = brute_force_chain_cost(&device, &counts, 3).unwrap();
    assert!((sel.cost - oracle).abs() < 1e-12);
}

fn device_strategy() -> impl Strategy<Value = DeviceModel> {
    (3usize..=8, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = rng_from_seed(seed);
        let rates = (0..n)
            .map(|_| ErrorRates {
                e1q: rng.random_range(1e-4..1e-3),
                e2q: rng.random_range(1e-3..1e-2),
                ero: rng.random_range(1e-3..1e-1),
            })
            .collect();
        // A spanning path plus random chords keeps the graph connected.
        let mut edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        for a in 0..n {
            for b in a + 2..n {
                if rng.random_bool(0.3) {
                    edges.push((a, b));
                }
            }
        }
        DeviceModel::new(rates, edges).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_selection_is_optimal(device in device_strategy(), len in 1usize..=4, seed in any::<u64>()) {
        let counts = sample_counts_for(len, seed);
        let oracle = brute_force_chain_cost(&device, &counts, len);
        match select_qubits(&device, &counts, len, Layout::Chain) {
            Ok(sel) => prop_assert!((sel.cost - oracle.unwrap()).abs() < 1e-12),
            Err(_) => prop_assert!(oracle.is_none()),
        }
    }

    #[test]
    fn ancilla_selection_is_optimal(device in device_strategy(), len in 1usize..=3, seed in any::<u64>()) {
        let counts = sample_counts_for(2 * len, seed);
        let oracle = brute_force_ancilla_cost(&device, &counts, len);
        match select_qubits(&device, &counts, len, Layout::ChainWithAncillas) {
            Ok(sel) => {
                prop_assert!((sel.cost - oracle.unwrap()).abs() < 1e-12);
                let mut all: Vec<usize> = sel.chain.iter().chain(&sel.ancillas).copied().collect();
                all.sort_unstable();
                all.dedup();
                prop_assert_eq!(all.len(), 2 * len);
            }
            Err(_) => prop_assert!(oracle.is_none()),
        }
    }

    #[test]
    fn circuit_error_is_monotone(
        base in prop::collection::vec((0u64..50, 0u64..50, 0u64..10), 1..6),
        which in 0usize..3,
        site in any::<prop::sample::Index>(),
        bump in 1u64..20,
        rate_bump in 0.0f64..1e-2,
    ) {
        let counts = GateCounts {
            n1q: base.iter().map(|c| c.0).collect(),
            n2q: base.iter().map(|c| c.1).collect(),
            nro: base.iter().map(|c| c.2).collect(),
        };
        let rates = ErrorRates::SMALL_DEVICE;
        let e0 = circuit_error(&counts, rates);
        let mut more = counts.clone();
        let j = site.index(base.len());
        match which {
            0 => more.n1q[j] += bump,
            1 => more.n2q[j] += bump,
            _ => more.nro[j] += bump,
        }
        prop_assert!(circuit_error(&more, rates) >= e0);
        for k in 0..3 {
            let mut r = rates;
            match k {
                0 => r.e1q += rate_bump,
                1 => r.e2q += rate_bump,
                _ => r.ero += rate_bump,
            }
            prop_assert!(circuit_error(&counts, r) >= e0);
        }
    }

    #[test]
    fn linear_inflation_is_removed_exactly(
        s0 in 0.0f64..3.0,
        slope in 0.0f64..5.0,
        e in 0.0f64..0.5,
        e_ref in 1e-3f64..0.5,
    ) {
        // Noiseless reference entropy is zero; all of it is noise.
        let s = s0 + slope * e;
        let s_ref = slope * e_ref;
        let corrected = residual_entropy_correct(s, s_ref, e / e_ref).unwrap();
        prop_assert!((corrected - s0).abs() < 1e-12);
    }
}
