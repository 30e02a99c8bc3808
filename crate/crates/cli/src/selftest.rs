//! Fast oracle checks, one line per check.

use mipt::circuit::{run_trajectory, sample_circuit, CircuitParams, MeasurementKind};
use mipt::criticality::{fit_exponents, CollapseDataset, CollapsePoint, FitOptions};
use mipt::entropy::renyi_entropy;
use mipt::mitigation::{calibration_matrix, mitigate_counts, CalibrationMode, ReadoutNoiseModel};
use mipt::qsim::{DensityMatrix, StateVector, C64};
use mipt::rng::rng_from_seed;
use mipt::tomography::{basis_probabilities, enumerate_mubs, expectations_from_counts, measurement_settings, reconstruct};
use mipt::{Error, Result};

type Check = fn() -> std::result::Result<(), String>;

fn mub_partitions() -> std::result::Result<(), String> {
    for n in 1..=4 {
        let p = enumerate_mubs(n).map_err(|e| e.to_string())?;
        p.validate().map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn bell_entropy() -> std::result::Result<(), String> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let bell = StateVector::from_amplitudes(vec![C64::new(h, 0.0), z, z, C64::new(h, 0.0)]).map_err(|e| e.to_string())?;
    let s = renyi_entropy(&bell.reduced_density_matrix(&[0]).map_err(|e| e.to_string())?, 1.0)
        .map_err(|e| e.to_string())?;
    if (s - 1.0).abs() > 1e-12 {
        return Err(format!("S1 = {s}"));
    }
    Ok(())
}

fn tomography_round_trip() -> std::result::Result<(), String> {
    let mut rng = rng_from_seed(11);
    let psi = StateVector::random(3, &mut rng);
    let rho = DensityMatrix::pure(&psi);
    let settings = measurement_settings(3).map_err(|e| e.to_string())?;
    let mut all = Vec::new();
    for b in settings.iter() {
        all.push(expectations_from_counts(&basis_probabilities(&rho, b), b).map_err(|e| e.to_string())?);
    }
    let est = reconstruct(3, &mipt::tomography::merge_expectations(&all)).map_err(|e| e.to_string())?;
    let f = est.fidelity_with_pure(&psi);
    if 1.0 - f > 1e-8 {
        return Err(format!("fidelity {f}"));
    }
    Ok(())
}

fn weak_equals_projective_at_full_strength() -> std::result::Result<(), String> {
    let proj = CircuitParams { l: 4, t: 6, p: 0.5, eta: 1.0, kind: MeasurementKind::Projective };
    let weak = CircuitParams { kind: MeasurementKind::Weak, ..proj };
    for seed in 0..20 {
        let a = run_trajectory(&sample_circuit(proj, seed).map_err(|e| e.to_string())?, seed + 100)
            .map_err(|e| e.to_string())?;
        let b = run_trajectory(&sample_circuit(weak, seed).map_err(|e| e.to_string())?, seed + 100)
            .map_err(|e| e.to_string())?;
        if a.measurement_outcomes != b.measurement_outcomes {
            return Err(format!("outcomes differ at seed {seed}"));
        }
        let overlap = a.final_state.inner(&b.final_state).norm();
        if (overlap - 1.0).abs() > 1e-10 {
            return Err(format!("states differ at seed {seed}: |<a|b>| = {overlap}"));
        }
    }
    Ok(())
}

fn readout_inversion() -> std::result::Result<(), String> {
    let model = ReadoutNoiseModel::new(vec![0.05, 0.08], vec![0.03, 0.1]).map_err(|e| e.to_string())?;
    let cal = calibration_matrix(&model, CalibrationMode::Complete).map_err(|e| e.to_string())?;
    let ideal = [0.4, 0.1, 0.2, 0.3];
    let back = mitigate_counts(&cal.apply(&ideal), &cal).map_err(|e| e.to_string())?;
    let gap = back.iter().zip(ideal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if gap > 1e-10 {
        return Err(format!("max deviation {gap:.3e}"));
    }
    Ok(())
}

fn collapse_recovery() -> std::result::Result<(), String> {
    let (gamma, nu, p_star) = (1.9, 2.1, 0.25);
    let entries = [5usize, 6, 7, 8]
        .iter()
        .flat_map(|&l| {
            (0..=40).map(move |i| {
                let p = i as f64 * 0.0125;
                let lf = l as f64;
                let s = 1.0 - lf.powf(gamma / nu) * ((p - p_star) * lf.powf(1.0 / nu)).tanh();
                CollapsePoint { l, p, s_mean: s, s_err: None }
            })
        })
        .collect();
    let ds = CollapseDataset::new(entries, p_star, 1.0).map_err(|e| e.to_string())?;
    let fit = fit_exponents(&ds, &FitOptions::default()).map_err(|e| e.to_string())?;
    if (fit.gamma0 - gamma).abs() > 0.05 || (fit.nu0 - nu).abs() > 0.05 {
        return Err(format!("gamma = {:.3}, nu = {:.3}", fit.gamma0, fit.nu0));
    }
    Ok(())
}

pub fn run() -> Result<()> {
    let checks: [(&str, Check); 6] = [
        ("entropy: Bell pair half is one bit", bell_entropy),
        ("tomography: MUB partitions n = 1..4 validate", mub_partitions),
        ("tomography: exact-probability round trip n = 3", tomography_round_trip),
        ("circuit: weak at eta = 1 equals projective", weak_equals_projective_at_full_strength),
        ("mitigation: readout inversion is exact", readout_inversion),
        ("criticality: tanh collapse recovers exponents", collapse_recovery),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(Error::Diagnostic(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
