use std::path::Path;
use std::process::{Command, Output};

fn mipt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mipt")).args(args).env_remove("MIPT_WORKERS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SWEEP: &str = r#"
mode = "p-sweep"
L = [3]
p = [0.0, 0.5, 1.0]
trajectories = 20
saturation_ensemble = 50
bootstrap_resamples = 100
"#;

#[test]
fn selftest_passes() {
    let out = mipt(&["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    assert!(!text.contains("FAIL"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mipt(&["sweep", dir.path().join("missing.toml").to_str().unwrap()]).status.code(), Some(2));
    let broken = write(dir.path(), "broken.toml", "mode = \"p-sweep\"\nL = [3\n");
    assert_eq!(mipt(&["sweep", &broken]).status.code(), Some(2));
    let invalid = write(dir.path(), "invalid.toml", "mode = \"p-sweep\"\nL = [3]\np = [2.0]\n");
    let out = mipt(&["sweep", &invalid]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[0, 1]"));
}

#[test]
fn sweep_then_export_and_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let json = dir.path().join("r.json");
    let out = mipt(&["sweep", &cfg, "-o", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).lines().count(), 4);

    let csv = mipt(&["export", json.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(csv.status.code(), Some(0));
    let text = stdout(&csv);
    assert_eq!(text.lines().next().unwrap(), "L,p,eta,alpha,mean,variance,ci_low,ci_high,n");
    assert_eq!(text.lines().count(), 4);

    let copy = dir.path().join("copy.json");
    assert_eq!(mipt(&["export", json.to_str().unwrap(), "--format", "json", "-o", copy.to_str().unwrap()]).status.code(), Some(0));
    let a: String = std::fs::read_to_string(&json).unwrap();
    let b: String = std::fs::read_to_string(&copy).unwrap();
    assert_eq!(a, b);

    // Same seed twice gives the same numbers; another seed does not.
    let again = mipt(&["sweep", &cfg]);
    assert_eq!(stdout(&again), stdout(&out));
    let other = mipt(&["sweep", &cfg, "--seed", "99"]);
    assert_ne!(stdout(&other), stdout(&out));
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let one = mipt(&["--workers", "1", "sweep", &cfg]);
    let two = Command::new(env!("CARGO_BIN_EXE_mipt")).args(["sweep", &cfg]).env("MIPT_WORKERS", "2").output().unwrap();
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&two));
}

fn collapse_csv() -> String {
    let mut text = String::from("L,p,s_mean,s_err\n");
    for l in [5usize, 6, 7, 8] {
        for i in 0..=40 {
            let p = i as f64 * 0.0125;
            let lf = l as f64;
            let s = 1.0 - lf.powf(1.9 / 2.1) * ((p - 0.25) * lf.powf(1.0 / 2.1)).tanh();
            text.push_str(&format!("{l},{p},{s},0.01\n"));
        }
    }
    text
}

#[test]
fn collapse_fits_a_csv_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "d.csv", &collapse_csv());
    let rescaled = dir.path().join("rescaled.csv");
    let out = mipt(&["collapse", &input, "--p-star", "0.25", "--rescaled", rescaled.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for field in ["gamma0", "nu0", "d_gamma_plus", "d_gamma_minus", "d_nu_plus", "d_nu_minus", "loss_at_min", "p_star_used"] {
        assert!(text.contains(field), "{field} missing from {text}");
    }
    let table = std::fs::read_to_string(&rescaled).unwrap();
    assert_eq!(table.lines().count(), 1 + 4 * 41);
}

#[test]
fn collapse_rejects_a_single_size() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "one.csv", "L,p,s_mean,s_err\n5,0.1,1.0,\n5,0.2,0.8,\n5,0.3,0.6,\n5,0.4,0.5,\n");
    let out = mipt(&["collapse", &input, "--p-star", "0.25"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("two system sizes"));
}

#[test]
fn mubs_prints_and_caches() {
    let out = mipt(&["mubs", "--n", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 15);
    assert_eq!(text.lines().filter(|l| l.starts_with("4\t")).count(), 3);

    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("mubs3.tsv");
    let first = mipt(&["mubs", "--n", "3", "--cache", cache.to_str().unwrap()]);
    assert!(cache.exists());
    let second = mipt(&["mubs", "--n", "3", "--cache", cache.to_str().unwrap()]);
    assert_eq!(stdout(&first), stdout(&second));
    let wrong = mipt(&["mubs", "--n", "2", "--cache", cache.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(2));
}
