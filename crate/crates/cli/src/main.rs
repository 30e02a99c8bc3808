use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mipt::criticality::{CollapseDataset, FitOptions};
use mipt::pipeline::{analyze_collapse, run_sweep, write_rescaled_csv, ExperimentConfig, ExportFormat, SweepResult};
use mipt::tomography::{enumerate_mubs, MubPartition};
use mipt::Error;

mod selftest;

/// Exit status for configuration and input errors.
const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical and diagnostic failures.
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "mipt", version, about = "Monitored random circuit simulations and entanglement-transition analysis")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "MIPT_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Sweep {
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full result as JSON.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit critical exponents by data collapse.
    Collapse {
        /// CSV with columns L,p,s_mean,s_err, or a sweep result (.json).
        input: PathBuf,
        #[arg(long)]
        p_star: f64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
        /// Entropy order recorded with a CSV dataset.
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Sizes to include (default: the four largest).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Three-point moving average before fitting.
        #[arg(long)]
        smooth: bool,
        /// Write the fit record as JSON here instead of stdout.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Write the rescaled (L, p, q, W) table here.
        #[arg(long)]
        rescaled: Option<PathBuf>,
    },
    /// Convert a JSON sweep result to CSV or JSON.
    Export {
        result: PathBuf,
        #[arg(long, value_parser = ["csv", "json"])]
        format: String,
        /// Output file (default stdout).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Print the MUB partition of the n-qubit Pauli strings.
    Mubs {
        #[arg(long)]
        n: usize,
        /// Cache file: loaded if present, written otherwise.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run quick oracle checks of every module.
    Selftest,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::InvalidArgument(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

fn output(path: Option<&Path>) -> mipt::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::Io { path: p.into(), source: e })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_text(path: Option<&Path>, text: &str) -> mipt::Result<()> {
    let mut w = output(path)?;
    let io_err = |e| Error::Io { path: path.map_or_else(|| "<stdout>".into(), Path::to_path_buf), source: e };
    w.write_all(text.as_bytes()).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn print_summary(result: &SweepResult) {
    println!("{:>3} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>5}", "L", "p", "eta", "mean", "var", "ci_low", "ci_high", "T");
    for r in &result.records {
        let e = &r.estimate;
        println!(
            "{:>3} {:>6.3} {:>6.3} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>5}",
            r.l, r.p, r.eta, e.mean, e.variance, e.ci_low, e.ci_high, r.depth
        );
    }
    if let Some(fit) = &result.collapse {
        println!(
            "collapse: gamma = {:.3} +/- {:.3}, nu = {:.3} +/- {:.3}, R = {:.4e} at p* = {}",
            fit.gamma0,
            fit.d_gamma(),
            fit.nu0,
            fit.d_nu(),
            fit.loss_at_min,
            fit.p_star_used
        );
    }
}

fn run(cli: Cli) -> mipt::Result<()> {
    match cli.command {
        Command::Sweep { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let result = run_sweep(&cfg)?;
            print_summary(&result);
            if let Some(path) = out {
                result.export(ExportFormat::Json, &path)?;
            }
            Ok(())
        }
        Command::Collapse { input, p_star, epsilon, alpha, sizes, smooth, out, rescaled } => {
            let is_json = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
            let dataset = if is_json {
                SweepResult::load_json(&input)?.collapse_dataset(p_star)?
            } else {
                CollapseDataset::load_csv(&input, p_star, alpha)?
            };
            let opts = FitOptions { epsilon, sizes, smooth, ..FitOptions::default() };
            let (fit, rows) = analyze_collapse(&dataset, &opts)?;
            write_text(out.as_deref(), &(fit.to_json()? + "\n"))?;
            if let Some(path) = rescaled {
                let file = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
                write_rescaled_csv(&rows, BufWriter::new(file))?;
            }
            Ok(())
        }
        Command::Export { result, format, out } => {
            let res = SweepResult::load_json(&result)?;
            let format: ExportFormat = format.parse()?;
            match out {
                Some(path) => res.export(format, &path),
                None => match format {
                    ExportFormat::Json => write_text(None, &(res.to_json()? + "\n")),
                    ExportFormat::Csv => res.write_csv(io::stdout().lock()),
                },
            }
        }
        Command::Mubs { n, cache } => {
            let part = match &cache {
                Some(path) if path.exists() => {
                    let p = MubPartition::load(path)?;
                    if p.n != n {
                        return Err(Error::Config(format!("cache {} holds n = {}, not {n}", path.display(), p.n)));
                    }
                    p
                }
                _ => {
                    let p = enumerate_mubs(n)?;
                    if let Some(path) = &cache {
                        p.save(path)?;
                    }
                    p
                }
            };
            write_text(None, &part.to_table())
        }
        Command::Selftest => selftest::run(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
