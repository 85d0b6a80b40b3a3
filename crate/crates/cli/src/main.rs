use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use sr_lattice::experiments::{
    self, Algorithm, AlgorithmParams, Metadata, SweepSpec, BER_COLUMNS, COMPLEXITY_COLUMNS,
};
use sr_lattice::random::BasisKind;
use sr_lattice::{Basis, LatticeError};

#[derive(Parser)]
#[command(name = "srlat", version, about = "Sequential lattice reduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a basis file; writes OUT, OUT.unimodular and OUT.report.json.
    Reduce {
        #[arg(long = "in", value_name = "FILE")]
        input: PathBuf,
        #[arg(long)]
        algo: Algorithm,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        /// LSH bits per key (sr-hash); default round(log2 n).
        #[arg(long)]
        k: Option<usize>,
        /// LSH tables (sr-hash); default round(n^0.585).
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// LLL Lovász parameter.
        #[arg(long, default_value_t = 0.75)]
        delta: f64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Mean orthogonality defect per dimension and algorithm.
    OdSweep {
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,8,16")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "lll,seysen,sr-pair,sr-hash,sr-cvp,greedy")]
        algos: Vec<Algorithm>,
        #[arg(long, default_value = "dual")]
        basis: BasisKind,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Monte-Carlo BER sweep from a JSON config.
    BerSweep {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Same sweep as ber-sweep, reporting reducer comparisons.
    ComplexitySweep {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Histogram of pairwise basis angles.
    AngleHist {
        #[arg(long, default_value_t = 60)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value = "dual")]
        basis: BasisKind,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Check the SR-CVP length, defect and angle bounds (n <= 4).
    BoundsCheck {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Run the greedy and SR-Pair counter-examples; prints a JSON report.
    Counterexamples {
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_2 - 1e-4)]
        phi: f64,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Input(String),
    Numerical(String),
}

impl From<LatticeError> for Failure {
    fn from(e: LatticeError) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Reduce {
            input,
            algo,
            tau,
            k,
            t,
            seed,
            delta,
            out,
        } => {
            let basis: Basis = read(&input)?.parse()?;
            let params = AlgorithmParams { tau, k, t, seed, delta };
            let (reduced, u, report) = experiments::reduce(&basis, algo, &params)?;
            let header = format!(
                "# srlat {} reduce algo={algo} tau={tau} k={k:?} t={t:?} seed={seed} delta={delta}\n",
                experiments::VERSION
            );
            write(&out, &format!("{header}{}", reduced.to_text()))?;
            write(&with_suffix(&out, ".unimodular"), &format!("{header}{}", u.to_text()))?;
            write(&with_suffix(&out, ".report.json"), &format!("{}\n", report.to_json()))?;
        }
        Command::OdSweep {
            dims,
            trials,
            algos,
            basis,
            tau,
            k,
            t,
            seed,
            out,
        } => {
            let params = AlgorithmParams {
                tau,
                k,
                t,
                seed,
                ..Default::default()
            };
            let rows = experiments::od_sweep(&dims, trials, &algos, basis, seed, &params)?;
            let meta = Metadata::new(
                "od-sweep",
                seed,
                json!({"dims": dims, "trials": trials, "algos": algos, "basis": basis, "tau": tau, "k": k, "t": t}),
            );
            let header = [
                "dim",
                "algorithm",
                "basis",
                "mean_od",
                "mean_log_od",
                "mean_input_log_od",
                "mean_comparisons",
                "trials",
                "status",
            ];
            let fields: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.dim.to_string(),
                        r.algorithm.clone(),
                        r.basis.clone(),
                        r.mean_od.map_or_else(|| "inf".into(), |v| v.to_string()),
                        r.mean_log_od.to_string(),
                        r.mean_input_log_od.to_string(),
                        r.mean_comparisons.to_string(),
                        r.trials.to_string(),
                        r.status.clone(),
                    ]
                })
                .collect();
            write(&out, &experiments::write_csv(&meta, &header, &fields))?;
        }
        Command::BerSweep { config, trials, out } => sweep("ber-sweep", &config, trials, &out, &BER_COLUMNS)?,
        Command::ComplexitySweep { config, trials, out } => {
            sweep("complexity-sweep", &config, trials, &out, &COMPLEXITY_COLUMNS)?
        }
        Command::AngleHist {
            n,
            trials,
            basis,
            bins,
            seed,
            out,
        } => {
            let rows = experiments::angle_histogram(n, trials, basis, bins, seed)?;
            let meta = Metadata::new(
                "angle-hist",
                seed,
                json!({"n": n, "trials": trials, "basis": basis, "bins": bins}),
            );
            let fields: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.bin_lo.to_string(), r.bin_hi.to_string(), r.count.to_string(), r.fraction.to_string()])
                .collect();
            write(&out, &experiments::write_csv(&meta, &["bin_lo", "bin_hi", "count", "fraction"], &fields))?;
        }
        Command::BoundsCheck {
            trials,
            dims,
            tau,
            seed,
            out,
        } => {
            let rows = experiments::bounds_check(&dims, trials, tau, seed)?;
            let meta = Metadata::new("bounds-check", seed, json!({"dims": dims, "trials": trials, "tau": tau}));
            let header = [
                "dim",
                "tau",
                "trials",
                "length_violations",
                "od_violations",
                "angle_violations",
                "unimodular_violations",
                "result",
            ];
            let fields: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.dim.to_string(),
                        r.tau.to_string(),
                        r.trials.to_string(),
                        r.length_violations.to_string(),
                        r.od_violations.to_string(),
                        r.angle_violations.to_string(),
                        r.unimodular_violations.to_string(),
                        if r.violations() == 0 { "pass" } else { "fail" }.into(),
                    ]
                })
                .collect();
            write(&out, &experiments::write_csv(&meta, &header, &fields))?;
        }
        Command::Counterexamples { eps, phi, out } => {
            let report = experiments::counterexamples(eps, phi)?;
            let text = serde_json::to_string_pretty(&json!({
                "version": experiments::VERSION,
                "report": report,
            }))
            .expect("report serializes");
            match out {
                Some(path) => write(&path, &format!("{text}\n"))?,
                None => println!("{text}"),
            }
        }
    }
    Ok(())
}

fn sweep(command: &str, config: &Path, trials: Option<usize>, out: &Path, columns: &[&str]) -> Result<(), Failure> {
    let mut spec = SweepSpec::from_json(&read(config)?)?;
    if let Some(t) = trials {
        spec.config.trials = t;
    }
    let rows = spec.run()?;
    let params = serde_json::to_value(&spec).expect("spec serializes");
    let meta = Metadata::new(command, spec.config.seed, params);
    let fields: Vec<Vec<String>> = rows.iter().map(|r| experiments::sweep_fields(r, columns)).collect();
    write(out, &experiments::write_csv(&meta, columns, &fields))
}
