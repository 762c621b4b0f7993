use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cpr::experiments::{
    audit_budgets, emit_report, load_csv_column, run_detection_trials, run_reconstruction_sweep,
    DetectionOptions, ExperimentConfig, ReportMode,
};
use cpr::period::detect_period_detailed;
use cpr::{
    privatize, recover, split_budget, CprConfig, EmConfig, Error, NormalizedSeries, RngSeed,
};

/// Cycle and phase recovery for periodic streams under w-event local
/// differential privacy.
///
/// Exit codes: 0 success, 1 usage error, 2 ingestion error, 3 runtime failure.
#[derive(Parser)]
#[command(name = "cpr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Device side: normalize a series and perturb each sample with the
    /// square-wave randomizer at eps0 = epsilon / w.
    Perturb {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV with a single `value` column; stdout when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Server side: estimate the dominant period of a privatized series.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        detection: DetectionArgs,
        /// Also print the per-scale estimates.
        #[arg(long)]
        verbose: bool,
    },
    /// Server side: reconstruct a privatized series from its recovered cycle.
    Reconstruct {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[command(flatten)]
        detection: DetectionArgs,
        /// EM grid cells.
        #[arg(long, default_value_t = 256)]
        grid: usize,
        /// Treat the input as raw data and perturb it first with `--seed`.
        #[arg(long)]
        privatize: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run a configured sweep and write report CSVs.
    ///
    /// The TOML config mirrors the experiment fields: epsilons, windows,
    /// trials, methods (cpr, laplace, sw, sw_moving, sw_filter, lbd),
    /// base_seed, tol_t (default 0), and the sections [stream], [detection],
    /// [em] and [baseline]. Defaults: detection scales n/8, n/4, n/2,
    /// t_min 2, t_max n/3, peaks 5, tau 0.1, hann and refine on; em grid 256,
    /// max_iters 200, tol 1e-6, kernel "cell"; baseline moving_window 9,
    /// filter_sigma 2.0, laplace_smooth_window 9, lbd_threshold_frac 0.5.
    Experiment {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Sweep::All)]
        sweep: Sweep,
        /// Also write per-trial wall-clock timings.
        #[arg(long)]
        timing: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Detection,
    Reconstruction,
    All,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV with a header row.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value = "value")]
    column: String,
}

#[derive(Args)]
struct BudgetArgs {
    /// Privacy budget per window of w events.
    #[arg(long, value_parser = positive_f64)]
    epsilon: f64,
    /// Window length w.
    #[arg(long, short, value_parser = clap::value_parser!(u64).range(1..))]
    window: u64,
}

#[derive(Args)]
struct DetectionArgs {
    /// Probing scales, comma separated [default: n/8, n/4, n/2].
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<usize>>,
    /// [default: 2]
    #[arg(long)]
    t_min: Option<usize>,
    /// [default: n/3]
    #[arg(long)]
    t_max: Option<usize>,
    /// Spectral peaks kept per window [default: 5].
    #[arg(long)]
    peaks: Option<usize>,
    /// Relative agreement tolerance between scales [default: 0.1].
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    no_hann: bool,
    /// Skip the full-stream fold refinement of the voted period.
    #[arg(long)]
    no_refine: bool,
}

impl DetectionArgs {
    fn options(&self) -> DetectionOptions {
        DetectionOptions {
            scales: self.scales.clone(),
            t_min: self.t_min,
            t_max: self.t_max,
            peaks: self.peaks,
            tau: self.tau,
            hann: self.no_hann.then_some(false),
            refine: self.no_refine.then_some(false),
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("'{s}' is not a positive number")),
    }
}

enum Failure {
    Usage(String),
    Ingestion(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Ingestion { .. } | Error::Csv(_) | Error::Config(_) => {
                Failure::Ingestion(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn load_privatized(input: &InputArgs) -> Result<NormalizedSeries, Failure> {
    let raw = load_csv_column(&input.input, &input.column)?;
    NormalizedSeries::new(raw.into_inner()).map_err(|_| {
        Failure::Ingestion(format!(
            "{}: privatized values must lie in [0, 1]",
            input.input.display()
        ))
    })
}

fn write_series(values: &[f64], output: Option<&Path>) -> Result<(), Failure> {
    let mut text = String::from("value\n");
    for v in values {
        text.push_str(&format!("{v}\n"));
    }
    let written = match output {
        Some(path) => fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    written.map_err(|e| Failure::Runtime(format!("cannot write output: {e}")))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Perturb {
            input,
            budget,
            seed,
            output,
        } => {
            let raw = load_csv_column(&input.input, &input.column)?;
            let split = split_budget(budget.epsilon, budget.window as usize)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let priv_x = privatize(&raw, &split, &mut RngSeed(seed).rng())?;
            write_series(priv_x.values(), output.as_deref())
        }
        Command::Detect {
            input,
            detection,
            verbose,
        } => {
            let x = load_privatized(&input)?;
            let cfg = detection
                .options()
                .resolve(x.len())
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let report = detect_period_detailed(&x, &cfg)?;
            if verbose {
                for s in &report.scales {
                    eprintln!("scale {}: period {} rep {:.4}", s.scale, s.period, s.rep);
                }
                eprintln!("voted {}", report.voted);
            }
            println!("{}", report.period);
            Ok(())
        }
        Command::Reconstruct {
            input,
            budget,
            detection,
            grid,
            privatize: perturb_first,
            seed,
            output,
        } => {
            let split = split_budget(budget.epsilon, budget.window as usize)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let x = if perturb_first {
                let raw = load_csv_column(&input.input, &input.column)?;
                privatize(&raw, &split, &mut RngSeed(seed).rng())?
            } else {
                load_privatized(&input)?
            };
            let em = EmConfig {
                grid,
                ..EmConfig::default()
            };
            em.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let cfg = CprConfig {
                detection: detection
                    .options()
                    .resolve(x.len())
                    .map_err(|e| Failure::Usage(e.to_string()))?,
                em,
            };
            let rec = recover(&x, split.eps0, &cfg)?;
            eprintln!("period {}", rec.detection.period);
            write_series(rec.reconstruction.values(), output.as_deref())
        }
        Command::Experiment {
            config,
            out_dir,
            sweep,
            timing,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            fs::create_dir_all(&out_dir).map_err(|e| {
                Failure::Runtime(format!("cannot create {}: {e}", out_dir.display()))
            })?;
            let label = cfg.stream.label();
            if sweep != Sweep::Reconstruction {
                let reports = run_detection_trials(&cfg)?;
                emit_report(
                    &reports,
                    &out_dir.join("detection_raw.csv"),
                    ReportMode::Raw,
                    &label,
                )?;
                emit_report(
                    &reports,
                    &out_dir.join("accuracy_table.csv"),
                    ReportMode::AccuracyTable,
                    &label,
                )?;
                if timing {
                    emit_report(
                        &reports,
                        &out_dir.join("detection_timing.csv"),
                        ReportMode::Timing,
                        &label,
                    )?;
                }
            }
            if sweep != Sweep::Detection {
                let reports = run_reconstruction_sweep(&cfg)?;
                emit_report(
                    &reports,
                    &out_dir.join("reconstruction_raw.csv"),
                    ReportMode::Raw,
                    &label,
                )?;
                emit_report(
                    &reports,
                    &out_dir.join("distance_table.csv"),
                    ReportMode::DistanceTable,
                    &label,
                )?;
                if timing {
                    emit_report(
                        &reports,
                        &out_dir.join("reconstruction_timing.csv"),
                        ReportMode::Timing,
                        &label,
                    )?;
                }
            }
            let audits = audit_budgets(&cfg)?;
            if let Some(bad) = audits.iter().find(|a| !a.within_budget) {
                return Err(Failure::Runtime(format!(
                    "budget audit failed for {} at epsilon {} w {}: spent {}",
                    bad.method, bad.epsilon, bad.w, bad.max_window_spend
                )));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Ingestion(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
