// Usage: cargo run --release --example experiment_from_config [config.toml] [out_dir]
//
// Load a sweep config, run both sweeps and the budget audit, and write the
// same report files as `cpr experiment`.

use std::path::PathBuf;

use cpr::experiments::{
    audit_budgets, emit_report, run_detection_trials, run_reconstruction_sweep, ExperimentConfig,
    ReportMode,
};

fn main() -> cpr::Result<()> {
    let mut args = std::env::args().skip(1);
    let config_path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/configs/square_sweep.toml")
    });
    let out_dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cpr-example-sweep"));
    std::fs::create_dir_all(&out_dir)?;

    let config = ExperimentConfig::load(&config_path)?;
    let label = config.stream.label();

    let detection = run_detection_trials(&config)?;
    emit_report(
        &detection,
        &out_dir.join("detection_raw.csv"),
        ReportMode::Raw,
        &label,
    )?;
    emit_report(
        &detection,
        &out_dir.join("accuracy_table.csv"),
        ReportMode::AccuracyTable,
        &label,
    )?;

    let recon = run_reconstruction_sweep(&config)?;
    emit_report(
        &recon,
        &out_dir.join("reconstruction_raw.csv"),
        ReportMode::Raw,
        &label,
    )?;
    emit_report(
        &recon,
        &out_dir.join("distance_table.csv"),
        ReportMode::DistanceTable,
        &label,
    )?;

    let audits = audit_budgets(&config)?;
    let over = audits.iter().filter(|a| !a.within_budget).count();

    for name in ["accuracy_table.csv", "distance_table.csv"] {
        println!("== {name}");
        print!("{}", std::fs::read_to_string(out_dir.join(name))?);
    }
    println!("budget audit: {} cells, {over} over budget", audits.len());
    println!("reports written to {}", out_dir.display());
    Ok(())
}
