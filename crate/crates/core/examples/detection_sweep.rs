// Usage: cargo run --release --example detection_sweep
//
// Detection accuracy over a grid of window budgets and window lengths,
// rendered as the accuracy table the `experiment` command writes.

use cpr::experiments::{render_report, run_detection_trials, ExperimentConfig, ReportMode};

const CONFIG: &str = r#"
epsilons = [1.0, 2.0, 3.0, 4.0, 5.0]
windows = [5, 10, 15, 20, 25]
trials = 40
methods = ["cpr"]
base_seed = 99

[stream]
source = "synthetic"
waveform = "square"
period = 50
length = 1500
"#;

fn main() -> cpr::Result<()> {
    let config = ExperimentConfig::from_toml_str(CONFIG)?;
    let reports = run_detection_trials(&config)?;
    let failed = reports.iter().filter(|r| r.t_hat.is_none()).count();
    print!(
        "{}",
        render_report(&reports, ReportMode::AccuracyTable, &config.stream.label())?
    );
    println!(
        "{} trials, {failed} without any period estimate",
        reports.len()
    );
    Ok(())
}
