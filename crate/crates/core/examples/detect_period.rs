// Usage: cargo run --example detect_period
//
// Server-side period detection on a privatized square wave, showing each
// probing scale's estimate and the final vote as the per-event budget grows.

use cpr::experiments::{build_periodic_stream, StreamSpec, Waveform};
use cpr::ldp::{sw_perturb_series, RngSeed};
use cpr::period::detect_period_detailed;
use cpr::signal::normalize;
use cpr::{split_budget, DetectionConfig, Error};

fn main() -> cpr::Result<()> {
    let spec = StreamSpec::synthetic(Waveform::Square, 50, 1500, 0.0);
    let (raw, truth) = build_periodic_stream(&spec, &mut RngSeed(1).rng())?;
    let x = normalize(&raw);
    let config = DetectionConfig::for_length(x.len())?;
    println!(
        "true period {:?}, scales {:?}, tau {}",
        truth, config.scales, config.tau
    );

    for eps0 in [0.4, 1.0, 2.0, 5.0] {
        let budget = split_budget(eps0, 1)?;
        let priv_x = sw_perturb_series(&x, &budget, &mut RngSeed(3).rng())?;
        match detect_period_detailed(&priv_x, &config) {
            Ok(report) => {
                let scales: Vec<String> = report
                    .scales
                    .iter()
                    .map(|s| format!("s={} T={} rep={:.2}", s.scale, s.period, s.rep))
                    .collect();
                println!(
                    "eps0 {eps0:>3}: {} | vote {} -> period {}",
                    scales.join(", "),
                    report.voted,
                    report.period
                );
            }
            Err(Error::DetectionFailed) => println!("eps0 {eps0:>3}: detection failed"),
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
