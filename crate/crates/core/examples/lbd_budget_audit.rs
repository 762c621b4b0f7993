// Usage: cargo run --example lbd_budget_audit
//
// Run the adaptive-budget baseline and audit its spend ledger: no window of
// w consecutive timestamps may spend more than epsilon.

use cpr::baselines::{baseline_lbd, BaselineConfig};
use cpr::experiments::{build_periodic_stream, StreamSpec, Waveform};
use cpr::signal::{cosine_distance, normalize};
use cpr::RngSeed;

fn main() -> cpr::Result<()> {
    let spec = StreamSpec::synthetic(Waveform::Square, 40, 800, 0.0);
    let (raw, _) = build_periodic_stream(&spec, &mut RngSeed(3).rng())?;
    let clean = normalize(&raw);
    let cfg = BaselineConfig::default();

    println!("epsilon   w  published  max window spend  within budget  cosine distance");
    for (epsilon, w) in [(1.0, 5), (5.0, 5), (5.0, 25), (20.0, 10)] {
        let out = baseline_lbd(&raw, epsilon, w, &cfg, &mut RngSeed(8).rng())?;
        let published = out.published.iter().filter(|&&p| p).count();
        let spend = out.ledger.to_epsilon(out.ledger.max_window_units());
        let d = cosine_distance(out.series.values(), clean.values())?;
        println!(
            "{epsilon:>7} {w:>3} {:>10} {spend:>17.4} {:>14} {d:>16.4}",
            format!("{published}/{}", out.published.len()),
            out.ledger.audit()
        );
    }
    Ok(())
}
