// Usage: cargo run --example reconstruct_cycle
//
// End-to-end cycle and phase recovery of a sawtooth stream. The server only
// ever touches the privatized series.

use cpr::experiments::{build_periodic_stream, StreamSpec, Waveform};
use cpr::signal::{cosine_distance, normalize};
use cpr::{cpr_reconstruct, CprConfig, DetectionConfig, EmConfig, RngSeed};

fn main() -> cpr::Result<()> {
    let spec = StreamSpec::synthetic(Waveform::Sawtooth, 24, 1200, 0.02);
    let (raw, truth) = build_periodic_stream(&spec, &mut RngSeed(5).rng())?;
    let clean = normalize(&raw);
    let config = CprConfig {
        detection: DetectionConfig::for_length(raw.len())?,
        em: EmConfig::default(),
    };

    for (epsilon, w) in [(50.0, 5), (15.0, 5), (5.0, 5)] {
        let out = cpr_reconstruct(&raw, epsilon, w, &config, &mut RngSeed(9).rng())?;
        let d_priv = cosine_distance(out.privatized.values(), clean.values())?;
        let d_cpr = cosine_distance(out.reconstruction().values(), clean.values())?;
        println!(
            "epsilon {epsilon:>4}, w {w}: period {} (true {:?}), cosine distance privatized {d_priv:.4} -> reconstructed {d_cpr:.4}",
            out.period(),
            truth
        );
        if epsilon == 15.0 {
            let template = out.recovery.template.phases();
            let phases: Vec<String> = template.iter().map(|v| format!("{v:.2}")).collect();
            println!("  template: {}", phases.join(" "));
        }
    }
    Ok(())
}
