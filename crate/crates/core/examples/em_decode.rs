// Usage: cargo run --example em_decode
//
// Decode one phase group: perturb 60 copies of a latent value, run the EM
// decoder, and summarize the pseudo-samples by their KDE mode.

use cpr::ldp::{sw_perturb, RngSeed};
use cpr::phase::{em_sw_decode_observed, kde_mode, log_likelihood, EmConfig};
use cpr::sw_params;

fn main() -> cpr::Result<()> {
    let latent = 0.72;
    let config = EmConfig::default();
    for eps0 in [0.5, 1.0, 3.0] {
        let params = sw_params(eps0)?;
        let mut rng = RngSeed(17).rng();
        let obs: Vec<f64> = (0..60)
            .map(|_| sw_perturb(&params, latent, &mut rng))
            .collect::<cpr::Result<_>>()?;
        let raw_mean = obs.iter().sum::<f64>() / obs.len() as f64;

        let mut trace = Vec::new();
        let decoded = em_sw_decode_observed(&obs, &params, &config, |it, pmf| {
            if it % 50 == 0 {
                trace.push((it, log_likelihood(&obs, &params, pmf, config.kernel)));
            }
        })?;
        let mode = kde_mode(&decoded.pseudo_samples, 1.0 / (4.0 * config.grid as f64))?;
        println!(
            "eps0 {eps0}: raw mean {raw_mean:.3}, EM mean {:.3}, KDE mode {mode:.3} (latent {latent}), {} iterations",
            decoded.pmf.mean(),
            decoded.iterations
        );
        for (it, ll) in trace {
            println!("    iteration {it:>3}: log-likelihood {ll:.3}");
        }
    }
    Ok(())
}
