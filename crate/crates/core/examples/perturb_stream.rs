// Usage: cargo run --example perturb_stream
//
// Device-side view: split a window budget, inspect the square-wave
// randomizer, and privatize a short sine stream.

use cpr::ldp::{sw_perturb, RngSeed};
use cpr::{privatize, split_budget, sw_params, RawSeries};

fn main() -> cpr::Result<()> {
    let budget = split_budget(5.0, 5)?;
    println!(
        "epsilon {} over w = {} events -> eps0 = {}",
        budget.epsilon, budget.w, budget.eps0
    );

    let params = sw_params(budget.eps0)?;
    println!(
        "b = {:.4}, high density = {:.4}, low density = {:.4}, P(output near input) = {:.3}",
        params.b,
        params.high(),
        params.low(),
        params.interval_mass()
    );

    let mut rng = RngSeed(7).rng();
    let x = 0.3;
    let (lo, hi) = params.interval(x);
    let hits = (0..100_000)
        .filter(|_| {
            let y = sw_perturb(&params, x, &mut rng).unwrap();
            (lo..=hi).contains(&y)
        })
        .count();
    println!(
        "empirical in-interval rate at x = {x}: {:.3}",
        hits as f64 / 100_000.0
    );

    let raw = RawSeries::new(
        (0..24)
            .map(|t| 20.0 + 5.0 * (t as f64 / 12.0 * std::f64::consts::TAU).sin())
            .collect(),
    )?;
    let priv_x = privatize(&raw, &budget, &mut RngSeed(11).rng())?;
    println!("\n  t   raw     privatized");
    for (t, (r, p)) in raw.values().iter().zip(priv_x.values()).enumerate() {
        println!("{t:>3}  {r:>6.2}  {p:.3}");
    }
    Ok(())
}
