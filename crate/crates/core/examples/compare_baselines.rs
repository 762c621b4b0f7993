// Usage: cargo run --release --example compare_baselines
//
// Mean cosine distance of every method on a square wave, plus CPR given the
// true period, which isolates how much of CPR's error comes from detection.

use cpr::baselines::BaselineConfig;
use cpr::experiments::{
    build_periodic_stream, run_reconstruction_sweep, ExperimentConfig, Method, StreamSpec, Waveform,
};
use cpr::ldp::{sw_perturb_series, RngSeed};
use cpr::phase::{phase_groups, reconstruct_template, EmConfig};
use cpr::signal::{cosine_distance, normalize, tile_crop};
use cpr::{split_budget, sw_params};

fn main() -> cpr::Result<()> {
    let epsilons = [0.5, 1.0, 2.0, 5.0];
    let config = ExperimentConfig {
        epsilons: epsilons.to_vec(),
        windows: vec![5],
        trials: 20,
        methods: Method::ALL.to_vec(),
        base_seed: 2024,
        tol_t: 0,
        stream: StreamSpec::synthetic(Waveform::Square, 50, 1500, 0.0),
        detection: Default::default(),
        em: EmConfig::default(),
        baseline: BaselineConfig::default(),
    };
    let reports = run_reconstruction_sweep(&config)?;

    print!("{:<18}", "method");
    for e in epsilons {
        print!("{:>9}", format!("eps={e}"));
    }
    println!();
    for method in Method::ALL {
        print!("{:<18}", method.name());
        for e in epsilons {
            let d = cpr::experiments::mean_distance(&reports, method, e, 5).unwrap_or(f64::NAN);
            print!("{d:>9.4}");
        }
        println!();
    }

    let (raw, truth) = build_periodic_stream(&config.stream, &mut RngSeed(1).rng())?;
    let period = truth.expect("synthetic streams know their period");
    let clean = normalize(&raw);
    print!("{:<18}", "cpr (true period)");
    for e in epsilons {
        let budget = split_budget(e, 5)?;
        let params = sw_params(budget.eps0)?;
        let mut total = 0.0;
        for trial in 0..config.trials as u64 {
            let priv_x = sw_perturb_series(&clean, &budget, &mut RngSeed(trial).rng())?;
            let groups = phase_groups(&priv_x, period)?;
            let template = reconstruct_template(&groups, &params, &config.em)?;
            let recon = tile_crop(&template, clean.len())?;
            total += cosine_distance(recon.values(), clean.values())?;
        }
        print!("{:>9.4}", total / config.trials as f64);
    }
    println!();
    Ok(())
}
