use proptest::prelude::*;

use cpr::baselines::{
    baseline_laplace_smooth, baseline_lbd, baseline_sw_direct, baseline_sw_filter,
    baseline_sw_moving, BaselineConfig,
};
use cpr::ldp::{sw_density, sw_perturb, RngSeed};
use cpr::period::{consensus_vote, detect_period, repeatability, DetectionConfig, ScaleEstimate};
use cpr::phase::{em_sw_decode, kde_mode, phase_groups, EmConfig};
use cpr::signal::{mirror_pad, NormalizedSeries, RawSeries};
use cpr::{split_budget, sw_params};

fn unit_series(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 2..max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn budget_split_recomposes(eps in 1e-3f64..1e3, w in 1usize..500) {
        let s = split_budget(eps, w).unwrap();
        let back = s.eps0 * w as f64;
        prop_assert!((back - eps).abs() <= w as f64 * f64::EPSILON * eps);
    }

    #[test]
    fn density_ratio_never_exceeds_budget(
        eps0 in 0.01f64..20.0,
        y in 0.0f64..=1.0,
        x1 in 0.0f64..=1.0,
        x2 in 0.0f64..=1.0,
    ) {
        let p = sw_params(eps0).unwrap();
        let ratio = sw_density(&p, y, x1).unwrap() / sw_density(&p, y, x2).unwrap();
        prop_assert!(ratio <= eps0.exp() * (1.0 + 1e-12));
    }

    #[test]
    fn perturbed_values_stay_in_unit_interval(eps0 in 0.01f64..100.0, x in 0.0f64..=1.0, seed: u64) {
        let p = sw_params(eps0).unwrap();
        let mut rng = RngSeed(seed).rng();
        for _ in 0..32 {
            let y = sw_perturb(&p, x, &mut rng).unwrap();
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }

    #[test]
    fn repeatability_is_scale_invariant(z in prop::collection::vec(-5.0f64..5.0, 12..80), t in 2usize..6, c in 0.01f64..100.0) {
        let scaled: Vec<f64> = z.iter().map(|v| v * c).collect();
        let a = repeatability(&z, t).unwrap();
        let b = repeatability(&scaled, t).unwrap();
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-9),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
    }

    #[test]
    fn vote_stays_in_admissible_range(
        periods in prop::collection::vec(2usize..60, 1..6),
        t_max in 10usize..60,
        tau in 0.0f64..0.3,
    ) {
        let scales: Vec<usize> = (0..periods.len()).map(|i| 32 << i).collect();
        let est: Vec<ScaleEstimate> = periods
            .iter()
            .zip(&scales)
            .map(|(&p, &s)| ScaleEstimate { scale: s, period: p, rep: 0.5 })
            .collect();
        let cfg = DetectionConfig { scales, t_min: 2, t_max, peaks: 5, tau, hann: true, refine: false };
        if let Ok(t) = consensus_vote(&est, &cfg) {
            prop_assert!((2..=t_max).contains(&t));
        }
    }

    #[test]
    fn detection_is_deterministic_and_in_range(x in unit_series(400), extra in 0usize..200) {
        let mut x = x;
        x.extend((0..extra + 64).map(|t| (t % 7) as f64 / 7.0));
        let series = NormalizedSeries::new(x).unwrap();
        let cfg = DetectionConfig::for_length(series.len()).unwrap();
        let a = detect_period(&series, &cfg);
        let b = detect_period(&series, &cfg);
        prop_assert_eq!(a.as_ref().ok(), b.as_ref().ok());
        if let Ok(t) = a {
            prop_assert!((cfg.t_min..=cfg.t_max).contains(&t));
        }
    }

    #[test]
    fn phase_groups_partition_the_padded_prefix(x in unit_series(120), t_frac in 0.0f64..1.0) {
        let series = NormalizedSeries::new(x.clone()).unwrap();
        let t = 1 + (t_frac * (x.len() - 1) as f64) as usize;
        let g = phase_groups(&series, t).unwrap();
        let padded = mirror_pad(&x, t - 1).unwrap();
        prop_assert_eq!(g.repeats, padded.len() / t);
        let mut rebuilt = vec![f64::NAN; g.repeats * t];
        for (i, group) in g.groups.iter().enumerate() {
            prop_assert_eq!(group.len(), g.repeats);
            for (m, v) in group.iter().enumerate() {
                prop_assert!(rebuilt[i + m * t].is_nan());
                rebuilt[i + m * t] = *v;
            }
        }
        prop_assert_eq!(&rebuilt[..], &padded[..g.repeats * t]);
    }

    #[test]
    fn em_outputs_are_well_formed(obs in unit_series(200), eps0 in 0.1f64..10.0, grid in 2usize..80) {
        let p = sw_params(eps0).unwrap();
        let cfg = EmConfig { grid, max_iters: 30, ..EmConfig::default() };
        let d = em_sw_decode(&obs, &p, &cfg).unwrap();
        prop_assert!((d.pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (v1, vb) = (0.5 / grid as f64, (grid as f64 - 0.5) / grid as f64);
        for y in &d.pseudo_samples {
            prop_assert!(*y >= v1 - 1e-12 && *y <= vb + 1e-12);
        }
        prop_assert_eq!(d.pseudo_samples.len(), obs.len());
    }

    #[test]
    fn kde_mode_lies_in_unit_interval(samples in unit_series(50)) {
        let m = kde_mode(&samples, 1.0 / 1024.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn baselines_keep_length_and_range(
        x in prop::collection::vec(-50.0f64..50.0, 2..120),
        eps in 0.1f64..20.0,
        w in 1usize..30,
        seed: u64,
    ) {
        let raw = RawSeries::new(x.clone()).unwrap();
        let cfg = BaselineConfig::default();
        let mut rng = RngSeed(seed).rng();
        let outputs = [
            baseline_sw_direct(&raw, eps, w, &mut rng).unwrap(),
            baseline_sw_moving(&raw, eps, w, &cfg, &mut rng).unwrap(),
            baseline_sw_filter(&raw, eps, w, &cfg, &mut rng).unwrap(),
            baseline_laplace_smooth(&raw, eps, w, &cfg, &mut rng).unwrap(),
            baseline_lbd(&raw, eps, w, &cfg, &mut rng).unwrap().series,
        ];
        for out in outputs {
            prop_assert_eq!(out.len(), x.len());
            prop_assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn lbd_never_overspends(
        x in prop::collection::vec(0.0f64..1.0, 2..300),
        eps in 0.05f64..50.0,
        w in 1usize..40,
        seed: u64,
    ) {
        let raw = RawSeries::new(x).unwrap();
        let out = baseline_lbd(&raw, eps, w, &BaselineConfig::default(), &mut RngSeed(seed).rng()).unwrap();
        prop_assert!(out.ledger.audit());
        prop_assert!(out.ledger.to_epsilon(out.ledger.max_window_units()) <= eps);
    }
}
