//! Local randomizers and w-event budget accounting.
//!
//! Every release in a length-`w` window spends `eps0 = epsilon / w`, so any
//! window composes to at most `epsilon`. The square-wave randomizer keeps
//! its high-probability interval inside `[0, 1]` and rescales both density
//! levels by a common factor so the clipped density still has unit mass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::{NormalizedSeries, RawSeries};

/// Largest per-event budget for which `e^eps0` stays comfortably finite.
pub const MAX_EPS0: f64 = 700.0;

/// Seed for the per-trial random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Even split of a window budget across the `w` releases it covers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSplit {
    pub epsilon: f64,
    pub w: usize,
    pub eps0: f64,
}

pub fn split_budget(epsilon: f64, w: usize) -> Result<BudgetSplit> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if w == 0 {
        return Err(Error::domain("window length w must be at least 1"));
    }
    Ok(BudgetSplit {
        epsilon,
        w,
        eps0: epsilon / w as f64,
    })
}

/// Square-wave randomizer parameters for one per-event budget.
///
/// `p` and `q` are the raw closed-form levels; the density actually used
/// is `norm_factor * p` inside the interval and `norm_factor * q` outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwParams {
    pub eps0: f64,
    pub b: f64,
    pub p: f64,
    pub q: f64,
    pub norm_factor: f64,
}

pub fn sw_params(eps0: f64) -> Result<SwParams> {
    if !(eps0.is_finite() && eps0 > 0.0) {
        return Err(Error::domain(format!("eps0 must be positive, got {eps0}")));
    }
    if eps0 > MAX_EPS0 {
        return Err(Error::domain(format!("eps0 {eps0} exceeds {MAX_EPS0}")));
    }
    let e = eps0.exp();
    let numer = eps0 * e - eps0.exp_m1();
    let denom = 2.0 * e * (eps0.exp_m1() - eps0);
    let b = numer / denom;
    let z = 2.0 * b * e + 1.0;
    let p = e / z;
    let q = 1.0 / z;
    let norm_factor = z / (z - 2.0 * b);
    Ok(SwParams {
        eps0,
        b,
        p,
        q,
        norm_factor,
    })
}

impl SwParams {
    /// The length-`2b` interval around `x`, shifted to stay inside `[0, 1]`.
    pub fn interval(&self, x: f64) -> (f64, f64) {
        let b = self.b;
        if x < b {
            (0.0, 2.0 * b)
        } else if x > 1.0 - b {
            (1.0 - 2.0 * b, 1.0)
        } else {
            (x - b, x + b)
        }
    }

    pub fn high(&self) -> f64 {
        self.norm_factor * self.p
    }

    pub fn low(&self) -> f64 {
        self.norm_factor * self.q
    }

    /// Probability that an output lands inside its own interval.
    pub fn interval_mass(&self) -> f64 {
        2.0 * self.b * self.high()
    }
}

pub fn sw_density(params: &SwParams, y: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&y) || !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "sw_density arguments ({y}, {x}) outside [0, 1]"
        )));
    }
    let (lo, hi) = params.interval(x);
    Ok(if (lo..=hi).contains(&y) {
        params.high()
    } else {
        params.low()
    })
}

pub fn sw_perturb<R: Rng + ?Sized>(params: &SwParams, x: f64, rng: &mut R) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("input {x} outside [0, 1]")));
    }
    let (lo, hi) = params.interval(x);
    let width = hi - lo;
    let inside = rng.random::<f64>() < params.interval_mass();
    let u = rng.random::<f64>();
    let y = if inside {
        lo + u * width
    } else {
        // Uniform on [0, lo) ∪ (hi, 1], parameterized over a gap-free line.
        let t = u * (1.0 - width);
        if t < lo {
            t
        } else {
            t + width
        }
    };
    Ok(y.clamp(0.0, 1.0))
}

/// Independent square-wave perturbation of every sample, in index order.
pub fn sw_perturb_series<R: Rng + ?Sized>(
    x: &NormalizedSeries,
    budget: &BudgetSplit,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    let params = sw_params(budget.eps0)?;
    let out = x
        .values()
        .iter()
        .map(|&v| sw_perturb(&params, v, rng))
        .collect::<Result<Vec<_>>>()?;
    NormalizedSeries::new(out)
}

/// One Laplace draw with the given scale, by inverse CDF.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Adds `Lap(1 / eps0)` noise to every sample (sensitivity 1 on `[0, 1]`).
///
/// The result is left unclipped.
pub fn laplace_perturb_series<R: Rng + ?Sized>(
    x: &NormalizedSeries,
    budget: &BudgetSplit,
    rng: &mut R,
) -> Result<RawSeries> {
    let scale = 1.0 / budget.eps0;
    let out = x
        .values()
        .iter()
        .map(|&v| v + laplace_noise(scale, rng))
        .collect();
    RawSeries::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_budget_examples() {
        assert_eq!(split_budget(5.0, 5).unwrap().eps0, 1.0);
        assert!((split_budget(5.0, 25).unwrap().eps0 - 0.2).abs() < 1e-15);
        assert_eq!(split_budget(1.0, 1).unwrap().eps0, 1.0);
        assert!(split_budget(0.0, 5).is_err());
        assert!(split_budget(-1.0, 5).is_err());
        assert!(split_budget(1.0, 0).is_err());
    }

    #[test]
    fn split_budget_recomposes() {
        for &eps in &[0.5, 1.0, 1.5, 2.0, 3.7, 5.0] {
            for w in 1..=30 {
                let s = split_budget(eps, w).unwrap();
                let back = s.eps0 * w as f64;
                assert!((back - eps).abs() <= f64::EPSILON * eps * w as f64);
            }
        }
    }

    #[test]
    fn sw_params_at_unit_budget() {
        // Closed forms evaluated by hand: b = 1 / (2e(e - 2)).
        let e = std::f64::consts::E;
        let s = sw_params(1.0).unwrap();
        let b = 1.0 / (2.0 * e * (e - 2.0));
        assert!((s.b - b).abs() < 1e-14);
        assert!((s.b - 0.2561).abs() < 1e-4);
        assert!((s.p - 1.1363).abs() < 1e-4);
        assert!((s.q - 0.4180).abs() < 1e-4);
        assert!((s.p / s.q - e).abs() < 1e-12);
        let mass = 2.0 * s.b * s.high() + (1.0 - 2.0 * s.b) * s.low();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sw_params_shrink_with_budget() {
        let b1 = sw_params(1.0).unwrap().b;
        let b5 = sw_params(5.0).unwrap().b;
        assert!(b5 < b1);
        for &eps0 in &[0.04, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 50.0] {
            let s = sw_params(eps0).unwrap();
            assert!(s.b > 0.0 && s.b <= 0.5);
            assert!(s.p > s.q && s.q > 0.0);
            assert!(((s.p / s.q).ln() - eps0).abs() < 1e-9);
        }
        assert!(sw_params(0.0).is_err());
        assert!(sw_params(f64::NAN).is_err());
    }

    #[test]
    fn sw_density_examples() {
        let s = sw_params(1.0).unwrap();
        assert_eq!(sw_density(&s, 0.5, 0.5).unwrap(), s.high());
        assert_eq!(sw_density(&s, 0.9, 0.0).unwrap(), s.low());
        assert_eq!(s.interval(0.0), (0.0, 2.0 * s.b));
        assert_eq!(s.interval(1.0), (1.0 - 2.0 * s.b, 1.0));
        assert!(sw_density(&s, 1.1, 0.5).is_err());
        assert!(sw_density(&s, 0.5, -0.1).is_err());
    }

    #[test]
    fn sw_density_ratio_bounded() {
        let s = sw_params(1.0).unwrap();
        let bound = 1.0f64.exp();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let mut worst: f64 = 0.0;
        for &y in &grid {
            let dens: Vec<f64> = grid
                .iter()
                .map(|&x| sw_density(&s, y, x).unwrap())
                .collect();
            let hi = dens.iter().cloned().fold(f64::MIN, f64::max);
            let lo = dens.iter().cloned().fold(f64::MAX, f64::min);
            worst = worst.max(hi / lo);
        }
        assert!(worst <= bound * (1.0 + 1e-12));
        assert!((worst - bound).abs() < 1e-9);
    }

    #[test]
    fn sw_perturb_high_budget_mass() {
        // At eps0 = 50 the in-interval mass is 2b e^eps0 / (2b e^eps0 + 1 - 2b),
        // which tends to (eps0 - 1) / eps0 = 0.98.
        let s = sw_params(50.0).unwrap();
        assert!((s.interval_mass() - 0.98).abs() < 1e-12);
        let mut rng = RngSeed(7).rng();
        let (lo, hi) = s.interval(0.5);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| {
                let y = sw_perturb(&s, 0.5, &mut rng).unwrap();
                (lo..=hi).contains(&y)
            })
            .count();
        let freq = hits as f64 / n as f64;
        let se = (0.98 * 0.02 / n as f64).sqrt();
        assert!((freq - 0.98).abs() < 4.0 * se, "freq {freq}");
    }

    #[test]
    fn sw_perturb_stays_in_domain() {
        let mut rng = RngSeed(1).rng();
        for &eps0 in &[0.05, 0.5, 1.0, 3.0, 20.0] {
            let s = sw_params(eps0).unwrap();
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                for _ in 0..200 {
                    let y = sw_perturb(&s, x, &mut rng).unwrap();
                    assert!((0.0..=1.0).contains(&y));
                }
            }
        }
        assert!(sw_perturb(&sw_params(1.0).unwrap(), 1.5, &mut rng).is_err());
    }

    #[test]
    fn sw_in_interval_frequency_matches_mass() {
        let s = sw_params(1.0).unwrap();
        let mut rng = RngSeed(99).rng();
        let (lo, hi) = s.interval(0.5);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| (lo..=hi).contains(&sw_perturb(&s, 0.5, &mut rng).unwrap()))
            .count();
        let m = s.interval_mass();
        let se = (m * (1.0 - m) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - m).abs() < 3.0 * se);
    }

    #[test]
    fn series_perturbation_is_seeded() {
        let x = NormalizedSeries::new(vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let budget = split_budget(5.0, 5).unwrap();
        let a = sw_perturb_series(&x, &budget, &mut RngSeed(3).rng()).unwrap();
        let b = sw_perturb_series(&x, &budget, &mut RngSeed(3).rng()).unwrap();
        assert_eq!(a, b);
        let single = NormalizedSeries::new(vec![0.4]).unwrap();
        assert_eq!(
            sw_perturb_series(&single, &budget, &mut RngSeed(3).rng())
                .unwrap()
                .len(),
            1
        );

        let la = laplace_perturb_series(&x, &budget, &mut RngSeed(3).rng()).unwrap();
        let lb = laplace_perturb_series(&x, &budget, &mut RngSeed(3).rng()).unwrap();
        assert_eq!(la, lb);
    }

    #[test]
    fn near_noiseless_sw_mean() {
        let x = NormalizedSeries::new(vec![0.5; 10_000]).unwrap();
        let budget = split_budget(250.0, 5).unwrap();
        let y = sw_perturb_series(&x, &budget, &mut RngSeed(11).rng()).unwrap();
        let mean = y.values().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 0.5).abs() < 0.02);
    }

    #[test]
    fn laplace_noise_variance() {
        let x = NormalizedSeries::new(vec![0.5; 1_000_000]).unwrap();
        let budget = split_budget(1.0, 1).unwrap();
        let y = laplace_perturb_series(&x, &budget, &mut RngSeed(5).rng()).unwrap();
        let n = y.len() as f64;
        let mean = y.values().iter().sum::<f64>() / n;
        let var = y.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // Var(Lap(0, 1)) = 2; the sample variance has standard error ~ 0.0045.
        assert!((var - 2.0).abs() < 0.03, "var {var}");
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn laplace_vanishes_at_huge_budget() {
        let x = NormalizedSeries::new(vec![0.2, 0.8, 0.5]).unwrap();
        let budget = split_budget(1e12, 1).unwrap();
        let y = laplace_perturb_series(&x, &budget, &mut RngSeed(5).rng()).unwrap();
        for (a, b) in x.values().iter().zip(y.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
