//! Comparison methods run under the same privacy accounting as CPR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{laplace_noise, laplace_perturb_series, split_budget, sw_perturb_series};
use crate::signal::{mirror_pad, normalize, NormalizedSeries, RawSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub moving_window: usize,
    pub filter_sigma: f64,
    pub laplace_smooth_window: usize,
    pub lbd_threshold_frac: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            moving_window: 9,
            filter_sigma: 2.0,
            laplace_smooth_window: 9,
            lbd_threshold_frac: 0.5,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("moving_window", self.moving_window),
            ("laplace_smooth_window", self.laplace_smooth_window),
        ] {
            if w == 0 || w % 2 == 0 {
                return Err(Error::domain(format!(
                    "{name} must be odd and positive, got {w}"
                )));
            }
        }
        if self.filter_sigma.is_nan() || self.filter_sigma <= 0.0 {
            return Err(Error::domain("filter_sigma must be positive"));
        }
        if !(self.lbd_threshold_frac > 0.0 && self.lbd_threshold_frac < 1.0) {
            return Err(Error::domain("lbd_threshold_frac must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Centered convolution with mirror-reflected edges. The reach is capped at
/// `n - 1` samples on very short series.
pub fn convolve_mirror(x: &[f64], kernel: &[f64]) -> Result<Vec<f64>> {
    if kernel.len().is_multiple_of(2) {
        return Err(Error::domain("kernel length must be odd"));
    }
    let half = kernel.len() / 2;
    let reach = half.min(x.len().saturating_sub(1));
    let kernel = &kernel[half - reach..=half + reach];
    let padded = mirror_pad(x, reach)?;
    Ok(padded
        .windows(kernel.len())
        .map(|win| win.iter().zip(kernel).map(|(a, k)| a * k).sum())
        .collect())
}

pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::domain(
            "moving-average window must be odd and positive",
        ));
    }
    let half = (window / 2).min(x.len().saturating_sub(1));
    let width = 2 * half + 1;
    convolve_mirror(x, &vec![1.0 / width as f64; width])
}

/// Gaussian taps truncated at four standard deviations, summing to one.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

pub fn gaussian_filter(x: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::domain("filter sigma must be positive"));
    }
    convolve_mirror(x, &gaussian_kernel(sigma))
}

fn clipped(values: Vec<f64>) -> Result<NormalizedSeries> {
    NormalizedSeries::new(values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// The perturbed stream itself is the reconstruction.
pub fn baseline_sw_direct<R: Rng + ?Sized>(
    x: &RawSeries,
    epsilon: f64,
    w: usize,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    let budget = split_budget(epsilon, w)?;
    sw_perturb_series(&normalize(x), &budget, rng)
}

pub fn baseline_sw_moving<R: Rng + ?Sized>(
    x: &RawSeries,
    epsilon: f64,
    w: usize,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    let y = baseline_sw_direct(x, epsilon, w, rng)?;
    clipped(moving_average(y.values(), cfg.moving_window)?)
}

pub fn baseline_sw_filter<R: Rng + ?Sized>(
    x: &RawSeries,
    epsilon: f64,
    w: usize,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    let y = baseline_sw_direct(x, epsilon, w, rng)?;
    clipped(gaussian_filter(y.values(), cfg.filter_sigma)?)
}

/// Laplace noise, then moving-average smoothing, then clipping to `[0, 1]`.
pub fn baseline_laplace_smooth<R: Rng + ?Sized>(
    x: &RawSeries,
    epsilon: f64,
    w: usize,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    let budget = split_budget(epsilon, w)?;
    let noisy = laplace_perturb_series(&normalize(x), &budget, rng)?;
    clipped(moving_average(noisy.values(), cfg.laplace_smooth_window)?)
}

/// Per-timestamp privacy spend in fixed-point units.
///
/// A whole window budget `epsilon` is `w * 2^32` units, so the even
/// per-event shares used below are exact and audits need no tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    pub epsilon: f64,
    pub w: usize,
    spends: Vec<u64>,
}

impl BudgetLedger {
    const SHARE: u64 = 1 << 32;

    pub fn new(epsilon: f64, w: usize) -> Self {
        Self {
            epsilon,
            w,
            spends: Vec::new(),
        }
    }

    pub fn window_units(&self) -> u64 {
        self.w as u64 * Self::SHARE
    }

    pub fn to_epsilon(&self, units: u64) -> f64 {
        self.epsilon * units as f64 / self.window_units() as f64
    }

    pub fn record(&mut self, units: u64) {
        self.spends.push(units);
    }

    pub fn spends(&self) -> &[u64] {
        &self.spends
    }

    /// Largest total over any length-`w` run of timestamps, in units.
    pub fn max_window_units(&self) -> u64 {
        if self.spends.is_empty() {
            return 0;
        }
        let w = self.w.min(self.spends.len());
        let mut sum: u64 = self.spends[..w].iter().sum();
        let mut best = sum;
        for t in w..self.spends.len() {
            sum = sum + self.spends[t] - self.spends[t - w];
            best = best.max(sum);
        }
        best
    }

    /// True when no length-`w` window spends more than `epsilon`.
    pub fn audit(&self) -> bool {
        self.max_window_units() <= self.window_units()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbdOutput {
    pub series: NormalizedSeries,
    pub ledger: BudgetLedger,
    pub published: Vec<bool>,
}

/// Adaptive budget distribution.
///
/// Every timestamp spends `epsilon / 2w` on a noisy probe of how far the
/// current value has moved from the last release. Half of the window budget
/// is reserved for releases: a release takes half of whatever that half has
/// left after the previous `w - 1` timestamps. The probe's squared distance,
/// debiased by its own noise variance, is compared against
/// `lbd_threshold_frac` times the noise variance the release would carry;
/// when it is smaller the previous release is repeated and nothing more is
/// spent.
pub fn baseline_lbd<R: Rng + ?Sized>(
    x: &RawSeries,
    epsilon: f64,
    w: usize,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<LbdOutput> {
    split_budget(epsilon, w)?;
    let xs = normalize(x);
    let mut ledger = BudgetLedger::new(epsilon, w);
    let probe_units = BudgetLedger::SHARE / 2;
    let pool_units = ledger.window_units() / 2;
    let probe_scale = 1.0 / ledger.to_epsilon(probe_units);

    let mut out = Vec::with_capacity(xs.len());
    let mut published = Vec::with_capacity(xs.len());
    let mut releases: Vec<u64> = Vec::with_capacity(xs.len());
    let mut last: Option<f64> = None;
    for &v in xs.values() {
        let probe = v + laplace_noise(probe_scale, rng);
        let recent: u64 = releases[releases.len().saturating_sub(w - 1)..]
            .iter()
            .sum();
        let release_units = (pool_units - recent) / 2;
        let publish = match last {
            None => release_units > 0,
            Some(r) if release_units > 0 => {
                let release_scale = 1.0 / ledger.to_epsilon(release_units);
                let dis = (probe - r).powi(2) - 2.0 * probe_scale * probe_scale;
                dis > cfg.lbd_threshold_frac * 2.0 * release_scale * release_scale
            }
            Some(_) => false,
        };
        let value = if publish {
            let scale = 1.0 / ledger.to_epsilon(release_units);
            (v + laplace_noise(scale, rng)).clamp(0.0, 1.0)
        } else {
            last.unwrap_or(0.5)
        };
        let spent = if publish { release_units } else { 0 };
        releases.push(spent);
        ledger.record(probe_units + spent);
        published.push(publish);
        last = Some(value);
        out.push(value);
    }
    Ok(LbdOutput {
        series: NormalizedSeries::new(out)?,
        ledger,
        published,
    })
}
