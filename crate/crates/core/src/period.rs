//! Cycle recovery: dominant-period estimation on a privatized stream.
//!
//! Each probing scale slides half-overlapping windows over the stream,
//! proposes candidate periods from the strongest FFT bins of each window,
//! and keeps the candidate whose consecutive segments repeat best. Window
//! winners are reduced to one median estimate per scale, and the scales
//! vote on a single period. An optional final pass folds the whole stream
//! at every period near the vote and keeps the sharpest fold.

use std::cmp::Ordering;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::NormalizedSeries;

/// Bins whose amplitude per sample falls below this carry no usable peak.
const MIN_PEAK_AMPLITUDE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Window lengths probed, in samples.
    pub scales: Vec<usize>,
    pub t_min: usize,
    pub t_max: usize,
    /// Number of spectral peaks kept per window.
    pub peaks: usize,
    /// Relative vote tolerance.
    pub tau: f64,
    pub hann: bool,
    /// Fold-based refinement of the voted period.
    pub refine: bool,
}

impl DetectionConfig {
    /// Defaults for a stream of length `n`: scales `n/8, n/4, n/2` (at least
    /// `4 * t_min`), periods in `[2, n/3]`, five peaks, `tau = 0.1`, Hann on.
    pub fn for_length(n: usize) -> Result<Self> {
        let t_min = 2;
        let t_max = n / 3;
        let floor = 4 * t_min;
        let mut scales: Vec<usize> = [n / 8, n / 4, n / 2]
            .iter()
            .map(|&s| s.max(floor).min(n))
            .collect();
        scales.dedup();
        let cfg = Self {
            scales,
            t_min,
            t_max,
            peaks: 5,
            tau: 0.1,
            hann: true,
            refine: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::domain("at least one probing scale is required"));
        }
        if self.t_min < 2 || self.t_min > self.t_max {
            return Err(Error::domain(format!(
                "period range [{}, {}] must satisfy 2 <= t_min <= t_max",
                self.t_min, self.t_max
            )));
        }
        if let Some(s) = self.scales.iter().find(|&&s| s < 2 * self.t_min) {
            return Err(Error::domain(format!(
                "scale {s} cannot hold two repeats of t_min = {}",
                self.t_min
            )));
        }
        if self.peaks < 1 {
            return Err(Error::domain("peak count must be at least 1"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::domain(format!(
                "tau {} must lie in (0, 1)",
                self.tau
            )));
        }
        Ok(())
    }

    /// Vote tolerance `max(1, ceil(tau * T))`.
    pub fn tolerance(&self, period: usize) -> usize {
        ((self.tau * period as f64).ceil() as usize).max(1)
    }

    /// Median of the probing scales; scales at or below it count as short.
    pub fn scale_split(&self) -> f64 {
        let mut s = self.scales.clone();
        s.sort_unstable();
        let m = s.len();
        if m % 2 == 1 {
            s[m / 2] as f64
        } else {
            (s[m / 2 - 1] + s[m / 2]) as f64 / 2.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEstimate {
    pub t_star: usize,
    pub rep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleEstimate {
    pub scale: usize,
    pub period: usize,
    pub rep: f64,
}

/// Full trace of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodReport {
    pub scales: Vec<ScaleEstimate>,
    pub voted: usize,
    pub period: usize,
}

/// Length-`s` windows with hop `floor(s / 2)`, while the window fits.
pub fn window_slices(x: &[f64], s: usize) -> Result<Vec<&[f64]>> {
    if s == 0 || s > x.len() {
        return Err(Error::domain(format!(
            "window length {s} must lie in [1, {}]",
            x.len()
        )));
    }
    let hop = (s / 2).max(1);
    Ok((0..=x.len() - s)
        .step_by(hop)
        .map(|i| &x[i..i + s])
        .collect())
}

/// Symmetric Hann window; both endpoints are zero.
pub fn hann_window(s: usize) -> Vec<f64> {
    if s < 2 {
        return vec![1.0; s];
    }
    let d = (s - 1) as f64;
    (0..s)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / d).cos()))
        .collect()
}

pub fn preprocess_window(z: &[f64], hann: bool) -> Vec<f64> {
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let mut out: Vec<f64> = z.iter().map(|v| v - mean).collect();
    if hann {
        for (v, h) in out.iter_mut().zip(hann_window(z.len())) {
            *v *= h;
        }
    }
    out
}

/// Period for FFT bin `k` of a length-`n_fft` transform.
pub fn bin_to_period(n_fft: usize, k: usize) -> usize {
    (n_fft as f64 / k as f64).round() as usize
}

/// Candidate periods from the top-`peaks` non-DC bins of a preprocessed window.
pub fn spectral_candidates(z: &[f64], config: &DetectionConfig) -> Vec<usize> {
    let n_fft = z.len().next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    candidates_with(fft.as_ref(), z, config)
}

fn candidates_with(fft: &dyn Fft<f64>, z: &[f64], config: &DetectionConfig) -> Vec<usize> {
    let n_fft = fft.len();
    let mut buf: Vec<Complex<f64>> = z
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    fft.process(&mut buf);

    let floor = (MIN_PEAK_AMPLITUDE * z.len() as f64).powi(2);
    let mut bins: Vec<(usize, f64)> = (1..=n_fft / 2)
        .map(|k| (k, buf[k].norm_sqr()))
        .filter(|&(_, p)| p > floor)
        .collect();
    bins.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut out = Vec::with_capacity(config.peaks);
    for &(k, _) in bins.iter().take(config.peaks) {
        let t = bin_to_period(n_fft, k);
        if (config.t_min..=config.t_max).contains(&t) && !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn centered(seg: &[f64]) -> Vec<f64> {
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    seg.iter().map(|v| v - mean).collect()
}

fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Mean adjacent cosine similarity of up to three de-meaned length-`period`
/// segments from the start of `z`. `None` when fewer than two fit.
pub fn repeatability(z: &[f64], period: usize) -> Result<Option<f64>> {
    if period < 1 {
        return Err(Error::domain("period must be at least 1"));
    }
    let fits = z.len() / period;
    if fits < 2 {
        return Ok(None);
    }
    let segments: Vec<Vec<f64>> = z
        .chunks_exact(period)
        .take(fits.min(3))
        .map(centered)
        .collect();
    let sims: Vec<f64> = segments
        .windows(2)
        .map(|w| cosine_similarity(&w[0], &w[1]))
        .collect();
    Ok(Some(sims.iter().sum::<f64>() / sims.len() as f64))
}

/// The most repeatable candidate; ties go to the smaller period.
pub fn best_window_candidate(z: &[f64], candidates: &[usize]) -> Option<WindowEstimate> {
    candidates
        .iter()
        .filter_map(|&t| {
            repeatability(z, t)
                .ok()
                .flatten()
                .map(|rep| WindowEstimate { t_star: t, rep })
        })
        .fold(None, |best: Option<WindowEstimate>, cur| match best {
            Some(b) if b.rep > cur.rep || (b.rep == cur.rep && b.t_star <= cur.t_star) => Some(b),
            _ => Some(cur),
        })
}

fn lower_median<T: Copy + Ord>(v: &mut [T]) -> T {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// Median-aggregates window winners at one scale.
pub fn aggregate_windows(scale: usize, winners: &[WindowEstimate]) -> Option<ScaleEstimate> {
    if winners.is_empty() {
        return None;
    }
    let mut periods: Vec<usize> = winners.iter().map(|w| w.t_star).collect();
    let mut reps: Vec<f64> = winners.iter().map(|w| w.rep).collect();
    Some(ScaleEstimate {
        scale,
        period: lower_median(&mut periods),
        rep: median(&mut reps),
    })
}

pub fn scale_estimate(
    x: &NormalizedSeries,
    scale: usize,
    config: &DetectionConfig,
) -> Result<Option<ScaleEstimate>> {
    let windows = window_slices(x.values(), scale)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(scale.next_power_of_two());
    Ok(scale_estimate_with(&fft, &windows, scale, config))
}

fn scale_estimate_with(
    fft: &Arc<dyn Fft<f64>>,
    windows: &[&[f64]],
    scale: usize,
    config: &DetectionConfig,
) -> Option<ScaleEstimate> {
    let winners: Vec<WindowEstimate> = windows
        .iter()
        .filter_map(|z| {
            let prepped = preprocess_window(z, config.hann);
            let cands = candidates_with(fft.as_ref(), &prepped, config);
            best_window_candidate(z, &cands)
        })
        .collect();
    aggregate_windows(scale, &winners)
}

#[derive(Debug, Clone, Copy)]
struct Tally {
    period: usize,
    support: usize,
    mean_rep: f64,
    spread: usize,
}

impl Tally {
    /// Higher support, then higher repeatability, then closer supporters,
    /// then the smaller period.
    fn beats(&self, other: &Tally) -> bool {
        self.support
            .cmp(&other.support)
            .then(self.mean_rep.total_cmp(&other.mean_rep))
            .then(other.spread.cmp(&self.spread))
            .then(other.period.cmp(&self.period))
            == Ordering::Greater
    }
}

/// Cross-scale tolerance vote over the per-scale estimates.
pub fn consensus_vote(estimates: &[ScaleEstimate], config: &DetectionConfig) -> Result<usize> {
    if estimates.is_empty() {
        return Err(Error::domain(
            "consensus vote needs at least one scale estimate",
        ));
    }
    let split = config.scale_split();
    let mut best_both: Option<Tally> = None;
    let mut best_any: Option<Tally> = None;

    for period in config.t_min..=config.t_max {
        let delta = config.tolerance(period);
        let (mut support, mut rep_sum, mut spread) = (0usize, 0.0f64, 0usize);
        let (mut short, mut long) = (false, false);
        for e in estimates {
            let dev = e.period.abs_diff(period);
            if dev <= delta {
                support += 1;
                rep_sum += e.rep;
                spread += dev;
                if e.scale as f64 <= split {
                    short = true;
                } else {
                    long = true;
                }
            }
        }
        if support == 0 {
            continue;
        }
        let tally = Tally {
            period,
            support,
            mean_rep: rep_sum / support as f64,
            spread,
        };
        if best_any.is_none_or(|b| tally.beats(&b)) {
            best_any = Some(tally);
        }
        if short && long && best_both.is_none_or(|b| tally.beats(&b)) {
            best_both = Some(tally);
        }
    }
    best_both
        .or(best_any)
        .map(|t| t.period)
        .ok_or(Error::DetectionFailed)
}

/// Between-phase to within-phase variance ratio of the stream folded at `period`.
pub fn fold_statistic(x: &[f64], period: usize) -> f64 {
    let n = x.len();
    if period < 2 || period >= n {
        return f64::NEG_INFINITY;
    }
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for (t, &v) in x.iter().enumerate() {
        sums[t % period] += v;
        counts[t % period] += 1;
    }
    let grand = x.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| c as f64 * (m - grand).powi(2))
        .sum();
    let within: f64 = x
        .iter()
        .enumerate()
        .map(|(t, v)| (v - means[t % period]).powi(2))
        .sum();
    let between = between / (period - 1) as f64;
    let within = within / (n - period) as f64;
    if within == 0.0 {
        if between > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        between / within
    }
}

/// Re-selects the period within the vote tolerance of `voted` by folding the
/// whole stream. Falls back to `voted` when no neighbour folds sharper.
pub fn refine_period(x: &[f64], voted: usize, config: &DetectionConfig) -> usize {
    let delta = config.tolerance(voted);
    let lo = voted.saturating_sub(delta).max(config.t_min);
    let hi = (voted + delta).min(config.t_max).min(x.len() / 2);
    let mut best = (voted, fold_statistic(x, voted));
    for period in lo..=hi {
        let f = fold_statistic(x, period);
        if f > best.1 || (f == best.1 && period < best.0) {
            best = (period, f);
        }
    }
    best.0
}

pub fn detect_period_detailed(
    x: &NormalizedSeries,
    config: &DetectionConfig,
) -> Result<PeriodReport> {
    config.validate()?;
    let longest = *config.scales.iter().max().expect("validated nonempty");
    if longest > x.len() {
        return Err(Error::domain(format!(
            "largest scale {longest} exceeds series length {}",
            x.len()
        )));
    }
    let scales: Vec<ScaleEstimate> = config
        .scales
        .par_iter()
        .map(|&s| {
            let windows = window_slices(x.values(), s)?;
            let fft = FftPlanner::<f64>::new().plan_fft_forward(s.next_power_of_two());
            Ok(scale_estimate_with(&fft, &windows, s, config))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    if scales.is_empty() {
        return Err(Error::DetectionFailed);
    }
    let voted = consensus_vote(&scales, config)?;
    let period = if config.refine {
        refine_period(x.values(), voted, config)
    } else {
        voted
    };
    Ok(PeriodReport {
        scales,
        voted,
        period,
    })
}

/// Estimates the dominant period of a privatized stream.
pub fn detect_period(x: &NormalizedSeries, config: &DetectionConfig) -> Result<usize> {
    detect_period_detailed(x, config).map(|r| r.period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(scales: Vec<usize>, tau: f64) -> DetectionConfig {
        DetectionConfig {
            scales,
            t_min: 2,
            t_max: 100,
            peaks: 5,
            tau,
            hann: true,
            refine: false,
        }
    }

    fn est(scale: usize, period: usize, rep: f64) -> ScaleEstimate {
        ScaleEstimate { scale, period, rep }
    }

    #[test]
    fn window_slice_counts() {
        let x = vec![0.0; 10];
        let starts = |n: usize, s: usize| {
            let x = vec![0.0; n];
            let base = x.as_ptr() as usize;
            window_slices(&x, s)
                .unwrap()
                .iter()
                .map(|w| (w.as_ptr() as usize - base) / 8)
                .collect::<Vec<_>>()
        };
        assert_eq!(starts(10, 4), vec![0, 2, 4, 6]);
        assert_eq!(starts(4, 4), vec![0]);
        assert_eq!(starts(9, 6), vec![0, 3]);
        assert!(window_slices(&x, 11).is_err());
    }

    #[test]
    fn preprocess_examples() {
        assert_eq!(preprocess_window(&[1.0; 4], false), vec![0.0; 4]);
        let z = preprocess_window(&[0.3, 0.9, 0.1, 0.4, 0.7], false);
        assert!(z.iter().sum::<f64>().abs() < 1e-12);
        assert_eq!(hann_window(2), vec![0.0, 0.0]);
        assert_eq!(preprocess_window(&[0.0, 1.0], true), vec![0.0, 0.0]);
    }

    #[test]
    fn pure_tone_bin() {
        let z: Vec<f64> = (0..64)
            .map(|t| (2.0 * PI * t as f64 / 16.0).sin())
            .collect();
        let c = cfg(vec![64], 0.1);
        let prepped = preprocess_window(&z, false);
        let cands = spectral_candidates(&prepped, &c);
        assert_eq!(cands[0], 16);
        assert!(spectral_candidates(&[0.0; 64], &c).is_empty());
        assert_eq!(bin_to_period(100, 3), 33);
    }

    #[test]
    fn repeatability_examples() {
        let z = [1.0, 2.0, 1.0, 2.0, 1.0, 2.0];
        assert!((repeatability(&z, 2).unwrap().unwrap() - 1.0).abs() < 1e-12);
        assert!((repeatability(&z, 3).unwrap().unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(repeatability(&z, 4).unwrap(), None);
        assert!(repeatability(&z, 0).is_err());
        // Flat segments carry no evidence of repetition.
        assert_eq!(repeatability(&[0.5; 6], 2).unwrap(), Some(0.0));
    }

    #[test]
    fn best_candidate_examples() {
        let z: Vec<f64> = (0..64)
            .map(|t| (2.0 * PI * t as f64 / 16.0).sin())
            .collect();
        let w = best_window_candidate(&z, &[16]).unwrap();
        assert_eq!(w.t_star, 16);
        assert!((w.rep - 1.0).abs() < 1e-12);
        assert_eq!(best_window_candidate(&z, &[]), None);
        // Periods 8 and 16 both repeat perfectly on a period-8 tone.
        let z8: Vec<f64> = (0..64).map(|t| (2.0 * PI * t as f64 / 8.0).sin()).collect();
        assert_eq!(best_window_candidate(&z8, &[16, 8]).unwrap().t_star, 8);
    }

    #[test]
    fn aggregate_examples() {
        let w = |t| WindowEstimate {
            t_star: t,
            rep: 0.5,
        };
        assert_eq!(
            aggregate_windows(64, &[w(20), w(20), w(20)])
                .unwrap()
                .period,
            20
        );
        assert_eq!(
            aggregate_windows(64, &[w(40), w(18), w(20), w(20)])
                .unwrap()
                .period,
            20
        );
        assert_eq!(aggregate_windows(64, &[]), None);
    }

    #[test]
    fn vote_examples() {
        let c = cfg(vec![64, 128, 256, 512], 0.1);
        let all20: Vec<_> = c.scales.iter().map(|&s| est(s, 20, 0.8)).collect();
        assert_eq!(consensus_vote(&all20, &c).unwrap(), 20);

        let mixed = [
            est(64, 10, 0.5),
            est(128, 10, 0.5),
            est(256, 10, 0.5),
            est(512, 21, 0.9),
        ];
        assert_eq!(consensus_vote(&mixed, &c).unwrap(), 10);

        let c = cfg(vec![64, 128, 256, 512], 0.05);
        let split = [
            est(64, 20, 0.6),
            est(128, 20, 0.6),
            est(256, 40, 0.6),
            est(512, 40, 0.6),
        ];
        assert_eq!(consensus_vote(&split, &c).unwrap(), 20);
        let split_rep = [
            est(64, 20, 0.5),
            est(128, 20, 0.5),
            est(256, 40, 0.7),
            est(512, 40, 0.7),
        ];
        assert_eq!(consensus_vote(&split_rep, &c).unwrap(), 40);

        assert!(consensus_vote(&[], &c).is_err());
    }

    #[test]
    fn vote_prefers_fundamental() {
        let c = cfg(vec![64, 128, 256, 512], 0.05);
        let e = [
            est(64, 20, 0.9),
            est(128, 40, 0.9),
            est(256, 20, 0.9),
            est(512, 40, 0.9),
        ];
        assert_eq!(consensus_vote(&e, &c).unwrap(), 20);
    }

    #[test]
    fn fold_statistic_peaks_at_true_period() {
        let x: Vec<f64> = (0..400)
            .map(|t| {
                0.5 + 0.4 * (2.0 * PI * t as f64 / 20.0).sin() + 0.01 * ((t * 7919) % 13) as f64
            })
            .collect();
        let f20 = fold_statistic(&x, 20);
        assert!(f20 > fold_statistic(&x, 19));
        assert!(f20 > fold_statistic(&x, 21));
        let c = cfg(vec![100, 200], 0.1);
        assert_eq!(refine_period(&x, 19, &c), 20);
    }

    #[test]
    fn constant_stream_fails_detection() {
        let x = NormalizedSeries::new(vec![0.5; 400]).unwrap();
        let c = DetectionConfig::for_length(400).unwrap();
        assert!(matches!(detect_period(&x, &c), Err(Error::DetectionFailed)));
    }

    #[test]
    fn config_validation() {
        assert!(DetectionConfig::for_length(1000).is_ok());
        let d = DetectionConfig::for_length(1000).unwrap();
        assert_eq!(d.scales, vec![125, 250, 500]);
        assert_eq!(d.t_max, 333);
        let mut bad = d.clone();
        bad.tau = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = d.clone();
        bad.scales = vec![3];
        assert!(bad.validate().is_err());
        let mut bad = d;
        bad.t_min = 1;
        assert!(bad.validate().is_err());
    }
}
