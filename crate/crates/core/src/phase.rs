//! Phase recovery: per-phase pooling, square-wave-aware EM decoding, KDE
//! mode summarization, and the end-to-end reconstruction pipeline.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{split_budget, sw_params, sw_perturb_series, BudgetSplit, SwParams};
use crate::period::{detect_period_detailed, DetectionConfig, PeriodReport};
use crate::signal::{mirror_pad, normalize, tile_crop, CycleTemplate, NormalizedSeries, RawSeries};

/// Points in the dense grid searched for the KDE mode.
pub const MODE_GRID: usize = 512;

/// Privatized samples pooled by within-cycle phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGroups {
    pub period: usize,
    pub repeats: usize,
    pub groups: Vec<Vec<f64>>,
}

/// Mirror-pads by `period - 1` and collects every `period`-th padded sample.
pub fn phase_groups(x: &NormalizedSeries, period: usize) -> Result<PhaseGroups> {
    if period < 1 || period > x.len() {
        return Err(Error::domain(format!(
            "period {period} must lie in [1, {}]",
            x.len()
        )));
    }
    let padded = mirror_pad(x.values(), period - 1)?;
    let repeats = padded.len() / period;
    let groups = (0..period)
        .map(|i| (0..repeats).map(|m| padded[i + m * period]).collect())
        .collect();
    Ok(PhaseGroups {
        period,
        repeats,
        groups,
    })
}

/// How the randomizer likelihood is evaluated at a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKernel {
    /// Density at the cell centre, `f(y | v_b)`.
    Point,
    /// Density averaged over the cell. Stays informative when the
    /// high-probability interval is narrower than a cell.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    /// Number of grid cells on `[0, 1]`.
    pub grid: usize,
    pub max_iters: usize,
    /// Stop once no cell probability moves by this much.
    pub tol: f64,
    pub kernel: GridKernel,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            grid: 256,
            max_iters: 200,
            tol: 1e-6,
            kernel: GridKernel::Cell,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::domain("EM grid needs at least two cells"));
        }
        if self.max_iters < 1 {
            return Err(Error::domain("EM needs at least one iteration"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::domain("EM tolerance must be positive"));
        }
        Ok(())
    }
}

/// Probability mass over grid points `v_b = (b - 1/2) / B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPmf {
    probs: Vec<f64>,
}

impl LatentPmf {
    pub fn uniform(cells: usize) -> Self {
        Self {
            probs: vec![1.0 / cells as f64; cells],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn grid_point(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.probs.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(b, p)| p * self.grid_point(b))
            .sum()
    }
}

/// Cells of one observation's likelihood that sit on the high level:
/// whole cells in `full`, plus up to two partially covered edge cells.
struct Coverage {
    full: (usize, usize),
    partial: [(usize, f64); 2],
    partial_len: usize,
}

impl Coverage {
    /// `[lo, hi]` is the set of latent values whose interval contains the
    /// observation; it is always a single interval.
    fn new(params: &SwParams, y: f64, cells: usize, kernel: GridKernel) -> Self {
        let b = params.b;
        let lo = if y <= 2.0 * b { 0.0 } else { y - b };
        let hi = if y >= 1.0 - 2.0 * b { 1.0 } else { y + b };
        let bf = cells as f64;
        match kernel {
            GridKernel::Point => {
                let first = (lo * bf - 0.5).ceil().max(0.0) as usize;
                let last = ((hi * bf - 0.5).floor() + 1.0).clamp(0.0, bf) as usize;
                Coverage {
                    full: (first, last.max(first)),
                    partial: [(0, 0.0); 2],
                    partial_len: 0,
                }
            }
            GridKernel::Cell => {
                let lo_cell = ((lo * bf).floor() as usize).min(cells - 1);
                let hi_cell = ((hi * bf).floor() as usize).min(cells - 1);
                let mut cov = Coverage {
                    full: (0, 0),
                    partial: [(0, 0.0); 2],
                    partial_len: 0,
                };
                if lo_cell == hi_cell {
                    // `hi - lo` cancels to zero once b drops below the ulp of y.
                    let width = match (lo == 0.0, hi == 1.0) {
                        (true, true) => 1.0,
                        (true, false) => y + b,
                        (false, true) => 1.0 - y + b,
                        (false, false) => 2.0 * b,
                    };
                    cov.push(lo_cell, width * bf);
                    return cov;
                }
                let lo_frac = (lo_cell + 1) as f64 - lo * bf;
                let hi_frac = hi * bf - hi_cell as f64;
                cov.push(lo_cell, lo_frac);
                cov.push(hi_cell, hi_frac);
                cov.full = (lo_cell + 1, hi_cell);
                cov
            }
        }
    }

    fn push(&mut self, cell: usize, frac: f64) {
        self.partial[self.partial_len] = (cell, frac.clamp(0.0, 1.0));
        self.partial_len += 1;
    }

    fn partials(&self) -> &[(usize, f64)] {
        &self.partial[..self.partial_len]
    }

    /// `sum_b weights_b * coverage_b`, with `prefix` the running sum of `weights`.
    fn dot(&self, prefix: &[f64], weights: &[f64]) -> f64 {
        let (a, b) = self.full;
        let mut s = prefix[b] - prefix[a];
        for &(c, f) in self.partials() {
            s += weights[c] * f;
        }
        s
    }
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for x in v {
        acc += x;
        out.push(acc);
    }
    out
}

/// State shared by the E- and M-steps. Likelihoods are kept in units of
/// the low density level: `1 + (e^eps0 - 1) * coverage`.
struct Decoder {
    coverage: Vec<Coverage>,
    lift: f64,
    cells: usize,
}

impl Decoder {
    fn new(observations: &[f64], params: &SwParams, config: &EmConfig) -> Self {
        Self {
            coverage: observations
                .iter()
                .map(|&y| Coverage::new(params, y, config.grid, config.kernel))
                .collect(),
            lift: params.eps0.exp_m1(),
            cells: config.grid,
        }
    }

    /// Per-observation normalizers `sum_b pi_b L_jb`.
    fn normalizers(&self, pi: &[f64]) -> Vec<f64> {
        let prefix = prefix_sums(pi);
        let total = prefix[self.cells];
        self.coverage
            .iter()
            .map(|c| total + self.lift * c.dot(&prefix, pi))
            .collect()
    }

    fn step(&self, pi: &[f64]) -> Vec<f64> {
        let norms = self.normalizers(pi);
        let inv_sum: f64 = norms.iter().map(|d| 1.0 / d).sum();
        let mut diff = vec![0.0; self.cells + 1];
        let mut edge = vec![0.0; self.cells];
        for (c, d) in self.coverage.iter().zip(&norms) {
            let w = 1.0 / d;
            diff[c.full.0] += w;
            diff[c.full.1] -= w;
            for &(cell, f) in c.partials() {
                edge[cell] += w * f;
            }
        }
        let m = self.coverage.len() as f64;
        let mut run = 0.0;
        let mut next: Vec<f64> = (0..self.cells)
            .map(|b| {
                run += diff[b];
                pi[b] * (inv_sum + self.lift * (run + edge[b])) / m
            })
            .collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= total);
        next
    }

    /// Posterior means `sum_b r_jb v_b`.
    fn posterior_means(&self, pmf: &LatentPmf) -> Vec<f64> {
        let pi = pmf.probs();
        let weighted: Vec<f64> = pi
            .iter()
            .enumerate()
            .map(|(b, p)| p * pmf.grid_point(b))
            .collect();
        let prefix_pi = prefix_sums(pi);
        let prefix_w = prefix_sums(&weighted);
        let total_pi = prefix_pi[self.cells];
        let total_w = prefix_w[self.cells];
        self.coverage
            .iter()
            .map(|c| {
                let d = total_pi + self.lift * c.dot(&prefix_pi, pi);
                let n = total_w + self.lift * c.dot(&prefix_w, &weighted);
                n / d
            })
            .collect()
    }
}

/// Observed-data log-likelihood of `observations` under `pmf`, using the
/// same grid kernel as the decoder.
pub fn log_likelihood(
    observations: &[f64],
    params: &SwParams,
    pmf: &LatentPmf,
    kernel: GridKernel,
) -> f64 {
    let config = EmConfig {
        grid: pmf.probs().len(),
        kernel,
        ..EmConfig::default()
    };
    let dec = Decoder::new(observations, params, &config);
    let low = params.low().ln();
    dec.normalizers(pmf.probs())
        .iter()
        .map(|d| low + d.ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub pmf: LatentPmf,
    pub pseudo_samples: Vec<f64>,
    pub iterations: usize,
}

pub fn em_sw_decode(observations: &[f64], params: &SwParams, config: &EmConfig) -> Result<Decoded> {
    em_sw_decode_observed(observations, params, config, |_, _| {})
}

/// As [`em_sw_decode`], calling `observe` with the pmf after every iteration.
pub fn em_sw_decode_observed(
    observations: &[f64],
    params: &SwParams,
    config: &EmConfig,
    mut observe: impl FnMut(usize, &LatentPmf),
) -> Result<Decoded> {
    config.validate()?;
    if observations.is_empty() {
        return Err(Error::domain("EM decoding needs at least one observation"));
    }
    if observations.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::domain("observations must lie in [0, 1]"));
    }
    let dec = Decoder::new(observations, params, config);
    let mut pmf = LatentPmf::uniform(config.grid);
    let mut iterations = 0;
    while iterations < config.max_iters {
        let next = dec.step(pmf.probs());
        let change = next
            .iter()
            .zip(pmf.probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pmf = LatentPmf { probs: next };
        iterations += 1;
        observe(iterations, &pmf);
        if change < config.tol {
            break;
        }
    }
    let pseudo_samples = dec.posterior_means(&pmf);
    Ok(Decoded {
        pmf,
        pseudo_samples,
        iterations,
    })
}

/// Gaussian-kernel density estimate `(1 / mh) sum exp(-(x - z)^2 / 2h^2)`.
///
/// The `1 / sqrt(2 pi)` factor is left out; it does not move the mode.
pub fn kde_density(samples: &[f64], h: f64, x: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::domain(format!("bandwidth {h} must be positive")));
    }
    if samples.is_empty() {
        return Err(Error::domain("KDE needs at least one sample"));
    }
    Ok(density_unchecked(samples, h, x))
}

fn density_unchecked(samples: &[f64], h: f64, x: f64) -> f64 {
    let k = -0.5 / (h * h);
    samples
        .iter()
        .map(|z| (k * (x - z) * (x - z)).exp())
        .sum::<f64>()
        / (samples.len() as f64 * h)
}

/// Silverman's rule `1.06 * sd * m^(-1/5)`, floored at `min_bandwidth`.
pub fn silverman_bandwidth(samples: &[f64], min_bandwidth: f64) -> f64 {
    let m = samples.len() as f64;
    let sd = if samples.len() > 1 {
        let mean = samples.iter().sum::<f64>() / m;
        (samples.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    } else {
        0.0
    };
    (1.06 * sd * m.powf(-0.2)).max(min_bandwidth)
}

/// Mode of the KDE over `[0, 1]` with an explicit bandwidth: dense-grid
/// argmax, polished by golden-section search around each grid-local peak.
/// Ties go to the smaller location.
pub fn kde_mode_with_bandwidth(samples: &[f64], h: f64, grid_points: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("KDE mode needs at least one sample"));
    }
    if h.is_nan() || h <= 0.0 {
        return Err(Error::domain(format!("bandwidth {h} must be positive")));
    }
    let g = grid_points.max(2);
    let step = 1.0 / (g - 1) as f64;
    let dens: Vec<f64> = (0..g)
        .map(|i| density_unchecked(samples, h, i as f64 * step))
        .collect();
    let peak = dens.iter().cloned().fold(f64::MIN, f64::max);

    let mut best = (f64::NAN, f64::MIN);
    for i in 0..g {
        let left = if i > 0 { dens[i - 1] } else { f64::MIN };
        let right = if i + 1 < g { dens[i + 1] } else { f64::MIN };
        if dens[i] < left || dens[i] < right {
            continue;
        }
        // Only peaks that could overtake the grid maximum are polished.
        if dens[i] < peak * (1.0 - 1e-3) {
            continue;
        }
        let lo = (i as f64 - 1.0).max(0.0) * step;
        let hi = ((i + 1) as f64 * step).min(1.0);
        let (x, f) = golden_max(|x| density_unchecked(samples, h, x), lo, hi);
        let (x, f) = if dens[i] >= f {
            (i as f64 * step, dens[i])
        } else {
            (x, f)
        };
        if f > best.1 {
            best = (x, f);
        }
    }
    Ok(best.0)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// KDE mode with Silverman bandwidth, floored at `min_bandwidth`.
pub fn kde_mode(samples: &[f64], min_bandwidth: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("KDE mode needs at least one sample"));
    }
    let h = silverman_bandwidth(samples, min_bandwidth);
    kde_mode_with_bandwidth(samples, h, MODE_GRID)
}

/// Decodes each phase group and summarizes it by its KDE mode.
///
/// Padding shifts padded position `i` to stream index `i - (T - 1)`, so
/// group `i` holds stream phase `(i + 1) mod T`. The template is rotated
/// back so that `template[k]` describes stream indices `t` with
/// `t mod T == k`, which is what tiling from `t = 0` assumes.
pub fn reconstruct_template(
    groups: &PhaseGroups,
    params: &SwParams,
    em: &EmConfig,
) -> Result<CycleTemplate> {
    let min_bandwidth = 1.0 / (4.0 * em.grid as f64);
    let phases = groups
        .groups
        .par_iter()
        .map(|obs| {
            let decoded = em_sw_decode(obs, params, em)?;
            kde_mode(&decoded.pseudo_samples, min_bandwidth).map(|x| x.clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    let shift = groups.period - 1;
    let aligned = (0..groups.period)
        .map(|k| phases[(k + shift) % groups.period])
        .collect();
    CycleTemplate::new(aligned)
}

/// Server-side settings for cycle and phase recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct CprConfig {
    pub detection: DetectionConfig,
    pub em: EmConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub reconstruction: NormalizedSeries,
    pub template: CycleTemplate,
    pub detection: PeriodReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CprOutput {
    pub privatized: NormalizedSeries,
    pub recovery: Recovery,
}

impl CprOutput {
    pub fn period(&self) -> usize {
        self.recovery.detection.period
    }

    pub fn reconstruction(&self) -> &NormalizedSeries {
        &self.recovery.reconstruction
    }
}

/// Device side: normalize and perturb every sample with `eps0 = epsilon / w`.
pub fn privatize<R: Rng + ?Sized>(
    x_raw: &RawSeries,
    budget: &BudgetSplit,
    rng: &mut R,
) -> Result<NormalizedSeries> {
    sw_perturb_series(&normalize(x_raw), budget, rng)
}

/// Server side: only ever sees the privatized stream and the per-event budget.
pub fn recover(x_priv: &NormalizedSeries, eps0: f64, config: &CprConfig) -> Result<Recovery> {
    let detection = detect_period_detailed(x_priv, &config.detection)?;
    let params = sw_params(eps0)?;
    let groups = phase_groups(x_priv, detection.period)?;
    let template = reconstruct_template(&groups, &params, &config.em)?;
    let reconstruction = tile_crop(&template, x_priv.len())?;
    Ok(Recovery {
        reconstruction,
        template,
        detection,
    })
}

/// End-to-end cycle and phase recovery of a raw stream.
pub fn cpr_reconstruct<R: Rng + ?Sized>(
    x_raw: &RawSeries,
    epsilon: f64,
    w: usize,
    config: &CprConfig,
    rng: &mut R,
) -> Result<CprOutput> {
    let budget = split_budget(epsilon, w)?;
    let privatized = privatize(x_raw, &budget, rng)?;
    let recovery = recover(&privatized, budget.eps0, config)?;
    Ok(CprOutput {
        privatized,
        recovery,
    })
}
