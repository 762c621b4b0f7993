//! Value-level series primitives shared by every pipeline stage.
//!
//! Raw input is mapped onto `[0, 1]` once by [`normalize`]; privatized
//! streams and reconstructions live in the same domain and use the same
//! [`NormalizedSeries`] wrapper.

use crate::error::{Error, Result};

/// A finite, nonempty input stream in arbitrary units.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries(Vec<f64>);

impl RawSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("series must be nonempty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value at index {i}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// A nonempty stream whose values all lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries(Vec<f64>);

impl NormalizedSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("series must be nonempty"));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain(format!(
                "value {} at index {i} is outside [0, 1]",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// One cycle of per-phase values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTemplate(Vec<f64>);

impl CycleTemplate {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::domain("cycle template must be nonempty"));
        }
        if phases.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("cycle template values must lie in [0, 1]"));
        }
        Ok(Self(phases))
    }

    pub fn phases(&self) -> &[f64] {
        &self.0
    }

    pub fn period(&self) -> usize {
        self.0.len()
    }
}

/// Min-max maps the series onto `[0, 1]`. A constant series maps to 0.5.
pub fn normalize(x: &RawSeries) -> NormalizedSeries {
    let (lo, hi) = x
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let values = if range > 0.0 {
        x.values()
            .iter()
            .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.5; x.len()]
    };
    NormalizedSeries(values)
}

/// Mean squared discrepancy between the series and itself shifted by `lag`.
pub fn period_loss(x: &[f64], lag: usize) -> Result<f64> {
    let n = x.len();
    if lag < 1 || lag >= n {
        return Err(Error::domain(format!(
            "lag {lag} must satisfy 1 <= lag < {n}"
        )));
    }
    let sum: f64 = x
        .iter()
        .zip(&x[lag..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / (n - lag) as f64)
}

/// Reflects `p` samples onto each end, not repeating the boundary sample.
///
/// `[1, 2, 3, 4]` padded by 2 becomes `[3, 2, 1, 2, 3, 4, 3, 2]`.
pub fn mirror_pad(x: &[f64], p: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 || p > n - 1 {
        return Err(Error::domain(format!(
            "pad width {p} exceeds series length {n} minus one"
        )));
    }
    let mut out = Vec::with_capacity(n + 2 * p);
    out.extend(x[1..=p].iter().rev());
    out.extend_from_slice(x);
    out.extend(x[n - 1 - p..n - 1].iter().rev());
    Ok(out)
}

/// Repeats the template cyclically and crops the result to `n` samples.
pub fn tile_crop(template: &CycleTemplate, n: usize) -> Result<NormalizedSeries> {
    if n == 0 {
        return Err(Error::domain("output length must be positive"));
    }
    let values = template.phases().iter().copied().cycle().take(n).collect();
    Ok(NormalizedSeries(values))
}

/// `1 - cos(a, b)` on the vectors as given (no centering).
pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::domain("vectors must be nonempty"));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::domain("cosine distance of a zero vector"));
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Linear interpolation of `x` at `m` equispaced positions over its index range.
pub fn resample_linear(x: &[f64], m: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 || m < 2 {
        return Err(Error::domain(
            "resampling needs at least two input and output points",
        ));
    }
    let step = (n - 1) as f64 / (m - 1) as f64;
    let out = (0..m)
        .map(|j| {
            if j == m - 1 {
                return x[n - 1];
            }
            let pos = j as f64 * step;
            let i = (pos.floor() as usize).min(n - 2);
            let frac = pos - i as f64;
            x[i] + frac * (x[i + 1] - x[i])
        })
        .collect();
    Ok(out)
}
