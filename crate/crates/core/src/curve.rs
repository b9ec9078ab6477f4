//! Sampled curves, learning-set summaries and per-point observation windows.
//!
//! A [`Curve`] is one trajectory observed at sorted times in `[0, 1]`. A
//! [`FunctionalSample`] groups curves and caches the mean number of
//! observations `mu_hat` together with the data-driven neighbourhood size
//! `k0_hat`. A [`Window`] records, for each curve, the `k0` observations
//! closest to an evaluation point `t0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("curve `{0}` has no observations")]
    EmptyCurve(String),
    #[error("curve `{id}`: {times} times but {values} values")]
    LengthMismatch { id: String, times: usize, values: usize },
    #[error("curve `{id}`: time {time} is outside [0, 1]")]
    TimeOutOfRange { id: String, time: f64 },
    #[error("curve `{id}`: times are not sorted")]
    Unsorted { id: String },
    #[error("curve `{id}`: non-finite value at index {index}")]
    NonFinite { id: String, index: usize },
    #[error("sample contains no curves")]
    EmptySample,
    #[error("mean number of observations {0} is at most e; log log is undefined")]
    DegenerateMu(f64),
    #[error("interval length must be positive, got {0}")]
    InvalidInterval(f64),
}

/// One trajectory: observation times (sorted, in `[0, 1]`) and noisy values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    id: String,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Curve {
    /// Builds a curve from already sorted observations.
    pub fn new(id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self, CurveError> {
        let id = id.into();
        if times.len() != values.len() {
            return Err(CurveError::LengthMismatch { id, times: times.len(), values: values.len() });
        }
        if times.is_empty() {
            return Err(CurveError::EmptyCurve(id));
        }
        for (index, (&t, &y)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !y.is_finite() {
                return Err(CurveError::NonFinite { id, index });
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(CurveError::TimeOutOfRange { id, time: t });
            }
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(CurveError::Unsorted { id });
        }
        Ok(Self { id, times, values })
    }

    /// Builds a curve from observations in arbitrary order, sorting by time.
    /// The sort is stable so duplicate timestamps keep their input order.
    pub fn from_unsorted(
        id: impl Into<String>,
        times: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, CurveError> {
        let id = id.into();
        if times.len() != values.len() {
            return Err(CurveError::LengthMismatch { id, times: times.len(), values: values.len() });
        }
        let mut pairs: Vec<(f64, f64)> = times.into_iter().zip(values).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (times, values) = pairs.into_iter().unzip();
        Self::new(id, times, values)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Indices of the `k` observations closest to `t0`, in ascending time order.
    ///
    /// Distance ties are broken toward the smaller time. Returns fewer than
    /// `k` indices when the curve is shorter than `k`.
    pub fn closest_indices(&self, t0: f64, k: usize) -> Vec<usize> {
        let n = self.times.len();
        let k = k.min(n);
        // `right` is the first index with time >= t0; `left` walks downward.
        let right_start = self.times.partition_point(|&t| t < t0);
        let mut lo = right_start; // exclusive lower edge of the chosen block
        let mut hi = right_start; // exclusive upper edge
        while hi - lo < k {
            let take_left = match (lo > 0, hi < n) {
                (true, true) => {
                    let dl = t0 - self.times[lo - 1];
                    let dr = self.times[hi] - t0;
                    dl <= dr
                }
                (true, false) => true,
                (false, true) => false,
                (false, false) => break,
            };
            if take_left {
                lo -= 1;
            } else {
                hi += 1;
            }
        }
        (lo..hi).collect()
    }
}

/// Rule turning `mu_hat * exp(-(log log mu_hat)^2)` into an integer `k0_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum K0Rule {
    /// Nearest integer. Reproduces the published neighbourhood sizes.
    #[default]
    Nearest,
    /// Integer part.
    Floor,
}

/// Data-driven neighbourhood size `k0_hat` for a mean sample size `mu_hat`.
pub fn k0_from_mu(mu_hat: f64, rule: K0Rule) -> Result<usize, CurveError> {
    if !(mu_hat > std::f64::consts::E) {
        return Err(CurveError::DegenerateMu(mu_hat));
    }
    let loglog = mu_hat.ln().ln();
    let raw = mu_hat * (-loglog * loglog).exp();
    let k0 = match rule {
        K0Rule::Nearest => raw.round(),
        K0Rule::Floor => raw.floor(),
    };
    Ok((k0 as usize).max(1))
}

/// Lag parameter `k = floor((k0 + 7) / 8)` used by the regularity statistics.
///
/// The three lags need `8k - 7 <= k0`; `k0 = 1` gives the degenerate `k = 1`.
pub fn choose_k(k0: usize) -> usize {
    (k0 + 7) / 8
}

/// A learning (or online) set of curves with its summaries.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    curves: Vec<Curve>,
    mu_hat: f64,
    k0_hat: usize,
    interval_length: f64,
}

impl FunctionalSample {
    /// Summarizes with the default [`K0Rule`].
    pub fn summarize(curves: Vec<Curve>, interval_length: f64) -> Result<Self, CurveError> {
        Self::summarize_with(curves, interval_length, K0Rule::default())
    }

    pub fn summarize_with(
        curves: Vec<Curve>,
        interval_length: f64,
        rule: K0Rule,
    ) -> Result<Self, CurveError> {
        if curves.is_empty() {
            return Err(CurveError::EmptySample);
        }
        if !(interval_length > 0.0) {
            return Err(CurveError::InvalidInterval(interval_length));
        }
        if let Some(c) = curves.iter().find(|c| c.is_empty()) {
            return Err(CurveError::EmptyCurve(c.id.clone()));
        }
        let total: usize = curves.iter().map(Curve::len).sum();
        let mu_hat = total as f64 / curves.len() as f64;
        let k0_hat = k0_from_mu(mu_hat, rule)?;
        Ok(Self { curves, mu_hat, k0_hat, interval_length })
    }

    /// Reuses precomputed summaries for a set of derived curves (for example
    /// derivative pseudo-curves built from a learning set).
    pub(crate) fn with_summaries(
        curves: Vec<Curve>,
        mu_hat: f64,
        k0_hat: usize,
        interval_length: f64,
    ) -> Self {
        Self { curves, mu_hat, k0_hat, interval_length }
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn k0_hat(&self) -> usize {
        self.k0_hat
    }

    pub fn interval_length(&self) -> f64 {
        self.interval_length
    }

    /// Half-width `|I| / log(mu_hat)` of the neighbourhood `J_mu(t0)`.
    pub fn neighbourhood_radius(&self) -> f64 {
        self.interval_length / self.mu_hat.ln()
    }
}

/// Per-curve selection of the observations closest to `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t0: f64,
    pub k0: usize,
    pub j_mu_lo: f64,
    pub j_mu_hi: f64,
    /// Indices into each curve, sorted by time.
    pub selected: Vec<Vec<usize>>,
    /// Whether the curve has at least `k0` points, all selected inside `J_mu(t0)`.
    pub in_b: Vec<bool>,
}

impl Window {
    pub fn n_effective(&self) -> usize {
        self.in_b.iter().filter(|&&b| b).count()
    }
}

/// Selects the `k0` observations closest to `t0` on every curve of `sample`.
pub fn window_at(sample: &FunctionalSample, t0: f64, k0: usize) -> Window {
    let radius = sample.neighbourhood_radius();
    let j_mu_lo = (t0 - radius).max(0.0);
    let j_mu_hi = (t0 + radius).min(1.0);
    let mut selected = Vec::with_capacity(sample.len());
    let mut in_b = Vec::with_capacity(sample.len());
    for curve in sample.curves() {
        let idx = curve.closest_indices(t0, k0);
        let inside = idx.len() >= k0
            && idx.iter().all(|&i| {
                let t = curve.times()[i];
                t >= j_mu_lo && t <= j_mu_hi
            });
        in_b.push(inside);
        selected.push(idx);
    }
    Window { t0, k0, j_mu_lo, j_mu_hi, selected, in_b }
}
