//! Synthetic functional datasets: fBm, piecewise fBm and integrated fBm
//! observed at Poisson-many uniform or equispaced times with Gaussian noise.

mod fbm;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{Curve, CurveError};

pub use fbm::{fbm_at, fbm_covariance};

/// Smallest admissible number of points per curve.
pub const MIN_POINTS: usize = 9;

/// Default number of quadrature intervals for integrated fBm.
pub const DEFAULT_GRID_N: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("Hurst exponent must lie in (0, 1), got {0}")]
    InvalidHurst(f64),
    #[error("time {0} is outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("times must be sorted ascending")]
    UnsortedTimes,
    #[error("covariance of size {size} is not positive definite after jitter")]
    CholeskyFailure { size: usize },
    #[error("negative noise variance {0}")]
    NegativeVariance(f64),
    #[error("invalid segments: {0}")]
    InvalidSegments(String),
    #[error("expected number of points must be at least {MIN_POINTS}, got {0}")]
    InvalidMu(f64),
    #[error("integration grid needs at least 1000 intervals, got {0}")]
    GridTooCoarse(usize),
    #[error("setting `{0}` needs {1}")]
    SettingMismatch(&'static str, &'static str),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Fbm,
    PiecewiseFbm,
    IntegratedFbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Unif,
    Equi,
}

/// A segment `[previous end, end)` carrying a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub end: f64,
    pub value: f64,
}

/// Hurst exponent: constant, or one value per segment of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HurstSpec {
    Constant(f64),
    Segments(Vec<Segment>),
}

/// Noise variance: constant, or one value per segment of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSpec {
    Constant(f64),
    Segments(Vec<Segment>),
}

impl NoiseSpec {
    /// Variance at time `t`.
    pub fn variance_at(&self, t: f64) -> f64 {
        match self {
            NoiseSpec::Constant(s) => *s,
            NoiseSpec::Segments(segs) => segment_value(segs, t),
        }
    }

    fn validate(&self) -> Result<(), SimulateError> {
        match self {
            NoiseSpec::Constant(s) if *s < 0.0 || s.is_nan() => Err(SimulateError::NegativeVariance(*s)),
            NoiseSpec::Constant(_) => Ok(()),
            NoiseSpec::Segments(segs) => {
                validate_segments(segs)?;
                match segs.iter().find(|s| !(s.value >= 0.0)) {
                    Some(s) => Err(SimulateError::NegativeVariance(s.value)),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Segments with equal lengths on `[0, 1]`, one per value.
pub fn equal_segments(values: &[f64]) -> Vec<Segment> {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, &value)| Segment { end: if i + 1 == n { 1.0 } else { (i + 1) as f64 / n as f64 }, value })
        .collect()
}

fn validate_segments(segs: &[Segment]) -> Result<(), SimulateError> {
    if segs.is_empty() {
        return Err(SimulateError::InvalidSegments("at least one segment is required".into()));
    }
    let mut prev = 0.0;
    for s in segs {
        if !(s.end > prev) {
            return Err(SimulateError::InvalidSegments(format!("breakpoints must increase from 0 (found {})", s.end)));
        }
        prev = s.end;
    }
    if prev != 1.0 {
        return Err(SimulateError::InvalidSegments(format!("last breakpoint must be 1, found {prev}")));
    }
    Ok(())
}

fn segment_index(segs: &[Segment], t: f64) -> usize {
    segs.iter().position(|s| t < s.end).unwrap_or(segs.len() - 1)
}

fn segment_value(segs: &[Segment], t: f64) -> f64 {
    segs[segment_index(segs, t)].value
}

fn default_grid_n() -> usize {
    DEFAULT_GRID_N
}

/// Everything needed to generate one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub setting: Setting,
    pub n_learning: usize,
    pub n_online: usize,
    pub mu: f64,
    pub sampling: Sampling,
    pub hurst: HurstSpec,
    pub sigma2: NoiseSpec,
    pub seed: u64,
    /// Quadrature intervals for integrated fBm.
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    /// Times at which the exact noiseless value of every online curve is
    /// recorded alongside the observations.
    #[serde(default)]
    pub anchors: Vec<f64>,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<(), SimulateError> {
        if !(self.mu >= MIN_POINTS as f64) || !self.mu.is_finite() {
            return Err(SimulateError::InvalidMu(self.mu));
        }
        match (&self.setting, &self.hurst) {
            (Setting::PiecewiseFbm, HurstSpec::Segments(segs)) => {
                validate_segments(segs)?;
                for s in segs {
                    fbm::validate_hurst(s.value)?;
                }
            }
            (Setting::PiecewiseFbm, HurstSpec::Constant(h)) => fbm::validate_hurst(*h)?,
            (_, HurstSpec::Constant(h)) => fbm::validate_hurst(*h)?,
            (Setting::Fbm, HurstSpec::Segments(_)) => {
                return Err(SimulateError::SettingMismatch("fbm", "a constant Hurst exponent"))
            }
            (Setting::IntegratedFbm, HurstSpec::Segments(_)) => {
                return Err(SimulateError::SettingMismatch("integrated_fbm", "a constant Hurst exponent"))
            }
        }
        if self.setting == Setting::IntegratedFbm && self.grid_n < 1000 {
            return Err(SimulateError::GridTooCoarse(self.grid_n));
        }
        if let Some(&t) = self.anchors.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(SimulateError::TimeOutOfRange(t));
        }
        self.sigma2.validate()
    }
}

/// Number of points `M ~ Poisson(mu)` conditioned on `M ≥ 9`, by rejection.
pub fn sample_size<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<usize, SimulateError> {
    if !(mu >= MIN_POINTS as f64) || !mu.is_finite() {
        return Err(SimulateError::InvalidMu(mu));
    }
    let pois = Poisson::new(mu).map_err(|_| SimulateError::InvalidMu(mu))?;
    loop {
        let m = pois.sample(rng) as usize;
        if m >= MIN_POINTS {
            return Ok(m);
        }
    }
}

/// `m` observation times: sorted i.i.d. uniforms, or `{0, 1/(m-1), …, 1}`.
pub fn times_of_size<R: Rng + ?Sized>(m: usize, sampling: Sampling, rng: &mut R) -> Vec<f64> {
    match sampling {
        Sampling::Equi if m == 1 => vec![0.0],
        Sampling::Equi => (0..m).map(|j| j as f64 / (m - 1) as f64).collect(),
        Sampling::Unif => {
            let mut t: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            t.sort_by(f64::total_cmp);
            t
        }
    }
}

/// Random number of observation times with law given by `sampling`.
pub fn sample_times<R: Rng + ?Sized>(mu: f64, sampling: Sampling, rng: &mut R) -> Result<Vec<f64>, SimulateError> {
    let m = sample_size(mu, rng)?;
    Ok(times_of_size(m, sampling, rng))
}

/// Piecewise fBm: on each segment `[a, b)`, an independent fBm with the
/// segment's exponent run on local time `(t − a)/(b − a)`, shifted to start
/// where the previous segment ended.
pub fn piecewise_fbm_at<R: Rng + ?Sized>(
    times: &[f64],
    segments: &[Segment],
    rng: &mut R,
) -> Result<Vec<f64>, SimulateError> {
    piecewise_joint(times, &[], segments, rng).map(|(v, _)| v)
}

fn piecewise_joint<R: Rng + ?Sized>(
    times: &[f64],
    extras: &[f64],
    segments: &[Segment],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), SimulateError> {
    validate_segments(segments)?;
    let mut out = vec![0.0; times.len()];
    let mut out_extra = vec![0.0; extras.len()];
    let mut offset = 0.0;
    let mut start = 0.0;
    for (j, seg) in segments.iter().enumerate() {
        let last = j + 1 == segments.len();
        let inside = |t: f64| t >= start && (t < seg.end || (last && t <= seg.end));
        let width = seg.end - start;
        let local = |t: f64| ((t - start) / width).clamp(0.0, 1.0);
        let idx: Vec<usize> = (0..times.len()).filter(|&i| inside(times[i])).collect();
        let eidx: Vec<usize> = (0..extras.len()).filter(|&i| inside(extras[i])).collect();
        let lt: Vec<f64> = idx.iter().map(|&i| local(times[i])).collect();
        // The segment's terminal value is always drawn to glue the next one.
        let mut le: Vec<f64> = eidx.iter().map(|&i| local(extras[i])).collect();
        le.push(1.0);
        let (v, ve) = fbm::fbm_joint(&lt, &le, seg.value, rng)?;
        for (&i, x) in idx.iter().zip(&v) {
            out[i] = offset + x;
        }
        for (&i, x) in eidx.iter().zip(&ve) {
            out_extra[i] = offset + x;
        }
        offset += ve[ve.len() - 1];
        start = seg.end;
    }
    Ok((out, out_extra))
}

/// Integrated fBm `X(t) = ∫_0^t W(s) ds`: `W` on `grid_n + 1` equispaced
/// points, cumulative trapezoid rule, linear interpolation to `times`.
pub fn integrated_fbm_at<R: Rng + ?Sized>(
    times: &[f64],
    hurst: f64,
    rng: &mut R,
    grid_n: usize,
) -> Result<Vec<f64>, SimulateError> {
    integrated_joint(times, &[], hurst, rng, grid_n).map(|(v, _)| v)
}

fn integrated_joint<R: Rng + ?Sized>(
    times: &[f64],
    extras: &[f64],
    hurst: f64,
    rng: &mut R,
    grid_n: usize,
) -> Result<(Vec<f64>, Vec<f64>), SimulateError> {
    if grid_n < 1000 {
        return Err(SimulateError::GridTooCoarse(grid_n));
    }
    if let Some(&t) = times.iter().chain(extras).find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(SimulateError::TimeOutOfRange(t));
    }
    let grid: Vec<f64> = (0..=grid_n).map(|i| i as f64 / grid_n as f64).collect();
    let w = fbm::fbm_joint(&grid, &[], hurst, rng)?.0;
    let dx = 1.0 / grid_n as f64;
    let mut x = Vec::with_capacity(grid.len());
    x.push(0.0);
    for i in 1..grid.len() {
        x.push(x[i - 1] + 0.5 * dx * (w[i - 1] + w[i]));
    }
    let interp = |t: f64| {
        let pos = t * grid_n as f64;
        let i = (pos.floor() as usize).min(grid_n - 1);
        let frac = pos - i as f64;
        x[i] + frac * (x[i + 1] - x[i])
    };
    Ok((times.iter().map(|&t| interp(t)).collect(), extras.iter().map(|&t| interp(t)).collect()))
}

/// `Y = x + σ(t) ε` with `ε` i.i.d. standard normal.
pub fn add_noise<R: Rng + ?Sized>(
    x_true: &[f64],
    times: &[f64],
    sigma2: &NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>, SimulateError> {
    sigma2.validate()?;
    Ok(x_true
        .iter()
        .zip(times)
        .map(|(&x, &t)| {
            let e: f64 = rng.sample(StandardNormal);
            x + sigma2.variance_at(t).sqrt() * e
        })
        .collect())
}

/// A noisy curve with the noiseless process at its times and at extra
/// anchor times.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCurve {
    pub curve: Curve,
    pub x_true: Vec<f64>,
    pub anchor_times: Vec<f64>,
    pub anchor_values: Vec<f64>,
}

impl GroundTruthCurve {
    /// Noiseless value at `t`: exact at anchors and observation times,
    /// linear interpolation between known points otherwise.
    pub fn truth_at(&self, t: f64) -> f64 {
        if let Some(i) = self.anchor_times.iter().position(|&a| a == t) {
            return self.anchor_values[i];
        }
        let mut pts: Vec<(f64, f64)> = self
            .curve
            .times()
            .iter()
            .copied()
            .zip(self.x_true.iter().copied())
            .chain(self.anchor_times.iter().copied().zip(self.anchor_values.iter().copied()))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let j = pts.partition_point(|p| p.0 < t);
        if j == 0 {
            return pts[0].1;
        }
        if j == pts.len() {
            return pts[j - 1].1;
        }
        let (t0, x0) = pts[j - 1];
        let (t1, x1) = pts[j];
        if t1 == t0 {
            x1
        } else {
            x0 + (t - t0) / (t1 - t0) * (x1 - x0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Learning,
    Online,
}

/// Independent, reproducible stream for one curve.
pub fn curve_rng(seed: u64, role: Role, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag = match role {
        Role::Learning => 0u64,
        Role::Online => 1u64 << 62,
    };
    rng.set_stream(tag | index as u64);
    rng
}

/// Draws one curve of the spec's setting.
pub fn simulate_curve<R: Rng + ?Sized>(
    spec: &SimulationSpec,
    id: String,
    anchors: &[f64],
    rng: &mut R,
) -> Result<GroundTruthCurve, SimulateError> {
    let times = sample_times(spec.mu, spec.sampling, rng)?;
    let (x, xa) = match (&spec.setting, &spec.hurst) {
        (Setting::Fbm, HurstSpec::Constant(h)) => fbm::fbm_joint(&times, anchors, *h, rng)?,
        (Setting::PiecewiseFbm, HurstSpec::Segments(segs)) => piecewise_joint(&times, anchors, segs, rng)?,
        (Setting::PiecewiseFbm, HurstSpec::Constant(h)) => {
            piecewise_joint(&times, anchors, &[Segment { end: 1.0, value: *h }], rng)?
        }
        (Setting::IntegratedFbm, HurstSpec::Constant(h)) => integrated_joint(&times, anchors, *h, rng, spec.grid_n)?,
        (Setting::Fbm, _) => return Err(SimulateError::SettingMismatch("fbm", "a constant Hurst exponent")),
        (Setting::IntegratedFbm, _) => {
            return Err(SimulateError::SettingMismatch("integrated_fbm", "a constant Hurst exponent"))
        }
    };
    let y = add_noise(&x, &times, &spec.sigma2, rng)?;
    Ok(GroundTruthCurve {
        curve: Curve::new(id, times, y)?,
        x_true: x,
        anchor_times: anchors.to_vec(),
        anchor_values: xa,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub learning: Vec<GroundTruthCurve>,
    pub online: Vec<GroundTruthCurve>,
}

impl Dataset {
    pub fn learning_curves(&self) -> Vec<Curve> {
        self.learning.iter().map(|g| g.curve.clone()).collect()
    }

    pub fn online_curves(&self) -> Vec<Curve> {
        self.online.iter().map(|g| g.curve.clone()).collect()
    }
}

/// Generates the learning and online sets. Each curve has its own random
/// stream, so the output does not depend on the thread count.
pub fn simulate(spec: &SimulationSpec) -> Result<Dataset, SimulateError> {
    spec.validate()?;
    let gen = |role: Role, n: usize, prefix: &str, anchors: &[f64]| -> Result<Vec<GroundTruthCurve>, SimulateError> {
        (0..n)
            .into_par_iter()
            .map(|i| simulate_curve(spec, format!("{prefix}{i}"), anchors, &mut curve_rng(spec.seed, role, i)))
            .collect()
    };
    Ok(Dataset {
        learning: gen(Role::Learning, spec.n_learning, "L", &[])?,
        online: gen(Role::Online, spec.n_online, "O", &spec.anchors)?,
    })
}

/// Writes the noiseless values as `curve_id,t,x_true,source`, where
/// `source` is `obs` or `anchor`.
pub fn write_truth_csv<W: Write>(writer: W, curves: &[GroundTruthCurve]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["curve_id", "t", "x_true", "source"])?;
    for g in curves {
        let id = g.curve.id();
        for (t, x) in g.curve.times().iter().zip(&g.x_true) {
            wtr.write_record([id, &t.to_string(), &x.to_string(), "obs"])?;
        }
        for (t, x) in g.anchor_times.iter().zip(&g.anchor_values) {
            wtr.write_record([id, &t.to_string(), &x.to_string(), "anchor"])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
