//! Per-curve leave-one-out cross-validation of the local-polynomial bandwidth.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Curve;
use crate::kernel::Kernel;
use crate::smoother::{eigen_floor, fit_at, Guard, LocalSystem, SmootherError, SmootherSpec};

/// Size of the default bandwidth grid.
pub const DEFAULT_GRID_SIZE: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum CvError {
    #[error("curve `{id}` has {len} points; cross-validation needs at least 3")]
    CurveTooShort { id: String, len: usize },
    #[error("bandwidth grid is empty")]
    EmptyGrid,
    #[error("bandwidths must be positive and finite, got {0}")]
    InvalidBandwidth(f64),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub curve_id: String,
    pub bandwidth_grid: Vec<f64>,
    /// `+inf` where some leave-one-out fit was rejected by the eigenvalue guard.
    pub cv_scores: Vec<f64>,
    pub chosen: f64,
    /// More than one bandwidth attained the minimum score.
    pub ties_broken: bool,
}

/// `n` log-spaced bandwidths from `2/m` to `0.5`.
pub fn default_grid(m: usize, n: usize) -> Vec<f64> {
    let lo = (2.0 / m as f64).min(0.5);
    let hi = 0.5f64;
    if n <= 1 || lo == hi {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Mean squared leave-one-out prediction error at bandwidth `h`, or `+inf`
/// when any held-out fit fails the eigenvalue guard.
pub fn loo_score(curve: &Curve, degree: usize, kernel: &dyn Kernel, h: f64) -> Result<f64, SmootherError> {
    let (t, y) = (curve.times(), curve.values());
    let mut total = 0.0;
    for m in 0..t.len() {
        let sys = LocalSystem::assemble(t, y, t[m], degree, kernel, h, Some(m))?;
        let (lambda, sol) = sys.solve();
        match sol {
            Some(s) if lambda > eigen_floor(sys.m) => total += (y[m] - s[0]).powi(2),
            _ => return Ok(f64::INFINITY),
        }
    }
    Ok(total / t.len() as f64)
}

fn check_grid(grid: &[f64]) -> Result<(), CvError> {
    if grid.is_empty() {
        return Err(CvError::EmptyGrid);
    }
    match grid.iter().find(|h| !(h.is_finite() && **h > 0.0)) {
        Some(&h) => Err(CvError::InvalidBandwidth(h)),
        None => Ok(()),
    }
}

/// Scores every bandwidth of `grid` and picks the minimizer; ties go to
/// the smaller bandwidth.
pub fn cv_bandwidth(curve: &Curve, degree: usize, kernel: &dyn Kernel, grid: &[f64]) -> Result<CvResult, CvError> {
    if curve.len() < 3 {
        return Err(CvError::CurveTooShort { id: curve.id().to_string(), len: curve.len() });
    }
    check_grid(grid)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let scores = grid
        .iter()
        .map(|&h| loo_score(curve, degree, kernel, h))
        .collect::<Result<Vec<_>, _>>()?;
    let best = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let winners: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] == best).collect();
    // All-infinite scores tie everywhere; the smallest bandwidth is chosen.
    let chosen = grid[winners.first().copied().unwrap_or(0)];
    Ok(CvResult {
        curve_id: curve.id().to_string(),
        bandwidth_grid: grid,
        cv_scores: scores,
        chosen,
        ties_broken: winners.len() > 1 || best.is_infinite(),
    })
}

/// Cross-validated fit of one curve at the requested points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCurve {
    pub cv: CvResult,
    pub t0s: Vec<f64>,
    pub estimates: Vec<f64>,
    pub guards: Vec<Guard>,
}

/// Selects each curve's bandwidth by cross-validation, then fits it at every
/// `t0`. `grid = None` uses [`default_grid`] for each curve's size. Fits use
/// the eigenvalue guard but no trimming.
pub fn cv_smooth(
    online: &[Curve],
    degree: usize,
    kernel: Arc<dyn Kernel>,
    grid: Option<&[f64]>,
    t0s: &[f64],
) -> Vec<Result<CvCurve, CvError>> {
    let spec = SmootherSpec::new(degree, 1.0, 1.0).with_kernel(Arc::clone(&kernel)).with_trim(false);
    online
        .par_iter()
        .map(|curve| {
            let own;
            let grid = match grid {
                Some(g) => g,
                None => {
                    own = default_grid(curve.len(), DEFAULT_GRID_SIZE);
                    &own
                }
            };
            let cv = cv_bandwidth(curve, degree, kernel.as_ref(), grid)?;
            let mut estimates = Vec::with_capacity(t0s.len());
            let mut guards = Vec::with_capacity(t0s.len());
            for &t0 in t0s {
                let (e, d) = fit_at(curve, t0, &spec, cv.chosen)?;
                estimates.push(e);
                guards.push(d.guard);
            }
            Ok(CvCurve { cv, t0s: t0s.to_vec(), estimates, guards })
        })
        .collect()
}
