//! Safeguarded local-polynomial estimation of a curve at a point.
//!
//! For a curve `(T_m, Y_m)`, `m = 1..M`, a bandwidth `h` and a degree `d`, the
//! fit solves the normal equations `A θ = a` with
//!
//! ```text
//! A = 1/(M h) Σ U(u_m) U(u_m)ᵀ K(u_m),   a = 1/(M h) Σ Y_m U(u_m) K(u_m),
//! u_m = (T_m - t0) / h,                  U(u) = (1, u, u²/2!, …, u^d/d!).
//! ```
//!
//! The estimate `θ_0` is accepted only when the smallest eigenvalue of `A`
//! exceeds `1 / log M`; otherwise it is replaced by 0. An accepted estimate
//! is clamped to `±τ(M)^{5/12}` with
//! `τ(y) = log⁻²(y) · (y / log y)^{2ς/(2ς+1)}`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Curve;
use crate::kernel::{Epanechnikov, Kernel};
use crate::regularity::RegularityEstimate;

/// Lower bound applied to the regularity before it enters a bandwidth or the
/// trimming threshold.
pub const REGULARITY_FLOOR: f64 = 0.1;

/// Exponent of the trimming threshold `τ(M)^{5/12}`.
pub const TRIM_EXPONENT: f64 = 5.0 / 12.0;

#[derive(Debug, Error, PartialEq)]
pub enum SmootherError {
    #[error("non-finite observation at index {0} inside the smoothing window")]
    NonFiniteInput(usize),
    #[error("estimated Hölder constant is zero; plug-in constant undefined")]
    ZeroHolderConstant,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guard {
    None,
    Eigen,
    Trim,
    /// The cell could not be computed (see the accompanying error).
    Failed,
}

impl Guard {
    pub fn as_str(self) -> &'static str {
        match self {
            Guard::None => "none",
            Guard::Eigen => "eigen",
            Guard::Trim => "trim",
            Guard::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub bandwidth: f64,
    pub lambda_min: f64,
    pub n_in_window: usize,
    pub guard: Guard,
}

/// Everything the online smoother shares across curves.
#[derive(Debug, Clone)]
pub struct SmootherSpec {
    pub degree: usize,
    /// Regularity used in the bandwidth exponent and the trimming threshold.
    pub regularity: f64,
    pub plug_in_c: f64,
    pub kernel: Arc<dyn Kernel>,
    /// Apply the `τ(M)^{5/12}` clamp.
    pub trim: bool,
}

impl SmootherSpec {
    pub fn new(degree: usize, regularity: f64, plug_in_c: f64) -> Self {
        Self { degree, regularity, plug_in_c, kernel: Arc::new(Epanechnikov), trim: true }
    }

    pub fn with_kernel(mut self, kernel: Arc<dyn Kernel>) -> Self {
        self.kernel = kernel;
        self
    }

    pub fn with_trim(mut self, trim: bool) -> Self {
        self.trim = trim;
        self
    }

    /// Builds the shared spec from a regularity estimate: degree `d_hat`,
    /// regularity `d_hat + h_hat` (floored), and the plug-in constant from
    /// `sigma2_hat` and `l_hat`.
    pub fn from_estimate(reg: &RegularityEstimate, kernel: Arc<dyn Kernel>) -> Result<Self, SmootherError> {
        let regularity = effective_regularity(reg.regularity());
        let c = plug_in_constant(reg.sigma2_hat, reg.l_hat, regularity, kernel.as_ref())?;
        Ok(Self { degree: reg.d_hat, regularity, plug_in_c: c, kernel, trim: true })
    }

    pub fn bandwidth_for(&self, m: usize) -> f64 {
        bandwidth(self.plug_in_c, m, self.regularity)
    }
}

/// Applies [`REGULARITY_FLOOR`], logging when it changes the value.
pub fn effective_regularity(regularity: f64) -> f64 {
    if regularity < REGULARITY_FLOOR {
        log::warn!("regularity {regularity} below floor; using {REGULARITY_FLOOR}");
        REGULARITY_FLOOR
    } else {
        regularity
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Plug-in constant `C = σ² ‖K‖² ⌊ς⌋! / (ς L ∫|K(v)||v|^ς dv)`.
pub fn plug_in_constant(
    sigma2: f64,
    l_hat: f64,
    regularity: f64,
    kernel: &dyn Kernel,
) -> Result<f64, SmootherError> {
    if l_hat == 0.0 {
        return Err(SmootherError::ZeroHolderConstant);
    }
    if !(l_hat > 0.0) || !(regularity > 0.0) || !(sigma2 >= 0.0) {
        return Err(SmootherError::InvalidArgument(format!(
            "plug-in constant needs sigma2 >= 0, L > 0, regularity > 0 (got {sigma2}, {l_hat}, {regularity})"
        )));
    }
    let floor_fact = factorial(regularity.floor() as usize);
    Ok(sigma2 * kernel.l2_norm_sq() * floor_fact / (regularity * l_hat * kernel.abs_moment(regularity)))
}

/// `h = (c / m)^{1 / (2 ς + 1)}`.
pub fn bandwidth(c: f64, m: usize, regularity: f64) -> f64 {
    (c / m as f64).powf(1.0 / (2.0 * regularity + 1.0))
}

/// `τ(y)^{5/12}` with `τ(y) = log⁻²(y) (y / log y)^{2ς/(2ς+1)}`.
pub fn trim_bound(m: usize, regularity: f64) -> f64 {
    let y = m as f64;
    let ly = y.ln();
    let tau = (y / ly).powf(2.0 * regularity / (2.0 * regularity + 1.0)) / (ly * ly);
    tau.powf(TRIM_EXPONENT)
}

/// Eigenvalue floor `1 / log M` of the design-matrix guard.
pub fn eigen_floor(m: usize) -> f64 {
    1.0 / (m as f64).ln()
}

/// Weighted least-squares system of one local fit.
#[derive(Debug, Clone)]
pub(crate) struct LocalSystem {
    dim: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
    /// Window bounds in the curve's index space, `lo..hi`.
    pub lo: usize,
    pub hi: usize,
    pub n_in_window: usize,
    /// Normalizing count `M`.
    pub m: usize,
}

#[inline]
fn design_row(u: f64, dim: usize, out: &mut [f64]) {
    out[0] = 1.0;
    for j in 1..dim {
        out[j] = out[j - 1] * u / j as f64;
    }
}

impl LocalSystem {
    /// Assembles `A` and `a` at `t0`. `skip` removes one observation (for
    /// leave-one-out fits); the normalizing count then drops by one.
    pub fn assemble(
        times: &[f64],
        values: &[f64],
        t0: f64,
        degree: usize,
        kernel: &dyn Kernel,
        h: f64,
        skip: Option<usize>,
    ) -> Result<Self, SmootherError> {
        let dim = degree + 1;
        let lo = times.partition_point(|&t| t < t0 - h);
        let hi = times.partition_point(|&t| t <= t0 + h);
        let m = times.len() - usize::from(skip.is_some());
        let mut a = vec![0.0; dim * dim];
        let mut rhs = vec![0.0; dim];
        let mut u_row = vec![0.0; dim];
        let mut n_in_window = 0;
        for i in lo..hi {
            if Some(i) == skip {
                continue;
            }
            let y = values[i];
            if !y.is_finite() {
                return Err(SmootherError::NonFiniteInput(i));
            }
            let u = (times[i] - t0) / h;
            let w = kernel.evaluate(u);
            if w == 0.0 {
                continue;
            }
            n_in_window += 1;
            design_row(u, dim, &mut u_row);
            for r in 0..dim {
                let wr = w * u_row[r];
                rhs[r] += wr * y;
                for c in 0..=r {
                    a[r * dim + c] += wr * u_row[c];
                }
            }
        }
        let scale = 1.0 / (m as f64 * h);
        for r in 0..dim {
            rhs[r] *= scale;
            for c in 0..=r {
                let v = a[r * dim + c] * scale;
                a[r * dim + c] = v;
                a[c * dim + r] = v;
            }
        }
        Ok(Self { dim, a, rhs, lo, hi, n_in_window, m })
    }

    fn eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.a).symmetric_eigen()
    }

    /// Smallest eigenvalue of `A` and, when `A` is invertible, `A⁻¹ a`.
    pub fn solve(&self) -> (f64, Option<Vec<f64>>) {
        if self.dim == 1 {
            let l = self.a[0];
            let sol = (l > 0.0).then(|| vec![self.rhs[0] / l]);
            return (l, sol);
        }
        if self.dim == 2 {
            let (p, q, r) = (self.a[0], self.a[1], self.a[3]);
            let half_tr = 0.5 * (p + r);
            let disc = (0.25 * (p - r) * (p - r) + q * q).sqrt();
            let lambda = half_tr - disc;
            if !(lambda > 0.0) {
                return (lambda, None);
            }
            let det = p * r - q * q;
            let sol = vec![(r * self.rhs[0] - q * self.rhs[1]) / det, (p * self.rhs[1] - q * self.rhs[0]) / det];
            return (lambda, Some(sol));
        }
        let eig = self.eigen();
        let lambda = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lambda > 0.0) {
            return (lambda, None);
        }
        let mut sol = vec![0.0; self.dim];
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            let proj: f64 = (0..self.dim).map(|i| v[i] * self.rhs[i]).sum::<f64>() / ev;
            for i in 0..self.dim {
                sol[i] += proj * v[i];
            }
        }
        (lambda, Some(sol))
    }

    /// First row of `A⁻¹` (the functional `U(0)ᵀ A⁻¹`).
    pub fn first_row_inverse(&self) -> Option<Vec<f64>> {
        if self.dim == 1 {
            return (self.a[0] > 0.0).then(|| vec![1.0 / self.a[0]]);
        }
        let eig = self.eigen();
        if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
            return None;
        }
        let mut row = vec![0.0; self.dim];
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(k);
            for j in 0..self.dim {
                row[j] += v[0] * v[j] / ev;
            }
        }
        Some(row)
    }
}

/// Safeguarded local-polynomial estimate of the curve at `t0` with bandwidth `h`.
pub fn fit_at(
    curve: &Curve,
    t0: f64,
    spec: &SmootherSpec,
    h: f64,
) -> Result<(f64, FitDiagnostics), SmootherError> {
    if !(h > 0.0) {
        return Err(SmootherError::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let sys = LocalSystem::assemble(
        curve.times(),
        curve.values(),
        t0,
        spec.degree,
        spec.kernel.as_ref(),
        h,
        None,
    )?;
    let m = curve.len();
    let (lambda, sol) = sys.solve();
    let mut diag = FitDiagnostics { bandwidth: h, lambda_min: lambda, n_in_window: sys.n_in_window, guard: Guard::None };
    let sol = match sol {
        Some(s) if lambda > eigen_floor(m) => s,
        _ => {
            diag.guard = Guard::Eigen;
            return Ok((0.0, diag));
        }
    };
    let mut estimate = sol[0];
    if spec.trim {
        if m < 3 {
            log::warn!("curve `{}` has {m} points; trimming skipped", curve.id());
        } else {
            let bound = trim_bound(m, spec.regularity);
            if estimate.abs() > bound {
                estimate = bound.copysign(estimate);
                diag.guard = Guard::Trim;
            }
        }
    }
    Ok((estimate, diag))
}

/// Local-polynomial estimate of the `order`-th derivative at `t0`, read off
/// the degree-`order` fit as `θ_order / h^order`. Returns `None` when the
/// eigenvalue guard rejects the design.
pub fn derivative_at(
    times: &[f64],
    values: &[f64],
    t0: f64,
    order: usize,
    kernel: &dyn Kernel,
    h: f64,
) -> Result<Option<f64>, SmootherError> {
    let sys = LocalSystem::assemble(times, values, t0, order, kernel, h, None)?;
    let (lambda, sol) = sys.solve();
    match sol {
        Some(s) if lambda > eigen_floor(times.len()) => Ok(Some(s[order] / h.powi(order as i32))),
        _ => Ok(None),
    }
}

/// Equivalent-kernel weights `W_m` of the unguarded estimate `θ_0 = Σ W_m Y_m`.
///
/// The returned vector has one entry per observation (zero outside the
/// window). `None` when `A` is singular.
pub fn local_weights(
    times: &[f64],
    t0: f64,
    degree: usize,
    kernel: &dyn Kernel,
    h: f64,
) -> Option<Vec<f64>> {
    let zeros = vec![0.0; times.len()];
    let sys = LocalSystem::assemble(times, &zeros, t0, degree, kernel, h, None).ok()?;
    let row = sys.first_row_inverse()?;
    let dim = degree + 1;
    let scale = 1.0 / (times.len() as f64 * h);
    let mut weights = vec![0.0; times.len()];
    let mut u_row = vec![0.0; dim];
    for i in sys.lo..sys.hi {
        let u = (times[i] - t0) / h;
        let k = kernel.evaluate(u);
        if k == 0.0 {
            continue;
        }
        design_row(u, dim, &mut u_row);
        let dot: f64 = row.iter().zip(&u_row).map(|(a, b)| a * b).sum();
        weights[i] = dot * k * scale;
    }
    Some(weights)
}

/// One cell of an online smoothing run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedPoint {
    pub curve_id: String,
    pub t0: f64,
    /// `None` when the cell failed.
    pub estimate: Option<f64>,
    pub bandwidth: f64,
    pub lambda_min: f64,
    pub n_in_window: usize,
    pub guard: Guard,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Smooths every online curve at every `t0` with one shared spec.
///
/// `t0s = None` evaluates each curve at its own observation times. Failed
/// cells are reported in place; the batch never aborts.
pub fn smooth_with_spec(online: &[Curve], spec: &SmootherSpec, t0s: Option<&[f64]>) -> Vec<Vec<SmoothedPoint>> {
    online
        .par_iter()
        .map(|curve| {
            let h = spec.bandwidth_for(curve.len());
            let points: &[f64] = t0s.unwrap_or(curve.times());
            points
                .iter()
                .map(|&t0| match fit_at(curve, t0, spec, h) {
                    Ok((estimate, d)) => SmoothedPoint {
                        curve_id: curve.id().to_string(),
                        t0,
                        estimate: Some(estimate),
                        bandwidth: d.bandwidth,
                        lambda_min: d.lambda_min,
                        n_in_window: d.n_in_window,
                        guard: d.guard,
                        error: None,
                    },
                    Err(e) => SmoothedPoint {
                        curve_id: curve.id().to_string(),
                        t0,
                        estimate: None,
                        bandwidth: h,
                        lambda_min: f64::NAN,
                        n_in_window: 0,
                        guard: Guard::Failed,
                        error: Some(e.to_string()),
                    },
                })
                .collect()
        })
        .collect()
}

/// Smooths the online set using the bandwidth rule implied by `reg`.
pub fn smooth_online(
    online: &[Curve],
    reg: &RegularityEstimate,
    t0s: Option<&[f64]>,
    kernel: Arc<dyn Kernel>,
) -> Result<Vec<Vec<SmoothedPoint>>, SmootherError> {
    let spec = SmootherSpec::from_estimate(reg, kernel)?;
    Ok(smooth_with_spec(online, &spec, t0s))
}

/// Writes smoothing output as `curve_id,t0,estimate,bandwidth,lambda_min,guard`.
pub fn write_smoothed_csv<W: std::io::Write>(writer: W, rows: &[Vec<SmoothedPoint>]) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["curve_id", "t0", "estimate", "bandwidth", "lambda_min", "guard"])?;
    for p in rows.iter().flatten() {
        wtr.write_record([
            p.curve_id.clone(),
            p.t0.to_string(),
            p.estimate.map(|e| e.to_string()).unwrap_or_default(),
            p.bandwidth.to_string(),
            p.lambda_min.to_string(),
            p.guard.as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
