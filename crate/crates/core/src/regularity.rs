//! Local regularity estimation from a learning set of noisy curves.
//!
//! Around `t0`, each curve contributes the squared differences of its
//! `k0` closest observations at three dyadic lags:
//!
//! ```text
//! θ_k    = mean_n [Y(2k-1) - Y(k)]²    · 1{B_n}
//! θ_2k-1 = mean_n [Y(4k-3) - Y(2k-1)]² · 1{B_n}
//! θ_4k-3 = mean_n [Y(8k-7) - Y(4k-3)]² · 1{B_n}
//! ```
//!
//! where `Y(j)` is the value at the `j`-th closest time (in time order) and
//! `B_n` is the event that curve `n` has its `k0` closest times inside
//! `J_mu(t0)`. The noise cancels in the differences of consecutive θ's, and
//! their ratio behaves like `4^H`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{choose_k, window_at, Curve, CurveError, FunctionalSample, Window};
use crate::kernel::{Epanechnikov, Kernel};
use crate::smoother::{bandwidth, derivative_at, effective_regularity, plug_in_constant, SmootherError};

#[derive(Debug, Error, PartialEq)]
pub enum RegularityError {
    #[error("lag 8k-7 = {} exceeds k0 = {k0}", 8 * k - 7)]
    LagTooLarge { k: usize, k0: usize },
    #[error("no curve satisfies the neighbourhood event at t0 = {0}")]
    NoEffectiveCurves(f64),
    #[error("curve `{0}` has no usable successive differences in the noise window")]
    EmptySn(String),
    #[error("smoothness test still rejects at derivative order {max_degree} (H = {h})")]
    MaxDerivativeExceeded { max_degree: usize, h: f64 },
    #[error("Hölder exponent for the spacing moments must lie in (0, 1], got {0}")]
    InvalidExponent(f64),
    #[error("t0 = {0} is outside [0, 1]")]
    InvalidT0(f64),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Smoother(#[from] SmootherError),
}

/// Averaged squared differences (and, optionally, spacing moments) at `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaStats {
    pub k: usize,
    pub theta_k: f64,
    pub theta_2k1: f64,
    pub theta_4k3: f64,
    pub eta_k: Option<f64>,
    pub eta_2k1: Option<f64>,
    /// Curves for which the neighbourhood event holds.
    pub n_effective: usize,
    /// Normalizing count `N0` (all curves, whether or not the event holds).
    pub n_curves: usize,
}

impl ThetaStats {
    /// Combines statistics from two disjoint learning sets as if they had
    /// been computed on their union.
    pub fn merge(&self, other: &ThetaStats) -> ThetaStats {
        assert_eq!(self.k, other.k, "cannot merge statistics computed with different lags");
        let n = self.n_curves + other.n_curves;
        let (wa, wb) = (self.n_curves as f64 / n as f64, other.n_curves as f64 / n as f64);
        let mix = |a: f64, b: f64| wa * a + wb * b;
        let mix_opt = |a: Option<f64>, b: Option<f64>| Some(mix(a?, b?));
        ThetaStats {
            k: self.k,
            theta_k: mix(self.theta_k, other.theta_k),
            theta_2k1: mix(self.theta_2k1, other.theta_2k1),
            theta_4k3: mix(self.theta_4k3, other.theta_4k3),
            eta_k: mix_opt(self.eta_k, other.eta_k),
            eta_2k1: mix_opt(self.eta_2k1, other.eta_2k1),
            n_effective: self.n_effective + other.n_effective,
            n_curves: n,
        }
    }
}

/// Computes the θ statistics (and the spacing moments η with exponent
/// `2 h_exp` when `h_exp` is given) over the window's curves.
pub fn theta_stats(
    window: &Window,
    sample: &FunctionalSample,
    k: usize,
    h_exp: Option<f64>,
) -> Result<ThetaStats, RegularityError> {
    if k == 0 || 8 * k - 7 > window.k0 {
        return Err(RegularityError::LagTooLarge { k, k0: window.k0 });
    }
    if let Some(h) = h_exp {
        if !(h > 0.0 && h <= 1.0) {
            return Err(RegularityError::InvalidExponent(h));
        }
    }
    // 1-based order statistics -> 0-based positions in the selection.
    let (p1, p2, p3, p4) = (k - 1, 2 * k - 2, 4 * k - 4, 8 * k - 8);
    let mut sums = [0.0f64; 5];
    let mut n_effective = 0;
    for ((curve, sel), &inside) in sample.curves().iter().zip(&window.selected).zip(&window.in_b) {
        if !inside {
            continue;
        }
        n_effective += 1;
        let y = curve.values();
        let sq = |a: usize, b: usize| {
            let d = y[sel[b]] - y[sel[a]];
            d * d
        };
        sums[0] += sq(p1, p2);
        sums[1] += sq(p2, p3);
        sums[2] += sq(p3, p4);
        if let Some(h) = h_exp {
            let t = curve.times();
            sums[3] += (t[sel[p2]] - t[sel[p1]]).abs().powf(2.0 * h);
            sums[4] += (t[sel[p3]] - t[sel[p2]]).abs().powf(2.0 * h);
        }
    }
    if n_effective == 0 {
        return Err(RegularityError::NoEffectiveCurves(window.t0));
    }
    let n = sample.len() as f64;
    Ok(ThetaStats {
        k,
        theta_k: sums[0] / n,
        theta_2k1: sums[1] / n,
        theta_4k3: sums[2] / n,
        eta_k: h_exp.map(|_| sums[3] / n),
        eta_2k1: h_exp.map(|_| sums[4] / n),
        n_effective,
        n_curves: sample.len(),
    })
}

/// An estimated Hölder exponent, clamped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub value: f64,
    /// Unclamped log-ratio; `None` when the ordering condition failed.
    pub raw: Option<f64>,
    pub degenerate: bool,
}

impl HurstEstimate {
    fn from_log_ratio(upper: f64, lower: f64) -> Self {
        let raw = (upper.ln() - lower.ln()) / (2.0 * std::f64::consts::LN_2);
        Self { value: raw.clamp(0.0, 1.0), raw: Some(raw), degenerate: false }
    }

    fn degenerate() -> Self {
        Self { value: 0.0, raw: None, degenerate: true }
    }
}

/// Exponent estimate with unknown noise variance; needs
/// `θ_4k-3 > θ_2k-1 > θ_k`, otherwise 0 and flagged degenerate.
pub fn estimate_h(stats: &ThetaStats) -> HurstEstimate {
    if stats.theta_4k3 > stats.theta_2k1 && stats.theta_2k1 > stats.theta_k {
        HurstEstimate::from_log_ratio(stats.theta_4k3 - stats.theta_2k1, stats.theta_2k1 - stats.theta_k)
    } else {
        HurstEstimate::degenerate()
    }
}

/// Exponent estimate with known noise variance; needs
/// `min(θ_2k-1, θ_k) > 2σ²`.
pub fn estimate_h_known_sigma(stats: &ThetaStats, sigma2: f64) -> HurstEstimate {
    let two_s2 = 2.0 * sigma2;
    if stats.theta_2k1.min(stats.theta_k) > two_s2 {
        HurstEstimate::from_log_ratio(stats.theta_2k1 - two_s2, stats.theta_k - two_s2)
    } else {
        HurstEstimate::degenerate()
    }
}

/// Local Hölder constant from θ and the spacing moments η; 0 unless both
/// `η_2k-1 > η_k` and `θ_2k-1 > θ_k`.
pub fn estimate_l(stats: &ThetaStats) -> f64 {
    let (Some(eta_k), Some(eta_2k1)) = (stats.eta_k, stats.eta_2k1) else {
        return 0.0;
    };
    if eta_2k1 > eta_k && stats.theta_2k1 > stats.theta_k {
        ((stats.theta_2k1 - stats.theta_k) / (eta_2k1 - eta_k)).sqrt()
    } else {
        0.0
    }
}

/// Which successive differences enter the noise-variance estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseWindow {
    /// Observations between the first and last of the `k0` closest to `t0`.
    #[default]
    Local,
    /// Every successive pair of the curve.
    Global,
}

/// Noise variance from halved squared successive differences, averaged
/// within each curve and then across curves.
pub fn estimate_sigma2(
    sample: &FunctionalSample,
    window: &Window,
    mode: NoiseWindow,
) -> Result<f64, RegularityError> {
    let mut total = 0.0;
    for (curve, sel) in sample.curves().iter().zip(&window.selected) {
        let (first, last) = match mode {
            NoiseWindow::Global => (1, curve.len().saturating_sub(1)),
            NoiseWindow::Local => {
                let (Some(&lo), Some(&hi)) = (sel.first(), sel.last()) else {
                    return Err(RegularityError::EmptySn(curve.id().to_string()));
                };
                // Indices whose time lies in [T(1), T(k0)], with a predecessor.
                let t = curve.times();
                let lo = t.partition_point(|&x| x < t[lo]).max(1);
                let hi = t.partition_point(|&x| x <= t[hi]).saturating_sub(1);
                (lo, hi)
            }
        };
        if curve.len() < 2 || first > last {
            return Err(RegularityError::EmptySn(curve.id().to_string()));
        }
        let y = curve.values();
        let s: f64 = (first..=last).map(|m| (y[m] - y[m - 1]).powi(2)).sum();
        total += s / (2.0 * (last - first + 1) as f64);
    }
    Ok(total / sample.len() as f64)
}

/// Rejects "not differentiable" when `h_hat > 1 - 1 / log²(mu_hat)`.
pub fn smoothness_test(h_hat: f64, mu_hat: f64) -> bool {
    let l = mu_hat.ln();
    h_hat > 1.0 - 1.0 / (l * l)
}

#[derive(Debug, Clone)]
pub struct RegularityConfig {
    /// Largest derivative order the loop may reach.
    pub max_degree: usize,
    /// Use the known-variance exponent estimator at the first stage.
    pub known_sigma2: Option<f64>,
    pub noise_window: NoiseWindow,
    pub kernel: Arc<dyn Kernel>,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self { max_degree: 2, known_sigma2: None, noise_window: NoiseWindow::Local, kernel: Arc::new(Epanechnikov) }
    }
}

/// One pass of the derivative-order loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub d: usize,
    pub h_raw: Option<f64>,
    pub h_clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub t0: f64,
    pub d_hat: usize,
    pub h_hat: f64,
    pub sigma2_hat: f64,
    pub l_hat: f64,
    pub k0: usize,
    pub k: usize,
    pub degenerate: bool,
    pub iterations: Vec<StageRecord>,
}

impl RegularityEstimate {
    /// `d_hat + h_hat`.
    pub fn regularity(&self) -> f64 {
        self.d_hat as f64 + self.h_hat
    }
}

/// Pseudo-curves of the `order`-th derivative of each learning curve,
/// evaluated at the curve's own times inside `[lo, hi]`. Guard-rejected
/// points are dropped; so are curves left with no point.
fn derivative_curves(
    sample: &FunctionalSample,
    order: usize,
    c: f64,
    regularity: f64,
    kernel: &dyn Kernel,
    lo: f64,
    hi: f64,
) -> Result<Vec<Curve>, RegularityError> {
    let mut out = Vec::with_capacity(sample.len());
    for curve in sample.curves() {
        let h = bandwidth(c, curve.len(), regularity);
        let times = curve.times();
        let start = times.partition_point(|&t| t < lo);
        let end = times.partition_point(|&t| t <= hi);
        let mut dt = Vec::with_capacity(end - start);
        let mut dy = Vec::with_capacity(end - start);
        for &t in &times[start..end] {
            if let Some(v) = derivative_at(times, curve.values(), t, order, kernel, h)? {
                dt.push(t);
                dy.push(v);
            }
        }
        if !dt.is_empty() {
            out.push(Curve::new(curve.id(), dt, dy)?);
        }
    }
    Ok(out)
}

/// Estimates the local regularity `d_hat + h_hat` at `t0`, together with the
/// noise variance and the Hölder constant of the `d_hat`-th derivative.
///
/// While the smoothness test rejects, derivatives of the next order are
/// estimated on the learning curves with a local polynomial of that order and
/// the exponent is re-estimated on those pseudo-curves.
pub fn estimate_regularity(
    sample: &FunctionalSample,
    t0: f64,
    config: &RegularityConfig,
) -> Result<RegularityEstimate, RegularityError> {
    if !(0.0..=1.0).contains(&t0) {
        return Err(RegularityError::InvalidT0(t0));
    }
    let mu = sample.mu_hat();
    let k0 = sample.k0_hat();
    let k = choose_k(k0);
    if 8 * k - 7 > k0 {
        return Err(RegularityError::LagTooLarge { k, k0 });
    }
    let window = window_at(sample, t0, k0);
    let mut stats = theta_stats(&window, sample, k, Some(1.0))?;
    let sigma2 = match config.known_sigma2 {
        Some(s) => s,
        None => estimate_sigma2(sample, &window, config.noise_window)?,
    };
    let mut h = match config.known_sigma2 {
        Some(s) => estimate_h_known_sigma(&stats, s),
        None => estimate_h(&stats),
    };
    let mut iterations = vec![StageRecord { d: 0, h_raw: h.raw, h_clamped: h.value }];
    let mut degenerate = h.degenerate;
    let mut d = 0;
    let mut stage_sample: Option<FunctionalSample> = None;
    let mut stage_window = window;

    while smoothness_test(h.value, mu) {
        if d >= config.max_degree {
            return Err(RegularityError::MaxDerivativeExceeded { max_degree: config.max_degree, h: h.value });
        }
        let l1 = estimate_l(&stats);
        let reg = effective_regularity(d as f64 + h.value);
        let c = plug_in_constant(sigma2, l1, reg, config.kernel.as_ref())?;
        // Only points in J_mu(t0) can enter the window of the pseudo-curves.
        let curves = derivative_curves(
            sample,
            d + 1,
            c,
            reg,
            config.kernel.as_ref(),
            stage_window.j_mu_lo,
            stage_window.j_mu_hi,
        )?;
        if curves.is_empty() {
            return Err(RegularityError::NoEffectiveCurves(t0));
        }
        let deriv = FunctionalSample::with_summaries(curves, mu, k0, sample.interval_length());
        stage_window = window_at(&deriv, t0, k0);
        stats = theta_stats(&stage_window, &deriv, k, Some(1.0))?;
        h = estimate_h(&stats);
        degenerate |= h.degenerate;
        d += 1;
        iterations.push(StageRecord { d, h_raw: h.raw, h_clamped: h.value });
        stage_sample = Some(deriv);
    }

    let terminal = stage_sample.as_ref().unwrap_or(sample);
    // Evaluated at the exponent the smoother will use, so a floored estimate
    // still yields a usable constant.
    let l_exp = effective_regularity(d as f64 + h.value) - d as f64;
    let l_hat = estimate_l(&theta_stats(&stage_window, terminal, k, Some(l_exp))?);
    Ok(RegularityEstimate {
        t0,
        d_hat: d,
        h_hat: h.value,
        sigma2_hat: sigma2,
        l_hat,
        k0,
        k,
        degenerate,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(a: f64, b: f64, c: f64) -> ThetaStats {
        ThetaStats {
            k: 2,
            theta_k: a,
            theta_2k1: b,
            theta_4k3: c,
            eta_k: None,
            eta_2k1: None,
            n_effective: 1,
            n_curves: 1,
        }
    }

    fn grid_sample(n: usize, m: usize, f: impl Fn(usize, f64) -> f64) -> FunctionalSample {
        let curves = (0..n)
            .map(|i| {
                let t: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
                let y = t.iter().map(|&x| f(i, x)).collect();
                Curve::new(format!("c{i}"), t, y).unwrap()
            })
            .collect();
        FunctionalSample::summarize(curves, 1.0).unwrap()
    }

    #[test]
    fn exact_dyadic_ratio() {
        let h = estimate_h(&stats(1.0, 2.0, 4.0));
        assert!((h.value - 0.5).abs() < 1e-15);
        assert!(!h.degenerate);
    }

    #[test]
    fn ordering_failure_is_degenerate() {
        let h = estimate_h(&stats(1.0, 2.0, 2.0));
        assert_eq!(h.value, 0.0);
        assert!(h.degenerate);
        assert_eq!(h.raw, None);
    }

    #[test]
    fn raw_value_kept_when_clamped() {
        let h = estimate_h(&stats(1.0, 2.0, 100.0));
        assert_eq!(h.value, 1.0);
        assert!(h.raw.unwrap() > 1.0);
    }

    #[test]
    fn known_sigma_variant() {
        let h = estimate_h_known_sigma(&stats(1.0, 2.0, 0.0), 0.0);
        assert!((h.value - 0.5).abs() < 1e-15);
        let h = estimate_h_known_sigma(&stats(1.0, 2.0, 0.0), 0.6);
        assert_eq!(h.value, 0.0);
        assert!(h.degenerate);
    }

    #[test]
    fn l_guard_cases() {
        let mut s = stats(1.0, 2.0, 4.0);
        assert_eq!(estimate_l(&s), 0.0);
        s.eta_k = Some(0.5);
        s.eta_2k1 = Some(0.5);
        assert_eq!(estimate_l(&s), 0.0);
        s.eta_2k1 = Some(0.75);
        assert!((estimate_l(&s) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn smoothness_threshold() {
        assert!(smoothness_test(0.99, 300.0));
        assert!(!smoothness_test(0.5, 300.0));
        let l = 300f64.ln();
        let thr = 1.0 - 1.0 / (l * l);
        assert!((thr - 0.969_23).abs() < 1e-4);
        assert!(!smoothness_test(thr, 300.0));
    }

    #[test]
    fn constant_curves_give_zero_thetas() {
        let s = grid_sample(5, 100, |_, _| 3.0);
        let w = window_at(&s, 0.5, s.k0_hat());
        let st = theta_stats(&w, &s, choose_k(s.k0_hat()), None).unwrap();
        assert_eq!((st.theta_k, st.theta_2k1, st.theta_4k3), (0.0, 0.0, 0.0));
        assert_eq!(st.n_effective, 5);
    }

    #[test]
    fn line_curve_plug_in() {
        // Single noiseless curve Y = T observed on {0.1, ..., 0.8}; k0 = 8, k = 2.
        let t: Vec<f64> = (1..=8).map(|i| i as f64 / 10.0).collect();
        let c = Curve::new("line", t.clone(), t.clone()).unwrap();
        let sample = FunctionalSample::with_summaries(vec![c], 300.0, 9, 1.0);
        let mut w = window_at(&sample, 0.45, 8);
        // Force k0 = 9 bookkeeping aside: select all 8 points and accept the event.
        w.k0 = 9;
        w.selected = vec![(0..8).collect()];
        w.in_b = vec![true];
        let padded = Curve::new("line", [t.clone(), vec![0.9]].concat(), [t.clone(), vec![0.9]].concat()).unwrap();
        let sample = FunctionalSample::with_summaries(vec![padded], 300.0, 9, 1.0);
        w.selected = vec![(0..9).collect()];
        let st = theta_stats(&w, &sample, 2, None).unwrap();
        assert!((st.theta_k - (0.3f64 - 0.2).powi(2)).abs() < 1e-15);
        assert!((st.theta_2k1 - (0.5f64 - 0.3).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn lag_too_large() {
        let s = grid_sample(3, 100, |_, x| x);
        let w = window_at(&s, 0.5, 8);
        assert_eq!(theta_stats(&w, &s, 2, None).unwrap_err(), RegularityError::LagTooLarge { k: 2, k0: 8 });
    }

    #[test]
    fn invalid_eta_exponent() {
        let s = grid_sample(3, 100, |_, x| x);
        let w = window_at(&s, 0.5, 9);
        assert_eq!(theta_stats(&w, &s, 2, Some(0.0)).unwrap_err(), RegularityError::InvalidExponent(0.0));
    }

    #[test]
    fn sigma2_of_constant_noise_curve() {
        let vals = [0.3, -0.1, 0.4, 0.0, -0.2, 0.1];
        let t: Vec<f64> = (0..6).map(|i| i as f64 / 5.0).collect();
        let c = Curve::new("n", t, vals.to_vec()).unwrap();
        let s = FunctionalSample::with_summaries(vec![c], 300.0, 6, 1.0);
        let w = window_at(&s, 0.5, 6);
        let expected: f64 = vals.windows(2).map(|p| (p[1] - p[0]).powi(2)).sum::<f64>() / (2.0 * 5.0);
        assert!((estimate_sigma2(&s, &w, NoiseWindow::Global).unwrap() - expected).abs() < 1e-15);
        assert!((estimate_sigma2(&s, &w, NoiseWindow::Local).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn sigma2_local_window_indices() {
        let s = grid_sample(1, 101, |_, x| (x * 100.0).round() % 2.0);
        let w = window_at(&s, 0.5, 5);
        // Alternating 0/1 values: every successive squared difference is 1.
        assert!((estimate_sigma2(&s, &w, NoiseWindow::Local).unwrap() - 0.5).abs() < 1e-15);
        let single = Curve::new("one", vec![0.5], vec![1.0]).unwrap();
        let s = FunctionalSample::with_summaries(vec![single], 300.0, 1, 1.0);
        let w = window_at(&s, 0.5, 1);
        assert!(matches!(estimate_sigma2(&s, &w, NoiseWindow::Local), Err(RegularityError::EmptySn(_))));
    }

    #[test]
    fn merge_matches_union() {
        let a = grid_sample(4, 200, |i, x| ((i + 1) as f64 * 9.0 * x).sin());
        let b = grid_sample(6, 200, |i, x| ((i + 3) as f64 * 5.0 * x).cos());
        let union: Vec<Curve> = a.curves().iter().chain(b.curves()).cloned().collect();
        let u = FunctionalSample::summarize(union, 1.0).unwrap();
        let k0 = u.k0_hat();
        let k = choose_k(k0);
        let st = |s: &FunctionalSample| theta_stats(&window_at(s, 0.4, k0), s, k, Some(0.5)).unwrap();
        let merged = st(&a).merge(&st(&b));
        let direct = st(&u);
        assert!((merged.theta_k - direct.theta_k).abs() < 1e-14);
        assert!((merged.theta_2k1 - direct.theta_2k1).abs() < 1e-14);
        assert!((merged.theta_4k3 - direct.theta_4k3).abs() < 1e-14);
        assert!((merged.eta_k.unwrap() - direct.eta_k.unwrap()).abs() < 1e-14);
        assert_eq!(merged.n_effective, direct.n_effective);
        assert_eq!(merged.n_curves, 10);
    }

    #[test]
    fn max_degree_zero_on_smooth_input() {
        let s = grid_sample(50, 300, |i, x| (1.0 + i as f64 * 0.01) * x * x + 0.3 * x);
        let cfg = RegularityConfig { max_degree: 0, ..Default::default() };
        match estimate_regularity(&s, 0.5, &cfg) {
            Err(RegularityError::MaxDerivativeExceeded { max_degree: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn estimate_rejects_bad_t0() {
        let s = grid_sample(3, 100, |_, x| x);
        assert_eq!(
            estimate_regularity(&s, 1.5, &RegularityConfig::default()).unwrap_err(),
            RegularityError::InvalidT0(1.5)
        );
    }

    #[test]
    fn estimate_serializes_expected_fields() {
        let e = RegularityEstimate {
            t0: 0.5,
            d_hat: 0,
            h_hat: 0.5,
            sigma2_hat: 0.05,
            l_hat: 1.0,
            k0: 14,
            k: 2,
            degenerate: false,
            iterations: vec![StageRecord { d: 0, h_raw: Some(0.5), h_clamped: 0.5 }],
        };
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        for key in ["t0", "d_hat", "h_hat", "sigma2_hat", "l_hat", "k0", "k", "degenerate", "iterations"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["iterations"][0]["h_clamped"], 0.5);
        let back: RegularityEstimate = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
