//! Exact fractional Brownian motion samplers.
//!
//! Arbitrary time sets use a dense Cholesky factor of the fBm covariance.
//! Arithmetic progressions `s + kΔ` are far more common (equispaced designs,
//! quadrature grids) and go through a cached Durbin–Levinson factorization of
//! the fractional Gaussian noise autocovariance, which is the Cholesky factor
//! of the Toeplitz increment covariance written as a recursion. Extra points
//! off the progression are appended exactly by Gram–Schmidt against the
//! innovations.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::SimulateError;

/// Two-sided fBm covariance `½(|s|^{2H} + |t|^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    0.5 * (s.abs().powf(p) + t.abs().powf(p) - (t - s).abs().powf(p))
}

/// Unit-lag fractional Gaussian noise autocovariance.
fn fgn_autocov(k: usize, hurst: f64) -> f64 {
    let p = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(p) - 2.0 * k.powf(p) + (k - 1.0).abs().powf(p))
}

/// One-step predictors of unit-lag fGn: `X_n = Σ_j φ[n][j] X_{n-1-j} + √v[n] Z_n`.
#[derive(Debug)]
struct DurbinLevinson {
    phi: Vec<Vec<f64>>,
    sd: Vec<f64>,
}

impl DurbinLevinson {
    fn new(n: usize, hurst: f64) -> Self {
        let gamma: Vec<f64> = (0..=n).map(|k| fgn_autocov(k, hurst)).collect();
        let mut phi: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut sd = Vec::with_capacity(n);
        phi.push(Vec::new());
        let mut v = gamma[0];
        sd.push(v.sqrt());
        for m in 1..n {
            let prev = &phi[m - 1];
            let num = gamma[m] - prev.iter().enumerate().map(|(j, p)| p * gamma[m - 1 - j]).sum::<f64>();
            let kappa = num / v;
            let mut row = Vec::with_capacity(m);
            for j in 0..m - 1 {
                row.push(prev[j] - kappa * prev[m - 2 - j]);
            }
            row.push(kappa);
            v *= 1.0 - kappa * kappa;
            sd.push(v.sqrt());
            phi.push(row);
        }
        Self { phi, sd }
    }

    fn len(&self) -> usize {
        self.sd.len()
    }

    /// Fills `x[..z.len()]` with unit-lag fGn driven by innovations `z`.
    fn generate(&self, z: &[f64], x: &mut [f64]) {
        for n in 0..z.len() {
            let pred: f64 = self.phi[n].iter().enumerate().map(|(j, p)| p * x[n - 1 - j]).sum();
            x[n] = pred + self.sd[n] * z[n];
        }
    }

    /// Maps covariances with `X_0..X_{n-1}` to covariances with the
    /// normalized innovations `Z_0..Z_{n-1}` (that is, applies `L⁻¹`).
    fn whiten(&self, c: &[f64]) -> Vec<f64> {
        (0..c.len())
            .map(|n| {
                let pred: f64 = self.phi[n].iter().enumerate().map(|(j, p)| p * c[n - 1 - j]).sum();
                (c[n] - pred) / self.sd[n]
            })
            .collect()
    }
}

fn factor_cache() -> &'static Mutex<HashMap<u64, Arc<DurbinLevinson>>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Arc<DurbinLevinson>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Factor for at least `n` increments. The predictors of the first `n` steps
/// do not depend on the total length, so a longer cached factor serves.
fn factor(n: usize, hurst: f64) -> Arc<DurbinLevinson> {
    let key = hurst.to_bits();
    let mut cache = factor_cache().lock().expect("factor cache poisoned");
    if let Some(f) = cache.get(&key) {
        if f.len() >= n {
            return Arc::clone(f);
        }
    }
    let size = n.max(64).next_power_of_two();
    let f = Arc::new(DurbinLevinson::new(size, hurst));
    cache.insert(key, Arc::clone(&f));
    f
}

pub(crate) fn validate_hurst(hurst: f64) -> Result<(), SimulateError> {
    if hurst > 0.0 && hurst < 1.0 {
        Ok(())
    } else {
        Err(SimulateError::InvalidHurst(hurst))
    }
}

fn validate_times(times: &[f64]) -> Result<(), SimulateError> {
    for (i, &t) in times.iter().enumerate() {
        if !(0.0..=1.0).contains(&t) {
            return Err(SimulateError::TimeOutOfRange(t));
        }
        if i > 0 && t < times[i - 1] {
            return Err(SimulateError::UnsortedTimes);
        }
    }
    Ok(())
}

/// Step of `times` when they form an arithmetic progression.
fn progression_step(times: &[f64]) -> Option<f64> {
    let n = times.len();
    if n < 3 {
        return None;
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(step > 0.0) {
        return None;
    }
    let tol = 1e-12 * times[n - 1].abs().max(1.0);
    times
        .iter()
        .enumerate()
        .all(|(k, &t)| (t - (times[0] + k as f64 * step)).abs() <= tol)
        .then_some(step)
}

/// Samples `W` jointly at `times` (sorted) and at `extras` (any order).
///
/// Returns values at `times` followed by values at `extras`.
pub(crate) fn fbm_joint<R: Rng + ?Sized>(
    times: &[f64],
    extras: &[f64],
    hurst: f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), SimulateError> {
    validate_hurst(hurst)?;
    validate_times(times)?;
    if let Some(&t) = extras.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(SimulateError::TimeOutOfRange(t));
    }
    match progression_step(times) {
        Some(step) => Ok(fbm_progression(times[0], step, times.len(), extras, hurst, rng)),
        None => {
            let all: Vec<f64> = times.iter().chain(extras).copied().collect();
            let vals = fbm_dense(&all, hurst, rng)?;
            let (a, b) = vals.split_at(times.len());
            Ok((a.to_vec(), b.to_vec()))
        }
    }
}

/// Exact draw of `W` at `times` (sorted, in `[0, 1]`), with `W(0) = 0`.
pub fn fbm_at<R: Rng + ?Sized>(times: &[f64], hurst: f64, rng: &mut R) -> Result<Vec<f64>, SimulateError> {
    fbm_joint(times, &[], hurst, rng).map(|(v, _)| v)
}

/// Dense Cholesky sampler on an arbitrary time set. Repeated times share one
/// value and `W(0) = 0` exactly.
pub(crate) fn fbm_dense<R: Rng + ?Sized>(times: &[f64], hurst: f64, rng: &mut R) -> Result<Vec<f64>, SimulateError> {
    let mut uniq: Vec<f64> = times.iter().copied().filter(|&t| t != 0.0).collect();
    uniq.sort_by(f64::total_cmp);
    uniq.dedup();
    let n = uniq.len();
    let mut out = vec![0.0; times.len()];
    if n == 0 {
        return Ok(out);
    }
    let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(uniq[i], uniq[j], hurst));
    let l = cholesky_with_jitter(cov)?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let vals: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect();
    for (o, &t) in out.iter_mut().zip(times) {
        if t != 0.0 {
            let i = uniq.binary_search_by(|u| u.total_cmp(&t)).expect("time present in unique set");
            *o = vals[i];
        }
    }
    Ok(out)
}

/// Cholesky factor, retrying with diagonal jitter `1e-12 · max diag` grown
/// tenfold up to ten times.
pub(crate) fn cholesky_with_jitter(cov: DMatrix<f64>) -> Result<DMatrix<f64>, SimulateError> {
    let n = cov.nrows();
    let max_diag = (0..n).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    let mut jitter = 0.0;
    for attempt in 0..=10 {
        let mut m = cov.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = m.cholesky() {
            if attempt > 0 {
                log::debug!("fBm covariance needed jitter {jitter:e}");
            }
            return Ok(c.l());
        }
        jitter = if attempt == 0 { 1e-12 * max_diag } else { jitter * 10.0 };
    }
    Err(SimulateError::CholeskyFailure { size: n })
}

/// `W` at `s + kΔ` for `k < count` and at `extras`, drawn jointly.
///
/// Works with `V(u) = W(s + u) − W(s)`, itself a two-sided fBm, so that the
/// progression becomes a lattice from zero. `W(s) = −V(−s)` joins the extras.
fn fbm_progression<R: Rng + ?Sized>(
    s: f64,
    step: f64,
    count: usize,
    extras: &[f64],
    hurst: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let n_inc = count - 1;
    let dl = factor(n_inc, hurst);
    let scale = step.powf(hurst);

    let z: Vec<f64> = (0..n_inc).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = vec![0.0; n_inc];
    dl.generate(&z, &mut x);
    let mut lattice = Vec::with_capacity(count);
    let mut acc = 0.0;
    lattice.push(0.0);
    for xi in &x {
        acc += scale * xi;
        lattice.push(acc);
    }

    // Extra points in V's time, the origin shift first.
    let mut pts: Vec<f64> = Vec::with_capacity(extras.len() + 1);
    if s != 0.0 {
        pts.push(-s);
    }
    pts.extend(extras.iter().map(|&e| e - s));

    // Rows of the joint factor for the extra points: coefficients on the
    // lattice innovations, then on earlier extras' own innovations.
    let mut rows: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::with_capacity(pts.len());
    let mut extra_vals = Vec::with_capacity(pts.len());
    for (j, &u) in pts.iter().enumerate() {
        let c: Vec<f64> = (0..n_inc)
            .map(|i| {
                let a = fbm_covariance(u, (i + 1) as f64 * step, hurst);
                let b = fbm_covariance(u, i as f64 * step, hurst);
                (a - b) / scale
            })
            .collect();
        let lat = dl.whiten(&c);
        let mut own = Vec::with_capacity(j);
        for (i, (plat, pown, pdiag)) in rows.iter().enumerate() {
            let cov = fbm_covariance(u, pts[i], hurst);
            let dot: f64 = lat.iter().zip(plat).map(|(a, b)| a * b).sum::<f64>()
                + own.iter().zip(pown).map(|(a, b): (&f64, &f64)| a * b).sum::<f64>();
            own.push(if *pdiag > 0.0 { (cov - dot) / pdiag } else { 0.0 });
        }
        let var = fbm_covariance(u, u, hurst);
        let explained: f64 = lat.iter().map(|a| a * a).sum::<f64>() + own.iter().map(|a| a * a).sum::<f64>();
        let resid = var - explained;
        let diag = if resid > 1e-14 * var.max(f64::MIN_POSITIVE) { resid.sqrt() } else { 0.0 };
        let z_own: f64 = rng.sample(StandardNormal);
        let mean: f64 = lat.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>()
            + own.iter().zip(&extra_vals).map(|(a, (_, zi)): (&f64, &(f64, f64))| a * zi).sum::<f64>();
        extra_vals.push((mean + diag * z_own, z_own));
        rows.push((lat, own, diag));
    }

    let v: Vec<f64> = extra_vals.iter().map(|(v, _)| *v).collect();
    let (w_s, extra_v) = if s != 0.0 { (-v[0], &v[1..]) } else { (0.0, &v[..]) };
    let lattice = lattice.into_iter().map(|x| x + w_s).collect();
    let extras = extra_v.iter().map(|x| x + w_s).collect();
    (lattice, extras)
}
