//! Monte-Carlo risk of the plug-in smoother, optionally against the
//! cross-validation baseline, with timings.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{Curve, FunctionalSample};
use crate::cv::{cv_smooth, default_grid, DEFAULT_GRID_SIZE};
use crate::kernel::{Epanechnikov, Kernel};
use crate::regularity::{estimate_regularity, RegularityConfig, RegularityEstimate};
use crate::simulate::{simulate, SimulationSpec};
use crate::smoother::{fit_at, SmootherSpec};

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("residual ratio denominator is zero")]
    ZeroDenominator,
    #[error("at least one replication is required")]
    NoReplications,
}

/// Largest squared error across curves.
pub fn risk_max(estimates: &[f64], truths: &[f64]) -> Result<f64, BenchError> {
    if estimates.len() != truths.len() {
        return Err(BenchError::LengthMismatch(estimates.len(), truths.len()));
    }
    if estimates.is_empty() {
        return Err(BenchError::Empty);
    }
    Ok(estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).fold(0.0, f64::max))
}

/// `Σ (Y − xa)² / Σ (Y − xb)²` over the curve's observations.
pub fn residual_ratio(curve: &Curve, xa: &[f64], xb: &[f64]) -> Result<f64, BenchError> {
    let y = curve.values();
    for x in [xa, xb] {
        if x.len() != y.len() {
            return Err(BenchError::LengthMismatch(x.len(), y.len()));
        }
    }
    let ss = |x: &[f64]| y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let den = ss(xb);
    if den == 0.0 {
        return Err(BenchError::ZeroDenominator);
    }
    Ok(ss(xa) / den)
}

/// Linear-interpolation quantile of sorted data (`q` in `[0, 1]`).
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plug-in bandwidth from the learning-set regularity estimate.
    Plugin,
    Cv,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Plugin => "plugin",
            Method::Cv => "cv",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub t0s: Vec<f64>,
    pub replications: usize,
    pub with_cv: bool,
    pub cv_grid_size: usize,
    pub regularity: RegularityConfig,
    pub kernel: Arc<dyn Kernel>,
    /// Clamp plug-in estimates at the trimming threshold.
    pub trim: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            t0s: vec![0.5],
            replications: 100,
            with_cv: false,
            cv_grid_size: DEFAULT_GRID_SIZE,
            regularity: RegularityConfig::default(),
            kernel: Arc::new(Epanechnikov),
            trim: true,
        }
    }
}

/// One (replication, t0, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub replication: usize,
    pub t0: f64,
    pub method: Method,
    pub risk: Option<f64>,
    /// Mean squared error across curves, for comparison with the maximum.
    pub mean_sq_error: Option<f64>,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub estimates: Vec<Result<RegularityEstimate, String>>,
    pub cells: Vec<Cell>,
    /// A regularity estimate was degenerate or failed.
    pub flagged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub t0: f64,
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub median: Option<f64>,
    pub q25: Option<f64>,
    pub q75: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub regularity_seconds: f64,
    pub method_seconds: f64,
    pub cv_seconds: Option<f64>,
    pub speedup: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub spec: SimulationSpec,
    pub t0s: Vec<f64>,
    pub replications: usize,
    pub records: Vec<ReplicationRecord>,
    pub summary: Vec<Summary>,
    pub timing: Timing,
}

impl RiskReport {
    pub fn failed_replications(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// Risk samples of one method at one `t0`, in replication order.
    pub fn risks(&self, t0: f64, method: Method) -> Vec<f64> {
        self.records
            .iter()
            .flat_map(|r| &r.cells)
            .filter(|c| c.t0 == t0 && c.method == method)
            .filter_map(|c| c.risk)
            .collect()
    }

    pub fn summary_for(&self, t0: f64, method: Method) -> Option<&Summary> {
        self.summary.iter().find(|s| s.t0 == t0 && s.method == method)
    }

    /// JSON without the timing section, for reproducibility checks.
    pub fn to_json_without_timing(&self) -> serde_json::Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timing");
        }
        serde_json::to_string_pretty(&v)
    }

    /// Flat `replication,t0,method,risk,seconds` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["replication", "t0", "method", "risk", "seconds"])?;
        for c in self.records.iter().flat_map(|r| &r.cells) {
            wtr.write_record([
                c.replication.to_string(),
                c.t0.to_string(),
                c.method.as_str().to_string(),
                c.risk.map(|r| r.to_string()).unwrap_or_default(),
                c.seconds.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Seed of replication `r`, drawn from its own stream of the base seed.
pub fn replication_seed(base: u64, r: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(u64::MAX - r as u64);
    rng.next_u64()
}

fn errors_at(truths: &[f64], estimates: &[f64]) -> (Option<f64>, Option<f64>) {
    let risk = risk_max(estimates, truths).ok();
    let mse = (!estimates.is_empty())
        .then(|| estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / estimates.len() as f64);
    (risk, mse)
}

#[derive(Default)]
struct RepTiming {
    regularity: f64,
    method: f64,
    cv: f64,
}

fn run_replication(spec: &SimulationSpec, config: &BenchConfig, r: usize) -> (ReplicationRecord, RepTiming) {
    let seed = replication_seed(spec.seed, r);
    let mut rep_spec = spec.clone();
    rep_spec.seed = seed;
    rep_spec.anchors = config.t0s.clone();
    let mut record = ReplicationRecord { replication: r, seed, estimates: Vec::new(), cells: Vec::new(), flagged: false, error: None };
    let mut timing = RepTiming::default();

    let data = match simulate(&rep_spec) {
        Ok(d) => d,
        Err(e) => {
            record.error = Some(e.to_string());
            return (record, timing);
        }
    };
    let sample = match FunctionalSample::summarize(data.learning_curves(), 1.0) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return (record, timing);
        }
    };
    let online = data.online_curves();
    let mut cv_cache: HashMap<usize, Vec<Result<crate::cv::CvCurve, crate::cv::CvError>>> = HashMap::new();

    for &t0 in &config.t0s {
        let truths: Vec<f64> = data.online.iter().map(|g| g.truth_at(t0)).collect();
        let clock = Instant::now();
        let est = estimate_regularity(&sample, t0, &config.regularity);
        timing.regularity += clock.elapsed().as_secs_f64();
        let mut cell = Cell { replication: r, t0, method: Method::Plugin, risk: None, mean_sq_error: None, seconds: 0.0, error: None };
        let degree = match &est {
            Ok(e) => {
                record.flagged |= e.degenerate;
                let clock = Instant::now();
                let outcome = SmootherSpec::from_estimate(e, Arc::clone(&config.kernel)).and_then(|s| {
                    let s = s.with_trim(config.trim);
                    online
                        .iter()
                        .map(|c| fit_at(c, t0, &s, s.bandwidth_for(c.len())).map(|(v, _)| v))
                        .collect::<Result<Vec<f64>, _>>()
                });
                cell.seconds = clock.elapsed().as_secs_f64();
                timing.method += cell.seconds;
                match outcome {
                    Ok(values) => (cell.risk, cell.mean_sq_error) = errors_at(&truths, &values),
                    Err(err) => cell.error = Some(err.to_string()),
                }
                e.d_hat
            }
            Err(err) => {
                record.flagged = true;
                cell.error = Some(err.to_string());
                0
            }
        };
        record.estimates.push(est.map_err(|e| e.to_string()));
        record.cells.push(cell);

        if config.with_cv {
            let clock = Instant::now();
            let fits = cv_cache.entry(degree).or_insert_with(|| {
                let grids: Vec<Vec<f64>> = online.iter().map(|c| default_grid(c.len(), config.cv_grid_size)).collect();
                // Bandwidths do not depend on t0; fit all requested points at once.
                online
                    .iter()
                    .zip(&grids)
                    .map(|(c, g)| {
                        cv_smooth(std::slice::from_ref(c), degree, Arc::clone(&config.kernel), Some(g), &config.t0s)
                            .pop()
                            .expect("one curve in, one result out")
                    })
                    .collect()
            });
            let idx = config.t0s.iter().position(|&t| t == t0).expect("t0 from the list");
            let values: Result<Vec<f64>, String> =
                fits.iter().map(|f| f.as_ref().map(|c| c.estimates[idx]).map_err(|e| e.to_string())).collect();
            let seconds = clock.elapsed().as_secs_f64();
            timing.cv += seconds;
            let mut cell = Cell { replication: r, t0, method: Method::Cv, risk: None, mean_sq_error: None, seconds, error: None };
            match values {
                Ok(v) => (cell.risk, cell.mean_sq_error) = errors_at(&truths, &v),
                Err(e) => cell.error = Some(e),
            }
            record.cells.push(cell);
        }
    }
    if record.cells.iter().any(|c| c.error.is_some()) {
        record.error = record.cells.iter().find_map(|c| c.error.clone());
    }
    (record, timing)
}

/// Runs `config.replications` independent replications of `spec`.
///
/// Replication `r` simulates with its own seed, estimates the regularity at
/// each `t0` on the learning set, smooths the online set there and records
/// the maximal squared error. Failed replications stay in the report with
/// their error.
pub fn run_benchmark(spec: &SimulationSpec, config: &BenchConfig) -> Result<RiskReport, BenchError> {
    if config.replications == 0 {
        return Err(BenchError::NoReplications);
    }
    let wall = Instant::now();
    let results: Vec<(ReplicationRecord, RepTiming)> =
        (0..config.replications).into_par_iter().map(|r| run_replication(spec, config, r)).collect();
    let mut timing = Timing::default();
    let mut records = Vec::with_capacity(results.len());
    for (rec, t) in results {
        timing.regularity_seconds += t.regularity;
        timing.method_seconds += t.method;
        if config.with_cv {
            *timing.cv_seconds.get_or_insert(0.0) += t.cv;
        }
        records.push(rec);
    }
    timing.speedup = timing.cv_seconds.map(|cv| cv / timing.method_seconds);
    timing.wall_seconds = wall.elapsed().as_secs_f64();

    let methods: &[Method] = if config.with_cv { &[Method::Plugin, Method::Cv] } else { &[Method::Plugin] };
    let mut summary = Vec::new();
    for &t0 in &config.t0s {
        for &method in methods {
            let cells: Vec<&Cell> =
                records.iter().flat_map(|r| &r.cells).filter(|c| c.t0 == t0 && c.method == method).collect();
            let mut risks: Vec<f64> = cells.iter().filter_map(|c| c.risk).collect();
            risks.sort_by(f64::total_cmp);
            let q = |p| (!risks.is_empty()).then(|| quantile(&risks, p));
            summary.push(Summary {
                t0,
                method,
                n_ok: risks.len(),
                n_failed: config.replications - risks.len(),
                median: q(0.5),
                q25: q(0.25),
                q75: q(0.75),
            });
        }
    }
    Ok(RiskReport { spec: spec.clone(), t0s: config.t0s.clone(), replications: config.replications, records, summary, timing })
}
