use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use localreg::bench::{run_benchmark, BenchConfig};
use localreg::curve::{Curve, FunctionalSample, K0Rule};
use localreg::cv::{cv_smooth, default_grid, DEFAULT_GRID_SIZE};
use localreg::io::{read_curves_path, write_curves_path};
use localreg::kernel::{kernel_by_name, Kernel};
use localreg::regularity::{estimate_regularity, NoiseWindow, RegularityConfig, RegularityEstimate};
use localreg::simulate::{
    equal_segments, simulate as simulate_dataset, write_truth_csv, HurstSpec, NoiseSpec, Sampling, Setting,
    SimulationSpec, DEFAULT_GRID_N,
};
use localreg::smoother::{smooth_with_spec, write_smoothed_csv, SmoothedPoint, SmootherSpec};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::{BenchArgs, CvArgs, EstimateArgs, EstimatorArgs, SimArgs, SmoothArgs};

pub fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing --{name}")))
}

fn check_unit(t0s: &[f64]) -> Result<(), CliError> {
    match t0s.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        Some(t) => Err(CliError::Usage(format!("t0 = {t} is outside [0, 1]"))),
        None => Ok(()),
    }
}

fn existing(path: Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    let p = required(path, name)?;
    if p.exists() {
        Ok(p)
    } else {
        Err(CliError::Usage(format!("--{name}: `{}` does not exist", p.display())))
    }
}

fn kernel(name: Option<String>) -> Result<Arc<dyn Kernel>, CliError> {
    let name = name.unwrap_or_else(|| "epanechnikov".into());
    kernel_by_name(&name).ok_or_else(|| CliError::Usage(format!("unknown kernel `{name}`")))
}

fn parse_enum<T: serde::de::DeserializeOwned>(value: &str, name: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| CliError::Usage(format!("invalid --{name} `{value}`")))
}

/// Opens `path`, or stdout when `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn write_json<T: serde::Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn build_spec(a: &SimArgs, f: &FileConfig) -> Result<SimulationSpec, CliError> {
    let setting: Setting = parse_enum(&required(a.setting.clone().or(f.setting.clone()), "setting")?, "setting")?;
    let hurst = match &a.hurst {
        Some(v) if v.len() == 1 => HurstSpec::Constant(v[0]),
        Some(v) => HurstSpec::Segments(equal_segments(v)),
        None => required(f.hurst.clone(), "hurst")?,
    };
    let sigma2 = match &a.sigma2 {
        Some(v) if v.len() == 1 => NoiseSpec::Constant(v[0]),
        Some(v) => NoiseSpec::Segments(equal_segments(v)),
        None => required(f.sigma2.clone(), "sigma2")?,
    };
    let sampling: Sampling = match a.sampling.clone().or(f.sampling.clone()) {
        Some(s) => parse_enum(&s, "sampling")?,
        None => Sampling::default(),
    };
    let anchors = a.t0.clone().or(f.t0.clone()).unwrap_or_default();
    check_unit(&anchors)?;
    let spec = SimulationSpec {
        setting,
        n_learning: required(a.n0.or(f.n0), "n0")?,
        n_online: a.n1.or(f.n1).unwrap_or(0),
        mu: required(a.mu.or(f.mu), "mu")?,
        sampling,
        hurst,
        sigma2,
        seed: required(a.seed.or(f.seed), "seed")?,
        grid_n: a.grid_n.or(f.grid_n).unwrap_or(DEFAULT_GRID_N),
        anchors,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

pub fn simulate(a: &SimArgs, f: &FileConfig) -> Result<(), CliError> {
    let spec = build_spec(a, f)?;
    let out = a.out.clone().or(f.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    let data = simulate_dataset(&spec).map_err(|e| CliError::Numerical(e.to_string()))?;
    write_curves_path(&out.join("learning.csv"), &data.learning_curves())?;
    write_curves_path(&out.join("online.csv"), &data.online_curves())?;
    for (name, curves) in [("learning_truth.csv", &data.learning), ("online_truth.csv", &data.online)] {
        write_truth_csv(BufWriter::new(File::create(out.join(name))?), curves)?;
    }
    log::info!("wrote {} learning and {} online curves to {}", spec.n_learning, spec.n_online, out.display());
    Ok(())
}

fn regularity_config(a: &EstimatorArgs, f: &FileConfig) -> Result<(RegularityConfig, K0Rule), CliError> {
    let mut cfg = RegularityConfig::default();
    if let Some(d) = a.max_degree.or(f.max_degree) {
        cfg.max_degree = d;
    }
    cfg.known_sigma2 = a.known_sigma2.or(f.known_sigma2);
    if let Some(s) = cfg.known_sigma2 {
        if !(s >= 0.0) {
            return Err(CliError::Usage(format!("--known-sigma2 must be nonnegative, got {s}")));
        }
    }
    if let Some(m) = a.sigma2_mode.clone().or(f.sigma2_mode.clone()) {
        cfg.noise_window = parse_enum::<NoiseWindow>(&m, "sigma2-mode")?;
    }
    let rule = match a.k0_rule.clone().or(f.k0_rule.clone()) {
        Some(r) => parse_enum(&r, "k0-rule")?,
        None => K0Rule::default(),
    };
    Ok((cfg, rule))
}

fn load_curves(path: &Path) -> Result<Vec<Curve>, CliError> {
    Ok(read_curves_path(path)?)
}

pub fn estimate(a: &EstimateArgs, f: &FileConfig) -> Result<(), CliError> {
    let learning = existing(a.learning.clone().or(f.learning.clone()), "learning")?;
    let t0s = a.t0.clone().or(f.t0.clone()).unwrap_or_else(|| vec![0.5]);
    check_unit(&t0s)?;
    let (cfg, rule) = regularity_config(&a.estimator, f)?;
    let sample = FunctionalSample::summarize_with(load_curves(&learning)?, 1.0, rule)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let estimates = t0s
        .iter()
        .map(|&t0| estimate_regularity(&sample, t0, &cfg))
        .collect::<Result<Vec<_>, _>>()?;
    for e in estimates.iter().filter(|e| e.degenerate) {
        log::warn!("degenerate exponent estimate at t0 = {}", e.t0);
    }
    write_json(a.out.clone().or(f.out.clone()).as_deref(), &estimates)
}

fn read_estimates(path: &Path) -> Result<Vec<RegularityEstimate>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    Ok(if value.is_array() { serde_json::from_value(value)? } else { vec![serde_json::from_value(value)?] })
}

pub fn smooth(a: &SmoothArgs, f: &FileConfig) -> Result<(), CliError> {
    let online = load_curves(&existing(a.online.clone().or(f.online.clone()), "online")?)?;
    let estimates = read_estimates(&existing(a.estimate.clone().or(f.estimate.clone()), "estimate")?)?;
    if estimates.is_empty() {
        return Err(CliError::Data("estimate file holds no estimate".into()));
    }
    let kernel = kernel(a.kernel.clone().or(f.kernel.clone()))?;
    let trim = !(a.no_trim || f.no_trim.unwrap_or(false));
    let degree = a.degree.or(f.degree);
    let spec_for = |e: &RegularityEstimate| -> Result<SmootherSpec, CliError> {
        if let Some(d) = degree {
            if d != e.d_hat {
                return Err(CliError::Usage(format!(
                    "requested degree {d} does not match the estimate at t0 = {} (d_hat = {})",
                    e.t0, e.d_hat
                )));
            }
        }
        Ok(SmootherSpec::from_estimate(e, Arc::clone(&kernel))?.with_trim(trim))
    };

    let rows: Vec<Vec<SmoothedPoint>> = match a.t0.clone().or(f.t0.clone()) {
        None => {
            if estimates.len() != 1 {
                return Err(CliError::Usage(format!(
                    "estimate file holds {} estimates; pass --t0 to pick them",
                    estimates.len()
                )));
            }
            smooth_with_spec(&online, &spec_for(&estimates[0])?, None)
        }
        Some(t0s) => {
            check_unit(&t0s)?;
            let mut rows: Vec<Vec<SmoothedPoint>> = vec![Vec::new(); online.len()];
            for &t0 in &t0s {
                let e = match estimates.iter().find(|e| e.t0 == t0) {
                    Some(e) => e,
                    None if estimates.len() == 1 => &estimates[0],
                    None => return Err(CliError::Usage(format!("no estimate for t0 = {t0} in the estimate file"))),
                };
                let out = smooth_with_spec(&online, &spec_for(e)?, Some(&[t0]));
                for (r, o) in rows.iter_mut().zip(out) {
                    r.extend(o);
                }
            }
            rows
        }
    };
    let failed = rows.iter().flatten().filter(|p| p.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} cells failed; see the guard column");
    }
    let mut w = sink(a.out.clone().or(f.out.clone()).as_deref())?;
    write_smoothed_csv(&mut w, &rows)?;
    w.flush()?;
    Ok(())
}

pub fn cv(a: &CvArgs, f: &FileConfig) -> Result<(), CliError> {
    let online = load_curves(&existing(a.online.clone().or(f.online.clone()), "online")?)?;
    let kernel = kernel(a.kernel.clone().or(f.kernel.clone()))?;
    let degree = a.degree.or(f.degree).unwrap_or(0);
    let grid_size = a.grid_size.or(f.grid_size).unwrap_or(DEFAULT_GRID_SIZE);
    if grid_size == 0 {
        return Err(CliError::Usage("--grid-size must be positive".into()));
    }
    let t0s = a.t0.clone().or(f.t0.clone());
    if let Some(t) = &t0s {
        check_unit(t)?;
    }
    let mut results = Vec::with_capacity(online.len());
    for curve in &online {
        let grid = default_grid(curve.len(), grid_size);
        let points = t0s.clone().unwrap_or_else(|| curve.times().to_vec());
        let r = cv_smooth(std::slice::from_ref(curve), degree, Arc::clone(&kernel), Some(&grid), &points)
            .pop()
            .expect("one curve in, one result out")
            .map_err(|e| CliError::Data(e.to_string()))?;
        results.push(r);
    }
    let mut w = csv::Writer::from_writer(sink(a.out.clone().or(f.out.clone()).as_deref())?);
    w.write_record(["curve_id", "t0", "estimate", "bandwidth", "guard"])?;
    for r in &results {
        for ((t0, e), g) in r.t0s.iter().zip(&r.estimates).zip(&r.guards) {
            w.write_record([r.cv.curve_id.clone(), t0.to_string(), e.to_string(), r.cv.chosen.to_string(), g.as_str().into()])?;
        }
    }
    w.flush()?;
    if let Some(p) = &a.scores {
        let scores: Vec<_> = results.iter().map(|r| &r.cv).collect();
        write_json(Some(p), &scores)?;
    }
    Ok(())
}

pub fn benchmark(a: &BenchArgs, f: &FileConfig) -> Result<(), CliError> {
    let mut sim = a.sim.clone();
    // The t0 list drives both the anchors and the evaluation points.
    let t0s = sim.t0.clone().or(f.t0.clone()).unwrap_or_else(|| vec![0.5]);
    check_unit(&t0s)?;
    sim.t0 = Some(t0s.clone());
    let spec = build_spec(&sim, f)?;
    let (regularity, rule) = regularity_config(&a.estimator, f)?;
    if rule != K0Rule::default() {
        return Err(CliError::Usage("benchmark uses the default --k0-rule".into()));
    }
    let config = BenchConfig {
        t0s,
        replications: a.replications.or(f.replications).unwrap_or(100),
        with_cv: a.with_cv || f.with_cv.unwrap_or(false),
        cv_grid_size: a.grid_size.or(f.grid_size).unwrap_or(DEFAULT_GRID_SIZE),
        regularity,
        kernel: kernel(a.kernel.clone().or(f.kernel.clone()))?,
        trim: !(a.no_trim || f.no_trim.unwrap_or(false)),
    };
    let report = run_benchmark(&spec, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = sim.out.clone().or(f.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;
    write_json(Some(&out.join("report.json")), &report)?;
    report.write_csv(BufWriter::new(File::create(out.join("risk.csv"))?))?;
    let failed = report.failed_replications();
    if failed > 0 {
        return Err(CliError::Numerical(format!(
            "{failed} of {} replications failed; see report.json",
            report.replications
        )));
    }
    Ok(())
}
