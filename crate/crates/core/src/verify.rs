//! Numerical experiments measuring how the asymptotic approximations
//! converge as the leg stiffens.
//!
//! Each experiment sweeps a list of stiffnesses, measures an error against
//! a fine RK4 solution of the full equations and fits the slope of
//! `log10(error)` against `log10(K)`. An error of order `eps^n` shows up as
//! slope `-n/2`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{theta0_slow, FastApproximation, Theta0Method};
use crate::bvp::{k_star_approx, solve_stiffness, tau_star_refined, ShootingConfig};
use crate::integrator::{
    integrate, integrate_visit, locate_event, Direction, EventKind, EventSpec, IntegratorConfig,
};
use crate::model::{energy, slip_dynamics, Touchdown};
use crate::{Error, Result};

/// Errors below this are indistinguishable from rounding and are left out of fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Log-uniform grid `10^2, 10^2.5, ..., 10^6`.
pub fn default_k_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(2.0 + 0.5 * i as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the residuals in decades.
    pub residual: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Least-squares line through `(log10 K, log10 error)`.
pub fn fit_order(samples: &[(f64, f64)]) -> Result<Fit> {
    let mut points = Vec::with_capacity(samples.len());
    let mut excluded = 0;
    for &(k, err) in samples {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::domain(format!("abscissa must be positive, got {k}")));
        }
        if !(err > 0.0) || !err.is_finite() {
            return Err(Error::domain(format!(
                "error must be positive and finite, got {err}"
            )));
        }
        if err < NOISE_FLOOR {
            excluded += 1;
            continue;
        }
        points.push((k.log10(), err.log10()));
    }
    if points.len() < 2 {
        return Err(Error::domain(format!(
            "need at least 2 samples above the noise floor, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("abscissae are all equal"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    Ok(Fit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        used: points.len(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Reference RK4 step in units of fast time `tau`, i.e. `h = fast_step * eps`.
    pub fast_step: f64,
    pub max_steps: usize,
}

impl Default for VerifyConfig {
    /// `eps / 800`: sixteen times finer than the default simulation step
    /// of `eps / 50`.
    fn default() -> Self {
        VerifyConfig {
            fast_step: 1.0 / 800.0,
            max_steps: 100_000_000,
        }
    }
}

impl VerifyConfig {
    pub fn integrator_for(&self, k: f64) -> IntegratorConfig {
        IntegratorConfig {
            step: self.fast_step / k.sqrt(),
            max_steps: self.max_steps,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    /// Largest deviation over the trajectory grid.
    Sup,
    /// Deviation at the end of the interval.
    Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    #[serde(rename = "K")]
    pub k: f64,
    pub epsilon: f64,
    /// Error in the report's norm; `None` if the run failed.
    pub error: Option<f64>,
    /// Endpoint error, when the experiment measures one.
    pub endpoint_error: Option<f64>,
    /// Largest drift of the mechanical energy along the reference run.
    pub energy_drift: Option<f64>,
    pub note: Option<String>,
}

/// Energy drift allowed per unit of slow time before a reference run is
/// flagged. Windows shorter than one time unit use the one-unit allowance,
/// which sits just above the roundoff in evaluating the energy.
pub const DRIFT_PER_TIME: f64 = 1e-12;

fn drift_note(drift: f64, t_end: f64) -> Option<String> {
    let limit = DRIFT_PER_TIME * t_end.max(1.0);
    (drift > limit).then(|| format!("reference energy drift {drift:e} exceeds {limit:e}"))
}

impl Sample {
    fn failed(k: f64, err: Error) -> Self {
        Sample {
            k,
            epsilon: 1.0 / k.sqrt(),
            error: None,
            endpoint_error: None,
            energy_drift: None,
            note: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub norm: Norm,
    /// Human-readable description of the measurement interval.
    pub interval: String,
    pub touchdown: Touchdown,
    pub config: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub samples: Vec<Sample>,
    pub fit: Option<Fit>,
    /// Why no fit is available, or which samples were excluded.
    pub fit_note: Option<String>,
    pub metadata: ReportMetadata,
}

impl ConvergenceReport {
    fn build(experiment: &str, samples: Vec<Sample>, metadata: ReportMetadata) -> Self {
        let data: Vec<(f64, f64)> = samples
            .iter()
            .filter_map(|s| s.error.filter(|e| *e > 0.0).map(|e| (s.k, e)))
            .collect();
        let (fit, fit_note) = match fit_order(&data) {
            Ok(fit) if fit.excluded > 0 => (
                Some(fit),
                Some(format!(
                    "{} samples below the noise floor {NOISE_FLOOR:e} excluded",
                    fit.excluded
                )),
            ),
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        };
        ConvergenceReport {
            experiment: experiment.to_string(),
            samples,
            fit,
            fit_note,
            metadata,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn errors(&self) -> Vec<Option<f64>> {
        self.samples.iter().map(|s| s.error).collect()
    }
}

fn check_k_list(ks: &[f64]) -> Result<()> {
    if ks.len() < 4 {
        return Err(Error::domain(format!(
            "need at least 4 stiffness values, got {}",
            ks.len()
        )));
    }
    if ks.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain(
            "stiffness values must be strictly increasing",
        ));
    }
    Ok(())
}

/// Length of the fast-scale comparison window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastInterval {
    /// `tau+ in [0, T]`.
    Fixed(f64),
    /// `tau+ in [0, T / eps]`.
    Expanding(f64),
}

impl FastInterval {
    fn end(&self, eps: f64) -> f64 {
        match *self {
            FastInterval::Fixed(t) => t,
            FastInterval::Expanding(t) => t / eps,
        }
    }

    fn describe(&self) -> String {
        match *self {
            FastInterval::Fixed(t) => format!("tau+ in [0, {t}]"),
            FastInterval::Expanding(t) => format!("tau+ in [0, {t}/eps]"),
        }
    }
}

struct FastSample {
    sup_length: f64,
    sup_theta: f64,
    end_length: f64,
    end_theta: f64,
    drift: f64,
    t_end: f64,
}

fn fast_sample(
    td: &Touchdown,
    k: f64,
    interval: FastInterval,
    cfg: &VerifyConfig,
) -> Result<FastSample> {
    let p = td.with_stiffness(k)?;
    let approx = FastApproximation::new(p)?;
    let map = approx.time_map();
    let t_end = map.strained_to_slow(interval.end(p.epsilon()));
    let e0 = energy(&p.initial_state(), k);
    let mut out = FastSample {
        sup_length: 0.0,
        sup_theta: 0.0,
        end_length: 0.0,
        end_theta: 0.0,
        drift: 0.0,
        t_end,
    };
    integrate_visit(
        &slip_dynamics(k),
        p.initial_state(),
        0.0,
        t_end,
        &cfg.integrator_for(k),
        |t, s| {
            let tau_plus = map.slow_to_strained(t);
            out.end_length = (s.length - approx.length(tau_plus)).abs();
            out.end_theta = (s.theta - approx.theta(tau_plus)).abs();
            out.sup_length = out.sup_length.max(out.end_length);
            out.sup_theta = out.sup_theta.max(out.end_theta);
            out.drift = out.drift.max((energy(s, k) - e0).abs());
        },
    )?;
    Ok(out)
}

/// Errors of `L~` and `theta~` against the full equations on a strained
/// fast-time window. Returns the `(length, angle)` reports.
pub fn fast_scale_error(
    td: &Touchdown,
    ks: &[f64],
    interval: FastInterval,
    cfg: &VerifyConfig,
) -> Result<(ConvergenceReport, ConvergenceReport)> {
    check_k_list(ks)?;
    let runs: Vec<(f64, Result<FastSample>)> = ks
        .par_iter()
        .map(|&k| (k, fast_sample(td, k, interval, cfg)))
        .collect();
    let mut length = Vec::new();
    let mut theta = Vec::new();
    for (k, run) in runs {
        match run {
            Ok(s) => {
                let base = Sample {
                    k,
                    epsilon: 1.0 / k.sqrt(),
                    error: Some(s.sup_length),
                    endpoint_error: Some(s.end_length),
                    energy_drift: Some(s.drift),
                    note: drift_note(s.drift, s.t_end),
                };
                theta.push(Sample {
                    error: Some(s.sup_theta),
                    endpoint_error: Some(s.end_theta),
                    ..base.clone()
                });
                length.push(base);
            }
            Err(e) => {
                length.push(Sample::failed(k, e.clone()));
                theta.push(Sample::failed(k, e));
            }
        }
    }
    let metadata = ReportMetadata {
        norm: Norm::Sup,
        interval: interval.describe(),
        touchdown: *td,
        config: *cfg,
    };
    Ok((
        ConvergenceReport::build("fast_length", length, metadata.clone()),
        ConvergenceReport::build("fast_theta", theta, metadata),
    ))
}

/// Largest `|a - b|` over two equally long series.
pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn slow_sample(
    td: &Touchdown,
    k: f64,
    t_end: f64,
    method: Theta0Method,
    cfg: &VerifyConfig,
) -> Result<Sample> {
    let p = td.with_stiffness(k)?;
    let icfg = cfg.integrator_for(k);
    let traj = integrate(&slip_dynamics(k), p.initial_state(), 0.0, t_end, &icfg)?;
    let method = match method {
        Theta0Method::Numerical { max_step } => Theta0Method::Numerical {
            max_step: max_step.min(icfg.step),
        },
        m => m,
    };
    let reference = theta0_slow(traj.times(), &p, method)?;
    let theta: Vec<f64> = traj.states().iter().map(|s| s.theta).collect();
    let theta0: Vec<f64> = reference.states().iter().map(|s| s.theta).collect();
    let e0 = energy(&p.initial_state(), k);
    let drift = traj
        .states()
        .iter()
        .map(|s| (energy(s, k) - e0).abs())
        .fold(0.0, f64::max);
    Ok(Sample {
        k,
        epsilon: p.epsilon(),
        error: Some(sup_abs_diff(&theta, &theta0)),
        endpoint_error: Some((theta[theta.len() - 1] - theta0[theta0.len() - 1]).abs()),
        energy_drift: Some(drift),
        note: drift_note(drift, t_end),
    })
}

/// Error of the slow pendulum angle `θ0'' = sin θ0` against the full
/// equations on `t in [0, T]`.
pub fn slow_scale_error(
    td: &Touchdown,
    ks: &[f64],
    t_end: f64,
    method: Theta0Method,
    cfg: &VerifyConfig,
) -> Result<ConvergenceReport> {
    check_k_list(ks)?;
    if !(t_end > 0.0) {
        return Err(Error::domain("interval end must be positive"));
    }
    let samples = ks
        .par_iter()
        .map(|&k| slow_sample(td, k, t_end, method, cfg).unwrap_or_else(|e| Sample::failed(k, e)))
        .collect();
    let metadata = ReportMetadata {
        norm: Norm::Sup,
        interval: format!("t in [0, {t_end}]"),
        touchdown: *td,
        config: *cfg,
    };
    Ok(ConvergenceReport::build("slow_theta", samples, metadata))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTimeReport {
    /// `|t_ret / eps - pi|` with `t_ret` the first return of `L` to 1.
    pub return_time: ConvergenceReport,
    /// `|tau*_measured - mu_root|`, `mu_root` the return-equation root next to pi.
    pub refined_root: ConvergenceReport,
    /// `|tau*_measured - arccos(cos mu)|`, the principal branch.
    pub refined_principal: ConvergenceReport,
}

struct ReturnSample {
    eps: f64,
    t_return: f64,
    tau_return: f64,
    root: f64,
    principal: f64,
}

fn return_sample(td: &Touchdown, k: f64, cfg: &VerifyConfig) -> Result<ReturnSample> {
    let p = td.with_stiffness(k)?;
    let event = EventSpec::new(EventKind::LengthReturn, Direction::Rising);
    let eps = p.epsilon();
    let hit = locate_event(
        &slip_dynamics(k),
        p.initial_state(),
        0.0,
        20.0 * eps,
        &event,
        &cfg.integrator_for(k),
    )?;
    let approx = FastApproximation::new(p)?;
    let refined = tau_star_refined(&p)?;
    Ok(ReturnSample {
        eps,
        t_return: hit.time,
        tau_return: approx.time_map().slow_to_strained(hit.time),
        root: refined.return_root,
        principal: refined.mu,
    })
}

/// Stance-duration order at fixed stiffness: the first return of the leg to
/// rest length compared with `eps pi` and with the closed-form refinement.
pub fn t_star_order(td: &Touchdown, ks: &[f64], cfg: &VerifyConfig) -> Result<ReturnTimeReport> {
    check_k_list(ks)?;
    let runs: Vec<(f64, Result<ReturnSample>)> = ks
        .par_iter()
        .map(|&k| (k, return_sample(td, k, cfg)))
        .collect();
    let mut time = Vec::new();
    let mut root = Vec::new();
    let mut principal = Vec::new();
    for (k, run) in runs {
        match run {
            Ok(r) => {
                let sample = |error: f64| Sample {
                    k,
                    epsilon: r.eps,
                    error: Some(error),
                    endpoint_error: None,
                    energy_drift: None,
                    note: None,
                };
                time.push(sample((r.t_return / r.eps - PI).abs()));
                root.push(sample((r.tau_return - r.root).abs()));
                principal.push(sample((r.tau_return - r.principal).abs()));
            }
            Err(e) => {
                time.push(Sample::failed(k, e.clone()));
                root.push(Sample::failed(k, e.clone()));
                principal.push(Sample::failed(k, e));
            }
        }
    }
    let metadata = ReportMetadata {
        norm: Norm::Endpoint,
        interval: "first rising return of L to 1".into(),
        touchdown: *td,
        config: *cfg,
    };
    Ok(ReturnTimeReport {
        return_time: ConvergenceReport::build("return_time", time, metadata.clone()),
        refined_root: ConvergenceReport::build("refined_return_root", root, metadata.clone()),
        refined_principal: ConvergenceReport::build(
            "refined_return_principal",
            principal,
            metadata,
        ),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRatioRow {
    pub alpha: f64,
    #[serde(rename = "K_star")]
    pub k_star: Option<f64>,
    #[serde(rename = "K_approx")]
    pub k_approx: Option<f64>,
    pub ratio: Option<f64>,
    pub t_star: Option<f64>,
    /// `|t* / eps* - pi|` at the solved stiffness.
    pub return_defect: Option<f64>,
    pub error: Option<String>,
}

/// Solved stiffness against the closed-form estimate across attack angles.
pub fn k_ratio_study(alphas: &[f64], u: f64, v: f64, cfg: &ShootingConfig) -> Vec<KRatioRow> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let solved = Touchdown::new(alpha, u, v).and_then(|td| {
                let approx = k_star_approx(&td)?;
                Ok((approx, solve_stiffness(&td, cfg)?))
            });
            match solved {
                Ok((approx, sol)) => {
                    let eps = 1.0 / sol.k_star.sqrt();
                    KRatioRow {
                        alpha,
                        k_star: Some(sol.k_star),
                        k_approx: Some(approx),
                        ratio: Some(sol.k_star / approx),
                        t_star: Some(sol.t_star),
                        return_defect: Some((sol.t_star / eps - PI).abs()),
                        error: None,
                    }
                }
                Err(e) => KRatioRow {
                    alpha,
                    k_star: None,
                    k_approx: Touchdown::new(alpha, u, v)
                        .and_then(|td| k_star_approx(&td))
                        .ok(),
                    ratio: None,
                    t_star: None,
                    return_defect: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
