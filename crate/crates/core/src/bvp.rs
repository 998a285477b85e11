//! The stance boundary-value problem: find the stiffness `K*` for which the
//! leg is back at rest length exactly when the angle first reaches `+alpha`.
//!
//! The residual `R(K) = L(t*(K)) - 1`, with `t*(K)` the first rising
//! crossing of `theta = alpha`, is driven to zero by the secant method
//! seeded from the closed-form estimate [`k_star_approx`].

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::omega_tilde;
use crate::integrator::{
    integrate_to_event, locate_event, Direction, EventKind, EventSpec, IntegratorConfig,
};
use crate::model::{slip_dynamics, ModelParams, Touchdown, Trajectory};
use crate::{Error, Result};

/// Leading-order stiffness estimate `(pi theta_d / (2 alpha))²`.
pub fn k_star_approx(td: &Touchdown) -> Result<f64> {
    if !(td.alpha > 0.0) {
        return Err(Error::domain(format!(
            "alpha must be positive, got {}",
            td.alpha
        )));
    }
    let root = PI * td.theta_d() / (2.0 * td.alpha);
    Ok(root * root)
}

/// Closed-form estimate of the first return of `L~` to rest length, on the
/// strained fast scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedReturn {
    pub cos_mu: f64,
    /// `arccos(cos_mu)`, the principal value in `[0, pi]`.
    pub mu: f64,
    /// Root of `L_d sin mu + eps c (1 - cos mu) = 0` next to `pi`, with
    /// `c = cos(alpha) - theta_d²`. Equals `mu` when `c <= 0` and
    /// `2 pi - mu` when `c > 0`.
    pub return_root: f64,
    pub degenerate: bool,
}

/// Evaluates `cos mu = -1 + 2 eps² c² / (L_d² + eps² c²)`.
pub fn tau_star_refined(p: &ModelParams) -> Result<RefinedReturn> {
    let eps = p.epsilon();
    let ld = p.l_d();
    let c = p.alpha().cos() - p.theta_d() * p.theta_d();
    if ld == 0.0 && c == 0.0 {
        return Ok(RefinedReturn {
            cos_mu: -1.0,
            mu: PI,
            return_root: PI,
            degenerate: true,
        });
    }
    if !(ld > 0.0) {
        return Err(Error::domain(format!(
            "refined return needs L_d > 0, got {ld}"
        )));
    }
    let ec2 = eps * eps * c * c;
    let cos_mu = -1.0 + 2.0 * ec2 / (ld * ld + ec2);
    let mu = cos_mu.clamp(-1.0, 1.0).acos();
    let return_root = if c > 0.0 { 2.0 * PI - mu } else { mu };
    Ok(RefinedReturn {
        cos_mu,
        mu,
        return_root,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingConfig {
    /// First secant seed; `None` uses the closed-form estimate.
    pub k0: Option<f64>,
    /// Second seed; `None` uses `1.1 * k0`.
    pub k1: Option<f64>,
    /// Tolerance on `|L(t*) - 1|`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub integrator: IntegratorConfig,
    /// Bisection width for the takeoff-angle event.
    pub root_tol: f64,
    /// Search horizon for the takeoff event (slow time).
    pub t_max: f64,
    /// Upper end of the admissible attack-angle range.
    pub alpha_max: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            k0: None,
            k1: None,
            residual_tol: 1e-10,
            max_iterations: 60,
            integrator: IntegratorConfig::with_step(1e-4),
            root_tol: EventSpec::DEFAULT_ROOT_TOL,
            t_max: 20.0,
            alpha_max: 0.9,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        for seed in [self.k0, self.k1].into_iter().flatten() {
            if !(seed > 0.0 && seed.is_finite()) {
                return Err(Error::domain(format!(
                    "secant seeds must be positive, got {seed}"
                )));
            }
        }
        if let (Some(a), Some(b)) = (self.k0, self.k1) {
            if a == b {
                return Err(Error::domain("secant seeds must differ"));
            }
        }
        if !(self.residual_tol > 0.0) || !(self.root_tol > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::domain("tolerances and horizon must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// One evaluation of the shooting residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    #[serde(rename = "K")]
    pub k: f64,
    /// `L(t*) - 1`, absent when the shot failed.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub shots: Vec<ShotRecord>,
    /// Secant iterates that failed and were pulled back toward the last good K.
    pub rejected: usize,
    /// The secant root was not a first-cycle stance and a bracketing search
    /// was used instead.
    pub bracket_fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StanceSolution {
    #[serde(rename = "K_star")]
    pub k_star: f64,
    #[serde(rename = "K_approx")]
    pub k_approx: f64,
    /// Takeoff time on the slow scale.
    pub t_star: f64,
    /// Takeoff time on the strained fast scale, `omega t* / eps`.
    pub tau_star: Option<f64>,
    /// `|L(t*) - 1|`.
    pub residual_length: f64,
    /// `|theta(t*) - alpha|`.
    pub residual_theta: f64,
    pub iterations: usize,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub trajectory: Trajectory,
}

struct Shot {
    residual: f64,
    t_star: f64,
    residual_theta: f64,
    trajectory: Trajectory,
}

fn shoot(td: &Touchdown, k: f64, cfg: &ShootingConfig) -> Result<Shot> {
    let p = td.with_stiffness(k)?;
    let event = EventSpec {
        root_tol: cfg.root_tol,
        ..EventSpec::new(EventKind::ThetaReaches(td.alpha), Direction::Rising)
    };
    let (mut trajectory, hit) = integrate_to_event(
        &slip_dynamics(k),
        p.initial_state(),
        0.0,
        cfg.t_max,
        &event,
        &cfg.integrator,
    )?;
    trajectory.params = Some(p);
    Ok(Shot {
        residual: hit.state.length - 1.0,
        t_star: hit.time,
        residual_theta: hit.value.abs(),
        trajectory,
    })
}

/// True when the leg has not already returned to rest length (rising) before
/// the takeoff time, i.e. the stance spans a single compression cycle.
fn is_first_cycle(td: &Touchdown, k: f64, t_star: f64, cfg: &ShootingConfig) -> Result<bool> {
    let p = td.with_stiffness(k)?;
    let event = EventSpec {
        root_tol: cfg.root_tol,
        ..EventSpec::new(EventKind::LengthReturn, Direction::Rising)
    };
    let slack = 10.0 * cfg.integrator.step;
    match locate_event(
        &slip_dynamics(k),
        p.initial_state(),
        0.0,
        t_star + slack,
        &event,
        &cfg.integrator,
    ) {
        Ok(hit) => Ok(hit.time >= t_star - slack),
        Err(Error::EventNotFound { .. }) => Ok(true),
        Err(e) => Err(e),
    }
}

fn finish(
    td: &Touchdown,
    k: f64,
    k_approx: f64,
    shot: Shot,
    iterations: usize,
    diagnostics: Diagnostics,
) -> StanceSolution {
    let p = td.with_stiffness(k).expect("validated stiffness");
    let tau_star = omega_tilde(p.epsilon(), p.theta_d())
        .ok()
        .map(|w| w.omega * shot.t_star / p.epsilon());
    StanceSolution {
        k_star: k,
        k_approx,
        t_star: shot.t_star,
        tau_star,
        residual_length: shot.residual.abs(),
        residual_theta: shot.residual_theta,
        iterations,
        diagnostics,
        trajectory: shot.trajectory,
    }
}

fn record(diag: &mut Diagnostics, k: f64, shot: &Result<Shot>) {
    diag.shots.push(ShotRecord {
        k,
        residual: shot.as_ref().ok().map(|s| s.residual),
    });
}

/// Plain secant iteration on `R(K)`. Failed iterates (no takeoff crossing,
/// leg collapse, non-positive K) are halved back toward the last good K.
fn secant(
    td: &Touchdown,
    seeds: (f64, f64),
    cfg: &ShootingConfig,
    diag: &mut Diagnostics,
) -> Result<(f64, Shot, usize)> {
    let (mut k_prev, mut k_cur) = seeds;
    let first = shoot(td, k_prev, cfg);
    record(diag, k_prev, &first);
    let mut r_prev = first?.residual;
    let mut cur = shoot(td, k_cur, cfg);
    record(diag, k_cur, &cur);
    let mut shot_cur = cur?;
    for iteration in 1..=cfg.max_iterations {
        let r_cur = shot_cur.residual;
        if r_cur.abs() < cfg.residual_tol {
            return Ok((k_cur, shot_cur, iteration));
        }
        if r_cur == r_prev || (k_cur - k_prev).abs() < 1e-14 * k_cur.abs() {
            return Err(Error::Convergence {
                iterations: iteration,
                reason: format!("secant stagnated at K = {k_cur} with residual {r_cur:e}"),
            });
        }
        let mut k_next = k_cur - r_cur * (k_cur - k_prev) / (r_cur - r_prev);
        let mut attempts = 0;
        loop {
            if k_next > 0.0 && k_next.is_finite() {
                cur = shoot(td, k_next, cfg);
                record(diag, k_next, &cur);
                if cur.is_ok() {
                    break;
                }
            }
            attempts += 1;
            diag.rejected += 1;
            if attempts > 40 {
                return Err(Error::Convergence {
                    iterations: iteration,
                    reason: format!("no admissible secant iterate near K = {k_cur}"),
                });
            }
            k_next = if k_next > 0.0 && k_next.is_finite() {
                k_cur + 0.5 * (k_next - k_cur)
            } else {
                0.5 * k_cur
            };
        }
        k_prev = k_cur;
        r_prev = r_cur;
        k_cur = k_next;
        shot_cur = cur?;
    }
    Err(Error::Convergence {
        iterations: cfg.max_iterations,
        reason: format!("iteration budget exhausted at K = {k_cur}"),
    })
}

/// Finds the first sign change of `R` from negative to non-negative while
/// increasing K, then refines with a bracketed secant (Illinois variant).
fn bracketed(
    td: &Touchdown,
    k_hint: f64,
    cfg: &ShootingConfig,
    diag: &mut Diagnostics,
) -> Result<(f64, Shot, usize)> {
    let growth = 1.15;
    let eval = |k: f64, diag: &mut Diagnostics| {
        let shot = shoot(td, k, cfg);
        record(diag, k, &shot);
        shot
    };
    // Soft enough that the leg has not yet come back when theta reaches alpha.
    let mut lo = 0.25 * k_hint;
    let mut lo_shot = None;
    for _ in 0..60 {
        match eval(lo, diag) {
            Ok(s) if s.residual < 0.0 => {
                lo_shot = Some(s);
                break;
            }
            Ok(_) => lo *= 0.5,
            // A collapsing or non-returning soft leg: stiffen and retry.
            Err(_) => lo *= growth,
        }
    }
    let mut lo_shot = lo_shot.ok_or_else(|| Error::Convergence {
        iterations: diag.shots.len(),
        reason: "no soft stiffness with negative residual".into(),
    })?;
    let (mut hi, mut hi_shot);
    let mut k = lo;
    loop {
        k *= growth;
        if diag.shots.len() > 400 {
            return Err(Error::Convergence {
                iterations: diag.shots.len(),
                reason: "bracket search exhausted".into(),
            });
        }
        match eval(k, diag) {
            Ok(s) if s.residual >= 0.0 => {
                hi = k;
                hi_shot = s;
                break;
            }
            Ok(s) => {
                lo = k;
                lo_shot = s;
            }
            Err(_) => {}
        }
    }
    let (mut r_lo, mut r_hi) = (lo_shot.residual, hi_shot.residual);
    let mut stale = 0i8;
    for iteration in 1..=cfg.max_iterations.max(100) {
        if r_hi.abs() < cfg.residual_tol {
            return Ok((hi, hi_shot, iteration));
        }
        if r_lo.abs() < cfg.residual_tol {
            return Ok((lo, lo_shot, iteration));
        }
        let mut k_new = hi - r_hi * (hi - lo) / (r_hi - r_lo);
        if !(k_new > lo && k_new < hi) {
            k_new = 0.5 * (lo + hi);
        }
        let shot = eval(k_new, diag)?;
        if shot.residual < 0.0 {
            lo = k_new;
            r_lo = shot.residual;
            lo_shot = shot;
            if stale == -1 {
                r_hi *= 0.5;
            }
            stale = -1;
        } else {
            hi = k_new;
            r_hi = shot.residual;
            hi_shot = shot;
            if stale == 1 {
                r_lo *= 0.5;
            }
            stale = 1;
        }
        if hi - lo < 1e-14 * hi {
            break;
        }
    }
    Err(Error::Convergence {
        iterations: diag.shots.len(),
        reason: format!("bracketed refinement stalled in [{lo}, {hi}]"),
    })
}

/// Solves for the stiffness that closes a single-cycle stance phase.
pub fn solve_stiffness(td: &Touchdown, cfg: &ShootingConfig) -> Result<StanceSolution> {
    cfg.validate()?;
    if !(td.alpha > 0.0 && td.alpha < cfg.alpha_max) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, {}), got {}",
            cfg.alpha_max, td.alpha
        )));
    }
    if !(td.u > 0.0) {
        return Err(Error::domain(format!("U must be positive, got {}", td.u)));
    }
    if !(td.theta_d() > 0.0) {
        return Err(Error::domain(format!(
            "touchdown angular rate theta_d = {} must be positive",
            td.theta_d()
        )));
    }
    let k_approx = k_star_approx(td)?;
    let k0 = cfg.k0.unwrap_or(k_approx);
    let k1 = cfg.k1.unwrap_or(1.1 * k0);
    let mut diag = Diagnostics::default();

    if let Ok((k, shot, iterations)) = secant(td, (k0, k1), cfg, &mut diag) {
        if is_first_cycle(td, k, shot.t_star, cfg)? {
            return Ok(finish(td, k, k_approx, shot, iterations, diag));
        }
    }
    diag.bracket_fallback = true;
    let (k, shot, iterations) = bracketed(td, k0, cfg, &mut diag)?;
    if !is_first_cycle(td, k, shot.t_star, cfg)? {
        return Err(Error::Convergence {
            iterations,
            reason: format!("root K = {k} does not close the first compression cycle"),
        });
    }
    Ok(finish(td, k, k_approx, shot, iterations, diag))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "K_star")]
    pub k_star: Option<f64>,
    #[serde(rename = "K_approx")]
    pub k_approx: Option<f64>,
    pub t_star: Option<f64>,
    pub tau_star: Option<f64>,
    pub residual_length: Option<f64>,
    pub iterations: Option<usize>,
    pub error: Option<String>,
}

impl SweepRow {
    fn from_result(td: &Touchdown, result: Result<StanceSolution>) -> Self {
        let k_approx = k_star_approx(td).ok();
        match result {
            Ok(sol) => SweepRow {
                alpha: td.alpha,
                u: td.u,
                v: td.v,
                k_star: Some(sol.k_star),
                k_approx,
                t_star: Some(sol.t_star),
                tau_star: sol.tau_star,
                residual_length: Some(sol.residual_length),
                iterations: Some(sol.iterations),
                error: None,
            },
            Err(e) => SweepRow {
                alpha: td.alpha,
                u: td.u,
                v: td.v,
                k_star: None,
                k_approx,
                t_star: None,
                tau_star: None,
                residual_length: None,
                iterations: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Solves every `(alpha, U)` pair of the grid (alpha outer, U inner).
/// Points are solved in parallel; rows come back in grid order and failures
/// are kept per row.
pub fn stance_sweep(alphas: &[f64], us: &[f64], v: f64, cfg: &ShootingConfig) -> Vec<SweepRow> {
    let grid: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| us.iter().map(move |&u| (a, u)))
        .collect();
    grid.par_iter()
        .map(|&(alpha, u)| match Touchdown::new(alpha, u, v) {
            Ok(td) => SweepRow::from_result(&td, solve_stiffness(&td, cfg)),
            Err(e) => SweepRow {
                alpha,
                u,
                v,
                k_star: None,
                k_approx: None,
                t_star: None,
                tau_star: None,
                residual_length: None,
                iterations: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}
