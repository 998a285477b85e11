//! Strained-coordinate approximations of the stance motion for a stiff leg.
//!
//! With `epsilon = 1/sqrt(K)` the leg length oscillates on the fast time
//! `tau = t / epsilon`. Removing secular terms fixes the strained frequency
//! `omega = 1 - theta_d² epsilon² / 2` (the first-order correction
//! vanishes), and on the strained time `tau+ = omega tau`:
//!
//! ```text
//! L~(tau+) = 1 - eps L_d sin tau+ - eps² (cos a - theta_d²)(1 - cos tau+)
//! θ~(tau+) = -a + eps theta_d tau+ - ½ eps² sin a (tau+)² + 2 eps² L_d theta_d (1 - cos tau+)
//! ```
//!
//! On the slow scale the angle follows the pendulum `θ0'' = sin θ0` to
//! leading order.

use serde::{Deserialize, Serialize};

use crate::integrator::{rk4_step, IntegratorConfig};
use crate::model::{ModelParams, State, StateDerivative, TimeMap, TimeScale, Trajectory};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainedFrequency {
    pub omega: f64,
    pub omega1: f64,
    pub omega2: f64,
}

pub fn omega_tilde(epsilon: f64, theta_d: f64) -> Result<StrainedFrequency> {
    if !(epsilon >= 0.0) || !theta_d.is_finite() {
        return Err(Error::domain(format!(
            "need epsilon >= 0 and finite theta_d, got ({epsilon}, {theta_d})"
        )));
    }
    let omega2 = -0.5 * theta_d * theta_d;
    let omega = 1.0 + epsilon * epsilon * omega2;
    if !(omega > 0.0) {
        return Err(Error::domain(format!(
            "strained frequency {omega} is not positive (epsilon theta_d too large)"
        )));
    }
    Ok(StrainedFrequency {
        omega,
        omega1: 0.0,
        omega2,
    })
}

/// Fast-scale approximation bound to one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastApproximation {
    pub params: ModelParams,
    pub frequency: StrainedFrequency,
}

impl FastApproximation {
    pub fn new(params: ModelParams) -> Result<Self> {
        let frequency = omega_tilde(params.epsilon(), params.theta_d())?;
        Ok(FastApproximation { params, frequency })
    }

    pub fn time_map(&self) -> TimeMap {
        TimeMap {
            epsilon: self.params.epsilon(),
            omega: self.frequency.omega,
        }
    }

    pub fn length(&self, tau_plus: f64) -> f64 {
        l_tilde(tau_plus, &self.params)
    }

    pub fn theta(&self, tau_plus: f64) -> f64 {
        theta_tilde(tau_plus, &self.params)
    }

    /// Non-periodic part of the angle, `-a + eps theta_d tau+ - ½ eps² sin a (tau+)²`.
    pub fn theta_secular(&self, tau_plus: f64) -> f64 {
        let p = &self.params;
        let eps = p.epsilon();
        -p.alpha() + eps * p.theta_d() * tau_plus
            - 0.5 * eps * eps * p.alpha().sin() * tau_plus * tau_plus
    }
}

/// Approximate leg length at strained fast time `tau_plus`.
pub fn l_tilde(tau_plus: f64, p: &ModelParams) -> f64 {
    let eps = p.epsilon();
    let (sin_t, cos_t) = tau_plus.sin_cos();
    let centrifugal = p.alpha().cos() - p.theta_d() * p.theta_d();
    1.0 - eps * p.l_d() * sin_t - eps * eps * centrifugal * (1.0 - cos_t)
}

/// Approximate leg angle at strained fast time `tau_plus`.
pub fn theta_tilde(tau_plus: f64, p: &ModelParams) -> f64 {
    let eps = p.epsilon();
    let td = p.theta_d();
    -p.alpha() + eps * td * tau_plus - 0.5 * eps * eps * p.alpha().sin() * tau_plus * tau_plus
        + 2.0 * eps * eps * p.l_d() * td * (1.0 - tau_plus.cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theta0Method {
    /// RK4 on `θ0'' = sin θ0` with at most this step between output points.
    Numerical { max_step: f64 },
    /// Linearised pendulum, `-a cosh t + theta_d sinh t`.
    SmallAngle,
}

impl Default for Theta0Method {
    fn default() -> Self {
        Theta0Method::Numerical { max_step: 1e-4 }
    }
}

/// Inverted pendulum `θ'' = sin θ` embedded in the polar state with the leg
/// held at rest length.
pub fn pendulum(s: &State) -> Result<StateDerivative> {
    Ok(StateDerivative {
        theta_rate: s.theta_rate,
        theta_accel: s.theta.sin(),
        length_rate: 0.0,
        length_accel: 0.0,
    })
}

/// Leading-order slow angle on `t_grid`, started from the touchdown angle and
/// rate. The returned states hold `L = 1`, `L' = 0`.
pub fn theta0_slow(t_grid: &[f64], p: &ModelParams, method: Theta0Method) -> Result<Trajectory> {
    if t_grid.is_empty() {
        return Err(Error::domain("empty time grid"));
    }
    let rest = |theta: f64, theta_rate: f64| State {
        theta,
        theta_rate,
        length: 1.0,
        length_rate: 0.0,
    };
    let (alpha, td) = (p.alpha(), p.theta_d());
    let states = match method {
        Theta0Method::SmallAngle => t_grid
            .iter()
            .map(|&t| {
                rest(
                    -alpha * t.cosh() + td * t.sinh(),
                    -alpha * t.sinh() + td * t.cosh(),
                )
            })
            .collect(),
        Theta0Method::Numerical { max_step } => {
            if !(max_step > 0.0) {
                return Err(Error::domain("pendulum step must be positive"));
            }
            let guard = IntegratorConfig::default().l_min;
            let mut out = Vec::with_capacity(t_grid.len());
            let mut s = rest(-alpha, td);
            let mut t = 0.0;
            for &target in t_grid {
                if target < t {
                    return Err(Error::domain(
                        "time grid must be increasing and start at t >= 0",
                    ));
                }
                let span = target - t;
                if span > 0.0 {
                    let n = (span / max_step).ceil().max(1.0) as usize;
                    let h = span / n as f64;
                    for _ in 0..n {
                        s = rk4_step(&pendulum, &s, h, guard)?;
                    }
                }
                t = target;
                out.push(s);
            }
            out
        }
    };
    Trajectory::new(
        TimeScale::Slow,
        t_grid.to_vec(),
        states,
        match method {
            Theta0Method::Numerical { max_step } => max_step,
            Theta0Method::SmallAngle => 0.0,
        },
        Some(*p),
    )
}

/// First integral of the slow pendulum, `½θ'² + cos θ`.
pub fn pendulum_energy(s: &State) -> f64 {
    0.5 * s.theta_rate * s.theta_rate + s.theta.cos()
}

/// One `a << b` condition, read as `b / a >= margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub condition: String,
    pub small: f64,
    pub large: f64,
    pub ratio: f64,
    pub pass: bool,
}

impl ScaleCheck {
    fn new(condition: &str, small: f64, large: f64, margin: f64) -> Self {
        let ratio = large / small;
        ScaleCheck {
            condition: condition.to_string(),
            small,
            large,
            ratio,
            pass: ratio >= margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub margin: f64,
    pub checks: Vec<ScaleCheck>,
}

impl ConsistencyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, condition: &str) -> Option<&ScaleCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Validity conditions for the stiff-leg approximations. Advisory: nothing
/// is rejected, each inequality is reported as pass or warn.
pub fn consistency_check(p: &ModelParams, margin: f64) -> Result<ConsistencyReport> {
    if !(margin > 1.0) {
        return Err(Error::domain(format!("margin must exceed 1, got {margin}")));
    }
    let root_k = p.k().sqrt();
    let (td, ld) = (p.theta_d(), p.l_d());
    let (u, v, alpha) = (p.u(), p.v(), p.alpha());
    let half_pi = std::f64::consts::FRAC_PI_2;
    let checks = vec![
        ScaleCheck::new("theta_d^2/sqrt(K) << L_d", td * td / root_k, ld, margin),
        ScaleCheck::new("L_d << sqrt(K)", ld, root_k, margin),
        ScaleCheck::new("1 << K", 1.0, p.k(), margin),
        ScaleCheck::new("U << sqrt(K)", u, root_k, margin),
        ScaleCheck::new("2 U alpha/pi << V", u * alpha / half_pi, v, margin),
        ScaleCheck::new("V << pi U/(2 alpha)", v, half_pi * u / alpha, margin),
    ];
    Ok(ConsistencyReport { margin, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn runner(k: f64) -> ModelParams {
        ModelParams::new(0.4, 1.0, 0.1, k).unwrap()
    }

    #[test]
    fn omega_cases() {
        assert_eq!(omega_tilde(0.0, 3.0).unwrap().omega, 1.0);
        assert_eq!(omega_tilde(0.3, 0.0).unwrap().omega, 1.0);
        let w = omega_tilde(0.1, 1.0).unwrap();
        assert!((w.omega - 0.995).abs() < 1e-15);
        assert_eq!((w.omega1, w.omega2), (0.0, -0.5));
        assert!(omega_tilde(1.0, 2.0).is_err());
        assert!(omega_tilde(-0.1, 1.0).is_err());
    }

    #[test]
    fn approximations_start_at_touchdown() {
        let p = runner(400.0);
        assert_eq!(l_tilde(0.0, &p), 1.0);
        assert_eq!(theta_tilde(0.0, &p), -0.4);
        // d theta~/d tau+ at 0 equals eps theta_d
        let h = 1e-6;
        let slope = (theta_tilde(h, &p) - theta_tilde(-h, &p)) / (2.0 * h);
        assert!((slope - p.epsilon() * p.theta_d()).abs() < 1e-9);
    }

    #[test]
    fn half_period_length() {
        // mpmath: 0.999285366090170047...
        let p = runner(400.0);
        assert!((l_tilde(PI, &p) - 0.999_285_366_090_170).abs() < 1e-14);
        assert!((l_tilde(2.0 * PI, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn theta_periodic_part() {
        let approx = FastApproximation::new(runner(250.0)).unwrap();
        for &tau in &[0.3, 1.7, 4.0, 11.0] {
            let a = approx.theta(tau) - approx.theta_secular(tau);
            let b = approx.theta(tau + 2.0 * PI) - approx.theta_secular(tau + 2.0 * PI);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn theta0_trivial_fixed_point() {
        let p = ModelParams::new(0.0, 0.0, 0.0, 100.0).unwrap();
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let traj = theta0_slow(&grid, &p, Theta0Method::default()).unwrap();
        assert!(traj
            .states()
            .iter()
            .all(|s| s.theta == 0.0 && s.theta_rate == 0.0));
    }

    #[test]
    fn small_angle_matches_pendulum() {
        // alpha = 0.01 and theta_d = 0.01 (U chosen accordingly, V = 0).
        let alpha: f64 = 0.01;
        let p = ModelParams::new(alpha, 0.01 / alpha.cos(), 0.0, 100.0).unwrap();
        let grid = [0.0, 0.5, 1.0];
        let num = theta0_slow(&grid, &p, Theta0Method::Numerical { max_step: 1e-3 }).unwrap();
        let lin = theta0_slow(&grid, &p, Theta0Method::SmallAngle).unwrap();
        let diff = (num.states()[2].theta - lin.states()[2].theta).abs();
        assert!(diff < 1e-6, "difference {diff}");
    }

    #[test]
    fn pendulum_energy_conserved() {
        let p = runner(100.0);
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let traj = theta0_slow(&grid, &p, Theta0Method::Numerical { max_step: 1e-3 }).unwrap();
        let e0 = pendulum_energy(&traj.states()[0]);
        let drift = traj
            .states()
            .iter()
            .map(|s| (pendulum_energy(s) - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-10, "drift {drift}");
    }

    #[test]
    fn slow_angle_matches_fast_secular_part() {
        // theta0(eps tau) - (-a + eps theta_d tau) = O(eps²) for tau <= pi.
        let defect = |k: f64| {
            let p = runner(k);
            let eps = p.epsilon();
            let taus: Vec<f64> = (0..=20).map(|i| PI * i as f64 / 20.0).collect();
            let grid: Vec<f64> = taus.iter().map(|tau| eps * tau).collect();
            let traj = theta0_slow(&grid, &p, Theta0Method::Numerical { max_step: 1e-4 }).unwrap();
            taus.iter()
                .zip(traj.states())
                .map(|(tau, s)| (s.theta - (-p.alpha() + eps * p.theta_d() * tau)).abs())
                .fold(0.0, f64::max)
        };
        let (d1, d2) = (defect(100.0), defect(400.0));
        let ratio = d1 / d2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn consistency_reports() {
        // Direct ratios for K = 1e4, U = 1, V = 0.1, alpha = 0.2: every
        // stiffness condition holds; the lower V bound 2 U a/pi = 0.127 > V.
        let p = ModelParams::new(0.2, 1.0, 0.1, 1e4).unwrap();
        let r = consistency_check(&p, 10.0).unwrap();
        for name in [
            "theta_d^2/sqrt(K) << L_d",
            "L_d << sqrt(K)",
            "1 << K",
            "U << sqrt(K)",
            "V << pi U/(2 alpha)",
        ] {
            assert!(r.check(name).unwrap().pass, "{name}");
        }
        let low_v = r.check("2 U alpha/pi << V").unwrap();
        assert!(!low_v.pass);
        assert!((low_v.ratio - 0.1 / (0.4 / PI)).abs() < 1e-12);

        let soft = consistency_check(&ModelParams::new(0.2, 1.0, 0.1, 1.0).unwrap(), 10.0).unwrap();
        assert!(!soft.check("1 << K").unwrap().pass);

        let no_v = consistency_check(&ModelParams::new(0.2, 1.0, 0.0, 1e4).unwrap(), 10.0).unwrap();
        assert!(!no_v.check("2 U alpha/pi << V").unwrap().pass);
        assert!(!no_v.all_pass());

        assert!(consistency_check(&p, 1.0).is_err());
    }
}
