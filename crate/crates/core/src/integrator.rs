//! Fixed-step classical Runge–Kutta integration with event location.
//!
//! Event times are refined by bisection, re-integrating a single RK4 step
//! of trial length from the last accepted state, so located events carry
//! the same local accuracy as the grid itself.

use serde::{Deserialize, Serialize};

use crate::model::{State, StateDerivative, TimeScale, Trajectory, L_MIN};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step length in units of the active time scale.
    pub step: f64,
    pub max_steps: usize,
    /// Leg length below which any stage evaluation aborts the run.
    pub l_min: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-3,
            max_steps: 50_000_000,
            l_min: L_MIN,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Self {
        IntegratorConfig {
            step,
            ..Default::default()
        }
    }

    /// Slow-scale default for stiffness `k`: `min(epsilon / 50, 1e-3)`, so the
    /// fast leg oscillation gets at least ~300 steps per period.
    pub fn for_stiffness(k: f64) -> Self {
        Self::with_step((1.0 / k.sqrt() / 50.0).min(1e-3))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::domain(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::domain("max_steps must be at least 1"));
        }
        if !(self.l_min > 0.0 && self.l_min < 1.0) {
            return Err(Error::domain(format!(
                "l_min must lie in (0, 1), got {}",
                self.l_min
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

/// Scalar whose zero defines an event.
#[derive(Debug, Clone, Copy)]
pub enum EventKind {
    /// `theta - target`.
    ThetaReaches(f64),
    /// `L - 1`: the leg back at rest length.
    LengthReturn,
    Custom(fn(&State) -> f64),
}

impl EventKind {
    pub fn value(&self, s: &State) -> f64 {
        match self {
            EventKind::ThetaReaches(target) => s.theta - target,
            EventKind::LengthReturn => s.length - 1.0,
            EventKind::Custom(f) => f(s),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EventSpec {
    pub kind: EventKind,
    pub direction: Direction,
    /// Width of the final bisection bracket, in time units.
    pub root_tol: f64,
}

impl EventSpec {
    pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

    pub fn new(kind: EventKind, direction: Direction) -> Self {
        EventSpec {
            kind,
            direction,
            root_tol: Self::DEFAULT_ROOT_TOL,
        }
    }

    fn crosses(&self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

/// Event located on a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit {
    pub time: f64,
    pub state: State,
    /// Event function at the returned state.
    pub value: f64,
}

fn stage<F>(rhs: &F, s: &State, l_min: f64) -> Result<StateDerivative>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    if !(s.length >= l_min) || !s.is_finite() {
        return Err(Error::Singularity {
            reason: format!("leg length {} below guard {l_min}", s.length),
            time: None,
            last_good: None,
        });
    }
    rhs(s)
}

/// One classical RK4 step of length `h`.
pub fn rk4_step<F>(rhs: &F, s: &State, h: f64, l_min: f64) -> Result<State>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    let k1 = stage(rhs, s, l_min)?;
    let k2 = stage(rhs, &s.advanced(&k1, 0.5 * h), l_min)?;
    let k3 = stage(rhs, &s.advanced(&k2, 0.5 * h), l_min)?;
    let k4 = stage(rhs, &s.advanced(&k3, h), l_min)?;
    let next = s.advanced(&StateDerivative::rk4_combine(&k1, &k2, &k3, &k4), h);
    if !next.is_finite() {
        return Err(Error::Singularity {
            reason: "non-finite state".into(),
            time: None,
            last_good: None,
        });
    }
    Ok(next)
}

fn attach_time(err: Error, time: f64, last_good: State) -> Error {
    match err {
        Error::Singularity { reason, .. } => Error::Singularity {
            reason,
            time: Some(time),
            last_good: Some(last_good),
        },
        other => other,
    }
}

/// Number of steps for `[t0, t1]`: full steps of `h` with the last one
/// shortened to land on `t1`.
fn step_count(span: f64, h: f64) -> f64 {
    (span / h - 1e-9).ceil().max(1.0)
}

/// Integrates from `t0` to `t1`, calling `visit` on every grid point
/// including both endpoints. Returns the final state.
pub fn integrate_visit<F, V>(
    rhs: &F,
    s0: State,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    mut visit: V,
) -> Result<State>
where
    F: Fn(&State) -> Result<StateDerivative>,
    V: FnMut(f64, &State),
{
    cfg.validate()?;
    if !(t1 > t0) {
        return Err(Error::domain(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let h = cfg.step;
    let n = step_count(t1 - t0, h);
    if n > cfg.max_steps as f64 {
        return Err(Error::Budget {
            max_steps: cfg.max_steps,
            time: t0 + cfg.max_steps as f64 * h,
        });
    }
    let n = n as usize;
    let mut s = s0;
    let mut t = t0;
    visit(t, &s);
    for i in 1..=n {
        let t_next = if i == n { t1 } else { t0 + i as f64 * h };
        s = rk4_step(rhs, &s, t_next - t, cfg.l_min).map_err(|e| attach_time(e, t, s))?;
        t = t_next;
        visit(t, &s);
    }
    Ok(s)
}

/// Integrates over `[t0, t1]` and keeps every grid point.
pub fn integrate<F>(
    rhs: &F,
    s0: State,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    let mut times = Vec::new();
    let mut states = Vec::new();
    integrate_visit(rhs, s0, t0, t1, cfg, |t, s| {
        times.push(t);
        states.push(*s);
    })?;
    Trajectory::new(TimeScale::Slow, times, states, cfg.step, None)
}

fn bisect_in_step<F>(
    rhs: &F,
    s: &State,
    h: f64,
    g_before: f64,
    event: &EventSpec,
    cfg: &IntegratorConfig,
) -> Result<(f64, State)>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    let same_side = |g: f64| match event.direction {
        Direction::Rising => g < 0.0,
        Direction::Falling => g > 0.0,
        Direction::Any => g.signum() == g_before.signum() && g != 0.0,
    };
    let (mut lo, mut hi) = (0.0_f64, h);
    let mut hi_state = rk4_step(rhs, s, h, cfg.l_min)?;
    for _ in 0..200 {
        if hi - lo <= event.root_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let sm = rk4_step(rhs, s, mid, cfg.l_min)?;
        if same_side(event.kind.value(&sm)) {
            lo = mid;
        } else {
            hi = mid;
            hi_state = sm;
        }
    }
    Ok((hi, hi_state))
}

/// Integrates until the first crossing of `event` in its direction, and
/// returns the trajectory up to and including the located event point.
pub fn integrate_to_event<F>(
    rhs: &F,
    s0: State,
    t0: f64,
    t_max: f64,
    event: &EventSpec,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, EventHit)>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    cfg.validate()?;
    if !(event.root_tol > 0.0) {
        return Err(Error::domain("root tolerance must be positive"));
    }
    if !(t_max > t0) {
        return Err(Error::domain(format!(
            "need t_max > t0, got [{t0}, {t_max}]"
        )));
    }
    let h = cfg.step;
    let n = step_count(t_max - t0, h).min(cfg.max_steps as f64) as usize;
    let mut times = vec![t0];
    let mut states = vec![s0];
    let mut s = s0;
    let mut t = t0;
    let mut g = event.kind.value(&s);
    for i in 1..=n {
        let t_next = if i == n && n as f64 >= step_count(t_max - t0, h) {
            t_max
        } else {
            t0 + i as f64 * h
        };
        let dt = t_next - t;
        let next = rk4_step(rhs, &s, dt, cfg.l_min).map_err(|e| attach_time(e, t, s))?;
        let g_next = event.kind.value(&next);
        if event.crosses(g, g_next) {
            let (offset, state) =
                bisect_in_step(rhs, &s, dt, g, event, cfg).map_err(|e| attach_time(e, t, s))?;
            let hit = EventHit {
                time: t + offset,
                state,
                value: event.kind.value(&state),
            };
            if hit.time > t {
                times.push(hit.time);
                states.push(state);
            }
            let traj = Trajectory::new(TimeScale::Slow, times, states, h, None)?;
            return Ok((traj, hit));
        }
        s = next;
        t = t_next;
        g = g_next;
        times.push(t);
        states.push(s);
    }
    if t < t_max {
        return Err(Error::Budget {
            max_steps: cfg.max_steps,
            time: t,
        });
    }
    Err(Error::EventNotFound { t_max })
}

/// First crossing of `event` after `t0` and no later than `t_max`.
pub fn locate_event<F>(
    rhs: &F,
    s0: State,
    t0: f64,
    t_max: f64,
    event: &EventSpec,
    cfg: &IntegratorConfig,
) -> Result<EventHit>
where
    F: Fn(&State) -> Result<StateDerivative>,
{
    integrate_to_event(rhs, s0, t0, t_max, event, cfg).map(|(_, hit)| hit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{energy, slip_dynamics, ModelParams};
    use std::f64::consts::PI;

    /// Leg spring alone, angle frozen: L'' = -(L - 1).
    fn frozen_spring(s: &State) -> Result<StateDerivative> {
        Ok(StateDerivative {
            theta_rate: 0.0,
            theta_accel: 0.0,
            length_rate: s.length_rate,
            length_accel: -(s.length - 1.0),
        })
    }

    /// theta advances at unit rate, so theta(t) = t.
    fn clock(_: &State) -> Result<StateDerivative> {
        Ok(StateDerivative {
            theta_rate: 1.0,
            ..Default::default()
        })
    }

    fn spring_start() -> State {
        State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.2,
            length_rate: 0.1,
        }
    }

    fn spring_error(h: f64) -> f64 {
        let s0 = spring_start();
        let t1 = 2.0;
        let end = integrate_visit(
            &frozen_spring,
            s0,
            0.0,
            t1,
            &IntegratorConfig::with_step(h),
            |_, _| {},
        )
        .unwrap();
        let exact = 1.0 + 0.2 * t1.cos() + 0.1 * t1.sin();
        (end.length - exact).abs()
    }

    #[test]
    fn spring_closes_its_period() {
        let s0 = spring_start();
        let cfg = IntegratorConfig::with_step(2.0 * PI / 1000.0);
        let traj = integrate(&frozen_spring, s0, 0.0, 2.0 * PI, &cfg).unwrap();
        let (t_end, end) = traj.last().unwrap();
        assert_eq!(t_end, 2.0 * PI);
        assert_eq!(traj.len(), 1001);
        assert!((end.length - s0.length).abs() < 1e-10);
        assert!((end.length_rate - s0.length_rate).abs() < 1e-10);
    }

    #[test]
    fn fourth_order_on_frozen_spring() {
        let (e1, e2) = (spring_error(0.02), spring_error(0.01));
        let order = (e1 / e2).log2();
        assert!((3.7..=4.3).contains(&order), "observed order {order}");
    }

    #[test]
    fn partial_last_step_lands_on_end() {
        let cfg = IntegratorConfig::with_step(0.3);
        let traj = integrate(
            &clock,
            State {
                theta: 0.0,
                theta_rate: 0.0,
                length: 1.0,
                length_rate: 0.0,
            },
            0.0,
            1.0,
            &cfg,
        )
        .unwrap();
        assert_eq!(traj.times(), &[0.0, 0.3, 0.6, 0.8999999999999999, 1.0][..]);
        assert!((traj.last().unwrap().1.theta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn energy_drift_small_at_millistep() {
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let e0 = energy(&p.initial_state(), p.k());
        let mut drift = 0.0_f64;
        integrate_visit(
            &slip_dynamics(p.k()),
            p.initial_state(),
            0.0,
            1.0,
            &IntegratorConfig::with_step(1e-3),
            |_, s| drift = drift.max((energy(s, p.k()) - e0).abs()),
        )
        .unwrap();
        assert!(drift < 1e-8, "drift {drift}");
    }

    #[test]
    fn step_halving_reduces_endpoint_error_sixteenfold() {
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let rhs = slip_dynamics(p.k());
        let end = |h: f64| {
            integrate_visit(
                &rhs,
                p.initial_state(),
                0.0,
                1.0,
                &IntegratorConfig::with_step(h),
                |_, _| {},
            )
            .unwrap()
        };
        let reference = end(1e-4 / 8.0);
        let e1 = end(0.02).max_abs_diff(&reference);
        let e2 = end(0.01).max_abs_diff(&reference);
        let ratio = e1 / e2;
        assert!((13.0..=19.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn singularity_carries_last_good_state() {
        let collapse = |s: &State| -> Result<StateDerivative> {
            Ok(StateDerivative {
                length_rate: s.length_rate,
                length_accel: -100.0,
                ..Default::default()
            })
        };
        let s0 = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        match integrate(&collapse, s0, 0.0, 1.0, &IntegratorConfig::with_step(1e-3)) {
            Err(Error::Singularity {
                time: Some(t),
                last_good: Some(s),
                ..
            }) => {
                assert!(t > 0.1 && t < 0.2);
                assert!(s.length > 0.0);
            }
            other => panic!("expected singularity, got {other:?}"),
        }
    }

    #[test]
    fn budget_and_config_errors() {
        let s0 = spring_start();
        let cfg = IntegratorConfig {
            max_steps: 10,
            ..IntegratorConfig::with_step(0.01)
        };
        assert!(matches!(
            integrate(&frozen_spring, s0, 0.0, 1.0, &cfg),
            Err(Error::Budget { .. })
        ));
        assert!(integrate(
            &frozen_spring,
            s0,
            0.0,
            1.0,
            &IntegratorConfig::with_step(0.0)
        )
        .is_err());
        assert!(integrate(&frozen_spring, s0, 1.0, 1.0, &IntegratorConfig::default()).is_err());
        let bad_guard = IntegratorConfig {
            l_min: 1.5,
            ..Default::default()
        };
        assert!(bad_guard.validate().is_err());
    }

    #[test]
    fn linear_event() {
        let s0 = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        let ev = EventSpec::new(EventKind::Custom(|s| s.theta - 0.5), Direction::Rising);
        let hit = locate_event(
            &clock,
            s0,
            0.0,
            2.0,
            &ev,
            &IntegratorConfig::with_step(0.03),
        )
        .unwrap();
        assert!((hit.time - 0.5).abs() <= 2.0 * ev.root_tol);
        assert!(hit.value.abs() < 1e-11);
    }

    #[test]
    fn direction_filter() {
        let s0 = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        let ev = EventSpec::new(EventKind::ThetaReaches(0.5), Direction::Falling);
        let res = locate_event(
            &clock,
            s0,
            0.0,
            2.0,
            &ev,
            &IntegratorConfig::with_step(0.03),
        );
        assert!(matches!(res, Err(Error::EventNotFound { .. })));
        let any = EventSpec::new(EventKind::ThetaReaches(0.5), Direction::Any);
        assert!(locate_event(
            &clock,
            s0,
            0.0,
            2.0,
            &any,
            &IntegratorConfig::with_step(0.03)
        )
        .is_ok());
    }

    #[test]
    fn takeoff_angle_crossing_near_stance_estimate() {
        // At K = 12 the stance estimate t* ~ pi / sqrt(12) is only rough; the
        // crossing must exist and sit within a few tens of percent of it.
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let ev = EventSpec::new(EventKind::ThetaReaches(0.4), Direction::Rising);
        let cfg = IntegratorConfig::with_step(1e-4);
        let hit = locate_event(
            &slip_dynamics(p.k()),
            p.initial_state(),
            0.0,
            5.0,
            &ev,
            &cfg,
        )
        .unwrap();
        let estimate = PI / 12f64.sqrt();
        assert!((hit.time / estimate - 1.0).abs() < 0.3, "t = {}", hit.time);
        assert!(hit.value.abs() < 1e-10);

        // Refining the grid moves the located time by less than 10 root tolerances.
        let fine = IntegratorConfig::with_step(1e-5);
        let hit_fine = locate_event(
            &slip_dynamics(p.k()),
            p.initial_state(),
            0.0,
            5.0,
            &ev,
            &fine,
        )
        .unwrap();
        assert!((hit.time - hit_fine.time).abs() < 10.0 * ev.root_tol.max(1e-11));
    }

    #[test]
    fn event_trajectory_ends_at_hit() {
        let p = ModelParams::new(0.3, 1.0, 0.1, 30.0).unwrap();
        let ev = EventSpec::new(EventKind::LengthReturn, Direction::Rising);
        let cfg = IntegratorConfig::for_stiffness(p.k());
        let (traj, hit) = integrate_to_event(
            &slip_dynamics(p.k()),
            p.initial_state(),
            0.0,
            5.0,
            &ev,
            &cfg,
        )
        .unwrap();
        let (t_last, s_last) = traj.last().unwrap();
        assert_eq!(t_last, hit.time);
        assert_eq!(s_last, hit.state);
        // Event time lies within one step of the last full grid point.
        let t_prev = traj.times()[traj.len() - 2];
        assert!(hit.time - t_prev <= cfg.step * (1.0 + 1e-9));
    }

    #[test]
    fn deterministic_runs() {
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let cfg = IntegratorConfig::with_step(1e-3);
        let a = integrate(&slip_dynamics(p.k()), p.initial_state(), 0.0, 1.0, &cfg).unwrap();
        let b = integrate(&slip_dynamics(p.k()), p.initial_state(), 0.0, 1.0, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
