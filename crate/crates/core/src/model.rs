//! Nondimensional stance dynamics of the spring-mass runner.
//!
//! Lengths are scaled by the rest leg length, time by `sqrt(l0 / g)`.
//! The angle `theta` is measured from the vertical through the foot and is
//! negative at touchdown, so the body sits at `x = L sin(theta)`,
//! `y = L cos(theta)` relative to the contact point.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::{Error, Result};

/// Leg length below which the polar equations are treated as singular.
pub const L_MIN: f64 = 1e-6;

fn ensure_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}

/// Physical inputs in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalInputs {
    /// Body mass (kg).
    pub mass: f64,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    /// Rest length of the leg spring (m).
    pub rest_length: f64,
    /// Spring constant (N/m).
    pub spring_constant: f64,
    /// Horizontal touchdown speed (m/s).
    pub horizontal_speed: f64,
    /// Vertical touchdown speed (m/s).
    pub vertical_speed: f64,
    /// Angle of attack (rad).
    pub attack_angle: f64,
}

/// Touchdown rates `(theta_d, L_d)` from the attack angle and Froude numbers.
pub fn derived_ic(alpha: f64, u: f64, v: f64) -> Result<(f64, f64)> {
    ensure_finite("alpha", alpha)?;
    ensure_finite("U", u)?;
    ensure_finite("V", v)?;
    let (sin_a, cos_a) = alpha.sin_cos();
    Ok((u * cos_a - v * sin_a, u * sin_a + v * cos_a))
}

/// Touchdown conditions without a stiffness: what the stance problem is
/// posed on before `K` is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Touchdown {
    pub alpha: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "V")]
    pub v: f64,
}

impl Touchdown {
    pub fn new(alpha: f64, u: f64, v: f64) -> Result<Self> {
        derived_ic(alpha, u, v)?;
        Ok(Touchdown { alpha, u, v })
    }

    pub fn theta_d(&self) -> f64 {
        self.u * self.alpha.cos() - self.v * self.alpha.sin()
    }

    pub fn l_d(&self) -> f64 {
        self.u * self.alpha.sin() + self.v * self.alpha.cos()
    }

    pub fn with_stiffness(&self, k: f64) -> Result<ModelParams> {
        ModelParams::new(self.alpha, self.u, self.v, k)
    }
}

/// Nondimensional model parameters.
///
/// The touchdown rates and `epsilon = 1/sqrt(K)` are always recomputed from
/// the primary inputs so the representations cannot drift apart.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ModelParams {
    alpha: f64,
    u: f64,
    v: f64,
    k: f64,
}

#[derive(Deserialize)]
struct RawParams {
    alpha: f64,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "K")]
    k: f64,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        ModelParams::new(raw.alpha, raw.u, raw.v, raw.k)
    }
}

impl Serialize for ModelParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ModelParams", 7)?;
        st.serialize_field("alpha", &self.alpha)?;
        st.serialize_field("U", &self.u)?;
        st.serialize_field("V", &self.v)?;
        st.serialize_field("K", &self.k)?;
        st.serialize_field("theta_d", &self.theta_d())?;
        st.serialize_field("L_d", &self.l_d())?;
        st.serialize_field("epsilon", &self.epsilon())?;
        st.end()
    }
}

impl ModelParams {
    pub fn new(alpha: f64, u: f64, v: f64, k: f64) -> Result<Self> {
        derived_ic(alpha, u, v)?;
        ensure_finite("K", k)?;
        if k <= 0.0 {
            return Err(Error::domain(format!(
                "stiffness K must be positive, got {k}"
            )));
        }
        Ok(ModelParams { alpha, u, v, k })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn theta_d(&self) -> f64 {
        self.touchdown().theta_d()
    }

    pub fn l_d(&self) -> f64 {
        self.touchdown().l_d()
    }

    pub fn epsilon(&self) -> f64 {
        1.0 / self.k.sqrt()
    }

    pub fn touchdown(&self) -> Touchdown {
        Touchdown {
            alpha: self.alpha,
            u: self.u,
            v: self.v,
        }
    }

    /// Touchdown state: `theta = -alpha`, `L = 1`, leg compressing at `L_d`.
    pub fn initial_state(&self) -> State {
        State {
            theta: -self.alpha,
            theta_rate: self.theta_d(),
            length: 1.0,
            length_rate: -self.l_d(),
        }
    }
}

/// Scales the physical inputs: `K = k l0 / (m g)`, Froude numbers
/// `U = u / sqrt(g l0)` and `V = v / sqrt(g l0)`.
pub fn nondimensionalize(d: &DimensionalInputs) -> Result<ModelParams> {
    for (name, value) in [
        ("mass", d.mass),
        ("gravity", d.gravity),
        ("rest length", d.rest_length),
    ] {
        ensure_finite(name, value)?;
        if value <= 0.0 {
            return Err(Error::domain(format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    ensure_finite("spring constant", d.spring_constant)?;
    if d.spring_constant < 0.0 {
        return Err(Error::domain("spring constant must be non-negative"));
    }
    if !(d.horizontal_speed >= 0.0) {
        return Err(Error::domain("horizontal speed must be non-negative"));
    }
    let k = d.spring_constant * d.rest_length / (d.mass * d.gravity);
    let froude = (d.gravity * d.rest_length).sqrt();
    ModelParams::new(
        d.attack_angle,
        d.horizontal_speed / froude,
        d.vertical_speed / froude,
        k,
    )
}

/// Polar state. Rates are per unit of whatever time scale the owning
/// trajectory runs on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub theta: f64,
    pub theta_rate: f64,
    pub length: f64,
    pub length_rate: f64,
}

impl State {
    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.theta_rate.is_finite()
            && self.length.is_finite()
            && self.length_rate.is_finite()
    }

    /// `self + h * d`, the Euler-type update used inside Runge–Kutta stages.
    pub fn advanced(&self, d: &StateDerivative, h: f64) -> State {
        State {
            theta: self.theta + h * d.theta_rate,
            theta_rate: self.theta_rate + h * d.theta_accel,
            length: self.length + h * d.length_rate,
            length_rate: self.length_rate + h * d.length_accel,
        }
    }

    pub fn max_abs_diff(&self, other: &State) -> f64 {
        (self.theta - other.theta)
            .abs()
            .max((self.theta_rate - other.theta_rate).abs())
            .max((self.length - other.length).abs())
            .max((self.length_rate - other.length_rate).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub theta_rate: f64,
    pub theta_accel: f64,
    pub length_rate: f64,
    pub length_accel: f64,
}

impl StateDerivative {
    /// Weighted sum used by the classical RK4 combination.
    pub(crate) fn rk4_combine(k1: &Self, k2: &Self, k3: &Self, k4: &Self) -> Self {
        let mix = |a: f64, b: f64, c: f64, d: f64| (a + 2.0 * b + 2.0 * c + d) / 6.0;
        StateDerivative {
            theta_rate: mix(k1.theta_rate, k2.theta_rate, k3.theta_rate, k4.theta_rate),
            theta_accel: mix(
                k1.theta_accel,
                k2.theta_accel,
                k3.theta_accel,
                k4.theta_accel,
            ),
            length_rate: mix(
                k1.length_rate,
                k2.length_rate,
                k3.length_rate,
                k4.length_rate,
            ),
            length_accel: mix(
                k1.length_accel,
                k2.length_accel,
                k3.length_accel,
                k4.length_accel,
            ),
        }
    }
}

/// Polar equations of motion on the slow time scale:
///
/// ```text
/// L θ'' + 2 L' θ' = sin θ
/// L'' - θ'² L     = K (1 - L) - cos θ
/// ```
pub fn rhs_polar(s: &State, k: f64) -> Result<StateDerivative> {
    if !(s.length > L_MIN) {
        return Err(Error::Singularity {
            reason: format!("leg length {} at or below {L_MIN}", s.length),
            time: None,
            last_good: None,
        });
    }
    Ok(StateDerivative {
        theta_rate: s.theta_rate,
        theta_accel: (s.theta.sin() - 2.0 * s.length_rate * s.theta_rate) / s.length,
        length_rate: s.length_rate,
        length_accel: s.theta_rate * s.theta_rate * s.length + k * (1.0 - s.length) - s.theta.cos(),
    })
}

/// Right-hand side for the stance dynamics at fixed stiffness, in the
/// shape the integrator expects.
pub fn slip_dynamics(k: f64) -> impl Fn(&State) -> Result<StateDerivative> + Copy {
    move |s| rhs_polar(s, k)
}

/// Body position and velocity relative to the foot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: f64,
    pub x_rate: f64,
    pub y: f64,
    pub y_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianDerivative {
    pub x_rate: f64,
    pub x_accel: f64,
    pub y_rate: f64,
    pub y_accel: f64,
}

pub fn polar_to_cartesian(s: &State) -> CartesianState {
    let (sin_t, cos_t) = s.theta.sin_cos();
    CartesianState {
        x: s.length * sin_t,
        x_rate: s.length_rate * sin_t + s.length * s.theta_rate * cos_t,
        y: s.length * cos_t,
        y_rate: s.length_rate * cos_t - s.length * s.theta_rate * sin_t,
    }
}

pub fn cartesian_to_polar(c: &CartesianState) -> Result<State> {
    let r2 = c.x * c.x + c.y * c.y;
    if !(r2 > 0.0) {
        return Err(Error::Singularity {
            reason: "body at the contact point".into(),
            time: None,
            last_good: None,
        });
    }
    let r = r2.sqrt();
    Ok(State {
        theta: c.x.atan2(c.y),
        theta_rate: (c.y * c.x_rate - c.x * c.y_rate) / r2,
        length: r,
        length_rate: (c.x * c.x_rate + c.y * c.y_rate) / r,
    })
}

/// Cartesian form: `x'' = K x (1/r - 1)`, `y'' = K y (1/r - 1) - 1`.
pub fn rhs_cartesian(c: &CartesianState, k: f64) -> Result<CartesianDerivative> {
    let r = c.x.hypot(c.y);
    if !(r > 0.0) {
        return Err(Error::Singularity {
            reason: "body at the contact point".into(),
            time: None,
            last_good: None,
        });
    }
    let pull = k * (1.0 / r - 1.0);
    Ok(CartesianDerivative {
        x_rate: c.x_rate,
        x_accel: pull * c.x,
        y_rate: c.y_rate,
        y_accel: pull * c.y - 1.0,
    })
}

/// Maps a polar state and its time derivative to Cartesian velocity and
/// acceleration (chain rule through `x = L sin θ`, `y = L cos θ`).
pub fn polar_derivative_to_cartesian(s: &State, d: &StateDerivative) -> CartesianDerivative {
    let (sin_t, cos_t) = s.theta.sin_cos();
    let l = s.length;
    let (l1, l2) = (d.length_rate, d.length_accel);
    let (w1, w2) = (d.theta_rate, d.theta_accel);
    CartesianDerivative {
        x_rate: l1 * sin_t + l * w1 * cos_t,
        x_accel: l2 * sin_t + 2.0 * l1 * w1 * cos_t + l * w2 * cos_t - l * w1 * w1 * sin_t,
        y_rate: l1 * cos_t - l * w1 * sin_t,
        y_accel: l2 * cos_t - 2.0 * l1 * w1 * sin_t - l * w2 * sin_t - l * w1 * w1 * cos_t,
    }
}

/// Total mechanical energy `½(L'² + L²θ'²) + ½K(1-L)² + L cos θ`, a first
/// integral of [`rhs_polar`].
pub fn energy(s: &State, k: f64) -> f64 {
    let compression = 1.0 - s.length;
    0.5 * (s.length_rate * s.length_rate + s.length * s.length * s.theta_rate * s.theta_rate)
        + 0.5 * k * compression * compression
        + s.length * s.theta.cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScale {
    /// Physical (pendulum) time `t`.
    Slow,
    /// `tau = t / epsilon`.
    Fast,
    /// `tau+ = omega tau`.
    Strained,
}

/// Conversions between the three time scales for a fixed `epsilon` and
/// strained frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeMap {
    pub epsilon: f64,
    pub omega: f64,
}

impl TimeMap {
    pub fn slow_to_fast(&self, t: f64) -> f64 {
        t / self.epsilon
    }

    pub fn fast_to_strained(&self, tau: f64) -> f64 {
        self.omega * tau
    }

    pub fn slow_to_strained(&self, t: f64) -> f64 {
        self.fast_to_strained(self.slow_to_fast(t))
    }

    pub fn strained_to_slow(&self, tau_plus: f64) -> f64 {
        tau_plus / self.omega * self.epsilon
    }
}

/// Time-ordered states produced by an integration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub scale: TimeScale,
    times: Vec<f64>,
    states: Vec<State>,
    /// Nominal step used to produce the trajectory.
    pub step: f64,
    pub params: Option<ModelParams>,
}

impl Trajectory {
    /// Builds a trajectory, checking lengths match and times strictly increase.
    pub fn new(
        scale: TimeScale,
        times: Vec<f64>,
        states: Vec<State>,
        step: f64,
        params: Option<ModelParams>,
    ) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::domain(format!(
                "{} times but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain(
                "trajectory times must be strictly increasing",
            ));
        }
        Ok(Trajectory {
            scale,
            times,
            states,
            step,
            params,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, State)> {
        Some((*self.times.last()?, *self.states.last()?))
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &State)> + '_ {
        self.times.iter().copied().zip(self.states.iter())
    }
}

/// Largest deviation of the angular momentum balance `d/dt(L²θ') = L sin θ`
/// over interior grid points, with the derivative taken by central
/// differences.
pub fn angular_momentum_residual(traj: &Trajectory) -> Result<f64> {
    if traj.scale != TimeScale::Slow {
        return Err(Error::domain(
            "angular momentum balance needs a slow-scale trajectory",
        ));
    }
    if traj.len() < 3 {
        return Err(Error::domain("need at least 3 points to difference"));
    }
    let momentum = |s: &State| s.length * s.length * s.theta_rate;
    let t = traj.times();
    let s = traj.states();
    let worst = (1..t.len() - 1)
        .map(|i| {
            let rate = (momentum(&s[i + 1]) - momentum(&s[i - 1])) / (t[i + 1] - t[i - 1]);
            (rate - s[i].length * s[i].theta.sin()).abs()
        })
        .fold(0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_scaling() {
        let d = DimensionalInputs {
            mass: 1.0,
            gravity: 1.0,
            rest_length: 1.0,
            spring_constant: 1.0,
            horizontal_speed: 1.0,
            vertical_speed: 0.0,
            attack_angle: 0.0,
        };
        let p = nondimensionalize(&d).unwrap();
        assert_eq!((p.k(), p.u(), p.v()), (1.0, 1.0, 0.0));
        assert_eq!((p.theta_d(), p.l_d(), p.epsilon()), (1.0, 0.0, 1.0));
    }

    #[test]
    fn runner_scaling() {
        let d = DimensionalInputs {
            mass: 80.0,
            gravity: 9.81,
            rest_length: 1.0,
            spring_constant: 9417.6,
            horizontal_speed: 3.132,
            vertical_speed: 0.3132,
            attack_angle: 0.4,
        };
        let p = nondimensionalize(&d).unwrap();
        assert!((p.k() - 12.0).abs() < 1e-12);
        // 3.132 / sqrt(9.81) = 0.99997064177088...
        assert!((p.u() - 0.999_970_641_770_882).abs() < 1e-12);
        assert!((p.v() - 0.099_997_064_177_088).abs() < 1e-12);
    }

    #[test]
    fn zero_spring_rejected() {
        let d = DimensionalInputs {
            mass: 1.0,
            gravity: 1.0,
            rest_length: 1.0,
            spring_constant: 0.0,
            horizontal_speed: 1.0,
            vertical_speed: 0.0,
            attack_angle: 0.0,
        };
        assert!(matches!(nondimensionalize(&d), Err(Error::Domain(_))));
        let bad_mass = DimensionalInputs {
            mass: f64::NAN,
            ..d
        };
        assert!(nondimensionalize(&bad_mass).is_err());
        let bad_len = DimensionalInputs {
            rest_length: -1.0,
            ..d
        };
        assert!(nondimensionalize(&bad_len).is_err());
    }

    #[test]
    fn derived_ic_cases() {
        assert_eq!(derived_ic(0.0, 1.0, 0.1).unwrap(), (1.0, 0.1));
        let (td, ld) = derived_ic(0.4, 1.0, 0.1).unwrap();
        // mpmath, 30 digits
        assert!((td - 0.882_119_159_772_02).abs() < 1e-15);
        assert!((ld - 0.481_524_441_708_939).abs() < 1e-15);
        let (td, ld) = derived_ic(FRAC_PI_2, 0.0, 1.0).unwrap();
        assert!((td + 1.0).abs() < 1e-15 && ld.abs() < 1e-15);
        assert!(derived_ic(f64::INFINITY, 1.0, 0.0).is_err());
    }

    #[test]
    fn rhs_at_rest_and_touchdown() {
        let rest = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        let d = rhs_polar(&rest, 37.0).unwrap();
        assert_eq!((d.theta_accel, d.length_accel), (0.0, -1.0));

        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let d = rhs_polar(&p.initial_state(), p.k()).unwrap();
        assert!((d.theta_accel - 0.460_105_529_551_310).abs() < 1e-14);
        assert!((d.length_accel + 0.142_926_781_965_990).abs() < 1e-14);
    }

    #[test]
    fn collapsed_leg_is_singular() {
        let s = State {
            theta: 0.1,
            theta_rate: 0.0,
            length: 1e-16,
            length_rate: 0.0,
        };
        assert!(matches!(
            rhs_polar(&s, 10.0),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn touchdown_position_in_cartesian() {
        let alpha = 0.3;
        let p = ModelParams::new(alpha, 1.0, 0.1, 20.0).unwrap();
        let c = polar_to_cartesian(&p.initial_state());
        assert!((c.x + alpha.sin()).abs() < 1e-15);
        assert!((c.y - alpha.cos()).abs() < 1e-15);
        // The horizontal velocity at touchdown is exactly U.
        assert!((c.x_rate - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polar_round_trip() {
        let s = State {
            theta: 0.2,
            theta_rate: -0.3,
            length: 0.95,
            length_rate: 0.7,
        };
        let back = cartesian_to_polar(&polar_to_cartesian(&s)).unwrap();
        assert!(back.max_abs_diff(&s) < 1e-14);
    }

    #[test]
    fn cartesian_rest_length() {
        let c = CartesianState {
            x: 0.0,
            x_rate: 0.0,
            y: 1.0,
            y_rate: 0.0,
        };
        let d = rhs_cartesian(&c, 123.0).unwrap();
        assert_eq!((d.x_accel, d.y_accel), (0.0, -1.0));
        let origin = CartesianState { y: 0.0, ..c };
        assert!(rhs_cartesian(&origin, 1.0).is_err());
        assert!(cartesian_to_polar(&origin).is_err());
    }

    #[test]
    fn energy_values() {
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let e0 = energy(&p.initial_state(), p.k());
        assert!((e0 - 1.426_060_994_002_885).abs() < 1e-14);
        let rest = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        assert_eq!(energy(&rest, 5.0), 1.0);
    }

    #[test]
    fn energy_is_a_first_integral() {
        // dE/dt = L'L'' + L L'θ'² + L²θ'θ'' - K(1-L)L' + L' cos θ - L θ' sin θ
        // must vanish when the derivatives come from rhs_polar.
        let s = State {
            theta: -0.3,
            theta_rate: 0.8,
            length: 0.93,
            length_rate: -0.4,
        };
        let k = 17.0;
        let d = rhs_polar(&s, k).unwrap();
        let de = s.length_rate * d.length_accel
            + s.length * s.length_rate * s.theta_rate * s.theta_rate
            + s.length * s.length * s.theta_rate * d.theta_accel
            - k * (1.0 - s.length) * s.length_rate
            + s.length_rate * s.theta.cos()
            - s.length * s.theta_rate * s.theta.sin();
        assert!(de.abs() < 1e-13, "dE/dt = {de}");
    }

    #[test]
    fn params_serde_carries_derived_fields() {
        let p = ModelParams::new(0.4, 1.0, 0.1, 12.0).unwrap();
        let json = serde_json::to_value(p).unwrap();
        assert_eq!(json["K"], 12.0);
        assert_eq!(json["epsilon"], p.epsilon());
        let back: ModelParams = serde_json::from_value(json).unwrap();
        assert_eq!(back, p);
        let bad = serde_json::json!({"alpha": 0.4, "U": 1.0, "V": 0.1, "K": 0.0});
        assert!(serde_json::from_value::<ModelParams>(bad).is_err());
    }

    #[test]
    fn time_map_inverts() {
        let m = TimeMap {
            epsilon: 0.05,
            omega: 0.99,
        };
        let t = 0.37;
        assert!((m.strained_to_slow(m.slow_to_strained(t)) - t).abs() < 1e-15);
        assert_eq!(m.slow_to_fast(0.1), 0.1 / 0.05);
    }

    #[test]
    fn trajectory_rejects_unordered_times() {
        let s = ModelParams::new(0.1, 1.0, 0.0, 4.0)
            .unwrap()
            .initial_state();
        let bad = Trajectory::new(TimeScale::Slow, vec![0.0, 0.0], vec![s, s], 0.1, None);
        assert!(bad.is_err());
        let short =
            Trajectory::new(TimeScale::Slow, vec![0.0, 1.0], vec![s, s], 1.0, None).unwrap();
        assert!(angular_momentum_residual(&short).is_err());
    }

    #[test]
    fn constant_state_has_no_momentum_residual() {
        let s = State {
            theta: 0.0,
            theta_rate: 0.0,
            length: 1.0,
            length_rate: 0.0,
        };
        let traj = Trajectory::new(
            TimeScale::Slow,
            vec![0.0, 0.1, 0.2, 0.3],
            vec![s; 4],
            0.1,
            None,
        )
        .unwrap();
        assert_eq!(angular_momentum_residual(&traj).unwrap(), 0.0);
        let fast = Trajectory {
            scale: TimeScale::Fast,
            ..traj
        };
        assert!(angular_momentum_residual(&fast).is_err());
    }
}
