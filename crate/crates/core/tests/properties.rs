use proptest::prelude::*;
use slip_core::model::{
    cartesian_to_polar, derived_ic, polar_derivative_to_cartesian, polar_to_cartesian,
    rhs_cartesian, rhs_polar, State,
};

fn state() -> impl Strategy<Value = State> {
    (-1.2f64..1.2, -3.0f64..3.0, 0.5f64..1.5, -3.0f64..3.0).prop_map(
        |(theta, theta_rate, length, length_rate)| State {
            theta,
            theta_rate,
            length,
            length_rate,
        },
    )
}

proptest! {
    #[test]
    fn touchdown_rotation_preserves_speed(alpha in -1.5f64..1.5, u in 0.0f64..5.0, v in -5.0f64..5.0) {
        let (theta_d, l_d) = derived_ic(alpha, u, v).unwrap();
        let lhs = theta_d * theta_d + l_d * l_d;
        let rhs = u * u + v * v;
        prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn polar_and_cartesian_fields_agree(s in state(), log_k in 0.0f64..4.0) {
        let k = 10f64.powf(log_k);
        let c = polar_to_cartesian(&s);
        let from_polar = polar_derivative_to_cartesian(&s, &rhs_polar(&s, k).unwrap());
        let direct = rhs_cartesian(&c, k).unwrap();
        let scale = 1.0 + k;
        prop_assert!((from_polar.x_accel - direct.x_accel).abs() <= 1e-12 * scale);
        prop_assert!((from_polar.y_accel - direct.y_accel).abs() <= 1e-12 * scale);
        prop_assert!((from_polar.x_rate - direct.x_rate).abs() <= 1e-12);
        prop_assert!((from_polar.y_rate - direct.y_rate).abs() <= 1e-12);
    }

    #[test]
    fn coordinate_round_trip(s in state()) {
        let back = cartesian_to_polar(&polar_to_cartesian(&s)).unwrap();
        prop_assert!(back.max_abs_diff(&s) <= 1e-12, "{s:?} -> {back:?}");
    }
}
