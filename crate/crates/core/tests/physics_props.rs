use std::f64::consts::TAU;

use heatpinn_core::physics::{source_center, source_value};
use heatpinn_core::{SourceSpec, SpaceTimePoint};
use proptest::prelude::*;

fn source(v: f64, angle: f64) -> SourceSpec {
    SourceSpec {
        peak_power: 5.0,
        radius: 1.0,
        velocity: v,
        start: (0.0, 5.0),
        direction: (libm::cos(angle), libm::sin(angle)),
    }
}

proptest! {
    #[test]
    fn source_is_radially_symmetric(t in 0.0..8.0f64, r in 0.0..3.0f64, a in 0.0..TAU, b in 0.0..TAU, dir in 0.0..TAU) {
        let s = source(2.0, dir);
        let (cx, cy) = source_center(&s, t);
        let f = |ang: f64| source_value(&s, &SpaceTimePoint::new(cx + r * libm::cos(ang), cy + r * libm::sin(ang), t));
        prop_assert!((f(a) - f(b)).abs() <= 1e-12);
        prop_assert!(f(a) <= s.peak_power);
    }

    #[test]
    fn source_translates_with_velocity(t in 0.0..8.0f64, dt in 0.0..2.0f64, x in -5.0..25.0f64, y in 0.0..10.0f64, v in 0.1..4.0f64) {
        let s = source(v, 0.0);
        let a = source_value(&s, &SpaceTimePoint::new(x, y, t));
        let b = source_value(&s, &SpaceTimePoint::new(x + v * dt, y, t + dt));
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn source_is_positive_and_bounded(t in 0.0..8.0f64, x in 0.0..20.0f64, y in 0.0..10.0f64) {
        let f = source_value(&source(2.0, 0.3), &SpaceTimePoint::new(x, y, t));
        prop_assert!((0.0..=5.0).contains(&f));
    }
}
