//! Autodiff against central finite differences.

use heatpinn_core::autodiff::{eval_batch, loss_gradient, Channels, DerivBundle, SpaceTimePoint};
use heatpinn_core::network::{init_network, Architecture, NetworkParams, Normalization, PinnModel};
use heatpinn_core::eval_with_input_derivs;
use proptest::prelude::*;

const H: f64 = 1e-4;

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn u(net: &NetworkParams, x: f64, y: f64, t: f64) -> f64 {
    eval_with_input_derivs(net, &SpaceTimePoint::new(x, y, t)).unwrap().u
}

/// `[u_t, u_x, u_y]` and `[u_xx, u_yy]` by central differences.
fn fd_bundle(net: &NetworkParams, p: &SpaceTimePoint) -> ([f64; 3], [f64; 2]) {
    let (x, y, t) = (p.x, p.y, p.t);
    let c = u(net, x, y, t);
    let first = [
        (u(net, x, y, t + H) - u(net, x, y, t - H)) / (2.0 * H),
        (u(net, x + H, y, t) - u(net, x - H, y, t)) / (2.0 * H),
        (u(net, x, y + H, t) - u(net, x, y - H, t)) / (2.0 * H),
    ];
    let second = [
        (u(net, x + H, y, t) - 2.0 * c + u(net, x - H, y, t)) / (H * H),
        (u(net, x, y + H, t) - 2.0 * c + u(net, x, y - H, t)) / (H * H),
    ];
    (first, second)
}

fn check_input_derivs(net: &NetworkParams, p: &SpaceTimePoint) -> Result<(), TestCaseError> {
    let b = eval_with_input_derivs(net, p).unwrap();
    let (first, second) = fd_bundle(net, p);
    for (a, f) in [b.du_dt, b.du_dx, b.du_dy].into_iter().zip(first) {
        prop_assert!(rel(a, f, 1e-2) < 1e-5, "first order: ad {a} fd {f}");
    }
    for (a, f) in [b.d2u_dx2, b.d2u_dy2].into_iter().zip(second) {
        prop_assert!(rel(a, f, 1e-2) < 1e-3, "second order: ad {a} fd {f}");
    }
    Ok(())
}

/// Σ_i (c·bundle_i − y_i)²: touches every channel of the tape.
fn mixed_loss(net: &NetworkParams, pts: &[SpaceTimePoint], c: &[f64; 6], y: &[f64]) -> f64 {
    eval_batch(net, pts, Channels::Full)
        .unwrap()
        .iter()
        .zip(y)
        .map(|(b, y)| {
            let r = b.to_array().iter().zip(c).map(|(v, c)| v * c).sum::<f64>() - y;
            r * r
        })
        .sum()
}

fn check_param_gradient(
    net: &NetworkParams,
    pts: &[SpaceTimePoint],
    c: &[f64; 6],
    y: &[f64],
) -> Result<(), TestCaseError> {
    let (value, grad) = loss_gradient(net, pts, Channels::Full, |i, b| {
        let r = b.to_array().iter().zip(c).map(|(v, c)| v * c).sum::<f64>() - y[i];
        (r * r, DerivBundle::from_array(c.map(|c| 2.0 * r * c)))
    })
    .unwrap();
    prop_assert!((value - mixed_loss(net, pts, c, y)).abs() <= 1e-12 * value.max(1.0));
    let floor = 1e-3 * grad.norm_inf().max(1e-8);
    let mut probe = net.clone();
    for (j, &g) in grad.as_slice().iter().enumerate() {
        let w = net.as_slice()[j];
        let h = 1e-5 * w.abs().max(1.0);
        probe.as_mut_slice()[j] = w + h;
        let up = mixed_loss(&probe, pts, c, y);
        probe.as_mut_slice()[j] = w - h;
        let down = mixed_loss(&probe, pts, c, y);
        probe.as_mut_slice()[j] = w;
        let fd = (up - down) / (2.0 * h);
        prop_assert!(rel(g, fd, floor) < 1e-6, "param {j}: ad {g} fd {fd}");
    }
    Ok(())
}

fn small_arch() -> impl Strategy<Value = Architecture> {
    (1usize..=3, 1usize..=16).prop_map(|(l, w)| Architecture::new(l, w).unwrap())
}

fn unit_point() -> impl Strategy<Value = SpaceTimePoint> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(x, y, t)| SpaceTimePoint::new(x, y, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn input_derivatives_match_finite_differences(arch in small_arch(), seed in any::<u64>(), p in unit_point()) {
        let net = init_network(arch, seed);
        check_input_derivs(&net, &p)?;
    }

    #[test]
    fn parameter_gradient_matches_finite_differences(
        arch in small_arch(),
        seed in any::<u64>(),
        pts in prop::collection::vec(unit_point(), 1..6),
        c in prop::array::uniform6(-1.0..1.0f64),
        targets in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let net = init_network(arch, seed);
        check_param_gradient(&net, &pts, &c, &targets[..pts.len()])?;
    }

    #[test]
    fn output_map_is_affine_in_network_output(seed in any::<u64>(), p in unit_point(), off in -500.0..500.0f64, s in 0.1..1000.0f64) {
        let net = init_network(Architecture::new(2, 8).unwrap(), seed);
        let norm = Normalization::new((0.0, 20.0), (0.0, 10.0), (0.0, 2.0), off, s).unwrap();
        let phys = norm.denormalize_point(&p);
        let model = PinnModel::new(net.clone(), norm);
        let a = model.temperature(&phys).unwrap();
        let raw = eval_with_input_derivs(&net, &p).unwrap().u;
        prop_assert!((a - (off + s * raw)).abs() <= 1e-9 * (off.abs() + s));
    }

    #[test]
    fn physical_derivatives_follow_chain_rule(seed in any::<u64>(), p in unit_point(), lo in -5.0..5.0f64, len in 0.5..8.0f64) {
        let net = init_network(Architecture::new(2, 8).unwrap(), seed);
        let norm = Normalization::new((lo, lo + 2.0 * len), (0.0, len), (lo, lo + len), 298.0, 500.0).unwrap();
        let model = PinnModel::new(net, norm);
        let q = norm.denormalize_point(&p);
        let b = model.eval(&q).unwrap();
        // Step in physical units, scaled to the interval size.
        let h = 1e-4 * len;
        let at = |x: f64, y: f64, t: f64| model.temperature(&SpaceTimePoint::new(x, y, t)).unwrap();
        let fx = (at(q.x + h, q.y, q.t) - at(q.x - h, q.y, q.t)) / (2.0 * h);
        let ft = (at(q.x, q.y, q.t + h) - at(q.x, q.y, q.t - h)) / (2.0 * h);
        let fyy = (at(q.x, q.y + h, q.t) - 2.0 * b.u + at(q.x, q.y - h, q.t)) / (h * h);
        let scale = 500.0 / len;
        prop_assert!(rel(b.du_dx, fx, scale * 1e-2) < 1e-5);
        prop_assert!(rel(b.du_dt, ft, scale * 1e-2) < 1e-5);
        prop_assert!(rel(b.d2u_dy2, fyy, scale / len * 1e-2) < 1e-3, "{} {}", b.d2u_dy2, fyy);
    }

    #[test]
    fn normalization_round_trips(p in unit_point(), lo in -100.0..100.0f64, len in 1e-3..1e3f64) {
        let norm = Normalization::new((lo, lo + len), (lo, lo + 2.0 * len), (0.0, len), 298.0, 500.0).unwrap();
        let back = norm.normalize_point(&norm.denormalize_point(&p));
        prop_assert!((back.x - p.x).abs() < 1e-9 && (back.y - p.y).abs() < 1e-9 && (back.t - p.t).abs() < 1e-9);
        let u = 298.0 + 500.0 * p.x;
        prop_assert!((norm.denormalize_output(norm.normalize_output(u)) - u).abs() < 1e-9);
    }

    #[test]
    fn batching_does_not_change_values(seed in any::<u64>(), pts in prop::collection::vec(unit_point(), 1..40)) {
        let net = init_network(Architecture::new(2, 16).unwrap(), seed);
        let all = eval_batch(&net, &pts, Channels::Full).unwrap();
        for (p, b) in pts.iter().zip(&all) {
            prop_assert_eq!(eval_with_input_derivs(&net, p).unwrap(), *b);
        }
    }
}

#[test]
fn three_layer_network_at_fixed_point() {
    let net = init_network(Architecture::new(2, 10).unwrap(), 42);
    let p = SpaceTimePoint::new(1.0, 0.5, 0.2);
    check_input_derivs(&net, &p).unwrap();
}

#[test]
fn residual_loss_gradient_on_two_by_eight() {
    // Residual-style loss γ u_t − k (u_xx + u_yy) − f on 16 fixed points.
    let net = init_network(Architecture::new(2, 8).unwrap(), 7);
    let pts: Vec<_> = (0..16)
        .map(|i| {
            let s = i as f64 / 15.0;
            SpaceTimePoint::new(2.0 * s - 1.0, 0.7 - 1.4 * s * s, 0.5 * s - 0.25)
        })
        .collect();
    let (g, k) = (5.0e-3, 0.025);
    let f = |p: &SpaceTimePoint| 0.1 * (p.x * p.x + p.y);
    let loss = |net: &NetworkParams| -> f64 {
        eval_batch(net, &pts, Channels::Full)
            .unwrap()
            .iter()
            .zip(&pts)
            .map(|(b, p)| (g * b.du_dt - k * b.laplacian() - f(p)).powi(2))
            .sum()
    };
    let (value, grad) = loss_gradient(&net, &pts, Channels::Full, |i, b| {
        let r = g * b.du_dt - k * b.laplacian() - f(&pts[i]);
        let adj = DerivBundle {
            du_dt: 2.0 * r * g,
            d2u_dx2: -2.0 * r * k,
            d2u_dy2: -2.0 * r * k,
            ..DerivBundle::ZERO
        };
        (r * r, adj)
    })
    .unwrap();
    assert!((value - loss(&net)).abs() < 1e-14);
    let floor = 1e-3 * grad.norm_inf();
    let mut probe = net.clone();
    for j in 0..net.len() {
        let w = net.as_slice()[j];
        let h = 1e-5 * w.abs().max(1.0);
        probe.as_mut_slice()[j] = w + h;
        let up = loss(&probe);
        probe.as_mut_slice()[j] = w - h;
        let down = loss(&probe);
        probe.as_mut_slice()[j] = w;
        let fd = (up - down) / (2.0 * h);
        assert!(rel(grad.as_slice()[j], fd, floor) < 1e-6, "param {j}");
    }
}
