use heatpinn_core::fem::mms::{observed_orders, ManufacturedCase};
use heatpinn_core::fem::{assemble, solve_problem, FemSettings};
use heatpinn_core::{DomainSpec, MaterialProps, Problem, SourceSpec};

fn steel() -> MaterialProps {
    MaterialProps::new(0.025, 7.6e-6, 658.0).unwrap()
}

#[test]
fn manufactured_solution_is_second_order_in_space() {
    let case = ManufacturedCase {
        length: 20.0,
        width: 10.0,
        material: steel(),
        base: 298.0,
    };
    let study = case.spatial_study(&[2.0, 1.0, 0.5], 0.01, 0.5).unwrap();
    let orders = observed_orders(&study);
    assert!(orders.iter().all(|&p| p >= 1.8), "{study:?} {orders:?}");
}

#[test]
fn backward_euler_is_first_order_in_time() {
    let problem = Problem {
        domain: DomainSpec::rectangle(8.0, 4.0, 298.0, 0.001),
        material: steel(),
        source: SourceSpec {
            peak_power: 5.0,
            radius: 1.0,
            velocity: 2.0,
            start: (0.0, 2.0),
            direction: (1.0, 0.0),
        },
        initial_temperature: 298.0,
    };
    let run = |dt: f64| {
        let s = FemSettings {
            h: 0.5,
            dt,
            t_end: 1.0,
            tolerance: 1e-12,
            lumped_mass: false,
        };
        let sol = solve_problem(&problem, &s).unwrap();
        sol.temperatures[sol.num_steps() - 1].clone()
    };
    let reference = run(1.0 / 640.0);
    let mesh = heatpinn_core::fem::generate_mesh(&problem.domain, 0.5).unwrap();
    let (m, _) = assemble(&mesh, &problem.material, false).unwrap();
    // Error in the mass-matrix norm.
    let err = |u: &[f64]| {
        let d: Vec<f64> = u.iter().zip(&reference).map(|(a, b)| a - b).collect();
        m.mul(&d).iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().sqrt()
    };
    let study: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&dt| (dt, err(&run(dt)))).collect();
    let orders = observed_orders(&study);
    assert!(orders.iter().all(|&p| p >= 0.9), "{study:?} {orders:?}");
}

#[test]
fn refinement_reduces_discrepancy_between_meshes() {
    let problem = Problem {
        domain: DomainSpec::rectangle(8.0, 4.0, 298.0, 0.001),
        material: steel(),
        source: SourceSpec {
            peak_power: 5.0,
            radius: 1.0,
            velocity: 2.0,
            start: (0.0, 2.0),
            direction: (1.0, 0.0),
        },
        initial_temperature: 298.0,
    };
    let solve = |h: f64| {
        let s = FemSettings { h, dt: 0.05, t_end: 1.0, ..FemSettings::default() };
        solve_problem(&problem, &s).unwrap()
    };
    let fine = solve(0.125);
    let probe = |sol: &heatpinn_core::fem::FemSolution| -> f64 {
        let mut sum = 0.0;
        for i in 0..=16 {
            for j in 0..=8 {
                let p = heatpinn_core::SpaceTimePoint::new(0.5 * i as f64, 0.5 * j as f64, 1.0);
                sum += (sol.interpolate(&p).unwrap() - fine.interpolate(&p).unwrap()).powi(2);
            }
        }
        sum.sqrt()
    };
    let (coarse, mid) = (probe(&solve(1.0)), probe(&solve(0.5)));
    assert!(mid < coarse, "{coarse} {mid}");
}
