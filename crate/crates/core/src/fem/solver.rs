use alloc::vec;
use alloc::vec::Vec;

use super::assembly::{assemble, assemble_load, SourceField};
use super::mesh::{generate_mesh, FemMesh};
use super::sparse::{cg_solve, CsrMatrix};
use super::FemError;
use crate::autodiff::SpaceTimePoint;
use crate::physics::{DomainSpec, Edge, Problem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemSettings {
    /// Target element size, mm.
    pub h: f64,
    /// Time step, s.
    pub dt: f64,
    /// Final time, s.
    pub t_end: f64,
    /// Relative residual tolerance of each linear solve.
    pub tolerance: f64,
    pub lumped_mass: bool,
}

impl Default for FemSettings {
    fn default() -> Self {
        Self {
            h: 0.25,
            dt: 0.1,
            t_end: 8.0,
            tolerance: 1e-10,
            lumped_mass: false,
        }
    }
}

impl FemSettings {
    pub fn validate(&self) -> Result<(), FemError> {
        let bad = |field, reason| Err(FemError::InvalidSetting { field, reason });
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h", "must be positive");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt", "must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end", "must be positive");
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return bad("tolerance", "must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Nodal temperatures on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub mesh: FemMesh,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `temperatures[n]` holds every node at `times[n]`.
    pub temperatures: Vec<Vec<f64>>,
}

impl FemSolution {
    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("solution has at least one step")
    }

    pub fn num_steps(&self) -> usize {
        self.times.len()
    }

    /// Step index closest to `t`.
    pub fn nearest_step(&self, t: f64) -> usize {
        let k = libm::round(t / self.dt).max(0.0) as usize;
        k.min(self.times.len() - 1)
    }

    /// Barycentric in space, linear between the two bracketing steps in time.
    pub fn interpolate(&self, p: &SpaceTimePoint) -> Result<f64, FemError> {
        let t_end = self.t_end();
        let eps = 1e-9 * self.dt;
        if !(p.t >= -eps && p.t <= t_end + eps) {
            return Err(FemError::TimeOutOfRange { t: p.t, t_end });
        }
        let (tri, w) = self.mesh.locate(p.x, p.y)?;
        let nodes = self.mesh.triangles[tri];
        let at = |step: usize| -> f64 {
            let u = &self.temperatures[step];
            w[0] * u[nodes[0]] + w[1] * u[nodes[1]] + w[2] * u[nodes[2]]
        };
        let last = self.times.len() - 1;
        let s = (p.t / self.dt).clamp(0.0, last as f64);
        let k = (libm::floor(s) as usize).min(last);
        let frac = s - k as f64;
        if k == last || frac == 0.0 {
            return Ok(at(k));
        }
        Ok((1.0 - frac) * at(k) + frac * at(k + 1))
    }
}

/// Nodes on Dirichlet edges with their values, sorted by node id. A corner
/// shared by two Dirichlet edges takes the first edge's value in
/// [`Edge::ALL`] order.
pub fn dirichlet_nodes(mesh: &FemMesh, domain: &DomainSpec) -> Vec<(usize, f64)> {
    let mut value: Vec<Option<f64>> = vec![None; mesh.num_nodes()];
    for edge in Edge::ALL {
        let crate::physics::EdgeCondition::Dirichlet(v) = domain.condition(edge) else {
            continue;
        };
        for (pair, e) in &mesh.boundary_edges {
            if *e == edge {
                for &n in pair {
                    value[n].get_or_insert(v);
                }
            }
        }
    }
    value
        .into_iter()
        .enumerate()
        .filter_map(|(n, v)| v.map(|v| (n, v)))
        .collect()
}

/// Backward Euler: `(M + Δt·K) uⁿ⁺¹ = M uⁿ + Δt·F(tⁿ⁺¹)` with Dirichlet
/// rows and columns eliminated.
///
/// The step count is `⌈t_end/dt⌉`; the step is shrunk so the grid ends
/// exactly at `t_end`. `temperatures[0]` is `u0` unchanged.
#[allow(clippy::too_many_arguments)]
pub fn backward_euler_solve(
    mesh: &FemMesh,
    mass: &CsrMatrix,
    stiffness: &CsrMatrix,
    load: &mut dyn FnMut(f64) -> Vec<f64>,
    dirichlet: &[(usize, f64)],
    u0: Vec<f64>,
    dt: f64,
    t_end: f64,
    tol: f64,
) -> Result<FemSolution, FemError> {
    let n = mass.dim();
    if u0.len() != n {
        return Err(FemError::DimensionMismatch { expected: n, got: u0.len() });
    }
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(FemError::InvalidSetting {
            field: "dt",
            reason: "time step and final time must be positive",
        });
    }
    let steps = (libm::ceil(t_end / dt - 1e-9) as usize).max(1);
    let dt = t_end / steps as f64;

    let system = mass.add_scaled(stiffness, dt);
    let mut map: Vec<Option<usize>> = vec![None; n];
    let mut fixed = vec![false; n];
    let mut u_bc = vec![0.0; n];
    for &(node, v) in dirichlet {
        fixed[node] = true;
        u_bc[node] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    for (k, &i) in free.iter().enumerate() {
        map[i] = Some(k);
    }
    let reduced = system.restrict(&map, free.len());
    let correction = system.mul(&u_bc);

    let mut times = Vec::with_capacity(steps + 1);
    let mut temperatures = Vec::with_capacity(steps + 1);
    times.push(0.0);
    temperatures.push(u0);
    for step in 1..=steps {
        let t = if step == steps { t_end } else { step as f64 * dt };
        let prev = temperatures.last().expect("initial state present");
        let f = load(t);
        if f.len() != n {
            return Err(FemError::DimensionMismatch { expected: n, got: f.len() });
        }
        let mu = mass.mul(prev);
        let mut next = u_bc.clone();
        if !free.is_empty() {
            let rhs: Vec<f64> = free.iter().map(|&i| mu[i] + dt * f[i] - correction[i]).collect();
            let guess: Vec<f64> = free.iter().map(|&i| prev[i]).collect();
            let sol = cg_solve(&reduced, &rhs, Some(&guess), tol)?;
            for (k, &i) in free.iter().enumerate() {
                next[i] = sol.x[k];
            }
        }
        times.push(t);
        temperatures.push(next);
    }
    Ok(FemSolution {
        mesh: mesh.clone(),
        dt,
        times,
        temperatures,
    })
}

/// Full pipeline for a [`Problem`]: mesh, assemble, step from the uniform
/// initial temperature.
pub fn solve_problem(problem: &Problem, settings: &FemSettings) -> Result<FemSolution, FemError> {
    solve_with_source(problem, settings, &problem.source)
}

/// As [`solve_problem`] with an arbitrary source field in place of the
/// Gaussian.
pub fn solve_with_source(
    problem: &Problem,
    settings: &FemSettings,
    source: &dyn SourceField,
) -> Result<FemSolution, FemError> {
    settings.validate()?;
    let mesh = generate_mesh(&problem.domain, settings.h)?;
    let (m, k) = assemble(&mesh, &problem.material, settings.lumped_mass)?;
    let bc = dirichlet_nodes(&mesh, &problem.domain);
    let u0 = vec![problem.initial_temperature; mesh.num_nodes()];
    let domain = problem.domain;
    let mut load = |t: f64| assemble_load(&mesh, source, &domain, t);
    backward_euler_solve(&mesh, &m, &k, &mut load, &bc, u0, settings.dt, settings.t_end, settings.tolerance)
}

/// `‖u_h − u*‖_{L2}` with the mid-edge rule on every triangle.
pub fn l2_error(mesh: &FemMesh, u: &[f64], exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    let mut sum = 0.0;
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(e);
        let area = super::mesh::signed_area(&v);
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let (x, y) = (0.5 * (v[a].0 + v[b].0), 0.5 * (v[a].1 + v[b].1));
            let uh = 0.5 * (u[tri[a]] + u[tri[b]]);
            let d = uh - exact(x, y);
            sum += area / 3.0 * d * d;
        }
    }
    libm::sqrt(sum)
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{EdgeCondition, MaterialProps, SourceSpec};

    fn quiet_problem() -> Problem {
        Problem {
            domain: DomainSpec::rectangle(4.0, 2.0, 298.0, 0.0),
            material: MaterialProps::new(0.025, 7.6e-6, 658.0).unwrap(),
            source: SourceSpec {
                peak_power: 0.0,
                radius: 1.0,
                velocity: 2.0,
                start: (0.0, 1.0),
                direction: (1.0, 0.0),
            },
            initial_temperature: 298.0,
        }
    }

    #[test]
    fn equilibrium_is_preserved() {
        let p = quiet_problem();
        let s = FemSettings {
            h: 0.5,
            dt: 0.1,
            t_end: 1.0,
            ..FemSettings::default()
        };
        let sol = solve_problem(&p, &s).unwrap();
        assert_eq!(sol.num_steps(), 11);
        for u in &sol.temperatures {
            assert!(u.iter().all(|&v| (v - 298.0).abs() < 1e-10));
        }
    }

    #[test]
    fn dirichlet_nodes_on_left_edge() {
        let p = quiet_problem();
        let mesh = generate_mesh(&p.domain, 0.5).unwrap();
        let bc = dirichlet_nodes(&mesh, &p.domain);
        assert_eq!(bc.len(), mesh.ny + 1);
        assert!(bc.iter().all(|&(n, v)| mesh.nodes[n].0 == 0.0 && v == 298.0));
    }

    #[test]
    fn interpolation_rules() {
        let p = quiet_problem();
        let mesh = generate_mesh(&p.domain, 1.0).unwrap();
        let n = mesh.num_nodes();
        let step0: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let step1: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + 1.0).collect();
        let sol = FemSolution {
            mesh: mesh.clone(),
            dt: 0.5,
            times: vec![0.0, 0.5],
            temperatures: vec![step0.clone(), step1.clone()],
        };
        let (x, y) = mesh.nodes[7];
        assert_eq!(sol.interpolate(&SpaceTimePoint::new(x, y, 0.5)).unwrap(), step1[7]);
        let tri = mesh.triangles[3];
        let v = mesh.vertices(3);
        let c = ((v[0].0 + v[1].0 + v[2].0) / 3.0, (v[0].1 + v[1].1 + v[2].1) / 3.0);
        let u = sol.interpolate(&SpaceTimePoint::new(c.0, c.1, 0.0)).unwrap();
        let mean = (step0[tri[0]] + step0[tri[1]] + step0[tri[2]]) / 3.0;
        assert!((u - mean).abs() < 1e-12);
        let u = sol.interpolate(&SpaceTimePoint::new(x, y, 0.25)).unwrap();
        assert!((u - 0.5 * (step0[7] + step1[7])).abs() < 1e-12);
        assert!(matches!(
            sol.interpolate(&SpaceTimePoint::new(x, y, 0.6)),
            Err(FemError::TimeOutOfRange { .. })
        ));
        assert!(matches!(
            sol.interpolate(&SpaceTimePoint::new(-1.0, y, 0.1)),
            Err(FemError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn insulated_energy_balance_is_first_order() {
        // No Dirichlet edge, zero flux: Σ M(uⁿ⁺¹ − uⁿ) = Δt ΣF(tⁿ⁺¹) exactly,
        // so the energy defect against ∫∫f is the rectangle-rule error in time.
        let mut p = quiet_problem();
        p.domain.set_condition(Edge::AD, EdgeCondition::Neumann(0.0));
        p.domain = DomainSpec { length: 6.0, width: 4.0, ..p.domain };
        p.source = SourceSpec {
            peak_power: 5.0,
            radius: 0.6,
            velocity: 2.0,
            start: (-0.5, 2.0),
            direction: (1.0, 0.0),
        };
        let t_end = 1.0;
        let mesh = generate_mesh(&p.domain, 0.25).unwrap();
        // Reference ∫₀ᵀ ΣF(t) dt by composite Simpson on a fine grid.
        let nref = 400;
        let total_load = |t: f64| assemble_load(&mesh, &p.source, &p.domain, t).iter().sum::<f64>();
        let href = t_end / nref as f64;
        let mut reference = total_load(0.0) + total_load(t_end);
        for i in 1..nref {
            reference += if i % 2 == 1 { 4.0 } else { 2.0 } * total_load(i as f64 * href);
        }
        reference *= href / 3.0;

        let defect = |dt: f64| {
            let s = FemSettings {
                h: 0.25,
                dt,
                t_end,
                tolerance: 1e-13,
                lumped_mass: false,
            };
            let sol = solve_problem(&p, &s).unwrap();
            let (m, _) = assemble(&sol.mesh, &p.material, false).unwrap();
            let energy = |u: &[f64]| m.mul(u).iter().sum::<f64>();
            let gained = energy(&sol.temperatures[sol.num_steps() - 1]) - energy(&sol.temperatures[0]);
            (gained - reference).abs()
        };
        let (d1, d2) = (defect(0.1), defect(0.05));
        let ratio = d1 / d2;
        assert!((1.7..2.3).contains(&ratio), "defects {d1:e} {d2:e}, ratio {ratio}");
    }

    #[test]
    fn stability_under_step_doubling() {
        // Smooth hot bump relaxing towards the 298 K edge, no source.
        let p = quiet_problem();
        let mesh = generate_mesh(&p.domain, 0.25).unwrap();
        let (m, k) = assemble(&mesh, &p.material, false).unwrap();
        let bc = dirichlet_nodes(&mesh, &p.domain);
        let u0: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|&(x, y)| {
                let s = libm::sin(core::f64::consts::PI * x / 8.0);
                298.0 + 50.0 * s * s * (0.75 + 0.25 * libm::cos(core::f64::consts::PI * y / 2.0))
            })
            .collect();
        let hi = u0.iter().cloned().fold(f64::MIN, f64::max);
        let run = |dt: f64| {
            let mut load = |_t: f64| vec![0.0; mesh.num_nodes()];
            backward_euler_solve(&mesh, &m, &k, &mut load, &bc, u0.clone(), dt, 2.0, 1e-12).unwrap()
        };
        let (a, b) = (run(0.2), run(0.1));
        for sol in [&a, &b] {
            for u in &sol.temperatures {
                assert!(u.iter().all(|&v| v >= 298.0 - 1e-8 && v <= hi + 1e-8));
            }
        }
        let end_a = &a.temperatures[a.num_steps() - 1];
        let end_b = &b.temperatures[b.num_steps() - 1];
        let diff = end_a.iter().zip(end_b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 0.05 * (hi - 298.0), "{diff}");
        // Probe temperature decays monotonically.
        let centre = mesh.nodes.iter().position(|&(x, y)| x == 4.0 && y == 1.0).unwrap();
        for sol in [&a, &b] {
            assert!(sol.temperatures.windows(2).all(|w| w[1][centre] <= w[0][centre] + 1e-12));
        }
    }
}
