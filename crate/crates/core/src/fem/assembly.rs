use alloc::vec;
use alloc::vec::Vec;

use super::mesh::{signed_area, FemMesh};
use super::sparse::CsrMatrix;
use super::FemError;
use crate::autodiff::SpaceTimePoint;
use crate::physics::{DomainSpec, EdgeCondition, MaterialProps, SourceSpec};

/// Volumetric heat source `f(x, y, t)` in W/mm³.
pub trait SourceField {
    fn value(&self, x: f64, y: f64, t: f64) -> f64;
}

impl SourceField for SourceSpec {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        crate::physics::source_value(self, &SpaceTimePoint::new(x, y, t))
    }
}

impl<F: Fn(f64, f64, f64) -> f64> SourceField for F {
    fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self(x, y, t)
    }
}

/// `k·Bᵀ B·A` for a linear triangle.
pub fn element_stiffness(v: &[(f64, f64); 3], k: f64) -> Option<[[f64; 3]; 3]> {
    let area = signed_area(v);
    if !(area > 0.0) {
        return None;
    }
    let [(x0, y0), (x1, y1), (x2, y2)] = *v;
    let b = [y1 - y2, y2 - y0, y0 - y1];
    let c = [x2 - x1, x0 - x2, x1 - x0];
    let s = k / (4.0 * area);
    Some(core::array::from_fn(|i| core::array::from_fn(|j| s * (b[i] * b[j] + c[i] * c[j]))))
}

/// Consistent mass `γ·A/12·[[2,1,1],[1,2,1],[1,1,2]]`.
pub fn element_mass(area: f64, gamma: f64) -> [[f64; 3]; 3] {
    let s = gamma * area / 12.0;
    core::array::from_fn(|i| core::array::from_fn(|j| if i == j { 2.0 * s } else { s }))
}

/// Global mass and stiffness matrices. With `lumped`, each mass row is
/// collapsed onto the diagonal.
pub fn assemble(mesh: &FemMesh, m: &MaterialProps, lumped: bool) -> Result<(CsrMatrix, CsrMatrix), FemError> {
    let n = mesh.num_nodes();
    let mut mt = Vec::with_capacity(9 * mesh.num_triangles());
    let mut kt = Vec::with_capacity(9 * mesh.num_triangles());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(e);
        let area = signed_area(&v);
        let (cx, cy) = ((v[0].0 + v[1].0 + v[2].0) / 3.0, (v[0].1 + v[1].1 + v[2].1) / 3.0);
        let ke = element_stiffness(&v, m.conductivity_at(cx, cy))
            .ok_or(FemError::DegenerateElement { triangle: e, area })?;
        let me = element_mass(area, m.gamma_at(cx, cy));
        for i in 0..3 {
            if lumped {
                mt.push((tri[i], tri[i], me[i].iter().sum()));
            }
            for j in 0..3 {
                if !lumped {
                    mt.push((tri[i], tri[j], me[i][j]));
                }
                kt.push((tri[i], tri[j], ke[i][j]));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n, &mt), CsrMatrix::from_triplets(n, &kt)))
}

/// Load vector at time `t`: source integrated with the three-point
/// mid-edge rule, plus `q̂·len/2` per node of every Neumann boundary segment.
pub fn assemble_load(mesh: &FemMesh, source: &dyn SourceField, domain: &DomainSpec, t: f64) -> Vec<f64> {
    let mut f = vec![0.0; mesh.num_nodes()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(e);
        let area = signed_area(&v);
        let mid = |a: usize, b: usize| source.value(0.5 * (v[a].0 + v[b].0), 0.5 * (v[a].1 + v[b].1), t);
        let (f01, f12, f20) = (mid(0, 1), mid(1, 2), mid(2, 0));
        let w = area / 6.0;
        f[tri[0]] += w * (f01 + f20);
        f[tri[1]] += w * (f01 + f12);
        f[tri[2]] += w * (f12 + f20);
    }
    for (pair, edge) in &mesh.boundary_edges {
        if let EdgeCondition::Neumann(q) = domain.condition(*edge) {
            if q == 0.0 {
                continue;
            }
            let (a, b) = (mesh.nodes[pair[0]], mesh.nodes[pair[1]]);
            let half = 0.5 * q * libm::hypot(b.0 - a.0, b.1 - a.1);
            f[pair[0]] += half;
            f[pair[1]] += half;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::generate_mesh;
    use crate::physics::{Edge, EdgeCondition};

    #[test]
    fn unit_right_triangle_stiffness() {
        let k = element_stiffness(&[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], 1.0).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!(element_stiffness(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], 1.0).is_none());
        assert!(element_stiffness(&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)], 1.0).is_none());
    }

    #[test]
    fn mass_rows_sum_to_a_third() {
        let me = element_mass(0.7, 5.0008e-3);
        for row in me {
            let s: f64 = row.iter().sum();
            assert!((s - 5.0008e-3 * 0.7 / 3.0).abs() < 1e-18);
        }
    }

    fn material() -> MaterialProps {
        MaterialProps::new(0.025, 7.6e-6, 658.0).unwrap()
    }

    #[test]
    fn global_matrices_properties() {
        let d = DomainSpec::rectangle(4.0, 2.0, 298.0, 0.001);
        let mesh = generate_mesh(&d, 0.5).unwrap();
        let (m, k) = assemble(&mesh, &material(), false).unwrap();
        assert!(m.is_symmetric(1e-14) && k.is_symmetric(1e-14));
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-15));
        let total_mass: f64 = m.row_sums().iter().sum();
        assert!((total_mass - material().gamma() * 8.0).abs() < 1e-14);
        let (ml, _) = assemble(&mesh, &material(), true).unwrap();
        assert_eq!(ml.nnz(), mesh.num_nodes());
        assert!((ml.row_sums().iter().sum::<f64>() - total_mass).abs() < 1e-14);
    }

    #[test]
    fn zero_source_zero_flux_gives_zero_load() {
        let d = DomainSpec::rectangle(4.0, 2.0, 298.0, 0.0);
        let mesh = generate_mesh(&d, 0.5).unwrap();
        let src = SourceSpec {
            peak_power: 0.0,
            radius: 1.0,
            velocity: 2.0,
            start: (0.0, 1.0),
            direction: (1.0, 0.0),
        };
        assert!(assemble_load(&mesh, &src, &d, 0.3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_neumann_segment() {
        let mut d = DomainSpec::rectangle(1.0, 1.0, 298.0, 0.0);
        d.set_condition(Edge::AD, EdgeCondition::Neumann(0.0));
        d.set_condition(Edge::AB, EdgeCondition::Neumann(0.001));
        let mesh = generate_mesh(&d, 1.0).unwrap();
        let f = assemble_load(&mesh, &|_: f64, _: f64, _: f64| 0.0, &d, 0.0);
        // AB runs from node 0 to node 1.
        assert_eq!(f, [0.0005, 0.0005, 0.0, 0.0]);
    }

    #[test]
    fn gaussian_integral_matches_closed_form() {
        // ∫∫ Q0 exp(−r²/r0²) = Q0·π·r0² on the plane; the mesh spans ±10 r0.
        let d = DomainSpec::rectangle(20.0, 20.0, 298.0, 0.0);
        let src = SourceSpec {
            peak_power: 5.0,
            radius: 1.0,
            velocity: 0.0,
            start: (10.0, 10.0),
            direction: (1.0, 0.0),
        };
        let exact = 5.0 * core::f64::consts::PI;
        for h in [0.25, 0.125] {
            let mesh = generate_mesh(&d, h).unwrap();
            let total: f64 = assemble_load(&mesh, &src, &d, 0.0).iter().sum();
            assert!(((total - exact) / exact).abs() < 0.02, "h={h}: {total} vs {exact}");
        }
    }
}
