use alloc::vec::Vec;

use super::FemError;
use crate::physics::{DomainSpec, Edge};

/// Structured triangulation of the rectangle.
///
/// Node `(i, j)` sits at `(i·dx, j·dy)` with index `j·(nx+1) + i`. Cell
/// `(i, j)` is split along its rising diagonal into triangles
/// `2·(j·nx+i)` (below) and `2·(j·nx+i)+1` (above), both counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct FemMesh {
    pub nodes: Vec<(f64, f64)>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary segments and the edge they lie on.
    pub boundary_edges: Vec<([usize; 2], Edge)>,
    /// Requested element size.
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    pub width: f64,
}

pub fn generate_mesh(d: &DomainSpec, h: f64) -> Result<FemMesh, FemError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(FemError::InvalidSetting {
            field: "h",
            reason: "must be positive",
        });
    }
    if !(d.length > 0.0 && d.width > 0.0) {
        return Err(FemError::InvalidSetting {
            field: "domain",
            reason: "length and width must be positive",
        });
    }
    let nx = (libm::round(d.length / h) as usize).max(1);
    let ny = (libm::round(d.width / h) as usize).max(1);
    let (dx, dy) = (d.length / nx as f64, d.width / ny as f64);
    let id = |i: usize, j: usize| j * (nx + 1) + i;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Snap the last row/column exactly onto the boundary.
            let x = if i == nx { d.length } else { i as f64 * dx };
            let y = if j == ny { d.width } else { j as f64 * dy };
            nodes.push((x, y));
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n11, n01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(([id(i, 0), id(i + 1, 0)], Edge::AB));
    }
    for j in 0..ny {
        boundary_edges.push(([id(nx, j), id(nx, j + 1)], Edge::BC));
    }
    for i in (0..nx).rev() {
        boundary_edges.push(([id(i + 1, ny), id(i, ny)], Edge::CD));
    }
    for j in (0..ny).rev() {
        boundary_edges.push(([id(0, j + 1), id(0, j)], Edge::AD));
    }

    Ok(FemMesh {
        nodes,
        triangles,
        boundary_edges,
        h,
        nx,
        ny,
        length: d.length,
        width: d.width,
    })
}

impl FemMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.length / self.nx as f64, self.width / self.ny as f64)
    }

    pub fn vertices(&self, tri: usize) -> [(f64, f64); 3] {
        let [a, b, c] = self.triangles[tri];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    /// Signed area, positive for counter-clockwise triangles.
    pub fn signed_area(&self, tri: usize) -> f64 {
        signed_area(&self.vertices(tri))
    }

    /// Containing triangle and barycentric weights of `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Result<(usize, [f64; 3]), FemError> {
        let tol = 1e-12 * self.length.max(self.width);
        if !(x >= -tol && x <= self.length + tol && y >= -tol && y <= self.width + tol) {
            return Err(FemError::OutsideDomain { x, y });
        }
        let (dx, dy) = self.spacing();
        let i = ((libm::floor(x / dx)).max(0.0) as usize).min(self.nx - 1);
        let j = ((libm::floor(y / dy)).max(0.0) as usize).min(self.ny - 1);
        let cell = j * self.nx + i;
        let (x0, y0) = self.nodes[j * (self.nx + 1) + i];
        let above = (y - y0) / dy > (x - x0) / dx;
        let tri = 2 * cell + usize::from(above);
        Ok((tri, barycentric(&self.vertices(tri), x, y)))
    }
}

pub(crate) fn signed_area(v: &[(f64, f64); 3]) -> f64 {
    let [(x0, y0), (x1, y1), (x2, y2)] = *v;
    0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
}

pub(crate) fn barycentric(v: &[(f64, f64); 3], x: f64, y: f64) -> [f64; 3] {
    let a = signed_area(v);
    let l0 = signed_area(&[(x, y), v[1], v[2]]) / a;
    let l1 = signed_area(&[v[0], (x, y), v[2]]) / a;
    [l0, l1, 1.0 - l0 - l1]
}
