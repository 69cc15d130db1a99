//! Manufactured-solution convergence studies.
//!
//! Exact field `u* = base + t·sin(πx/L)·sin(πy/W)` with Dirichlet `base` on
//! every edge; the source is obtained by substitution into
//! `γ u_t − k ∇²u = f`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use super::solver::{l2_error, solve_with_source, FemSettings};
use super::FemError;
use crate::physics::{DomainSpec, Edge, EdgeCondition, MaterialProps, Problem, SourceSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCase {
    pub length: f64,
    pub width: f64,
    pub material: MaterialProps,
    pub base: f64,
}

impl ManufacturedCase {
    pub fn exact(&self, x: f64, y: f64, t: f64) -> f64 {
        self.base + t * self.shape(x, y)
    }

    pub fn source(&self, x: f64, y: f64, t: f64) -> f64 {
        let (k, g) = (self.material.conductivity, self.material.gamma());
        let (a, b) = (PI / self.length, PI / self.width);
        let lap = a * a + b * b;
        (g + k * t * lap) * self.shape(x, y)
    }

    fn shape(&self, x: f64, y: f64) -> f64 {
        libm::sin(PI * x / self.length) * libm::sin(PI * y / self.width)
    }

    fn problem(&self) -> Problem {
        let mut domain = DomainSpec::rectangle(self.length, self.width, self.base, 0.0);
        for edge in Edge::ALL {
            domain.set_condition(edge, EdgeCondition::Dirichlet(self.base));
        }
        Problem {
            domain,
            material: self.material,
            // Unused: the manufactured source replaces it.
            source: SourceSpec {
                peak_power: 0.0,
                radius: 1.0,
                velocity: 0.0,
                start: (0.0, 0.0),
                direction: (1.0, 0.0),
            },
            initial_temperature: self.base,
        }
    }

    /// L2 error at `t_end` for each mesh size.
    pub fn spatial_study(&self, hs: &[f64], dt: f64, t_end: f64) -> Result<Vec<(f64, f64)>, FemError> {
        let problem = self.problem();
        let source = |x: f64, y: f64, t: f64| self.source(x, y, t);
        hs.iter()
            .map(|&h| {
                let s = FemSettings {
                    h,
                    dt,
                    t_end,
                    tolerance: 1e-12,
                    lumped_mass: false,
                };
                let sol = solve_with_source(&problem, &s, &source)?;
                let last = &sol.temperatures[sol.num_steps() - 1];
                let err = l2_error(&sol.mesh, last, &|x, y| self.exact(x, y, t_end));
                Ok((h, err))
            })
            .collect()
    }
}

/// `log(e_i/e_{i+1}) / log(h_i/h_{i+1})` for consecutive pairs.
pub fn observed_orders(study: &[(f64, f64)]) -> Vec<f64> {
    study
        .windows(2)
        .map(|w| libm::log(w[0].1 / w[1].1) / libm::log(w[0].0 / w[1].0))
        .collect()
}
