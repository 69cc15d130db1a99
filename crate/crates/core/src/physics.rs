//! Problem definition and the PINN loss terms.
//!
//! The governing equation is `γ ∂u/∂t − ∇·(k ∇u) = f` on a rectangle
//! `[0, L] × [0, W]`, with `f` a Gaussian source moving along a straight line.
//! Corners are `A = (0,0)`, `B = (L,0)`, `C = (L,W)`, `D = (0,W)`; every edge
//! carries either a Dirichlet temperature or a Neumann flux `k ∇u·n = q̂`.

use alloc::vec::Vec;

use thiserror::Error;

use crate::autodiff::{accumulate_loss_gradient, AutodiffError, Channels, DerivBundle, ParamGradient, SpaceTimePoint};
use crate::network::PinnModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: &'static str },
    #[error("empty {0} batch")]
    EmptyBatch(&'static str),
    #[error("normal at {point:?} is not unit length")]
    NonUnitNormal { point: SpaceTimePoint },
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

fn check(ok: bool, field: &'static str, reason: &'static str) -> Result<(), PhysicsError> {
    if ok {
        Ok(())
    } else {
        Err(PhysicsError::InvalidParameter { field, reason })
    }
}

/// Homogeneous material constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialProps {
    /// W/mm/°C
    pub conductivity: f64,
    /// kg/mm³
    pub density: f64,
    /// J/kg/°C
    pub specific_heat: f64,
}

impl MaterialProps {
    pub fn new(conductivity: f64, density: f64, specific_heat: f64) -> Result<Self, PhysicsError> {
        let m = Self {
            conductivity,
            density,
            specific_heat,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        check(self.conductivity > 0.0 && self.conductivity.is_finite(), "conductivity", "must be positive")?;
        check(self.density > 0.0 && self.density.is_finite(), "density", "must be positive")?;
        check(self.specific_heat > 0.0 && self.specific_heat.is_finite(), "specific_heat", "must be positive")
    }

    /// Volumetric heat capacity `γ = ρ·C` (J/mm³/°C).
    pub fn gamma(&self) -> f64 {
        self.density * self.specific_heat
    }

    /// Thermal conductivity at a point. Constant for this material model.
    pub fn conductivity_at(&self, _x: f64, _y: f64) -> f64 {
        self.conductivity
    }

    pub fn gamma_at(&self, _x: f64, _y: f64) -> f64 {
        self.gamma()
    }
}

/// Gaussian source `Q0·exp(−r²/r0²)` whose center moves at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSpec {
    /// Peak power density Q0, W/mm³.
    pub peak_power: f64,
    /// r0, mm.
    pub radius: f64,
    /// mm/s
    pub velocity: f64,
    /// Center at t = 0, mm.
    pub start: (f64, f64),
    /// Unit direction of travel.
    pub direction: (f64, f64),
}

impl SourceSpec {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        check(self.peak_power >= 0.0 && self.peak_power.is_finite(), "source.peak_power", "must be >= 0")?;
        check(self.radius > 0.0 && self.radius.is_finite(), "source.radius", "must be positive")?;
        check(self.velocity.is_finite(), "source.velocity", "must be finite")?;
        check(self.start.0.is_finite() && self.start.1.is_finite(), "source.start", "must be finite")?;
        let (dx, dy) = self.direction;
        check(
            libm::fabs(libm::hypot(dx, dy) - 1.0) < 1e-9,
            "source.direction",
            "must be a unit vector",
        )
    }

    /// Center position at time `t`.
    pub fn center(&self, t: f64) -> (f64, f64) {
        source_center(self, t)
    }

    pub fn value(&self, p: &SpaceTimePoint) -> f64 {
        source_value(self, p)
    }
}

pub fn source_center(src: &SourceSpec, t: f64) -> (f64, f64) {
    let d = src.velocity * t;
    (src.start.0 + d * src.direction.0, src.start.1 + d * src.direction.1)
}

pub fn source_value(src: &SourceSpec, p: &SpaceTimePoint) -> f64 {
    let (cx, cy) = source_center(src, p.t);
    let (dx, dy) = (p.x - cx, p.y - cy);
    src.peak_power * libm::exp(-(dx * dx + dy * dy) / (src.radius * src.radius))
}

/// Rectangle edges, named by their end corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Edge {
    /// y = 0
    AB,
    /// x = L
    BC,
    /// y = W
    CD,
    /// x = 0
    AD,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::AB, Edge::BC, Edge::CD, Edge::AD];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::AB => "AB",
            Edge::BC => "BC",
            Edge::CD => "CD",
            Edge::AD => "AD",
        }
    }

    pub fn outward_normal(self) -> (f64, f64) {
        match self {
            Edge::AB => (0.0, -1.0),
            Edge::BC => (1.0, 0.0),
            Edge::CD => (0.0, 1.0),
            Edge::AD => (-1.0, 0.0),
        }
    }

    /// Point on the edge at fraction `s ∈ [0, 1]` from its first corner.
    pub fn point_at(self, length: f64, width: f64, s: f64) -> (f64, f64) {
        match self {
            Edge::AB => (s * length, 0.0),
            Edge::BC => (length, s * width),
            Edge::CD => (length - s * length, width),
            Edge::AD => (0.0, s * width),
        }
    }

    pub fn extent(self, length: f64, width: f64) -> f64 {
        match self {
            Edge::AB | Edge::CD => length,
            Edge::BC | Edge::AD => width,
        }
    }
}

/// Boundary condition on one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeCondition {
    /// Prescribed temperature, K.
    Dirichlet(f64),
    /// Prescribed `k ∇u·n`, W/mm² (positive along the outward normal).
    Neumann(f64),
}

/// Rectangle geometry, edge conditions and the E–F sampling path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    /// Extent along x, mm.
    pub length: f64,
    /// Extent along y, mm.
    pub width: f64,
    /// Indexed by [`Edge::index`].
    pub conditions: [EdgeCondition; 4],
    /// Segment E–F, mm.
    pub path: ((f64, f64), (f64, f64)),
}

impl DomainSpec {
    /// Dirichlet `dirichlet_value` on A–D, Neumann `flux` on the other three
    /// edges, E–F along the horizontal midline.
    pub fn rectangle(length: f64, width: f64, dirichlet_value: f64, flux: f64) -> Self {
        let mut conditions = [EdgeCondition::Neumann(flux); 4];
        conditions[Edge::AD.index()] = EdgeCondition::Dirichlet(dirichlet_value);
        Self {
            length,
            width,
            conditions,
            path: ((0.0, 0.5 * width), (length, 0.5 * width)),
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        check(self.length > 0.0 && self.length.is_finite(), "domain.length", "must be positive")?;
        check(self.width > 0.0 && self.width.is_finite(), "domain.width", "must be positive")?;
        for c in &self.conditions {
            let v = match c {
                EdgeCondition::Dirichlet(v) | EdgeCondition::Neumann(v) => *v,
            };
            check(v.is_finite(), "domain.edges", "boundary values must be finite")?;
        }
        let ((ex, ey), (fx, fy)) = self.path;
        check(
            self.contains(ex, ey) && self.contains(fx, fy),
            "domain.path",
            "E and F must lie in the domain",
        )
    }

    pub fn condition(&self, edge: Edge) -> EdgeCondition {
        self.conditions[edge.index()]
    }

    pub fn set_condition(&mut self, edge: Edge, c: EdgeCondition) {
        self.conditions[edge.index()] = c;
    }

    pub fn dirichlet_edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        Edge::ALL.into_iter().filter_map(|e| match self.condition(e) {
            EdgeCondition::Dirichlet(v) => Some((e, v)),
            EdgeCondition::Neumann(_) => None,
        })
    }

    pub fn neumann_edges(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        Edge::ALL.into_iter().filter_map(|e| match self.condition(e) {
            EdgeCondition::Neumann(q) => Some((e, q)),
            EdgeCondition::Dirichlet(_) => None,
        })
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.length).contains(&x) && (0.0..=self.width).contains(&y)
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * self.length, 0.5 * self.width)
    }
}

/// Everything the residual and boundary terms need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub domain: DomainSpec,
    pub material: MaterialProps,
    pub source: SourceSpec,
    /// Uniform temperature at t = 0, K.
    pub initial_temperature: f64,
}

impl Problem {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        self.domain.validate()?;
        self.material.validate()?;
        self.source.validate()?;
        check(self.initial_temperature.is_finite(), "initial_temperature", "must be finite")
    }
}

/// λ weights of the composite loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub ic: f64,
    pub bc: f64,
    pub residual: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        check(
            [self.ic, self.bc, self.residual].iter().all(|w| *w >= 0.0 && w.is_finite()),
            "loss_weights",
            "must be finite and >= 0",
        )
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            ic: 250.0,
            bc: 250.0,
            residual: 1000.0,
        }
    }
}

/// Units of the residual term in the training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualForm {
    /// `γ u_t − k ∇²u − f`, W/mm³.
    #[default]
    Energy,
    /// The same divided by γ: `u_t − (k/γ) ∇²u − f/γ`, K/s.
    Rate,
}

impl ResidualForm {
    /// Multiplier applied to the energy-form residual.
    pub fn factor(self, m: &MaterialProps) -> f64 {
        match self {
            ResidualForm::Energy => 1.0,
            ResidualForm::Rate => 1.0 / m.gamma(),
        }
    }
}

/// Initial-condition samples: points at the window start and their target
/// temperatures.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InitialConditionData {
    pub points: Vec<SpaceTimePoint>,
    pub targets: Vec<f64>,
}

impl InitialConditionData {
    pub fn uniform(points: Vec<SpaceTimePoint>, value: f64) -> Self {
        let targets = alloc::vec![value; points.len()];
        Self { points, targets }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletSample {
    pub point: SpaceTimePoint,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeumannSample {
    pub point: SpaceTimePoint,
    pub normal: (f64, f64),
    pub flux: f64,
}

/// `γ u_t − k ∇²u − f`.
pub fn pde_residual(b: &DerivBundle, m: &MaterialProps, f: f64) -> f64 {
    m.gamma() * b.du_dt - m.conductivity * b.laplacian() - f
}

fn mean_sq(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(|v| v * v).sum::<f64>() / n as f64
}

/// Mean squared PDE residual over interior points.
pub fn residual_loss(model: &PinnModel, problem: &Problem, batch: &[SpaceTimePoint]) -> Result<f64, PhysicsError> {
    if batch.is_empty() {
        return Err(PhysicsError::EmptyBatch("interior"));
    }
    let bundles = model.eval_batch(batch, Channels::Full)?;
    Ok(mean_sq(
        batch
            .iter()
            .zip(&bundles)
            .map(|(p, b)| pde_residual(b, &problem.material, source_value(&problem.source, p))),
        batch.len(),
    ))
}

/// Mean squared mismatch against the initial-condition targets.
pub fn ic_loss(model: &PinnModel, data: &InitialConditionData) -> Result<f64, PhysicsError> {
    if data.is_empty() {
        return Err(PhysicsError::EmptyBatch("initial-condition"));
    }
    let u = model.temperatures(&data.points)?;
    Ok(mean_sq(u.iter().zip(&data.targets).map(|(u, t)| u - t), data.len()))
}

pub fn bc_loss_dirichlet(model: &PinnModel, batch: &[DirichletSample]) -> Result<f64, PhysicsError> {
    if batch.is_empty() {
        return Err(PhysicsError::EmptyBatch("Dirichlet"));
    }
    let pts: Vec<_> = batch.iter().map(|s| s.point).collect();
    let u = model.temperatures(&pts)?;
    Ok(mean_sq(u.iter().zip(batch).map(|(u, s)| u - s.target), batch.len()))
}

fn check_normals(batch: &[NeumannSample]) -> Result<(), PhysicsError> {
    for s in batch {
        if libm::fabs(libm::hypot(s.normal.0, s.normal.1) - 1.0) > 1e-9 {
            return Err(PhysicsError::NonUnitNormal { point: s.point });
        }
    }
    Ok(())
}

/// Mean of `(k ∇u·n − q̂)²`.
pub fn bc_loss_neumann(model: &PinnModel, material: &MaterialProps, batch: &[NeumannSample]) -> Result<f64, PhysicsError> {
    if batch.is_empty() {
        return Err(PhysicsError::EmptyBatch("Neumann"));
    }
    check_normals(batch)?;
    let pts: Vec<_> = batch.iter().map(|s| s.point).collect();
    let bundles = model.eval_batch(&pts, Channels::Gradient)?;
    Ok(mean_sq(
        bundles.iter().zip(batch).map(|(b, s)| {
            material.conductivity * (b.du_dx * s.normal.0 + b.du_dy * s.normal.1) - s.flux
        }),
        batch.len(),
    ))
}

/// `λ_ic L_ic + λ_bc L_bc + λ_r L_r`.
pub fn total_loss(weights: &LossWeights, l_ic: f64, l_bc: f64, l_r: f64) -> f64 {
    weights.ic * l_ic + weights.bc * l_bc + weights.residual * l_r
}

/// Unweighted loss components; `bc` is the Dirichlet plus Neumann term.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub ic: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub residual: f64,
}

impl LossComponents {
    pub fn bc(&self) -> f64 {
        self.dirichlet + self.neumann
    }

    pub fn total(&self, w: &LossWeights) -> f64 {
        total_loss(w, self.ic, self.bc(), self.residual)
    }

    pub fn is_finite(&self) -> bool {
        self.ic.is_finite() && self.dirichlet.is_finite() && self.neumann.is_finite() && self.residual.is_finite()
    }
}

/// All sample sets for one optimizer step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingBatch {
    pub interior: Vec<SpaceTimePoint>,
    pub dirichlet: Vec<DirichletSample>,
    pub neumann: Vec<NeumannSample>,
    pub initial: InitialConditionData,
}

/// Loss components and the exact gradient of the weighted total.
///
/// Terms with zero weight are skipped (reported as 0). Empty Dirichlet or
/// Neumann sets contribute 0; empty interior or initial sets are errors.
pub fn loss_and_gradient(
    model: &PinnModel,
    problem: &Problem,
    weights: &LossWeights,
    form: ResidualForm,
    batch: &TrainingBatch,
) -> Result<(LossComponents, ParamGradient), PhysicsError> {
    if batch.interior.is_empty() {
        return Err(PhysicsError::EmptyBatch("interior"));
    }
    if batch.initial.is_empty() {
        return Err(PhysicsError::EmptyBatch("initial-condition"));
    }
    check_normals(&batch.neumann)?;

    let net = &model.params;
    let norm = &model.norm;
    let mut grad = ParamGradient::zeros_like(net);
    let mut out = LossComponents::default();

    if weights.residual > 0.0 {
        let n = batch.interior.len() as f64;
        let inputs: Vec<_> = batch.interior.iter().map(|p| norm.normalize_point(p)).collect();
        let k = problem.material.conductivity;
        let gamma = problem.material.gamma();
        let c = form.factor(&problem.material);
        let w = 2.0 * weights.residual / n;
        out.residual = accumulate_loss_gradient(
            net,
            &inputs,
            Channels::Full,
            |i, raw| {
                let b = norm.to_physical(raw);
                let f = source_value(&problem.source, &batch.interior[i]);
                let r = c * (gamma * b.du_dt - k * b.laplacian() - f);
                let adj = DerivBundle {
                    du_dt: w * r * c * gamma,
                    d2u_dx2: -w * r * c * k,
                    d2u_dy2: -w * r * c * k,
                    ..DerivBundle::ZERO
                };
                (r * r / n, norm.pull_back(&adj))
            },
            &mut grad,
        )?;
    }

    if weights.ic > 0.0 {
        let data = &batch.initial;
        let n = data.len() as f64;
        let inputs: Vec<_> = data.points.iter().map(|p| norm.normalize_point(p)).collect();
        let w = 2.0 * weights.ic / n;
        out.ic = accumulate_loss_gradient(
            net,
            &inputs,
            Channels::Value,
            |i, raw| {
                let d = norm.denormalize_output(raw.u) - data.targets[i];
                let adj = DerivBundle { u: w * d, ..DerivBundle::ZERO };
                (d * d / n, norm.pull_back(&adj))
            },
            &mut grad,
        )?;
    }

    if weights.bc > 0.0 && !batch.dirichlet.is_empty() {
        let set = &batch.dirichlet;
        let n = set.len() as f64;
        let inputs: Vec<_> = set.iter().map(|s| norm.normalize_point(&s.point)).collect();
        let w = 2.0 * weights.bc / n;
        out.dirichlet = accumulate_loss_gradient(
            net,
            &inputs,
            Channels::Value,
            |i, raw| {
                let d = norm.denormalize_output(raw.u) - set[i].target;
                let adj = DerivBundle { u: w * d, ..DerivBundle::ZERO };
                (d * d / n, norm.pull_back(&adj))
            },
            &mut grad,
        )?;
    }

    if weights.bc > 0.0 && !batch.neumann.is_empty() {
        let set = &batch.neumann;
        let n = set.len() as f64;
        let inputs: Vec<_> = set.iter().map(|s| norm.normalize_point(&s.point)).collect();
        let k = problem.material.conductivity;
        let w = 2.0 * weights.bc / n;
        out.neumann = accumulate_loss_gradient(
            net,
            &inputs,
            Channels::Gradient,
            |i, raw| {
                let b = norm.to_physical(raw);
                let s = &set[i];
                let g = k * (b.du_dx * s.normal.0 + b.du_dy * s.normal.1) - s.flux;
                let adj = DerivBundle {
                    du_dx: w * g * k * s.normal.0,
                    du_dy: w * g * k * s.normal.1,
                    ..DerivBundle::ZERO
                };
                (g * g / n, norm.pull_back(&adj))
            },
            &mut grad,
        )?;
    }

    Ok((out, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Architecture, NetworkParams, Normalization};

    fn table1_source() -> SourceSpec {
        SourceSpec {
            peak_power: 5.0,
            radius: 1.0,
            velocity: 2.0,
            start: (0.0, 5.0),
            direction: (1.0, 0.0),
        }
    }

    fn steel() -> MaterialProps {
        MaterialProps::new(0.025, 7.6e-6, 658.0).unwrap()
    }

    fn problem() -> Problem {
        Problem {
            domain: DomainSpec::rectangle(20.0, 10.0, 298.0, 0.001),
            material: steel(),
            source: table1_source(),
            initial_temperature: 298.0,
        }
    }

    /// Zero network with output offset `c`: u ≡ c.
    fn constant_model(c: f64) -> PinnModel {
        let norm = Normalization::new((0.0, 20.0), (0.0, 10.0), (0.0, 2.0), c, 500.0).unwrap();
        PinnModel::new(NetworkParams::zeros(Architecture::new(2, 4).unwrap()), norm)
    }

    /// One hidden unit, tanh in the normalized x input, scaled so that the
    /// physical output is `u = 298 + a·tanh(x_n)`.
    fn tanh_x_model(a: f64) -> PinnModel {
        let norm = Normalization::new((0.0, 20.0), (0.0, 10.0), (0.0, 2.0), 298.0, a).unwrap();
        let mut net = NetworkParams::zeros(Architecture::new(1, 1).unwrap());
        net.as_mut_slice().copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        PinnModel::new(net, norm)
    }

    #[test]
    fn source_center_moves_along_x() {
        let mut s = table1_source();
        assert_eq!(source_center(&s, 0.0), (0.0, 5.0));
        assert_eq!(source_center(&s, 2.0), (4.0, 5.0));
        s.velocity = 0.5;
        assert_eq!(source_center(&s, 4.0), (2.0, 5.0));
    }

    #[test]
    fn source_values() {
        let s = table1_source();
        assert_eq!(source_value(&s, &SpaceTimePoint::new(0.0, 5.0, 0.0)), 5.0);
        assert_eq!(source_value(&s, &SpaceTimePoint::new(4.0, 5.0, 2.0)), 5.0);
        let at_r0 = source_value(&s, &SpaceTimePoint::new(0.0, 6.0, 0.0));
        assert!((at_r0 - 5.0 / core::f64::consts::E).abs() < 1e-15);
        let at_2 = source_value(&s, &SpaceTimePoint::new(2.0, 5.0, 0.0));
        assert!((at_2 - 5.0 * libm::exp(-4.0)).abs() < 1e-15);
        assert!((at_2 - 0.0916).abs() < 1e-4);
    }

    #[test]
    fn source_validation() {
        let mut s = table1_source();
        s.radius = -1.0;
        assert!(s.validate().is_err());
        let mut s = table1_source();
        s.direction = (1.0, 1.0);
        assert!(s.validate().is_err());
        let mut s = table1_source();
        s.peak_power = -0.1;
        assert!(s.validate().is_err());
        assert!(table1_source().validate().is_ok());
    }

    #[test]
    fn gamma_from_table_values() {
        assert!((steel().gamma() - 5.0008e-3).abs() < 1e-15);
        assert!(MaterialProps::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn residual_examples() {
        let m = steel();
        assert_eq!(pde_residual(&DerivBundle::ZERO, &m, 0.0), 0.0);
        let b = DerivBundle { du_dt: 1.0, ..DerivBundle::ZERO };
        assert!((pde_residual(&b, &m, 0.0) - 5.0008e-3).abs() < 1e-15);
        // u = x²: u_xx = 2, k·2 = 0.05 = −f
        let b = DerivBundle { u: 4.0, du_dx: 4.0, d2u_dx2: 2.0, ..DerivBundle::ZERO };
        assert!(pde_residual(&b, &m, -0.05).abs() < 1e-15);
    }

    #[test]
    fn residual_loss_of_constant_network() {
        let mut p = problem();
        let model = constant_model(298.0);
        let pts = [SpaceTimePoint::new(0.0, 5.0, 0.0)];
        // Residual = −f = −5 at the source center.
        assert!((residual_loss(&model, &p, &pts).unwrap() - 25.0).abs() < 1e-12);
        p.source.peak_power = 0.0;
        let pts = [SpaceTimePoint::new(3.0, 2.0, 0.5), SpaceTimePoint::new(9.0, 8.0, 1.5)];
        assert_eq!(residual_loss(&model, &p, &pts).unwrap(), 0.0);
        assert!(residual_loss(&model, &p, &[]).is_err());
    }

    #[test]
    fn ic_loss_examples() {
        let pts: Vec<_> = (0..4).map(|i| SpaceTimePoint::new(1.0 + i as f64, 2.0, 0.0)).collect();
        let data = InitialConditionData::uniform(pts, 298.0);
        assert_eq!(ic_loss(&constant_model(298.0), &data).unwrap(), 0.0);
        assert!((ic_loss(&constant_model(300.0), &data).unwrap() - 4.0).abs() < 1e-12);
        assert!(ic_loss(&constant_model(298.0), &InitialConditionData::default()).is_err());
    }

    #[test]
    fn dirichlet_examples() {
        let batch: Vec<_> = (0..10)
            .map(|i| DirichletSample {
                point: SpaceTimePoint::new(0.0, i as f64, 0.1 * i as f64),
                target: 298.0,
            })
            .collect();
        assert_eq!(bc_loss_dirichlet(&constant_model(298.0), &batch).unwrap(), 0.0);
        assert!((bc_loss_dirichlet(&constant_model(299.0), &batch).unwrap() - 1.0).abs() < 1e-12);

        let model = tanh_x_model(40.0);
        let p = SpaceTimePoint::new(3.0, 1.0, 0.5);
        let single = [DirichletSample { point: p, target: 298.0 }];
        let u = model.temperature(&p).unwrap();
        assert_eq!(bc_loss_dirichlet(&model, &single).unwrap(), (u - 298.0) * (u - 298.0));
    }

    #[test]
    fn neumann_examples() {
        let m = steel();
        let sample = |flux: f64, normal| NeumannSample {
            point: SpaceTimePoint::new(20.0, 3.0, 0.5),
            normal,
            flux,
        };
        let flat = constant_model(298.0);
        assert_eq!(bc_loss_neumann(&flat, &m, &[sample(0.0, (1.0, 0.0))]).unwrap(), 0.0);
        let l = bc_loss_neumann(&flat, &m, &[sample(0.001, (1.0, 0.0)); 3]).unwrap();
        assert!((l - 1e-6).abs() < 1e-18);
        assert!(matches!(
            bc_loss_neumann(&flat, &m, &[sample(0.0, (1.0, 1.0))]),
            Err(PhysicsError::NonUnitNormal { .. })
        ));

        // u = 298 + 10·tanh(x_n) with x_n = (x − 10)/10: at x = 10 the slope is
        // exactly 10·0.1 = 1 K/mm, so k·∇u·n = 0.025.
        let model = tanh_x_model(10.0);
        let s = NeumannSample {
            point: SpaceTimePoint::new(10.0, 3.0, 0.5),
            normal: (1.0, 0.0),
            flux: 0.025,
        };
        assert!(bc_loss_neumann(&model, &m, &[s]).unwrap() < 1e-30);
    }

    #[test]
    fn total_loss_examples() {
        let w = LossWeights::default();
        assert_eq!(total_loss(&w, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(total_loss(&w, 1.0, 1.0, 1.0), 1500.0);
        let w0 = LossWeights { residual: 0.0, ..w };
        assert_eq!(total_loss(&w0, 1.0, 2.0, 1e9), total_loss(&w0, 1.0, 2.0, 0.0));
    }

    #[test]
    fn domain_edges_partition_boundary() {
        let d = DomainSpec::rectangle(20.0, 10.0, 298.0, 0.001);
        let dir: Vec<_> = d.dirichlet_edges().collect();
        let neu: Vec<_> = d.neumann_edges().collect();
        assert_eq!(dir, [(Edge::AD, 298.0)]);
        assert_eq!(neu.len(), 3);
        assert!(d.validate().is_ok());
        assert_eq!(d.path, ((0.0, 5.0), (20.0, 5.0)));
        let bad = DomainSpec { width: 0.0, ..d };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn combined_loss_matches_standalone_terms() {
        let p = problem();
        let arch = Architecture::new(2, 6).unwrap();
        let norm = Normalization::new((0.0, 20.0), (0.0, 10.0), (0.0, 2.0), 298.0, 500.0).unwrap();
        let model = PinnModel::new(crate::network::init_network(arch, 5), norm);
        let interior: Vec<_> = (0..9)
            .map(|i| SpaceTimePoint::new(1.0 + 2.0 * i as f64, 1.0 + i as f64, 0.2 * i as f64))
            .collect();
        let dirichlet: Vec<_> = (0..5)
            .map(|i| DirichletSample {
                point: SpaceTimePoint::new(0.0, 2.0 * i as f64, 0.3),
                target: 298.0,
            })
            .collect();
        let neumann: Vec<_> = (0..4)
            .map(|i| NeumannSample {
                point: SpaceTimePoint::new(20.0, 2.0 * i as f64, 1.1),
                normal: (1.0, 0.0),
                flux: 0.001,
            })
            .collect();
        let initial = InitialConditionData::uniform(
            (0..6).map(|i| SpaceTimePoint::new(3.0 * i as f64, 4.0, 0.0)).collect(),
            298.0,
        );
        let batch = TrainingBatch {
            interior: interior.clone(),
            dirichlet: dirichlet.clone(),
            neumann: neumann.clone(),
            initial: initial.clone(),
        };
        let (c, g) = loss_and_gradient(&model, &p, &LossWeights::default(), ResidualForm::Energy, &batch).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
        assert!(close(c.residual, residual_loss(&model, &p, &interior).unwrap()));
        assert!(close(c.ic, ic_loss(&model, &initial).unwrap()));
        assert!(close(c.dirichlet, bc_loss_dirichlet(&model, &dirichlet).unwrap()));
        assert!(close(c.neumann, bc_loss_neumann(&model, &p.material, &neumann).unwrap()));
        assert!(g.is_finite());
        assert!(g.is_congruent(&model.params));

        let (r, _) = loss_and_gradient(&model, &p, &LossWeights::default(), ResidualForm::Rate, &batch).unwrap();
        let gamma = p.material.gamma();
        assert!(close(r.residual, c.residual / (gamma * gamma)));
        assert_eq!(r.ic, c.ic);
    }

    #[test]
    fn weighted_gradient_matches_finite_differences() {
        let p = problem();
        let norm = Normalization::new((0.0, 20.0), (0.0, 10.0), (0.0, 2.0), 298.0, 500.0).unwrap();
        let mut model = PinnModel::new(crate::network::init_network(Architecture::new(2, 5).unwrap(), 8), norm);
        let batch = TrainingBatch {
            interior: (0..7)
                .map(|i| SpaceTimePoint::new(0.3 + 0.4 * i as f64, 5.0 - 0.3 * i as f64, 0.25 * i as f64))
                .collect(),
            dirichlet: vec![DirichletSample {
                point: SpaceTimePoint::new(0.0, 3.0, 0.7),
                target: 298.0,
            }],
            neumann: vec![NeumannSample {
                point: SpaceTimePoint::new(4.0, 10.0, 1.2),
                normal: (0.0, 1.0),
                flux: 0.001,
            }],
            initial: InitialConditionData::uniform(vec![SpaceTimePoint::new(6.0, 2.0, 0.0)], 298.0),
        };
        let w = LossWeights::default();
        for form in [ResidualForm::Energy, ResidualForm::Rate] {
            let (_, g) = loss_and_gradient(&model, &p, &w, form, &batch).unwrap();
            let total = |m: &PinnModel| loss_and_gradient(m, &p, &w, form, &batch).unwrap().0.total(&w);
            for j in (0..model.params.len()).step_by(3) {
                let v = model.params.as_slice()[j];
                let h = 1e-6;
                model.params.as_mut_slice()[j] = v + h;
                let up = total(&model);
                model.params.as_mut_slice()[j] = v - h;
                let down = total(&model);
                model.params.as_mut_slice()[j] = v;
                let fd = (up - down) / (2.0 * h);
                assert!((fd - g.as_slice()[j]).abs() <= 1e-6 * g.norm_inf(), "{form:?} param {j}");
            }
        }
    }
}
