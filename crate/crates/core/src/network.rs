//! Feed-forward tanh network: layout, initialization, normalization and plain
//! evaluation.
//!
//! Parameters live in one flat `Vec<f64>`, layer-major; within a layer the
//! weight matrix (out × in, row-major) comes first, then the bias vector.
//! The first layer takes the normalized inputs in the order `[t, x, y]`;
//! hidden layers use `tanh`, the output layer is linear with a single unit.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{self, AutodiffError, Channels, DerivBundle, SpaceTimePoint};
use crate::rng;

/// Number of network inputs: `(t, x, y)`.
pub const INPUT_DIM: usize = 3;
/// Number of network outputs: temperature.
pub const OUTPUT_DIM: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("architecture needs at least one hidden layer and one unit per layer (got {layers} x {width})")]
    InvalidArchitecture { layers: usize, width: usize },
    #[error("parameter vector has {got} entries, architecture needs {expected}")]
    ParamCount { expected: usize, got: usize },
    #[error("non-finite parameter at flat index {index}")]
    NonFiniteParam { index: usize },
    #[error("normalization interval [{lo}, {hi}] is empty or not finite")]
    DegenerateInterval { lo: f64, hi: f64 },
    #[error("output scale must be finite and nonzero (got {0})")]
    DegenerateOutputScale(f64),
}

/// Shape of the MLP. Input and output widths are fixed at 3 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub hidden_layers: usize,
    pub hidden_width: usize,
}

impl Architecture {
    pub fn new(hidden_layers: usize, hidden_width: usize) -> Result<Self, NetworkError> {
        let arch = Self {
            hidden_layers,
            hidden_width,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.hidden_layers == 0 || self.hidden_width == 0 {
            return Err(NetworkError::InvalidArchitecture {
                layers: self.hidden_layers,
                width: self.hidden_width,
            });
        }
        Ok(())
    }

    /// Number of affine layers, including the output layer.
    pub fn num_layers(&self) -> usize {
        self.hidden_layers + 1
    }

    /// `(inputs, outputs)` of affine layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let fan_in = if l == 0 { INPUT_DIM } else { self.hidden_width };
        let fan_out = if l == self.hidden_layers {
            OUTPUT_DIM
        } else {
            self.hidden_width
        };
        (fan_in, fan_out)
    }

    pub fn param_count(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (i, o) = self.layer_dims(l);
                o * i + o
            })
            .sum()
    }

    /// Flat offset of layer `l`'s weight block.
    pub fn layer_offset(&self, l: usize) -> usize {
        (0..l)
            .map(|k| {
                let (i, o) = self.layer_dims(k);
                o * i + o
            })
            .sum()
    }
}

/// Borrowed view of one affine layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    /// `fan_out × fan_in`, row-major.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

/// All weights and biases of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    values: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(arch: Architecture) -> Self {
        Self {
            arch,
            values: alloc::vec![0.0; arch.param_count()],
        }
    }

    pub fn from_flat(arch: Architecture, values: Vec<f64>) -> Result<Self, NetworkError> {
        arch.validate()?;
        let expected = arch.param_count();
        if values.len() != expected {
            return Err(NetworkError::ParamCount {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(NetworkError::NonFiniteParam { index });
        }
        Ok(Self { arch, values })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let (fan_in, fan_out) = self.arch.layer_dims(l);
        let off = self.arch.layer_offset(l);
        let w_end = off + fan_in * fan_out;
        LayerView {
            fan_in,
            fan_out,
            weights: &self.values[off..w_end],
            bias: &self.values[w_end..w_end + fan_out],
        }
    }

    /// Mutable `(weights, bias)` of layer `l`.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (fan_in, fan_out) = self.arch.layer_dims(l);
        let off = self.arch.layer_offset(l);
        let w_end = off + fan_in * fan_out;
        let (w, rest) = self.values[off..].split_at_mut(w_end - off);
        (w, &mut rest[..fan_out])
    }
}

/// Glorot-uniform weights, zero biases. Deterministic for a given seed.
pub fn init_network(arch: Architecture, seed: u64) -> NetworkParams {
    let mut params = NetworkParams::zeros(arch);
    let mut rng = rng::stream(seed, &[0x1417]);
    for l in 0..arch.num_layers() {
        let (fan_in, fan_out) = arch.layer_dims(l);
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let (w, _) = params.layer_mut(l);
        for v in w.iter_mut() {
            *v = limit * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
    params
}

/// Affine map `v ↦ (v − offset)·scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    /// Map `[lo, hi]` onto `[−1, 1]`.
    pub fn unit_interval(lo: f64, hi: f64) -> Result<Self, NetworkError> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(NetworkError::DegenerateInterval { lo, hi });
        }
        Ok(Self {
            offset: 0.5 * (lo + hi),
            scale: 2.0 / (hi - lo),
        })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) * self.scale
    }

    #[inline]
    pub fn invert(&self, n: f64) -> f64 {
        n / self.scale + self.offset
    }
}

/// Input and output scaling around the raw MLP.
///
/// Inputs are mapped to `[−1, 1]` per dimension; the output is
/// `u = offset + scale·û`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub t: AffineMap,
    pub x: AffineMap,
    pub y: AffineMap,
    pub output_offset: f64,
    pub output_scale: f64,
}

impl Normalization {
    pub fn new(
        x_range: (f64, f64),
        y_range: (f64, f64),
        t_range: (f64, f64),
        output_offset: f64,
        output_scale: f64,
    ) -> Result<Self, NetworkError> {
        if !(output_scale.is_finite() && output_scale != 0.0 && output_offset.is_finite()) {
            return Err(NetworkError::DegenerateOutputScale(output_scale));
        }
        Ok(Self {
            t: AffineMap::unit_interval(t_range.0, t_range.1)?,
            x: AffineMap::unit_interval(x_range.0, x_range.1)?,
            y: AffineMap::unit_interval(y_range.0, y_range.1)?,
            output_offset,
            output_scale,
        })
    }

    /// Same spatial/output maps, new time interval.
    pub fn with_time_range(&self, lo: f64, hi: f64) -> Result<Self, NetworkError> {
        Ok(Self {
            t: AffineMap::unit_interval(lo, hi)?,
            ..*self
        })
    }

    /// Physical point → network input coordinates.
    #[inline]
    pub fn normalize_point(&self, p: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint {
            x: self.x.apply(p.x),
            y: self.y.apply(p.y),
            t: self.t.apply(p.t),
        }
    }

    #[inline]
    pub fn denormalize_point(&self, n: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint {
            x: self.x.invert(n.x),
            y: self.y.invert(n.y),
            t: self.t.invert(n.t),
        }
    }

    #[inline]
    pub fn denormalize_output(&self, u_hat: f64) -> f64 {
        self.output_offset + self.output_scale * u_hat
    }

    #[inline]
    pub fn normalize_output(&self, u: f64) -> f64 {
        (u - self.output_offset) / self.output_scale
    }

    /// Derivatives of the raw MLP (in normalized coordinates) expressed in
    /// physical units, by the chain rule through the affine maps.
    pub fn to_physical(&self, raw: &DerivBundle) -> DerivBundle {
        let s = self.output_scale;
        DerivBundle {
            u: self.denormalize_output(raw.u),
            du_dt: s * self.t.scale * raw.du_dt,
            du_dx: s * self.x.scale * raw.du_dx,
            du_dy: s * self.y.scale * raw.du_dy,
            d2u_dx2: s * self.x.scale * self.x.scale * raw.d2u_dx2,
            d2u_dy2: s * self.y.scale * self.y.scale * raw.d2u_dy2,
        }
    }

    /// Transpose of [`Self::to_physical`]'s linear part: maps an adjoint on
    /// physical quantities to an adjoint on raw network outputs.
    pub fn pull_back(&self, adjoint: &DerivBundle) -> DerivBundle {
        let s = self.output_scale;
        DerivBundle {
            u: s * adjoint.u,
            du_dt: s * self.t.scale * adjoint.du_dt,
            du_dx: s * self.x.scale * adjoint.du_dx,
            du_dy: s * self.y.scale * adjoint.du_dy,
            d2u_dx2: s * self.x.scale * self.x.scale * adjoint.d2u_dx2,
            d2u_dy2: s * self.y.scale * self.y.scale * adjoint.d2u_dy2,
        }
    }
}

/// A network together with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnModel {
    pub params: NetworkParams,
    pub norm: Normalization,
}

impl PinnModel {
    pub fn new(params: NetworkParams, norm: Normalization) -> Self {
        Self { params, norm }
    }

    /// Physical derivative bundles at a batch of physical points.
    pub fn eval_batch(
        &self,
        points: &[SpaceTimePoint],
        channels: Channels,
    ) -> Result<Vec<DerivBundle>, AutodiffError> {
        let inputs: Vec<SpaceTimePoint> = points.iter().map(|p| self.norm.normalize_point(p)).collect();
        let raw = autodiff::eval_batch(&self.params, &inputs, channels)?;
        Ok(raw.iter().map(|b| self.norm.to_physical(b)).collect())
    }

    pub fn eval(&self, p: &SpaceTimePoint) -> Result<DerivBundle, AutodiffError> {
        Ok(self.eval_batch(core::slice::from_ref(p), Channels::Full)?[0])
    }

    /// Temperatures at a batch of physical points.
    pub fn temperatures(&self, points: &[SpaceTimePoint]) -> Result<Vec<f64>, AutodiffError> {
        Ok(self
            .eval_batch(points, Channels::Value)?
            .into_iter()
            .map(|b| b.u)
            .collect())
    }

    pub fn temperature(&self, p: &SpaceTimePoint) -> Result<f64, AutodiffError> {
        forward(&self.params, &self.norm, p)
    }
}

/// `u = denorm(MLP(norm(p)))`.
pub fn forward(net: &NetworkParams, norm: &Normalization, p: &SpaceTimePoint) -> Result<f64, AutodiffError> {
    let input = norm.normalize_point(p);
    let raw = autodiff::eval_batch(net, core::slice::from_ref(&input), Channels::Value)?;
    Ok(norm.denormalize_output(raw[0].u))
}
