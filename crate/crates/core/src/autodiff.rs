//! Exact input derivatives and parameter gradients for tanh MLPs.
//!
//! The forward pass carries, next to each activation vector, its derivatives
//! with respect to the three inputs and the two pure second derivatives in
//! `x` and `y`. For a hidden layer `a' = tanh(z)` with `z = W a + b`:
//!
//! ```text
//! z_c   = W a_c                      (c ∈ {t, x, y, xx, yy}, no bias)
//! a'_c  = σ'(z) ⊙ z_c                (c ∈ {t, x, y})
//! a'_cc = σ''(z) ⊙ z_c² + σ'(z) ⊙ z_cc
//! ```
//!
//! All channels of a batch are stacked as rows of one matrix so each layer is
//! a single GEMM. The reverse pass differentiates through this recurrence,
//! which is what lets a loss built from `∂u/∂t` and `∇²u` be minimized.
//!
//! Row layout of every per-layer matrix is channel-major: rows
//! `c·N .. (c+1)·N` hold channel `c` of the `N` points.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::network::{NetworkParams, INPUT_DIM};

/// Points per forward/backward block. Bounds tape memory and fixes the
/// reduction order independently of batch size.
pub const BLOCK: usize = 512;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite value produced in layer {layer}")]
    NonFinite { layer: usize },
    #[error("non-finite loss contribution at point {point:?}")]
    NonFiniteLoss { point: SpaceTimePoint },
}

/// A point in space (mm) and time (s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpaceTimePoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl SpaceTimePoint {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.t.is_finite()
    }

    /// Network input order.
    #[inline]
    pub fn as_inputs(&self) -> [f64; INPUT_DIM] {
        [self.t, self.x, self.y]
    }
}

/// Network output and its input derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivBundle {
    pub u: f64,
    pub du_dt: f64,
    pub du_dx: f64,
    pub du_dy: f64,
    pub d2u_dx2: f64,
    pub d2u_dy2: f64,
}

impl DerivBundle {
    pub const ZERO: Self = Self {
        u: 0.0,
        du_dt: 0.0,
        du_dx: 0.0,
        du_dy: 0.0,
        d2u_dx2: 0.0,
        d2u_dy2: 0.0,
    };

    pub fn to_array(&self) -> [f64; 6] {
        [self.u, self.du_dt, self.du_dx, self.du_dy, self.d2u_dx2, self.d2u_dy2]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            u: a[0],
            du_dt: a[1],
            du_dx: a[2],
            du_dy: a[3],
            d2u_dx2: a[4],
            d2u_dy2: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn laplacian(&self) -> f64 {
        self.d2u_dx2 + self.d2u_dy2
    }

    /// `a·self + b·other`, entrywise.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        let (p, q) = (self.to_array(), other.to_array());
        Self::from_array(core::array::from_fn(|i| a * p[i] + b * q[i]))
    }
}

/// Which derivative channels a batch evaluation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    /// `u` only.
    Value,
    /// `u, u_t, u_x, u_y`.
    Gradient,
    /// `u, u_t, u_x, u_y, u_xx, u_yy`.
    Full,
}

impl Channels {
    pub const fn count(self) -> usize {
        match self {
            Channels::Value => 1,
            Channels::Gradient => 4,
            Channels::Full => 6,
        }
    }
}

const CH_T: usize = 1;
const CH_X: usize = 2;
const CH_Y: usize = 3;
const CH_XX: usize = 4;
const CH_YY: usize = 5;

/// Gradient of a scalar with respect to every network parameter, in the
/// same flat layout as [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradient {
    values: Vec<f64>,
}

impl ParamGradient {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Self {
            values: vec![0.0; net.len()],
        }
    }

    pub fn from_flat(values: Vec<f64>) -> Self {
        Self { values }
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

    pub fn is_congruent(&self, net: &NetworkParams) -> bool {
        self.values.len() == net.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_scaled(&mut self, other: &Self, s: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `C (m×n) = A (m×k) · B (k×n) + beta·C` with explicit strides.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= (m - 1) * rsc + n);
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    // SAFETY: the asserts above bound every index dgemm touches; A and B are
    // shared borrows and C is a distinct exclusive borrow.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

/// Forward cache for one block of points.
#[derive(Debug)]
pub struct Tape<'a> {
    net: &'a NetworkParams,
    n: usize,
    channels: Channels,
    /// `inputs[l]`: input matrix of affine layer `l`, `(C·N) × fan_in`.
    inputs: Vec<Vec<f64>>,
    /// `pre[l]`: pre-activations of hidden layer `l`, `(C·N) × width`.
    pre: Vec<Vec<f64>>,
    /// `act[l]`: `tanh` of the value rows of `pre[l]`, `N × width`.
    act: Vec<Vec<f64>>,
    /// Network outputs, `C·N`.
    output: Vec<f64>,
}

impl<'a> Tape<'a> {
    /// Run the forward recurrence for `points` (already in network
    /// coordinates).
    pub fn forward(
        net: &'a NetworkParams,
        points: &[SpaceTimePoint],
        channels: Channels,
    ) -> Result<Self, AutodiffError> {
        let n = points.len();
        if n == 0 {
            return Err(AutodiffError::EmptyBatch);
        }
        let nc = channels.count();
        let rows = nc * n;
        let arch = net.arch();
        let hidden = arch.hidden_layers;

        let mut input0 = vec![0.0; rows * INPUT_DIM];
        for (i, p) in points.iter().enumerate() {
            input0[i * INPUT_DIM..(i + 1) * INPUT_DIM].copy_from_slice(&p.as_inputs());
        }
        if nc > 1 {
            // Seed tangents: ∂(t,x,y)/∂t = e0, etc. Second-order seeds are 0.
            for (c, axis) in [(CH_T, 0usize), (CH_X, 1), (CH_Y, 2)] {
                for i in 0..n {
                    input0[(c * n + i) * INPUT_DIM + axis] = 1.0;
                }
            }
        }

        let mut inputs = Vec::with_capacity(hidden + 1);
        let mut pre = Vec::with_capacity(hidden);
        let mut act = Vec::with_capacity(hidden);
        inputs.push(input0);

        for l in 0..hidden {
            let layer = net.layer(l);
            let (fi, fo) = (layer.fan_in, layer.fan_out);
            let a = &inputs[l];
            let mut z = vec![0.0; rows * fo];
            gemm(rows, fi, fo, a, fi, 1, layer.weights, 1, fi, 0.0, &mut z, fo);
            for i in 0..n {
                let row = &mut z[i * fo..(i + 1) * fo];
                for (zj, bj) in row.iter_mut().zip(layer.bias) {
                    *zj += *bj;
                }
            }
            if z.iter().any(|v| !v.is_finite()) {
                return Err(AutodiffError::NonFinite { layer: l });
            }

            let s: Vec<f64> = z[..n * fo].iter().map(|&v| libm::tanh(v)).collect();
            let mut next = vec![0.0; rows * fo];
            next[..n * fo].copy_from_slice(&s);
            if nc > 1 {
                for c in [CH_T, CH_X, CH_Y] {
                    let base = c * n * fo;
                    for k in 0..n * fo {
                        let s1 = 1.0 - s[k] * s[k];
                        next[base + k] = s1 * z[base + k];
                    }
                }
            }
            if nc > 4 {
                for (cc, c) in [(CH_XX, CH_X), (CH_YY, CH_Y)] {
                    let (bcc, bc) = (cc * n * fo, c * n * fo);
                    for k in 0..n * fo {
                        let s1 = 1.0 - s[k] * s[k];
                        let s2 = -2.0 * s[k] * s1;
                        let zc = z[bc + k];
                        next[bcc + k] = s2 * zc * zc + s1 * z[bcc + k];
                    }
                }
            }
            pre.push(z);
            act.push(s);
            inputs.push(next);
        }

        let out = net.layer(hidden);
        let fi = out.fan_in;
        let mut output = vec![0.0; rows];
        gemm(rows, fi, 1, &inputs[hidden], fi, 1, out.weights, 1, fi, 0.0, &mut output, 1);
        for v in output[..n].iter_mut() {
            *v += out.bias[0];
        }
        if output.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite { layer: hidden });
        }

        Ok(Self {
            net,
            n,
            channels,
            inputs,
            pre,
            act,
            output,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Output bundle of point `i`; channels not carried are 0.
    pub fn bundle(&self, i: usize) -> DerivBundle {
        let nc = self.channels.count();
        let mut a = [0.0; 6];
        for (c, v) in a.iter_mut().enumerate().take(nc) {
            *v = self.output[c * self.n + i];
        }
        DerivBundle::from_array(a)
    }

    /// Accumulate `Σ_i ⟨adjoints[i], ∂bundle_i/∂θ⟩` into `grad`.
    pub fn backward(&self, adjoints: &[DerivBundle], grad: &mut ParamGradient) {
        assert_eq!(adjoints.len(), self.n, "one adjoint per point");
        assert!(grad.is_congruent(self.net), "gradient layout mismatch");
        let n = self.n;
        let nc = self.channels.count();
        let rows = nc * n;
        let arch = self.net.arch();
        let hidden = arch.hidden_layers;

        let mut ubar = vec![0.0; rows];
        for (i, adj) in adjoints.iter().enumerate() {
            let a = adj.to_array();
            for c in 0..nc {
                ubar[c * n + i] = a[c];
            }
        }

        // Output layer.
        let out = self.net.layer(hidden);
        let fi = out.fan_in;
        {
            let off = arch.layer_offset(hidden);
            let g = &mut grad.as_mut_slice()[off..off + fi + 1];
            let (gw, gb) = g.split_at_mut(fi);
            gemm(1, rows, fi, &ubar, 1, 1, &self.inputs[hidden], fi, 1, 1.0, gw, fi);
            gb[0] += ubar[..n].iter().sum::<f64>();
        }
        let mut abar = vec![0.0; rows * fi];
        for (r, &u) in ubar.iter().enumerate() {
            for (dst, w) in abar[r * fi..(r + 1) * fi].iter_mut().zip(out.weights) {
                *dst = u * w;
            }
        }

        for l in (0..hidden).rev() {
            let layer = self.net.layer(l);
            let (lfi, fo) = (layer.fan_in, layer.fan_out);
            let z = &self.pre[l];
            let s = &self.act[l];
            let mut zbar = vec![0.0; rows * fo];

            for k in 0..n * fo {
                let sk = s[k];
                let s1 = 1.0 - sk * sk;
                zbar[k] = s1 * abar[k];
            }
            if nc > 1 {
                for c in [CH_T, CH_X, CH_Y] {
                    let base = c * n * fo;
                    for k in 0..n * fo {
                        let sk = s[k];
                        let s1 = 1.0 - sk * sk;
                        let s2 = -2.0 * sk * s1;
                        let ab = abar[base + k];
                        zbar[base + k] = s1 * ab;
                        zbar[k] += s2 * z[base + k] * ab;
                    }
                }
            }
            if nc > 4 {
                for (cc, c) in [(CH_XX, CH_X), (CH_YY, CH_Y)] {
                    let (bcc, bc) = (cc * n * fo, c * n * fo);
                    for k in 0..n * fo {
                        let sk = s[k];
                        let s1 = 1.0 - sk * sk;
                        let s2 = -2.0 * sk * s1;
                        let s3 = -2.0 * s1 * s1 + 4.0 * sk * sk * s1;
                        let ab = abar[bcc + k];
                        let zc = z[bc + k];
                        zbar[bcc + k] = s1 * ab;
                        zbar[bc + k] += 2.0 * s2 * zc * ab;
                        zbar[k] += (s3 * zc * zc + s2 * z[bcc + k]) * ab;
                    }
                }
            }

            let off = arch.layer_offset(l);
            {
                let g = &mut grad.as_mut_slice()[off..off + fo * lfi + fo];
                let (gw, gb) = g.split_at_mut(fo * lfi);
                // gW (fo × fi) += Z̄ᵀ · A
                gemm(fo, rows, lfi, &zbar, 1, fo, &self.inputs[l], lfi, 1, 1.0, gw, lfi);
                for i in 0..n {
                    for (gbj, zb) in gb.iter_mut().zip(&zbar[i * fo..(i + 1) * fo]) {
                        *gbj += zb;
                    }
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; rows * lfi];
                gemm(rows, fo, lfi, &zbar, fo, 1, layer.weights, lfi, 1, 0.0, &mut prev, lfi);
                abar = prev;
            }
        }
    }
}

/// Bundles of the raw MLP at `points` (network coordinates), evaluated in
/// blocks of [`BLOCK`].
pub fn eval_batch(
    net: &NetworkParams,
    points: &[SpaceTimePoint],
    channels: Channels,
) -> Result<Vec<DerivBundle>, AutodiffError> {
    if points.is_empty() {
        return Err(AutodiffError::EmptyBatch);
    }
    let mut out = Vec::with_capacity(points.len());
    for block in points.chunks(BLOCK) {
        let tape = Tape::forward(net, block, channels)?;
        out.extend((0..block.len()).map(|i| tape.bundle(i)));
    }
    Ok(out)
}

/// `u` and its five input derivatives at one point of the raw MLP.
pub fn eval_with_input_derivs(net: &NetworkParams, p: &SpaceTimePoint) -> Result<DerivBundle, AutodiffError> {
    Ok(Tape::forward(net, core::slice::from_ref(p), Channels::Full)?.bundle(0))
}

/// Add the gradient of `Σ_i loss_i(bundle_i)` to `grad` and return the sum.
///
/// `per_point(i, bundle)` returns the loss contribution of point `i` and the
/// adjoint `∂loss_i/∂bundle`. Blocks are processed in order, so the result
/// is independent of how the caller batches.
pub fn accumulate_loss_gradient<F>(
    net: &NetworkParams,
    points: &[SpaceTimePoint],
    channels: Channels,
    mut per_point: F,
    grad: &mut ParamGradient,
) -> Result<f64, AutodiffError>
where
    F: FnMut(usize, &DerivBundle) -> (f64, DerivBundle),
{
    if points.is_empty() {
        return Err(AutodiffError::EmptyBatch);
    }
    let mut total = 0.0;
    let mut adjoints = Vec::with_capacity(BLOCK.min(points.len()));
    for (b, block) in points.chunks(BLOCK).enumerate() {
        let tape = Tape::forward(net, block, channels)?;
        adjoints.clear();
        for (i, point) in block.iter().enumerate() {
            let (value, adj) = per_point(b * BLOCK + i, &tape.bundle(i));
            if !value.is_finite() || !adj.is_finite() {
                return Err(AutodiffError::NonFiniteLoss { point: *point });
            }
            total += value;
            adjoints.push(adj);
        }
        tape.backward(&adjoints, grad);
    }
    Ok(total)
}

/// Loss value and its exact parameter gradient for a per-point loss over a
/// fixed batch.
pub fn loss_gradient<F>(
    net: &NetworkParams,
    points: &[SpaceTimePoint],
    channels: Channels,
    per_point: F,
) -> Result<(f64, ParamGradient), AutodiffError>
where
    F: FnMut(usize, &DerivBundle) -> (f64, DerivBundle),
{
    let mut grad = ParamGradient::zeros_like(net);
    let value = accumulate_loss_gradient(net, points, channels, per_point, &mut grad)?;
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_network, Architecture};

    #[test]
    fn zero_network_has_zero_bundle() {
        for layers in 1..4 {
            let net = NetworkParams::zeros(Architecture::new(layers, 5).unwrap());
            let b = eval_with_input_derivs(&net, &SpaceTimePoint::new(0.3, -2.0, 7.0)).unwrap();
            assert_eq!(b, DerivBundle::ZERO);
        }
    }

    #[test]
    fn single_neuron_tanh_of_x() {
        let arch = Architecture::new(1, 1).unwrap();
        let mut net = NetworkParams::zeros(arch);
        // hidden weights [w_t, w_x, w_y], bias, output weight, output bias
        net.as_mut_slice().copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let b = eval_with_input_derivs(&net, &SpaceTimePoint::new(0.0, 0.4, 0.9)).unwrap();
        assert_eq!(b.u, 0.0);
        assert_eq!(b.du_dx, 1.0);
        assert_eq!(b.d2u_dx2, 0.0);
        assert_eq!(b.du_dt, 0.0);
        assert_eq!(b.du_dy, 0.0);

        let x: f64 = 0.7;
        let b = eval_with_input_derivs(&net, &SpaceTimePoint::new(x, 0.0, 0.0)).unwrap();
        let th = libm::tanh(x);
        assert!((b.u - th).abs() < 1e-15);
        assert!((b.du_dx - (1.0 - th * th)).abs() < 1e-15);
        assert!((b.d2u_dx2 - (-2.0 * th * (1.0 - th * th))).abs() < 1e-15);
    }

    #[test]
    fn channel_subsets_agree_on_shared_entries() {
        let net = init_network(Architecture::new(3, 12).unwrap(), 3);
        let pts: Vec<_> = (0..37)
            .map(|i| SpaceTimePoint::new(0.05 * i as f64 - 0.9, 0.3 - 0.02 * i as f64, 0.5))
            .collect();
        let v = eval_batch(&net, &pts, Channels::Value).unwrap();
        let g = eval_batch(&net, &pts, Channels::Gradient).unwrap();
        let f = eval_batch(&net, &pts, Channels::Full).unwrap();
        for i in 0..pts.len() {
            assert_eq!(v[i].u, f[i].u);
            assert_eq!(g[i].u, f[i].u);
            assert_eq!(g[i].du_dx, f[i].du_dx);
            assert_eq!(g[i].d2u_dx2, 0.0);
        }
    }

    #[test]
    fn empty_batch_is_error() {
        let net = init_network(Architecture::new(1, 2).unwrap(), 0);
        assert_eq!(eval_batch(&net, &[], Channels::Value), Err(AutodiffError::EmptyBatch));
        assert!(loss_gradient(&net, &[], Channels::Value, |_, _| (0.0, DerivBundle::ZERO)).is_err());
    }

    #[test]
    fn non_finite_layer_is_reported() {
        let arch = Architecture::new(2, 2).unwrap();
        let mut net = NetworkParams::zeros(arch);
        net.as_mut_slice()[1] = 1.0;
        let err = eval_with_input_derivs(&net, &SpaceTimePoint::new(f64::INFINITY, 0.0, 0.0)).unwrap_err();
        assert_eq!(err, AutodiffError::NonFinite { layer: 0 });
    }

    #[test]
    fn non_finite_loss_names_point() {
        let net = init_network(Architecture::new(1, 3).unwrap(), 0);
        let pts = [SpaceTimePoint::new(0.1, 0.2, 0.3), SpaceTimePoint::new(0.4, 0.5, 0.6)];
        let err = loss_gradient(&net, &pts, Channels::Value, |i, _| {
            (if i == 1 { f64::NAN } else { 1.0 }, DerivBundle::ZERO)
        })
        .unwrap_err();
        assert_eq!(err, AutodiffError::NonFiniteLoss { point: pts[1] });
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let net = init_network(Architecture::new(2, 4).unwrap(), 1);
        let pts = [SpaceTimePoint::new(0.1, 0.2, 0.3)];
        let (v, g) = loss_gradient(&net, &pts, Channels::Full, |_, _| (0.0, DerivBundle::ZERO)).unwrap();
        assert_eq!(v, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn squared_output_of_zero_network_is_stationary() {
        let net = NetworkParams::zeros(Architecture::new(3, 4).unwrap());
        let pts = [SpaceTimePoint::new(0.1, -0.2, 0.3)];
        let (v, g) = loss_gradient(&net, &pts, Channels::Value, |_, b| {
            (b.u * b.u, DerivBundle { u: 2.0 * b.u, ..DerivBundle::ZERO })
        })
        .unwrap();
        assert_eq!(v, 0.0);
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }
}
