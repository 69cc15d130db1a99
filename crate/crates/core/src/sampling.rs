//! Collocation point sets for one time window.

use alloc::vec::Vec;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::SpaceTimePoint;
use crate::physics::{source_center, DirichletSample, DomainSpec, Edge, EdgeCondition, NeumannSample, SourceSpec};
use crate::rng;

/// A boundary collocation point with its outward normal and edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub point: SpaceTimePoint,
    pub normal: (f64, f64),
    pub edge: Edge,
}

/// Interior, boundary and initial points for one window.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollocationBatch {
    pub interior: Vec<SpaceTimePoint>,
    pub boundary: Vec<BoundarySample>,
    pub initial: Vec<SpaceTimePoint>,
}

/// Sample counts per window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleCounts {
    pub interior: usize,
    pub boundary_per_edge: usize,
    pub initial: usize,
    /// Fraction of interior and initial points drawn around the moving
    /// source instead of uniformly; 0 gives plain uniform sampling.
    pub source_focus: f64,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            interior: 20_000,
            boundary_per_edge: 1_000,
            initial: 2_000,
            source_focus: 0.0,
        }
    }
}

impl SampleCounts {
    fn share(&self, n: usize) -> usize {
        libm::round(n as f64 * self.source_focus.clamp(0.0, 1.0)) as usize
    }

    /// Interior points that are source-focused.
    pub fn focused(&self) -> usize {
        self.share(self.interior)
    }

    /// Initial-condition points that are source-focused.
    pub fn focused_initial(&self) -> usize {
        self.share(self.initial)
    }
}

const TAG_INTERIOR: u64 = 1;
const TAG_BOUNDARY: u64 = 2;
const TAG_INITIAL: u64 = 3;
const TAG_FOCUS: u64 = 4;
const TAG_FOCUS_INITIAL: u64 = 5;

fn uniform_t<R: Rng>(rng: &mut R, window: (f64, f64)) -> f64 {
    let t = window.0 + (window.1 - window.0) * rng.random::<f64>();
    t.min(window.1)
}

/// `n` points uniform over the open rectangle × `[t0, t1]`.
pub fn sample_interior(d: &DomainSpec, window: (f64, f64), n: usize, seed: u64) -> Vec<SpaceTimePoint> {
    let mut rng = rng::stream(seed, &[TAG_INTERIOR]);
    (0..n)
        .map(|_| {
            let x = d.length * rng.sample::<f64, _>(Open01);
            let y = d.width * rng.sample::<f64, _>(Open01);
            SpaceTimePoint::new(x, y, uniform_t(&mut rng, window))
        })
        .collect()
}

fn near_source<R: Rng>(d: &DomainSpec, src: &SourceSpec, window: (f64, f64), n: usize, rng: &mut R) -> Vec<SpaceTimePoint> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let t = uniform_t(rng, window);
        let (cx, cy) = source_center(src, t);
        let x = cx + src.radius * rng.sample::<f64, _>(StandardNormal);
        let y = cy + src.radius * rng.sample::<f64, _>(StandardNormal);
        if x > 0.0 && x < d.length && y > 0.0 && y < d.width {
            out.push(SpaceTimePoint::new(x, y, t));
        }
    }
    out
}

/// `n` points whose time is uniform over the window and whose position is
/// normal around the source centre at that time, with standard deviation
/// `r0` per axis. Draws outside the open rectangle are rejected.
pub fn sample_near_source(
    d: &DomainSpec,
    src: &SourceSpec,
    window: (f64, f64),
    n: usize,
    seed: u64,
) -> Vec<SpaceTimePoint> {
    near_source(d, src, window, n, &mut rng::stream(seed, &[TAG_FOCUS]))
}

/// `n_per_edge` points on every edge, uniform along the edge (corners
/// excluded) and in time.
pub fn sample_boundary(d: &DomainSpec, window: (f64, f64), n_per_edge: usize, seed: u64) -> Vec<BoundarySample> {
    let mut rng = rng::stream(seed, &[TAG_BOUNDARY]);
    let mut out = Vec::with_capacity(4 * n_per_edge);
    for edge in Edge::ALL {
        for _ in 0..n_per_edge {
            let s = rng.sample::<f64, _>(Open01);
            let (x, y) = edge.point_at(d.length, d.width, s);
            out.push(BoundarySample {
                point: SpaceTimePoint::new(x, y, uniform_t(&mut rng, window)),
                normal: edge.outward_normal(),
                edge,
            });
        }
    }
    out
}

/// `n` interior points, all at time `t0`.
pub fn sample_initial(d: &DomainSpec, t0: f64, n: usize, seed: u64) -> Vec<SpaceTimePoint> {
    let mut rng = rng::stream(seed, &[TAG_INITIAL]);
    (0..n)
        .map(|_| {
            let x = d.length * rng.sample::<f64, _>(Open01);
            let y = d.width * rng.sample::<f64, _>(Open01);
            SpaceTimePoint::new(x, y, t0)
        })
        .collect()
}

/// Initial-condition points at `t0`: uniform, plus the focused share drawn
/// around the source centre at `t0`.
pub fn initial_points(d: &DomainSpec, src: &SourceSpec, t0: f64, counts: &SampleCounts, seed: u64) -> Vec<SpaceTimePoint> {
    let focused = counts.focused_initial();
    let mut points = sample_initial(d, t0, counts.initial - focused, seed);
    points.extend(near_source(
        d,
        src,
        (t0, t0),
        focused,
        &mut rng::stream(seed, &[TAG_FOCUS_INITIAL]),
    ));
    points
}

pub fn sample_window(
    d: &DomainSpec,
    src: &SourceSpec,
    window: (f64, f64),
    counts: &SampleCounts,
    seed: u64,
) -> CollocationBatch {
    let focused = counts.focused();
    let mut interior = sample_interior(d, window, counts.interior - focused, seed);
    interior.extend(sample_near_source(d, src, window, focused, seed));
    CollocationBatch {
        interior,
        boundary: sample_boundary(d, window, counts.boundary_per_edge, seed),
        initial: initial_points(d, src, window.0, counts, seed),
    }
}

/// Split boundary samples by edge condition and attach their targets.
pub fn split_boundary(d: &DomainSpec, samples: &[BoundarySample]) -> (Vec<DirichletSample>, Vec<NeumannSample>) {
    let mut dirichlet = Vec::new();
    let mut neumann = Vec::new();
    for s in samples {
        match d.condition(s.edge) {
            EdgeCondition::Dirichlet(target) => dirichlet.push(DirichletSample { point: s.point, target }),
            EdgeCondition::Neumann(flux) => neumann.push(NeumannSample {
                point: s.point,
                normal: s.normal,
                flux,
            }),
        }
    }
    (dirichlet, neumann)
}
