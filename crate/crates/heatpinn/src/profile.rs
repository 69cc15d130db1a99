//! Line profiles through either solution.

use heatpinn_core::fem::FemSolution;
use heatpinn_core::training::query_batch;
use heatpinn_core::{SpaceTimePoint, WindowSnapshot};

use crate::{Error, Result};

/// Anything that can be sampled as `u(x, y, t)`.
pub trait FieldSource {
    fn temperatures(&self, points: &[SpaceTimePoint]) -> Result<Vec<f64>>;
    /// `[t_start, t_end]` covered.
    fn time_range(&self) -> (f64, f64);
    /// `(length, width)` of the rectangle.
    fn extent(&self) -> (f64, f64);
    fn label(&self) -> &'static str;
}

/// A trained run: window snapshots in order.
#[derive(Debug, Clone, Copy)]
pub struct PinnField<'a>(pub &'a [WindowSnapshot]);

impl FieldSource for PinnField<'_> {
    fn temperatures(&self, points: &[SpaceTimePoint]) -> Result<Vec<f64>> {
        Ok(query_batch(self.0, points)?)
    }

    fn time_range(&self) -> (f64, f64) {
        match (self.0.first(), self.0.last()) {
            (Some(a), Some(b)) => (a.t_start, b.t_end),
            _ => (0.0, 0.0),
        }
    }

    fn extent(&self) -> (f64, f64) {
        let n = self.0.first().map(|s| s.model.norm).expect("at least one snapshot");
        (n.x.invert(1.0) - n.x.invert(-1.0), n.y.invert(1.0) - n.y.invert(-1.0))
    }

    fn label(&self) -> &'static str {
        "pinn"
    }
}

impl FieldSource for FemSolution {
    fn temperatures(&self, points: &[SpaceTimePoint]) -> Result<Vec<f64>> {
        points.iter().map(|p| Ok(self.interpolate(p)?)).collect()
    }

    fn time_range(&self) -> (f64, f64) {
        (0.0, self.t_end())
    }

    fn extent(&self) -> (f64, f64) {
        (self.mesh.length, self.mesh.width)
    }

    fn label(&self) -> &'static str {
        "fem"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    pub t: f64,
    pub start: (f64, f64),
    pub end: (f64, f64),
    /// `(arc length from start, temperature)`.
    pub samples: Vec<(f64, f64)>,
}

impl LineProfile {
    /// Largest sample as `(s, temperature)`.
    pub fn peak(&self) -> (f64, f64) {
        self.samples
            .iter()
            .copied()
            .fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }
}

pub(crate) fn check_time(src: &dyn FieldSource, t: f64) -> Result<()> {
    let (a, b) = src.time_range();
    let eps = 1e-9 * b.abs().max(1.0);
    if t < a - eps || t > b + eps {
        return Err(Error::Invalid(format!(
            "t = {t} s is outside the {} solution's range [{a}, {b}]",
            src.label()
        )));
    }
    Ok(())
}

/// `n` uniformly spaced samples from `start` to `end` (both included).
pub fn extract_line_profile(
    src: &dyn FieldSource,
    start: (f64, f64),
    end: (f64, f64),
    n: usize,
    t: f64,
) -> Result<LineProfile> {
    if n < 2 {
        return Err(Error::Invalid("a profile needs at least 2 samples".into()));
    }
    let (l, w) = src.extent();
    let inside = |(x, y): (f64, f64)| (-1e-9..=l + 1e-9).contains(&x) && (-1e-9..=w + 1e-9).contains(&y);
    if !inside(start) || !inside(end) {
        return Err(Error::Invalid(format!("path {start:?} → {end:?} leaves the domain")));
    }
    check_time(src, t)?;
    let len = (end.0 - start.0).hypot(end.1 - start.1);
    let pts: Vec<SpaceTimePoint> = (0..n)
        .map(|i| {
            // Endpoints are taken verbatim so they are exact.
            let (x, y) = match i {
                0 => start,
                _ if i == n - 1 => end,
                _ => {
                    let a = i as f64 / (n - 1) as f64;
                    (start.0 + a * (end.0 - start.0), start.1 + a * (end.1 - start.1))
                }
            };
            SpaceTimePoint::new(x, y, t)
        })
        .collect();
    let u = src.temperatures(&pts)?;
    let samples = (0..n).map(|i| (len * i as f64 / (n - 1) as f64, u[i])).collect();
    Ok(LineProfile { t, start, end, samples })
}

/// The source path clipped to the rectangle: from the start point along the
/// travel direction to where it leaves the domain.
pub fn source_path(length: f64, width: f64, start: (f64, f64), direction: (f64, f64)) -> ((f64, f64), (f64, f64)) {
    let exit = |p: f64, d: f64, hi: f64| {
        if d > 0.0 {
            (hi - p) / d
        } else if d < 0.0 {
            -p / d
        } else {
            f64::INFINITY
        }
    };
    let s = exit(start.0, direction.0, length).min(exit(start.1, direction.1, width));
    (start, (start.0 + s * direction.0, start.1 + s * direction.1))
}
