//! PINN-vs-FEM discrepancy metrics.

use std::fmt::Write as _;
use std::path::Path;

use heatpinn_core::SpaceTimePoint;

use crate::output::Provenance;
use crate::profile::{check_time, extract_line_profile, FieldSource, LineProfile};
use crate::{Error, Result};

/// `(nx + 1) × (ny + 1)` nodes covering the closed rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeGrid {
    pub nx: usize,
    pub ny: usize,
}

impl ProbeGrid {
    pub fn points(&self, length: f64, width: f64, t: f64) -> Vec<SpaceTimePoint> {
        let mut pts = Vec::with_capacity((self.nx + 1) * (self.ny + 1));
        for j in 0..=self.ny {
            for i in 0..=self.nx {
                let x = length * i as f64 / self.nx as f64;
                let y = width * j as f64 / self.ny as f64;
                pts.push(SpaceTimePoint::new(x, y, t));
            }
        }
        pts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeMetrics {
    pub t: f64,
    /// Root-mean-square difference over the probe grid, K.
    pub l2: f64,
    pub linf: f64,
    /// Peak over the probe grid and its location, for `a` and `b`.
    pub peak_a: (f64, (f64, f64)),
    pub peak_b: (f64, (f64, f64)),
    pub profile_a: LineProfile,
    pub profile_b: LineProfile,
}

impl TimeMetrics {
    /// `‖a − b‖₂ / ‖b‖₂` over the profile samples.
    pub fn profile_relative_l2(&self) -> f64 {
        relative_l2(&self.profile_a, &self.profile_b)
    }

    /// `|max a − max b| / max b` over the profile samples.
    pub fn profile_peak_error(&self) -> f64 {
        let (pa, pb) = (self.profile_a.peak().1, self.profile_b.peak().1);
        (pa - pb).abs() / pb.abs()
    }
}

pub fn relative_l2(a: &LineProfile, b: &LineProfile) -> f64 {
    let num: f64 = a.samples.iter().zip(&b.samples).map(|(p, q)| (p.1 - q.1).powi(2)).sum();
    let den: f64 = b.samples.iter().map(|q| q.1 * q.1).sum();
    (num / den).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub label_a: &'static str,
    pub label_b: &'static str,
    pub rows: Vec<TimeMetrics>,
}

fn peak(pts: &[SpaceTimePoint], u: &[f64]) -> (f64, (f64, f64)) {
    let (i, v) = u
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    (v, (pts[i].x, pts[i].y))
}

/// Metrics of `a` against `b` at each time. The profile runs along
/// `path` with `n` samples.
pub fn compare(
    a: &dyn FieldSource,
    b: &dyn FieldSource,
    times: &[f64],
    grid: ProbeGrid,
    path: ((f64, f64), (f64, f64)),
    n: usize,
) -> Result<ComparisonReport> {
    if grid.nx == 0 || grid.ny == 0 {
        return Err(Error::Invalid("probe grid needs at least one cell per direction".into()));
    }
    let (length, width) = b.extent();
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        check_time(a, t)?;
        check_time(b, t)?;
        let pts = grid.points(length, width, t);
        let ua = a.temperatures(&pts)?;
        let ub = b.temperatures(&pts)?;
        let diffs = ua.iter().zip(&ub).map(|(x, y)| (x - y).abs());
        let (sq, linf) = diffs.fold((0.0, 0.0f64), |(s, m), d| (s + d * d, m.max(d)));
        rows.push(TimeMetrics {
            t,
            l2: (sq / pts.len() as f64).sqrt(),
            linf,
            peak_a: peak(&pts, &ua),
            peak_b: peak(&pts, &ub),
            profile_a: extract_line_profile(a, path.0, path.1, n, t)?,
            profile_b: extract_line_profile(b, path.0, path.1, n, t)?,
        });
    }
    Ok(ComparisonReport {
        label_a: a.label(),
        label_b: b.label(),
        rows,
    })
}

impl ComparisonReport {
    pub fn write_csv(&self, path: &Path, prov: &Provenance) -> Result<()> {
        let mut out = format!("{}\n", prov.comment());
        let (a, b) = (self.label_a, self.label_b);
        let _ = writeln!(
            out,
            "t_s,l2_K,linf_K,peak_{a}_K,peak_{a}_x_mm,peak_{a}_y_mm,peak_{b}_K,peak_{b}_x_mm,peak_{b}_y_mm,profile_rel_l2,profile_peak_rel_err"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.t,
                r.l2,
                r.linf,
                r.peak_a.0,
                r.peak_a.1 .0,
                r.peak_a.1 .1,
                r.peak_b.0,
                r.peak_b.1 .0,
                r.peak_b.1 .1,
                r.profile_relative_l2(),
                r.profile_peak_error()
            );
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let (a, b) = (self.label_a, self.label_b);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "t = {:>6.3} s  rms {:8.3} K  max {:8.3} K  peak {a} {:7.2} K at ({:.2}, {:.2})  peak {b} {:7.2} K at ({:.2}, {:.2})  profile rel L2 {:.4}  profile peak err {:.4}",
                r.t,
                r.l2,
                r.linf,
                r.peak_a.0,
                r.peak_a.1 .0,
                r.peak_a.1 .1,
                r.peak_b.0,
                r.peak_b.1 .0,
                r.peak_b.1 .1,
                r.profile_relative_l2(),
                r.profile_peak_error()
            );
        }
        s
    }
}
