//! Velocity sweep: temperature at a fixed probe when the source passes it.

use heatpinn_core::training::{query, run_sequential, TrainObserver};
use heatpinn_core::SpaceTimePoint;

use crate::config::SimulationConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub velocity: f64,
    /// Time at which the source centre is closest to the probe, s.
    pub t_pass: f64,
    pub fem: f64,
    pub pinn: Option<f64>,
}

/// Time of closest approach of the source centre to `probe`.
pub fn pass_time(cfg: &SimulationConfig, probe: (f64, f64)) -> Result<f64> {
    let s = &cfg.source;
    let along = (probe.0 - s.start[0]) * s.direction[0] + (probe.1 - s.start[1]) * s.direction[1];
    if !(s.velocity > 0.0) || along <= 0.0 {
        return Err(Error::Invalid(format!(
            "the source never passes the probe {probe:?} at velocity {}",
            s.velocity
        )));
    }
    Ok(along / s.velocity)
}

/// `cfg` with the given velocity and a horizon ending at the pass time.
pub fn config_for(cfg: &SimulationConfig, velocity: f64, probe: (f64, f64)) -> Result<(SimulationConfig, f64)> {
    let mut c = cfg.clone();
    c.source.velocity = velocity;
    let t_pass = pass_time(&c, probe)?;
    c.training.t_total = t_pass;
    c.output.times = vec![t_pass];
    c.validate()?;
    Ok((c, t_pass))
}

pub fn fem_value(cfg: &SimulationConfig, velocity: f64, probe: (f64, f64)) -> Result<f64> {
    let (c, t) = config_for(cfg, velocity, probe)?;
    let sol = crate::pipeline::solve_fem(&c)?;
    Ok(sol.interpolate(&SpaceTimePoint::new(probe.0, probe.1, t))?)
}

pub fn pinn_value(cfg: &SimulationConfig, velocity: f64, probe: (f64, f64), observer: &mut dyn TrainObserver) -> Result<f64> {
    let (c, t) = config_for(cfg, velocity, probe)?;
    let out = run_sequential(&c.sequential()?, c.seed, observer).map_err(|e| e.error)?;
    Ok(query(&out.snapshots, &SpaceTimePoint::new(probe.0, probe.1, t))?)
}

pub fn sweep(
    cfg: &SimulationConfig,
    velocities: &[f64],
    probe: (f64, f64),
    with_pinn: bool,
    observer: &mut dyn TrainObserver,
) -> Result<Vec<SweepRow>> {
    velocities
        .iter()
        .map(|&v| {
            let (_, t_pass) = config_for(cfg, v, probe)?;
            Ok(SweepRow {
                velocity: v,
                t_pass,
                fem: fem_value(cfg, v, probe)?,
                pinn: if with_pinn { Some(pinn_value(cfg, v, probe, observer)?) } else { None },
            })
        })
        .collect()
}

/// True when values strictly decrease as velocity increases.
pub fn strictly_decreasing(rows: &[SweepRow], pick: impl Fn(&SweepRow) -> Option<f64>) -> bool {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.velocity.total_cmp(&b.velocity));
    sorted.windows(2).all(|w| match (pick(w[0]), pick(w[1])) {
        (Some(a), Some(b)) => a > b,
        _ => false,
    })
}
