//! Run orchestration: train or solve, then write everything to disk.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use heatpinn_core::fem::{self, mms, FemSolution};
use heatpinn_core::network::PinnModel;
use heatpinn_core::training::{run_sequential, LossRecord, RunOutput, TrainObserver};
use heatpinn_core::{SpaceTimePoint, WindowSnapshot};
use serde::Serialize;

use crate::config::SimulationConfig;
use crate::output::{self, GridField, Provenance};
use crate::profile::{extract_line_profile, source_path, FieldSource, PinnField};
use crate::snapshot::{self, RunManifest, StoredSnapshot, WindowEntry};
use crate::{Error, Result};

pub fn provenance(cfg: &SimulationConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

/// The E–F segment: the source path clipped to the domain.
pub fn ef_path(cfg: &SimulationConfig) -> ((f64, f64), (f64, f64)) {
    let s = &cfg.source;
    source_path(
        cfg.domain.length,
        cfg.domain.width,
        (s.start[0], s.start[1]),
        (s.direction[0], s.direction[1]),
    )
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn time_tag(t: f64) -> String {
    format!("{t:.3}").replace('.', "p")
}

/// Prints one line per window and every `every` epochs to stderr.
#[derive(Debug)]
pub struct Progress {
    pub every: usize,
}

impl TrainObserver for Progress {
    fn on_window_start(&mut self, index: usize, _model: &PinnModel) {
        eprintln!("window {index}: training");
    }

    fn on_epoch(&mut self, window: usize, r: &LossRecord) {
        if self.every > 0 && r.epoch.is_multiple_of(self.every) {
            eprintln!(
                "window {window} epoch {:>6}  L_ic {:.3e}  L_bc {:.3e}  L_r {:.3e}  total {:.3e}",
                r.epoch, r.ic, r.bc, r.residual, r.total
            );
        }
    }

    fn on_window_done(&mut self, s: &WindowSnapshot, _history: &[LossRecord]) {
        eprintln!("window {}: done [{}, {}] s", s.index, s.t_start, s.t_end);
    }
}

/// Write snapshots, manifest and loss curves for (possibly partial) output.
pub fn write_run(dir: &Path, cfg: &SimulationConfig, out: &RunOutput) -> Result<RunManifest> {
    let snap_dir = dir.join("snapshots");
    create_dir(&snap_dir)?;
    let prov = provenance(cfg);
    let hash: [u8; 32] = hex::decode(&prov.config_hash)
        .expect("hash is hex")
        .try_into()
        .expect("sha-256 is 32 bytes");
    let weights = cfg.sequential()?.hyper.weights;
    let mut windows = Vec::with_capacity(out.snapshots.len());
    for snap in &out.snapshots {
        let file = format!("snapshots/{}", snapshot::snapshot_file_name(snap.index));
        snapshot::write(
            &dir.join(&file),
            &StoredSnapshot {
                snapshot: snap.clone(),
                seed: cfg.seed,
                config_hash: hash,
            },
        )?;
        windows.push(WindowEntry {
            index: snap.index,
            t_start: snap.t_start,
            t_end: snap.t_end,
            file,
            final_loss_total: snap.final_loss.total(&weights),
        });
    }
    let arch = cfg.sequential()?.arch;
    let manifest = RunManifest {
        config_hash: prov.config_hash.clone(),
        seed: cfg.seed,
        hidden_layers: arch.hidden_layers,
        hidden_width: arch.hidden_width,
        parameter_count: arch.param_count(),
        layers: snapshot::layer_manifest(arch),
        windows,
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| Error::io(dir, e))?;
    output::write_losses(&dir.join("losses.csv"), &prov, &out.histories)?;
    Ok(manifest)
}

/// Profiles (and optionally fields) at every configured output time.
pub fn write_products(dir: &Path, cfg: &SimulationConfig, src: &dyn FieldSource) -> Result<()> {
    let prov = provenance(cfg);
    let (a, b) = ef_path(cfg);
    let label = src.label();
    create_dir(&dir.join("profiles"))?;
    for &t in &cfg.output.times {
        let prof = extract_line_profile(src, a, b, cfg.output.profile_points, t)?;
        output::write_profile(
            &dir.join("profiles").join(format!("{label}_ef_t{}.csv", time_tag(t))),
            &prov,
            &prof.samples,
        )?;
        if cfg.output.write_vtk {
            let field = sample_grid(src, cfg.output.grid, t)?;
            create_dir(&dir.join("fields"))?;
            output::write_vtk(&dir.join("fields").join(format!("{label}_t{}.vtk", time_tag(t))), &prov, &field)?;
        }
    }
    Ok(())
}

/// Train per the configuration and write the run to `dir`. Windows completed
/// before a failure are still written.
pub fn run_pinn(cfg: &SimulationConfig, dir: &Path, observer: &mut dyn TrainObserver) -> Result<(RunManifest, RunOutput)> {
    create_dir(dir)?;
    let seq = cfg.sequential()?;
    match run_sequential(&seq, cfg.seed, observer) {
        Ok(out) => {
            let manifest = write_run(dir, cfg, &out)?;
            write_products(dir, cfg, &PinnField(&out.snapshots))?;
            Ok((manifest, out))
        }
        Err(e) => {
            write_run(dir, cfg, &e.completed)?;
            Err(e.error.into())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FemManifest {
    pub config_hash: String,
    pub seed: u64,
    pub h: f64,
    pub dt: f64,
    pub t_end: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub steps: usize,
    pub lumped_mass: bool,
    pub field_file: String,
}

pub fn solve_fem(cfg: &SimulationConfig) -> Result<FemSolution> {
    Ok(fem::solve_problem(&cfg.problem()?, &cfg.fem_settings())?)
}

/// Solve and write `fem/manifest.json` plus `fem/nodal_field.csv` (every
/// node at every step).
pub fn run_fem(cfg: &SimulationConfig, dir: &Path) -> Result<FemSolution> {
    let sol = solve_fem(cfg)?;
    let fem_dir = dir.join("fem");
    create_dir(&fem_dir)?;
    let prov = provenance(cfg);
    let path = fem_dir.join("nodal_field.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    writeln!(w, "{}", prov.comment()).map_err(io)?;
    writeln!(w, "x_mm,y_mm,t_s,u_K").map_err(io)?;
    for (t, u) in sol.times.iter().zip(&sol.temperatures) {
        for (&(x, y), v) in sol.mesh.nodes.iter().zip(u) {
            writeln!(w, "{x:?},{y:?},{t:?},{v:?}").map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    let manifest = FemManifest {
        config_hash: prov.config_hash.clone(),
        seed: cfg.seed,
        h: cfg.fem.h,
        dt: sol.dt,
        t_end: sol.t_end(),
        nodes: sol.mesh.num_nodes(),
        triangles: sol.mesh.num_triangles(),
        steps: sol.num_steps(),
        lumped_mass: cfg.fem.lumped_mass,
        field_file: "nodal_field.csv".into(),
    };
    let mpath = fem_dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    write_products(&fem_dir, cfg, &sol)?;
    Ok(sol)
}

/// `(h, L2 error)` pairs and the observed orders between them.
pub type MmsReport = (Vec<(f64, f64)>, Vec<f64>);

/// Manufactured-solution spatial study on the configured domain and material.
pub fn mms_report(cfg: &SimulationConfig, hs: &[f64], dt: f64, t_end: f64) -> Result<MmsReport> {
    let case = mms::ManufacturedCase {
        length: cfg.domain.length,
        width: cfg.domain.width,
        material: cfg.problem()?.material,
        base: cfg.domain.boundary_temperature,
    };
    let study = case.spatial_study(hs, dt, t_end)?;
    let orders = mms::observed_orders(&study);
    Ok((study, orders))
}

/// Field on a regular `[nx, ny]`-cell grid at time `t`.
pub fn sample_grid(src: &dyn FieldSource, cells: [usize; 2], t: f64) -> Result<GridField> {
    let (l, w) = src.extent();
    let (nx, ny) = (cells[0] + 1, cells[1] + 1);
    let spacing = (l / cells[0] as f64, w / cells[1] as f64);
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            // Last row/column pinned to the edge to avoid round-off outside.
            let x = if i + 1 == nx { l } else { i as f64 * spacing.0 };
            let y = if j + 1 == ny { w } else { j as f64 * spacing.1 };
            pts.push(SpaceTimePoint::new(x, y, t));
        }
    }
    crate::profile::check_time(src, t)?;
    Ok(GridField {
        t,
        nx,
        ny,
        origin: (0.0, 0.0),
        spacing,
        values: src.temperatures(&pts)?,
    })
}

/// Default output directory for a subcommand.
pub fn default_out_dir() -> PathBuf {
    PathBuf::from("heatpinn-out")
}
