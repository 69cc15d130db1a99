use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heatpinn::compare::{compare, ProbeGrid};
use heatpinn::config::SimulationConfig;
use heatpinn::output;
use heatpinn::pipeline::{self, Progress};
use heatpinn::profile::{extract_line_profile, FieldSource, PinnField};
use heatpinn::snapshot;
use heatpinn::sweep;
use heatpinn::Result;

#[derive(Parser, Debug)]
#[command(name = "heatpinn", version, about = "PINN and FEM solvers for a plate heated by a moving Gaussian source")]
struct Cli {
    /// TOML configuration; the bundled Table 1 profile when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set training.epochs_per_phase=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "heatpinn-out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Source {
    Pinn,
    Fem,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Vtk,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train all windows and write snapshots, manifest, losses and profiles.
    RunPinn {
        /// Print losses every this many epochs (0 = window lines only).
        #[arg(long, default_value_t = 500)]
        progress_every: usize,
    },
    /// Solve the reference FEM problem and write nodal fields.
    RunFem {
        /// Run the manufactured-solution convergence study instead.
        #[arg(long)]
        mms: bool,
    },
    /// Temperature along the E–F line at time `t`.
    Profile {
        #[arg(long, value_enum)]
        source: Source,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        points: Option<usize>,
    },
    /// PINN-vs-FEM metrics at the configured output times.
    Compare {
        #[arg(long, default_value_t = 80)]
        grid_x: usize,
        #[arg(long, default_value_t = 40)]
        grid_y: usize,
    },
    /// Sample the field on the configured grid at time `t`.
    Export {
        #[arg(long, value_enum)]
        source: Source,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Probe temperature when the source passes (10, 5) mm, per velocity.
    SweepVelocity {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 1.0, 2.0])]
        velocities: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![10.0, 5.0])]
        probe: Vec<f64>,
        /// Also train a PINN per velocity.
        #[arg(long)]
        pinn: bool,
    },
}

fn load_config(cli: &Cli) -> Result<SimulationConfig> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    match &cli.config {
        Some(path) => SimulationConfig::load(path, &overrides),
        None => {
            let mut table: toml::Table = toml::from_str(&SimulationConfig::paper().to_toml())?;
            for o in &overrides {
                heatpinn::config::apply_override(&mut table, o)?;
            }
            SimulationConfig::from_table(table)
        }
    }
}

/// A solution loaded for sampling.
enum Loaded {
    Pinn(Vec<heatpinn_core::WindowSnapshot>),
    Fem(heatpinn_core::fem::FemSolution),
}

impl Loaded {
    fn load(which: Source, cfg: &SimulationConfig, out_dir: &Path) -> Result<Self> {
        Ok(match which {
            Source::Pinn => Loaded::Pinn(snapshot::load_run(out_dir)?.1),
            Source::Fem => Loaded::Fem(pipeline::solve_fem(cfg)?),
        })
    }

    fn with<R>(&self, f: impl FnOnce(&dyn FieldSource) -> R) -> R {
        match self {
            Loaded::Pinn(s) => f(&PinnField(s)),
            Loaded::Fem(sol) => f(sol),
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = &cli.out_dir;
    let prov = pipeline::provenance(&cfg);
    match cli.command {
        Command::RunPinn { progress_every } => {
            let (manifest, _) = pipeline::run_pinn(&cfg, out, &mut Progress { every: progress_every })?;
            println!("wrote {} window snapshot(s) to {}", manifest.windows.len(), out.display());
        }
        Command::RunFem { mms: true } => {
            let (study, orders) = pipeline::mms_report(&cfg, &[1.0, 0.5, 0.25], 0.01, 1.0)?;
            for (h, e) in &study {
                println!("h = {h:<6} L2 error = {e:.6e}");
            }
            for o in orders {
                println!("observed order {o:.3}");
            }
        }
        Command::RunFem { mms: false } => {
            let sol = pipeline::run_fem(&cfg, out)?;
            println!(
                "{} nodes, {} steps, written to {}",
                sol.mesh.num_nodes(),
                sol.num_steps(),
                out.join("fem").display()
            );
        }
        Command::Profile { source, t, points } => {
            let loaded = Loaded::load(source, &cfg, out)?;
            let (a, b) = pipeline::ef_path(&cfg);
            let n = points.unwrap_or(cfg.output.profile_points);
            let (prof, label) = loaded.with(|src| Ok::<_, heatpinn::Error>((extract_line_profile(src, a, b, n, t)?, src.label())))?;
            let path = out.join(format!("profile_{label}_t{t}.csv"));
            output::write_profile(&path, &prov, &prof.samples)?;
            let (s, u) = prof.peak();
            println!("peak {u:.3} K at s = {s:.3} mm; written to {}", path.display());
        }
        Command::Compare { grid_x, grid_y } => {
            let (_, snaps) = snapshot::load_run(out)?;
            let fem = pipeline::solve_fem(&cfg)?;
            let report = compare(
                &PinnField(&snaps),
                &fem,
                &cfg.output.times,
                ProbeGrid { nx: grid_x, ny: grid_y },
                pipeline::ef_path(&cfg),
                cfg.output.profile_points,
            )?;
            report.write_csv(&out.join("comparison.csv"), &prov)?;
            print!("{}", report.summary());
        }
        Command::Export { source, t, format } => {
            let loaded = Loaded::load(source, &cfg, out)?;
            let (field, label) = loaded.with(|src| Ok::<_, heatpinn::Error>((pipeline::sample_grid(src, cfg.output.grid, t)?, src.label())))?;
            let stem = format!("field_{label}_t{t}");
            let path = match format {
                Format::Csv => {
                    let p = out.join(format!("{stem}.csv"));
                    output::write_field_csv(&p, &prov, &field)?;
                    p
                }
                Format::Vtk => {
                    let p = out.join(format!("{stem}.vtk"));
                    output::write_vtk(&p, &prov, &field)?;
                    p
                }
            };
            println!("wrote {}", path.display());
        }
        Command::SweepVelocity { velocities, probe, pinn } => {
            let probe = match probe[..] {
                [x, y] => (x, y),
                _ => return Err(heatpinn::Error::Invalid("--probe takes two values: x,y".into())),
            };
            let rows = sweep::sweep(&cfg, &velocities, probe, pinn, &mut Progress { every: 0 })?;
            println!("velocity_mm_s,t_pass_s,fem_K,pinn_K");
            for r in &rows {
                let p = r.pinn.map(|v| format!("{v:.3}")).unwrap_or_default();
                println!("{},{:.4},{:.3},{p}", r.velocity, r.t_pass, r.fem);
            }
            println!(
                "fem strictly decreasing in v: {}",
                sweep::strictly_decreasing(&rows, |r| Some(r.fem))
            );
            if pinn {
                println!("pinn strictly decreasing in v: {}", sweep::strictly_decreasing(&rows, |r| r.pinn));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
