//! TOML run configuration.

use std::path::Path;

use heatpinn_core::fem::FemSettings;
use heatpinn_core::physics::{EdgeCondition, LossWeights, ResidualForm};
use heatpinn_core::sampling::SampleCounts;
use heatpinn_core::training::{SequentialConfig, TimeNormalization, TrainHyper};
use heatpinn_core::{Architecture, DomainSpec, Edge, MaterialProps, Problem, SourceSpec, WindowSchedule};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainSection {
    pub length: f64,
    pub width: f64,
    /// Temperature held on the Dirichlet edges, K.
    pub boundary_temperature: f64,
    /// Outward flux `k ∇u·n` on the Neumann edges, W/mm².
    pub boundary_flux: f64,
    /// Edges carrying the Dirichlet condition; the rest are Neumann.
    pub dirichlet_edges: Vec<String>,
    pub initial_temperature: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self {
            length: 20.0,
            width: 10.0,
            boundary_temperature: 298.0,
            boundary_flux: 0.001,
            dirichlet_edges: vec!["AD".into()],
            initial_temperature: 298.0,
        }
    }
}

/// No defaults: every run must state its material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    /// W/(mm·K)
    pub conductivity: f64,
    /// kg/mm³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub peak_power: f64,
    pub radius: f64,
    pub velocity: f64,
    pub start: [f64; 2],
    pub direction: [f64; 2],
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            peak_power: 5.0,
            radius: 1.0,
            velocity: 2.0,
            start: [0.0, 5.0],
            direction: [1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_offset: f64,
    pub output_scale: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden_layers: 9,
            hidden_width: 128,
            output_offset: 298.0,
            output_scale: 500.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScaling {
    Window,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualUnits {
    /// W/mm³
    Energy,
    /// Divided by γ, K/s.
    Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub t_total: f64,
    pub window: f64,
    pub epochs_per_phase: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub resample_every: usize,
    pub reset_adam_per_phase: bool,
    pub time_scaling: TimeScaling,
    pub residual_form: ResidualUnits,
    /// Interior points per optimizer step; 0 = full batch.
    pub minibatch: usize,
    pub weight_ic: f64,
    pub weight_bc: f64,
    pub weight_residual: f64,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let h = TrainHyper::default();
        let w = LossWeights::default();
        Self {
            t_total: 8.0,
            window: 2.0,
            epochs_per_phase: h.epochs_per_phase,
            learning_rate: h.learning_rate,
            lr_decay: h.lr_decay,
            lr_decay_every: h.lr_decay_every,
            resample_every: h.resample_every,
            reset_adam_per_phase: h.reset_adam_per_phase,
            time_scaling: TimeScaling::Window,
            residual_form: ResidualUnits::Energy,
            minibatch: 0,
            weight_ic: w.ic,
            weight_bc: w.bc,
            weight_residual: w.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub interior: usize,
    pub boundary_per_edge: usize,
    pub initial: usize,
    /// Fraction of interior points drawn around the moving source.
    pub source_focus: f64,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let c = SampleCounts::default();
        Self {
            interior: c.interior,
            boundary_per_edge: c.boundary_per_edge,
            initial: c.initial,
            source_focus: c.source_focus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FemSection {
    pub h: f64,
    pub dt: f64,
    pub tolerance: f64,
    pub lumped_mass: bool,
}

impl Default for FemSection {
    fn default() -> Self {
        let s = FemSettings::default();
        Self {
            h: s.h,
            dt: s.dt,
            tolerance: s.tolerance,
            lumped_mass: s.lumped_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Times (s) at which profiles, fields and comparisons are reported.
    pub times: Vec<f64>,
    pub profile_points: usize,
    /// Regular export grid, cells per direction.
    pub grid: [usize; 2],
    pub write_vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            times: vec![2.0, 4.0, 6.0, 8.0],
            profile_points: 201,
            grid: [80, 40],
            write_vtk: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub domain: DomainSection,
    pub material: MaterialSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub fem: FemSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), Error> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn parse_edge(name: &str) -> Result<Edge, Error> {
    Edge::ALL
        .into_iter()
        .find(|e| e.name().eq_ignore_ascii_case(name) || e.name().chars().rev().collect::<String>().eq_ignore_ascii_case(name))
        .ok_or_else(|| invalid("domain.dirichlet_edges", format!("unknown edge `{name}`")))
}

impl SimulationConfig {
    /// Table 1 material with every other section at its default.
    pub fn paper() -> Self {
        Self::from_toml_str(include_str!("../configs/paper.toml")).expect("bundled config is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        Self::from_table(toml::from_str(text)?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self, Error> {
        let cfg: Self = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read `path`, apply `key.path=value` overrides, validate.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: toml::Table = toml::from_str(&text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.problem()?;
        let d = &self.domain;
        positive("domain.length", d.length)?;
        positive("domain.width", d.width)?;
        let s = &self.source;
        positive("source.radius", s.radius)?;
        if s.peak_power < 0.0 {
            return Err(invalid("source.peak_power", "must be non-negative"));
        }
        let t = &self.training;
        positive("training.t_total", t.t_total)?;
        positive("training.window", t.window)?;
        if !(0.0..=1.0).contains(&self.sampling.source_focus) {
            return Err(invalid("sampling.source_focus", "must lie in [0, 1]"));
        }
        self.sequential()?;
        let f = &self.fem;
        positive("fem.h", f.h)?;
        positive("fem.dt", f.dt)?;
        if !(f.tolerance > 0.0 && f.tolerance < 1.0) {
            return Err(invalid("fem.tolerance", "must lie in (0, 1)"));
        }
        if self.output.profile_points < 2 {
            return Err(invalid("output.profile_points", "need at least 2"));
        }
        if self.output.grid.contains(&0) {
            return Err(invalid("output.grid", "cell counts must be positive"));
        }
        if let Some(t) = self.output.times.iter().find(|&&t| !(0.0..=self.training.t_total).contains(&t)) {
            return Err(invalid("output.times", format!("{t} s lies outside [0, t_total]")));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, Error> {
        let d = &self.domain;
        let mut domain = DomainSpec::rectangle(d.length, d.width, d.boundary_temperature, d.boundary_flux);
        for edge in Edge::ALL {
            domain.set_condition(edge, EdgeCondition::Neumann(d.boundary_flux));
        }
        for name in &d.dirichlet_edges {
            domain.set_condition(parse_edge(name)?, EdgeCondition::Dirichlet(d.boundary_temperature));
        }
        let m = &self.material;
        let material = MaterialProps::new(m.conductivity, m.density, m.specific_heat)
            .map_err(|e| invalid("material", e.to_string()))?;
        let s = &self.source;
        let problem = Problem {
            domain,
            material,
            source: SourceSpec {
                peak_power: s.peak_power,
                radius: s.radius,
                velocity: s.velocity,
                start: (s.start[0], s.start[1]),
                direction: (s.direction[0], s.direction[1]),
            },
            initial_temperature: d.initial_temperature,
        };
        problem.validate().map_err(|e| invalid("problem", e.to_string()))?;
        Ok(problem)
    }

    pub fn sequential(&self) -> Result<SequentialConfig, Error> {
        let t = &self.training;
        let n = &self.network;
        let arch = Architecture::new(n.hidden_layers, n.hidden_width).map_err(|e| invalid("network", e.to_string()))?;
        let hyper = TrainHyper {
            epochs_per_phase: t.epochs_per_phase,
            learning_rate: t.learning_rate,
            lr_decay: t.lr_decay,
            lr_decay_every: t.lr_decay_every,
            weights: LossWeights {
                ic: t.weight_ic,
                bc: t.weight_bc,
                residual: t.weight_residual,
            },
            resample_every: t.resample_every,
            reset_adam_per_phase: t.reset_adam_per_phase,
            time_normalization: match t.time_scaling {
                TimeScaling::Window => TimeNormalization::Window,
                TimeScaling::Global => TimeNormalization::Global,
            },
            minibatch: (t.minibatch > 0).then_some(t.minibatch),
            residual_form: match t.residual_form {
                ResidualUnits::Energy => ResidualForm::Energy,
                ResidualUnits::Rate => ResidualForm::Rate,
            },
            ..TrainHyper::default()
        };
        let schedule = WindowSchedule::new(t.t_total, t.window).map_err(|e| invalid("training", e.to_string()))?;
        let s = &self.sampling;
        let cfg = SequentialConfig {
            problem: self.problem()?,
            arch,
            hyper,
            schedule,
            counts: SampleCounts {
                interior: s.interior,
                boundary_per_edge: s.boundary_per_edge,
                initial: s.initial,
                source_focus: s.source_focus,
            },
            output_offset: n.output_offset,
            output_scale: n.output_scale,
        };
        cfg.validate().map_err(|e| invalid("training", e.to_string()))?;
        Ok(cfg)
    }

    pub fn fem_settings(&self) -> FemSettings {
        FemSettings {
            h: self.fem.h,
            dt: self.fem.dt,
            t_end: self.training.t_total,
            tolerance: self.fem.tolerance,
            lumped_mass: self.fem.lumped_mass,
        }
    }

    /// Canonical TOML of the resolved configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

/// Apply one `section.key=value` override. The value is parsed as a TOML
/// value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), Error> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must look like section.key=value"))?;
    let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut node = table;
    for k in parents {
        node = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(path, format!("`{k}` is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}
