//! Adam and sequential time-window training.
//!
//! The simulation interval is tiled into windows. One network is trained on
//! the first window against the uniform initial temperature; each later
//! window continues training the *same* parameters, with the previous
//! window's end-time prediction as its initial condition. Every finished
//! window is frozen into a [`WindowSnapshot`]; queries dispatch on time.

use alloc::vec::Vec;

use thiserror::Error;

use crate::autodiff::{AutodiffError, ParamGradient, SpaceTimePoint};
use crate::network::{init_network, Architecture, NetworkError, NetworkParams, Normalization, PinnModel};
use crate::physics::{self, InitialConditionData, LossComponents, LossWeights, PhysicsError, Problem, ResidualForm, TrainingBatch};
use crate::rng;
use crate::sampling::{self, SampleCounts};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("invalid training setting {field}: {reason}")]
    InvalidSetting { field: &'static str, reason: &'static str },
    #[error("gradient has {got} entries, parameters have {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite gradient at step {step}")]
    NonFiniteGradient { step: u64 },
    #[error("training diverged in window {window} at epoch {epoch}: {reason}")]
    Diverged {
        window: usize,
        epoch: usize,
        reason: DivergenceReason,
        history: Vec<LossRecord>,
    },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DivergenceReason {
    NonFiniteLoss,
    NonFiniteGradient,
    Autodiff(AutodiffError),
}

impl core::fmt::Display for DivergenceReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DivergenceReason::NonFiniteLoss => f.write_str("non-finite total loss"),
            DivergenceReason::NonFiniteGradient => f.write_str("non-finite gradient"),
            DivergenceReason::Autodiff(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(net: &NetworkParams) -> Self {
        Self {
            m: alloc::vec![0.0; net.len()],
            v: alloc::vec![0.0; net.len()],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &ParamGradient,
    state: &mut AdamState,
    hyper: &AdamHyper,
    learning_rate: f64,
) -> Result<(), TrainError> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(TrainError::ShapeMismatch {
            expected: n,
            got: grads.len(),
        });
    }
    if !grads.is_finite() {
        return Err(TrainError::NonFiniteGradient { step: state.step });
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(hyper.beta1, t);
    let bc2 = 1.0 - libm::pow(hyper.beta2, t);
    let (b1, b2) = (hyper.beta1, hyper.beta2);
    for (((p, &g), m), v) in params
        .as_mut_slice()
        .iter_mut()
        .zip(grads.as_slice())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= learning_rate * m_hat / (libm::sqrt(v_hat) + hyper.epsilon);
    }
    Ok(())
}

/// How the time input is scaled to `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeNormalization {
    /// Over the active window.
    #[default]
    Window,
    /// Over the whole simulation interval.
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHyper {
    pub epochs_per_phase: usize,
    pub learning_rate: f64,
    /// Multiplicative decay applied every `lr_decay_every` epochs.
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub adam: AdamHyper,
    pub weights: LossWeights,
    /// Fresh collocation points every this many epochs.
    pub resample_every: usize,
    pub reset_adam_per_phase: bool,
    pub time_normalization: TimeNormalization,
    /// Interior points per step; `None` = full batch.
    pub minibatch: Option<usize>,
    pub residual_form: ResidualForm,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            epochs_per_phase: 20_000,
            learning_rate: 1e-3,
            lr_decay: 0.9,
            lr_decay_every: 2_000,
            adam: AdamHyper::default(),
            weights: LossWeights::default(),
            resample_every: 500,
            reset_adam_per_phase: true,
            time_normalization: TimeNormalization::Window,
            minibatch: None,
            residual_form: ResidualForm::Energy,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field, reason| Err(TrainError::InvalidSetting { field, reason });
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay", "must be in (0, 1]");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every", "must be positive");
        }
        let a = &self.adam;
        if !(a.beta1 > 0.0 && a.beta1 < 1.0 && a.beta2 > 0.0 && a.beta2 < 1.0) {
            return bad("adam", "betas must lie in (0, 1)");
        }
        if !(a.epsilon > 0.0) {
            return bad("adam.epsilon", "must be positive");
        }
        if self.resample_every == 0 {
            return bad("resample_every", "must be positive");
        }
        if self.minibatch == Some(0) {
            return bad("minibatch", "must be positive");
        }
        self.weights.validate()?;
        Ok(())
    }

    /// Learning rate at a given epoch of a phase.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * libm::pow(self.lr_decay, (epoch / self.lr_decay_every) as f64)
    }
}

/// Windows tiling `[0, t_total]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSchedule {
    pub t_total: f64,
    pub dt_window: f64,
    pub windows: Vec<(f64, f64)>,
}

impl WindowSchedule {
    /// `⌈t_total/Δt⌉` windows of length Δt; the last one is clipped to end
    /// exactly at `t_total`.
    pub fn new(t_total: f64, dt_window: f64) -> Result<Self, TrainError> {
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(TrainError::InvalidSetting {
                field: "t_total",
                reason: "must be positive",
            });
        }
        if !(dt_window > 0.0 && dt_window.is_finite()) {
            return Err(TrainError::InvalidSetting {
                field: "dt_window",
                reason: "must be positive",
            });
        }
        let count = libm::ceil(t_total / dt_window - 1e-9).max(1.0) as usize;
        let windows = (0..count)
            .map(|k| {
                let start = k as f64 * dt_window;
                let end = if k + 1 == count {
                    t_total
                } else {
                    (k + 1) as f64 * dt_window
                };
                (start, end)
            })
            .collect();
        Ok(Self {
            t_total,
            dt_window,
            windows,
        })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// One row of a loss history. Components are unweighted; `total` is weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub ic: f64,
    pub bc: f64,
    pub residual: f64,
    pub total: f64,
}

impl LossRecord {
    fn new(epoch: usize, c: &LossComponents, w: &LossWeights) -> Self {
        Self {
            epoch,
            ic: c.ic,
            bc: c.bc(),
            residual: c.residual,
            total: c.total(w),
        }
    }
}

/// Frozen parameters of one trained window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSnapshot {
    pub index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub model: PinnModel,
    pub final_loss: LossComponents,
}

impl WindowSnapshot {
    pub fn temperature(&self, p: &SpaceTimePoint) -> Result<f64, AutodiffError> {
        self.model.temperature(p)
    }
}

/// Where a window's initial condition comes from.
#[derive(Debug, Clone, Copy)]
pub enum InitialCondition<'a> {
    Uniform(f64),
    Previous(&'a WindowSnapshot),
}

/// Initial-condition data for the window following `snapshot`: `points`
/// (at its end time) labelled with its own predictions.
pub fn transfer_ic(snapshot: &WindowSnapshot, points: Vec<SpaceTimePoint>) -> Result<InitialConditionData, AutodiffError> {
    let targets = if points.is_empty() {
        Vec::new()
    } else {
        snapshot.model.temperatures(&points)?
    };
    Ok(InitialConditionData { points, targets })
}

fn initial_data(ic: &InitialCondition<'_>, task: &WindowTask<'_>, seed: u64) -> Result<InitialConditionData, AutodiffError> {
    let p = task.problem;
    let points = sampling::initial_points(&p.domain, &p.source, task.range.0, task.counts, seed);
    match ic {
        InitialCondition::Uniform(v) => Ok(InitialConditionData::uniform(points, *v)),
        InitialCondition::Previous(s) => transfer_ic(s, points),
    }
}

/// Hooks for progress reporting and persistence.
pub trait TrainObserver {
    fn on_window_start(&mut self, _index: usize, _model: &PinnModel) {}
    fn on_epoch(&mut self, _window: usize, _record: &LossRecord) {}
    fn on_window_done(&mut self, _snapshot: &WindowSnapshot, _history: &[LossRecord]) {}
}

impl TrainObserver for () {}

/// Everything one window's optimization needs besides the network.
#[derive(Debug, Clone, Copy)]
pub struct WindowTask<'a> {
    pub index: usize,
    pub range: (f64, f64),
    pub problem: &'a Problem,
    pub hyper: &'a TrainHyper,
    pub counts: &'a SampleCounts,
    pub seed: u64,
}

fn build_batch(task: &WindowTask<'_>, ic: &InitialCondition<'_>, round: usize) -> Result<TrainingBatch, AutodiffError> {
    let seed = rng::derive_seed(task.seed, &[task.index as u64, round as u64]);
    let d = &task.problem.domain;
    let focused = task.counts.focused();
    let mut interior = sampling::sample_interior(d, task.range, task.counts.interior - focused, seed);
    interior.extend(sampling::sample_near_source(d, &task.problem.source, task.range, focused, seed));
    let boundary = sampling::sample_boundary(d, task.range, task.counts.boundary_per_edge, seed);
    let (dirichlet, neumann) = sampling::split_boundary(d, &boundary);
    let initial = initial_data(ic, task, seed)?;
    Ok(TrainingBatch {
        interior,
        dirichlet,
        neumann,
        initial,
    })
}

/// Interior subset used at `step` when minibatching: every `chunks`-th
/// point from offset `step mod chunks`, so each subset mixes uniform and
/// source-focused points.
fn minibatch_view(batch: &TrainingBatch, size: Option<usize>, step: usize) -> Option<TrainingBatch> {
    let mb = size?;
    let n = batch.interior.len();
    if mb >= n {
        return None;
    }
    let chunks = n.div_ceil(mb);
    let offset = step % chunks;
    Some(TrainingBatch {
        interior: batch.interior.iter().skip(offset).step_by(chunks).copied().collect(),
        dirichlet: batch.dirichlet.clone(),
        neumann: batch.neumann.clone(),
        initial: batch.initial.clone(),
    })
}

/// Train `model` on one window for `hyper.epochs_per_phase` epochs.
///
/// Returns the per-epoch loss history and the loss components of the final
/// parameters on the last batch.
pub fn train_window(
    model: &mut PinnModel,
    adam: &mut AdamState,
    task: &WindowTask<'_>,
    ic: &InitialCondition<'_>,
    observer: &mut dyn TrainObserver,
) -> Result<(Vec<LossRecord>, LossComponents), TrainError> {
    let hyper = task.hyper;
    let weights = &hyper.weights;
    let mut history = Vec::with_capacity(hyper.epochs_per_phase);
    let diverged = |epoch, reason, history: &mut Vec<LossRecord>| TrainError::Diverged {
        window: task.index,
        epoch,
        reason,
        history: core::mem::take(history),
    };
    let eval = |model: &PinnModel, batch: &TrainingBatch| physics::loss_and_gradient(model, task.problem, weights, hyper.residual_form, batch);

    let mut batch = build_batch(task, ic, 0).map_err(|e| diverged(0, DivergenceReason::Autodiff(e), &mut history))?;
    let mut round_start = 0;
    for epoch in 0..hyper.epochs_per_phase {
        if epoch > 0 && epoch % hyper.resample_every == 0 {
            batch = build_batch(task, ic, epoch / hyper.resample_every)
                .map_err(|e| diverged(epoch, DivergenceReason::Autodiff(e), &mut history))?;
            round_start = epoch;
        }
        let view = minibatch_view(&batch, hyper.minibatch, epoch - round_start);
        let (components, grad) = match eval(model, view.as_ref().unwrap_or(&batch)) {
            Ok(r) => r,
            Err(PhysicsError::Autodiff(e)) => return Err(diverged(epoch, DivergenceReason::Autodiff(e), &mut history)),
            Err(e) => return Err(e.into()),
        };
        let record = LossRecord::new(epoch, &components, weights);
        observer.on_epoch(task.index, &record);
        history.push(record);
        if !record.total.is_finite() {
            return Err(diverged(epoch, DivergenceReason::NonFiniteLoss, &mut history));
        }
        if !grad.is_finite() {
            return Err(diverged(epoch, DivergenceReason::NonFiniteGradient, &mut history));
        }
        adam_step(&mut model.params, &grad, adam, &hyper.adam, hyper.learning_rate_at(epoch))?;
    }

    let final_loss = match eval(model, &batch) {
        Ok((c, _)) => c,
        Err(PhysicsError::Autodiff(e)) => {
            return Err(diverged(hyper.epochs_per_phase, DivergenceReason::Autodiff(e), &mut history))
        }
        Err(e) => return Err(e.into()),
    };
    if !final_loss.is_finite() || !model.params.is_finite() {
        return Err(diverged(hyper.epochs_per_phase, DivergenceReason::NonFiniteLoss, &mut history));
    }
    Ok((history, final_loss))
}

/// Inputs of a full sequential run.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialConfig {
    pub problem: Problem,
    pub arch: Architecture,
    pub hyper: TrainHyper,
    pub schedule: WindowSchedule,
    pub counts: SampleCounts,
    /// Output map `u = offset + scale·û`.
    pub output_offset: f64,
    pub output_scale: f64,
}

impl SequentialConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.problem.validate()?;
        self.arch.validate()?;
        self.hyper.validate()?;
        let c = &self.counts;
        if c.interior == 0 || c.initial == 0 {
            return Err(TrainError::InvalidSetting {
                field: "sampling",
                reason: "interior and initial counts must be positive",
            });
        }
        Normalization::new((0.0, 1.0), (0.0, 1.0), (0.0, 1.0), self.output_offset, self.output_scale)?;
        Ok(())
    }

    /// Normalization used while training window `range`.
    pub fn normalization_for(&self, range: (f64, f64)) -> Result<Normalization, NetworkError> {
        let d = &self.problem.domain;
        let t_range = match self.hyper.time_normalization {
            TimeNormalization::Window => range,
            TimeNormalization::Global => (0.0, self.schedule.t_total),
        };
        Normalization::new((0.0, d.length), (0.0, d.width), t_range, self.output_offset, self.output_scale)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub snapshots: Vec<WindowSnapshot>,
    /// Loss history per window, in window order.
    pub histories: Vec<Vec<LossRecord>>,
}

/// A failed run, with every window completed before the failure.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{error}")]
pub struct RunError {
    pub error: TrainError,
    pub completed: RunOutput,
}

/// Train all windows in order on one warm-started network.
pub fn run_sequential(
    config: &SequentialConfig,
    seed: u64,
    observer: &mut dyn TrainObserver,
) -> Result<RunOutput, RunError> {
    let mut out = RunOutput {
        snapshots: Vec::with_capacity(config.schedule.len()),
        histories: Vec::with_capacity(config.schedule.len()),
    };
    let fail = |error: TrainError, out: RunOutput| RunError { error, completed: out };
    if let Err(e) = config.validate() {
        return Err(fail(e, out));
    }

    let params = init_network(config.arch, seed);
    let first = config.schedule.windows[0];
    let norm = match config.normalization_for(first) {
        Ok(n) => n,
        Err(e) => return Err(fail(e.into(), out)),
    };
    let mut model = PinnModel::new(params, norm);
    let mut adam = AdamState::new(&model.params);

    for (index, &range) in config.schedule.windows.iter().enumerate() {
        model.norm = match config.normalization_for(range) {
            Ok(n) => n,
            Err(e) => return Err(fail(e.into(), out)),
        };
        if config.hyper.reset_adam_per_phase {
            adam = AdamState::new(&model.params);
        }
        observer.on_window_start(index, &model);
        let task = WindowTask {
            index,
            range,
            problem: &config.problem,
            hyper: &config.hyper,
            counts: &config.counts,
            seed,
        };
        let ic = match out.snapshots.last() {
            None => InitialCondition::Uniform(config.problem.initial_temperature),
            Some(prev) => InitialCondition::Previous(prev),
        };
        match train_window(&mut model, &mut adam, &task, &ic, observer) {
            Ok((history, final_loss)) => {
                let snap = WindowSnapshot {
                    index,
                    t_start: range.0,
                    t_end: range.1,
                    model: model.clone(),
                    final_loss,
                };
                observer.on_window_done(&snap, &history);
                out.snapshots.push(snap);
                out.histories.push(history);
            }
            Err(e) => return Err(fail(e, out)),
        }
    }
    Ok(out)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("time {0} s is outside every window")]
    OutOfRange(f64),
    #[error("no snapshots")]
    Empty,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Index of the snapshot responsible for time `t`. A time on a shared
/// boundary belongs to the later window.
pub fn select_window(snapshots: &[WindowSnapshot], t: f64) -> Result<usize, QueryError> {
    let last = snapshots.last().ok_or(QueryError::Empty)?;
    if !(t >= snapshots[0].t_start && t <= last.t_end) {
        return Err(QueryError::OutOfRange(t));
    }
    Ok(snapshots.iter().rposition(|s| s.t_start <= t).unwrap_or(0))
}

/// Temperature at `p` from the window containing `p.t`.
pub fn query(snapshots: &[WindowSnapshot], p: &SpaceTimePoint) -> Result<f64, QueryError> {
    let k = select_window(snapshots, p.t)?;
    Ok(snapshots[k].temperature(p)?)
}

/// Temperatures at many points; points are grouped per window so each
/// network is evaluated in batches.
pub fn query_batch(snapshots: &[WindowSnapshot], points: &[SpaceTimePoint]) -> Result<Vec<f64>, QueryError> {
    let mut out = alloc::vec![0.0; points.len()];
    let mut groups: Vec<Vec<usize>> = alloc::vec![Vec::new(); snapshots.len()];
    for (i, p) in points.iter().enumerate() {
        groups[select_window(snapshots, p.t)?].push(i);
    }
    for (k, idx) in groups.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let pts: Vec<_> = idx.iter().map(|&i| points[i]).collect();
        for (&i, u) in idx.iter().zip(snapshots[k].model.temperatures(&pts)?) {
            out[i] = u;
        }
    }
    Ok(out)
}
