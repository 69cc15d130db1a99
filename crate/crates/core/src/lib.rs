//! Physics-informed neural network solver for 2D transient heat conduction
//! driven by a moving Gaussian source, trained over a sequence of time windows
//! on a single warm-started network, plus a linear-triangle finite-element
//! reference solver.
//!
//! The crate is `no_std` + `alloc`. The `std` feature (on by default) only
//! enables runtime CPU feature detection in the matrix kernels and
//! `std::error::Error` impls.
#![cfg_attr(not(feature = "std"), no_std)]
#![deny(missing_debug_implementations)]

extern crate alloc;

pub mod autodiff;
pub mod fem;
pub mod network;
pub mod physics;
pub mod rng;
pub mod sampling;
pub mod training;

pub use autodiff::{eval_with_input_derivs, loss_gradient, Channels, DerivBundle, ParamGradient, SpaceTimePoint};
pub use network::{forward, init_network, Architecture, NetworkParams, Normalization, PinnModel};
pub use physics::{
    Edge, LossComponents, LossWeights, MaterialProps, Problem, SourceSpec, DomainSpec,
};
pub use training::{run_sequential, RunOutput, TrainHyper, WindowSchedule, WindowSnapshot};
