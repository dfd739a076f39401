//! Core algorithms for the Gates–Westcott growth model in 2+1 dimensions.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] holds admissible height functions, their validation and the
//!   discretizer that turns continuous profiles into lattice fields.
//! * [`dynamics`] is the exact event-driven simulator with a replayable log.
//! * [`polymer`] recomputes heights through the directed-polymer formula and
//!   provides longest-chain statistics.
//! * [`equilibrium`] covers the speed function, kernel quadrature and
//!   stationary Monte Carlo estimates.
//! * [`hj`] solves the limiting Hamilton–Jacobi equation.
//! * [`hydro`] rescales simulations and compares them with the PDE.
//! * [`experiment`] parses configs, runs pipelines and writes artifacts.
//!
//! Coordinates in the simulator are integer ticks (see [`ticks`]) so that
//! replays, time shifts and oracle comparisons are exact.

// `!(x > 0.0)` style tests are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod hj;
pub mod hydro;
pub mod lattice;
pub mod polymer;
pub mod quad;
pub mod seed;
pub mod ticks;

pub use dynamics::{
    evolve, evolve_seeded, height_at, height_at_ticks, periodize, run_markov_split,
    sample_creations, CreationPoint, CreationSet, CreationStatus, EvolveOptions, Trajectory,
};
pub use equilibrium::{speed, KernelParams, Slope};
pub use error::{Error, Result};
pub use experiment::{parse_config, run, ExperimentConfig, ExperimentKind, RunManifest};
pub use hj::{GridSolution, SchemeParams};
pub use lattice::{
    discretize, linear_field, ContinuousProfile, DomainSpec, HeightField, Row, Step, StepKind,
    Window,
};
pub use polymer::{longest_light_chain, variational_height, PlanarPointSet};
pub use ticks::Tick;
