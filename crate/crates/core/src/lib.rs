//! Simulator and test bench for a skew-product excitation-inhibition network flow.
//!
//! The excitatory environment is the time-1 suspension of a hyperbolic toral
//! automorphism; each inhibitory unit is a North-South circle flow that gets
//! kicked by an amount depending on the base `x` coordinate and, while sitting
//! in the arc `(1/2, 1)`, slows the environment down.
//!
//! Module map:
//! - [`model`]: parameter types, derived constants and assumption checks.
//! - [`fiber`]: the circle flows and their spatial derivatives.
//! - [`return_map`]: the first-return map, its tangent cocycle and orbit diagnostics.
//! - [`flow_sim`]: event-exact continuous-time trajectories and activation rasters.
//! - [`curve`]: evolution of unstable curves, monotone lifts and mass statistics.

pub mod curve;
pub mod error;
pub mod exec;
pub mod fiber;
pub mod flow_sim;
pub mod model;
pub mod return_map;
pub mod seeds;
pub mod torus;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{
    anosov_data, build_rotation_map, return_time, speed_factor, validate_params, AnosovSpec,
    InhibitionSpec, ModelParams, NsFlowKind, NsFlowSpec, RotationMapSpec, ValidationReport,
};
