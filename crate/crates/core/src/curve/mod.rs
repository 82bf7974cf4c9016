//! Evolution of a piece of unstable manifold under the return map.
//!
//! The graph of the fiber coordinates over the segment is pushed through the
//! rotation kick (`Φ_1`), the fiber flows (`Φ_2`) and the base dilation
//! (`Φ_3`). Singular points appear where some component crosses a pole;
//! [`lift`] unwinds a component into a monotone real function whose range
//! counts how often it wraps around the circle.

mod graph;
mod lift;
mod stats;

pub use graph::{
    apply_phi1, apply_phi2, apply_phi3, generation_step, init_curve, Crossing, Marker, MarkerKind, PiecewiseGraph,
    Stage,
};
pub use lift::{lift, lift_with_signs, range_of, Lift, LiftedGraph, MonotonePiece};
pub use stats::{
    concentration_stats, fit_slope, min_slope_off_markers, near_singularity_mass, run_curve_lab, snapshot,
    CurveConfig, CurveReport, GenerationStats, MassEstimate, RecursionChecks, SlopeStats, SnapshotRow,
    SLOPE_TOLERANCE,
};
