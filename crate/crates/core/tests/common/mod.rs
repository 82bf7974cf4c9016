#![allow(dead_code)]

use ei_core::model::{FiberDoc, ParamsDoc, RotationDoc};
use ei_core::ModelParams;

pub const N2: &str = include_str!("../../../../configs/n2-valid.toml");
pub const FIG3: &str = include_str!("../../../../configs/fig3-like.toml");

pub fn n2() -> ModelParams {
    ModelParams::from_toml_str(N2).unwrap()
}

pub fn fig3() -> ModelParams {
    ModelParams::from_toml_str(FIG3).unwrap()
}

pub fn n2_doc() -> ParamsDoc {
    toml::from_str(N2).unwrap()
}

/// N=2 network with `Phi(n) = 0.2 n`.
pub fn n2_linear_phi() -> ModelParams {
    let mut d = n2_doc();
    d.phi.table = vec![0.0, 0.2, 0.4];
    ModelParams::from_doc(d).unwrap()
}

/// Same network with weak fiber flows, for which the return map is well
/// conditioned in both directions.
pub fn n2_mild() -> ModelParams {
    let mut d = n2_doc();
    for f in &mut d.fibers {
        *f = FiberDoc::SineFamily { amplitude: 0.05, delta_plus: 0.05, delta_minus: 0.05, contraction_c: 0.9 };
    }
    for r in &mut d.rotations {
        if let RotationDoc::Steep { epsilon, .. } = r {
            *epsilon = 0.2;
        }
    }
    ModelParams::from_doc(d).unwrap()
}

/// Single-unit network with the affine lift `r(x) = r0 + x`.
pub fn affine_unit(r0: f64, b: f64, phi1: f64) -> ModelParams {
    let mut d = n2_doc();
    d.n = 1;
    d.b = b;
    d.phi.table = vec![0.0, phi1];
    d.fibers.truncate(1);
    d.rotations = vec![RotationDoc::Spline {
        knots: vec![0.0, 1.0],
        slopes: vec![1.0, 1.0],
        value_at_zero: r0,
        epsilon: 0.01,
        d: 0.1,
        connector_slope_floor: 0.5,
    }];
    ModelParams::from_doc(d).unwrap()
}
