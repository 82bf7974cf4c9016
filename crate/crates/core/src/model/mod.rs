//! Model data, derived constants and assumption checks.

mod anosov;
mod nsflow;
mod params;
mod rotation;
mod validate;

pub use anosov::{anosov_data, AnosovSpec};
pub use nsflow::{NsFlowKind, NsFlowSpec, TabulatedField};
pub use params::{
    AnosovDoc, FiberDoc, InhibitionSpec, ModelParams, ParamsDoc, PhiDoc, RotationDoc, SCHEMA,
};
pub use rotation::{build_rotation_map, build_rotation_map_with_phase, RotationMapSpec};
pub use validate::{validate_params, validate_params_with, AssumptionCheck, Severity, UnitDerived, ValidationReport};

use crate::torus::in_upper_arc;

/// Number of units in the open arc `(1/2, 1)`.
#[inline]
pub fn inhibiting_count(z: &[f64]) -> usize {
    z.iter().filter(|&&zi| in_upper_arc(zi)).count()
}

/// `1 - Phi(#{i : z_i in (1/2, 1)})`.
#[inline]
pub fn speed_factor(z: &[f64], phi: &InhibitionSpec) -> f64 {
    1.0 - phi.at(inhibiting_count(z))
}

/// Duration of the inhibition phase started with fiber state `z`.
#[inline]
pub fn return_time(z: &[f64], params: &ModelParams) -> f64 {
    (1.0 - params.b) / speed_factor(z, &params.phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_linear() -> InhibitionSpec {
        InhibitionSpec { table: vec![0.0, 0.2, 0.4] }
    }

    #[test]
    fn speed_factor_examples() {
        let phi = phi_linear();
        assert_eq!(speed_factor(&[0.0, 0.0], &phi), 1.0);
        assert!((speed_factor(&[0.6, 0.7], &phi) - 0.6).abs() < 1e-15);
        assert_eq!(speed_factor(&[0.5, 0.5], &phi), 1.0);
        assert_eq!(speed_factor(&[0.6, 0.1], &phi), speed_factor(&[0.1, 0.6], &phi));
    }

    #[test]
    fn return_time_examples() {
        let text = include_str!("../../../../configs/n2-valid.toml");
        let mut doc: ParamsDoc = toml::from_str(text).unwrap();
        doc.phi.table = vec![0.0, 0.2, 0.4];
        let p = ModelParams::from_doc(doc).unwrap();
        assert!((return_time(&[0.0, 0.0], &p) - 0.7).abs() < 1e-15);
        assert!((return_time(&[0.6, 0.1], &p) - 0.875).abs() < 1e-15);
        assert!((return_time(&[0.6, 0.9], &p) - p.tau_max).abs() < 1e-15);
        for z in [[0.6, 0.1], [0.2, 0.3], [0.7, 0.99]] {
            let s = speed_factor(&z, &p.phi);
            assert!((return_time(&z, &p) * s - 0.7).abs() <= f64::EPSILON);
        }
    }
}
