use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::anosov::{anosov_data, AnosovSpec};
use super::nsflow::{NsFlowKind, NsFlowSpec, TabulatedField};
use super::rotation::{build_rotation_map_with_phase, RotationMapSpec};
use crate::error::{Error, Result};

pub const SCHEMA: &str = "ei-params/1";

/// Inhibition strength as a function of the number of units in `(1/2, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InhibitionSpec {
    pub table: Vec<f64>,
}

impl InhibitionSpec {
    #[inline]
    pub fn at(&self, count: usize) -> f64 {
        self.table[count]
    }

    /// Reasons the table violates `Phi(0) = 0`, strict monotonicity, `Phi < 1`.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.table.first() != Some(&0.0) {
            out.push("Φ(0)=0 violated".to_string());
        }
        if self.table.windows(2).any(|w| w[1] <= w[0]) {
            out.push("Φ strictly increasing violated".to_string());
        }
        if self.table.iter().any(|&p| p >= 1.0) {
            out.push("Φ<1 violated".to_string());
        }
        out
    }
}

/// One complete network instance.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub n: usize,
    pub anosov: AnosovSpec,
    pub b: f64,
    pub phi: InhibitionSpec,
    pub fibers: Vec<NsFlowSpec>,
    pub rotations: Vec<RotationMapSpec>,
    /// `(1 - b) / (1 - Phi(N))`; infinite when `Phi(N) >= 1`.
    pub tau_max: f64,
    doc: ParamsDoc,
}

/// Serialized form of [`ModelParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsDoc {
    pub schema: String,
    pub n: usize,
    pub b: f64,
    pub anosov: AnosovDoc,
    pub phi: PhiDoc,
    pub fibers: Vec<FiberDoc>,
    pub rotations: Vec<RotationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnosovDoc {
    pub matrix: [[i64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiDoc {
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FiberDoc {
    SineFamily {
        amplitude: f64,
        delta_plus: f64,
        delta_minus: f64,
        contraction_c: f64,
    },
    Projective {
        alpha: f64,
        delta_plus: f64,
        delta_minus: f64,
        contraction_c: f64,
    },
    TabulatedField {
        samples: Vec<f64>,
        delta_plus: f64,
        delta_minus: f64,
        contraction_c: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RotationDoc {
    /// Generated by `build_rotation_map`.
    Steep {
        kappa: u32,
        epsilon: f64,
        d: f64,
        connector_slope_floor: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Explicit C1 spline: knots on `[0,1]`, slope at each knot, `r(0)`.
    Spline {
        knots: Vec<f64>,
        slopes: Vec<f64>,
        value_at_zero: f64,
        epsilon: f64,
        d: f64,
        connector_slope_floor: f64,
    },
}

impl FiberDoc {
    fn build(&self) -> Result<NsFlowSpec> {
        match self {
            FiberDoc::SineFamily { amplitude, delta_plus, delta_minus, contraction_c } => NsFlowSpec::new(
                NsFlowKind::SineFamily { amplitude: *amplitude },
                *delta_plus,
                *delta_minus,
                *contraction_c,
            ),
            FiberDoc::Projective { alpha, delta_plus, delta_minus, contraction_c } => NsFlowSpec::new(
                NsFlowKind::Projective { alpha: *alpha },
                *delta_plus,
                *delta_minus,
                *contraction_c,
            ),
            FiberDoc::TabulatedField { samples, delta_plus, delta_minus, contraction_c } => NsFlowSpec::new(
                NsFlowKind::TabulatedField(TabulatedField::new(samples.clone())?),
                *delta_plus,
                *delta_minus,
                *contraction_c,
            ),
        }
    }
}

impl RotationDoc {
    fn build(&self) -> Result<RotationMapSpec> {
        match self {
            RotationDoc::Steep { kappa, epsilon, d, connector_slope_floor, phase } => {
                build_rotation_map_with_phase(*kappa, *epsilon, *d, *connector_slope_floor, *phase)
            }
            RotationDoc::Spline { knots, slopes, value_at_zero, epsilon, d, connector_slope_floor } => {
                RotationMapSpec::from_spline(
                    knots.clone(),
                    slopes.clone(),
                    *value_at_zero,
                    *epsilon,
                    *d,
                    *connector_slope_floor,
                )
            }
        }
    }
}

impl ModelParams {
    /// Builds the runtime model. Structural problems (wrong lengths, bad
    /// matrices, infeasible rotation maps) are errors; the dynamical
    /// assumptions are left to [`super::validate_params`].
    pub fn from_doc(doc: ParamsDoc) -> Result<Self> {
        if doc.schema != SCHEMA {
            return Err(Error::Parse(format!("unsupported schema {:?}, expected {SCHEMA:?}", doc.schema)));
        }
        let n = doc.n;
        if n == 0 {
            return Err(Error::InvalidParams("need at least one unit".into()));
        }
        if n > 255 {
            return Err(Error::InvalidParams("at most 255 units are supported".into()));
        }
        if doc.fibers.len() != n || doc.rotations.len() != n {
            return Err(Error::InvalidParams(format!(
                "expected {n} fibers and rotations, got {} and {}",
                doc.fibers.len(),
                doc.rotations.len()
            )));
        }
        if doc.phi.table.len() != n + 1 {
            return Err(Error::InvalidParams(format!("Φ table needs N+1 = {} entries", n + 1)));
        }
        if !(doc.b > 0.0 && doc.b < 1.0) {
            return Err(Error::InvalidParams(format!("b = {} not in (0,1)", doc.b)));
        }
        let anosov = anosov_data(doc.anosov.matrix)?;
        let fibers = doc.fibers.iter().map(FiberDoc::build).collect::<Result<Vec<_>>>()?;
        let rotations = doc.rotations.iter().map(RotationDoc::build).collect::<Result<Vec<_>>>()?;
        let phi = InhibitionSpec { table: doc.phi.table.clone() };
        let phi_n = phi.at(n);
        let tau_max = if phi_n < 1.0 { (1.0 - doc.b) / (1.0 - phi_n) } else { f64::INFINITY };
        Ok(Self { n, anosov, b: doc.b, phi, fibers, rotations, tau_max, doc })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let doc: ParamsDoc = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ParamsDoc = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_doc(doc)
    }

    /// Parses TOML or JSON, deciding by the first non-blank character.
    pub fn from_str_any(s: &str) -> Result<Self> {
        if s.trim_start().starts_with('{') {
            Self::from_json_str(s)
        } else {
            Self::from_toml_str(s)
        }
    }

    pub fn doc(&self) -> &ParamsDoc {
        &self.doc
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&self.doc).expect("params document serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.doc).expect("params document serializes")
    }

    /// SHA-256 of the canonical (compact JSON) document.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_vec(&self.doc).expect("params document serializes");
        hex::encode(Sha256::digest(&canon))
    }
}
