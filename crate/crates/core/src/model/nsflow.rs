use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::wrap;

/// Which North-South field drives a unit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NsFlowKind {
    /// `v(z) = -amplitude * sin(2 pi z)`.
    SineFamily { amplitude: f64 },
    /// Projectivised linear flow `e^{tM}`, `M = diag(alpha/2, -alpha/2)`;
    /// pole derivatives are `e^{-alpha t}` at 0 and `e^{alpha t}` at 1/2.
    Projective { alpha: f64 },
    /// Periodic cubic spline through equally spaced samples on `[0, 1)`.
    TabulatedField(TabulatedField),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabulatedField {
    pub samples: Vec<f64>,
    #[serde(skip)]
    second: Vec<f64>,
}

impl TabulatedField {
    /// Fits the periodic C2 interpolant. The sample count must be even so
    /// that both poles are grid points.
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let k = samples.len();
        if k < 4 || k % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "tabulated field needs an even number (>= 4) of samples, got {k}"
            )));
        }
        if samples[0] != 0.0 || samples[k / 2] != 0.0 {
            return Err(Error::InvalidParams(
                "tabulated field must vanish exactly at z = 0 and z = 1/2".into(),
            ));
        }
        let h = 1.0 / k as f64;
        let mut m = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for i in 0..k {
            let (prev, next) = ((i + k - 1) % k, (i + 1) % k);
            m[(i, prev)] += h / 6.0;
            m[(i, i)] += 2.0 * h / 3.0;
            m[(i, next)] += h / 6.0;
            rhs[i] = (samples[next] - 2.0 * samples[i] + samples[prev]) / h;
        }
        let second = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidParams("singular spline system".into()))?;
        Ok(Self { samples, second: second.iter().copied().collect() })
    }

    /// Field value and derivative at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64) {
        let k = self.samples.len();
        let h = 1.0 / k as f64;
        let z = wrap(z);
        let i = ((z * k as f64).floor() as usize).min(k - 1);
        let j = (i + 1) % k;
        let (yi, yj) = (self.samples[i], self.samples[j]);
        let (mi, mj) = (self.second[i], self.second[j]);
        let a = (i + 1) as f64 * h - z;
        let b = z - i as f64 * h;
        let ci = yi / h - mi * h / 6.0;
        let cj = yj / h - mj * h / 6.0;
        let v = mi * a * a * a / (6.0 * h) + mj * b * b * b / (6.0 * h) + ci * a + cj * b;
        let dv = -mi * a * a / (2.0 * h) + mj * b * b / (2.0 * h) - ci + cj;
        (v, dv)
    }
}

/// One inhibitory unit's circle flow plus its assumption constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsFlowSpec {
    #[serde(flatten)]
    pub kind: NsFlowKind,
    /// `v'(0)`, negative.
    pub lambda_minus: f64,
    /// `v'(1/2)`, positive.
    pub lambda_plus: f64,
    /// Half-width of `I+` around the N-pole.
    pub delta_plus: f64,
    /// Half-width of `I-` around the S-pole.
    pub delta_minus: f64,
    /// Contraction bound on `I-`.
    pub contraction_c: f64,
}

impl NsFlowSpec {
    pub fn new(kind: NsFlowKind, delta_plus: f64, delta_minus: f64, contraction_c: f64) -> Result<Self> {
        let (lambda_minus, lambda_plus) = match &kind {
            NsFlowKind::SineFamily { amplitude } => {
                let k = 2.0 * std::f64::consts::PI * amplitude;
                (-k, k)
            }
            NsFlowKind::Projective { alpha } => (-alpha, *alpha),
            NsFlowKind::TabulatedField(t) => (t.eval(0.0).1, t.eval(0.5).1),
        };
        if !(lambda_minus < 0.0 && lambda_plus > 0.0) {
            return Err(Error::InvalidParams(format!(
                "need v'(0) < 0 < v'(1/2), got {lambda_minus} and {lambda_plus}"
            )));
        }
        if !(delta_plus > 0.0 && delta_minus > 0.0 && delta_plus + delta_minus < 0.5) {
            return Err(Error::InvalidParams(format!(
                "I+ and I- must be non-degenerate and disjoint (delta+ = {delta_plus}, delta- = {delta_minus})"
            )));
        }
        if !(contraction_c > 0.0 && contraction_c < 1.0) {
            return Err(Error::InvalidParams(format!("contraction c = {contraction_c} not in (0,1)")));
        }
        Ok(Self { kind, lambda_minus, lambda_plus, delta_plus, delta_minus, contraction_c })
    }

    pub fn sine(amplitude: f64, delta_plus: f64, delta_minus: f64, contraction_c: f64) -> Result<Self> {
        Self::new(NsFlowKind::SineFamily { amplitude }, delta_plus, delta_minus, contraction_c)
    }

    /// Field value and derivative at `z`.
    pub fn field(&self, z: f64) -> (f64, f64) {
        use std::f64::consts::PI;
        match &self.kind {
            NsFlowKind::SineFamily { amplitude } => (
                -amplitude * (2.0 * PI * z).sin(),
                -2.0 * PI * amplitude * (2.0 * PI * z).cos(),
            ),
            NsFlowKind::Projective { alpha } => (
                -alpha / (2.0 * PI) * (2.0 * PI * z).sin(),
                -alpha * (2.0 * PI * z).cos(),
            ),
            NsFlowKind::TabulatedField(t) => t.eval(z),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_pole_rates() {
        let f = NsFlowSpec::sine(7.0, 1e-3, 0.1, 0.5).unwrap();
        assert!((f.lambda_minus + 14.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((f.lambda_plus - 14.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(f.field(0.0).0, 0.0);
    }

    #[test]
    fn overlapping_arcs_rejected() {
        assert!(NsFlowSpec::sine(1.0, 0.3, 0.3, 0.5).is_err());
    }

    #[test]
    fn spline_interpolates_and_is_periodic() {
        let k = 64;
        let samples: Vec<f64> = (0..k)
            .map(|i| {
                let z = i as f64 / k as f64;
                if i == 0 || i == k / 2 {
                    0.0
                } else {
                    -(2.0 * std::f64::consts::PI * z).sin()
                }
            })
            .collect();
        let t = TabulatedField::new(samples.clone()).unwrap();
        for (i, s) in samples.iter().enumerate() {
            assert!((t.eval(i as f64 / k as f64).0 - s).abs() < 1e-12);
        }
        // spline of a sine: derivative close to the exact one
        let (_, d0) = t.eval(0.0);
        assert!((d0 + 2.0 * std::f64::consts::PI).abs() < 1e-2);
        assert!((t.eval(0.999_999_999).0 - t.eval(0.0).0).abs() < 1e-7);
    }

    #[test]
    fn tabulated_must_vanish_at_poles() {
        assert!(TabulatedField::new(vec![0.0, -1.0, 0.1, 1.0]).is_err());
        assert!(TabulatedField::new(vec![0.0, -1.0, 0.0]).is_err());
    }
}
