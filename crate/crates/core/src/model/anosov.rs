use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::wrap;

/// A linear hyperbolic automorphism of the 2-torus together with its
/// splitting data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnosovSpec {
    pub entries: [[i64; 2]; 2],
    /// Log of the spectral radius.
    pub lambda: f64,
    /// Signed eigenvalue of largest modulus.
    pub leading_eigenvalue: f64,
    /// Unit vector spanning the expanding direction, oriented with
    /// non-negative `x` component.
    pub unstable_dir: [f64; 2],
    pub stable_dir: [f64; 2],
    /// `|cos|` of the angle between the unstable direction and the x axis.
    pub beta: f64,
}

/// Computes the splitting of a hyperbolic toral automorphism.
pub fn anosov_data(entries: [[i64; 2]; 2]) -> Result<AnosovSpec> {
    let [[a, b], [c, d]] = entries;
    let det = a * d - b * c;
    let tr = a + d;
    if det.abs() != 1 {
        return Err(Error::NotHyperbolic(format!("determinant {det} is not +-1")));
    }
    if tr.abs() <= 2 {
        return Err(Error::NotHyperbolic(format!("|trace| = {} <= 2", tr.abs())));
    }
    let (trf, detf) = (tr as f64, det as f64);
    let disc = (trf * trf - 4.0 * detf).sqrt();
    // pick the root of larger modulus without cancellation, then the other
    // one from the determinant
    let mu_u = if trf > 0.0 { 0.5 * (trf + disc) } else { 0.5 * (trf - disc) };
    let mu_s = detf / mu_u;
    let unstable_dir = eigenvector(entries, mu_u);
    let stable_dir = eigenvector(entries, mu_s);
    Ok(AnosovSpec {
        entries,
        lambda: mu_u.abs().ln(),
        leading_eigenvalue: mu_u,
        beta: unstable_dir[0].abs(),
        unstable_dir,
        stable_dir,
    })
}

fn eigenvector(m: [[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let [[a, b], [c, d]] = m.map(|r| r.map(|v| v as f64));
    // (A - mu) v = 0; use the row with the larger off-diagonal entry
    let v = if b.abs() >= c.abs() { [b, mu - a] } else { [mu - d, c] };
    let norm = v[0].hypot(v[1]);
    let mut v = [v[0] / norm, v[1] / norm];
    if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) {
        v = [-v[0], -v[1]];
    }
    v
}

impl AnosovSpec {
    /// Applies the automorphism to a torus point, reducing mod 1.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.entries;
        (
            wrap(a as f64 * x + b as f64 * y),
            wrap(c as f64 * x + d as f64 * y),
        )
    }

    /// Applies the inverse automorphism (integer adjugate over the determinant).
    pub fn apply_inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let [[a, b], [c, d]] = self.entries;
        let det = (a * d - b * c) as f64;
        (
            wrap((d as f64 * x - b as f64 * y) / det),
            wrap((-c as f64 * x + a as f64 * y) / det),
        )
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        self.entries.map(|r| r.map(|v| v as f64))
    }

    pub fn exp_lambda(&self) -> f64 {
        self.lambda.exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // eigenvalue oracle: characteristic polynomial roots by the textbook formula
    fn oracle_lambda(m: [[i64; 2]; 2]) -> f64 {
        let tr = (m[0][0] + m[1][1]) as f64;
        let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) as f64;
        let r1 = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        let r2 = (tr - (tr * tr - 4.0 * det).sqrt()) / 2.0;
        r1.abs().max(r2.abs()).ln()
    }

    #[test]
    fn fig3_matrix() {
        let a = anosov_data([[10, 3], [3, 1]]).unwrap();
        let expected = ((11.0 + 117f64.sqrt()) / 2.0).ln();
        assert!((a.lambda - expected).abs() < 1e-14);
        assert!((a.lambda - oracle_lambda(a.entries)).abs() < 1e-14);
        assert!((a.lambda - 2.3895).abs() < 1e-4);
    }

    #[test]
    fn golden_cat_variant() {
        let a = anosov_data([[3, 1], [2, 1]]).unwrap();
        assert!((a.lambda - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-14);
        assert!((a.exp_lambda() - 3.732).abs() < 1e-3);
        // unstable eigenvector (1, sqrt3 - 1), normalised
        let v = [1.0, 3f64.sqrt() - 1.0];
        let n = v[0] * v[0] + v[1] * v[1];
        assert!((a.beta - 1.0 / n.sqrt()).abs() < 1e-14);
        assert!((a.beta - 0.807).abs() < 1e-3);
    }

    #[test]
    fn eigen_directions_are_invariant() {
        for m in [[[3, 1], [2, 1]], [[10, 3], [3, 1]], [[2, 1], [1, 1]], [[-3, 1], [1, 0]]] {
            let a = anosov_data(m).unwrap();
            let f = a.matrix();
            let mu_s = (a.entries[0][0] * a.entries[1][1] - a.entries[0][1] * a.entries[1][0])
                as f64
                / a.leading_eigenvalue;
            for (v, mu) in [(a.unstable_dir, a.leading_eigenvalue), (a.stable_dir, mu_s)] {
                let av = [f[0][0] * v[0] + f[0][1] * v[1], f[1][0] * v[0] + f[1][1] * v[1]];
                assert!((av[0] - mu * v[0]).abs() < 1e-12);
                assert!((av[1] - mu * v[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parabolic_and_non_unimodular_rejected() {
        assert!(matches!(anosov_data([[1, 1], [0, 1]]), Err(Error::NotHyperbolic(_))));
        assert!(matches!(anosov_data([[2, 0], [0, 2]]), Err(Error::NotHyperbolic(_))));
    }

    #[test]
    fn inverse_undoes_apply() {
        let a = anosov_data([[3, 1], [2, 1]]).unwrap();
        let (x, y) = a.apply(0.123, 0.456);
        let (x0, y0) = a.apply_inverse(x, y);
        assert!((x0 - 0.123).abs() < 1e-14 && (y0 - 0.456).abs() < 1e-14);
    }
}
