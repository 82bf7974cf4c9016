//! North-South circle flows `g^t` and their derivatives `(g^t)'`.
//!
//! The sine family and the projective flow share the closed form
//! `tan(pi z(t)) = tan(pi z0) e^{-k t}`, evaluated on the signed
//! representative `u in [-1/2, 1/2)` so that both poles keep full relative
//! precision. Tabulated fields are integrated with Dormand-Prince 5(4) on the
//! state and `ln (g^t)'` jointly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{NsFlowKind, NsFlowSpec};
use crate::torus::{from_signed, to_signed, wrap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    RkIntegrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowEvaluation {
    pub z_end: f64,
    pub dz: f64,
    pub method: Method,
    pub est_error: f64,
}

const RK_ATOL: f64 = 1e-12;
const RK_RTOL: f64 = 1e-10;
const RK_MAX_STEPS: usize = 200_000;

/// Time-`t` map of the flow and its derivative at `z0`. Negative `t` runs
/// the flow backwards.
pub fn ns_evolve(flow: &NsFlowSpec, z0: f64, t: f64) -> Result<FlowEvaluation> {
    match &flow.kind {
        NsFlowKind::SineFamily { .. } | NsFlowKind::Projective { .. } => {
            let (z_end, dz) = tan_flow(-flow.lambda_minus, z0, t);
            Ok(FlowEvaluation { z_end, dz, method: Method::ClosedForm, est_error: 0.0 })
        }
        NsFlowKind::TabulatedField(field) => {
            let (z_end, dz, est_error) =
                dopri(|z| field.eval(z), z0, t, RK_ATOL, RK_RTOL, RK_MAX_STEPS)?;
            Ok(FlowEvaluation { z_end, dz, method: Method::RkIntegrated, est_error })
        }
    }
}

/// `(g^t(z0), (g^t)'(z0))` without the bookkeeping.
#[inline]
pub fn evolve(flow: &NsFlowSpec, z0: f64, t: f64) -> Result<(f64, f64)> {
    match &flow.kind {
        NsFlowKind::SineFamily { .. } | NsFlowKind::Projective { .. } => {
            Ok(tan_flow(-flow.lambda_minus, z0, t))
        }
        _ => ns_evolve(flow, z0, t).map(|e| (e.z_end, e.dz)),
    }
}

/// Closed form for `v(z) = -(k / 2 pi) sin(2 pi z)`.
pub(crate) fn tan_flow(k: f64, z0: f64, t: f64) -> (f64, f64) {
    let (u, dz) = tan_flow_signed(k, to_signed(z0), t);
    (from_signed(u), dz)
}

/// As [`tan_flow`] on the signed representative; the result stays in the
/// closed half-circle of `u`.
pub(crate) fn tan_flow_signed(k: f64, u: f64, t: f64) -> (f64, f64) {
    use std::f64::consts::PI;
    let e = (-k * t).exp();
    let a = u.abs();
    if a == 0.0 {
        return (u, e);
    }
    if a == 0.5 {
        return (u, 1.0 / e);
    }
    let (a_end, dz) = if a <= 0.25 {
        let y0 = (PI * a).tan();
        let y = y0 * e;
        let a_end = if y <= 1.0 { y.atan() / PI } else { 0.5 - (1.0 / y).atan() / PI };
        (a_end, (1.0 + y0 * y0) * e / (1.0 + y * y))
    } else {
        // q = cot(pi a) keeps precision next to the N-pole
        let q0 = (PI * (0.5 - a)).tan();
        let q = q0 / e;
        let a_end = if q >= 1.0 { (1.0 / q).atan() / PI } else { 0.5 - q.atan() / PI };
        (a_end, (q0 * q0 + 1.0) * e / (q0 * q0 + e * e))
    };
    (a_end.copysign(u), dz)
}

/// Dormand-Prince 5(4) on `z' = v(z)`, `(ln dz)' = v'(z)`. Returns the end
/// point, the derivative and the accumulated local error estimate.
pub(crate) fn dopri<F>(
    field: F,
    z0: f64,
    t: f64,
    atol: f64,
    rtol: f64,
    max_steps: usize,
) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> (f64, f64),
{
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];

    if t == 0.0 {
        return Ok((wrap(z0), 1.0, 0.0));
    }
    let dir = t.signum();
    let span = t.abs();
    let mut z = z0;
    let mut ld = 0.0;
    let mut done = 0.0;
    let mut h = (span / 100.0).min(1e-2);
    let mut err_sum = 0.0;
    let mut kz = [0.0; 7];
    let mut kl = [0.0; 7];
    let (v0, d0) = field(z);
    kz[0] = v0;
    kl[0] = d0;
    let mut steps = 0;
    while done < span {
        if steps >= max_steps {
            return Err(Error::NonConvergence { steps });
        }
        steps += 1;
        let h_step = h.min(span - done);
        let hs = dir * h_step;
        for s in 1..7 {
            let mut zs = z;
            for (j, a) in A[s][..s].iter().enumerate() {
                zs += hs * a * kz[j];
            }
            let (v, dv) = field(zs);
            kz[s] = v;
            kl[s] = dv;
        }
        let mut z_new = z;
        let mut l_new = ld;
        let mut ez = 0.0;
        let mut el = 0.0;
        for s in 0..7 {
            z_new += hs * B[s] * kz[s];
            l_new += hs * B[s] * kl[s];
            ez += hs * E[s] * kz[s];
            el += hs * E[s] * kl[s];
        }
        let sz = atol + rtol * z.abs().max(z_new.abs());
        let sl = atol + rtol * ld.abs().max(l_new.abs());
        let err = ((ez / sz).powi(2) + (el / sl).powi(2)).sqrt() / std::f64::consts::SQRT_2;
        if err <= 1.0 {
            done += h_step;
            z = z_new;
            ld = l_new;
            err_sum += ez.abs();
            // FSAL: last stage is the derivative at the new point
            kz[0] = kz[6];
            kl[0] = kl[6];
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_step * fac;
    }
    Ok((wrap(z), ld.exp(), err_sum))
}

/// Closed arc of the circle, `start` plus counter-clockwise `len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

impl Arc {
    pub fn new(start: f64, end: f64) -> Self {
        let start = wrap(start);
        let len = end - start;
        let len = if (0.0..=1.0).contains(&len) { len } else { wrap(len) };
        Self { start, len }
    }

    /// Arc of half-width `delta` centred at `center`.
    pub fn centered(center: f64, delta: f64) -> Self {
        Self { start: wrap(center - delta), len: 2.0 * delta }
    }

    pub fn end(&self) -> f64 {
        wrap(self.start + self.len)
    }

    pub fn contains(&self, z: f64) -> bool {
        wrap(z - self.start) <= self.len
    }

    /// Smallest distance by which `other` sits inside `self`; negative when
    /// `other` is not contained.
    pub fn containment_margin(&self, other: &Arc) -> f64 {
        let mut left = wrap(other.start - self.start);
        if left > self.len {
            left -= 1.0;
        }
        let right = self.len - (left + other.len);
        left.min(right)
    }

    pub fn contains_arc(&self, other: &Arc) -> bool {
        self.containment_margin(other) >= 0.0
    }
}

/// Image of an arc under `g^t`, from its endpoint images. The flow preserves
/// orientation, so the image is the arc between them.
pub fn ns_image_of_arc(flow: &NsFlowSpec, arc: Arc, t: f64) -> Result<Arc> {
    let a = evolve(flow, arc.start, t)?.0;
    if arc.len == 0.0 {
        return Ok(Arc { start: a, len: 0.0 });
    }
    let b = evolve(flow, arc.start + arc.len, t)?.0;
    let mut len = wrap(b - a);
    // endpoints squeezed onto one float around a pole the arc contains
    if len == 0.0 && (arc.contains(0.5) || arc.contains(0.0)) {
        len = 1.0;
    }
    Ok(Arc { start: a, len })
}
