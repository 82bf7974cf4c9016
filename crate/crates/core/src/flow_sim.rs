//! Continuous-time trajectories of the full flow.
//!
//! Both phases have closed-form `w` progress, so section hits are solved
//! algebraically. Every phase is advanced from the fiber state at phase
//! entry, which makes a complete phase bit-identical to the corresponding
//! half of the return map however the time interval is subdivided.

use serde::Serialize;

use crate::error::Result;
use crate::exec::Execution;
use crate::fiber::evolve as fiber_evolve;
use crate::model::{speed_factor, ModelParams};
use crate::return_map::{crossings, fmt, kick, SectionPoint};
use crate::torus::wrap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// `w in [0, b)`: fibers rotate, base frozen.
    Rotation,
    /// `w in [b, 1)`: fibers flow, `w` advances at the speed factor.
    Inhibition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub z: Vec<f64>,
    pub t: f64,
    phase: Phase,
    phase_time: f64,
    phase_start: f64,
    anchor: Vec<f64>,
}

/// Something that happened during [`evolve_observed`].
#[derive(Debug, Clone, PartialEq)]
pub enum FlowEvent {
    Activation { t: f64, unit: usize },
    /// Crossing of `{w = b}`; `z` is the kicked fiber state.
    KickDone { t: f64, z: Vec<f64> },
    /// Crossing of `{w = 0}` after applying `A`.
    Return { t: f64, point: SectionPoint, tau: f64 },
}

impl FlowState {
    /// State on `{w = 0}` at time `t`.
    pub fn on_section(p: &SectionPoint, t: f64) -> Self {
        Self {
            x: p.x,
            y: p.y,
            w: 0.0,
            z: p.z.clone(),
            t,
            phase: Phase::Rotation,
            phase_time: 0.0,
            phase_start: t,
            anchor: p.z.clone(),
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Section point of the current base and fibers (meaningful on `w = 0`).
    pub fn section_point(&self) -> SectionPoint {
        SectionPoint { x: self.x, y: self.y, z: self.z.clone() }
    }

    fn phase_length(&self, params: &ModelParams) -> f64 {
        match self.phase {
            Phase::Rotation => params.b,
            Phase::Inhibition => (1.0 - params.b) / speed_factor(&self.anchor, &params.phi),
        }
    }
}

/// Advances by `dt`.
pub fn evolve(s: &FlowState, dt: f64, params: &ModelParams) -> Result<FlowState> {
    evolve_observed(s, dt, params, &mut |_| {})
}

/// Advances by `dt`, reporting activations, kicks and returns in time order.
pub fn evolve_observed<F>(s: &FlowState, dt: f64, params: &ModelParams, on: &mut F) -> Result<FlowState>
where
    F: FnMut(FlowEvent),
{
    assert!(dt >= 0.0, "negative time step");
    let mut s = s.clone();
    let mut rem = dt;
    loop {
        let len = s.phase_length(params);
        let left = len - s.phase_time;
        let finish = rem >= left;
        let until = if finish { len } else { s.phase_time + rem };
        match s.phase {
            Phase::Rotation => {
                for (unit, (&a, rot)) in s.anchor.iter().zip(&params.rotations).enumerate() {
                    for tc in crossings(a, rot.value(s.x), params.b) {
                        if tc >= s.phase_time && tc < until {
                            on(FlowEvent::Activation { t: s.phase_start + tc, unit });
                        }
                    }
                }
                if finish {
                    let z: Vec<f64> =
                        s.anchor.iter().zip(&params.rotations).map(|(&a, r)| kick(a, r.value(s.x))).collect();
                    let t = s.phase_start + len;
                    on(FlowEvent::KickDone { t, z: z.clone() });
                    s.anchor = z.clone();
                    s.z = z;
                    s.phase = Phase::Inhibition;
                    s.phase_start = t;
                    s.t = t;
                    s.w = params.b;
                } else {
                    s.z = s
                        .anchor
                        .iter()
                        .zip(&params.rotations)
                        .map(|(&a, r)| wrap(a + r.value(s.x) * (until / params.b)))
                        .collect();
                    s.w = until;
                }
            }
            Phase::Inhibition => {
                let z = s
                    .anchor
                    .iter()
                    .zip(&params.fibers)
                    .map(|(&a, f)| fiber_evolve(f, a, until).map(|e| e.0))
                    .collect::<Result<Vec<_>>>()?;
                if finish {
                    debug_assert_eq!(
                        speed_factor(&z, &params.phi),
                        speed_factor(&s.anchor, &params.phi),
                        "inhibiting set changed along a flow phase"
                    );
                    let (x, y) = params.anosov.apply(s.x, s.y);
                    let t = s.phase_start + len;
                    s.x = x;
                    s.y = y;
                    s.anchor = z.clone();
                    s.z = z;
                    s.phase = Phase::Rotation;
                    s.phase_start = t;
                    s.t = t;
                    s.w = 0.0;
                    on(FlowEvent::Return { t, point: s.section_point(), tau: len });
                } else {
                    s.z = z;
                    s.w = params.b + (1.0 - params.b) * (until / len);
                }
            }
        }
        if finish {
            rem -= left;
            s.phase_time = 0.0;
            if rem <= 0.0 {
                break;
            }
        } else {
            s.phase_time = until;
            s.t = s.phase_start + until;
            break;
        }
    }
    Ok(s)
}

/// One output row: `(t, w, z_1..z_N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub w: f64,
    pub z: Vec<f64>,
}

impl TrajectoryRow {
    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "w".into()];
        h.extend((1..=n).map(|i| format!("z{i}")));
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![fmt(self.t), fmt(self.w)];
        f.extend(self.z.iter().map(|&v| fmt(v)));
        f
    }
}

/// Samples the trajectory at `s0.t + k dt_out` for all such times up to
/// `s0.t + t_end`.
pub fn sample_trajectory(
    s0: &FlowState,
    t_end: f64,
    dt_out: f64,
    params: &ModelParams,
) -> Result<Vec<TrajectoryRow>> {
    assert!(dt_out > 0.0, "output step must be positive");
    let steps = (t_end / dt_out + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut s = s0.clone();
    let mut elapsed = 0.0;
    for k in 0..=steps {
        let target = k as f64 * dt_out;
        s = evolve(&s, target - elapsed, params)?;
        elapsed = target;
        rows.push(TrajectoryRow { t: s0.t + target, w: s.w, z: s.z.clone() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterEvent {
    pub t: f64,
    pub unit: usize,
}

/// Every activation in `[s0.t, s0.t + t_end)`.
pub fn activation_raster(s0: &FlowState, t_end: f64, params: &ModelParams) -> Result<Vec<RasterEvent>> {
    let mut out = Vec::new();
    evolve_observed(s0, t_end, params, &mut |e| {
        if let FlowEvent::Activation { t, unit } = e {
            out.push(RasterEvent { t, unit });
        }
    })?;
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Rasters of several independent trajectories.
pub fn activation_rasters(
    starts: &[FlowState],
    t_end: f64,
    params: &ModelParams,
    exec: Execution,
) -> Vec<Result<Vec<RasterEvent>>> {
    exec.map(starts, |s| activation_raster(s, t_end, params))
}

/// The first `n` section returns of the flow started at `p`.
pub fn section_returns(p: &SectionPoint, n: usize, params: &ModelParams) -> Result<Vec<(SectionPoint, f64)>> {
    let mut out = Vec::with_capacity(n);
    let mut s = FlowState::on_section(p, 0.0);
    while out.len() < n {
        s = evolve_observed(&s, params.b + params.tau_max, params, &mut |e| {
            if let FlowEvent::Return { point, tau, .. } = e {
                if out.len() < n {
                    out.push((point, tau));
                }
            }
        })?;
    }
    Ok(out)
}
