//! First-return map `H = H2 ∘ H1` on the section `{w = 0}`, its tangent
//! cocycle and orbit diagnostics.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fiber::evolve;
use crate::model::{return_time, ModelParams};
use crate::seeds::trial_rng;
use crate::torus::{circle_dist, in_arc, in_upper_arc, wrap};

/// Distance below which a point counts as lying on the singularity set.
pub const SINGULARITY_TOL: f64 = 1e-12;
const RESTART_KICK: f64 = 1e-9;
const BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectionPoint {
    pub x: f64,
    pub y: f64,
    pub z: Vec<f64>,
}

impl SectionPoint {
    pub fn new(x: f64, y: f64, z: Vec<f64>) -> Self {
        Self { x: wrap(x), y: wrap(y), z: z.into_iter().map(wrap).collect() }
    }

    /// Uniform random point of `T^2 x T^N`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let x = rng.random();
        let y = rng.random();
        Self { x, y, z: (0..n).map(|_| rng.random()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Activation {
    pub unit: usize,
    /// Time since the start of the rotation phase, in `[0, b)`.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub next: SectionPoint,
    /// Fiber state on `{w = b}`, after the kick.
    pub kicked: Vec<f64>,
    pub tau: f64,
    pub activations: Vec<Activation>,
}

#[inline]
pub(crate) fn kick(z: f64, r: f64) -> f64 {
    wrap(z + r)
}

/// `z_i <- z_i + r_i(x) mod 1`, base unchanged.
pub fn h1(p: &SectionPoint, params: &ModelParams) -> SectionPoint {
    let z = p
        .z
        .iter()
        .zip(&params.rotations)
        .map(|(&zi, rot)| kick(zi, rot.value(p.x)))
        .collect();
    SectionPoint { x: p.x, y: p.y, z }
}

/// Base through `A`, fibers through `g_i^tau` with the return time of `q`.
/// Returns the new point and `tau`.
pub fn h2(q: &SectionPoint, params: &ModelParams) -> Result<(SectionPoint, f64)> {
    let tau = return_time(&q.z, params);
    let (x, y) = params.anosov.apply(q.x, q.y);
    let z = q
        .z
        .iter()
        .zip(&params.fibers)
        .map(|(&zi, f)| evolve(f, zi, tau).map(|e| e.0))
        .collect::<Result<Vec<_>>>()?;
    Ok((SectionPoint { x, y, z }, tau))
}

/// Crossings of `1/2 mod 1` by `z + (t/b) r`, `t in [0, b)`, in time order.
pub fn crossings(z: f64, r: f64, b: f64) -> impl Iterator<Item = f64> {
    let first = (z - 0.5).ceil() + 0.5;
    (0..)
        .map(move |m| first + m as f64)
        .take_while(move |&target| target < z + r)
        .map(move |target| b * (target - z) / r)
        .filter(move |&t| t < b)
}

fn activations(p: &SectionPoint, params: &ModelParams) -> Vec<Activation> {
    let mut out = Vec::new();
    for (unit, (&zi, rot)) in p.z.iter().zip(&params.rotations).enumerate() {
        out.extend(crossings(zi, rot.value(p.x), params.b).map(|time| Activation { unit, time }));
    }
    out.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.unit.cmp(&b.unit)));
    out
}

/// One return: `H(p)` with its return time and activations.
pub fn step(p: &SectionPoint, params: &ModelParams) -> Result<StepRecord> {
    let activations = activations(p, params);
    let q = h1(p, params);
    let (next, tau) = h2(&q, params)?;
    Ok(StepRecord { next, kicked: q.z, tau, activations })
}

/// Iterates `n` returns, keeping every record.
pub fn orbit(p0: &SectionPoint, n: usize, params: &ModelParams) -> Result<Vec<StepRecord>> {
    let mut out = Vec::with_capacity(n);
    let mut p = p0.clone();
    for _ in 0..n {
        let rec = step(&p, params)?;
        p = rec.next.clone();
        out.push(rec);
    }
    Ok(out)
}

/// Inverse of [`step`], used to spot-check invertibility. Strong fiber
/// contraction makes it ill-conditioned, so it is only meaningful for mild
/// flows.
pub fn step_inverse(p: &SectionPoint, params: &ModelParams) -> Result<SectionPoint> {
    // the arcs (1/2, 1) are flow-invariant, so tau is read off the image
    let tau = return_time(&p.z, params);
    let (x, y) = params.anosov.apply_inverse(p.x, p.y);
    let mut z = Vec::with_capacity(p.z.len());
    for ((&zi, f), rot) in p.z.iter().zip(&params.fibers).zip(&params.rotations) {
        let back = evolve(f, zi, -tau)?.0;
        z.push(wrap(back - rot.value(x)));
    }
    Ok(SectionPoint { x, y, z })
}

/// Orthonormal frame of the tangent space with accumulated log stretches.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub basis: DMatrix<f64>,
    pub log_norms: Vec<f64>,
}

impl TangentFrame {
    pub fn identity(dim: usize) -> Self {
        Self { basis: DMatrix::identity(dim, dim), log_norms: vec![0.0; dim] }
    }

    /// `max |Q^T Q - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        let n = g.nrows();
        (g - DMatrix::<f64>::identity(n, n)).amax()
    }
}

/// Differential of `H` at `p`, coordinates `(x, y, z_1..z_N)`. The return
/// time is locally constant and contributes no derivative.
pub fn jacobian(p: &SectionPoint, params: &ModelParams) -> Result<DMatrix<f64>> {
    let n = params.n;
    let mut j = DMatrix::<f64>::zeros(n + 2, n + 2);
    let a = params.anosov.matrix();
    for r in 0..2 {
        for c in 0..2 {
            j[(r, c)] = a[r][c];
        }
    }
    for (i, rot) in params.rotations.iter().enumerate() {
        if rot.breakpoint_distance(p.x) < SINGULARITY_TOL {
            return Err(Error::OnSingularity(format!("x = {} at a kink of r_{i}", p.x)));
        }
    }
    let q = h1(p, params);
    let tau = return_time(&q.z, params);
    for (i, (&zi, (f, rot))) in q.z.iter().zip(params.fibers.iter().zip(&params.rotations)).enumerate() {
        if circle_dist(zi, 0.0) < SINGULARITY_TOL || circle_dist(zi, 0.5) < SINGULARITY_TOL {
            return Err(Error::OnSingularity(format!("z_{i} = {zi} at a pole after the kick")));
        }
        let g = evolve(f, zi, tau)?.1;
        j[(2 + i, 0)] = g * rot.eval(p.x).1;
        j[(2 + i, 2 + i)] = g;
    }
    Ok(j)
}

/// Pushes the frame through `DH_p`, re-orthonormalises and accumulates the
/// log stretches.
pub fn tangent_step(p: &SectionPoint, frame: &TangentFrame, params: &ModelParams) -> Result<TangentFrame> {
    let j = jacobian(p, params)?;
    let (basis, logs) = qr_positive(j * &frame.basis);
    let log_norms = frame.log_norms.iter().zip(&logs).map(|(a, b)| a + b).collect();
    Ok(TangentFrame { basis, log_norms })
}

/// QR with a positive diagonal; returns `Q` and `ln R_ii`.
fn qr_positive(m: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    let mut logs = Vec::with_capacity(r.nrows());
    for k in 0..r.nrows() {
        let d = r[(k, k)];
        if d < 0.0 {
            q.column_mut(k).neg_mut();
        }
        logs.push(d.abs().ln());
    }
    (q, logs)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovResult {
    /// Descending.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_transient: usize,
    pub n_iter: usize,
    pub restarts: usize,
    pub seed: u64,
}

/// Benettin estimate of the full spectrum along the orbit of `p0`. A point
/// on the singularity set is nudged by `1e-9` (drawn from `seed`) and the
/// orbit continues; such restarts are counted.
pub fn lyapunov_spectrum(
    p0: &SectionPoint,
    n_transient: usize,
    n_iter: usize,
    params: &ModelParams,
    seed: u64,
) -> Result<LyapunovResult> {
    let dim = params.n + 2;
    let mut rng = trial_rng(seed, u64::MAX);
    let mut p = p0.clone();
    let mut frame = TangentFrame::identity(dim);
    let mut restarts = 0;
    let batch_len = (n_iter / BATCHES).max(1);
    let mut batch_sums: Vec<Vec<f64>> = Vec::new();
    let mut current = vec![0.0; dim];
    let mut in_batch = 0;
    let mut total = vec![0.0; dim];
    let mut k = 0;
    while k < n_transient + n_iter {
        let next = match tangent_step(&p, &frame, params) {
            Ok(f) => f,
            Err(Error::OnSingularity(_)) => {
                restarts += 1;
                if restarts > 1000 + n_iter / 10 {
                    return Err(Error::OnSingularity("too many restarts".into()));
                }
                p = SectionPoint::new(
                    p.x + RESTART_KICK * (rng.random::<f64>() - 0.5),
                    p.y + RESTART_KICK * (rng.random::<f64>() - 0.5),
                    p.z.iter().map(|z| z + RESTART_KICK * (rng.random::<f64>() - 0.5)).collect(),
                );
                continue;
            }
            Err(e) => return Err(e),
        };
        if k >= n_transient {
            for d in 0..dim {
                let inc = next.log_norms[d] - frame.log_norms[d];
                current[d] += inc;
                total[d] += inc;
            }
            in_batch += 1;
            if in_batch == batch_len {
                batch_sums.push(std::mem::replace(&mut current, vec![0.0; dim]));
                in_batch = 0;
            }
        }
        frame = TangentFrame { basis: next.basis, log_norms: vec![0.0; dim] };
        p = step(&p, params)?.next;
        k += 1;
    }
    let exps: Vec<f64> = total.iter().map(|s| s / n_iter.max(1) as f64).collect();
    let errs: Vec<f64> = (0..dim)
        .map(|d| {
            let means: Vec<f64> = batch_sums.iter().map(|b| b[d] / batch_len as f64).collect();
            batch_std_error(&means)
        })
        .collect();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| exps[b].total_cmp(&exps[a]));
    Ok(LyapunovResult {
        exponents: order.iter().map(|&i| exps[i]).collect(),
        std_errors: order.iter().map(|&i| errs[i]).collect(),
        n_transient,
        n_iter,
        restarts,
        seed,
    })
}

fn batch_std_error(means: &[f64]) -> f64 {
    let m = means.len();
    if m < 2 {
        return f64::NAN;
    }
    let mean = means.iter().sum::<f64>() / m as f64;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (var / m as f64).sqrt()
}

/// Runs independent spectra from `starts.len()` points, trial `k` seeded by
/// `(seed, k)`. Output order follows `starts`.
pub fn lyapunov_trials(
    starts: &[SectionPoint],
    n_transient: usize,
    n_iter: usize,
    params: &ModelParams,
    seed: u64,
    exec: Execution,
) -> Vec<Result<LyapunovResult>> {
    let idx: Vec<usize> = (0..starts.len()).collect();
    exec.map(&idx, |&k| {
        lyapunov_spectrum(&starts[k], n_transient, n_iter, params, seed.wrapping_add(k as u64))
    })
}

/// The fixed observable catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "unit", rename_all = "snake_case")]
pub enum Observable {
    Constant,
    CosFiber(usize),
    /// Indicator of `z_i in I_i^-`.
    InSink(usize),
    /// Indicator of `z_i in (1/2, 1)`.
    Inhibiting(usize),
    /// Activations per return, or per unit of flow time when weighted.
    ActivationRate,
}

impl Observable {
    /// Catalog for an `n`-unit network, in a fixed order.
    pub fn catalog(n: usize) -> Vec<Observable> {
        let mut v = Vec::new();
        for i in 0..n {
            v.push(Observable::CosFiber(i));
        }
        for i in 0..n {
            v.push(Observable::InSink(i));
        }
        for i in 0..n {
            v.push(Observable::Inhibiting(i));
        }
        v.push(Observable::ActivationRate);
        v
    }

    pub fn label(&self) -> String {
        match self {
            Observable::Constant => "constant".into(),
            Observable::CosFiber(i) => format!("cos_z{}", i + 1),
            Observable::InSink(i) => format!("in_sink_z{}", i + 1),
            Observable::Inhibiting(i) => format!("inhibiting_z{}", i + 1),
            Observable::ActivationRate => "activation_rate".into(),
        }
    }

    fn at(&self, kicked: &[f64], params: &ModelParams) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        match *self {
            Observable::Constant => 1.0,
            Observable::CosFiber(i) => (2.0 * std::f64::consts::PI * kicked[i]).cos(),
            Observable::InSink(i) => ind(in_arc(kicked[i], 0.0, params.fibers[i].delta_minus)),
            Observable::Inhibiting(i) => ind(in_upper_arc(kicked[i])),
            Observable::ActivationRate => 0.0,
        }
    }
}

/// Birkhoff averages of several observables along one orbit. Observables
/// are read on `{w = b}`; with `flow_weighted` each return counts with its
/// inhibition-phase duration and the activation rate is per unit flow time.
pub fn birkhoff_averages(
    p0: &SectionPoint,
    observables: &[Observable],
    n: usize,
    params: &ModelParams,
    flow_weighted: bool,
) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; observables.len()];
    let mut weight = 0.0;
    let mut flow_time = 0.0;
    let mut acts = 0usize;
    let mut p = p0.clone();
    for _ in 0..n {
        let rec = step(&p, params)?;
        let w = if flow_weighted { rec.tau } else { 1.0 };
        for (s, o) in sums.iter_mut().zip(observables) {
            *s += w * o.at(&rec.kicked, params);
        }
        weight += w;
        flow_time += params.b + rec.tau;
        acts += rec.activations.len();
        p = rec.next;
    }
    Ok(observables
        .iter()
        .zip(sums)
        .map(|(o, s)| match o {
            Observable::ActivationRate if flow_weighted => acts as f64 / flow_time,
            Observable::ActivationRate => acts as f64 / n as f64,
            _ => s / weight,
        })
        .collect())
}

pub fn birkhoff_average(
    p0: &SectionPoint,
    observable: Observable,
    n: usize,
    params: &ModelParams,
    flow_weighted: bool,
) -> Result<f64> {
    Ok(birkhoff_averages(p0, &[observable], n, params, flow_weighted)?[0])
}

/// Drives two fiber states over the same base point and records the sup
/// circle distance between them after each return.
pub fn sync_test(
    base: (f64, f64),
    z_a: &[f64],
    z_b: &[f64],
    n: usize,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let mut a = SectionPoint::new(base.0, base.1, z_a.to_vec());
    let mut b = SectionPoint::new(base.0, base.1, z_b.to_vec());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        a = step(&a, params)?.next;
        b = step(&b, params)?.next;
        let d = a.z.iter().zip(&b.z).map(|(&u, &v)| circle_dist(u, v)).fold(0.0, f64::max);
        out.push(d);
    }
    Ok(out)
}

/// One row of the orbit CSV.
#[derive(Debug, Clone, Serialize)]
pub struct OrbitRow {
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub z: Vec<f64>,
    pub tau: f64,
    pub activations: Vec<u32>,
}

impl OrbitRow {
    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["step".to_string(), "x".into(), "y".into()];
        h.extend((1..=n).map(|i| format!("z{i}")));
        h.push("tau".into());
        h.extend((1..=n).map(|i| format!("act{i}")));
        h
    }

    /// Row for the point `p` and the record of the return taken from it.
    pub fn new(step: usize, p: &SectionPoint, rec: &StepRecord) -> Self {
        let mut activations = vec![0u32; p.z.len()];
        for a in &rec.activations {
            activations[a.unit] += 1;
        }
        Self { step, x: p.x, y: p.y, z: p.z.clone(), tau: rec.tau, activations }
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![self.step.to_string(), fmt(self.x), fmt(self.y)];
        f.extend(self.z.iter().map(|&v| fmt(v)));
        f.push(fmt(self.tau));
        f.extend(self.activations.iter().map(|a| a.to_string()));
        f
    }
}

/// Shortest round-trip decimal form; used by every CSV writer.
pub fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Fiber-only tangent vector pushed through one return; used to check the
/// invariance of the fiber directions.
pub fn push_vector(p: &SectionPoint, v: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    let j = jacobian(p, params)?;
    Ok((j * DVector::from_column_slice(v)).iter().copied().collect())
}
