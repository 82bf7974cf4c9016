//! Graphs of the fiber coordinates over a piece of unstable manifold.
//!
//! Points are addressed by their arclength `s in [0, a]` on the initial
//! segment; generation `n` sees the same point at `u = e^{λn} s`. A level-`k`
//! piece is a maximal `s`-interval on which the first `k` return times are
//! constant, so every stage value on it is an explicit composition of smooth
//! increasing maps and is evaluated exactly by replaying that composition.

use serde::Serialize;

use super::lift::{lift_with_signs, targets_between, Lift, LiftedGraph, MonotonePiece};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fiber::{evolve, tan_flow_signed};
use crate::model::{ModelParams, NsFlowKind};
use crate::torus::{from_signed, to_signed};

const POLES: [f64; 2] = [0.0, -0.5];
const SIGN_RESOLUTION: f64 = 8.0 * f64::EPSILON;
const ROOT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// `θ_n`, the graph on `Σ_0`.
    Theta,
    /// `ψ_n`, after the rotation kick.
    Psi,
    /// `ζ_n`, after the fiber flows, still over the generation-`n` domain.
    Zeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    Kink,
    JumpUp,
    JumpDown,
}

impl MarkerKind {
    fn from_sign(s: i8) -> Self {
        match s {
            0 => MarkerKind::Kink,
            s if s > 0 => MarkerKind::JumpUp,
            _ => MarkerKind::JumpDown,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            MarkerKind::Kink => "kink",
            MarkerKind::JumpUp => "jump_up",
            MarkerKind::JumpDown => "jump_down",
        }
    }
}

/// A pole crossing that split a piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub comp: usize,
    /// `0.0` or `0.5`.
    pub pole: f64,
}

/// A singular point of the current stage with one tag per component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Marker {
    pub u: f64,
    pub kinds: Vec<MarkerKind>,
    /// Set when the point was created by the most recent split.
    pub created_by: Option<Crossing>,
}

/// Value of `ψ_stage^comp` forced at a crossing point.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Pin {
    stage: u32,
    comp: u32,
    target: Lift,
}

#[derive(Debug, Clone)]
pub(crate) struct Piece {
    pub s_a: f64,
    pub s_b: f64,
    pub parent: u32,
    /// Return time taking the parent's `ψ` to this level's `θ`.
    pub tau: f64,
    left: Option<Pin>,
    right: Option<Pin>,
}

/// One-sided stage values at both ends of a piece, one component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ends {
    pub z_l: Lift,
    pub z_r: Lift,
    pub psi_l: Lift,
    pub psi_r: Lift,
}

#[derive(Debug, Clone)]
pub(crate) struct Level {
    pub pieces: Vec<Piece>,
    /// `pieces.len() * n`, piece-major.
    pub ends: Vec<Ends>,
    /// Jump direction at the left end of each piece, piece-major.
    pub signs: Vec<i8>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Eval {
    pub z: Lift,
    pub psi: Lift,
    /// `dθ/du` at the evaluated level.
    pub dz: f64,
    /// `dψ/du` at the evaluated level.
    pub dpsi: f64,
}

#[derive(Debug, Clone)]
pub struct PiecewiseGraph {
    params: ModelParams,
    a: f64,
    x_anchor: f64,
    beta: f64,
    expansion: f64,
    /// Base point of generation `k`, `A^k (x_anchor, 0)`.
    base: Vec<(f64, f64)>,
    pub(crate) levels: Vec<Level>,
    generation: usize,
    stage: Stage,
    exec: Execution,
}

/// Generation-0 graph `θ_0 = 0` over `[0, a]`, starting at `(x_anchor, 0)`.
pub fn init_curve(a: f64, x_anchor: f64, params: &ModelParams) -> Result<PiecewiseGraph> {
    if params.anosov.leading_eigenvalue <= 0.0 {
        return Err(Error::UnsupportedOrientation);
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParams(format!("segment length {a} must be positive")));
    }
    let mut g = PiecewiseGraph {
        params: params.clone(),
        a,
        x_anchor,
        beta: params.anosov.unstable_dir[0],
        expansion: params.anosov.leading_eigenvalue,
        base: vec![(crate::torus::wrap(x_anchor), 0.0)],
        levels: Vec::new(),
        generation: 0,
        stage: Stage::Theta,
        exec: Execution::default(),
    };
    let root = Piece { s_a: 0.0, s_b: a, parent: 0, tau: f64::NAN, left: None, right: None };
    let ends = (0..params.n).map(|i| g.ends_of(&[f64::NAN], &root, i)).collect::<Result<Vec<_>>>()?;
    g.levels.push(Level { pieces: vec![root], ends, signs: vec![0; params.n] });
    Ok(g)
}

/// `θ_n -> ψ_n`: adds the rotation. No new singular points.
pub fn apply_phi1(mut g: PiecewiseGraph) -> PiecewiseGraph {
    assert_eq!(g.stage, Stage::Theta, "apply_phi1 expects a θ-stage graph");
    g.stage = Stage::Psi;
    g
}

/// `ψ_n -> ζ_n`: splits every piece where a component crosses a pole and
/// flows each part for its own return time.
pub fn apply_phi2(mut g: PiecewiseGraph) -> Result<PiecewiseGraph> {
    assert_eq!(g.stage, Stage::Psi, "apply_phi2 expects a ψ-stage graph");
    if g.levels.len() == g.generation + 1 {
        g.grow()?;
    }
    g.stage = Stage::Zeta;
    Ok(g)
}

/// `ζ_n -> θ_{n+1}`: dilates the domain by `e^λ`.
pub fn apply_phi3(mut g: PiecewiseGraph) -> PiecewiseGraph {
    assert_eq!(g.stage, Stage::Zeta, "apply_phi3 expects a ζ-stage graph");
    g.generation += 1;
    g.stage = Stage::Theta;
    g
}

/// `Φ_3 ∘ Φ_2 ∘ Φ_1` on a θ-stage graph.
pub fn generation_step(g: PiecewiseGraph) -> Result<PiecewiseGraph> {
    Ok(apply_phi3(apply_phi2(apply_phi1(g))?))
}

impl PiecewiseGraph {
    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn x_anchor(&self) -> f64 {
        self.x_anchor
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn components(&self) -> usize {
        self.params.n
    }

    /// `e^{λn}`.
    pub fn scale(&self) -> f64 {
        self.stretch(self.generation)
    }

    /// `L = e^{λn} a`.
    pub fn domain_len(&self) -> f64 {
        self.scale() * self.a
    }

    /// The constant in `ι_n(u) = βu + const`.
    pub fn iota_offset(&self) -> f64 {
        self.base[self.generation].0
    }

    /// `ι_n(u)` as a real number (not reduced mod 1).
    pub fn iota(&self, u: f64) -> f64 {
        self.iota_offset() + self.beta * u
    }

    /// Number of pieces of the current stage.
    pub fn pieces(&self) -> usize {
        self.levels[self.stage_level()].pieces.len()
    }

    pub(crate) fn stage_level(&self) -> usize {
        match self.stage {
            Stage::Theta | Stage::Psi => self.generation,
            Stage::Zeta => self.generation + 1,
        }
    }

    pub(crate) fn exec(&self) -> Execution {
        self.exec
    }

    fn stretch(&self, k: usize) -> f64 {
        self.expansion.powi(k as i32)
    }

    /// Point of the initial segment at arclength `s`.
    pub fn initial_point(&self, s: f64) -> (f64, f64) {
        let [vx, vy] = self.params.anosov.unstable_dir;
        (self.base[0].0 + vx * s, vy * s)
    }

    /// Circle values of every component at `u` for the current stage. A `u`
    /// on a piece boundary reads the left piece.
    pub fn eval(&self, u: f64) -> Result<Vec<f64>> {
        let ev = self.eval_stage(u)?;
        Ok(ev
            .iter()
            .map(|e| match self.stage {
                Stage::Psi => e.psi.circle(),
                _ => e.z.circle(),
            })
            .collect())
    }

    /// Derivatives `d/du` of every component at `u` for the current stage.
    pub fn derivative(&self, u: f64) -> Result<Vec<f64>> {
        let ev = self.eval_stage(u)?;
        Ok(ev
            .iter()
            .map(|e| match self.stage {
                Stage::Theta => e.dz,
                Stage::Psi => e.dpsi,
                Stage::Zeta => e.dz * self.expansion,
            })
            .collect())
    }

    fn eval_stage(&self, u: f64) -> Result<Vec<Eval>> {
        let level = self.stage_level();
        let s = (u / self.scale()).clamp(0.0, self.a);
        let pieces = &self.levels[level].pieces;
        let idx = pieces.partition_point(|p| p.s_b < s).min(pieces.len() - 1);
        let taus = self.taus(level, idx);
        (0..self.params.n).map(|i| self.eval_at(&taus, s, i)).collect()
    }

    /// Monotone pieces of one component at the current stage, in `u`.
    pub fn segments(&self, comp: usize) -> Vec<MonotonePiece> {
        let level = &self.levels[self.stage_level()];
        let (n, scale) = (self.params.n, self.scale());
        level
            .pieces
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let e = &level.ends[j * n + comp];
                let (left, right) = match self.stage {
                    Stage::Psi => (e.psi_l, e.psi_r),
                    _ => (e.z_l, e.z_r),
                };
                MonotonePiece { u_a: p.s_a * scale, u_b: p.s_b * scale, left, right }
            })
            .collect()
    }

    /// Jump directions at the left end of every piece for one component.
    pub fn signs(&self, comp: usize) -> Vec<i8> {
        let level = &self.levels[self.stage_level()];
        let n = self.params.n;
        (0..level.pieces.len()).map(|j| level.signs[j * n + comp]).collect()
    }

    /// `Γ` of one component at the current stage.
    pub fn lift_component(&self, comp: usize) -> LiftedGraph {
        lift_with_signs(&self.segments(comp), Some(&self.signs(comp)))
    }

    /// Singular points of the current stage in increasing `u`.
    pub fn markers(&self) -> Vec<Marker> {
        let li = self.stage_level();
        let level = &self.levels[li];
        let (n, scale) = (self.params.n, self.scale());
        (1..level.pieces.len())
            .map(|j| {
                let p = &level.pieces[j];
                let created_by = p
                    .left
                    .filter(|pin| li > 0 && pin.stage as usize == li - 1)
                    .map(|pin| Crossing { comp: pin.comp as usize, pole: from_signed(pin.target.off) });
                Marker {
                    u: p.s_a * scale,
                    kinds: (0..n).map(|i| MarkerKind::from_sign(level.signs[j * n + i])).collect(),
                    created_by,
                }
            })
            .collect()
    }

    /// Per component, the number of discontinuities created by the most
    /// recent split (`X_n` at the ζ stage).
    pub fn new_discontinuities(&self) -> Vec<usize> {
        let mut out = vec![0; self.params.n];
        for m in self.markers().iter().filter(|m| m.created_by.is_some()) {
            for (i, k) in m.kinds.iter().enumerate() {
                if *k != MarkerKind::Kink {
                    out[i] += 1;
                }
            }
        }
        out
    }

    /// `τ_1..τ_k` along the ancestry of a level-`k` piece; index 0 unused.
    pub(crate) fn taus(&self, level: usize, idx: usize) -> Vec<f64> {
        let mut t = vec![f64::NAN; level + 1];
        let mut i = idx;
        for k in (1..=level).rev() {
            let p = &self.levels[k].pieces[i];
            t[k] = p.tau;
            i = p.parent as usize;
        }
        t
    }

    /// Unpinned evaluation of one component at the deepest level of `taus`.
    pub(crate) fn eval_at(&self, taus: &[f64], s: f64, i: usize) -> Result<Eval> {
        self.eval_pinned(taus, s, i, None)
    }

    fn eval_pinned(&self, taus: &[f64], s: f64, i: usize, pin: Option<Pin>) -> Result<Eval> {
        let m = taus.len() - 1;
        let rot = &self.params.rotations[i];
        let kappa = i64::from(rot.kappa);
        let mut z = Lift::ZERO;
        let mut dz = 0.0;
        let mut k = 0;
        loop {
            let x = self.base[k].0 + self.beta * self.stretch(k) * s;
            let fl = x.floor();
            let (r, dr) = rot.eval(x - fl);
            let mut psi = z.add(kappa * fl as i64, r);
            let dpsi = dz + self.beta * dr;
            if let Some(p) = pin {
                if p.stage as usize == k && p.comp as usize == i {
                    psi = p.target;
                }
            }
            if k == m {
                return Ok(Eval { z, psi, dz, dpsi });
            }
            k += 1;
            let (off, dg) = self.flow(i, psi.off, taus[k])?;
            z = Lift { turns: psi.turns, off };
            dz = dg * dpsi / self.expansion;
        }
    }

    /// `g_i^tau` on the signed representative.
    fn flow(&self, i: usize, off: f64, tau: f64) -> Result<(f64, f64)> {
        let f = &self.params.fibers[i];
        match f.kind {
            NsFlowKind::SineFamily { .. } | NsFlowKind::Projective { .. } => {
                Ok(tan_flow_signed(-f.lambda_minus, off, tau))
            }
            NsFlowKind::TabulatedField(_) => {
                let (z, dz) = evolve(f, from_signed(off), tau)?;
                let mut o = to_signed(z);
                // the flow preserves both half-circles
                if off < 0.0 && o >= 0.0 {
                    o = -f64::MIN_POSITIVE;
                } else if off > 0.0 && off < 0.5 && o < 0.0 {
                    o = 0.5 - f64::EPSILON;
                }
                Ok((o, dz))
            }
        }
    }

    fn ends_of(&self, taus: &[f64], p: &Piece, i: usize) -> Result<Ends> {
        let l = self.eval_pinned(taus, p.s_a, i, p.left)?;
        let r = self.eval_pinned(taus, p.s_b, i, p.right)?;
        Ok(Ends { z_l: l.z, z_r: r.z, psi_l: l.psi, psi_r: r.psi })
    }

    pub(crate) fn piece(&self, level: usize, idx: usize) -> (f64, f64) {
        let p = &self.levels[level].pieces[idx];
        (p.s_a, p.s_b)
    }

    pub(crate) fn ends(&self, level: usize, idx: usize, i: usize) -> Ends {
        self.levels[level].ends[idx * self.params.n + i]
    }

    /// Root of `ψ^i(s) = target` in `(lo, hi]`: safeguarded Newton on the
    /// monotone piece, falling back to bisection, stopping at a residual of
    /// `ROOT_TOL` or when the bracket is down to adjacent floats.
    pub(crate) fn find_root(&self, taus: &[f64], i: usize, target: Lift, lo: f64, hi: f64) -> Result<f64> {
        let level = taus.len() - 1;
        let scale = self.stretch(level);
        let (mut lo, mut hi) = (lo, hi);
        let mut s = lo + 0.5 * (hi - lo);
        for k in 0.. {
            if s <= lo || s >= hi {
                return Ok(hi);
            }
            let ev = self.eval_at(taus, s, i)?;
            let f = ev.psi.minus(&target);
            if f.abs() <= ROOT_TOL {
                return Ok(s);
            }
            if f < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - f / (ev.dpsi * scale);
            s = if (k < 8 || k % 2 == 1) && newton > lo && newton < hi { newton } else { lo + 0.5 * (hi - lo) };
        }
        unreachable!()
    }

    /// The `s`-intervals of a piece on which `inside(off of ψ^i)` holds.
    /// `offs` must contain every class boundary.
    pub(crate) fn level_set<F>(
        &self,
        level: usize,
        idx: usize,
        taus: &[f64],
        i: usize,
        offs: &[f64],
        inside: F,
    ) -> Result<Vec<(f64, f64)>>
    where
        F: Fn(f64) -> bool,
    {
        let (s_a, s_b) = self.piece(level, idx);
        let e = self.ends(level, idx, i);
        let mut cuts = vec![(s_a, e.psi_l)];
        let mut lo = s_a;
        for t in targets_between(&e.psi_l, &e.psi_r, offs) {
            lo = self.find_root(taus, i, t, lo, s_b)?;
            cuts.push((lo, t));
        }
        cuts.push((s_b, e.psi_r));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let mid = w[0].1.add(0, 0.5 * w[1].1.minus(&w[0].1));
            if w[1].0 > w[0].0 && inside(mid.off) {
                match out.last_mut() {
                    Some(last) if last.1 == w[0].0 => last.1 = w[1].0,
                    _ => out.push((w[0].0, w[1].0)),
                }
            }
        }
        Ok(out)
    }

    fn tau_for(&self, upper: &[bool]) -> f64 {
        let count = upper.iter().filter(|&&u| u).count();
        (1.0 - self.params.b) / (1.0 - self.params.phi.at(count))
    }

    fn split(&self, k: usize, idx: usize) -> Result<Vec<Piece>> {
        let n = self.params.n;
        let p = &self.levels[k].pieces[idx];
        let taus = self.taus(k, idx);
        let mut events: Vec<(f64, usize, Lift)> = Vec::new();
        for i in 0..n {
            let e = self.ends(k, idx, i);
            let mut lo = p.s_a;
            for t in targets_between(&e.psi_l, &e.psi_r, &POLES) {
                lo = self.find_root(&taus, i, t, lo, p.s_b)?;
                events.push((lo, i, t));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut upper: Vec<bool> = (0..n).map(|i| self.ends(k, idx, i).psi_l.upper()).collect();
        let mut out = Vec::with_capacity(events.len() + 1);
        let (mut start, mut left) = (p.s_a, p.left);
        for (s, i, target) in events {
            let pin = Pin { stage: k as u32, comp: i as u32, target };
            out.push(Piece { s_a: start, s_b: s, parent: idx as u32, tau: self.tau_for(&upper), left, right: Some(pin) });
            upper[i] = target.upper();
            start = s;
            left = Some(pin);
        }
        out.push(Piece { s_a: start, s_b: p.s_b, parent: idx as u32, tau: self.tau_for(&upper), left, right: p.right });
        Ok(out)
    }

    fn grow(&mut self) -> Result<()> {
        let k = self.levels.len() - 1;
        let n = self.params.n;
        let (x, y) = self.base[k];
        self.base.push(self.params.anosov.apply(x, y));

        let parts = self.exec.map_range(self.levels[k].pieces.len(), |idx| self.split(k, idx));
        let mut pieces = Vec::new();
        for p in parts {
            pieces.extend(p?);
        }
        let ends = self.exec.map_range(pieces.len(), |j| {
            let p = &pieces[j];
            let mut taus = self.taus(k, p.parent as usize);
            taus.push(p.tau);
            (0..n).map(|i| self.ends_of(&taus, p, i)).collect::<Result<Vec<_>>>()
        });
        let mut flat = Vec::with_capacity(pieces.len() * n);
        for e in ends {
            flat.extend(e?);
        }

        let prev = &self.levels[k];
        let mut signs = vec![0i8; pieces.len() * n];
        for j in 1..pieces.len() {
            let inherited = pieces[j].parent != pieces[j - 1].parent;
            for i in 0..n {
                let (l, r) = (flat[(j - 1) * n + i].z_r, flat[j * n + i].z_l);
                let delta = r.signed_gap(&l);
                let before = inherited.then(|| prev.signs[pieces[j].parent as usize * n + i]);
                let resolved = delta.abs() > SIGN_RESOLUTION * l.off.abs().max(r.off.abs());
                signs[j * n + i] = match before {
                    // orientation-preserving maps keep the direction of an
                    // unresolvable jump
                    Some(s) if s != 0 && !resolved => s,
                    _ => sign(delta),
                };
            }
        }
        self.levels.push(Level { pieces, ends: flat, signs });
        Ok(())
    }
}

fn sign(d: f64) -> i8 {
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}
