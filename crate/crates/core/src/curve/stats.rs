//! Mass, slope and range statistics of evolved curves.

use serde::Serialize;

use super::graph::{apply_phi1, apply_phi2, apply_phi3, init_curve, MarkerKind, PiecewiseGraph, Stage};
use super::lift::range_of;
use crate::error::Result;
use crate::exec::Execution;
use crate::model::ModelParams;
use crate::return_map::fmt;

/// Relative slack for the conditional slope bound, which the canonical
/// steep construction meets with equality at generation 0.
pub const SLOPE_TOLERANCE: f64 = 1e-9;

fn expect_psi(g: &PiecewiseGraph) {
    assert_eq!(g.stage(), Stage::Psi, "statistic is defined on ψ-stage graphs");
}

/// Intervals of the ψ-stage at `level` where `inside(off)` holds, per
/// component and piece, flattened into total measure per component.
fn measure_where<F>(g: &PiecewiseGraph, level: usize, offs: &[Vec<f64>], inside: F) -> Result<Vec<Vec<(f64, f64)>>>
where
    F: Fn(usize, f64) -> bool + Sync,
{
    let n = g.components();
    let per_piece = g.exec().map_range(g.levels[level].pieces.len(), |idx| {
        let taus = g.taus(level, idx);
        (0..n)
            .map(|i| g.level_set(level, idx, &taus, i, &offs[i], |o| inside(i, o)))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = vec![Vec::new(); n];
    for r in per_piece {
        for (i, iv) in r?.into_iter().enumerate() {
            out[i].extend(iv);
        }
    }
    Ok(out)
}

/// Per component, the fraction of the domain where `ψ_n^i` lies outside
/// `I_i^-`.
pub fn concentration_stats(g: &PiecewiseGraph) -> Result<Vec<f64>> {
    expect_psi(g);
    let dm: Vec<f64> = g.params().fibers.iter().map(|f| f.delta_minus).collect();
    let offs: Vec<Vec<f64>> = dm.iter().map(|&d| vec![-d, d]).collect();
    let iv = measure_where(g, g.generation(), &offs, |i, o| o.abs() > dm[i])?;
    Ok(iv.iter().map(|v| total(v) / g.a()).collect())
}

fn total(iv: &[(f64, f64)]) -> f64 {
    iv.iter().fold(0.0, |s, (a, b)| s + (b - a))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeStats {
    /// Smallest sampled `dψ^i/du` over the whole domain.
    pub global_min: Vec<f64>,
    /// Smallest sampled `dψ^i/du` where `ψ^i` is outside `I_i^-`.
    pub conditional_min: Vec<Option<f64>>,
    /// `β / ε_i`.
    pub conditional_bound: Vec<f64>,
    pub samples: usize,
    pub conditional_samples: usize,
}

impl SlopeStats {
    /// Whether every conditional sample meets `β / ε_i`.
    pub fn bound_holds(&self) -> bool {
        self.conditional_min
            .iter()
            .zip(&self.conditional_bound)
            .all(|(m, b)| m.is_none_or(|m| m >= b * (1.0 - SLOPE_TOLERANCE)))
    }
}

/// Sampled minimum slopes of the ψ-stage, `k` interior samples per piece and
/// `k` per sub-interval outside `I^-`.
pub fn min_slope_off_markers(g: &PiecewiseGraph, k: usize) -> Result<SlopeStats> {
    expect_psi(g);
    let level = g.generation();
    let n = g.components();
    let frac = |j: usize| (j as f64 + 0.5) / k as f64;
    let rows = g.exec().map_range(g.levels[level].pieces.len(), |idx| -> Result<_> {
        let taus = g.taus(level, idx);
        let (s_a, s_b) = g.piece(level, idx);
        let mut glob = vec![f64::INFINITY; n];
        let mut cond = vec![f64::INFINITY; n];
        let mut counts = (0, 0);
        for i in 0..n {
            for j in 0..k {
                let d = g.eval_at(&taus, s_a + frac(j) * (s_b - s_a), i)?.dpsi;
                glob[i] = glob[i].min(d);
                counts.0 += 1;
            }
            let dm = g.params().fibers[i].delta_minus;
            for (a, b) in g.level_set(level, idx, &taus, i, &[-dm, dm], |o| o.abs() > dm)? {
                for j in 0..k {
                    let ev = g.eval_at(&taus, a + frac(j) * (b - a), i)?;
                    // intervals narrower than an ulp round onto their ends
                    if ev.psi.off.abs() <= dm {
                        continue;
                    }
                    cond[i] = cond[i].min(ev.dpsi);
                    counts.1 += 1;
                }
            }
        }
        Ok((glob, cond, counts))
    });
    let mut out = SlopeStats {
        global_min: vec![f64::INFINITY; n],
        conditional_min: vec![None; n],
        conditional_bound: g.params().rotations.iter().map(|r| g.beta() / r.epsilon).collect(),
        samples: 0,
        conditional_samples: 0,
    };
    for r in rows {
        let (glob, cond, (a, b)) = r?;
        out.samples += a;
        out.conditional_samples += b;
        for i in 0..n {
            out.global_min[i] = out.global_min[i].min(glob[i]);
            if cond[i].is_finite() {
                out.conditional_min[i] = Some(out.conditional_min[i].map_or(cond[i], |m: f64| m.min(cond[i])));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassEstimate {
    pub xi: f64,
    /// Average over generations of the fraction of the domain where some
    /// component is within `xi` of a pole.
    pub mass: f64,
    /// `mass / xi`.
    pub c3: f64,
    pub per_generation: Vec<f64>,
}

/// Cesàro average over the ψ-stages of generations `0..=n` of the fraction of
/// the domain within `xi` of the singular set `{z_i in {0, 1/2}}`.
pub fn near_singularity_mass(g: &PiecewiseGraph, xi: f64) -> Result<MassEstimate> {
    assert!((0.0..0.25).contains(&xi), "xi must lie in [0, 1/4)");
    let mut per_generation = Vec::new();
    for level in 0..=g.generation() {
        let frac = if xi == 0.0 {
            0.0
        } else {
            let offs = vec![vec![-0.5 + xi, -xi, xi, 0.5 - xi]; g.components()];
            let iv = measure_where(g, level, &offs, |_, o| o.abs() <= xi || o.abs() >= 0.5 - xi)?;
            union_len(iv.into_iter().flatten().collect()) / g.a()
        };
        per_generation.push(frac);
    }
    let mass = per_generation.iter().sum::<f64>() / per_generation.len() as f64;
    let c3 = if xi > 0.0 { mass / xi } else { 0.0 };
    Ok(MassEstimate { xi, mass, c3, per_generation })
}

fn union_len(mut iv: Vec<(f64, f64)>) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut len = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for (a, b) in iv {
        cur = match cur {
            Some((ca, cb)) if a <= cb => Some((ca, cb.max(b))),
            Some((ca, cb)) => {
                len += cb - ca;
                Some((a, b))
            }
            None => Some((a, b)),
        };
    }
    if let Some((a, b)) = cur {
        len += b - a;
    }
    len
}

/// One row of a curve snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub u: f64,
    pub z: Vec<f64>,
    pub marker: String,
}

impl SnapshotRow {
    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["u".to_string()];
        h.extend((1..=n).map(|i| format!("z{i}")));
        h.push("marker".into());
        h
    }

    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![fmt(self.u)];
        f.extend(self.z.iter().map(|&v| fmt(v)));
        f.push(self.marker.clone());
        f
    }
}

/// Samples the current stage: both one-sided end values of every piece plus
/// `k` interior points. The first row of a piece carries the marker tags of
/// its left end, one per component joined by `;`.
pub fn snapshot(g: &PiecewiseGraph, k: usize) -> Result<Vec<SnapshotRow>> {
    let n = g.components();
    let segs: Vec<_> = (0..n).map(|i| g.segments(i)).collect();
    let markers = g.markers();
    let scale = g.scale();
    let mut rows = Vec::new();
    for j in 0..segs[0].len() {
        let (u_a, u_b) = (segs[0][j].u_a, segs[0][j].u_b);
        let marker = if j == 0 {
            String::new()
        } else {
            markers[j - 1].kinds.iter().map(MarkerKind::tag).collect::<Vec<_>>().join(";")
        };
        rows.push(SnapshotRow { u: u_a, z: segs.iter().map(|s| s[j].left.circle()).collect(), marker });
        for m in 0..k {
            let u = u_a + (m as f64 + 1.0) / (k as f64 + 1.0) * (u_b - u_a);
            if u > u_a && u < u_b {
                rows.push(SnapshotRow { u, z: g.eval(u.min(scale * g.a()))?, marker: String::new() });
            }
        }
        rows.push(SnapshotRow { u: u_b, z: segs.iter().map(|s| s[j].right.circle()).collect(), marker: String::new() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveConfig {
    pub a: f64,
    pub x_anchor: f64,
    /// Highest generation to compute.
    pub generations: usize,
    pub samples_per_piece: usize,
    /// Upper bound on pieces times samples per piece.
    pub sample_cap: u64,
    pub xi: Vec<f64>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            x_anchor: 0.1,
            generations: 8,
            samples_per_piece: 8,
            sample_cap: 100_000_000,
            xi: vec![0.1, 0.05, 0.025, 0.0125],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionChecks {
    /// `R(θ̂_n) = R(ζ̂_{n-1})`.
    pub theta_matches_previous_zeta: bool,
    /// `R(ψ̂_n) <= R(θ̂_n) + κ e^{λn} a β + κ`.
    pub psi_bound: bool,
    /// `R(ζ̂_n) <= R(ψ̂_n) + 1 + X_n`.
    pub zeta_bound: bool,
    /// `X_n^i <= Σ_{j != i} 2 (R(ψ̂_n^j) + 1)`.
    pub marker_bound: bool,
}

impl RecursionChecks {
    pub fn all(&self) -> bool {
        self.theta_matches_previous_zeta && self.psi_bound && self.zeta_bound && self.marker_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationStats {
    pub n: usize,
    pub pieces: usize,
    pub domain_len: f64,
    pub range_theta: Vec<f64>,
    pub range_psi: Vec<f64>,
    pub range_zeta: Vec<f64>,
    pub new_jumps: Vec<usize>,
    pub down_jumps: Vec<usize>,
    pub fraction_outside: Vec<f64>,
    pub slopes: SlopeStats,
    pub recursion: RecursionChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveReport {
    pub a: f64,
    pub x_anchor: f64,
    pub lambda: f64,
    pub beta: f64,
    pub epsilon: Vec<f64>,
    pub generations: Vec<GenerationStats>,
    /// Set when the sample cap stopped the run before the requested generation.
    pub capped_at: Option<usize>,
    /// Smallest global slope over all generations, per component.
    pub c1: Vec<f64>,
    /// `fraction_outside / ε` per generation, per component.
    pub fitted_c: Vec<Vec<f64>>,
    /// Least-squares slope of `ln R(ψ̂_n)` against `n >= 1`, per component.
    pub range_log_slope: Vec<f64>,
    pub masses: Vec<MassEstimate>,
}

/// Range comparisons allow for accumulated rounding in long lifts.
fn le(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

/// Evolves the initial segment generation by generation, recording every
/// statistic, until `cfg.generations` or the sample cap.
pub fn run_curve_lab(params: &ModelParams, cfg: &CurveConfig, exec: Execution) -> Result<(CurveReport, PiecewiseGraph)> {
    let n_comp = params.n;
    let mut g = init_curve(cfg.a, cfg.x_anchor, params)?.with_execution(exec);
    let beta = g.beta();
    let mut gens: Vec<GenerationStats> = Vec::new();
    let mut capped_at = None;
    let mut prev_pieces = 1usize;
    loop {
        let n = g.generation();
        let range_theta: Vec<f64> = (0..n_comp).map(|i| range_of(&g.lift_component(i))).collect();
        g = apply_phi1(g);
        let range_psi: Vec<f64> = (0..n_comp).map(|i| range_of(&g.lift_component(i))).collect();
        let fraction_outside = concentration_stats(&g)?;
        let slopes = min_slope_off_markers(&g, cfg.samples_per_piece)?;
        let pieces = g.pieces();
        let last = n == cfg.generations;
        let grow_next = !last && {
            let est = (pieces as f64) * (pieces as f64 / prev_pieces as f64);
            let over = est * cfg.samples_per_piece as f64 > cfg.sample_cap as f64;
            if over {
                capped_at = Some(n);
            }
            !over
        };
        // ζ_n needs the next level; compute it for recursion checks only when
        // the run continues or the cap still allows it
        let (range_zeta, new_jumps, down_jumps) = if grow_next || (last && pieces * cfg.samples_per_piece <= cfg.sample_cap as usize) {
            g = apply_phi2(g)?;
            let lifts: Vec<_> = (0..n_comp).map(|i| g.lift_component(i)).collect();
            (
                lifts.iter().map(range_of).collect::<Vec<_>>(),
                g.new_discontinuities(),
                g.markers().iter().fold(vec![0; n_comp], |mut acc, m| {
                    for (i, k) in m.kinds.iter().enumerate() {
                        acc[i] += usize::from(*k == MarkerKind::JumpDown);
                    }
                    acc
                }),
            )
        } else {
            (vec![f64::NAN; n_comp], vec![0; n_comp], vec![0; n_comp])
        };
        let scale = g.scale();
        let recursion = RecursionChecks {
            theta_matches_previous_zeta: gens
                .last()
                .is_none_or(|p| p.range_zeta.iter().zip(&range_theta).all(|(a, b)| (a - b).abs() <= 1e-9 * a.max(1.0))),
            psi_bound: (0..n_comp).all(|i| {
                let kappa = f64::from(params.rotations[i].kappa);
                le(range_psi[i], range_theta[i] + kappa * scale * cfg.a * beta + kappa)
            }),
            zeta_bound: (0..n_comp)
                .all(|i| range_zeta[i].is_nan() || le(range_zeta[i], range_psi[i] + 1.0 + new_jumps[i] as f64)),
            marker_bound: (0..n_comp).all(|i| {
                let bound: f64 = (0..n_comp).filter(|&j| j != i).map(|j| 2.0 * (range_psi[j] + 1.0)).sum();
                new_jumps[i] as f64 <= bound
            }),
        };
        gens.push(GenerationStats {
            n,
            pieces,
            domain_len: g.domain_len(),
            range_theta,
            range_psi,
            range_zeta,
            new_jumps,
            down_jumps,
            fraction_outside,
            slopes,
            recursion,
        });
        if !grow_next {
            break;
        }
        prev_pieces = pieces;
        g = apply_phi3(g);
    }
    let masses = cfg.xi.iter().map(|&xi| near_singularity_mass(&g, xi)).collect::<Result<Vec<_>>>()?;
    let epsilon: Vec<f64> = params.rotations.iter().map(|r| r.epsilon).collect();
    let c1 = (0..n_comp)
        .map(|i| gens.iter().map(|s| s.slopes.global_min[i]).fold(f64::INFINITY, f64::min))
        .collect();
    let fitted_c = gens.iter().map(|s| s.fraction_outside.iter().zip(&epsilon).map(|(f, e)| f / e).collect()).collect();
    let range_log_slope = (0..n_comp)
        .map(|i| {
            let pts: Vec<(f64, f64)> = gens
                .iter()
                .filter(|s| s.n >= 1 && s.range_psi[i] > 0.0)
                .map(|s| (s.n as f64, s.range_psi[i].ln()))
                .collect();
            fit_slope(&pts)
        })
        .collect();
    let report = CurveReport {
        a: cfg.a,
        x_anchor: cfg.x_anchor,
        lambda: params.anosov.lambda,
        beta,
        epsilon,
        generations: gens,
        capped_at,
        c1,
        fitted_c,
        range_log_slope,
        masses,
    };
    Ok((report, g))
}

/// Least-squares slope; NaN with fewer than two points.
pub fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    num / den
}
