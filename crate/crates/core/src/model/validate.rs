use serde::Serialize;

use super::params::ModelParams;
use crate::exec::Execution;
use crate::fiber::{evolve, ns_image_of_arc, Arc};

/// Relative slack allowed on the steep-slope check, whose canonical
/// construction meets the bound with equality.
const STEEP_TOL: f64 = 1e-12;
const T_SAMPLES: usize = 100;
const MIN_ARC_POINTS: usize = 201;
const NS_HORIZON: f64 = 50.0;
const NS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unit: Option<usize>,
    pub passed: bool,
    pub severity: Severity,
    /// Worst-case slack; the check passes iff this is non-negative.
    pub margin: f64,
    pub detail: String,
}

/// Per-unit constants computed by the validator.
#[derive(Debug, Clone, Serialize)]
pub struct UnitDerived {
    pub unit: usize,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// `dist(boundary of I-, boundary of g^{1-b}(I+))`.
    pub d_computed: f64,
    pub d_declared: f64,
    pub min_expansion_on_i_plus: f64,
    pub max_derivative_on_i_minus: f64,
    pub min_slope: f64,
    pub max_curvature: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// True iff every error-severity check passed.
    pub passed: bool,
    pub lambda: f64,
    pub exp_lambda: f64,
    pub beta: f64,
    pub tau_max: f64,
    pub grid_resolution: usize,
    pub time_samples: usize,
    pub checks: Vec<AssumptionCheck>,
    pub warnings: Vec<String>,
    pub units: Vec<UnitDerived>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed && c.severity == Severity::Error)
    }

    pub fn check(&self, name: &str, unit: Option<usize>) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name && c.unit == unit)
    }
}

/// Grid-checks the assumptions on the fiber flows, the rotation maps, the
/// inhibition table and the base. `grid_resolution` is points per unit length.
pub fn validate_params(params: &ModelParams, grid_resolution: usize) -> ValidationReport {
    validate_params_with(params, grid_resolution, Execution::default())
}

pub fn validate_params_with(
    params: &ModelParams,
    grid_resolution: usize,
    exec: Execution,
) -> ValidationReport {
    let grid_resolution = grid_resolution.max(10);
    let lambda = params.anosov.lambda;
    let mut checks = Vec::new();
    let mut warnings = Vec::new();

    let phi_problems = params.phi.violations();
    let phi_gap = params
        .phi
        .table
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(1.0 - params.phi.at(params.n), f64::min);
    checks.push(AssumptionCheck {
        name: "phi".into(),
        unit: None,
        passed: phi_problems.is_empty(),
        severity: Severity::Error,
        margin: phi_gap,
        detail: if phi_problems.is_empty() {
            format!("Φ(N) = {}", params.phi.at(params.n))
        } else {
            phi_problems.join("; ")
        },
    });

    let exp_lambda = lambda.exp();
    let ok = exp_lambda > 3.0;
    if !ok {
        warnings.push(format!("e^λ ≈ {exp_lambda:.3} ≤ 3: range-growth hypothesis fails"));
    }
    checks.push(AssumptionCheck {
        name: "exp_lambda_gt_3".into(),
        unit: None,
        passed: ok,
        severity: Severity::Warning,
        margin: exp_lambda - 3.0,
        detail: format!("e^λ = {exp_lambda}"),
    });

    let t_lo = 1.0 - params.b;
    let t_hi = if params.tau_max.is_finite() { params.tau_max } else { t_lo };
    let times: Vec<f64> = (0..T_SAMPLES)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (T_SAMPLES - 1) as f64)
        .collect();

    let mut units = Vec::new();
    for i in 0..params.n {
        let (unit_checks, derived) = validate_unit(params, i, &times, grid_resolution, exec);
        checks.extend(unit_checks);
        units.push(derived);
    }

    let passed = checks.iter().all(|c| c.passed || c.severity == Severity::Warning);
    ValidationReport {
        passed,
        lambda,
        exp_lambda,
        beta: params.anosov.beta,
        tau_max: params.tau_max,
        grid_resolution,
        time_samples: T_SAMPLES,
        checks,
        warnings,
        units,
    }
}

fn arc_grid(center: f64, delta: f64, per_unit: usize) -> Vec<f64> {
    let n = ((2.0 * delta * per_unit as f64).ceil() as usize).max(MIN_ARC_POINTS);
    (0..n)
        .map(|k| {
            let off = -delta + 2.0 * delta * k as f64 / (n - 1) as f64;
            crate::torus::wrap(center + off)
        })
        .collect()
}

fn validate_unit(
    params: &ModelParams,
    i: usize,
    times: &[f64],
    grid: usize,
    exec: Execution,
) -> (Vec<AssumptionCheck>, UnitDerived) {
    let flow = &params.fibers[i];
    let rot = &params.rotations[i];
    let lambda = params.anosov.lambda;
    let mut checks = Vec::new();
    let mut push = |name: &str, margin: f64, tol: f64, detail: String| {
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        checks.push(AssumptionCheck {
            name: name.into(),
            unit: Some(i),
            passed: margin >= -tol,
            severity: Severity::Error,
            margin,
            detail,
        });
    };

    let plus = arc_grid(0.5, flow.delta_plus, grid);
    let minus = arc_grid(0.0, flow.delta_minus, grid);
    let i_plus = Arc::centered(0.5, flow.delta_plus);
    let outside_minus = Arc::new(flow.delta_minus, 1.0 - flow.delta_minus);

    // per time: (min g' on I+, max g' on I-, A2 containment margin)
    let per_t = exec.map(times, |&t| {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &z in &plus {
            lo = lo.min(evolve(flow, z, t).map_or(0.0, |e| e.1));
        }
        for &z in &minus {
            hi = hi.max(evolve(flow, z, t).map_or(f64::INFINITY, |e| e.1));
        }
        let a2 = ns_image_of_arc(flow, i_plus, t)
            .map_or(f64::NEG_INFINITY, |img| img.containment_margin(&outside_minus));
        (lo, hi, a2)
    });
    let min_exp = per_t.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let max_con = per_t.iter().map(|p| p.1).fold(0.0, f64::max);
    let a2 = per_t.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
    let d_computed = per_t[0].2;

    push(
        "A1_expansion",
        min_exp.ln() - lambda,
        0.0,
        format!("min (g^t)' on I+ = {min_exp:.6e} vs e^λ = {:.6}", lambda.exp()),
    );
    push(
        "A1_contraction",
        flow.contraction_c - max_con,
        0.0,
        format!("max (g^t)' on I- = {max_con:.6e} vs c = {}", flow.contraction_c),
    );
    push("A2", a2, 0.0, "g^t(I+) covers the complement of I- by this much".into());
    push(
        "d_cross_check",
        d_computed - rot.d,
        0.0,
        format!("d computed = {d_computed:.6}, rotation map built with d = {}", rot.d),
    );

    let xs: Vec<f64> = (0..grid).map(|k| k as f64 / grid as f64).chain(rot.knots().iter().copied().filter(|&k| k < 1.0)).collect();
    let evals = exec.map(&xs, |&x| rot.eval(x));
    let steep_lo = d_computed.min(0.5);
    let mut steep_margin = f64::INFINITY;
    let mut min_slope = f64::INFINITY;
    for &(r, s) in &evals {
        min_slope = min_slope.min(s);
        let frac = r - r.floor();
        if frac > steep_lo && frac < 1.0 - steep_lo {
            steep_margin = steep_margin.min(s * rot.epsilon - 1.0);
        }
    }
    if steep_margin == f64::INFINITY {
        steep_margin = 0.0;
    }
    push(
        "A3",
        steep_margin,
        STEEP_TOL,
        format!("min r'·ε - 1 where r mod 1 in (d, 1-d): {steep_margin:.3e}"),
    );
    push(
        "A4",
        min_slope - rot.connector_slope_floor,
        0.0,
        format!("min r' = {min_slope:.6} vs c' = {}", rot.connector_slope_floor),
    );

    let starts: Vec<f64> = (0..1000).map(|k| k as f64 / 1000.0).filter(|&z| z != 0.5).collect();
    let worst = exec
        .map(&starts, |&z| evolve(flow, z, NS_HORIZON).map_or(f64::INFINITY, |e| crate::torus::circle_dist(e.0, 0.0)))
        .into_iter()
        .fold(0.0, f64::max);
    push(
        "ns_convergence",
        NS_TOL - worst,
        0.0,
        format!("max distance to the S-pole after t = {NS_HORIZON}: {worst:.3e}"),
    );

    let derived = UnitDerived {
        unit: i,
        lambda_minus: flow.lambda_minus,
        lambda_plus: flow.lambda_plus,
        d_computed,
        d_declared: rot.d,
        min_expansion_on_i_plus: min_exp,
        max_derivative_on_i_minus: max_con,
        min_slope,
        max_curvature: rot.max_curvature(),
    };
    (checks, derived)
}
