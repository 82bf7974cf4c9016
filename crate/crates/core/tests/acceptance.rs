//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{fig3, n2};
use ei_core::curve::{lift, run_curve_lab, CurveConfig, CurveReport, Lift, MonotonePiece};
use ei_core::flow_sim::{activation_raster, section_returns, FlowState, RasterEvent};
use ei_core::return_map::{birkhoff_averages, lyapunov_spectrum, step, sync_test, Observable, SectionPoint};
use ei_core::seeds::trial_rng;
use ei_core::torus::circle_dist;
use ei_core::{validate_params, Execution, ModelParams};
use rand::Rng;

const MASTER_SEED: u64 = 20_240_611;
const CURVE_GENERATIONS: usize = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn assumptions(p: &ModelParams) -> Outcome {
    let t = Instant::now();
    let r = validate_params(p, 10_000);
    let secs = t.elapsed().as_secs_f64();
    let mut worst = f64::INFINITY;
    let mut ok = r.passed && r.exp_lambda > 3.0 && secs < 10.0;
    for name in ["A1_expansion", "A1_contraction", "A2", "A4"] {
        for u in 0..p.n {
            let m = r.check(name, Some(u)).map_or(f64::NEG_INFINITY, |c| c.margin);
            worst = worst.min(m);
            ok &= m > 0.0;
        }
    }
    for u in 0..p.n {
        ok &= r.check("A3", Some(u)).is_some_and(|c| c.passed && c.margin >= 0.0);
    }
    outcome(ok, format!("min margin A1/A2/A4 {worst:.3e}, e^λ {:.4}, {secs:.2}s", r.exp_lambda))
}

fn lyapunov(p: &ModelParams) -> Outcome {
    let t = Instant::now();
    let mut rng = trial_rng(MASTER_SEED, 2);
    let p0 = SectionPoint::random(p.n, &mut rng);
    let res = match lyapunov_spectrum(&p0, 1_000, 100_000, p, MASTER_SEED) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let secs = t.elapsed().as_secs_f64();
    let lam = p.anosov.lambda;
    let ex = &res.exponents;
    let top = (ex[0] - lam).abs() / lam;
    let (k_minus, minus) = ex
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, e)| (k, (e + lam).abs() / lam))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let fibers_negative = ex.iter().enumerate().skip(1).filter(|&(k, _)| k != k_minus).all(|(_, &e)| e < 0.0);
    let ok = top < 0.02 && minus < 0.02 && fibers_negative && secs < 60.0;
    outcome(ok, format!("exponents {ex:.4?}, λ {lam:.4}, rel err top {top:.2e} / -λ {minus:.2e}, {secs:.1}s"))
}

fn flow_vs_map(p: &ModelParams) -> Outcome {
    let mut rng = trial_rng(MASTER_SEED, 3);
    let p0 = SectionPoint::random(p.n, &mut rng);
    let flow = match section_returns(&p0, 1_000, p) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut pt = p0;
    let mut worst = 0.0f64;
    for (q, _) in &flow {
        pt = step(&pt, p).unwrap().next;
        worst = worst.max(circle_dist(pt.x, q.x)).max(circle_dist(pt.y, q.y));
        for (a, b) in pt.z.iter().zip(&q.z) {
            worst = worst.max(circle_dist(*a, *b));
        }
    }
    outcome(flow.len() == 1_000 && worst <= 1e-8, format!("{} returns, max coordinate gap {worst:.2e}", flow.len()))
}

fn concentration(p: &ModelParams, r: &CurveReport) -> Outcome {
    let mut ok = r.generations.len() > 4;
    let mut detail = Vec::new();
    for i in 0..p.n {
        let c3 = r.fitted_c[3][i];
        let bound = 10.0 * r.epsilon[i] * c3;
        let worst = r.generations[3..].iter().map(|g| g.fraction_outside[i]).fold(0.0, f64::max);
        ok &= worst < bound;
        detail.push(format!("unit {i}: max fraction {worst:.4e} < {bound:.4e}"));
    }
    let slopes = r.generations.iter().all(|g| g.slopes.bound_holds());
    let min_cond = r
        .generations
        .iter()
        .flat_map(|g| g.slopes.conditional_min.iter().flatten().copied())
        .fold(f64::INFINITY, f64::min);
    ok &= slopes;
    outcome(
        ok,
        format!(
            "generations 0..={}; {}; conditional slope min {min_cond:.6} vs β/ε {:.6}",
            r.generations.len() - 1,
            detail.join(", "),
            r.generations[0].slopes.conditional_bound[0]
        ),
    )
}

fn range_growth(r: &CurveReport) -> Outcome {
    let bound = r.lambda + 0.1;
    let slopes_ok = r.range_log_slope.iter().all(|&s| s <= bound);
    let rec = r.generations.iter().all(|g| g.recursion.all());
    outcome(slopes_ok && rec, format!("log-range slopes {:.4?} vs {bound:.4}, recursions hold: {rec}", r.range_log_slope))
}

fn random_pieces<R: Rng>(rng: &mut R) -> Vec<MonotonePiece> {
    let n = rng.random_range(1..60);
    let mut u = 0.0;
    (0..n)
        .map(|_| {
            let len = rng.random_range(1e-3..1.0);
            let start = rng.random_range(-10.0..10.0);
            let rise = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..4.0) };
            let p = MonotonePiece { u_a: u, u_b: u + len, left: Lift::new(start), right: Lift::new(start + rise) };
            u += len;
            p
        })
        .collect()
}

fn lift_laws() -> Outcome {
    let mut rng = trial_rng(MASTER_SEED, 6);
    let mut failures = 0;
    for _ in 0..1_000 {
        let pieces = random_pieces(&mut rng);
        let l = lift(&pieces);
        let mut ok = (0.0..1.0).contains(&l.start);
        for k in 0..pieces.len() {
            ok &= circle_dist(l.left(k).circle(), pieces[k].left.circle()) < 1e-12;
            ok &= circle_dist(l.right(k).circle(), pieces[k].right.circle()) < 1e-12;
            ok &= l.right(k) >= l.left(k);
        }
        for (k, &j) in l.jumps.iter().enumerate() {
            ok &= j > 0.0 && j < 1.0 && l.left(k + 1) > l.right(k);
        }
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("{failures} of 1000 random inputs violate a law"))
}

fn mass(r: &CurveReport) -> Outcome {
    let c3: Vec<f64> = r.masses.iter().map(|m| m.c3).collect();
    let (lo, hi) = c3.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let ratio = hi / lo;
    outcome(lo > 0.0 && ratio < 3.0, format!("mass/ξ {c3:.3?}, max/min {ratio:.3}"))
}

fn sync(p: &ModelParams) -> Outcome {
    let hits: usize = Execution::default()
        .map_range(100, |k| {
            let k = k as u64;
            let mut rng = trial_rng(MASTER_SEED.wrapping_add(8), k);
            let base = (rng.random(), rng.random());
            let za: Vec<f64> = (0..p.n).map(|_| rng.random()).collect();
            let zb: Vec<f64> = (0..p.n).map(|_| rng.random()).collect();
            match sync_test(base, &za, &zb, 200, p) {
                Ok(d) => usize::from(d.iter().any(|&x| x < 1e-6)),
                Err(_) => 0,
            }
        })
        .into_iter()
        .sum();
    outcome(hits >= 95, format!("{hits}/100 trials synchronize below 1e-6 within 200 returns"))
}

fn birkhoff(p: &ModelParams) -> Outcome {
    let obs = Observable::catalog(p.n);
    let runs = Execution::default().map_range(10, |k| {
        let mut rng = trial_rng(MASTER_SEED.wrapping_add(9), k as u64);
        birkhoff_averages(&SectionPoint::random(p.n, &mut rng), &obs, 100_000, p, true)
    });
    let runs: Vec<Vec<f64>> = match runs.into_iter().collect() {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut worst = (0.0f64, String::new());
    for (o, ob) in obs.iter().enumerate() {
        let vals: Vec<f64> = runs.iter().map(|r| r[o]).collect();
        let spread = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b)) - vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if spread > worst.0 {
            worst = (spread, ob.label());
        }
    }
    outcome(worst.0 < 5e-2, format!("max pairwise spread {:.3e} ({})", worst.0, worst.1))
}

fn binned(events: &[RasterEvent], unit: usize, bins: usize, width: f64) -> Vec<f64> {
    let mut v = vec![0.0; bins];
    for e in events.iter().filter(|e| e.unit == unit) {
        v[((e.t / width) as usize).min(bins - 1)] += 1.0;
    }
    v
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

fn fig3_raster(p: &ModelParams) -> Outcome {
    let t_end = 200.0;
    let mut rng = trial_rng(MASTER_SEED, 10);
    let s0 = FlowState::on_section(&SectionPoint::random(p.n, &mut rng), 0.0);
    let events = match activation_raster(&s0, t_end, p) {
        Ok(e) => e,
        Err(e) => return outcome(false, e.to_string()),
    };
    let silent: Vec<usize> = (0..p.n).filter(|&i| !events.iter().any(|e| e.unit == i)).collect();
    let bins = 200;
    let trains: Vec<Vec<f64>> = (0..p.n).map(|i| binned(&events, i, bins, t_end / bins as f64)).collect();
    let (mut same, mut diff) = (Vec::new(), Vec::new());
    for i in 0..p.n {
        for j in i + 1..p.n {
            if let Some(c) = pearson(&trains[i], &trains[j]) {
                if p.rotations[i] == p.rotations[j] {
                    same.push(c);
                } else {
                    diff.push(c);
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (cs, cd) = (mean(&same), mean(&diff));
    let ok = silent.is_empty() && !same.is_empty() && !diff.is_empty() && cs > cd;
    outcome(
        ok,
        format!(
            "{} events, silent units {silent:?}, mean correlation same spec {cs:.3} vs different {cd:.3}",
            events.len()
        ),
    )
}

fn main() -> ExitCode {
    let p = n2();
    let cfg = CurveConfig { generations: CURVE_GENERATIONS, ..Default::default() };
    let t = Instant::now();
    let curve = run_curve_lab(&p, &cfg, Execution::Parallel);
    let curve_secs = t.elapsed().as_secs_f64();

    let mut results: Vec<(&str, Outcome)> = vec![
        ("assumption certification", assumptions(&p)),
        ("top Lyapunov exponent", lyapunov(&p)),
        ("flow/map consistency", flow_vs_map(&p)),
    ];
    match &curve {
        Ok((r, _)) => {
            results.push(("mass concentration", concentration(&p, r)));
            results.push(("range growth", range_growth(r)));
        }
        Err(e) => {
            results.push(("mass concentration", outcome(false, e.to_string())));
            results.push(("range growth", outcome(false, e.to_string())));
        }
    }
    results.push(("lift laws", lift_laws()));
    results.push(match &curve {
        Ok((r, _)) => ("near-singularity mass", mass(r)),
        Err(e) => ("near-singularity mass", outcome(false, e.to_string())),
    });
    results.push(("fiber synchronization", sync(&p)));
    results.push(("Birkhoff agreement", birkhoff(&p)));
    results.push(("twenty-unit raster", fig3_raster(&fig3())));

    let mut failed = 0;
    for (k, (name, o)) in results.iter().enumerate() {
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("curve lab: generations 0..={CURVE_GENERATIONS} in {curve_secs:.1}s");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
