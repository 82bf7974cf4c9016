use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Args;
use ei_core::curve::{
    apply_phi1, apply_phi2, apply_phi3, concentration_stats, init_curve, run_curve_lab, snapshot, CurveConfig, SnapshotRow,
};
use ei_core::flow_sim::{activation_raster, sample_trajectory, FlowState, RasterEvent, TrajectoryRow};
use ei_core::model::{validate_params_with, RotationDoc};
use ei_core::return_map::{birkhoff_averages, fmt, lyapunov_trials, sync_test, Observable, SectionPoint};
use ei_core::seeds::trial_rng;
use ei_core::{Execution, ModelParams};
use rand::Rng;
use serde_json::{json, Value};

use crate::artifacts::Artifacts;
use crate::Common;

pub enum Failure {
    /// Bad arguments or unreadable parameters.
    Usage(anyhow::Error),
    /// The computation itself failed; `report` goes to stdout.
    Domain { error: anyhow::Error, report: Option<Value> },
}

impl Failure {
    pub fn report(self) -> ExitCode {
        match self {
            Failure::Usage(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(2)
            }
            Failure::Domain { error, report } => {
                if let Some(r) = report {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                }
                eprintln!("error: {error:#}");
                ExitCode::from(1)
            }
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::Domain { error, report: None }
    }
}

impl From<ei_core::Error> for Failure {
    fn from(e: ei_core::Error) -> Self {
        Failure::Domain { error: e.into(), report: None }
    }
}

pub struct Outcome {
    pub summary: Value,
    pub ok: bool,
}

type Res = Result<Outcome, Failure>;

pub struct Context {
    pub common: Common,
    pub exec: Execution,
}

impl Context {
    pub fn new(common: Common) -> Result<Self, Failure> {
        let exec = match common.threads {
            Some(0) => return Err(Failure::Usage(anyhow::anyhow!("--threads must be at least 1"))),
            Some(1) => Execution::Sequential,
            Some(n) => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| Failure::Usage(anyhow::anyhow!("thread pool: {e}")))?;
                Execution::Parallel
            }
            None => Execution::Parallel,
        };
        Ok(Self { common, exec })
    }

    fn load(&self, path: &Path) -> Result<ModelParams, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
        ModelParams::from_str_any(&text).map_err(|e| Failure::Usage(anyhow::anyhow!("{}: {e}", path.display())))
    }

    /// Loads parameters and refuses to run on failing assumptions unless
    /// `--force` is given.
    fn load_checked(&self, path: &Path) -> Result<ModelParams, Failure> {
        let p = self.load(path)?;
        let report = validate_params_with(&p, GATE_GRID, self.exec);
        if !report.passed {
            let names: Vec<String> =
                report.failures().map(|c| c.unit.map_or(c.name.clone(), |u| format!("{} (unit {})", c.name, u + 1))).collect();
            if self.common.force {
                eprintln!("warning: assumption checks failed ({}); continuing because of --force", names.join(", "));
            } else {
                return Err(Failure::Domain {
                    error: anyhow::anyhow!("assumption checks failed: {} (use --force to run anyway)", names.join(", ")),
                    report: Some(serde_json::to_value(&report).map_err(anyhow::Error::from)?),
                });
            }
        }
        Ok(p)
    }

    fn artifacts(&self) -> Result<Artifacts, Failure> {
        Ok(Artifacts::open(&self.common.output_dir)?)
    }

    fn finish(&self, mut out: Artifacts, command: &str, p: &ModelParams, trials: u64, settings: Value, summary: Value) -> Res {
        out.text("params.toml", &p.to_toml_string())?;
        let seeds = json!({
            "master": self.common.seed,
            "scheme": "trial k draws from ChaCha8(master) on stream k",
            "trials": trials,
        });
        let dir = out.dir().display().to_string();
        let threads = match self.exec {
            Execution::Sequential => 1,
            _ => rayon::current_num_threads(),
        };
        let files = out.finish(command, p, &seeds, &settings, threads)?;
        Ok(Outcome {
            summary: json!({
                "command": command,
                "output_dir": dir,
                "params_hash": p.hash(),
                "seed": self.common.seed,
                "files": files.iter().map(|f| &f.name).collect::<Vec<_>>(),
                "summary": summary,
            }),
            ok: true,
        })
    }
}

const GATE_GRID: usize = 10_000;

fn start_point(seed: u64, trial: u64, n: usize) -> SectionPoint {
    SectionPoint::random(n, &mut trial_rng(seed, trial))
}

fn raster_rows(events: &[RasterEvent]) -> impl Iterator<Item = Vec<String>> + '_ {
    events.iter().map(|e| vec![fmt(e.t), (e.unit + 1).to_string()])
}

fn raster_header() -> Vec<String> {
    vec!["t".into(), "unit".into()]
}

fn per_unit_counts(events: &[RasterEvent], n: usize) -> Vec<usize> {
    let mut c = vec![0; n];
    for e in events {
        c[e.unit] += 1;
    }
    c
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub config: PathBuf,
    /// Grid points per unit for the sampled checks.
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
}

pub fn check(ctx: &Context, a: CheckArgs) -> Res {
    let p = ctx.load(&a.config)?;
    let report = validate_params_with(&p, a.grid, ctx.exec);
    let mut out = ctx.artifacts()?;
    out.json("validation.json", &report)?;
    let value = serde_json::to_value(&report).map_err(anyhow::Error::from)?;
    let mut o = ctx.finish(out, "check", &p, 0, json!({ "grid": a.grid }), value)?;
    o.ok = report.passed;
    if !report.passed {
        eprintln!("assumption checks failed");
    }
    Ok(o)
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 20.0)]
    pub t_end: f64,
    /// Output sampling step of `trajectory.csv`.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
}

pub fn simulate(ctx: &Context, a: SimulateArgs) -> Res {
    if !(a.dt > 0.0 && a.t_end >= 0.0) {
        return Err(Failure::Usage(anyhow::anyhow!("--dt must be positive and --t-end non-negative")));
    }
    let p = ctx.load_checked(&a.config)?;
    let s0 = FlowState::on_section(&start_point(ctx.common.seed, 0, p.n), 0.0);
    let traj = sample_trajectory(&s0, a.t_end, a.dt, &p)?;
    let events = activation_raster(&s0, a.t_end, &p)?;
    let mut out = ctx.artifacts()?;
    out.csv("trajectory.csv", &TrajectoryRow::header(p.n), traj.iter().map(TrajectoryRow::fields))?;
    out.csv("raster.csv", &raster_header(), raster_rows(&events))?;
    let summary = json!({
        "samples": traj.len(),
        "events": events.len(),
        "events_per_unit": per_unit_counts(&events, p.n),
    });
    ctx.finish(out, "simulate", &p, 1, json!({ "t_end": a.t_end, "dt": a.dt }), summary)
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 200.0)]
    pub t_end: f64,
}

pub fn raster(ctx: &Context, a: RasterArgs) -> Res {
    if !(a.t_end >= 0.0) {
        return Err(Failure::Usage(anyhow::anyhow!("--t-end must be non-negative")));
    }
    let p = ctx.load_checked(&a.config)?;
    let s0 = FlowState::on_section(&start_point(ctx.common.seed, 0, p.n), 0.0);
    let events = activation_raster(&s0, a.t_end, &p)?;
    let mut out = ctx.artifacts()?;
    out.csv("raster.csv", &raster_header(), raster_rows(&events))?;
    let counts = per_unit_counts(&events, p.n);
    let summary = json!({
        "events": events.len(),
        "events_per_unit": counts,
        "silent_units": counts.iter().enumerate().filter(|(_, &c)| c == 0).map(|(i, _)| i + 1).collect::<Vec<_>>(),
    });
    ctx.finish(out, "raster", &p, 1, json!({ "t_end": a.t_end }), summary)
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1_000)]
    pub transient: usize,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
}

pub fn lyapunov(ctx: &Context, a: LyapunovArgs) -> Res {
    let p = ctx.load_checked(&a.config)?;
    let seed = ctx.common.seed;
    let starts: Vec<SectionPoint> = (0..a.trials as u64).map(|k| start_point(seed, k, p.n)).collect();
    let results = lyapunov_trials(&starts, a.transient, a.iters, &p, seed, ctx.exec)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let dim = p.n + 2;
    let mut header = vec!["trial".to_string(), "restarts".into()];
    header.extend((1..=dim).map(|k| format!("lambda{k}")));
    header.extend((1..=dim).map(|k| format!("stderr{k}")));
    let rows = results.iter().enumerate().map(|(k, r)| {
        let mut row = vec![k.to_string(), r.restarts.to_string()];
        row.extend(r.exponents.iter().map(|&v| fmt(v)));
        row.extend(r.std_errors.iter().map(|&v| fmt(v)));
        row
    });
    let mut out = ctx.artifacts()?;
    out.csv("lyapunov.csv", &header, rows)?;
    let summary = json!({
        "lambda_reference": p.anosov.lambda,
        "exponents": results.iter().map(|r| &r.exponents).collect::<Vec<_>>(),
        "std_errors": results.iter().map(|r| &r.std_errors).collect::<Vec<_>>(),
        "restarts": results.iter().map(|r| r.restarts).collect::<Vec<_>>(),
    });
    let settings = json!({ "iters": a.iters, "transient": a.transient, "trials": a.trials });
    ctx.finish(out, "lyapunov", &p, a.trials as u64, settings, summary)
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 6)]
    pub generations: usize,
    /// Length of the initial unstable segment.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.1)]
    pub x_anchor: f64,
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
    #[arg(long, default_value_t = 100_000_000)]
    pub sample_cap: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.05, 0.025, 0.0125])]
    pub xi: Vec<f64>,
    /// Interior points per piece in `curve_snapshot.csv`.
    #[arg(long, default_value_t = 2)]
    pub snapshot_points: usize,
}

pub fn curve(ctx: &Context, a: CurveArgs) -> Res {
    if a.xi.iter().any(|&x| !(0.0..0.25).contains(&x)) {
        return Err(Failure::Usage(anyhow::anyhow!("--xi values must lie in [0, 0.25)")));
    }
    if a.samples == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--samples must be positive")));
    }
    let p = ctx.load_checked(&a.config)?;
    let cfg = CurveConfig {
        a: a.a,
        x_anchor: a.x_anchor,
        generations: a.generations,
        samples_per_piece: a.samples,
        sample_cap: a.sample_cap,
        xi: a.xi.clone(),
    };
    let (report, graph) = run_curve_lab(&p, &cfg, ctx.exec)?;
    let n = p.n;
    let mut header = vec!["n".to_string(), "pieces".into(), "domain_len".into()];
    for col in [
        "range_theta",
        "range_psi",
        "range_zeta",
        "new_jumps",
        "down_jumps",
        "fraction_outside",
        "slope_min",
        "conditional_slope_min",
    ] {
        header.extend((1..=n).map(|i| format!("{col}{i}")));
    }
    header.push("recursions_hold".into());
    let rows = report.generations.iter().map(|g| {
        let mut r = vec![g.n.to_string(), g.pieces.to_string(), fmt(g.domain_len)];
        for v in [&g.range_theta, &g.range_psi, &g.range_zeta] {
            r.extend(v.iter().map(|&x| fmt(x)));
        }
        for v in [&g.new_jumps, &g.down_jumps] {
            r.extend(v.iter().map(|x| x.to_string()));
        }
        r.extend(g.fraction_outside.iter().map(|&x| fmt(x)));
        r.extend(g.slopes.global_min.iter().map(|&x| fmt(x)));
        r.extend(g.slopes.conditional_min.iter().map(|x| x.map(fmt).unwrap_or_default()));
        r.push(g.recursion.all().to_string());
        r
    });
    let mut out = ctx.artifacts()?;
    out.csv("curve_generations.csv", &header, rows)?;
    out.csv(
        "curve_mass.csv",
        &["xi".to_string(), "mass".into(), "mass_over_xi".into()],
        report.masses.iter().map(|m| vec![fmt(m.xi), fmt(m.mass), fmt(m.c3)]),
    )?;
    let snap = snapshot(&graph, a.snapshot_points)?;
    out.csv("curve_snapshot.csv", &SnapshotRow::header(n), snap.iter().map(SnapshotRow::fields))?;
    out.json("curve_report.json", &report)?;
    let summary = json!({
        "generations": report.generations.len(),
        "capped_at": report.capped_at,
        "pieces": report.generations.last().map(|g| g.pieces),
        "lambda": report.lambda,
        "range_log_slope": report.range_log_slope,
        "c1": report.c1,
        "mass_over_xi": report.masses.iter().map(|m| m.c3).collect::<Vec<_>>(),
        "recursions_hold": report.generations.iter().all(|g| g.recursion.all()),
        "slope_bound_holds": report.generations.iter().all(|g| g.slopes.bound_holds()),
    });
    let settings = serde_json::to_value(&cfg).map_err(anyhow::Error::from)?;
    ctx.finish(out, "curve", &p, 0, settings, summary)
}

#[derive(Debug, Args)]
pub struct ConcentrationArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub generations: usize,
    /// Steep-arc widths substituted into every `steep` rotation.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02, 0.01, 0.005])]
    pub epsilon: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value_t = 0.1)]
    pub x_anchor: f64,
}

fn with_epsilon(p: &ModelParams, eps: f64) -> Result<ModelParams, Failure> {
    let mut doc = p.doc().clone();
    let mut steep = 0;
    for r in &mut doc.rotations {
        if let RotationDoc::Steep { epsilon, .. } = r {
            *epsilon = eps;
            steep += 1;
        }
    }
    if steep == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("no steep rotation maps to rescale")));
    }
    Ok(ModelParams::from_doc(doc)?)
}

pub fn concentration(ctx: &Context, a: ConcentrationArgs) -> Res {
    let p = ctx.load_checked(&a.config)?;
    let mut rows = Vec::new();
    let mut fitted = Vec::new();
    for &eps in &a.epsilon {
        let q = with_epsilon(&p, eps)?;
        let mut g = init_curve(a.a, a.x_anchor, &q)?.with_execution(ctx.exec);
        let mut last = Vec::new();
        for n in 0..=a.generations {
            let psi = apply_phi1(g);
            last = concentration_stats(&psi)?;
            for (i, f) in last.iter().enumerate() {
                rows.push(vec![fmt(eps), n.to_string(), (i + 1).to_string(), fmt(*f), fmt(f / eps)]);
            }
            if n == a.generations {
                break;
            }
            g = apply_phi3(apply_phi2(psi)?);
        }
        fitted.push(json!({ "epsilon": eps, "fraction": last, "fraction_over_epsilon": last.iter().map(|f| f / eps).collect::<Vec<_>>() }));
    }
    let mut out = ctx.artifacts()?;
    let header: Vec<String> = ["epsilon", "n", "unit", "fraction", "fraction_over_epsilon"].map(String::from).to_vec();
    out.csv("concentration.csv", &header, rows)?;
    let settings = json!({ "generations": a.generations, "epsilon": a.epsilon, "a": a.a, "x_anchor": a.x_anchor });
    ctx.finish(out, "concentration", &p, 0, settings, json!({ "final_generation": fitted }))
}

#[derive(Debug, Args)]
pub struct SyncArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 200)]
    pub returns: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
}

pub fn sync(ctx: &Context, a: SyncArgs) -> Res {
    let p = ctx.load_checked(&a.config)?;
    let seed = ctx.common.seed;
    let series = ctx
        .exec
        .map_range(a.trials, |k| {
            let mut rng = trial_rng(seed, k as u64);
            let base = (rng.random(), rng.random());
            let za: Vec<f64> = (0..p.n).map(|_| rng.random()).collect();
            let zb: Vec<f64> = (0..p.n).map(|_| rng.random()).collect();
            sync_test(base, &za, &zb, a.returns, &p)
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let first_hit: Vec<Option<usize>> =
        series.iter().map(|s| s.iter().position(|&d| d < a.threshold).map(|k| k + 1)).collect();
    let hits = first_hit.iter().flatten().count();
    let mut out = ctx.artifacts()?;
    out.csv(
        "sync.csv",
        &["trial".to_string(), "step".into(), "distance".into()],
        series
            .iter()
            .enumerate()
            .flat_map(|(k, s)| s.iter().enumerate().map(move |(j, &d)| vec![k.to_string(), (j + 1).to_string(), fmt(d)])),
    )?;
    let summary = json!({
        "trials": a.trials,
        "synchronized": hits,
        "fraction": hits as f64 / a.trials.max(1) as f64,
        "first_hit": first_hit,
    });
    let settings = json!({ "trials": a.trials, "returns": a.returns, "threshold": a.threshold });
    ctx.finish(out, "sync", &p, a.trials as u64, settings, summary)
}

#[derive(Debug, Args)]
pub struct BirkhoffArgs {
    pub config: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    #[arg(long, default_value_t = 100_000)]
    pub returns: usize,
    /// Count every return equally instead of weighting by flow time.
    #[arg(long)]
    pub step_weighted: bool,
}

pub fn birkhoff(ctx: &Context, a: BirkhoffArgs) -> Res {
    let p = ctx.load_checked(&a.config)?;
    let seed = ctx.common.seed;
    let obs = Observable::catalog(p.n);
    let runs = ctx
        .exec
        .map_range(a.starts, |k| birkhoff_averages(&start_point(seed, k as u64, p.n), &obs, a.returns, &p, !a.step_weighted))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = ctx.artifacts()?;
    out.csv(
        "birkhoff.csv",
        &["start".to_string(), "observable".into(), "value".into()],
        runs.iter()
            .enumerate()
            .flat_map(|(k, r)| obs.iter().zip(r).map(move |(o, &v)| vec![k.to_string(), o.label(), fmt(v)])),
    )?;
    let spread: serde_json::Map<String, Value> = obs
        .iter()
        .enumerate()
        .map(|(j, o)| {
            let vals = runs.iter().map(|r| r[j]);
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            (o.label(), json!(hi - lo))
        })
        .collect();
    let summary = json!({ "starts": a.starts, "returns": a.returns, "spread": spread });
    let settings = json!({ "starts": a.starts, "returns": a.returns, "flow_weighted": !a.step_weighted });
    ctx.finish(out, "birkhoff", &p, a.starts as u64, settings, summary)
}
