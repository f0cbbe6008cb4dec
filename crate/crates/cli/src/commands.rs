use std::path::{Path, PathBuf};

use anyhow::Context;
use rayon::prelude::*;
use routecap::analysis::{analyze as run_analysis, capacity_report, solve_alpha, SolveMethod, SolveOptions};
use routecap::sim::{self, Probe, SimConfig, SimResult};
use routecap::{generate_ba, load_edge_list, Error, Graph, RoutingSpec};
use serde::Serialize;
use serde_json::json;

use crate::manifest::{write_json, write_text, Run};
use crate::{AnalyzeArgs, EstimateRcArgs, GenerateArgs, GraphRouting, Method, Solver, SimulateArgs, SweepArgs, Traffic};

/// Maps a failure to the process exit code: 2 for invalid input, 3 for
/// numerical failure, 4 for I/O.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::NonConvergence { .. }
                | Error::NonConvergent { .. }
                | Error::SingularSystem { .. }
                | Error::InvariantViolation(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    2
}

impl Solver {
    fn options(&self) -> SolveOptions {
        let method = match self.method {
            Method::Direct => SolveMethod::Direct,
            Method::Neumann => SolveMethod::Neumann,
            Method::Lowrank => SolveMethod::LowRank,
        };
        SolveOptions { tol: self.tol, ..SolveOptions::with_method(method) }
    }
}

impl Traffic {
    fn config(&self, rate: f64, default_avoid: usize) -> SimConfig {
        SimConfig {
            capacity: self.capacity,
            rate,
            n_avoid: self.avoid.unwrap_or(default_avoid),
            seed: self.seed,
            warmup_steps: self.warmup,
            measure_steps: self.measure,
        }
    }
}

struct Loaded {
    graph: Graph,
    routing: RoutingSpec,
    inputs: Vec<PathBuf>,
}

fn load(input: &GraphRouting) -> anyhow::Result<Loaded> {
    let path = &input.graph;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let graph = load_edge_list(&text).with_context(|| format!("loading graph {}", path.display()))?;
    let routing = input.routing.build(&graph)?;
    let mut inputs = vec![path.clone()];
    inputs.extend(input.routing.input_path().cloned());
    Ok(Loaded { graph, routing, inputs })
}

/// Analytic capacity `C * rc0`.
fn analytic_rc(loaded: &Loaded, solver: &Solver, capacity: usize) -> anyhow::Result<f64> {
    let alpha = solve_alpha(&loaded.graph, &loaded.routing, &solver.options())?.alpha;
    Ok(capacity as f64 * capacity_report(&alpha).rc0)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    let mut name = stem;
    name.push(suffix);
    path.with_file_name(name)
}

pub fn generate(args: &GenerateArgs) -> anyhow::Result<()> {
    let run = Run::start("generate");
    let g = generate_ba(args.n, args.m, args.seed)?;
    write_text(&args.out, &g.to_edge_list())?;
    let stats = g.degree_stats();
    let summary = json!({ "n": g.n(), "edges": g.edge_count(), "mean_degree": stats.mean_degree });
    run.finish(args, vec![], vec![args.out.clone()], Some(args.seed), summary)
}

pub fn analyze(args: &AnalyzeArgs) -> anyhow::Result<()> {
    let run = Run::start("analyze");
    let loaded = load(&args.input)?;
    let (report, alpha) = run_analysis(&loaded.graph, &loaded.routing, &args.solver.options())?;
    write_json(&args.out, &report)?;
    let mut outputs = vec![args.out.clone()];
    if let Some(path) = &args.alpha {
        write_text(path, &alpha.to_csv())?;
        outputs.push(path.clone());
    }
    let summary = json!({
        "rc0": report.capacity.rc0,
        "T": report.capacity.mean_time,
        "t0rc0_holds": report.bounds.t0rc0.holds,
    });
    run.finish(args, loaded.inputs, outputs, None, summary)
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let run = Run::start("simulate");
    let loaded = load(&args.input)?;
    let config = args.traffic.config(args.rate, 1);
    let result = sim::run(&loaded.graph, &loaded.routing, config)?;
    for warning in &result.warnings {
        eprintln!("warning: {warning}");
    }
    let trace = args.trace.clone().unwrap_or_else(|| with_suffix(&args.out, ".wt.csv"));
    write_json(&args.out, &result)?;
    write_text(&trace, &result.w_trace_csv())?;
    let summary = json!({
        "eta": result.eta,
        "mean_total_queue_length": result.mean_total_queue_length,
        "mean_delivery_time": result.mean_delivery_time,
    });
    let parameters = json!({ "args": args, "config": config });
    run.finish(parameters, loaded.inputs, vec![args.out.clone(), trace], Some(config.seed), summary)
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    rate: f64,
    seed: u64,
    eta: f64,
    queue_length: f64,
    delivery_time: Option<f64>,
}

pub fn sweep(args: &SweepArgs) -> anyhow::Result<()> {
    let run = Run::start("sweep");
    if args.seeds == 0 {
        return Err(Error::InvalidParams("--seeds must be at least 1".into()).into());
    }
    let loaded = load(&args.input)?;
    let rc = analytic_rc(&loaded, &args.solver, args.traffic.capacity)?;
    let rates: Vec<f64> =
        if args.rates.is_empty() { args.relative.iter().map(|f| f * rc).collect() } else { args.rates.clone() };
    if rates.is_empty() {
        return Err(Error::InvalidParams("empty rate grid".into()).into());
    }
    let jobs: Vec<(f64, u64)> =
        rates.iter().flat_map(|&r| (0..args.seeds).map(move |k| (r, args.traffic.seed + k))).collect();
    let points = jobs
        .par_iter()
        .map(|&(rate, seed)| {
            let config = SimConfig { seed, ..args.traffic.config(rate, 1) };
            let r: SimResult = sim::run(&loaded.graph, &loaded.routing, config)?;
            Ok(SweepPoint {
                rate,
                seed,
                eta: r.eta,
                queue_length: r.mean_total_queue_length,
                delivery_time: r.mean_delivery_time,
            })
        })
        .collect::<routecap::Result<Vec<_>>>()?;
    write_text(&args.out, &sweep_csv(&rates, &points, rc, args.seeds))?;
    let summary = json!({ "analytic_rc": rc, "rates": rates, "runs": points.len() });
    run.finish(args, loaded.inputs, vec![args.out.clone()], Some(args.traffic.seed), summary)
}

const SWEEP_HEADER: &str =
    "kind,rate,rate_over_rc,seed,seeds,eta,eta_se,queue_length,queue_length_se,delivery_time,delivery_time_se";

/// One `run` row per (rate, seed); with several seeds, one `mean` row per
/// rate follows, carrying the standard error over seeds.
fn sweep_csv(rates: &[f64], points: &[SweepPoint], rc: f64, seeds: u64) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        out.push_str(&format!(
            "run,{},{},{},1,{},,{},,{},\n",
            p.rate,
            p.rate / rc,
            p.seed,
            p.eta,
            p.queue_length,
            opt(p.delivery_time)
        ));
    }
    for &rate in rates.iter().filter(|_| seeds > 1) {
        let group: Vec<&SweepPoint> = points.iter().filter(|p| p.rate == rate).collect();
        let (eta, eta_se) = mean_se(group.iter().map(|p| p.eta));
        let (queue, queue_se) = mean_se(group.iter().map(|p| p.queue_length));
        let (time, time_se) = mean_se(group.iter().filter_map(|p| p.delivery_time));
        out.push_str(&format!(
            "mean,{rate},{},,{},{},{},{},{},{},{}\n",
            rate / rc,
            group.len(),
            opt(eta),
            opt(eta_se),
            opt(queue),
            opt(queue_se),
            opt(time),
            opt(time_se)
        ));
    }
    out
}

/// Sample mean and standard error; the error needs at least two values.
fn mean_se(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (Some(mean), None);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

#[derive(Debug, Serialize)]
struct RcOutput {
    rc: f64,
    low: f64,
    high: f64,
    analytic_rc: f64,
    relative_difference: f64,
    config: SimConfig,
    eta_threshold: f64,
    probes: Vec<Probe>,
}

pub fn estimate_rc(args: &EstimateRcArgs) -> anyhow::Result<()> {
    let run = Run::start("estimate-rc");
    let loaded = load(&args.input)?;
    let analytic = analytic_rc(&loaded, &args.solver, args.traffic.capacity)?;
    let low = args.low.unwrap_or(0.5 * analytic);
    let high = args.high.unwrap_or(2.0 * analytic);
    let resolution = args.resolution.unwrap_or((high - low) / 128.0);
    let config = args.traffic.config(0.0, 0);
    let estimate = sim::estimate_rc(&loaded.graph, &loaded.routing, &config, low, high, resolution, args.threshold)?;
    let output = RcOutput {
        rc: estimate.rc,
        low: estimate.low,
        high: estimate.high,
        analytic_rc: analytic,
        relative_difference: (estimate.rc - analytic) / analytic,
        config,
        eta_threshold: args.threshold,
        probes: estimate.probes,
    };
    write_json(&args.out, &output)?;
    let summary = json!({ "rc": output.rc, "analytic_rc": analytic, "bracket": [low, high], "resolution": resolution });
    let parameters = json!({ "args": args, "config": config });
    run.finish(parameters, loaded.inputs, vec![args.out.clone()], Some(config.seed), summary)
}
