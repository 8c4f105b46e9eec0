//! Batch front-end: single solves, the demand/supply sweep and the toy
//! table. The binary in `main.rs` only parses flags and maps errors to exit
//! codes; everything else lives here so tests can drive it directly.

pub mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use mibp::{MibpSolution, SolveStatus};
use rayon::prelude::*;
use rideshare_evsi::evsi::{self, EstimateOptions, IndicatorReport, SamplingPlan, ToyCase};
use rideshare_evsi::{reform, CityInstance, FlowMatrix, FollowerBelief, Mode, PriceVector};
use serde::{Deserialize, Serialize};

use config::sha256_hex;
pub use config::Config;

/// Bad or missing input; the binary exits with code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

/// The solver stopped short of the gap tolerance; exit code 3 unless
/// `--allow-gap` is given.
#[derive(Debug)]
pub struct GapError(pub SolveStatus);

impl std::fmt::Display for GapError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "solver stopped with status {:?} (pass --allow-gap to accept)",
            self.0
        )
    }
}

impl std::error::Error for GapError {}

#[derive(Debug, Clone, Default)]
pub struct SolveArgs {
    pub config: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub instance: Option<PathBuf>,
    pub realization: Option<PathBuf>,
    pub gap: Option<f64>,
    pub allow_gap: bool,
    pub export_problem: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub continuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub mode: Mode,
    pub status: SolveStatus,
    /// Revenue reported by the solver.
    pub value: Option<f64>,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub prices: Option<Vec<f64>>,
    pub flows: Option<Vec<Vec<f64>>>,
    pub lambda: Option<Vec<Vec<f64>>>,
    pub gamma: Option<Vec<f64>>,
    /// Revenue re-evaluated from the extracted prices and flows.
    pub revenue: Option<f64>,
    pub integer_flows: bool,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub solver_version: String,
    pub outputs: Vec<OutputEntry>,
    /// Wall-clock seconds; the only field that differs between reruns.
    pub timings: Vec<(String, f64)>,
}

struct Writer {
    dir: PathBuf,
    outputs: Vec<OutputEntry>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Writer> {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(())
    }

    fn finish(self, command: &str, cfg: &Config, seed: Option<u64>, timings: Vec<(String, f64)>) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            config_hash: cfg.hash(),
            seed,
            solver_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: self.outputs,
            timings,
        };
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn belief_for(cfg: &Config, anchor: &[f64], n: usize) -> Result<FollowerBelief> {
    let anchor = cfg.belief.anchor.as_deref().unwrap_or(anchor);
    let b = FollowerBelief::scaled(anchor, &cfg.belief.kappa, &cfg.belief.prob);
    b.validate(n).map_err(|e| InputError(format!("belief: {e}")))?;
    Ok(b)
}

/// Outcome of `solve`, also printed to stdout by the binary.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: SolutionFile,
    pub report: String,
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveOutcome> {
    let start = Instant::now();
    let mut cfg = Config::load(args.config.as_deref())?;
    cfg.override_inputs(args.instance.as_deref(), args.realization.as_deref())?;
    if let Some(g) = args.gap {
        cfg.solver.rel_gap = g;
    }
    if args.continuous {
        cfg.integer_flows = false;
    }
    let mode = args.mode.unwrap_or(Mode::Sws);
    let inst = cfg.instance().clone();
    let real = cfg
        .realization()
        .cloned()
        .ok_or_else(|| InputError("solve needs a realization".into()))?;
    inst.validate().map_err(|e| InputError(format!("instance: {e}")))?;
    real.validate(inst.n)
        .map_err(|e| InputError(format!("realization: {e}")))?;
    let solver = cfg.solver.to_solver();
    solver.validate().map_err(|e| InputError(format!("solver: {e}")))?;

    let art = match mode {
        Mode::Ws => reform::build_ws(&inst, &belief_for(&cfg, &real.d0, inst.n)?, &real)?,
        Mode::Sws => reform::build_sws(&inst, &real)?,
    };
    let art = reform::set_integer_flows(art, cfg.integer_flows);
    if let Some(path) = &args.export_problem {
        let text = mibp::format::write_problem(&art.problem)?;
        std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    let sol = mibp::solve(&art.problem, &solver)?;
    let solution = solution_file(&art, &sol, &cfg)?;

    let mut w = Writer::new(&args.out_dir)?;
    w.write("config.json", &cfg.canonical())?;
    w.write(&format!("solution_{mode}.json"), &to_json(&solution)?)?;
    w.finish(
        "solve",
        &cfg,
        None,
        vec![("total".into(), start.elapsed().as_secs_f64())],
    )?;

    let report = solve_report(&solution);
    if sol.status != SolveStatus::Optimal && !args.allow_gap {
        return Err(GapError(sol.status).into());
    }
    Ok(SolveOutcome { solution, report })
}

fn solution_file(art: &reform::ReformArtifacts, sol: &MibpSolution, cfg: &Config) -> Result<SolutionFile> {
    let extracted = if sol.has_incumbent() {
        Some(reform::extract(art, sol)?)
    } else {
        None
    };
    Ok(SolutionFile {
        mode: art.mode,
        status: sol.status,
        value: sol.has_incumbent().then_some(sol.value),
        bound: sol.bound,
        gap: sol.gap,
        nodes: sol.nodes,
        prices: extracted.as_ref().map(|e| e.prices.p.clone()),
        flows: extracted.as_ref().map(|e| e.flows.v.clone()),
        lambda: extracted.as_ref().map(|e| e.lambda.clone()),
        gamma: extracted.as_ref().map(|e| e.gamma.clone()),
        revenue: extracted.as_ref().map(|e| e.recomputed),
        integer_flows: art.integer_flows,
        config_hash: cfg.hash(),
    })
}

fn solve_report(s: &SolutionFile) -> String {
    let mut out = String::new();
    writeln!(out, "mode {}  status {:?}  nodes {}", s.mode, s.status, s.nodes).unwrap();
    match s.value {
        Some(v) => writeln!(out, "value {v:.4}  bound {:.4}  gap {:.2e}", s.bound, s.gap).unwrap(),
        None => writeln!(out, "no feasible point found; bound {:.4}", s.bound).unwrap(),
    }
    if let (Some(p), Some(f)) = (&s.prices, &s.flows) {
        let prices: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
        writeln!(out, "prices {}", prices.join(" ")).unwrap();
        for (i, row) in f.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v > 1e-9 {
                    writeln!(out, "flow {} -> {}: {v:.4}", i + 1, j + 1).unwrap();
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub gap: Option<f64>,
    pub allow_gap: bool,
    pub out_dir: PathBuf,
}

/// Aggregates of one demand/supply cell over all nominal vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub demand_coef: f64,
    pub supply_coef: f64,
    pub samples: usize,
    pub used: usize,
    pub not_optimal: usize,
    pub mean_ws: f64,
    pub mean_sws: f64,
    pub evsi: f64,
    pub ws_se: Option<f64>,
    pub sws_se: Option<f64>,
    pub evsi_se: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub scenarios: Vec<ScenarioSummary>,
}

/// Seed of the sampling streams of nominal vector `k`; shared by every
/// demand/supply cell so the cells see common random numbers.
fn cell_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::GapLimit => "gap_limit",
        SolveStatus::NodeLimit => "node_limit",
        SolveStatus::TimeLimit => "time_limit",
        SolveStatus::Infeasible => "infeasible",
    }
}

fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    if xs.is_empty() {
        return (0.0, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, None);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, Some((var / n).sqrt()))
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutcome> {
    let start = Instant::now();
    let mut cfg = Config::load(args.config.as_deref())?;
    if let Some(s) = args.seed {
        cfg.sweep.seed = s;
    }
    if let Some(s) = args.samples {
        cfg.sweep.samples = s;
    }
    if let Some(g) = args.gap {
        cfg.solver.rel_gap = g;
    }
    let base = cfg.instance().clone();
    base.validate().map_err(|e| InputError(format!("instance: {e}")))?;
    let sw = cfg.sweep.clone();
    if sw.samples == 0 || sw.nominals == 0 || sw.demand_coefs.is_empty() || sw.supply_coefs.is_empty() {
        return Err(
            InputError("sweep needs samples, nominals and at least one demand and supply coefficient".into()).into(),
        );
    }
    let opts = EstimateOptions {
        solver: cfg.solver.to_solver(),
        integer_flows: cfg.integer_flows,
    };
    opts.solver.validate().map_err(|e| InputError(format!("solver: {e}")))?;
    let n0 = base.n0();
    if n0.fract() != 0.0 {
        return Err(InputError("the fleet size (sum of x0) must be integral".into()).into());
    }
    let draws = evsi::nominal_draws(sw.seed, base.n, sw.nominals, n0 as usize)?;

    struct Cell {
        q: usize,
        p: usize,
        k: usize,
    }
    let mut cells = Vec::new();
    for q in 0..sw.supply_coefs.len() {
        for p in 0..sw.demand_coefs.len() {
            for k in 0..sw.nominals {
                cells.push(Cell { q, p, k });
            }
        }
    }
    let reports: Vec<IndicatorReport> = cells
        .par_iter()
        .map(|c| {
            let inst = CityInstance {
                x0: draws[c.k].x0.clone(),
                ..base.clone()
            };
            let plan = SamplingPlan {
                samples: sw.samples,
                seed: cell_seed(sw.seed, c.k),
                h0: draws[c.k].h0.clone(),
                demand_coef: sw.demand_coefs[c.p],
                supply_coef: sw.supply_coefs[c.q],
                spread_low: sw.spread_low,
                spread_high: sw.spread_high,
                kappa: cfg.belief.kappa.clone(),
                kappa_prob: cfg.belief.prob.clone(),
            };
            plan.validate(inst.n).map_err(|e| InputError(format!("sweep: {e}")))?;
            let belief = plan.belief(&inst);
            let mut r = evsi::estimate(&plan, &inst, &belief, &opts)?;
            r.config_hash = Some(cfg.hash());
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut w = Writer::new(&args.out_dir)?;
    w.write("config.json", &cfg.canonical())?;
    let mut scenarios = Vec::new();
    let mut summary = String::from("P,Q,samples,used,not_optimal,mean_ws,mean_sws,evsi,ws_se,sws_se,evsi_se\n");
    let per_q = sw.demand_coefs.len() * sw.nominals;
    for q in 0..sw.supply_coefs.len() {
        let mut figure = String::from("P,mean_ws,mean_sws,evsi\n");
        for p in 0..sw.demand_coefs.len() {
            let (pc, qc) = (sw.demand_coefs[p], sw.supply_coefs[q]);
            let mut csv = String::from("sample_id,nominal,seed_offset");
            for i in 1..=base.n {
                write!(csv, ",y_{i}").unwrap();
            }
            for i in 1..=base.n {
                write!(csv, ",d0_{i}").unwrap();
            }
            csv.push_str(",psi,phi,ws_status,sws_status\n");
            let (mut psi, mut phi, mut diff) = (Vec::new(), Vec::new(), Vec::new());
            let (mut total, mut not_optimal) = (0, 0);
            for k in 0..sw.nominals {
                let r = &reports[q * per_q + p * sw.nominals + k];
                for s in &r.samples {
                    write!(csv, "{},{},{}", k * sw.samples + s.id, k, s.seed_offset).unwrap();
                    for v in s.y.iter().chain(&s.d0) {
                        write!(csv, ",{v}").unwrap();
                    }
                    writeln!(
                        csv,
                        ",{},{},{},{}",
                        fmt_opt(s.psi),
                        fmt_opt(s.phi),
                        status_name(s.ws_status),
                        status_name(s.sws_status)
                    )
                    .unwrap();
                    total += 1;
                    if s.ws_status != SolveStatus::Optimal || s.sws_status != SolveStatus::Optimal {
                        not_optimal += 1;
                    }
                    if let (Some(a), Some(b)) = (s.psi, s.phi) {
                        psi.push(a);
                        phi.push(b);
                        diff.push(b - a);
                    }
                }
            }
            w.write(&format!("samples_P{pc}_Q{qc}.csv"), &csv)?;
            let (mean_ws, ws_se) = mean_se(&psi);
            let (mean_sws, sws_se) = mean_se(&phi);
            let (_, evsi_se) = mean_se(&diff);
            let s = ScenarioSummary {
                demand_coef: pc,
                supply_coef: qc,
                samples: total,
                used: psi.len(),
                not_optimal,
                mean_ws,
                mean_sws,
                evsi: mean_sws - mean_ws,
                ws_se,
                sws_se,
                evsi_se,
            };
            writeln!(figure, "{pc},{mean_ws},{mean_sws},{}", s.evsi).unwrap();
            writeln!(
                summary,
                "{pc},{qc},{total},{},{not_optimal},{mean_ws},{mean_sws},{},{},{},{}",
                s.used,
                s.evsi,
                fmt_opt(ws_se),
                fmt_opt(sws_se),
                fmt_opt(evsi_se)
            )
            .unwrap();
            scenarios.push(s);
        }
        w.write(&format!("figure_Q{}.csv", sw.supply_coefs[q]), &figure)?;
    }
    w.write("scenarios.csv", &summary)?;
    w.finish(
        "sweep",
        &cfg,
        Some(sw.seed),
        vec![("total".into(), start.elapsed().as_secs_f64())],
    )?;
    let bad: usize = scenarios.iter().map(|s| s.not_optimal).sum();
    if bad > 0 && !args.allow_gap {
        bail!(GapError(SolveStatus::NodeLimit));
    }
    Ok(SweepOutcome { scenarios })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRow {
    pub case: ToyCase,
    pub sto: f64,
    pub ws: f64,
    pub sws: f64,
    pub printed: [f64; 3],
}

/// Values printed in the published table for comparison.
const PRINTED_PLUS: [f64; 3] = [0.375, 0.25, 0.0];
const PRINTED_MINUS: [f64; 3] = [-0.125, -0.25, 0.0];

pub fn toy_rows(steps: usize) -> Result<Vec<ToyRow>> {
    [(ToyCase::Plus, PRINTED_PLUS), (ToyCase::Minus, PRINTED_MINUS)]
        .into_iter()
        .map(|(case, printed)| {
            let v = evsi::toy_values(&evsi::toy_example(case, steps)?)?;
            Ok(ToyRow {
                case,
                sto: v.sto,
                ws: v.ws,
                sws: v.sws,
                printed,
            })
        })
        .collect()
}

pub fn cmd_toy(steps: usize, out_dir: Option<&Path>) -> Result<String> {
    if steps == 0 {
        return Err(InputError("--steps must be positive".into()).into());
    }
    let rows = toy_rows(steps)?;
    let mut out = format!("grid spacing 1/{steps}\n");
    writeln!(out, "{:<6} {:>9} {:>9} {:>9}", "case", "STO", "WS", "SWS").unwrap();
    let mut csv = String::from("case,sto,ws,sws,published_sto,published_ws,published_sws\n");
    for r in &rows {
        let name = match r.case {
            ToyCase::Plus => "plus",
            ToyCase::Minus => "minus",
        };
        let same = [r.sto, r.ws, r.sws]
            .iter()
            .zip(&r.printed)
            .all(|(a, b)| (a - b).abs() < 1e-9);
        writeln!(
            out,
            "{name:<6} {:>9.4} {:>9.4} {:>9.4}   {}published {} / {} / {}",
            r.sto,
            r.ws,
            r.sws,
            if same { "" } else { "DIFFERS: " },
            r.printed[0],
            r.printed[1],
            r.printed[2]
        )
        .unwrap();
        writeln!(
            csv,
            "{name},{},{},{},{},{},{}",
            r.sto, r.ws, r.sws, r.printed[0], r.printed[1], r.printed[2]
        )
        .unwrap();
    }
    if let Some(dir) = out_dir {
        let mut w = Writer::new(dir)?;
        w.write("toy.csv", &csv)?;
        let cfg = Config::default();
        w.finish("toy", &cfg, None, Vec::new())?;
    }
    Ok(out)
}

/// Recomputes the revenue of a solution file's prices and flows.
pub fn check_solution(cfg: &Config, s: &SolutionFile) -> Result<f64> {
    let (Some(p), Some(f)) = (&s.prices, &s.flows) else {
        bail!("solution has no point");
    };
    let real = cfg.realization().context("no realization")?;
    Ok(rideshare_evsi::model::leader_revenue(
        &PriceVector::new(p.clone()),
        &FlowMatrix { v: f.clone() },
        real,
        cfg.instance(),
    )?)
}
