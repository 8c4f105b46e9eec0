//! Information-value indicators.
//!
//! Two settings. Finite games are solved by enumeration, with losses to be
//! minimized, so EVPI = STO - WS and EVSI = WS - SWS. The ridesharing
//! estimates work with company revenue to be maximized, so the gain from
//! sharing is reported as mean(phi) - mean(psi), which is the same quantity
//! with the sign flipped by the switch from loss to revenue.

use mibp::{MibpSolution, SolveStatus, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Triangular};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, EvsiError, Result};
use crate::model::{CityInstance, FollowerBelief, Realization};
use crate::reform;

const PROB_TOL: f64 = 1e-9;

/// A finite stochastic bilevel game with losses for both players.
///
/// Scenarios carry a group label for the part of the uncertainty the leader
/// observes before deciding (z1). Losses are indexed `[x][y][scenario]`;
/// row `x` has one entry per follower action available after `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteGame {
    pub z1: Vec<usize>,
    /// Leader probabilities of the scenarios.
    pub zeta: Vec<f64>,
    /// Follower belief over the same scenarios.
    pub xi: Vec<f64>,
    pub theta: Vec<Vec<Vec<f64>>>,
    pub f: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToyValues {
    pub sto: f64,
    pub ws: f64,
    pub sws: f64,
    pub evpi: f64,
    pub evsi: f64,
}

fn check_probs(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) || (p.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
        return Err(domain(format!("{what} must be nonnegative and sum to 1")));
    }
    Ok(())
}

impl FiniteGame {
    pub fn scenarios(&self) -> usize {
        self.zeta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scenarios();
        if s == 0 || self.xi.len() != s || self.z1.len() != s {
            return Err(domain("scenario vectors must be nonempty and of equal length"));
        }
        check_probs(&self.zeta, "leader probabilities")?;
        check_probs(&self.xi, "follower probabilities")?;
        if self.theta.is_empty() || self.theta.len() != self.f.len() {
            return Err(domain("loss tables need one row per leader action"));
        }
        for (tx, fx) in self.theta.iter().zip(&self.f) {
            if tx.is_empty() || tx.len() != fx.len() {
                return Err(domain("every leader action needs a nonempty follower action set"));
            }
            for (ty, fy) in tx.iter().zip(fx) {
                if ty.len() != s || fy.len() != s || ty.iter().chain(fy).any(|v| !v.is_finite()) {
                    return Err(domain("losses must be finite with one entry per scenario"));
                }
            }
        }
        Ok(())
    }

    /// Optimistic response to `x`: among minimizers of the follower weight
    /// `w`, the one with the least leader loss under weight `u`. Returns the
    /// leader loss.
    fn respond(&self, x: usize, w: &[f64], u: &[f64]) -> f64 {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let fx: Vec<f64> = self.f[x].iter().map(|fy| dot(fy, w)).collect();
        let best = fx.iter().copied().fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * (1.0 + best.abs());
        fx.iter()
            .zip(&self.theta[x])
            .filter(|(v, _)| **v <= best + tol)
            .map(|(_, ty)| dot(ty, u))
            .fold(f64::INFINITY, f64::min)
    }

    fn leader_min(&self, w: &[f64], u: &[f64]) -> f64 {
        (0..self.theta.len())
            .map(|x| self.respond(x, w, u))
            .fold(f64::INFINITY, f64::min)
    }

    fn point(&self, s: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.scenarios()];
        e[s] = 1.0;
        e
    }
}

/// Expected leader loss when nobody observes more than z1.
pub fn toy_sto(game: &FiniteGame) -> Result<f64> {
    game.validate()?;
    let mut groups: Vec<usize> = game.z1.clone();
    groups.sort_unstable();
    groups.dedup();
    let mut total = 0.0;
    for g in groups {
        let mass: f64 = (0..game.scenarios())
            .filter(|&s| game.z1[s] == g)
            .map(|s| game.zeta[s])
            .sum();
        if mass == 0.0 {
            continue;
        }
        let u: Vec<f64> = (0..game.scenarios())
            .map(|s| if game.z1[s] == g { game.zeta[s] / mass } else { 0.0 })
            .collect();
        total += mass * game.leader_min(&game.xi, &u);
    }
    Ok(total)
}

/// Expected leader loss when the leader observes the scenario and the
/// follower keeps its own belief.
pub fn toy_ws(game: &FiniteGame) -> Result<f64> {
    game.validate()?;
    Ok((0..game.scenarios())
        .filter(|&s| game.zeta[s] > 0.0)
        .map(|s| game.zeta[s] * game.leader_min(&game.xi, &game.point(s)))
        .sum())
}

/// Expected leader loss when both players observe the scenario.
pub fn toy_sws(game: &FiniteGame) -> Result<f64> {
    game.validate()?;
    Ok((0..game.scenarios())
        .filter(|&s| game.zeta[s] > 0.0)
        .map(|s| {
            let e = game.point(s);
            game.zeta[s] * game.leader_min(&e, &e)
        })
        .sum())
}

pub fn toy_values(game: &FiniteGame) -> Result<ToyValues> {
    let (sto, ws, sws) = (toy_sto(game)?, toy_ws(game)?, toy_sws(game)?);
    Ok(ToyValues {
        sto,
        ws,
        sws,
        evpi: sto - ws,
        evsi: ws - sws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ToyCase {
    /// The leader also bears the follower's loss.
    Plus,
    /// The leader gains what the follower loses.
    Minus,
}

/// The two-scenario quadratic example on a grid of `[0, 1]^2` with spacing
/// `1 / steps`: a fair coin, follower loss y^2 or (1-y)^2.
pub fn toy_example(case: ToyCase, steps: usize) -> Result<FiniteGame> {
    if steps == 0 {
        return Err(domain("grid needs at least one step"));
    }
    let grid: Vec<f64> = (0..=steps).map(|k| k as f64 / steps as f64).collect();
    let floss = |y: f64| [y * y, (1.0 - y) * (1.0 - y)];
    let sign = match case {
        ToyCase::Plus => 1.0,
        ToyCase::Minus => -1.0,
    };
    let mut theta = Vec::with_capacity(grid.len());
    let mut f = Vec::with_capacity(grid.len());
    for &x in &grid {
        let own = [0.5 * x * x, sign * 0.5 * (1.0 - x) * (1.0 - x)];
        theta.push(
            grid.iter()
                .map(|&y| {
                    let fy = floss(y);
                    vec![own[0] + sign * fy[0], own[1] + sign * fy[1]]
                })
                .collect(),
        );
        f.push(grid.iter().map(|&y| floss(y).to_vec()).collect());
    }
    Ok(FiniteGame {
        z1: vec![0, 0],
        zeta: vec![0.5, 0.5],
        xi: vec![0.5, 0.5],
        theta,
        f,
    })
}

/// Monte-Carlo design for one demand/supply cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub samples: usize,
    pub seed: u64,
    /// Per-zone base draws in [0, 1]; nominal demand is `P * N0 * h0`.
    pub h0: Vec<f64>,
    /// Aggregate demand coefficient P.
    pub demand_coef: f64,
    /// Matched-driver coefficient Q; `ybar = Q * N0`.
    pub supply_coef: f64,
    pub spread_low: f64,
    pub spread_high: f64,
    /// Driver belief multipliers on nominal demand and their probabilities.
    pub kappa: Vec<f64>,
    pub kappa_prob: Vec<f64>,
}

impl SamplingPlan {
    pub fn new(samples: usize, seed: u64, h0: Vec<f64>, demand_coef: f64, supply_coef: f64) -> Self {
        SamplingPlan {
            samples,
            seed,
            h0,
            demand_coef,
            supply_coef,
            spread_low: 0.7,
            spread_high: 1.3,
            kappa: vec![0.7, 1.0, 1.3],
            kappa_prob: vec![0.25, 0.5, 0.25],
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.samples == 0 {
            return Err(domain("at least one sample is needed"));
        }
        if self.h0.len() != n || self.h0.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(domain("h0 needs one value in [0, 1] per zone"));
        }
        if !(self.demand_coef >= 0.0 && self.demand_coef.is_finite())
            || !(self.supply_coef >= 0.0 && self.supply_coef.is_finite())
        {
            return Err(domain("demand and supply coefficients must be finite and nonnegative"));
        }
        if !(0.0 < self.spread_low && self.spread_low < 1.0 && 1.0 < self.spread_high && self.spread_high.is_finite()) {
            return Err(domain("spreads must satisfy 0 < low < 1 < high"));
        }
        if self.kappa.is_empty() || self.kappa.len() != self.kappa_prob.len() || self.kappa.iter().any(|k| !(*k >= 0.0))
        {
            return Err(domain(
                "belief multipliers must be nonnegative with one probability each",
            ));
        }
        check_probs(&self.kappa_prob, "belief probabilities")
    }

    pub fn nominal_demand(&self, n0: f64) -> Vec<f64> {
        self.h0.iter().map(|h| self.demand_coef * n0 * h).collect()
    }

    /// The instance with `ybar` set from the plan.
    pub fn instance(&self, base: &CityInstance) -> CityInstance {
        CityInstance {
            ybar: self.supply_coef * base.n0(),
            ..base.clone()
        }
    }

    /// Driver belief: the multipliers applied to nominal demand.
    pub fn belief(&self, base: &CityInstance) -> FollowerBelief {
        FollowerBelief::scaled(&self.nominal_demand(base.n0()), &self.kappa, &self.kappa_prob)
    }
}

/// Draws the realizations of a plan. Sample `t` uses stream `t` of the
/// seeded generator, so a prefix of a longer run is reproduced exactly.
pub fn sample_realizations(plan: &SamplingPlan, inst: &CityInstance) -> Result<Vec<Realization>> {
    inst.validate()?;
    plan.validate(inst.n)?;
    let nominal = plan.nominal_demand(inst.n0());
    let ybar = plan.supply_coef * inst.n0();
    let mut out = Vec::with_capacity(plan.samples);
    for t in 0..plan.samples {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(t as u64);
        let mut d0 = Vec::with_capacity(inst.n);
        for &mode in &nominal {
            let (lo, hi) = (plan.spread_low * mode, plan.spread_high * mode);
            d0.push(if hi > lo {
                Triangular::new(lo, hi, mode)
                    .map_err(|e| EvsiError::Internal(format!("triangular parameters: {e}")))?
                    .sample(&mut rng)
            } else {
                mode
            });
        }
        let y = (0..inst.n).map(|_| ybar * rng.gen::<f64>()).collect();
        out.push(Realization { y, d0 });
    }
    Ok(out)
}

/// Nominal draws for a sweep: base demand shares and an initial placement of
/// the fleet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NominalDraw {
    pub h0: Vec<f64>,
    pub x0: Vec<f64>,
}

/// `count` nominal draws: h0 uniform on [0, 1]^n and x0 an integer split of
/// `n0` drivers with at least one per zone, proportional to uniform weights
/// and rounded by largest remainder.
pub fn nominal_draws(seed: u64, n: usize, count: usize, n0: usize) -> Result<Vec<NominalDraw>> {
    if n == 0 || n0 < n {
        return Err(domain("the fleet must place at least one driver per zone"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let h0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-12).collect();
        let total: f64 = w.iter().sum();
        let free = (n0 - n) as f64;
        let exact: Vec<f64> = w.iter().map(|x| free * x / total).collect();
        let mut x0: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut rest = (n0 - n) - x0.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            x0[i] += 1;
            rest -= 1;
        }
        out.push(NominalDraw {
            h0,
            x0: x0.iter().map(|&x| (x + 1) as f64).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub solver: SolverConfig,
    pub integer_flows: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            solver: SolverConfig::default(),
            integer_flows: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: usize,
    pub seed_offset: u64,
    pub y: Vec<f64>,
    pub d0: Vec<f64>,
    /// Best revenue found with drivers keeping their belief; `None` when the
    /// solver found no feasible point.
    pub psi: Option<f64>,
    /// Best revenue found with the realization shared.
    pub phi: Option<f64>,
    pub psi_bound: f64,
    pub phi_bound: f64,
    pub ws_status: SolveStatus,
    pub sws_status: SolveStatus,
    pub ws_nodes: usize,
    pub sws_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    pub samples: Vec<SampleRecord>,
    /// Samples with both values present; the means run over these.
    pub used: usize,
    pub ws: f64,
    pub sws: f64,
    /// mean(phi) - mean(psi).
    pub evsi: f64,
    pub ws_se: Option<f64>,
    pub sws_se: Option<f64>,
    /// Standard error of the paired differences phi - psi.
    pub evsi_se: Option<f64>,
    pub seed: Option<u64>,
    pub config_hash: Option<String>,
    pub belief: FollowerBelief,
    pub integer_flows: bool,
}

fn mean_se(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, None);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

fn solve_one(art: &reform::ReformArtifacts, opts: &EstimateOptions, what: &str, id: usize) -> Result<MibpSolution> {
    let sol = mibp::solve(&art.problem, &opts.solver)?;
    if sol.status == SolveStatus::Infeasible {
        return Err(EvsiError::Solver(format!(
            "{what} problem of sample {id} reported infeasible; the reformulation always admits a point, so this indicates a model bug (y = {:?}, d0 = {:?})",
            art.real.y, art.real.d0
        )));
    }
    Ok(sol)
}

/// Solves both reformulations for each realization and aggregates.
pub fn estimate_realizations(
    inst: &CityInstance,
    belief: &FollowerBelief,
    realizations: &[Realization],
    opts: &EstimateOptions,
) -> Result<IndicatorReport> {
    inst.validate()?;
    belief.validate(inst.n)?;
    opts.solver.validate()?;
    let records: Vec<SampleRecord> = realizations
        .par_iter()
        .enumerate()
        .map(|(id, real)| {
            let ws = reform::set_integer_flows(reform::build_ws(inst, belief, real)?, opts.integer_flows);
            let sws = reform::set_integer_flows(reform::build_sws(inst, real)?, opts.integer_flows);
            let a = solve_one(&ws, opts, "WS", id)?;
            let b = solve_one(&sws, opts, "SWS", id)?;
            Ok(SampleRecord {
                id,
                seed_offset: id as u64,
                y: real.y.clone(),
                d0: real.d0.clone(),
                psi: a.has_incumbent().then_some(a.value),
                phi: b.has_incumbent().then_some(b.value),
                psi_bound: a.bound,
                phi_bound: b.bound,
                ws_status: a.status,
                sws_status: b.status,
                ws_nodes: a.nodes,
                sws_nodes: b.nodes,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = records.iter().filter_map(|r| Some((r.psi?, r.phi?))).collect();
    let psi: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let phi: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let (ws, ws_se) = mean_se(&psi);
    let (sws, sws_se) = mean_se(&phi);
    let (_, evsi_se) = mean_se(&diff);
    Ok(IndicatorReport {
        used: pairs.len(),
        samples: records,
        ws,
        sws,
        evsi: sws - ws,
        ws_se,
        sws_se,
        evsi_se,
        seed: None,
        config_hash: None,
        belief: belief.clone(),
        integer_flows: opts.integer_flows,
    })
}

/// Samples the plan and estimates WS, SWS and their difference.
pub fn estimate(
    plan: &SamplingPlan,
    inst: &CityInstance,
    belief: &FollowerBelief,
    opts: &EstimateOptions,
) -> Result<IndicatorReport> {
    let cell = plan.instance(inst);
    let reals = sample_realizations(plan, &cell)?;
    let mut report = estimate_realizations(&cell, belief, &reals, opts)?;
    report.seed = Some(plan.seed);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plus_case_values() {
        let v = toy_values(&toy_example(ToyCase::Plus, 100).unwrap()).unwrap();
        assert!((v.sto - 0.375).abs() < 1e-12, "{v:?}");
        assert!((v.ws - 0.25).abs() < 1e-12, "{v:?}");
        assert!(v.sws.abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn minus_case_by_hand() {
        // Follower plays 1/2 without information; both corners with it.
        let v = toy_values(&toy_example(ToyCase::Minus, 100).unwrap()).unwrap();
        assert!((v.sto + 0.5).abs() < 1e-12, "{v:?}");
        assert!((v.ws + 0.5).abs() < 1e-12, "{v:?}");
        assert!((v.sws + 0.25).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn nominal_draws_place_whole_fleet() {
        for d in nominal_draws(3, 4, 20, 1000).unwrap() {
            assert_eq!(d.x0.iter().sum::<f64>(), 1000.0);
            assert!(d.x0.iter().all(|&x| x >= 1.0 && x.fract() == 0.0));
        }
    }
}
