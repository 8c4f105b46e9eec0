//! The drivers' reallocation problems for fixed prices.
//!
//! With the realization shared, the cost is piecewise linear and the problem
//! is a linear program over flows plus one epigraph variable per zone. Under
//! the drivers' own belief the cost is convex and continuously
//! differentiable, and is minimized by projected gradient with
//! Barzilai-Borwein steps and Armijo backtracking. Each row of the flow
//! polytope is a capped simplex, onto which projection is exact.

use mibp::lp::{self, LinearProgram, LpStatus, Sense};
use serde::{Deserialize, Serialize};

use crate::error::{EvsiError, Result};
use crate::model::{
    allocate_unchecked, beta_sws_region_tol, beta_ws, demand_unchecked, phi, relocation_cost, revenue_from_allocation,
    BetaRegion, CityInstance, FlowMatrix, FollowerBelief, PriceVector, Realization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FollowerStatus {
    Optimal,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerSolution {
    pub v: FlowMatrix,
    pub value: f64,
    pub kkt_residual: f64,
    /// `lambda[i][j]` for the sign constraint on `v[i][j]`; zero diagonal.
    pub lambda: Vec<Vec<f64>>,
    /// Multipliers of the capacity rows.
    pub gamma: Vec<f64>,
    pub status: FollowerStatus,
    pub iterations: usize,
}

/// What the drivers know about demand.
#[derive(Debug, Clone, Copy)]
pub enum FollowerInfo<'a> {
    Shared(&'a Realization),
    Belief(&'a FollowerBelief),
}

fn check_inputs(p: &PriceVector, inst: &CityInstance) -> Result<()> {
    inst.validate()?;
    p.validate(inst)
}

/// Column layout of the shared linear program: arcs first, then one
/// epigraph variable per zone, then (optionally) one served-demand variable
/// per zone.
struct SharedLp {
    lp: LinearProgram,
    arcs: Vec<(usize, usize)>,
}

fn shared_lp(p: &[f64], real: &Realization, inst: &CityInstance) -> SharedLp {
    let n = inst.n;
    let arcs = inst.arcs();
    let na = arcs.len();
    let mut lp = LinearProgram::new(na + n);
    for (a, &(i, j)) in arcs.iter().enumerate() {
        lp.objective[a] = -inst.alpha[i][j];
        lp.upper[a] = inst.x0[i];
    }
    for i in 0..n {
        let d = demand_unchecked(p[i], real.d0[i], inst, i);
        lp.objective[na + i] = -inst.c * p[i];
        lp.lower[na + i] = -d;
        lp.upper[na + i] = (-d).max(-real.y[i]);
    }
    for i in 0..n {
        let out: Vec<(usize, f64)> = arcs
            .iter()
            .enumerate()
            .filter(|(_, &(a, _))| a == i)
            .map(|(k, _)| (k, 1.0))
            .collect();
        lp.add_row(out, Sense::Le, inst.x0[i]);
    }
    // -x_i - y_i <= t_i
    for i in 0..n {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (k, &(a, b)) in arcs.iter().enumerate() {
            if a == i {
                row.push((k, 1.0));
            } else if b == i {
                row.push((k, -1.0));
            }
        }
        row.push((na + i, -1.0));
        lp.add_row(row, Sense::Le, inst.x0[i] + real.y[i]);
    }
    SharedLp { lp, arcs }
}

fn flows_from(arcs: &[(usize, usize)], x: &[f64], n: usize, x0: &[f64]) -> FlowMatrix {
    let mut f = FlowMatrix::zeros(n);
    for (k, &(i, j)) in arcs.iter().enumerate() {
        f.v[i][j] = x[k].clamp(0.0, x0[i]);
    }
    // Clip tiny capacity overshoots left by the simplex tolerances.
    for i in 0..n {
        let out: f64 = f.v[i].iter().sum();
        if out > x0[i] {
            let scale = x0[i] / out;
            for a in f.v[i].iter_mut() {
                *a *= scale;
            }
        }
    }
    f
}

fn attach_multipliers(
    mut sol: FollowerSolution,
    p: &PriceVector,
    info: FollowerInfo<'_>,
    inst: &CityInstance,
) -> Result<FollowerSolution> {
    let fit = kkt_fit(p, &sol.v, info, inst)?;
    sol.kkt_residual = fit.residual;
    sol.lambda = fit.lambda;
    sol.gamma = fit.gamma;
    Ok(sol)
}

/// Globally minimizes the shared follower cost.
pub fn solve_shared(p: &PriceVector, real: &Realization, inst: &CityInstance) -> Result<FollowerSolution> {
    check_inputs(p, inst)?;
    real.validate(inst.n)?;
    let SharedLp { lp: problem, arcs } = shared_lp(&p.p, real, inst);
    let sol = lp::solve(&problem);
    if sol.status != LpStatus::Optimal {
        return Err(EvsiError::Solver(format!(
            "follower LP ended with status {:?}",
            sol.status
        )));
    }
    let certificate = lp::dual_bound(&problem, &sol.duals);
    let gap = (certificate - sol.value).abs();
    if gap > 1e-7 * (1.0 + sol.value.abs()) {
        return Err(EvsiError::Solver(format!(
            "follower LP duality gap {gap:.3e} exceeds tolerance (primal {}, dual {certificate})",
            sol.value
        )));
    }
    let v = flows_from(&arcs, &sol.x, inst.n, &inst.x0);
    let value = shared_cost(&p.p, &v, real, inst);
    let out = FollowerSolution {
        v,
        value,
        kkt_residual: 0.0,
        lambda: Vec::new(),
        gamma: Vec::new(),
        status: FollowerStatus::Optimal,
        iterations: sol.iterations,
    };
    attach_multipliers(out, p, FollowerInfo::Shared(real), inst)
}

/// Among the optimal responses of the shared problem, the one most favorable
/// to the company (optimistic convention). Returns the response and the
/// company revenue it yields.
pub fn solve_shared_optimistic(
    p: &PriceVector,
    real: &Realization,
    inst: &CityInstance,
) -> Result<(FollowerSolution, f64)> {
    check_inputs(p, inst)?;
    real.validate(inst.n)?;
    let (v, revenue, iterations) = optimistic_response(&p.p, real, inst)?;
    let value = shared_cost(&p.p, &v, real, inst);
    let out = FollowerSolution {
        v,
        value,
        kkt_residual: 0.0,
        lambda: Vec::new(),
        gamma: Vec::new(),
        status: FollowerStatus::Optimal,
        iterations,
    };
    Ok((attach_multipliers(out, p, FollowerInfo::Shared(real), inst)?, revenue))
}

/// Optimistic shared response without multipliers: minimizes the drivers'
/// cost, then maximizes company revenue over the optimal face.
pub(crate) fn optimistic_response(
    p: &[f64],
    real: &Realization,
    inst: &CityInstance,
) -> Result<(FlowMatrix, f64, usize)> {
    let n = inst.n;
    let SharedLp { lp: mut problem, arcs } = shared_lp(p, real, inst);
    let first = lp::solve(&problem);
    if first.status != LpStatus::Optimal {
        return Err(EvsiError::Solver(format!(
            "follower LP ended with status {:?}",
            first.status
        )));
    }
    let na = arcs.len();
    let cost_obj = problem.objective.clone();
    // Served demand u_i <= min(x_i + y_i, d_i).
    for i in 0..n {
        let d = demand_unchecked(p[i], real.d0[i], inst, i);
        problem.objective.push(0.0);
        problem.lower.push(0.0);
        problem.upper.push(d);
    }
    for c in problem.objective.iter_mut() {
        *c = 0.0;
    }
    for i in 0..n {
        problem.objective[na + n + i] = (1.0 - inst.c) * p[i];
        let mut row: Vec<(usize, f64)> = Vec::new();
        for (k, &(a, b)) in arcs.iter().enumerate() {
            if a == i {
                row.push((k, 1.0));
            } else if b == i {
                row.push((k, -1.0));
            }
        }
        row.push((na + n + i, 1.0));
        problem.add_row(row, Sense::Le, inst.x0[i] + real.y[i]);
    }
    // Stay on the optimal face: cost <= optimum + tolerance.
    let best_cost = -first.value;
    let face: Vec<(usize, f64)> = cost_obj
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k, -c))
        .collect();
    problem.add_row(face, Sense::Le, best_cost + 1e-9 * (1.0 + best_cost.abs()));
    let second = lp::solve(&problem);
    let x = if second.status == LpStatus::Optimal {
        &second.x
    } else {
        &first.x
    };
    let v = flows_from(&arcs, x, n, &inst.x0);
    let revenue = revenue_from_allocation(p, &allocate_unchecked(&inst.x0, &v), real, inst);
    Ok((v, revenue, first.iterations + second.iterations))
}

pub(crate) fn shared_cost(p: &[f64], v: &FlowMatrix, real: &Realization, inst: &CityInstance) -> f64 {
    let x = allocate_unchecked(&inst.x0, v);
    let mut cost = relocation_cost(v, inst);
    for i in 0..inst.n {
        let d = demand_unchecked(p[i], real.d0[i], inst, i);
        cost += inst.c * p[i] * (-x[i] - real.y[i]).max(-d);
    }
    cost
}

/// Projection of `u` onto `{w >= 0, sum w <= cap}`.
pub fn project_capped_simplex(u: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = u.iter().map(|a| a.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    // Water filling: find tau > 0 with sum max(u - tau, 0) = cap.
    let mut sorted: Vec<f64> = u.iter().cloned().filter(|a| *a > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut tau = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        prefix += s;
        let t = (prefix - cap) / (k + 1) as f64;
        let next = sorted.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
        if t >= next && t < s {
            tau = t;
            break;
        }
        tau = t;
    }
    u.iter().map(|a| (a - tau).max(0.0)).collect()
}

struct ScenarioObjective<'a> {
    p: &'a [f64],
    belief: &'a FollowerBelief,
    inst: &'a CityInstance,
    arcs: Vec<(usize, usize)>,
    /// Believed demand at the given prices, `[i][k]`.
    d: Vec<Vec<f64>>,
}

impl<'a> ScenarioObjective<'a> {
    fn new(p: &'a [f64], belief: &'a FollowerBelief, inst: &'a CityInstance) -> Self {
        let d = (0..inst.n)
            .map(|i| {
                (0..belief.m)
                    .map(|k| demand_unchecked(p[i], belief.d0_belief[i][k], inst, i))
                    .collect()
            })
            .collect();
        Self {
            p,
            belief,
            inst,
            arcs: inst.arcs(),
            d,
        }
    }

    fn allocation(&self, v: &[f64]) -> Vec<f64> {
        let mut x = self.inst.x0.clone();
        for (k, &(i, j)) in self.arcs.iter().enumerate() {
            x[i] -= v[k];
            x[j] += v[k];
        }
        x
    }

    fn value(&self, v: &[f64]) -> f64 {
        let x = self.allocation(v);
        let inst = self.inst;
        let mut f = 0.0;
        for (k, &(i, j)) in self.arcs.iter().enumerate() {
            f += inst.alpha[i][j] * v[k];
        }
        for i in 0..inst.n {
            for k in 0..self.belief.m {
                let d = self.d[i][k];
                f += inst.c * self.p[i] * (phi(d, x[i], inst.ybar) - d) * self.belief.prob[k];
            }
        }
        f
    }

    /// Per-zone marginal cost of one more driver, `p_i sum_k beta_ik`.
    fn zone_marginal(&self, x: &[f64]) -> Vec<f64> {
        let inst = self.inst;
        (0..inst.n)
            .map(|i| {
                let s: f64 = (0..self.belief.m)
                    .map(|k| beta_ws(self.d[i][k], x[i], inst.ybar, inst.c, self.belief.prob[k]))
                    .sum();
                self.p[i] * s
            })
            .collect()
    }

    fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let g = self.zone_marginal(&self.allocation(v));
        self.arcs
            .iter()
            .map(|&(i, j)| self.inst.alpha[i][j] + g[j] - g[i])
            .collect()
    }

    fn project(&self, u: &[f64]) -> Vec<f64> {
        let n = self.inst.n;
        let mut out = vec![0.0; u.len()];
        for i in 0..n {
            let idx: Vec<usize> = (0..self.arcs.len()).filter(|&k| self.arcs[k].0 == i).collect();
            let row: Vec<f64> = idx.iter().map(|&k| u[k]).collect();
            let proj = project_capped_simplex(&row, self.inst.x0[i]);
            for (&k, w) in idx.iter().zip(proj) {
                out[k] = w;
            }
        }
        out
    }

    /// `|| v - P(v - g) ||_inf`.
    fn residual(&self, v: &[f64], g: &[f64]) -> f64 {
        let step: Vec<f64> = v.iter().zip(g).map(|(a, b)| a - b).collect();
        let proj = self.project(&step);
        v.iter().zip(&proj).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Tolerance of [`solve_scenario`] on the projected-gradient residual,
/// relative to `1 + max |gradient|`.
pub const SCENARIO_TOL: f64 = 1e-6;
const SCENARIO_MAX_ITER: usize = 50_000;

/// Minimizes the belief-expected follower cost.
pub fn solve_scenario(p: &PriceVector, belief: &FollowerBelief, inst: &CityInstance) -> Result<FollowerSolution> {
    check_inputs(p, inst)?;
    belief.validate(inst.n)?;
    let out = scenario_response(&p.p, belief, inst);
    attach_multipliers(out, p, FollowerInfo::Belief(belief), inst)
}

/// Projected-gradient minimization without multipliers.
pub(crate) fn scenario_response(p: &[f64], belief: &FollowerBelief, inst: &CityInstance) -> FollowerSolution {
    let obj = ScenarioObjective::new(p, belief, inst);
    let na = obj.arcs.len();
    let mut v = vec![0.0; na];
    let mut f = obj.value(&v);
    let mut g = obj.gradient(&v);
    let scale = inst.x0.iter().sum::<f64>() / inst.n as f64;
    let gmax = g.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let mut step = if gmax > 0.0 { scale / gmax } else { 1.0 };
    let mut status = FollowerStatus::IterationLimit;
    let mut iterations = 0;
    for it in 0..SCENARIO_MAX_ITER {
        iterations = it;
        let gscale = g.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
        if obj.residual(&v, &g) <= SCENARIO_TOL * (1.0 + gscale) {
            status = FollowerStatus::Optimal;
            break;
        }
        // Armijo backtracking along the projection arc.
        let mut accepted = None;
        let mut t = step;
        for _ in 0..80 {
            let trial: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let w = obj.project(&trial);
            let dir: f64 = w.iter().zip(&v).zip(&g).map(|((a, b), c)| (a - b) * c).sum();
            let fw = obj.value(&w);
            if fw <= f + 1e-4 * dir || dir == 0.0 {
                accepted = Some((w, fw));
                break;
            }
            t *= 0.5;
        }
        let Some((w, fw)) = accepted else {
            break;
        };
        let gw = obj.gradient(&w);
        let s: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gw.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        step = if sy > 1e-300 {
            (ss / sy).clamp(1e-8, 1e12)
        } else {
            (t * 4.0).min(1e12)
        };
        if fw > f || ss == 0.0 {
            break;
        }
        v = w;
        f = fw;
        g = gw;
    }
    let flows = flows_from(&obj.arcs, &v, inst.n, &inst.x0);
    let value = obj.value(&v);
    FollowerSolution {
        v: flows,
        value,
        kkt_residual: 0.0,
        lambda: Vec::new(),
        gamma: Vec::new(),
        status,
        iterations,
    }
}

/// Best-fit multipliers of the follower's optimality conditions at a given
/// flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktFit {
    /// Sum of absolute stationarity errors plus the complementarity products
    /// `lambda_ij v_ij` and `gamma_i (x0_i - sum_j v_ij)`.
    pub residual: f64,
    pub lambda: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    /// Selected subgradients of the shared matching term (shared mode only).
    pub beta: Vec<f64>,
    /// Subgradient region per zone (shared mode only).
    pub regions: Vec<BetaRegion>,
}

/// Minimizes the optimality-condition violation over the multipliers.
///
/// Stationarity per arc reads `alpha_ij + G_j - G_i - lambda_ij + gamma_i = 0`,
/// with `G_i = p_i sum_k beta_ik` under the belief and `G_i = -c beta_i` with
/// `beta_i` in its region interval when the realization is shared.
pub fn kkt_fit(p: &PriceVector, v: &FlowMatrix, info: FollowerInfo<'_>, inst: &CityInstance) -> Result<KktFit> {
    check_inputs(p, inst)?;
    v.validate(&inst.x0)?;
    let n = inst.n;
    let arcs = inst.arcs();
    let na = arcs.len();
    let x = allocate_unchecked(&inst.x0, v);
    let pmax = inst.p_max_overall();
    let amax = inst.alpha.iter().flatten().cloned().fold(0.0, f64::max);
    let big = 10.0
        * (amax + 4.0 * pmax + 1.0)
        * match info {
            FollowerInfo::Belief(b) => b.m as f64,
            FollowerInfo::Shared(_) => 1.0,
        };

    // Fixed part of the arc gradients, and the region of each zone.
    let mut g0: Vec<f64> = arcs.iter().map(|&(i, j)| inst.alpha[i][j]).collect();
    let mut regions = Vec::new();
    match info {
        FollowerInfo::Belief(belief) => {
            belief.validate(n)?;
            let obj = ScenarioObjective::new(&p.p, belief, inst);
            let g = obj.zone_marginal(&x);
            for (k, &(i, j)) in arcs.iter().enumerate() {
                g0[k] += g[j] - g[i];
            }
        }
        FollowerInfo::Shared(real) => {
            real.validate(n)?;
            for i in 0..n {
                let d = demand_unchecked(p.p[i], real.d0[i], inst, i);
                let tol = 1e-7 * (1.0 + d + x[i].abs() + real.y[i]);
                regions.push(beta_sws_region_tol(d, x[i], real.y[i], tol));
            }
        }
    }

    // Columns: lambda (na), gamma (n), e+ (na), e- (na), beta (n, shared only).
    let shared = matches!(info, FollowerInfo::Shared(_));
    let nb = if shared { n } else { 0 };
    let (ol, og, oep, oem, ob) = (0, na, na + n, 2 * na + n, 3 * na + n);
    let mut lp = LinearProgram::new(3 * na + n + nb);
    const REG: f64 = 1e-9;
    for (k, &(i, j)) in arcs.iter().enumerate() {
        lp.upper[ol + k] = big;
        lp.objective[ol + k] = -(v.v[i][j].max(0.0) + REG);
        lp.upper[oep + k] = 1e9;
        lp.upper[oem + k] = 1e9;
        lp.objective[oep + k] = -1.0;
        lp.objective[oem + k] = -1.0;
    }
    for i in 0..n {
        let slack = (inst.x0[i] - v.v[i].iter().sum::<f64>()).max(0.0);
        lp.upper[og + i] = big;
        lp.objective[og + i] = -(slack + REG);
    }
    if shared {
        for i in 0..n {
            let (lo, hi) = match regions[i] {
                BetaRegion::Zero => (0.0, 0.0),
                BetaRegion::Pi => (p.p[i], p.p[i]),
                BetaRegion::Interval => (0.0, p.p[i]),
            };
            lp.lower[ob + i] = lo;
            lp.upper[ob + i] = hi;
        }
    }
    for (k, &(i, j)) in arcs.iter().enumerate() {
        let mut row = vec![(ol + k, -1.0), (og + i, 1.0), (oep + k, -1.0), (oem + k, 1.0)];
        if shared {
            row.push((ob + i, inst.c));
            row.push((ob + j, -inst.c));
        }
        lp.add_row(row, Sense::Eq, -g0[k]);
    }
    let sol = lp::solve(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(EvsiError::Solver(format!(
            "multiplier fit ended with status {:?}",
            sol.status
        )));
    }
    let xs = &sol.x;
    let mut lambda = vec![vec![0.0; n]; n];
    let mut residual = 0.0;
    for (k, &(i, j)) in arcs.iter().enumerate() {
        lambda[i][j] = xs[ol + k];
        residual += xs[oep + k] + xs[oem + k] + xs[ol + k] * v.v[i][j].max(0.0);
    }
    let gamma: Vec<f64> = (0..n).map(|i| xs[og + i]).collect();
    for i in 0..n {
        let slack = (inst.x0[i] - v.v[i].iter().sum::<f64>()).max(0.0);
        residual += gamma[i] * slack;
    }
    let beta = if shared {
        (0..n).map(|i| xs[ob + i]).collect()
    } else {
        Vec::new()
    };
    Ok(KktFit {
        residual,
        lambda,
        gamma,
        beta,
        regions,
    })
}

pub fn kkt_residual(p: &PriceVector, v: &FlowMatrix, info: FollowerInfo<'_>, inst: &CityInstance) -> Result<f64> {
    Ok(kkt_fit(p, v, info, inst)?.residual)
}
