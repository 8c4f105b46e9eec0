//! Single-level reformulations of the company's pricing problem.
//!
//! The drivers' problem is replaced by its optimality conditions. Each
//! complementarity pair gets a binary switch, and the piecewise derivative of
//! the matching term is encoded by region binaries. The company's
//! `min(x_i + y_i, d_i)` is an epigraph variable bounded above by both
//! arguments; since prices are positive and the objective is maximized it is
//! tight at any optimum.
//!
//! Zone and scenario indices in variable names are zero-based: `p_0`,
//! `v_0_2`, `beta_1_0`, and so on. Flows are substituted through the
//! conservation law in the belief model; the shared model keeps explicit
//! allocation variables `x_i` with one conservation row each.

use mibp::{MibpProblem, MibpSolution, RowSense, TermLocation, VarId, VarKind};
use serde::{Deserialize, Serialize};

use crate::error::{domain, EvsiError, Result};
use crate::follower::{kkt_fit, FollowerInfo};
use crate::model::{
    allocate_unchecked, demand_affine, demand_unchecked, leader_revenue, BetaRegion, CityInstance, FlowMatrix,
    FollowerBelief, Mode, PriceVector, Realization,
};

/// Region variables of the belief model, indexed `[i][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WsRegionVars {
    pub a: Vec<Vec<VarId>>,
    pub b: Vec<Vec<VarId>>,
    pub c: Vec<Vec<VarId>>,
    pub r: Vec<Vec<VarId>>,
    pub s: Vec<Vec<VarId>>,
    pub t: Vec<Vec<VarId>>,
}

/// Region switches of the shared model, one pair per zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwsRegionVars {
    pub s: Vec<VarId>,
    pub t: Vec<VarId>,
    /// Allocation after reallocation.
    pub x: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarMap {
    pub p: Vec<VarId>,
    /// Off-diagonal arcs `(i, j)` in row-major order.
    pub arcs: Vec<(usize, usize)>,
    /// Per arc.
    pub v: Vec<VarId>,
    pub lambda: Vec<VarId>,
    pub z: Vec<VarId>,
    /// Per zone.
    pub gamma: Vec<VarId>,
    pub w: Vec<VarId>,
    pub wmin: Vec<VarId>,
    /// `[i][k]` in the belief model, `[i][0]` in the shared model.
    pub beta: Vec<Vec<VarId>>,
    pub ws_regions: Option<WsRegionVars>,
    pub sws_regions: Option<SwsRegionVars>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReformArtifacts {
    pub mode: Mode,
    pub problem: MibpProblem,
    pub vars: VarMap,
    /// Bound and switch constant of the arc multipliers.
    pub big_m: f64,
    /// Bound and switch constant of the capacity multipliers.
    pub gamma_bound: f64,
    /// Switch constant of the region encoding.
    pub big_c: f64,
    pub inst: CityInstance,
    pub real: Realization,
    pub belief: Option<FollowerBelief>,
    pub integer_flows: bool,
}

fn validate_inputs(inst: &CityInstance, real: &Realization) -> Result<()> {
    inst.validate()?;
    real.validate(inst.n)
}

/// Arc multiplier constant. The published bound `4 m p_max` does not cover
/// large relocation costs, since `lambda_ij = alpha_ij + G_j - G_i + gamma_i`
/// can reach `alpha_max + 2 c p_max`; the larger of the two is used.
fn lambda_bound(inst: &CityInstance, m: usize) -> f64 {
    let pmax = inst.p_max_overall();
    let amax = inst.alpha.iter().flatten().cloned().fold(0.0, f64::max);
    (4.0 * m as f64 * pmax).max(amax + 2.0 * inst.c * pmax)
}

struct Builder<'a> {
    inst: &'a CityInstance,
    prob: MibpProblem,
}

impl<'a> Builder<'a> {
    /// Coefficients of `x_i` expressed through flows, and its constant `x0_i`.
    fn alloc_terms(&self, vars: &[VarId], arcs: &[(usize, usize)], i: usize, scale: f64) -> Vec<(VarId, f64)> {
        let mut out = Vec::new();
        for (k, &(a, b)) in arcs.iter().enumerate() {
            if a == i {
                out.push((vars[k], -scale));
            } else if b == i {
                out.push((vars[k], scale));
            }
        }
        out
    }

    fn common(
        &mut self,
        m: usize,
        mode: Mode,
    ) -> (
        Vec<VarId>,
        Vec<(usize, usize)>,
        Vec<VarId>,
        Vec<VarId>,
        Vec<VarId>,
        Vec<VarId>,
        Vec<VarId>,
    ) {
        let inst = self.inst;
        let n = inst.n;
        let arcs = inst.arcs();
        let big_m = lambda_bound(inst, m);
        let gamma_bound = gamma_bound(inst, m, mode);
        let p: Vec<VarId> = (0..n)
            .map(|i| {
                self.prob
                    .add_var(format!("p_{i}"), inst.p_min[i], inst.p_max[i], VarKind::Continuous)
            })
            .collect();
        let v: Vec<VarId> = arcs
            .iter()
            .map(|&(i, j)| {
                self.prob
                    .add_var(format!("v_{i}_{j}"), 0.0, inst.x0[i], VarKind::Continuous)
            })
            .collect();
        let lambda: Vec<VarId> = arcs
            .iter()
            .map(|&(i, j)| {
                self.prob
                    .add_var(format!("lam_{i}_{j}"), 0.0, big_m, VarKind::Continuous)
            })
            .collect();
        let gamma: Vec<VarId> = (0..n)
            .map(|i| {
                self.prob
                    .add_var(format!("gam_{i}"), 0.0, gamma_bound, VarKind::Continuous)
            })
            .collect();
        let z: Vec<VarId> = arcs
            .iter()
            .map(|&(i, j)| self.prob.add_var(format!("z_{i}_{j}"), 0.0, 1.0, VarKind::Binary))
            .collect();
        let w: Vec<VarId> = (0..n)
            .map(|i| self.prob.add_var(format!("w_{i}"), 0.0, 1.0, VarKind::Binary))
            .collect();
        (p, arcs, v, lambda, gamma, z, w)
    }

    /// Capacity rows and the complementarity switches.
    fn complementarity(
        &mut self,
        arcs: &[(usize, usize)],
        v: &[VarId],
        lambda: &[VarId],
        gamma: &[VarId],
        z: &[VarId],
        w: &[VarId],
        big_m: f64,
        gamma_bound: f64,
    ) {
        let inst = self.inst;
        for i in 0..inst.n {
            let out: Vec<(VarId, f64)> = arcs
                .iter()
                .enumerate()
                .filter(|(_, &(a, _))| a == i)
                .map(|(k, _)| (v[k], 1.0))
                .collect();
            self.prob.add_row("capacity", out, RowSense::Le, inst.x0[i]);
        }
        for (k, &(i, _)) in arcs.iter().enumerate() {
            self.prob.add_row(
                "lambda_switch",
                vec![(lambda[k], 1.0), (z[k], -big_m)],
                RowSense::Le,
                0.0,
            );
            self.prob.add_row(
                "flow_switch",
                vec![(v[k], 1.0), (z[k], inst.x0[i])],
                RowSense::Le,
                inst.x0[i],
            );
        }
        for i in 0..inst.n {
            self.prob.add_row(
                "gamma_switch",
                vec![(gamma[i], 1.0), (w[i], -gamma_bound)],
                RowSense::Le,
                0.0,
            );
            // x0_i - sum_j v_ij <= x0_i (1 - w_i)
            let mut row: Vec<(VarId, f64)> = arcs
                .iter()
                .enumerate()
                .filter(|(_, &(a, _))| a == i)
                .map(|(k, _)| (v[k], -1.0))
                .collect();
            row.push((w[i], inst.x0[i]));
            self.prob.add_row("capacity_switch", row, RowSense::Le, 0.0);
        }
    }
}

fn gamma_bound(inst: &CityInstance, m: usize, mode: Mode) -> f64 {
    let pmax = inst.p_max_overall();
    match mode {
        Mode::Ws => 2.0 * m as f64 * pmax,
        Mode::Sws => 2.0 * pmax,
    }
}

/// Company objective: `sum (1 - c) p_i wmin_i` with `wmin_i <= x_i + y_i`
/// and `wmin_i <= d_i(p_i)`. `alloc` gives the terms and constant of `x_i`.
fn add_objective(
    prob: &mut MibpProblem,
    inst: &CityInstance,
    real: &Realization,
    p: &[VarId],
    alloc: &dyn Fn(usize) -> (Vec<(VarId, f64)>, f64),
) -> Vec<VarId> {
    let n = inst.n;
    let mut wmin = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = demand_affine(inst, i);
        let top = real.d0[i] * (a + b * inst.p_min[i]).max(a + b * inst.p_max[i]);
        let cap = top.min(inst.n0() + real.y[i]).max(0.0);
        let id = prob.add_var(format!("wmin_{i}"), 0.0, cap, VarKind::Continuous);
        wmin.push(id);
        let (terms, constant) = alloc(i);
        let mut row = vec![(id, 1.0)];
        row.extend(terms.iter().map(|&(j, c)| (j, -c)));
        prob.add_row("min_supply", row, RowSense::Le, constant + real.y[i]);
        prob.add_row(
            "min_demand",
            vec![(id, 1.0), (p[i], -real.d0[i] * b)],
            RowSense::Le,
            real.d0[i] * a,
        );
        prob.add_bilinear(1.0 - inst.c, p[i], id, TermLocation::Objective);
    }
    wmin
}

/// Builds the reformulation in which the drivers keep their belief.
pub fn build_ws(inst: &CityInstance, belief: &FollowerBelief, real: &Realization) -> Result<ReformArtifacts> {
    validate_inputs(inst, real)?;
    belief.validate(inst.n)?;
    let n = inst.n;
    let m = belief.m;
    let big_m = lambda_bound(inst, m);
    let gamma_bound = gamma_bound(inst, m, Mode::Ws);
    let big_c = belief.max_demand() + inst.n0();
    let mut bld = Builder {
        inst,
        prob: MibpProblem::new(),
    };
    let (p, arcs, v, lambda, gamma, z, w) = bld.common(m, Mode::Ws);
    let mut beta = vec![Vec::with_capacity(m); n];
    let mut reg = WsRegionVars {
        a: vec![Vec::new(); n],
        b: vec![Vec::new(); n],
        c: vec![Vec::new(); n],
        r: vec![Vec::new(); n],
        s: vec![Vec::new(); n],
        t: vec![Vec::new(); n],
    };
    for i in 0..n {
        for k in 0..m {
            let cp = inst.c * belief.prob[k];
            beta[i].push(bld.prob.add_var(format!("beta_{i}_{k}"), -cp, 0.0, VarKind::Continuous));
            reg.a[i].push(bld.prob.add_var(format!("a_{i}_{k}"), 0.0, 1.0, VarKind::Binary));
            reg.b[i].push(bld.prob.add_var(format!("b_{i}_{k}"), 0.0, 1.0, VarKind::Binary));
            reg.c[i].push(bld.prob.add_var(format!("c_{i}_{k}"), 0.0, 1.0, VarKind::Binary));
            reg.r[i].push(bld.prob.add_var(format!("r_{i}_{k}"), -big_c, 0.0, VarKind::Continuous));
            reg.s[i].push(
                bld.prob
                    .add_var(format!("s_{i}_{k}"), 0.0, inst.ybar, VarKind::Continuous),
            );
            reg.t[i].push(bld.prob.add_var(format!("t_{i}_{k}"), 0.0, big_c, VarKind::Continuous));
        }
    }

    // Stationarity: sum_k (p_j beta_jk - p_i beta_ik) + alpha_ij - lambda_ij + gamma_i = 0.
    for (k_arc, &(i, j)) in arcs.iter().enumerate() {
        let r = bld.prob.add_row(
            "stationarity",
            vec![(lambda[k_arc], -1.0), (gamma[i], 1.0)],
            RowSense::Eq,
            -inst.alpha[i][j],
        );
        for k in 0..m {
            bld.prob.add_bilinear(1.0, p[j], beta[j][k], TermLocation::Row(r));
            bld.prob.add_bilinear(-1.0, p[i], beta[i][k], TermLocation::Row(r));
        }
    }
    bld.complementarity(&arcs, &v, &lambda, &gamma, &z, &w, big_m, gamma_bound);

    for i in 0..n {
        let (da, db) = demand_affine(inst, i);
        for k in 0..m {
            let dk = belief.d0_belief[i][k];
            let cp = inst.c * belief.prob[k];
            bld.prob.add_row(
                "region_choice",
                vec![(reg.a[i][k], 1.0), (reg.b[i][k], 1.0), (reg.c[i][k], 1.0)],
                RowSense::Eq,
                1.0,
            );
            // d_ik(p_i) - x_i = r + s + t
            let mut row = vec![
                (p[i], dk * db),
                (reg.r[i][k], -1.0),
                (reg.s[i][k], -1.0),
                (reg.t[i][k], -1.0),
            ];
            row.extend(bld.alloc_terms(&v, &arcs, i, -1.0));
            bld.prob
                .add_row("region_split", row, RowSense::Eq, inst.x0[i] - dk * da);
            bld.prob.add_row(
                "region_r",
                vec![(reg.r[i][k], -1.0), (reg.a[i][k], -big_c)],
                RowSense::Le,
                0.0,
            );
            bld.prob.add_row(
                "region_s",
                vec![(reg.s[i][k], 1.0), (reg.b[i][k], -inst.ybar)],
                RowSense::Le,
                0.0,
            );
            bld.prob.add_row(
                "region_t_low",
                vec![(reg.c[i][k], inst.ybar), (reg.t[i][k], -1.0)],
                RowSense::Le,
                0.0,
            );
            bld.prob.add_row(
                "region_t_high",
                vec![(reg.t[i][k], 1.0), (reg.c[i][k], -big_c)],
                RowSense::Le,
                0.0,
            );
            bld.prob.add_row(
                "beta_def",
                vec![(beta[i][k], 1.0), (reg.s[i][k], cp / inst.ybar), (reg.c[i][k], cp)],
                RowSense::Eq,
                0.0,
            );
        }
    }

    let alloc_v = v.clone();
    let alloc_arcs = arcs.clone();
    let x0 = inst.x0.clone();
    let alloc = move |i: usize| {
        let mut terms = Vec::new();
        for (k, &(a, b)) in alloc_arcs.iter().enumerate() {
            if a == i {
                terms.push((alloc_v[k], -1.0));
            } else if b == i {
                terms.push((alloc_v[k], 1.0));
            }
        }
        (terms, x0[i])
    };
    let wmin = add_objective(&mut bld.prob, inst, real, &p, &alloc);
    Ok(ReformArtifacts {
        mode: Mode::Ws,
        problem: bld.prob,
        vars: VarMap {
            p,
            arcs,
            v,
            lambda,
            z,
            gamma,
            w,
            wmin,
            beta,
            ws_regions: Some(reg),
            sws_regions: None,
        },
        big_m,
        gamma_bound,
        big_c,
        inst: inst.clone(),
        real: real.clone(),
        belief: Some(belief.clone()),
        integer_flows: false,
    })
}

/// Builds the reformulation in which the realization is shared.
pub fn build_sws(inst: &CityInstance, real: &Realization) -> Result<ReformArtifacts> {
    validate_inputs(inst, real)?;
    let n = inst.n;
    let pmax = inst.p_max_overall();
    let big_m = lambda_bound(inst, 1);
    let gamma_bound = gamma_bound(inst, 1, Mode::Sws);
    let max_d0 = real.d0.iter().cloned().fold(0.0, f64::max);
    let max_y = real.y.iter().cloned().fold(0.0, f64::max);
    // |x_i + y_i - d_i| <= N0 + max y + max d0; the published constant
    // p_max (max d0 + N0) omits y and is only sufficient when p_max is large.
    let big_c = (pmax * (max_d0 + inst.n0())).max(inst.n0() + max_y + max_d0);
    let mut bld = Builder {
        inst,
        prob: MibpProblem::new(),
    };
    let (p, arcs, v, lambda, gamma, z, w) = bld.common(1, Mode::Sws);
    let x: Vec<VarId> = (0..n)
        .map(|i| bld.prob.add_var(format!("x_{i}"), 0.0, inst.n0(), VarKind::Continuous))
        .collect();
    let beta: Vec<Vec<VarId>> = (0..n)
        .map(|i| {
            vec![bld
                .prob
                .add_var(format!("beta_{i}"), 0.0, inst.p_max[i], VarKind::Continuous)]
        })
        .collect();
    let s: Vec<VarId> = (0..n)
        .map(|i| bld.prob.add_var(format!("s_{i}"), 0.0, 1.0, VarKind::Binary))
        .collect();
    let t: Vec<VarId> = (0..n)
        .map(|i| bld.prob.add_var(format!("t_{i}"), 0.0, 1.0, VarKind::Binary))
        .collect();

    // Stationarity: c (beta_i - beta_j) + alpha_ij - lambda_ij + gamma_i = 0.
    for (k, &(i, j)) in arcs.iter().enumerate() {
        bld.prob.add_row(
            "stationarity",
            vec![
                (beta[i][0], inst.c),
                (beta[j][0], -inst.c),
                (lambda[k], -1.0),
                (gamma[i], 1.0),
            ],
            RowSense::Eq,
            -inst.alpha[i][j],
        );
    }
    bld.complementarity(&arcs, &v, &lambda, &gamma, &z, &w, big_m, gamma_bound);
    for i in 0..n {
        let mut row = vec![(x[i], 1.0)];
        row.extend(bld.alloc_terms(&v, &arcs, i, -1.0));
        bld.prob.add_row("kirchhoff", row, RowSense::Eq, inst.x0[i]);
    }
    for i in 0..n {
        let (da, db) = demand_affine(inst, i);
        let (dd, pm) = (real.d0[i], inst.p_max[i]);
        // g_i = x_i + y_i - d_i = x_i - dd db p_i + (y_i - dd da)
        let g_const = real.y[i] - dd * da;
        bld.prob
            .add_row("beta_zero", vec![(beta[i][0], 1.0), (s[i], pm)], RowSense::Le, pm);
        // g_i >= -C (1 - s_i)
        bld.prob.add_row(
            "surplus",
            vec![(x[i], -1.0), (p[i], dd * db), (s[i], big_c)],
            RowSense::Le,
            g_const + big_c,
        );
        bld.prob.add_row(
            "beta_price",
            vec![(p[i], 1.0), (beta[i][0], -1.0), (t[i], pm)],
            RowSense::Le,
            pm,
        );
        // g_i <= C (1 - t_i)
        bld.prob.add_row(
            "shortage",
            vec![(x[i], 1.0), (p[i], -dd * db), (t[i], big_c)],
            RowSense::Le,
            big_c - g_const,
        );
        // -C (s_i + t_i) <= g_i <= C (s_i + t_i)
        bld.prob.add_row(
            "balance_upper",
            vec![(x[i], 1.0), (p[i], -dd * db), (s[i], -big_c), (t[i], -big_c)],
            RowSense::Le,
            -g_const,
        );
        bld.prob.add_row(
            "balance_lower",
            vec![(x[i], -1.0), (p[i], dd * db), (s[i], -big_c), (t[i], -big_c)],
            RowSense::Le,
            g_const,
        );
        bld.prob
            .add_row("region_choice", vec![(s[i], 1.0), (t[i], 1.0)], RowSense::Le, 1.0);
        bld.prob
            .add_row("beta_cap", vec![(beta[i][0], 1.0), (p[i], -1.0)], RowSense::Le, 0.0);
    }
    let xs = x.clone();
    let alloc = move |i: usize| (vec![(xs[i], 1.0)], 0.0);
    let wmin = add_objective(&mut bld.prob, inst, real, &p, &alloc);
    Ok(ReformArtifacts {
        mode: Mode::Sws,
        problem: bld.prob,
        vars: VarMap {
            p,
            arcs,
            v,
            lambda,
            z,
            gamma,
            w,
            wmin,
            beta,
            ws_regions: None,
            sws_regions: Some(SwsRegionVars { s, t, x }),
        },
        big_m,
        gamma_bound,
        big_c,
        inst: inst.clone(),
        real: real.clone(),
        belief: None,
        integer_flows: false,
    })
}

/// Marks the flow variables integer (bounds `[0, floor(x0_i)]`) or
/// continuous (`[0, x0_i]`).
pub fn set_integer_flows(mut art: ReformArtifacts, flag: bool) -> ReformArtifacts {
    for (k, &(i, _)) in art.vars.arcs.iter().enumerate() {
        let var = &mut art.problem.vars[art.vars.v[k]];
        if flag {
            var.kind = VarKind::Integer;
            var.upper = art.inst.x0[i].floor();
        } else {
            var.kind = VarKind::Continuous;
            var.upper = art.inst.x0[i];
        }
    }
    art.integer_flows = flag;
    art
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    pub prices: PriceVector,
    pub flows: FlowMatrix,
    pub lambda: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    /// Objective reported by the solver.
    pub reported: f64,
    /// Company revenue recomputed from prices and flows.
    pub recomputed: f64,
    pub relative_discrepancy: f64,
    /// `relative_discrepancy > 1e-6`.
    pub discrepancy: bool,
}

/// Reads prices, flows and multipliers from a solver point and re-evaluates
/// the company revenue.
pub fn extract(art: &ReformArtifacts, sol: &MibpSolution) -> Result<Extracted> {
    let x = sol
        .point
        .as_ref()
        .ok_or_else(|| EvsiError::Internal("solution has no incumbent point".into()))?;
    extract_point(art, x, sol.value)
}

pub fn extract_point(art: &ReformArtifacts, x: &[f64], reported: f64) -> Result<Extracted> {
    if x.len() != art.problem.num_vars() {
        return Err(EvsiError::Internal("point length does not match the problem".into()));
    }
    let inst = &art.inst;
    let n = inst.n;
    let get = |name: &str| {
        art.problem
            .find_var(name)
            .map(|j| x[j])
            .ok_or_else(|| EvsiError::Internal(format!("variable {name} missing from the problem")))
    };
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        p.push(get(&format!("p_{i}"))?.clamp(inst.p_min[i], inst.p_max[i]));
    }
    let mut flows = FlowMatrix::zeros(n);
    let mut lambda = vec![vec![0.0; n]; n];
    for &(i, j) in &art.vars.arcs {
        let mut f = get(&format!("v_{i}_{j}"))?.max(0.0);
        if art.integer_flows {
            f = f.round();
        }
        flows.v[i][j] = f;
        lambda[i][j] = get(&format!("lam_{i}_{j}"))?;
    }
    for i in 0..n {
        let out: f64 = flows.v[i].iter().sum();
        if out > inst.x0[i] {
            let scale = inst.x0[i] / out;
            flows.v[i].iter_mut().for_each(|a| *a *= scale);
        }
    }
    let gamma = (0..n).map(|i| get(&format!("gam_{i}"))).collect::<Result<Vec<f64>>>()?;
    let prices = PriceVector::new(p);
    let recomputed = leader_revenue(&prices, &flows, &art.real, inst)?;
    let relative_discrepancy = (recomputed - reported).abs() / reported.abs().max(1.0);
    Ok(Extracted {
        prices,
        flows,
        lambda,
        gamma,
        reported,
        recomputed,
        relative_discrepancy,
        discrepancy: relative_discrepancy > 1e-6,
    })
}

/// Builds a full point of the reformulation from prices and a follower
/// response, choosing multipliers by the best-fit optimality conditions.
/// The point is feasible when `v` is an optimal response to `p`.
pub fn lift(art: &ReformArtifacts, p: &PriceVector, v: &FlowMatrix) -> Result<Vec<f64>> {
    let inst = &art.inst;
    let n = inst.n;
    p.validate(inst)?;
    v.validate(&inst.x0)?;
    let info = match (&art.mode, &art.belief) {
        (Mode::Ws, Some(b)) => FollowerInfo::Belief(b),
        (Mode::Sws, _) => FollowerInfo::Shared(&art.real),
        _ => return Err(domain("belief-model artifacts without a belief")),
    };
    let fit = kkt_fit(p, v, info, inst)?;
    let mut pt = vec![0.0; art.problem.num_vars()];
    let vars = &art.vars;
    for i in 0..n {
        pt[vars.p[i]] = p.p[i];
    }
    let x = allocate_unchecked(&inst.x0, v);
    const ZERO: f64 = 1e-9;
    for (k, &(i, j)) in vars.arcs.iter().enumerate() {
        pt[vars.v[k]] = v.v[i][j];
        let idle = v.v[i][j] <= ZERO;
        pt[vars.z[k]] = if idle { 1.0 } else { 0.0 };
        pt[vars.lambda[k]] = if idle { fit.lambda[i][j].min(art.big_m) } else { 0.0 };
    }
    for i in 0..n {
        let slack = inst.x0[i] - v.v[i].iter().sum::<f64>();
        let tight = slack <= ZERO * (1.0 + inst.x0[i]);
        pt[vars.w[i]] = if tight { 1.0 } else { 0.0 };
        pt[vars.gamma[i]] = if tight { fit.gamma[i].min(art.gamma_bound) } else { 0.0 };
        let d = demand_unchecked(p.p[i], art.real.d0[i], inst, i);
        pt[vars.wmin[i]] = (x[i] + art.real.y[i]).min(d).max(0.0);
    }
    match art.mode {
        Mode::Ws => {
            let belief = art.belief.as_ref().unwrap();
            let reg = vars.ws_regions.as_ref().unwrap();
            for i in 0..n {
                for k in 0..belief.m {
                    let d = demand_unchecked(p.p[i], belief.d0_belief[i][k], inst, i);
                    let g = d - x[i];
                    let cp = inst.c * belief.prob[k];
                    let (a, b, c) = if g <= 0.0 {
                        pt[reg.r[i][k]] = g;
                        (1.0, 0.0, 0.0)
                    } else if g <= inst.ybar {
                        pt[reg.s[i][k]] = g;
                        (0.0, 1.0, 0.0)
                    } else {
                        pt[reg.t[i][k]] = g;
                        (0.0, 0.0, 1.0)
                    };
                    pt[reg.a[i][k]] = a;
                    pt[reg.b[i][k]] = b;
                    pt[reg.c[i][k]] = c;
                    pt[vars.beta[i][k]] = -cp * (pt[reg.s[i][k]] / inst.ybar + c);
                }
            }
        }
        Mode::Sws => {
            let reg = vars.sws_regions.as_ref().unwrap();
            for i in 0..n {
                pt[reg.x[i]] = x[i];
                pt[vars.beta[i][0]] = fit.beta[i];
                let (s, t) = match fit.regions[i] {
                    BetaRegion::Zero => (1.0, 0.0),
                    BetaRegion::Pi => (0.0, 1.0),
                    BetaRegion::Interval => (0.0, 0.0),
                };
                pt[reg.s[i]] = s;
                pt[reg.t[i]] = t;
            }
        }
    }
    Ok(pt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (CityInstance, Realization) {
        let inst = CityInstance {
            n: 3,
            alpha: vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]],
            p_min: vec![2.5; 3],
            p_max: vec![12.5; 3],
            c: 0.75,
            delta: 0.9,
            x0: vec![30.0, 50.0, 20.0],
            ybar: 40.0,
        };
        let real = Realization {
            y: vec![10.0, 5.0, 30.0],
            d0: vec![80.0, 20.0, 60.0],
        };
        (inst, real)
    }

    #[test]
    fn integer_flag_toggles_kinds() {
        let (inst, real) = small();
        let art = build_sws(&inst, &real).unwrap();
        let on = set_integer_flows(art, true);
        assert!(on.vars.v.iter().all(|&j| on.problem.vars[j].kind == VarKind::Integer));
        let off = set_integer_flows(on, false);
        assert!(off
            .vars
            .v
            .iter()
            .all(|&j| off.problem.vars[j].kind == VarKind::Continuous));
    }

    #[test]
    fn names_are_unique() {
        let (inst, real) = small();
        let belief = FollowerBelief::scaled(&real.d0, &[0.7, 1.0, 1.3], &[0.25, 0.5, 0.25]);
        for art in [
            build_ws(&inst, &belief, &real).unwrap(),
            build_sws(&inst, &real).unwrap(),
        ] {
            let mut names: Vec<&str> = art.problem.vars.iter().map(|v| v.name.as_str()).collect();
            names.sort();
            let before = names.len();
            names.dedup();
            assert_eq!(before, names.len());
            art.problem.validate().unwrap();
        }
    }
}
