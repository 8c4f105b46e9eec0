//! Brute-force validators that bypass the single-level reformulation.
//!
//! The leader search evaluates company revenue at the drivers' response on a
//! coarse price grid and refines the best points by a pattern search. The
//! drivers' search enumerates a grid of feasible flows. Both are slow and
//! only certify lower bounds, which is what the cross-checks need.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::follower::{optimistic_response, scenario_response, shared_cost, FollowerInfo};
use crate::model::{
    follower_cost_scenario, leader_revenue, CityInstance, FlowMatrix, FollowerBelief, Mode, PriceVector, Realization,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Grid points per price axis.
    pub grid: usize,
    /// Refinement stops once the step falls below this fraction of the price range.
    pub min_step: f64,
    /// Number of best grid points refined.
    pub starts: usize,
    pub max_evaluations: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            grid: 9,
            min_step: 1e-3,
            starts: 4,
            max_evaluations: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub prices: PriceVector,
    pub flows: FlowMatrix,
    pub value: f64,
    pub evaluations: usize,
    /// The evaluation budget ran out before refinement finished.
    pub exhausted: bool,
}

struct Evaluator<'a> {
    inst: &'a CityInstance,
    real: &'a Realization,
    belief: Option<&'a FollowerBelief>,
    mode: Mode,
}

impl Evaluator<'_> {
    fn eval(&self, p: &[f64]) -> Result<(f64, FlowMatrix)> {
        match self.mode {
            Mode::Sws => {
                let (v, revenue, _) = optimistic_response(p, self.real, self.inst)?;
                Ok((revenue, v))
            }
            Mode::Ws => {
                let belief = self.belief.expect("checked on entry");
                let sol = scenario_response(p, belief, self.inst);
                let revenue = leader_revenue(&PriceVector::new(p.to_vec()), &sol.v, self.real, self.inst)?;
                Ok((revenue, sol.v))
            }
        }
    }
}

/// Grid search over the price box followed by a pattern search over axis and diagonal moves.
///
/// `belief` is required in WS mode and ignored in SWS mode.
pub fn bilevel_oracle(
    inst: &CityInstance,
    real: &Realization,
    belief: Option<&FollowerBelief>,
    mode: Mode,
    budget: &OracleBudget,
) -> Result<OracleResult> {
    inst.validate()?;
    real.validate(inst.n)?;
    if mode == Mode::Ws {
        match belief {
            Some(b) => b.validate(inst.n)?,
            None => return Err(domain("WS mode needs a driver belief")),
        }
    }
    if budget.grid < 2 || budget.starts == 0 || !(budget.min_step > 0.0) {
        return Err(domain(
            "oracle budget needs at least two grid points, one start and a positive step",
        ));
    }
    let n = inst.n;
    let ev = Evaluator {
        inst,
        real,
        belief,
        mode,
    };
    let g = budget.grid;
    let total = g.checked_pow(n as u32).filter(|&t| t <= budget.max_evaluations);
    let total = match total {
        Some(t) => t,
        None => return Err(domain("price grid exceeds the evaluation budget")),
    };
    let point = |mut idx: usize| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let k = idx % g;
                idx /= g;
                inst.p_min[i] + (inst.p_max[i] - inst.p_min[i]) * k as f64 / (g - 1) as f64
            })
            .collect()
    };
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| ev.eval(&point(idx)).map(|(r, _)| r))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..total).collect();
    // Stable sort keeps ties in grid order.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut evaluations = total;
    let mut exhausted = false;

    // Axis moves first, then diagonals: revenue has ridges along the lines
    // where supply meets demand, which axis moves alone cannot follow.
    let mut directions: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
        .map(|mut c| {
            (0..n)
                .map(|_| {
                    let d = (c % 3) as f64 - 1.0;
                    c /= 3;
                    d
                })
                .collect::<Vec<f64>>()
        })
        .filter(|d| d.iter().any(|&x| x != 0.0))
        .collect();
    directions.sort_by_key(|d| d.iter().filter(|&&x| x != 0.0).count());

    let starts: Vec<usize> = order.into_iter().take(budget.starts).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for &s in &starts {
        let mut p = point(s);
        let mut val = values[s];
        let mut step: Vec<f64> = (0..n)
            .map(|i| (inst.p_max[i] - inst.p_min[i]) / (g - 1) as f64 / 2.0)
            .collect();
        let stop: Vec<f64> = (0..n)
            .map(|i| budget.min_step * (inst.p_max[i] - inst.p_min[i]))
            .collect();
        'refine: loop {
            let mut improved = false;
            let mut base = p.clone();
            for dir in &directions {
                let q: Vec<f64> = (0..n)
                    .map(|i| (p[i] + dir[i] * step[i]).clamp(inst.p_min[i], inst.p_max[i]))
                    .collect();
                if q == p {
                    continue;
                }
                if evaluations >= budget.max_evaluations {
                    exhausted = true;
                    break 'refine;
                }
                evaluations += 1;
                let (r, _) = ev.eval(&q)?;
                if r > val {
                    val = r;
                    p = q;
                    improved = true;
                }
            }
            // Hooke-Jeeves pattern moves: keep extrapolating the last
            // successful displacement while it pays.
            while improved && evaluations < budget.max_evaluations {
                let q: Vec<f64> = (0..n)
                    .map(|i| (2.0 * p[i] - base[i]).clamp(inst.p_min[i], inst.p_max[i]))
                    .collect();
                if q == p {
                    break;
                }
                evaluations += 1;
                let (r, _) = ev.eval(&q)?;
                if r <= val {
                    break;
                }
                val = r;
                base = std::mem::replace(&mut p, q);
            }
            if !improved {
                if (0..n).all(|i| step[i] <= stop[i]) {
                    break;
                }
                for (s, &lo) in step.iter_mut().zip(&stop) {
                    *s = (*s / 2.0).max(lo.min(*s));
                }
            }
        }
        if best.as_ref().is_none_or(|(b, _)| val > *b) {
            best = Some((val, p));
        }
    }
    let (value, p) = best.expect("at least one start");
    let (_, flows) = ev.eval(&p)?;
    Ok(OracleResult {
        prices: PriceVector::new(p),
        flows,
        value,
        evaluations,
        exhausted,
    })
}

/// Resolution of the flow grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowGrid {
    /// Every integer flow; zone supplies must be integral.
    Integer,
    /// `k + 1` evenly spaced levels per arc between 0 and the zone supply.
    Steps(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub value: f64,
    pub flows: FlowMatrix,
    pub points: usize,
}

/// Minimum drivers' cost over a grid of feasible flows.
///
/// Points whose outflow exceeds the zone supply are skipped. Meant for n of
/// 2 or 3; the point count grows as levels^(n(n-1)).
pub fn follower_grid_oracle(
    p: &PriceVector,
    inst: &CityInstance,
    info: FollowerInfo<'_>,
    grid: FlowGrid,
) -> Result<GridOptimum> {
    inst.validate()?;
    p.validate(inst)?;
    match info {
        FollowerInfo::Shared(r) => r.validate(inst.n)?,
        FollowerInfo::Belief(b) => b.validate(inst.n)?,
    }
    let n = inst.n;
    let arcs = inst.arcs();
    let levels: Vec<Vec<f64>> = arcs
        .iter()
        .map(|&(i, _)| {
            let cap = inst.x0[i];
            match grid {
                FlowGrid::Integer => {
                    if cap.fract() != 0.0 {
                        return Err(domain("integer enumeration needs integral supplies"));
                    }
                    Ok((0..=cap as usize).map(|k| k as f64).collect())
                }
                FlowGrid::Steps(k) if k >= 1 => Ok((0..=k).map(|l| cap * l as f64 / k as f64).collect()),
                FlowGrid::Steps(_) => Err(domain("grid needs at least one step")),
            }
        })
        .collect::<Result<_>>()?;
    let count: f64 = levels.iter().map(|l| l.len() as f64).product();
    if count > 5e7 {
        return Err(domain("flow grid too large"));
    }
    let cost = |v: &FlowMatrix| -> f64 {
        match info {
            FollowerInfo::Shared(r) => shared_cost(&p.p, v, r, inst),
            FollowerInfo::Belief(b) => follower_cost_scenario(p, v, b, inst, &inst.x0).expect("validated inputs"),
        }
    };
    let mut best = GridOptimum {
        value: f64::INFINITY,
        flows: FlowMatrix::zeros(n),
        points: 0,
    };
    let mut idx = vec![0usize; arcs.len()];
    let mut v = FlowMatrix::zeros(n);
    loop {
        let mut out = vec![0.0; n];
        for (k, &(i, j)) in arcs.iter().enumerate() {
            v.v[i][j] = levels[k][idx[k]];
            out[i] += v.v[i][j];
        }
        if out.iter().zip(&inst.x0).all(|(o, x)| *o <= x * (1.0 + 1e-12)) {
            best.points += 1;
            let c = cost(&v);
            if c < best.value {
                best.value = c;
                best.flows = v.clone();
            }
        }
        // Odometer increment.
        let mut k = 0;
        loop {
            if k == arcs.len() {
                return Ok(best);
            }
            idx[k] += 1;
            if idx[k] < levels[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
