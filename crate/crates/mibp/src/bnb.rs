//! Best-first branch-and-bound for mixed-integer bilinear programs.
//!
//! Every node relaxes each distinct product `x_a * x_b` by an auxiliary
//! column and its McCormick envelope under the node's bounds, after a few
//! rounds of interval bound tightening over the linear rows. Branching is on
//! the most fractional integer variable, otherwise spatially on a factor of
//! the product whose envelope is violated the most.
//!
//! Incumbents come from three places: relaxation points that already satisfy
//! integrality and all products, a cheap rounding heuristic that fixes one
//! factor of every product (which makes the problem linear) and alternates
//! between the two factor sets, and a small sub-MIP over the same linearized
//! problem with the integers left free.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::MibpError;
use crate::lp::{self, Basis, LinearProgram, LpRow, LpStatus, Sense};
use crate::mccormick::{mccormick, product_bounds};
use crate::problem::{MibpProblem, TermLocation, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegerBranching {
    MostFractional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpatialBranching {
    LargestViolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative gap `(bound - value) / max(1, |value|)` at which the search stops.
    pub rel_gap: f64,
    /// Scaled row and bound violation accepted for incumbents.
    pub feas_tol: f64,
    pub int_tol: f64,
    pub node_limit: usize,
    /// Wall-clock limit in seconds. Hitting it makes the result timing
    /// dependent; use `node_limit` for reproducible runs.
    pub time_limit: Option<f64>,
    pub integer_branching: IntegerBranching,
    pub spatial_branching: SpatialBranching,
    /// Recorded with results; the search itself has no random choices.
    pub seed: u64,
    /// Run the rounding heuristic every this many nodes (0 disables).
    pub heuristic_every: usize,
    /// Node budget of the sub-MIP heuristic (0 disables).
    pub sub_mip_nodes: usize,
    /// Maximum number of consecutive child nodes processed before going
    /// back to the best-bound node.
    pub plunge_depth: usize,
    /// Keep a per-node log in the solution.
    pub record_nodes: bool,
    /// Emit a log line every this many nodes (0 disables).
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            feas_tol: 1e-7,
            int_tol: 1e-6,
            node_limit: 500_000,
            time_limit: None,
            integer_branching: IntegerBranching::MostFractional,
            spatial_branching: SpatialBranching::LargestViolation,
            seed: 0,
            heuristic_every: 25,
            sub_mip_nodes: 400,
            plunge_depth: 30,
            record_nodes: false,
            log_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), MibpError> {
        if !(self.rel_gap > 0.0 && self.feas_tol > 0.0 && self.int_tol > 0.0) {
            return Err(MibpError::Invalid("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    NodeLimit,
    TimeLimit,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeLog {
    pub node: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub relaxation: f64,
    pub parent_relaxation: f64,
    pub incumbent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MibpSolution {
    pub status: SolveStatus,
    pub point: Option<Vec<f64>>,
    /// Incumbent value (`-inf` when none was found).
    pub value: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(skip)]
    pub node_log: Vec<NodeLog>,
}

impl MibpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.point.is_some()
    }
}

pub fn gap(bound: f64, value: f64) -> f64 {
    if !value.is_finite() {
        return f64::INFINITY;
    }
    ((bound - value) / value.abs().max(1.0)).max(0.0)
}

pub fn solve(problem: &MibpProblem, config: &SolverConfig) -> Result<MibpSolution, MibpError> {
    solve_with_start(problem, config, None)
}

/// Like [`solve`], seeding the incumbent with `start` when it is feasible.
pub fn solve_with_start(
    problem: &MibpProblem,
    config: &SolverConfig,
    start: Option<&[f64]>,
) -> Result<MibpSolution, MibpError> {
    problem.validate()?;
    config.validate()?;
    let mut search = Search::new(problem, config, true);
    if let Some(x) = start {
        if x.len() == problem.num_vars() {
            search.offer(x.to_vec());
        }
    }
    Ok(search.run())
}

/// Relaxation structure shared by all nodes.
struct Template {
    n: usize,
    pairs: Vec<(usize, usize)>,
    objective: Vec<f64>,
    rows: Vec<LpRow>,
    kinds: Vec<VarKind>,
}

impl Template {
    fn new(problem: &MibpProblem) -> Self {
        let n = problem.num_vars();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut pair_of_term = Vec::with_capacity(problem.bilinear.len());
        for t in &problem.bilinear {
            let key = if t.a <= t.b { (t.a, t.b) } else { (t.b, t.a) };
            let k = match pairs.iter().position(|&p| p == key) {
                Some(k) => k,
                None => {
                    pairs.push(key);
                    pairs.len() - 1
                }
            };
            pair_of_term.push(k);
        }
        let total = n + pairs.len();
        let mut objective = vec![0.0; total];
        for &(j, c) in &problem.objective {
            objective[j] += c;
        }
        let mut rows: Vec<LpRow> = problem
            .rows
            .iter()
            .map(|r| LpRow {
                coeffs: r.coeffs.clone(),
                sense: r.sense,
                rhs: r.rhs,
            })
            .collect();
        for (t, &k) in problem.bilinear.iter().zip(&pair_of_term) {
            match t.location {
                TermLocation::Objective => objective[n + k] += t.coef,
                TermLocation::Row(r) => rows[r].coeffs.push((n + k, t.coef)),
            }
        }
        for row in rows.iter_mut() {
            row.coeffs.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
            for &(j, a) in &row.coeffs {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += a,
                    _ => merged.push((j, a)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            row.coeffs = merged;
        }
        let mut kinds: Vec<VarKind> = problem.vars.iter().map(|v| v.kind).collect();
        kinds.extend(std::iter::repeat_n(VarKind::Continuous, pairs.len()));
        Self {
            n,
            pairs,
            objective,
            rows,
            kinds,
        }
    }

    fn total(&self) -> usize {
        self.n + self.pairs.len()
    }

    /// Interval tightening over the linear rows and the product hulls.
    /// Returns false when the box is empty.
    fn propagate(&self, lo: &mut [f64], up: &mut [f64], int_tol: f64, rounds: usize) -> bool {
        let n = self.n;
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            let (pl, ph) = product_bounds(lo[a], up[a], lo[b], up[b]);
            lo[n + k] = pl;
            up[n + k] = ph;
        }
        for _ in 0..rounds {
            let mut changed = false;
            for row in &self.rows {
                let senses: &[f64] = match row.sense {
                    Sense::Le => &[1.0],
                    Sense::Eq => &[1.0, -1.0],
                };
                for &sgn in senses {
                    let rhs = sgn * row.rhs;
                    let mut minact = 0.0;
                    let mut mag: f64 = rhs.abs();
                    for &(j, a) in &row.coeffs {
                        let a = sgn * a;
                        let m = if a > 0.0 { a * lo[j] } else { a * up[j] };
                        minact += m;
                        mag = mag.max(m.abs()).max((a * up[j]).abs()).max((a * lo[j]).abs());
                    }
                    let slack_tol = 1e-9 * (1.0 + mag);
                    if minact > rhs + 1e-7 * (1.0 + mag) {
                        return false;
                    }
                    for &(j, a) in &row.coeffs {
                        let a = sgn * a;
                        if a.abs() < 1e-12 {
                            continue;
                        }
                        let own = if a > 0.0 { a * lo[j] } else { a * up[j] };
                        let rest = minact - own;
                        let room = (rhs - rest + slack_tol) / a;
                        let width = up[j] - lo[j];
                        let min_gain = 1e-6 * (1.0 + width);
                        if a > 0.0 {
                            let mut nu = room;
                            if self.kinds[j].is_integral() {
                                nu = (nu + int_tol).floor();
                            }
                            if nu < up[j] - min_gain {
                                up[j] = nu;
                                changed = true;
                            }
                        } else {
                            let mut nl = room;
                            if self.kinds[j].is_integral() {
                                nl = (nl - int_tol).ceil();
                            }
                            if nl > lo[j] + min_gain {
                                lo[j] = nl;
                                changed = true;
                            }
                        }
                        if lo[j] > up[j] {
                            if lo[j] - up[j] <= 1e-7 * (1.0 + lo[j].abs()) {
                                let mid = 0.5 * (lo[j] + up[j]);
                                lo[j] = mid;
                                up[j] = mid;
                            } else {
                                return false;
                            }
                        }
                    }
                }
            }
            for (k, &(a, b)) in self.pairs.iter().enumerate() {
                let (pl, ph) = product_bounds(lo[a], up[a], lo[b], up[b]);
                if pl > lo[n + k] {
                    lo[n + k] = pl;
                }
                if ph < up[n + k] {
                    up[n + k] = ph;
                }
                if lo[n + k] > up[n + k] {
                    if lo[n + k] - up[n + k] <= 1e-7 * (1.0 + lo[n + k].abs()) {
                        let mid = 0.5 * (lo[n + k] + up[n + k]);
                        lo[n + k] = mid;
                        up[n + k] = mid;
                    } else {
                        return false;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        true
    }

    fn node_lp(&self, lo: &[f64], up: &[f64]) -> LinearProgram {
        let n = self.n;
        let mut rows = self.rows.clone();
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            for cut in mccormick(lo[a], up[a], lo[b], up[b]) {
                rows.push(LpRow {
                    coeffs: vec![(n + k, cut.cw), (a, cut.cx), (b, cut.cy)],
                    sense: Sense::Le,
                    rhs: cut.rhs,
                });
            }
        }
        LinearProgram {
            objective: self.objective.clone(),
            lower: lo.to_vec(),
            upper: up.to_vec(),
            rows,
        }
    }
}

struct Node {
    id: usize,
    parent: Option<usize>,
    depth: usize,
    bound: f64,
    lo: Vec<f64>,
    up: Vec<f64>,
    basis: Option<Basis>,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .bound
            .total_cmp(&other.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    problem: &'a MibpProblem,
    config: &'a SolverConfig,
    template: Template,
    cover: Vec<usize>,
    cover_alt: Vec<usize>,
    allow_sub_mip: bool,
    incumbent: Option<Vec<f64>>,
    incumbent_value: f64,
    next_id: usize,
    nodes: usize,
    unresolved_bound: f64,
    /// Largest bound among nodes discarded within the gap tolerance.
    pruned_bound: f64,
    node_log: Vec<NodeLog>,
    start: Instant,
}

impl<'a> Search<'a> {
    fn new(problem: &'a MibpProblem, config: &'a SolverConfig, allow_sub_mip: bool) -> Self {
        let template = Template::new(problem);
        let (cover, cover_alt) = covers(problem.num_vars(), &template.pairs);
        Self {
            problem,
            config,
            template,
            cover,
            cover_alt,
            allow_sub_mip,
            incumbent: None,
            incumbent_value: f64::NEG_INFINITY,
            next_id: 0,
            nodes: 0,
            unresolved_bound: f64::NEG_INFINITY,
            pruned_bound: f64::NEG_INFINITY,
            node_log: Vec::new(),
            start: Instant::now(),
        }
    }

    fn abs_gap(&self) -> f64 {
        self.config.rel_gap * self.incumbent_value.abs().max(1.0)
    }

    /// Accepts `x` as incumbent when it is feasible and improving.
    fn offer(&mut self, mut x: Vec<f64>) -> bool {
        for (j, v) in self.problem.vars.iter().enumerate() {
            if v.kind.is_integral() && (x[j] - x[j].round()).abs() <= self.config.int_tol * 10.0 {
                x[j] = x[j].round();
            }
            x[j] = x[j].clamp(v.lower, v.upper);
        }
        if self.problem.max_violation(&x) > self.config.feas_tol {
            return false;
        }
        let value = self.problem.evaluate(&x);
        if value > self.incumbent_value + 1e-12 * value.abs().max(1.0) {
            self.incumbent_value = value;
            self.incumbent = Some(x);
            true
        } else {
            false
        }
    }

    fn root(&mut self) -> Node {
        let id = self.fresh_id();
        let lo: Vec<f64> = self.problem.vars.iter().map(|v| v.lower).collect();
        let up: Vec<f64> = self.problem.vars.iter().map(|v| v.upper).collect();
        Node {
            id,
            parent: None,
            depth: 0,
            bound: f64::INFINITY,
            lo,
            up,
            basis: None,
        }
    }

    fn fresh_id(&mut self) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn out_of_time(&self) -> bool {
        match self.config.time_limit {
            Some(t) => self.start.elapsed().as_secs_f64() > t,
            None => false,
        }
    }

    fn run(mut self) -> MibpSolution {
        let mut heap: BinaryHeap<Queued> = BinaryHeap::new();
        let mut plunge: Option<Node> = Some(self.root());
        let mut plunge_len = 0usize;
        let mut stop: Option<SolveStatus> = None;
        loop {
            let node = match plunge.take() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(Queued(n)) => {
                        plunge_len = 0;
                        n
                    }
                    None => break,
                },
            };
            if node.bound <= self.incumbent_value + self.abs_gap() {
                self.pruned_bound = self.pruned_bound.max(node.bound);
                continue;
            }
            let open_best = heap.peek().map(|q| q.0.bound).unwrap_or(f64::NEG_INFINITY);
            let global = node.bound.max(open_best).max(self.unresolved_bound);
            if global.is_finite() && self.incumbent.is_some() && global - self.incumbent_value <= self.abs_gap() {
                heap.push(Queued(node));
                break;
            }
            if self.nodes >= self.config.node_limit {
                heap.push(Queued(node));
                stop = Some(SolveStatus::NodeLimit);
                break;
            }
            if self.out_of_time() {
                heap.push(Queued(node));
                stop = Some(SolveStatus::TimeLimit);
                break;
            }
            self.nodes += 1;
            if self.config.log_every > 0 && self.nodes.is_multiple_of(self.config.log_every) {
                let bound = global.max(self.incumbent_value);
                log::info!(
                    "node {:>8} open {:>7} bound {:>16.6} incumbent {:>16.6} gap {:>10.3e}",
                    self.nodes,
                    heap.len(),
                    bound,
                    self.incumbent_value,
                    gap(bound, self.incumbent_value)
                );
            }
            let children = self.process(node);
            let mut kids = children.into_iter();
            if let Some(first) = kids.next() {
                for other in kids {
                    heap.push(Queued(other));
                }
                if plunge_len < self.config.plunge_depth {
                    plunge_len += 1;
                    plunge = Some(first);
                } else {
                    heap.push(Queued(first));
                }
            }
            if heap.len() > 50_000 {
                // Keep memory bounded on long searches.
                let drained: Vec<Queued> = heap.drain().collect();
                heap = drained
                    .into_iter()
                    .map(|mut q| {
                        q.0.basis = None;
                        q
                    })
                    .collect();
            }
        }
        let open_best = heap.iter().map(|q| q.0.bound).fold(f64::NEG_INFINITY, f64::max);
        let mut bound = open_best.max(self.unresolved_bound);
        if self.incumbent.is_some() {
            bound = bound.max(self.pruned_bound.min(self.incumbent_value + self.abs_gap()));
        }
        if self.incumbent.is_some() {
            bound = bound.max(self.incumbent_value);
        }
        let g = gap(bound, self.incumbent_value);
        let status = match stop {
            Some(s) if g > self.config.rel_gap => s,
            _ => {
                if self.incumbent.is_none() {
                    if bound.is_finite() {
                        SolveStatus::GapLimit
                    } else {
                        SolveStatus::Infeasible
                    }
                } else if g <= self.config.rel_gap {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                }
            }
        };
        MibpSolution {
            status,
            point: self.incumbent,
            value: self.incumbent_value,
            bound: if bound.is_finite() { bound } else { self.incumbent_value },
            gap: g,
            nodes: self.nodes,
            wall_time: self.start.elapsed().as_secs_f64(),
            node_log: self.node_log,
        }
    }

    /// Solves one node and returns its children.
    fn process(&mut self, node: Node) -> Vec<Node> {
        let n = self.template.n;
        let total = self.template.total();
        let mut lo = node.lo.clone();
        let mut up = node.up.clone();
        lo.resize(total, 0.0);
        up.resize(total, 0.0);
        if !self.template.propagate(&mut lo, &mut up, self.config.int_tol, 4) {
            return Vec::new();
        }
        let lp_problem = self.template.node_lp(&lo, &up);
        let mut sol = lp::solve_warm(&lp_problem, node.basis.as_ref());
        if sol.status == LpStatus::IterationLimit || sol.status == LpStatus::Unbounded {
            sol = lp::solve(&lp_problem);
        }
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Vec::new(),
            _ => {
                // Numerical failure: keep the parent's bound as unresolved.
                log::warn!("relaxation failed at node {} ({:?})", node.id, sol.status);
                self.unresolved_bound = self.unresolved_bound.max(node.bound);
                return Vec::new();
            }
        }
        let relaxation = sol.value + self.problem.objective_constant;
        if self.config.record_nodes {
            self.node_log.push(NodeLog {
                node: node.id,
                parent: node.parent,
                depth: node.depth,
                relaxation,
                parent_relaxation: node.bound,
                incumbent: self.incumbent_value,
            });
        }
        let bound = relaxation.min(node.bound);
        if bound <= self.incumbent_value + self.abs_gap() {
            self.pruned_bound = self.pruned_bound.max(bound);
            return Vec::new();
        }
        let x = &sol.x;

        // Integer infeasibility.
        let mut frac_var: Option<(usize, f64)> = None;
        for j in 0..n {
            if self.template.kinds[j].is_integral() {
                let f = x[j] - x[j].floor();
                let dist = f.min(1.0 - f);
                if dist > self.config.int_tol {
                    let score = 0.5 - (f - 0.5).abs();
                    if frac_var.is_none_or(|(_, s)| score > s + 1e-12) {
                        frac_var = Some((j, score));
                    }
                }
            }
        }
        // Envelope violation.
        let mut worst_pair: Option<(usize, f64)> = None;
        for (k, &(a, b)) in self.template.pairs.iter().enumerate() {
            let prod = x[a] * x[b];
            let viol = (x[n + k] - prod).abs() / prod.abs().max(x[n + k].abs()).max(1.0);
            if viol > self.config.feas_tol * 0.1 && worst_pair.is_none_or(|(_, v)| viol > v) {
                worst_pair = Some((k, viol));
            }
        }

        let point: Vec<f64> = x[..n].to_vec();
        // An integral, product-exact point that still fails the scaled
        // feasibility check falls through to spatial branching.
        if frac_var.is_none() && worst_pair.is_none() && self.offer(point.clone()) {
            return Vec::new();
        }

        let run_heuristic = node.depth == 0
            || frac_var.is_none()
            || (self.config.heuristic_every > 0 && self.nodes.is_multiple_of(self.config.heuristic_every));
        if run_heuristic {
            self.rounding_heuristic(&lo[..n], &up[..n], &point);
            if node.depth == 0
                || (self.incumbent.is_none()
                    && self.config.heuristic_every > 0
                    && self.nodes % (self.config.heuristic_every * 4) == 1)
            {
                self.sub_mip_heuristic(&lo[..n], &up[..n], &point);
            }
            if bound <= self.incumbent_value + self.abs_gap() {
                self.pruned_bound = self.pruned_bound.max(bound);
                return Vec::new();
            }
        }

        let basis = sol.basis.clone();
        let make_child = |me: &mut Self, clo: Vec<f64>, cup: Vec<f64>| Node {
            id: me.fresh_id(),
            parent: Some(node.id),
            depth: node.depth + 1,
            bound,
            lo: clo,
            up: cup,
            basis: basis.clone(),
        };

        if let Some((j, _)) = frac_var {
            let v = x[j];
            let down_up = v.floor();
            let mut lo_a = lo[..n].to_vec();
            let mut up_a = up[..n].to_vec();
            up_a[j] = down_up;
            let mut lo_b = lo[..n].to_vec();
            let up_b = up[..n].to_vec();
            lo_b[j] = down_up + 1.0;
            lo_a.truncate(n);
            let down = make_child(self, lo_a, up_a);
            let upc = make_child(self, lo_b, up_b);
            return if v - v.floor() < 0.5 {
                vec![down, upc]
            } else {
                vec![upc, down]
            };
        }

        let pick = worst_pair.map(|(k, _)| k).or_else(|| {
            // Exact products but scaled infeasible: split the widest factor.
            self.template
                .pairs
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    let wa = (up[a.1 .0] - lo[a.1 .0]).max(up[a.1 .1] - lo[a.1 .1]);
                    let wb = (up[b.1 .0] - lo[b.1 .0]).max(up[b.1 .1] - lo[b.1 .1]);
                    wa.total_cmp(&wb)
                })
                .map(|(k, _)| k)
        });
        let Some(k) = pick else {
            self.unresolved_bound = self.unresolved_bound.max(bound);
            return Vec::new();
        };
        let (a, b) = self.template.pairs[k];
        let rel_width = |j: usize| {
            let v = &self.problem.vars[j];
            let full = (v.upper - v.lower).max(1e-300);
            (up[j] - lo[j]) / full
        };
        let (wa, wb) = (rel_width(a), rel_width(b));
        let var = if wa >= wb { a } else { b };
        let width = up[var] - lo[var];
        let min_width = 1e-9 * (1.0 + lo[var].abs().max(up[var].abs()));
        if width <= min_width || (self.template.kinds[var].is_integral() && width < 1.0) {
            self.unresolved_bound = self.unresolved_bound.max(bound);
            return Vec::new();
        }
        let mut split = x[var].clamp(lo[var] + 0.2 * width, up[var] - 0.2 * width);
        let (mut lo_a, mut up_a) = (lo[..n].to_vec(), up[..n].to_vec());
        let (mut lo_b, up_b) = (lo[..n].to_vec(), up[..n].to_vec());
        if self.template.kinds[var].is_integral() {
            split = split.floor().clamp(lo[var], up[var] - 1.0);
            up_a[var] = split;
            lo_b[var] = split + 1.0;
        } else {
            up_a[var] = split;
            lo_b[var] = split;
        }
        lo_a.truncate(n);
        let left = make_child(self, lo_a, up_a);
        let right = make_child(self, lo_b, up_b);
        vec![left, right]
    }

    /// Fix integers at their rounded relaxation values and one factor of
    /// every product, solve the resulting LP, then alternate the fixed
    /// factor set while the value improves.
    fn rounding_heuristic(&mut self, lo: &[f64], up: &[f64], x: &[f64]) {
        let n = self.template.n;
        let mut flo = lo.to_vec();
        let mut fup = up.to_vec();
        for j in 0..n {
            if self.template.kinds[j].is_integral() {
                let r = x[j].round().clamp(lo[j], up[j]);
                flo[j] = r;
                fup[j] = r;
            }
        }
        let mut current = x.to_vec();
        let mut best = f64::NEG_INFINITY;
        for pass in 0..6 {
            let cover = if pass % 2 == 0 { &self.cover } else { &self.cover_alt };
            let (mut plo, mut pup) = (flo.clone(), fup.clone());
            for &j in cover {
                let v = current[j].clamp(lo[j], up[j]);
                plo[j] = v;
                pup[j] = v;
            }
            let Some((lpp, constant)) = linearize(self.problem, &plo, &pup) else {
                break;
            };
            let sol = lp::solve(&lpp);
            if sol.status != LpStatus::Optimal {
                if pass == 0 {
                    continue;
                }
                break;
            }
            let value = sol.value + constant;
            current = sol.x.clone();
            self.offer(sol.x);
            if value <= best + 1e-9 * value.abs().max(1.0) {
                break;
            }
            best = value;
        }
    }

    /// Fix one factor of every product at its relaxation value and solve the
    /// remaining mixed-integer linear program with a small node budget.
    fn sub_mip_heuristic(&mut self, lo: &[f64], up: &[f64], x: &[f64]) {
        if !self.allow_sub_mip || self.config.sub_mip_nodes == 0 || self.template.pairs.is_empty() {
            return;
        }
        for cover in [self.cover.clone(), self.cover_alt.clone()] {
            let mut sub = self.problem.clone();
            for (j, v) in sub.vars.iter_mut().enumerate() {
                v.lower = lo[j];
                v.upper = up[j];
            }
            for &j in &cover {
                let val = x[j].clamp(lo[j], up[j]);
                sub.vars[j].lower = val;
                sub.vars[j].upper = val;
            }
            let Some(sub) = linearize_problem(&sub) else {
                continue;
            };
            let cfg = SolverConfig {
                node_limit: self.config.sub_mip_nodes,
                sub_mip_nodes: 0,
                record_nodes: false,
                log_every: 0,
                time_limit: None,
                ..self.config.clone()
            };
            let mut inner = Search::new(&sub, &cfg, false);
            if let Some(inc) = &self.incumbent {
                // Only a cutoff: the inner search must beat the incumbent.
                inner.incumbent_value = self.problem.evaluate(inc);
            }
            let res = inner.run();
            if let Some(p) = res.point {
                if self.offer(p) {
                    return;
                }
            }
        }
    }
}

/// Greedy vertex cover of the product graph by degree, plus the set of the
/// opposite factors.
fn covers(n: usize, pairs: &[(usize, usize)]) -> (Vec<usize>, Vec<usize>) {
    let mut degree = vec![0usize; n];
    for &(a, b) in pairs {
        degree[a] += 1;
        if b != a {
            degree[b] += 1;
        }
    }
    let mut covered = vec![false; pairs.len()];
    let mut chosen = vec![false; n];
    loop {
        let mut best: Option<usize> = None;
        let mut count = vec![0usize; n];
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if !covered[k] {
                count[a] += 1;
                if b != a {
                    count[b] += 1;
                }
            }
        }
        for j in 0..n {
            if count[j] > 0 && best.is_none_or(|b| count[j] > count[b]) {
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        chosen[j] = true;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if a == j || b == j {
                covered[k] = true;
            }
        }
    }
    let cover: Vec<usize> = (0..n).filter(|&j| chosen[j]).collect();
    let mut alt_flag = vec![false; n];
    for &(a, b) in pairs {
        // Both ends chosen: either will do, take `a`.
        if chosen[a] && !chosen[b] {
            alt_flag[b] = true;
        } else {
            alt_flag[a] = true;
        }
    }
    let alt: Vec<usize> = (0..n).filter(|&j| alt_flag[j]).collect();
    (cover, alt)
}

/// Replaces every product that has a fixed factor by a linear term.
/// Returns `None` when some product still has two free factors.
fn linearize_problem(problem: &MibpProblem) -> Option<MibpProblem> {
    let mut out = problem.clone();
    out.bilinear.clear();
    let fixed = |j: usize| {
        let v = &problem.vars[j];
        (v.upper - v.lower).abs() <= 0.0
    };
    for t in &problem.bilinear {
        let (free, val) = if fixed(t.a) {
            (t.b, problem.vars[t.a].lower)
        } else if fixed(t.b) {
            (t.a, problem.vars[t.b].lower)
        } else {
            return None;
        };
        match t.location {
            TermLocation::Objective => out.objective.push((free, t.coef * val)),
            TermLocation::Row(r) => out.rows[r].coeffs.push((free, t.coef * val)),
        }
    }
    Some(out)
}

/// Continuous LP of `problem` under bounds `lo`/`up`, requiring every product
/// to have a fixed factor. Returns the LP and the objective constant.
fn linearize(problem: &MibpProblem, lo: &[f64], up: &[f64]) -> Option<(LinearProgram, f64)> {
    let mut p = problem.clone();
    for (j, v) in p.vars.iter_mut().enumerate() {
        v.lower = lo[j];
        v.upper = up[j];
    }
    let p = linearize_problem(&p)?;
    let n = p.num_vars();
    let mut lpp = LinearProgram::new(n);
    for &(j, c) in &p.objective {
        lpp.objective[j] += c;
    }
    lpp.lower = lo.to_vec();
    lpp.upper = up.to_vec();
    for r in &p.rows {
        lpp.add_row(r.coeffs.clone(), r.sense, r.rhs);
    }
    Some((lpp, p.objective_constant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{RowSense, VarKind};

    #[test]
    fn symmetric_product_on_simplex() {
        let mut p = MibpProblem::new();
        let x = p.add_var("x", 0.0, 1.0, VarKind::Continuous);
        let y = p.add_var("y", 0.0, 1.0, VarKind::Continuous);
        p.add_row("sum", vec![(x, 1.0), (y, 1.0)], RowSense::Le, 1.0);
        p.add_bilinear(1.0, x, y, TermLocation::Objective);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value - 0.25).abs() < 1e-4, "{}", sol.value);
        let pt = sol.point.unwrap();
        assert!((pt[0] - 0.5).abs() < 2e-2 && (pt[1] - 0.5).abs() < 2e-2);
        assert!(sol.bound >= 0.25 - 1e-9);
    }

    #[test]
    fn pure_lp_needs_one_node() {
        let mut p = MibpProblem::new();
        let x = p.add_var("x", 0.0, 10.0, VarKind::Continuous);
        p.add_row("cap", vec![(x, 1.0)], RowSense::Le, 3.0);
        p.add_objective(x, 1.0);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.nodes, 1);
        assert!((sol.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn small_knapsack() {
        let mut p = MibpProblem::new();
        let w = [5.0, 4.0, 3.0];
        let v = [10.0, 40.0, 30.0];
        let ids: Vec<_> = (0..3)
            .map(|i| p.add_var(format!("b{i}"), 0.0, 1.0, VarKind::Binary))
            .collect();
        p.add_row(
            "cap",
            ids.iter().zip(w).map(|(&i, w)| (i, w)).collect(),
            RowSense::Le,
            8.0,
        );
        for (&i, vv) in ids.iter().zip(v) {
            p.add_objective(i, vv);
        }
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.value - 70.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_problem() {
        let mut p = MibpProblem::new();
        let z = p.add_var("z", 0.0, 1.0, VarKind::Binary);
        p.add_row("half", vec![(z, 2.0)], RowSense::Eq, 1.0);
        let sol = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
        assert!(sol.point.is_none());
    }

    #[test]
    fn covers_hit_every_pair() {
        let pairs = vec![(0, 3), (0, 4), (1, 5), (2, 5)];
        let (a, b) = covers(6, &pairs);
        for &(x, y) in &pairs {
            assert!(a.contains(&x) || a.contains(&y));
            assert!(b.contains(&x) || b.contains(&y));
        }
        assert!(a.contains(&0) && a.contains(&5));
    }
}
