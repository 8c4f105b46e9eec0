//! Dense revised simplex for bounded linear programs.
//!
//! The solver works on
//!
//! ```text
//! maximize   c'x
//! subject to a_i'x <= b_i   or   a_i'x = b_i
//!            l <= x <= u    (finite)
//! ```
//!
//! Every row gets an activity column `r_i = a_i'x` so that the constraint
//! matrix becomes `[A | -I]` and the all-activity basis is always available.
//! The basis inverse is stored explicitly as a dense `m x m` matrix and
//! updated by elementary row operations after each pivot; it is rebuilt from
//! scratch every [`REFACTOR_EVERY`] pivots.
//!
//! Pricing is Dantzig's rule until [`DEGENERATE_SWITCH`] consecutive
//! degenerate pivots have been seen, after which Bland's smallest-index rule
//! takes over until a pivot makes progress again. Bland's rule cannot cycle,
//! so the method terminates.

use serde::{Deserialize, Serialize};

/// Row sense of a linear constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A bounded linear program in maximization form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            lower: vec![0.0; num_vars],
            upper: vec![0.0; num_vars],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(LpRow { coeffs, sense, rhs });
    }

    /// Objective value of `x` (no feasibility check).
    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for row in &self.rows {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// A simplex basis: which column is basic in each row position, and the
/// bound each nonbasic column sits at. Columns `0..n` are structural,
/// `n..n+m` are row activities.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub head: Vec<usize>,
    pub status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values.
    pub x: Vec<f64>,
    pub value: f64,
    /// Row duals in maximization convention (nonnegative on `<=` rows at an
    /// optimum).
    pub duals: Vec<f64>,
    /// Reduced costs `c_j - duals'A_j` of the structural columns.
    pub reduced_costs: Vec<f64>,
    pub basis: Option<Basis>,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n],
            value: f64::NEG_INFINITY,
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            basis: None,
            iterations,
        }
    }
}

/// Weak-duality upper bound `b'u + sum_j max(rc_j l_j, rc_j u_j)` for any
/// multipliers with `u_i >= 0` on `<=` rows. Negative multipliers on `<=`
/// rows are clipped to zero before evaluating.
pub fn dual_bound(lp: &LinearProgram, duals: &[f64]) -> f64 {
    let mut u: Vec<f64> = duals.to_vec();
    for (i, row) in lp.rows.iter().enumerate() {
        if row.sense == Sense::Le && u[i] < 0.0 {
            u[i] = 0.0;
        }
    }
    let mut rc = lp.objective.clone();
    let mut bound = 0.0;
    for (i, row) in lp.rows.iter().enumerate() {
        bound += u[i] * row.rhs;
        for &(j, a) in &row.coeffs {
            rc[j] -= u[i] * a;
        }
    }
    for j in 0..lp.num_vars() {
        bound += (rc[j] * lp.lower[j]).max(rc[j] * lp.upper[j]);
    }
    bound
}

const REFACTOR_EVERY: usize = 60;
const DEGENERATE_SWITCH: usize = 40;
const PIVOT_TOL: f64 = 1e-9;
const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;

/// Solves `lp` from the all-activity basis.
pub fn solve(lp: &LinearProgram) -> LpSolution {
    solve_warm(lp, None)
}

/// Solves `lp`, starting from `warm` when it has matching dimensions and a
/// nonsingular basis matrix.
pub fn solve_warm(lp: &LinearProgram, warm: Option<&Basis>) -> LpSolution {
    let mut s = Simplex::new(lp);
    let mut warm_ok = false;
    if let Some(b) = warm {
        warm_ok = s.load_basis(b);
    }
    if !warm_ok {
        s.cold_start();
    }
    let status = s.run(warm_ok);
    s.finish(lp, status)
}

struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    head: Vec<usize>,
    status: Vec<VarStatus>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    max_iterations: usize,
    degenerate_run: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
            cols[n + i].push((i, -1.0));
        }
        // Merge duplicate entries within a column.
        for col in cols.iter_mut().take(n) {
            col.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(i, a) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += a,
                    _ => merged.push((i, a)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *col = merged;
        }
        let mut cost = vec![0.0; n + m];
        for j in 0..n {
            cost[j] = -lp.objective[j];
        }
        let mut lo = lp.lower.clone();
        let mut up = lp.upper.clone();
        for row in &lp.rows {
            match row.sense {
                Sense::Le => {
                    lo.push(f64::NEG_INFINITY);
                    up.push(row.rhs);
                }
                Sense::Eq => {
                    lo.push(row.rhs);
                    up.push(row.rhs);
                }
            }
        }
        Self {
            m,
            n,
            cols,
            cost,
            lo,
            up,
            x: vec![0.0; n + m],
            head: Vec::new(),
            status: vec![VarStatus::AtLower; n + m],
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            max_iterations: 200 * (n + m) + 2000,
            degenerate_run: 0,
        }
    }

    fn cold_start(&mut self) {
        let (n, m) = (self.n, self.m);
        self.head = (n..n + m).collect();
        for j in 0..n {
            self.status[j] = if self.lo[j].is_finite() {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
        }
        for i in 0..m {
            self.status[n + i] = VarStatus::Basic;
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        self.since_refactor = 0;
        self.set_nonbasic_values();
        self.compute_basic_values();
    }

    fn load_basis(&mut self, b: &Basis) -> bool {
        let ntot = self.n + self.m;
        if b.head.len() != self.m || b.status.len() != ntot {
            return false;
        }
        self.head = b.head.clone();
        self.status = b.status.clone();
        let mut seen = vec![false; ntot];
        for &h in &self.head {
            if h >= ntot || seen[h] {
                return false;
            }
            seen[h] = true;
        }
        for j in 0..ntot {
            if seen[j] {
                self.status[j] = VarStatus::Basic;
            } else if self.status[j] == VarStatus::Basic {
                self.status[j] = VarStatus::AtLower;
            }
        }
        if !self.refactor() {
            return false;
        }
        self.set_nonbasic_values();
        self.compute_basic_values();
        true
    }

    fn set_nonbasic_values(&mut self) {
        for j in 0..self.n + self.m {
            match self.status[j] {
                VarStatus::Basic => {}
                VarStatus::AtLower => {
                    if self.lo[j].is_finite() {
                        self.x[j] = self.lo[j];
                    } else {
                        self.status[j] = VarStatus::AtUpper;
                        self.x[j] = self.up[j];
                    }
                }
                VarStatus::AtUpper => {
                    if self.up[j].is_finite() {
                        self.x[j] = self.up[j];
                    } else {
                        self.status[j] = VarStatus::AtLower;
                        self.x[j] = self.lo[j];
                    }
                }
            }
        }
    }

    /// x_B = B^{-1} (-N x_N).
    fn compute_basic_values(&mut self) {
        let m = self.m;
        let mut rhs = vec![0.0; m];
        for j in 0..self.n + m {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for r in 0..m {
            let row = &self.binv[r * m..(r + 1) * m];
            let v: f64 = row.iter().zip(&rhs).map(|(b, q)| b * q).sum();
            self.x[self.head[r]] = v;
        }
    }

    /// Rebuilds the explicit inverse by Gauss-Jordan with partial pivoting.
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for (r, &h) in self.head.iter().enumerate() {
            for &(i, a) in &self.cols[h] {
                b[i * m + r] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = b[col * m + col].abs();
            for r in col + 1..m {
                let v = b[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-11 {
                return false;
            }
            if piv != col {
                for k in 0..m {
                    b.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let d = b[col * m + col];
            for k in 0..m {
                b[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r != col {
                    let f = b[r * m + col];
                    if f != 0.0 {
                        for k in 0..m {
                            b[r * m + k] -= f * b[col * m + k];
                            inv[r * m + k] -= f * inv[col * m + k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        true
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for (r, o) in out.iter_mut().enumerate() {
                *o += self.binv[r * m + i] * a;
            }
        }
        out
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        self.cols[j].iter().map(|&(i, a)| y[i] * a).sum()
    }

    /// y' = c_B' B^{-1} for the given basic costs.
    fn btran_costs(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[r * m..(r + 1) * m];
                for (k, yk) in y.iter_mut().enumerate() {
                    *yk += c * row[k];
                }
            }
        }
        y
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, &a) in alpha.iter().enumerate().take(r) {
            if a != 0.0 {
                let row = &mut before[i * m..(i + 1) * m];
                for k in 0..m {
                    row[k] -= a * prow[k];
                }
            }
        }
        for (off, &a) in alpha.iter().enumerate().skip(r + 1) {
            if a != 0.0 {
                let i = off - r - 1;
                let row = &mut after[i * m..(i + 1) * m];
                for k in 0..m {
                    row[k] -= a * prow[k];
                }
            }
        }
        self.since_refactor += 1;
    }

    fn feas_tol(&self, v: f64) -> f64 {
        PRIMAL_TOL * (1.0 + v.abs())
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.up[j] - self.lo[j] <= 0.0
    }

    fn primal_infeasible_rows(&self) -> bool {
        self.head.iter().any(|&h| {
            let v = self.x[h];
            v < self.lo[h] - self.feas_tol(self.lo[h]) || v > self.up[h] + self.feas_tol(self.up[h])
        })
    }

    fn dual_feasible(&self) -> bool {
        let cb: Vec<f64> = self.head.iter().map(|&h| self.cost[h]).collect();
        let y = self.btran_costs(&cb);
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic || self.is_fixed(j) {
                continue;
            }
            let d = self.cost[j] - self.dot_col(&y, j);
            let scale = 1.0 + self.cost[j].abs();
            match self.status[j] {
                VarStatus::AtLower if d < -DUAL_TOL * scale => return false,
                VarStatus::AtUpper if d > DUAL_TOL * scale => return false,
                _ => {}
            }
        }
        true
    }

    fn maybe_refactor(&mut self) {
        if self.since_refactor >= REFACTOR_EVERY && self.refactor() {
            self.compute_basic_values();
        }
    }

    fn run(&mut self, warm: bool) -> LpStatus {
        if warm && self.dual_feasible() {
            match self.dual_phase() {
                Some(LpStatus::Infeasible) => return LpStatus::Infeasible,
                Some(LpStatus::IterationLimit) => return LpStatus::IterationLimit,
                _ => {}
            }
        }
        loop {
            match self.primal(true) {
                LpStatus::Optimal => {}
                other => return other,
            }
            let status = self.primal(false);
            if status != LpStatus::Optimal {
                return status;
            }
            // Guard against drift: refresh and confirm.
            if self.refactor() {
                self.compute_basic_values();
            }
            if !self.primal_infeasible_rows() {
                return LpStatus::Optimal;
            }
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
        }
    }

    /// Composite primal simplex. In phase one the cost is the gradient of the
    /// sum of basic bound violations; in phase two it is the true cost.
    fn primal(&mut self, phase_one: bool) -> LpStatus {
        let (n, m) = (self.n, self.m);
        loop {
            if self.iterations >= self.max_iterations {
                return LpStatus::IterationLimit;
            }
            self.maybe_refactor();
            let mut cb = vec![0.0; m];
            let mut infeasible = false;
            for (r, &h) in self.head.iter().enumerate() {
                if phase_one {
                    let v = self.x[h];
                    if v < self.lo[h] - self.feas_tol(self.lo[h]) {
                        cb[r] = -1.0;
                        infeasible = true;
                    } else if v > self.up[h] + self.feas_tol(self.up[h]) {
                        cb[r] = 1.0;
                        infeasible = true;
                    }
                } else {
                    cb[r] = self.cost[h];
                }
            }
            if phase_one && !infeasible {
                return LpStatus::Optimal;
            }
            let y = self.btran_costs(&cb);
            let bland = self.degenerate_run >= DEGENERATE_SWITCH;
            let mut enter: Option<(usize, f64)> = None;
            let mut best_score = 0.0;
            for j in 0..n + m {
                if self.status[j] == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let cj = if phase_one { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_col(&y, j);
                let tol = DUAL_TOL * (1.0 + cj.abs());
                let improving = match self.status[j] {
                    VarStatus::AtLower => d < -tol && self.up[j] > self.x[j],
                    VarStatus::AtUpper => d > tol && self.lo[j] < self.x[j],
                    VarStatus::Basic => false,
                };
                if !improving {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                let norm: f64 = 1.0 + self.cols[j].iter().map(|e| e.1 * e.1).sum::<f64>();
                let score = d * d / norm;
                if score > best_score {
                    best_score = score;
                    enter = Some((j, d));
                }
            }
            let Some((q, _dq)) = enter else {
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            let alpha = self.ftran(q);
            let dir = if self.status[q] == VarStatus::AtLower {
                1.0
            } else {
                -1.0
            };
            // Ratio test: basic h moves at rate -dir * alpha[r].
            let mut theta = self.up[q] - self.lo[q];
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |alpha|, to_upper)
            for r in 0..m {
                let a = alpha[r];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let h = self.head[r];
                let rate = -dir * a;
                let v = self.x[h];
                let (limit, to_upper) = if rate < 0.0 {
                    if phase_one && v > self.up[h] + self.feas_tol(self.up[h]) {
                        ((v - self.up[h]) / -rate, true)
                    } else if v >= self.lo[h] - self.feas_tol(self.lo[h]) {
                        if self.lo[h].is_finite() {
                            (((v - self.lo[h]).max(0.0)) / -rate, false)
                        } else {
                            continue;
                        }
                    } else {
                        continue;
                    }
                } else if phase_one && v < self.lo[h] - self.feas_tol(self.lo[h]) {
                    ((self.lo[h] - v) / rate, false)
                } else if v <= self.up[h] + self.feas_tol(self.up[h]) {
                    if self.up[h].is_finite() {
                        (((self.up[h] - v).max(0.0)) / rate, true)
                    } else {
                        continue;
                    }
                } else {
                    continue;
                };
                let better = match leave {
                    None => limit < theta,
                    Some((lr, la, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if bland {
                                self.head[r] < self.head[lr]
                            } else {
                                a.abs() > la
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = limit;
                    leave = Some((r, a.abs(), to_upper));
                }
            }
            if !theta.is_finite() {
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Unbounded
                };
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            let step = dir * theta;
            self.x[q] += step;
            for r in 0..m {
                if alpha[r] != 0.0 {
                    let h = self.head[r];
                    self.x[h] -= step * alpha[r];
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    if dir > 0.0 {
                        self.status[q] = VarStatus::AtUpper;
                        self.x[q] = self.up[q];
                    } else {
                        self.status[q] = VarStatus::AtLower;
                        self.x[q] = self.lo[q];
                    }
                }
                Some((r, _, to_upper)) => {
                    let h = self.head[r];
                    if to_upper {
                        self.status[h] = VarStatus::AtUpper;
                        self.x[h] = self.up[h];
                    } else {
                        self.status[h] = VarStatus::AtLower;
                        self.x[h] = self.lo[h];
                    }
                    self.status[q] = VarStatus::Basic;
                    self.head[r] = q;
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    /// Bounded dual simplex from a dual feasible basis. Returns
    /// `Some(Infeasible)` when a row proves primal infeasibility, `None` when
    /// it stopped early (numerical trouble) and the caller should continue
    /// with the primal method.
    fn dual_phase(&mut self) -> Option<LpStatus> {
        let (n, m) = (self.n, self.m);
        loop {
            if self.iterations >= self.max_iterations {
                return Some(LpStatus::IterationLimit);
            }
            self.maybe_refactor();
            // Leaving row: largest scaled infeasibility.
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for (r, &h) in self.head.iter().enumerate() {
                let v = self.x[h];
                let viol = if v < self.lo[h] - self.feas_tol(self.lo[h]) {
                    self.lo[h] - v
                } else if v > self.up[h] + self.feas_tol(self.up[h]) {
                    self.up[h] - v
                } else {
                    continue;
                };
                let score = viol.abs();
                if score > worst {
                    worst = score;
                    leave = Some((r, viol));
                }
            }
            let Some((r, viol)) = leave else {
                return Some(LpStatus::Optimal);
            };
            let increase = viol > 0.0;
            let cb: Vec<f64> = self.head.iter().map(|&h| self.cost[h]).collect();
            let y = self.btran_costs(&cb);
            let rho = self.binv[r * m..(r + 1) * m].to_vec();
            let mut enter: Option<(usize, f64, f64)> = None; // (j, ratio, |alpha_rj|)
            for j in 0..n + m {
                if self.status[j] == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let arj = self.dot_col(&rho, j);
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_r changes by -arj * dx_j.
                let eligible = match self.status[j] {
                    VarStatus::AtLower => (increase && arj < 0.0) || (!increase && arj > 0.0),
                    VarStatus::AtUpper => (increase && arj > 0.0) || (!increase && arj < 0.0),
                    VarStatus::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.cost[j] - self.dot_col(&y, j);
                let ratio = d.abs() / arj.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && arj.abs() > ba),
                };
                if better {
                    enter = Some((j, ratio, arj.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Some(LpStatus::Infeasible);
            };
            let alpha = self.ftran(q);
            if alpha[r].abs() <= PIVOT_TOL {
                return None;
            }
            let h = self.head[r];
            let target = if increase { self.lo[h] } else { self.up[h] };
            let dxq = (self.x[h] - target) / alpha[r];
            self.x[q] += dxq;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    let hb = self.head[i];
                    self.x[hb] -= dxq * alpha[i];
                }
            }
            self.x[h] = target;
            self.status[h] = if increase {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.status[q] = VarStatus::Basic;
            self.head[r] = q;
            self.pivot(r, &alpha);
            self.iterations += 1;
        }
    }

    fn finish(self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let (n, m) = (self.n, self.m);
        if status != LpStatus::Optimal {
            return LpSolution::failed(status, n, m, self.iterations);
        }
        let mut x: Vec<f64> = self.x[..n].to_vec();
        for j in 0..n {
            x[j] = x[j].clamp(lp.lower[j], lp.upper[j]);
        }
        let cb: Vec<f64> = self.head.iter().map(|&h| self.cost[h]).collect();
        let y = self.btran_costs(&cb);
        let duals: Vec<f64> = y.iter().map(|v| -v).collect();
        let mut reduced_costs = lp.objective.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced_costs[j] -= duals[i] * a;
            }
        }
        let value = lp.value(&x);
        LpSolution {
            status,
            x,
            value,
            duals,
            reduced_costs,
            basis: Some(Basis {
                head: self.head,
                status: self.status,
            }),
            iterations: self.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp1() -> LinearProgram {
        let mut lp = LinearProgram::new(1);
        lp.objective[0] = 1.0;
        lp.upper[0] = 10.0;
        lp.add_row(vec![(0, 1.0)], Sense::Le, 3.0);
        lp
    }

    #[test]
    fn single_variable_bound_by_row() {
        let sol = solve(&lp1());
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-12);
        assert!((sol.value - 3.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_equality_is_reported() {
        let mut lp = LinearProgram::new(2);
        lp.upper = vec![1.0, 1.0];
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 3.0);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_redundant_rows_terminate() {
        // Beale's cycling example, with each degenerate row duplicated.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.upper = vec![10.0; 4];
        for _ in 0..3 {
            lp.add_row(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], Sense::Le, 0.0);
            lp.add_row(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], Sense::Le, 0.0);
        }
        lp.add_row(vec![(2, 1.0)], Sense::Le, 1.0);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(lp.max_violation(&sol.x) < 1e-9);
        assert!((sol.value - 0.05).abs() < 1e-9, "value {}", sol.value);
    }

    #[test]
    fn warm_start_after_bound_change_matches_cold() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 2.0];
        lp.upper = vec![4.0, 4.0];
        lp.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 5.0);
        lp.add_row(vec![(0, 2.0), (1, 1.0)], Sense::Le, 8.0);
        let first = solve(&lp);
        assert!((first.value - 13.0).abs() < 1e-9);
        lp.upper[0] = 2.0;
        let warm = solve_warm(&lp, first.basis.as_ref());
        let cold = solve(&lp);
        assert_eq!(warm.status, LpStatus::Optimal);
        assert!((warm.value - cold.value).abs() < 1e-9);
        assert!((warm.value - 12.0).abs() < 1e-9);
    }

    #[test]
    fn dual_bound_matches_value_at_optimum() {
        let mut lp = LinearProgram::new(3);
        lp.objective = vec![1.0, 2.0, -1.0];
        lp.lower = vec![-1.0, 0.0, 0.0];
        lp.upper = vec![2.0, 3.0, 5.0];
        lp.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 4.0);
        lp.add_row(vec![(0, 1.0), (2, -1.0)], Sense::Eq, 0.5);
        let sol = solve(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        let gap = dual_bound(&lp, &sol.duals) - sol.value;
        assert!(gap.abs() < 1e-9, "gap {gap}");
    }
}
