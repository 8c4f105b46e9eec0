//! Domain types and closed-form formulas of the pricing and reallocation
//! model.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Relative slack accepted on bounds and capacities when checking inputs.
const FEAS_TOL: f64 = 1e-9;

/// Which information structure a computation refers to: the drivers keep
/// their own belief (`Ws`) or the realization is shared with them (`Sws`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ws,
    Sws,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Ws => "ws",
            Mode::Sws => "sws",
        })
    }
}

/// Static market data of a city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityInstance {
    pub n: usize,
    /// Relocation cost per driver, row = origin.
    pub alpha: Vec<Vec<f64>>,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// Commission kept by the drivers.
    pub c: f64,
    /// Demand discount slope.
    pub delta: f64,
    /// Unmatched drivers per zone before reallocation.
    pub x0: Vec<f64>,
    /// Matched drivers per zone are believed uniform on `[0, ybar]`.
    pub ybar: f64,
}

impl CityInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(domain("an instance needs at least one zone"));
        }
        if self.alpha.len() != n || self.alpha.iter().any(|r| r.len() != n) {
            return Err(domain("alpha must be n x n"));
        }
        for i in 0..n {
            if self.alpha[i][i] != 0.0 {
                return Err(domain(format!("alpha[{i}][{i}] must be zero")));
            }
            if self.alpha[i].iter().any(|a| !a.is_finite() || *a < 0.0) {
                return Err(domain(format!("alpha row {i} has a negative or non-finite entry")));
            }
        }
        if self.p_min.len() != n || self.p_max.len() != n || self.x0.len() != n {
            return Err(domain("price bounds and x0 must have n entries"));
        }
        for i in 0..n {
            if !(self.p_min[i] > 0.0 && self.p_min[i] < self.p_max[i] && self.p_max[i].is_finite()) {
                return Err(domain(format!("zone {i} needs 0 < p_min < p_max")));
            }
            if !(self.x0[i] > 0.0 && self.x0[i].is_finite()) {
                return Err(domain(format!("zone {i} needs x0 > 0")));
            }
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(domain("commission c must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(domain("delta must lie in [0, 1]"));
        }
        if !(self.ybar > 0.0 && self.ybar.is_finite()) {
            return Err(domain("ybar must be positive"));
        }
        Ok(())
    }

    /// Total fleet of unmatched drivers.
    pub fn n0(&self) -> f64 {
        self.x0.iter().sum()
    }

    pub fn p_max_overall(&self) -> f64 {
        self.p_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Off-diagonal arcs in row-major order.
    pub fn arcs(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }
}

/// One revealed sample of matched drivers and nominal demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub y: Vec<f64>,
    pub d0: Vec<f64>,
}

impl Realization {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.y.len() != n || self.d0.len() != n {
            return Err(domain("realization vectors must have n entries"));
        }
        if self.y.iter().chain(&self.d0).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(domain("realization entries must be nonnegative"));
        }
        Ok(())
    }
}

/// The drivers' discrete demand scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerBelief {
    pub m: usize,
    /// `d0_belief[i][k]`: believed nominal demand of zone `i` in scenario `k`.
    pub d0_belief: Vec<Vec<f64>>,
    pub prob: Vec<f64>,
}

impl FollowerBelief {
    /// Scenarios `kappa_k * anchor_i` with probabilities `prob`.
    pub fn scaled(anchor: &[f64], kappa: &[f64], prob: &[f64]) -> Self {
        Self {
            m: kappa.len(),
            d0_belief: anchor.iter().map(|a| kappa.iter().map(|k| k * a).collect()).collect(),
            prob: prob.to_vec(),
        }
    }

    /// Point mass on `d0`.
    pub fn certain(d0: &[f64]) -> Self {
        Self::scaled(d0, &[1.0], &[1.0])
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m == 0 || self.prob.len() != self.m {
            return Err(domain("belief needs m >= 1 probabilities"));
        }
        if self.d0_belief.len() != n || self.d0_belief.iter().any(|r| r.len() != self.m) {
            return Err(domain("d0_belief must be n x m"));
        }
        if self.prob.iter().any(|p| !(*p > 0.0)) {
            return Err(domain("belief probabilities must be positive"));
        }
        if (self.prob.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(domain("belief probabilities must sum to one"));
        }
        if self.d0_belief.iter().flatten().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(domain("believed demand must be nonnegative"));
        }
        Ok(())
    }

    pub fn max_demand(&self) -> f64 {
        self.d0_belief.iter().flatten().cloned().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    pub p: Vec<f64>,
}

impl PriceVector {
    pub fn new(p: Vec<f64>) -> Self {
        Self { p }
    }

    pub fn validate(&self, inst: &CityInstance) -> Result<()> {
        if self.p.len() != inst.n {
            return Err(domain("price vector must have n entries"));
        }
        for i in 0..inst.n {
            check_price(self.p[i], inst, i)?;
        }
        Ok(())
    }
}

/// Drivers moved from zone `i` (row) to zone `j` (column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMatrix {
    pub v: Vec<Vec<f64>>,
}

impl FlowMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: vec![vec![0.0; n]; n],
        }
    }

    /// Builds a matrix from `(from, to, amount)` triples.
    pub fn from_arcs(n: usize, arcs: &[(usize, usize, f64)]) -> Self {
        let mut f = Self::zeros(n);
        for &(i, j, a) in arcs {
            f.v[i][j] = a;
        }
        f
    }

    pub fn is_integral(&self, tol: f64) -> bool {
        self.v.iter().flatten().all(|a| (a - a.round()).abs() <= tol)
    }

    pub fn validate(&self, x0: &[f64]) -> Result<()> {
        let n = x0.len();
        if self.v.len() != n || self.v.iter().any(|r| r.len() != n) {
            return Err(domain("flow matrix must be n x n"));
        }
        for i in 0..n {
            if self.v[i][i] != 0.0 {
                return Err(domain(format!("flow matrix has a nonzero diagonal at {i}")));
            }
            let mut out = 0.0;
            for j in 0..n {
                let a = self.v[i][j];
                if !a.is_finite() || a < -FEAS_TOL * (1.0 + x0[i]) {
                    return Err(domain(format!("flow {i}->{j} is negative")));
                }
                out += a;
            }
            if out > x0[i] + FEAS_TOL * (1.0 + x0[i]) {
                return Err(domain(format!("zone {i} sends {out} drivers but has {}", x0[i])));
            }
        }
        Ok(())
    }
}

fn check_price(p: f64, inst: &CityInstance, i: usize) -> Result<()> {
    let (lo, hi) = (inst.p_min[i], inst.p_max[i]);
    let tol = FEAS_TOL * (1.0 + hi.abs());
    if !(p >= lo - tol && p <= hi + tol) {
        return Err(domain(format!("price {p} of zone {i} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Effective demand of zone `i` at price `p_i` given nominal demand `d0_i`.
pub fn demand(p_i: f64, d0_i: f64, inst: &CityInstance, i: usize) -> Result<f64> {
    check_price(p_i, inst, i)?;
    if !(d0_i >= 0.0) {
        return Err(domain(format!("nominal demand {d0_i} is negative")));
    }
    Ok(demand_unchecked(p_i, d0_i, inst, i))
}

/// The affine demand law without input checks: `d0 * (slope0 + slope1 * p)`.
pub(crate) fn demand_unchecked(p_i: f64, d0_i: f64, inst: &CityInstance, i: usize) -> f64 {
    let (a, b) = demand_affine(inst, i);
    (d0_i * (a + b * p_i)).max(0.0)
}

/// Coefficients `(a, b)` with `demand = d0 * (a + b * p)`.
pub fn demand_affine(inst: &CityInstance, i: usize) -> (f64, f64) {
    let span = inst.p_max[i] - inst.p_min[i];
    let b = -inst.delta / span;
    (1.0 - b * inst.p_min[i], b)
}

/// Drivers per zone after reallocation.
pub fn allocate(x0: &[f64], v: &FlowMatrix) -> Result<Vec<f64>> {
    v.validate(x0)?;
    Ok(allocate_unchecked(x0, v))
}

pub(crate) fn allocate_unchecked(x0: &[f64], v: &FlowMatrix) -> Vec<f64> {
    let n = x0.len();
    let mut x = x0.to_vec();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                x[i] -= v.v[i][j];
                x[j] += v.v[i][j];
            }
        }
    }
    x
}

/// Expected unmet demand `E[max(d - x - y, 0)]` for `y ~ U(0, ybar)`.
pub fn phi(d: f64, x: f64, ybar: f64) -> f64 {
    let g = d - x;
    if g <= 0.0 {
        0.0
    } else if g <= ybar {
        g * g / (2.0 * ybar)
    } else {
        g - ybar / 2.0
    }
}

/// `d phi / d x`.
pub fn phi_dx(d: f64, x: f64, ybar: f64) -> f64 {
    let g = d - x;
    if g <= 0.0 {
        0.0
    } else if g <= ybar {
        -g / ybar
    } else {
        -1.0
    }
}

pub fn beta_ws(d: f64, x: f64, ybar: f64, c: f64, prob: f64) -> f64 {
    c * prob * phi_dx(d, x, ybar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BetaRegion {
    /// Surplus: `beta = 0`.
    Zero,
    /// Shortage: `beta = p`.
    Pi,
    /// Balanced: `beta` anywhere in `[0, p]`.
    Interval,
}

/// Subgradient region of the shared matching term.
pub fn beta_sws_region(d: f64, x: f64, y: f64) -> BetaRegion {
    beta_sws_region_tol(d, x, y, 0.0)
}

/// Like [`beta_sws_region`], treating `|d - x - y| <= tol` as balanced.
pub fn beta_sws_region_tol(d: f64, x: f64, y: f64, tol: f64) -> BetaRegion {
    let g = d - x - y;
    if g.abs() <= tol {
        BetaRegion::Interval
    } else if g < 0.0 {
        BetaRegion::Zero
    } else {
        BetaRegion::Pi
    }
}

/// Company revenue at the realized sample.
pub fn leader_revenue(p: &PriceVector, v: &FlowMatrix, real: &Realization, inst: &CityInstance) -> Result<f64> {
    p.validate(inst)?;
    real.validate(inst.n)?;
    let x = allocate(&inst.x0, v)?;
    Ok(revenue_from_allocation(&p.p, &x, real, inst))
}

pub(crate) fn revenue_from_allocation(p: &[f64], x: &[f64], real: &Realization, inst: &CityInstance) -> f64 {
    (0..inst.n)
        .map(|i| {
            let d = demand_unchecked(p[i], real.d0[i], inst, i);
            (1.0 - inst.c) * p[i] * (x[i] + real.y[i]).min(d)
        })
        .sum()
}

/// Drivers' cost when the realization is shared.
pub fn follower_cost_shared(p: &PriceVector, v: &FlowMatrix, real: &Realization, inst: &CityInstance) -> Result<f64> {
    p.validate(inst)?;
    real.validate(inst.n)?;
    let x = allocate(&inst.x0, v)?;
    let mut cost = relocation_cost(v, inst);
    for i in 0..inst.n {
        let d = demand_unchecked(p.p[i], real.d0[i], inst, i);
        cost += inst.c * p.p[i] * (-x[i] - real.y[i]).max(-d);
    }
    Ok(cost)
}

/// Drivers' expected cost under their own belief.
pub fn follower_cost_scenario(
    p: &PriceVector,
    v: &FlowMatrix,
    belief: &FollowerBelief,
    inst: &CityInstance,
    x0: &[f64],
) -> Result<f64> {
    p.validate(inst)?;
    belief.validate(inst.n)?;
    let x = allocate(x0, v)?;
    let mut cost = relocation_cost(v, inst);
    for i in 0..inst.n {
        for k in 0..belief.m {
            let d = demand_unchecked(p.p[i], belief.d0_belief[i][k], inst, i);
            cost += inst.c * p.p[i] * (phi(d, x[i], inst.ybar) - d) * belief.prob[k];
        }
    }
    Ok(cost)
}

pub(crate) fn relocation_cost(v: &FlowMatrix, inst: &CityInstance) -> f64 {
    let mut s = 0.0;
    for (i, row) in v.v.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            if i != j {
                s += inst.alpha[i][j] * a;
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn city() -> CityInstance {
        CityInstance {
            n: 4,
            alpha: vec![vec![0.0; 4]; 4],
            p_min: vec![2.5; 4],
            p_max: vec![12.5; 4],
            c: 0.75,
            delta: 0.9,
            x0: vec![107.0, 283.0, 399.0, 211.0],
            ybar: 750.0,
        }
    }

    #[test]
    fn demand_boundaries() {
        let inst = city();
        assert_eq!(demand(2.5, 321.0, &inst, 0).unwrap(), 321.0);
        assert!((demand(12.5, 1000.0, &inst, 0).unwrap() - 100.0).abs() < 1e-9);
        assert!((demand(9.5, 1945.0, &inst, 1).unwrap() - 719.65).abs() < 1e-9);
        assert!(demand(13.0, 1.0, &inst, 0).is_err());
    }

    #[test]
    fn allocation_examples() {
        let x0 = [107.0, 283.0, 399.0, 211.0];
        let v = FlowMatrix::from_arcs(4, &[(2, 3, 306.0)]);
        assert_eq!(allocate(&x0, &v).unwrap(), vec![107.0, 283.0, 93.0, 517.0]);
        let v = FlowMatrix::from_arcs(4, &[(0, 3, 107.0), (2, 1, 330.0), (2, 3, 68.0)]);
        assert_eq!(allocate(&x0, &v).unwrap(), vec![0.0, 613.0, 1.0, 386.0]);
        let v = FlowMatrix::from_arcs(4, &[(0, 3, 108.0)]);
        assert!(allocate(&x0, &v).is_err());
    }

    #[test]
    fn phi_branches_meet() {
        assert_eq!(phi(0.0, 5.0, 10.0), 0.0);
        assert!((phi(10.0, 0.0, 10.0) - 5.0).abs() < 1e-12);
        assert!((phi(100.0, 0.0, 250.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_ws(1.0, 2.0, 10.0, 0.75, 0.5), 0.0);
        assert!((beta_ws(1000.0, 0.0, 250.0, 0.75, 1.0 / 3.0) + 0.25).abs() < 1e-12);
        assert!((beta_ws(100.0, 0.0, 250.0, 0.75, 1.0 / 3.0) + 0.1).abs() < 1e-12);
        assert_eq!(beta_sws_region(5.0, 1.0, 5.0), BetaRegion::Zero);
        assert_eq!(beta_sws_region(7.0, 1.0, 5.0), BetaRegion::Pi);
        assert_eq!(beta_sws_region(6.0, 1.0, 5.0), BetaRegion::Interval);
    }

    #[test]
    fn json_round_trip() {
        let inst = city();
        let text = serde_json::to_string(&inst).unwrap();
        assert_eq!(serde_json::from_str::<CityInstance>(&text).unwrap(), inst);
    }
}
