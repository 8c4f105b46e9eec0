//! Problem representation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::MibpError;
pub use crate::lp::Sense as RowSense;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

/// A sparse linear row `sum_j a_j x_j (<= | =) rhs`, plus whatever bilinear
/// terms point at it. `family` groups rows for structural audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub family: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermLocation {
    Objective,
    Row(usize),
}

/// `coef * x_a * x_b`, placed in the objective or in a row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BilinearTerm {
    pub coef: f64,
    pub a: VarId,
    pub b: VarId,
    pub location: TermLocation,
}

/// Mixed-integer bilinear program, always in maximization form.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MibpProblem {
    pub vars: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub bilinear: Vec<BilinearTerm>,
    /// Linear objective coefficients.
    pub objective: Vec<(VarId, f64)>,
    pub objective_constant: f64,
}

impl MibpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.vars.len() - 1
    }

    pub fn add_row(
        &mut self,
        family: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        sense: RowSense,
        rhs: f64,
    ) -> usize {
        self.rows.push(LinearRow {
            family: family.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn add_bilinear(&mut self, coef: f64, a: VarId, b: VarId, location: TermLocation) {
        self.bilinear.push(BilinearTerm { coef, a, b, location });
    }

    pub fn add_objective(&mut self, var: VarId, coef: f64) {
        self.objective.push((var, coef));
    }

    pub fn var_index(&self) -> HashMap<&str, VarId> {
        self.vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect()
    }

    pub fn find_var(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Number of rows per family, in first-appearance order.
    pub fn row_families(&self) -> Vec<(String, usize)> {
        let mut out: Vec<(String, usize)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(f, _)| *f == r.family) {
                Some(e) => e.1 += 1,
                None => out.push((r.family.clone(), 1)),
            }
        }
        out
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.vars.iter().filter(|v| v.kind == kind).count()
    }

    /// Checks the structural invariants required by the solver.
    pub fn validate(&self) -> Result<(), MibpError> {
        let n = self.vars.len();
        for v in &self.vars {
            if !v.lower.is_finite() || !v.upper.is_finite() {
                return Err(MibpError::Invalid(format!("variable {} has an infinite bound", v.name)));
            }
            if v.lower > v.upper {
                return Err(MibpError::Invalid(format!(
                    "variable {} has lower bound {} above upper bound {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MibpError::Invalid(format!(
                    "binary {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if !r.rhs.is_finite() {
                return Err(MibpError::Invalid(format!("row {i} has a non-finite right-hand side")));
            }
            for &(j, a) in &r.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(MibpError::Invalid(format!(
                        "row {i} references an undeclared variable or bad coefficient"
                    )));
                }
            }
        }
        for t in &self.bilinear {
            if t.a >= n || t.b >= n || !t.coef.is_finite() {
                return Err(MibpError::Invalid(
                    "bilinear term references an undeclared variable".into(),
                ));
            }
            if let TermLocation::Row(r) = t.location {
                if r >= self.rows.len() {
                    return Err(MibpError::Invalid(format!("bilinear term points at missing row {r}")));
                }
            }
        }
        for &(j, c) in &self.objective {
            if j >= n || !c.is_finite() {
                return Err(MibpError::Invalid("objective references an undeclared variable".into()));
            }
        }
        Ok(())
    }

    /// Exact objective value at `x`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut v = self.objective_constant;
        for &(j, c) in &self.objective {
            v += c * x[j];
        }
        for t in &self.bilinear {
            if t.location == TermLocation::Objective {
                v += t.coef * x[t.a] * x[t.b];
            }
        }
        v
    }

    /// Row activities with exact bilinear products.
    pub fn row_activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect();
        for t in &self.bilinear {
            if let TermLocation::Row(r) = t.location {
                act[r] += t.coef * x[t.a] * x[t.b];
            }
        }
        act
    }

    /// Largest violation of bounds, integrality and rows at `x`. Row
    /// violations are divided by `max(1, |rhs|, max_j |a_j x_j|)` so that the
    /// measure is comparable across rows with big-M coefficients.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, v) in self.vars.iter().enumerate() {
            worst = worst.max(v.lower - x[j]).max(x[j] - v.upper);
            if v.kind.is_integral() {
                worst = worst.max((x[j] - x[j].round()).abs());
            }
        }
        let act = self.row_activities(x);
        let mut scale: Vec<f64> = self
            .rows
            .iter()
            .map(|r| {
                r.coeffs
                    .iter()
                    .fold(r.rhs.abs().max(1.0), |s, &(j, a)| s.max((a * x[j]).abs()))
            })
            .collect();
        for t in &self.bilinear {
            if let TermLocation::Row(r) = t.location {
                scale[r] = scale[r].max((t.coef * x[t.a] * x[t.b]).abs());
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            let viol = match r.sense {
                RowSense::Le => act[i] - r.rhs,
                RowSense::Eq => (act[i] - r.rhs).abs(),
            };
            worst = worst.max(viol / scale[i]);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_rejects_infinite_bounds_and_bad_binaries() {
        let mut p = MibpProblem::new();
        p.add_var("x", 0.0, f64::INFINITY, VarKind::Continuous);
        assert!(p.validate().is_err());
        let mut p = MibpProblem::new();
        p.add_var("z", 0.0, 2.0, VarKind::Binary);
        assert!(p.validate().is_err());
        let mut p = MibpProblem::new();
        let x = p.add_var("x", 0.0, 1.0, VarKind::Continuous);
        p.add_bilinear(1.0, x, 7, TermLocation::Objective);
        assert!(p.validate().is_err());
    }

    #[test]
    fn evaluate_includes_bilinear_objective_terms() {
        let mut p = MibpProblem::new();
        let x = p.add_var("x", 0.0, 2.0, VarKind::Continuous);
        let y = p.add_var("y", 0.0, 2.0, VarKind::Continuous);
        p.add_objective(x, 1.0);
        p.add_bilinear(3.0, x, y, TermLocation::Objective);
        assert_eq!(p.evaluate(&[2.0, 0.5]), 5.0);
    }
}
