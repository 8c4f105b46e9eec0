//! Mixed-integer bilinear programming.
//!
//! The crate provides three layers:
//!
//! * [`lp`]: a dense revised simplex for bounded linear programs, with warm
//!   starts from a previous basis (dual simplex when the basis stays dual
//!   feasible, composite primal otherwise).
//! * [`mccormick`]: the four-inequality envelope of a bilinear product.
//! * [`bnb`]: best-first branch-and-bound over integer variables and spatial
//!   branching on bilinear factors, driven by McCormick relaxations.
//!
//! Problems are described with [`MibpProblem`] and can be written to or read
//! from a plain-text format with [`format`].

pub mod bnb;
pub mod error;
pub mod format;
pub mod lp;
pub mod mccormick;
pub mod problem;

pub use bnb::{solve, solve_with_start, MibpSolution, NodeLog, SolveStatus, SolverConfig};
pub use error::MibpError;
pub use problem::{BilinearTerm, MibpProblem, RowSense, TermLocation, VarId, VarKind, Variable};
