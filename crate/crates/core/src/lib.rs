//! Stochastic Stackelberg pricing for ridesharing and the value of sharing
//! demand information with drivers.
//!
//! * [`model`]: instance data and the closed-form demand, reallocation and
//!   cost formulas.
//! * [`follower`]: the drivers' reallocation problem for fixed prices.
//! * [`reform`]: single-level mixed-integer bilinear reformulations of the
//!   company's problem, with and without shared information.
//! * [`evsi`]: finite-game indicators and Monte-Carlo estimates.
//! * [`oracle`]: brute-force price search used to cross-check the
//!   reformulations.

pub mod error;
pub mod evsi;
pub mod follower;
pub mod model;
pub mod oracle;
pub mod reform;

pub use error::{EvsiError, Result};
pub use model::{BetaRegion, CityInstance, FlowMatrix, FollowerBelief, Mode, PriceVector, Realization};
