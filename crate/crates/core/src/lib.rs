//! Minimal power-cost matchings of Poisson point configurations: exact
//! finite solvers, explicit constructions on the line, verification
//! predicates and Palm Monte Carlo estimators.

pub mod costs;
pub mod error;
pub mod finite_match;
pub mod line;
pub mod points;
pub mod render;
pub mod stats;
pub mod verify;
pub mod walk;

pub use costs::{CostSpec, MatchScore};
pub use error::{Error, Result};
pub use finite_match::{solve_min, Matching};
pub use points::{Colour, Mode, PointConfig, PointRef, Seed, Window};
