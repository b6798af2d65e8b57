//! Stochastic runoff on hill-slope lattices and rooted drainage trees.
//!
//! Rain falls on every cell of a drainage tree, some of it infiltrates, and
//! whatever is left over runs towards the root. With point contributions
//! `X_i` the equilibrium runoff out of node `i` is
//!
//! ```text
//! W_i = (X_i + sum_{j -> i} W_j) v 0
//! ```
//!
//! The crate is organised as follows:
//!
//! * [`params`]: shared parameter types ([`BinaryParams`], [`XLaw`]) and the
//!   deterministic random stream contract ([`RngStream`]).
//! * [`lattice`]: the square-lattice hill-slope simulation with exponential
//!   infiltration and random diversion.
//! * [`tree`]: critical Galton-Watson and diamond-lattice drainage tree samplers.
//! * [`runoff`]: runoff on a given tree, the rooted-subtree max-sum oracle and
//!   contributing-node measurement.
//! * [`analytics`]: closed-form results for two-point `X`.
//! * [`general`]: the left-continuous `X` extension at `beta = 1/2`.
//! * [`montecarlo`]: the sampling harness and independent numerical oracles.

pub mod analytics;
pub mod error;
pub mod general;
pub mod lattice;
pub mod montecarlo;
pub mod params;
pub mod poly;
pub mod runoff;
pub mod search;
pub mod stats;
pub mod tree;

pub use analytics::{ExactSolution, Regime, Tail};
pub use error::{Error, Result};
pub use general::GeneralSolution;
pub use lattice::{LatticeField, LatticeParams};
pub use params::{BinaryParams, BranchKind, ParamsConfig, RngStream, XLaw};
pub use tree::{SampleCaps, Sampled, Tree};
