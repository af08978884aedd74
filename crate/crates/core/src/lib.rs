//! Random loop models of quantum spin systems.
//!
//! Monte Carlo sampling of the loop measure `θ^{|L(ω)|} dρ_u(ω)`, loop and
//! spin correlation estimators, an exact-diagonalization reference for small
//! graphs, infrared-bound integrals and Poisson–Dirichlet statistics.

pub mod error;
pub mod graph;
pub mod infrared;
pub mod loopconfig;
pub mod mcmc;
pub mod model;
pub mod observables;
pub mod pdstats;
pub mod quantum;

pub use error::{Error, Result};
