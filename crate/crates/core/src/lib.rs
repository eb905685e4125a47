//! Node isolation probability of wireless ad hoc networks whose nodes form
//! a planar Poisson point process, under path loss, lognormal shadowing and
//! Nakagami-m fading with optional MRC/SC receive diversity.
//!
//! - [`specialfn`]: gamma and incomplete-gamma functions
//! - [`channel`]: channel parameters and per-link success probabilities
//! - [`analytic`]: closed-form E[R²] and isolation probability
//! - [`quadrature`]: numerical evaluation of the defining integrals
//! - [`simulator`]: Monte Carlo estimation over random topologies

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod channel;
pub mod error;
pub mod quadrature;
pub mod simulator;
pub mod specialfn;

pub use analytic::{expected_r2, isolation_probability, min_density_for_isolation, IsolationQuery};
pub use channel::{build_beta_table, BetaTable, ChannelParams, DiversityScheme, LinkModel};
pub use error::{Error, Result};
pub use simulator::{run_monte_carlo, Boundary, MonteCarloEstimate, SimConfig, Topology};
