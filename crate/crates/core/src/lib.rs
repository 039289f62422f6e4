//! Numerical solver for data-driven equilibria of standard auctions.
//!
//! Two bidders hold correlated interim types `θ ∈ [0,1]` (the probability that
//! their ex-post value is 1). A share `λ` of bidders is rational; the rest are
//! misspecified and best-respond to the empirical distribution of the
//! opponent's bid conditional on their own ex-post value, `H(b | v)`.
//!
//! The crate is `no_std` (with `alloc`). Everything here is pure computation:
//! densities, beliefs, equilibrium solvers, welfare metrics, seeded
//! simulation and the inefficiency diagnostics. File formats and the command
//! line live in the `ddeq` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod beliefs;
pub mod bid;
pub mod density;
pub mod diagnostics;
pub mod equilibrium;
mod error;
pub(crate) mod math;
pub mod metrics;
pub mod quadrature;
pub mod rng;
pub mod simulate;

pub use beliefs::{belief_derivatives, beliefs_fpa, beliefs_spa, BeliefPair};
pub use bid::BidFunction;
pub use density::{PowerKernel, TypeDensity};
pub use equilibrium::{
    foc_residual, fpa_rational_closed_form, solve, m_best_response_fpa, m_best_response_spa,
    solve_fpa_pure, solve_spa, Convergence, EquilibriumProfile, Format, Population,
    SolverOptions,
};
pub use error::{Error, Result};
pub use metrics::{efficiency, efficiency_monte_carlo, marginal_welfare_loss, revenue, MetricsReport};
pub use diagnostics::{lemma8_residual, prop1_condition, truthful_foc_spa_k, DiscreteValueModel, McEstimate};
pub use simulate::{consistency_check, empirical_beliefs, generate_dataset, AuctionRecord, Bidder};
