//! Data-driven equilibria of the second- and first-price auctions.
//!
//! * SPA, any `λ`: rational bidders bid their interim value; the
//!   misspecified strategy solves a two-point boundary value problem, see
//!   [`solve_spa`].
//! * FPA, `λ = 1`: the symmetric rational equilibrium has an integral
//!   representation ([`fpa_rational_closed_form`]); the misspecified best
//!   response to it is [`m_best_response_fpa`].
//! * FPA, `λ = 0`: all bidders misspecified, a linear singular ODE.
//!
//! Mixed-population FPA equilibria are not computed.

mod best_response;
mod fpa;
mod spa;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::beliefs::BeliefPair;
use crate::bid::BidFunction;
use crate::density::TypeDensity;

pub use best_response::{m_best_response_fpa, m_best_response_spa, objective, BestResponse};
pub use fpa::{fpa_rational_bid, fpa_rational_closed_form, solve_fpa_pure};
pub use spa::solve_spa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Spa,
    Fpa,
}

impl Format {
    pub fn as_str(&self) -> &'static str {
        match self {
            Format::Spa => "spa",
            Format::Fpa => "fpa",
        }
    }
}

impl core::str::FromStr for Format {
    type Err = crate::Error;
    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spa" => Ok(Format::Spa),
            "fpa" => Ok(Format::Fpa),
            _ => Err(crate::Error::InvalidArgument("format must be spa or fpa")),
        }
    }
}

/// Which pure population to solve in the first-price auction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Population {
    AllRational,
    AllMisspecified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Sup-norm tolerance on the Newton update and on the fixed-point check.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking factor of the Newton line search, in `(0, 1]`.
    pub damping: f64,
    /// Also solve from a second starting curve and report the distance.
    pub robustness_run: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 500, damping: 0.5, robustness_run: true }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(crate::Error::Domain { what: "tol", value: self.tol });
        }
        if self.max_iter == 0 {
            return Err(crate::Error::InvalidArgument("max_iter must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(crate::Error::Domain { what: "damping", value: self.damping });
        }
        Ok(())
    }
}

/// Equilibrium of `format` with rational share `lambda`.
///
/// First-price equilibria are computed only for pure populations
/// (`lambda` 0 or 1); mixed populations are rejected as unsupported.
pub fn solve(
    density: &TypeDensity,
    format: Format,
    lambda: f64,
    opts: &SolverOptions,
) -> crate::Result<EquilibriumProfile> {
    match format {
        Format::Spa => solve_spa(density, lambda, opts),
        Format::Fpa if lambda == 1.0 => solve_fpa_pure(density, Population::AllRational, opts),
        Format::Fpa if lambda == 0.0 => solve_fpa_pure(density, Population::AllMisspecified, opts),
        Format::Fpa => Err(crate::Error::Unsupported(
            "first-price equilibria with mixed populations (lambda strictly between 0 and 1)",
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    /// Sup-norm distance between the strategy and one more best-response step.
    pub final_change: f64,
    pub converged: bool,
    /// Largest residual of the discretized equilibrium equations.
    pub max_residual: f64,
    /// Nodes modified by the monotone projection.
    pub pooled_nodes: usize,
    /// Distance to the solution reached from the alternative start, if run.
    pub robustness_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub format: Format,
    pub alpha: f64,
    pub lambda: f64,
    pub br: BidFunction,
    pub bm: BidFunction,
    #[serde(skip_serializing)]
    #[serde(default = "empty_beliefs")]
    pub beliefs: BeliefPair,
    pub convergence: Convergence,
}

fn empty_beliefs() -> BeliefPair {
    BeliefPair::from_tables(alloc::vec![0.0, 1.0], alloc::vec![0.0, 1.0], alloc::vec![0.0, 1.0])
        .expect("static tables")
}

impl EquilibriumProfile {
    /// Copy of the profile whose misspecified strategy is shifted by `shift`
    /// on `[lo, hi]`, keeping the original beliefs. Useful to check that the
    /// self-consistency test detects a profile that is not an equilibrium.
    pub fn with_perturbed_bm(&self, lo: f64, hi: f64, shift: f64) -> Self {
        let mut theta: Vec<f64> = self.bm.nodes().to_vec();
        theta.extend([lo, hi]);
        theta.sort_by(f64::total_cmp);
        theta.dedup();
        let values = theta
            .iter()
            .map(|&t| self.bm.eval(t) + if (lo..=hi).contains(&t) { shift } else { 0.0 })
            .collect();
        let mut out = self.clone();
        out.bm = BidFunction::new_unchecked(theta, values);
        out
    }
}

/// Derivative of the misspecified type's perceived objective at bid `b`.
pub fn foc(format: Format, beliefs: &BeliefPair, theta: f64, b: f64) -> f64 {
    let (d1, d0) = (beliefs.dh1_at(b), beliefs.dh0_at(b));
    match format {
        Format::Spa => theta * (1.0 - b) * d1 - (1.0 - theta) * b * d0,
        Format::Fpa => {
            let (h1, h0) = (beliefs.h1_at(b), beliefs.h0_at(b));
            theta * ((1.0 - b) * d1 - h1) - (1.0 - theta) * (h0 + b * d0)
        }
    }
}

/// The misspecified first-order condition at `(θ, bm(θ))` on every interior node of `bm`.
pub fn foc_residual(profile: &EquilibriumProfile) -> Vec<f64> {
    let nodes = profile.bm.nodes();
    nodes[1..nodes.len() - 1]
        .iter()
        .map(|&t| foc(profile.format, &profile.beliefs, t, profile.bm.eval(t)))
        .collect()
}
