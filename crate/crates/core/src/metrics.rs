//! Revenue and allocative efficiency of an equilibrium profile.
//!
//! Bidders are independently rational (probability `λ`) or misspecified, so
//! every expectation is a mixture over four sophistication cells with weights
//! `λ²`, `λ(1−λ)` (twice) and `(1−λ)²`. Within a cell the expectation over
//! `(θ1, θ2)` reduces to a one-dimensional integral through the closed-form
//! joint CDF:
//!
//! * second-highest bid: `∫ P[b1 > z, b2 > z] dz`,
//! * highest bid: `∫ (1 − P[b1 ≤ z, b2 ≤ z]) dz`,
//! * welfare loss when bidder 2 wins against a higher type:
//!   `∫ c p1(|κ(θ2) − θ2|) dθ2`, where `κ = b1⁻¹ ∘ b2` is the bidder-1 type
//!   tying with `θ2` and `c p1(x)` is the density mass-weighted gap over a
//!   band of width `x` next to the diagonal.
//!
//! Monte Carlo versions of the same quantities serve as a cross-check.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bid::BidFunction;
use crate::density::{PowerKernel, TypeDensity};
use crate::equilibrium::{fpa_rational_closed_form, m_best_response_spa, EquilibriumProfile, Format};
use crate::beliefs::{belief_derivatives, beliefs_fpa, beliefs_spa};
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::quadrature::{merge_breaks, GaussLegendre};
use crate::rng;

const GL_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// Standard errors of a Monte Carlo report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStdError {
    pub revenue: f64,
    pub welfare: f64,
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format: Format,
    pub alpha: f64,
    pub lambda: f64,
    /// Expected payment to the seller.
    pub revenue: f64,
    /// `welfare / first_best`.
    pub efficiency: f64,
    /// `E[max(θ1, θ2)]`.
    pub first_best: f64,
    /// Expected interim type of the winner.
    pub welfare: f64,
    pub method: Method,
    pub mc_std_error: Option<McStdError>,
}

fn require_converged(profile: &EquilibriumProfile) -> Result<()> {
    if profile.convergence.converged {
        Ok(())
    } else {
        Err(Error::NotConverged)
    }
}

/// Cells `(bidder 1, bidder 2, weight)` with nonzero weight.
fn cells(profile: &EquilibriumProfile) -> Vec<(&BidFunction, &BidFunction, f64)> {
    let l = profile.lambda;
    let (r, m) = (&profile.br, &profile.bm);
    [(r, r, l * l), (r, m, l * (1.0 - l)), (m, r, (1.0 - l) * l), (m, m, (1.0 - l) * (1.0 - l))]
        .into_iter()
        .filter(|c| c.2 > 0.0)
        .collect()
}

fn bid_breaks(b1: &BidFunction, b2: &BidFunction) -> Vec<f64> {
    let hi = b1.max_bid().max(b2.max_bid());
    merge_breaks(0.0, hi, b1.values().iter().chain(b2.values()).copied())
}

/// `E[min(b1(θ1), b2(θ2))]`.
fn expected_second_bid(k: &PowerKernel, b1: &BidFunction, b2: &BidFunction) -> f64 {
    let gl = GaussLegendre::new(GL_ORDER);
    gl.integrate_breaks(&bid_breaks(b1, b2), |z| k.joint_survival(b1.inverse(z), b2.inverse(z)))
}

/// `E[max(b1(θ1), b2(θ2))]`.
fn expected_first_bid(k: &PowerKernel, b1: &BidFunction, b2: &BidFunction) -> f64 {
    let gl = GaussLegendre::new(GL_ORDER);
    gl.integrate_breaks(&bid_breaks(b1, b2), |z| 1.0 - k.joint_cdf(b1.inverse(z), b2.inverse(z)))
}

/// Expected shortfall from the first best when bidder 1 plays `b1` and
/// bidder 2 plays `b2` (ties have measure zero).
pub fn pair_welfare_loss(k: &PowerKernel, b1: &BidFunction, b2: &BidFunction) -> f64 {
    let gl = GaussLegendre::new(GL_ORDER);
    let mut breaks: Vec<f64> = b2.nodes().to_vec();
    // Kinks of κ: where b2 crosses a node bid of b1.
    breaks.extend(b1.values().iter().map(|&v| b2.inverse(v)));
    breaks.extend(k.layer_breaks());
    let breaks = merge_breaks(0.0, 1.0, breaks);
    k.norm() * gl.integrate_breaks(&breaks, |t| k.p1((b1.inverse(b2.eval(t)) - t).abs()))
}

/// Expected revenue: the second-highest bid in the second-price auction,
/// the highest bid in the first-price auction.
pub fn revenue(profile: &EquilibriumProfile, density: &TypeDensity) -> Result<f64> {
    require_converged(profile)?;
    let k = density.kernel();
    Ok(cells(profile)
        .into_iter()
        .map(|(b1, b2, w)| {
            w * match profile.format {
                Format::Spa => expected_second_bid(k, b1, b2),
                Format::Fpa => expected_first_bid(k, b1, b2),
            }
        })
        .sum())
}

/// Revenue, welfare and efficiency by quadrature.
pub fn efficiency(profile: &EquilibriumProfile, density: &TypeDensity) -> Result<MetricsReport> {
    let rev = revenue(profile, density)?;
    let k = density.kernel();
    let first_best = density.first_best();
    let loss: f64 = cells(profile)
        .into_iter()
        .filter(|(b1, b2, _)| b1 != b2)
        .map(|(b1, b2, w)| w * pair_welfare_loss(k, b1, b2))
        .sum();
    let welfare = first_best - loss;
    Ok(MetricsReport {
        format: profile.format,
        alpha: profile.alpha,
        lambda: profile.lambda,
        revenue: rev,
        efficiency: welfare / first_best,
        first_best,
        welfare,
        method: Method::Quadrature,
        mc_std_error: None,
    })
}

/// The same report estimated from `n` simulated auctions.
///
/// Types are drawn from the density, sophistication independently with
/// probability `λ` of being rational; ties are broken by a fair coin.
pub fn efficiency_monte_carlo(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
) -> Result<MetricsReport> {
    require_converged(profile)?;
    if n < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least two draws"));
    }
    let k = density.kernel();
    let mut r = rng::stream(seed, 0);
    let (mut sr, mut sr2, mut sw, mut sw2) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let (t1, t2) = k.sample_pair(&mut r);
        let s1 = if rng::bernoulli(&mut r, profile.lambda) { &profile.br } else { &profile.bm };
        let s2 = if rng::bernoulli(&mut r, profile.lambda) { &profile.br } else { &profile.bm };
        let (x1, x2) = (s1.eval(t1), s2.eval(t2));
        let one_wins = x1 > x2 || (x1 == x2 && rng::bernoulli(&mut r, 0.5));
        let pay = match profile.format {
            Format::Spa => x1.min(x2),
            Format::Fpa => x1.max(x2),
        };
        let w = if one_wins { t1 } else { t2 };
        sr += pay;
        sr2 += pay * pay;
        sw += w;
        sw2 += w * w;
    }
    let nf = n as f64;
    let se = |s: f64, s2: f64| sqrt(((s2 - s * s / nf) / (nf - 1.0)).max(0.0) / nf);
    let first_best = density.first_best();
    let (revenue, welfare) = (sr / nf, sw / nf);
    let (se_r, se_w) = (se(sr, sr2), se(sw, sw2));
    Ok(MetricsReport {
        format: profile.format,
        alpha: profile.alpha,
        lambda: profile.lambda,
        revenue,
        efficiency: welfare / first_best,
        first_best,
        welfare,
        method: Method::MonteCarlo,
        mc_std_error: Some(McStdError { revenue: se_r, welfare: se_w, efficiency: se_w / first_best }),
    })
}

/// Efficiency lost, relative to the first best, when bidder 1 plays the
/// all-rational equilibrium and bidder 2 the misspecified best response to
/// the data it generates: the loss from injecting a small share of
/// misspecified bidders into a rational population.
pub fn marginal_welfare_loss(format: Format, density: &TypeDensity) -> Result<f64> {
    let (br, bm) = rational_and_response(format, density)?;
    Ok(pair_welfare_loss(density.kernel(), &br, &bm) / density.first_best())
}

/// The all-rational equilibrium strategy and the misspecified best
/// response to it.
pub fn rational_and_response(format: Format, density: &TypeDensity) -> Result<(BidFunction, BidFunction)> {
    match format {
        Format::Spa => {
            let br = BidFunction::identity(density.grid_n());
            let beliefs = belief_derivatives(beliefs_spa(density, &br, 1.0)?);
            let bm = m_best_response_spa(&beliefs)?;
            Ok((br, bm))
        }
        Format::Fpa => {
            let br = fpa_rational_closed_form(density);
            let beliefs = belief_derivatives(beliefs_fpa(density, &br, &br, 1.0)?);
            let bm = crate::equilibrium::m_best_response_fpa(&beliefs)?;
            Ok((br, bm))
        }
    }
}
