//! First-price auction with a single population.
//!
//! Both pure-population equilibria solve a linear ODE with a regular
//! singular point at the origin,
//!
//! ```text
//! b' + (1/θ + p(θ)) b = q(θ),   b(0) = 0,
//! ```
//!
//! whose solution is `b(θ) = ∫_0^θ (x/θ) exp(P(x) − P(θ)) q(x) dx` with
//! `P = ∫ p`. We evaluate it cell by cell with nested Gauss–Legendre rules,
//! carrying the running integral in a scaled form so that large `α` (where
//! `P` grows like `αθ`) cannot overflow.

use alloc::vec::Vec;

use super::best_response::best_response_report;
use super::{Convergence, EquilibriumProfile, Format, Population, SolverOptions};
use crate::beliefs::{belief_derivatives, beliefs_fpa, BeliefPair};
use crate::bid::BidFunction;
use crate::density::{PowerKernel, TypeDensity};
use crate::error::{Error, Result};
use crate::math::exp;
use crate::quadrature::GaussLegendre;

fn singular_linear<P, Q>(nodes: &[f64], p: P, q: Q) -> Vec<f64>
where
    P: Fn(f64) -> f64,
    Q: Fn(f64) -> f64,
{
    let gl = GaussLegendre::new(12);
    let mut out = Vec::with_capacity(nodes.len());
    out.push(0.0);
    // Running value of θ b(θ) = ∫_0^θ x q(x) exp(P(x) − P(θ)) dx.
    let mut s = 0.0;
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            out.push(*out.last().unwrap());
            continue;
        }
        let dp_cell = gl.integrate(lo, hi, &p);
        // ∫_lo^hi x q(x) exp(P(x) − P(hi)) dx with P(x) − P(hi) = −∫_x^hi p.
        let inc = gl.integrate(lo, hi, |x| x * q(x) * exp(-gl.integrate(x, hi, &p)));
        s = s * exp(-dp_cell) + inc;
        out.push(s / hi);
    }
    out
}

/// `p` and `q` of the rational equilibrium ODE `b' = (θ − b) f(θ|θ)/F(θ|θ)`.
fn rational_coefficients(k: &PowerKernel) -> (impl Fn(f64) -> f64 + '_, impl Fn(f64) -> f64 + '_) {
    let p = move |t: f64| {
        let k1 = k.k1(t);
        (t - k1) / (t * k1)
    };
    let q = move |t: f64| t / k.k1(t);
    (p, q)
}

/// The symmetric equilibrium bid of the all-rational first-price auction at
/// arbitrary increasing `thetas` (which must start at 0).
pub fn fpa_rational_bid(k: &PowerKernel, thetas: &[f64]) -> Vec<f64> {
    let (p, q) = rational_coefficients(k);
    singular_linear(thetas, p, q)
}

/// The all-rational first-price equilibrium
/// `b(θ) = ∫_0^θ x exp(−∫_x^θ r) r(x) dx`, `r(y) = f(y|y)/F(y|y)`, on the
/// density grid.
pub fn fpa_rational_closed_form(density: &TypeDensity) -> BidFunction {
    let nodes = density.grid().to_vec();
    let values = fpa_rational_bid(density.kernel(), &nodes);
    BidFunction::new(nodes, values).expect("rational first-price bid is increasing")
}

/// All bidders misspecified: along `b(θ)` the first-order condition becomes
/// `b' = [θ A1'(θ) − b (θ A1'(θ) + (1−θ) A0'(θ))] / (θ A1(θ) + (1−θ) A0(θ))`.
fn misspecified_bid(k: &PowerKernel, thetas: &[f64]) -> Vec<f64> {
    let p = |t: f64| {
        let (a1, a0) = (k.a1(t), k.a0(t));
        let (d1, d0) = (k.a1_prime(t), k.a0_prime(t));
        let den = t * a1 + (1.0 - t) * a0;
        (t * (t * d1 + (1.0 - t) * d0) - den) / (t * den)
    };
    let q = |t: f64| {
        let den = t * k.a1(t) + (1.0 - t) * k.a0(t);
        t * k.a1_prime(t) / den
    };
    singular_linear(thetas, p, q)
}

/// The all-misspecified strategy on the density grid, its beliefs, and the
/// distance one explicit best-response step moves it.
fn misspecified_profile(density: &TypeDensity) -> Result<(BidFunction, BeliefPair, f64, usize)> {
    let nodes = density.grid().to_vec();
    let values = misspecified_bid(density.kernel(), &nodes);
    let bm = BidFunction::new(nodes, values)
        .map_err(|_| Error::InvalidBidFunction("misspecified first-price bid is not monotone"))?;
    let beliefs = belief_derivatives(beliefs_fpa(density, &bm, &bm, 0.0)?);
    let check = best_response_report(Format::Fpa, &beliefs)?;
    Ok((bm.clone(), beliefs, check.bid.sup_distance(&bm), check.pooled_nodes))
}

/// Pure-population equilibria of the first-price auction.
///
/// * `AllRational`: the closed form; `bm` holds the misspecified best
///   response to data generated by it (a population of zero weight).
/// * `AllMisspecified`: the solution of the misspecified equilibrium ODE,
///   verified with one explicit best-response step; `br` equals `bm`.
pub fn solve_fpa_pure(
    density: &TypeDensity,
    population: Population,
    opts: &SolverOptions,
) -> Result<EquilibriumProfile> {
    opts.validate()?;
    let k = density.kernel();
    match population {
        Population::AllRational => {
            let br = fpa_rational_closed_form(density);
            let beliefs = belief_derivatives(beliefs_fpa(density, &br, &br, 1.0)?);
            let resp = best_response_report(Format::Fpa, &beliefs)?;
            Ok(EquilibriumProfile {
                format: Format::Fpa,
                alpha: k.alpha(),
                lambda: 1.0,
                br,
                bm: resp.bid,
                beliefs,
                convergence: Convergence {
                    iterations: 0,
                    final_change: 0.0,
                    converged: true,
                    max_residual: 0.0,
                    pooled_nodes: resp.pooled_nodes,
                    robustness_gap: None,
                },
            })
        }
        Population::AllMisspecified => {
            let (bm, beliefs, final_change, pooled) = misspecified_profile(density)?;
            let max_residual = bm.nodes()[1..bm.len() - 1]
                .iter()
                .map(|&t| super::foc(Format::Fpa, &beliefs, t, bm.eval(t)).abs())
                .fold(0.0, f64::max);
            // The ODE solution is the exact fixed point; what the explicit
            // check measures beyond `tol` must be grid error, shrinking
            // like h² on a grid twice as fine.
            let converged = final_change < opts.tol || {
                let fine = TypeDensity::new(k.alpha(), 2 * density.grid_n() - 1)?;
                let (_, _, fine_change, _) = misspecified_profile(&fine)?;
                log::debug!("FPA alpha={}: best-response change {final_change:.3e}, {fine_change:.3e} on the refined grid", k.alpha());
                fine_change < opts.tol || fine_change * 3.0 <= final_change
            };
            if !converged {
                log::warn!("FPA alpha={}: best-response check moved bm by {final_change:.3e}", k.alpha());
            }
            Ok(EquilibriumProfile {
                format: Format::Fpa,
                alpha: k.alpha(),
                lambda: 0.0,
                br: bm.clone(),
                bm,
                beliefs,
                convergence: Convergence {
                    iterations: 1,
                    final_change,
                    converged,
                    max_residual,
                    pooled_nodes: pooled,
                    robustness_gap: None,
                },
            })
        }
    }
}
