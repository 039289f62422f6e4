use alloc::vec::Vec;

use super::{foc, Format};
use crate::beliefs::BeliefPair;
use crate::bid::{isotonic, BidFunction};
use crate::error::{Error, Result};
use crate::math::bisect;
use crate::quadrature::{cumulative_trapezoid, uniform_grid};

/// A best response together with the number of nodes the monotone
/// projection had to move.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub bid: BidFunction,
    pub pooled_nodes: usize,
}

/// The misspecified type's perceived expected utility of bidding `b` at type
/// `theta`. `int_h1`, `int_h0` are `∫_0^b H(x|·) dx` (only used by the SPA).
pub fn objective(format: Format, theta: f64, b: f64, h1: f64, h0: f64, int_h1: f64, int_h0: f64) -> f64 {
    match format {
        // θ H1(b) − θ ∫ x dH1 − (1−θ) ∫ x dH0, integrated by parts.
        Format::Spa => theta * (1.0 - b) * h1 + theta * int_h1 - (1.0 - theta) * (b * h0 - int_h0),
        Format::Fpa => (1.0 - b) * theta * h1 - b * (1.0 - theta) * h0,
    }
}

/// Grid nodes the first-order polish may move away from the grid maximizer.
const POLISH_WALK: usize = 3;

fn best_response(format: Format, beliefs: &BeliefPair) -> Result<BestResponse> {
    if !beliefs.has_derivatives() {
        return Err(Error::MissingDerivatives);
    }
    let thetas: Vec<f64> = match beliefs.source() {
        Some(s) if !s.bm.is_identity() => s.bm.nodes().to_vec(),
        _ => uniform_grid(beliefs.bids.len()),
    };
    let bids = &beliefs.bids;
    let (c1, c0) = (
        cumulative_trapezoid(bids, &beliefs.h1),
        cumulative_trapezoid(bids, &beliefs.h0),
    );
    let m = bids.len();
    let mut raw = Vec::with_capacity(thetas.len());
    for &theta in &thetas {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for j in 0..m {
            let u = objective(format, theta, bids[j], beliefs.h1[j], beliefs.h0[j], c1[j], c0[j]);
            if u > best.0 {
                best = (u, j);
            }
        }
        let j = best.1;
        let mut b = bids[j];
        // Polish on the first-order condition. Where the objective is flat the
        // grid maximizer can sit a node or two off the root, so walk toward
        // the sign change (a few nodes at most) before bisecting.
        let d = |x: f64| foc(format, beliefs, theta, x);
        let (mut lo, mut hi) = (j.saturating_sub(1), (j + 1).min(m - 1));
        for _ in 0..POLISH_WALK {
            if hi + 1 < m && d(bids[hi]) > 0.0 {
                lo = hi;
                hi += 1;
            } else if lo > 0 && d(bids[lo]) < 0.0 {
                hi = lo;
                lo -= 1;
            } else {
                break;
            }
        }
        if hi > lo {
            let (dl, dh) = (d(bids[lo]), d(bids[hi]));
            if dl >= 0.0 && dh <= 0.0 && !(dl == 0.0 && dh == 0.0) {
                b = bisect(d, bids[lo], bids[hi], 80);
            }
        }
        raw.push(b);
    }
    let (values, pooled) = isotonic(&raw);
    if pooled > 0 {
        log::debug!("best response: pooled {pooled} of {} nodes", raw.len());
    }
    if pooled * 100 > thetas.len() {
        log::warn!("best response: monotone projection moved {pooled} of {} nodes", thetas.len());
    }
    Ok(BestResponse { bid: BidFunction::new(thetas, values)?, pooled_nodes: pooled })
}

/// Best response of a misspecified bidder in the second-price auction.
///
/// For each type the global maximizer over the belief bid grid is located
/// and then refined on the first-order condition
/// `θ(1−b)H'(b|1) = (1−θ) b H'(b|0)`. The result is projected onto monotone
/// functions. Types are the nodes of the strategy the beliefs came from (or
/// a uniform grid when that is the identity).
pub fn m_best_response_spa(beliefs: &BeliefPair) -> Result<BidFunction> {
    best_response(Format::Spa, beliefs).map(|r| r.bid)
}

/// Best response of a misspecified bidder in the first-price auction,
/// maximizing `(1−b)θH(b|1) − b(1−θ)H(b|0)`.
pub fn m_best_response_fpa(beliefs: &BeliefPair) -> Result<BidFunction> {
    best_response(Format::Fpa, beliefs).map(|r| r.bid)
}

pub(crate) fn best_response_report(format: Format, beliefs: &BeliefPair) -> Result<BestResponse> {
    best_response(format, beliefs)
}
