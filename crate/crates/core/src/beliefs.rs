//! Beliefs of the misspecified type: the opponent's bid distribution
//! conditional on one's own ex-post value, `H(b | v = 1)` and `H(b | v = 0)`.
//!
//! Under the power-kernel density these reduce to value-weighted type CDFs
//! evaluated at the inverse bid functions,
//!
//! ```text
//! H(b | 1) = λ A1(θr(b)) + (1 − λ) A1(θm(b)),   A1(x) = E[θi 1{θj ≤ x}] / E[θ]
//! H(b | 0) = λ A0(θr(b)) + (1 − λ) A0(θm(b)),   A0(x) = E[(1−θi) 1{θj ≤ x}] / E[1−θ]
//! ```
//!
//! and both `A` functions have closed forms, so beliefs are exact up to the
//! interpolation of the bid functions themselves.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bid::BidFunction;
use crate::density::{PowerKernel, TypeDensity};
use crate::error::{check_unit, Error, Result};

/// The profile a belief pair was derived from, kept so beliefs can be
/// evaluated exactly between grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefSource {
    pub kernel: PowerKernel,
    pub lambda: f64,
    pub br: BidFunction,
    pub bm: BidFunction,
}

/// Tabulated `H(·|1)`, `H(·|0)` and (optionally) their derivatives on a
/// uniform bid grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefPair {
    pub bids: Vec<f64>,
    pub h1: Vec<f64>,
    pub h0: Vec<f64>,
    pub dh1: Option<Vec<f64>>,
    pub dh0: Option<Vec<f64>>,
    #[serde(skip)]
    source: Option<BeliefSource>,
}

fn inverse_slope(b: &BidFunction, bid: f64) -> f64 {
    if b.is_identity() {
        return if (0.0..=1.0).contains(&bid) { 1.0 } else { 0.0 };
    }
    if bid < b.min_bid() || bid > b.max_bid() {
        return 0.0;
    }
    let s = b.derivative(b.inverse(bid));
    1.0 / s.max(1e-12)
}

impl BeliefSource {
    fn h(&self, bid: f64, one: bool) -> f64 {
        let k = &self.kernel;
        let a = |x: f64| if one { k.a1(x) } else { k.a0(x) };
        let r = a(self.br.inverse(bid));
        let m = a(self.bm.inverse(bid));
        self.lambda * r + (1.0 - self.lambda) * m
    }

    fn dh(&self, bid: f64, one: bool) -> f64 {
        let k = &self.kernel;
        let ap = |x: f64| if one { k.a1_prime(x) } else { k.a0_prime(x) };
        let mut acc = 0.0;
        if self.lambda > 0.0 {
            acc += self.lambda * ap(self.br.inverse(bid)) * inverse_slope(&self.br, bid);
        }
        if self.lambda < 1.0 {
            acc += (1.0 - self.lambda) * ap(self.bm.inverse(bid)) * inverse_slope(&self.bm, bid);
        }
        acc
    }

    fn unconditional_cdf(&self, bid: f64) -> f64 {
        let k = &self.kernel;
        self.lambda * k.marginal_cdf(self.br.inverse(bid))
            + (1.0 - self.lambda) * k.marginal_cdf(self.bm.inverse(bid))
    }
}

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    let n = x.len();
    if at <= x[0] {
        return y[0];
    }
    if at >= x[n - 1] {
        return y[n - 1];
    }
    let k = x.partition_point(|&v| v <= at) - 1;
    let w = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + w * (y[k + 1] - y[k])
}

impl BeliefPair {
    /// A pair from raw tables (e.g. empirical estimates). No exact source.
    pub fn from_tables(bids: Vec<f64>, h1: Vec<f64>, h0: Vec<f64>) -> Result<Self> {
        if bids.len() != h1.len() || bids.len() != h0.len() || bids.len() < 2 {
            return Err(Error::InvalidArgument("belief tables must share a grid of length ≥ 2"));
        }
        Ok(Self { bids, h1, h0, dh1: None, dh0: None, source: None })
    }

    pub fn source(&self) -> Option<&BeliefSource> {
        self.source.as_ref()
    }

    pub fn has_derivatives(&self) -> bool {
        self.dh1.is_some() && self.dh0.is_some()
    }

    pub fn max_bid(&self) -> f64 {
        self.bids[self.bids.len() - 1]
    }

    /// `H(b | v = 1)`.
    pub fn h1_at(&self, bid: f64) -> f64 {
        match &self.source {
            Some(s) => s.h(bid, true),
            None => interp(&self.bids, &self.h1, bid),
        }
    }

    /// `H(b | v = 0)`.
    pub fn h0_at(&self, bid: f64) -> f64 {
        match &self.source {
            Some(s) => s.h(bid, false),
            None => interp(&self.bids, &self.h0, bid),
        }
    }

    pub fn dh1_at(&self, bid: f64) -> f64 {
        match (&self.source, &self.dh1) {
            (Some(s), _) => s.dh(bid, true),
            (None, Some(t)) => interp(&self.bids, t, bid),
            (None, None) => f64::NAN,
        }
    }

    pub fn dh0_at(&self, bid: f64) -> f64 {
        match (&self.source, &self.dh0) {
            (Some(s), _) => s.dh(bid, false),
            (None, Some(t)) => interp(&self.bids, t, bid),
            (None, None) => f64::NAN,
        }
    }

    /// `P[b_j ≤ b]` implied by the source profile.
    pub fn unconditional_cdf(&self, bid: f64) -> Option<f64> {
        self.source.as_ref().map(|s| s.unconditional_cdf(bid))
    }

    /// Central finite differences of the `H` tables (one-sided at the ends).
    /// Kept as a cross-check for the analytic derivatives.
    pub fn finite_difference_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let fd = |y: &[f64]| {
            let n = y.len();
            (0..n)
                .map(|k| {
                    let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
                    (y[b] - y[a]) / (self.bids[b] - self.bids[a])
                })
                .collect()
        };
        (fd(&self.h1), fd(&self.h0))
    }
}

fn build(density: &TypeDensity, br: &BidFunction, bm: &BidFunction, lambda: f64) -> Result<BeliefPair> {
    check_unit("lambda", lambda)?;
    for b in [br, bm] {
        if !b.is_monotone(1e-12) {
            return Err(Error::InvalidBidFunction("strategy must be nondecreasing"));
        }
    }
    let n = density.grid_n();
    let top = br.max_bid().max(bm.max_bid());
    if !(top > 0.0) {
        return Err(Error::InvalidBidFunction("strategy never bids above zero"));
    }
    let bids: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { top } else { top * k as f64 / (n - 1) as f64 })
        .collect();
    let source = BeliefSource {
        kernel: *density.kernel(),
        lambda,
        br: br.clone(),
        bm: bm.clone(),
    };
    let h1 = bids.iter().map(|&b| source.h(b, true)).collect();
    let h0 = bids.iter().map(|&b| source.h(b, false)).collect();
    Ok(BeliefPair { bids, h1, h0, dh1: None, dh0: None, source: Some(source) })
}

/// Beliefs in the second-price auction, where rational bidders bid their
/// interim value.
pub fn beliefs_spa(density: &TypeDensity, bm: &BidFunction, lambda: f64) -> Result<BeliefPair> {
    let br = BidFunction::identity(density.grid_n());
    build(density, &br, bm, lambda)
}

/// Beliefs in the first-price auction for rational strategy `br` and
/// misspecified strategy `bm`.
pub fn beliefs_fpa(
    density: &TypeDensity,
    br: &BidFunction,
    bm: &BidFunction,
    lambda: f64,
) -> Result<BeliefPair> {
    build(density, br, bm, lambda)
}

/// Fill the derivative tables. With a source profile the derivatives are
/// analytic (type density times inverse-bid slope); tables without a source
/// fall back to finite differences.
pub fn belief_derivatives(mut pair: BeliefPair) -> BeliefPair {
    let (d1, d0) = match &pair.source {
        Some(s) => (
            pair.bids.iter().map(|&b| s.dh(b, true)).collect(),
            pair.bids.iter().map(|&b| s.dh(b, false)).collect(),
        ),
        None => {
            log::warn!("belief pair has no source profile; using finite differences");
            pair.finite_difference_derivatives()
        }
    };
    pair.dh1 = Some(d1);
    pair.dh0 = Some(d0);
    pair
}
