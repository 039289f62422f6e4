//! Monotone bid functions on a (possibly non-uniform) grid of types.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::uniform_grid;

/// Per-step monotonicity floor for bid functions that must be strictly increasing.
pub const EPS_MONO: f64 = 1e-9;

/// A piecewise-linear bid function `θ ↦ b(θ)` on `[0, 1]`.
///
/// Nodes are strictly increasing from 0 to 1 and values are nondecreasing.
/// The inverse maps bids below the range to 0 and above it to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidFunction {
    theta: Vec<f64>,
    values: Vec<f64>,
    identity: bool,
}

impl BidFunction {
    pub fn new(theta: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if theta.len() != values.len() || theta.len() < 2 {
            return Err(Error::InvalidBidFunction("need at least two nodes of equal length"));
        }
        if theta[0] != 0.0 || theta[theta.len() - 1] != 1.0 {
            return Err(Error::InvalidBidFunction("type nodes must span [0, 1]"));
        }
        if !theta.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidBidFunction("type nodes must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBidFunction("non-finite bid"));
        }
        if !values.windows(2).all(|w| w[1] >= w[0] - 1e-12) {
            return Err(Error::InvalidBidFunction("bids must be nondecreasing"));
        }
        Ok(Self { theta, values, identity: false })
    }

    /// Skips the monotonicity check. Only evaluation (`eval`) is meaningful on
    /// a non-monotone function; used to build deliberately perturbed profiles.
    pub fn new_unchecked(theta: Vec<f64>, values: Vec<f64>) -> Self {
        Self { theta, values, identity: false }
    }

    /// Sample `f` on a uniform grid of `n` nodes.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let theta = uniform_grid(n);
        let values = theta.iter().map(|&t| f(t)).collect();
        Self::new(theta, values)
    }

    /// Truthful bidding `b(θ) = θ`.
    pub fn identity(n: usize) -> Self {
        let theta = uniform_grid(n);
        Self { values: theta.clone(), theta, identity: true }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn min_bid(&self) -> f64 {
        self.values[0]
    }

    pub fn max_bid(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.theta.len();
        self.theta.partition_point(|&t| t <= x).clamp(1, n - 1) - 1
    }

    pub fn eval(&self, theta: f64) -> f64 {
        if self.identity {
            return theta.clamp(0.0, 1.0);
        }
        let x = theta.clamp(0.0, 1.0);
        let k = self.segment(x);
        let (t0, t1) = (self.theta[k], self.theta[k + 1]);
        let w = (x - t0) / (t1 - t0);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    /// Largest `θ` with `b(θ) ≤ bid` (0 below the range, 1 above it).
    pub fn inverse(&self, bid: f64) -> f64 {
        if self.identity {
            return bid.clamp(0.0, 1.0);
        }
        if bid < self.min_bid() {
            return 0.0;
        }
        if bid >= self.max_bid() {
            return 1.0;
        }
        let j = self.values.partition_point(|&v| v <= bid);
        // values[j-1] <= bid < values[j]
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        let (t0, t1) = (self.theta[j - 1], self.theta[j]);
        t0 + (bid - v0) / (v1 - v0) * (t1 - t0)
    }

    /// Slopes at the nodes: central differences inside, one-sided at the ends.
    pub fn node_slopes(&self) -> Vec<f64> {
        (0..self.theta.len())
            .map(|k| {
                if self.identity {
                    return 1.0;
                }
                self.node_slope(k)
            })
            .collect()
    }

    /// Derivative `b'(θ)`, linearly interpolated between node slopes.
    pub fn derivative(&self, theta: f64) -> f64 {
        if self.identity {
            return 1.0;
        }
        let x = theta.clamp(0.0, 1.0);
        let k = self.segment(x);
        let s0 = self.node_slope(k);
        let s1 = self.node_slope(k + 1);
        let w = (x - self.theta[k]) / (self.theta[k + 1] - self.theta[k]);
        s0 + w * (s1 - s0)
    }

    /// Central secant in the interior. At the two ends, the slope of the
    /// quadratic through the three outermost nodes (unless that turns
    /// negative), so the end slopes are second-order accurate as well.
    fn node_slope(&self, k: usize) -> f64 {
        let n = self.theta.len();
        let (t, v) = (&self.theta, &self.values);
        let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
        let secant = (v[b] - v[a]) / (t[b] - t[a]);
        if n < 3 || (k > 0 && k + 1 < n) {
            return secant;
        }
        let c = k.clamp(1, n - 2);
        let (x0, x1, x2) = (t[c - 1], t[c], t[c + 1]);
        let x = t[k];
        let slope = v[c - 1] * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + v[c] * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + v[c + 1] * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1));
        if slope >= 0.0 || secant < 0.0 {
            slope
        } else {
            secant
        }
    }

    /// Every step increases.
    pub fn is_strictly_increasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] > w[0])
    }

    /// No step decreases by more than `eps`.
    pub fn is_monotone(&self, eps: f64) -> bool {
        self.values.windows(2).all(|w| w[1] - w[0] >= -eps)
    }

    /// `sup_θ |self(θ) − other(θ)|`, checked at the nodes of both functions.
    pub fn sup_distance(&self, other: &BidFunction) -> f64 {
        self.theta
            .iter()
            .chain(other.theta.iter())
            .map(|&t| (self.eval(t) - other.eval(t)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup distance between the two graphs measured along anti-diagonals.
    ///
    /// Both graphs are parametrised by `σ = (θ + b)/2`, which stays well
    /// defined through flat and vertical segments, and compared in
    /// `δ = b − θ`. Unlike [`sup_distance`](Self::sup_distance) this is not
    /// inflated by a near-vertical jump that sits slightly to one side.
    pub fn graph_distance(&self, other: &BidFunction) -> f64 {
        let a = self.rotated();
        let b = other.rotated();
        a.0.iter()
            .chain(b.0.iter())
            .map(|&s| (lerp(&a.0, &a.1, s) - lerp(&b.0, &b.1, s)).abs())
            .fold(0.0, f64::max)
    }

    fn rotated(&self) -> (Vec<f64>, Vec<f64>) {
        let mut sig: Vec<f64> = Vec::with_capacity(self.theta.len());
        let mut del: Vec<f64> = Vec::with_capacity(self.theta.len());
        for (&t, &b) in self.theta.iter().zip(&self.values) {
            let s = 0.5 * (t + b);
            match sig.last() {
                Some(&l) if s <= l => {}
                _ => {
                    sig.push(s);
                    del.push(b - t);
                }
            }
        }
        (sig, del)
    }

    /// Resample on a uniform grid of `n` nodes.
    pub fn resample(&self, n: usize) -> BidFunction {
        if self.identity {
            return BidFunction::identity(n);
        }
        let theta = uniform_grid(n);
        let values = theta.iter().map(|&t| self.eval(t)).collect();
        Self { theta, values, identity: false }
    }

    /// Number of sign changes of `b(θ) − θ` across the nodes, ignoring
    /// values within `tol` of zero.
    pub fn identity_crossings(&self, tol: f64) -> usize {
        let mut last = 0i8;
        let mut count = 0;
        for (t, v) in self.theta.iter().zip(&self.values) {
            let d = v - t;
            let s = if d > tol {
                1
            } else if d < -tol {
                -1
            } else {
                0
            };
            if s != 0 {
                if last != 0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }
}

fn lerp(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    let last = x.len() - 1;
    if at >= x[last] {
        return y[last];
    }
    let k = x.partition_point(|&v| v <= at) - 1;
    let w = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + w * (y[k + 1] - y[k])
}

/// Pool-adjacent-violators projection of `y` onto nondecreasing sequences
/// (equal weights). Returns the projection and the number of nodes moved by
/// more than `1e-9` (rounding-level ties are not counted).
pub fn isotonic(y: &[f64]) -> (Vec<f64>, usize) {
    let mut means: Vec<f64> = Vec::with_capacity(y.len());
    let mut sizes: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        means.push(v);
        sizes.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m2, s2) = (means.pop().unwrap(), sizes.pop().unwrap());
            let (m1, s1) = (means.pop().unwrap(), sizes.pop().unwrap());
            let s = s1 + s2;
            means.push((m1 * s1 as f64 + m2 * s2 as f64) / s as f64);
            sizes.push(s);
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, s) in means.iter().zip(&sizes) {
        out.extend(core::iter::repeat_n(*m, *s));
    }
    let changed = out.iter().zip(y).filter(|(a, b)| (*a - *b).abs() > 1e-9).count();
    (out, changed)
}
