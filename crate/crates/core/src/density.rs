//! The correlated type density
//! `f(t1, t2) = ((2+α)/2) (1 − |t1 − t2|)^α` on the unit square.
//!
//! `α = 0` is independence; larger `α` concentrates mass on the diagonal
//! (perfect correlation is the limit `α → ∞`, which is not representable —
//! use a large finite `α`). Every probability object the solvers need has a
//! closed form, collected in [`PowerKernel`]. [`TypeDensity`] adds the
//! tabulated view on a uniform grid plus moments and a sampler.

use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::math::{invert_monotone, one_minus_one_minus_pow, one_minus_pow, powf};
use crate::quadrature::uniform_grid;
use crate::rng;

/// Default number of grid nodes per axis.
pub const DEFAULT_GRID_N: usize = 501;

/// Closed-form probability objects of the power-kernel density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerKernel {
    alpha: f64,
}

/// `∫_0^x (1-u)^β du` for `x ∈ [0, 1]`.
#[inline]
fn e(beta: f64, x: f64) -> f64 {
    one_minus_one_minus_pow(x, beta + 1.0) / (beta + 1.0)
}

impl PowerKernel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Domain { what: "alpha", value: alpha });
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Normalizing constant `(2+α)/2`.
    pub fn norm(&self) -> f64 {
        0.5 * (2.0 + self.alpha)
    }

    pub fn joint(&self, t1: f64, t2: f64) -> f64 {
        let d = (t1 - t2).abs().min(1.0);
        if self.alpha == 0.0 {
            return 1.0;
        }
        self.norm() * one_minus_pow(d, self.alpha)
    }

    /// Odd antiderivative `∫_0^x (1-|u|)^α du`, for `x ∈ [-1, 1]`.
    pub fn k1(&self, x: f64) -> f64 {
        let v = e(self.alpha, x.abs().min(1.0));
        if x < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Even second antiderivative `∫_0^d K1`.
    fn k2(&self, d: f64) -> f64 {
        let a = self.alpha;
        let d = d.abs().min(1.0);
        (d - e(a + 1.0, d)) / (a + 1.0)
    }

    /// `∫_0^y f(t, s) ds`.
    pub fn partial_cdf(&self, y: f64, t: f64) -> f64 {
        self.norm() * (self.k1(t) - self.k1(t - y))
    }

    pub fn marginal(&self, t: f64) -> f64 {
        self.norm() * (self.k1(t) + self.k1(1.0 - t))
    }

    pub fn conditional_cdf(&self, y: f64, t: f64) -> f64 {
        let num = self.k1(t) - self.k1(t - y);
        let den = self.k1(t) + self.k1(1.0 - t);
        (num / den).clamp(0.0, 1.0)
    }

    /// `f(y | t)`.
    pub fn conditional_pdf(&self, y: f64, t: f64) -> f64 {
        self.joint(t, y) / self.marginal(t)
    }

    /// `P[θ1 ≤ x, θ2 ≤ y]`.
    pub fn joint_cdf(&self, x: f64, y: f64) -> f64 {
        let v = self.norm() * (self.k2(x) + self.k2(y) - self.k2(x - y));
        v.clamp(0.0, 1.0)
    }

    pub fn marginal_cdf(&self, x: f64) -> f64 {
        self.joint_cdf(x, 1.0)
    }

    /// `P[θ1 > x, θ2 > y]`.
    pub fn joint_survival(&self, x: f64, y: f64) -> f64 {
        let v = 1.0 - self.marginal_cdf(x) - self.marginal_cdf(y) + self.joint_cdf(x, y);
        v.clamp(0.0, 1.0)
    }

    /// `f(θ|θ) / F(θ|θ)`, the hazard-like ratio driving the rational
    /// first-price bid.
    pub fn diagonal_ratio(&self, theta: f64) -> f64 {
        1.0 / self.k1(theta)
    }

    pub fn e_max(&self) -> f64 {
        0.5 + 0.5 / (self.alpha + 3.0)
    }

    pub fn e_min(&self) -> f64 {
        0.5 - 0.5 / (self.alpha + 3.0)
    }

    /// `E[θ²]`.
    pub fn second_moment(&self) -> f64 {
        let a = self.alpha;
        self.norm() / (a + 1.0)
            * (2.0 / 3.0 - 1.0 / (a + 4.0) - 2.0 / ((a + 2.0) * (a + 3.0) * (a + 4.0)))
    }

    /// `E[(θ1 − θ2)²]`.
    pub fn e_sq_diff(&self) -> f64 {
        2.0 / ((self.alpha + 3.0) * (self.alpha + 4.0))
    }

    /// `∫_0^x u (1-u)^α du`.
    pub fn p1(&self, x: f64) -> f64 {
        let a = self.alpha;
        let x = x.clamp(0.0, 1.0);
        // Direct difference loses everything for tiny x; use the series there.
        if x * (a + 2.0) < 1e-4 {
            return x * x * (0.5 - a * x / 3.0 + a * (a - 1.0) * x * x / 8.0);
        }
        e(a, x) - e(a + 1.0, x)
    }

    /// `∫_0^1 t (1 − |t − s|)^α dt`.
    pub fn g(&self, s: f64) -> f64 {
        let a = self.alpha;
        let r = 1.0 - s;
        s * e(a, s) - self.p1(s) + s * e(a, r) + self.p1(r)
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        let a = self.alpha;
        e(a, s) + e(a, 1.0 - s) - powf(s, a)
    }

    fn w1(&self, x: f64) -> f64 {
        let a = self.alpha;
        let x = x.clamp(0.0, 1.0);
        let ii = |b: f64| (x - e(b + 1.0, x)) / (b + 1.0);
        let jj = |b: f64| (x - powf(x, b + 2.0) / (b + 2.0)) / (b + 1.0);
        let t1 = (0.5 * x * x - (e(a + 1.0, x) - e(a + 2.0, x))) / (a + 1.0);
        let t2 = ii(a) - ii(a + 1.0);
        let t3 = (0.5 * x * x - powf(x, a + 3.0) / (a + 3.0)) / (a + 1.0);
        let t4 = jj(a) - jj(a + 1.0);
        t1 - t2 + t3 + t4
    }

    /// `E[θi · 1{θj ≤ x}] / E[θ]`: the opponent-type distribution seen by a
    /// bidder conditioning on her own ex-post value being 1.
    pub fn a1(&self, x: f64) -> f64 {
        ((2.0 + self.alpha) * self.w1(x)).clamp(0.0, 1.0)
    }

    /// `E[(1−θi) · 1{θj ≤ x}] / E[1−θ]`.
    pub fn a0(&self, x: f64) -> f64 {
        (1.0 - self.a1(1.0 - x)).clamp(0.0, 1.0)
    }

    pub fn a1_prime(&self, x: f64) -> f64 {
        (2.0 + self.alpha) * self.g(x)
    }

    pub fn a0_prime(&self, x: f64) -> f64 {
        (2.0 + self.alpha) * self.g(1.0 - x)
    }

    pub fn a1_second(&self, x: f64) -> f64 {
        (2.0 + self.alpha) * self.g_prime(x)
    }

    pub fn a0_second(&self, x: f64) -> f64 {
        -(2.0 + self.alpha) * self.g_prime(1.0 - x)
    }

    /// `E[θi | θj = x]`.
    pub fn conditional_mean(&self, x: f64) -> f64 {
        let a = self.alpha;
        self.g(x) / (e(a, x) + e(a, 1.0 - x))
    }

    /// Breakpoints that resolve the boundary layers of width `~1/α` in the
    /// marginal; used by every one-dimensional integral over types.
    pub fn layer_breaks(&self) -> Vec<f64> {
        let mut left = Vec::new();
        let mut s = 1.0 / (self.alpha + 1.0);
        while s < 0.5 {
            left.push(s);
            s *= 2.0;
        }
        let mut out = Vec::with_capacity(2 * left.len() + 3);
        out.push(0.0);
        out.extend(left.iter().copied());
        out.push(0.5);
        out.extend(left.iter().rev().map(|x| 1.0 - x));
        out.push(1.0);
        out
    }

    /// Draw `t` from the marginal.
    pub fn sample_marginal(&self, u: f64) -> f64 {
        invert_monotone(|x| self.marginal_cdf(x), |x| self.marginal(x), u, 0.0, 1.0, u)
    }

    /// Draw from `F(· | t)`.
    pub fn sample_conditional(&self, u: f64, t: f64) -> f64 {
        invert_monotone(
            |y| self.conditional_cdf(y, t),
            |y| self.conditional_pdf(y, t),
            u,
            0.0,
            1.0,
            t,
        )
    }

    pub fn sample_pair<R: RngCore + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let t1 = self.sample_marginal(rng::uniform(rng));
        let t2 = self.sample_conditional(rng::uniform(rng), t1);
        (t1, t2)
    }
}

/// `f(t1, t2)` with range checks.
pub fn eval_joint(alpha: f64, t1: f64, t2: f64) -> Result<f64> {
    let k = PowerKernel::new(alpha)?;
    check_unit("t1", t1)?;
    check_unit("t2", t2)?;
    Ok(k.joint(t1, t2))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct DensitySnapshot {
    alpha: f64,
    grid_n: usize,
}

/// The density together with tables on a uniform `grid_n` grid.
///
/// Tables are laid out row-major with the conditioning type as the row:
/// `conditional_cdf_table()[i * n + j] = F(grid[j] | grid[i])`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DensitySnapshot", into = "DensitySnapshot")]
pub struct TypeDensity {
    kernel: PowerKernel,
    grid: Vec<f64>,
    joint: Vec<f64>,
    marginal: Vec<f64>,
    cond_cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
    cross_moment: f64,
}

impl TryFrom<DensitySnapshot> for TypeDensity {
    type Error = Error;
    fn try_from(s: DensitySnapshot) -> Result<Self> {
        TypeDensity::new(s.alpha, s.grid_n)
    }
}

impl From<TypeDensity> for DensitySnapshot {
    fn from(d: TypeDensity) -> Self {
        DensitySnapshot { alpha: d.alpha(), grid_n: d.grid_n() }
    }
}

impl TypeDensity {
    pub fn new(alpha: f64, grid_n: usize) -> Result<Self> {
        let kernel = PowerKernel::new(alpha)?;
        if grid_n < 3 {
            return Err(Error::InvalidArgument("grid_n must be at least 3"));
        }
        let grid = uniform_grid(grid_n);
        let n = grid_n;
        let mut joint = Vec::with_capacity(n * n);
        let mut cond_cdf = Vec::with_capacity(n * n);
        for &t in &grid {
            for &s in &grid {
                joint.push(kernel.joint(t, s));
                cond_cdf.push(kernel.conditional_cdf(s, t));
            }
        }
        let marginal = grid.iter().map(|&t| kernel.marginal(t)).collect();

        // The marginal is symmetric about ½.
        let mean = 0.5;
        let second_moment = kernel.second_moment();
        let cross_moment = second_moment - 0.5 * kernel.e_sq_diff();
        Ok(Self { kernel, grid, joint, marginal, cond_cdf, mean, second_moment, cross_moment })
    }

    pub fn with_default_grid(alpha: f64) -> Result<Self> {
        Self::new(alpha, DEFAULT_GRID_N)
    }

    pub fn alpha(&self) -> f64 {
        self.kernel.alpha
    }

    pub fn grid_n(&self) -> usize {
        self.grid.len()
    }

    pub fn kernel(&self) -> &PowerKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn joint_table(&self) -> &[f64] {
        &self.joint
    }

    pub fn marginal_table(&self) -> &[f64] {
        &self.marginal
    }

    pub fn conditional_cdf_table(&self) -> &[f64] {
        &self.cond_cdf
    }

    pub fn eval_joint(&self, t1: f64, t2: f64) -> Result<f64> {
        check_unit("t1", t1)?;
        check_unit("t2", t2)?;
        Ok(self.kernel.joint(t1, t2))
    }

    pub fn marginal(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(self.kernel.marginal(t))
    }

    pub fn conditional_cdf(&self, b: f64, t: f64) -> Result<f64> {
        check_unit("b", b)?;
        check_unit("t", t)?;
        Ok(self.kernel.conditional_cdf(b, t))
    }

    /// `E[θ]`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `E[θ²]`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `E[θ1 θ2]`.
    pub fn cross_moment(&self) -> f64 {
        self.cross_moment
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }

    pub fn covariance(&self) -> f64 {
        self.cross_moment - self.mean * self.mean
    }

    pub fn correlation(&self) -> f64 {
        self.covariance() / self.variance()
    }

    pub fn first_best(&self) -> f64 {
        self.kernel.e_max()
    }

    /// `n` i.i.d. type pairs; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = rng::stream(seed, 0);
        (0..n).map(|_| self.kernel.sample_pair(&mut rng)).collect()
    }
}
