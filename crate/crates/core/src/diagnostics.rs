//! Checks of the conditions under which misspecified bidders cannot bid
//! their interim valuation.
//!
//! In the binary model truthful bidding by m-types requires the opponent's
//! type to carry no information about one's own: `E[θi | θj = θ] = E[θ]`
//! for every `θ`. With `K ≥ 3` ex-post values the requirement becomes an
//! identity between conditional moments of the simplex-valued types, which
//! is estimated here by Monte Carlo for a configurable mixture model.

use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::density::TypeDensity;
use crate::error::{Error, Result};
use crate::math::sqrt;
use crate::quadrature::GaussLegendre;
use crate::rng;
use crate::simulate::SHARD_SIZE;

/// Deviations below this are treated as roundoff.
pub const TILT_TOLERANCE: f64 = 1e-10;

/// Half-width of the box kernel used to differentiate `H(· | v)`.
pub const FOC_BANDWIDTH: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMeanReport {
    /// `sup_θ |E[θi | θj = θ] − E[θ]|` over the density grid.
    pub max_deviation: f64,
    /// Where the supremum is attained, if it exceeds roundoff.
    pub violating_theta: Option<f64>,
    /// `∫ θ f(θ) (E[θi | θj = θ] − E[θ]) dθ`; equals `Cov[θ1, θ2]`.
    pub weighted_deviation: f64,
}

/// Conditional-mean tilt of the binary model.
pub fn prop1_condition(density: &TypeDensity) -> ConditionalMeanReport {
    let k = density.kernel();
    let mean = density.mean();
    let (mut max_deviation, mut arg) = (0.0f64, 0.0);
    for &t in density.grid() {
        let d = (k.conditional_mean(t) - mean).abs();
        if d > max_deviation {
            max_deviation = d;
            arg = t;
        }
    }
    let gl = GaussLegendre::new(12);
    // Grade the panels into both endpoints, where fractional powers of
    // `t` and `1 − t` make the integrand non-smooth for small α.
    let mut breaks = k.layer_breaks();
    let mut h = 0.25;
    for _ in 0..40 {
        h *= 0.5;
        breaks.push(h);
        breaks.push(1.0 - h);
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let weighted_deviation = gl.integrate_breaks(&breaks, |t| {
        t * k.marginal(t) * (k.conditional_mean(t) - mean)
    });
    ConditionalMeanReport {
        max_deviation,
        violating_theta: (max_deviation > TILT_TOLERANCE).then_some(arg),
        weighted_deviation,
    }
}

/// Types on the simplex over `K` ex-post values, drawn from a mixture of
/// Dirichlet components. With `shared_latent` both bidders draw from the same
/// mixture component, which makes their types positively dependent;
/// otherwise each bidder picks a component independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteValueModel {
    pub values: Vec<f64>,
    /// Dirichlet concentrations, one row of length `K` per component.
    pub components: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub shared_latent: bool,
}

impl DiscreteValueModel {
    /// Values `(0, ½, 1)`, an even mixture of Dirichlet(6,3,1) (mass near
    /// low values) and Dirichlet(1,2,4) (mass near high values).
    pub fn bundled(shared_latent: bool) -> Self {
        Self {
            values: alloc::vec![0.0, 0.5, 1.0],
            components: alloc::vec![alloc::vec![6.0, 3.0, 1.0], alloc::vec![1.0, 2.0, 4.0]],
            weights: alloc::vec![0.5, 0.5],
            shared_latent,
        }
    }

    pub fn bundled_dependent() -> Self {
        Self::bundled(true)
    }

    pub fn bundled_independent() -> Self {
        Self::bundled(false)
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k < 3 {
            return Err(Error::InvalidArgument("model needs at least three values"));
        }
        if self.values[0] != 0.0 || self.values[k - 1] != 1.0 {
            return Err(Error::InvalidArgument("values must run from 0 to 1"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("values must be strictly increasing"));
        }
        if self.components.is_empty() || self.components.len() != self.weights.len() {
            return Err(Error::InvalidArgument("one weight per mixture component"));
        }
        for c in &self.components {
            if c.len() != k || c.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
                return Err(Error::InvalidArgument(
                    "concentrations must be K positive numbers",
                ));
            }
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidArgument("weights must be a probability vector"));
        }
        Ok(())
    }

    /// Interim valuation `w(θ) = Σ θ^k v^k`.
    pub fn valuation(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(&self.values).map(|(t, v)| t * v).sum()
    }

    /// `E[θ^k]` for every `k`.
    pub fn type_means(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.k()];
        for (c, w) in self.components.iter().zip(&self.weights) {
            let total: f64 = c.iter().sum();
            for (mk, a) in m.iter_mut().zip(c) {
                *mk += w * a / total;
            }
        }
        m
    }

    /// `n` type pairs, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        self.validate()?;
        let sampler = Sampler::new(self);
        let mut out = Vec::with_capacity(n);
        for_each_pair(&sampler, n, seed, |t1, t2| out.push((t1.to_vec(), t2.to_vec())));
        Ok(out)
    }
}

struct Sampler<'a> {
    model: &'a DiscreteValueModel,
    gammas: Vec<Vec<Gamma<f64>>>,
}

impl<'a> Sampler<'a> {
    fn new(model: &'a DiscreteValueModel) -> Self {
        let gammas = model
            .components
            .iter()
            .map(|c| c.iter().map(|&a| Gamma::new(a, 1.0).expect("validated")).collect())
            .collect();
        Self { model, gammas }
    }

    fn component<R: RngCore>(&self, rng: &mut R) -> usize {
        let u = rng::uniform(rng);
        let mut acc = 0.0;
        for (i, w) in self.model.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.model.weights.len() - 1
    }

    fn dirichlet<R: RngCore>(&self, rng: &mut R, z: usize, out: &mut [f64]) {
        loop {
            let mut total = 0.0;
            for (o, g) in out.iter_mut().zip(&self.gammas[z]) {
                *o = g.sample(rng);
                total += *o;
            }
            if total > 0.0 {
                out.iter_mut().for_each(|o| *o /= total);
                return;
            }
        }
    }

    fn pair<R: RngCore>(&self, rng: &mut R, t1: &mut [f64], t2: &mut [f64]) {
        let z1 = self.component(rng);
        let z2 = if self.model.shared_latent { z1 } else { self.component(rng) };
        self.dirichlet(rng, z1, t1);
        self.dirichlet(rng, z2, t2);
    }
}

/// Runs `f` on `n` pairs drawn shard by shard, so results do not depend on
/// how the work is split.
fn for_each_pair(sampler: &Sampler<'_>, n: usize, seed: u64, mut f: impl FnMut(&[f64], &[f64])) {
    let k = sampler.model.k();
    let (mut t1, mut t2) = (alloc::vec![0.0; k], alloc::vec![0.0; k]);
    let mut left = n;
    let mut shard = 0u64;
    while left > 0 {
        let mut r = rng::stream(seed, shard);
        for _ in 0..left.min(SHARD_SIZE) {
            sampler.pair(&mut r, &mut t1, &mut t2);
            f(&t1, &t2);
        }
        left = left.saturating_sub(SHARD_SIZE);
        shard += 1;
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn z_score(&self) -> f64 {
        self.value / self.std_error
    }
}

/// `E[θi^K | wj ≤ b] − (E[θi^K] / E[θi^1]) E[θi^1 | wj ≤ b]`.
///
/// Zero for every `b` when m-types bid their interim valuation. The
/// unconditional moments are exact; the conditional ones are sample ratios,
/// whose standard error comes from the delta method.
pub fn lemma8_residual(
    model: &DiscreteValueModel,
    b: f64,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain { what: "b", value: b });
    }
    model.validate()?;
    let m = model.type_means();
    let k = model.k();
    let c = m[k - 1] / m[0];
    let sampler = Sampler::new(model);
    let (mut hits, mut sy, mut syy) = (0usize, 0.0, 0.0);
    for_each_pair(&sampler, n_mc, seed, |ti, tj| {
        if model.valuation(tj) <= b {
            let y = ti[k - 1] - c * ti[0];
            hits += 1;
            sy += y;
            syy += y * y;
        }
    });
    if hits == 0 {
        return Err(Error::EmptyConditioningEvent);
    }
    let e = hits as f64;
    let value = sy / e;
    let spread = (syy - value * sy).max(0.0);
    Ok(McEstimate { value, std_error: sqrt(spread) / e })
}

/// Left-hand side of the m-type first-order condition in the second-price
/// auction, `Σ_k θ^k (v^k − w) H'(w | v^k)` at `w = w(θ)`, when everybody
/// bids truthfully. `H'` is estimated with a box kernel of half-width
/// [`FOC_BANDWIDTH`].
pub fn truthful_foc_spa_k(
    model: &DiscreteValueModel,
    theta: &[f64],
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    truthful_foc_spa_k_with_bandwidth(model, theta, n_mc, seed, FOC_BANDWIDTH)
}

pub fn truthful_foc_spa_k_with_bandwidth(
    model: &DiscreteValueModel,
    theta: &[f64],
    n_mc: usize,
    seed: u64,
    bandwidth: f64,
) -> Result<McEstimate> {
    model.validate()?;
    if theta.len() != model.k()
        || theta.iter().any(|t| !(*t >= 0.0))
        || (theta.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument("theta must lie on the simplex"));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::Domain { what: "bandwidth", value: bandwidth });
    }
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be positive"));
    }
    let w = model.valuation(theta);
    let m = model.type_means();
    let coef: Vec<f64> = theta
        .iter()
        .zip(&model.values)
        .zip(&m)
        .map(|((t, v), mk)| t * (v - w) / (2.0 * bandwidth * mk))
        .collect();
    let sampler = Sampler::new(model);
    let (mut sx, mut sxx) = (0.0, 0.0);
    for_each_pair(&sampler, n_mc, seed, |ti, tj| {
        if (model.valuation(tj) - w).abs() <= bandwidth {
            let x: f64 = coef.iter().zip(ti).map(|(c, t)| c * t).sum();
            sx += x;
            sxx += x * x;
        }
    });
    let n = n_mc as f64;
    let value = sx / n;
    let var = (sxx / n - value * value).max(0.0);
    Ok(McEstimate { value, std_error: sqrt(var / n) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independence_has_no_tilt() {
        let r = prop1_condition(&TypeDensity::new(0.0, 201).unwrap());
        assert!(r.max_deviation < 1e-8);
        assert_eq!(r.violating_theta, None);
    }

    #[test]
    fn tilt_grows_with_correlation() {
        let r1 = prop1_condition(&TypeDensity::new(1.0, 201).unwrap());
        let r10 = prop1_condition(&TypeDensity::new(10.0, 201).unwrap());
        assert!(r1.max_deviation > 1e-3);
        assert!(r1.violating_theta.is_some());
        assert!(r10.max_deviation > r1.max_deviation);
    }

    #[test]
    fn weighted_tilt_is_the_covariance() {
        for a in [0.5, 3.0, 40.0] {
            let d = TypeDensity::new(a, 101).unwrap();
            let r = prop1_condition(&d);
            assert!((r.weighted_deviation - d.covariance()).abs() < 1e-10, "α={a} {} {}", r.weighted_deviation, d.covariance());
        }
    }

    #[test]
    fn samples_lie_on_the_simplex() {
        let m = DiscreteValueModel::bundled_dependent();
        for (t1, t2) in m.sample(2000, 3).unwrap() {
            for t in [&t1, &t2] {
                assert!(t.iter().all(|x| *x >= 0.0));
                assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let w = m.valuation(t);
                assert!((0.0..=1.0).contains(&w));
            }
        }
    }

    #[test]
    fn bad_models_are_rejected() {
        let mut m = DiscreteValueModel::bundled_dependent();
        m.values = alloc::vec![0.0, 1.0];
        m.components = alloc::vec![alloc::vec![1.0, 1.0]];
        m.weights = alloc::vec![1.0];
        assert!(m.validate().is_err());
        let mut m = DiscreteValueModel::bundled_dependent();
        m.weights = alloc::vec![0.7, 0.7];
        assert!(m.validate().is_err());
        let m = DiscreteValueModel::bundled_dependent();
        assert!(lemma8_residual(&m, 1.0, 10, 0).is_err());
    }

    #[test]
    fn point_mass_on_lowest_value_has_zero_foc() {
        let m = DiscreteValueModel::bundled_dependent();
        let r = truthful_foc_spa_k(&m, &[1.0, 0.0, 0.0], 10_000, 1).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn independent_model_satisfies_the_identity() {
        let m = DiscreteValueModel::bundled_independent();
        let r = lemma8_residual(&m, 0.5, 200_000, 7).unwrap();
        assert!(r.z_score().abs() < 3.0, "{r:?}");
        let f = truthful_foc_spa_k(&m, &[0.5, 0.0, 0.5], 200_000, 7).unwrap();
        assert!(f.z_score().abs() < 3.0, "{f:?}");
    }

    #[test]
    fn dependent_model_violates_the_identity() {
        let m = DiscreteValueModel::bundled_dependent();
        let r = lemma8_residual(&m, 0.5, 200_000, 7).unwrap();
        assert!(r.z_score().abs() > 5.0, "{r:?}");
    }
}
