//! Steady-state auction data and the self-consistency check.
//!
//! A dataset is what misspecified bidders learn from: bids and ex-post values
//! of both bidders, without types. Generation is split into shards of
//! [`SHARD_SIZE`] records; shard `s` draws from the stream `(seed, s)`, so a
//! parallel run that concatenates shards in order reproduces a sequential
//! run exactly.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::beliefs::BeliefPair;
use crate::density::{TypeDensity, DEFAULT_GRID_N};
use crate::equilibrium::EquilibriumProfile;
use crate::error::{Error, Result};
use crate::math::{ln, sqrt};
use crate::rng;

/// Records per shard.
pub const SHARD_SIZE: usize = 1 << 16;

/// Multiplier `c` of the `c/√n` pass threshold.
pub const DKW_CONSTANT: f64 = 2.0;

/// One observed auction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub b1: f64,
    pub v1: u8,
    pub b2: f64,
    pub v2: u8,
    /// 1 or 2.
    pub winner: u8,
}

/// A record together with the hidden data that generated it. For tests and
/// debugging only; the public dataset never carries types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DebugRecord {
    pub record: AuctionRecord,
    pub theta1: f64,
    pub theta2: f64,
    pub rational1: bool,
    pub rational2: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bidder {
    One,
    Two,
}

/// Number of shards covering `n` records.
pub fn shard_count(n: usize) -> usize {
    n.div_ceil(SHARD_SIZE)
}

/// Records `shard * SHARD_SIZE ..` (at most `SHARD_SIZE`, fewer in the last
/// shard) of the dataset of size `n`, with their hidden data.
pub fn generate_shard_debug(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
    shard: usize,
) -> Vec<DebugRecord> {
    let start = shard * SHARD_SIZE;
    let len = n.saturating_sub(start).min(SHARD_SIZE);
    let k = density.kernel();
    let mut r = rng::stream(seed, shard as u64);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let (theta1, theta2) = k.sample_pair(&mut r);
        let rational1 = rng::bernoulli(&mut r, profile.lambda);
        let rational2 = rng::bernoulli(&mut r, profile.lambda);
        let v1 = rng::bernoulli(&mut r, theta1) as u8;
        let v2 = rng::bernoulli(&mut r, theta2) as u8;
        let bid = |rational: bool, t: f64| if rational { profile.br.eval(t) } else { profile.bm.eval(t) };
        let (b1, b2) = (bid(rational1, theta1), bid(rational2, theta2));
        let winner = if b1 > b2 || (b1 == b2 && rng::bernoulli(&mut r, 0.5)) { 1 } else { 2 };
        out.push(DebugRecord {
            record: AuctionRecord { b1, v1, b2, v2, winner },
            theta1,
            theta2,
            rational1,
            rational2,
        });
    }
    out
}

/// Public records of one shard.
pub fn generate_shard(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
    shard: usize,
) -> Vec<AuctionRecord> {
    generate_shard_debug(profile, density, n, seed, shard)
        .into_iter()
        .map(|d| d.record)
        .collect()
}

/// `n` i.i.d. auctions played under `profile`, deterministic in `seed`.
pub fn generate_dataset(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
) -> Result<Vec<AuctionRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1"));
    }
    let mut out = Vec::with_capacity(n);
    for s in 0..shard_count(n) {
        out.extend(generate_shard(profile, density, n, seed, s));
    }
    Ok(out)
}

/// Same as [`generate_dataset`], keeping types and sophistication.
pub fn generate_dataset_debug(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
) -> Result<Vec<DebugRecord>> {
    if n == 0 {
        return Err(Error::InvalidArgument("dataset size must be at least 1"));
    }
    let mut out = Vec::with_capacity(n);
    for s in 0..shard_count(n) {
        out.extend(generate_shard_debug(profile, density, n, seed, s));
    }
    Ok(out)
}

/// Opponent bids split by the chosen bidder's own value, each sorted.
fn split_by_value(data: &[AuctionRecord], who: Bidder) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut one, mut zero) = (Vec::new(), Vec::new());
    for r in data {
        let (v, opp) = match who {
            Bidder::One => (r.v1, r.b2),
            Bidder::Two => (r.v2, r.b1),
        };
        if v == 1 {
            one.push(opp);
        } else {
            zero.push(opp);
        }
    }
    if one.is_empty() {
        return Err(Error::EmptyValueClass { value: 1 });
    }
    if zero.is_empty() {
        return Err(Error::EmptyValueClass { value: 0 });
    }
    one.sort_by(f64::total_cmp);
    zero.sort_by(f64::total_cmp);
    Ok((one, zero))
}

/// Right-continuous empirical CDF of sorted `xs` at `at`.
fn ecdf(xs: &[f64], at: f64) -> f64 {
    xs.partition_point(|&x| x <= at) as f64 / xs.len() as f64
}

/// Empirical `H(·|1)`, `H(·|0)` for `who`, evaluated on `grid`.
pub fn empirical_beliefs_on(data: &[AuctionRecord], who: Bidder, grid: &[f64]) -> Result<BeliefPair> {
    let (one, zero) = split_by_value(data, who)?;
    let h1 = grid.iter().map(|&b| ecdf(&one, b)).collect();
    let h0 = grid.iter().map(|&b| ecdf(&zero, b)).collect();
    BeliefPair::from_tables(grid.to_vec(), h1, h0)
}

/// Empirical beliefs on a uniform grid of [`DEFAULT_GRID_N`] bids spanning
/// the observed bids.
pub fn empirical_beliefs(data: &[AuctionRecord], who: Bidder) -> Result<BeliefPair> {
    let top = data
        .iter()
        .map(|r| r.b1.max(r.b2))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let n = DEFAULT_GRID_N;
    let grid: Vec<f64> = (0..n).map(|k| top * k as f64 / (n - 1) as f64).collect();
    empirical_beliefs_on(data, who, &grid)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of sorted `xs`
/// and a continuous CDF `f`, checked on both sides of every jump.
pub fn ks_distance(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let m = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let fx = f(x);
        d = d.max((fx - i as f64 / m).abs()).max((fx - j as f64 / m).abs());
        i = j;
    }
    d
}

/// Two-sample Kolmogorov–Smirnov statistic of sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `level`
/// (asymptotic).
pub fn ks_two_sample_critical(na: usize, nb: usize, level: f64) -> f64 {
    let c = sqrt(-0.5 * ln(0.5 * level));
    let (na, nb) = (na as f64, nb as f64);
    c * sqrt((na + nb) / (na * nb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub n: usize,
    pub sup_distance_h1: f64,
    pub sup_distance_h0: f64,
    /// `c/√n_min + slack`, with `n_min` the smaller value class.
    pub threshold: f64,
    pub pass: bool,
}

/// Largest step of a table; the interpolation error of tabulated beliefs.
fn table_slack(beliefs: &BeliefPair) -> f64 {
    if beliefs.source().is_some() {
        return 0.0;
    }
    let step = |h: &[f64]| h.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    step(&beliefs.h1).max(step(&beliefs.h0))
}

/// Sup distances between the empirical beliefs of bidder 1 in `data` and
/// `beliefs`, with the pass threshold.
pub fn compare_beliefs(data: &[AuctionRecord], beliefs: &BeliefPair) -> Result<ConsistencyReport> {
    let (one, zero) = split_by_value(data, Bidder::One)?;
    let d1 = ks_distance(&one, |b| beliefs.h1_at(b));
    let d0 = ks_distance(&zero, |b| beliefs.h0_at(b));
    let threshold = DKW_CONSTANT / sqrt(one.len().min(zero.len()) as f64) + table_slack(beliefs);
    Ok(ConsistencyReport {
        n: data.len(),
        sup_distance_h1: d1,
        sup_distance_h0: d0,
        threshold,
        pass: d1 < threshold && d0 < threshold,
    })
}

/// Simulate `n` auctions under `profile` and test whether the beliefs a
/// misspecified bidder would estimate from them are the profile's beliefs.
pub fn consistency_check(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    n: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    if !profile.convergence.converged {
        return Err(Error::NotConverged);
    }
    let data = generate_dataset(profile, density, n, seed)?;
    compare_beliefs(&data, &profile.beliefs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub sizes: Vec<usize>,
    /// Mean sup distance (over replicates and both value classes) per size.
    pub mean_distance: Vec<f64>,
    /// Least-squares slope of `ln distance` against `ln n`.
    pub slope: f64,
}

/// How the belief sup distance shrinks with the sample size. Each size is
/// averaged over `replicates` independent datasets to tame the spread of
/// the KS statistic.
pub fn sup_distance_scaling(
    profile: &EquilibriumProfile,
    density: &TypeDensity,
    sizes: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<ScalingReport> {
    if sizes.len() < 2 || replicates == 0 {
        return Err(Error::InvalidArgument("need at least two sizes and one replicate"));
    }
    let mut mean_distance = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let mut acc = 0.0;
        for rep in 0..replicates {
            let s = seed.wrapping_add((i * replicates + rep) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let data = generate_dataset(profile, density, n, s)?;
            let r = compare_beliefs(&data, &profile.beliefs)?;
            acc += r.sup_distance_h1 + r.sup_distance_h0;
        }
        mean_distance.push(acc / (2 * replicates) as f64);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| ln(n as f64)).collect();
    let ys: Vec<f64> = mean_distance.iter().map(|&d| ln(d)).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ScalingReport { sizes: sizes.to_vec(), mean_distance, slope: sxy / sxx })
}
