#![allow(dead_code)]

use ddeq_core::{BeliefPair, BidFunction, Format, SolverOptions};

pub fn opts() -> SolverOptions {
    SolverOptions { robustness_run: false, ..Default::default() }
}

/// `λ = 0, 0.05, …, 1`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// `α = 1/5 + 5^k`, `k = 1..9`.
pub fn alpha_grid() -> Vec<f64> {
    (1..=9).map(|k| 0.2 + 5f64.powi(k)).collect()
}

pub fn argmin(xs: &[f64]) -> usize {
    (0..xs.len()).min_by(|&i, &j| xs[i].total_cmp(&xs[j])).unwrap()
}

pub fn interior_min(xs: &[f64]) -> bool {
    let i = argmin(xs);
    i > 0 && i + 1 < xs.len()
}

/// Expected utility of a misspecified bidder of type `θ` on a fine bid grid,
/// built from the tabulated beliefs alone: first-price utilities directly,
/// second-price utilities as Stieltjes sums of the payment against `H`.
pub struct BruteForce {
    pub bids: Vec<f64>,
    h1: Vec<f64>,
    h0: Vec<f64>,
    /// `∫_0^b (1 − x) dH1(x)` and `∫_0^b x dH0(x)` at each grid bid.
    win1: Vec<f64>,
    pay0: Vec<f64>,
}

impl BruteForce {
    pub fn new(beliefs: &BeliefPair, m: usize) -> Self {
        let top = beliefs.max_bid();
        let bids: Vec<f64> = (0..=m).map(|j| top * j as f64 / m as f64).collect();
        let h1: Vec<f64> = bids.iter().map(|&b| beliefs.h1_at(b)).collect();
        let h0: Vec<f64> = bids.iter().map(|&b| beliefs.h0_at(b)).collect();
        let (mut win1, mut pay0) = (vec![h1[0]], vec![0.0]);
        for j in 1..=m {
            let mid = 0.5 * (bids[j - 1] + bids[j]);
            win1.push(win1[j - 1] + (1.0 - mid) * (h1[j] - h1[j - 1]));
            pay0.push(pay0[j - 1] + mid * (h0[j] - h0[j - 1]));
        }
        Self { bids, h1, h0, win1, pay0 }
    }

    pub fn step(&self) -> f64 {
        self.bids[1] - self.bids[0]
    }

    pub fn utility(&self, format: Format, theta: f64, j: usize) -> f64 {
        let b = self.bids[j];
        match format {
            Format::Spa => theta * self.win1[j] - (1.0 - theta) * self.pay0[j],
            Format::Fpa => (1.0 - b) * theta * self.h1[j] - b * (1.0 - theta) * self.h0[j],
        }
    }

    pub fn argmax(&self, format: Format, theta: f64) -> f64 {
        let j = (0..self.bids.len())
            .max_by(|&i, &j| self.utility(format, theta, i).total_cmp(&self.utility(format, theta, j)))
            .unwrap();
        self.bids[j]
    }
}

/// Largest distance between a best response and the brute-force maximizer,
/// in units of the type grid step (plus the brute-force resolution).
pub fn worst_gap(format: Format, beliefs: &BeliefPair, response: &BidFunction) -> f64 {
    let bf = BruteForce::new(beliefs, 8000);
    let nodes = response.nodes();
    let grid_step = nodes[1] - nodes[0];
    nodes
        .iter()
        .zip(response.values())
        .map(|(&t, &b)| (b - bf.argmax(format, t)).abs() / (grid_step + bf.step()))
        .fold(0.0, f64::max)
}
