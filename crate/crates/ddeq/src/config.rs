use std::path::PathBuf;

use anyhow::{bail, Result};
use ddeq_core::{DiscreteValueModel, Format, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Simulate,
    Diagnose,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
        }
    }
}

/// Everything a run depends on. Loadable from JSON with the same field
/// names as the command-line flags (underscores instead of dashes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub format: Format,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub grid_n: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Also solve from a second starting curve and report the gap.
    pub robustness_run: bool,
    /// Sample size for simulation and Monte Carlo diagnostics.
    pub n: usize,
    pub seed: u64,
    /// Output directory.
    pub out: PathBuf,
    /// Include the K = 3 diagnostics in `diagnose`.
    pub k3: bool,
    pub k3_model: DiscreteValueModel,
    /// Conditioning bid of the K = 3 moment identity.
    pub k3_b: f64,
    /// Worker threads for sweeps; all cores if unset.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let opts = SolverOptions::default();
        Self {
            command: Command::Solve,
            format: Format::Spa,
            alpha: vec![1.0],
            lambda: vec![0.5],
            grid_n: 501,
            tol: opts.tol,
            max_iter: opts.max_iter,
            damping: opts.damping,
            robustness_run: opts.robustness_run,
            n: 1_000_000,
            seed: 0,
            out: PathBuf::from("out"),
            k3: false,
            k3_model: DiscreteValueModel::bundled_dependent(),
            k3_b: 0.5,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            robustness_run: self.robustness_run,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            bail!("alpha: list is empty");
        }
        if let Some(a) = self.alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            bail!("alpha: must be finite and nonnegative, got {a}");
        }
        if self.lambda.is_empty() {
            bail!("lambda: list is empty");
        }
        if let Some(l) = self.lambda.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            bail!("lambda: must lie in [0, 1], got {l}");
        }
        if !(3..=100_000).contains(&self.grid_n) {
            bail!("grid_n: must be between 3 and 100000, got {}", self.grid_n);
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            bail!("tol: must be positive, got {}", self.tol);
        }
        if self.max_iter == 0 {
            bail!("max_iter: must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            bail!("damping: must lie in (0, 1], got {}", self.damping);
        }
        if self.n == 0 {
            bail!("n: must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers: must be positive");
        }
        if !(self.k3_b > 0.0 && self.k3_b < 1.0) {
            bail!("k3_b: must lie in (0, 1), got {}", self.k3_b);
        }
        if let Err(e) = self.k3_model.validate() {
            bail!("k3_model: {e}");
        }
        if matches!(self.command, Command::Solve | Command::Simulate)
            && (self.alpha.len() != 1 || self.lambda.len() != 1)
        {
            bail!("{} takes a single alpha and a single lambda", self.command.as_str());
        }
        if self.format == Format::Fpa {
            if let Some(l) = self.lambda.iter().find(|l| **l != 0.0 && **l != 1.0) {
                bail!(
                    "lambda: first-price equilibria are only computed for pure populations \
                     (lambda 0 or 1); mixed lambda={l} is unsupported"
                );
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, leaving out fields that do not
    /// affect results (output location, thread count).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.workers = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// `(α, λ)` cells in ascending order, duplicates removed.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let lambdas = sorted(&self.lambda);
        sorted(&self.alpha)
            .into_iter()
            .flat_map(|a| lambdas.iter().map(move |&l| (a, l)))
            .collect()
    }
}
