use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ddeq_core::Format;

use crate::config::{Command, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ddeq", version, about = "Data-driven equilibria of first- and second-price auctions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<CommandArg>,
    #[command(flatten)]
    pub flags: Flags,
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CommandArg {
    /// Solve one equilibrium and write the bid functions and beliefs.
    Solve,
    /// Revenue and efficiency over an (alpha, lambda) grid.
    Sweep,
    /// Simulate auction data from an equilibrium and test its consistency.
    Simulate,
    /// Check the conditions that rule out truthful misspecified bidding.
    Diagnose,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Solve => Command::Solve,
            CommandArg::Sweep => Command::Sweep,
            CommandArg::Simulate => Command::Simulate,
            CommandArg::Diagnose => Command::Diagnose,
        }
    }
}

/// Flags override the values of `--config`, which override the defaults.
#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON file with any of the fields below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Correlation parameters, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
    /// Shares of rational bidders, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub damping: Option<f64>,
    /// Sample size for simulation and Monte Carlo diagnostics.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Add the three-value model diagnostics.
    #[arg(long, global = true)]
    pub k3: bool,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|_| format!("expected spa or fpa, got {s:?}"))
}

impl Cli {
    pub fn into_config(self) -> Result<RunConfig> {
        let f = self.flags;
        let mut c = match &f.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("config: cannot read {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("config: invalid JSON in {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        match self.command {
            Some(cmd) => c.command = cmd.into(),
            None if f.config.is_none() => {
                anyhow::bail!("command: give one of solve, sweep, simulate, diagnose or --config")
            }
            None => {}
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = f.$field { c.$field = v; })* };
        }
        set!(format, alpha, lambda, grid_n, tol, max_iter, damping, n, seed, out);
        if f.k3 {
            c.k3 = true;
        }
        if f.workers.is_some() {
            c.workers = f.workers;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig> {
        Cli::try_parse_from(std::iter::once("ddeq").chain(args.iter().copied()))?.into_config()
    }

    #[test]
    fn flags_fill_the_config() {
        let c = parse(&["sweep", "--alpha", "1,5", "--lambda", "0,0.5,1", "--format", "fpa"]).unwrap();
        assert_eq!(c.command, Command::Sweep);
        assert_eq!(c.alpha, vec![1.0, 5.0]);
        assert_eq!(c.lambda, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.format, Format::Fpa);
    }

    #[test]
    fn negative_values_reach_validation() {
        let c = parse(&["solve", "--alpha", "-1"]).unwrap();
        assert!(c.validate().unwrap_err().to_string().starts_with("alpha"));
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"command": "diagnose", "alpha": [2], "seed": 9}"#).unwrap();
        let c = parse(&["--config", path.to_str().unwrap(), "--seed", "3"]).unwrap();
        assert_eq!(c.command, Command::Diagnose);
        assert_eq!(c.alpha, vec![2.0]);
        assert_eq!(c.seed, 3);
    }

    #[test]
    fn command_is_required_without_config() {
        assert!(parse(&["--alpha", "1"]).is_err());
    }
}
