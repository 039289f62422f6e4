use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, Context, Result};
use ddeq_core::diagnostics::{self, DiscreteValueModel, McEstimate};
use ddeq_core::simulate::{self, ConsistencyReport};
use ddeq_core::{metrics, Convergence, EquilibriumProfile, Format, MetricsReport, TypeDensity};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig};
use crate::output::{opt_sig9, sig9, write_json, CsvWriter};

/// How a run ended when no configuration or I/O error occurred.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NotConverged => 2,
        }
    }
}

pub fn run(config: &RunConfig) -> Result<Status> {
    config.validate()?;
    fs::create_dir_all(&config.out)
        .with_context(|| format!("creating output directory {}", config.out.display()))?;
    match config.command {
        Command::Solve => solve(config),
        Command::Sweep => sweep(config),
        Command::Simulate => simulate(config),
        Command::Diagnose => diagnose(config),
    }
}

fn out_path(config: &RunConfig, name: &str) -> PathBuf {
    config.out.join(name)
}

fn solve_cell(config: &RunConfig, alpha: f64, lambda: f64) -> Result<(TypeDensity, EquilibriumProfile)> {
    let density = TypeDensity::new(alpha, config.grid_n)?;
    let profile = ddeq_core::solve(&density, config.format, lambda, &config.solver_options())?;
    Ok((density, profile))
}

#[derive(Serialize)]
struct SolveReport<'a> {
    format: Format,
    alpha: f64,
    lambda: f64,
    grid_n: usize,
    convergence: &'a Convergence,
    metrics: Option<MetricsReport>,
}

fn solve(config: &RunConfig) -> Result<Status> {
    let hash = config.hash();
    let (alpha, lambda) = (config.alpha[0], config.lambda[0]);
    let (density, profile) = solve_cell(config, alpha, lambda)?;
    let c = &profile.convergence;
    info!(
        "solved {} alpha={alpha} lambda={lambda}: converged={} change={:.3e}",
        config.format.as_str(),
        c.converged,
        c.final_change
    );

    let mut csv = CsvWriter::create(&out_path(config, "profile.csv"), &hash, &["theta", "br", "bm"])?;
    for &t in density.grid() {
        csv.row(&[sig9(t), sig9(profile.br.eval(t)), sig9(profile.bm.eval(t))])?;
    }
    csv.finish()?;

    let b = &profile.beliefs;
    let mut csv = CsvWriter::create(
        &out_path(config, "beliefs.csv"),
        &hash,
        &["b", "H1", "H0", "H1'", "H0'"],
    )?;
    for (i, &bid) in b.bids.iter().enumerate() {
        let d = |v: &Option<Vec<f64>>| opt_sig9(v.as_ref().map(|v| v[i]));
        csv.row(&[sig9(bid), sig9(b.h1[i]), sig9(b.h0[i]), d(&b.dh1), d(&b.dh0)])?;
    }
    csv.finish()?;

    let metrics = c.converged.then(|| metrics::efficiency(&profile, &density)).transpose()?;
    let report = SolveReport {
        format: config.format,
        alpha,
        lambda,
        grid_n: config.grid_n,
        convergence: c,
        metrics,
    };
    write_json(&out_path(config, "profile.json"), &hash, &report)?;
    if c.converged {
        Ok(Status::Ok)
    } else {
        warn!("solver did not converge; results written anyway");
        Ok(Status::NotConverged)
    }
}

struct SweepRow {
    alpha: f64,
    lambda: f64,
    metrics: Option<MetricsReport>,
    convergence: Option<Convergence>,
}

fn sweep(config: &RunConfig) -> Result<Status> {
    let hash = config.hash();
    let cells = config.cells();
    let work = || -> Vec<SweepRow> {
        cells
            .par_iter()
            .map(|&(alpha, lambda)| {
                let solved = solve_cell(config, alpha, lambda);
                let (metrics, convergence) = match solved {
                    Ok((density, profile)) => {
                        let m = metrics::efficiency(&profile, &density).ok();
                        (m, Some(profile.convergence))
                    }
                    Err(e) => {
                        warn!("alpha={alpha} lambda={lambda}: {e}");
                        (None, None)
                    }
                };
                info!("alpha={alpha} lambda={lambda} done");
                SweepRow { alpha, lambda, metrics, convergence }
            })
            .collect()
    };
    // `collect` on an indexed parallel iterator keeps input order, so the
    // file is identical for any worker count.
    let rows = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new().num_threads(w).build()?.install(work),
        None => work(),
    };

    let mut csv = CsvWriter::create(
        &out_path(config, "sweep.csv"),
        &hash,
        &[
            "alpha",
            "lambda",
            "format",
            "revenue",
            "efficiency",
            "first_best",
            "method",
            "converged",
            "final_change",
        ],
    )?;
    for r in &rows {
        let m = r.metrics.as_ref();
        let converged = r.convergence.as_ref().is_some_and(|c| c.converged) && m.is_some();
        csv.row(&[
            sig9(r.alpha),
            sig9(r.lambda),
            config.format.as_str().to_string(),
            opt_sig9(m.map(|m| m.revenue)),
            opt_sig9(m.map(|m| m.efficiency)),
            opt_sig9(m.map(|m| m.first_best)),
            m.map(|m| m.method.as_str().to_string()).unwrap_or_default(),
            converged.to_string(),
            opt_sig9(r.convergence.as_ref().map(|c| c.final_change)),
        ])?;
    }
    csv.finish()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    format: Format,
    alpha: f64,
    lambda: f64,
    n: usize,
    seed: u64,
    dataset_sha256: String,
    consistency: &'a ConsistencyReport,
}

fn simulate(config: &RunConfig) -> Result<Status> {
    let hash = config.hash();
    let (alpha, lambda) = (config.alpha[0], config.lambda[0]);
    let (density, profile) = solve_cell(config, alpha, lambda)?;
    if !profile.convergence.converged {
        warn!("solver did not converge; no dataset written");
        return Ok(Status::NotConverged);
    }
    let data = simulate::generate_dataset(&profile, &density, config.n, config.seed)?;

    let path = out_path(config, "dataset.csv");
    let mut csv = CsvWriter::create(&path, &hash, &["b1", "v1", "b2", "v2", "winner"])?;
    for r in &data {
        writeln!(csv.raw(), "{},{},{},{},{}", sig9(r.b1), r.v1, sig9(r.b2), r.v2, r.winner)?;
    }
    csv.finish()?;
    let dataset_sha256 = hex::encode(Sha256::digest(fs::read(&path)?));

    let consistency = simulate::compare_beliefs(&data, &profile.beliefs)?;
    info!(
        "sup distance {:.3e} vs threshold {:.3e}: pass={}",
        consistency.sup_distance_h1.max(consistency.sup_distance_h0),
        consistency.threshold,
        consistency.pass
    );
    let report = SimulateReport {
        format: config.format,
        alpha,
        lambda,
        n: config.n,
        seed: config.seed,
        dataset_sha256,
        consistency: &consistency,
    };
    write_json(&out_path(config, "consistency.json"), &hash, &report)?;
    Ok(Status::Ok)
}

fn diagnose(config: &RunConfig) -> Result<Status> {
    let hash = config.hash();
    let mut alphas = config.alpha.clone();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let reports: Vec<_> = alphas
        .par_iter()
        .map(|&a| TypeDensity::new(a, config.grid_n).map(|d| (diagnostics::prop1_condition(&d), d)))
        .collect::<Result<_, _>>()?;

    let mut csv = CsvWriter::create(
        &out_path(config, "diagnostics.csv"),
        &hash,
        &["alpha_or_model", "statistic", "value", "std_error"],
    )?;
    for (a, (r, d)) in alphas.iter().zip(&reports) {
        let a = sig9(*a);
        csv.row(&[a.as_str(), "max_deviation", &sig9(r.max_deviation), "0"])?;
        csv.row(&[a.as_str(), "violating_theta", &opt_sig9(r.violating_theta), ""])?;
        csv.row(&[a.as_str(), "weighted_deviation", &sig9(r.weighted_deviation), "0"])?;
        csv.row(&[a.as_str(), "covariance", &sig9(d.covariance()), "0"])?;
    }

    if config.k3 {
        let model = &config.k3_model;
        let b = config.k3_b;
        let mut control = model.clone();
        control.shared_latent = false;
        let theta = foc_point(model, b);
        let est = |m: &DiscreteValueModel, which: &str| -> Result<McEstimate> {
            match which {
                "residual" => diagnostics::lemma8_residual(m, b, config.n, config.seed),
                _ => diagnostics::truthful_foc_spa_k(m, &theta, config.n, config.seed),
            }
            .map_err(|e| anyhow!("k3 diagnostics: {e}"))
        };
        let name = if model.shared_latent { "k3-model" } else { "k3-model-independent" };
        let mut rows = vec![(name, "residual"), (name, "truthful_foc")];
        if model.shared_latent {
            rows.push(("k3-control-independent", "residual"));
            rows.push(("k3-control-independent", "truthful_foc"));
        }
        for (label, which) in rows {
            let m = if label == "k3-control-independent" { &control } else { model };
            let e = est(m, which)?;
            let stat = match which {
                "residual" => format!("moment_residual_b={b}"),
                _ => format!("truthful_foc_b={b}"),
            };
            info!("{label} {stat}: {:.4e} ± {:.1e}", e.value, e.std_error);
            csv.row(&[label, stat.as_str(), &sig9(e.value), &sig9(e.std_error)])?;
        }
    }
    csv.finish()?;
    Ok(Status::Ok)
}

/// The type that puts weight `1 − b` on the lowest value and `b` on the
/// highest, whose interim valuation is `b`.
fn foc_point(model: &DiscreteValueModel, b: f64) -> Vec<f64> {
    let mut t = vec![0.0; model.k()];
    t[0] = 1.0 - b;
    t[model.k() - 1] = b;
    t
}
