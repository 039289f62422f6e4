//! The second-price equilibrium as a boundary value problem.
//!
//! Rational bidders bid their type, so along the misspecified strategy
//! `b = bm(θ)` the first-order condition reads
//!
//! ```text
//! λ N1(θ,b) db + (1−λ) N0(θ,b) dθ = 0
//! N1(θ,b) = θ(1−b) A1'(b) − (1−θ) b A0'(b)
//! N0(θ,b) = θ(1−b) A1'(θ) − (1−θ) b A0'(θ)
//! ```
//!
//! with `bm(0) = 0`, `bm(1) = 1`. For strong correlation and large `λ` the
//! solution is nearly a step at `θ = 1/2`, which defeats damped best-response
//! iteration. We instead parametrize the curve by `σ = (θ + b)/2` and solve
//! for `δ = b − θ` on a uniform `σ` grid by Newton's method. The Jacobian is
//! tridiagonal.

use alloc::vec::Vec;

use super::best_response::best_response_report;
use super::{Convergence, EquilibriumProfile, Format, SolverOptions};
use crate::beliefs::{belief_derivatives, beliefs_spa};
use crate::bid::{isotonic, BidFunction};
use crate::density::{PowerKernel, TypeDensity};
use crate::error::{check_unit, Result};
use crate::quadrature::uniform_grid;

struct Collocation<'a> {
    k: &'a PowerKernel,
    lambda: f64,
    sigma: Vec<f64>,
}

struct Eval {
    r: Vec<f64>,
    sub: Vec<f64>,
    diag: Vec<f64>,
    sup: Vec<f64>,
}

impl Collocation<'_> {
    fn n(&self) -> usize {
        self.sigma.len()
    }

    /// Full δ vector including the zero boundary values.
    fn full(&self, inner: &[f64]) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n());
        d.push(0.0);
        d.extend_from_slice(inner);
        d.push(0.0);
        d
    }

    fn eval(&self, inner: &[f64], jac: bool) -> Eval {
        let k = self.k;
        let lam = self.lambda;
        let d = self.full(inner);
        let m = inner.len();
        let mut out = Eval {
            r: Vec::with_capacity(m),
            sub: Vec::with_capacity(if jac { m } else { 0 }),
            diag: Vec::with_capacity(if jac { m } else { 0 }),
            sup: Vec::with_capacity(if jac { m } else { 0 }),
        };
        for i in 1..self.n() - 1 {
            let s = self.sigma[i];
            let th = (s - 0.5 * d[i]).clamp(0.0, 1.0);
            let b = (s + 0.5 * d[i]).clamp(0.0, 1.0);
            let span = self.sigma[i + 1] - self.sigma[i - 1];
            let dp = (d[i + 1] - d[i - 1]) / span;
            let (a1b, a0b) = (k.a1_prime(b), k.a0_prime(b));
            let (a1t, a0t) = (k.a1_prime(th), k.a0_prime(th));
            let n1 = th * (1.0 - b) * a1b - (1.0 - th) * b * a0b;
            let n0 = th * (1.0 - b) * a1t - (1.0 - th) * b * a0t;
            let (wp, wm) = (1.0 + 0.5 * dp, 1.0 - 0.5 * dp);
            out.r.push(lam * n1 * wp + (1.0 - lam) * n0 * wm);
            if jac {
                let off = 0.5 * (lam * n1 - (1.0 - lam) * n0) / span;
                let dt_n1 = (1.0 - b) * a1b + b * a0b;
                let db_n1 = -th * a1b + th * (1.0 - b) * k.a1_second(b)
                    - (1.0 - th) * a0b
                    - (1.0 - th) * b * k.a0_second(b);
                let dt_n0 = (1.0 - b) * a1t + th * (1.0 - b) * k.a1_second(th) + b * a0t
                    - (1.0 - th) * b * k.a0_second(th);
                let db_n0 = -th * a1t - (1.0 - th) * a0t;
                let diag = wp * lam * 0.5 * (db_n1 - dt_n1) + wm * (1.0 - lam) * 0.5 * (db_n0 - dt_n0);
                out.sub.push(-off);
                out.diag.push(diag);
                out.sup.push(off);
            }
        }
        out
    }
}

fn l2sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solve a tridiagonal system with partial pivoting (LAPACK `gtsv` style).
/// `sub[i]` multiplies `x[i-1]` in row `i`, `sup[i]` multiplies `x[i+1]`.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    // Row i stores (d, u1, u2): coefficients of x[i], x[i+1], x[i+2] after elimination.
    let mut d = diag.to_vec();
    let mut du: Vec<f64> = (0..n).map(|i| if i + 1 < n { sup[i] } else { 0.0 }).collect();
    let mut du2 = alloc::vec![0.0; n];
    let mut dl: Vec<f64> = (0..n).map(|i| if i + 1 < n { sub[i + 1] } else { 0.0 }).collect();
    let mut b = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        } else {
            // Swap rows i and i+1.
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - f * tmp;
            du[i] = tmp;
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            b.swap(i, i + 1);
            b[i + 1] -= f * b[i];
            dl[i] = 0.0;
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    let mut x = alloc::vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        if i + 1 < n {
            v -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            v -= du2[i] * x[i + 2];
        }
        x[i] = v / d[i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

struct NewtonOutcome {
    inner: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

/// Half-width of the feasible band for `δ` at `σ`: `θ, b ∈ [0, 1]` iff `|δ| ≤ 2 w(σ)`.
fn band(s: f64) -> f64 {
    s.min(1.0 - s)
}

/// Newton's method in the variables `z`, `δ = 2 w(σ) tanh z`, which keep
/// every iterate inside the unit square (solutions hug `b = 0` for low
/// types when correlation is strong). Takes and returns `δ`.
fn newton(col: &Collocation<'_>, start: Vec<f64>, opts: &SolverOptions) -> NewtonOutcome {
    let w: Vec<f64> = col.sigma[1..col.sigma.len() - 1].iter().map(|&s| 2.0 * band(s)).collect();
    let to_delta = |z: &[f64]| -> Vec<f64> { z.iter().zip(&w).map(|(z, w)| w * libm::tanh(*z)).collect() };
    let mut z: Vec<f64> = start
        .iter()
        .zip(&w)
        .map(|(d, w)| libm::atanh((d / w).clamp(-1.0 + 1e-12, 1.0 - 1e-12)))
        .collect();
    let mut x = to_delta(&z);
    let mut e = col.eval(&x, true);
    let mut res = sup_norm(&e.r);
    let mut merit = l2sq(&e.r);
    for it in 1..=opts.max_iter {
        let scale: Vec<f64> = z.iter().zip(&w).map(|(z, w)| {
            let t = libm::tanh(*z);
            w * (1.0 - t * t)
        }).collect();
        let m = z.len();
        let sub: Vec<f64> = (0..m).map(|i| if i > 0 { e.sub[i] * scale[i - 1] } else { 0.0 }).collect();
        let diag: Vec<f64> = (0..m).map(|i| e.diag[i] * scale[i]).collect();
        let sup: Vec<f64> = (0..m).map(|i| if i + 1 < m { e.sup[i] * scale[i + 1] } else { 0.0 }).collect();
        let rhs: Vec<f64> = e.r.iter().map(|v| -v).collect();
        let Some(step) = solve_tridiagonal(&sub, &diag, &sup, &rhs) else {
            log::debug!("collocation: singular Jacobian at iteration {it}");
            return NewtonOutcome { inner: x, iterations: it, residual: res, converged: false };
        };
        let mut t = 1.0;
        let (tz, tx, tres, tmerit) = loop {
            let tz: Vec<f64> = z.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let tx = to_delta(&tz);
            let r = col.eval(&tx, false).r;
            let tmerit = l2sq(&r);
            if tmerit.is_finite() && (tmerit <= (1.0 - 1e-4 * t) * merit || t < 1e-10) {
                break (tz, tx, sup_norm(&r), tmerit);
            }
            t *= opts.damping.min(0.9);
        };
        let change = x.iter().zip(&tx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        z = tz;
        x = tx;
        res = tres;
        merit = tmerit;
        log::trace!("collocation it={it} change={change:.3e} res={res:.3e} t={t}");
        if change < opts.tol && res < opts.tol {
            return NewtonOutcome { inner: x, iterations: it, residual: res, converged: true };
        }
        if t < 1e-10 {
            log::debug!("collocation: line search stalled at residual {res:.3e}");
            return NewtonOutcome { inner: x, iterations: it, residual: res, converged: false };
        }
        e = col.eval(&x, true);
    }
    NewtonOutcome { inner: x, iterations: opts.max_iter, residual: res, converged: false }
}

/// Uniform nodes plus geometric clusters resolving the `~1/α` boundary
/// layers when the uniform spacing cannot.
fn initial_mesh(n: usize, alpha: f64) -> Vec<f64> {
    let mut sigma = uniform_grid(n);
    let h = sigma[1];
    let layer = 1.0 / (alpha + 1.0);
    if layer < 2.0 * h {
        let mut x = 0.05 * layer;
        while x < 2.0 * h {
            sigma.push(x);
            sigma.push(1.0 - x);
            x *= 1.5;
        }
        sigma.sort_by(f64::total_cmp);
        sigma.dedup();
    }
    sigma
}

fn slopes(sigma: &[f64], d: &[f64]) -> Vec<f64> {
    let n = sigma.len();
    (0..n)
        .map(|k| {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(n - 1));
            (d[b] - d[a]) / (sigma[b] - sigma[a])
        })
        .collect()
}

/// Split cells where the curve turns sharply or the belief densities vary
/// quickly. Returns `None` when nothing needs refining.
fn refine(k: &PowerKernel, sigma: &[f64], d: &[f64], cap: usize) -> Option<Vec<f64>> {
    let sl = slopes(sigma, d);
    let coef = |s: f64, dd: f64| {
        let (t, b) = ((s - 0.5 * dd).clamp(0.0, 1.0), (s + 0.5 * dd).clamp(0.0, 1.0));
        [k.a1_prime(t), k.a0_prime(t), k.a1_prime(b), k.a0_prime(b)]
    };
    let mut out = Vec::with_capacity(2 * sigma.len());
    let mut added = 0;
    for i in 0..sigma.len() - 1 {
        out.push(sigma[i]);
        let (c0, c1) = (coef(sigma[i], d[i]), coef(sigma[i + 1], d[i + 1]));
        let coef_jump = c0.iter().zip(&c1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let width = sigma[i + 1] - sigma[i];
        if ((sl[i + 1] - sl[i]).abs() > 0.1 || coef_jump > 0.02) && width > 1e-9 {
            out.push(0.5 * (sigma[i] + sigma[i + 1]));
            added += 1;
        }
    }
    out.push(1.0);
    if added == 0 || out.len() > cap {
        None
    } else {
        Some(out)
    }
}

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    let k = x.partition_point(|&v| v <= at).clamp(1, x.len() - 1) - 1;
    let w = (at - x[k]) / (x[k + 1] - x[k]);
    y[k] + w * (y[k + 1] - y[k])
}

/// Starting curve: the pure-population limits blended by `λ`. At `λ = 0`
/// the equilibrium condition is algebraic, `N0(θ, b) = 0`; at `λ = 1` it is
/// `N1(θ, b) = 0`. Both are monotone curves through the corners.
fn pointwise_start(k: &PowerKernel, lambda: f64) -> impl Fn(f64) -> f64 {
    let mut xs = uniform_grid(4001);
    let layer = 1.0 / (k.alpha() + 1.0);
    let mut x = 0.01 * layer;
    while x < 1e-3 {
        xs.push(x);
        xs.push(1.0 - x);
        x *= 1.5;
    }
    xs.sort_by(f64::total_cmp);
    let curve = |pts: Vec<(f64, f64)>| -> (Vec<f64>, Vec<f64>) {
        let mut s: Vec<f64> = Vec::with_capacity(pts.len());
        let mut d: Vec<f64> = Vec::with_capacity(pts.len());
        for (t, b) in pts {
            let sig = 0.5 * (t + b);
            if s.last().is_none_or(|&l| sig > l) {
                s.push(sig);
                d.push(b - t);
            }
        }
        (s, d)
    };
    let c0 = curve(
        xs.iter()
            .map(|&t| {
                let (p, q) = (t * k.a1_prime(t), (1.0 - t) * k.a0_prime(t));
                (t, if p + q > 0.0 { p / (p + q) } else { t })
            })
            .collect(),
    );
    let c1 = curve(
        xs.iter()
            .map(|&b| {
                let (p, q) = ((1.0 - b) * k.a1_prime(b), b * k.a0_prime(b));
                (if p + q > 0.0 { q / (p + q) } else { b }, b)
            })
            .collect(),
    );
    move |s: f64| (1.0 - lambda) * interp(&c0.0, &c0.1, s) + lambda * interp(&c1.0, &c1.1, s)
}

struct Solution {
    sigma: Vec<f64>,
    outcome: NewtonOutcome,
}

/// Solve on the initial mesh, then refine and re-solve until the mesh is
/// adequate (or the node budget of eight times the grid size is spent).
///
/// If Newton fails from `start`, the problem is solved first at `α/4` (recursively) and
/// that solution, on its refined mesh, becomes the starting point.
fn solve_adaptive(
    k: &PowerKernel,
    lambda: f64,
    n: usize,
    start: &dyn Fn(f64) -> f64,
    opts: &SolverOptions,
) -> Solution {
    let mut sigma = initial_mesh(n, k.alpha());
    let x0: Vec<f64> = sigma[1..sigma.len() - 1].iter().map(|&s| start(s)).collect();
    let mut outcome = newton(&Collocation { k, lambda, sigma: sigma.clone() }, x0, opts);
    let mut iterations = outcome.iterations;
    if !outcome.converged && k.alpha() > 0.5 {
        log::info!("collocation: direct solve failed at alpha={}, lambda={lambda}; continuing from alpha/4", k.alpha());
        let easier = PowerKernel::new(0.25 * k.alpha()).expect("scaled alpha is valid");
        let prev = solve_adaptive(&easier, lambda, n, start, opts);
        iterations += prev.outcome.iterations;
        if prev.outcome.converged {
            let mut full = alloc::vec![0.0];
            full.extend_from_slice(&prev.outcome.inner);
            full.push(0.0);
            let mut next = prev.sigma.clone();
            next.extend(sigma.iter().copied());
            next.sort_by(f64::total_cmp);
            next.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            let x0: Vec<f64> = next[1..next.len() - 1].iter().map(|&s| interp(&prev.sigma, &full, s)).collect();
            let warm = newton(&Collocation { k, lambda, sigma: next.clone() }, x0, opts);
            iterations += warm.iterations;
            sigma = next;
            outcome = warm;
        }
    }
    for _ in 0..12 {
        if !outcome.converged {
            break;
        }
        let mut full = alloc::vec![0.0];
        full.extend_from_slice(&outcome.inner);
        full.push(0.0);
        let Some(next) = refine(k, &sigma, &full, 8 * n) else { break };
        let x0: Vec<f64> = next[1..next.len() - 1].iter().map(|&s| interp(&sigma, &full, s)).collect();
        let col = Collocation { k, lambda, sigma: next.clone() };
        let refined = newton(&col, x0, opts);
        iterations += refined.iterations;
        if !refined.converged {
            log::debug!("collocation: refined mesh with {} nodes did not converge", next.len());
            break;
        }
        sigma = next;
        outcome = refined;
    }
    outcome.iterations = iterations;
    Solution { sigma, outcome }
}

/// Turn collocation unknowns into a monotone bid function on the curve nodes.
fn to_bid_function(sigma: &[f64], inner: &[f64]) -> Result<(BidFunction, usize)> {
    let n = sigma.len();
    let mut d = Vec::with_capacity(n);
    d.push(0.0);
    d.extend_from_slice(inner);
    d.push(0.0);
    let th: Vec<f64> = sigma.iter().zip(&d).map(|(s, d)| (s - 0.5 * d).clamp(0.0, 1.0)).collect();
    let b: Vec<f64> = sigma.iter().zip(&d).map(|(s, d)| (s + 0.5 * d).clamp(0.0, 1.0)).collect();
    let (th, pt) = isotonic(&th);
    let (b, pb) = isotonic(&b);
    let mut nodes = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for (t, v) in th.into_iter().zip(b) {
        match nodes.last() {
            Some(&last) if t <= last => {}
            _ => {
                nodes.push(t);
                vals.push(v);
            }
        }
    }
    // The curve always ends at (1, 1).
    let last = nodes.len() - 1;
    if nodes[last] < 1.0 {
        nodes.push(1.0);
        vals.push(1.0);
    } else {
        vals[last] = 1.0;
    }
    nodes[0] = 0.0;
    vals[0] = 0.0;
    Ok((BidFunction::new(nodes, vals)?, pt.max(pb)))
}

/// Data-driven equilibrium of the second-price auction for rational share `lambda`.
///
/// Rational bidders bid their type. The misspecified strategy solves the
/// equilibrium boundary value problem by Newton's method (falling back to
/// continuation in `α`), is checked against one explicit best-response step,
/// and, if requested, re-solved from a second starting curve. Failure to
/// converge is reported in the profile, not as an error.
pub fn solve_spa(density: &TypeDensity, lambda: f64, opts: &SolverOptions) -> Result<EquilibriumProfile> {
    check_unit("lambda", lambda)?;
    opts.validate()?;
    let k = density.kernel();
    let n = density.grid_n();

    let main = solve_adaptive(k, lambda, n, &pointwise_start(k, lambda), opts);
    let (bm, pooled) = to_bid_function(&main.sigma, &main.outcome.inner)?;
    let main_nodes = main.sigma.len();
    let main = main.outcome;

    let robustness_gap = if opts.robustness_run {
        // Start from the curve b = θ(1+θ)/2, written in (σ, δ) coordinates.
        let start = |s: f64| {
            let t = -1.5 + crate::math::sqrt(2.25 + 4.0 * s);
            0.5 * t * (t - 1.0)
        };
        let alt = solve_adaptive(k, lambda, n, &start, opts);
        match to_bid_function(&alt.sigma, &alt.outcome.inner) {
            Ok((alt_bm, _)) if alt.outcome.converged => {
                let gap = alt_bm.graph_distance(&bm);
                if gap > 10.0 * opts.tol {
                    log::warn!("SPA alpha={} lambda={lambda}: alternative start reached a different solution (gap {gap:.3e})", k.alpha());
                }
                Some(gap)
            }
            _ => {
                log::warn!("SPA alpha={} lambda={lambda}: robustness run did not converge", k.alpha());
                None
            }
        }
    } else {
        None
    };

    let beliefs = belief_derivatives(beliefs_spa(density, &bm, lambda)?);
    let check = best_response_report(Format::Spa, &beliefs)?;
    let final_change = check.bid.graph_distance(&bm);
    let converged = main.converged && final_change < opts.tol && pooled * 100 <= main_nodes;
    if !converged {
        log::warn!(
            "SPA alpha={} lambda={lambda}: newton={} residual={:.3e} best-response change={final_change:.3e} pooled={pooled}",
            k.alpha(),
            main.converged,
            main.residual
        );
    }
    Ok(EquilibriumProfile {
        format: Format::Spa,
        alpha: k.alpha(),
        lambda,
        br: BidFunction::identity(n),
        bm,
        beliefs,
        convergence: Convergence {
            iterations: main.iterations,
            final_change,
            converged,
            max_residual: main.residual,
            pooled_nodes: pooled,
            robustness_gap,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let sub = [0.0, 1.0, -2.0, 0.5];
        let diag = [0.1, 3.0, 0.2, 4.0];
        let sup = [2.0, -1.0, 1.5, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { sub[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { sup[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let got = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..4 {
            assert!((got[i] - x[i]).abs() < 1e-12, "{got:?}");
        }
    }
}
