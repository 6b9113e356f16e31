//! Coupled epsilon sweeps and the log-log rate fit.
//!
//! Path `i` draws its slow noise from substream `(seed, i, Slow)` for both
//! members of the pair, so `X^eps` and `X_bar` see the same `L`. The chain
//! (switching) or the fast noise (fast-slow) uses its own substream and
//! only enters `X^eps`.

use serde::{Deserialize, Serialize};

use crate::averaging::{ClassAverage, SaturatingAverage};
use crate::engine::{solve_averaged_spde, solve_fast_slow, solve_switching_averaged_spde, solve_switching_spde, uniform_grid, FastSlowSystem};
use crate::ensemble::{try_map_indexed, Execution};
use crate::error::{Error, Result};
use crate::markov::{aggregate_path, simulate_chain};
use crate::rng::{Channel, StreamKey};
use crate::stats::{ols, pth_root_estimate, BatchEstimate};

use super::check::{require_pass, CheckReport};
use super::config::ExperimentConfig;
use super::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub eps: f64,
    pub p: f64,
    pub error: f64,
    pub se: f64,
    pub n_paths: usize,
}

/// Largest checkpoint error, with the checkpoint time it was attained at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupRow {
    pub eps: f64,
    pub t: f64,
    pub error: f64,
    pub se: f64,
    /// Largest single-path distance at `t_end`.
    pub max_path_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
    /// `rho theta` with `rho` at 95% of its admissible ceiling.
    pub theoretical_exponent: f64,
    /// The ceiling `theta (alpha - p) / (alpha - p + p theta alpha)`.
    pub exponent_bound: f64,
}

/// Returns `(exponent_bound, theoretical_exponent)`.
pub fn theoretical_rate(alpha: f64, p: f64, theta: f64) -> (f64, f64) {
    let rho_max = (alpha - p) / (alpha - p + p * theta * alpha);
    (theta * rho_max, 0.95 * rho_max * theta)
}

/// Least squares of `log error` on `log eps`.
pub fn rate_fit(rows: &[ErrorRow], alpha: f64, theta: f64) -> Result<RateFit> {
    if rows.len() < 3 {
        return Err(Error::Fit(format!(
            "rate fit needs at least 3 grid points, got {}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| !(r.error > 0.0)) {
        return Err(Error::Fit(format!("nonpositive error {} at eps = {}", r.error, r.eps)));
    }
    let x: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let fit = ols(&x, &y).ok_or_else(|| Error::Fit("degenerate eps grid".into()))?;
    let (bound, exponent) = theoretical_rate(alpha, rows[0].p, theta);
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points: rows.len(),
        theoretical_exponent: exponent,
        exponent_bound: bound,
    })
}

/// True when the error column decreases along the grid except for at most
/// one inversion, and that inversion lies within `tol` combined SEs.
pub fn decreasing_with_tolerance(rows: &[ErrorRow], tol: f64) -> bool {
    let mut inversions = 0;
    for w in rows.windows(2) {
        if w[1].error > w[0].error {
            inversions += 1;
            let se = (w[0].se.powi(2) + w[1].se.powi(2)).sqrt();
            if w[1].error - w[0].error > tol * se {
                return false;
            }
        }
    }
    inversions <= 1
}

/// `(a.error - b.error) / sqrt(a.se^2 + b.se^2)`.
pub fn separation(a: &ErrorRow, b: &ErrorRow) -> f64 {
    (a.error - b.error) / (a.se.powi(2) + b.se.powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeOutcome {
    pub check: CheckReport,
    pub table: Vec<ErrorRow>,
    pub sup: Vec<SupRow>,
    pub fit: Option<RateFit>,
    pub fit_notice: Option<String>,
    pub checkpoint_times: Vec<f64>,
}

fn checkpoint_indices(steps: usize, count: usize) -> Vec<usize> {
    let count = count.min(steps);
    let mut idx: Vec<usize> = (1..=count)
        .map(|c| ((c as f64 * steps as f64 / count as f64).round() as usize).clamp(1, steps))
        .collect();
    idx.dedup();
    idx
}

fn steps_per_slow_step(cfg: &ExperimentConfig, eps: f64) -> f64 {
    if cfg.fast_slow_scenario() {
        1.0 + (cfg.dt / cfg.dt.min(cfg.c_sub * eps)).ceil()
    } else {
        2.0
    }
}

/// Rough count of mode updates for the whole sweep.
pub fn sweep_work(cfg: &ExperimentConfig) -> f64 {
    let steps = (cfg.t_end / cfg.dt).ceil();
    cfg.eps_grid
        .iter()
        .map(|&e| cfg.n_paths as f64 * cfg.modes as f64 * steps * steps_per_slow_step(cfg, e))
        .sum()
}

/// Per path, the distances `|X^eps(t_c) - X_bar(t_c)|_H` at the checkpoint
/// indices of the grid (the last checkpoint is `t_end`).
pub fn pair_distances(
    model: &Model,
    cfg: &ExperimentConfig,
    eps: f64,
    grid: &[f64],
    marks: &[usize],
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let t_end = *grid.last().unwrap();
    let dist = |a: &crate::engine::TrajectoryRecord, b: &crate::engine::TrajectoryRecord| -> Vec<f64> {
        marks.iter().map(|&i| a.states[i].distance(&b.states[i])).collect()
    };
    if let Some(sw) = &model.switching {
        let avg = ClassAverage::new(sw.drift.clone(), sw.partition.clone(), sw.mu.clone())?;
        try_map_indexed(cfg.n_paths, exec, |i| {
            let mut chain_rng = StreamKey::for_path(cfg.seed, i as u64, Channel::Chain).open();
            let chain = simulate_chain(&sw.q_fast, &sw.q_slow, eps, sw.r0, t_end, &mut chain_rng)?;
            let classes = aggregate_path(&chain, &sw.partition)?;
            let key = StreamKey::for_path(cfg.seed, i as u64, Channel::Slow);
            let xe = solve_switching_spde(&model.x0, &sw.drift, &model.slow, &chain, grid, &mut key.open())?;
            let xb = solve_switching_averaged_spde(&model.x0, &avg, &model.slow, &classes, grid, &mut key.open())?;
            Ok(dist(&xe, &xb))
        })
    } else if let Some(fs) = &model.fast_slow {
        let bbar = SaturatingAverage::new(fs.b.clone(), fs.f, &fs.fast)?;
        let sys = FastSlowSystem {
            slow: &model.slow,
            fast: &fs.fast,
            b: &fs.b,
            f: &fs.f,
            eps,
            c_sub: cfg.c_sub,
        };
        try_map_indexed(cfg.n_paths, exec, |i| {
            let key = StreamKey::for_path(cfg.seed, i as u64, Channel::Slow);
            let mut fast_rng = StreamKey::for_path(cfg.seed, i as u64, Channel::Fast).open();
            let xe = solve_fast_slow(&model.x0, &fs.y0, &sys, grid, &mut key.open(), &mut fast_rng)?;
            let xb = solve_averaged_spde(&model.x0, &bbar, &model.slow, grid, &mut key.open())?;
            Ok(dist(&xe, &xb))
        })
    } else {
        Err(Error::Input("model has neither switching nor fast-slow parts".into()))
    }
}

/// Runs the check, refuses to start on failure, then sweeps the epsilon grid.
pub fn run_converge(cfg: &ExperimentConfig, exec: Execution) -> Result<ConvergeOutcome> {
    let check = require_pass(cfg)?;
    let work = sweep_work(cfg);
    if work > cfg.max_work {
        return Err(Error::Input(format!(
            "sweep needs about {work:.3e} mode updates, above max_work = {:.3e}",
            cfg.max_work
        )));
    }
    let model = Model::build(cfg)?;
    let grid = uniform_grid(cfg.t_end, cfg.dt)?;
    let marks = checkpoint_indices(grid.len() - 1, cfg.checkpoints);
    let last = marks.len() - 1;

    let mut table = Vec::with_capacity(cfg.eps_grid.len());
    let mut sup = Vec::with_capacity(cfg.eps_grid.len());
    for &eps in &cfg.eps_grid {
        let d = pair_distances(&model, cfg, eps, &grid, &marks, exec)?;
        let at = |c: usize| -> BatchEstimate {
            let powers: Vec<f64> = d.iter().map(|row| row[c].powf(cfg.p)).collect();
            pth_root_estimate(&powers, cfg.p, cfg.batches)
        };
        let end = at(last);
        table.push(ErrorRow {
            eps,
            p: cfg.p,
            error: end.mean,
            se: end.se,
            n_paths: cfg.n_paths,
        });
        let (c_best, best) = (0..marks.len())
            .map(|c| (c, at(c)))
            .fold((last, end), |acc, (c, e)| if e.mean > acc.1.mean { (c, e) } else { acc });
        sup.push(SupRow {
            eps,
            t: grid[marks[c_best]],
            error: best.mean,
            se: best.se,
            max_path_distance: d.iter().map(|row| row[last]).fold(0.0, f64::max),
        });
    }

    let (fit, fit_notice) = match rate_fit(&table, cfg.alpha, cfg.theta) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(ConvergeOutcome {
        check,
        table,
        sup,
        fit,
        fit_notice,
        checkpoint_times: marks.iter().map(|&i| grid[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rows(eps: &[f64], err: impl Fn(f64) -> f64) -> Vec<ErrorRow> {
        eps.iter()
            .map(|&e| ErrorRow {
                eps: e,
                p: 1.2,
                error: err(e),
                se: 0.01,
                n_paths: 10,
            })
            .collect()
    }

    #[test]
    fn exact_power_law_fit() {
        let t = rows(&[0.1, 0.05, 0.02, 0.01], |e| e.powf(0.3));
        let f = rate_fit(&t, 1.5, 0.5).unwrap();
        assert_abs_diff_eq!(f.slope, 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_errors_fit_zero_slope() {
        let f = rate_fit(&rows(&[0.1, 0.05, 0.02], |_| 0.7), 1.5, 0.5).unwrap();
        assert_abs_diff_eq!(f.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_refuses_short_or_nonpositive_tables() {
        assert!(matches!(rate_fit(&rows(&[0.1, 0.05], |e| e), 1.5, 0.5), Err(Error::Fit(_))));
        assert!(matches!(rate_fit(&rows(&[0.1, 0.05, 0.01], |_| 0.0), 1.5, 0.5), Err(Error::Fit(_))));
    }

    #[test]
    fn theoretical_bound_example() {
        let (bound, exponent) = theoretical_rate(1.5, 1.2, 0.5);
        assert_abs_diff_eq!(bound, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(exponent, 0.95 * 0.125, epsilon = 1e-15);
    }

    #[test]
    fn inversion_rule() {
        let mut t = rows(&[0.1, 0.05, 0.02, 0.01], |e| e);
        assert!(decreasing_with_tolerance(&t, 2.0));
        t[2].error = t[1].error + 0.01;
        assert!(decreasing_with_tolerance(&t, 2.0));
        t[2].error = t[1].error + 0.05;
        assert!(!decreasing_with_tolerance(&t, 2.0));
        t[2].error = t[1].error + 0.001;
        t[3].error = t[2].error + 0.001;
        assert!(!decreasing_with_tolerance(&t, 2.0));
    }

    #[test]
    fn checkpoints_end_at_last_step() {
        assert_eq!(checkpoint_indices(100, 10), vec![10, 20, 30, 40, 50, 60, 70, 80, 90, 100]);
        assert_eq!(checkpoint_indices(3, 10), vec![1, 2, 3]);
    }
}
