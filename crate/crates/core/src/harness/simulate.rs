//! One seeded trajectory for inspection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::engine::{solve_fast_slow, solve_switching_spde, uniform_grid, FastSlowSystem, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::markov::simulate_chain;
use crate::rng::{Channel, StreamKey};

use super::check::{require_pass, CheckReport};
use super::config::ExperimentConfig;
use super::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateOutcome {
    pub check: CheckReport,
    pub eps: f64,
    pub record: TrajectoryRecord,
    /// Interior rod points `j pi / (n + 1)` used for synthesis.
    pub synth_x: Vec<f64>,
}

impl SimulateOutcome {
    pub fn max_norm(&self) -> f64 {
        self.record.states.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }
}

pub fn rod_points(n: usize) -> Vec<f64> {
    (1..=n).map(|j| j as f64 * PI / (n + 1) as f64).collect()
}

pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateOutcome> {
    let check = require_pass(cfg)?;
    let model = Model::build(cfg)?;
    let eps = cfg.simulate_eps.unwrap_or(cfg.eps_grid[0]);
    if !(eps > 0.0) {
        return Err(Error::Input("simulate_eps must be positive".into()));
    }
    let grid = uniform_grid(cfg.t_end, cfg.dt)?;
    let mut slow_rng = StreamKey::for_path(cfg.seed, 0, Channel::Slow).open();
    let record = if let Some(sw) = &model.switching {
        let mut chain_rng = StreamKey::for_path(cfg.seed, 0, Channel::Chain).open();
        let chain = simulate_chain(&sw.q_fast, &sw.q_slow, eps, sw.r0, cfg.t_end, &mut chain_rng)?;
        solve_switching_spde(&model.x0, &sw.drift, &model.slow, &chain, &grid, &mut slow_rng)?
    } else {
        let fs = model.fast_slow.as_ref().expect("fast-slow model");
        let sys = FastSlowSystem {
            slow: &model.slow,
            fast: &fs.fast,
            b: &fs.b,
            f: &fs.f,
            eps,
            c_sub: cfg.c_sub,
        };
        let mut fast_rng = StreamKey::for_path(cfg.seed, 0, Channel::Fast).open();
        solve_fast_slow(&model.x0, &fs.y0, &sys, &grid, &mut slow_rng, &mut fast_rng)?
    };
    Ok(SimulateOutcome {
        check,
        eps,
        record,
        synth_x: rod_points(cfg.synth_points),
    })
}
