//! Empirical behaviour of the aggregated chain against its limit generator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{aggregate_generator, aggregate_path, empirical_rates, occupation_fractions, simulate_chain};
use crate::rng::{Channel, StreamKey};

use super::check::{require_pass, CheckReport};
use super::config::ExperimentConfig;
use super::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub from_class: usize,
    pub to_class: usize,
    pub empirical_rate: f64,
    pub qbar_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassOccupation {
    pub class: usize,
    /// Share of the time in the class spent in each of its states.
    pub empirical: Vec<f64>,
    pub stationary: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateOutcome {
    pub check: CheckReport,
    pub eps: f64,
    pub horizon: f64,
    pub qbar: Vec<Vec<f64>>,
    pub jumps: usize,
    pub class_jumps: usize,
    pub rates: Vec<RateRow>,
    pub occupation: Vec<ClassOccupation>,
    /// Largest `|empirical / qbar - 1|` over positive `qbar` entries.
    pub worst_relative_error: f64,
}

pub fn run_aggregate(cfg: &ExperimentConfig) -> Result<AggregateOutcome> {
    if cfg.fast_slow_scenario() {
        return Err(Error::Input("aggregate needs a switching scenario".into()));
    }
    let check = require_pass(cfg)?;
    if !(cfg.aggregate_eps > 0.0 && cfg.aggregate_horizon > 0.0) {
        return Err(Error::Input("aggregate_eps and aggregate_horizon must be positive".into()));
    }
    let model = Model::build(cfg)?;
    let sw = model.switching.as_ref().expect("switching model");
    let qbar = aggregate_generator(&sw.blocks, &sw.q_slow, &sw.partition)?;
    let mut rng = StreamKey::for_path(cfg.seed, 0, Channel::Chain).open();
    let path = simulate_chain(&sw.q_fast, &sw.q_slow, cfg.aggregate_eps, sw.r0, cfg.aggregate_horizon, &mut rng)?;
    let classes = aggregate_path(&path, &sw.partition)?;
    let l = sw.partition.num_classes();
    let emp = empirical_rates(&classes, l);

    let mut rates = Vec::new();
    let mut worst = 0.0f64;
    for i in 0..l {
        for j in 0..l {
            if i == j {
                continue;
            }
            let q = qbar.rate(i, j);
            if q > 0.0 {
                worst = worst.max((emp[i][j] / q - 1.0).abs());
            }
            rates.push(RateRow {
                from_class: i + 1,
                to_class: j + 1,
                empirical_rate: emp[i][j],
                qbar_rate: q,
            });
        }
    }

    let occ = occupation_fractions(&path, sw.partition.num_states());
    let occupation = sw
        .partition
        .classes()
        .iter()
        .zip(&sw.mu)
        .enumerate()
        .map(|(k, (c, mu))| {
            let total: f64 = c.iter().map(|&s| occ[s]).sum();
            ClassOccupation {
                class: k + 1,
                empirical: c.iter().map(|&s| if total > 0.0 { occ[s] / total } else { 0.0 }).collect(),
                stationary: mu.clone(),
            }
        })
        .collect();

    Ok(AggregateOutcome {
        check,
        eps: cfg.aggregate_eps,
        horizon: cfg.aggregate_horizon,
        qbar: qbar.rows(),
        jumps: path.num_jumps(),
        class_jumps: classes.num_jumps(),
        rates,
        occupation,
        worst_relative_error: worst,
    })
}
