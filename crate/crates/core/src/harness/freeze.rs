//! Frozen-equation averages over a grid of slow states.

use serde::{Deserialize, Serialize};

use crate::averaging::{ergodic_decay_probe, estimate_ergodic_drift, DecayProbe, ErgodicConfig, ErgodicEstimate, SaturatingAverage};
use crate::drift::{FastDrift, StateDrift};
use crate::ensemble::Execution;
use crate::error::{Error, Result};
use crate::field::FieldState;

use super::check::{require_pass, CheckReport};
use super::config::ExperimentConfig;
use super::model::Model;

/// Estimates at one slow state, one entry per initial fast state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenPoint {
    pub z: FieldState,
    pub estimates: Vec<ErgodicEstimate>,
    /// Averaged drift from quadrature of the stationary law.
    pub reference: FieldState,
    /// `|bbar_a - bbar_b|_H` over its standard error, for the first two starts.
    pub start_agreement: Option<f64>,
    /// Largest per-component `|estimate - reference| / se` over all starts.
    pub reference_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreezeOutcome {
    pub check: CheckReport,
    pub settings: ErgodicConfig,
    pub points: Vec<FrozenPoint>,
    pub decay: DecayProbe,
    /// `mu_1 - K3`, the guaranteed decay rate.
    pub rate_floor: f64,
}

fn h_norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `|a - b|_H / sqrt(sum se_a^2 + se_b^2)`; 0 when both are exact and equal.
pub fn start_agreement(a: &ErgodicEstimate, b: &ErgodicEstimate) -> f64 {
    let diff = h_norm(a.mean.coeffs.iter().zip(&b.mean.coeffs).map(|(x, y)| x - y));
    let se = h_norm(a.se.iter().chain(&b.se).copied());
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

pub fn run_freeze(cfg: &ExperimentConfig, exec: Execution) -> Result<FreezeOutcome> {
    if !cfg.fast_slow_scenario() {
        return Err(Error::Input("freeze needs the fast-slow scenario".into()));
    }
    let check = require_pass(cfg)?;
    let model = Model::build(cfg)?;
    let fs = model.fast_slow.as_ref().expect("fast-slow model");
    let k = cfg.modes;

    let mut settings = ErgodicConfig::defaults_for(&fs.f, &fs.fast)?;
    if let Some(v) = cfg.burn_in {
        settings.burn_in = v;
    }
    if let Some(v) = cfg.horizon {
        settings.horizon = v;
    }
    if let Some(v) = cfg.replications {
        settings.replications = v;
    }
    settings.batches = cfg.batches;

    let zs: Vec<FieldState> = match &cfg.freeze_z {
        Some(rows) => rows.iter().cloned().map(FieldState::new).collect(),
        None => vec![
            FieldState::zeros(k),
            FieldState::unit(k, 1.0),
            FieldState::new(vec![0.5; k]),
        ],
    };
    let y0s: Vec<FieldState> = match &cfg.freeze_y0 {
        Some(rows) => rows.iter().cloned().map(FieldState::new).collect(),
        None => vec![FieldState::zeros(k), FieldState::new(vec![2.0; k])],
    };

    let exact = SaturatingAverage::new(fs.b.clone(), fs.f, &fs.fast)?;
    let mut points = Vec::with_capacity(zs.len());
    for (zi, z) in zs.iter().enumerate() {
        let estimates = y0s
            .iter()
            .enumerate()
            .map(|(yi, y0)| {
                // independent replications for every (z, y0) cell
                let seed = cfg.seed ^ ((zi as u64) << 40) ^ ((yi as u64 + 1) << 20);
                estimate_ergodic_drift(z, y0, &fs.f, &fs.b, &fs.fast, &settings, seed, exec)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut reference = vec![0.0; k];
        exact.eval(&z.coeffs, &mut reference);
        let reference_z = estimates
            .iter()
            .flat_map(|e| {
                e.mean.coeffs.iter().zip(&e.se).zip(&reference).map(|((m, s), r)| {
                    let d = (m - r).abs();
                    if d == 0.0 {
                        0.0
                    } else {
                        d / s
                    }
                })
            })
            .fold(0.0, f64::max);
        let start_agreement = (estimates.len() >= 2).then(|| start_agreement(&estimates[0], &estimates[1]));
        points.push(FrozenPoint {
            z: z.clone(),
            estimates,
            reference: FieldState::new(reference),
            start_agreement,
            reference_z,
        });
    }

    let gap = fs.fast.op.lambda1() - fs.f.k3();
    let t_grid = cfg
        .decay_grid
        .clone()
        .unwrap_or_else(|| (1..=12).map(|i| 0.25 * i as f64 / gap).collect());
    let y = FieldState::new(cfg.decay_y.clone().unwrap_or_else(|| FieldState::unit(k, 3.0).coeffs));
    let decay = ergodic_decay_probe(
        &zs[0],
        &y,
        &fs.f,
        &fs.b,
        &fs.fast,
        &points[0].reference,
        &t_grid,
        cfg.decay_ensemble,
        cfg.seed,
        exec,
    )?;
    Ok(FreezeOutcome {
        check,
        settings,
        points,
        decay,
        rate_floor: gap,
    })
}
