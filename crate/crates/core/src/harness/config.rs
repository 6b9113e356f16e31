//! Experiment configuration, read from TOML.
//!
//! All keys are flat; matrices are written as arrays of rows and class
//! partitions as arrays of 1-based state lists. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SwitchingSingle,
    SwitchingMulticlass,
    FastSlow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftKind {
    LinearReaction,
    BoundedSaturating,
}

fn default_rule() -> [f64; 2] {
    [1.0, 2.0]
}
fn default_modes() -> usize {
    20
}
fn default_t_end() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_paths() -> usize {
    2000
}
fn default_c_sub() -> f64 {
    0.5
}
fn default_checkpoints() -> usize {
    10
}
fn default_batches() -> usize {
    10
}
fn default_aggregate_eps() -> f64 {
    1e-3
}
fn default_aggregate_horizon() -> f64 {
    1000.0
}
fn default_decay_ensemble() -> usize {
    20_000
}
fn default_max_work() -> f64 {
    2e10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Stability index of the slow noise `L`.
    pub alpha: f64,
    /// Stability index of the fast noise `Z` (fast-slow only).
    #[serde(default)]
    pub beta: Option<f64>,
    pub theta: f64,
    pub p: f64,
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// `lambda_k = c k^e` as `[c, e]`.
    #[serde(default = "default_rule")]
    pub a_rule: [f64; 2],
    /// `beta_k = c k^-d` as `[c, d]`.
    #[serde(default = "default_rule")]
    pub l_rule: [f64; 2],
    #[serde(default = "default_rule")]
    pub b_rule: [f64; 2],
    #[serde(default = "default_rule")]
    pub z_rule: [f64; 2],
    /// Ceiling on admissibility partial sums when tail bounds are not wanted.
    #[serde(default)]
    pub tail_cap: Option<f64>,

    #[serde(default)]
    pub q_fast: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub q_slow: Option<Vec<Vec<f64>>>,
    /// 1-based state lists; defaults to one class holding every state.
    #[serde(default)]
    pub classes: Option<Vec<Vec<usize>>>,
    /// 1-based initial regime.
    #[serde(default)]
    pub r0: Option<usize>,

    #[serde(default)]
    pub drift: Option<DriftKind>,
    /// Linear-reaction coefficients or saturating gains, one per regime.
    #[serde(default)]
    pub drift_coeffs: Vec<f64>,
    #[serde(default)]
    pub drift_offsets: Vec<Vec<f64>>,

    #[serde(default)]
    pub slow_x_gain: f64,
    #[serde(default)]
    pub slow_y_gain: f64,
    #[serde(default)]
    pub slow_offsets: Vec<f64>,
    /// Linear feedback gain of the fast drift (its Gateaux bound `K3`).
    #[serde(default)]
    pub fast_y_gain: f64,
    /// Gain of the slow variable in the fast drift (`K2`).
    #[serde(default)]
    pub fast_x_gain: f64,

    pub eps_grid: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_c_sub")]
    pub c_sub: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Upper limit on `paths * modes * steps * substeps * |eps_grid|`.
    #[serde(default = "default_max_work")]
    pub max_work: f64,

    #[serde(default)]
    pub freeze_z: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub freeze_y0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub decay_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub decay_y: Option<Vec<f64>>,
    #[serde(default = "default_decay_ensemble")]
    pub decay_ensemble: usize,

    #[serde(default = "default_aggregate_eps")]
    pub aggregate_eps: f64,
    #[serde(default = "default_aggregate_horizon")]
    pub aggregate_horizon: f64,

    #[serde(default)]
    pub simulate_eps: Option<f64>,
    /// Number of interior rod points at which the field is synthesized.
    #[serde(default)]
    pub synth_points: usize,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn fast_slow_scenario(&self) -> bool {
        self.scenario == Scenario::FastSlow
    }

    pub fn fast_beta(&self) -> f64 {
        self.beta.unwrap_or(self.alpha)
    }
}
