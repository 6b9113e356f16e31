//! Turns a parsed configuration into solver inputs.
//!
//! Structural problems (missing keys, wrong lengths, non-square matrices)
//! are input errors. Violated modelling assumptions are left to the check
//! step, which reports them as conditions; `Model::build` is only called
//! once those have passed.

use crate::drift::{DriftSpec, LinearFeedback, SaturatingCoupling};
use crate::engine::StableField;
use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::markov::{class_stationary, ClassPartition, GeneratorMatrix};
use crate::spectral::SpectralOperator;
use crate::stable::NoiseWeights;

use super::config::{DriftKind, ExperimentConfig, Scenario};

fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}

fn as_input(e: Error) -> Error {
    match e {
        Error::Input(_) => e,
        other => Error::Input(other.to_string()),
    }
}

pub(crate) fn build_field(rule_a: [f64; 2], rule_w: [f64; 2], modes: usize, alpha: f64) -> Result<StableField> {
    let op = SpectralOperator::power_law(rule_a[0], rule_a[1], modes)?;
    let w = NoiseWeights::power_law(rule_w[0], rule_w[1], modes)?;
    StableField::new(op, w, alpha)
}

/// Raw switching inputs, 0-based.
#[derive(Debug, Clone)]
pub(crate) struct SwitchingInputs {
    pub q_fast: Vec<Vec<f64>>,
    pub q_slow: Vec<Vec<f64>>,
    pub classes: Vec<Vec<usize>>,
    pub r0: usize,
    pub drift: DriftSpec,
}

/// Checks shapes and index ranges without judging the model.
pub(crate) fn validate(cfg: &ExperimentConfig) -> Result<Option<SwitchingInputs>> {
    if cfg.modes == 0 {
        return Err(input("modes must be at least 1"));
    }
    if cfg.eps_grid.is_empty() {
        return Err(input("eps_grid must not be empty"));
    }
    if !(cfg.t_end > 0.0 && cfg.t_end.is_finite()) || !(cfg.dt > 0.0 && cfg.dt <= cfg.t_end) {
        return Err(input("need 0 < dt <= t_end"));
    }
    if cfg.n_paths < 2 || cfg.batches < 2 || cfg.n_paths < cfg.batches {
        return Err(input("need n_paths >= batches >= 2"));
    }
    if cfg.checkpoints == 0 {
        return Err(input("checkpoints must be at least 1"));
    }
    if !(cfg.c_sub > 0.0) {
        return Err(input("c_sub must be positive"));
    }
    for (name, v) in [("x0", &cfg.x0), ("y0", &cfg.y0), ("decay_y", &cfg.decay_y)] {
        if let Some(v) = v {
            if v.len() != cfg.modes {
                return Err(input(format!("{name} has {} entries, expected {}", v.len(), cfg.modes)));
            }
        }
    }
    for (name, rows) in [("freeze_z", &cfg.freeze_z), ("freeze_y0", &cfg.freeze_y0)] {
        if let Some(rows) = rows {
            if rows.is_empty() || rows.iter().any(|r| r.len() != cfg.modes) {
                return Err(input(format!("every {name} row needs {} entries", cfg.modes)));
            }
        }
    }
    for (name, r) in [("a_rule", cfg.a_rule), ("l_rule", cfg.l_rule), ("b_rule", cfg.b_rule), ("z_rule", cfg.z_rule)] {
        if !(r[0] > 0.0 && r[0].is_finite() && r[1].is_finite()) {
            return Err(input(format!("{name} needs a positive coefficient and a finite exponent")));
        }
    }

    if cfg.scenario == Scenario::FastSlow {
        if cfg.slow_offsets.len() > cfg.modes {
            return Err(input("slow_offsets longer than modes"));
        }
        return Ok(None);
    }

    let q_fast = cfg.q_fast.clone().ok_or_else(|| input("switching scenarios need q_fast"))?;
    let q_slow = cfg.q_slow.clone().ok_or_else(|| input("switching scenarios need q_slow"))?;
    let n = q_fast.len();
    for (name, q) in [("q_fast", &q_fast), ("q_slow", &q_slow)] {
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            return Err(input(format!("{name} must be a square {n}x{n} matrix")));
        }
    }
    if n == 0 {
        return Err(input("generators must have at least one state"));
    }

    let classes: Vec<Vec<usize>> = match (&cfg.classes, cfg.scenario) {
        (None, Scenario::SwitchingSingle) => vec![(0..n).collect()],
        (None, _) => return Err(input("switching-multiclass needs classes")),
        (Some(cs), sc) => {
            if sc == Scenario::SwitchingSingle && cs.len() != 1 {
                return Err(input("switching-single takes a single class"));
            }
            let mut out = Vec::with_capacity(cs.len());
            for c in cs {
                let mut cc = Vec::with_capacity(c.len());
                for &s in c {
                    if s == 0 || s > n {
                        return Err(input(format!("class state {s} outside 1..={n}")));
                    }
                    cc.push(s - 1);
                }
                out.push(cc);
            }
            ClassPartition::new(out.clone()).map_err(as_input)?;
            if out.iter().map(|c| c.len()).sum::<usize>() != n {
                return Err(input("classes must cover every state exactly once"));
            }
            out
        }
    };

    let r0 = cfg.r0.unwrap_or(1);
    if r0 == 0 || r0 > n {
        return Err(input(format!("r0 = {r0} outside 1..={n}")));
    }

    let kind = cfg.drift.ok_or_else(|| input("switching scenarios need a drift"))?;
    if cfg.drift_coeffs.len() != n {
        return Err(input(format!(
            "drift_coeffs has {} entries for {n} states",
            cfg.drift_coeffs.len()
        )));
    }
    let drift = match kind {
        DriftKind::LinearReaction => {
            if !cfg.drift_offsets.is_empty() {
                return Err(input("drift_offsets only apply to bounded-saturating drifts"));
            }
            DriftSpec::linear(cfg.drift_coeffs.clone())
        }
        DriftKind::BoundedSaturating => {
            if cfg.drift_offsets.iter().any(|o| o.len() > cfg.modes) {
                return Err(input("drift_offsets rows longer than modes"));
            }
            DriftSpec::saturating(cfg.drift_coeffs.clone(), cfg.drift_offsets.clone()).map_err(as_input)?
        }
    };

    Ok(Some(SwitchingInputs {
        q_fast,
        q_slow,
        classes,
        r0: r0 - 1,
        drift,
    }))
}

#[derive(Debug, Clone)]
pub struct SwitchingModel {
    pub q_fast: GeneratorMatrix,
    pub q_slow: GeneratorMatrix,
    pub partition: ClassPartition,
    pub blocks: Vec<GeneratorMatrix>,
    pub mu: Vec<Vec<f64>>,
    pub r0: usize,
    pub drift: DriftSpec,
}

#[derive(Debug, Clone)]
pub struct FastSlowModel {
    pub fast: StableField,
    pub b: SaturatingCoupling,
    pub f: LinearFeedback,
    pub y0: FieldState,
}

/// Solver inputs for one configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub slow: StableField,
    pub x0: FieldState,
    pub switching: Option<SwitchingModel>,
    pub fast_slow: Option<FastSlowModel>,
}

impl Model {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let sw = validate(cfg)?;
        let slow = build_field(cfg.a_rule, cfg.l_rule, cfg.modes, cfg.alpha)?;
        let x0 = FieldState::new(
            cfg.x0
                .clone()
                .unwrap_or_else(|| FieldState::unit(cfg.modes, 1.0).coeffs),
        );
        let switching = match sw {
            Some(s) => {
                let q_fast = GeneratorMatrix::from_rows(&s.q_fast)?;
                let q_slow = GeneratorMatrix::from_rows(&s.q_slow)?;
                let partition = ClassPartition::new(s.classes)?;
                let blocks = partition
                    .classes()
                    .iter()
                    .map(|c| q_fast.sub_block(c))
                    .collect::<Result<Vec<_>>>()?;
                let mu = class_stationary(&blocks)?;
                Some(SwitchingModel {
                    q_fast,
                    q_slow,
                    partition,
                    blocks,
                    mu,
                    r0: s.r0,
                    drift: s.drift,
                })
            }
            None => None,
        };
        let fast_slow = if cfg.scenario == Scenario::FastSlow {
            Some(FastSlowModel {
                fast: build_field(cfg.b_rule, cfg.z_rule, cfg.modes, cfg.fast_beta())?,
                b: SaturatingCoupling {
                    x_gain: cfg.slow_x_gain,
                    y_gain: cfg.slow_y_gain,
                    offsets: cfg.slow_offsets.clone(),
                },
                f: LinearFeedback {
                    y_gain: cfg.fast_y_gain,
                    x_gain: cfg.fast_x_gain,
                },
                y0: FieldState::new(cfg.y0.clone().unwrap_or_else(|| vec![0.0; cfg.modes])),
            })
        } else {
            None
        };
        Ok(Self {
            slow,
            x0,
            switching,
            fast_slow,
        })
    }
}
