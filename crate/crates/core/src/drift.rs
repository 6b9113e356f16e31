//! Drift catalog for the slow and fast equations.
//!
//! Regime-indexed drifts `b(x, i)` drive the switching equations; the
//! fast-slow system uses a slow drift `b(x, y)` and a fast drift `f(x, y)`.
//! Every concrete drift declares its constants so the assumption checks can
//! compare them against sampled difference quotients.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Odd, bounded, 1-Lipschitz saturation.
#[inline]
pub fn sat(v: f64) -> f64 {
    v.tanh()
}

/// A drift indexed by a discrete regime.
pub trait RegimeDrift: Sync {
    fn num_regimes(&self) -> usize;
    /// Writes `b(x, regime)` into `out`.
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]);
    /// Declared Lipschitz constant in the state for one regime.
    fn lipschitz(&self, regime: usize) -> f64;
    /// Declared uniform bound on `|b|_H`, if the drift is bounded.
    fn bound(&self, dim: usize) -> Option<f64>;
}

/// A drift depending on the state alone, such as an averaged drift.
pub trait StateDrift: Sync {
    fn eval(&self, x: &[f64], out: &mut [f64]);
}

/// Views a state-only drift as a single-regime drift.
pub struct Unswitched<'a, D: ?Sized>(pub &'a D);

impl<D: StateDrift + ?Sized> RegimeDrift for Unswitched<'_, D> {
    fn num_regimes(&self) -> usize {
        1
    }

    fn eval(&self, x: &[f64], _regime: usize, out: &mut [f64]) {
        self.0.eval(x, out)
    }

    fn lipschitz(&self, _regime: usize) -> f64 {
        f64::NAN
    }

    fn bound(&self, _dim: usize) -> Option<f64> {
        None
    }
}

/// Zero drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDrift;

impl StateDrift for NoDrift {
    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

pub type TableFn = dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync;

/// User supplied drift with declared constants.
#[derive(Clone)]
pub struct CustomTable {
    pub regimes: usize,
    pub func: Arc<TableFn>,
    pub lipschitz: Vec<f64>,
    pub bound: Option<f64>,
}

impl fmt::Debug for CustomTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomTable")
            .field("regimes", &self.regimes)
            .field("lipschitz", &self.lipschitz)
            .field("bound", &self.bound)
            .finish()
    }
}

/// Regime drifts from the catalog.
#[derive(Debug, Clone)]
pub enum DriftSpec {
    /// `b(x, i) = c_i x`.
    LinearReaction { coeffs: Vec<f64> },
    /// `b(x, i)_k = a_i sat(x_k) + o_{i,k}`; offsets missing beyond the
    /// given length are zero.
    BoundedSaturating {
        gains: Vec<f64>,
        offsets: Vec<Vec<f64>>,
    },
    CustomTable(CustomTable),
}

impl DriftSpec {
    pub fn linear(coeffs: Vec<f64>) -> Self {
        Self::LinearReaction { coeffs }
    }

    pub fn saturating(gains: Vec<f64>, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if !offsets.is_empty() && offsets.len() != gains.len() {
            return Err(Error::Dimension("one offset row per regime".into()));
        }
        Ok(Self::BoundedSaturating { gains, offsets })
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, DriftSpec::LinearReaction { .. })
            && match self {
                DriftSpec::CustomTable(t) => t.bound.is_some(),
                _ => true,
            }
    }

    /// Coefficient of a linear-reaction regime, if any.
    pub fn linear_coeff(&self, regime: usize) -> Option<f64> {
        match self {
            DriftSpec::LinearReaction { coeffs } => coeffs.get(regime).copied(),
            _ => None,
        }
    }
}

impl RegimeDrift for DriftSpec {
    fn num_regimes(&self) -> usize {
        match self {
            DriftSpec::LinearReaction { coeffs } => coeffs.len(),
            DriftSpec::BoundedSaturating { gains, .. } => gains.len(),
            DriftSpec::CustomTable(t) => t.regimes,
        }
    }

    #[inline]
    fn eval(&self, x: &[f64], regime: usize, out: &mut [f64]) {
        match self {
            DriftSpec::LinearReaction { coeffs } => {
                let c = coeffs[regime];
                for (o, v) in out.iter_mut().zip(x) {
                    *o = c * v;
                }
            }
            DriftSpec::BoundedSaturating { gains, offsets } => {
                let a = gains[regime];
                let off = offsets.get(regime).map(Vec::as_slice).unwrap_or(&[]);
                for (k, (o, v)) in out.iter_mut().zip(x).enumerate() {
                    *o = a * sat(*v) + off.get(k).copied().unwrap_or(0.0);
                }
            }
            DriftSpec::CustomTable(t) => (t.func)(x, regime, out),
        }
    }

    fn lipschitz(&self, regime: usize) -> f64 {
        match self {
            DriftSpec::LinearReaction { coeffs } => coeffs[regime].abs(),
            DriftSpec::BoundedSaturating { gains, .. } => gains[regime].abs(),
            DriftSpec::CustomTable(t) => t.lipschitz[regime],
        }
    }

    fn bound(&self, dim: usize) -> Option<f64> {
        match self {
            DriftSpec::LinearReaction { .. } => None,
            DriftSpec::BoundedSaturating { gains, offsets } => (0..gains.len())
                .map(|i| {
                    let off = offsets.get(i).map(Vec::as_slice).unwrap_or(&[]);
                    (0..dim)
                        .map(|k| {
                            let v = gains[i].abs() + off.get(k).copied().unwrap_or(0.0).abs();
                            v * v
                        })
                        .sum::<f64>()
                        .sqrt()
                })
                .reduce(f64::max),
            DriftSpec::CustomTable(t) => t.bound,
        }
    }
}

/// Slow drift `b(x, y)` of the fast-slow system.
pub trait CoupledDrift: Sync {
    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// Declared uniform bound on `|b|_H`.
    fn bound(&self, dim: usize) -> Option<f64>;
    /// Declared Lipschitz constant in `(x, y)`.
    fn lipschitz(&self) -> f64;
}

/// `b(x, y)_k = gx sat(x_k) + gy sat(y_k) + o_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaturatingCoupling {
    pub x_gain: f64,
    pub y_gain: f64,
    #[serde(default)]
    pub offsets: Vec<f64>,
}

impl SaturatingCoupling {
    pub fn offset(&self, k: usize) -> f64 {
        self.offsets.get(k).copied().unwrap_or(0.0)
    }
}

impl CoupledDrift for SaturatingCoupling {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = self.x_gain * sat(x[k]) + self.y_gain * sat(y[k]) + self.offset(k);
        }
    }

    fn bound(&self, dim: usize) -> Option<f64> {
        Some(
            (0..dim)
                .map(|k| (self.x_gain.abs() + self.y_gain.abs() + self.offset(k).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        )
    }

    fn lipschitz(&self) -> f64 {
        self.x_gain.abs() + self.y_gain.abs()
    }
}

/// Fast drift `f(x, y)` with declared Gateaux-derivative bounds.
pub trait FastDrift: Sync {
    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    /// Bound on the derivative in the slow variable.
    fn k2(&self) -> f64;
    /// Bound on the derivative in the fast variable.
    fn k3(&self) -> f64;
}

/// `f(x, y)_k = ky y_k + kx sat(x_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearFeedback {
    pub y_gain: f64,
    pub x_gain: f64,
}

impl FastDrift for LinearFeedback {
    #[inline]
    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            out[k] = self.y_gain * y[k] + self.x_gain * sat(x[k]);
        }
    }

    fn k2(&self) -> f64 {
        self.x_gain.abs()
    }

    fn k3(&self) -> f64 {
        self.y_gain.abs()
    }
}

/// Largest sampled difference quotient `|b(x1,i) - b(x2,i)| / |x1 - x2|` for a regime.
pub fn sampled_lipschitz(
    drift: &dyn RegimeDrift,
    regime: usize,
    dim: usize,
    samples: usize,
    spread: f64,
    rng: &mut RngStream,
) -> f64 {
    let mut a = vec![0.0; dim];
    let mut b = vec![0.0; dim];
    let mut fa = vec![0.0; dim];
    let mut fb = vec![0.0; dim];
    let mut worst = 0.0f64;
    for _ in 0..samples {
        for k in 0..dim {
            a[k] = rng.uniform(-spread, spread);
            b[k] = a[k] + rng.uniform(-1.0, 1.0) * spread * 0.1;
        }
        drift.eval(&a, regime, &mut fa);
        drift.eval(&b, regime, &mut fb);
        let num: f64 = fa.iter().zip(&fb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let den: f64 = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if den > 0.0 {
            worst = worst.max(num / den);
        }
    }
    worst
}

/// Largest sampled `|b(x, i)|_H` over random states of the given spread.
pub fn sampled_bound(
    drift: &dyn RegimeDrift,
    dim: usize,
    samples: usize,
    spread: f64,
    rng: &mut RngStream,
) -> f64 {
    let mut x = vec![0.0; dim];
    let mut out = vec![0.0; dim];
    let mut worst = 0.0f64;
    for _ in 0..samples {
        for v in x.iter_mut() {
            *v = rng.uniform(-spread, spread);
        }
        for i in 0..drift.num_regimes() {
            drift.eval(&x, i, &mut out);
            worst = worst.max(out.iter().map(|v| v * v).sum::<f64>().sqrt());
        }
    }
    worst
}

/// Largest sampled directional quotient of `f` in each argument:
/// returns `(max |f(x+h,y)-f(x,y)|/|h|, max |f(x,y+h)-f(x,y)|/|h|)`.
pub fn sampled_gateaux(
    f: &dyn FastDrift,
    dim: usize,
    samples: usize,
    spread: f64,
    rng: &mut RngStream,
) -> (f64, f64) {
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    let mut xh = vec![0.0; dim];
    let mut yh = vec![0.0; dim];
    let mut f0 = vec![0.0; dim];
    let mut f1 = vec![0.0; dim];
    let (mut kx, mut ky) = (0.0f64, 0.0f64);
    let q = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    for _ in 0..samples {
        for k in 0..dim {
            x[k] = rng.uniform(-spread, spread);
            y[k] = rng.uniform(-spread, spread);
            let h = rng.uniform(-1e-3, 1e-3);
            xh[k] = x[k] + h;
            yh[k] = y[k] + h;
        }
        f.eval(&x, &y, &mut f0);
        f.eval(&xh, &y, &mut f1);
        kx = kx.max(q(&f1, &f0) / q(&xh, &x));
        f.eval(&x, &yh, &mut f1);
        ky = ky.max(q(&f1, &f0) / q(&yh, &y));
    }
    (kx, ky)
}
