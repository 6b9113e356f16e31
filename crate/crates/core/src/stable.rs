//! Symmetric alpha-stable variates and cylindrical stable increments.
//!
//! Only the symmetric standard family is generated: skewness and location are
//! fixed at zero and the stability index is restricted to `(1, 2]`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::field::FieldState;
use crate::rng::RngStream;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(param(format!("stability index {alpha} outside (1, 2]")))
    }
}

/// Parameters of a symmetric stable law `S_alpha(scale, 0, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    alpha: f64,
    scale: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(param(format!("stable scale {scale} must be positive")));
        }
        Ok(Self { alpha, scale })
    }

    pub fn standard(alpha: f64) -> Result<Self> {
        Self::new(alpha, 1.0)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Characteristic function `exp(-scale^alpha |u|^alpha)`; the imaginary
    /// part vanishes for the symmetric family.
    pub fn cf(&self, u: f64) -> (f64, f64) {
        (stable_cf(self.alpha, self.scale, u), 0.0)
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.scale * cms_symmetric(self.alpha, rng)
    }
}

/// Real part of the symmetric stable characteristic function.
pub fn stable_cf(alpha: f64, scale: f64, u: f64) -> f64 {
    (-(scale * u.abs()).powf(alpha)).exp()
}

/// Sampler for the standard symmetric stable law, `E exp(iuX) = exp(-|u|^alpha)`.
#[derive(Debug, Clone, Copy)]
pub struct StandardStable {
    alpha: f64,
    inv_alpha: f64,
    tail_exp: f64,
}

impl StandardStable {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            inv_alpha: 1.0 / alpha,
            tail_exp: (1.0 - alpha) / alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Chambers-Mallows-Stuck transform of `V ~ U(-pi/2, pi/2)`, `W ~ Exp(1)`.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let v = rng.uniform(-FRAC_PI_2, FRAC_PI_2);
        let w = rng.exp1();
        let cos_v = v.cos();
        (self.alpha * v).sin() / cos_v.powf(self.inv_alpha)
            * (((1.0 - self.alpha) * v).cos() / w).powf(self.tail_exp)
    }

    pub fn fill(&self, rng: &mut RngStream, out: &mut [f64]) {
        for x in out {
            *x = self.sample(rng);
        }
    }
}

fn cms_symmetric(alpha: f64, rng: &mut RngStream) -> f64 {
    StandardStable {
        alpha,
        inv_alpha: 1.0 / alpha,
        tail_exp: (1.0 - alpha) / alpha,
    }
    .sample(rng)
}

/// One standard symmetric stable variate.
pub fn sample_standard_stable(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(StandardStable::new(alpha)?.sample(rng))
}

/// `coeff * k^exponent` for `k = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub coeff: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn new(coeff: f64, exponent: f64) -> Self {
        Self { coeff, exponent }
    }

    pub fn at(&self, k: usize) -> f64 {
        self.coeff * (k as f64).powf(self.exponent)
    }

    pub fn sequence(&self, len: usize) -> Vec<f64> {
        (1..=len).map(|k| self.at(k)).collect()
    }
}

/// Per-mode weights of a cylindrical stable process `sum_k w_k L_k(t) e_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseWeights {
    weights: Vec<f64>,
    rule: Option<PowerLaw>,
}

impl NoiseWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((k, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(**w > 0.0 && w.is_finite()))
        {
            return Err(param(format!("noise weight {} = {w} must be positive", k + 1)));
        }
        Ok(Self {
            weights,
            rule: None,
        })
    }

    /// `w_k = coeff * k^(-decay)`, truncated at `len` modes.
    pub fn power_law(coeff: f64, decay: f64, len: usize) -> Result<Self> {
        let rule = PowerLaw::new(coeff, -decay);
        let mut w = Self::new(rule.sequence(len))?;
        w.rule = Some(rule);
        Ok(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rule(&self) -> Option<PowerLaw> {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Exact increment `L(t+h) - L(t)` projected on the retained modes:
/// `w_k h^(1/alpha) xi_k` with `xi_k` i.i.d. standard symmetric stable.
pub fn cylindrical_increment(
    weights: &NoiseWeights,
    alpha: f64,
    h: f64,
    rng: &mut RngStream,
) -> Result<FieldState> {
    let sampler = StandardStable::new(alpha)?;
    if h < 0.0 {
        return Err(param("increment length must be nonnegative"));
    }
    let scale = h.powf(1.0 / alpha);
    Ok(FieldState::new(
        weights
            .weights()
            .iter()
            .map(|w| w * scale * sampler.sample(rng))
            .collect(),
    ))
}

/// Stable scale of the mode-wise stochastic convolution
/// `int_0^h exp(-lambda (h - s)) dL_k(s)` with `L_k` of unit scale times `weight`:
/// `weight * ((1 - exp(-alpha lambda h)) / (alpha lambda))^(1/alpha)`.
pub fn convolution_scale(weight: f64, lambda: f64, alpha: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let al = alpha * lambda;
    weight * (-(-al * h).exp_m1() / al).powf(1.0 / alpha)
}
