//! Diagonal self-adjoint dissipative operators in the shared eigenbasis.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::field::FieldState;
use crate::stable::{NoiseWeights, PowerLaw};

/// `-A` through its eigenvalues `0 < l_1 < l_2 < ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralOperator {
    eigenvalues: Vec<f64>,
    rule: Option<PowerLaw>,
}

impl SpectralOperator {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(param("operator needs at least one eigenvalue"));
        }
        if !(eigenvalues[0] > 0.0) {
            return Err(param("leading eigenvalue must be positive"));
        }
        if eigenvalues.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(param("eigenvalues must be strictly increasing"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(param("eigenvalues must be finite"));
        }
        Ok(Self {
            eigenvalues,
            rule: None,
        })
    }

    /// `l_k = coeff * k^exponent`.
    pub fn power_law(coeff: f64, exponent: f64, len: usize) -> Result<Self> {
        let rule = PowerLaw::new(coeff, exponent);
        let mut op = Self::new(rule.sequence(len))?;
        op.rule = Some(rule);
        Ok(op)
    }

    /// Dirichlet Laplacian on the rod `(0, pi)`: `l_k = k^2`.
    pub fn rod(len: usize) -> Self {
        Self::power_law(1.0, 2.0, len).expect("rod spectrum is valid")
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rule(&self) -> Option<PowerLaw> {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda1(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn check_len(&self, x: &FieldState) -> Result<()> {
        if x.len() != self.len() {
            return Err(Error::Dimension(format!(
                "state has {} modes, operator {}",
                x.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// `e^{tA} x`, mode-wise `exp(-l_k t) x_k`.
    pub fn semigroup_apply(&self, t: f64, x: &FieldState) -> Result<FieldState> {
        if t < 0.0 {
            return Err(param(format!("semigroup time {t} is negative")));
        }
        self.check_len(x)?;
        Ok(FieldState::new(
            self.eigenvalues
                .iter()
                .zip(&x.coeffs)
                .map(|(l, c)| (-l * t).exp() * c)
                .collect(),
        ))
    }

    /// `(-A)^theta x`, mode-wise `l_k^theta x_k`.
    pub fn fractional_power_apply(&self, theta: f64, x: &FieldState) -> Result<FieldState> {
        self.check_len(x)?;
        Ok(FieldState::new(
            self.eigenvalues
                .iter()
                .zip(&x.coeffs)
                .map(|(l, c)| l.powf(theta) * c)
                .collect(),
        ))
    }

    /// Checks `max_k l_k^delta e^{-l_k t} <= (delta/e)^delta t^{-delta}` on the grid.
    /// The bound is attained when `l_k = delta / t`, so slack down to
    /// `-SLACK_TOL` counts as holding.
    pub fn smoothing_bound_check(&self, delta: f64, t_grid: &[f64]) -> bool {
        self.smoothing_slack(delta, t_grid)
            .iter()
            .all(|s| *s >= -SLACK_TOL)
    }

    /// Bound minus left side per grid point; nonnegative when the bound holds.
    pub fn smoothing_slack(&self, delta: f64, t_grid: &[f64]) -> Vec<f64> {
        t_grid
            .iter()
            .map(|&t| {
                let lhs = self
                    .eigenvalues
                    .iter()
                    .map(|l| l.powf(delta) * (-l * t).exp())
                    .fold(0.0, f64::max);
                let bound = (-delta).exp() * delta.powf(delta) * t.powf(-delta);
                bound - lhs
            })
            .collect()
    }

    /// Checks `max_k l_k^{-delta} (1 - e^{-l_k t}) <= t^delta` on the grid.
    pub fn hoelder_bound_check(&self, delta: f64, t_grid: &[f64]) -> bool {
        self.hoelder_slack(delta, t_grid).iter().all(|s| *s >= -SLACK_TOL)
    }

    pub fn hoelder_slack(&self, delta: f64, t_grid: &[f64]) -> Vec<f64> {
        t_grid
            .iter()
            .map(|&t| {
                let lhs = self
                    .eigenvalues
                    .iter()
                    .map(|l| -(-l * t).exp_m1() / l.powf(delta))
                    .fold(0.0, f64::max);
                t.powf(delta) - lhs
            })
            .collect()
    }
}

/// Rounding allowance on the sign of a bound's slack.
pub const SLACK_TOL: f64 = 1e-12;

/// Summability of the noise/operator pairing for a slow (and optional fast)
/// component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub delta_partial: f64,
    pub delta_tail_bound: Option<f64>,
    pub kappa1_partial: f64,
    pub kappa2_partial: Option<f64>,
    pub kappa2_tail_bound: Option<f64>,
    pub theta: f64,
    pub alpha_theta: f64,
    pub pass: bool,
    pub reasons: Vec<String>,
}

/// Integral-test bound on `sum_{k>n} c k^{-s}` for `s > 1`; `None` if divergent.
fn power_tail(coeff: f64, decay: f64, n: usize) -> Option<f64> {
    if decay <= 1.0 {
        return None;
    }
    Some(coeff * (n as f64).powf(1.0 - decay) / (decay - 1.0))
}

pub struct FastPair<'a> {
    pub op: &'a SpectralOperator,
    pub weights: &'a NoiseWeights,
    pub beta: f64,
}

/// Evaluates the summability conditions on the noise weights.
///
/// `delta = sum w_k^alpha / l_k^{1 - alpha theta}` (which is also `kappa_1`) and,
/// for a fast pair, `kappa_2 = sum q_k^beta / m_k`. Tail bounds need power-law
/// rules on both the operator and the weights; without them `tail_cap`, when
/// given, is used as the admissible ceiling for the partial sums.
pub fn admissibility(
    op_a: &SpectralOperator,
    w_l: &NoiseWeights,
    fast: Option<FastPair<'_>>,
    alpha: f64,
    theta: f64,
    want_tail: bool,
    tail_cap: Option<f64>,
) -> Result<AdmissibilityReport> {
    if w_l.len() != op_a.len() {
        return Err(Error::Dimension(format!(
            "{} slow weights for {} modes",
            w_l.len(),
            op_a.len()
        )));
    }
    let at = alpha * theta;
    let mut reasons = Vec::new();
    if !(theta > 0.0 && theta < 1.0 && at > 0.0 && at < 1.0) {
        reasons.push(format!("A3 violated: alpha*theta = {at:.4} not in (0,1)"));
    }

    let delta_partial: f64 = w_l
        .weights()
        .iter()
        .zip(op_a.eigenvalues())
        .map(|(w, l)| w.powf(alpha) / l.powf(1.0 - at))
        .sum();

    let n = op_a.len();
    let rules_tail = |op: &SpectralOperator, w: &NoiseWeights, pw: f64, lam_pow: f64| {
        match (op.rule(), w.rule()) {
            (Some(or), Some(wr)) => {
                // w_k^pw / l_k^lam_pow = wc^pw / oc^lam_pow * k^{pw we - lam_pow oe}
                let coeff = wr.coeff.powf(pw) / or.coeff.powf(lam_pow);
                let decay = -(pw * wr.exponent - lam_pow * or.exponent);
                Ok(power_tail(coeff, decay, n))
            }
            _ => Err(Error::Unsupported(
                "tail bounds need power-law operator and noise rules".into(),
            )),
        }
    };

    let delta_tail_bound = if want_tail {
        let t = rules_tail(op_a, w_l, alpha, 1.0 - at)?;
        if t.is_none() {
            reasons.push("delta series diverges (integral test)".into());
        }
        t
    } else {
        None
    };

    let (kappa2_partial, kappa2_tail_bound) = match &fast {
        Some(fp) => {
            if fp.weights.len() != fp.op.len() {
                return Err(Error::Dimension("fast weights and operator differ in length".into()));
            }
            let part: f64 = fp
                .weights
                .weights()
                .iter()
                .zip(fp.op.eigenvalues())
                .map(|(q, m)| q.powf(fp.beta) / m)
                .sum();
            let tail = if want_tail {
                let t = rules_tail(fp.op, fp.weights, fp.beta, 1.0)?;
                if t.is_none() {
                    reasons.push("kappa2 series diverges (integral test)".into());
                }
                t
            } else {
                None
            };
            (Some(part), tail)
        }
        None => (None, None),
    };

    if !want_tail {
        if let Some(cap) = tail_cap {
            if delta_partial > cap {
                reasons.push(format!("delta partial sum {delta_partial:.4} exceeds cap {cap}"));
            }
            if let Some(k2) = kappa2_partial {
                if k2 > cap {
                    reasons.push(format!("kappa2 partial sum {k2:.4} exceeds cap {cap}"));
                }
            }
        }
    }
    if !delta_partial.is_finite() {
        reasons.push("delta partial sum not finite".into());
    }

    Ok(AdmissibilityReport {
        delta_partial,
        delta_tail_bound,
        kappa1_partial: delta_partial,
        kappa2_partial,
        kappa2_tail_bound,
        theta,
        alpha_theta: at,
        pass: reasons.is_empty(),
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn semigroup_examples() {
        let op = SpectralOperator::new(vec![1.0, 4.0, 9.0]).unwrap();
        let x = FieldState::new(vec![1.0, 1.0, 1.0]);
        assert_eq!(op.semigroup_apply(0.0, &x).unwrap(), x);
        let y = op.semigroup_apply(1.0, &x).unwrap();
        for (c, l) in y.coeffs.iter().zip([1.0f64, 4.0, 9.0]) {
            assert_abs_diff_eq!(*c, (-l).exp(), epsilon = 1e-15);
        }
        assert!(op.semigroup_apply(-1.0, &x).is_err());
    }

    #[test]
    fn operator_validation() {
        assert!(SpectralOperator::new(vec![1.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![0.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![2.0, 1.0]).is_err());
        assert!(SpectralOperator::new(vec![]).is_err());
    }

    #[test]
    fn fractional_power_examples() {
        let op = SpectralOperator::new(vec![1.0, 4.0]).unwrap();
        let x = FieldState::new(vec![1.0, 1.0]);
        assert_eq!(op.fractional_power_apply(0.0, &x).unwrap(), x);
        assert_eq!(op.fractional_power_apply(1.0, &x).unwrap().coeffs, vec![1.0, 4.0]);
    }

    #[test]
    fn smoothing_bound_examples() {
        let op = SpectralOperator::rod(50);
        // sup over lambda of lambda^0.5 e^{-lambda} is (0.5/e)^0.5 at lambda = 0.5
        let bound = (0.5f64 / std::f64::consts::E).sqrt();
        assert_abs_diff_eq!(bound, 0.42888194248035333, epsilon = 1e-15);
        let lhs = op
            .eigenvalues()
            .iter()
            .map(|l| l.sqrt() * (-l).exp())
            .fold(0.0, f64::max);
        assert!(lhs <= bound);
        assert!(op.smoothing_bound_check(0.5, &[1.0, 100.0, 1e-3]));
        assert!(op.smoothing_bound_check(1e-9, &[0.5, 2.0]));
    }

    #[test]
    fn hoelder_bound_examples() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(op.hoelder_slack(0.5, &[1.0])[0], 1.0 - (1.0 - (-1.0f64).exp()), epsilon = 1e-15);
        assert!(op.hoelder_bound_check(0.5, &[1.0]));
        assert_eq!(op.hoelder_slack(0.5, &[0.0])[0], 0.0);
        let big = SpectralOperator::new(vec![1e8]).unwrap();
        assert!(big.hoelder_slack(0.5, &[1.0])[0] > 0.999);
    }

    fn zeta(s: f64) -> f64 {
        // Euler-Maclaurin: partial sum to N plus tail corrections.
        let n = 1000usize;
        let mut acc: f64 = (1..n).map(|k| (k as f64).powf(-s)).sum();
        let nf = n as f64;
        acc += nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0;
        acc
    }

    #[test]
    fn rod_admissibility_converges_to_zeta() {
        // w_k = k^-2, l_k = k^2, alpha = 1.5, theta = 0.5: terms k^{-3} / k^{0.5} = k^{-3.5}
        let target = zeta(3.5);
        assert_abs_diff_eq!(target, 1.1267338673170566, epsilon = 1e-9);
        for n in [5, 20, 100] {
            let op = SpectralOperator::rod(n);
            let w = NoiseWeights::power_law(1.0, 2.0, n).unwrap();
            let r = admissibility(&op, &w, None, 1.5, 0.5, true, None).unwrap();
            assert!(r.pass);
            let tail = r.delta_tail_bound.unwrap();
            assert!(r.delta_partial <= target && target <= r.delta_partial + tail);
        }
    }

    #[test]
    fn admissibility_fails_for_large_alpha_theta() {
        let op = SpectralOperator::rod(10);
        let w = NoiseWeights::power_law(1.0, 2.0, 10).unwrap();
        let r = admissibility(&op, &w, None, 1.5, 0.8, true, None).unwrap();
        assert!(!r.pass);
        assert!(r.reasons[0].starts_with("A3 violated"));
    }

    #[test]
    fn single_mode_delta_is_one() {
        let op = SpectralOperator::new(vec![1.0]).unwrap();
        let w = NoiseWeights::new(vec![1.0]).unwrap();
        let r = admissibility(&op, &w, None, 1.5, 0.5, false, None).unwrap();
        assert_eq!(r.delta_partial, 1.0);
        assert!(r.pass);
    }

    #[test]
    fn tail_without_rules_is_unsupported() {
        let op = SpectralOperator::new(vec![1.0, 2.0]).unwrap();
        let w = NoiseWeights::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            admissibility(&op, &w, None, 1.5, 0.5, true, None),
            Err(Error::Unsupported(_))
        ));
        let capped = admissibility(&op, &w, None, 1.5, 0.5, false, Some(1.0)).unwrap();
        assert!(!capped.pass);
    }

    #[test]
    fn kappa2_for_fast_pair() {
        let op = SpectralOperator::rod(3);
        let w = NoiseWeights::power_law(1.0, 2.0, 3).unwrap();
        let r = admissibility(
            &op,
            &w,
            Some(FastPair { op: &op, weights: &w, beta: 1.5 }),
            1.5,
            0.5,
            true,
            None,
        )
        .unwrap();
        let expect: f64 = (1..=3).map(|k| (k as f64).powf(-3.0) / (k * k) as f64).sum();
        assert_abs_diff_eq!(r.kappa2_partial.unwrap(), expect, epsilon = 1e-14);
        assert!(r.kappa2_tail_bound.unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn semigroup_law_and_contraction(
            s in 0.0f64..2.0, t in 0.0f64..2.0,
            xs in proptest::collection::vec(-10.0f64..10.0, 6)
        ) {
            let op = SpectralOperator::rod(6);
            let x = FieldState::new(xs);
            let a = op.semigroup_apply(s + t, &x).unwrap();
            let b = op.semigroup_apply(s, &op.semigroup_apply(t, &x).unwrap()).unwrap();
            for (p, q) in a.coeffs.iter().zip(&b.coeffs) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
            prop_assert!(a.norm() <= (-(s + t)).exp() * x.norm() + 1e-12);
        }

        #[test]
        fn fractional_power_cancels(
            theta in -2.0f64..2.0,
            xs in proptest::collection::vec(-10.0f64..10.0, 5)
        ) {
            let op = SpectralOperator::rod(5);
            let x = FieldState::new(xs);
            let y = op.fractional_power_apply(theta, &op.fractional_power_apply(-theta, &x).unwrap()).unwrap();
            for (p, q) in x.coeffs.iter().zip(&y.coeffs) {
                prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
        }

        #[test]
        fn bound_checks_always_hold(delta in 0.01f64..0.99, t in 1e-4f64..50.0) {
            let op = SpectralOperator::rod(40);
            prop_assert!(op.smoothing_bound_check(delta, &[t]));
            prop_assert!(op.hoelder_bound_check(delta, &[t]));
        }

        #[test]
        fn delta_partial_monotone_in_truncation(n in 1usize..60) {
            let a = admissibility(&SpectralOperator::rod(n), &NoiseWeights::power_law(1.0, 2.0, n).unwrap(), None, 1.5, 0.5, false, None).unwrap();
            let b = admissibility(&SpectralOperator::rod(n + 1), &NoiseWeights::power_law(1.0, 2.0, n + 1).unwrap(), None, 1.5, 0.5, false, None).unwrap();
            prop_assert!(b.delta_partial >= a.delta_partial);
        }
    }
}
