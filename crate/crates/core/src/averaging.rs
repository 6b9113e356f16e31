//! Averaged drifts: the stationary-law average over regimes, the per-class
//! average for block generators, and time-average estimates of the frozen
//! fast equation's invariant-measure average.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::drift::{sat, CoupledDrift, FastDrift, LinearFeedback, RegimeDrift, SaturatingCoupling, StateDrift};
use crate::engine::{check_ergodicity, frozen_fast_steps, MildStepPlan, StableField};
use crate::ensemble::{map_indexed, Execution};
use crate::error::{param, Error, Result};
use crate::field::FieldState;
use crate::markov::ClassPartition;
use crate::rng::{Channel, RngStream, StreamKey};
use crate::stats::{batch_means, ols};

fn check_probability(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| *v < 0.0 || !v.is_finite()) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(param("averaging weights must be a probability vector"));
    }
    Ok(())
}

/// `b_bar(x) = sum_i nu_i b(x, i)`.
#[derive(Debug, Clone)]
pub struct NuAverage<D> {
    drift: D,
    nu: Vec<f64>,
}

impl<D: RegimeDrift> NuAverage<D> {
    pub fn new(drift: D, nu: Vec<f64>) -> Result<Self> {
        if nu.len() != drift.num_regimes() {
            return Err(Error::Dimension(format!(
                "{} weights for {} regimes",
                nu.len(),
                drift.num_regimes()
            )));
        }
        check_probability(&nu)?;
        Ok(Self { drift, nu })
    }

    pub fn weights(&self) -> &[f64] {
        &self.nu
    }

    /// `sum_i nu_i K_i`.
    pub fn lipschitz(&self) -> f64 {
        self.nu
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.drift.lipschitz(i))
            .sum()
    }
}

impl<D: RegimeDrift> StateDrift for NuAverage<D> {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (i, w) in self.nu.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            self.drift.eval(x, i, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    }
}

pub fn nu_average_drift(drift: &dyn RegimeDrift, nu: &[f64], x: &FieldState) -> Result<FieldState> {
    if nu.len() != drift.num_regimes() {
        return Err(Error::Dimension("nu length differs from regime count".into()));
    }
    let mut out = vec![0.0; x.len()];
    let mut buf = vec![0.0; x.len()];
    for (i, w) in nu.iter().enumerate() {
        drift.eval(&x.coeffs, i, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += w * b;
        }
    }
    Ok(FieldState::new(out))
}

/// `b_bar(y, k) = sum_j mu_kj b(y, s_kj)`, a drift indexed by class.
#[derive(Debug, Clone)]
pub struct ClassAverage<D> {
    drift: D,
    partition: ClassPartition,
    mu: Vec<Vec<f64>>,
}

impl<D: RegimeDrift> ClassAverage<D> {
    pub fn new(drift: D, partition: ClassPartition, mu: Vec<Vec<f64>>) -> Result<Self> {
        if mu.len() != partition.num_classes() {
            return Err(Error::Dimension("one stationary vector per class".into()));
        }
        for (m, c) in mu.iter().zip(partition.classes()) {
            if m.len() != c.len() {
                return Err(Error::Dimension("class stationary vector has wrong length".into()));
            }
            check_probability(m)?;
        }
        if drift.num_regimes() != partition.num_states() {
            return Err(Error::Dimension("drift regimes differ from partition states".into()));
        }
        Ok(Self { drift, partition, mu })
    }
}

impl<D: RegimeDrift> RegimeDrift for ClassAverage<D> {
    fn num_regimes(&self) -> usize {
        self.partition.num_classes()
    }

    fn eval(&self, x: &[f64], class: usize, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; out.len()];
        for (&s, &w) in self.partition.classes()[class].iter().zip(&self.mu[class]) {
            self.drift.eval(x, s, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    }

    fn lipschitz(&self, class: usize) -> f64 {
        self.partition.classes()[class]
            .iter()
            .zip(&self.mu[class])
            .map(|(&s, w)| w * self.drift.lipschitz(s))
            .sum()
    }

    fn bound(&self, dim: usize) -> Option<f64> {
        self.drift.bound(dim)
    }
}

pub fn class_average_drift(
    drift: &dyn RegimeDrift,
    partition: &ClassPartition,
    mu_blocks: &[Vec<f64>],
    y: &FieldState,
    class_idx: usize,
) -> Result<FieldState> {
    let class = partition
        .classes()
        .get(class_idx)
        .ok_or_else(|| Error::Dimension(format!("class {class_idx} out of range")))?;
    let mu = mu_blocks
        .get(class_idx)
        .ok_or_else(|| Error::Dimension("missing class stationary vector".into()))?;
    if mu.len() != class.len() {
        return Err(Error::Dimension("class stationary vector has wrong length".into()));
    }
    let mut out = vec![0.0; y.len()];
    let mut buf = vec![0.0; y.len()];
    for (&s, w) in class.iter().zip(mu) {
        drift.eval(&y.coeffs, s, &mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o += w * b;
        }
    }
    Ok(FieldState::new(out))
}

/// Settings of the frozen-equation time-average estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErgodicConfig {
    pub burn_in: f64,
    /// Length of the averaging window after burn-in.
    pub horizon: f64,
    pub dt: f64,
    pub replications: usize,
    pub batches: usize,
}

impl ErgodicConfig {
    /// Burn-in `3 / (mu_1 - K3)`, window `30 / (mu_1 - K3)`.
    pub fn defaults_for(f: &dyn FastDrift, fast: &StableField) -> Result<Self> {
        check_ergodicity(f, fast)?;
        let gap = fast.op.lambda1() - f.k3();
        Ok(Self {
            burn_in: 3.0 / gap,
            horizon: 30.0 / gap,
            dt: (0.05 / gap).min(0.05),
            replications: 8,
            batches: 10,
        })
    }
}

/// Mean and per-component standard error of an ergodic estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicEstimate {
    pub mean: FieldState,
    pub se: Vec<f64>,
}

/// Estimates `b_bar(z) = int b(z, u) pi^z(du)` by time-averaging `b(z, Y^z)`
/// over a post-burn-in window, averaged over independent replications.
/// Replication `r` uses substream `(seed, r)` on the fast channel.
pub fn estimate_ergodic_drift(
    z: &FieldState,
    y0: &FieldState,
    f: &dyn FastDrift,
    b: &dyn CoupledDrift,
    fast: &StableField,
    cfg: &ErgodicConfig,
    seed: u64,
    exec: Execution,
) -> Result<ErgodicEstimate> {
    check_ergodicity(f, fast)?;
    let k = fast.modes();
    if z.len() != k || y0.len() != k {
        return Err(Error::Dimension("frozen state and fast state must match the truncation".into()));
    }
    if !(cfg.horizon >= cfg.burn_in) {
        return Err(param(format!(
            "averaging horizon {} shorter than burn-in {}",
            cfg.horizon, cfg.burn_in
        )));
    }
    if cfg.replications == 0 || cfg.batches == 0 || !(cfg.dt > 0.0) {
        return Err(param("replications, batches and dt must be positive"));
    }
    let plan = MildStepPlan::new(fast, cfg.dt);
    let burn_steps = (cfg.burn_in / cfg.dt).ceil() as usize;
    let batch_steps = ((cfg.horizon / cfg.dt) / cfg.batches as f64).ceil().max(1.0) as usize;

    // Per replication: batch means of b(z, Y), shape batches x k.
    let per_rep: Vec<Vec<Vec<f64>>> = map_indexed(cfg.replications, exec, |r| {
        let mut rng = StreamKey::for_path(seed, r as u64, Channel::Fast).open();
        let mut y = y0.coeffs.clone();
        frozen_fast_steps(&z.coeffs, &mut y, f, fast, &plan, burn_steps, &mut rng, |_| {});
        let mut bbuf = vec![0.0; k];
        (0..cfg.batches)
            .map(|_| {
                let mut acc = vec![0.0; k];
                frozen_fast_steps(&z.coeffs, &mut y, f, fast, &plan, batch_steps, &mut rng, |yy| {
                    b.eval(&z.coeffs, yy, &mut bbuf);
                    for (a, v) in acc.iter_mut().zip(&bbuf) {
                        *a += v;
                    }
                });
                acc.iter().map(|a| a / batch_steps as f64).collect()
            })
            .collect()
    });

    let all: Vec<&Vec<f64>> = per_rep.iter().flatten().collect();
    let mut mean = vec![0.0; k];
    let mut se = vec![0.0; k];
    for m in 0..k {
        let col: Vec<f64> = all.iter().map(|row| row[m]).collect();
        let est = batch_means(&col, col.len());
        mean[m] = est.mean;
        se[m] = est.se;
    }
    Ok(ErgodicEstimate {
        mean: FieldState::new(mean),
        se,
    })
}

/// Deviation of `E b(z, Y^z(t; y))` from a reference average over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub times: Vec<f64>,
    pub deviation: Vec<f64>,
    /// Norm of the per-component standard errors of the ensemble mean.
    pub noise_floor: Vec<f64>,
    /// Exponential rate fitted on the points well above the noise floor.
    pub rate: Option<f64>,
}

pub fn ergodic_decay_probe(
    z: &FieldState,
    y: &FieldState,
    f: &dyn FastDrift,
    b: &dyn CoupledDrift,
    fast: &StableField,
    bbar: &FieldState,
    t_grid: &[f64],
    ensemble: usize,
    seed: u64,
    exec: Execution,
) -> Result<DecayProbe> {
    check_ergodicity(f, fast)?;
    let k = fast.modes();
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(param("decay grid must be nonnegative and increasing"));
    }
    if ensemble < 2 {
        return Err(param("ensemble needs at least two members"));
    }
    // Sub-steps of at most 0.01 between grid points.
    let mut grid = vec![0.0];
    let mut marks = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let last = *grid.last().unwrap();
        if t > last {
            let n = ((t - last) / 0.01).ceil() as usize;
            for i in 1..=n {
                grid.push(last + (t - last) * i as f64 / n as f64);
            }
        }
        marks.push(grid.len() - 1);
    }

    let samples: Vec<Vec<Vec<f64>>> = map_indexed(ensemble, exec, |i| {
        let mut rng = StreamKey::for_path(seed, i as u64, Channel::Fast).open();
        let mut yy = y.coeffs.clone();
        let mut plan: Option<MildStepPlan> = None;
        let mut out = Vec::with_capacity(marks.len());
        let mut bbuf = vec![0.0; k];
        let mut mark = 0;
        for (step, w) in std::iter::once(&[0.0, 0.0][..]).chain(grid.windows(2)).enumerate() {
            if step > 0 {
                let dt = w[1] - w[0];
                if plan.as_ref().map(|p| (p.dt - dt).abs() > 1e-15).unwrap_or(true) {
                    plan = Some(MildStepPlan::new(fast, dt));
                }
                frozen_fast_steps(&z.coeffs, &mut yy, f, fast, plan.as_ref().unwrap(), 1, &mut rng, |_| {});
            }
            while mark < marks.len() && marks[mark] == step {
                b.eval(&z.coeffs, &yy, &mut bbuf);
                out.push(bbuf.clone());
                mark += 1;
            }
        }
        out
    });

    let n = ensemble as f64;
    let mut deviation = Vec::with_capacity(t_grid.len());
    let mut noise_floor = Vec::with_capacity(t_grid.len());
    for j in 0..t_grid.len() {
        let mut dev2 = 0.0;
        let mut se2 = 0.0;
        for m in 0..k {
            let mean = samples.iter().map(|s| s[j][m]).sum::<f64>() / n;
            let var = samples.iter().map(|s| (s[j][m] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            dev2 += (mean - bbar.coeffs[m]).powi(2);
            se2 += var / n;
        }
        deviation.push(dev2.sqrt());
        noise_floor.push(se2.sqrt());
    }

    let (ts, logs): (Vec<f64>, Vec<f64>) = t_grid
        .iter()
        .zip(deviation.iter().zip(&noise_floor))
        .filter(|(_, (d, s))| **d > 5.0 * **s && **d > 0.0)
        .map(|(t, (d, _))| (*t, d.ln()))
        .unzip();
    let rate = if ts.len() >= 3 {
        ols(&ts, &logs).map(|fit| -fit.slope)
    } else {
        None
    };
    Ok(DecayProbe {
        times: t_grid.to_vec(),
        deviation,
        noise_floor,
        rate,
    })
}

/// Largest difference quotient `|d(a) - d(b)| / |a - b|` over the given pairs.
pub fn lipschitz_probe(drift: &dyn StateDrift, pairs: &[(FieldState, FieldState)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let den = a.distance(b);
        if den == 0.0 {
            return Err(param("identical pair in Lipschitz probe"));
        }
        let mut fa = vec![0.0; a.len()];
        let mut fb = vec![0.0; b.len()];
        drift.eval(&a.coeffs, &mut fa);
        drift.eval(&b.coeffs, &mut fb);
        let num = fa.iter().zip(&fb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    Ok(worst)
}

/// Random state pairs with coordinates uniform in `[-spread, spread]`.
pub fn random_pairs(dim: usize, count: usize, spread: f64, rng: &mut RngStream) -> Vec<(FieldState, FieldState)> {
    (0..count)
        .map(|_| {
            let a: Vec<f64> = (0..dim).map(|_| rng.uniform(-spread, spread)).collect();
            let b: Vec<f64> = (0..dim).map(|_| rng.uniform(-spread, spread)).collect();
            (FieldState::new(a), FieldState::new(b))
        })
        .collect()
}

/// A time-average estimate viewed as a drift (for probing and reporting).
pub struct ErgodicDrift<'a> {
    pub f: &'a dyn FastDrift,
    pub b: &'a dyn CoupledDrift,
    pub fast: &'a StableField,
    pub cfg: ErgodicConfig,
    pub seed: u64,
}

impl StateDrift for ErgodicDrift<'_> {
    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let z = FieldState::new(x.to_vec());
        let y0 = FieldState::zeros(x.len());
        match estimate_ergodic_drift(&z, &y0, self.f, self.b, self.fast, &self.cfg, self.seed, Execution::Sequential) {
            Ok(est) => out.copy_from_slice(&est.mean.coeffs),
            Err(_) => out.fill(f64::NAN),
        }
    }
}

/// `E tanh(m + sigma S)` for `S` standard symmetric `beta`-stable, from the
/// Fourier pairing `int_0^inf sin(w m) exp(-(sigma w)^beta) / sinh(pi w / 2) dw`.
pub fn stable_tanh_mean(m: f64, sigma: f64, beta: f64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    const UPPER: f64 = 28.0;
    const N: usize = 4096;
    let h = UPPER / N as f64;
    let g = |w: f64| {
        if w == 0.0 {
            2.0 * m / PI
        } else {
            (w * m).sin() * (-(sigma * w).powf(beta)).exp() / (0.5 * PI * w).sinh()
        }
    };
    let mut acc = g(0.0) + g(UPPER);
    for i in 1..N {
        acc += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

/// Exact averaged drift for the saturating coupling `b` with linear fast
/// feedback `f`: mode by mode the frozen fast law is `m_k(z) + sigma_k S` with
/// `m_k = gx_f sat(z_k) / r_k`, `r_k = mu_k - gy_f`, `sigma_k = q_k (beta r_k)^{-1/beta}`,
/// so `b_bar_k(z) = gx_b sat(z_k) + gy_b E tanh(m_k + sigma_k S) + o_k`.
/// The stable expectation is tabulated in `m` on `[-|gx_f|/r_k, |gx_f|/r_k]`.
#[derive(Debug, Clone)]
pub struct SaturatingAverage {
    b: SaturatingCoupling,
    shift: Vec<f64>,
    half_width: Vec<f64>,
    tables: Vec<Vec<f64>>,
}

const TABLE_POINTS: usize = 129;

impl SaturatingAverage {
    pub fn new(b: SaturatingCoupling, f: LinearFeedback, fast: &StableField) -> Result<Self> {
        check_ergodicity(&f, fast)?;
        let beta = fast.alpha;
        let mut shift = Vec::new();
        let mut half_width = Vec::new();
        let mut tables = Vec::new();
        for (mu, q) in fast.op.eigenvalues().iter().zip(fast.weights.weights()) {
            let r = mu - f.y_gain;
            let sigma = q * (beta * r).powf(-1.0 / beta);
            let hw = f.x_gain.abs() / r;
            let table = if hw == 0.0 || b.y_gain == 0.0 {
                vec![0.0; TABLE_POINTS]
            } else {
                // odd in m: tabulate the nonnegative half
                (0..TABLE_POINTS)
                    .map(|i| stable_tanh_mean(hw * i as f64 / (TABLE_POINTS - 1) as f64, sigma, beta))
                    .collect()
            };
            shift.push(f.x_gain / r);
            half_width.push(hw);
            tables.push(table);
        }
        Ok(Self {
            b,
            shift,
            half_width,
            tables,
        })
    }

    fn lookup(&self, k: usize, m: f64) -> f64 {
        let hw = self.half_width[k];
        if hw == 0.0 {
            return 0.0;
        }
        let pos = (m.abs() / hw).min(1.0) * (TABLE_POINTS - 1) as f64;
        let i = (pos.floor() as usize).min(TABLE_POINTS - 2);
        let frac = pos - i as f64;
        let t = &self.tables[k];
        let v = t[i] + frac * (t[i + 1] - t[i]);
        v.copysign(m)
    }
}

impl StateDrift for SaturatingAverage {
    fn eval(&self, z: &[f64], out: &mut [f64]) {
        for k in 0..out.len() {
            let s = sat(z[k]);
            let m = self.shift[k] * s;
            out[k] = self.b.x_gain * s + self.b.y_gain * self.lookup(k, m) + self.b.offset(k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;
    use crate::spectral::SpectralOperator;
    use crate::stable::{NoiseWeights, StandardStable};
    use approx::assert_abs_diff_eq;

    #[test]
    fn nu_average_examples() {
        let d = DriftSpec::linear(vec![1.0, 3.0]);
        let x = FieldState::new(vec![1.0, -2.0]);
        let point = nu_average_drift(&d, &[1.0, 0.0], &x).unwrap();
        assert_eq!(point.coeffs, vec![1.0, -2.0]);
        let eff = nu_average_drift(&d, &[1.0 / 3.0, 2.0 / 3.0], &x).unwrap();
        assert_abs_diff_eq!(eff.coeffs[0], 7.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eff.coeffs[1], -14.0 / 3.0, epsilon = 1e-14);
        let anti = DriftSpec::linear(vec![2.0, -2.0]);
        assert_eq!(nu_average_drift(&anti, &[0.5, 0.5], &x).unwrap().coeffs, vec![0.0, 0.0]);
        assert!(nu_average_drift(&d, &[1.0], &x).is_err());
        assert!(NuAverage::new(d, vec![0.7, 0.7]).is_err());
    }

    #[test]
    fn class_average_examples() {
        let d = DriftSpec::linear(vec![5.0, 2.0, 4.0]);
        let p = ClassPartition::new(vec![vec![0], vec![1, 2]]).unwrap();
        let mu = vec![vec![1.0], vec![0.25, 0.75]];
        let y = FieldState::new(vec![1.0]);
        assert_eq!(class_average_drift(&d, &p, &mu, &y, 0).unwrap().coeffs, vec![5.0]);
        assert_abs_diff_eq!(class_average_drift(&d, &p, &mu, &y, 1).unwrap().coeffs[0], 3.5, epsilon = 1e-14);
        let anti = DriftSpec::linear(vec![0.0, 1.5, -1.5]);
        let avg = ClassAverage::new(anti, p.clone(), vec![vec![1.0], vec![0.5, 0.5]]).unwrap();
        let mut out = [1.0];
        avg.eval(&[2.0], 1, &mut out);
        assert_eq!(out[0], 0.0);
        assert!(class_average_drift(&d, &p, &[vec![1.0], vec![1.0]], &y, 1).is_err());
    }

    #[test]
    fn lipschitz_probe_linear_is_exact() {
        let d = DriftSpec::linear(vec![0.3, 0.9]);
        let avg = NuAverage::new(d, vec![0.25, 0.75]).unwrap();
        let mut rng = RngStream::new(1, 0);
        let pairs = random_pairs(4, 200, 2.0, &mut rng);
        let q = lipschitz_probe(&avg, &pairs).unwrap();
        assert_abs_diff_eq!(q, 0.25 * 0.3 + 0.75 * 0.9, epsilon = 1e-12);
        assert!(q <= avg.lipschitz() + 1e-12);
        let same = vec![(FieldState::zeros(2), FieldState::zeros(2))];
        assert!(lipschitz_probe(&avg, &same).is_err());
    }

    #[test]
    fn lipschitz_probe_saturating() {
        let d = DriftSpec::saturating(vec![1.2, -0.4], vec![]).unwrap();
        let avg = NuAverage::new(d, vec![0.5, 0.5]).unwrap();
        let mut rng = RngStream::new(2, 0);
        let pairs = random_pairs(3, 500, 3.0, &mut rng);
        assert!(lipschitz_probe(&avg, &pairs).unwrap() <= 1.2);
    }

    #[test]
    fn tanh_mean_limits() {
        // sigma -> 0 recovers tanh(m)
        for m in [0.1, 0.5, 1.0, 2.0, -1.3] {
            assert_abs_diff_eq!(stable_tanh_mean(m, 0.0, 1.5), m.tanh(), epsilon = 1e-9);
        }
        assert_eq!(stable_tanh_mean(0.0, 1.0, 1.5), 0.0);
    }

    #[test]
    fn tanh_mean_matches_monte_carlo() {
        let s = StandardStable::new(1.5).unwrap();
        let mut rng = RngStream::new(3, 0);
        let n = 400_000;
        let (m, sigma) = (0.7, 0.6);
        let mc: f64 = (0..n).map(|_| (m + sigma * s.sample(&mut rng)).tanh()).sum::<f64>() / n as f64;
        assert!((stable_tanh_mean(m, sigma, 1.5) - mc).abs() < 0.004);
    }

    fn fast_field(k: usize) -> StableField {
        StableField::new(SpectralOperator::rod(k), NoiseWeights::power_law(1.0, 2.0, k).unwrap(), 1.5).unwrap()
    }

    #[test]
    fn ergodic_estimate_exact_when_b_ignores_fast_variable() {
        let fast = fast_field(3);
        let b = SaturatingCoupling { x_gain: 0.8, y_gain: 0.0, offsets: vec![0.3] };
        let f = LinearFeedback { y_gain: 0.5, x_gain: 1.0 };
        let cfg = ErgodicConfig::defaults_for(&f, &fast).unwrap();
        let z = FieldState::new(vec![0.5, -1.0, 2.0]);
        let est = estimate_ergodic_drift(&z, &FieldState::zeros(3), &f, &b, &fast, &cfg, 1, Execution::Sequential).unwrap();
        let mut expect = [0.0; 3];
        b.eval(&z.coeffs, &[0.0; 3], &mut expect);
        for m in 0..3 {
            assert_abs_diff_eq!(est.mean.coeffs[m], expect[m], epsilon = 1e-12);
            assert!(est.se[m] < 1e-12);
        }
    }

    #[test]
    fn ergodic_estimate_symmetric_law_is_centered() {
        let fast = fast_field(3);
        let b = SaturatingCoupling { x_gain: 0.0, y_gain: 1.0, offsets: vec![] };
        let f = LinearFeedback::default();
        let cfg = ErgodicConfig::defaults_for(&f, &fast).unwrap();
        let est = estimate_ergodic_drift(&FieldState::zeros(3), &FieldState::zeros(3), &f, &b, &fast, &cfg, 2, Execution::Sequential).unwrap();
        for m in 0..3 {
            assert!(est.mean.coeffs[m].abs() < 3.0 * est.se[m] + 1e-3, "mode {m}: {:?}", est);
        }
    }

    #[test]
    fn ergodic_estimate_matches_quadrature_and_ignores_start() {
        let fast = fast_field(3);
        let b = SaturatingCoupling { x_gain: 0.2, y_gain: 1.0, offsets: vec![] };
        let f = LinearFeedback { y_gain: 0.5, x_gain: 1.0 };
        let mut cfg = ErgodicConfig::defaults_for(&f, &fast).unwrap();
        cfg.replications = 16;
        let z = FieldState::new(vec![1.0, 0.5, -0.5]);
        let a = estimate_ergodic_drift(&z, &FieldState::zeros(3), &f, &b, &fast, &cfg, 3, Execution::Sequential).unwrap();
        let c = estimate_ergodic_drift(&z, &FieldState::new(vec![5.0, -5.0, 5.0]), &f, &b, &fast, &cfg, 4, Execution::Sequential)
            .unwrap();
        let exact = SaturatingAverage::new(b.clone(), f, &fast).unwrap();
        let mut e = [0.0; 3];
        exact.eval(&z.coeffs, &mut e);
        for m in 0..3 {
            let comb = (a.se[m].powi(2) + c.se[m].powi(2)).sqrt();
            assert!((a.mean.coeffs[m] - c.mean.coeffs[m]).abs() < 3.0 * comb + 1e-3);
            assert!((a.mean.coeffs[m] - e[m]).abs() < 4.0 * a.se[m] + 2e-3, "mode {m}: {} vs {}", a.mean.coeffs[m], e[m]);
        }
        let bound = b.bound(3).unwrap();
        assert!(a.mean.norm() <= bound);
    }

    #[test]
    fn ergodic_errors() {
        let fast = fast_field(2);
        let b = SaturatingCoupling { x_gain: 0.0, y_gain: 1.0, offsets: vec![] };
        let f = LinearFeedback::default();
        let mut cfg = ErgodicConfig::defaults_for(&f, &fast).unwrap();
        cfg.horizon = cfg.burn_in / 2.0;
        let z = FieldState::zeros(2);
        assert!(estimate_ergodic_drift(&z, &z, &f, &b, &fast, &cfg, 0, Execution::Sequential).is_err());
        let bad = LinearFeedback { y_gain: 2.0, x_gain: 0.0 };
        assert!(matches!(ErgodicConfig::defaults_for(&bad, &fast), Err(Error::Ergodicity(_))));
    }

    #[test]
    fn saturating_average_is_odd_and_bounded() {
        let fast = fast_field(4);
        let b = SaturatingCoupling { x_gain: 0.5, y_gain: 1.0, offsets: vec![] };
        let f = LinearFeedback { y_gain: 0.5, x_gain: 1.0 };
        let avg = SaturatingAverage::new(b.clone(), f, &fast).unwrap();
        let mut p = [0.0; 4];
        let mut n = [0.0; 4];
        avg.eval(&[0.3, 1.0, -2.0, 5.0], &mut p);
        avg.eval(&[-0.3, -1.0, 2.0, -5.0], &mut n);
        for k in 0..4 {
            assert_abs_diff_eq!(p[k], -n[k], epsilon = 1e-14);
        }
        assert!(FieldState::new(p.to_vec()).norm() <= b.bound(4).unwrap());
    }
}
