//! Exponential-Euler steppers for the mild form of every equation in the
//! model: switching, averaged, class-averaged, fast-slow and frozen fast.
//!
//! The linear part is applied exactly, the drift is frozen at the left end of
//! each step, and the mode-wise stochastic convolution is sampled exactly in
//! law from its stable scale. Regime changes (or fast substeps) inside a step
//! enter through exact piecewise weights of the drift integral, so the noise
//! draw of a step never depends on the chain. That keeps the slow noise of a
//! coupled pair identical draw for draw.

use serde::{Deserialize, Serialize};

use crate::drift::{CoupledDrift, FastDrift, RegimeDrift, StateDrift, Unswitched};
use crate::error::{param, Error, Result};
use crate::field::FieldState;
use crate::markov::ChainPath;
use crate::rng::RngStream;
use crate::spectral::SpectralOperator;
use crate::stable::{convolution_scale, NoiseWeights, StandardStable};

/// `(1 - e^{-lambda h}) / lambda`, with the `lambda -> 0` limit `h`.
#[inline]
pub fn drift_factor(lambda: f64, h: f64) -> f64 {
    if lambda == 0.0 {
        h
    } else {
        -(-lambda * h).exp_m1() / lambda
    }
}

/// A dissipative operator paired with the cylindrical stable noise driving it.
#[derive(Debug, Clone)]
pub struct StableField {
    pub op: SpectralOperator,
    pub weights: NoiseWeights,
    pub alpha: f64,
    sampler: StandardStable,
}

impl StableField {
    pub fn new(op: SpectralOperator, weights: NoiseWeights, alpha: f64) -> Result<Self> {
        if op.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} eigenvalues but {} noise weights",
                op.len(),
                weights.len()
            )));
        }
        Ok(Self {
            op,
            weights,
            alpha,
            sampler: StandardStable::new(alpha)?,
        })
    }

    /// Rod operator `k^2` with weights `k^-2`.
    pub fn rod(modes: usize, alpha: f64) -> Result<Self> {
        Self::new(
            SpectralOperator::rod(modes),
            NoiseWeights::power_law(1.0, 2.0, modes)?,
            alpha,
        )
    }

    pub fn modes(&self) -> usize {
        self.op.len()
    }

    pub fn sampler(&self) -> &StandardStable {
        &self.sampler
    }
}

/// Per-mode factors for one step of length `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MildStepPlan {
    pub dt: f64,
    pub lambdas: Vec<f64>,
    pub decay: Vec<f64>,
    pub drift: Vec<f64>,
    pub noise: Vec<f64>,
}

impl MildStepPlan {
    pub fn new(field: &StableField, dt: f64) -> Self {
        let lambdas = field.op.eigenvalues().to_vec();
        Self {
            dt,
            decay: lambdas.iter().map(|l| (-l * dt).exp()).collect(),
            drift: lambdas.iter().map(|l| drift_factor(*l, dt)).collect(),
            noise: lambdas
                .iter()
                .zip(field.weights.weights())
                .map(|(l, w)| convolution_scale(*w, *l, field.alpha, dt))
                .collect(),
            lambdas,
        }
    }

    /// Plan for a fast equation with rates `mu_k / eps` and noise scaled by
    /// `eps^{-1/beta}`. The drift factor already includes the `1/eps` of the
    /// fast drift, and the noise scale is `q_k ((1 - e^{-beta mu h/eps}) / (beta mu))^{1/beta}`,
    /// in which `eps` cancels except through `h / eps`.
    pub fn fast(field: &StableField, h: f64, eps: f64) -> Self {
        let beta = field.alpha;
        let lambdas = field.op.eigenvalues().to_vec();
        Self {
            dt: h,
            decay: lambdas.iter().map(|m| (-m * h / eps).exp()).collect(),
            drift: lambdas.iter().map(|m| -(-m * h / eps).exp_m1() / m).collect(),
            noise: lambdas
                .iter()
                .zip(field.weights.weights())
                .map(|(m, q)| q * (-(-beta * m * h / eps).exp_m1() / (beta * m)).powf(1.0 / beta))
                .collect(),
            lambdas,
        }
    }
}

/// One exponential-Euler step of a single mode: decay, frozen drift, and the
/// exact-law stochastic convolution (`noise` is a standard stable variate).
#[inline]
pub fn step_ou_mode(x: f64, mode: usize, drift: f64, plan: &MildStepPlan, noise: f64) -> f64 {
    plan.decay[mode] * x + drift * plan.drift[mode] + plan.noise[mode] * noise
}

/// Uniform grid `0, dt, ..., t_end` (last point snapped to `t_end`).
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && dt > 0.0) {
        return Err(param("t_end and dt must be positive"));
    }
    let n = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    g[n] = t_end;
    Ok(g)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Input("time grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Solution values on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<FieldState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainPath>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast: Option<Vec<FieldState>>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &FieldState {
        self.states.last().expect("record is never empty")
    }
}

struct PlanCache {
    plan: Option<MildStepPlan>,
}

impl PlanCache {
    fn get(&mut self, field: &StableField, dt: f64) -> &MildStepPlan {
        if self.plan.as_ref().map(|p| p.dt) != Some(dt) {
            self.plan = Some(MildStepPlan::new(field, dt));
        }
        self.plan.as_ref().unwrap()
    }
}

/// Mild solution of `dX = (AX + b(X, r(t))) dt + dL` with `r` read from an
/// exact jump skeleton.
pub fn solve_switching_spde(
    x0: &FieldState,
    drift: &dyn RegimeDrift,
    field: &StableField,
    chain: &ChainPath,
    grid: &[f64],
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    let k = field.modes();
    if x0.len() != k {
        return Err(Error::Dimension(format!("initial state has {} modes, expected {k}", x0.len())));
    }
    check_grid(grid)?;
    if *grid.last().unwrap() > chain.horizon * (1.0 + 1e-12) {
        return Err(Error::Input(format!(
            "grid end {} exceeds chain horizon {}",
            grid.last().unwrap(),
            chain.horizon
        )));
    }
    let regimes = drift.num_regimes();
    if chain.states.iter().any(|s| *s >= regimes) {
        return Err(Error::Dimension("chain visits a regime the drift does not define".into()));
    }

    let lambdas = field.op.eigenvalues();
    let mut cache = PlanCache { plan: None };
    let mut weights = vec![vec![0.0; k]; regimes];
    let mut touched = vec![false; regimes];
    let mut buf = vec![0.0; k];
    let mut drift_acc = vec![0.0; k];
    let mut x = x0.coeffs.clone();
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.clone());

    for w in grid.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let plan = cache.get(field, t1 - t0);

        touched.fill(false);
        chain.for_each_piece(t0, t1, |a, b, s| {
            let row = &mut weights[s];
            if !touched[s] {
                row.fill(0.0);
                touched[s] = true;
            }
            if a == t0 && b == t1 {
                row.copy_from_slice(&plan.drift);
            } else {
                for (m, l) in lambdas.iter().enumerate() {
                    row[m] += (-l * (t1 - b)).exp() * drift_factor(*l, b - a);
                }
            }
        });
        drift_acc.fill(0.0);
        for (s, row) in weights.iter().enumerate() {
            if !touched[s] {
                continue;
            }
            drift.eval(&x, s, &mut buf);
            for m in 0..k {
                drift_acc[m] += buf[m] * row[m];
            }
        }
        for m in 0..k {
            let xi = field.sampler.sample(rng);
            x[m] = plan.decay[m] * x[m] + drift_acc[m] + plan.noise[m] * xi;
        }
        states.push(FieldState::new(x.clone()));
    }

    Ok(TrajectoryRecord {
        times: grid.to_vec(),
        states,
        chain: Some(chain.clone()),
        fast: None,
    })
}

/// Mild solution of the averaged equation `dX = (AX + b_bar(X)) dt + dL`.
pub fn solve_averaged_spde(
    x0: &FieldState,
    averaged: &dyn StateDrift,
    field: &StableField,
    grid: &[f64],
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    check_grid(grid)?;
    let horizon = *grid.last().unwrap();
    let mut rec = solve_switching_spde(
        x0,
        &Unswitched(averaged),
        field,
        &ChainPath::constant(0, horizon),
        grid,
        rng,
    )?;
    rec.chain = None;
    Ok(rec)
}

/// Mild solution of the class-averaged equation driven by a class-valued
/// path (either simulated from the aggregated generator or the aggregate of
/// a fine path).
pub fn solve_switching_averaged_spde(
    x0: &FieldState,
    class_drift: &dyn RegimeDrift,
    field: &StableField,
    class_path: &ChainPath,
    grid: &[f64],
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    solve_switching_spde(x0, class_drift, field, class_path, grid, rng)
}

/// Fast-slow system parameters.
pub struct FastSlowSystem<'a> {
    pub slow: &'a StableField,
    pub fast: &'a StableField,
    pub b: &'a dyn CoupledDrift,
    pub f: &'a dyn FastDrift,
    pub eps: f64,
    /// Fast substep is `min(dt, c_sub * eps)`.
    pub c_sub: f64,
}

/// Rejects fast dynamics that violate `K3 < mu_1`.
pub fn check_ergodicity(f: &dyn FastDrift, fast: &StableField) -> Result<()> {
    let mu1 = fast.op.lambda1();
    if f.k3() >= mu1 {
        return Err(Error::Ergodicity(format!(
            "K3 = {} is not below mu_1 = {mu1}",
            f.k3()
        )));
    }
    Ok(())
}

fn substeps(dt: f64, eps: f64, c_sub: f64) -> usize {
    let h = dt.min(c_sub * eps);
    ((dt / h) - 1e-9).ceil().max(1.0) as usize
}

/// Joint mild solution of the slow equation driven by `L` and the fast
/// equation at rate `1/eps` driven by `eps^{-1/beta} Z`. Slow noise is drawn
/// from `slow_rng` (K variates per slow step) and fast noise from `fast_rng`.
pub fn solve_fast_slow(
    x0: &FieldState,
    y0: &FieldState,
    sys: &FastSlowSystem<'_>,
    grid: &[f64],
    slow_rng: &mut RngStream,
    fast_rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    let k = sys.slow.modes();
    if sys.fast.modes() != k || x0.len() != k || y0.len() != k {
        return Err(Error::Dimension("slow and fast components must share the truncation".into()));
    }
    if !(sys.eps > 0.0 && sys.c_sub > 0.0) {
        return Err(param("eps and c_sub must be positive"));
    }
    if sys.b.bound(k).is_none() {
        return Err(param("fast-slow slow drift must be bounded"));
    }
    check_ergodicity(sys.f, sys.fast)?;
    check_grid(grid)?;

    let lambdas = sys.slow.op.eigenvalues();
    let mut slow_cache = PlanCache { plan: None };
    let mut fast_plan: Option<MildStepPlan> = None;
    let mut sub_weights: Vec<Vec<f64>> = Vec::new();
    let mut x = x0.coeffs.clone();
    let mut y = y0.coeffs.clone();
    let mut bbuf = vec![0.0; k];
    let mut fbuf = vec![0.0; k];
    let mut drift_acc = vec![0.0; k];
    let mut states = vec![x0.clone()];
    let mut fast_states = vec![y0.clone()];

    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        let n_sub = substeps(dt, sys.eps, sys.c_sub);
        let h = dt / n_sub as f64;
        if fast_plan.as_ref().map(|p| p.dt) != Some(h) || sub_weights.len() != n_sub {
            fast_plan = Some(MildStepPlan::fast(sys.fast, h, sys.eps));
            // Weight of substep j in the slow drift integral over the step.
            sub_weights = (0..n_sub)
                .map(|j| {
                    let lag = dt - (j + 1) as f64 * h;
                    lambdas
                        .iter()
                        .map(|l| (-l * lag.max(0.0)).exp() * drift_factor(*l, h))
                        .collect()
                })
                .collect();
            if n_sub == 1 {
                sub_weights[0] = MildStepPlan::new(sys.slow, dt).drift;
            }
        }
        let fp = fast_plan.as_ref().unwrap();
        let plan = slow_cache.get(sys.slow, dt);

        drift_acc.fill(0.0);
        for wj in &sub_weights {
            sys.b.eval(&x, &y, &mut bbuf);
            for m in 0..k {
                drift_acc[m] += bbuf[m] * wj[m];
            }
            sys.f.eval(&x, &y, &mut fbuf);
            for m in 0..k {
                let zeta = sys.fast.sampler.sample(fast_rng);
                y[m] = fp.decay[m] * y[m] + fbuf[m] * fp.drift[m] + fp.noise[m] * zeta;
            }
        }
        for m in 0..k {
            let xi = sys.slow.sampler.sample(slow_rng);
            x[m] = plan.decay[m] * x[m] + drift_acc[m] + plan.noise[m] * xi;
        }
        states.push(FieldState::new(x.clone()));
        fast_states.push(FieldState::new(y.clone()));
    }

    Ok(TrajectoryRecord {
        times: grid.to_vec(),
        states,
        chain: None,
        fast: Some(fast_states),
    })
}

/// Fast equation with the slow variable frozen at `z` (no time-scale factor).
pub fn solve_frozen_fast(
    z: &FieldState,
    y0: &FieldState,
    f: &dyn FastDrift,
    fast: &StableField,
    grid: &[f64],
    rng: &mut RngStream,
) -> Result<TrajectoryRecord> {
    let k = fast.modes();
    if z.len() != k || y0.len() != k {
        return Err(Error::Dimension("frozen state and fast state must match the truncation".into()));
    }
    check_ergodicity(f, fast)?;
    check_grid(grid)?;
    let mut plan: Option<MildStepPlan> = None;
    let mut y = y0.coeffs.clone();
    let mut fbuf = vec![0.0; k];
    let mut states = Vec::with_capacity(grid.len());
    states.push(y0.clone());
    for w in grid.windows(2) {
        let dt = w[1] - w[0];
        if plan.as_ref().map(|p| p.dt) != Some(dt) {
            plan = Some(MildStepPlan::new(fast, dt));
        }
        let p = plan.as_ref().unwrap();
        f.eval(&z.coeffs, &y, &mut fbuf);
        for m in 0..k {
            let zeta = fast.sampler.sample(rng);
            y[m] = step_ou_mode(y[m], m, fbuf[m], p, zeta);
        }
        states.push(FieldState::new(y.clone()));
    }
    Ok(TrajectoryRecord {
        times: grid.to_vec(),
        states,
        chain: None,
        fast: None,
    })
}

/// Advances a frozen fast state in place over `steps` steps of a fixed plan,
/// calling `visit` after every step. Used by the time-average estimators.
pub(crate) fn frozen_fast_steps(
    z: &[f64],
    y: &mut [f64],
    f: &dyn FastDrift,
    fast: &StableField,
    plan: &MildStepPlan,
    steps: usize,
    rng: &mut RngStream,
    mut visit: impl FnMut(&[f64]),
) {
    let mut fbuf = vec![0.0; y.len()];
    for _ in 0..steps {
        f.eval(z, y, &mut fbuf);
        for m in 0..y.len() {
            let zeta = fast.sampler.sample(rng);
            y[m] = step_ou_mode(y[m], m, fbuf[m], plan, zeta);
        }
        visit(y);
    }
}
