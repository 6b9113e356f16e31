//! Two-time-scale continuous-time Markov chains with generator
//! `Q_eps = Q_fast / eps + Q_slow`, their stationary laws, class aggregation,
//! and exact event-driven simulation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const ROW_TOL: f64 = 1e-12;

/// A CTMC generator: nonnegative off-diagonal rates and zero row sums.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    rates: DMatrix<f64>,
}

impl GeneratorMatrix {
    pub fn new(rates: DMatrix<f64>) -> Result<Self> {
        if rates.nrows() != rates.ncols() || rates.nrows() == 0 {
            return Err(Error::Generator(format!(
                "generator must be square and nonempty, got {}x{}",
                rates.nrows(),
                rates.ncols()
            )));
        }
        for i in 0..rates.nrows() {
            let mut sum = 0.0;
            let mut scale = 0.0f64;
            for j in 0..rates.ncols() {
                let q = rates[(i, j)];
                if !q.is_finite() {
                    return Err(Error::Generator(format!("non-finite rate at ({i},{j})")));
                }
                if i != j && q < 0.0 {
                    return Err(Error::Generator(format!("negative rate {q} at ({i},{j})")));
                }
                sum += q;
                scale = scale.max(q.abs());
            }
            if sum.abs() > ROW_TOL * scale.max(1.0) {
                return Err(Error::Generator(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rates })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Generator("generator rows must all have length n".into()));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            rates: DMatrix::zeros(n, n),
        }
    }

    /// Block-diagonal generator `diag(Q_1, ..., Q_l)`.
    pub fn block_diagonal(blocks: &[GeneratorMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            let d = b.dim();
            m.view_mut((off, off), (d, d)).copy_from(&b.rates);
            off += d;
        }
        Self { rates: m }
    }

    pub fn dim(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.rates.row(i).iter().copied().collect())
            .collect()
    }

    /// `self / eps + slow`.
    pub fn two_scale(&self, slow: &GeneratorMatrix, eps: f64) -> Result<GeneratorMatrix> {
        if self.dim() != slow.dim() {
            return Err(Error::Dimension("fast and slow generators differ in size".into()));
        }
        Ok(Self {
            rates: &self.rates / eps + &slow.rates,
        })
    }

    /// Extracts the principal sub-generator on `states`; diagonal entries are
    /// recomputed so the block is itself a generator.
    pub fn sub_block(&self, states: &[usize]) -> Result<GeneratorMatrix> {
        let d = states.len();
        let mut m = DMatrix::from_fn(d, d, |i, j| self.rates[(states[i], states[j])]);
        for i in 0..d {
            let off: f64 = (0..d).filter(|j| *j != i).map(|j| m[(i, j)]).sum();
            m[(i, i)] = -off;
        }
        Self::new(m)
    }
}

/// Ordered partition of the state space into classes `S_1, ..., S_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPartition {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl ClassPartition {
    pub fn new(classes: Vec<Vec<usize>>) -> Result<Self> {
        let n: usize = classes.iter().map(|c| c.len()).sum();
        if classes.is_empty() || classes.iter().any(|c| c.is_empty()) {
            return Err(Error::Parameter("classes must be nonempty".into()));
        }
        let mut class_of = vec![usize::MAX; n];
        for (k, c) in classes.iter().enumerate() {
            for &s in c {
                if s >= n || class_of[s] != usize::MAX {
                    return Err(Error::Parameter(format!(
                        "state {s} out of range or listed twice in partition"
                    )));
                }
                class_of[s] = k;
            }
        }
        Ok(Self { classes, class_of })
    }

    /// Consecutive classes of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        let mut next = 0;
        let classes = sizes
            .iter()
            .map(|&s| {
                let c: Vec<usize> = (next..next + s).collect();
                next += s;
                c
            })
            .collect();
        Self::new(classes)
    }

    pub fn singletons(n: usize) -> Self {
        Self::new((0..n).map(|i| vec![i]).collect()).expect("singleton partition")
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_states(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_of(&self, state: usize) -> usize {
        self.class_of[state]
    }
}

/// Piecewise-constant right-continuous path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    /// Segment start times; `times[0] == 0`.
    pub times: Vec<f64>,
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl ChainPath {
    pub fn constant(state: usize, horizon: f64) -> Self {
        Self {
            times: vec![0.0],
            states: vec![state],
            horizon,
        }
    }

    pub fn initial_state(&self) -> usize {
        self.states[0]
    }

    pub fn num_jumps(&self) -> usize {
        self.states.len() - 1
    }

    fn segment_index(&self, t: f64) -> usize {
        self.times.partition_point(|s| *s <= t).saturating_sub(1)
    }

    pub fn state_at(&self, t: f64) -> usize {
        self.states[self.segment_index(t)]
    }

    /// Calls `f(start, end, state)` for each constant piece overlapping `[a, b]`.
    pub fn for_each_piece(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64, usize)) {
        let mut i = self.segment_index(a);
        let mut start = a;
        loop {
            let end = self.times.get(i + 1).copied().unwrap_or(f64::INFINITY).min(b);
            if end > start {
                f(start, end, self.states[i]);
            }
            if end >= b {
                break;
            }
            start = end;
            i += 1;
        }
    }
}

/// Solves `nu Q = 0`, `sum nu = 1` for a weakly irreducible generator.
pub fn stationary_distribution(q: &GeneratorMatrix) -> Result<Vec<f64>> {
    let n = q.dim();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let qt = q.matrix().transpose();
    let scale = q.matrix().amax().max(1.0);
    let sv = qt.clone().svd(false, false).singular_values;
    let null_dim = sv.iter().filter(|s| **s <= 1e-10 * scale).count();
    if null_dim != 1 {
        return Err(Error::Irreducibility(format!(
            "null space of dimension {null_dim} (expected 1)"
        )));
    }
    let mut sys = qt;
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let nu = sys
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Irreducibility("augmented system is singular".into()))?;
    if nu.iter().any(|v| *v < -1e-10) {
        return Err(Error::Irreducibility("stationary solution has negative mass".into()));
    }
    let mut nu: Vec<f64> = nu.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|v| *v /= s);
    Ok(nu)
}

/// `max_j |(nu Q)_j|`.
pub fn stationary_residual(q: &GeneratorMatrix, nu: &[f64]) -> f64 {
    let n = q.dim();
    (0..n)
        .map(|j| (0..n).map(|i| nu[i] * q.rate(i, j)).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Per-class stationary laws of the diagonal blocks.
pub fn class_stationary(blocks: &[GeneratorMatrix]) -> Result<Vec<Vec<f64>>> {
    blocks.iter().map(stationary_distribution).collect()
}

/// Generator of the aggregated chain: `Q_bar = mu_tilde Q_slow I_blocks`.
pub fn aggregate_generator(
    blocks: &[GeneratorMatrix],
    q_slow: &GeneratorMatrix,
    partition: &ClassPartition,
) -> Result<GeneratorMatrix> {
    if blocks.len() != partition.num_classes() {
        return Err(Error::Dimension("one fast block per class required".into()));
    }
    if q_slow.dim() != partition.num_states() {
        return Err(Error::Dimension("slow generator size differs from state count".into()));
    }
    for (b, c) in blocks.iter().zip(partition.classes()) {
        if b.dim() != c.len() {
            return Err(Error::Dimension("block size differs from class size".into()));
        }
    }
    let mu = class_stationary(blocks)?;
    let l = partition.num_classes();
    let mut m = DMatrix::zeros(l, l);
    for (k, class_k) in partition.classes().iter().enumerate() {
        for (idx, &s) in class_k.iter().enumerate() {
            for (c, class_c) in partition.classes().iter().enumerate() {
                let to: f64 = class_c.iter().map(|&j| q_slow.rate(s, j)).sum();
                m[(k, c)] += mu[k][idx] * to;
            }
        }
    }
    // Exact zero row sums up to rounding: fix the diagonal from the off-diagonals.
    for k in 0..l {
        let off: f64 = (0..l).filter(|c| *c != k).map(|c| m[(k, c)]).sum();
        m[(k, k)] = -off;
    }
    GeneratorMatrix::new(m)
}

/// Exact event-driven simulation of the chain with generator `q_fast / eps + q_slow`.
pub fn simulate_chain(
    q_fast: &GeneratorMatrix,
    q_slow: &GeneratorMatrix,
    eps: f64,
    r0: usize,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ChainPath> {
    if !(eps > 0.0) || !(horizon > 0.0) {
        return Err(Error::Parameter("eps and horizon must be positive".into()));
    }
    let q = q_fast.two_scale(q_slow, eps)?;
    simulate_generator(&q, r0, horizon, rng)
}

/// Exact simulation for a single generator.
pub fn simulate_generator(
    q: &GeneratorMatrix,
    r0: usize,
    horizon: f64,
    rng: &mut RngStream,
) -> Result<ChainPath> {
    let n = q.dim();
    if r0 >= n {
        return Err(Error::Parameter(format!("initial state {r0} out of range")));
    }
    // Per-state exit rate and cumulative jump kernel.
    let tables: Vec<(f64, Vec<(usize, f64)>)> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let cum: Vec<(usize, f64)> = (0..n)
                .filter(|j| *j != i && q.rate(i, *j) > 0.0)
                .map(|j| {
                    acc += q.rate(i, j);
                    (j, acc)
                })
                .collect();
            (acc, cum)
        })
        .collect();

    let mut path = ChainPath::constant(r0, horizon);
    let mut t = 0.0;
    let mut state = r0;
    loop {
        let (exit, cum) = &tables[state];
        if *exit <= 0.0 {
            break;
        }
        t += rng.exp1() / exit;
        if t >= horizon {
            break;
        }
        let target = rng.open01() * exit;
        let pick = cum.partition_point(|(_, c)| *c < target).min(cum.len() - 1);
        state = cum[pick].0;
        path.times.push(t);
        path.states.push(state);
    }
    Ok(path)
}

/// Relabels each state by its class and merges equal consecutive classes.
pub fn aggregate_path(path: &ChainPath, partition: &ClassPartition) -> Result<ChainPath> {
    let mut out = ChainPath {
        times: Vec::with_capacity(path.times.len()),
        states: Vec::with_capacity(path.states.len()),
        horizon: path.horizon,
    };
    for (&t, &s) in path.times.iter().zip(&path.states) {
        if s >= partition.num_states() {
            return Err(Error::Parameter(format!("state {s} outside partition")));
        }
        let c = partition.class_of(s);
        if out.states.last() != Some(&c) {
            out.times.push(t);
            out.states.push(c);
        }
    }
    Ok(out)
}

/// Fraction of `[0, horizon]` spent in each of `n` states.
pub fn occupation_fractions(path: &ChainPath, n: usize) -> Vec<f64> {
    let mut occ = vec![0.0; n];
    path.for_each_piece(0.0, path.horizon, |a, b, s| occ[s] += b - a);
    occ.iter_mut().for_each(|v| *v /= path.horizon);
    occ
}

/// Empirical transition rates `#(i -> j) / time in i`; diagonal set so rows sum to 0.
pub fn empirical_rates(path: &ChainPath, n: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0.0; n]; n];
    for w in path.states.windows(2) {
        counts[w[0]][w[1]] += 1.0;
    }
    let occ = occupation_fractions(path, n);
    let mut rates = vec![vec![0.0; n]; n];
    for i in 0..n {
        let time = occ[i] * path.horizon;
        if time > 0.0 {
            for j in 0..n {
                if i != j {
                    rates[i][j] = counts[i][j] / time;
                }
            }
        }
        rates[i][i] = -rates[i].iter().sum::<f64>();
    }
    rates
}

/// `|| P_eps(t) - 1 nu ||_inf` on `t_grid`, with `nu` the stationary law of `q_fast`.
pub fn mixing_decay_probe(
    q_fast: &GeneratorMatrix,
    q_slow: &GeneratorMatrix,
    eps: f64,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    let nu = stationary_distribution(q_fast)?;
    let q = q_fast.two_scale(q_slow, eps)?;
    let n = q.dim();
    Ok(t_grid
        .iter()
        .map(|&t| {
            let p = (q.matrix() * t).exp();
            (0..n)
                .map(|i| (0..n).map(|j| (p[(i, j)] - nu[j]).abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g(rows: &[&[f64]]) -> GeneratorMatrix {
        GeneratorMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn generator_validation() {
        assert!(GeneratorMatrix::from_rows(&[vec![-1.0, 0.5], vec![1.0, -1.0]]).is_err());
        assert!(GeneratorMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]]).is_err());
        assert!(GeneratorMatrix::from_rows(&[vec![-1.0, 1.0]]).is_err());
    }

    #[test]
    fn stationary_examples() {
        let nu = stationary_distribution(&g(&[&[-1.0, 1.0], &[1.0, -1.0]])).unwrap();
        assert_abs_diff_eq!(nu[0], 0.5, epsilon = 1e-14);
        let q = g(&[&[-2.0, 2.0], &[1.0, -1.0]]);
        let nu = stationary_distribution(&q).unwrap();
        assert_abs_diff_eq!(nu[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(nu[1], 2.0 / 3.0, epsilon = 1e-14);
        assert!(stationary_residual(&q, &nu) <= 1e-10);
        assert_eq!(stationary_distribution(&g(&[&[0.0]])).unwrap(), vec![1.0]);
    }

    #[test]
    fn reducible_generator_rejected() {
        let q = GeneratorMatrix::block_diagonal(&[
            g(&[&[-1.0, 1.0], &[1.0, -1.0]]),
            g(&[&[-1.0, 1.0], &[1.0, -1.0]]),
        ]);
        assert!(matches!(stationary_distribution(&q), Err(Error::Irreducibility(_))));
    }

    #[test]
    fn absorbing_state_is_weakly_irreducible() {
        let nu = stationary_distribution(&g(&[&[0.0, 0.0], &[1.0, -1.0]])).unwrap();
        assert_abs_diff_eq!(nu[0], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn singleton_aggregation_is_identity() {
        let qs = g(&[&[-0.7, 0.7], &[0.2, -0.2]]);
        let qbar = aggregate_generator(
            &[GeneratorMatrix::zeros(1), GeneratorMatrix::zeros(1)],
            &qs,
            &ClassPartition::singletons(2),
        )
        .unwrap();
        assert_eq!(qbar, qs);
    }

    #[test]
    fn aggregation_hand_product() {
        // Uniform blocks: Q_bar[k][c] = mean over i in S_k of sum_{j in S_c} Q_slow[i][j].
        let b = g(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let qs = g(&[
            &[-3.0, 1.0, 2.0, 0.0],
            &[0.0, -1.0, 0.5, 0.5],
            &[1.0, 1.0, -2.0, 0.0],
            &[0.0, 3.0, 1.0, -4.0],
        ]);
        let p = ClassPartition::from_sizes(&[2, 2]).unwrap();
        let qbar = aggregate_generator(&[b.clone(), b], &qs, &p).unwrap();
        let expect = [[-1.5, 1.5], [2.5, -2.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(qbar.rate(i, j), expect[i][j], epsilon = 1e-12);
            }
        }
        let zero = aggregate_generator(
            &[g(&[&[-1.0, 1.0], &[1.0, -1.0]]), g(&[&[-1.0, 1.0], &[1.0, -1.0]])],
            &GeneratorMatrix::zeros(4),
            &p,
        )
        .unwrap();
        assert_eq!(zero.matrix().amax(), 0.0);
    }

    #[test]
    fn zero_generators_give_constant_path() {
        let mut rng = RngStream::new(1, 0);
        let p = simulate_chain(&GeneratorMatrix::zeros(3), &GeneratorMatrix::zeros(3), 0.1, 2, 5.0, &mut rng)
            .unwrap();
        assert_eq!(p.states, vec![2]);
        assert_eq!(occupation_fractions(&p, 3), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn fast_chain_occupation_near_half() {
        let q = g(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let mut rng = RngStream::new(5, 0);
        let p = simulate_chain(&q, &GeneratorMatrix::zeros(2), 1e-3, 0, 10.0, &mut rng).unwrap();
        let occ = occupation_fractions(&p, 2);
        assert!((occ[0] - 0.5).abs() < 0.02, "{occ:?}");
    }

    #[test]
    fn jump_count_matches_poisson_mean() {
        // Symmetric two-state chain: exit rate 2 from both states.
        let q = g(&[&[-2.0, 2.0], &[2.0, -2.0]]);
        let (horizon, n) = (5.0, 1000);
        let counts: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = RngStream::new(9, i);
                simulate_generator(&q, 0, horizon, &mut rng).unwrap().num_jumps() as f64
            })
            .collect();
        let m = counts.iter().sum::<f64>() / n as f64;
        let se = (2.0 * horizon / n as f64).sqrt();
        assert!((m - 2.0 * horizon).abs() < 3.0 * se, "mean jumps {m}");
    }

    #[test]
    fn aggregate_path_relabels() {
        let path = ChainPath {
            times: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            states: vec![0, 1, 2, 3, 0],
            horizon: 5.0,
        };
        let p = ClassPartition::from_sizes(&[2, 2]).unwrap();
        let agg = aggregate_path(&path, &p).unwrap();
        assert_eq!(agg.times, vec![0.0, 2.0, 4.0]);
        assert_eq!(agg.states, vec![0, 1, 0]);
        assert_eq!(aggregate_path(&path, &ClassPartition::singletons(4)).unwrap(), path);
        let one = aggregate_path(&path, &ClassPartition::from_sizes(&[4]).unwrap()).unwrap();
        assert_eq!(one.states, vec![0]);
    }

    #[test]
    fn occupation_by_hand() {
        let path = ChainPath {
            times: vec![0.0, 0.3, 1.1, 1.5],
            states: vec![1, 0, 2, 0],
            horizon: 2.0,
        };
        let occ = occupation_fractions(&path, 3);
        assert_abs_diff_eq!(occ[0], (0.8 + 0.5) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(occ[1], 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(occ[2], 0.2, epsilon = 1e-15);
        let even = ChainPath { times: vec![0.0, 1.0], states: vec![0, 1], horizon: 2.0 };
        assert_eq!(occupation_fractions(&even, 2), vec![0.5, 0.5]);
    }

    #[test]
    fn pieces_cover_interval() {
        let path = ChainPath { times: vec![0.0, 0.3, 0.7], states: vec![0, 1, 0], horizon: 1.0 };
        let mut pieces = vec![];
        path.for_each_piece(0.2, 0.8, |a, b, s| pieces.push((a, b, s)));
        assert_eq!(pieces, vec![(0.2, 0.3, 0), (0.3, 0.7, 1), (0.7, 0.8, 0)]);
        assert_eq!(path.state_at(0.3), 1);
        assert_eq!(path.state_at(0.0), 0);
    }

    #[test]
    fn two_state_mixing_closed_form() {
        let q = g(&[&[-1.0, 1.0], &[1.0, -1.0]]);
        let eps = 0.1;
        let grid = [0.0, 0.05, 0.1, 0.3];
        let d = mixing_decay_probe(&q, &GeneratorMatrix::zeros(2), eps, &grid).unwrap();
        for (t, v) in grid.iter().zip(&d) {
            // |P - 1 nu| row = 2 * 0.5 e^{-2t/eps}
            assert_abs_diff_eq!(*v, (-2.0 * t / eps).exp(), epsilon = 1e-10);
        }
        assert_abs_diff_eq!(d[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mixing_floor_scales_with_eps() {
        let q = g(&[&[-1.0, 1.0], &[2.0, -2.0]]);
        let qs = g(&[&[-1.0, 1.0], &[0.5, -0.5]]);
        let mut ratios = vec![];
        for eps in [0.1, 0.03, 0.01, 0.003] {
            let v = mixing_decay_probe(&q, &qs, eps, &[1.0]).unwrap()[0];
            ratios.push(v / eps);
        }
        assert!(ratios.iter().all(|r| *r < 5.0), "{ratios:?}");
    }
}
