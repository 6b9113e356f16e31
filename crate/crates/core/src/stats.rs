//! Small statistical helpers shared by the diagnostics.

use serde::{Deserialize, Serialize};

/// Empirical characteristic function `(mean cos(ux), mean sin(ux))`.
pub fn ecf(samples: &[f64], u: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let (c, s) = samples.iter().fold((0.0, 0.0), |(c, s), x| {
        let (sn, cs) = (u * x).sin_cos();
        (c + cs, s + sn)
    });
    (c / n, s / n)
}

/// Sup distance between the empirical CF and a real target CF over `us`.
pub fn ecf_sup_distance(samples: &[f64], us: &[f64], target: impl Fn(f64) -> f64) -> f64 {
    us.iter()
        .map(|&u| {
            let (re, im) = ecf(samples, u);
            ((re - target(u)).powi(2) + im * im).sqrt()
        })
        .fold(0.0, f64::max)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean with a batch-means standard error over `batches` contiguous batches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub mean: f64,
    pub se: f64,
}

pub fn batch_means(xs: &[f64], batches: usize) -> BatchEstimate {
    let m = mean(xs);
    let b = batches.min(xs.len()).max(1);
    if b < 2 {
        return BatchEstimate { mean: m, se: 0.0 };
    }
    let size = xs.len() / b;
    let bm: Vec<f64> = (0..b)
        .map(|i| mean(&xs[i * size..(i + 1) * size]))
        .collect();
    if bm.iter().all(|v| *v == bm[0]) {
        return BatchEstimate { mean: m, se: 0.0 };
    }
    let grand = mean(&bm);
    let var = bm.iter().map(|v| (v - grand).powi(2)).sum::<f64>() / (b - 1) as f64;
    BatchEstimate {
        mean: m,
        se: (var / b as f64).sqrt(),
    }
}

/// `(E|d|^p)^(1/p)` from per-path values `|d|^p`, with the delta-method
/// standard error of the root.
pub fn pth_root_estimate(powers: &[f64], p: f64, batches: usize) -> BatchEstimate {
    let m = batch_means(powers, batches);
    if m.mean <= 0.0 {
        return BatchEstimate { mean: 0.0, se: 0.0 };
    }
    let root = m.mean.powf(1.0 / p);
    BatchEstimate {
        mean: root,
        se: root / (p * m.mean) * m.se,
    }
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Option<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}
