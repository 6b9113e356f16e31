//! Machine-checkable assumption report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::drift::{sampled_gateaux, sampled_lipschitz, CoupledDrift, FastDrift, LinearFeedback, RegimeDrift, SaturatingCoupling};
use crate::error::{Error, Result};
use crate::markov::{stationary_distribution, GeneratorMatrix};
use crate::rng::{Channel, StreamKey};
use crate::spectral::{admissibility, AdmissibilityReport, FastPair};

use super::config::{ExperimentConfig, Scenario};
use super::model::{build_field, validate};

const PROBE_SAMPLES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub admissibility: Option<AdmissibilityReport>,
    pub conditions: Vec<Condition>,
    pub pass: bool,
}

impl CheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| !c.pass)
    }

    /// One line per condition.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.conditions {
            let _ = writeln!(s, "{:<4} {:<24} {}", if c.pass { "ok" } else { "FAIL" }, c.name, c.detail);
        }
        s
    }
}

struct Sheet(Vec<Condition>);

impl Sheet {
    fn add(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.0.push(Condition {
            name: name.into(),
            pass,
            detail: detail.into(),
        });
    }
}

fn check_generator(sheet: &mut Sheet, name: &str, rows: &[Vec<f64>]) -> Option<GeneratorMatrix> {
    match GeneratorMatrix::from_rows(rows) {
        Ok(g) => {
            sheet.add(name, true, "nonnegative off-diagonals, zero row sums");
            Some(g)
        }
        Err(e) => {
            sheet.add(name, false, e.to_string());
            None
        }
    }
}

/// Evaluates every assumption on the configuration. Input errors (shape and
/// range problems) are returned as `Err`; violated assumptions come back as
/// failed conditions.
pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let sw = validate(cfg)?;
    let mut sheet = Sheet(Vec::new());
    let mut rng = StreamKey::for_path(cfg.seed, 0, Channel::Aux).open();

    let alpha_ok = cfg.alpha > 1.0 && cfg.alpha <= 2.0;
    sheet.add("stability index", alpha_ok, format!("alpha = {} in (1,2]", cfg.alpha));
    sheet.add(
        "moment order",
        cfg.p > 1.0 && cfg.p < cfg.alpha,
        format!("1 < p = {} < alpha", cfg.p),
    );
    let at = cfg.alpha * cfg.theta;
    let a3 = cfg.theta > 0.0 && cfg.theta < 1.0 && at > 0.0 && at < 1.0;
    sheet.add(
        "A3",
        a3,
        if a3 {
            format!("alpha*theta = {at:.4} in (0,1)")
        } else {
            format!("A3 violated: alpha*theta = {at:.4} not in (0,1)")
        },
    );
    let grid_ok = cfg.eps_grid.iter().all(|e| *e > 0.0 && e.is_finite())
        && cfg.eps_grid.windows(2).all(|w| w[1] < w[0]);
    sheet.add("eps grid", grid_ok, "strictly decreasing and positive");

    let slow = match build_field(cfg.a_rule, cfg.l_rule, cfg.modes, if alpha_ok { cfg.alpha } else { 1.5 }) {
        Ok(f) => {
            sheet.add("operator A", true, format!("lambda_1 = {}", f.op.lambda1()));
            Some(f)
        }
        Err(e) => {
            sheet.add("operator A", false, e.to_string());
            None
        }
    };

    let fast_slow = cfg.scenario == Scenario::FastSlow;
    let beta = cfg.fast_beta();
    let fast = if fast_slow {
        let beta_ok = beta > 1.0 && beta <= 2.0;
        sheet.add("fast stability index", beta_ok, format!("beta = {beta} in (1,2]"));
        match build_field(cfg.b_rule, cfg.z_rule, cfg.modes, if beta_ok { beta } else { 1.5 }) {
            Ok(f) => {
                sheet.add("operator B", true, format!("mu_1 = {}", f.op.lambda1()));
                Some(f)
            }
            Err(e) => {
                sheet.add("operator B", false, e.to_string());
                None
            }
        }
    } else {
        None
    };

    let mut adm = None;
    if let Some(slow) = &slow {
        let pair = fast.as_ref().map(|f| FastPair {
            op: &f.op,
            weights: &f.weights,
            beta,
        });
        match admissibility(&slow.op, &slow.weights, pair, cfg.alpha, cfg.theta, cfg.tail_cap.is_none(), cfg.tail_cap) {
            Ok(rep) => {
                let others: Vec<&String> = rep.reasons.iter().filter(|r| !r.starts_with("A3")).collect();
                let mut detail = format!("delta partial = {:.6}", rep.delta_partial);
                if let Some(t) = rep.delta_tail_bound {
                    let _ = write!(detail, ", tail <= {t:.3e}");
                }
                if let Some(k2) = rep.kappa2_partial {
                    let _ = write!(detail, ", kappa2 partial = {k2:.6}");
                }
                for r in &others {
                    let _ = write!(detail, "; {r}");
                }
                sheet.add("noise admissibility", others.is_empty(), detail);
                adm = Some(rep);
            }
            Err(e) => sheet.add("noise admissibility", false, e.to_string()),
        }
    }

    if let Some(s) = &sw {
        let qf = check_generator(&mut sheet, "fast generator", &s.q_fast);
        let _qs = check_generator(&mut sheet, "slow generator", &s.q_slow);
        if let Some(qf) = qf {
            let n = qf.dim();
            let mut class_of = vec![0; n];
            for (k, c) in s.classes.iter().enumerate() {
                for &st in c {
                    class_of[st] = k;
                }
            }
            let leaks = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| class_of[i] != class_of[j] && qf.rate(i, j) != 0.0)
                .count();
            sheet.add(
                "block structure",
                leaks == 0,
                format!("{leaks} fast transitions between classes"),
            );
            for (k, c) in s.classes.iter().enumerate() {
                let name = format!("weak irreducibility {}", k + 1);
                match qf.sub_block(c).and_then(|b| stationary_distribution(&b)) {
                    Ok(nu) => sheet.add(&name, true, format!("stationary {nu:.4?}")),
                    Err(e) => sheet.add(&name, false, e.to_string()),
                }
            }
        }
        let mut worst = 0.0f64;
        let mut ok = true;
        for i in 0..s.drift.num_regimes() {
            let seen = sampled_lipschitz(&s.drift, i, cfg.modes, PROBE_SAMPLES, 3.0, &mut rng);
            let declared = s.drift.lipschitz(i);
            ok &= seen <= declared * (1.0 + 1e-9) + 1e-12;
            worst = worst.max(seen);
        }
        sheet.add("A2 Lipschitz", ok, format!("largest sampled quotient {worst:.4}"));
    }

    if let Some(fast) = &fast {
        let b = SaturatingCoupling {
            x_gain: cfg.slow_x_gain,
            y_gain: cfg.slow_y_gain,
            offsets: cfg.slow_offsets.clone(),
        };
        let f = LinearFeedback {
            y_gain: cfg.fast_y_gain,
            x_gain: cfg.fast_x_gain,
        };
        match b.bound(cfg.modes) {
            Some(m) if m.is_finite() => sheet.add("B2 bounded drift", true, format!("|b| <= {m:.4}")),
            _ => sheet.add("B2 bounded drift", false, "slow drift is not bounded"),
        }
        let mu1 = fast.op.lambda1();
        let ergodic = f.k3() < mu1;
        sheet.add(
            "ergodicity",
            ergodic,
            if ergodic {
                format!("K3 = {} < mu_1 = {mu1}", f.k3())
            } else {
                format!("ergodicity condition violated: K3 = {} >= mu_1 = {mu1}", f.k3())
            },
        );
        let (kx, ky) = sampled_gateaux(&f, cfg.modes, PROBE_SAMPLES, 3.0, &mut rng);
        sheet.add(
            "B3 derivative bounds",
            kx <= f.k2() * (1.0 + 1e-9) + 1e-12 && ky <= f.k3() * (1.0 + 1e-9) + 1e-12,
            format!("sampled ({kx:.4}, {ky:.4}) vs declared ({}, {})", f.k2(), f.k3()),
        );
        let lb = coupled_quotient(&b, cfg.modes, &mut rng);
        sheet.add(
            "B1 Lipschitz",
            lb <= b.lipschitz() * (1.0 + 1e-9) + 1e-12,
            format!("largest sampled quotient {lb:.4}"),
        );
    }

    let pass = sheet.0.iter().all(|c| c.pass);
    Ok(CheckReport {
        admissibility: adm,
        conditions: sheet.0,
        pass,
    })
}

/// `run_check`, turning a failed report into a condition error.
pub fn require_pass(cfg: &ExperimentConfig) -> Result<CheckReport> {
    let check = run_check(cfg)?;
    if !check.pass {
        let failed: Vec<String> = check.failures().map(|c| format!("{}: {}", c.name, c.detail)).collect();
        return Err(Error::Condition(failed.join("; ")));
    }
    Ok(check)
}

fn coupled_quotient(b: &dyn CoupledDrift, dim: usize, rng: &mut crate::rng::RngStream) -> f64 {
    let mut worst = 0.0f64;
    let mut fa = vec![0.0; dim];
    let mut fb = vec![0.0; dim];
    for _ in 0..PROBE_SAMPLES {
        let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let y: Vec<f64> = (0..dim).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let x2: Vec<f64> = x.iter().map(|v| v + rng.uniform(-0.3, 0.3)).collect();
        let y2: Vec<f64> = y.iter().map(|v| v + rng.uniform(-0.3, 0.3)).collect();
        b.eval(&x, &y, &mut fa);
        b.eval(&x2, &y2, &mut fb);
        let num = fa.iter().zip(&fb).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let dx = x.iter().zip(&x2).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let dy = y.iter().zip(&y2).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        if dx + dy > 0.0 {
            worst = worst.max(num / (dx + dy));
        }
    }
    worst
}
