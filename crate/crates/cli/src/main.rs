use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use twoscale::ensemble::Execution;
use twoscale::harness::{self, output, ExperimentConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Evaluate the model assumptions.
    Check,
    /// Dump one seeded trajectory.
    Simulate,
    /// Coupled error sweep over the eps grid, with a rate fit.
    Converge,
    /// Time-average estimates of the averaged drift.
    Freeze,
    /// Aggregated chain diagnostics.
    Aggregate,
}

#[derive(Debug, Parser)]
#[command(name = "twoscale", version, about = "Averaging experiments for stable-driven SPDEs")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long, env = "TWOSCALE_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides n_paths.
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    quiet: bool,
    /// Run trajectories on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

fn load(cli: &Cli) -> twoscale::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.paths {
        cfg.n_paths = n;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> twoscale::Result<bool> {
    let cfg = load(cli)?;
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let say = |s: String| {
        if !cli.quiet {
            print!("{s}");
        }
    };
    let files = match cli.command {
        Command::Check => {
            let report = harness::run_check(&cfg)?;
            say(report.table());
            let files = output::write_check(&cli.out, &cfg, &report)?;
            if !report.pass {
                return Ok(false);
            }
            files
        }
        Command::Converge => {
            let res = harness::run_converge(&cfg, exec)?;
            let mut s = String::from("eps        error        se\n");
            for r in &res.table {
                s.push_str(&format!("{:<10} {:<12.6} {:.6}\n", r.eps, r.error, r.se));
            }
            match (&res.fit, &res.fit_notice) {
                (Some(f), _) => s.push_str(&format!(
                    "slope {:.4}  r^2 {:.4}  theoretical exponent {:.4} (bound {:.4})\n",
                    f.slope, f.r_squared, f.theoretical_exponent, f.exponent_bound
                )),
                (None, Some(n)) => s.push_str(&format!("no rate fit: {n}\n")),
                _ => {}
            }
            say(s);
            output::write_converge(&cli.out, &cfg, &res)?
        }
        Command::Freeze => {
            let res = harness::run_freeze(&cfg, exec)?;
            let mut s = String::new();
            for (i, p) in res.points.iter().enumerate() {
                s.push_str(&format!(
                    "z{}: start agreement {:.3} SE, worst deviation from quadrature {:.3} SE\n",
                    i + 1,
                    p.start_agreement.unwrap_or(0.0),
                    p.reference_z
                ));
            }
            match res.decay.rate {
                Some(r) => s.push_str(&format!("decay rate {r:.4} (floor {:.4})\n", res.rate_floor)),
                None => s.push_str("decay rate: too few points above the noise floor\n"),
            }
            say(s);
            output::write_freeze(&cli.out, &cfg, &res)?
        }
        Command::Aggregate => {
            let res = harness::run_aggregate(&cfg)?;
            let mut s = format!("{} jumps, {} class changes\n", res.jumps, res.class_jumps);
            for r in &res.rates {
                s.push_str(&format!(
                    "{} -> {}: empirical {:.4}, limit {:.4}\n",
                    r.from_class, r.to_class, r.empirical_rate, r.qbar_rate
                ));
            }
            say(s);
            output::write_aggregate(&cli.out, &cfg, &res)?
        }
        Command::Simulate => {
            let res = harness::run_simulate(&cfg)?;
            say(format!(
                "{} steps, final |X| = {:.6}\n",
                res.record.times.len() - 1,
                res.record.last().norm()
            ));
            output::write_simulate(&cli.out, &cfg, &res)?
        }
    };
    for f in files {
        say(format!("wrote {}\n", f.display()));
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_condition() { 1 } else { 2 })
        }
    }
}
