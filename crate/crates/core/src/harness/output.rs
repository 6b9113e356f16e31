//! CSV tables and `summary.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};

use super::aggregate::AggregateOutcome;
use super::check::CheckReport;
use super::config::ExperimentConfig;
use super::converge::ConvergeOutcome;
use super::freeze::FreezeOutcome;
use super::simulate::SimulateOutcome;

fn write_file(path: &Path, body: &str) -> Result<PathBuf> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    f.write_all(body.as_bytes())?;
    Ok(path.to_path_buf())
}

fn csv(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Io(format!("serialize: {e}")))
}

/// Serializes `results` without its embedded check report.
fn results_value<T: Serialize>(results: &T) -> Result<Value> {
    let mut v = to_value(results)?;
    if let Value::Object(map) = &mut v {
        map.remove("check");
    }
    Ok(v)
}

fn write_summary(dir: &Path, command: &str, cfg: &ExperimentConfig, check: &CheckReport, results: Value) -> Result<PathBuf> {
    let doc = json!({
        "command": command,
        "config": to_value(cfg)?,
        "check": to_value(check)?,
        "results": results,
    });
    let mut body = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    body.push('\n');
    write_file(&dir.join("summary.json"), &body)
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

pub fn write_check(dir: &Path, cfg: &ExperimentConfig, check: &CheckReport) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    Ok(vec![write_summary(dir, "check", cfg, check, Value::Null)?])
}

pub fn write_converge(dir: &Path, cfg: &ExperimentConfig, out: &ConvergeOutcome) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let table = csv(
        "eps,p,error,se,n_paths",
        out.table.iter().map(|r| {
            vec![
                r.eps.to_string(),
                r.p.to_string(),
                r.error.to_string(),
                r.se.to_string(),
                r.n_paths.to_string(),
            ]
        }),
    );
    Ok(vec![
        write_file(&dir.join("converge.csv"), &table)?,
        write_summary(dir, "converge", cfg, &out.check, results_value(out)?)?,
    ])
}

pub fn write_freeze(dir: &Path, cfg: &ExperimentConfig, out: &FreezeOutcome) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    // The CSV carries the estimate from the first initial fast state.
    let rows = out.points.iter().enumerate().flat_map(|(zi, pt)| {
        let est = &pt.estimates[0];
        est.mean
            .coeffs
            .iter()
            .zip(&est.se)
            .enumerate()
            .map(move |(k, (m, s))| vec![(zi + 1).to_string(), (k + 1).to_string(), m.to_string(), s.to_string()])
    });
    let table = csv("z_id,component,bbar,se", rows);
    let decay = csv(
        "t,deviation,noise_floor",
        out.decay
            .times
            .iter()
            .zip(&out.decay.deviation)
            .zip(&out.decay.noise_floor)
            .map(|((t, d), s)| vec![t.to_string(), d.to_string(), s.to_string()]),
    );
    Ok(vec![
        write_file(&dir.join("freeze.csv"), &table)?,
        write_file(&dir.join("decay.csv"), &decay)?,
        write_summary(dir, "freeze", cfg, &out.check, results_value(out)?)?,
    ])
}

pub fn write_aggregate(dir: &Path, cfg: &ExperimentConfig, out: &AggregateOutcome) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let table = csv(
        "from_class,to_class,empirical_rate,qbar_rate",
        out.rates.iter().map(|r| {
            vec![
                r.from_class.to_string(),
                r.to_class.to_string(),
                r.empirical_rate.to_string(),
                r.qbar_rate.to_string(),
            ]
        }),
    );
    Ok(vec![
        write_file(&dir.join("aggregate.csv"), &table)?,
        write_summary(dir, "aggregate", cfg, &out.check, results_value(out)?)?,
    ])
}

pub fn write_simulate(dir: &Path, cfg: &ExperimentConfig, out: &SimulateOutcome) -> Result<Vec<PathBuf>> {
    prepare(dir)?;
    let rec = &out.record;
    let k = rec.states[0].len();
    let mut header = String::from("t,norm");
    if rec.chain.is_some() {
        header.push_str(",regime");
    }
    if rec.fast.is_some() {
        header.push_str(",fast_norm");
    }
    for m in 1..=k {
        header.push_str(&format!(",x{m}"));
    }
    let rows = rec.times.iter().zip(&rec.states).enumerate().map(|(i, (t, x))| {
        let mut row = vec![t.to_string(), x.norm().to_string()];
        if let Some(chain) = &rec.chain {
            row.push((chain.state_at(*t) + 1).to_string());
        }
        if let Some(fast) = &rec.fast {
            row.push(fast[i].norm().to_string());
        }
        row.extend(x.coeffs.iter().map(|c| c.to_string()));
        row
    });
    let mut files = vec![write_file(&dir.join("trajectory.csv"), &csv(&header, rows))?];
    if !out.synth_x.is_empty() {
        let rows = rec.times.iter().zip(&rec.states).flat_map(|(t, x)| {
            out.synth_x
                .iter()
                .map(move |p| vec![t.to_string(), p.to_string(), x.synthesize_rod(*p).to_string()])
        });
        files.push(write_file(&dir.join("field.csv"), &csv("t,x,u", rows))?);
    }
    let results = json!({
        "eps": out.eps,
        "steps": rec.times.len() - 1,
        "max_norm": out.max_norm(),
        "final_norm": rec.last().norm(),
        "jumps": rec.chain.as_ref().map(|c| c.num_jumps()),
    });
    files.push(write_summary(dir, "simulate", cfg, &out.check, results)?);
    Ok(files)
}
