use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn twoscale(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twoscale"))
        .args(args)
        .env_remove("TWOSCALE_SEED")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, base: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = edit(std::fs::read_to_string(preset(base)).unwrap());
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn check_passes_on_presets() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["rod_single.toml", "rod_multiclass.toml", "fast_slow.toml"] {
        let out = twoscale(&[
            "check",
            "--config",
            preset(name).to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", text(&out));
        assert!(dir.path().join("summary.json").exists());
    }
}

#[test]
fn violated_assumptions_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rod_single.toml", |t| t.replace("theta = 0.5", "theta = 0.9"));
    let out = twoscale(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("A3 violated"));

    let out = twoscale(&["converge", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("converge.csv").exists());

    let cfg = write_config(dir.path(), "fast_slow.toml", |t| t.replace("fast_y_gain = 0.5", "fast_y_gain = 2.0"));
    let out = twoscale(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("ergodicity condition"));
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rod_single.toml", |t| t + "mystery = 1\n");
    let out = twoscale(&["check", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = text(&out);
    assert!(msg.contains("mystery") && msg.contains("line"), "{msg}");

    let out = twoscale(&["check", "--config", "/nonexistent/cfg.toml"]);
    assert_eq!(out.status.code(), Some(2));

    let out = twoscale(&["explode", "--config", preset("rod_single.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

fn converge_bytes(extra: &[&str], env_seed: Option<&str>) -> (Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = preset("rod_single.toml");
    let mut args = vec![
        "converge",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--paths",
        "40",
        "--quiet",
    ];
    args.extend_from_slice(extra);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twoscale"));
    cmd.args(&args).env_remove("TWOSCALE_SEED");
    if let Some(s) = env_seed {
        cmd.env("TWOSCALE_SEED", s);
    }
    let out = cmd.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    assert!(out.stdout.is_empty());
    (
        std::fs::read(dir.path().join("converge.csv")).unwrap(),
        std::fs::read(dir.path().join("summary.json")).unwrap(),
    )
}

#[test]
fn converge_is_reproducible_and_seed_flag_wins() {
    let a = converge_bytes(&["--seed", "7"], None);
    let b = converge_bytes(&["--seed", "7"], Some("99"));
    let c = converge_bytes(&[], Some("7"));
    let d = converge_bytes(&[], Some("8"));
    let seq = converge_bytes(&["--seed", "7", "--sequential"], None);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a, seq);
    assert_ne!(a.0, d.0);
    let csv = String::from_utf8(a.0).unwrap();
    assert!(csv.starts_with("eps,p,error,se,n_paths\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",40")));
    let summary = String::from_utf8(a.1).unwrap();
    assert!(summary.contains("\"seed\": 7"));
}

#[test]
fn simulate_writes_trajectory_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rod_single.toml", |t| t + "synth_points = 3\n");
    let out = twoscale(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header: Vec<&str> = traj.lines().next().unwrap().split(',').collect();
    assert_eq!(&header[..4], &["t", "norm", "regime", "x1"]);
    assert_eq!(header.len(), 3 + 20);

    // u(t, pi/2) from the dumped coefficients
    let last: Vec<f64> = traj.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    let expect: f64 = last[3..]
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * std::f64::consts::FRAC_PI_2).sin())
        .sum::<f64>()
        * (2.0 / std::f64::consts::PI).sqrt();
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    let mid: Vec<f64> = field
        .lines()
        .rev()
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|r| (r[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-12)
        .unwrap();
    assert_eq!(mid[0], last[0]);
    assert!((mid[2] - expect).abs() < 1e-12);
}

#[test]
fn aggregate_and_freeze_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = twoscale(&[
        "aggregate",
        "--config",
        preset("rod_multiclass.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("aggregate.csv")).unwrap();
    assert!(csv.starts_with("from_class,to_class,empirical_rate,qbar_rate\n"));
    assert_eq!(csv.lines().count(), 3);

    let cfg = write_config(dir.path(), "fast_slow.toml", |t| {
        t.replace("modes = 20", "modes = 3") + "replications = 2\ndecay_ensemble = 200\n"
    });
    let out = twoscale(&["freeze", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = std::fs::read_to_string(dir.path().join("freeze.csv")).unwrap();
    assert!(csv.starts_with("z_id,component,bbar,se\n"));
    assert!(dir.path().join("decay.csv").exists());

    let out = twoscale(&[
        "freeze",
        "--config",
        preset("rod_single.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
