use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn irs_eval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irs-eval"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const SMALL: &str = r#"
preset = "fig5"

[sweep]
var = "gamma_bar_db"
grid = [-20.0, 0.0]

[[series]]
label = "direct"
n_irs = 0

[[series]]
label = "N=2 L=32"
n_irs = 2
elements = 32

[output]
metrics = ["rate", "rate_lower", "rate_upper", "outage"]
n_trials = 5000
seed = 11
"#;

#[test]
fn lists_every_preset() {
    let out = irs_eval(&["list-presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "fig2", "kl", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
}

#[test]
fn config_run_writes_identical_csv_twice() {
    let cfg = scratch("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (scratch("a.csv"), scratch("b.csv"));
    for out in [&a, &b] {
        let o = irs_eval(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--validate",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# realized-topology: seed=14902"));
    assert_eq!(
        lines[1],
        "series,gamma_bar_db,rate_mc,rate_mc_hw95,rate_lower,rate_upper,outage,outage_mc,outage_mc_hw95"
    );
    assert_eq!(lines.len(), 2 + 4);
}

#[test]
fn preset_overrides_reach_the_output() {
    let o = irs_eval(&["run", "--preset", "kl", "--trials", "0"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("series,zeta_c,kl"));
    assert_eq!(text.lines().count(), 2 + 3 * 19);

    let o = irs_eval(&[
        "run",
        "--preset",
        "fig3",
        "--seed",
        "99",
        "--trials",
        "10",
        "--print-spec",
    ]);
    let spec = String::from_utf8(o.stdout).unwrap();
    assert!(spec.contains("seed = 99") && spec.contains("n_trials = 10"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(
        irs_eval(&["run", "--preset", "nope"]).status.code(),
        Some(2)
    );
    assert_eq!(irs_eval(&["run"]).status.code(), Some(2));
    assert_eq!(irs_eval(&["frobnicate"]).status.code(), Some(2));
    let bad = scratch("bad.toml");
    fs::write(&bad, "[output]\nmetrics = [\"not_a_metric\"]\n").unwrap();
    let o = irs_eval(&["run", "--config", bad.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!o.stderr.is_empty());
}

#[test]
fn missing_files_are_io_errors() {
    let o = irs_eval(&["run", "--config", "/nonexistent/spec.toml"]);
    assert_eq!(o.status.code(), Some(4));
}
