use irs_core::experiment::{consistency_violations, preset, run, ExperimentSpec, Metric, PRESETS};

const SPEC: &str = r#"
[system]
n_irs = 2
elements = 16
eta = 0.9
m_u = 2.0
m_h = 3.0
m_g = 3.0
gamma_bar_db = -10.0
gamma_th_db = 40.0

[topology]
seed = 7

[sweep]
var = "gamma_bar_db"
grid = [-20.0, -10.0, 0.0]

[[series]]
label = "N=1"
n_irs = 1

[[series]]
label = "N=2"
n_irs = 2

[output]
metrics = ["outage", "rate", "rate_lower", "rate_upper", "mean_snr"]
n_trials = 20000
seed = 3
"#;

#[test]
fn toml_experiment_runs_and_agrees_with_simulation() {
    let spec = ExperimentSpec::from_toml(SPEC).unwrap();
    let result = run(&spec).unwrap();
    assert_eq!(result.rows.len(), 6);
    let v = consistency_violations(&result);
    assert!(v.is_empty(), "{v:?}");
    let csv = result.to_csv_string();
    let mut lines = csv.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("# realized-topology: seed=7 "));
    let header = lines.next().unwrap();
    assert_eq!(header, "series,gamma_bar_db,outage,outage_mc,outage_mc_hw95,rate_mc,rate_mc_hw95,rate_lower,rate_upper,mean_snr,mean_snr_mc,mean_snr_mc_hw95");
    assert_eq!(lines.count(), 6);

    for row in &result.rows {
        let cell = |m: Metric| row.cells.iter().find(|c| c.metric == m).unwrap();
        let (lo, hi) = (
            cell(Metric::RateLower).analytic.unwrap(),
            cell(Metric::RateUpper).analytic.unwrap(),
        );
        assert!(lo <= hi);
        assert!(cell(Metric::Rate).analytic.is_none());
        assert!(cell(Metric::Rate).monte_carlo.is_some());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let spec = ExperimentSpec::from_toml(SPEC).unwrap();
    let a = run(&spec).unwrap().to_csv_string();
    let b = run(&spec).unwrap().to_csv_string();
    assert_eq!(a, b);
}

#[test]
fn every_preset_runs_analytically_on_a_coarse_grid() {
    for (name, _) in PRESETS {
        let mut spec = preset(name).unwrap();
        spec.output.n_trials = 0;
        let g = &spec.sweep.grid;
        spec.sweep.grid = vec![g[0], g[g.len() / 2], g[g.len() - 1]];
        let result = run(&spec).unwrap();
        assert_eq!(result.rows.len(), 3 * spec.series.len(), "{name}");
        for row in &result.rows {
            for c in &row.cells {
                assert!(c.monte_carlo.is_none());
                if let Some(v) = c.analytic {
                    assert!(
                        v.is_nan() || v >= 0.0,
                        "{name} {} {}: {v}",
                        row.series,
                        c.metric.name()
                    );
                }
            }
        }
    }
}
