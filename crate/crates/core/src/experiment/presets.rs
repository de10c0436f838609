use super::{
    ExperimentSpec, Metric, Modulation, OutputSpec, SeriesSpec, SweepSpec, SweepVar, SystemSpec,
    TopologySpec,
};
use crate::error::{Error, Result};

/// Preset names with a one-line description.
pub const PRESETS: [(&str, &str); 9] = [
    (
        "fig2",
        "pdf and cdf of the optimal SNR at gamma_bar = -10 dB, five (N, L) cases",
    ),
    (
        "kl",
        "KL divergence of the product surrogate versus zeta_c for m in {2, 3, 5}",
    ),
    (
        "fig3",
        "outage versus gamma_bar, N in {1,2,4,6,8}, L = 32, gamma_th = 0 dB",
    ),
    (
        "fig4",
        "outage and its high-SNR asymptote, N in {1,2,4,8}, L = 6, m_h = 1.5",
    ),
    (
        "fig5",
        "rate bounds and simulated rate, N in {0,1,2,4,6,8}, L = 32",
    ),
    (
        "fig6",
        "rate for seven placement/fading cases with S-D at 500 m",
    ),
    (
        "fig7",
        "imperfect-CSI rate bound versus rho, N in {2,4,6,8}, L = 32",
    ),
    (
        "fig8",
        "BPSK error rate versus gamma_bar, N in {1,2,4,6,8}, L = 32",
    ),
    (
        "fig9",
        "BPSK error rate, N = 2, L in {16,32,64} and direct link only",
    ),
];

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

fn by_n(ns: &[usize], elements: usize) -> Vec<SeriesSpec> {
    ns.iter()
        .map(|&n| SeriesSpec {
            label: if n == 0 {
                "direct".into()
            } else {
                format!("N={n} L={elements}")
            },
            n_irs: Some(n),
            elements: Some(elements),
            ..SeriesSpec::default()
        })
        .collect()
}

fn base(
    var: SweepVar,
    grid: Vec<f64>,
    series: Vec<SeriesSpec>,
    metrics: Vec<Metric>,
    n_trials: usize,
) -> ExperimentSpec {
    ExperimentSpec {
        preset: None,
        system: SystemSpec::default(),
        topology: TopologySpec::default(),
        sweep: SweepSpec { var, grid },
        series,
        output: OutputSpec {
            metrics,
            n_trials,
            seed: 1,
        },
    }
}

fn fig6_series() -> Vec<SeriesSpec> {
    let close = vec![[750.0, 750.0]; 2];
    let far = vec![[1700.0, 1700.0]; 4];
    let case = |label: &str, d: Vec<[f64; 2]>, direct: bool, m: f64| SeriesSpec {
        label: label.into(),
        m: Some(m),
        include_direct: Some(direct),
        irs_distances: Some(d),
        ..SeriesSpec::default()
    };
    vec![
        case("case1 direct", vec![], true, 3.0),
        case("case2 close+direct", close.clone(), true, 3.0),
        case("case3 close", close, false, 3.0),
        case("case4 far+direct", far.clone(), true, 3.0),
        case("case5 far", far.clone(), false, 3.0),
        case("case6 far m=1", far.clone(), true, 1.0),
        case("case7 far m=2", far, true, 2.0),
    ]
}

/// Builds the named preset.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let mut spec = match name {
        "fig2" => {
            let series = [(2, 32), (6, 32), (2, 64), (8, 32), (2, 128)]
                .iter()
                .enumerate()
                .map(|(i, &(n, l))| SeriesSpec {
                    label: format!("case{} N={n} L={l}", i + 1),
                    n_irs: Some(n),
                    elements: Some(l),
                    ..SeriesSpec::default()
                })
                .collect();
            base(
                SweepVar::GammaThDb,
                grid(35.0, 70.0, 0.5),
                series,
                vec![Metric::Pdf, Metric::Cdf],
                100_000,
            )
        }
        "kl" => {
            let series = [2.0, 3.0, 5.0]
                .iter()
                .map(|&m| SeriesSpec {
                    label: format!("m={m}"),
                    m: Some(m),
                    ..SeriesSpec::default()
                })
                .collect();
            let mut s = base(
                SweepVar::ZetaC,
                grid(0.05, 0.95, 0.05),
                series,
                vec![Metric::Kl],
                0,
            );
            s.output.seed = 0;
            s
        }
        "fig3" => base(
            SweepVar::GammaBarDb,
            grid(-70.0, -20.0, 1.0),
            by_n(&[1, 2, 4, 6, 8], 32),
            vec![Metric::Outage],
            1_000_000,
        ),
        "fig4" => {
            let mut s = base(
                SweepVar::GammaBarDb,
                grid(-60.0, 0.0, 2.0),
                by_n(&[1, 2, 4, 8], 6),
                vec![Metric::Outage, Metric::OutageAsymptotic],
                1_000_000,
            );
            s.system.m_h = 1.5;
            s.system.gamma_th_db = 10.0;
            s
        }
        "fig5" => base(
            SweepVar::GammaBarDb,
            grid(-30.0, 20.0, 5.0),
            by_n(&[0, 1, 2, 4, 6, 8], 32),
            vec![Metric::Rate, Metric::RateLower, Metric::RateUpper],
            1_000_000,
        ),
        "fig6" => {
            let mut s = base(
                SweepVar::GammaBarDb,
                grid(-30.0, 20.0, 5.0),
                fig6_series(),
                vec![Metric::Rate, Metric::RateLower, Metric::RateUpper],
                1_000_000,
            );
            s.topology.sd_distance = 500.0;
            s
        }
        "fig7" => base(
            SweepVar::Rho,
            grid(0.0, 1.0, 0.1),
            by_n(&[2, 4, 6, 8], 32),
            vec![Metric::RateUbImperfectCsi],
            1_000_000,
        ),
        "fig8" => base(
            SweepVar::GammaBarDb,
            grid(-70.0, -20.0, 2.0),
            by_n(&[1, 2, 4, 6, 8], 32),
            vec![Metric::Ser],
            10_000_000,
        ),
        "fig9" => {
            let mut series = by_n(&[2, 2, 2], 0);
            for (s, l) in series.iter_mut().zip([16, 32, 64]) {
                s.elements = Some(l);
                s.label = format!("N=2 L={l}");
            }
            series.push(SeriesSpec {
                label: "direct".into(),
                n_irs: Some(0),
                ..SeriesSpec::default()
            });
            base(
                SweepVar::GammaBarDb,
                grid(-70.0, 30.0, 2.0),
                series,
                vec![Metric::Ser],
                10_000_000,
            )
        }
        other => return Err(Error::Usage(format!("unknown preset '{other}'"))),
    };
    spec.preset = Some(name.to_string());
    spec.system.modulation = Modulation::Bpsk;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::resolve_points;

    #[test]
    fn every_preset_resolves() {
        for (name, _) in PRESETS {
            let spec = preset(name).unwrap();
            let pts = resolve_points(&spec).unwrap();
            assert_eq!(
                pts.len(),
                spec.series.len() * spec.sweep.grid.len(),
                "{name}"
            );
        }
        assert!(preset("fig1").is_err());
    }

    #[test]
    fn figure_parameters() {
        let f4 = preset("fig4").unwrap();
        let pts = resolve_points(&f4).unwrap();
        let (_, _, p) = &pts[0];
        assert_eq!((p.cfg.n_irs(), p.cfg.elements), (1, 6));
        assert_eq!(
            (p.cfg.h[0].m, p.cfg.g[0].m, p.cfg.direct.m),
            (1.5, 3.0, 3.0)
        );
        assert!((p.gamma_th - 10.0).abs() < 1e-12);
        let f2 = preset("fig2").unwrap();
        let cases: Vec<(usize, usize)> = f2
            .series
            .iter()
            .map(|s| (s.n_irs.unwrap(), s.elements.unwrap()))
            .collect();
        assert_eq!(cases, vec![(2, 32), (6, 32), (2, 64), (8, 32), (2, 128)]);
        assert_eq!(f2.system.gamma_bar_db, -10.0);
        let f6 = resolve_points(&preset("fig6").unwrap()).unwrap();
        let direct_only = &f6[0].2.cfg;
        assert_eq!(direct_only.n_irs(), 0);
        let case5 = f6.iter().find(|(l, _, _)| l.starts_with("case5")).unwrap();
        assert!(!case5.2.cfg.include_direct && case5.2.cfg.n_irs() == 4);
    }

    #[test]
    fn nested_deployments_share_surfaces() {
        let pts = resolve_points(&preset("fig3").unwrap()).unwrap();
        let n1 = &pts.iter().find(|(l, _, _)| l == "N=1 L=32").unwrap().2.cfg;
        let n8 = &pts.iter().find(|(l, _, _)| l == "N=8 L=32").unwrap().2.cfg;
        assert_eq!(n1.h[0], n8.h[0]);
        assert_eq!(n1.direct, n8.direct);
    }
}
