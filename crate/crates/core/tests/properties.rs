use irs_core::channel::{NakagamiParams, SystemConfig};
use irs_core::metrics::{
    average_ser, diversity_order, mean_snr, outage_probability, rate_lower, rate_ub_imperfect_csi,
    rate_upper, ImperfectCsi, SerModulation,
};
use irs_core::monte_carlo::simulate;
use irs_core::snr::SnrDistribution;
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = f64> {
    prop_oneof![
        (1u32..=5).prop_map(f64::from),
        (1u32..=12).prop_map(|k| 0.5 + 0.5 * k as f64)
    ]
}

fn link() -> impl Strategy<Value = NakagamiParams> {
    (0.5f64..5.0, -2.0f64..1.0)
        .prop_map(|(m, g)| NakagamiParams::from_gain(m, 10f64.powf(g)).unwrap())
}

prop_compose! {
    fn system()(n in 1usize..=3)(
        h in prop::collection::vec(link(), n),
        g in prop::collection::vec(link(), n),
        m_u in shape(),
        zeta_u in -2.0f64..1.0,
        elements in 1usize..=48,
        eta in 0.1f64..=1.0,
        gamma_bar_db in -30.0f64..20.0,
    ) -> SystemConfig {
        SystemConfig {
            elements,
            eta,
            direct: NakagamiParams::from_gain(m_u, 10f64.powf(zeta_u)).unwrap(),
            h,
            g,
            gamma_bar: 10f64.powf(gamma_bar_db / 10.0),
            include_direct: true,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cdf_is_a_distribution(cfg in system()) {
        let dist = SnrDistribution::new(&cfg).unwrap();
        let (loc, scale) = dist.location_scale();
        let mut last = 0.0;
        for k in -6..=12 {
            let x = (loc + scale * k as f64).max(0.0);
            let f = dist.cdf_r(x).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&f));
            prop_assert!(f >= last - 1e-10, "cdf drops at x={x}: {f} < {last}");
            last = f;
        }
        prop_assert!((dist.cdf_r(loc + 40.0 * scale).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn outage_falls_with_power_and_rises_with_threshold(cfg in system()) {
        let dist = SnrDistribution::new(&cfg).unwrap();
        let (loc, _) = dist.location_scale();
        let th = loc * loc * cfg.gamma_bar;
        let mut last = 1.0 + 1e-12;
        for db in [-10.0, -3.0, 0.0, 3.0, 10.0] {
            let d = dist.with_gamma_bar(cfg.gamma_bar * 10f64.powf(db / 10.0));
            let p = outage_probability(th, &d).unwrap();
            prop_assert!(p <= last + 1e-10);
            last = p;
        }
        prop_assert!(outage_probability(0.5 * th, &dist).unwrap() <= outage_probability(2.0 * th, &dist).unwrap() + 1e-10);
    }

    #[test]
    fn rate_bounds_are_ordered(cfg in system()) {
        let (lo, hi) = (rate_lower(&cfg).unwrap(), rate_upper(&cfg).unwrap());
        prop_assert!(lo >= 0.0 && lo <= hi + 1e-12, "{lo} > {hi}");
        let csi = ImperfectCsi::uniform(0.0, 1.0, &cfg).unwrap();
        prop_assert!((rate_ub_imperfect_csi(&cfg, &csi).unwrap() - hi).abs() <= 1e-12 * hi.max(1.0));
    }

    #[test]
    fn mean_snr_is_linear_in_power(cfg in system(), c in 0.01f64..100.0) {
        let a = mean_snr(&cfg).unwrap();
        let b = mean_snr(&cfg.with_gamma_bar(cfg.gamma_bar * c)).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn ser_is_bounded_and_falls_with_power(cfg in system()) {
        for m in [SerModulation::BPSK, SerModulation::QPSK] {
            let dist = SnrDistribution::new(&cfg).unwrap();
            let lo = average_ser(&dist, &m).unwrap().value;
            let hi = average_ser(&dist.with_gamma_bar(cfg.gamma_bar * 10.0), &m).unwrap().value;
            prop_assert!(lo >= 0.0 && lo <= m.omega / 2.0 + 1e-12);
            prop_assert!(hi <= lo + 1e-12);
        }
    }

    #[test]
    fn diversity_grows_linearly_with_elements(cfg in system()) {
        let g = |l: usize| diversity_order(&cfg.with_elements(l));
        let step = g(2 * cfg.elements) - g(cfg.elements);
        prop_assert!(step > 0.0);
        prop_assert!((g(3 * cfg.elements) - g(2 * cfg.elements) - step).abs() < 1e-9);
        prop_assert!((g(cfg.elements) - step - cfg.direct.m).abs() < 1e-9);
    }

    #[test]
    fn simulation_is_reproducible(cfg in system(), seed in any::<u64>()) {
        let a = simulate(&cfg, 64, seed).unwrap();
        let b = simulate(&cfg, 64, seed).unwrap();
        prop_assert_eq!(a.snr_samples, b.snr_samples);
    }
}
