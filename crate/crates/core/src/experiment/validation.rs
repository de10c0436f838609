//! Acceptance suite: closed forms against their oracles and against the
//! simulator, one check per criterion.

use super::{preset, resolve_points};
use crate::channel::{NakagamiParams, RngStream, SystemConfig};
use crate::error::Result;
use crate::metrics::{
    asymptotic_outage, average_ser, diversity_order, outage_probability, power_scaled,
    rate_asymptotic_large_l, rate_lower, rate_ub_imperfect_csi, rate_upper, ser_nested_quadrature,
    ImperfectCsi, QFunction, SerModulation,
};
use crate::monte_carlo::{
    empirical_mean_snr, empirical_rate, empirical_ser, simulate, simulate_imperfect_csi,
    EmpiricalCdf,
};
use crate::quadrature::Integrator;
use crate::snr::{kl_divergence_product, product_pdf_exact, ProductChannelParams, SnrDistribution};
use crate::{db_to_linear, metrics::theta_n};
use rand::Rng;
use serde::Serialize;
use std::fmt;

/// Trial counts; the defaults are the counts the criteria are stated at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub cdf_trials: usize,
    pub rate_trials: usize,
    pub ser_trials: usize,
    pub csi_trials: usize,
    pub random_configs: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            seed: 2024,
            cdf_trials: 100_000,
            rate_trials: 1_000_000,
            ser_trials: 10_000_000,
            csi_trials: 200_000,
            random_configs: 1000,
        }
    }
}

impl ValidationOptions {
    /// Same trial count for every simulation.
    pub fn with_trials(self, n: usize) -> Self {
        ValidationOptions {
            cdf_trials: n,
            rate_trials: n,
            ser_trials: n,
            csi_trials: n,
            ..self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: String,
    pub passed: bool,
    /// Worst observed defect, in the units of `threshold`.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
    /// Fails by construction; the reason is in `detail`.
    pub known_unattainable: bool,
    /// Statistical tolerances were widened because trial counts were
    /// below the stated ones.
    pub reduced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Failures other than the documented unattainable ones.
    pub fn unexpected_failures(&self) -> Vec<&CheckResult> {
        self.checks
            .iter()
            .filter(|c| !c.passed && !c.known_unattainable)
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match (self.passed, self.known_unattainable) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        write!(
            f,
            "{status} [{}] {}: measured {:.4e} vs threshold {:.4e}{}; {}",
            self.id,
            self.name,
            self.measured,
            self.threshold,
            if self.reduced {
                " (reduced trials)"
            } else {
                ""
            },
            self.detail
        )
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn check(
    id: u32,
    name: &str,
    measured: f64,
    threshold: f64,
    passed: bool,
    detail: String,
) -> CheckResult {
    CheckResult {
        id,
        name: name.into(),
        passed,
        measured,
        threshold,
        detail,
        known_unattainable: false,
        reduced: false,
    }
}

fn error_check(id: u32, name: &str, e: crate::Error) -> CheckResult {
    check(id, name, f64::NAN, f64::NAN, false, format!("error: {e}"))
}

fn fig4_config(n: usize) -> SystemConfig {
    let spec = preset("fig4").expect("preset exists");
    let pts = resolve_points(&spec).expect("preset resolves");
    pts.into_iter()
        .find(|(_, _, p)| p.cfg.n_irs() == n)
        .expect("series present")
        .2
        .cfg
}

/// Largest deployment of a preset cut down to `n` surfaces of `l` elements.
fn config_from(name: &str, n: usize, l: usize, gamma_bar_db: f64) -> SystemConfig {
    let spec = preset(name).expect("preset exists");
    let mut cfg = resolve_points(&spec)
        .expect("preset resolves")
        .into_iter()
        .max_by_key(|(_, _, p)| p.cfg.n_irs())
        .expect("preset has points")
        .2
        .cfg;
    cfg.h.truncate(n);
    cfg.g.truncate(n);
    cfg.elements = l;
    cfg.gamma_bar = db_to_linear(gamma_bar_db);
    cfg
}

fn criterion_1() -> Result<CheckResult> {
    let (c1, c2) = (fig4_config(1), fig4_config(2));
    let (g1, g2) = (diversity_order(&c1), diversity_order(&c2));
    let mut worst: f64 = 0.0;
    for cfg in [&c1, &c2] {
        let gd = diversity_order(cfg);
        let pts: Vec<f64> = (0..8).map(|i| 10f64.powf(1.0 + 0.5 * i as f64)).collect();
        for w in pts.windows(2) {
            let (p0, _) = asymptotic_outage(10.0, w[0], cfg)?;
            let (p1, _) = asymptotic_outage(10.0, w[1], cfg)?;
            let slope = (p1.ln() - p0.ln()) / (w[1].ln() - w[0].ln());
            worst = worst.max((slope + gd).abs() / gd);
        }
    }
    let ok = g1 == 12.0 && g2 == 21.0 && worst <= 1e-12;
    Ok(check(
        1,
        "diversity order and asymptotic slope",
        worst,
        1e-12,
        ok,
        format!("G_d = {g1} (N=1) and {g2} (N=2); relative slope error shown"),
    ))
}

fn criterion_2() -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for i in 1..100 {
        let z = i as f64 / 100.0;
        let p = ProductChannelParams::new(
            &NakagamiParams::from_gain(3.0, z)?,
            &NakagamiParams::from_gain(3.0, z)?,
        )?;
        worst = worst.max(kl_divergence_product(&p)?);
    }
    let rel = (worst - 5.2e-2).abs() / 5.2e-2;
    Ok(check(
        2,
        "KL divergence at m=3",
        rel,
        0.15,
        rel < 0.15,
        format!("max over zeta_c in (0,1) = {worst:.6e}; relative deviation from 5.2e-2 shown"),
    ))
}

fn criterion_3(o: &ValidationOptions) -> Result<CheckResult> {
    let stated = 100_000;
    let reduced = o.cdf_trials < stated;
    let threshold = if reduced {
        0.02 + 1.36 / (o.cdf_trials as f64).sqrt()
    } else {
        0.02
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for l in [32, 128] {
        let cfg = config_from("fig2", 2, l, -10.0);
        let dist = SnrDistribution::new(&cfg)?;
        let batch = simulate(&cfg, o.cdf_trials, o.seed)?;
        let mut err = None;
        let ks = EmpiricalCdf::new(&batch).ks_distance(|x| {
            dist.cdf_snr(x).unwrap_or_else(|e| {
                err = Some(e);
                f64::NAN
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        parts.push(format!("L={l}: {ks:.4e}"));
        worst = worst.max(ks);
    }
    let mut c = check(
        3,
        "KS distance cdf_snr vs simulation",
        worst,
        threshold,
        worst < threshold,
        format!(
            "N=2, gamma_bar=-10 dB, {} trials; {}",
            o.cdf_trials,
            parts.join(", ")
        ),
    );
    c.reduced = reduced;
    Ok(c)
}

fn criterion_4(o: &ValidationOptions) -> Result<CheckResult> {
    let stated = 1_000_000;
    let reduced = o.rate_trials < stated;
    let grid: Vec<f64> = (0..15).map(|i| -30.0 + 5.0 * i as f64).collect();
    let mut worst_violation: f64 = 0.0;
    let mut worst_hw: f64 = 0.0;
    for n in [1, 8] {
        let base = config_from("fig5", n, 32, 0.0);
        let batch = simulate(&base, o.rate_trials, o.seed)?;
        for &gdb in &grid {
            let cfg = base.with_gamma_bar(db_to_linear(gdb));
            let (lb, ub) = (rate_lower(&cfg)?, rate_upper(&cfg)?);
            let e = empirical_rate(&batch.rescale(cfg.gamma_bar));
            let slack = if reduced { e.half_width_95 } else { 0.0 };
            let v = (lb - e.value - slack).max(e.value - ub - slack).max(0.0);
            worst_violation = worst_violation.max(v);
            worst_hw = worst_hw.max(e.half_width_95);
        }
    }
    let ok = worst_violation == 0.0 && (reduced || worst_hw < 0.01);
    let mut c = check(
        4,
        "rate sandwich rate_lower <= simulated <= rate_upper",
        worst_violation,
        0.0,
        ok,
        format!(
            "N in {{1,8}}, L=32, 15 points -30..40 dB, {} trials; max CI half-width {worst_hw:.3e} (< 0.01 required)",
            o.rate_trials
        ),
    );
    c.reduced = reduced;
    Ok(c)
}

fn criterion_5() -> Result<CheckResult> {
    let p = NakagamiParams::new(1.0, 1.0)?;
    let example = SystemConfig {
        elements: 1,
        eta: 1.0,
        direct: p,
        h: vec![p],
        g: vec![p],
        gamma_bar: 1.0,
        include_direct: true,
    };
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (label, base) in [
        ("Rayleigh example", example),
        ("fig5 N=2", config_from("fig5", 2, 1, 0.0)),
    ] {
        let limit = rate_asymptotic_large_l(&base, 1.0)?;
        let cfg = power_scaled(&base.with_elements(1024), 1.0);
        let (ub, lb) = (rate_upper(&cfg)?, rate_lower(&cfg)?);
        let gap = (ub - limit).abs().max((lb - limit).abs());
        parts.push(format!("{label}: limit {limit:.6}, gap {gap:.3e}"));
        worst = worst.max(gap);
    }
    Ok(check(
        5,
        "large-L limit under P = P_E/L^2 at L=1024",
        worst,
        0.01,
        worst < 0.01,
        parts.join("; "),
    ))
}

fn criterion_6(o: &ValidationOptions) -> Result<CheckResult> {
    let stated = 10_000_000;
    let reduced = o.ser_trials < stated;
    let mut worst: f64 = 0.0;
    let mut worst_at = String::new();
    let mut worst_exact_q: f64 = 0.0;
    let mut points = 0;
    for l in [16, 32] {
        let base = config_from("fig9", 2, l, 0.0);
        let batch = simulate(&base, o.ser_trials, o.seed)?;
        for (mname, m) in [("BPSK", SerModulation::BPSK), ("QPSK", SerModulation::QPSK)] {
            for i in 0..26 {
                let gdb = -40.0 + 2.0 * i as f64;
                let cfg = base.with_gamma_bar(db_to_linear(gdb));
                let e = empirical_ser(&batch.rescale(cfg.gamma_bar), &m);
                if e.value <= 1e-6 {
                    continue;
                }
                points += 1;
                let dist = SnrDistribution::new(&cfg)?;
                let a = average_ser(&dist, &m)?;
                let slack = if reduced { e.half_width_95 } else { 0.0 };
                let rel = ((a.value - e.value).abs() - slack).max(0.0) / e.value;
                if rel > worst {
                    worst = rel;
                    worst_at = format!(
                        "L={l} {mname} {gdb} dB: closed form {:.4e} ({:?}) vs simulated {:.4e}",
                        a.value, a.method, e.value
                    );
                    let exact_q = ser_nested_quadrature(&dist, &m, QFunction::Exact)?;
                    worst_exact_q = (exact_q - e.value).abs() / e.value;
                }
            }
        }
    }
    let mut c = check(
        6,
        "average_ser vs simulated SER where SER > 1e-6",
        worst,
        0.10,
        worst < 0.10,
        format!(
            "{points} points, {} trials; worst at {worst_at}; same density with exact Q: {worst_exact_q:.3e}. \
             The exponential Q approximation overestimates Q by tens of percent in the tail",
            o.ser_trials
        ),
    );
    c.known_unattainable = true;
    c.reduced = reduced;
    Ok(c)
}

fn cdf_vs_integrated_pdf(cfg: &SystemConfig) -> Result<f64> {
    let dist = SnrDistribution::new(cfg)?;
    let (loc, scale) = dist.location_scale();
    let top = loc + 8.0 * scale;
    let integ = Integrator::new(1e-13, 1e-11);
    let mut worst: f64 = 0.0;
    let mut acc = 0.0;
    let mut prev = 0.0;
    for i in 1..=200 {
        let x = top * i as f64 / 200.0;
        acc += integ
            .integrate_points(
                |t| dist.pdf_r(t).unwrap_or(f64::NAN),
                &[prev, loc.clamp(prev, x), x],
            )?
            .value;
        prev = x;
        worst = worst.max((dist.cdf_r(x)? - acc).abs());
    }
    Ok(worst)
}

fn random_config<R: Rng>(rng: &mut R) -> SystemConfig {
    let n = rng.random_range(1..=4);
    let shape = |r: &mut R| {
        if r.random_bool(0.5) {
            r.random_range(1..=5) as f64
        } else {
            (r.random_range(1.0f64..10.0) * 2.0).round() / 2.0
        }
    };
    let m_u = shape(rng);
    let gain = |r: &mut R| 10f64.powf(r.random_range(-2.0..1.0));
    let ps = |r: &mut R| -> Vec<NakagamiParams> {
        (0..n)
            .map(|_| {
                let m = r.random_range(0.5..5.0);
                NakagamiParams::from_gain(m, gain(r)).unwrap()
            })
            .collect()
    };
    let h = ps(rng);
    let g = ps(rng);
    SystemConfig {
        elements: rng.random_range(1..=64),
        eta: rng.random_range(0.1..=1.0),
        direct: NakagamiParams::from_gain(m_u, gain(rng)).unwrap(),
        h,
        g,
        gamma_bar: db_to_linear(rng.random_range(-30.0..20.0)),
        include_direct: true,
    }
}

fn criterion_7(o: &ValidationOptions) -> Result<CheckResult> {
    let mut cdf_worst: f64 = 0.0;
    let cdf_cfgs = [
        config_from("fig2", 2, 32, -10.0),
        config_from("fig2", 2, 128, -10.0),
        fig4_config(1),
        fig4_config(2),
    ];
    for cfg in &cdf_cfgs {
        cdf_worst = cdf_worst.max(cdf_vs_integrated_pdf(cfg)?);
    }

    let s = 1e4;
    let cfg4 = fig4_config(1);
    let p = ProductChannelParams::new(&cfg4.h[0], &cfg4.g[0])?;
    let mut pts = vec![0.0, 1.0 / s, 10.0 / s, 100.0 / s, 1.0];
    pts.sort_by(f64::total_cmp);
    let mgf = Integrator::new(1e-300, 1e-12)
        .integrate_points_to_infinity(|z| (-s * z).exp() * product_pdf_exact(z, &p), &pts)?
        .value;
    let theta_err = (theta_n(&p)? * s.powf(-2.0 * p.m_s) - mgf).abs() / mgf;

    let mut rng = RngStream::new(o.seed, 7);
    let mut ser_worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 20 {
        let mut cfg = random_config(&mut rng);
        cfg.elements = cfg.elements.min(16);
        let dist = SnrDistribution::new(&cfg)?;
        for m in [SerModulation::BPSK, SerModulation::QPSK] {
            let closed = average_ser(&dist, &m)?.value;
            let nested = ser_nested_quadrature(&dist, &m, QFunction::Approx)?;
            if nested > 1e-300 {
                ser_worst = ser_worst.max((closed - nested).abs() / nested);
            }
        }
        tested += 1;
    }
    let measured = (cdf_worst / 1e-6)
        .max(theta_err / 0.02)
        .max(ser_worst / 0.01);
    Ok(check(
        7,
        "closed form vs quadrature gates",
        measured,
        1.0,
        measured < 1.0,
        format!(
            "cdf_r vs integrated pdf_r {cdf_worst:.3e} (< 1e-6); theta_n at s=1e4 {theta_err:.3e} (< 2e-2); \
             average_ser vs nested quadrature on 20 random configs {ser_worst:.3e} (< 1e-2); measured is the largest defect/limit ratio"
        ),
    ))
}

fn criterion_8(o: &ValidationOptions) -> Result<CheckResult> {
    let stated = 200_000;
    let reduced = o.csi_trials < stated;
    let mut eq_worst: f64 = 0.0;
    let mut mc_worst: f64 = 0.0;
    for n in [2, 8] {
        let cfg = config_from("fig7", n, 32, -10.0);
        let csi = ImperfectCsi::uniform(0.0, 1.0, &cfg)?;
        eq_worst = eq_worst.max((rate_ub_imperfect_csi(&cfg, &csi)? - rate_upper(&cfg)?).abs());
        for rho in [0.5, 1.0] {
            let csi = csi.with_rho(rho);
            let b = simulate_imperfect_csi(&cfg, &csi, o.csi_trials, o.seed)?;
            let e = empirical_mean_snr(&b);
            let exact = crate::metrics::mean_snr_imperfect_csi(&cfg, &csi)?;
            let slack = if reduced { e.half_width_95 } else { 0.0 };
            mc_worst = mc_worst.max(((e.value - exact).abs() - slack).max(0.0) / exact);
        }
    }
    let ok = eq_worst <= 1e-12 && mc_worst < 0.02;
    let mut c = check(
        8,
        "imperfect CSI bound",
        mc_worst,
        0.02,
        ok,
        format!(
            "rho=0 vs rate_upper {eq_worst:.2e} (<= 1e-12); simulated mean SNR at rho in {{0.5,1}}, N in {{2,8}}, {} trials",
            o.csi_trials
        ),
    );
    c.reduced = reduced;
    Ok(c)
}

fn criterion_9(o: &ValidationOptions) -> Result<CheckResult> {
    let mut norm_worst: f64 = 0.0;
    let integ = Integrator::new(1e-13, 1e-10);
    let cfgs = [
        config_from("fig3", 1, 32, 0.0),
        fig4_config(2),
        config_from("fig2", 2, 128, 0.0),
    ];
    for cfg in &cfgs {
        let dist = SnrDistribution::new(cfg)?;
        let (loc, scale) = dist.location_scale();
        let pts = [0.0, (loc - 4.0 * scale).max(0.0), loc, loc + 4.0 * scale];
        let mass = integ
            .integrate_points_to_infinity(|x| dist.pdf_r(x).unwrap_or(f64::NAN), &pts)?
            .value;
        norm_worst = norm_worst.max((mass - 1.0).abs());
        let y = dist.y_approx().expect("surfaces present");
        let ymass = integ
            .integrate_points_to_infinity(|x| y.pdf(x), &[0.0, y.mu_y.max(0.0)])?
            .value;
        norm_worst = norm_worst.max((ymass - 1.0).abs());
        let p = ProductChannelParams::new(&cfg.h[0], &cfg.g[0])?;
        let (mean, _) = p.mean_var();
        let pmass = integ
            .integrate_points_to_infinity(|z| product_pdf_exact(z, &p), &[0.0, mean])?
            .value;
        norm_worst = norm_worst.max((pmass - 1.0).abs());
        let d = cfg.direct;
        let dmass = integ
            .integrate_points_to_infinity(|x| d.pdf(x), &[0.0, d.xi.sqrt()])?
            .value;
        norm_worst = norm_worst.max((dmass - 1.0).abs());
    }

    let mut violations = Vec::new();
    let mut rng = RngStream::new(o.seed, 9);
    for i in 0..o.random_configs {
        let cfg = random_config(&mut rng);
        let dist = SnrDistribution::new(&cfg)?;
        let (loc, scale) = dist.location_scale();
        let mut last = -1.0;
        for k in 0..12 {
            let x = (loc + scale * (k as f64 - 6.0)).max(0.0);
            let f = dist.cdf_r(x)?;
            if !(-1e-12..=1.0 + 1e-12).contains(&f) || f < last - 1e-12 {
                violations.push(format!(
                    "config {i}: cdf_r not monotone in [0,1] at x={x:.3e}"
                ));
            }
            last = f;
        }
        let th = loc * loc * cfg.gamma_bar;
        let mut last = 2.0;
        for gdb in [-10.0, -3.0, 0.0, 3.0, 10.0] {
            let d = dist.with_gamma_bar(cfg.gamma_bar * db_to_linear(gdb));
            let p = outage_probability(th, &d)?;
            if p > last + 1e-12 {
                violations.push(format!("config {i}: outage increases with gamma_bar"));
            }
            last = p;
        }
        let (a, b) = (
            outage_probability(0.5 * th, &dist)?,
            outage_probability(2.0 * th, &dist)?,
        );
        if a > b + 1e-12 {
            violations.push(format!("config {i}: outage decreases with gamma_th"));
        }
        if rate_lower(&cfg)? > rate_upper(&cfg)? {
            violations.push(format!("config {i}: rate_lower > rate_upper"));
        }
        let m = SerModulation::BPSK;
        let ser = average_ser(&dist, &m)?.value;
        if !(ser >= 0.0 && ser <= m.omega / 2.0) {
            violations.push(format!("config {i}: SER {ser} outside [0, omega/2]"));
        }
        let dg = diversity_order(&cfg) - cfg.direct.m;
        let mut double = cfg.clone();
        double.h.extend(cfg.h.clone());
        double.g.extend(cfg.g.clone());
        if (diversity_order(&double) - cfg.direct.m - 2.0 * dg).abs() > 1e-12 * dg {
            violations.push(format!("config {i}: diversity order not linear in N"));
        }
    }
    let ok = norm_worst < 1e-6 && violations.is_empty();
    let mut detail = format!(
        "max normalization defect {norm_worst:.3e} (< 1e-6); {} random configs, {} violations",
        o.random_configs,
        violations.len()
    );
    if let Some(v) = violations.first() {
        detail.push_str(&format!("; first: {v}"));
    }
    Ok(check(
        9,
        "normalization, monotonicity and random-config properties",
        norm_worst,
        1e-6,
        ok,
        detail,
    ))
}

/// Runs all nine criteria, in order.
pub fn validate(o: &ValidationOptions) -> ValidationReport {
    let names = [
        "diversity order and asymptotic slope",
        "KL divergence at m=3",
        "KS distance cdf_snr vs simulation",
        "rate sandwich",
        "large-L limit",
        "average_ser vs simulated SER",
        "closed form vs quadrature gates",
        "imperfect CSI bound",
        "normalization and properties",
    ];
    let runs: [&dyn Fn() -> Result<CheckResult>; 9] = [
        &criterion_1,
        &criterion_2,
        &|| criterion_3(o),
        &|| criterion_4(o),
        &criterion_5,
        &|| criterion_6(o),
        &|| criterion_7(o),
        &|| criterion_8(o),
        &|| criterion_9(o),
    ];
    let checks = runs
        .iter()
        .zip(names)
        .enumerate()
        .map(|(i, (f, name))| f().unwrap_or_else(|e| error_check(i as u32 + 1, name, e)))
        .collect();
    ValidationReport { checks }
}
