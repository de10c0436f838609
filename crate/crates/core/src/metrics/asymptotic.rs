use super::SerModulation;
use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::snr::ProductChannelParams;
use crate::special::{gauss_2f1_with, ln_gamma, Tolerances};
use std::f64::consts::PI;

/// G_d = Σₙ L·min(m_h, m_g) + m_u, the high-SNR slope in SNR terms.
pub fn diversity_order(cfg: &SystemConfig) -> f64 {
    if cfg.active_elements() == 0 {
        return cfg.direct.m;
    }
    let reflected: f64 = cfg
        .h
        .iter()
        .zip(&cfg.g)
        .map(|(h, g)| cfg.elements as f64 * h.m.min(g.m))
        .sum();
    reflected
        + if cfg.include_direct {
            cfg.direct.m
        } else {
            0.0
        }
}

fn ln_theta_n(p: &ProductChannelParams) -> Result<f64> {
    let nu = p.m_l - p.m_s;
    if nu == 0.0 {
        return Err(Error::Unsupported(
            "theta_n needs distinct shapes; equal m_h and m_g give a logarithmic singularity"
                .into(),
        ));
    }
    Ok(
        p.ln_alpha_prime - 2f64.ln() + ln_gamma(2.0 * p.m_s) + ln_gamma(nu)
            - nu * (0.5 * p.b_n).ln(),
    )
}

/// Coefficient of the leading term θ_n·s^{−2m_s} of the Laplace transform
/// of α_h·α_g as s → ∞.
pub fn theta_n(p: &ProductChannelParams) -> Result<f64> {
    Ok(ln_theta_n(p)?.exp())
}

/// E[e^{−sz}] of the product z = α_h·α_g in closed form, for s > 0.
pub fn product_laplace_transform(s: f64, p: &ProductChannelParams) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain("product_laplace_transform", format!("s={s}")));
    }
    let (mu, nu, b) = (p.m_s + p.m_l, p.m_l - p.m_s, p.b_n);
    let (a2, b2, c2) = (mu + nu, nu + 0.5, mu + 0.5);
    let z = (s - b) / (s + b);
    let tol = Tolerances::new(1e-12, 0.0, 50_000_000)?;
    let f21 = if z >= 0.0 {
        gauss_2f1_with(a2, b2, c2, z, &tol)?
    } else {
        // Pfaff: (1−z)^{−a}·₂F₁(a, c−b; c; z/(z−1)).
        (1.0 - z).powf(-a2) * gauss_2f1_with(a2, c2 - b2, c2, z / (z - 1.0), &tol)?
    };
    let ln = p.ln_alpha_prime
        + 0.5 * PI.ln()
        + nu * (2.0 * b).ln()
        + ln_gamma(mu + nu)
        + ln_gamma(mu - nu)
        - ln_gamma(mu + 0.5)
        - (mu + nu) * (s + b).ln();
    Ok(ln.exp() * f21)
}

/// Constants of P∞ = Ω·Φ(N,L)·(γ_th/γ̄)^{G_d}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticOutage {
    pub g_d: f64,
    /// O_c = Ω·Φ.
    pub o_c: f64,
    pub omega_const: f64,
    pub phi: f64,
    pub ln_omega: f64,
    pub ln_phi: f64,
}

impl AsymptoticOutage {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let g_d = diversity_order(cfg);
        let mut ln_phi = 0.0;
        let active = if cfg.active_elements() > 0 {
            cfg.n_irs()
        } else {
            0
        };
        for (h, g) in cfg.h.iter().zip(&cfg.g).take(active) {
            let p = ProductChannelParams::new(h, g)?;
            ln_phi += cfg.elements as f64 * (ln_theta_n(&p)? - 2.0 * p.m_s * cfg.eta.ln());
        }
        // Leading small-argument coefficient of the direct envelope's
        // Laplace transform, 2m^mΓ(2m)/(Γ(m)ξ^m).
        let ln_k_u = if cfg.include_direct {
            let (m, xi) = (cfg.direct.m, cfg.direct.xi);
            2f64.ln() + m * m.ln() + ln_gamma(2.0 * m) - ln_gamma(m) - m * xi.ln()
        } else {
            0.0
        };
        let ln_omega = ln_k_u - ln_gamma(2.0 * g_d + 1.0);
        Ok(AsymptoticOutage {
            g_d,
            o_c: (ln_omega + ln_phi).exp(),
            omega_const: ln_omega.exp(),
            phi: ln_phi.exp(),
            ln_omega,
            ln_phi,
        })
    }

    pub fn outage(&self, gamma_th: f64, gamma_bar: f64) -> f64 {
        (self.ln_omega + self.ln_phi + self.g_d * (gamma_th / gamma_bar).ln()).exp()
    }
}

/// High-SNR outage Ω·Φ(N,L)·(γ_th/γ̄)^{G_d}.
pub fn asymptotic_outage(
    gamma_th: f64,
    gamma_bar: f64,
    cfg: &SystemConfig,
) -> Result<(f64, AsymptoticOutage)> {
    let a = AsymptoticOutage::new(cfg)?;
    Ok((a.outage(gamma_th, gamma_bar), a))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticSer {
    pub value: f64,
    pub array_gain: f64,
    pub lambda: f64,
    pub g_d: f64,
}

/// High-SNR SER (G_a·γ̄)^{−G_d} with G_a = (ΛΦ)^{−1/G_d}.
pub fn asymptotic_ser(
    gamma_bar: f64,
    cfg: &SystemConfig,
    m: &SerModulation,
) -> Result<AsymptoticSer> {
    let a = AsymptoticOutage::new(cfg)?;
    let g = a.g_d;
    let ln_lambda = m.omega.ln() + (g - 1.0) * 2f64.ln() + ln_gamma(g + 0.5)
        - 0.5 * PI.ln()
        - g * m.vartheta.ln()
        + a.ln_omega;
    let ln_ga = -(ln_lambda + a.ln_phi) / g;
    Ok(AsymptoticSer {
        value: (-g * (ln_ga + gamma_bar.ln())).exp(),
        array_gain: ln_ga.exp(),
        lambda: ln_lambda.exp(),
        g_d: g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NakagamiParams;
    use crate::quadrature::Integrator;
    use crate::snr::product_pdf_exact;
    use crate::special::gaussian_q;

    fn fig4_cfg(n: usize, l: usize) -> SystemConfig {
        SystemConfig {
            elements: l,
            eta: 0.9,
            direct: NakagamiParams::new(3.0, 3.0).unwrap(),
            h: vec![NakagamiParams::new(1.5, 1.2).unwrap(); n],
            g: vec![NakagamiParams::new(3.0, 2.4).unwrap(); n],
            gamma_bar: 1.0,
            include_direct: true,
        }
    }

    fn numerical_mgf(s: f64, p: &ProductChannelParams) -> f64 {
        // The integrand lives on the scale 1/s near the origin.
        let mut pts = vec![0.0, 1.0 / s, 10.0 / s, 100.0 / s, 1.0];
        pts.sort_by(f64::total_cmp);
        Integrator::new(1e-300, 1e-12)
            .integrate_points_to_infinity(|z| (-s * z).exp() * product_pdf_exact(z, p), &pts)
            .unwrap()
            .value
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(diversity_order(&fig4_cfg(1, 6)), 12.0);
        assert_eq!(diversity_order(&fig4_cfg(2, 6)), 21.0);
        let mut d = fig4_cfg(0, 6);
        d.elements = 0;
        assert_eq!(diversity_order(&d), 3.0);
        for (n, l) in [(1, 4), (3, 7)] {
            let mu = 3.0;
            let a = diversity_order(&fig4_cfg(n, l)) - mu;
            let b = diversity_order(&fig4_cfg(2 * n, l)) - mu;
            assert_eq!(b, 2.0 * a);
        }
    }

    #[test]
    fn theta_matches_numerical_mgf() {
        let p = ProductChannelParams::new(
            &NakagamiParams::new(1.5, 1.2).unwrap(),
            &NakagamiParams::new(3.0, 2.4).unwrap(),
        )
        .unwrap();
        let th = theta_n(&p).unwrap();
        for s in [1e3f64, 1e4, 1e5] {
            let asym = th * s.powf(-2.0 * p.m_s);
            let num = numerical_mgf(s, &p);
            assert!((asym - num).abs() < 0.02 * num, "s={s} {asym} {num}");
        }
    }

    #[test]
    fn laplace_closed_form_matches_quadrature() {
        let p = ProductChannelParams::new(
            &NakagamiParams::new(2.0, 0.8).unwrap(),
            &NakagamiParams::new(0.5, 1.7).unwrap(),
        )
        .unwrap();
        for s in [0.3 * p.b_n, p.b_n, 4.0 * p.b_n, 50.0 * p.b_n] {
            let c = product_laplace_transform(s, &p).unwrap();
            let q = numerical_mgf(s, &p);
            assert!((c - q).abs() < 1e-8 * q, "s={s} {c} {q}");
        }
        let th = theta_n(&p).unwrap();
        let s = 1e4 * p.b_n;
        let c = product_laplace_transform(s, &p).unwrap();
        assert!((th * s.powf(-2.0 * p.m_s) - c).abs() < 1e-3 * c);
    }

    #[test]
    fn theta_homogeneity_and_equal_shapes() {
        let base = |xi_h: f64| {
            ProductChannelParams::new(
                &NakagamiParams::new(1.5, xi_h).unwrap(),
                &NakagamiParams::new(3.0, 2.4).unwrap(),
            )
            .unwrap()
        };
        let t1 = theta_n(&base(1.2)).unwrap();
        let t2 = theta_n(&base(1.2 * 5.0)).unwrap();
        assert!((t2 / t1 - 5f64.powf(-1.5)).abs() < 1e-13);
        let eq = ProductChannelParams::new(
            &NakagamiParams::new(2.0, 1.0).unwrap(),
            &NakagamiParams::new(2.0, 1.0).unwrap(),
        )
        .unwrap();
        assert!(matches!(theta_n(&eq), Err(Error::Unsupported(_))));
    }

    #[test]
    fn power_law_slopes() {
        let cfg = fig4_cfg(1, 6);
        let th = 10.0;
        let (p1, a) = asymptotic_outage(th, 1e3, &cfg).unwrap();
        let (p2, _) = asymptotic_outage(th, 1e4, &cfg).unwrap();
        let slope = (p2.ln() - p1.ln()) / (1e4f64.ln() - 1e3f64.ln());
        assert!((slope + a.g_d).abs() < 1e-12 * a.g_d);
        let s1 = asymptotic_ser(1e3, &cfg, &SerModulation::BPSK).unwrap();
        let s2 = asymptotic_ser(1e4, &cfg, &SerModulation::BPSK).unwrap();
        let slope = (s2.value.ln() - s1.value.ln()) / (1e4f64.ln() - 1e3f64.ln());
        assert!((slope + s1.g_d).abs() < 1e-12 * s1.g_d);
        assert!(s1.lambda > 0.0 && s1.array_gain > 0.0);
        assert!((a.o_c - a.omega_const * a.phi).abs() < 1e-12 * a.o_c);
    }

    #[test]
    fn eta_scaling_of_outage() {
        let mut cfg = fig4_cfg(2, 3);
        cfg.eta = 0.4;
        let (p1, _) = asymptotic_outage(1.0, 1e4, &cfg).unwrap();
        cfg.eta = 0.8;
        let (p2, _) = asymptotic_outage(1.0, 1e4, &cfg).unwrap();
        let expected = 2f64.powf(-2.0 * 1.5 * 2.0 * 3.0);
        assert!((p2 / p1 - expected).abs() < 1e-12 * expected);
    }

    /// P(α_u + ηz ≤ x) for one element, by quadrature over z.
    fn exact_cdf_single(x: f64, cfg: &SystemConfig, p: &ProductChannelParams) -> f64 {
        let top = x / cfg.eta;
        Integrator::new(1e-300, 1e-11)
            .integrate(
                |z| product_pdf_exact(z, p) * cfg.direct.cdf(x - cfg.eta * z),
                0.0,
                top,
            )
            .unwrap()
            .value
    }

    #[test]
    fn asymptotes_match_exact_law_at_high_snr() {
        let cfg = fig4_cfg(1, 1);
        let p = ProductChannelParams::new(&cfg.h[0], &cfg.g[0]).unwrap();
        let a = AsymptoticOutage::new(&cfg).unwrap();
        let th = 10.0;
        let mut last_gap = f64::INFINITY;
        for gdb in [30.0, 40.0, 50.0] {
            let gb = crate::db_to_linear(gdb);
            let exact = exact_cdf_single((th / gb).sqrt(), &cfg, &p);
            let gap = (a.outage(th, gb) - exact).abs() / exact;
            assert!(gap < last_gap, "{gdb} dB gap {gap}");
            last_gap = gap;
        }
        assert!(last_gap < 0.05, "{last_gap}");

        // SER: E[ωQ(kR)] = ω∫ F_R(x) k φ(kx) dx with the exact F_R.
        let m = SerModulation::BPSK;
        let gb = crate::db_to_linear(45.0);
        let k = (m.vartheta * gb).sqrt();
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let pts = [0.0, 1.0 / k, 4.0 / k, 12.0 / k];
        let exact = m.omega
            * Integrator::new(1e-300, 1e-9)
                .integrate_points(|x| exact_cdf_single(x, &cfg, &p) * k * phi(k * x), &pts)
                .unwrap()
                .value;
        let asym = asymptotic_ser(gb, &cfg, &m).unwrap().value;
        assert!((asym - exact).abs() < 0.05 * exact, "{asym:e} {exact:e}");
        // The exact value is a tail of Q and must stay below ω/2.
        assert!(exact < m.omega * gaussian_q(0.0));
    }
}
