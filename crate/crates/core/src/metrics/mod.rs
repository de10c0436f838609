//! Outage, achievable-rate bounds, average SER, high-SNR asymptotics and
//! the imperfect-CSI rate bound.

mod asymptotic;
mod ser;

pub use asymptotic::{
    asymptotic_outage, asymptotic_ser, diversity_order, product_laplace_transform, theta_n,
    AsymptoticOutage, AsymptoticSer,
};
pub use ser::{average_ser, ser_nested_quadrature, QFunction, SerEstimate, SerMethod};

use crate::channel::{direct_mean_var, envelope_moment, SystemConfig};
use crate::error::{Error, Result};
use crate::snr::{moment_match_y, SnrDistribution, YGaussianApprox};
use crate::special::{binomial, gamma_fn, lower_incomplete_gamma, upper_incomplete_gamma};
use serde::{Deserialize, Serialize};

/// Conditional error probability ω·Q(√(ϑγ)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SerModulation {
    pub omega: f64,
    pub vartheta: f64,
}

impl SerModulation {
    pub const BPSK: SerModulation = SerModulation {
        omega: 1.0,
        vartheta: 2.0,
    };
    pub const QPSK: SerModulation = SerModulation {
        omega: 2.0,
        vartheta: 1.0,
    };

    pub fn new(omega: f64, vartheta: f64) -> Result<Self> {
        if !(omega > 0.0) || !(vartheta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "modulation constants must be positive (omega={omega}, vartheta={vartheta})"
            )));
        }
        Ok(SerModulation { omega, vartheta })
    }
}

/// P(γ* ≤ γ_th) under the approximate SNR law.
pub fn outage_probability(gamma_th: f64, dist: &SnrDistribution) -> Result<f64> {
    dist.cdf_snr(gamma_th)
}

/// I(p, t) = 2∫_t^∞ v^p e^{−v²} dv.
fn i_tail(p: u32, t: f64) -> Result<f64> {
    let h = (p as f64 + 1.0) / 2.0;
    if t > 0.0 || p % 2 == 1 {
        // Odd powers: the parts over [t, −t] cancel.
        upper_incomplete_gamma(h, t * t)
    } else {
        Ok(lower_incomplete_gamma(h, t * t)? + gamma_fn(h)?)
    }
}

/// n-th moment of the one-sided Gaussian Ỹ.
pub fn moments_y_truncated(g: &YGaussianApprox, n: u32) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let w = (2.0 * g.sigma_y2).sqrt();
    let t = -g.mu_y / w;
    let mut sum = 0.0;
    for i in 0..=n {
        sum += binomial(n, i) * w.powi((n - i) as i32) * g.mu_y.powi(i as i32) * i_tail(n - i, t)?;
    }
    Ok(g.psi / (2.0 * std::f64::consts::PI.sqrt()) * sum)
}

/// Moments of the direct envelope and of Ỹ feeding the rate expressions.
struct EnvelopeMoments {
    mu_u: f64,
    var_u: f64,
    direct: [f64; 5],
    y: Option<YGaussianApprox>,
    y_trunc: [f64; 5],
}

impl EnvelopeMoments {
    fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let (mut mu_u, mut var_u, mut direct) = (0.0, 0.0, [1.0, 0.0, 0.0, 0.0, 0.0]);
        if cfg.include_direct {
            (mu_u, var_u) = direct_mean_var(&cfg.direct);
            for (n, d) in direct.iter_mut().enumerate() {
                *d = envelope_moment(&cfg.direct, n as u32);
            }
        }
        let mut y_trunc = [1.0, 0.0, 0.0, 0.0, 0.0];
        let y = if cfg.active_elements() > 0 {
            let g = moment_match_y(cfg)?;
            for (n, m) in y_trunc.iter_mut().enumerate() {
                *m = moments_y_truncated(&g, n as u32)?;
            }
            Some(g)
        } else {
            None
        };
        Ok(EnvelopeMoments {
            mu_u,
            var_u,
            direct,
            y,
            y_trunc,
        })
    }

    /// σ_u² + σ_Y² + 2μ_uμ_Y + μ_u² + μ_Y², the second moment with the
    /// untruncated Gaussian.
    fn second(&self) -> f64 {
        let (mu_y, var_y) = self.y.map_or((0.0, 0.0), |g| (g.mu_y, g.sigma_y2));
        self.var_u + var_y + 2.0 * self.mu_u * mu_y + self.mu_u * self.mu_u + mu_y * mu_y
    }

    /// E[R̃⁴] by binomial expansion over independent α_u and Ỹ.
    fn fourth(&self) -> f64 {
        (0..=4u32)
            .map(|n| binomial(4, n) * self.direct[(4 - n) as usize] * self.y_trunc[n as usize])
            .sum()
    }
}

/// E[γ̃*] = γ̄·E[R̃²].
pub fn mean_snr(cfg: &SystemConfig) -> Result<f64> {
    Ok(cfg.gamma_bar * EnvelopeMoments::new(cfg)?.second())
}

/// E[R̃⁴] with the truncated Ỹ moments.
pub fn fourth_moment_r(cfg: &SystemConfig) -> Result<f64> {
    Ok(EnvelopeMoments::new(cfg)?.fourth())
}

/// Jensen upper bound log2(1 + E[γ̃*]).
pub fn rate_upper(cfg: &SystemConfig) -> Result<f64> {
    Ok((1.0 + mean_snr(cfg)?).log2())
}

/// log2(1 + 1/E[1/γ̃*]) with the second-order expansion
/// E[1/γ] ≈ 1/E[γ] + Var[γ]/E[γ]³ = E[R⁴]/(γ̄E[R²]³).
pub fn rate_lower(cfg: &SystemConfig) -> Result<f64> {
    let m = EnvelopeMoments::new(cfg)?;
    let (e2, e4) = (m.second(), m.fourth());
    let inv = e4 / (cfg.gamma_bar * e2.powi(3));
    if !(inv > 0.0) || !inv.is_finite() {
        return Err(Error::NumericalValidity(format!(
            "E[1/gamma] estimate {inv} is not positive"
        )));
    }
    Ok((1.0 + 1.0 / inv).log2())
}

/// Configuration with transmit SNR γ̄_E/L², the power scaling under which
/// the rate stays finite as L grows.
pub fn power_scaled(cfg: &SystemConfig, gamma_e: f64) -> SystemConfig {
    let l = cfg.elements.max(1) as f64;
    cfg.with_gamma_bar(gamma_e / (l * l))
}

/// Large-L limit log2(1 + γ̄_E(Σₙ η E[α_h]E[α_g])²) under power scaling.
pub fn rate_asymptotic_large_l(cfg: &SystemConfig, gamma_e: f64) -> Result<f64> {
    if cfg.n_irs() == 0 {
        return Err(Error::Degenerate(
            "large-L limit needs at least one IRS".into(),
        ));
    }
    let mean: f64 = cfg
        .h
        .iter()
        .zip(&cfg.g)
        .map(|(h, g)| cfg.eta * direct_mean_var(h).0 * direct_mean_var(g).0)
        .sum();
    Ok((1.0 + gamma_e * mean * mean).log2())
}

/// Channel-estimation error model: true channel = estimate + ρ·error with
/// error ~ CN(0, β²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImperfectCsi {
    pub rho: f64,
    pub beta_u2: f64,
    /// `beta_h2[n][l]`
    pub beta_h2: Vec<Vec<f64>>,
    pub beta_g2: Vec<Vec<f64>>,
}

impl ImperfectCsi {
    /// Same error variance on every link.
    pub fn uniform(rho: f64, beta2: f64, cfg: &SystemConfig) -> Result<Self> {
        let grid = vec![vec![beta2; cfg.elements]; cfg.n_irs()];
        let csi = ImperfectCsi {
            rho,
            beta_u2: beta2,
            beta_h2: grid.clone(),
            beta_g2: grid,
        };
        csi.validate(cfg)?;
        Ok(csi)
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        ImperfectCsi {
            rho,
            ..self.clone()
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidConfig(format!(
                "rho={} outside [0, 1]",
                self.rho
            )));
        }
        let shape_ok = |v: &Vec<Vec<f64>>| {
            v.len() == cfg.n_irs() && v.iter().all(|row| row.len() == cfg.elements)
        };
        if !shape_ok(&self.beta_h2) || !shape_ok(&self.beta_g2) {
            return Err(Error::InvalidConfig(
                "error variances must be given for every IRS element".into(),
            ));
        }
        let all = std::iter::once(&self.beta_u2)
            .chain(self.beta_h2.iter().flatten())
            .chain(self.beta_g2.iter().flatten());
        if all.clone().any(|b| !(*b >= 0.0)) {
            return Err(Error::InvalidConfig("error variances must be >= 0".into()));
        }
        Ok(())
    }

    /// E[|E|²] = β_u² + ΣΣ η²(ρ²β_g²β_h² + ξ_hβ_g² + ξ_gβ_h²).
    pub fn error_power(&self, cfg: &SystemConfig) -> f64 {
        let rho2 = self.rho * self.rho;
        let mut sum = if cfg.include_direct {
            self.beta_u2
        } else {
            0.0
        };
        for n in 0..cfg.n_irs() {
            let (xh, xg) = (cfg.h[n].xi, cfg.g[n].xi);
            for l in 0..cfg.elements {
                let (bh, bg) = (self.beta_h2[n][l], self.beta_g2[n][l]);
                sum += cfg.eta * cfg.eta * (rho2 * bg * bh + xh * bg + xg * bh);
            }
        }
        sum
    }
}

/// E[γ̂*] = γ̄(E[R̂²] + ρ²E[|E|²]).
pub fn mean_snr_imperfect_csi(cfg: &SystemConfig, csi: &ImperfectCsi) -> Result<f64> {
    csi.validate(cfg)?;
    Ok(mean_snr(cfg)? + cfg.gamma_bar * csi.rho * csi.rho * csi.error_power(cfg))
}

pub fn rate_ub_imperfect_csi(cfg: &SystemConfig, csi: &ImperfectCsi) -> Result<f64> {
    Ok((1.0 + mean_snr_imperfect_csi(cfg, csi)?).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NakagamiParams;
    use crate::quadrature::Integrator;
    use crate::snr::pdf_y;

    fn cfg(n: usize, l: usize, gamma_bar: f64) -> SystemConfig {
        SystemConfig {
            elements: l,
            eta: 0.9,
            direct: NakagamiParams::new(3.0, 1.5).unwrap(),
            h: (0..n)
                .map(|i| NakagamiParams::new(3.0, 0.5 + 0.7 * i as f64).unwrap())
                .collect(),
            g: (0..n)
                .map(|i| NakagamiParams::new(3.0, 2.0 - 0.3 * i as f64).unwrap())
                .collect(),
            gamma_bar,
            include_direct: true,
        }
    }

    #[test]
    fn truncated_moments_against_quadrature() {
        for &(mu, s2) in &[(0.785, 0.383), (0.3, 2.0), (25.0, 4.0), (0.05, 0.01)] {
            let g = YGaussianApprox::new(mu, s2).unwrap();
            let s = s2.sqrt();
            let pts = [0.0, (mu - 3.0 * s).max(0.0), mu, mu + 3.0 * s];
            for n in 0..=4 {
                let q = Integrator::new(0.0, 1e-13)
                    .integrate_points_to_infinity(|y| y.powi(n) * pdf_y(y, &g), &pts)
                    .unwrap()
                    .value;
                let c = moments_y_truncated(&g, n as u32).unwrap();
                assert!((c - q).abs() < 1e-9 * q, "mu={mu} n={n} {c} {q}");
            }
        }
        let far = YGaussianApprox::new(1e3, 1.0).unwrap();
        assert!((moments_y_truncated(&far, 1).unwrap() - 1e3).abs() < 1e-9);
    }

    #[test]
    fn rayleigh_direct_only_upper_bound() {
        let p = NakagamiParams::new(1.0, 1.0).unwrap();
        let c = SystemConfig {
            elements: 0,
            eta: 1.0,
            direct: p,
            h: vec![],
            g: vec![],
            gamma_bar: 7.0,
            include_direct: true,
        };
        assert!((rate_upper(&c).unwrap() - 3.0).abs() < 1e-14);
        // E[R⁴] = 2 for unit Rayleigh power: R_lb = log2(1 + γ̄/2).
        assert!((rate_lower(&c).unwrap() - 4.5f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn rate_ordering() {
        for gdb in [-30.0, -10.0, 0.0, 20.0] {
            let c = cfg(2, 16, crate::db_to_linear(gdb));
            assert!(rate_lower(&c).unwrap() <= rate_upper(&c).unwrap());
        }
    }

    #[test]
    fn large_l_limit_example() {
        let p = NakagamiParams::new(1.0, 1.0).unwrap();
        let c = SystemConfig {
            elements: 1,
            eta: 1.0,
            direct: p,
            h: vec![p],
            g: vec![p],
            gamma_bar: 1.0,
            include_direct: true,
        };
        let r = rate_asymptotic_large_l(&c, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        assert!((r - (1.0 + pi * pi / 16.0).log2()).abs() < 1e-15);
        assert!((r - 0.693_186_087_334_819_5).abs() < 1e-15);
    }

    #[test]
    fn large_l_convergence() {
        let base = cfg(2, 1, 1.0);
        let limit = rate_asymptotic_large_l(&base, 1.0).unwrap();
        let mut last_gap = f64::INFINITY;
        for k in 1..=10 {
            let c = power_scaled(&base.with_elements(1 << k), 1.0);
            let (ub, lb) = (rate_upper(&c).unwrap(), rate_lower(&c).unwrap());
            let gap = ub - lb;
            assert!(gap <= last_gap + 1e-15);
            last_gap = gap;
            if k == 10 {
                assert!((ub - limit).abs() < 0.01 && (lb - limit).abs() < 0.01);
                assert!(gap < 0.01);
            }
        }
    }

    #[test]
    fn imperfect_csi_reduces_to_perfect() {
        let c = cfg(2, 8, 0.3);
        let csi = ImperfectCsi::uniform(0.0, 1.0, &c).unwrap();
        assert_eq!(
            rate_ub_imperfect_csi(&c, &csi).unwrap(),
            rate_upper(&c).unwrap()
        );
        let mut last = 0.0;
        for rho in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let r = rate_ub_imperfect_csi(&c, &csi.with_rho(rho)).unwrap();
            assert!(r >= last);
            last = r;
        }
        // Error power by hand for a single element with unit variances.
        let one = cfg(1, 1, 1.0);
        let csi = ImperfectCsi::uniform(0.5, 1.0, &one).unwrap();
        let expected = 1.0 + 0.81 * (0.25 + one.h[0].xi + one.g[0].xi);
        assert!((csi.error_power(&one) - expected).abs() < 1e-15);
        assert!(ImperfectCsi::uniform(1.5, 1.0, &one).is_err());
    }

    #[test]
    fn modulation_constants() {
        assert_eq!(SerModulation::BPSK, SerModulation::new(1.0, 2.0).unwrap());
        assert!(SerModulation::new(0.0, 1.0).is_err());
    }
}
