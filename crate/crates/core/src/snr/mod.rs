//! Distribution of the optimal end-to-end SNR.
//!
//! The aggregate reflected envelope Y = ΣΣ η α_h α_g is replaced by a
//! one-sided Gaussian Ỹ with matched mean and variance, and the combined
//! envelope R̃ = α_u + Ỹ is characterized exactly.

mod distribution;
mod product;

pub use distribution::{Method, SnrDistribution};
pub use product::{kl_divergence_product, product_pdf_exact, ProductChannelParams};

use crate::channel::{direct_mean_var, NakagamiParams, SystemConfig};
use crate::error::{Error, Result};
use crate::special::{gaussian_q, ln_gamma, normal_cdf};
use std::f64::consts::PI;

/// Moment-matched one-sided Gaussian for the reflected envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YGaussianApprox {
    pub mu_y: f64,
    pub sigma_y2: f64,
    pub psi: f64,
}

impl YGaussianApprox {
    pub fn new(mu_y: f64, sigma_y2: f64) -> Result<Self> {
        if !(mu_y > 0.0) || !(sigma_y2 > 0.0) || !mu_y.is_finite() || !sigma_y2.is_finite() {
            return Err(Error::Degenerate(format!(
                "one-sided Gaussian needs mu_y > 0 and sigma_y2 > 0 (got {mu_y}, {sigma_y2})"
            )));
        }
        let psi = 1.0 / gaussian_q(-mu_y / sigma_y2.sqrt());
        Ok(YGaussianApprox {
            mu_y,
            sigma_y2,
            psi,
        })
    }

    pub fn sigma_y(&self) -> f64 {
        self.sigma_y2.sqrt()
    }

    /// P(Ỹ < 0) before truncation, i.e. (ψ − 1)/ψ, without cancellation.
    pub(crate) fn clipped_mass(&self) -> f64 {
        normal_cdf(-self.mu_y / self.sigma_y())
    }

    pub fn pdf(&self, y: f64) -> f64 {
        pdf_y(y, self)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let s = self.sigma_y();
        (self.psi * normal_interval(-self.mu_y / s, (y - self.mu_y) / s)).min(1.0)
    }
}

/// Per-element mean and variance of η·α_h·α_g.
pub(crate) fn product_mean_var(h: &NakagamiParams, g: &NakagamiParams, eta: f64) -> (f64, f64) {
    let (mh, _) = direct_mean_var(h);
    let (mg, _) = direct_mean_var(g);
    let mean = eta * mh * mg;
    let second = eta * eta * h.xi * g.xi;
    (mean, second - mean * mean)
}

/// Mean and variance of Y by summing the N·L independent products.
pub fn moment_match_y(cfg: &SystemConfig) -> Result<YGaussianApprox> {
    if cfg.active_elements() == 0 {
        return Err(Error::Degenerate(
            "no reflecting elements; only the direct link remains".into(),
        ));
    }
    let l = cfg.elements as f64;
    let (mut mu, mut var) = (0.0, 0.0);
    for (h, g) in cfg.h.iter().zip(&cfg.g) {
        let (m1, v1) = product_mean_var(h, g, cfg.eta);
        mu += l * m1;
        var += l * v1;
    }
    YGaussianApprox::new(mu, var)
}

/// One-sided Gaussian density ψ/√(2πσ²)·exp(−(y−μ)²/(2σ²)) on y ≥ 0.
pub fn pdf_y(y: f64, g: &YGaussianApprox) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    let d = y - g.mu_y;
    g.psi / (2.0 * PI * g.sigma_y2).sqrt() * (-d * d / (2.0 * g.sigma_y2)).exp()
}

/// Constants of the combined envelope density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RApproxParams {
    pub a: f64,
    pub lambda: f64,
    pub delta: f64,
    /// ln λ, kept because λ over/underflows for extreme scales.
    pub ln_lambda: f64,
}

impl RApproxParams {
    /// q = 2σ²√a, the scale of t = (x − μ_Y)/q.
    pub fn q(&self, g: &YGaussianApprox) -> f64 {
        2.0 * g.sigma_y2 * self.a.sqrt()
    }
}

pub fn r_params(direct: &NakagamiParams, g: &YGaussianApprox) -> RApproxParams {
    let (m, xi, s2) = (direct.m, direct.xi, g.sigma_y2);
    let a = m / xi + 1.0 / (2.0 * s2);
    // Δ = (1/(2σ²) − 1/(4aσ⁴))·4σ⁴a reduces to 2σ²a − 1 = 2σ²m/ξ.
    let delta = 2.0 * s2 * m / xi;
    let ln_lambda = m * m.ln() + g.psi.ln()
        - ln_gamma(m)
        - m * xi.ln()
        - m * a.ln()
        - 0.5 * (2.0 * PI * s2).ln();
    RApproxParams {
        a,
        lambda: ln_lambda.exp(),
        delta,
        ln_lambda,
    }
}

/// Φ(b) − Φ(a) for a ≤ b, accurate when both lie deep in one tail.
pub(crate) fn normal_interval(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if b <= 0.0 {
        tail_difference(-b, -a)
    } else if a >= 0.0 {
        tail_difference(a, b)
    } else {
        1.0 - normal_cdf(a) - gaussian_q(b)
    }
}

/// Q(x) − Q(y) for 0 ≤ x ≤ y.
fn tail_difference(x: f64, y: f64) -> f64 {
    let qx = gaussian_q(x);
    if qx == 0.0 {
        return 0.0;
    }
    let qy = gaussian_q(y);
    if qy < 0.5 * qx || x < 1.0 {
        return qx - qy;
    }
    // Q(z) = ½e^{−z²/2}·erfcx(z/√2); the ratio Q(y)/Q(x) is formed in logs.
    use crate::special::erfcx;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let ln_ratio = -0.5 * (y - x) * (y + x) + (erfcx(y * r) / erfcx(x * r)).ln();
    -qx * ln_ratio.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NakagamiParams;
    use crate::quadrature::Integrator;

    fn unit_cfg(n: usize, l: usize) -> SystemConfig {
        let p = NakagamiParams::new(1.0, 1.0).unwrap();
        SystemConfig {
            elements: l,
            eta: 1.0,
            direct: p,
            h: vec![p; n],
            g: vec![p; n],
            gamma_bar: 1.0,
            include_direct: true,
        }
    }

    #[test]
    fn rayleigh_single_element_moments() {
        let g = moment_match_y(&unit_cfg(1, 1)).unwrap();
        assert!((g.mu_y - PI / 4.0).abs() < 1e-15);
        assert!((g.sigma_y2 - (1.0 - PI * PI / 16.0)).abs() < 1e-15);
        assert!(g.psi >= 1.0);
    }

    #[test]
    fn doubling_elements_doubles_moments() {
        let mut cfg = unit_cfg(2, 8);
        cfg.h[1] = NakagamiParams::new(3.0, 0.4).unwrap();
        cfg.g[0] = NakagamiParams::new(1.5, 2.2).unwrap();
        let a = moment_match_y(&cfg).unwrap();
        let b = moment_match_y(&cfg.with_elements(16)).unwrap();
        assert!((b.mu_y - 2.0 * a.mu_y).abs() < 1e-14 * b.mu_y);
        assert!((b.sigma_y2 - 2.0 * a.sigma_y2).abs() < 1e-14 * b.sigma_y2);
        assert!(moment_match_y(&unit_cfg(0, 4)).is_err());
    }

    #[test]
    fn pdf_y_is_normalized() {
        let q = Integrator::new(0.0, 1e-12);
        for &(mu, s2) in &[(0.785, 0.383), (0.1, 4.0), (30.0, 2.0)] {
            let g = YGaussianApprox::new(mu, s2).unwrap();
            let s = s2.sqrt();
            let lo = (mu - 12.0 * s).max(0.0);
            let total = q
                .integrate_points(|y| pdf_y(y, &g), &[0.0, lo.max(0.0), mu, mu + 12.0 * s])
                .unwrap()
                .value;
            assert!((total - 1.0).abs() < 1e-9, "{total}");
            assert_eq!(pdf_y(-1e-9, &g), 0.0);
            let peak = g.psi / (2.0 * PI * s2).sqrt();
            assert!((pdf_y(mu, &g) - peak).abs() < 1e-15 * peak);
            assert!((g.cdf(mu + 40.0 * s) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn r_params_examples() {
        let g = YGaussianApprox::new(1.0, 0.5).unwrap();
        let rp = r_params(&NakagamiParams::new(1.0, 1.0).unwrap(), &g);
        assert_eq!(rp.a, 2.0);
        assert!((rp.delta - 1.0).abs() < 1e-15);
        // Δ from its unsimplified definition.
        let s2 = g.sigma_y2;
        let raw = (1.0 / (2.0 * s2) - 1.0 / (4.0 * rp.a * s2 * s2)) * 4.0 * s2 * s2 * rp.a;
        assert!((raw - rp.delta).abs() < 1e-14);
        // σ² → ∞: a → m/ξ.
        let wide = YGaussianApprox::new(1.0, 1e12).unwrap();
        let p = NakagamiParams::new(2.0, 3.0).unwrap();
        assert!((r_params(&p, &wide).a - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn normal_interval_tails() {
        // Deep lower tail: Φ(−10) − Φ(−10.5) by quadrature of φ.
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        let q = Integrator::new(0.0, 1e-13);
        for &(a, b) in &[
            (-10.5, -10.0),
            (-8.0, -7.999),
            (3.0, 3.2),
            (-0.5, 2.0),
            (12.0, 12.01),
        ] {
            let exact = q.integrate(phi, a, b).unwrap().value;
            let got = normal_interval(a, b);
            assert!(
                (got - exact).abs() <= 1e-11 * exact,
                "({a},{b}) {got} {exact}"
            );
        }
        assert_eq!(normal_interval(1.0, 1.0), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn lambda_is_positive(m in 0.5f64..8.0, xi in 1e-3f64..1e3, mu in 1e-3f64..1e3, s2 in 1e-3f64..1e3) {
                let g = YGaussianApprox::new(mu, s2).unwrap();
                let rp = r_params(&NakagamiParams::new(m, xi).unwrap(), &g);
                prop_assert!(rp.lambda > 0.0 && rp.a > 0.0 && rp.delta > 0.0);
                prop_assert!((rp.delta - (2.0 * s2 * rp.a - 1.0)).abs() <= 1e-9 * rp.delta.max(1.0));
            }
        }
    }
}
