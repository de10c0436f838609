use super::YGaussianApprox;
use crate::channel::{direct_mean_var, NakagamiParams};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;
use crate::special::{bessel_k_scaled, ln_gamma};

/// Shapes and scales of one cascaded link α_h·α_g, ordered so m_s ≤ m_l.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductChannelParams {
    pub m_s: f64,
    pub m_l: f64,
    pub xi_s: f64,
    pub xi_l: f64,
    pub alpha_prime: f64,
    pub b_n: f64,
    /// ln α′, finite even when α′ itself overflows.
    pub ln_alpha_prime: f64,
}

impl ProductChannelParams {
    pub fn new(h: &NakagamiParams, g: &NakagamiParams) -> Result<Self> {
        h.validate()?;
        g.validate()?;
        let (s, l) = if h.m <= g.m { (h, g) } else { (g, h) };
        let ratio = s.m * l.m / (s.xi * l.xi);
        let ln_alpha_prime =
            4f64.ln() - ln_gamma(s.m) - ln_gamma(l.m) + 0.5 * (s.m + l.m) * ratio.ln();
        Ok(ProductChannelParams {
            m_s: s.m,
            m_l: l.m,
            xi_s: s.xi,
            xi_l: l.xi,
            alpha_prime: ln_alpha_prime.exp(),
            b_n: 2.0 * ratio.sqrt(),
            ln_alpha_prime,
        })
    }

    pub fn nakagami(&self) -> (NakagamiParams, NakagamiParams) {
        (
            NakagamiParams {
                m: self.m_s,
                xi: self.xi_s,
            },
            NakagamiParams {
                m: self.m_l,
                xi: self.xi_l,
            },
        )
    }

    /// Mean and variance of the product.
    pub fn mean_var(&self) -> (f64, f64) {
        let (s, l) = self.nakagami();
        let mean = direct_mean_var(&s).0 * direct_mean_var(&l).0;
        (mean, self.xi_s * self.xi_l - mean * mean)
    }

    /// E[zⁿ] = E[α_sⁿ]E[α_lⁿ].
    pub fn moment(&self, n: u32) -> f64 {
        let (s, l) = self.nakagami();
        s.moment(n) * l.moment(n)
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        let bx = self.b_n * x;
        let k = bessel_k_scaled(self.m_l - self.m_s, bx).unwrap_or(f64::NAN);
        self.ln_alpha_prime + (self.m_s + self.m_l - 1.0) * x.ln() + k.ln() - bx
    }
}

/// Exact density α′x^{m_s+m_l−1}K_{m_l−m_s}(b_n x) of z = α_h·α_g.
pub fn product_pdf_exact(x: f64, p: &ProductChannelParams) -> f64 {
    if x <= 0.0 || x.is_infinite() {
        return 0.0;
    }
    p.ln_pdf(x).exp()
}

/// KL divergence from the exact product density to its moment-matched
/// one-sided Gaussian, in nats.
pub fn kl_divergence_product(p: &ProductChannelParams) -> Result<f64> {
    let (mean, var) = p.mean_var();
    let g = YGaussianApprox::new(mean, var)?;
    let ln_norm = (g.psi / (2.0 * std::f64::consts::PI * var).sqrt()).ln();
    let f = |x: f64| {
        if x <= 0.0 {
            return 0.0;
        }
        let lf = p.ln_pdf(x);
        if lf == f64::NEG_INFINITY {
            return 0.0;
        }
        let lg = ln_norm - (x - mean) * (x - mean) / (2.0 * var);
        lf.exp() * (lf - lg)
    };
    let sd = var.sqrt();
    let mut pts: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0]
        .iter()
        .map(|k| k * mean)
        .chain([mean + 10.0 * sd])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let r = Integrator::new(1e-13, 1e-10)
        .with_max_intervals(5000)
        .integrate_points_to_infinity(f, &pts)?;
    if r.value < -1e-8 {
        return Err(Error::NumericalValidity(format!(
            "negative KL divergence {}",
            r.value
        )));
    }
    Ok(r.value)
}
