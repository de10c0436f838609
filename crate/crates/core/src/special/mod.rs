//! Scalar special functions used by the closed-form expressions.

mod bessel;
mod hypergeometric;
mod incomplete_gamma;

pub use bessel::{bessel_k, bessel_k_scaled, bessel_k_with};
pub use hypergeometric::{gauss_2f1, gauss_2f1_at_one, gauss_2f1_with};
pub use incomplete_gamma::{
    gamma_p, gamma_q, lower_incomplete_gamma, lower_incomplete_gamma_with, upper_incomplete_gamma,
    upper_incomplete_gamma_with,
};

use crate::error::{Error, Result};

/// Convergence controls for series and continued fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_terms: 500,
        }
    }
}

impl Tolerances {
    pub fn new(rel_tol: f64, abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || !(abs_tol >= 0.0) || max_terms < 1 {
            return Err(Error::domain(
                "Tolerances::new",
                format!("rel_tol={rel_tol}, abs_tol={abs_tol}, max_terms={max_terms}"),
            ));
        }
        Ok(Tolerances {
            rel_tol,
            abs_tol,
            max_terms,
        })
    }

    /// Tight settings for internal use where the default rel_tol would
    /// leak into downstream cancellations.
    pub(crate) fn precise() -> Self {
        Tolerances {
            rel_tol: 1e-15,
            abs_tol: 0.0,
            max_terms: 10_000,
        }
    }

    pub(crate) fn converged(&self, term: f64, sum: f64) -> bool {
        term.abs() <= self.rel_tol * sum.abs() || term.abs() <= self.abs_tol
    }
}

/// Gamma function. Poles at zero and the negative integers are errors;
/// other negative arguments are accepted.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if x.is_nan() || (x <= 0.0 && x == x.floor()) {
        return Err(Error::domain("gamma_fn", format!("pole at x={x}")));
    }
    Ok(libm::tgamma(x))
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Gaussian Q function, the standard normal upper tail.
pub fn gaussian_q(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 1.0;
    }
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal CDF, Φ(x) = Q(−x).
pub fn normal_cdf(x: f64) -> f64 {
    gaussian_q(-x)
}

pub const Q_APPROX_C: f64 = 0.374;
pub const Q_APPROX_D: f64 = 0.777;

/// Exponential approximation Q(x) ≈ exp(−c x² − d x)/2 with c = 0.374 and
/// d = 0.777, valid for x ≥ 0.
pub fn q_exp_approx(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("q_exp_approx", format!("x={x} < 0")));
    }
    Ok(0.5 * (-Q_APPROX_C * x * x - Q_APPROX_D * x).exp())
}

/// Scaled complementary error function exp(x²)·erfc(x).
pub fn erfcx(x: f64) -> f64 {
    if x < 0.0 {
        if x < -26.0 {
            return f64::INFINITY;
        }
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 5.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    erfcx_fraction(x)
}

// Laplace continued fraction, evaluated bottom-up:
// erfc(x) e^{x²} √π = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
fn erfcx_fraction(x: f64) -> f64 {
    let mut f = x;
    for k in (1..=60).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    1.0 / (f * std::f64::consts::PI.sqrt())
}

/// Binomial coefficient as f64.
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// n! as f64.
pub fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_fn_values() {
        assert_eq!(gamma_fn(1.0).unwrap(), 1.0);
        assert!((gamma_fn(5.0).unwrap() - 24.0).abs() < 1e-12);
        assert!((gamma_fn(0.5).unwrap() - 1.7724538509055159).abs() < 1e-14);
        assert!((gamma_fn(-0.5).unwrap() + 3.5449077018110318).abs() < 1e-13);
    }

    #[test]
    fn gamma_fn_poles() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-3.0).is_err());
        assert!(gamma_fn(f64::NAN).is_err());
    }

    #[test]
    fn q_function() {
        assert_eq!(gaussian_q(0.0), 0.5);
        assert_eq!(gaussian_q(f64::INFINITY), 0.0);
        assert!((gaussian_q(1.0) - 0.15865525393145705).abs() < 1e-15);
        for i in 0..=160 {
            let x = -8.0 + 0.1 * i as f64;
            assert!((gaussian_q(x) + gaussian_q(-x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn q_approx_values() {
        assert_eq!(q_exp_approx(0.0).unwrap(), 0.5);
        assert!((q_exp_approx(1.0).unwrap() - 0.5 * (-1.151f64).exp()).abs() < 1e-16);
        assert!((q_exp_approx(1.0).unwrap() - 0.158_160_1).abs() < 1e-7);
        assert!((q_exp_approx(2.0).unwrap() - 0.02368).abs() < 1e-5);
        assert!(q_exp_approx(-0.1).is_err());
    }

    #[test]
    fn q_approx_gap_on_unit_range() {
        // Tabulated max gap over [0, 4] is 9.42e-4 near x = 0.21.
        let mut worst: f64 = 0.0;
        for i in 0..=4000 {
            let x = i as f64 * 1e-3;
            worst = worst.max((q_exp_approx(x).unwrap() - gaussian_q(x)).abs());
        }
        assert!(worst <= 0.02, "gap {worst}");
        assert!((worst - 9.4187e-4).abs() < 1e-6, "gap {worst}");
    }

    #[test]
    fn erfcx_matches_direct_and_asymptotic() {
        for &x in &[0.0f64, 0.3, 1.0, 2.5, 4.9] {
            let direct = (x * x).exp() * libm::erfc(x);
            assert!((erfcx(x) - direct).abs() <= 1e-14 * direct);
        }
        // Both branches agree at the switch point.
        let direct = 25f64.exp() * libm::erfc(5.0);
        assert!((erfcx_fraction(5.0) - direct).abs() < 1e-14 * direct);
        // Large-x asymptote 1/(x√π) (1 − 1/(2x²)).
        let x = 1e4;
        let asym = 1.0 / (x * std::f64::consts::PI.sqrt()) * (1.0 - 0.5 / (x * x));
        assert!((erfcx(x) - asym).abs() < 1e-14 * asym);
        assert!((erfcx(-1.0) - (2.0 * 1f64.exp() - erfcx(1.0))).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(5, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(factorial(0), 1.0);
    }

    #[test]
    fn tolerances_validation() {
        assert!(Tolerances::new(0.0, 0.0, 10).is_err());
        assert!(Tolerances::new(1e-8, -1.0, 10).is_err());
        assert!(Tolerances::new(1e-8, 0.0, 0).is_err());
        assert!(Tolerances::new(1e-8, 0.0, 1).is_ok());
    }
}
