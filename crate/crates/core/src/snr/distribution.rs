use super::{moment_match_y, normal_interval, pdf_y, r_params, RApproxParams, YGaussianApprox};
use crate::channel::{direct_mean_var, NakagamiParams, SystemConfig};
use crate::error::{Error, Result};
use crate::quadrature::Integrator;
use crate::special::{
    binomial, factorial, gamma_fn, lower_incomplete_gamma, upper_incomplete_gamma,
};

/// How a value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Quadrature,
}

// Rounding budget per unit of summed term magnitude.
const ROUNDING: f64 = 1e-14;

/// Density and distribution of R̃ = α_u + Ỹ and of γ̃* = γ̄R̃².
///
/// With the direct link switched off R̃ = Ỹ; without reflecting elements
/// R̃ = α_u. Closed forms are used when the binomial expansions apply and
/// are well conditioned, adaptive quadrature otherwise.
#[derive(Debug, Clone)]
pub struct SnrDistribution {
    gamma_bar: f64,
    direct: Option<NakagamiParams>,
    y: Option<YGaussianApprox>,
    rp: Option<RApproxParams>,
    allow_fallback: bool,
}

impl SnrDistribution {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let direct = cfg.include_direct.then_some(cfg.direct);
        let y = if cfg.active_elements() > 0 {
            Some(moment_match_y(cfg)?)
        } else {
            None
        };
        let rp = match (&direct, &y) {
            (Some(d), Some(g)) => Some(r_params(d, g)),
            _ => None,
        };
        Ok(SnrDistribution {
            gamma_bar: cfg.gamma_bar,
            direct,
            y,
            rp,
            allow_fallback: true,
        })
    }

    /// Disables the quadrature paths; parameters without a closed form then
    /// yield [`Error::Unsupported`].
    pub fn with_fallback(mut self, allow: bool) -> Self {
        self.allow_fallback = allow;
        self
    }

    pub fn with_gamma_bar(&self, gamma_bar: f64) -> Self {
        SnrDistribution {
            gamma_bar,
            ..self.clone()
        }
    }

    pub fn gamma_bar(&self) -> f64 {
        self.gamma_bar
    }

    pub fn direct(&self) -> Option<&NakagamiParams> {
        self.direct.as_ref()
    }

    pub fn y_approx(&self) -> Option<&YGaussianApprox> {
        self.y.as_ref()
    }

    pub fn r_params(&self) -> Option<&RApproxParams> {
        self.rp.as_ref()
    }

    /// Mean and standard deviation of R̃ (untruncated Ỹ moments), used to
    /// place quadrature breakpoints.
    pub fn location_scale(&self) -> (f64, f64) {
        let (mut mean, mut var) = (0.0, 0.0);
        if let Some(d) = &self.direct {
            let (m, v) = direct_mean_var(d);
            mean += m;
            var += v;
        }
        if let Some(g) = &self.y {
            mean += g.mu_y;
            var += g.sigma_y2;
        }
        (mean, var.sqrt())
    }

    pub fn pdf_r(&self, x: f64) -> Result<f64> {
        Ok(self.pdf_r_eval(x)?.0)
    }

    pub fn pdf_r_eval(&self, x: f64) -> Result<(f64, Method)> {
        if x <= 0.0 || x.is_infinite() {
            let v = match (&self.direct, &self.y) {
                (Some(d), None) if x == 0.0 => d.pdf(0.0),
                (None, Some(g)) if x == 0.0 => pdf_y(0.0, g),
                _ => 0.0,
            };
            return Ok((v, Method::ClosedForm));
        }
        match (&self.direct, &self.y, &self.rp) {
            (Some(d), None, _) => Ok((d.pdf(x), Method::ClosedForm)),
            (None, Some(g), _) => Ok((pdf_y(x, g), Method::ClosedForm)),
            (Some(d), Some(g), Some(rp)) => {
                if is_half_integer(d.m) {
                    if let Some(v) = pdf_closed(x, d, g, rp) {
                        return Ok((v, Method::ClosedForm));
                    }
                }
                self.require_fallback("pdf_r", d)?;
                Ok((pdf_quadrature(x, d, g, rp)?, Method::Quadrature))
            }
            _ => unreachable!("validated configuration has a direct or reflected path"),
        }
    }

    pub fn cdf_r(&self, x: f64) -> Result<f64> {
        Ok(self.cdf_r_eval(x)?.0)
    }

    pub fn cdf_r_eval(&self, x: f64) -> Result<(f64, Method)> {
        if x <= 0.0 {
            return Ok((0.0, Method::ClosedForm));
        }
        if x.is_infinite() {
            return Ok((1.0, Method::ClosedForm));
        }
        match (&self.direct, &self.y, &self.rp) {
            (Some(d), None, _) => Ok((d.cdf(x), Method::ClosedForm)),
            (None, Some(g), _) => Ok((g.cdf(x), Method::ClosedForm)),
            (Some(d), Some(g), Some(rp)) => {
                if d.m == d.m.round() {
                    if let Some(v) = cdf_closed(x, d, g, rp)? {
                        return Ok((v, Method::ClosedForm));
                    }
                }
                self.require_fallback("cdf_r", d)?;
                Ok((cdf_quadrature(x, d, g)?, Method::Quadrature))
            }
            _ => unreachable!("validated configuration has a direct or reflected path"),
        }
    }

    /// f_γ̃*(y) = f_R̃(√(y/γ̄))/(2√(γ̄y)).
    pub fn pdf_snr(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        let x = (y / self.gamma_bar).sqrt();
        Ok(self.pdf_r(x)? / (2.0 * (self.gamma_bar * y).sqrt()))
    }

    pub fn cdf_snr(&self, y: f64) -> Result<f64> {
        if y <= 0.0 {
            return Ok(0.0);
        }
        self.cdf_r((y / self.gamma_bar).sqrt())
    }

    fn require_fallback(&self, what: &str, d: &NakagamiParams) -> Result<()> {
        if self.allow_fallback {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "{what}: no well-conditioned closed form for m_u={} and quadrature fallback is disabled",
                d.m
            )))
        }
    }
}

fn is_half_integer(m: f64) -> bool {
    let t = 2.0 * m;
    t == t.round()
}

/// ∫_L^∞ s^k e^{−s²} ds.
fn j_tail(k: u32, l: f64) -> Result<f64> {
    let h = (k as f64 + 1.0) / 2.0;
    let x = l * l;
    if l >= 0.0 {
        Ok(0.5 * upper_incomplete_gamma(h, x)?)
    } else {
        let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        Ok(0.5 * sign * lower_incomplete_gamma(h, x)? + 0.5 * gamma_fn(h)?)
    }
}

fn pdf_closed(x: f64, d: &NakagamiParams, g: &YGaussianApprox, rp: &RApproxParams) -> Option<f64> {
    let n = (2.0 * d.m).round() as u32 - 1;
    let t = (x - g.mu_y) / rp.q(g);
    let u = rp.a.sqrt() * x - t;
    let (mut sum, mut mag) = (0.0, 0.0);
    for k in 0..=n {
        let c = binomial(n, k) * t.powi((n - k) as i32);
        let (jl, ju) = (j_tail(k, -t).ok()?, j_tail(k, u).ok()?);
        sum += c * (jl - ju);
        mag += c.abs() * (jl.abs() + ju.abs());
    }
    if !(sum > 0.0) || mag * ROUNDING > 1e-9 * sum {
        return None;
    }
    Some(2.0 * (rp.ln_lambda - rp.delta * t * t).exp() * sum)
}

/// 2λ e^{−Δt²} ∫₀^{√a x} w^{2m−1} e^{−(w−t)²} dw with a positive integrand.
fn pdf_quadrature(
    x: f64,
    d: &NakagamiParams,
    g: &YGaussianApprox,
    rp: &RApproxParams,
) -> Result<f64> {
    let t = (x - g.mu_y) / rp.q(g);
    let upper = rp.a.sqrt() * x;
    let p = 2.0 * d.m - 1.0;
    let base = std::f64::consts::LN_2 + rp.ln_lambda - rp.delta * t * t;
    let f = |w: f64| {
        let lw = if p == 0.0 { 0.0 } else { p * w.ln() };
        (base + lw - (w - t) * (w - t)).exp()
    };
    let peak = 0.5 * (t + (t * t + 2.0 * p).sqrt());
    let pts = breakpoints(0.0, upper, &[peak - 3.0, peak, peak + 3.0]);
    Ok(Integrator::new(1e-300, 1e-11)
        .integrate_points(f, &pts)?
        .value)
}

/// Sorted, deduplicated breakpoints inside [lo, hi].
fn breakpoints(lo: f64, hi: f64, inner: &[f64]) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut mid: Vec<f64> = inner
        .iter()
        .copied()
        .filter(|&p| p > lo && p < hi)
        .collect();
    mid.sort_by(f64::total_cmp);
    mid.dedup();
    pts.extend(mid);
    pts.push(hi);
    pts
}

/// ∫_l^∞ t^p e^{−ct²} dt (`upper`), or ∫_{−∞}^l of the same.
fn m_tail(p: u32, l: f64, c: f64, upper: bool) -> Result<f64> {
    let sign_p = if p.is_multiple_of(2) { 1.0 } else { -1.0 };
    if !upper {
        return Ok(sign_p * m_tail(p, -l, c, true)?);
    }
    let h = (p as f64 + 1.0) / 2.0;
    let pre = 0.5 * c.powf(-h);
    let x = c * l * l;
    if l >= 0.0 {
        Ok(pre * upper_incomplete_gamma(h, x)?)
    } else {
        Ok(pre * (gamma_fn(h)? + sign_p * lower_incomplete_gamma(h, x)?))
    }
}

/// Closed-form CDF for integer m_u; `None` when cancellation would eat the
/// requested accuracy.
fn cdf_closed(
    x: f64,
    d: &NakagamiParams,
    g: &YGaussianApprox,
    rp: &RApproxParams,
) -> Result<Option<f64>> {
    let m = d.m.round() as u32;
    let n = 2 * m - 1;
    let q = rp.q(g);
    let l = (x - g.mu_y) / q;
    let c = rp.delta + 1.0;
    let upper = l >= 0.0;
    let (mut acc, mut mag) = (0.0, 0.0);
    for k in 0..=n {
        let p = n - k;
        let b = binomial(n, k);
        if k % 2 == 1 {
            let go = k.div_ceil(2);
            let f = factorial(go - 1);
            for i in 0..go {
                let v = b * f / factorial(i) * m_tail(p + 2 * i, l, c, upper)?;
                acc += v;
                mag += v.abs();
            }
        } else {
            let ge = m - k / 2;
            let h = (k as f64 + 1.0) / 2.0;
            let gk = if l <= 0.0 {
                upper_incomplete_gamma(h, l * l)?
            } else {
                2.0 * gamma_fn(h)? - upper_incomplete_gamma(h, l * l)?
            };
            let f = 0.5 * b * factorial(ge - 1);
            let first_sign = if upper { 1.0 } else { -1.0 };
            for j in 0..ge {
                let scale = f / (factorial(j) * rp.delta.powi((ge - j) as i32));
                let lpow = if j == 0 {
                    1.0
                } else {
                    (2.0 * j as f64 * l.abs().ln()).exp()
                };
                let first = first_sign * scale * lpow * (-rp.delta * l * l).exp() * gk;
                let second = scale * 2.0 * m_tail(2 * j + k, l, c, upper)?;
                acc += first + second;
                mag += first.abs() + second.abs();
            }
        }
    }
    let ql = (q.ln() + rp.ln_lambda).exp();
    let x_part = ql * acc;
    let psi_minus_one = g.psi * g.clipped_mass();
    let correction = truncation_correction(x, d, g)?;
    let (value, err) = if upper {
        (1.0 - x_part + correction, ROUNDING * (ql * mag + 1.0))
    } else {
        (
            x_part - psi_minus_one + correction,
            ROUNDING * (ql * mag + psi_minus_one),
        )
    };
    if !value.is_finite() || err > 1e-9 * value.abs() + 1e-15 {
        return Ok(None);
    }
    Ok(Some(value.clamp(0.0, 1.0)))
}

/// ∫ₓ^∞ f_u(u)[(ψ−1) − ψΦ((x−u−μ)/σ)] du, the mass removed by truncating
/// Ỹ at zero that the untruncated closed form still counts.
fn truncation_correction(x: f64, d: &NakagamiParams, g: &YGaussianApprox) -> Result<f64> {
    if g.psi * g.clipped_mass() < 1e-14 {
        return Ok(0.0);
    }
    let s = g.sigma_y();
    let top = -g.mu_y / s;
    let f = |u: f64| d.pdf(u) * g.psi * normal_interval((x - u - g.mu_y) / s, top);
    let (mean, _) = direct_mean_var(d);
    let sd = d.xi.sqrt();
    let pts = breakpoints(x, x + mean + 10.0 * sd, &[mean, x + s]);
    Ok(Integrator::new(1e-16, 1e-10)
        .integrate_points_to_infinity(f, &pts)?
        .value)
}

/// F(x) = ∫₀ˣ f_u(u) F_Ỹ(x − u) du.
fn cdf_quadrature(x: f64, d: &NakagamiParams, g: &YGaussianApprox) -> Result<f64> {
    let s = g.sigma_y();
    let bottom = -g.mu_y / s;
    let f = |u: f64| d.pdf(u) * g.psi * normal_interval(bottom, (x - u - g.mu_y) / s);
    let (mean, var) = direct_mean_var(d);
    let c = x - g.mu_y;
    let sd = var.sqrt();
    // Dense breakpoints over the direct-link bulk keep the adaptive rule from
    // stepping over it when x sits far in the upper tail.
    let mut inner: Vec<f64> = [-3.0, -1.0, 1.0, 3.0, 6.0, 10.0, 20.0]
        .iter()
        .map(|k| mean + k * sd)
        .collect();
    inner.extend([mean, c - 3.0 * s, c, c + 3.0 * s]);
    let pts = breakpoints(0.0, x, &inner);
    Ok(Integrator::new(1e-300, 1e-11)
        .integrate_points(f, &pts)?
        .value
        .clamp(0.0, 1.0))
}
