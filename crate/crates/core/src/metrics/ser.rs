use super::SerModulation;
use crate::channel::NakagamiParams;
use crate::error::Result;
use crate::quadrature::Integrator;
use crate::snr::{pdf_y, SnrDistribution, YGaussianApprox};
use crate::special::{erfcx, gaussian_q, ln_gamma, q_exp_approx, Q_APPROX_C, Q_APPROX_D};
use std::f64::consts::PI;

/// How [`average_ser`] evaluated the outer expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SerMethod {
    /// Recurrence over u^n moments seeded by erfcx and one 1-D quadrature.
    ClosedForm,
    /// Direct 1-D quadrature over α_u of the closed-form inner expectation.
    OuterQuadrature,
    /// 2-D quadrature over α_u and Ỹ.
    NestedQuadrature,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub value: f64,
    pub method: SerMethod,
}

/// Q-function used inside [`ser_nested_quadrature`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QFunction {
    /// exp(−c x² − d x)/2, the form the closed-form SER is built on.
    Approx,
    Exact,
}

// Relative rounding per operation in the error bound of the recurrences.
const EPS: f64 = 4.0 * f64::EPSILON;
// Accepted relative error of a recurrence result.
const RECURRENCE_TOL: f64 = 1e-8;

/// Average SER E[ω·Q(√(ϑγ̃*))] with Q replaced by exp(−c x² − d x)/2.
///
/// The inner expectation over Ỹ is exact; the outer one over α_u uses a
/// forward recurrence when its running error bound allows it and falls
/// back to quadrature otherwise. The result is clamped to [0, ω/2].
pub fn average_ser(dist: &SnrDistribution, m: &SerModulation) -> Result<SerEstimate> {
    let k = (m.vartheta * dist.gamma_bar()).sqrt();
    let (value, method) = match (dist.direct(), dist.y_approx()) {
        (Some(d), Some(g)) => combined(d, g, k, m.omega)?,
        (None, Some(g)) => {
            let inner = InnerConstants::new(g, k);
            let v = m.omega * 0.5 * inner.ln_pref.exp() * gaussian_q(-2f64.sqrt() * inner.r);
            (v, SerMethod::ClosedForm)
        }
        (Some(d), None) => direct_only(d, k, m.omega)?,
        (None, None) => unreachable!("validated configuration has a direct or reflected path"),
    };
    Ok(SerEstimate {
        value: value.clamp(0.0, 0.5 * m.omega),
        method,
    })
}

/// Constants of the closed-form expectation over Ỹ:
/// E_Ỹ[Q̃(k(u + Ỹ))] = ½·e^{ln_pref}·e^{−v′u² − u₁u}·Q(√2(su − r)).
struct InnerConstants {
    ln_pref: f64,
    r: f64,
    s: f64,
    v_prime: f64,
    u1: f64,
}

impl InnerConstants {
    fn new(g: &YGaussianApprox, k: f64) -> Self {
        let (c, d) = (Q_APPROX_C, Q_APPROX_D);
        let (mu, s2) = (g.mu_y, g.sigma_y2);
        let half_prec = 1.0 / (2.0 * s2);
        let a1 = c * k * k + half_prec;
        let e0 = mu / s2 - d * k;
        // r² − μ²/(2σ²) without cancelling the two large squares.
        let shift = (d * d * k * k - 4.0 * half_prec * mu * (d * k + c * k * k * mu)) / (4.0 * a1);
        InnerConstants {
            ln_pref: g.psi.ln() - 0.5 * (2.0 * s2 * a1).ln() + shift,
            r: e0 / (2.0 * a1.sqrt()),
            s: c * k * k / a1.sqrt(),
            v_prime: c * k * k * half_prec / a1,
            u1: (d * k * half_prec + c * k * k * mu / s2) / a1,
        }
    }
}

fn ln_nakagami_const(d: &NakagamiParams) -> f64 {
    d.m * d.m.ln() - ln_gamma(d.m) - d.m * d.xi.ln()
}

fn combined(
    d: &NakagamiParams,
    g: &YGaussianApprox,
    k: f64,
    omega: f64,
) -> Result<(f64, SerMethod)> {
    let ic = InnerConstants::new(g, k);
    let v1 = ic.v_prime + d.m / d.xi;
    let ln_pref = omega.ln() + ln_nakagami_const(d) + ic.ln_pref;
    let p = 2.0 * d.m - 1.0;
    let g_n = if p == p.round() {
        match g_recurrence(p as usize, v1, ic.u1, ic.r, ic.s)? {
            Some(v) => return Ok((ln_pref.exp() * v, SerMethod::ClosedForm)),
            None => g_quadrature(p, v1, ic.u1, ic.r, ic.s)?,
        }
    } else {
        g_quadrature(p, v1, ic.u1, ic.r, ic.s)?
    };
    Ok((ln_pref.exp() * g_n, SerMethod::OuterQuadrature))
}

/// Breakpoints at the natural scales of e^{−v u² − u₁u}.
fn scale_points(v: f64, u1: f64, extra: &[f64]) -> Vec<f64> {
    let w = 1.0 / (u1 + v.sqrt());
    let mut pts: Vec<f64> = [0.0, 0.5 * w, 2.0 * w, 8.0 * w]
        .into_iter()
        .chain(extra.iter().copied().filter(|x| *x > 0.0 && x.is_finite()))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// G_p = ∫₀^∞ u^p e^{−v₁u² − u₁u} Q(√2(su − r)) du by quadrature.
fn g_quadrature(p: f64, v1: f64, u1: f64, r: f64, s: f64) -> Result<f64> {
    let f = |u: f64| {
        let lu = if p == 0.0 { 0.0 } else { p * u.ln() };
        (lu - v1 * u * u - u1 * u).exp() * gaussian_q(2f64.sqrt() * (s * u - r))
    };
    let mode = if p > 0.0 {
        (-u1 + (u1 * u1 + 8.0 * v1 * p).sqrt()) / (4.0 * v1)
    } else {
        0.0
    };
    let pts = scale_points(v1, u1, &[mode, 2.0 * mode, r / s]);
    Ok(Integrator::new(1e-300, 1e-11)
        .integrate_points_to_infinity(f, &pts)?
        .value)
}

/// Forward recurrence 2v₁G_{j+1} = jG_{j−1} − u₁G_j + δ_{j0}Q(−√2r) − (s/√π)H_j
/// with H_j = ∫₀^∞ u^j e^{−v₁u² − u₁u − (su − r)²} du. Returns `None` when
/// the propagated error bound exceeds the tolerance.
fn g_recurrence(n: usize, v1: f64, u1: f64, r: f64, s: f64) -> Result<Option<f64>> {
    let v2 = v1 + s * s;
    let beta = 0.5 * (u1 - 2.0 * s * r);
    let root = v2.sqrt();
    let h0 = if beta >= 0.0 {
        0.5 * (PI / v2).sqrt() * (-r * r).exp() * erfcx(beta / root)
    } else {
        0.5 * (PI / v2).sqrt() * (beta * beta / v2 - r * r).exp() * libm::erfc(beta / root)
    };
    let er = (-r * r).exp();
    let mut h = vec![h0];
    let mut eh = vec![EPS * h0];
    for i in 1..n.max(1) {
        let (val, err) = if i == 1 {
            let val = (er - 2.0 * beta * h0) / (2.0 * v2);
            let err =
                (2.0 * beta.abs() * eh[0] + EPS * (er + (2.0 * beta * h0).abs())) / (2.0 * v2);
            (val, err)
        } else {
            let a = (i - 1) as f64 * h[i - 2];
            let b = 2.0 * beta * h[i - 1];
            let val = (a - b) / (2.0 * v2);
            let err = ((i - 1) as f64 * eh[i - 2]
                + 2.0 * beta.abs() * eh[i - 1]
                + EPS * (a.abs() + b.abs()))
                / (2.0 * v2);
            (val, err)
        };
        h.push(val);
        eh.push(err);
    }

    let g0_points = scale_points(v1, u1, &[r / s]);
    let g0 = Integrator::new(1e-300, 1e-13).integrate_points_to_infinity(
        |u| (-v1 * u * u - u1 * u).exp() * gaussian_q(2f64.sqrt() * (s * u - r)),
        &g0_points,
    )?;
    let q0 = gaussian_q(-2f64.sqrt() * r);
    let c = s / PI.sqrt();
    let (mut g_prev, mut e_prev) = (0.0, 0.0);
    let (mut g_cur, mut e_cur) = (g0.value, g0.abs_error + EPS * g0.value);
    for j in 0..n {
        let t_prev = j as f64 * g_prev;
        let t_cur = u1 * g_cur;
        let t_q = if j == 0 { q0 } else { 0.0 };
        let t_h = c * h[j];
        let next = (t_prev - t_cur + t_q - t_h) / (2.0 * v1);
        let err = (j as f64 * e_prev
            + u1 * e_cur
            + c * eh[j]
            + EPS * (t_prev.abs() + t_cur.abs() + t_q + t_h.abs()))
            / (2.0 * v1);
        (g_prev, e_prev) = (g_cur, e_cur);
        (g_cur, e_cur) = (next, err);
    }
    if g_cur > 0.0 && e_cur <= RECURRENCE_TOL * g_cur {
        Ok(Some(g_cur))
    } else {
        Ok(None)
    }
}

/// ω·m^m/(Γ(m)ξ^m)·∫₀^∞ u^{2m−1} e^{−(m/ξ + ck²)u² − dku} du.
fn direct_only(d: &NakagamiParams, k: f64, omega: f64) -> Result<(f64, SerMethod)> {
    let v = d.m / d.xi + Q_APPROX_C * k * k;
    let u1 = Q_APPROX_D * k;
    let pref = (omega.ln() + ln_nakagami_const(d)).exp();
    let p = 2.0 * d.m - 1.0;
    if p == p.round() {
        if let Some(n_p) = n_recurrence(p as usize, v, 0.5 * u1) {
            return Ok((pref * n_p, SerMethod::ClosedForm));
        }
    }
    let f = |u: f64| {
        let lu = if p == 0.0 { 0.0 } else { p * u.ln() };
        (lu - v * u * u - u1 * u).exp()
    };
    let mode = (-u1 + (u1 * u1 + 8.0 * v * p).sqrt()) / (4.0 * v);
    let pts = scale_points(v, u1, &[mode, 2.0 * mode]);
    let val = Integrator::new(1e-300, 1e-11)
        .integrate_points_to_infinity(f, &pts)?
        .value;
    Ok((pref * val, SerMethod::OuterQuadrature))
}

/// N_n = ∫₀^∞ uⁿ e^{−vu² − 2βu} du by forward recurrence.
fn n_recurrence(n: usize, v: f64, beta: f64) -> Option<f64> {
    let n0 = 0.5 * (PI / v).sqrt() * erfcx(beta / v.sqrt());
    let (mut prev, mut e_prev) = (0.0, 0.0);
    let (mut cur, mut e_cur) = (n0, EPS * n0);
    for i in 1..=n {
        let a = if i == 1 { 1.0 } else { (i - 1) as f64 * prev };
        let b = 2.0 * beta * cur;
        let next = (a - b) / (2.0 * v);
        let err = ((i - 1) as f64 * e_prev + 2.0 * beta.abs() * e_cur + EPS * (a.abs() + b.abs()))
            / (2.0 * v);
        (prev, e_prev) = (cur, e_cur);
        (cur, e_cur) = (next, err);
    }
    (cur > 0.0 && e_cur <= RECURRENCE_TOL * cur).then_some(cur)
}

/// E[ω·Q(k(α_u + Ỹ))] by nested adaptive quadrature, with the approximate
/// or the exact Q-function. Independent of the closed-form path.
pub fn ser_nested_quadrature(
    dist: &SnrDistribution,
    m: &SerModulation,
    q: QFunction,
) -> Result<f64> {
    let k = (m.vartheta * dist.gamma_bar()).sqrt();
    let qf = |x: f64| match q {
        QFunction::Approx => q_exp_approx(x).unwrap_or(0.5),
        QFunction::Exact => gaussian_q(x),
    };
    let near_zero = [0.5 / k, 2.0 / k, 8.0 / k];
    let inner = |u: f64, g: &YGaussianApprox| -> Result<f64> {
        let s = g.sigma_y();
        let mut pts: Vec<f64> = near_zero
            .iter()
            .copied()
            .chain([g.mu_y - 6.0 * s, g.mu_y - 2.0 * s, g.mu_y, g.mu_y + 6.0 * s])
            .filter(|x| *x > 0.0 && x.is_finite())
            .collect();
        pts.push(0.0);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(Integrator::new(1e-300, 1e-10)
            .integrate_points_to_infinity(|y| pdf_y(y, g) * qf(k * (u + y)), &pts)?
            .value)
    };
    let value = match (dist.direct(), dist.y_approx()) {
        (None, Some(g)) => inner(0.0, g)?,
        (Some(d), y) => {
            let mode = ((2.0 * d.m - 1.0).max(0.0) / (2.0 * d.m) * d.xi).sqrt();
            let sd = d.xi.sqrt();
            let mut pts: Vec<f64> = near_zero
                .iter()
                .copied()
                .chain([
                    0.25 * mode,
                    0.5 * mode,
                    mode,
                    mode + 2.0 * sd,
                    mode + 6.0 * sd,
                ])
                .filter(|x| *x > 0.0 && x.is_finite())
                .collect();
            pts.push(0.0);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let failed = std::cell::Cell::new(None);
            let outer = |u: f64| {
                let v = match y {
                    Some(g) => inner(u, g).unwrap_or_else(|e| {
                        failed.set(Some(e));
                        0.0
                    }),
                    None => qf(k * u),
                };
                d.pdf(u) * v
            };
            let r = Integrator::new(1e-300, 1e-8).integrate_points_to_infinity(outer, &pts)?;
            if let Some(e) = failed.take() {
                return Err(e);
            }
            r.value
        }
        (None, None) => unreachable!("validated configuration has a direct or reflected path"),
    };
    Ok((m.omega * value).clamp(0.0, 0.5 * m.omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemConfig;

    fn cfg(m_u: f64, n: usize, l: usize, gamma_bar: f64) -> SystemConfig {
        SystemConfig {
            elements: l,
            eta: 0.9,
            direct: NakagamiParams::new(m_u, 1.5).unwrap(),
            h: (0..n)
                .map(|i| NakagamiParams::new(3.0, 3.6 - 2.7 * i as f64).unwrap())
                .collect(),
            g: (0..n)
                .map(|i| NakagamiParams::new(3.0, 1.2 + 6.3 * i as f64).unwrap())
                .collect(),
            gamma_bar,
            include_direct: true,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn closed_form_matches_nested_quadrature() {
        for &(m_u, n, l) in &[
            (3.0, 2, 16),
            (1.0, 1, 2),
            (0.5, 1, 4),
            (2.5, 2, 8),
            (1.7, 1, 3),
        ] {
            for gdb in [-30.0, -15.0, -5.0] {
                let c = cfg(m_u, n, l, crate::db_to_linear(gdb));
                let dist = SnrDistribution::new(&c).unwrap();
                for m in [SerModulation::BPSK, SerModulation::QPSK] {
                    let cf = average_ser(&dist, &m).unwrap();
                    let nq = ser_nested_quadrature(&dist, &m, QFunction::Approx).unwrap();
                    assert!(
                        rel(cf.value, nq) < 1e-6,
                        "m_u={m_u} {gdb} dB {:?} {} {nq}",
                        cf.method,
                        cf.value
                    );
                }
            }
        }
    }

    #[test]
    fn recurrence_is_exercised() {
        let dist = SnrDistribution::new(&cfg(3.0, 1, 2, crate::db_to_linear(-20.0))).unwrap();
        let e = average_ser(&dist, &SerModulation::BPSK).unwrap();
        assert_eq!(e.method, SerMethod::ClosedForm);
        // Non-half-integer shape has no recurrence.
        let dist = SnrDistribution::new(&cfg(1.7, 1, 2, 0.01)).unwrap();
        assert_eq!(
            average_ser(&dist, &SerModulation::BPSK).unwrap().method,
            SerMethod::OuterQuadrature
        );
    }

    #[test]
    fn recurrence_matches_direct_integrals() {
        for &(v1, u1, r, s) in &[
            (0.7, 0.4, 0.3, 0.2),
            (2.0, 1.5, -0.4, 0.9),
            (0.3, 0.05, 2.0, 0.1),
        ] {
            for n in 0..6 {
                let q = g_quadrature(n as f64, v1, u1, r, s).unwrap();
                if let Some(c) = g_recurrence(n, v1, u1, r, s).unwrap() {
                    assert!(rel(c, q) < 1e-8, "n={n} {c} {q}");
                }
            }
        }
        for &(v, beta) in &[(1.0, 0.0), (0.5, 0.3), (2.0, -0.5)] {
            let q = Integrator::new(0.0, 1e-13)
                .integrate_to_infinity(|u| u.powi(3) * (-v * u * u - 2.0 * beta * u).exp(), 0.0)
                .unwrap()
                .value;
            assert!(rel(n_recurrence(3, v, beta).unwrap(), q) < 1e-10);
        }
    }

    #[test]
    fn single_path_cases() {
        let mut c = cfg(2.0, 2, 4, 0.05);
        c.include_direct = false;
        let dist = SnrDistribution::new(&c).unwrap();
        let cf = average_ser(&dist, &SerModulation::QPSK).unwrap().value;
        let nq = ser_nested_quadrature(&dist, &SerModulation::QPSK, QFunction::Approx).unwrap();
        assert!(rel(cf, nq) < 1e-7);

        let mut c = cfg(2.0, 0, 1, 0.5);
        c.elements = 0;
        let dist = SnrDistribution::new(&c).unwrap();
        let cf = average_ser(&dist, &SerModulation::BPSK).unwrap().value;
        let nq = ser_nested_quadrature(&dist, &SerModulation::BPSK, QFunction::Approx).unwrap();
        assert!(rel(cf, nq) < 1e-7);
    }

    #[test]
    fn bounded_and_decreasing_in_snr() {
        let c = cfg(3.0, 2, 16, 1.0);
        let dist = SnrDistribution::new(&c).unwrap();
        let tiny = average_ser(&dist.with_gamma_bar(1e-12), &SerModulation::BPSK)
            .unwrap()
            .value;
        assert!(tiny <= 0.5 + 1e-3 && tiny > 0.49);
        let mut last = 1.0;
        for i in 0..12 {
            let gb = crate::db_to_linear(-40.0 + 3.0 * i as f64);
            let v = average_ser(&dist.with_gamma_bar(gb), &SerModulation::BPSK)
                .unwrap()
                .value;
            assert!(v > 0.0 && v < last, "{i}: {v}");
            last = v;
        }
    }

    #[test]
    fn approximation_overestimates_exact_q() {
        // exp(−0.374x² − 0.777x)/2 exceeds Q(x) in the tail, so the SER
        // built on it sits above the exact-Q expectation once the SNR is high.
        let dist = SnrDistribution::new(&cfg(3.0, 2, 16, crate::db_to_linear(-15.0))).unwrap();
        let approx = ser_nested_quadrature(&dist, &SerModulation::BPSK, QFunction::Approx).unwrap();
        let exact = ser_nested_quadrature(&dist, &SerModulation::BPSK, QFunction::Exact).unwrap();
        assert!(approx > exact);
    }
}
