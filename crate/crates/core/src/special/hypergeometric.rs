use super::{gamma_fn, Tolerances};
use crate::error::{Error, Result};

/// Gauss hypergeometric ₂F₁(a, b; c; z) by its power series, z ∈ [0, 1).
///
/// Convergence near z = 1 is slow when c − a − b ≤ 0; raise `max_terms`
/// through [`gauss_2f1_with`] for such arguments.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    gauss_2f1_with(a, b, c, z, &Tolerances::default())
}

pub fn gauss_2f1_with(a: f64, b: f64, c: f64, z: f64, tol: &Tolerances) -> Result<f64> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::domain(
            "gauss_2f1",
            format!("c={c} is a nonpositive integer"),
        ));
    }
    if z == 1.0 {
        return gauss_2f1_at_one(a, b, c);
    }
    if !(0.0..1.0).contains(&z) {
        return Err(Error::domain("gauss_2f1", format!("z={z} outside [0,1)")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..tol.max_terms {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        // Terms eventually decay monotonically; require the ratio bound too.
        let ratio = ((a + nf + 1.0) * (b + nf + 1.0) / ((c + nf + 1.0) * (nf + 2.0)) * z).abs();
        if ratio < 1.0 && tol.converged(term / (1.0 - ratio), sum) {
            return Ok(sum);
        }
    }
    Err(Error::Accuracy {
        what: "gauss_2f1 series",
        estimate: sum,
        error: term,
    })
}

/// Gauss's summation ₂F₁(a, b; c; 1) = Γ(c)Γ(c−a−b)/(Γ(c−a)Γ(c−b)),
/// defined only for c − a − b > 0.
pub fn gauss_2f1_at_one(a: f64, b: f64, c: f64) -> Result<f64> {
    let s = c - a - b;
    if s <= 0.0 {
        return Err(Error::domain(
            "gauss_2f1",
            format!("series diverges at z=1 (c-a-b={s})"),
        ));
    }
    let recip = |x: f64| -> f64 {
        // 1/Γ vanishes at the poles.
        if x <= 0.0 && x == x.floor() {
            0.0
        } else {
            1.0 / libm::tgamma(x)
        }
    };
    Ok(gamma_fn(c)? * gamma_fn(s)? * recip(c - a) * recip(c - b))
}
