//! Exact-system simulator: every fading coefficient is drawn, phases are
//! aligned and the resulting SNR samples feed empirical metrics.

use crate::channel::{envelope_sampler, RngStream, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::{ImperfectCsi, SerModulation};
use crate::special::gaussian_q;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use std::io::Write;

/// SNR samples of `n_trials` independent channel realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialBatch {
    pub n_trials: usize,
    pub seed: u64,
    pub gamma_bar: f64,
    pub snr_samples: Vec<f64>,
}

impl TrialBatch {
    /// The same channel draws seen at another average SNR.
    pub fn rescale(&self, gamma_bar: f64) -> TrialBatch {
        let k = gamma_bar / self.gamma_bar;
        TrialBatch {
            gamma_bar,
            snr_samples: self.snr_samples.iter().map(|s| s * k).collect(),
            ..*self
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "snr")?;
        for s in &self.snr_samples {
            writeln!(w, "{s:.12e}")?;
        }
        Ok(())
    }
}

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCi {
    pub value: f64,
    pub half_width_95: f64,
    pub n_trials: usize,
}

impl EstimateWithCi {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.value).abs() <= self.half_width_95
    }
}

const Z95: f64 = 1.959_963_984_540_054;

struct Samplers {
    direct: Option<Gamma<f64>>,
    h: Vec<Gamma<f64>>,
    g: Vec<Gamma<f64>>,
}

impl Samplers {
    fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Samplers {
            direct: cfg.include_direct.then(|| envelope_sampler(&cfg.direct)),
            h: cfg.h.iter().map(envelope_sampler).collect(),
            g: cfg.g.iter().map(envelope_sampler).collect(),
        })
    }
}

fn draw_amplitude<R: Rng + ?Sized>(cfg: &SystemConfig, s: &Samplers, rng: &mut R) -> f64 {
    let mut r = s.direct.map_or(0.0, |d| d.sample(rng).sqrt());
    for (h, g) in s.h.iter().zip(&s.g) {
        for _ in 0..cfg.elements {
            r += cfg.eta * (h.sample(rng) * g.sample(rng)).sqrt();
        }
    }
    r
}

/// One draw of γ* = γ̄(α_u + ΣΣ η α_h α_g)².
pub fn sample_optimal_snr<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Result<f64> {
    let s = Samplers::new(cfg)?;
    let r = draw_amplitude(cfg, &s, rng);
    Ok(cfg.gamma_bar * r * r)
}

/// Circularly-symmetric complex Gaussian with E|e|² = var.
fn complex_normal<R: Rng + ?Sized>(var: f64, rng: &mut R) -> (f64, f64) {
    let sd = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (sd * re, sd * im)
}

fn draw_imperfect<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    s: &Samplers,
    csi: &ImperfectCsi,
    rng: &mut R,
) -> f64 {
    let rho = csi.rho;
    let mut r_hat = 0.0;
    let (mut e_re, mut e_im) = (0.0, 0.0);
    if let Some(d) = s.direct {
        r_hat += d.sample(rng).sqrt();
        let (re, im) = complex_normal(csi.beta_u2, rng);
        e_re += re;
        e_im += im;
    }
    for n in 0..cfg.n_irs() {
        for l in 0..cfg.elements {
            let a_h = s.h[n].sample(rng).sqrt();
            let a_g = s.g[n].sample(rng).sqrt();
            r_hat += cfg.eta * a_h * a_g;
            // Errors are already rotated by the estimated phases; circular
            // symmetry keeps their law unchanged.
            let (hr, hi) = complex_normal(csi.beta_h2[n][l], rng);
            let (gr, gi) = complex_normal(csi.beta_g2[n][l], rng);
            let (pr, pi) = (hr * gr - hi * gi, hr * gi + hi * gr);
            e_re += cfg.eta * (a_h * gr + a_g * hr + rho * pr);
            e_im += cfg.eta * (a_h * gi + a_g * hi + rho * pi);
        }
    }
    let re = r_hat + rho * e_re;
    let im = rho * e_im;
    cfg.gamma_bar * (re * re + im * im)
}

/// One draw of γ̂* = γ̄|R̂ + ρE|² with phases aligned to the estimated
/// channels.
pub fn sample_imperfect_csi_snr<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    csi: &ImperfectCsi,
    rng: &mut R,
) -> Result<f64> {
    csi.validate(cfg)?;
    let s = Samplers::new(cfg)?;
    Ok(draw_imperfect(cfg, &s, csi, rng))
}

fn check_trials(n_trials: usize) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be >= 1".into()));
    }
    Ok(())
}

/// Simulates `n_trials` optimal-SNR draws; trial i uses stream (seed, i), so
/// the batch does not depend on the number of worker threads.
pub fn simulate(cfg: &SystemConfig, n_trials: usize, seed: u64) -> Result<TrialBatch> {
    check_trials(n_trials)?;
    let s = Samplers::new(cfg)?;
    let snr_samples = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| {
            let r = draw_amplitude(cfg, &s, &mut RngStream::new(seed, i));
            cfg.gamma_bar * r * r
        })
        .collect();
    Ok(TrialBatch {
        n_trials,
        seed,
        gamma_bar: cfg.gamma_bar,
        snr_samples,
    })
}

/// Imperfect-CSI counterpart of [`simulate`].
pub fn simulate_imperfect_csi(
    cfg: &SystemConfig,
    csi: &ImperfectCsi,
    n_trials: usize,
    seed: u64,
) -> Result<TrialBatch> {
    check_trials(n_trials)?;
    csi.validate(cfg)?;
    let s = Samplers::new(cfg)?;
    let snr_samples = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| draw_imperfect(cfg, &s, csi, &mut RngStream::new(seed, i)))
        .collect();
    Ok(TrialBatch {
        n_trials,
        seed,
        gamma_bar: cfg.gamma_bar,
        snr_samples,
    })
}

/// Sample mean with a normal-approximation interval.
pub fn mean_estimate(values: &[f64]) -> EstimateWithCi {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    EstimateWithCi {
        value: mean,
        half_width_95: Z95 * (var / n as f64).sqrt(),
        n_trials: n,
    }
}

pub fn empirical_mean_snr(batch: &TrialBatch) -> EstimateWithCi {
    mean_estimate(&batch.snr_samples)
}

/// Fraction of samples at or below `gamma_th`, with the Wilson interval;
/// `value` is the raw fraction and the half-width covers the Wilson bounds.
pub fn empirical_outage(batch: &TrialBatch, gamma_th: f64) -> EstimateWithCi {
    let n = batch.snr_samples.len() as f64;
    let k = batch.snr_samples.iter().filter(|&&s| s <= gamma_th).count() as f64;
    let p = k / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let (lo, hi) = ((centre - half).max(0.0), (centre + half).min(1.0));
    EstimateWithCi {
        value: p,
        half_width_95: (p - lo).max(hi - p),
        n_trials: batch.snr_samples.len(),
    }
}

/// Sample mean of log2(1 + γ*).
pub fn empirical_rate(batch: &TrialBatch) -> EstimateWithCi {
    let v: Vec<f64> = batch
        .snr_samples
        .iter()
        .map(|s| s.ln_1p() / std::f64::consts::LN_2)
        .collect();
    mean_estimate(&v)
}

/// Sample mean of ω·Q(√(ϑγ*)) with the exact Q-function.
pub fn empirical_ser(batch: &TrialBatch, m: &SerModulation) -> EstimateWithCi {
    let v: Vec<f64> = batch
        .snr_samples
        .iter()
        .map(|s| m.omega * gaussian_q((m.vartheta * s).sqrt()))
        .collect();
    mean_estimate(&v)
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(batch: &TrialBatch) -> Self {
        Self::from_samples(batch.snr_samples.clone())
    }

    pub fn from_samples(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        EmpiricalCdf { sorted: samples }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    /// sup |F_n − F| for a continuous F, checked on both sides of every jump.
    pub fn ks_distance<F: FnMut(f64) -> f64>(&self, mut cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Two-sample sup |F_n − G_m| over the pooled jump points.
    pub fn ks_two_sample(&self, other: &EmpiricalCdf) -> f64 {
        self.sorted
            .iter()
            .chain(&other.sorted)
            .map(|&x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}
