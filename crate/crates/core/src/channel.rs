//! Nakagami-m links, large-scale fading and topology generation.

use crate::error::{Error, Result};
use crate::special::{gamma_p, ln_gamma};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

/// Shape `m` and scale ξ = m·ζ of a Nakagami-m envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NakagamiParams {
    pub m: f64,
    pub xi: f64,
}

impl NakagamiParams {
    pub fn new(m: f64, xi: f64) -> Result<Self> {
        let p = NakagamiParams { m, xi };
        p.validate()?;
        Ok(p)
    }

    /// Builds the scale from a large-scale gain ζ.
    pub fn from_gain(m: f64, zeta: f64) -> Result<Self> {
        Self::new(m, m * zeta)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.5) || !self.m.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Nakagami shape m={} must be >= 0.5",
                self.m
            )));
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "Nakagami scale xi={} must be > 0",
                self.xi
            )));
        }
        Ok(())
    }

    pub fn zeta(&self) -> f64 {
        self.xi / self.m
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if x == 0.0 && self.m == 0.5 {
                (2.0 / (std::f64::consts::PI * self.xi)).sqrt()
            } else {
                0.0
            };
        }
        let (m, xi) = (self.m, self.xi);
        (std::f64::consts::LN_2 + m * (m / xi).ln() + (2.0 * m - 1.0) * x.ln()
            - ln_gamma(m)
            - m * x * x / xi)
            .exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        gamma_p(self.m, self.m * x * x / self.xi).unwrap_or(f64::NAN)
    }

    pub fn moment(&self, n: u32) -> f64 {
        envelope_moment(self, n)
    }
}

/// E[αⁿ] = Γ(m + n/2)/Γ(m)·(ξ/m)^{n/2}.
pub fn envelope_moment(p: &NakagamiParams, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n == 2 {
        return p.xi;
    }
    let h = n as f64 / 2.0;
    (ln_gamma(p.m + h) - ln_gamma(p.m) + h * (p.xi / p.m).ln()).exp()
}

/// Mean and variance of the envelope.
pub fn direct_mean_var(p: &NakagamiParams) -> (f64, f64) {
    let r = (ln_gamma(p.m + 0.5) - ln_gamma(p.m)).exp();
    let mu = r * (p.xi / p.m).sqrt();
    let var = p.xi * (1.0 - r * r / p.m);
    (mu, var)
}

/// Draws one envelope as the square root of a Gamma(m, ξ/m) power.
pub fn sample_envelope<R: Rng + ?Sized>(p: &NakagamiParams, rng: &mut R) -> f64 {
    envelope_sampler(p).sample(rng).sqrt()
}

pub(crate) fn envelope_sampler(p: &NakagamiParams) -> Gamma<f64> {
    Gamma::new(p.m, p.xi / p.m).expect("validated Nakagami parameters")
}

/// Deterministic random stream keyed by (seed, stream_id).
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Log-distance path loss with log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub d0: f64,
    pub nu: f64,
    pub shadow_sigma_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            d0: 1.0,
            nu: 2.8,
            shadow_sigma_db: 8.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0) || !(self.nu > 0.0) || !(self.shadow_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "path loss model needs d0 > 0, nu > 0, shadow_sigma_db >= 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// (d0/d)^ν · 10^{shadow_db/10}.
pub fn large_scale_gain(d: f64, model: &PathLossModel, shadow_db: f64) -> Result<f64> {
    if !(d >= model.d0) {
        return Err(Error::domain(
            "large_scale_gain",
            format!("distance {d} below reference distance {}", model.d0),
        ));
    }
    Ok((model.d0 / d).powf(model.nu) * 10f64.powf(shadow_db / 10.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub s_pos: [f64; 2],
    pub d_pos: [f64; 2],
    pub irs_pos: Vec<[f64; 2]>,
    pub zeta_su: f64,
    pub zeta_h: Vec<f64>,
    pub zeta_g: Vec<f64>,
}

impl Topology {
    pub fn n_irs(&self) -> usize {
        self.zeta_h.len()
    }

    /// Divides every gain by `reference`, e.g. the mean source–destination
    /// path loss, so that SNRs are quoted relative to that link.
    pub fn normalized(&self, reference: f64) -> Topology {
        Topology {
            zeta_su: self.zeta_su / reference,
            zeta_h: self.zeta_h.iter().map(|z| z / reference).collect(),
            zeta_g: self.zeta_g.iter().map(|z| z / reference).collect(),
            ..self.clone()
        }
    }

    /// Compact `key=value` summary used in CSV headers.
    pub fn describe(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|z| format!("{z:.6e}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        format!(
            "zeta_su={:.6e} zeta_h=[{}] zeta_g=[{}]",
            self.zeta_su,
            list(&self.zeta_h),
            list(&self.zeta_g)
        )
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Places S and D at (∓sd_distance/2, 0) and drops `n_irs` surfaces
/// uniformly on the area_x × area_y rectangle centered at the origin.
/// Every link draws its own shadowing; distances closer than d0 are
/// clamped to d0.
pub fn generate_topology(
    rng: &mut RngStream,
    model: &PathLossModel,
    n_irs: usize,
    area_x: f64,
    area_y: f64,
    sd_distance: f64,
) -> Result<Topology> {
    model.validate()?;
    if !(area_x > 0.0) || !(area_y > 0.0) || !(sd_distance > 0.0) {
        return Err(Error::InvalidConfig(
            "topology area and S-D distance must be positive".into(),
        ));
    }
    let shadow =
        Normal::new(0.0, model.shadow_sigma_db).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let s_pos = [-sd_distance / 2.0, 0.0];
    let d_pos = [sd_distance / 2.0, 0.0];
    let gain =
        |d: f64, rng: &mut RngStream| large_scale_gain(d.max(model.d0), model, shadow.sample(rng));
    let zeta_su = gain(distance(s_pos, d_pos), rng)?;
    let mut irs_pos = Vec::with_capacity(n_irs);
    let mut zeta_h = Vec::with_capacity(n_irs);
    let mut zeta_g = Vec::with_capacity(n_irs);
    for _ in 0..n_irs {
        let p = [
            rng.random_range(-area_x / 2.0..area_x / 2.0),
            rng.random_range(-area_y / 2.0..area_y / 2.0),
        ];
        zeta_h.push(gain(distance(s_pos, p), rng)?);
        zeta_g.push(gain(distance(p, d_pos), rng)?);
        irs_pos.push(p);
    }
    Ok(Topology {
        s_pos,
        d_pos,
        irs_pos,
        zeta_su,
        zeta_h,
        zeta_g,
    })
}

/// Full parameterization of one link.
///
/// `h[n]` is the source-to-IRS-n channel and `g[n]` the IRS-n-to-destination
/// channel; all `elements` of one surface share these parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub elements: usize,
    pub eta: f64,
    pub direct: NakagamiParams,
    pub h: Vec<NakagamiParams>,
    pub g: Vec<NakagamiParams>,
    pub gamma_bar: f64,
    #[serde(default = "default_true")]
    pub include_direct: bool,
}

fn default_true() -> bool {
    true
}

impl SystemConfig {
    /// Builds a configuration with common shapes from a topology.
    pub fn from_topology(
        topo: &Topology,
        m_u: f64,
        m_h: f64,
        m_g: f64,
        elements: usize,
        eta: f64,
        gamma_bar: f64,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            elements,
            eta,
            direct: NakagamiParams::from_gain(m_u, topo.zeta_su)?,
            h: topo
                .zeta_h
                .iter()
                .map(|&z| NakagamiParams::from_gain(m_h, z))
                .collect::<Result<_>>()?,
            g: topo
                .zeta_g
                .iter()
                .map(|&z| NakagamiParams::from_gain(m_g, z))
                .collect::<Result<_>>()?,
            gamma_bar,
            include_direct: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_irs(&self) -> usize {
        self.h.len()
    }

    /// Total number of reflecting elements N·L.
    pub fn total_elements(&self) -> usize {
        self.n_irs() * self.elements
    }

    /// Elements that carry signal; zero when η = 0 switches the surfaces off.
    pub fn active_elements(&self) -> usize {
        if self.eta > 0.0 {
            self.total_elements()
        } else {
            0
        }
    }

    pub fn with_gamma_bar(&self, gamma_bar: f64) -> Self {
        SystemConfig {
            gamma_bar,
            ..self.clone()
        }
    }

    pub fn with_elements(&self, elements: usize) -> Self {
        SystemConfig {
            elements,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.direct.validate()?;
        if self.h.len() != self.g.len() {
            return Err(Error::InvalidConfig(format!(
                "h has {} surfaces but g has {}",
                self.h.len(),
                self.g.len()
            )));
        }
        for p in self.h.iter().chain(&self.g) {
            p.validate()?;
        }
        if self.n_irs() >= 1 && self.elements < 1 {
            return Err(Error::InvalidConfig(
                "elements per IRS must be >= 1 when IRSs are present".into(),
            ));
        }
        if !(self.eta >= 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "reflection amplitude eta={} must lie in [0, 1]",
                self.eta
            )));
        }
        if !(self.gamma_bar > 0.0) || !self.gamma_bar.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "transmit SNR gamma_bar={} must be > 0",
                self.gamma_bar
            )));
        }
        if !self.include_direct && self.active_elements() == 0 {
            return Err(Error::InvalidConfig(
                "no direct link and no reflecting elements".into(),
            ));
        }
        Ok(())
    }

    /// True when 2·m_u is a positive integer.
    pub fn direct_shape_is_half_integer(&self) -> bool {
        let t = 2.0 * self.direct.m;
        t == t.round() && t >= 1.0
    }
}
