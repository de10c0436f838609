//! Configuration-driven sweeps that evaluate analytic metrics next to their
//! Monte-Carlo counterparts and write them as CSV.

mod presets;
pub mod validation;

pub use presets::{preset, PRESETS};
pub use validation::{validate, CheckResult, ValidationOptions, ValidationReport};

use crate::channel::{
    generate_topology, large_scale_gain, NakagamiParams, PathLossModel, RngStream, SystemConfig,
    Topology,
};
use crate::db_to_linear;
use crate::error::{Error, Result};
use crate::metrics::{
    asymptotic_outage, asymptotic_ser, average_ser, diversity_order, mean_snr, outage_probability,
    rate_asymptotic_large_l, rate_lower, rate_ub_imperfect_csi, rate_upper, ImperfectCsi,
    SerModulation,
};
use crate::monte_carlo::{
    empirical_mean_snr, empirical_outage, empirical_rate, empirical_ser, simulate,
    simulate_imperfect_csi, EstimateWithCi, TrialBatch,
};
use crate::snr::{kl_divergence_product, ProductChannelParams, SnrDistribution};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "gamma_bar_db")]
    GammaBarDb,
    /// Threshold, or evaluation point of pdf/cdf, in dB.
    #[serde(rename = "gamma_th_db")]
    GammaThDb,
    #[serde(rename = "rho")]
    Rho,
    #[serde(rename = "L", alias = "l")]
    L,
    #[serde(rename = "N", alias = "n")]
    N,
    #[serde(rename = "zeta_c")]
    ZetaC,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::GammaBarDb => "gamma_bar_db",
            SweepVar::GammaThDb => "gamma_th_db",
            SweepVar::Rho => "rho",
            SweepVar::L => "L",
            SweepVar::N => "N",
            SweepVar::ZetaC => "zeta_c",
        }
    }
}

/// Metric registry. Each metric has an analytic value, a Monte-Carlo
/// estimate, or both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pdf,
    Cdf,
    Outage,
    OutageAsymptotic,
    Rate,
    RateUpper,
    RateLower,
    RateLargeL,
    Ser,
    SerAsymptotic,
    RateUbImperfectCsi,
    MeanSnr,
    Kl,
    DiversityOrder,
}

impl Metric {
    pub const ALL: [Metric; 14] = [
        Metric::Pdf,
        Metric::Cdf,
        Metric::Outage,
        Metric::OutageAsymptotic,
        Metric::Rate,
        Metric::RateUpper,
        Metric::RateLower,
        Metric::RateLargeL,
        Metric::Ser,
        Metric::SerAsymptotic,
        Metric::RateUbImperfectCsi,
        Metric::MeanSnr,
        Metric::Kl,
        Metric::DiversityOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pdf => "pdf",
            Metric::Cdf => "cdf",
            Metric::Outage => "outage",
            Metric::OutageAsymptotic => "outage_asymptotic",
            Metric::Rate => "rate",
            Metric::RateUpper => "rate_upper",
            Metric::RateLower => "rate_lower",
            Metric::RateLargeL => "rate_large_l",
            Metric::Ser => "ser",
            Metric::SerAsymptotic => "ser_asymptotic",
            Metric::RateUbImperfectCsi => "rate_ub_imperfect_csi",
            Metric::MeanSnr => "mean_snr",
            Metric::Kl => "kl",
            Metric::DiversityOrder => "diversity_order",
        }
    }

    pub fn has_analytic(self) -> bool {
        self != Metric::Rate
    }

    pub fn has_monte_carlo(self) -> bool {
        matches!(
            self,
            Metric::Pdf
                | Metric::Cdf
                | Metric::Outage
                | Metric::Rate
                | Metric::Ser
                | Metric::RateUbImperfectCsi
                | Metric::MeanSnr
        )
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown metric '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn params(self) -> SerModulation {
        match self {
            Modulation::Bpsk => SerModulation::BPSK,
            Modulation::Qpsk => SerModulation::QPSK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub n_irs: usize,
    pub elements: usize,
    pub eta: f64,
    pub m_u: f64,
    pub m_h: f64,
    pub m_g: f64,
    pub include_direct: bool,
    pub gamma_bar_db: f64,
    pub gamma_th_db: f64,
    pub modulation: Modulation,
    /// Channel-estimation quality for the imperfect-CSI metric.
    pub rho: f64,
    /// Estimation-error variance β² of every link, in dB.
    pub beta2_db: f64,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            n_irs: 2,
            elements: 32,
            eta: 0.9,
            m_u: 3.0,
            m_h: 3.0,
            m_g: 3.0,
            include_direct: true,
            gamma_bar_db: -10.0,
            gamma_th_db: 0.0,
            modulation: Modulation::Bpsk,
            rho: 0.0,
            beta2_db: 0.0,
        }
    }
}

/// Either a random placement (seeded) or explicit large-scale gains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub seed: u64,
    pub area_x: f64,
    pub area_y: f64,
    pub sd_distance: f64,
    pub d0: f64,
    pub nu: f64,
    pub shadow_sigma_db: f64,
    /// Divide every gain by the S–D path loss (d0/d_SD)^ν.
    pub normalize: bool,
    pub zeta_su: Option<f64>,
    pub zeta_h: Option<Vec<f64>>,
    pub zeta_g: Option<Vec<f64>>,
}

impl Default for TopologySpec {
    fn default() -> Self {
        let pl = PathLossModel::default();
        TopologySpec {
            seed: 14902,
            area_x: 2000.0,
            area_y: 1000.0,
            sd_distance: 1200.0,
            d0: pl.d0,
            nu: pl.nu,
            shadow_sigma_db: pl.shadow_sigma_db,
            normalize: true,
            zeta_su: None,
            zeta_h: None,
            zeta_g: None,
        }
    }
}

impl TopologySpec {
    fn path_loss(&self) -> PathLossModel {
        PathLossModel {
            d0: self.d0,
            nu: self.nu,
            shadow_sigma_db: self.shadow_sigma_db,
        }
    }

    fn reference(&self) -> f64 {
        if self.normalize {
            (self.d0 / self.sd_distance).powf(self.nu)
        } else {
            1.0
        }
    }

    fn explicit(&self) -> Option<Topology> {
        let (su, h, g) = (self.zeta_su?, self.zeta_h.clone()?, self.zeta_g.clone()?);
        Some(Topology {
            s_pos: [-self.sd_distance / 2.0, 0.0],
            d_pos: [self.sd_distance / 2.0, 0.0],
            irs_pos: Vec::new(),
            zeta_su: su,
            zeta_h: h,
            zeta_g: g,
        })
    }

    /// Realizes gains for `n_irs` surfaces; smaller deployments use the first
    /// surfaces of the largest one.
    pub fn realize(&self, n_irs: usize) -> Result<Topology> {
        if let Some(t) = self.explicit() {
            if t.zeta_h.len() < n_irs || t.zeta_g.len() < n_irs {
                return Err(Error::InvalidConfig(format!(
                    "topology lists {} surfaces but {n_irs} are needed",
                    t.zeta_h.len().min(t.zeta_g.len())
                )));
            }
            return Ok(t);
        }
        if self.zeta_su.is_some() || self.zeta_h.is_some() || self.zeta_g.is_some() {
            return Err(Error::InvalidConfig(
                "explicit topology needs zeta_su, zeta_h and zeta_g together".into(),
            ));
        }
        let mut rng = RngStream::new(self.seed, 0);
        let t = generate_topology(
            &mut rng,
            &self.path_loss(),
            n_irs,
            self.area_x,
            self.area_y,
            self.sd_distance,
        )?;
        Ok(t.normalized(self.reference()))
    }

    /// Shadowing-free gains from explicit S–IRS and IRS–D distances.
    fn realize_distances(&self, dists: &[[f64; 2]]) -> Result<Topology> {
        let pl = self.path_loss();
        let gain = |d: f64| large_scale_gain(d, &pl, 0.0);
        let reference = self.reference();
        Ok(Topology {
            s_pos: [-self.sd_distance / 2.0, 0.0],
            d_pos: [self.sd_distance / 2.0, 0.0],
            irs_pos: Vec::new(),
            zeta_su: gain(self.sd_distance)? / reference,
            zeta_h: dists
                .iter()
                .map(|d| Ok(gain(d[0])? / reference))
                .collect::<Result<_>>()?,
            zeta_g: dists
                .iter()
                .map(|d| Ok(gain(d[1])? / reference))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub grid: Vec<f64>,
}

/// One curve of a figure: overrides applied to [`SystemSpec`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesSpec {
    pub label: String,
    pub n_irs: Option<usize>,
    pub elements: Option<usize>,
    /// Common shape for all links.
    pub m: Option<f64>,
    pub m_h: Option<f64>,
    pub include_direct: Option<bool>,
    /// `[d_SI, d_ID]` per surface in meters; gains then follow the path-loss
    /// law without shadowing.
    pub irs_distances: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub metrics: Vec<Metric>,
    /// Monte-Carlo trials per batch; 0 skips the simulation columns.
    pub n_trials: usize,
    pub seed: u64,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            metrics: vec![Metric::Outage],
            n_trials: 100_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub topology: TopologySpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub series: Vec<SeriesSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentSpec {
    /// Parses TOML. A `preset` key starts from that preset and every other
    /// top-level section in the file replaces the preset's section.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let merged = match file.get("preset") {
            Some(toml::Value::String(name)) => {
                let base = preset(name)?;
                let mut table = toml::Table::try_from(&base)
                    .map_err(|e| Error::InvalidConfig(e.to_string()))?;
                for (k, v) in file {
                    table.insert(k, v);
                }
                table
            }
            Some(_) => return Err(Error::InvalidConfig("preset must be a string".into())),
            None => file,
        };
        let spec: ExperimentSpec = merged
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.sweep.grid;
        if g.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if g.iter().any(|x| !x.is_finite()) || g.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig(
                "sweep grid must be finite and sorted".into(),
            ));
        }
        if matches!(self.sweep.var, SweepVar::L | SweepVar::N)
            && g.iter().any(|x| *x < 0.0 || x.fract() != 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "{} grid must hold non-negative integers",
                self.sweep.var.name()
            )));
        }
        if self.sweep.var == SweepVar::ZetaC && g.iter().any(|x| *x <= 0.0) {
            return Err(Error::InvalidConfig("zeta_c grid must be positive".into()));
        }
        if self.sweep.var == SweepVar::Rho && g.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidConfig("rho grid must lie in [0, 1]".into()));
        }
        if self.output.metrics.is_empty() {
            return Err(Error::InvalidConfig("no output metrics requested".into()));
        }
        if self.series.iter().any(|s| s.label.contains([',', '\n'])) {
            return Err(Error::InvalidConfig(
                "series labels may not contain commas".into(),
            ));
        }
        Ok(())
    }

    fn series_list(&self) -> Vec<SeriesSpec> {
        if self.series.is_empty() {
            vec![SeriesSpec::default()]
        } else {
            self.series.clone()
        }
    }
}

/// Analytic value and Monte-Carlo estimate of one metric at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricCell {
    pub metric: Metric,
    pub analytic: Option<f64>,
    pub monte_carlo: Option<EstimateWithCi>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: String,
    pub x: f64,
    pub cells: Vec<MetricCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSweepResult {
    pub sweep_var: SweepVar,
    pub metrics: Vec<Metric>,
    pub monte_carlo: bool,
    /// Realized large-scale gains per series.
    pub topology: String,
    pub rows: Vec<SweepRow>,
}

/// Formats with 12 significant digits.
fn fmt12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

impl MetricSweepResult {
    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["series".to_string(), self.sweep_var.name().to_string()];
        for m in &self.metrics {
            if m.has_analytic() {
                cols.push(m.name().to_string());
            }
            if self.monte_carlo && m.has_monte_carlo() {
                cols.push(format!("{}_mc", m.name()));
                cols.push(format!("{}_mc_hw95", m.name()));
            }
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# realized-topology: {}", self.topology)?;
        writeln!(w, "{}", self.header().join(","))?;
        for row in &self.rows {
            let mut fields = vec![row.series.clone(), fmt12(row.x)];
            for c in &row.cells {
                if c.metric.has_analytic() {
                    fields.push(fmt12(c.analytic.unwrap_or(f64::NAN)));
                }
                if self.monte_carlo && c.metric.has_monte_carlo() {
                    let e = c.monte_carlo;
                    fields.push(fmt12(e.map_or(f64::NAN, |e| e.value)));
                    fields.push(fmt12(e.map_or(f64::NAN, |e| e.half_width_95)));
                }
            }
            writeln!(w, "{}", fields.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        self.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("ASCII output")
    }
}

/// Fully resolved parameters of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub cfg: SystemConfig,
    pub gamma_th: f64,
    pub csi: ImperfectCsi,
}

struct SeriesContext {
    label: String,
    spec: SystemSpec,
    topo: Topology,
}

fn series_context(spec: &ExperimentSpec, s: &SeriesSpec, max_n: usize) -> Result<SeriesContext> {
    let mut sys = spec.system.clone();
    if let Some(n) = s.n_irs {
        sys.n_irs = n;
    }
    if let Some(l) = s.elements {
        sys.elements = l;
    }
    if let Some(m) = s.m {
        (sys.m_u, sys.m_h, sys.m_g) = (m, m, m);
    }
    if let Some(m) = s.m_h {
        sys.m_h = m;
    }
    if let Some(d) = s.include_direct {
        sys.include_direct = d;
    }
    let topo = match &s.irs_distances {
        Some(d) => {
            sys.n_irs = d.len();
            spec.topology.realize_distances(d)?
        }
        None => spec.topology.realize(max_n.max(sys.n_irs))?,
    };
    let label = if s.label.is_empty() {
        format!("N={} L={}", sys.n_irs, sys.elements)
    } else {
        s.label.clone()
    };
    Ok(SeriesContext {
        label,
        spec: sys,
        topo,
    })
}

fn point_config(ctx: &SeriesContext, var: SweepVar, x: f64) -> Result<PointConfig> {
    let mut sys = ctx.spec.clone();
    let mut zeta_c = None;
    match var {
        SweepVar::GammaBarDb => sys.gamma_bar_db = x,
        SweepVar::GammaThDb => sys.gamma_th_db = x,
        SweepVar::Rho => sys.rho = x,
        SweepVar::L => sys.elements = x as usize,
        SweepVar::N => sys.n_irs = x as usize,
        SweepVar::ZetaC => zeta_c = Some(x),
    }
    let mut topo = ctx.topo.clone();
    if topo.n_irs() < sys.n_irs {
        return Err(Error::InvalidConfig(format!(
            "series '{}' needs {} surfaces but the topology has {}",
            ctx.label,
            sys.n_irs,
            topo.n_irs()
        )));
    }
    topo.zeta_h.truncate(sys.n_irs);
    topo.zeta_g.truncate(sys.n_irs);
    topo.irs_pos.truncate(sys.n_irs);
    if let Some(z) = zeta_c {
        topo.zeta_h
            .iter_mut()
            .chain(topo.zeta_g.iter_mut())
            .for_each(|v| *v = z);
    }
    let mut cfg = SystemConfig {
        elements: if sys.n_irs == 0 { 0 } else { sys.elements },
        eta: sys.eta,
        direct: NakagamiParams::from_gain(sys.m_u, topo.zeta_su)?,
        h: topo
            .zeta_h
            .iter()
            .map(|&z| NakagamiParams::from_gain(sys.m_h, z))
            .collect::<Result<_>>()?,
        g: topo
            .zeta_g
            .iter()
            .map(|&z| NakagamiParams::from_gain(sys.m_g, z))
            .collect::<Result<_>>()?,
        gamma_bar: db_to_linear(sys.gamma_bar_db),
        include_direct: sys.include_direct,
    };
    if cfg.n_irs() > 0 && cfg.elements == 0 {
        cfg.h.clear();
        cfg.g.clear();
    }
    cfg.validate()?;
    let csi = ImperfectCsi::uniform(sys.rho, db_to_linear(sys.beta2_db), &cfg)?;
    Ok(PointConfig {
        cfg,
        gamma_th: db_to_linear(sys.gamma_th_db),
        csi,
    })
}

/// Reuses one batch across points that differ only in γ̄.
struct BatchCache {
    n_trials: usize,
    seed: u64,
    perfect: Option<(SystemConfig, TrialBatch)>,
    imperfect: Option<(SystemConfig, ImperfectCsi, TrialBatch)>,
}

impl BatchCache {
    fn perfect(&mut self, cfg: &SystemConfig) -> Result<TrialBatch> {
        let key = cfg.with_gamma_bar(1.0);
        if self.perfect.as_ref().is_none_or(|(k, _)| *k != key) {
            let b = simulate(&key, self.n_trials, self.seed)?;
            self.perfect = Some((key, b));
        }
        Ok(self.perfect.as_ref().unwrap().1.rescale(cfg.gamma_bar))
    }

    fn imperfect(&mut self, cfg: &SystemConfig, csi: &ImperfectCsi) -> Result<TrialBatch> {
        let key = cfg.with_gamma_bar(1.0);
        if self
            .imperfect
            .as_ref()
            .is_none_or(|(k, c, _)| *k != key || c != csi)
        {
            let b = simulate_imperfect_csi(&key, csi, self.n_trials, self.seed)?;
            self.imperfect = Some((key, csi.clone(), b));
        }
        Ok(self.imperfect.as_ref().unwrap().2.rescale(cfg.gamma_bar))
    }
}

/// Relative half-width of the histogram bin used for MC density estimates.
const PDF_BIN: f64 = 0.025;

fn empirical_pdf(batch: &TrialBatch, x: f64) -> EstimateWithCi {
    let (lo, hi) = (x * (1.0 - PDF_BIN), x * (1.0 + PDF_BIN));
    let n = batch.snr_samples.len() as f64;
    let k = batch
        .snr_samples
        .iter()
        .filter(|&&s| s > lo && s <= hi)
        .count() as f64;
    let p = k / n;
    let w = hi - lo;
    EstimateWithCi {
        value: p / w,
        half_width_95: 1.959_963_984_540_054 * (p * (1.0 - p) / n).sqrt() / w,
        n_trials: batch.snr_samples.len(),
    }
}

fn allow_unsupported(r: Result<f64>) -> Result<f64> {
    match r {
        Err(Error::Unsupported(_)) => Ok(f64::NAN),
        other => other,
    }
}

fn evaluate_point(
    p: &PointConfig,
    metrics: &[Metric],
    modulation: &SerModulation,
    cache: Option<&mut BatchCache>,
) -> Result<Vec<MetricCell>> {
    let cfg = &p.cfg;
    let mut dist: Option<SnrDistribution> = None;
    let mut get_dist = || -> Result<SnrDistribution> {
        if dist.is_none() {
            dist = Some(SnrDistribution::new(cfg)?);
        }
        Ok(dist.clone().unwrap())
    };
    let mut cache = cache;
    let mut cells = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let analytic = match m {
            Metric::Pdf => Some(get_dist()?.pdf_snr(p.gamma_th)?),
            Metric::Cdf | Metric::Outage => Some(outage_probability(p.gamma_th, &get_dist()?)?),
            Metric::OutageAsymptotic => Some(allow_unsupported(
                asymptotic_outage(p.gamma_th, cfg.gamma_bar, cfg).map(|r| r.0),
            )?),
            Metric::Rate => None,
            Metric::RateUpper => Some(rate_upper(cfg)?),
            Metric::RateLower => Some(rate_lower(cfg)?),
            Metric::RateLargeL => Some(allow_unsupported(rate_asymptotic_large_l(
                cfg,
                cfg.gamma_bar,
            ))?),
            Metric::Ser => Some(average_ser(&get_dist()?, modulation)?.value),
            Metric::SerAsymptotic => Some(allow_unsupported(
                asymptotic_ser(cfg.gamma_bar, cfg, modulation).map(|r| r.value),
            )?),
            Metric::RateUbImperfectCsi => Some(rate_ub_imperfect_csi(cfg, &p.csi)?),
            Metric::MeanSnr => Some(mean_snr(cfg)?),
            Metric::Kl => Some(match (cfg.h.first(), cfg.g.first()) {
                (Some(h), Some(g)) => kl_divergence_product(&ProductChannelParams::new(h, g)?)?,
                _ => f64::NAN,
            }),
            Metric::DiversityOrder => Some(diversity_order(cfg)),
        };
        let monte_carlo = match (m.has_monte_carlo(), cache.as_deref_mut()) {
            (true, Some(c)) => Some(match m {
                Metric::RateUbImperfectCsi => {
                    let e = empirical_mean_snr(&c.imperfect(cfg, &p.csi)?);
                    let slope = 1.0 / ((1.0 + e.value) * std::f64::consts::LN_2);
                    EstimateWithCi {
                        value: e.value.ln_1p() / std::f64::consts::LN_2,
                        half_width_95: e.half_width_95 * slope,
                        n_trials: e.n_trials,
                    }
                }
                _ => {
                    let b = c.perfect(cfg)?;
                    match m {
                        Metric::Pdf => empirical_pdf(&b, p.gamma_th),
                        Metric::Cdf | Metric::Outage => empirical_outage(&b, p.gamma_th),
                        Metric::Rate => empirical_rate(&b),
                        Metric::Ser => empirical_ser(&b, modulation),
                        _ => empirical_mean_snr(&b),
                    }
                }
            }),
            _ => None,
        };
        cells.push(MetricCell {
            metric: m,
            analytic,
            monte_carlo,
        });
    }
    Ok(cells)
}

/// Resolves every (series, grid point) pair to a concrete configuration.
pub fn resolve_points(spec: &ExperimentSpec) -> Result<Vec<(String, f64, PointConfig)>> {
    spec.validate()?;
    let series = spec.series_list();
    let mut max_n = series
        .iter()
        .map(|s| s.n_irs.unwrap_or(spec.system.n_irs))
        .max()
        .unwrap_or(0);
    if spec.sweep.var == SweepVar::N {
        max_n = max_n.max(spec.sweep.grid.iter().fold(0.0f64, |a, &b| a.max(b)) as usize);
    }
    let mut out = Vec::new();
    for s in &series {
        let ctx = series_context(spec, s, max_n)?;
        for &x in &spec.sweep.grid {
            out.push((ctx.label.clone(), x, point_config(&ctx, spec.sweep.var, x)?));
        }
    }
    Ok(out)
}

fn describe_topologies(spec: &ExperimentSpec) -> Result<String> {
    let series = spec.series_list();
    let mut max_n = series
        .iter()
        .map(|s| s.n_irs.unwrap_or(spec.system.n_irs))
        .max()
        .unwrap_or(0);
    if spec.sweep.var == SweepVar::N {
        max_n = max_n.max(spec.sweep.grid.iter().fold(0.0f64, |a, &b| a.max(b)) as usize);
    }
    let mut parts = Vec::new();
    let mut shared_done = false;
    for s in &series {
        let ctx = series_context(spec, s, max_n)?;
        if s.irs_distances.is_some() {
            parts.push(format!("{}: {}", ctx.label, ctx.topo.describe()));
        } else if !shared_done {
            let how = if spec.topology.explicit().is_some() {
                "explicit".to_string()
            } else {
                format!("seed={}", spec.topology.seed)
            };
            parts.push(format!("{how} {}", ctx.topo.describe()));
            shared_done = true;
        }
    }
    Ok(parts.join(" | "))
}

/// Evaluates the requested metrics over the sweep grid for every series.
pub fn run(spec: &ExperimentSpec) -> Result<MetricSweepResult> {
    let points = resolve_points(spec)?;
    let modulation = spec.system.modulation.params();
    let monte_carlo =
        spec.output.n_trials > 0 && spec.output.metrics.iter().any(|m| m.has_monte_carlo());
    let mut cache = BatchCache {
        n_trials: spec.output.n_trials,
        seed: spec.output.seed,
        perfect: None,
        imperfect: None,
    };
    let mut rows = Vec::with_capacity(points.len());
    for (series, x, p) in points {
        let cells = evaluate_point(
            &p,
            &spec.output.metrics,
            &modulation,
            monte_carlo.then_some(&mut cache),
        )?;
        rows.push(SweepRow { series, x, cells });
    }
    Ok(MetricSweepResult {
        sweep_var: spec.sweep.var,
        metrics: spec.output.metrics.clone(),
        monte_carlo,
        topology: describe_topologies(spec)?,
        rows,
    })
}

/// One analytic-vs-simulation disagreement found by [`consistency_violations`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub series: String,
    pub x: f64,
    pub metric: Metric,
    pub detail: String,
}

/// Checks each row against its simulation:
///
/// * `mean_snr`, `rate_ub_imperfect_csi`: exact in expectation, 2% relative;
/// * `cdf`, `outage`: absolute gap below 0.02 plus the CI half-width;
/// * `rate`: inside [rate_lower, rate_upper] widened by the CI, when both
///   bounds are requested;
/// * `ser`: 10% relative where the simulated SER exceeds 1e−6.
///
/// Densities are not checked because histogram estimates carry bin bias.
pub fn consistency_violations(result: &MetricSweepResult) -> Vec<Violation> {
    let mut out = Vec::new();
    for row in &result.rows {
        let find = |m: Metric| row.cells.iter().find(|c| c.metric == m);
        for c in &row.cells {
            let (Some(mc), a) = (c.monte_carlo, c.analytic) else {
                continue;
            };
            let fail = match c.metric {
                Metric::MeanSnr | Metric::RateUbImperfectCsi => a
                    .filter(|a| (a - mc.value).abs() > 0.02 * a.abs())
                    .map(|a| format!("analytic {a:.6e} vs simulated {:.6e}", mc.value)),
                Metric::Cdf | Metric::Outage => a
                    .filter(|a| (a - mc.value).abs() > 0.02 + mc.half_width_95)
                    .map(|a| format!("analytic {a:.6e} vs simulated {:.6e}", mc.value)),
                Metric::Rate => match (find(Metric::RateLower), find(Metric::RateUpper)) {
                    (Some(lo), Some(hi)) => {
                        let (lo, hi) = (lo.analytic.unwrap(), hi.analytic.unwrap());
                        let w = mc.half_width_95;
                        (mc.value + w < lo || mc.value - w > hi).then(|| {
                            format!("simulated {:.6} outside [{lo:.6}, {hi:.6}]", mc.value)
                        })
                    }
                    _ => None,
                },
                Metric::Ser => a
                    .filter(|a| mc.value > 1e-6 && (a - mc.value).abs() > 0.1 * mc.value)
                    .map(|a| format!("analytic {a:.6e} vs simulated {:.6e}", mc.value)),
                _ => None,
            };
            if let Some(detail) = fail {
                out.push(Violation {
                    series: row.series.clone(),
                    x: row.x,
                    metric: c.metric,
                    detail,
                });
            }
        }
    }
    out
}
