//! Monte Carlo experiments: variance scaling of the centred bias, exceedance
//! probabilities, the sign-imbalance scan and the barrier demonstration.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::{
    density_domains, hex_defect, hex_defect_curve, hex_defect_derivatives, level_barrier,
    limiting_bias, pullback_error, rkhs_norm, sign_barrier_norm_constant, sphere_sign_barrier,
    xi_integrals, xi_profile, PullbackReport, XiProfile,
};
use crate::constants::{C_CONSTRUCTION, EPS0, T0};
use crate::defect::{
    grid_lat_for, imbalance_on_grid, net_for_radius, GridLayout, SphereNet, DEFAULT_NET_CAP,
};
use crate::error::{Error, Result};
use crate::harmonics::RingSynth;
use crate::kernels::KernelSpec;
use crate::quad::{gauss_legendre_on, KahanSum};
use crate::sampler::{degree_weights, replicate_rng, sample_band_stream, FieldSample};
use crate::specfun::tau;

/// Fewer replicates than this set the warning field of variance reports.
pub const MIN_VARIANCE_REPLICATES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Variance,
    Concentration,
    Imbalance,
    Barrier,
}

/// Band width as a function of ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum EtaRule {
    Fixed(usize),
    Sqrt,
    Fraction(f64),
}

impl EtaRule {
    pub fn eta(&self, ell: usize) -> usize {
        let e = match *self {
            EtaRule::Fixed(e) => e,
            EtaRule::Sqrt => (ell as f64).sqrt().floor() as usize,
            EtaRule::Fraction(c) => (c * ell as f64).floor() as usize,
        };
        e.clamp(1, ell)
    }
}

/// Unit in which radii are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusScale {
    /// 1/ℓ
    Wavelength,
    /// r̄_ℓ = (log ℓ)^{1/(d−1)}/ℓ
    RBar,
    /// (log ℓ)^{1/(2(d−1))}/ℓ
    UbarR,
}

impl RadiusScale {
    pub fn unit(&self, d: usize, ell: usize) -> f64 {
        let l = ell as f64;
        let p = 1.0 / (d as f64 - 1.0);
        match self {
            RadiusScale::Wavelength => 1.0 / l,
            RadiusScale::RBar => l.ln().powf(p) / l,
            RadiusScale::UbarR => l.ln().powf(0.5 * p) / l,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RadiusScale::Wavelength => "wavelength",
            RadiusScale::RBar => "r-bar",
            RadiusScale::UbarR => "ubar-r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Fixed parameters of the barrier demonstration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierParams {
    pub ell: usize,
    pub r_mult: f64,
    pub level_ell: usize,
    pub level_r_mult: f64,
    pub appendix_r: f64,
    pub grid_scale: f64,
    pub centers: usize,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            ell: 600,
            r_mult: 5.0,
            level_ell: 800,
            level_r_mult: 40.0,
            appendix_r: 1.7,
            grid_scale: 64.0,
            centers: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub d: usize,
    pub ells: Vec<usize>,
    pub eta: EtaRule,
    pub r_scales: Vec<RadiusScale>,
    pub r_mults: Vec<f64>,
    pub us: Vec<f64>,
    pub eps: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub workers: usize,
    /// Net spacing as a fraction of the radius (imbalance scan).
    pub net_delta: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub plot: bool,
    pub barrier: BarrierParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentKind::Variance,
            d: 2,
            ells: vec![256],
            eta: EtaRule::Fixed(1),
            r_scales: vec![RadiusScale::Wavelength],
            r_mults: vec![8.0, 16.0, 32.0, 64.0],
            us: vec![0.0, 1.0],
            eps: vec![0.2],
            replicates: 2000,
            seed: 1,
            workers: 1,
            net_delta: 0.1,
            out: None,
            format: Format::Csv,
            plot: false,
            barrier: BarrierParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults of each experiment's acceptance run.
    pub fn preset(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            ..Self::default()
        };
        match kind {
            ExperimentKind::Variance => base,
            ExperimentKind::Concentration => Self {
                r_mults: vec![6.0, 12.0, 24.0],
                replicates: 50_000,
                ..base
            },
            ExperimentKind::Imbalance => Self {
                ells: vec![64, 128, 256],
                r_scales: vec![RadiusScale::RBar, RadiusScale::UbarR],
                r_mults: vec![0.5, 1.0, 2.0, 4.0, 8.0],
                us: vec![0.0],
                replicates: 200,
                ..base
            },
            ExperimentKind::Barrier => Self {
                replicates: 1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.ells.is_empty()
            || self.r_mults.is_empty()
            || self.us.is_empty()
            || self.r_scales.is_empty()
        {
            return bad("ℓ-grid, radius grid, scales and u-list must be nonempty");
        }
        if self.experiment == ExperimentKind::Concentration && self.eps.is_empty() {
            return bad("ε-list must be nonempty");
        }
        if self.replicates < 1 {
            return bad("replicates must be at least 1");
        }
        if self.workers < 1 {
            return bad("workers must be at least 1");
        }
        if self.ells.iter().any(|&l| l < 1) {
            return bad("degrees must be positive");
        }
        if self.eps.iter().any(|&e| !(e > 0.0)) {
            return bad("ε values must be positive");
        }
        match self.eta {
            EtaRule::Fraction(c) if !(c > 0.0 && c <= 1.0) => {
                return bad("η fraction must lie in (0, 1]")
            }
            EtaRule::Fixed(e) if e < 1 || self.ells.iter().any(|&l| e > l) => {
                return bad("fixed η must lie in [1, ℓ] for every ℓ of the grid")
            }
            _ => {}
        }
        if !(self.net_delta > 0.0 && self.net_delta <= 0.5) {
            return bad("net fraction must lie in (0, ½]");
        }
        for &ell in &self.ells {
            for s in &self.r_scales {
                for &m in &self.r_mults {
                    let r = m * s.unit(self.d, ell);
                    if !(r > 0.0 && r < PI) {
                        return Err(Error::Config(format!(
                            "radius {r} at ℓ = {ell} outside (0, π)"
                        )));
                    }
                }
            }
        }
        if self.experiment != ExperimentKind::Barrier && self.d != 2 {
            return bad("Monte Carlo experiments run on S² (d = 2)");
        }
        Ok(())
    }

    pub fn spec(&self, ell: usize) -> Result<KernelSpec> {
        KernelSpec::new(self.d, ell, self.eta.eta(ell))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// Runs f(0..n) on the configured pool; results come back in index order.
fn run_replicates<T, F>(cfg: &ExperimentConfig, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    cfg.pool()?
        .install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

/// Least-squares line with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    /// The (x, y) pairs entering the fit, after any transform.
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares of y on x.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 2 {
        return Err(Error::Config(format!(
            "cannot fit a line to {} point(s)",
            points.len()
        )));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Numerical("non-finite value in fit input".into()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).collect::<KahanSum>().value() / n;
    let my = points.iter().map(|p| p.1).collect::<KahanSum>().value() / n;
    let sxx = points
        .iter()
        .map(|p| (p.0 - mx).powi(2))
        .collect::<KahanSum>()
        .value();
    let sxy = points
        .iter()
        .map(|p| (p.0 - mx) * (p.1 - my))
        .collect::<KahanSum>()
        .value();
    let syy = points
        .iter()
        .map(|p| (p.1 - my).powi(2))
        .collect::<KahanSum>()
        .value();
    if sxx <= 0.0 {
        return Err(Error::Config(
            "fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .collect::<KahanSum>()
        .value();
    let slope_se = if points.len() > 2 {
        (sse / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        slope,
        intercept,
        slope_se,
        r_squared,
        points: points.to_vec(),
    })
}

/// Fit of log y on log x.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Numerical("log–log fit needs positive data".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    fit_linear(&logs)
}

/// Geodesic cap at the north pole discretized into rings of constant
/// colatitude (Gauss–Legendre in ρ) and equispaced longitudes.
#[derive(Debug, Clone)]
pub struct PoleCap {
    radius: f64,
    weights: Vec<f64>,
    synth: RingSynth,
}

impl PoleCap {
    pub fn new(spec: KernelSpec, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < PI) {
            return Err(Error::Domain(format!(
                "cap radius must lie in (0, π), got {radius}"
            )));
        }
        let rl = radius * spec.ell() as f64;
        let rings = ((4.0 * rl).ceil() as usize).max(32);
        let nphi = (2 * spec.ell() + 2)
            .max((8.0 * PI * rl).ceil() as usize)
            .max(64)
            .next_power_of_two();
        let rule = gauss_legendre_on(rings, 0.0, radius);
        let weights = rule.iter().map(|&(rho, w)| w * rho.sin()).collect();
        let zs = rule.iter().map(|&(rho, _)| rho.cos()).collect();
        Ok(Self {
            radius,
            weights,
            synth: RingSynth::new(spec.ell_min(), spec.ell(), zs, nphi),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> usize {
        self.weights.len() * self.synth.nphi()
    }

    /// Centred biases D_u = D̃_u − τ(u) of a basis sample, one per level.
    pub fn biases(&self, sample: &FieldSample, us: &[f64]) -> Result<Vec<f64>> {
        let coeffs = sample
            .coeffs()
            .ok_or_else(|| Error::Domain("pole caps need a basis-mode sample".into()))?;
        let dw = degree_weights(sample.spec());
        let mut scratch = self.synth.scratch();
        let mut ring = vec![0.0; self.synth.nphi()];
        let mut acc = vec![KahanSum::new(); us.len()];
        let mut den = KahanSum::new();
        let inv = 1.0 / self.synth.nphi() as f64;
        for (i, &w) in self.weights.iter().enumerate() {
            self.synth.ring(i, coeffs, &dw, &mut scratch, &mut ring);
            for (a, &u) in acc.iter_mut().zip(us) {
                let pos = ring.iter().filter(|&&v| v >= u).count() as f64;
                a.add(w * (2.0 * pos * inv - 1.0));
            }
            den.add(w);
        }
        Ok(acc
            .iter()
            .zip(us)
            .map(|(a, &u)| (a.value() / den.value()).clamp(-1.0, 1.0) - tau(u))
            .collect())
    }
}

/// Mean and unbiased variance with compensated sums in slice order.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    let var = if xs.len() > 1 {
        xs.iter()
            .map(|x| (x - mean).powi(2))
            .collect::<KahanSum>()
            .value()
            / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Wilson score interval at 95%.
pub fn wilson(k: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = k as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z / den * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    // the interval endpoints are exact at k = 0 and k = n
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub ell: usize,
    pub eta: usize,
    pub r: f64,
    pub r_ell: f64,
    pub u: f64,
    pub mean: f64,
    pub variance: f64,
    pub std_err_mean: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub ell: usize,
    pub u: f64,
    pub fit: FitResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub rows: Vec<VarianceRow>,
    pub fits: Vec<VarianceFit>,
    pub warning: Option<String>,
}

fn radii(cfg: &ExperimentConfig, ell: usize) -> Vec<f64> {
    let unit = cfg.r_scales[0].unit(cfg.d, ell);
    cfg.r_mults.iter().map(|m| m * unit).collect()
}

/// D_u(pole; r) for every replicate: result[rep][radius][u].
fn pole_biases(cfg: &ExperimentConfig, spec: KernelSpec, rs: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
    let caps: Vec<PoleCap> = rs
        .iter()
        .map(|&r| PoleCap::new(spec, r))
        .collect::<Result<_>>()?;
    let stream_base = spec.ell() as u64 * 1_000_003;
    run_replicates(cfg, cfg.replicates, |i| {
        let sample = sample_band_stream(spec, cfg.seed, stream_base + i)?;
        caps.iter().map(|c| c.biases(&sample, &cfg.us)).collect()
    })
}

/// Empirical Var(D_u(x; r)) over replicates and its log–log slope in rℓ.
pub fn run_variance_scaling(cfg: &ExperimentConfig) -> Result<VarianceReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &ell in &cfg.ells {
        let spec = cfg.spec(ell)?;
        let rs = radii(cfg, ell);
        let all = pole_biases(cfg, spec, &rs)?;
        for (ui, &u) in cfg.us.iter().enumerate() {
            let mut pts = Vec::new();
            for (ri, &r) in rs.iter().enumerate() {
                let xs: Vec<f64> = all.iter().map(|rep| rep[ri][ui]).collect();
                let (mean, variance) = mean_var(&xs);
                let rl = r * ell as f64;
                pts.push((rl, variance));
                rows.push(VarianceRow {
                    ell,
                    eta: spec.eta(),
                    r,
                    r_ell: rl,
                    u,
                    mean,
                    variance,
                    std_err_mean: (variance / xs.len() as f64).sqrt(),
                    replicates: xs.len(),
                });
            }
            fits.push(VarianceFit {
                ell,
                u,
                fit: fit_loglog(&pts)?,
            });
        }
    }
    let warning = (cfg.replicates < MIN_VARIANCE_REPLICATES).then(|| {
        format!(
            "{} replicates is below {MIN_VARIANCE_REPLICATES}",
            cfg.replicates
        )
    });
    Ok(VarianceReport {
        rows,
        fits,
        warning,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub ell: usize,
    pub r: f64,
    pub eta: usize,
    pub u: f64,
    pub eps: f64,
    pub exceedances: usize,
    pub replicates: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub neg_log_p: f64,
    /// −log of the interval endpoints (low p gives the high value).
    pub neg_log_low: f64,
    pub neg_log_high: f64,
    /// (rℓ)^{d−1}·max{1, rη}
    pub rate_x: f64,
    /// No exceedances: left out of the fit.
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationFit {
    pub ell: usize,
    pub u: f64,
    pub eps: f64,
    pub fit: Option<FitResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub rows: Vec<ConcentrationRow>,
    pub fits: Vec<ConcentrationFit>,
}

impl ConcentrationReport {
    /// Whether −log P̂ is nondecreasing along the rows of (ℓ, u, ε), allowing
    /// decreases whose intervals overlap.
    pub fn monotone(&self, ell: usize, u: f64, eps: f64) -> bool {
        let sel: Vec<&ConcentrationRow> = self
            .rows
            .iter()
            .filter(|r| r.ell == ell && r.u == u && r.eps == eps)
            .collect();
        sel.windows(2)
            .all(|w| w[1].neg_log_p >= w[0].neg_log_p || w[1].neg_log_low <= w[0].neg_log_high)
    }
}

/// Exceedance frequencies P̂(|D_u| > ε) with Wilson intervals, and fits of
/// −log P̂ against (rℓ)^{d−1}·max{1, rη}.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<ConcentrationReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &ell in &cfg.ells {
        let spec = cfg.spec(ell)?;
        let rs = radii(cfg, ell);
        let all = pole_biases(cfg, spec, &rs)?;
        let n = all.len();
        for (ui, &u) in cfg.us.iter().enumerate() {
            for &eps in &cfg.eps {
                let mut pts = Vec::new();
                let mut dropped = 0;
                for (ri, &r) in rs.iter().enumerate() {
                    let k = all.iter().filter(|rep| rep[ri][ui].abs() > eps).count();
                    let p = k as f64 / n as f64;
                    let (lo, hi) = wilson(k, n);
                    let rate_x =
                        (r * ell as f64).powi(cfg.d as i32 - 1) * (r * spec.eta() as f64).max(1.0);
                    let excluded = k == 0;
                    if excluded {
                        dropped += 1;
                    } else {
                        pts.push((rate_x, -p.ln()));
                    }
                    rows.push(ConcentrationRow {
                        ell,
                        r,
                        eta: spec.eta(),
                        u,
                        eps,
                        exceedances: k,
                        replicates: n,
                        p_hat: p,
                        ci_low: lo,
                        ci_high: hi,
                        neg_log_p: -p.ln(),
                        neg_log_low: -hi.ln(),
                        neg_log_high: -lo.ln(),
                        rate_x,
                        excluded,
                    });
                }
                let (fit, note) = match fit_linear(&pts) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                let note = match (note, dropped) {
                    (n, 0) => n,
                    (None, k) => Some(format!("{k} point(s) without exceedances excluded")),
                    (Some(n), k) => Some(format!("{n}; {k} point(s) without exceedances excluded")),
                };
                fits.push(ConcentrationFit {
                    ell,
                    u,
                    eps,
                    fit,
                    note,
                });
            }
        }
    }
    Ok(ConcentrationReport { rows, fits })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceRow {
    pub ell: usize,
    pub eta: usize,
    pub mu: f64,
    pub scale: RadiusScale,
    pub u: f64,
    pub r: f64,
    pub mean_b: f64,
    pub q10: f64,
    pub q90: f64,
    pub net_points: usize,
    pub spacing: f64,
    pub stability: f64,
    pub capped: bool,
    pub grid_lat: usize,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceScan {
    pub rows: Vec<ImbalanceRow>,
}

impl ImbalanceScan {
    pub fn mean(&self, ell: usize, scale: RadiusScale, mu: f64, u: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.ell == ell && r.scale == scale && r.mu == mu && r.u == u)
            .map(|r| r.mean_b)
    }
}

/// Net-approximated imbalance B̂ at radii μ·r̄_ℓ and μ·ubar-r_ℓ.
pub fn run_imbalance_scan(cfg: &ExperimentConfig) -> Result<ImbalanceScan> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &ell in &cfg.ells {
        let spec = cfg.spec(ell)?;
        let cells: Vec<(RadiusScale, f64, f64)> = cfg
            .r_scales
            .iter()
            .flat_map(|&s| {
                cfg.r_mults
                    .iter()
                    .map(move |&m| (s, m, m * s.unit(cfg.d, ell)))
            })
            .collect();
        let rmin = cells.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        let layout = GridLayout::new(spec, grid_lat_for(ell, rmin))?;
        let nets: Vec<(SphereNet, bool)> = cells
            .iter()
            .map(|c| net_for_radius(c.2, cfg.net_delta, DEFAULT_NET_CAP))
            .collect::<Result<_>>()?;
        let stream_base = ell as u64 * 1_000_003;
        // reps[i][u][cell]
        let reps = run_replicates(cfg, cfg.replicates, |i| {
            let sample = sample_band_stream(spec, cfg.seed, stream_base + i)?;
            cfg.us
                .iter()
                .map(|&u| {
                    let grid = layout.signs(&sample, u)?;
                    Ok(cells
                        .iter()
                        .zip(&nets)
                        .map(|(c, (net, capped))| imbalance_on_grid(&grid, net, c.2, *capped))
                        .collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (ui, &u) in cfg.us.iter().enumerate() {
            for (ci, &(scale, mu, r)) in cells.iter().enumerate() {
                let mut bs: Vec<f64> = reps.iter().map(|rep| rep[ui][ci].b).collect();
                let (mean_b, _) = mean_var(&bs);
                bs.sort_by(f64::total_cmp);
                let first = &reps[0][ui][ci];
                rows.push(ImbalanceRow {
                    ell,
                    eta: spec.eta(),
                    mu,
                    scale,
                    u,
                    r,
                    mean_b,
                    q10: quantile(&bs, 0.1),
                    q90: quantile(&bs, 0.9),
                    net_points: first.net_points,
                    spacing: first.spacing,
                    stability: first.stability,
                    capped: first.capped,
                    grid_lat: first.grid_lat,
                    replicates: bs.len(),
                });
            }
        }
    }
    Ok(ImbalanceScan { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HexSummary {
    pub d_zero: f64,
    pub d_prime: f64,
    pub d_second: f64,
    pub t0: f64,
    pub d_t0: f64,
    pub eps0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexPoint {
    pub t: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignBarrierSummary {
    pub ell: usize,
    pub eta: usize,
    pub eta_prime: usize,
    pub r: f64,
    pub r_tilde: f64,
    pub s: f64,
    pub construction_c: f64,
    pub bias: f64,
    pub level: f64,
    pub norm_squared: f64,
    pub norm_bound: f64,
    pub pullback: PullbackReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBarrierRow {
    pub ell: usize,
    pub r: f64,
    pub u: f64,
    pub measured: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixSummary {
    pub profile: XiProfile,
    /// max |∫_{B₁(x)} ξ| over the random centres.
    pub unit_integral_max: f64,
    pub centred_integral: f64,
    pub centred_identity: f64,
    pub printed_closed_form: f64,
    pub grid_scale: f64,
    /// max |defect| of the box field on unit discs at the random centres.
    pub unit_defect_max: f64,
    pub r_defect: f64,
    pub r_defect_predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierDemo {
    pub hex: HexSummary,
    pub hex_curve: Vec<HexPoint>,
    pub sign_barrier: SignBarrierSummary,
    pub level_barrier: Vec<LevelBarrierRow>,
    pub appendix: AppendixSummary,
}

const HEX_REFINEMENT: usize = 400;
const CAP_REFINEMENT: usize = 64;

/// Sign-barrier and level-barrier on S², the hexagonal model and the
/// density-profile fields in the plane.
pub fn run_barrier_demo(cfg: &ExperimentConfig) -> Result<BarrierDemo> {
    let p = &cfg.barrier;
    let (d1, d2) = hex_defect_derivatives();
    let hex = HexSummary {
        d_zero: hex_defect(0.0, HEX_REFINEMENT)?,
        d_prime: d1,
        d_second: d2,
        t0: T0,
        d_t0: hex_defect(T0, HEX_REFINEMENT)?,
        eps0: EPS0,
    };
    let ts: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
    let hex_curve = hex_defect_curve(&ts, HEX_REFINEMENT)?
        .into_iter()
        .map(|(t, d)| HexPoint { t, d })
        .collect();
    let x = [0.0, 0.0, 1.0];
    let r = p.r_mult / p.ell as f64;
    let eta = cfg.eta.eta(p.ell);
    let b = sphere_sign_barrier(&x, r, p.ell, eta, C_CONSTRUCTION)?;
    let norm = rkhs_norm(&b)?;
    let rt = r * p.ell as f64;
    let sign_barrier = SignBarrierSummary {
        ell: p.ell,
        eta,
        eta_prime: b.eta_prime,
        r,
        r_tilde: b.r_tilde,
        s: b.s,
        construction_c: C_CONSTRUCTION,
        bias: b.bias(r, EPS0, CAP_REFINEMENT)?.d_tilde,
        level: EPS0,
        norm_squared: norm * norm,
        norm_bound: sign_barrier_norm_constant(2, C_CONSTRUCTION)?
            * (r * eta as f64).max(1.0)
            * rt.powi(2 * (cfg.d as i32 - 1)),
        pullback: pullback_error(&b, r, 24, 48),
    };
    let lr = p.level_r_mult / p.level_ell as f64;
    let lb = level_barrier(&x, lr, p.level_ell, 1, C_CONSTRUCTION)?;
    let level_barrier = cfg
        .us
        .iter()
        .map(|&u| {
            Ok(LevelBarrierRow {
                ell: p.level_ell,
                r: lr,
                u,
                measured: lb.bias(lr, u, CAP_REFINEMENT)?.d_tilde,
                limit: limiting_bias(u),
            })
        })
        .collect::<Result<_>>()?;
    let appendix = appendix_summary(p.appendix_r, p.grid_scale, p.centers, cfg.seed)?;
    Ok(BarrierDemo {
        hex,
        hex_curve,
        sign_barrier,
        level_barrier,
        appendix,
    })
}

/// Random planar centres with ‖x‖ ≤ radius from a seeded stream.
pub fn random_plane_points(n: usize, radius: f64, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = replicate_rng(seed, u64::MAX);
    (0..n)
        .map(|_| {
            let rho = radius * rng.random::<f64>().sqrt();
            let a = 2.0 * PI * rng.random::<f64>();
            [rho * a.cos(), rho * a.sin()]
        })
        .collect()
}

pub fn appendix_summary(r: f64, scale: f64, centers: usize, seed: u64) -> Result<AppendixSummary> {
    let profile = xi_profile(r)?;
    let pts = random_plane_points(centers.max(1), 5.0, seed);
    let unit_integral_max = pts
        .iter()
        .map(|&x| xi_integrals(&profile, x, 1.0).abs())
        .fold(0.0, f64::max);
    let dom = density_domains(&profile, scale)?;
    // disc centres must keep B₁(x) inside the generated window
    let inner = random_plane_points(centers.max(1), (scale - 2.0).min(5.0), seed ^ 0x5eed);
    let unit_defect_max = inner
        .iter()
        .map(|&x| dom.disc_defect(x, 1.0).abs())
        .fold(0.0, f64::max);
    let centred_integral = xi_integrals(&profile, [0.0, 0.0], r);
    Ok(AppendixSummary {
        profile,
        unit_integral_max,
        centred_integral,
        centred_identity: profile.centred_integral(r),
        printed_closed_form: profile.printed_closed_form(),
        grid_scale: scale,
        unit_defect_max,
        r_defect: dom.disc_defect([0.0, 0.0], r),
        r_defect_predicted: centred_integral / (PI * r * r),
    })
}
