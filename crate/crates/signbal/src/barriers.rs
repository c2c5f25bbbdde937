//! Barrier functions: the hexagonal Euclidean sign-barrier, its spherical
//! three-kernel transplant, the single-kernel level-barrier, RKHS norms and
//! the J₀ density profile with its box-domain realization.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::constants::{EPS0, T0};
use crate::defect::{make_cap, volume_bias, BiasReport};
use crate::error::{Error, Result};
use crate::kernels::{band_count, kernel_band, KernelSpec};
use crate::quad::{composite_gauss_legendre, gauss_legendre_on, KahanSum};
use crate::specfun::{bessel_j1_zero, bessel_j_unchecked, DimConstants};
use crate::sphere::{dot, exp_map, geodesic, norm, tangent_frame};

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Area of the hexagonal fundamental domain, 2/√3.
pub const HEX_AREA: f64 = 2.0 / SQRT3;
/// Half-height of the hexagon, 1/√3.
const HEX_HALF_HEIGHT: f64 = 1.0 / SQRT3;
/// Smallest number of x₂-panels accepted by the hexagon quadratures.
pub const MIN_HEX_PANELS: usize = 4;
const NODES_PER_PANEL: usize = 16;

/// w_t(x) = −cos(2πx₁) + t·p(x) on the plane, with
/// p(x) = −cos(2π⟨x,v₂⟩) − cos(2π⟨x,v₃⟩).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HexBarrier {
    t: f64,
}

const V2: [f64; 2] = [-0.5, SQRT3 / 2.0];
const V3: [f64; 2] = [-0.5, -SQRT3 / 2.0];

impl HexBarrier {
    pub fn new(t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "deformation t must be finite and ≥ 0, got {t}"
            )));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn w0(x: [f64; 2]) -> f64 {
        -(TAU * x[0]).cos()
    }

    pub fn p(x: [f64; 2]) -> f64 {
        -(TAU * (V2[0] * x[0] + V2[1] * x[1])).cos() - (TAU * (V3[0] * x[0] + V3[1] * x[1])).cos()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        Self::w0(x) + self.t * Self::p(x)
    }

    fn grad_w0(x: [f64; 2]) -> [f64; 2] {
        [TAU * (TAU * x[0]).sin(), 0.0]
    }

    fn hess_w0(x: [f64; 2]) -> [[f64; 2]; 2] {
        [[TAU * TAU * (TAU * x[0]).cos(), 0.0], [0.0, 0.0]]
    }

    fn grad_p(x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for v in [V2, V3] {
            let s = (TAU * (v[0] * x[0] + v[1] * x[1])).sin();
            g[0] += TAU * v[0] * s;
            g[1] += TAU * v[1] * s;
        }
        g
    }
}

/// Measure of {s ∈ [0, b] : fold(s) ∈ [α, β]}, where fold folds the line
/// onto [0, 1] with period 2 (the behaviour of cos(πs)).
fn folded_measure(b: f64, alpha: f64, beta: f64) -> f64 {
    if beta <= alpha || b <= 0.0 {
        return 0.0;
    }
    let periods = (b / 2.0).floor();
    let rem = b - 2.0 * periods;
    let tail = if rem <= 1.0 {
        (rem.min(beta) - alpha).max(0.0)
    } else {
        (beta - alpha) + (beta - alpha.max(2.0 - rem)).max(0.0)
    };
    periods * 2.0 * (beta - alpha) + tail
}

/// Measure of {x₁ ∈ [−b, b] : w_t(x₁, x₂) ≥ level}. Along a row
/// w_t = 1 − 2y² − 2t·cos(√3πx₂)·y with y = cos(πx₁).
fn row_positive(t: f64, level: f64, x2: f64, b: f64) -> f64 {
    let c = (SQRT3 * PI * x2).cos();
    let disc = t * t * c * c + 2.0 * (1.0 - level);
    if disc < 0.0 {
        return 0.0;
    }
    let sq = disc.sqrt();
    let y_hi = 0.5 * (-t * c + sq);
    let y_lo = 0.5 * (-t * c - sq);
    let alpha = y_hi.clamp(-1.0, 1.0).acos() / PI;
    let beta = y_lo.clamp(-1.0, 1.0).acos() / PI;
    2.0 * folded_measure(b, alpha, beta)
}

/// The hexagon of side 2/3 centred at 0 with vertices (±2/3, 0); rows at
/// height x₂ span |x₁| ≤ 2/3 − |x₂|/√3.
#[derive(Debug, Clone, PartialEq)]
pub struct HexDomain {
    rows: Vec<(f64, f64)>,
}

impl HexDomain {
    /// Composite Gauss–Legendre rows on x₂ ∈ [0, 1/√3] (the domain is
    /// symmetric in x₂), `panels` panels of 16 nodes.
    pub fn new(panels: usize) -> Result<Self> {
        if panels < MIN_HEX_PANELS {
            return Err(Error::Domain(format!(
                "hexagon refinement {panels} below the minimum of {MIN_HEX_PANELS} panels"
            )));
        }
        Ok(Self {
            rows: composite_gauss_legendre(NODES_PER_PANEL, panels, 0.0, HEX_HALF_HEIGHT),
        })
    }

    pub fn half_width(x2: f64) -> f64 {
        2.0 / 3.0 - x2.abs() / SQRT3
    }

    pub fn contains(x: [f64; 2]) -> bool {
        x[1].abs() <= HEX_HALF_HEIGHT && x[0].abs() <= Self::half_width(x[1])
    }

    pub fn area(&self) -> f64 {
        2.0 * self.integrate_rows(|x2, b| {
            let _ = x2;
            2.0 * b
        })
    }

    fn integrate_rows<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        self.rows
            .iter()
            .map(|&(x2, w)| w * f(x2, Self::half_width(x2)))
            .collect::<KahanSum>()
            .value()
    }

    /// Uncentred bias (1/|Π|)∫_Π H(w_t − level).
    pub fn level_defect(&self, t: f64, level: f64) -> f64 {
        let s = self.integrate_rows(|x2, b| 2.0 * row_positive(t, level, x2, b) - 2.0 * b);
        2.0 * s / HEX_AREA
    }

    /// Area of {w_t < 0} ∩ Π.
    pub fn negative_area(&self, t: f64) -> f64 {
        2.0 * self.integrate_rows(|x2, b| 2.0 * b - row_positive(t, 0.0, x2, b))
    }
}

/// D(t) = (1/|Π|)∫_Π H(w_t).
pub fn hex_defect(t: f64, refinement: usize) -> Result<f64> {
    HexBarrier::new(t)?;
    Ok(HexDomain::new(refinement)?.level_defect(t, 0.0))
}

/// D̃_level(t) on the fundamental domain.
pub fn hex_level_defect(t: f64, level: f64, refinement: usize) -> Result<f64> {
    HexBarrier::new(t)?;
    Ok(HexDomain::new(refinement)?.level_defect(t, level))
}

/// (t, D(t)) pairs for CSV export.
pub fn hex_defect_curve(ts: &[f64], refinement: usize) -> Result<Vec<(f64, f64)>> {
    let dom = HexDomain::new(refinement)?;
    ts.iter()
        .map(|&t| {
            HexBarrier::new(t)?;
            Ok((t, dom.level_defect(t, 0.0)))
        })
        .collect()
}

/// Uncentred bias of w_t at `level` on the disc of radius R about the origin.
pub fn hex_ball_defect(t: f64, level: f64, radius: f64, refinement: usize) -> Result<f64> {
    HexBarrier::new(t)?;
    if !(radius > 0.0) {
        return Err(Error::Domain(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if refinement < MIN_HEX_PANELS {
        return Err(Error::Domain(format!(
            "refinement {refinement} below {MIN_HEX_PANELS}"
        )));
    }
    // x₂ = R sin φ removes the square-root behaviour of the row width
    let panels = refinement.max((8.0 * radius).ceil() as usize);
    let rule = composite_gauss_legendre(NODES_PER_PANEL, panels, 0.0, PI / 2.0);
    let s: f64 = rule
        .iter()
        .map(|&(phi, w)| {
            let (x2, b) = (radius * phi.sin(), radius * phi.cos());
            w * radius * phi.cos() * (2.0 * row_positive(t, level, x2, b) - 2.0 * b)
        })
        .collect::<KahanSum>()
        .value();
    Ok(2.0 * s / (PI * radius * radius))
}

/// D′(0) and D″(0) from line integrals over the nodal segments x₁ = ±¼ of
/// w₀, with ψ = p.
pub fn hex_defect_derivatives() -> (f64, f64) {
    let rule = gauss_legendre_on(64, -HEX_HALF_HEIGHT, HEX_HALF_HEIGHT);
    let mut d1 = KahanSum::new();
    let mut d2 = KahanSum::new();
    for x1 in [-0.25, 0.25] {
        for &(x2, w) in &rule {
            let x = [x1, x2];
            let psi = HexBarrier::p(x);
            let g = HexBarrier::grad_w0(x);
            let h = HexBarrier::hess_w0(x);
            let gp = HexBarrier::grad_p(x);
            let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
            let hg = [
                h[0][0] * g[0] + h[0][1] * g[1],
                h[1][0] * g[0] + h[1][1] * g[1],
            ];
            let ghg = g[0] * hg[0] + g[1] * hg[1];
            let lap = h[0][0] + h[1][1];
            let along = ghg / gn;
            let kappa = (gn * gn * lap - ghg) / gn.powi(3);
            let first = -2.0 * psi * (g[0] * gp[0] + g[1] * gp[1]) / gn.powi(3);
            let second = psi * psi / gn.powi(4) * along;
            let third = psi * psi / (gn * gn) * kappa;
            d1.add(w * psi / gn);
            d2.add(w * (first + second + third));
        }
    }
    (2.0 / HEX_AREA * d1.value(), 2.0 / HEX_AREA * d2.value())
}

/// t ∈ grid maximizing D(t), for fitting the frozen t₀.
pub fn fit_t0(grid: &[f64], refinement: usize) -> Result<(f64, f64)> {
    let dom = HexDomain::new(refinement)?;
    grid.iter()
        .map(|&t| (t, dom.level_defect(t, 0.0)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::Config("empty t grid".into()))
}

/// A finite combination Σ w_j K_{ℓ,η′}(d(c_j, ·)) on S^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierFunction {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub ell: usize,
    pub eta: usize,
    pub eta_prime: usize,
    pub s: f64,
    pub d: usize,
    /// Base point x of the construction.
    pub base: Vec<f64>,
    /// Distance from x to the centres (zero for the level-barrier).
    pub r_tilde: f64,
}

impl BarrierFunction {
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::new(self.d, self.ell, self.eta_prime).expect("validated at construction")
    }

    pub fn ambient(&self) -> KernelSpec {
        KernelSpec::new(self.d, self.ell, self.eta).expect("validated at construction")
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let k = self.kernel();
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * kernel_band(k, geodesic(c, y)))
            .sum()
    }

    /// Uncentred bias at `level` on the cap of radius r around the base point.
    pub fn bias(&self, r: f64, level: f64, refinement: usize) -> Result<BiasReport> {
        let cap = make_cap(&self.base, r, refinement)?;
        Ok(volume_bias(|y| self.eval(y), &cap, level))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// √((N(ℓ,η)/N(ℓ,η′))·Σ c_i c_j K_{ℓ,η′}(d(x_i,x_j))).
pub fn rkhs_norm(b: &BarrierFunction) -> Result<f64> {
    let k = b.kernel();
    let ratio = band_count(b.ambient())?.n_band as f64 / band_count(k)?.n_band as f64;
    let n = b.centers.len();
    let mut q = KahanSum::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && geodesic(&b.centers[i], &b.centers[j]) < 1e-14 {
                return Err(Error::Domain(format!("centres {i} and {j} coincide")));
            }
            q.add(
                b.weights[i]
                    * b.weights[j]
                    * kernel_band(k, geodesic(&b.centers[i], &b.centers[j])),
            );
        }
    }
    let q = q.value();
    if q < -1e-10 {
        return Err(Error::Numerical(format!(
            "Gram quadratic form is negative: {q:e}"
        )));
    }
    Ok((ratio * q.max(0.0)).sqrt())
}

fn check_center(x: &[f64]) -> Result<usize> {
    if x.len() < 3 || (norm(x) - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(
            "base point must be a unit vector in R^{d+1}, d ≥ 2".into(),
        ));
    }
    Ok(x.len() - 1)
}

/// η′ = max(1, ⌊min(η, 1/r)/C⌋).
pub fn eta_prime(eta: usize, r: f64, c: f64) -> usize {
    ((eta as f64).min(1.0 / r) / c).floor().max(1.0) as usize
}

/// min{r′ ≥ C·r²T : r′T + γ_d ∈ 2πℤ}.
pub fn r_tilde_asymptotic(d: usize, ell: usize, r: f64, c: f64) -> Result<f64> {
    let dc = DimConstants::new(d)?;
    let t = ell as f64;
    let k = ((c * r * r * t * t + dc.gamma_d) / TAU).ceil();
    Ok((TAU * k - dc.gamma_d) / t)
}

/// Local maximum of K_{ℓ,η′} within half a period 2π/ℓ of `theta`.
pub fn snap_to_crest(spec: KernelSpec, theta: f64) -> f64 {
    let h = PI / spec.ell() as f64;
    let f = |th: f64| kernel_band(spec, th);
    let n = 32;
    let (a0, b0) = ((theta - h).max(1e-9), (theta + h).min(PI));
    let step = (b0 - a0) / n as f64;
    let mut best = (f(a0), a0);
    for i in 1..=n {
        let th = a0 + step * i as f64;
        let v = f(th);
        if v > best.0 {
            best = (v, th);
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = ((best.1 - step).max(a0), (best.1 + step).min(b0));
    for _ in 0..80 {
        let c = b - g * (b - a);
        let e = a + g * (b - a);
        if f(c) > f(e) {
            b = e;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

/// Three-kernel sign-barrier around x at radius r. Centres sit at distance
/// r̃ in the tangent directions of the cube roots of unity; weights are
/// −s·(1, t₀, t₀).
pub fn sphere_sign_barrier(
    x: &[f64],
    r: f64,
    ell: usize,
    eta: usize,
    c: f64,
) -> Result<BarrierFunction> {
    let d = check_center(x)?;
    KernelSpec::new(d, ell, eta)?;
    if !(c > 0.0) {
        return Err(Error::Domain(format!(
            "construction constant must be positive, got {c}"
        )));
    }
    let t = ell as f64;
    if !(r > c / t) {
        return Err(Error::Regime(format!(
            "need r > C/T: r = {r}, C/T = {}",
            c / t
        )));
    }
    if !(r < 1.0 / (c * t.sqrt())) {
        return Err(Error::Regime(format!(
            "need r < 1/(C√T): r = {r}, 1/(C√T) = {}",
            1.0 / (c * t.sqrt())
        )));
    }
    let ep = eta_prime(eta, r, c);
    let kspec = KernelSpec::new(d, ell, ep)?;
    let r_tilde = snap_to_crest(kspec, r_tilde_asymptotic(d, ell, r, c)?);
    if r_tilde + r >= PI {
        return Err(Error::Regime(format!(
            "centre distance r̃ = {r_tilde} leaves the sphere"
        )));
    }
    let dc = DimConstants::new(d)?;
    let s = 2.0 / (dc.kernel_amplitude() * EPS0) * (r_tilde * t).powf((d as f64 - 1.0) / 2.0);
    let frame = tangent_frame(x);
    let dirs: [[f64; 2]; 3] = [[1.0, 0.0], V2, V3];
    let centers = dirs
        .iter()
        .map(|v| {
            let mut w = vec![0.0; d];
            w[0] = r_tilde * v[0];
            w[1] = r_tilde * v[1];
            exp_map(x, &frame, &w)
        })
        .collect();
    Ok(BarrierFunction {
        centers,
        weights: vec![-s, -s * T0, -s * T0],
        ell,
        eta,
        eta_prime: ep,
        s,
        d,
        base: x.to_vec(),
        r_tilde,
    })
}

/// Single-kernel level-barrier c_d^{−1}(rT)^{(d−1)/2}·K_{ℓ,η′}(x, ·); the
/// ambient band is (ℓ, η′).
pub fn level_barrier(
    x: &[f64],
    r: f64,
    ell: usize,
    eta_prime: usize,
    c: f64,
) -> Result<BarrierFunction> {
    let d = check_center(x)?;
    KernelSpec::new(d, ell, eta_prime)?;
    let t = ell as f64;
    if !(r > c / t && r < 1.0 / c) {
        return Err(Error::Regime(format!(
            "need C/T < r < 1/C: r = {r}, C = {c}, T = {t}"
        )));
    }
    let dc = DimConstants::new(d)?;
    let s = (r * t).powf((d as f64 - 1.0) / 2.0) / dc.kernel_amplitude();
    Ok(BarrierFunction {
        centers: vec![x.to_vec()],
        weights: vec![s],
        ell,
        eta: eta_prime,
        eta_prime,
        s,
        d,
        base: x.to_vec(),
        r_tilde: 0.0,
    })
}

/// Limiting bias φ(u) = 2·arccos(u)/π − 1 of the level-barrier.
pub fn limiting_bias(u: f64) -> f64 {
    2.0 * u.clamp(-1.0, 1.0).acos() / PI - 1.0
}

/// C_h with ‖h‖² ≤ C_h·max{1, rη}·(rT)^{2(d−1)} for the sign-barrier on S²,
/// from ‖h‖ ≤ s(1+2t₀)√(N/N′), N/N′ ≤ 2C·max{1, rη} and
/// r̃T ≤ C(rT)² + 3π ≤ (rT)²(C + 3π/C²).
pub fn sign_barrier_norm_constant(d: usize, c: f64) -> Result<f64> {
    if d != 2 {
        return Err(Error::Domain(
            "the band-count ratio bound is derived for d = 2".into(),
        ));
    }
    let cd = DimConstants::new(d)?.kernel_amplitude();
    let df = d as f64;
    Ok(
        2.0 * c * (1.0 + 2.0 * T0).powi(2) * 4.0 / (cd * cd * EPS0 * EPS0)
            * (c + 3.0 * PI / (c * c)).powf(df - 1.0),
    )
}

/// Pull-back check of the sign-barrier near its base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullbackReport {
    /// sup |(ε₀/2)·h(exp_x z) − w_{t₀}(Tz/2π)| over |z| ≤ r.
    pub sup_error: f64,
    /// sup |w_{t₀}(Tz/2π)| over the same disc.
    pub sup_model: f64,
    pub points: usize,
}

/// Compares the barrier with the rescaled hexagonal model on a polar grid.
pub fn pullback_error(
    b: &BarrierFunction,
    r: f64,
    radial: usize,
    angular: usize,
) -> PullbackReport {
    let frame = tangent_frame(&b.base);
    let model = HexBarrier { t: T0 };
    let t = b.ell as f64;
    let mut err: f64 = 0.0;
    let mut sup: f64 = 0.0;
    let mut points = 0;
    for i in 0..=radial {
        let rho = r * i as f64 / radial.max(1) as f64;
        let m = if i == 0 { 1 } else { angular };
        for j in 0..m {
            let a = TAU * j as f64 / m as f64;
            let z = [rho * a.cos(), rho * a.sin()];
            let mut w = vec![0.0; b.d];
            w[0] = z[0];
            w[1] = z[1];
            let y = exp_map(&b.base, &frame, &w);
            let wm = model.eval([t * z[0] / TAU, t * z[1] / TAU]);
            err = err.max((0.5 * EPS0 * b.eval(&y) - wm).abs());
            sup = sup.max(wm.abs());
            points += 1;
        }
    }
    PullbackReport {
        sup_error: err,
        sup_model: sup,
        points,
    }
}

/// max over |w| ≤ r of |d(exp_x(r̃v), exp_x(w)) − (r̃ − ⟨w, v⟩)|·r̃/r², the
/// constant in the O(r²/r̃) distortion of distances to a far centre.
pub fn distance_distortion(x: &[f64], r_tilde: f64, r: f64, samples: usize) -> Result<f64> {
    let d = check_center(x)?;
    let frame = tangent_frame(x);
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    let xi = exp_map(
        x,
        &frame,
        &v.iter().map(|c| c * r_tilde).collect::<Vec<_>>(),
    );
    let mut worst: f64 = 0.0;
    for i in 0..=samples {
        let rho = r * i as f64 / samples.max(1) as f64;
        for j in 0..samples.max(1) {
            let a = TAU * j as f64 / samples.max(1) as f64;
            let mut w = vec![0.0; d];
            w[0] = rho * a.cos();
            w[1] = rho * a.sin();
            let dist = geodesic(&xi, &exp_map(x, &frame, &w));
            let lin = r_tilde - dot(&w, &v);
            worst = worst.max((dist - lin).abs() * r_tilde / (r * r));
        }
    }
    Ok(worst)
}

/// Radial density profile ξ(ρ) = ±J₀(sρ) with s a J₁ zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiProfile {
    pub r: f64,
    pub k: usize,
    pub s: f64,
    pub sign: f64,
    /// min_m |r·s − z_m|.
    pub separation: f64,
}

pub const XI_SEPARATION: f64 = 0.05;
const XI_MAX_K: usize = 50;

/// Smallest k ≤ 50 whose zero z_k has r·z_k at least 0.05 away from every
/// J₁ zero.
pub fn xi_profile(r: f64) -> Result<XiProfile> {
    if !(r > 1.0 && r.is_finite()) {
        return Err(Error::Domain(format!(
            "profile radius must exceed 1, got {r}"
        )));
    }
    let mut zeros: Vec<f64> = Vec::new();
    let mut scanned = Vec::new();
    for k in 1..=XI_MAX_K {
        let s = bessel_j1_zero(k)?;
        let rs = r * s;
        while zeros.last().map_or(true, |&z| z <= rs + 1.0) {
            zeros.push(bessel_j1_zero(zeros.len() + 1)?);
        }
        let sep = zeros
            .iter()
            .map(|z| (rs - z).abs())
            .fold(f64::INFINITY, f64::min);
        if sep > XI_SEPARATION {
            let sign = if bessel_j_unchecked(2, rs) < 0.0 {
                -1.0
            } else {
                1.0
            };
            return Ok(XiProfile {
                r,
                k,
                s,
                sign,
                separation: sep,
            });
        }
        scanned.push(sep);
    }
    Err(Error::Numerical(format!(
        "no admissible Bessel zero for r = {r}; separations {scanned:?}"
    )))
}

impl XiProfile {
    pub fn xi(&self, rho: f64) -> f64 {
        self.sign * bessel_j_unchecked(0, self.s * rho)
    }

    /// ∫_{B_ρ(0)} ξ = ±2πρ·J₁(sρ)/s.
    pub fn centred_integral(&self, rho: f64) -> f64 {
        self.sign * TAU * rho * bessel_j_unchecked(2, self.s * rho) / self.s
    }

    /// The value 2π|J₁(rs)|/s² as printed for ∫_{B_r(0)} ξ; it differs from
    /// the true integral by the factor r·s.
    pub fn printed_closed_form(&self) -> f64 {
        TAU * bessel_j_unchecked(2, self.r * self.s).abs() / (self.s * self.s)
    }
}

/// ∫_{B_ρ(x)} ξ(‖y‖) dy by Gauss–Legendre in the radius about x and the
/// periodic trapezoid rule in angle.
pub fn xi_integrals(profile: &XiProfile, x: [f64; 2], rho: f64) -> f64 {
    if rho <= 0.0 {
        return 0.0;
    }
    let reach = profile.s * (rho + x[0].hypot(x[1]));
    let nr = 24 + (2.0 * profile.s * rho).ceil() as usize;
    let na = 32 + (4.0 * reach).ceil() as usize;
    let mut acc = KahanSum::new();
    for (t, w) in gauss_legendre_on(nr, 0.0, rho) {
        let mut ring = KahanSum::new();
        for j in 0..na {
            let a = TAU * j as f64 / na as f64;
            ring.add(profile.xi((x[0] + t * a.cos()).hypot(x[1] + t * a.sin())));
        }
        acc.add(w * t * ring.value() * TAU / na as f64);
    }
    acc.value()
}

/// Boxes of prescribed area inside each cell of the R⁻¹-grid on
/// [−R, R]², realizing the density (1 + ξ)/2. Cells are generated lazily.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityDomains {
    profile: XiProfile,
    scale: f64,
}

/// Area of [a₁,b₁]×[a₂,b₂] ∩ B_ρ(c).
pub fn rect_disc_area(a: [f64; 2], b: [f64; 2], c: [f64; 2], rho: f64) -> f64 {
    let g = |x: f64, y: f64| quadrant_area(x - c[0], y - c[1], rho);
    (g(b[0], b[1]) - g(a[0], b[1]) - g(b[0], a[1]) + g(a[0], a[1])).max(0.0)
}

/// |{(u, v) ∈ B_ρ(0) : u ≤ x, v ≤ y}|.
fn quadrant_area(x: f64, y: f64, rho: f64) -> f64 {
    let x = x.clamp(-rho, rho);
    if x <= -rho || y <= -rho {
        return 0.0;
    }
    let f = |u: f64| {
        let u = u.clamp(-rho, rho);
        0.5 * (u * (rho * rho - u * u).max(0.0).sqrt() + rho * rho * (u / rho).asin())
    };
    let chord = |p: f64, q: f64| 2.0 * (f(q) - f(p));
    let lens = |p: f64, q: f64| y * (q - p) + f(q) - f(p);
    if y >= rho {
        return chord(-rho, x);
    }
    let u0 = (rho * rho - y * y).sqrt();
    let seg = |p: f64, q: f64, k: &dyn Fn(f64, f64) -> f64| {
        let q = q.min(x);
        if q > p {
            k(p, q)
        } else {
            0.0
        }
    };
    if y >= 0.0 {
        seg(-rho, -u0, &chord) + seg(-u0, u0, &lens) + seg(u0, rho, &chord)
    } else {
        seg(-u0, u0, &lens)
    }
}

impl DensityDomains {
    pub fn profile(&self) -> &XiProfile {
        &self.profile
    }
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Area of the sub-box of cell (i₁, i₂), the cell being
    /// R⁻¹(i₁, i₂) + R⁻¹[0,1]².
    pub fn cell_area(&self, i1: i64, i2: i64) -> f64 {
        let r2 = self.scale.powi(-2);
        let rho = ((i1 * i1 + i2 * i2) as f64).sqrt() / self.scale;
        (0.5 * r2 * (1.0 + self.profile.xi(rho))).clamp(1e-9, r2 - 1e-9)
    }

    /// Lower and upper corners of the centred sub-box of cell (i₁, i₂).
    pub fn sub_box(&self, i1: i64, i2: i64) -> ([f64; 2], [f64; 2]) {
        let h = 1.0 / self.scale;
        let half = 0.5 * self.cell_area(i1, i2).sqrt();
        let c = [(i1 as f64 + 0.5) * h, (i2 as f64 + 0.5) * h];
        ([c[0] - half, c[1] - half], [c[0] + half, c[1] + half])
    }

    fn cell_range(&self) -> (i64, i64) {
        let n = (self.scale * self.scale).round() as i64;
        (-n, n - 1)
    }

    /// Whether y lies in the union of sub-boxes.
    pub fn contains(&self, y: [f64; 2]) -> bool {
        let (lo, hi) = self.cell_range();
        let i1 = (y[0] * self.scale).floor() as i64;
        let i2 = (y[1] * self.scale).floor() as i64;
        if i1 < lo || i1 > hi || i2 < lo || i2 > hi {
            return false;
        }
        let (a, b) = self.sub_box(i1, i2);
        y[0] >= a[0] && y[0] <= b[0] && y[1] >= a[1] && y[1] <= b[1]
    }

    /// The ±1 field: +1 on the sub-boxes, −1 elsewhere.
    pub fn sign(&self, y: [f64; 2]) -> f64 {
        if self.contains(y) {
            1.0
        } else {
            -1.0
        }
    }

    /// |A ∩ B_ρ(x)|, exact per box.
    pub fn area_in_disc(&self, x: [f64; 2], rho: f64) -> f64 {
        let (lo, hi) = self.cell_range();
        let lo1 = (((x[0] - rho) * self.scale).floor() as i64).max(lo);
        let hi1 = (((x[0] + rho) * self.scale).floor() as i64).min(hi);
        let lo2 = (((x[1] - rho) * self.scale).floor() as i64).max(lo);
        let hi2 = (((x[1] + rho) * self.scale).floor() as i64).min(hi);
        let mut acc = KahanSum::new();
        for i1 in lo1..=hi1 {
            for i2 in lo2..=hi2 {
                let (a, b) = self.sub_box(i1, i2);
                let far = [
                    (x[0] - a[0]).abs().max((x[0] - b[0]).abs()),
                    (x[1] - a[1]).abs().max((x[1] - b[1]).abs()),
                ];
                if far[0].hypot(far[1]) <= rho {
                    acc.add((b[0] - a[0]) * (b[1] - a[1]));
                    continue;
                }
                let near = [
                    (a[0] - x[0]).max(0.0).max(x[0] - b[0]),
                    (a[1] - x[1]).max(0.0).max(x[1] - b[1]),
                ];
                if near[0].hypot(near[1]) >= rho {
                    continue;
                }
                acc.add(rect_disc_area(a, b, x, rho));
            }
        }
        acc.value()
    }

    /// Defect (1/|B|)∫_B (±1 field) over B_ρ(x).
    pub fn disc_defect(&self, x: [f64; 2], rho: f64) -> f64 {
        let vol = PI * rho * rho;
        (2.0 * self.area_in_disc(x, rho) - vol) / vol
    }
}

/// Box domains at grid scale R ≥ 4.
pub fn density_domains(profile: &XiProfile, scale: f64) -> Result<DensityDomains> {
    if !(scale >= 4.0) {
        return Err(Error::Domain(format!(
            "grid scale must be at least 4, got {scale}"
        )));
    }
    Ok(DensityDomains {
        profile: *profile,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folded_measure_matches_brute_force() {
        let (alpha, beta) = (0.2, 0.7);
        for &b in &[0.1, 0.5, 0.9, 1.3, 2.6, 5.1] {
            let n = 200_000;
            let h = b / n as f64;
            let brute = (0..n)
                .filter(|&i| {
                    let s = (i as f64 + 0.5) * h;
                    let y = (PI * s).cos();
                    y <= (PI * alpha).cos() && y >= (PI * beta).cos()
                })
                .count() as f64
                * h;
            assert!(
                (folded_measure(b, alpha, beta) - brute).abs() < 1e-4,
                "b={b}"
            );
        }
    }

    #[test]
    fn hexagon_area_and_strip() {
        let dom = HexDomain::new(8).unwrap();
        assert!((dom.area() - HEX_AREA).abs() < 1e-12);
        assert!((dom.negative_area(0.0) - 1.0 / SQRT3).abs() < 1e-12);
    }

    #[test]
    fn quadrant_area_full_and_half() {
        let r = 1.3;
        assert!((quadrant_area(5.0, 5.0, r) - PI * r * r).abs() < 1e-12);
        assert!((quadrant_area(0.0, 5.0, r) - 0.5 * PI * r * r).abs() < 1e-12);
        assert!((quadrant_area(0.0, 0.0, r) - 0.25 * PI * r * r).abs() < 1e-12);
        let sq = rect_disc_area([-0.1, -0.1], [0.1, 0.1], [0.0, 0.0], 1.0);
        assert!((sq - 0.04).abs() < 1e-14);
    }

    #[test]
    fn limiting_bias_values() {
        assert!(limiting_bias(0.0).abs() < 1e-15);
        assert!((limiting_bias(0.5) + 1.0 / 3.0).abs() < 1e-12);
    }
}
