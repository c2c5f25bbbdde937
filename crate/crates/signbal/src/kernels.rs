//! Covariance kernels of band-limited random waves on S^d.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::AlfRecurrence;
use crate::quad::{gauss_legendre_on, ksum};
use crate::specfun::{
    bessel_j_unchecked, gegenbauer_normalized_unchecked, ln_gamma_f, DimConstants,
};

/// Dimension d, degree ℓ (identified with the energy T) and band width η.
/// The energy window is [ℓ−η+1, ℓ].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KernelSpec {
    d: usize,
    ell: usize,
    eta: usize,
}

impl KernelSpec {
    pub fn new(d: usize, ell: usize, eta: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!(
                "dimension must be at least 2, got {d}"
            )));
        }
        if eta < 1 || eta > ell {
            return Err(Error::Domain(format!("band width {eta} not in [1, {ell}]")));
        }
        // Σ_{k≤ℓ} n_k on S^d is n_ℓ on S^{d+1}, so checking it bounds every band count
        n_dim(d + 1, ell)?;
        Ok(Self { d, ell, eta })
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn eta(&self) -> usize {
        self.eta
    }

    /// Lowest degree of the window.
    pub fn ell_min(&self) -> usize {
        self.ell + 1 - self.eta
    }

    pub fn with_eta(&self, eta: usize) -> Result<Self> {
        Self::new(self.d, self.ell, eta)
    }
}

fn binom_u128(n: u128, k: u128) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.checked_mul(n - i)? / (i + 1);
    }
    Some(r)
}

/// Dimension of the degree-ℓ eigenspace on S^d.
pub fn n_dim(d: usize, ell: usize) -> Result<u64> {
    let overflow = || Error::Overflow(format!("n_dim({d}, {ell})"));
    let (d, l) = (d as u128, ell as u128);
    let a = binom_u128(l + d - 1, d - 1).ok_or_else(overflow)?;
    let b = if l + d >= 2 {
        binom_u128(l + d - 2, d - 1).ok_or_else(overflow)?
    } else {
        0
    };
    u64::try_from(a + b).map_err(|_| overflow())
}

/// Spectral counts of a band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralCounts {
    pub n_ell: u64,
    pub n_band: u64,
    pub n_full: u64,
}

/// Σ_{ℓ'=a}^{b} n_{ℓ'}.
fn count_range(d: usize, a: usize, b: usize) -> Result<u64> {
    let mut s: u64 = 0;
    for l in a..=b {
        s = s
            .checked_add(n_dim(d, l)?)
            .ok_or_else(|| Error::Overflow(format!("band count up to degree {b}")))?;
    }
    Ok(s)
}

/// N(ℓ) = Σ_{ℓ'=1}^{ℓ} n_{ℓ'}.
pub fn full_count(d: usize, ell: usize) -> Result<u64> {
    if ell == 0 {
        return Ok(0);
    }
    count_range(d, 1, ell)
}

pub fn band_count(spec: KernelSpec) -> Result<SpectralCounts> {
    Ok(SpectralCounts {
        n_ell: n_dim(spec.d, spec.ell)?,
        n_band: count_range(spec.d, spec.ell_min(), spec.ell)?,
        n_full: full_count(spec.d, spec.ell)?,
    })
}

/// Σ_{ℓ'=0}^{ℓ} n_{ℓ'} G_{ℓ'}(cos θ) through the single Jacobi polynomial
/// P_ℓ^{(d/2,(d−2)/2)}, normalized at θ = 0.
fn cumulative_sum(d: usize, ell: usize, theta: f64) -> f64 {
    let total = (full_count(d, ell).unwrap_or(u64::MAX) as f64) + 1.0;
    if ell == 0 {
        return 1.0;
    }
    let a = d as f64 / 2.0;
    let b = (d as f64 - 2.0) / 2.0;
    let (p, p1) = jacobi_pair(ell, a, b, theta.cos());
    total * p / p1
}

/// P_ℓ^{(a,b)}(t) and P_ℓ^{(a,b)}(1) from the same recurrence, so that the
/// ratio is exactly 1 at t = 1.
fn jacobi_pair(ell: usize, a: f64, b: f64, t: f64) -> (f64, f64) {
    if ell == 0 {
        return (1.0, 1.0);
    }
    let mut p0 = (1.0, 1.0);
    let mut p1 = ((a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0, a + 1.0);
    let ab2 = a * a - b * b;
    for n in 2..=ell {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let c0 = 2.0 * nf * (nf + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * s * (s - 2.0);
        let c1b = (s - 1.0) * ab2;
        let c2 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
        let next = (
            ((c1 * t + c1b) * p1.0 - c2 * p0.0) / c0,
            ((c1 + c1b) * p1.1 - c2 * p0.1) / c0,
        );
        p0 = p1;
        p1 = next;
    }
    (p1.0, p1.1)
}

/// Fully banded kernel K_{≤ℓ}(θ) over degrees 1..=ℓ, normalized by K(0) = 1.
pub fn kernel_full_band(d: usize, ell: usize, theta: f64) -> Result<f64> {
    if d < 2 || ell < 1 {
        return Err(Error::Domain(format!(
            "full-band kernel needs d ≥ 2, ℓ ≥ 1 (d={d}, ℓ={ell})"
        )));
    }
    let n = full_count(d, ell)? as f64;
    Ok((cumulative_sum(d, ell, theta) - 1.0) / n)
}

/// Band kernel K_{ℓ,η}(θ) via the telescoped full-band sums.
pub fn kernel_band(spec: KernelSpec, theta: f64) -> f64 {
    let counts = band_count(spec).expect("band count fits u64 for valid specs");
    let lo = spec.ell - spec.eta;
    let upper = cumulative_sum(spec.d, spec.ell, theta);
    let lower = cumulative_sum(spec.d, lo, theta);
    (upper - lower) / counts.n_band as f64
}

/// Direct eigen-sum Σ_{ℓ'∈W} n_{ℓ'} G_{ℓ'}(cos θ) / N(ℓ,η).
pub fn kernel_band_direct(spec: KernelSpec, theta: f64) -> f64 {
    let t = theta.cos();
    let mut num = Vec::with_capacity(spec.eta);
    for l in spec.ell_min()..=spec.ell {
        num.push(n_dim(spec.d, l).unwrap() as f64 * gegenbauer_normalized_unchecked(spec.d, l, t));
    }
    ksum(num) / band_count(spec).unwrap().n_band as f64
}

/// Main term and error envelope of the off-diagonal asymptotics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Asymptotic {
    pub main: f64,
    pub envelope: f64,
}

pub fn kernel_asymptotic(spec: KernelSpec, theta: f64) -> Result<Asymptotic> {
    if !(theta > 0.0) || theta > FRAC_PI_2 + 1e-12 {
        return Err(Error::Domain(format!(
            "asymptotics need θ in (0, π/2], got {theta}"
        )));
    }
    let dc = DimConstants::new(spec.d)?;
    let x = theta * spec.ell as f64;
    let amp = dc.kernel_amplitude() * x.powf(-(spec.d as f64 - 1.0) / 2.0);
    Ok(Asymptotic {
        main: amp * (x + dc.gamma_d).cos(),
        envelope: amp * (1.0 / x + spec.eta as f64 * theta),
    })
}

/// Main term c_d (rT)^{−(d−1)/2} cos(rT + γ_d) of the generic-manifold
/// asymptotics, with the manifold volume set to |S^d|.
pub fn wave_main_term(d: usize, t_energy: f64, r: f64) -> Result<f64> {
    let dc = DimConstants::new(d)?;
    let x = r * t_energy;
    Ok(dc.kernel_amplitude() * x.powf(-(d as f64 - 1.0) / 2.0) * (x + dc.gamma_d).cos())
}

/// Result of a correlation-decay scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayReport {
    pub max_abs: f64,
    pub argmax: f64,
    pub theta_min: f64,
    /// T^{−δ₁}
    pub rate: f64,
    /// max_abs · T^{δ₁}
    pub c1: f64,
}

/// Maximum of |K_{ℓ,η}| on [T^{−(1−δ₁)}, π/2].
pub fn kernel_decay_bound(spec: KernelSpec, delta1: f64) -> Result<DecayReport> {
    kernel_decay_scan(spec, delta1, 64)
}

/// As [`kernel_decay_bound`] with an explicit number of grid points per
/// oscillation period 2π/ℓ.
pub fn kernel_decay_scan(spec: KernelSpec, delta1: f64, per_period: usize) -> Result<DecayReport> {
    if !(delta1 > 0.0 && delta1 < 1.0) {
        return Err(Error::Domain(format!(
            "δ₁ must lie in (0, 1), got {delta1}"
        )));
    }
    let t = spec.ell as f64;
    let lo = t.powf(-(1.0 - delta1));
    let hi = FRAC_PI_2;
    if lo >= hi {
        return Err(Error::Domain("empty decay range".into()));
    }
    let step = 2.0 * PI / t / per_period as f64;
    let n = ((hi - lo) / step).ceil() as usize + 1;
    let f = |th: f64| kernel_band(spec, th).abs();
    let (mut best, mut arg, mut best_i) = (f(lo), lo, 0usize);
    for i in 1..=n {
        let th = (lo + i as f64 * step).min(hi);
        let v = f(th);
        if v > best {
            best = v;
            arg = th;
            best_i = i;
        }
    }
    // golden-section polish around the best grid point
    if best_i > 0 && best_i < n {
        let (mut a, mut b) = (arg - step, (arg + step).min(hi));
        let g = 0.5 * (5.0_f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let dd = a + g * (b - a);
            if f(c) > f(dd) {
                b = dd;
            } else {
                a = c;
            }
        }
        let m = 0.5 * (a + b);
        let v = f(m);
        if v > best {
            best = v;
            arg = m;
        }
    }
    let rate = t.powf(-delta1);
    Ok(DecayReport {
        max_abs: best,
        argmax: arg,
        theta_min: lo,
        rate,
        c1: best / rate,
    })
}

/// Which expression attains the minimum in a critical-radius formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// The log-power branch, attained when rη ≤ 1.
    Narrow,
    /// The band-width branch, attained when rη ≥ 1.
    Wide,
}

/// Upper and lower crossover radii for energy T and band width η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalRadii {
    pub r_bar: f64,
    pub r_under: f64,
    pub branch_bar: Branch,
    pub branch_under: Branch,
    /// (r̄T)^{d−1}·max{1, r̄η}, equal to log T.
    pub residual_bar: f64,
    /// (r T)^{2(d−1)}·max{1, r η} at r = r_under, equal to log T.
    pub residual_under: f64,
}

pub fn critical_radii(d: usize, t: f64, eta: f64) -> Result<CriticalRadii> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    if !(t >= 3.0) {
        return Err(Error::Domain(format!("critical radii need T ≥ 3, got {t}")));
    }
    if !(eta > 0.0) {
        return Err(Error::Domain(format!(
            "band width must be positive, got {eta}"
        )));
    }
    let df = d as f64;
    let lt = t.ln();
    let a = lt.powf(1.0 / (df - 1.0));
    let b = (t * lt / eta).powf(1.0 / df);
    let (rt_bar, branch_bar) = if a <= b {
        (a, Branch::Narrow)
    } else {
        (b, Branch::Wide)
    };
    let a = lt.powf(1.0 / (2.0 * (df - 1.0)));
    let b = (t * lt / eta).powf(1.0 / (2.0 * df - 1.0));
    let (rt_under, branch_under) = if a <= b {
        (a, Branch::Narrow)
    } else {
        (b, Branch::Wide)
    };
    let r_bar = rt_bar / t;
    let r_under = rt_under / t;
    let residual_bar = rt_bar.powf(df - 1.0) * (r_bar * eta).max(1.0);
    let residual_under = rt_under.powf(2.0 * (df - 1.0)) * (r_under * eta).max(1.0);
    Ok(CriticalRadii {
        r_bar,
        r_under,
        branch_bar,
        branch_under,
        residual_bar,
        residual_under,
    })
}

/// Monochromatic Euclidean covariance γ_d(t) = 2^{(d−2)/2}Γ(d/2) J_{(d−2)/2}(t)/t^{(d−2)/2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EuclideanKernel {
    d: usize,
}

impl EuclideanKernel {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!(
                "dimension must be at least 2, got {d}"
            )));
        }
        Ok(Self { d })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        let nu = (self.d as f64 - 2.0) / 2.0;
        if self.d == 2 {
            return bessel_j_unchecked(0, t);
        }
        if t < 1e-8 {
            return 1.0;
        }
        let c = (nu * std::f64::consts::LN_2 + ln_gamma_f(self.d as f64 / 2.0)).exp();
        c * bessel_j_unchecked(self.d as i32 - 2, t) / t.powf(nu)
    }
}

/// Largest eigenvalue of the cap Gram matrix of the band, with the bound ζ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InclusionNorm {
    pub i_squared: f64,
    /// Eigenvalue recomputed with doubled quadrature.
    pub i_squared_refined: f64,
    /// |S²|/N(ℓ,η), the full-sphere value.
    pub full_sphere: f64,
    pub radius: f64,
}

impl InclusionNorm {
    /// ζ(T,η;r) = c·rη·|S²|/N for r ≤ 1/η, and |S²|/N otherwise.
    pub fn zeta(&self, c: f64, eta: usize) -> f64 {
        let re = self.radius * eta as f64;
        if re <= 1.0 {
            c * re * self.full_sphere
        } else {
            self.full_sphere
        }
    }
}

/// Norm of the inclusion of the band into L² of a cap of angular radius r
/// (d = 2). By rotation invariance of the band the cap is placed at the
/// north pole, where the Gram matrix splits into blocks of fixed order m.
pub fn inclusion_norm(spec: KernelSpec, radius: f64, quad_nodes: usize) -> Result<InclusionNorm> {
    if spec.d != 2 {
        return Err(Error::Domain(
            "inclusion norm is implemented for d = 2".into(),
        ));
    }
    if !(radius > 0.0 && radius <= PI) {
        return Err(Error::Domain(format!(
            "cap radius must lie in (0, π], got {radius}"
        )));
    }
    if quad_nodes < 2 {
        return Err(Error::Domain("need at least two quadrature nodes".into()));
    }
    let counts = band_count(spec)?;
    let scale = 4.0 * PI / counts.n_band as f64;
    let a = gram_top_eigenvalue(spec, radius, quad_nodes) * scale;
    let b = gram_top_eigenvalue(spec, radius, 2 * quad_nodes) * scale;
    if (a - b).abs() > 1e-6 {
        return Err(Error::Numerical(format!(
            "inclusion norm unresolved: {a} vs {b} after doubling {quad_nodes} nodes"
        )));
    }
    Ok(InclusionNorm {
        i_squared: a,
        i_squared_refined: b,
        full_sphere: scale,
        radius,
    })
}

fn gram_top_eigenvalue(spec: KernelSpec, radius: f64, nodes: usize) -> f64 {
    let (lmin, lmax) = (spec.ell_min(), spec.ell);
    let rule = gauss_legendre_on(nodes, radius.cos(), 1.0);
    let rec = AlfRecurrence::new(lmax);
    let bands: Vec<_> = rule.iter().map(|&(z, _)| rec.band(lmin, z)).collect();
    let mut top: f64 = 0.0;
    for m in 0..=lmax {
        let degrees: Vec<usize> = (lmin.max(m)..=lmax).collect();
        let k = degrees.len();
        let mut g = DMatrix::<f64>::zeros(k, k);
        for (q, &(_, w)) in rule.iter().enumerate() {
            let vals: Vec<f64> = degrees.iter().map(|&l| bands[q].get(l, m)).collect();
            for i in 0..k {
                let wi = 2.0 * PI * w * vals[i];
                for j in i..k {
                    g[(i, j)] += wi * vals[j];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        let ev = g.symmetric_eigenvalues();
        top = top.max(ev.max());
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities() {
        for l in 0..50 {
            assert_eq!(n_dim(2, l).unwrap(), 2 * l as u64 + 1);
        }
        for d in 2..8 {
            assert_eq!(n_dim(d, 0).unwrap(), 1);
        }
        assert_eq!(n_dim(3, 2).unwrap(), 9);
        assert!(n_dim(40, 1_000_000).is_err());
    }

    #[test]
    fn counts() {
        let s = KernelSpec::new(2, 30, 1).unwrap();
        let c = band_count(s).unwrap();
        assert_eq!(c.n_band, c.n_ell);
        for eta in 1..=30u64 {
            let c = band_count(s.with_eta(eta as usize).unwrap()).unwrap();
            assert_eq!(c.n_band, eta * (2 * 30 - eta + 2));
        }
        let c = band_count(s.with_eta(30).unwrap()).unwrap();
        assert_eq!(c.n_band, c.n_full);
    }

    #[test]
    fn spec_validation() {
        assert!(KernelSpec::new(2, 10, 0).is_err());
        assert!(KernelSpec::new(2, 10, 11).is_err());
        assert!(KernelSpec::new(1, 10, 1).is_err());
    }

    #[test]
    fn normalization_at_origin() {
        for d in [2, 3, 4] {
            for ell in [1, 10, 200, 500] {
                assert!((kernel_full_band(d, ell, 0.0).unwrap() - 1.0).abs() < 1e-10);
                for eta in [1, ell / 2 + 1, ell] {
                    let s = KernelSpec::new(d, ell, eta).unwrap();
                    assert!((kernel_band(s, 0.0) - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn d2_single_degree_is_legendre() {
        let s = KernelSpec::new(2, 37, 1).unwrap();
        for th in [0.01_f64, 0.3, 1.2, 2.9] {
            let p = crate::specfun::legendre(37, th.cos()).unwrap();
            assert!((kernel_band(s, th) - p).abs() < 1e-11);
        }
    }

    #[test]
    fn asymptotic_constants() {
        let s = KernelSpec::new(2, 500, 1).unwrap();
        let a = kernel_asymptotic(s, 0.05).unwrap();
        let amp = (2.0 / PI).sqrt() * (25.0_f64).powf(-0.5);
        assert!((a.main - amp * (25.0 - PI / 4.0).cos()).abs() < 1e-14);
        assert!(kernel_asymptotic(s, 0.0).is_err());
    }

    #[test]
    fn critical_radii_branches() {
        let t = 1000.0;
        let c = critical_radii(2, t, 1.0).unwrap();
        assert!((c.r_bar - t.ln() / t).abs() < 1e-15);
        assert!((c.r_under - t.ln().sqrt() / t).abs() < 1e-15);
        let c = critical_radii(2, t, t).unwrap();
        assert!((c.r_bar - t.ln().sqrt() / t).abs() < 1e-15);
        assert!(critical_radii(2, 2.0, 1.0).is_err());
    }

    #[test]
    fn euclidean_kernel_at_zero() {
        for d in 2..6 {
            let k = EuclideanKernel::new(d).unwrap();
            assert!((k.eval(0.0) - 1.0).abs() < 1e-12);
            assert!((k.eval(1e-4) - 1.0).abs() < 1e-7);
        }
        // d = 3: sin t / t
        let k = EuclideanKernel::new(3).unwrap();
        assert!((k.eval(2.5) - 2.5_f64.sin() / 2.5).abs() < 1e-13);
    }

    #[test]
    fn inclusion_full_sphere() {
        let s = KernelSpec::new(2, 12, 3).unwrap();
        let r = inclusion_norm(s, PI, 16).unwrap();
        assert!((r.i_squared - r.full_sphere).abs() < 1e-10);
    }
}
