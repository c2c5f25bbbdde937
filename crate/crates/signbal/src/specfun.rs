//! Orthogonal polynomials, Bessel functions of integer and half-integer
//! order, zeros of J₁ and the Gaussian distribution function.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const T_SLACK: f64 = 1e-12;

fn check_unit_interval(t: f64) -> Result<f64> {
    if !t.is_finite() || t.abs() > 1.0 + T_SLACK {
        return Err(Error::Domain(format!(
            "polynomial argument {t} outside [-1, 1]"
        )));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Degree and Jacobi parameters of a polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyOrder {
    ell: usize,
    alpha: f64,
    beta: f64,
}

impl PolyOrder {
    pub fn new(ell: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::Domain(format!(
                "Jacobi parameters must exceed -1, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { ell, alpha, beta })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Bessel order ν, stored as the integer 2ν.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BesselOrder(i32);

impl BesselOrder {
    pub fn from_twice(p: i32) -> Result<Self> {
        if p < -2 {
            return Err(Error::Domain(format!("Bessel order {p}/2 below -1")));
        }
        Ok(Self(p))
    }

    pub fn integer(n: i32) -> Result<Self> {
        Self::from_twice(2 * n)
    }

    pub fn twice(&self) -> i32 {
        self.0
    }

    pub fn nu(&self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(&self) -> bool {
        self.0 % 2 == 0
    }
}

/// Dimensional constants of S^d and of the unit d-ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimConstants {
    pub d: usize,
    /// Volume of the unit d-ball.
    pub v_d: f64,
    /// Surface volume |S^d|.
    pub s_d: f64,
    /// Phase offset (1−d)π/4.
    pub gamma_d: f64,
    pub c_cos: f64,
}

impl DimConstants {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!(
                "dimension must be at least 2, got {d}"
            )));
        }
        let df = d as f64;
        let v_d = PI.powf(df / 2.0) / gamma(df / 2.0 + 1.0);
        let s_d = 2.0 * PI.powf((df + 1.0) / 2.0) / gamma((df + 1.0) / 2.0);
        let gamma_d = (1.0 - df) * FRAC_PI_4;
        let c_cos = (2.0 / PI).sqrt() * (2.0 * PI).powf(df / 2.0) / v_d;
        Ok(Self {
            d,
            v_d,
            s_d,
            gamma_d,
            c_cos,
        })
    }

    /// Amplitude of the off-diagonal kernel asymptotics,
    /// (d−1)!·|S^d|/(2π)^{(d+1)/2}.
    pub fn kernel_amplitude(&self) -> f64 {
        let df = self.d as f64;
        gamma(df) * self.s_d / (2.0 * PI).powf((df + 1.0) / 2.0)
    }

    /// Leading coefficient of J_{d/2}(t) at t → 0, V_d/(2π)^{d/2}.
    pub fn bessel_small_t(&self) -> f64 {
        self.v_d / (2.0 * PI).powf(self.d as f64 / 2.0)
    }
}

/// Legendre polynomial P_ℓ(t).
pub fn legendre(ell: usize, t: f64) -> Result<f64> {
    let t = check_unit_interval(t)?;
    Ok(legendre_unchecked(ell, t))
}

pub(crate) fn legendre_unchecked(ell: usize, t: f64) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    let (mut p0, mut p1) = (1.0, t);
    for n in 2..=ell {
        let nf = n as f64;
        let p2 = ((2.0 * nf - 1.0) * t * p1 - (nf - 1.0) * p0) / nf;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Jacobi polynomial P_ℓ^{(α,β)}(t).
pub fn jacobi(order: PolyOrder, t: f64) -> Result<f64> {
    let t = check_unit_interval(t)?;
    Ok(jacobi_unchecked(order.ell, order.alpha, order.beta, t))
}

pub(crate) fn jacobi_unchecked(ell: usize, a: f64, b: f64, t: f64) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    let mut p0 = 1.0;
    let mut p1 = (a + 1.0) + (a + b + 2.0) * (t - 1.0) / 2.0;
    let ab2 = a * a - b * b;
    for n in 2..=ell {
        let nf = n as f64;
        let s = 2.0 * nf + a + b;
        let c0 = 2.0 * nf * (nf + a + b) * (s - 2.0);
        let c1 = (s - 1.0) * (s * (s - 2.0) * t + ab2);
        let c2 = 2.0 * (nf + a - 1.0) * (nf + b - 1.0) * s;
        let p2 = (c1 * p1 - c2 * p0) / c0;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// binom(ℓ+a, ℓ) = Γ(ℓ+a+1)/(Γ(ℓ+1)Γ(a+1)) as a running product.
pub fn binom_real(ell: usize, a: f64) -> f64 {
    (1..=ell).map(|k| (k as f64 + a) / k as f64).product()
}

/// log binom(ℓ+a, ℓ) via log-gamma.
pub fn ln_binom_real(ell: usize, a: f64) -> f64 {
    let l = ell as f64;
    ln_gamma(l + a + 1.0) - ln_gamma(l + 1.0) - ln_gamma(a + 1.0)
}

/// Normalized Gegenbauer polynomial G_{α;ℓ}(t) with α = (d−1)/2, so that
/// G(1) = 1. Equals P_ℓ^{(α−½,α−½)}(t)/binom(ℓ+d/2−1, ℓ).
pub fn gegenbauer_normalized(d: usize, ell: usize, t: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "dimension must be at least 2, got {d}"
        )));
    }
    let t = check_unit_interval(t)?;
    Ok(gegenbauer_normalized_unchecked(d, ell, t))
}

pub(crate) fn gegenbauer_normalized_unchecked(d: usize, ell: usize, t: f64) -> f64 {
    let lambda = (d as f64 - 1.0) / 2.0;
    if ell == 0 {
        return 1.0;
    }
    let (mut g0, mut g1) = (1.0, t);
    for n in 2..=ell {
        let nf = n as f64;
        let g2 = (2.0 * (nf + lambda - 1.0) * t * g1 - (nf - 1.0) * g0) / (nf + 2.0 * lambda - 1.0);
        g0 = g1;
        g1 = g2;
    }
    g1
}

/// Bessel function J_ν(t) of the first kind, ν = p/2.
pub fn bessel_j(order: BesselOrder, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::Domain(format!(
            "Bessel argument must be non-negative, got {t}"
        )));
    }
    Ok(bessel_j_unchecked(order.0, t))
}

pub(crate) fn bessel_j_unchecked(twice_nu: i32, t: f64) -> f64 {
    // J_{-n} = (-1)^n J_n for integer n
    if twice_nu < 0 && twice_nu % 2 == 0 {
        let n = -twice_nu / 2;
        let v = bessel_j_unchecked(-twice_nu, t);
        return if n % 2 == 0 { v } else { -v };
    }
    let nu = twice_nu as f64 / 2.0;
    if t == 0.0 {
        return match twice_nu {
            0 => 1.0,
            p if p > 0 => 0.0,
            _ => f64::INFINITY,
        };
    }
    if t < 12.0_f64.max(2.0 * nu) {
        bessel_series(nu, t)
    } else {
        bessel_hankel(nu, t)
    }
}

fn bessel_series(nu: f64, t: f64) -> f64 {
    let h = t / 2.0;
    let mut term = h.powf(nu) / gamma(nu + 1.0);
    let mut sum = 0.0;
    let mut peak: f64 = 0.0;
    let h2 = h * h;
    let mut k = 0.0;
    loop {
        sum += term;
        peak = peak.max(term.abs());
        k += 1.0;
        term *= -h2 / (k * (k + nu));
        if k > h && term.abs() <= 1e-17 * peak {
            break;
        }
        if k > 500.0 {
            break;
        }
    }
    sum
}

fn bessel_hankel(nu: f64, t: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let (mut p, mut q) = (0.0, 0.0);
    let mut term = 1.0_f64;
    let mut k = 0usize;
    loop {
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        k += 1;
        let kf = k as f64;
        let next = term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * t);
        if next == 0.0 || next.abs() >= term.abs() || next.abs() < 1e-17 {
            break;
        }
        term = next;
    }
    let chi = t - (nu / 2.0 + 0.25) * PI;
    (2.0 / (PI * t)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// k-th positive zero of J₁, by bisection inside a bracket around the
/// McMahon estimate (k+¼)π − 3/(8π(k+¼)).
pub fn bessel_j1_zero(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("Bessel zero index starts at 1".into()));
    }
    let beta = (k as f64 + 0.25) * PI;
    let est = beta - 3.0 / (8.0 * beta);
    let j1 = |x: f64| bessel_j_unchecked(2, x);
    let (mut lo, mut hi) = (est - 0.4, est + 0.4);
    let (mut flo, fhi) = (j1(lo), j1(hi));
    if flo * fhi > 0.0 {
        return Err(Error::Numerical(format!(
            "no sign change bracketing J1 zero {k}"
        )));
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let fm = j1(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Error function: a positive-term series for |x| < 3 and the Laplace
/// continued fraction for erfc beyond.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function 1 − erf(x).
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - erfc(-x)
    } else if x < 3.0 {
        1.0 - erf_series(x)
    } else {
        erfc_cf(x)
    }
}

// erf(x) = 2/√π · e^{−x²} Σ 2ⁿ x^{2n+1}/(2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > 1e-17 * sum {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

// erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))), modified Lentz
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..300 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Standard normal distribution function Φ(u).
pub fn gaussian_cdf(u: f64) -> f64 {
    0.5 * erfc(-u / SQRT_2)
}

/// Mean of H(Z − u) for standard Gaussian Z: τ(u) = 1 − 2Φ(u).
pub fn tau(u: f64) -> f64 {
    -erf(u / SQRT_2)
}

pub(crate) fn ln_gamma_f(x: f64) -> f64 {
    ln_gamma(x)
}

/// J'_ν via J'_ν = J_{ν−1} − (ν/t)J_ν.
pub fn bessel_j_derivative(order: BesselOrder, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("derivative needs t > 0, got {t}")));
    }
    let p = order.0;
    Ok(bessel_j_unchecked(p - 2, t) - (order.nu() / t) * bessel_j_unchecked(p, t))
}
