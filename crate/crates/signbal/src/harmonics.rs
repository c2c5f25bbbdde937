//! Real orthonormal spherical harmonics on S² and fast ring synthesis.
//!
//! Coefficients of a band [ℓ_min, ℓ_max] are packed degree by degree, each
//! degree as m = 0, then (m, cos), (m, sin) for m = 1..=ℓ.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

const RESCALE: f64 = 1e200;

/// Number of packed coefficients for degrees lmin..=lmax.
pub fn band_len(lmin: usize, lmax: usize) -> usize {
    (lmin..=lmax).map(|l| 2 * l + 1).sum()
}

/// Offset of degree `l` within a packed coefficient vector starting at `lmin`.
pub fn degree_offset(lmin: usize, l: usize) -> usize {
    l * l - lmin * lmin
}

/// Precomputed coefficients of the normalized associated Legendre
/// recurrence up to degree `lmax`.
#[derive(Debug, Clone)]
pub struct AlfRecurrence {
    lmax: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    ln_mm: Vec<f64>,
}

fn tri(l: usize) -> usize {
    l * (l + 1) / 2
}

impl AlfRecurrence {
    pub fn new(lmax: usize) -> Self {
        let mut a = vec![0.0; tri(lmax + 1)];
        let mut b = vec![0.0; tri(lmax + 1)];
        for l in 0..=lmax {
            for m in 0..l.saturating_sub(1) {
                let (lf, mf) = (l as f64, m as f64);
                a[tri(l) + m] = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let l1 = lf - 1.0;
                b[tri(l) + m] = ((l1 * l1 - mf * mf) / (4.0 * l1 * l1 - 1.0)).sqrt();
            }
        }
        let mut ln_mm = Vec::with_capacity(lmax + 1);
        let mut acc = -0.5 * (4.0 * PI).ln();
        ln_mm.push(acc);
        for k in 1..=lmax {
            let kf = k as f64;
            acc += 0.5 * ((2.0 * kf + 1.0) / (2.0 * kf)).ln();
            ln_mm.push(acc);
        }
        Self { lmax, a, b, ln_mm }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// λ_ℓ^m(z) for ℓ in lmin..=lmax, normalized so that
    /// ∫_{S²} (λ_ℓ^m(cos θ))² · (cos mφ or 1)² dσ matches orthonormal
    /// complex harmonics.
    pub fn band(&self, lmin: usize, z: f64) -> AlfBand {
        let lmax = self.lmax;
        assert!(lmin <= lmax);
        let mut values = vec![0.0; tri(lmax + 1) - tri(lmin)];
        let base = tri(lmin);
        let z = z.clamp(-1.0, 1.0);
        let sin_t = (1.0 - z * z).max(0.0).sqrt();
        let ln_sin = sin_t.ln();
        for m in 0..=lmax {
            if m > 0 && sin_t == 0.0 {
                break;
            }
            let mut scale = self.ln_mm[m] + if m > 0 { m as f64 * ln_sin } else { 0.0 };
            let mut v_prev = 0.0;
            let mut v = 1.0;
            for l in m..=lmax {
                if l == m + 1 {
                    v_prev = v;
                    v *= (2.0 * m as f64 + 3.0).sqrt() * z;
                } else if l > m + 1 {
                    let k = tri(l) + m;
                    let next = self.a[k] * (z * v - self.b[k] * v_prev);
                    v_prev = v;
                    v = next;
                }
                if v.abs() > RESCALE {
                    v /= RESCALE;
                    v_prev /= RESCALE;
                    scale += RESCALE.ln();
                }
                if l >= lmin {
                    let val = if scale > -700.0 { v * scale.exp() } else { 0.0 };
                    values[tri(l) + m - base] = val;
                }
            }
        }
        AlfBand { lmin, lmax, values }
    }
}

/// Normalized associated Legendre values at one argument, degree-major.
#[derive(Debug, Clone)]
pub struct AlfBand {
    lmin: usize,
    lmax: usize,
    values: Vec<f64>,
}

impl AlfBand {
    pub fn get(&self, l: usize, m: usize) -> f64 {
        debug_assert!(l >= self.lmin && l <= self.lmax && m <= l);
        self.values[tri(l) - tri(self.lmin) + m]
    }

    /// Slice of λ_l^0..=λ_l^l.
    pub fn degree(&self, l: usize) -> &[f64] {
        let o = tri(l) - tri(self.lmin);
        &self.values[o..o + l + 1]
    }
}

/// Values of all real orthonormal harmonics of degrees lmin..=lmax at x,
/// in packed coefficient order.
pub fn basis_values(rec: &AlfRecurrence, lmin: usize, x: &[f64]) -> Vec<f64> {
    let lmax = rec.lmax();
    let alf = rec.band(lmin, x[2]);
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let (cphi, sphi) = if rho > 0.0 {
        (x[0] / rho, x[1] / rho)
    } else {
        (1.0, 0.0)
    };
    let mut cos_m = Vec::with_capacity(lmax + 1);
    let mut sin_m = Vec::with_capacity(lmax + 1);
    let (mut c, mut s) = (1.0, 0.0);
    for _ in 0..=lmax {
        cos_m.push(c);
        sin_m.push(s);
        let nc = c * cphi - s * sphi;
        s = s * cphi + c * sphi;
        c = nc;
    }
    let mut out = Vec::with_capacity(band_len(lmin, lmax));
    for l in lmin..=lmax {
        let lam = alf.degree(l);
        out.push(lam[0]);
        for m in 1..=l {
            out.push(SQRT_2 * lam[m] * cos_m[m]);
            out.push(SQRT_2 * lam[m] * sin_m[m]);
        }
    }
    out
}

/// Synthesis of band-limited fields on rings of constant colatitude with
/// `nphi` equispaced longitudes φ_j = 2πj/nphi.
#[derive(Clone)]
pub struct RingSynth {
    lmin: usize,
    lmax: usize,
    zs: Vec<f64>,
    bands: Vec<AlfBand>,
    nphi: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for RingSynth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RingSynth")
            .field("lmin", &self.lmin)
            .field("lmax", &self.lmax)
            .field("rings", &self.zs.len())
            .field("nphi", &self.nphi)
            .finish()
    }
}

impl RingSynth {
    /// `zs` are ring heights cos θ. Requires nphi > lmax.
    pub fn new(lmin: usize, lmax: usize, zs: Vec<f64>, nphi: usize) -> Self {
        assert!(nphi > lmax, "ring resolution must exceed the degree");
        let rec = AlfRecurrence::new(lmax);
        let bands = zs.iter().map(|&z| rec.band(lmin, z)).collect();
        let fft = FftPlanner::new().plan_fft_inverse(nphi);
        Self {
            lmin,
            lmax,
            zs,
            bands,
            nphi,
            fft,
        }
    }

    pub fn rings(&self) -> usize {
        self.zs.len()
    }

    pub fn nphi(&self) -> usize {
        self.nphi
    }

    pub fn zs(&self) -> &[f64] {
        &self.zs
    }

    pub fn scratch(&self) -> SynthScratch {
        SynthScratch {
            buf: vec![Complex::new(0.0, 0.0); self.nphi],
            fft_scratch: vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()],
            a: vec![0.0; self.lmax + 1],
            b: vec![0.0; self.lmax + 1],
        }
    }

    /// Writes f on ring `i` into `out` (length nphi), where
    /// f = Σ_l w_l Σ_m coeff·Y_{lm} with per-degree weights `weights`.
    pub fn ring(
        &self,
        i: usize,
        coeffs: &[f64],
        weights: &[f64],
        scratch: &mut SynthScratch,
        out: &mut [f64],
    ) {
        let SynthScratch {
            buf,
            fft_scratch,
            a,
            b,
        } = scratch;
        a.iter_mut().for_each(|v| *v = 0.0);
        b.iter_mut().for_each(|v| *v = 0.0);
        let band = &self.bands[i];
        for (k, l) in (self.lmin..=self.lmax).enumerate() {
            let w = weights[k];
            let lam = band.degree(l);
            let c = &coeffs[degree_offset(self.lmin, l)..degree_offset(self.lmin, l + 1)];
            a[0] += w * c[0] * lam[0];
            let ws = w * SQRT_2;
            for m in 1..=l {
                let lw = ws * lam[m];
                a[m] += lw * c[2 * m - 1];
                b[m] += lw * c[2 * m];
            }
        }
        buf.iter_mut().for_each(|v| *v = Complex::new(0.0, 0.0));
        for m in 0..=self.lmax {
            buf[m] = Complex::new(a[m], -b[m]);
        }
        self.fft.process_with_scratch(buf, fft_scratch);
        for (o, v) in out.iter_mut().zip(buf.iter()) {
            *o = v.re;
        }
    }
}

/// Per-thread buffers for [`RingSynth::ring`].
#[derive(Debug, Clone)]
pub struct SynthScratch {
    buf: Vec<Complex<f64>>,
    fft_scratch: Vec<Complex<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
}
