//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

/// J_n(t) = (1/π)∫₀^π cos(nτ − t sin τ) dτ by the trapezoid rule, which
/// converges geometrically for this periodic integrand.
pub fn bessel_j_int(n: i32, t: f64) -> f64 {
    let m = 4000 + (4.0 * t) as usize;
    let h = PI / m as f64;
    let f = |tau: f64| (n as f64 * tau - t * tau.sin()).cos();
    let mut s = 0.5 * (f(0.0) + f(PI));
    for i in 1..m {
        s += f(i as f64 * h);
    }
    s * h / PI
}

/// erf by its Maclaurin series; accurate to ~1e−15 for |x| ≤ 3.
pub fn erf_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

/// erfc(x) = (2/√π)∫_x^{x+12} e^{−s²} ds with composite Simpson.
pub fn erfc_quad(x: f64) -> f64 {
    let n = 200_000;
    let (a, b) = (x, x + 12.0);
    let h = (b - a) / n as f64;
    let f = |s: f64| (-s * s).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 / PI.sqrt() * s * h / 3.0
}

/// Γ by the Lanczos approximation (g = 7), independent of the library's.
pub fn gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Generalized binomial C(x, k) for real x.
pub fn binom(x: f64, k: usize) -> f64 {
    (0..k).map(|i| (x - i as f64) / (i + 1) as f64).product()
}

/// Explicit sum P_n^{(a,b)}(x) = Σ_s C(n+a, n−s)C(n+b, s)((x−1)/2)^s((x+1)/2)^{n−s}.
pub fn jacobi_sum(n: usize, a: f64, b: f64, x: f64) -> f64 {
    (0..=n)
        .map(|s| {
            binom(n as f64 + a, n - s)
                * binom(n as f64 + b, s)
                * ((x - 1.0) / 2.0).powi(s as i32)
                * ((x + 1.0) / 2.0).powi((n - s) as i32)
        })
        .sum()
}

/// Gegenbauer C_n^λ(t) from its explicit series, divided by C_n^λ(1).
pub fn gegenbauer_series_normalized(n: usize, lambda: f64, t: f64) -> f64 {
    let c = |t: f64| -> f64 {
        (0..=n / 2)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * gamma(n as f64 - k as f64 + lambda)
                    / (gamma(lambda) * gamma(k as f64 + 1.0) * gamma((n - 2 * k) as f64 + 1.0))
                    * (2.0 * t).powi((n - 2 * k) as i32)
            })
            .sum()
    };
    c(t) / c(1.0)
}

/// Legendre P_ℓ by the explicit sum 2^{−ℓ}Σ C(ℓ,k)² (t−1)^{ℓ−k}(t+1)^k.
pub fn legendre_sum(ell: usize, t: f64) -> f64 {
    jacobi_sum(ell, 0.0, 0.0, t)
}

/// Bisection root of f on [a, b].
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Unit vector from colatitude and longitude.
pub fn point(theta: f64, phi: f64) -> [f64; 3] {
    [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ]
}

/// Deterministic pseudo-random numbers in [0, 1) (SplitMix64).
pub struct Mix(pub u64);

impl Mix {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn unit(&mut self) -> [f64; 3] {
        let z = 2.0 * self.next() - 1.0;
        let phi = 2.0 * PI * self.next();
        point(z.acos(), phi)
    }
}

/// Legendre P_ℓ by Bonnet's recurrence.
pub fn legendre_rec(ell: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if ell == 0 {
        return 1.0;
    }
    for n in 1..ell {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * t * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Empirical covariance of two equally long series with known zero mean.
pub fn cov0(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}
