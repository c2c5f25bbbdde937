mod common;

use std::f64::consts::PI;

use common::*;
use signbal::constants::INCLUSION_C;
use signbal::kernels::*;
use signbal::specfun::{bessel_j, gegenbauer_normalized, legendre, BesselOrder, DimConstants};

fn spec(d: usize, ell: usize, eta: usize) -> KernelSpec {
    KernelSpec::new(d, ell, eta).unwrap()
}

#[test]
fn spec_validation() {
    assert!(KernelSpec::new(1, 10, 1).is_err());
    assert!(KernelSpec::new(2, 10, 0).is_err());
    assert!(KernelSpec::new(2, 10, 11).is_err());
    assert!(KernelSpec::new(2, 10, 10).is_ok());
    assert!(matches!(
        KernelSpec::new(200, 100_000, 1),
        Err(signbal::Error::Overflow(_))
    ));
}

#[test]
fn multiplicities() {
    for l in 0..300 {
        assert_eq!(n_dim(2, l).unwrap(), 2 * l as u64 + 1);
    }
    for d in 2..8 {
        assert_eq!(n_dim(d, 0).unwrap(), 1);
    }
    assert_eq!(n_dim(3, 2).unwrap(), 9);
    // (ℓ+1)² on S³
    for l in 0..50 {
        assert_eq!(n_dim(3, l).unwrap(), (l as u64 + 1).pow(2));
    }
    assert!(n_dim(60, 1_000_000).is_err());
}

#[test]
fn band_counts() {
    for ell in [1usize, 7, 40, 333] {
        assert_eq!(
            band_count(spec(2, ell, 1)).unwrap().n_band,
            n_dim(2, ell).unwrap()
        );
        for eta in [1, ell / 2 + 1, ell] {
            let c = band_count(spec(2, ell, eta)).unwrap();
            let (l, e) = (ell as u64, eta as u64);
            assert_eq!(c.n_band, e * (2 * l - e + 2));
            assert!(c.n_ell > 0 && c.n_band > 0 && c.n_full > 0);
        }
        for d in 2..=4 {
            let c = band_count(spec(d, ell, ell)).unwrap();
            assert_eq!(c.n_band, c.n_full);
            let direct: u64 = (1..=ell).map(|l| n_dim(d, l).unwrap()).sum();
            assert_eq!(c.n_full, direct);
        }
    }
}

#[test]
fn full_band_examples() {
    for d in 2..=4 {
        for ell in [1usize, 5, 80, 400] {
            assert!((kernel_full_band(d, ell, 0.0).unwrap() - 1.0).abs() < 1e-10);
        }
    }
    let n: f64 = (1..=40).map(|l| n_dim(2, l).unwrap() as f64).sum();
    let want: f64 = (1..=40)
        .map(|l| (2 * l + 1) as f64 * legendre_sum(l, 0.3f64.cos()))
        .sum::<f64>()
        / n;
    assert!((kernel_full_band(2, 40, 0.3).unwrap() - want).abs() < 1e-10);
    for i in 0..=300 {
        let th = PI * i as f64 / 300.0;
        for d in 2..=3 {
            assert!(kernel_full_band(d, 120, th).unwrap().abs() <= 1.0 + 1e-10);
        }
    }
}

#[test]
fn full_band_large_degree_finite() {
    for ell in [151usize, 400, 2000] {
        for i in 0..50 {
            let v = kernel_full_band(3, ell, 0.06 * i as f64).unwrap();
            assert!(v.is_finite() && v.abs() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn band_examples() {
    for &(d, ell, eta) in &[
        (2usize, 10usize, 1usize),
        (2, 300, 17),
        (3, 77, 77),
        (4, 50, 5),
    ] {
        assert!((kernel_band(spec(d, ell, eta), 0.0) - 1.0).abs() < 1e-10);
    }
    for ell in [3usize, 50, 400] {
        for i in 0..=100 {
            let th = PI * i as f64 / 100.0;
            let k = kernel_band(spec(2, ell, 1), th);
            assert!((k - legendre(ell, th.cos()).unwrap()).abs() < 1e-9);
            assert!(k.abs() <= 1.0 + 1e-9);
            let k3 = kernel_band(spec(3, ell, 1), th);
            assert!((k3 - gegenbauer_normalized(3, ell, th.cos()).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn telescoping_matches_direct_sum() {
    for d in 2..=3 {
        for ell in [1usize, 2, 9, 60, 200] {
            for eta in [1, 2, ell / 3 + 1, ell] {
                let s = spec(d, ell, eta.min(ell));
                let n = band_count(s).unwrap().n_band as f64;
                for i in 0..=60 {
                    let th = PI * i as f64 / 60.0;
                    let diff = n * (kernel_band(s, th) - kernel_band_direct(s, th));
                    assert!(
                        diff.abs() < 1e-8 * n.max(1.0),
                        "d={d} ℓ={ell} η={eta} θ={th}: {diff}"
                    );
                }
            }
        }
    }
}

#[test]
fn direct_sum_against_series_oracle() {
    let s = spec(4, 12, 4);
    let n = band_count(s).unwrap().n_band as f64;
    for &th in &[0.1, 0.7, 2.0] {
        let want: f64 = (9..=12)
            .map(|l| {
                n_dim(4, l).unwrap() as f64 * gegenbauer_series_normalized(l, 1.5, f64::cos(th))
            })
            .sum::<f64>()
            / n;
        assert!((kernel_band(s, th) - want).abs() < 1e-10);
    }
}

#[test]
fn asymptotic_constants() {
    let a = kernel_asymptotic(spec(2, 500, 1), 0.05).unwrap();
    let x: f64 = 25.0;
    assert!((a.main - (2.0 / PI).sqrt() / x.sqrt() * (x - PI / 4.0).cos()).abs() < 1e-12);
    assert!((DimConstants::new(2).unwrap().kernel_amplitude() - 0.79788).abs() < 1e-5);
    assert!(kernel_asymptotic(spec(2, 500, 1), 0.0).is_err());
    assert!(kernel_asymptotic(spec(2, 500, 1), 2.0).is_err());
}

#[test]
fn asymptotic_envelope() {
    let s = spec(2, 500, 1);
    let a = kernel_asymptotic(s, 0.05).unwrap();
    assert!((kernel_band(s, 0.05) - a.main).abs() <= 10.0 * a.envelope);
    for d in 2..=3 {
        for ell in [200usize, 500] {
            for eta in [1, (ell as f64).sqrt() as usize] {
                let s = spec(d, ell, eta);
                let lo = 10.0 / ell as f64;
                for i in 0..=400 {
                    let th = lo + (0.05 - lo) * i as f64 / 400.0;
                    let a = kernel_asymptotic(s, th).unwrap();
                    let err = (kernel_band(s, th) - a.main).abs();
                    assert!(
                        err <= 10.0 * a.envelope,
                        "d={d} ℓ={ell} η={eta} θ={th}: {err} vs {}",
                        a.envelope
                    );
                }
            }
        }
    }
}

#[test]
fn general_wave_main_term() {
    for d in 2..=3 {
        for ell in [200usize, 500] {
            let eta = (ell as f64).powf(0.6) as usize;
            let s = spec(d, ell, eta);
            for i in 0..=200 {
                let rt = 10.0 + 40.0 * i as f64 / 200.0;
                let r = rt / ell as f64;
                let main = wave_main_term(d, ell as f64, r).unwrap();
                let env = kernel_asymptotic(s, r).unwrap();
                assert!((main - env.main).abs() < 1e-12);
                assert!((kernel_band(s, r) - main).abs() <= 10.0 * env.envelope);
            }
        }
    }
}

#[test]
fn decay_examples() {
    let s = spec(2, 300, 1);
    let rep = kernel_decay_bound(s, 0.25).unwrap();
    assert!(rep.c1 <= 5.0, "C₁ = {}", rep.c1);
    assert!((rep.rate - 300f64.powf(-0.25)).abs() < 1e-15);
    assert!((rep.theta_min - 300f64.powf(-0.75)).abs() < 1e-15);
    let fine = kernel_decay_scan(s, 0.25, 128).unwrap();
    assert!((fine.max_abs - rep.max_abs).abs() < 1e-3);
    let sub = kernel_decay_bound(s, 0.5).unwrap();
    assert!(sub.max_abs <= rep.max_abs + 1e-12);
    assert!(kernel_decay_bound(s, 0.0).is_err());
    assert!(kernel_decay_bound(s, 1.0).is_err());
}

#[test]
fn decay_against_grid_oracle() {
    let s = spec(2, 300, 1);
    let rep = kernel_decay_bound(s, 0.25).unwrap();
    let lo = rep.theta_min;
    let oracle = (0..=200_000)
        .map(|i| lo + (PI / 2.0 - lo) * i as f64 / 200_000.0)
        .map(|th| legendre(300, th.cos()).unwrap().abs())
        .fold(0.0, f64::max);
    assert!((rep.max_abs - oracle).abs() < 1e-6);
}

#[test]
fn critical_radius_examples() {
    for &t in &[3.0, 10.0, 100.0, 1e4, 1e6] {
        let lt: f64 = f64::ln(t);
        let c = critical_radii(2, t, 1.0).unwrap();
        assert!((c.r_bar - lt / t).abs() < 1e-14 * lt);
        assert!((c.r_under - lt.sqrt() / t).abs() < 1e-14 * lt);
        let c = critical_radii(2, t, t).unwrap();
        assert!((c.r_bar - lt.sqrt() / t).abs() < 1e-14 * lt);
    }
    assert!(critical_radii(2, 2.9, 1.0).is_err());
}

#[test]
fn critical_radius_residuals() {
    for d in 2..=4 {
        for &t in &[3.0f64, 50.0, 800.0, 1e5] {
            for &eta in &[1.0, t.sqrt(), t / 4.0, t] {
                let c = critical_radii(d, t, eta).unwrap();
                let lt = f64::ln(t);
                assert!(
                    (c.residual_bar - lt).abs() < 1e-9 * lt,
                    "d={d} T={t} η={eta}"
                );
                assert!((c.residual_under - lt).abs() < 1e-9 * lt);
                assert!(c.r_under <= c.r_bar);
                if t >= 50.0 {
                    assert!(c.r_bar > 1.0 / t && c.r_under > 1.0 / t);
                }
            }
        }
    }
}

#[test]
fn euclidean_kernel() {
    let k = EuclideanKernel::new(2).unwrap();
    for i in 0..500 {
        let t = 0.1 * i as f64;
        assert!((k.eval(t) - bessel_j(BesselOrder::integer(0).unwrap(), t).unwrap()).abs() < 1e-12);
    }
    for d in 2..=5 {
        assert_eq!(EuclideanKernel::new(d).unwrap().eval(0.0), 1.0);
    }
    // d = 3: sin t / t
    let k3 = EuclideanKernel::new(3).unwrap();
    for &t in &[1e-3, 0.5, 4.0, 30.0] {
        assert!((k3.eval(t) - t.sin() / t).abs() < 1e-12);
    }
    assert!(EuclideanKernel::new(1).is_err());
}

#[test]
fn inclusion_full_sphere() {
    for &(ell, eta) in &[(10usize, 1usize), (20, 5), (30, 30)] {
        let s = spec(2, ell, eta);
        let inc = inclusion_norm(s, PI, 64).unwrap();
        let want = 4.0 * PI / band_count(s).unwrap().n_band as f64;
        assert!((inc.i_squared - want).abs() < 1e-10 * want);
        assert_eq!(inc.full_sphere, want);
    }
}

#[test]
fn inclusion_bound_and_monotone() {
    for eta in [1usize, 10] {
        let s = spec(2, 60, eta);
        let mut prev = 0.0;
        let mut radii = vec![2.0 / 60.0, 0.05, 1.0 / eta as f64, 0.3, 1.5, 2.0];
        radii.sort_by(f64::total_cmp);
        for r in radii {
            let inc = inclusion_norm(s, r, 200).unwrap();
            assert!(inc.i_squared >= prev - 1e-12);
            prev = inc.i_squared;
            if r * eta as f64 <= 1.0 {
                assert!(inc.i_squared <= inc.zeta(INCLUSION_C, eta), "η={eta} r={r}");
            }
            assert!(inc.i_squared <= inc.full_sphere * (1.0 + 1e-9));
        }
    }
}

#[test]
fn inclusion_rejects_bad_input() {
    assert!(inclusion_norm(spec(3, 10, 1), 0.5, 64).is_err());
    assert!(inclusion_norm(spec(2, 10, 1), 0.0, 64).is_err());
    assert!(inclusion_norm(spec(2, 10, 1), 0.5, 1).is_err());
    assert!(inclusion_norm(spec(2, 40, 1), 0.5, 3).is_err());
}
