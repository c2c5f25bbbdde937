mod common;

use std::f64::consts::PI;

use common::*;
use signbal::defect::*;
use signbal::kernels::KernelSpec;
use signbal::sampler::{sample_band, sample_band_stream, BasisCache};
use signbal::specfun::tau;
use signbal::sphere::geodesic;

const POLE: [f64; 3] = [0.0, 0.0, 1.0];

/// Rotation about the y axis by angle a.
fn rot_y(a: f64, x: &[f64]) -> Vec<f64> {
    let (s, c) = a.sin_cos();
    vec![c * x[0] + s * x[2], x[1], -s * x[0] + c * x[2]]
}

/// Area of the intersection of two caps by a midpoint rule in (z, φ).
fn lens_area_brute(delta: f64, r1: f64, r2: f64) -> f64 {
    let c1 = POLE;
    let c2 = point(delta, 0.0);
    let (nz, nphi) = (2000, 4000);
    let mut acc = 0.0;
    for i in 0..nz {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / nz as f64;
        for j in 0..nphi {
            let y = point(z.acos(), 2.0 * PI * (j as f64 + 0.5) / nphi as f64);
            if geodesic(&y, &c1) <= r1 && geodesic(&y, &c2) <= r2 {
                acc += 1.0;
            }
        }
    }
    acc * 4.0 * PI / (nz * nphi) as f64
}

#[test]
fn cap_quadrature() {
    let c = point(0.8, 2.1);
    for &r in &[0.01, 0.3, 1.5, 3.0] {
        let cap = make_cap(&c, r, 12).unwrap();
        let want = 2.0 * PI * (1.0 - r.cos());
        assert!((cap.integrate(|_| 1.0) / want - 1.0).abs() < 1e-9);
        assert!(cap.nodes().iter().all(|x| geodesic(x, &c) <= r + 1e-12));
        assert!(cap.weights().iter().all(|&w| w > 0.0));
    }
    let full = make_cap(&c, PI - 1e-9, 12).unwrap();
    assert!((full.volume() - 4.0 * PI).abs() < 1e-9);
    assert!(make_cap(&c, 0.5, 3).is_err());
    assert!(make_cap(&c, 0.0, 8).is_err());
    assert!(make_cap(&[0.0, 0.0, 2.0], 0.5, 8).is_err());
}

#[test]
fn cap_zonal_integral() {
    // ∫_cap P_ℓ(cos ρ) = 2π(P_{ℓ−1}(cos r) − P_{ℓ+1}(cos r))/(2ℓ+1)
    let (ell, r) = (50usize, 0.3f64);
    let c = point(1.0, 0.5);
    let f = |x: &[f64]| legendre_rec(ell, geodesic(x, &c).cos());
    let a = make_cap(&c, r, 40).unwrap().integrate(f);
    let b = make_cap(&c, r, 80).unwrap().integrate(f);
    assert!((a - b).abs() < 1e-8);
    let want = 2.0 * PI * (legendre_rec(ell - 1, r.cos()) - legendre_rec(ell + 1, r.cos()))
        / (2 * ell + 1) as f64;
    assert!((b - want).abs() < 1e-10);
}

#[test]
fn three_sphere_caps() {
    let c = [0.0, 0.0, 0.0, 1.0];
    let cap = make_cap(&c, 0.7, 8).unwrap();
    let want = PI * (2.0 * 0.7 - (1.4f64).sin());
    assert!((cap.volume() - want).abs() < 1e-9 * want);
    assert!(cap.stochastic());
    let rep = volume_bias(|_| 1.0, &cap, 0.0);
    assert!(rep.stochastic);
    assert!(make_cap(&[0.0, 0.0, 0.0, 0.0, 1.0], 0.5, 8).is_err());
}

#[test]
fn volume_bias_examples() {
    let cap = make_cap(&POLE, 0.4, 10).unwrap();
    let rep = volume_bias(|_| 1.0, &cap, 0.0);
    assert_eq!(rep.d_tilde, 1.0);
    assert_eq!(rep.d_centred, 1.0 - tau(0.0));
    let full = make_cap(&POLE, PI, 16).unwrap();
    assert!(volume_bias(|x| x[0], &full, 0.0).d_tilde.abs() < 1e-12);
    assert_eq!(volume_bias(|_| -3.0, &cap, 0.0).d_tilde, -1.0);
    assert_eq!(volume_bias(|_| 0.0, &cap, 0.0).d_tilde, 1.0);
    assert!(volume_bias_values(&[1.0, 2.0], &cap, 0.0).is_err());
}

#[test]
fn gaussian_bias_is_centred() {
    let spec = KernelSpec::new(2, 20, 4).unwrap();
    let cap = make_cap(&point(0.9, 1.3), 0.35, 8).unwrap();
    let cache = BasisCache::new(spec, cap.nodes()).unwrap();
    let us = [0.0, 0.5, 1.0];
    let mut sums = [0.0; 3];
    let n = 10_000;
    for s in 0..n {
        let v = cache.eval_all(&sample_band_stream(spec, 8, s).unwrap());
        for (k, &u) in us.iter().enumerate() {
            sums[k] += volume_bias_values(&v, &cap, u).unwrap().d_centred;
        }
    }
    for s in sums {
        assert!((s / n as f64).abs() < 0.05);
    }
}

#[test]
fn sample_bias_matches_values_path() {
    let s = sample_band(30, 5, 1).unwrap();
    let cap = make_cap(&point(2.0, 4.0), 0.2, 8).unwrap();
    let a = volume_bias_sample(&s, &cap, 0.3).unwrap();
    let b = volume_bias(|x| signbal::sampler::evaluate(&s, x).unwrap(), &cap, 0.3);
    assert!((a.d_tilde - b.d_tilde).abs() < 1e-12);
    let row = a.row(1, s.spec());
    assert_eq!(
        (row.ell, row.eta, row.resolution),
        (30, 5, cap.nodes().len())
    );
}

#[test]
fn centering_monotonicity_negation() {
    let s = sample_band(40, 3, 77).unwrap();
    let cap = make_cap(&point(0.5, 0.5), 0.25, 12).unwrap();
    let vals = BasisCache::new(s.spec(), cap.nodes()).unwrap().eval_all(&s);
    let neg: Vec<f64> = vals.iter().map(|v| -v).collect();
    let mut prev = f64::INFINITY;
    for i in 0..=80 {
        let u = -4.0 + 0.1 * i as f64;
        let r = volume_bias_values(&vals, &cap, u).unwrap();
        assert_eq!(r.d_centred, r.d_tilde - tau(u));
        assert!(r.d_tilde <= prev);
        assert!(r.d_tilde.abs() <= 1.0 && r.d_centred.abs() <= 2.0);
        prev = r.d_tilde;
    }
    assert!(vals.iter().all(|&v| v != 0.0));
    let a = volume_bias_values(&vals, &cap, 0.0).unwrap().d_tilde;
    let b = volume_bias_values(&neg, &cap, 0.0).unwrap().d_tilde;
    assert!((a + b).abs() < 1e-12);
}

#[test]
fn imbalance_examples() {
    let net = make_net(0.3).unwrap();
    let (b, _) = imbalance_on_net(|_| 1.0, net.points(), 0.2, 0.0, 6).unwrap();
    assert_eq!(b, 1.0);
    let f = |x: &[f64]| (3.0 * x[0]).sin() + x[1] * x[2];
    let a = 0.7;
    let g = |x: &[f64]| f(&rot_y(-a, x));
    let rotated: Vec<Vec<f64>> = net.points().iter().map(|p| rot_y(a, p)).collect();
    let (b1, _) = imbalance_on_net(f, net.points(), 0.3, 0.1, 8).unwrap();
    let (b2, _) = imbalance_on_net(g, &rotated, 0.3, 0.1, 8).unwrap();
    assert!((b1 - b2).abs() < 1e-9);
}

#[test]
fn imbalance_two_resolutions() {
    let s = sample_band(48, 1, 3).unwrap();
    let r = 16.0 / 48.0;
    let coarse = imbalance(&s, r, 0.2, 0.0).unwrap();
    let fine = imbalance(&s, r, 0.1, 0.0).unwrap();
    assert!((0.0..=2.0).contains(&coarse.b) && (0.0..=2.0).contains(&fine.b));
    assert!((fine.b - coarse.b).abs() <= coarse.stability);
    assert!(coarse.spacing <= 0.2 * r && !coarse.capped);
    assert!(imbalance(&s, r, 0.0, 0.0).is_err());
    assert!(imbalance(&s, r, 0.6, 0.0).is_err());
    assert!(imbalance(&s, PI, 0.1, 0.0).is_err());
}

#[test]
fn grid_bias_matches_quadrature() {
    let s = sample_band(32, 4, 12).unwrap();
    let layout = GridLayout::new(s.spec(), 256).unwrap();
    for &u in &[0.0, 0.7] {
        let grid = layout.signs(&s, u).unwrap();
        let mut rng = Mix(2);
        for _ in 0..20 {
            let x = rng.unit();
            let cap = make_cap(&x, 0.4, 64).unwrap();
            let q = volume_bias_sample(&s, &cap, u).unwrap().d_centred;
            assert!((grid.bias(&x, 0.4) - q).abs() < 0.02);
        }
    }
    assert!(GridLayout::new(s.spec(), 20).is_err());
}

#[test]
fn stability_examples() {
    let x = point(0.4, 0.1);
    for &r in &[0.05, 0.3, 1.0] {
        assert!(stability_bound(&x, r, &x, r).unwrap().abs() < 1e-9);
        for &dl in &[0.05, 0.2, 0.5] {
            let rp = r * (1.0 + dl);
            let want = 4.0 * (r.cos() - rp.cos()) / (1.0 - r.cos());
            assert!((stability_bound(&x, r, &x, rp).unwrap() - want).abs() < 1e-9 * want.max(1.0));
        }
        let mut prev = -1.0;
        for i in 0..=20 {
            let y = rot_y(r * i as f64 / 20.0, &POLE);
            let v = stability_bound(&POLE, r, &y, r * 1.1).unwrap();
            assert!(v >= prev - 1e-9);
            prev = v;
        }
    }
    assert!(stability_bound(&POLE, 0.1, &point(0.5, 0.0), 0.1).is_err());
    assert!(stability_bound(&POLE, 0.2, &POLE, 0.1).is_err());
}

#[test]
fn lens_area_against_brute_force() {
    for &(dl, r1, r2) in &[
        (0.3, 0.5, 0.6),
        (0.1, 0.4, 0.4),
        (1.0, 0.8, 0.5),
        (0.05, 1.2, 0.3),
    ] {
        let a = cap_intersection_area(dl, r1, r2);
        assert!(
            (a - lens_area_brute(dl, r1, r2)).abs() < 2e-3,
            "{dl} {r1} {r2}"
        );
    }
    assert_eq!(cap_intersection_area(1.0, 0.3, 0.3), 0.0);
    assert!((cap_intersection_area(0.0, 0.3, 0.5) - cap_volume(2, 0.3)).abs() < 1e-12);
}

#[test]
fn stability_delta_inverts_bound() {
    for &r in &[0.05, 0.2, 0.8] {
        for &target in &[0.05, 0.2, 1.0] {
            let dl = stability_delta(r, target).unwrap();
            assert!(dl > 0.0 && dl <= 0.5);
            let y = rot_y(dl * r, &POLE);
            let v = stability_bound(&POLE, r, &y, (1.0 + dl) * r).unwrap();
            assert!(v <= target + 1e-9);
            if dl < 0.5 {
                let y = rot_y(1.01 * dl * r, &POLE);
                assert!(stability_bound(&POLE, r, &y, (1.0 + 1.01 * dl) * r).unwrap() > target);
            }
        }
    }
    assert!(stability_delta(0.1, 0.0).is_err());
}

#[test]
fn nets_cover() {
    let coarse = make_net(PI).unwrap();
    assert!(coarse.len() >= 2);
    for &sp in &[PI, 0.3, 0.1, 0.03] {
        let net = make_net(sp).unwrap();
        assert!(
            net.len() as f64 <= 20.0 * sp.powi(-2).max(1.0),
            "spacing {sp}: {}",
            net.len()
        );
        let mut rng = Mix(1234);
        for _ in 0..10_000 {
            let x = rng.unit();
            let dmin = net
                .points()
                .iter()
                .map(|p| geodesic(p, &x))
                .fold(f64::INFINITY, f64::min);
            assert!(dmin <= sp, "spacing {sp}: probe at {dmin}");
        }
    }
    assert!(make_net(0.0).is_err());
    assert!(make_net_in(2, 1e-4, 1000).is_err());
}

#[test]
fn three_sphere_net() {
    let net = make_net_in(3, 0.6, 5000).unwrap();
    assert_eq!(net.d(), 3);
    let mut rng = Mix(8);
    for _ in 0..2000 {
        let g: Vec<f64> = (0..4).map(|_| rng.next() - 0.5).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = g.iter().map(|v| v / n).collect();
        let dmin = net
            .points()
            .iter()
            .map(|p| geodesic(p, &x))
            .fold(f64::INFINITY, f64::min);
        assert!(dmin <= 0.6);
    }
}

#[test]
fn capped_net_fallback() {
    let (net, capped) = net_for_radius(1e-3, 0.1, 5000).unwrap();
    assert!(capped);
    assert_eq!(net.len(), 5000);
    let (net, capped) = net_for_radius(0.5, 0.1, 5000).unwrap();
    assert!(!capped && net.spacing() <= 0.05);
}
