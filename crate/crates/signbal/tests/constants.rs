use signbal::barriers::{fit_t0, hex_defect, sphere_sign_barrier};
use signbal::constants::{C_CONSTRUCTION, EPS0, INCLUSION_C, T0};
use signbal::kernels::{inclusion_norm, KernelSpec};

const POLE: [f64; 3] = [0.0, 0.0, 1.0];

#[test]
fn t0_and_eps0() {
    let grid: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
    let (t, d) = fit_t0(&grid, 400).unwrap();
    assert_eq!(t, T0);
    assert!((d / 2.0 - EPS0).abs() < 1e-6);
    for refinement in [400, 1000, 4000] {
        assert!((hex_defect(T0, refinement).unwrap() - 2.0 * EPS0).abs() < 2e-6);
    }
}

#[test]
fn construction_constant_is_smallest_working_choice() {
    let ell = 600;
    let r = 5.0 / ell as f64;
    let works = |c: f64| {
        let b = sphere_sign_barrier(&POLE, r, ell, 1, c).unwrap();
        b.bias(r, EPS0, 48).unwrap().d_tilde > EPS0
    };
    let smallest = [4.0, 8.0, 16.0].into_iter().find(|&c| works(c));
    assert_eq!(smallest, Some(C_CONSTRUCTION));
}

#[test]
fn inclusion_constant_reproduces() {
    let ell = 60;
    let mut worst: f64 = 0.0;
    for eta in [1usize, 10] {
        let spec = KernelSpec::new(2, ell, eta).unwrap();
        for r in [2.0 / ell as f64, 1.0 / eta as f64, 0.3] {
            let re = r * eta as f64;
            if re > 1.0 {
                continue;
            }
            let inc = inclusion_norm(spec, r, 200).unwrap();
            worst = worst.max(inc.i_squared / (re * inc.full_sphere));
        }
    }
    assert!((worst - 0.399).abs() < 5e-4, "{worst}");
    assert_eq!((1.25 * worst * 100.0).ceil() / 100.0, INCLUSION_C);
}
