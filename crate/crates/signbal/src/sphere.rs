//! Points on S^d as unit vectors in R^{d+1}.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

/// Geodesic distance between unit vectors, accurate at small and large angles.
pub fn geodesic(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x + y) * (x + y))
        .sum::<f64>()
        .sqrt();
    2.0 * diff.atan2(sum)
}

/// Unit vector from spherical angles on S²: colatitude θ, longitude φ.
pub fn from_angles(theta: f64, phi: f64) -> [f64; 3] {
    let s = theta.sin();
    [s * phi.cos(), s * phi.sin(), theta.cos()]
}

/// Colatitude and longitude of a unit vector in R³, longitude in [0, 2π).
pub fn to_angles(x: &[f64]) -> (f64, f64) {
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let theta = rho.atan2(x[2]);
    let mut phi = x[1].atan2(x[0]);
    if phi < 0.0 {
        phi += std::f64::consts::TAU;
    }
    (theta, phi)
}

/// Orthonormal tangent frame at x. The first vector is obtained by
/// Gram–Schmidt of the pole e_{d+1} against x; at the poles the fixed
/// convention e₁ is used. Remaining vectors continue Gram–Schmidt over the
/// standard basis. For d = 2 the second vector is x × e₁.
pub fn tangent_frame(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut basis: Vec<Vec<f64>> = vec![x.to_vec()];
    let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut pole = vec![0.0; n];
    pole[n - 1] = 1.0;
    candidates.push(pole);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        candidates.push(e);
    }
    for c in candidates {
        if basis.len() == n {
            break;
        }
        let mut v = c.clone();
        for b in &basis {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= p * bi);
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            basis.push(v.iter().map(|vi| vi / nv).collect());
        }
    }
    if n == 3 {
        let e1 = &basis[1];
        basis[2] = vec![
            x[1] * e1[2] - x[2] * e1[1],
            x[2] * e1[0] - x[0] * e1[2],
            x[0] * e1[1] - x[1] * e1[0],
        ];
    }
    basis.remove(0);
    basis
}

/// Exponential map at x applied to the tangent vector Σ wᵢ eᵢ of the frame.
pub fn exp_map(x: &[f64], frame: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let len = norm(w);
    if len == 0.0 {
        return x.to_vec();
    }
    let (s, c) = len.sin_cos();
    let mut y: Vec<f64> = x.iter().map(|xi| c * xi).collect();
    for (wi, e) in w.iter().zip(frame) {
        let k = s * wi / len;
        y.iter_mut().zip(e).for_each(|(yi, ei)| *yi += k * ei);
    }
    y
}

/// Uniform random unit vector in R^{dim}.
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

/// A finite set of points on S^d.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    d: usize,
    points: Vec<Vec<f64>>,
}

impl PointSet {
    pub fn new(d: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if p.len() != d + 1 {
                return Err(Error::Domain(format!(
                    "point {i} has {} coordinates, expected {}",
                    p.len(),
                    d + 1
                )));
            }
            if (norm(p) - 1.0).abs() > NORM_TOL {
                return Err(Error::Domain(format!("point {i} is not a unit vector")));
            }
        }
        Ok(Self { d, points })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        geodesic(&self.points[i], &self.points[j])
    }

    pub fn position(&self, x: &[f64]) -> Option<usize> {
        self.points.iter().position(|p| geodesic(p, x) < 1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn frame_is_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [3, 4, 5] {
            for _ in 0..20 {
                let x = random_unit(&mut rng, dim);
                let f = tangent_frame(&x);
                assert_eq!(f.len(), dim - 1);
                for (i, a) in f.iter().enumerate() {
                    assert!(dot(a, &x).abs() < 1e-12);
                    for (j, b) in f.iter().enumerate() {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!((dot(a, b) - want).abs() < 1e-12);
                    }
                }
            }
        }
        let f = tangent_frame(&[0.0, 0.0, 1.0]);
        assert_eq!(f[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(f[1], vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn exp_map_distance() {
        let x = normalize(&[0.3, -0.2, 0.9]);
        let f = tangent_frame(&x);
        let y = exp_map(&x, &f, &[0.4, -0.3]);
        assert!((geodesic(&x, &y) - 0.5).abs() < 1e-14);
        assert!((norm(&y) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn geodesic_extremes() {
        let a = [1.0, 0.0, 0.0];
        assert_eq!(geodesic(&a, &a), 0.0);
        assert!((geodesic(&a, &[-1.0, 0.0, 0.0]) - std::f64::consts::PI).abs() < 1e-15);
        let b = from_angles(std::f64::consts::FRAC_PI_2, 1e-9);
        assert!((geodesic(&a, &b) - 1e-9).abs() < 1e-22);
    }

    #[test]
    fn pointset_validates() {
        assert!(PointSet::new(2, vec![vec![1.0, 0.0, 0.0]]).is_ok());
        assert!(PointSet::new(2, vec![vec![1.0, 0.1, 0.0]]).is_err());
        assert!(PointSet::new(3, vec![vec![1.0, 0.0, 0.0]]).is_err());
    }
}
