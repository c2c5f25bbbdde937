//! Volume bias of fields on geodesic caps, sign imbalance over nets and the
//! cap stability bound.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::RingSynth;
use crate::kernels::KernelSpec;
use crate::quad::{gauss_legendre, gauss_legendre_on, KahanSum};
use crate::sampler::{degree_weights, replicate_rng, BasisCache, FieldSample};
use crate::specfun::{tau, DimConstants};
use crate::sphere::{
    dot, exp_map, from_angles, geodesic, norm, random_unit, tangent_frame, to_angles,
};

pub const MIN_RADIAL_NODES: usize = 4;
/// Largest net built before [`make_net`] refuses.
pub const DEFAULT_NET_CAP: usize = 200_000;
/// Finest latitude count of the global sign grid.
pub const MAX_GRID_LAT: usize = 2048;
/// Fibonacci nets use ⌈FIB_DENSITY/spacing²⌉ points; their covering radius
/// is close to 2.7/√N.
const FIB_DENSITY: f64 = 9.0;
const COVER_PROBES: usize = 10_000;
const PROBE_SEED: u64 = 0x6e65_7463_6f76;
const CAP_SEED: u64 = 0x6361_7073;

/// H(t) = 1 for t ≥ 0 and −1 otherwise.
pub fn heaviside(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Volume of a geodesic cap of radius r on S^d.
pub fn cap_volume(d: usize, r: f64) -> f64 {
    match d {
        2 => TAU * (1.0 - r.cos()),
        3 => PI * (2.0 * r - (2.0 * r).sin()),
        _ => {
            let s = DimConstants::new(d - 1).map(|c| c.s_d).unwrap_or(f64::NAN);
            let q: f64 = gauss_legendre_on(64, 0.0, r)
                .iter()
                .map(|&(x, w)| w * x.sin().powi(d as i32 - 1))
                .sum();
            s * q
        }
    }
}

fn check_unit(x: &[f64]) -> Result<()> {
    if x.len() < 3 || !((norm(x) - 1.0).abs() <= 1e-10) {
        return Err(Error::Domain(
            "cap centre must be a unit vector in R^{d+1}, d ≥ 2".into(),
        ));
    }
    Ok(())
}

/// Geodesic cap with a product quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Cap {
    center: Vec<f64>,
    radius: f64,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    refinement: usize,
    stochastic: bool,
}

impl Cap {
    pub fn d(&self) -> usize {
        self.center.len() - 1
    }
    pub fn center(&self) -> &[f64] {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn refinement(&self) -> usize {
        self.refinement
    }
    /// True when the angular part of the rule is randomized (d = 3).
    pub fn stochastic(&self) -> bool {
        self.stochastic
    }
    pub fn volume(&self) -> f64 {
        self.weights.iter().copied().collect::<KahanSum>().value()
    }

    /// Quadrature of f over the cap.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .collect::<KahanSum>()
            .value()
    }
}

/// Cap of radius r around `center`.
///
/// On S² the rule is Gauss–Legendre in cos ρ with `refinement` nodes times
/// 4·refinement equispaced azimuths. On S³ each of `refinement` Gauss–Legendre
/// shells carries a randomly rotated Fibonacci set of refinement² directions.
pub fn make_cap(center: &[f64], r: f64, refinement: usize) -> Result<Cap> {
    check_unit(center)?;
    let d = center.len() - 1;
    if !(r > 0.0 && r <= PI) {
        return Err(Error::Domain(format!(
            "cap radius must lie in (0, π], got {r}"
        )));
    }
    if refinement < MIN_RADIAL_NODES {
        return Err(Error::Domain(format!(
            "cap refinement {refinement} below the minimum of {MIN_RADIAL_NODES} radial nodes"
        )));
    }
    let frame = tangent_frame(center);
    let (nodes, weights, stochastic) = match d {
        2 => {
            let nphi = 4 * refinement;
            let mut nodes = Vec::with_capacity(refinement * nphi);
            let mut weights = Vec::with_capacity(refinement * nphi);
            for (z, w) in gauss_legendre_on(refinement, r.cos(), 1.0) {
                let rho = z.clamp(-1.0, 1.0).acos();
                for j in 0..nphi {
                    let phi = TAU * (j as f64 + 0.5) / nphi as f64;
                    nodes.push(exp_map(center, &frame, &[rho * phi.cos(), rho * phi.sin()]));
                    weights.push(w * TAU / nphi as f64);
                }
            }
            (nodes, weights, false)
        }
        3 => {
            let dirs = fibonacci_points(refinement * refinement);
            let shells = gauss_legendre_on(refinement, 0.0, r);
            let raw: f64 = shells.iter().map(|&(p, w)| w * p.sin().powi(2)).sum();
            let scale = cap_volume(3, r) / raw;
            let m = dirs.len() as f64;
            let mut nodes = Vec::with_capacity(shells.len() * dirs.len());
            let mut weights = Vec::with_capacity(shells.len() * dirs.len());
            for (k, &(rho, w)) in shells.iter().enumerate() {
                let rot = random_rotation(CAP_SEED, k as u64);
                let wk = scale * w * rho.sin().powi(2) / m;
                for v in &dirs {
                    let rv: Vec<f64> = rot.iter().map(|row| rho * dot(row, v)).collect();
                    nodes.push(exp_map(center, &frame, &rv));
                    weights.push(wk);
                }
            }
            (nodes, weights, true)
        }
        _ => {
            return Err(Error::Domain(format!(
                "caps are implemented for d ∈ {{2, 3}}, got {d}"
            )))
        }
    };
    Ok(Cap {
        center: center.to_vec(),
        radius: r,
        nodes,
        weights,
        refinement,
        stochastic,
    })
}

fn random_rotation(seed: u64, stream: u64) -> [[f64; 3]; 3] {
    let mut rng = replicate_rng(seed, stream);
    let a = random_unit(&mut rng, 3);
    let mut b = random_unit(&mut rng, 3);
    let p = dot(&a, &b);
    b.iter_mut().zip(&a).for_each(|(bi, ai)| *bi -= p * ai);
    let nb = norm(&b);
    b.iter_mut().for_each(|bi| *bi /= nb);
    let c = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    [[a[0], a[1], a[2]], [b[0], b[1], b[2]], c]
}

fn fibonacci_points(n: usize) -> Vec<Vec<f64>> {
    let golden = 0.5 * (1.0 + 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let phi = TAU * (i as f64 / golden).fract();
            from_angles(z.clamp(-1.0, 1.0).acos(), phi).to_vec()
        })
        .collect()
}

/// Volume bias of one field on one cap at level u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub u: f64,
    pub d_tilde: f64,
    pub d_centred: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// Number of quadrature nodes.
    pub resolution: usize,
    pub stochastic: bool,
}

/// Flat CSV record of a [`BiasReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub seed: u64,
    pub d: usize,
    pub ell: usize,
    pub eta: usize,
    pub u: f64,
    pub r: f64,
    pub d_tilde: f64,
    pub d_centred: f64,
    pub resolution: usize,
}

impl BiasReport {
    fn new(u: f64, d_tilde: f64, cap: &Cap) -> Self {
        Self {
            u,
            d_tilde,
            d_centred: d_tilde - tau(u),
            center: cap.center.clone(),
            radius: cap.radius,
            resolution: cap.nodes.len(),
            stochastic: cap.stochastic,
        }
    }

    pub fn row(&self, seed: u64, spec: KernelSpec) -> BiasRow {
        BiasRow {
            seed,
            d: spec.d(),
            ell: spec.ell(),
            eta: spec.eta(),
            u: self.u,
            r: self.radius,
            d_tilde: self.d_tilde,
            d_centred: self.d_centred,
            resolution: self.resolution,
        }
    }
}

/// Weighted mean of H(values − u) against the cap weights.
fn weighted_sign_mean(values: impl Iterator<Item = f64>, weights: &[f64], u: f64) -> f64 {
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for (v, &w) in values.zip(weights) {
        num.add(w * heaviside(v - u));
        den.add(w);
    }
    (num.value() / den.value()).clamp(-1.0, 1.0)
}

/// Volume bias of a function evaluated at the cap nodes.
pub fn volume_bias<F: Fn(&[f64]) -> f64>(f: F, cap: &Cap, u: f64) -> BiasReport {
    let dt = weighted_sign_mean(cap.nodes.iter().map(|x| f(x)), &cap.weights, u);
    BiasReport::new(u, dt, cap)
}

/// Volume bias from field values already evaluated at the cap nodes.
pub fn volume_bias_values(values: &[f64], cap: &Cap, u: f64) -> Result<BiasReport> {
    if values.len() != cap.nodes.len() {
        return Err(Error::Domain(format!(
            "{} values for {} cap nodes",
            values.len(),
            cap.nodes.len()
        )));
    }
    Ok(BiasReport::new(
        u,
        weighted_sign_mean(values.iter().copied(), &cap.weights, u),
        cap,
    ))
}

/// Volume bias of a sampled field. Factorization-mode samples must contain
/// every cap node in their point set.
pub fn volume_bias_sample(sample: &FieldSample, cap: &Cap, u: f64) -> Result<BiasReport> {
    let values = match sample.points() {
        None => BasisCache::new(sample.spec(), &cap.nodes)?.eval_all(sample),
        Some(ps) => cap
            .nodes
            .iter()
            .map(|x| {
                ps.position(x)
                    .map(|i| sample.data()[i])
                    .ok_or_else(|| Error::Domain("cap node outside the sample's point set".into()))
            })
            .collect::<Result<_>>()?,
    };
    volume_bias_values(&values, cap, u)
}

/// Smoothstep-graded Gauss–Legendre rule on [a, b]: square-root endpoint
/// behaviour of the integrand becomes smooth.
fn graded_rule(n: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    gauss_legendre_on(n, 0.0, 1.0)
        .into_iter()
        .map(move |(t, w)| {
            let s = t * t * (3.0 - 2.0 * t);
            (a + (b - a) * s, w * (b - a) * 6.0 * t * (1.0 - t))
        })
}

/// Area of the intersection of caps of radii r1 and r2 on S² whose centres
/// are at distance delta.
pub fn cap_intersection_area(delta: f64, r1: f64, r2: f64) -> f64 {
    if delta <= 1e-15 {
        return cap_volume(2, r1.min(r2));
    }
    if delta >= r1 + r2 {
        return 0.0;
    }
    let (sd, cd) = delta.sin_cos();
    let cr1 = r1.cos();
    let arc = |rho: f64| -> f64 {
        let (s, c) = rho.sin_cos();
        if s <= 0.0 {
            return if rho <= r1 + delta && c * cd >= cr1 {
                TAU
            } else {
                0.0
            };
        }
        let q = (cr1 - cd * c) / (sd * s);
        2.0 * q.clamp(-1.0, 1.0).acos()
    };
    let mut cuts = vec![0.0, r2];
    for k in [(r1 - delta).abs(), r1 + delta, TAU - r1 - delta] {
        if k > 0.0 && k < r2 {
            cuts.push(k);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut acc = KahanSum::new();
    for w in cuts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        for (rho, wt) in graded_rule(48, w[0], w[1]) {
            acc.add(wt * rho.sin() * arc(rho));
        }
    }
    acc.value()
}

/// 4·|B_r(x) △ B_{r′}(y)| / min{|B_r|, |B_{r′}|} on S², bounding
/// |D(y; r′) − D(x; r)| for any field and level.
pub fn stability_bound(x: &[f64], r: f64, y: &[f64], r_prime: f64) -> Result<f64> {
    if x.len() != 3 || y.len() != 3 {
        return Err(Error::Domain("stability bound is implemented on S²".into()));
    }
    check_unit(x)?;
    check_unit(y)?;
    let delta = geodesic(x, y);
    if !(r > 0.0 && r_prime <= PI) || r_prime < r * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "need 0 < r ≤ r′ ≤ π, got r={r}, r′={r_prime}"
        )));
    }
    if delta > r * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "centres {delta} apart exceed the radius {r}"
        )));
    }
    Ok(stability_at(delta, r, r_prime))
}

fn stability_at(delta: f64, r: f64, r_prime: f64) -> f64 {
    let (v1, v2) = (cap_volume(2, r), cap_volume(2, r_prime));
    let sym = (v1 + v2 - 2.0 * cap_intersection_area(delta, r, r_prime)).max(0.0);
    4.0 * sym / v1.min(v2)
}

/// Bound for a centre displacement of `delta` at a fixed radius r.
pub fn net_stability(r: f64, delta: f64) -> f64 {
    stability_at(delta.min(r), r, r)
}

/// Largest δ ∈ (0, ½] whose worst case (centre moved by δr, radius grown to
/// (1+δ)r) keeps the stability bound at or below `target`.
pub fn stability_delta(r: f64, target: f64) -> Result<f64> {
    if !(r > 0.0 && 1.5 * r <= PI) || !(target > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 < r ≤ 2π/3 and target > 0, got r={r}"
        )));
    }
    let g = |dl: f64| stability_at(dl * r, r, (1.0 + dl) * r);
    if g(0.5) <= target {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0, 0.5);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Point set whose spacing-balls cover S^d.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereNet {
    d: usize,
    spacing: f64,
    points: Vec<Vec<f64>>,
    /// Largest probe-to-net distance seen in the covering check.
    probe_radius: f64,
}

impl SphereNet {
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn probe_radius(&self) -> f64 {
        self.probe_radius
    }

    /// Fibonacci net with exactly n points on S²; `spacing` is the covering
    /// radius measured by random probes.
    pub fn fibonacci(n: usize) -> Self {
        let points = fibonacci_points(n.max(2));
        let probe = probe_covering(&points, 2.0 * FIB_DENSITY.sqrt() / (n as f64).sqrt());
        Self {
            d: 2,
            spacing: probe,
            points,
            probe_radius: probe,
        }
    }
}

/// Fibonacci net on S² with covering radius `spacing`.
pub fn make_net(spacing: f64) -> Result<SphereNet> {
    make_net_in(2, spacing, DEFAULT_NET_CAP)
}

/// Net on S^d (d ∈ {2, 3}) refusing to exceed `max_points`.
pub fn make_net_in(d: usize, spacing: f64, max_points: usize) -> Result<SphereNet> {
    if !(spacing > 0.0) {
        return Err(Error::Domain(format!(
            "net spacing must be positive, got {spacing}"
        )));
    }
    let too_many = |n: usize| {
        Error::Config(format!(
            "net of spacing {spacing} needs {n} points, above the cap of {max_points}"
        ))
    };
    match d {
        2 => {
            let mut n = ((FIB_DENSITY / (spacing * spacing)).ceil() as usize).max(2);
            loop {
                if n > max_points {
                    return Err(too_many(n));
                }
                let points = fibonacci_points(n);
                let probe = probe_covering(&points, spacing);
                if probe <= spacing {
                    return Ok(SphereNet {
                        d,
                        spacing,
                        points,
                        probe_radius: probe,
                    });
                }
                n = (n as f64 * 1.25).ceil() as usize;
            }
        }
        3 => greedy_net_s3(spacing, max_points).ok_or_else(|| too_many(max_points + 1)),
        _ => Err(Error::Domain(format!(
            "nets are implemented for d ∈ {{2, 3}}, got {d}"
        ))),
    }
}

fn greedy_net_s3(spacing: f64, max_points: usize) -> Option<SphereNet> {
    let mut rng = replicate_rng(PROBE_SEED, 3);
    let sep = 0.75 * spacing;
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut misses = 0;
    while misses < 2000 {
        let c = random_unit(&mut rng, 4);
        if points.iter().all(|p| geodesic(p, &c) > sep) {
            points.push(c);
            misses = 0;
            if points.len() > max_points {
                return None;
            }
        } else {
            misses += 1;
        }
    }
    let probe = (0..COVER_PROBES)
        .map(|_| {
            let x = random_unit(&mut rng, 4);
            points
                .iter()
                .map(|p| geodesic(p, &x))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (probe <= spacing).then_some(SphereNet {
        d: 3,
        spacing,
        points,
        probe_radius: probe,
    })
}

/// Largest distance from 10⁴ random probes to the nearest net point on S²,
/// searched within `reach`; returns +∞ if some probe has no point in reach.
fn probe_covering(points: &[Vec<f64>], reach: f64) -> f64 {
    let index = NetIndex::new(points, reach);
    let mut rng = replicate_rng(PROBE_SEED, 2);
    (0..COVER_PROBES)
        .map(|_| index.nearest(&random_unit(&mut rng, 3)))
        .fold(0.0, f64::max)
}

/// Latitude-band index over S² points for radius-limited nearest queries.
struct NetIndex<'a> {
    points: &'a [Vec<f64>],
    reach: f64,
    band: f64,
    bands: Vec<Vec<(f64, usize)>>,
}

impl<'a> NetIndex<'a> {
    fn new(points: &'a [Vec<f64>], reach: f64) -> Self {
        let reach = reach.min(PI);
        let nb = ((PI / reach).ceil() as usize).max(1);
        let band = PI / nb as f64;
        let mut bands = vec![Vec::new(); nb];
        for (i, p) in points.iter().enumerate() {
            let (th, ph) = to_angles(p);
            bands[((th / band) as usize).min(nb - 1)].push((ph, i));
        }
        bands
            .iter_mut()
            .for_each(|b| b.sort_by(|a, b| a.0.total_cmp(&b.0)));
        Self {
            points,
            reach,
            band,
            bands,
        }
    }

    fn nearest(&self, x: &[f64]) -> f64 {
        let (th, ph) = to_angles(x);
        let nb = self.bands.len();
        let lo = (((th - self.reach) / self.band).floor().max(0.0)) as usize;
        let hi = (((th + self.reach) / self.band).floor() as usize).min(nb - 1);
        let mut best = f64::INFINITY;
        for b in lo..=hi {
            let list = &self.bands[b];
            if list.is_empty() {
                continue;
            }
            let th_lo = (b as f64 * self.band).max(th - self.reach).max(0.0);
            let th_hi = ((b + 1) as f64 * self.band).min(th + self.reach).min(PI);
            let smin = th_lo.sin().min(th_hi.sin()).min(th.sin());
            let ratio = (0.5 * self.reach).sin() / (th.sin().max(1e-300) * smin.max(1e-300)).sqrt();
            let mut check = |&(_, i): &(f64, usize)| {
                best = best.min(geodesic(&self.points[i], x));
            };
            if ratio >= 1.0 {
                list.iter().for_each(&mut check);
                continue;
            }
            let w = 2.0 * ratio.asin();
            let mut visit = |a: f64, c: f64| {
                let s = list.partition_point(|e| e.0 < a);
                let e = list.partition_point(|e| e.0 <= c);
                list[s..e].iter().for_each(&mut check);
            };
            let (a, c) = (ph - w, ph + w);
            visit(a.max(0.0), c.min(TAU));
            if a < 0.0 {
                visit(a + TAU, TAU);
            }
            if c > TAU {
                visit(0.0, c - TAU);
            }
        }
        best
    }
}

/// Gauss–Legendre latitudes times equispaced longitudes on S², with the
/// band synthesis precomputed for one kernel spec.
#[derive(Debug, Clone)]
pub struct GridLayout {
    spec: KernelSpec,
    thetas: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    weights: Vec<f64>,
    nlon: usize,
    synth: RingSynth,
}

/// Latitude count resolving both the wavelength 2π/ℓ and the radius r.
pub fn grid_lat_for(ell: usize, r: f64) -> usize {
    let want = (4 * (ell + 1)).max((4.0 * PI / r).ceil() as usize).max(16);
    let n = want.min(MAX_GRID_LAT);
    n + n % 2
}

impl GridLayout {
    pub fn new(spec: KernelSpec, nlat: usize) -> Result<Self> {
        if spec.d() != 2 {
            return Err(Error::Domain("sign grids are implemented on S²".into()));
        }
        if nlat < spec.ell() + 1 {
            return Err(Error::Domain(format!(
                "grid of {nlat} latitudes cannot resolve degree {}",
                spec.ell()
            )));
        }
        let (x, w) = gauss_legendre(nlat);
        // ascending colatitude
        let zs: Vec<f64> = x.iter().rev().copied().collect();
        let weights: Vec<f64> = w.iter().rev().copied().collect();
        let thetas: Vec<f64> = zs.iter().map(|z| z.acos()).collect();
        let sin_t = thetas.iter().map(|t| t.sin()).collect();
        let nlon = 2 * nlat;
        let synth = RingSynth::new(spec.ell_min(), spec.ell(), zs.clone(), nlon);
        Ok(Self {
            spec,
            thetas,
            cos_t: zs,
            sin_t,
            weights,
            nlon,
            synth,
        })
    }

    pub fn nlat(&self) -> usize {
        self.thetas.len()
    }
    pub fn nlon(&self) -> usize {
        self.nlon
    }

    /// Signs H(f − u) of a basis-mode sample on the grid.
    pub fn signs(&self, sample: &FieldSample, u: f64) -> Result<SignGrid<'_>> {
        let coeffs = sample
            .coeffs()
            .ok_or_else(|| Error::Domain("sign grids need a basis-mode sample".into()))?;
        if sample.spec() != self.spec {
            return Err(Error::Domain("sample spec differs from the grid's".into()));
        }
        let weights = degree_weights(self.spec);
        let mut scratch = self.synth.scratch();
        let mut ring = vec![0.0; self.nlon];
        let mut signs = Vec::with_capacity(self.nlat() * self.nlon);
        let mut prefix = Vec::with_capacity(self.nlat() * (self.nlon + 1));
        for i in 0..self.nlat() {
            self.synth
                .ring(i, coeffs, &weights, &mut scratch, &mut ring);
            let mut acc = 0i32;
            prefix.push(0);
            for &v in &ring {
                let s: i8 = if v >= u { 1 } else { -1 };
                signs.push(s);
                acc += s as i32;
                prefix.push(acc);
            }
        }
        Ok(SignGrid {
            layout: self,
            u,
            signs,
            prefix,
        })
    }
}

/// Signs of one field on a [`GridLayout`], with per-ring prefix sums.
#[derive(Debug, Clone)]
pub struct SignGrid<'a> {
    layout: &'a GridLayout,
    u: f64,
    signs: Vec<i8>,
    prefix: Vec<i32>,
}

impl SignGrid<'_> {
    pub fn level(&self) -> f64 {
        self.u
    }

    /// ∫_{−h/2}^{φ} of the piecewise-constant ring signs, φ unrestricted.
    fn ring_primitive(&self, i: usize, phi: f64) -> f64 {
        let n = self.layout.nlon;
        let h = TAU / n as f64;
        let s = phi / h + 0.5;
        let k = s.floor();
        let frac = s - k;
        let k = k as i64;
        let wraps = k.div_euclid(n as i64) as f64;
        let j = k.rem_euclid(n as i64) as usize;
        let p = &self.prefix[i * (n + 1)..(i + 1) * (n + 1)];
        h * (wraps * p[n] as f64 + p[j] as f64 + frac * self.signs[i * n + j] as f64)
    }

    /// Mean of H(f − u) over the cap of radius r at (θ, φ), with the sign
    /// taken constant on each grid cell.
    pub fn cap_mean(&self, theta: f64, phi: f64, r: f64) -> f64 {
        let l = self.layout;
        let n = l.nlon;
        let (st, ct) = theta.sin_cos();
        let cr = r.cos();
        let a = l.thetas.partition_point(|&t| t < theta - r);
        let b = l.thetas.partition_point(|&t| t <= theta + r);
        let mut num = KahanSum::new();
        let mut den = KahanSum::new();
        for i in a..b {
            let (si, ci) = (l.sin_t[i], l.cos_t[i]);
            let q = if st < 1e-12 {
                if ci * ct >= cr {
                    -1.0
                } else {
                    2.0
                }
            } else {
                (cr - ci * ct) / (si * st)
            };
            if q >= 1.0 {
                continue;
            }
            let w = l.weights[i];
            if q <= -1.0 {
                let p = self.prefix[i * (n + 1) + n] as f64;
                num.add(w * p * TAU / n as f64);
                den.add(w * TAU);
            } else {
                let half = q.acos();
                num.add(
                    w * (self.ring_primitive(i, phi + half) - self.ring_primitive(i, phi - half)),
                );
                den.add(w * 2.0 * half);
            }
        }
        if den.value() > 0.0 {
            (num.value() / den.value()).clamp(-1.0, 1.0)
        } else {
            self.nearest_sign(theta, phi)
        }
    }

    fn nearest_sign(&self, theta: f64, phi: f64) -> f64 {
        let l = self.layout;
        let i = l.thetas.partition_point(|&t| t < theta).min(l.nlat() - 1);
        let i = if i > 0 && (theta - l.thetas[i - 1]) < (l.thetas[i] - theta) {
            i - 1
        } else {
            i
        };
        let h = TAU / l.nlon as f64;
        let j = ((phi / h).round() as i64).rem_euclid(l.nlon as i64) as usize;
        self.signs[i * l.nlon + j] as f64
    }

    /// Centred bias D = D̃ − τ(u) on the cap at x.
    pub fn bias(&self, x: &[f64], r: f64) -> f64 {
        let (th, ph) = to_angles(x);
        self.cap_mean(th, ph, r) - tau(self.u)
    }

    /// max |D| over the net and the index attaining it.
    pub fn max_abs_bias(&self, net: &[Vec<f64>], r: f64) -> (f64, usize) {
        net.iter()
            .enumerate()
            .map(|(i, x)| (self.bias(x, r).abs(), i))
            .fold(
                (f64::NEG_INFINITY, 0),
                |acc, v| if v.0 > acc.0 { v } else { acc },
            )
    }
}

/// Net-approximated sign imbalance with its certification slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceReport {
    pub b: f64,
    pub argmax: Vec<f64>,
    pub radius: f64,
    pub u: f64,
    /// Covering radius of the net used.
    pub spacing: f64,
    pub net_points: usize,
    /// Stability bound for a centre displacement of `spacing`.
    pub stability: f64,
    /// The requested spacing needed more points than the cap allows.
    pub capped: bool,
    pub grid_lat: usize,
}

/// Net at spacing δr, or the capped Fibonacci net when that is too large.
pub fn net_for_radius(r: f64, delta: f64, max_points: usize) -> Result<(SphereNet, bool)> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::Domain(format!(
            "net fraction δ must lie in (0, ½], got {delta}"
        )));
    }
    match make_net_in(2, delta * r, max_points) {
        Ok(net) => Ok((net, false)),
        Err(Error::Config(_)) => Ok((SphereNet::fibonacci(max_points), true)),
        Err(e) => Err(e),
    }
}

/// sup_x |D_u(x; r)| of a basis-mode sample over a net of spacing δr.
pub fn imbalance(field: &FieldSample, r: f64, delta: f64, u: f64) -> Result<ImbalanceReport> {
    if !(r > 0.0 && r < PI) {
        return Err(Error::Domain(format!("radius must lie in (0, π), got {r}")));
    }
    let (net, capped) = net_for_radius(r, delta, DEFAULT_NET_CAP)?;
    let layout = GridLayout::new(field.spec(), grid_lat_for(field.spec().ell(), r))?;
    let grid = layout.signs(field, u)?;
    Ok(imbalance_on_grid(&grid, &net, r, capped))
}

/// Imbalance of a prepared sign grid over a prepared net.
pub fn imbalance_on_grid(
    grid: &SignGrid<'_>,
    net: &SphereNet,
    r: f64,
    capped: bool,
) -> ImbalanceReport {
    let (b, i) = grid.max_abs_bias(net.points(), r);
    ImbalanceReport {
        b,
        argmax: net.points()[i].clone(),
        radius: r,
        u: grid.u,
        spacing: net.spacing(),
        net_points: net.len(),
        stability: net_stability(r, net.spacing()),
        capped,
        grid_lat: grid.layout.nlat(),
    }
}

/// max |D_u(x; r)| over the given centres for a function field, each cap
/// integrated with [`make_cap`] at `refinement`.
pub fn imbalance_on_net<F: Fn(&[f64]) -> f64>(
    f: F,
    net: &[Vec<f64>],
    r: f64,
    u: f64,
    refinement: usize,
) -> Result<(f64, usize)> {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, x) in net.iter().enumerate() {
        let v = volume_bias(&f, &make_cap(x, r, refinement)?, u)
            .d_centred
            .abs();
        if v > best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}
