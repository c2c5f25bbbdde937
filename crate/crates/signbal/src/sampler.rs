//! Gaussian random spherical harmonics, band-limited waves and a
//! kernel-factorization sampler on finite point sets.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{band_len, basis_values, AlfRecurrence};
use crate::kernels::{band_count, kernel_band, KernelSpec};
use crate::sphere::PointSet;

/// Seeded generator for one replicate: the stream index separates
/// replicates so that parallel and serial runs draw identical numbers.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Basis,
    Factorized,
}

#[derive(Debug, Clone, PartialEq)]
enum FieldData {
    Basis {
        coeffs: Vec<f64>,
    },
    Values {
        points: PointSet,
        values: Vec<f64>,
        jitter: f64,
    },
}

/// One realization of a Gaussian random wave.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    spec: KernelSpec,
    seed: u64,
    stream: u64,
    data: FieldData,
}

impl FieldSample {
    pub fn spec(&self) -> KernelSpec {
        self.spec
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn mode(&self) -> SampleMode {
        match self.data {
            FieldData::Basis { .. } => SampleMode::Basis,
            FieldData::Values { .. } => SampleMode::Factorized,
        }
    }

    /// Basis coefficients (basis mode) or point values (factorization mode).
    pub fn data(&self) -> &[f64] {
        match &self.data {
            FieldData::Basis { coeffs } => coeffs,
            FieldData::Values { values, .. } => values,
        }
    }

    pub fn coeffs(&self) -> Option<&[f64]> {
        match &self.data {
            FieldData::Basis { coeffs } => Some(coeffs),
            FieldData::Values { .. } => None,
        }
    }

    pub fn points(&self) -> Option<&PointSet> {
        match &self.data {
            FieldData::Values { points, .. } => Some(points),
            FieldData::Basis { .. } => None,
        }
    }

    pub fn jitter(&self) -> Option<f64> {
        match &self.data {
            FieldData::Values { jitter, .. } => Some(*jitter),
            FieldData::Basis { .. } => None,
        }
    }

    /// The field multiplied by a constant.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        match &mut out.data {
            FieldData::Basis { coeffs } => coeffs.iter_mut().for_each(|v| *v *= c),
            FieldData::Values { values, .. } => values.iter_mut().for_each(|v| *v *= c),
        }
        out
    }

    /// Per-degree weights √(n_{ℓ'}/N(ℓ,η))·√(4π/(2ℓ'+1)); all equal to
    /// √(4π/N) on S².
    pub fn degree_weights(&self) -> Vec<f64> {
        degree_weights(self.spec)
    }

    pub fn header(&self) -> SampleHeader {
        SampleHeader {
            d: self.spec.d(),
            ell: self.spec.ell(),
            eta: self.spec.eta(),
            seed: self.seed,
            stream: self.stream,
            mode: self.mode(),
        }
    }
}

pub(crate) fn degree_weights(spec: KernelSpec) -> Vec<f64> {
    let n = band_count(spec).expect("valid spec").n_band as f64;
    vec![(4.0 * PI / n).sqrt(); spec.eta()]
}

fn require_d2(spec: KernelSpec) -> Result<()> {
    if spec.d() != 2 {
        return Err(Error::Domain(
            "basis sampling is available for d = 2 only".into(),
        ));
    }
    Ok(())
}

/// Random spherical harmonic H_ℓ on S², replicate stream 0.
pub fn sample_harmonic(ell: usize, seed: u64) -> Result<FieldSample> {
    if ell < 1 {
        return Err(Error::Domain("degree must be at least 1".into()));
    }
    sample_band(ell, 1, seed)
}

/// Band-limited wave f_{ℓ,η} on S², replicate stream 0.
pub fn sample_band(ell: usize, eta: usize, seed: u64) -> Result<FieldSample> {
    sample_band_stream(KernelSpec::new(2, ell, eta)?, seed, 0)
}

/// Band-limited wave on S² drawn from replicate stream `stream`.
pub fn sample_band_stream(spec: KernelSpec, seed: u64, stream: u64) -> Result<FieldSample> {
    require_d2(spec)?;
    let mut rng = replicate_rng(seed, stream);
    let n = band_len(spec.ell_min(), spec.ell());
    let coeffs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    Ok(FieldSample {
        spec,
        seed,
        stream,
        data: FieldData::Basis { coeffs },
    })
}

/// Value of a sample at a unit vector x.
pub fn evaluate(sample: &FieldSample, x: &[f64]) -> Result<f64> {
    match &sample.data {
        FieldData::Basis { coeffs } => {
            if x.len() != 3 {
                return Err(Error::Domain("basis-mode samples live on S²".into()));
            }
            let spec = sample.spec;
            let rec = AlfRecurrence::new(spec.ell());
            let b = basis_values(&rec, spec.ell_min(), x);
            let w = degree_weights(spec)[0];
            Ok(w * b.iter().zip(coeffs).map(|(a, c)| a * c).sum::<f64>())
        }
        FieldData::Values { points, values, .. } => points
            .position(x)
            .map(|i| values[i])
            .ok_or_else(|| Error::Domain("point outside the sample's point set".into())),
    }
}

/// Harmonic values cached at fixed points, for evaluating many samples.
#[derive(Debug, Clone)]
pub struct BasisCache {
    spec: KernelSpec,
    rows: Vec<Vec<f64>>,
}

impl BasisCache {
    pub fn new(spec: KernelSpec, points: &[Vec<f64>]) -> Result<Self> {
        require_d2(spec)?;
        let rec = AlfRecurrence::new(spec.ell());
        let w = degree_weights(spec)[0];
        let rows = points
            .iter()
            .map(|x| {
                basis_values(&rec, spec.ell_min(), x)
                    .into_iter()
                    .map(|v| w * v)
                    .collect()
            })
            .collect();
        Ok(Self { spec, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Value of `sample` at cached point `i`.
    pub fn eval(&self, sample: &FieldSample, i: usize) -> f64 {
        debug_assert_eq!(sample.spec, self.spec);
        let c = sample.coeffs().expect("basis-mode sample");
        self.rows[i].iter().zip(c).map(|(a, b)| a * b).sum()
    }

    /// Values at all cached points.
    pub fn eval_all(&self, sample: &FieldSample) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.eval(sample, i)).collect()
    }
}

/// Cholesky factor of the kernel matrix on a point set.
#[derive(Debug, Clone)]
pub struct FactorizedSampler {
    spec: KernelSpec,
    points: PointSet,
    factor: DMatrix<f64>,
    jitter: f64,
}

const AUTO_JITTER: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

impl FactorizedSampler {
    /// Factorizes K + jitter·I. With `jitter = None` the jitter starts at
    /// 1e−10·trace and is raised ×10 up to three times.
    pub fn new(points: PointSet, spec: KernelSpec, jitter: Option<f64>) -> Result<Self> {
        if points.d() != spec.d() {
            return Err(Error::Domain(format!(
                "point set on S^{} but kernel on S^{}",
                points.d(),
                spec.d()
            )));
        }
        if let Some(j) = jitter {
            if !(j >= 0.0) {
                return Err(Error::Domain(format!(
                    "jitter must be non-negative, got {j}"
                )));
            }
        }
        let n = points.len();
        let mut k = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = 1.0;
            for j in 0..i {
                let v = kernel_band(spec, points.distance(i, j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let trace = n as f64;
        let attempts: Vec<f64> = match jitter {
            Some(j) => vec![j],
            None => (0..=JITTER_RETRIES)
                .map(|i| AUTO_JITTER * trace * 10f64.powi(i as i32))
                .collect(),
        };
        for &j in &attempts {
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += j;
            }
            if let Some(ch) = m.cholesky() {
                let factor = ch.unpack();
                // nalgebra accepts zero pivots; reject them here
                if (0..n).all(|i| factor[(i, i)].is_finite() && factor[(i, i)].powi(2) > 1e-15) {
                    return Ok(Self {
                        spec,
                        points,
                        factor,
                        jitter: j,
                    });
                }
            }
        }
        Err(Error::Numerical(format!(
            "kernel matrix not positive definite with jitter up to {:e}",
            attempts.last().copied().unwrap_or(0.0)
        )))
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn draw(&self, seed: u64, stream: u64) -> FieldSample {
        let mut rng = replicate_rng(seed, stream);
        let n = self.points.len();
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let values = (0..n)
            .map(|i| (0..=i).map(|j| self.factor[(i, j)] * g[j]).sum())
            .collect();
        FieldSample {
            spec: self.spec,
            seed,
            stream,
            data: FieldData::Values {
                points: self.points.clone(),
                values,
                jitter: self.jitter,
            },
        }
    }
}

/// One factorization-mode draw (stream 0). See [`FactorizedSampler::new`].
pub fn sample_factorized(
    points: PointSet,
    spec: KernelSpec,
    jitter: Option<f64>,
    seed: u64,
) -> Result<FieldSample> {
    Ok(FactorizedSampler::new(points, spec, jitter)?.draw(seed, 0))
}

/// Header written in front of exported samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub d: usize,
    pub ell: usize,
    pub eta: usize,
    pub seed: u64,
    pub stream: u64,
    pub mode: SampleMode,
}

/// Writes the JSON header line followed by little-endian f64 data.
pub fn write_binary<W: Write>(sample: &FieldSample, mut w: W) -> std::io::Result<()> {
    let header = serde_json::to_string(&sample.header())?;
    writeln!(w, "{header}")?;
    w.write_all(&(sample.data().len() as u64).to_le_bytes())?;
    for v in sample.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary<R: BufRead>(mut r: R) -> Result<(SampleHeader, Vec<f64>)> {
    let mut line = String::new();
    r.read_line(&mut line)
        .map_err(|e| Error::io("<binary sample>", e))?;
    let header: SampleHeader = serde_json::from_str(line.trim_end())?;
    let mut len = [0u8; 8];
    r.read_exact(&mut len)
        .map_err(|e| Error::io("<binary sample>", e))?;
    let n = u64::from_le_bytes(len) as usize;
    let mut data = Vec::with_capacity(n);
    let mut buf = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut buf)
            .map_err(|e| Error::io("<binary sample>", e))?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok((header, data))
}

/// Writes `# <json header>` then `index,value` rows.
pub fn write_csv<W: Write>(sample: &FieldSample, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# {}", serde_json::to_string(&sample.header())?)?;
    writeln!(w, "index,value")?;
    for (i, v) in sample.data().iter().enumerate() {
        writeln!(w, "{i},{v:?}")?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(r: R) -> Result<(SampleHeader, Vec<f64>)> {
    let mut lines = r.lines();
    let bad = |m: &str| Error::Config(format!("malformed sample CSV: {m}"));
    let first = lines
        .next()
        .ok_or_else(|| bad("empty"))?
        .map_err(|e| Error::io("<csv>", e))?;
    let header: SampleHeader = serde_json::from_str(
        first
            .strip_prefix("# ")
            .ok_or_else(|| bad("missing header"))?,
    )?;
    lines.next();
    let mut data = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io("<csv>", e))?;
        let v = line
            .split(',')
            .nth(1)
            .ok_or_else(|| bad("missing value column"))?;
        data.push(v.parse::<f64>().map_err(|_| bad(v))?);
    }
    Ok((header, data))
}
