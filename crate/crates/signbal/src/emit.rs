//! Output of experiment results: CSV tables, JSON envelopes with a
//! provenance manifest, and gnuplot scripts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{
    BarrierDemo, ConcentrationReport, ExperimentConfig, FitResult, Format, ImbalanceScan,
    VarianceReport,
};

pub const SCHEMA_VERSION: u32 = 1;

const CONSTANTS_SOURCE: &str = include_str!("constants.rs");

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub version: String,
    pub constants_sha256: String,
}

pub fn manifest(cfg: &ExperimentConfig) -> Result<Manifest> {
    Ok(Manifest {
        config_sha256: hex_digest(serde_json::to_string(cfg)?.as_bytes()),
        version: env!("CARGO_PKG_VERSION").to_string(),
        constants_sha256: hex_digest(CONSTANTS_SOURCE.as_bytes()),
    })
}

/// JSON document written for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub manifest: Manifest,
    pub config: ExperimentConfig,
    pub result: Option<T>,
}

/// Result of one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Output {
    Variance(VarianceReport),
    Concentration(ConcentrationReport),
    Imbalance(ImbalanceScan),
    Barrier(Box<BarrierDemo>),
}

/// Flat CSV form of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub ell: usize,
    pub u: f64,
    pub eps: Option<f64>,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub slope_se: Option<f64>,
    pub r_squared: Option<f64>,
    pub points: usize,
}

impl FitRow {
    fn new(ell: usize, u: f64, eps: Option<f64>, fit: Option<&FitResult>) -> Self {
        Self {
            ell,
            u,
            eps,
            slope: fit.map(|f| f.slope),
            intercept: fit.map(|f| f.intercept),
            slope_se: fit.map(|f| f.slope_se),
            r_squared: fit.map(|f| f.r_squared),
            points: fit.map_or(0, |f| f.points.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyValue {
    pub key: String,
    pub value: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: csv: {other:?}", path.display())),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Files of one emitted run.
#[derive(Debug, Clone, Default)]
pub struct Emitted {
    pub files: Vec<PathBuf>,
}

impl Output {
    pub fn name(&self) -> &'static str {
        match self {
            Output::Variance(_) => "variance",
            Output::Concentration(_) => "concentration",
            Output::Imbalance(_) => "imbalance",
            Output::Barrier(_) => "barrier",
        }
    }

    fn tables(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let p = |s: &str| dir.join(s);
        let mut out = Vec::new();
        match self {
            Output::Variance(v) => {
                write_csv(&p("variance.csv"), &v.rows)?;
                let fits: Vec<FitRow> = v
                    .fits
                    .iter()
                    .map(|f| FitRow::new(f.ell, f.u, None, Some(&f.fit)))
                    .collect();
                write_csv(&p("variance_fit.csv"), &fits)?;
                out.extend([p("variance.csv"), p("variance_fit.csv")]);
            }
            Output::Concentration(c) => {
                write_csv(&p("concentration.csv"), &c.rows)?;
                let fits: Vec<FitRow> = c
                    .fits
                    .iter()
                    .map(|f| FitRow::new(f.ell, f.u, Some(f.eps), f.fit.as_ref()))
                    .collect();
                write_csv(&p("concentration_fit.csv"), &fits)?;
                out.extend([p("concentration.csv"), p("concentration_fit.csv")]);
            }
            Output::Imbalance(s) => {
                write_csv(&p("imbalance.csv"), &s.rows)?;
                out.push(p("imbalance.csv"));
            }
            Output::Barrier(b) => {
                write_csv(&p("hex_defect.csv"), &b.hex_curve)?;
                write_csv(&p("barrier_level.csv"), &b.level_barrier)?;
                write_csv(&p("barrier_summary.csv"), &barrier_summary(b))?;
                out.extend([
                    p("hex_defect.csv"),
                    p("barrier_level.csv"),
                    p("barrier_summary.csv"),
                ]);
            }
        }
        Ok(out)
    }

    /// gnuplot script plotting the main CSV, which it references by name.
    pub fn gnuplot(&self) -> String {
        let body = match self {
            Output::Variance(_) => concat!(
                "set logscale xy\nset xlabel 'r*ell'\nset ylabel 'Var D'\n",
                "plot 'variance.csv' using 4:($5==0?$7:1/0) with linespoints title 'u = 0', \\\n",
                "     'variance.csv' using 4:($5!=0?$7:1/0) with linespoints title 'u != 0'\n"
            ),
            Output::Concentration(_) => concat!(
                "set xlabel '(r*ell)^(d-1) max(1, r*eta)'\nset ylabel '-log P'\n",
                "plot 'concentration.csv' using 14:11:12:13 with yerrorbars title '-log P'\n"
            ),
            Output::Imbalance(_) => concat!(
                "set logscale x\nset xlabel 'mu'\nset ylabel 'mean B'\n",
                "plot 'imbalance.csv' using 3:($4 eq \"r-bar\"?$7:1/0) with points title 'r-bar', \\\n",
                "     'imbalance.csv' using 3:($4 eq \"ubar-r\"?$7:1/0) with points title 'ubar-r'\n"
            ),
            Output::Barrier(_) => {
                "set xlabel 't'\nset ylabel 'D(t)'\nplot 'hex_defect.csv' using 1:2 with lines title 'D(t)'\n"
            }
        };
        format!("set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo\nset output '{}.png'\n{body}", self.name())
    }
}

fn barrier_summary(b: &BarrierDemo) -> Vec<KeyValue> {
    let kv = |k: &str, v: f64| KeyValue {
        key: k.to_string(),
        value: v,
    };
    let s = &b.sign_barrier;
    let a = &b.appendix;
    vec![
        kv("hex_d0", b.hex.d_zero),
        kv("hex_d_prime", b.hex.d_prime),
        kv("hex_d_second", b.hex.d_second),
        kv("t0", b.hex.t0),
        kv("d_t0", b.hex.d_t0),
        kv("eps0", b.hex.eps0),
        kv("sign_r", s.r),
        kv("sign_r_tilde", s.r_tilde),
        kv("sign_s", s.s),
        kv("sign_bias", s.bias),
        kv("sign_norm_squared", s.norm_squared),
        kv("sign_norm_bound", s.norm_bound),
        kv("pullback_sup_error", s.pullback.sup_error),
        kv("xi_s", a.profile.s),
        kv("xi_unit_integral_max", a.unit_integral_max),
        kv("xi_centred_integral", a.centred_integral),
        kv("xi_centred_identity", a.centred_identity),
        kv("xi_printed_closed_form", a.printed_closed_form),
        kv("box_unit_defect_max", a.unit_defect_max),
        kv("box_r_defect", a.r_defect),
        kv("box_r_defect_predicted", a.r_defect_predicted),
    ]
}

/// Writes the run's files into `dir`: CSV tables and a manifest-only JSON
/// for `Format::Csv`, the full JSON envelope for `Format::Json`, and a
/// gnuplot script (with its CSV tables) when `plot` is set.
pub fn emit(cfg: &ExperimentConfig, output: &Output, dir: &Path) -> Result<Emitted> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let name = output.name();
    let manifest = manifest(cfg)?;
    if cfg.format == Format::Csv || cfg.plot {
        files.extend(output.tables(dir)?);
    }
    let full = cfg.format == Format::Json;
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        manifest,
        config: cfg.clone(),
        result: full.then_some(output),
    };
    let json_path = dir.join(if full {
        format!("{name}.json")
    } else {
        format!("{name}.manifest.json")
    });
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &env)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(&json_path, e))?;
    files.push(json_path);
    if cfg.plot {
        let gp = dir.join(format!("{name}.gp"));
        write_text(&gp, &output.gnuplot())?;
        files.push(gp);
    }
    Ok(Emitted { files })
}
