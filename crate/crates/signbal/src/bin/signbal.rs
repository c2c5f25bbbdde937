use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use signbal::emit::{emit, Output};
use signbal::experiments::{
    appendix_summary, run_barrier_demo, run_concentration, run_imbalance_scan,
    run_variance_scaling, EtaRule, ExperimentConfig, ExperimentKind, Format, PoleCap,
};
use signbal::kernels::{band_count, kernel_band, kernel_band_direct, KernelSpec};
use signbal::sampler::{sample_band_stream, write_csv, SampleHeader};
use signbal::specfun::tau;
use signbal::{Error, Result};

#[derive(Parser)]
#[command(
    name = "signbal",
    version,
    about = "Sign balance of band-limited random waves on spheres"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalization and recurrence-vs-direct check of the band kernel.
    KernelCheck(Common),
    /// Draw one band-limited wave on S².
    Sample(Common),
    /// Volume bias of one sampled field on the polar cap.
    Defect(Common),
    /// Sign-imbalance scan over radii μ·r̄_ℓ and μ·ubar-r_ℓ.
    Imbalance(Common),
    /// Variance of the centred bias against rℓ.
    Variance(Common),
    /// Exceedance probabilities of the centred bias.
    Concentration(Common),
    /// Barrier constructions and their biases.
    Barrier(Common),
    /// Bessel density profile and its box-domain fields.
    AppendixA(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON file with an ExperimentConfig; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ell: Vec<usize>,
    /// Band width: an integer, `sqrt`, or `frac:<c>`.
    #[arg(long)]
    eta: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    u: Vec<f64>,
    /// Radii in units of 1/ℓ.
    #[arg(long, value_delimiter = ',')]
    r_mult: Vec<f64>,
    /// Radii in units of r̄_ℓ and ubar-r_ℓ (imbalance scan).
    #[arg(long, value_delimiter = ',')]
    mu: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (experiments) or file (sample).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    plot: bool,
}

fn parse_eta(s: &str) -> Result<EtaRule> {
    if s == "sqrt" {
        return Ok(EtaRule::Sqrt);
    }
    if let Some(c) = s.strip_prefix("frac:") {
        return c
            .parse()
            .map(EtaRule::Fraction)
            .map_err(|_| Error::Config(format!("bad η fraction `{c}`")));
    }
    s.parse()
        .map(EtaRule::Fixed)
        .map_err(|_| Error::Config(format!("bad η `{s}`: use an integer, sqrt or frac:<c>")))
}

impl Common {
    fn config(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                serde_json::from_str(&text)?
            }
            None => ExperimentConfig::preset(kind),
        };
        cfg.experiment = kind;
        if let Some(d) = self.d {
            cfg.d = d;
        }
        if !self.ell.is_empty() {
            cfg.ells = self.ell.clone();
        }
        if let Some(e) = &self.eta {
            cfg.eta = parse_eta(e)?;
        }
        if !self.u.is_empty() {
            cfg.us = self.u.clone();
        }
        if !self.r_mult.is_empty() {
            cfg.r_mults = self.r_mult.clone();
        }
        if !self.mu.is_empty() {
            cfg.r_mults = self.mu.clone();
        }
        if !self.eps.is_empty() {
            cfg.eps = self.eps.clone();
        }
        if let Some(n) = self.replicates {
            cfg.replicates = n;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(f) = self.format {
            cfg.format = match f {
                FormatArg::Csv => Format::Csv,
                FormatArg::Json => Format::Json,
            };
        }
        cfg.plot |= self.plot;
        Ok(cfg)
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn finish(cfg: &ExperimentConfig, output: Output) -> Result<()> {
    match &cfg.out {
        Some(dir) => {
            for f in emit(cfg, &output, dir)?.files {
                println!("{}", f.display());
            }
            Ok(())
        }
        None => print_json(&output),
    }
}

#[derive(Serialize)]
struct KernelCheckRow {
    d: usize,
    ell: usize,
    eta: usize,
    n_band: u64,
    k_at_zero: f64,
    max_recurrence_vs_direct: f64,
}

fn kernel_check(cfg: &ExperimentConfig) -> Result<()> {
    let mut rows = Vec::new();
    for &ell in &cfg.ells {
        let spec = KernelSpec::new(cfg.d, ell, cfg.eta.eta(ell))?;
        let diff = (0..200)
            .map(|i| {
                let th = std::f64::consts::PI * i as f64 / 199.0;
                (kernel_band(spec, th) - kernel_band_direct(spec, th)).abs()
            })
            .fold(0.0, f64::max);
        rows.push(KernelCheckRow {
            d: cfg.d,
            ell,
            eta: spec.eta(),
            n_band: band_count(spec)?.n_band,
            k_at_zero: kernel_band(spec, 0.0),
            max_recurrence_vs_direct: diff,
        });
    }
    print_json(&rows)
}

fn sample(cfg: &ExperimentConfig) -> Result<()> {
    let ell = cfg.ells[0];
    let spec = KernelSpec::new(cfg.d, ell, cfg.eta.eta(ell))?;
    let s = sample_band_stream(spec, cfg.seed, 0)?;
    let write = |w: &mut dyn Write, path: &Path| -> Result<()> {
        match cfg.format {
            Format::Csv => write_csv(&s, w).map_err(|e| Error::io(path, e)),
            Format::Json => {
                #[derive(Serialize)]
                struct Doc<'a> {
                    header: SampleHeader,
                    coeffs: &'a [f64],
                }
                serde_json::to_writer(
                    &mut *w,
                    &Doc {
                        header: s.header(),
                        coeffs: s.data(),
                    },
                )?;
                writeln!(w).map_err(|e| Error::io(path, e))
            }
        }
    };
    match &cfg.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(f);
            write(&mut w, path)?;
            w.flush().map_err(|e| Error::io(path, e))
        }
        None => write(&mut std::io::stdout().lock(), Path::new("<stdout>")),
    }
}

#[derive(Serialize)]
struct DefectRow {
    ell: usize,
    eta: usize,
    seed: u64,
    r: f64,
    u: f64,
    d_tilde: f64,
    d_centred: f64,
    nodes: usize,
}

fn defect(cfg: &ExperimentConfig) -> Result<()> {
    let ell = cfg.ells[0];
    let spec = cfg.spec(ell)?;
    let s = sample_band_stream(spec, cfg.seed, 0)?;
    let mut rows = Vec::new();
    for &m in &cfg.r_mults {
        let r = m / ell as f64;
        let cap = PoleCap::new(spec, r)?;
        let centred = cap.biases(&s, &cfg.us)?;
        for (&u, &dc) in cfg.us.iter().zip(&centred) {
            rows.push(DefectRow {
                ell,
                eta: spec.eta(),
                seed: cfg.seed,
                r,
                u,
                d_tilde: dc + tau(u),
                d_centred: dc,
                nodes: cap.nodes(),
            });
        }
    }
    print_json(&rows)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::KernelCheck(c) => {
            let mut cfg = c.config(ExperimentKind::Variance)?;
            if c.ell.is_empty() && c.config.is_none() {
                cfg.ells = vec![10, 50, 200];
            }
            kernel_check(&cfg)
        }
        Command::Sample(c) => sample(&c.config(ExperimentKind::Variance)?),
        Command::Defect(c) => {
            let cfg = c.config(ExperimentKind::Variance)?;
            cfg.validate()?;
            defect(&cfg)
        }
        Command::Imbalance(c) => {
            let cfg = c.config(ExperimentKind::Imbalance)?;
            finish(&cfg, Output::Imbalance(run_imbalance_scan(&cfg)?))
        }
        Command::Variance(c) => {
            let cfg = c.config(ExperimentKind::Variance)?;
            finish(&cfg, Output::Variance(run_variance_scaling(&cfg)?))
        }
        Command::Concentration(c) => {
            let cfg = c.config(ExperimentKind::Concentration)?;
            finish(&cfg, Output::Concentration(run_concentration(&cfg)?))
        }
        Command::Barrier(c) => {
            let cfg = c.config(ExperimentKind::Barrier)?;
            finish(&cfg, Output::Barrier(Box::new(run_barrier_demo(&cfg)?)))
        }
        Command::AppendixA(c) => {
            let cfg = c.config(ExperimentKind::Barrier)?;
            let b = &cfg.barrier;
            print_json(&appendix_summary(
                b.appendix_r,
                b.grid_scale,
                b.centers,
                cfg.seed,
            )?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
