#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use casimir_core::asymptotics::{
    beta_bundle, e_pfa, energy_asymptotic, trace_mr_leading, trace_mr_ntlo, AsymptoticEnergy,
    AsymptoticOrder, LeadingTrace,
};
use casimir_core::oracles::{beta_fit, verify_suite, BetaFit, FitModel};
use casimir_core::report::{emit_csv, to_json, CsvRow};
use casimir_core::{energy, Error, Geometry, KernelKind, Polarization, QuadratureConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(
    name = "casimir",
    version,
    about = "Sphere-plane Casimir energy between perfect reflectors at T = 0"
)]
struct Cli {
    /// Worker threads for the solver
    #[arg(long, global = true, env = "CASIMIR_THREADS")]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Energy from the round-trip determinant
    Energy(EnergyArgs),
    /// Proximity-force energy and the next-order asymptotic estimate
    Pfa(GeometryArgs),
    /// The β coefficients in exact and floating form
    Beta,
    /// Fit β to energies computed at several aspect ratios
    BetaFit(BetaFitArgs),
    /// Leading and next-to-leading order saddle-point traces per round trip
    TraceTerms(TraceArgs),
    /// Run the derivative oracles
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct GeometryArgs {
    /// Sphere radius
    #[arg(long = "R")]
    radius: f64,
    /// Surface-to-surface gap, same unit as R
    #[arg(long = "L")]
    gap: f64,
}

#[derive(Args, Debug)]
struct QuadratureArgs {
    #[arg(long, value_enum, default_value_t = Kernel::Wkb1)]
    kernel: Kernel,
    #[arg(long)]
    n_radial: Option<usize>,
    #[arg(long)]
    n_azimuthal: Option<usize>,
    #[arg(long)]
    n_xi: Option<usize>,
    /// Fixed azimuthal cutoff (default: chosen per frequency)
    #[arg(long)]
    m_max: Option<usize>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    quadrature: QuadratureArgs,
    /// Length unit in metres; adds the energy in joule
    #[arg(long)]
    length_unit_m: Option<f64>,
}

#[derive(Args, Debug)]
struct BetaFitArgs {
    #[command(flatten)]
    quadrature: QuadratureArgs,
    /// Comma-separated R/L values
    #[arg(long, value_delimiter = ',', default_value = "100,200,400,800")]
    ratios: Vec<f64>,
    #[arg(long, value_enum, default_value_t = Model::Quadratic)]
    model: Model,
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Comma-separated u = 2ξLr values
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    u: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    r_max: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Round-trip counts to check
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    r: Vec<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kernel {
    #[value(name = "exact-mie")]
    ExactMie,
    Wkb0,
    Wkb1,
}

impl From<Kernel> for KernelKind {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::ExactMie => KernelKind::ExactMie,
            Kernel::Wkb0 => KernelKind::Wkb0,
            Kernel::Wkb1 => KernelKind::Wkb1,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Model {
    Linear,
    Quadratic,
}

enum Failure {
    Usage(String),
    Numerical(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Geometry(_) | Error::Config(_) | Error::Domain { .. } => {
                Failure::Usage(e.to_string())
            }
            Error::Io(m) => Failure::Io(m),
            other => Failure::Numerical(other),
        }
    }
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let obj = ErrorObject {
        error: ErrorBody { kind, message },
    };
    eprintln!("{}", serde_json::to_string(&obj).unwrap_or_default());
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail("usage", e.to_string().trim().to_string(), 2);
        }
    };
    match run(&cli) {
        Ok(passed) => {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(m)) => fail("usage", m, 2),
        Err(Failure::Numerical(e)) => fail("numerical", e.to_string(), 1),
        Err(Failure::Io(m)) => fail("io", m, 1),
    }
}

fn quadrature_config(geometry: &Geometry, q: &QuadratureArgs) -> Result<QuadratureConfig, Failure> {
    let mut c = QuadratureConfig::for_geometry(geometry);
    if let Some(n) = q.n_radial {
        c.n_radial = n;
    }
    if let Some(n) = q.n_azimuthal {
        c.n_azimuthal = n;
    }
    if let Some(n) = q.n_xi {
        c.n_xi = n;
    }
    c.m_max = q.m_max;
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct PfaOutput {
    radius: f64,
    gap: f64,
    aspect_ratio: f64,
    /// E_PFA in units of ħc/L
    energy: f64,
    energy_unit: &'static str,
    ntlo: AsymptoticEnergy,
}

#[derive(Serialize)]
struct BetaFitOutput {
    kernel: KernelKind,
    fit: BetaFit,
    runs: Vec<CsvRow>,
}

#[derive(Serialize)]
struct TraceRow {
    r: usize,
    u: f64,
    leading_te: LeadingTrace,
    leading_tm: LeadingTrace,
    /// per polarization
    ntlo: f64,
}

fn run(cli: &Cli) -> Result<bool, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let csv_ok = matches!(cli.command, Command::Energy(_) | Command::BetaFit(_));
    if cli.format == Format::Csv && !csv_ok {
        return Err(Failure::Usage(
            "--format csv is available for energy and beta-fit only".into(),
        ));
    }
    let mut passed = true;
    let (json, rows): (String, Vec<CsvRow>) = match &cli.command {
        Command::Energy(a) => {
            let g = Geometry::new(a.geometry.radius, a.geometry.gap)?;
            let config = quadrature_config(&g, &a.quadrature)?;
            let mut report = energy(&g, a.quadrature.kernel.into(), &config)?;
            if let Some(m) = a.length_unit_m {
                if !(m > 0.0) {
                    return Err(Failure::Usage("--length-unit-m must be > 0".into()));
                }
                report = report.with_length_unit(m);
            }
            (to_json(&report)?, vec![CsvRow::from(&report)])
        }
        Command::Pfa(a) => {
            let g = Geometry::new(a.radius, a.gap)?;
            let out = PfaOutput {
                radius: g.radius,
                gap: g.gap,
                aspect_ratio: g.aspect_ratio(),
                energy: e_pfa(&g),
                energy_unit: "hbar*c/L",
                ntlo: energy_asymptotic(&g, AsymptoticOrder::Ntlo),
            };
            (to_json(&out)?, vec![])
        }
        Command::Beta => (to_json(&beta_bundle())?, vec![]),
        Command::BetaFit(a) => {
            let kind: KernelKind = a.quadrature.kernel.into();
            let mut rows = Vec::new();
            for &q in &a.ratios {
                let g = Geometry::from_aspect_ratio(q)?;
                let config = quadrature_config(&g, &a.quadrature)?;
                rows.push(CsvRow::from(&energy(&g, kind, &config)?));
            }
            let samples: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| (r.aspect_ratio, r.ratio_to_pfa))
                .collect();
            let model = match a.model {
                Model::Linear => FitModel::Linear,
                Model::Quadratic => FitModel::Quadratic,
            };
            let fit = beta_fit(&samples, model)?;
            let out = BetaFitOutput {
                kernel: kind,
                fit,
                runs: rows.clone(),
            };
            (to_json(&out)?, rows)
        }
        Command::TraceTerms(a) => {
            let mut rows = Vec::new();
            for &u in &a.u {
                for r in 1..=a.r_max {
                    rows.push(TraceRow {
                        r,
                        u,
                        leading_te: trace_mr_leading(r, u, Polarization::TE)?,
                        leading_tm: trace_mr_leading(r, u, Polarization::TM)?,
                        ntlo: trace_mr_ntlo(r, u)?,
                    });
                }
            }
            (to_json(&rows)?, vec![])
        }
        Command::Verify(a) => {
            if a.r.iter().any(|&r| !(2..=5).contains(&r)) {
                return Err(Failure::Usage("--r values must lie in 2..=5".into()));
            }
            let report = verify_suite(&a.r)?;
            passed = report.pass;
            (to_json(&report)?, vec![])
        }
    };
    let mut sink: Box<dyn Write> = match &cli.out {
        Some(p) => {
            Box::new(File::create(p).map_err(|e| Failure::Io(format!("{}: {e}", p.display())))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    match cli.format {
        Format::Json => writeln!(sink, "{json}").map_err(|e| Failure::Io(e.to_string()))?,
        Format::Csv => emit_csv(&rows, &mut sink)?,
    }
    sink.flush().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(passed)
}
