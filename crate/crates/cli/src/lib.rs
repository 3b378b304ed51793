//! Library half of the `omaxkit` binary: argument parsing, commands and
//! certificate files. `main.rs` only maps [`Outcome`] to a process exit.

pub mod certificate;
pub mod io;
pub mod render;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use omaxkit_core::config::ToleranceConfig;
use omaxkit_core::dilation::{
    choi_feasibility, simplex_dilation, simplex_vertices, FeasibilityResult, FeasibilityStatus,
};
use omaxkit_core::numrange::{boundary2d_with, flat_portions, includes, OperatorTuple};
use omaxkit_core::omax::{classify_direct_sum, BlockList, Certificate, OmaxStatus, OmaxVerdict};
use serde::Serialize;

use certificate::{parse_certificate, verify, CertificateFile};
use io::{write_atomic, CliError, MatrixInput, EXIT_NEGATIVE, EXIT_POSITIVE, EXIT_UNKNOWN};

/// Tolerance used when re-checking dilation certificates.
pub const DILATION_VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "omaxkit", version, about = "Numerical ranges, dilations and OMAX classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Boundary of W(A) as CSV, SVG or JSON.
    Numrange {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Is W(B) contained in W(A)?
    Include {
        #[arg(short = 'A')]
        a: PathBuf,
        #[arg(short = 'B')]
        b: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Search for a dilation of B by A ⊗ I, or a certificate that none exists.
    Dilate {
        #[arg(short = 'A')]
        a: PathBuf,
        #[arg(short = 'B')]
        b: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// OMAX verdict for a direct sum of 1×1 and 2×2 blocks.
    Classify {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Emit B ∈ M₂ that A ⊗ I cannot dilate, when A is not OMAX.
    Counterexample {
        #[arg(short = 'i', long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Re-check certificate files without running any solver.
    Verify {
        #[arg(short = 'i', long = "input", required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Directions sampled on the unit circle.
    #[arg(long, default_value_t = 720)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub tol_hermitian: Option<f64>,
    #[arg(long)]
    pub tol_psd: Option<f64>,
    #[arg(long)]
    pub tol_eig: Option<f64>,
    #[arg(long)]
    pub tol_degeneracy: Option<f64>,
    #[arg(long)]
    pub tol_support_gap: Option<f64>,
    #[arg(long)]
    pub tol_sdp_conv: Option<f64>,
    #[arg(long)]
    pub max_sdp_iters: Option<usize>,
}

impl RunArgs {
    pub fn tolerances(&self) -> Result<ToleranceConfig, CliError> {
        let mut cfg = ToleranceConfig::default();
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut cfg.hermitian_tol, self.tol_hermitian);
        set(&mut cfg.psd_tol, self.tol_psd);
        set(&mut cfg.eig_tol, self.tol_eig);
        set(&mut cfg.degeneracy_tol, self.tol_degeneracy);
        set(&mut cfg.support_gap_tol, self.tol_support_gap);
        set(&mut cfg.sdp_conv_tol, self.tol_sdp_conv);
        if let Some(n) = self.max_sdp_iters {
            cfg.max_sdp_iters = n;
        }
        cfg.sweep_samples = self.samples;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit code plus what goes to standard output.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Sends the artifact to --out (atomically) or to stdout.
fn emit(run: &RunArgs, code: i32, artifact: String, summary: impl FnOnce() -> String) -> Result<Outcome, CliError> {
    match &run.out {
        Some(path) => {
            write_atomic(path, artifact.as_bytes())?;
            Ok(Outcome { code, stdout: summary() })
        }
        None => Ok(Outcome { code, stdout: artifact }),
    }
}

pub fn run(cli: Cli) -> Outcome {
    let result = match cli.command {
        Command::Numrange { input, run } => cmd_numrange(&input, &run),
        Command::Include { a, b, run } => cmd_include(&a, &b, &run),
        Command::Dilate { a, b, run } => cmd_dilate(&a, &b, &run),
        Command::Classify { input, run } => cmd_classify(&input, &run),
        Command::Counterexample { input, run } => cmd_counterexample(&input, &run),
        Command::Verify { inputs, run } => cmd_verify(&inputs, &run),
    };
    result.unwrap_or_else(|e| Outcome { code: e.code, stdout: format!("error: {}\n", e.message) })
}

#[derive(Serialize)]
struct NumrangeReport {
    samples: Vec<render::BoundaryRow>,
    flat_portions: Vec<omaxkit_core::numrange::FlatPortion>,
}

pub fn cmd_numrange(input: &Path, run: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = run.tolerances()?;
    let a = MatrixInput::read(input)?.matrix()?;
    let boundary = boundary2d_with(&a, run.samples, &cfg);
    let rows = render::rows(&boundary);
    let flats = if rows.len() > 1 { flat_portions(&a, run.samples, &cfg) } else { Vec::new() };
    let artifact = match run.format.unwrap_or(Format::Csv) {
        Format::Csv => render::csv(&rows),
        Format::Svg => render::svg(&rows, &flats),
        Format::Json => json(&NumrangeReport { samples: rows.clone(), flat_portions: flats.clone() }),
    };
    emit(run, EXIT_POSITIVE, artifact, || format!("{} boundary points, {} flat portions\n", rows.len(), flats.len()))
}

#[derive(Serialize)]
struct IncludeReport {
    verdict: bool,
    worst_gap: f64,
    worst_direction: Vec<f64>,
    directions_checked: usize,
}

fn pair(a: &Path, b: &Path) -> Result<(OperatorTuple, OperatorTuple), CliError> {
    let at = MatrixInput::read(a)?.tuple()?;
    let bt = MatrixInput::read(b)?.tuple()?;
    if at.m() != bt.m() {
        return Err(CliError::input(format!("A has {} members but B has {}", at.m(), bt.m())));
    }
    Ok((at, bt))
}

pub fn cmd_include(a: &Path, b: &Path, run: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = run.tolerances()?;
    let (at, bt) = pair(a, b)?;
    let rep = includes(&bt, &at, run.samples, &cfg)?;
    let code = if rep.verdict { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    let report = IncludeReport {
        verdict: rep.verdict,
        worst_gap: rep.worst_gap,
        worst_direction: rep.worst_direction.clone(),
        directions_checked: rep.directions_checked,
    };
    emit(run, code, json(&report), || format!("included: {}, worst gap {:e}\n", rep.verdict, rep.worst_gap))
}

#[derive(Serialize)]
pub struct DilateReport {
    pub status: FeasibilityStatus,
    pub method: String,
    pub iterations: usize,
    pub residual: f64,
    pub certificate: Option<CertificateFile>,
}

/// Certificate for a solver result, if it carries one.
pub fn feasibility_certificate(
    a: &OperatorTuple,
    b: &OperatorTuple,
    r: &FeasibilityResult,
    cfg: &ToleranceConfig,
) -> Option<CertificateFile> {
    match r.status {
        FeasibilityStatus::Feasible => r.isometry.clone().map(|isometry| CertificateFile::Dilation {
            a: a.clone(),
            b: b.clone(),
            isometry,
            tol: DILATION_VERIFY_TOL,
        }),
        FeasibilityStatus::Infeasible => r.witness.clone().map(|witness| CertificateFile::DualWitness {
            a: a.clone(),
            b: b.clone(),
            witness,
            psd_tol: cfg.psd_tol,
        }),
        FeasibilityStatus::Unknown => None,
    }
}

/// Simplex construction when W(A) is a simplex containing W(B), else the SDP.
pub fn dilate(a: &OperatorTuple, b: &OperatorTuple, cfg: &ToleranceConfig) -> Result<FeasibilityResult, CliError> {
    if simplex_vertices(a).is_some() {
        if let Ok(r) = simplex_dilation(a, b, cfg) {
            if r.status == FeasibilityStatus::Feasible {
                return Ok(r);
            }
        }
    }
    Ok(choi_feasibility(a, b, cfg)?)
}

pub fn cmd_dilate(a: &Path, b: &Path, run: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = run.tolerances()?;
    let (at, bt) = pair(a, b)?;
    let r = dilate(&at, &bt, &cfg)?;
    let code = match r.status {
        FeasibilityStatus::Feasible => EXIT_POSITIVE,
        FeasibilityStatus::Infeasible => EXIT_NEGATIVE,
        FeasibilityStatus::Unknown => EXIT_UNKNOWN,
    };
    let report = DilateReport {
        status: r.status,
        method: r.method.clone(),
        iterations: r.iterations,
        residual: r.residual,
        certificate: feasibility_certificate(&at, &bt, &r, &cfg),
    };
    emit(run, code, json(&report), || format!("{:?} ({}, {} iterations)\n", r.status, r.method, r.iterations))
}

#[derive(Serialize)]
pub struct ClassifyReport {
    pub verdict: OmaxVerdict,
    pub certificate: Option<CertificateFile>,
}

/// Verifiable certificate file for a verdict.
pub fn verdict_certificate(a: &BlockList, v: &OmaxVerdict, cfg: &ToleranceConfig) -> Option<CertificateFile> {
    match (&v.status, &v.certificate) {
        (OmaxStatus::Omax, Some(Certificate::Reduction { blocks, a0 })) => Some(CertificateFile::Reduction {
            a: a.clone(),
            rule: v.rule.map(|r| r.as_str().to_string()).unwrap_or_default(),
            blocks: blocks.clone(),
            a0: *a0,
            tol: 1e-7,
            samples: cfg.sweep_samples,
        }),
        (OmaxStatus::NotOmax, Some(Certificate::Counterexample { b, feasibility, .. })) => {
            feasibility.witness.clone().map(|witness| CertificateFile::Counterexample {
                a: a.clone(),
                b: b.clone(),
                witness,
                psd_tol: cfg.psd_tol,
                min_margin: 10.0 * cfg.support_gap_tol,
                samples: cfg.sweep_samples,
            })
        }
        _ => None,
    }
}

fn verdict_code(s: OmaxStatus) -> i32 {
    match s {
        OmaxStatus::Omax => EXIT_POSITIVE,
        OmaxStatus::NotOmax => EXIT_NEGATIVE,
        OmaxStatus::Unknown => EXIT_UNKNOWN,
    }
}

pub fn cmd_classify(input: &Path, run: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = run.tolerances()?;
    let a = MatrixInput::read(input)?.block_list()?;
    let verdict = classify_direct_sum(&a, &cfg);
    let certificate = verdict_certificate(&a, &verdict, &cfg);
    let code = verdict_code(verdict.status);
    let line = format!("{:?} ({})\n", verdict.status, verdict.rule.map_or("none", |r| r.as_str()));
    emit(run, code, json(&ClassifyReport { verdict, certificate }), || line)
}

#[derive(Serialize)]
struct CounterexampleReport {
    rule: Option<String>,
    b: omaxkit_core::matcore::CMatrix,
    inclusion_margin: f64,
    feasibility: FeasibilityStatus,
    certificate: Option<CertificateFile>,
    notes: Vec<String>,
}

pub fn cmd_counterexample(input: &Path, run: &RunArgs) -> Result<Outcome, CliError> {
    let cfg = run.tolerances()?;
    let a = MatrixInput::read(input)?.block_list()?;
    let verdict = classify_direct_sum(&a, &cfg);
    if verdict.status == OmaxStatus::Omax {
        return Ok(Outcome {
            code: EXIT_NEGATIVE,
            stdout: format!(
                "A is OMAX (rule {}); no counterexample exists\n",
                verdict.rule.map_or("none", |r| r.as_str())
            ),
        });
    }
    let certificate = verdict_certificate(&a, &verdict, &cfg);
    let Some(Certificate::Counterexample { b, inclusion_margin, feasibility }) = &verdict.certificate else {
        return Ok(Outcome {
            code: EXIT_UNKNOWN,
            stdout: format!("no counterexample: {}\n", verdict.notes.join("; ")),
        });
    };
    let code = if verdict.status == OmaxStatus::NotOmax { EXIT_POSITIVE } else { EXIT_UNKNOWN };
    let report = CounterexampleReport {
        rule: verdict.rule.map(|r| r.as_str().to_string()),
        b: b.clone(),
        inclusion_margin: *inclusion_margin,
        feasibility: feasibility.status,
        certificate,
        notes: verdict.notes.clone(),
    };
    let line =
        format!("{} counterexample, inclusion margin {:e}\n", report.rule.as_deref().unwrap_or("?"), inclusion_margin);
    emit(run, code, json(&report), || line)
}

pub fn cmd_verify(inputs: &[PathBuf], run: &RunArgs) -> Result<Outcome, CliError> {
    let mut reports = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let cert =
            parse_certificate(&text).map_err(|e| CliError::input(format!("{}: {}", path.display(), e.message)))?;
        reports.push(verify(&cert)?);
    }
    let all = reports.iter().all(|r| r.valid);
    let code = if all { EXIT_POSITIVE } else { EXIT_NEGATIVE };
    let n = reports.len();
    let failed = reports.iter().filter(|r| !r.valid).count();
    emit(run, code, json(&reports), || format!("{} of {n} certificates valid\n", n - failed))
}
