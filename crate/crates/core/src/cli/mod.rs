//! The `tiltcheck` command line: argument parsing, dispatch and exit codes.

pub mod problem;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bundle::{epi_convergence_probe, fd_second_subderivative, g_eval, minimal_bundle, second_subderivative};
use crate::error::Error;
use crate::linalg::SymMatrix;
use crate::polyfun::Preset;
use crate::tilt::{analyze, check_stationarity, SmoothTerm};
use problem::{from_json, load_problem, preset_template, read_text, Problem};
use report::ReportFile;

pub const EXIT_SCHEMA: u8 = 64;
pub const EXIT_NOT_STATIONARY: u8 = 65;
pub const EXIT_NOINPUT: u8 = 66;
pub const EXIT_INTERNAL: u8 = 70;
pub const SEED_ENV: &str = "TILTCHECK_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotStationary { .. } | Error::NotSimultaneousFrame { .. } => EXIT_NOT_STATIONARY,
            _ => EXIT_INTERNAL,
        };
        CliError::new(code, e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "tiltcheck", version, about = "Tilt stability of φ(X) + θ(λ(X)) at a stationary point")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: stationarity, minimal bundle, SSOSC, kernel condition.
    Analyze {
        file: PathBuf,
        /// Also run the tilted-problem oracle.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        json: bool,
        /// Oracle seed; TILTCHECK_SEED takes precedence.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Critical cone and affine hull membership of a direction H.
    Cone {
        file: PathBuf,
        #[arg(long = "H", value_name = "FILE")]
        h: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Witness-sequence and difference-quotient tables for a direction H.
    Probe {
        file: PathBuf,
        #[arg(long = "H", value_name = "FILE")]
        h: PathBuf,
        /// Witness direction d (JSON array); defaults to the K witness.
        #[arg(long = "d", value_name = "FILE")]
        d: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = [10u64, 100, 1000, 10000])]
        ks: Vec<u64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-1, 1e-2, 1e-3, 1e-4])]
        ts: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Print a problem template for a preset.
    Preset {
        name: String,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
}

/// What a command printed and the exit code it asks for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: u8,
    pub stdout: String,
}

fn seed_override(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::new(EXIT_SCHEMA, format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    match cli.command {
        Command::Analyze { file, oracle, json, seed } => cmd_analyze(&file, oracle, json, seed_override(seed)?),
        Command::Cone { file, h, json } => cmd_cone(&file, &h, json),
        Command::Probe { file, h, d, ks, ts, json } => cmd_probe(&file, &h, d.as_deref(), &ks, &ts, json),
        Command::Preset { name, n } => cmd_preset(&name, n),
    }
}

pub fn cmd_analyze(path: &Path, oracle: bool, json: bool, seed: Option<u64>) -> Result<Output, CliError> {
    let p = load_problem(path)?;
    analyze_problem(&p, oracle, json, seed)
}

pub fn analyze_problem(p: &Problem, oracle: bool, json: bool, seed: Option<u64>) -> Result<Output, CliError> {
    let mut options = p.file.options.clone();
    if let Some(s) = seed {
        options.oracle.seed = s;
    }
    options.run_oracle |= oracle;
    let a = analyze(&p.spec, &p.phi, &p.file.xbar, &options)?;
    let rep = ReportFile::new(&a, p.sha256.clone(), options.oracle.seed, options.run_oracle, p.file.theta.describe());
    let stdout = if json { rep.to_json() } else { rep.to_table() };
    Ok(Output { code: rep.exit_code(), stdout })
}

fn load_matrix(path: &Path, n: usize) -> Result<SymMatrix, CliError> {
    let h: SymMatrix = from_json(&read_text(path)?)?;
    if h.n() != n {
        return Err(CliError::new(EXIT_SCHEMA, format!("{}: expected a {n}×{n} matrix, got {}×{}", path.display(), h.n(), h.n())));
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub critical_cone: bool,
    /// The same test through the directional eigenvalue derivative.
    pub critical_cone_eigen_route: bool,
    pub affine_hull: bool,
    #[serde(with = "crate::ext_real")]
    pub second_subderivative: f64,
    #[serde(with = "crate::ext_real")]
    pub minimal_bundle: f64,
    pub diagnostics: Vec<String>,
}

pub fn cmd_cone(path: &Path, h_path: &Path, json: bool) -> Result<Output, CliError> {
    let p = load_problem(path)?;
    let h = load_matrix(h_path, p.spec.n())?;
    let mut gp = check_stationarity(&p.spec, &p.phi, &p.file.xbar, p.file.options.tol_cluster)?.gp;
    gp.tol_membership = p.file.options.tol_membership;
    let mb = minimal_bundle(&gp)?;
    let critical_cone = gp.critical_cone_membership(&h)?;
    let eigen_route = gp.crit_charc_membership(&h)?;
    let affine_hull = gp.affine_hull_membership(&h);
    let mut diagnostics = Vec::new();
    if critical_cone != eigen_route {
        diagnostics.push("the two critical cone tests disagree".into());
    }
    if critical_cone && !affine_hull {
        diagnostics.push("H is in the critical cone but not its affine hull".into());
    }
    if !mb.certified {
        diagnostics.push("K(X, Y) is empty; the bundle is not certified minimal".into());
    }
    let r = ConeReport {
        critical_cone,
        critical_cone_eigen_route: eigen_route,
        affine_hull,
        second_subderivative: second_subderivative(&gp, &h)?,
        minimal_bundle: mb.eval(&h),
        diagnostics,
    };
    let stdout = if json {
        serde_json::to_string_pretty(&r).expect("report serializes") + "\n"
    } else {
        let mut s = format!(
            "critical cone          {}\ncritical cone (eigen)  {}\naffine hull            {}\nsecond subderivative   {}\nminimal bundle         {}\n",
            r.critical_cone,
            r.critical_cone_eigen_route,
            r.affine_hull,
            report::fmt_ext(r.second_subderivative),
            report::fmt_ext(r.minimal_bundle)
        );
        for d in &r.diagnostics {
            s.push_str(&format!("note: {d}\n"));
        }
        s
    };
    Ok(Output { code: 0, stdout })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    #[serde(with = "crate::ext_real")]
    pub minimal_bundle: f64,
    #[serde(with = "crate::ext_real")]
    pub second_subderivative: f64,
    pub d: Option<Vec<f64>>,
    pub ks: Vec<u64>,
    /// d²g(Xᵏ, Y)(H) along the witness sequence.
    #[serde(with = "crate::ext_real::vec")]
    pub epi: Vec<f64>,
    pub ts: Vec<f64>,
    /// Second-order difference quotients of g at (X̄, Ȳ).
    #[serde(with = "crate::ext_real::vec")]
    pub difference_quotients: Vec<f64>,
    pub diagnostics: Vec<String>,
}

pub fn cmd_probe(path: &Path, h_path: &Path, d_path: Option<&Path>, ks: &[u64], ts: &[f64], json: bool) -> Result<Output, CliError> {
    let p = load_problem(path)?;
    let n = p.spec.n();
    let h = load_matrix(h_path, n)?;
    if ts.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CliError::new(EXIT_SCHEMA, "--ts values must be positive"));
    }
    let mut gp = check_stationarity(&p.spec, &p.phi, &p.file.xbar, p.file.options.tol_cluster)?.gp;
    gp.tol_membership = p.file.options.tol_membership;
    let mb = minimal_bundle(&gp)?;
    let mut diagnostics = Vec::new();
    let d = match d_path {
        Some(dp) => {
            let d: Vec<f64> = from_json(&read_text(dp)?)?;
            if d.len() != n {
                return Err(CliError::new(EXIT_SCHEMA, format!("{}: expected {n} entries", dp.display())));
            }
            // The witness uses the frame order of λ(X̄).
            Some(d)
        }
        None => mb.k_witness.as_ref().map(|k| k.d.clone()),
    };
    let epi = match &d {
        Some(d) => epi_convergence_probe(&gp, d, &h, ks).map_err(|e| match e {
            Error::Precondition(m) | Error::InvalidInput(m) => CliError::new(EXIT_SCHEMA, m),
            other => other.into(),
        })?,
        None => {
            diagnostics.push("K(X, Y) is empty and no --d was given; witness table skipped".into());
            Vec::new()
        }
    };
    let spec = &p.spec;
    let y = p.phi.gradient(&p.file.xbar).scale(-1.0);
    let fd = fd_second_subderivative(|x| g_eval(spec, x).unwrap_or(f64::NAN), &p.file.xbar, &y, &h, ts)?;
    let r = ProbeReport {
        minimal_bundle: mb.eval(&h),
        second_subderivative: second_subderivative(&gp, &h)?,
        d,
        ks: if epi.is_empty() { Vec::new() } else { ks.to_vec() },
        epi,
        ts: ts.to_vec(),
        difference_quotients: fd,
        diagnostics,
    };
    let stdout = if json {
        serde_json::to_string_pretty(&r).expect("report serializes") + "\n"
    } else {
        let mut s = format!(
            "minimal bundle         {}\nsecond subderivative   {}\n",
            report::fmt_ext(r.minimal_bundle),
            report::fmt_ext(r.second_subderivative)
        );
        for (k, v) in r.ks.iter().zip(&r.epi) {
            s.push_str(&format!("k = {k:<8}  {}\n", report::fmt_ext(*v)));
        }
        for (t, v) in r.ts.iter().zip(&r.difference_quotients) {
            s.push_str(&format!("t = {t:<8.0e}  {}\n", report::fmt_ext(*v)));
        }
        for d in &r.diagnostics {
            s.push_str(&format!("note: {d}\n"));
        }
        s
    };
    Ok(Output { code: 0, stdout })
}

pub fn cmd_preset(name: &str, n: usize) -> Result<Output, CliError> {
    let preset: Preset = name.parse().map_err(|e: Error| CliError::new(EXIT_SCHEMA, e.to_string()))?;
    if n == 0 {
        return Err(CliError::new(EXIT_SCHEMA, "--n must be positive"));
    }
    let t = preset_template(preset, n)?;
    Ok(Output { code: 0, stdout: serde_json::to_string_pretty(&t).expect("template serializes") + "\n" })
}
