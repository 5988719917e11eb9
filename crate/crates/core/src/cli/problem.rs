//! Problem files: JSON in, validated model objects out.

use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, EXIT_NOINPUT, EXIT_SCHEMA};
use crate::linalg::{svec_len, SymMatrix};
use crate::polyfun::{Halfspace, Piece, PolyhedralSpec, Preset};
use crate::tilt::{QuadraticTerm, TiltOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    Preset(Preset),
    Explicit(ExplicitTheta),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitTheta {
    /// `[a, c]` pairs of θ₁(x) = max(⟨a, x⟩ − c).
    #[serde(default)]
    pub pieces: Vec<(Vec<f64>, f64)>,
    /// `[b, d]` pairs of the domain ⟨b, x⟩ ≤ d.
    #[serde(default)]
    pub constraints: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    /// ⟨G, X⟩ + ½⟨X − C, A(X − C)⟩ with A on svec coordinates (identity when absent).
    Quadratic {
        #[serde(rename = "C")]
        c: SymMatrix,
        #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
        a: Option<Vec<Vec<f64>>>,
        #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
        g: Option<SymMatrix>,
    },
    Zero,
    Linear {
        #[serde(rename = "G")]
        g: SymMatrix,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub theta: ThetaSpec,
    pub phi: PhiSpec,
    pub xbar: SymMatrix,
    #[serde(default)]
    pub options: TiltOptions,
}

/// A validated problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub file: ProblemFile,
    pub spec: PolyhedralSpec,
    pub phi: QuadraticTerm,
    pub sha256: String,
}

fn schema(pointer: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::new(EXIT_SCHEMA, format!("schema error at {pointer}: {msg}"))
}

/// Deserializes with the failing location reported as a JSON pointer.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let mut ptr = String::new();
        for seg in e.path().iter() {
            use serde_path_to_error::Segment;
            match seg {
                Segment::Seq { index } => ptr.push_str(&format!("/{index}")),
                Segment::Map { key } => ptr.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
                Segment::Enum { .. } | Segment::Unknown => {}
            }
        }
        if ptr.is_empty() {
            ptr.push('/');
        }
        schema(&ptr, e.inner())
    })
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new(EXIT_NOINPUT, format!("cannot read {}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn check_dim(pointer: &str, m: &SymMatrix, n: usize) -> Result<(), CliError> {
    if m.n() != n {
        return Err(schema(pointer, format!("expected a {n}×{n} matrix, got {}×{}", m.n(), m.n())));
    }
    Ok(())
}

fn check_tol(pointer: &str, v: f64) -> Result<(), CliError> {
    if !(v.is_finite() && v > 0.0) {
        return Err(schema(pointer, format!("tolerance must be positive and finite, got {v}")));
    }
    Ok(())
}

impl ThetaSpec {
    pub fn build(&self, n: usize) -> Result<PolyhedralSpec, CliError> {
        match self {
            ThetaSpec::Preset(p) => PolyhedralSpec::preset(*p, n),
            ThetaSpec::Explicit(t) => PolyhedralSpec::new(
                n,
                t.pieces.iter().map(|(a, c)| Piece { a: a.clone(), c: *c }).collect(),
                t.constraints.iter().map(|(b, d)| Halfspace { b: b.clone(), d: *d }).collect(),
            ),
        }
        .map_err(|e| schema("/theta", e))
    }

    pub fn describe(&self) -> String {
        match self {
            ThetaSpec::Preset(p) => p.name().to_string(),
            ThetaSpec::Explicit(t) => format!("explicit ({} pieces, {} constraints)", t.pieces.len(), t.constraints.len()),
        }
    }
}

impl PhiSpec {
    pub fn build(&self, n: usize) -> Result<QuadraticTerm, CliError> {
        match self {
            PhiSpec::Zero => Ok(QuadraticTerm::zero(n)),
            PhiSpec::Linear { g } => {
                check_dim("/phi/G", g, n)?;
                Ok(QuadraticTerm::linear(g.clone()))
            }
            PhiSpec::Quadratic { c, a, g } => {
                check_dim("/phi/C", c, n)?;
                let g = match g {
                    Some(g) => {
                        check_dim("/phi/G", g, n)?;
                        g.clone()
                    }
                    None => SymMatrix::zeros(n),
                };
                let m = svec_len(n);
                let a = match a {
                    None => DMatrix::identity(m, m),
                    Some(rows) => {
                        if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                            return Err(schema("/phi/A", format!("expected a {m}×{m} operator on svec coordinates")));
                        }
                        DMatrix::from_fn(m, m, |i, j| rows[i][j])
                    }
                };
                QuadraticTerm::new(g, c.clone(), a).map_err(|e| schema("/phi/A", e))
            }
        }
    }
}

impl ProblemFile {
    pub fn validate(self, sha256: String) -> Result<Problem, CliError> {
        let n = self.n;
        if n == 0 {
            return Err(schema("/n", "dimension must be positive"));
        }
        check_dim("/xbar", &self.xbar, n)?;
        let o = &self.options;
        check_tol("/options/tol_cluster", o.tol_cluster)?;
        check_tol("/options/tol_membership", o.tol_membership)?;
        check_tol("/options/tol_psd", o.tol_psd)?;
        check_tol("/options/oracle/tol", o.oracle.tol)?;
        let spec = self.theta.build(n)?;
        let phi = self.phi.build(n)?;
        Ok(Problem { file: self, spec, phi, sha256 })
    }
}

pub fn parse_problem(text: &str) -> Result<Problem, CliError> {
    let file: ProblemFile = from_json(text)?;
    file.validate(sha256_hex(text.as_bytes()))
}

pub fn load_problem(path: &Path) -> Result<Problem, CliError> {
    parse_problem(&read_text(path)?)
}

/// A stable nearest-point template: φ = ½‖X − C‖² with C = X̄ + Ȳ.
pub fn preset_template(preset: Preset, n: usize) -> Result<ProblemFile, CliError> {
    let spec = PolyhedralSpec::preset(preset, n).map_err(|e| CliError::new(EXIT_SCHEMA, e.to_string()))?;
    let (x, y): (Vec<f64>, Vec<f64>) = match preset {
        Preset::LambdaMax => ((0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(), (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()),
        Preset::SdpCone => ((0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(), (0..n).map(|i| if i == 0 { 0.0 } else { -1.0 }).collect()),
        Preset::KyFan2Sdp => (
            (0..n).map(|i| [2.0, 1.0].get(i).copied().unwrap_or(0.0)).collect(),
            (0..n).map(|i| if i < 2 { 1.0 } else { -1.0 }).collect(),
        ),
        Preset::Free => ((0..n).map(|i| (n - i) as f64).collect(), vec![0.0; n]),
    };
    let xbar = SymMatrix::from_diagonal(&x);
    let c = SymMatrix::from_diagonal(&x.iter().zip(&y).map(|(a, b)| a + b).collect::<Vec<_>>());
    let theta = ThetaSpec::Explicit(ExplicitTheta {
        pieces: spec.pieces().iter().map(|p| (p.a.clone(), p.c)).collect(),
        constraints: spec.constraints().iter().map(|h| (h.b.clone(), h.d)).collect(),
    });
    Ok(ProblemFile { n, theta, phi: PhiSpec::Quadratic { c, a: None, g: None }, xbar, options: TiltOptions::default() })
}
