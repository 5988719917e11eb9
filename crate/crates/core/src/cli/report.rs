//! Machine-readable reports and their plain-text rendering.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::bundle::WeightEntry;
use crate::polyfun::KWitness;
use crate::tilt::{Analysis, OracleOutcome, TiltReport, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectra {
    pub lambda_x: Vec<f64>,
    pub lambda_y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActiveSummary {
    pub iota1: Vec<usize>,
    pub iota2: Vec<usize>,
    pub eta1: Vec<usize>,
    pub eta2: Vec<usize>,
    pub relative_interior: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partitions {
    pub alpha: Vec<Range<usize>>,
    pub gamma: Vec<Vec<Range<usize>>>,
    /// Per α block, the γ sub-blocks whose diagonal block must be a multiple of I.
    pub e_blocks: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub input_sha256: String,
    pub seed: u64,
    pub oracle_requested: bool,
    pub n: usize,
    pub theta: String,
    pub stationarity_residual: f64,
    pub spectra: Spectra,
    pub active: ActiveSummary,
    pub partitions: Partitions,
    pub aff_dim: usize,
    pub curvature: Vec<WeightEntry>,
    pub k_witness: Option<KWitness>,
    pub tilt: TiltReport,
}

impl ReportFile {
    pub fn new(a: &Analysis, input_sha256: String, seed: u64, oracle_requested: bool, theta: String) -> Self {
        let gp = &a.gp;
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input_sha256,
            seed,
            oracle_requested,
            n: gp.n(),
            theta,
            stationarity_residual: a.report.stationarity_residual,
            spectra: Spectra { lambda_x: gp.pt.lam_x().to_vec(), lambda_y: gp.pt.lam_y.clone() },
            active: ActiveSummary {
                iota1: gp.act.iota1.clone(),
                iota2: gp.act.iota2.clone(),
                eta1: gp.act.eta1.clone(),
                eta2: gp.act.eta2.clone(),
                relative_interior: gp.act.is_relative_interior(),
            },
            partitions: Partitions {
                alpha: gp.pt.frame.alpha.clone(),
                gamma: gp.pt.gamma.clone(),
                e_blocks: gp.e.0.clone(),
            },
            aff_dim: a.bundle.domain.dim(),
            curvature: a.bundle.curvature.table(),
            k_witness: a.bundle.k_witness.clone(),
            tilt: a.report.clone(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.tilt.verdict {
            Verdict::TiltStable => 0,
            Verdict::NotTiltStable => 1,
            Verdict::Uncertified => 2,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let t = &self.tilt;
        let mut s = String::new();
        let verdict = match t.verdict {
            Verdict::TiltStable => "tilt-stable",
            Verdict::NotTiltStable => "not tilt-stable",
            Verdict::Uncertified => "uncertified (K(X, Y) is empty)",
        };
        let _ = writeln!(s, "theta                  {}", self.theta);
        let _ = writeln!(s, "n                      {}", self.n);
        let _ = writeln!(s, "input sha256           {}", self.input_sha256);
        let _ = writeln!(s, "stationarity residual  {:.3e}", self.stationarity_residual);
        let _ = writeln!(s, "lambda(X)              {}", fmt_vec(&self.spectra.lambda_x));
        let _ = writeln!(s, "lambda(Y)              {}", fmt_vec(&self.spectra.lambda_y));
        let _ = writeln!(s, "iota1 / eta1           {:?} / {:?}", self.active.iota1, self.active.eta1);
        let _ = writeln!(s, "iota2 / eta2           {:?} / {:?}", self.active.iota2, self.active.eta2);
        let _ = writeln!(s, "alpha blocks           {}", fmt_blocks(&self.partitions.alpha));
        let _ = writeln!(s, "aff C dimension        {}", self.aff_dim);
        let _ = writeln!(s, "curvature weights      {}", self.curvature.len());
        for w in &self.curvature {
            let _ = writeln!(s, "  w[{},{}] = {:.6}", w.i, w.j, w.w);
        }
        match &self.k_witness {
            Some(k) => {
                let _ = writeln!(s, "K witness              {} (margin {:.3e})", fmt_vec(&k.d), k.margin);
            }
            None => {
                let _ = writeln!(s, "K witness              none");
            }
        }
        let _ = writeln!(s, "reduced lambda_min     {}", fmt_ext(t.lambda_min_reduced));
        if let Some(k) = t.modulus_estimate {
            let _ = writeln!(s, "modulus estimate       {}", fmt_ext(k));
        }
        let _ = writeln!(s, "kernel condition       {}", t.kernel_condition);
        if let Some(o) = &t.oracle {
            write_oracle(&mut s, o);
        }
        for d in &t.diagnostics {
            let _ = writeln!(s, "note: {d}");
        }
        let _ = writeln!(s, "verdict                {verdict}{}", if t.marginal { " (marginal)" } else { "" });
        s
    }
}

fn write_oracle(s: &mut String, o: &OracleOutcome) {
    let _ = writeln!(s, "oracle                 {:?} (seed {}, radius {:.3e}, {} solves)", o.status, o.seed, o.radius, o.solves);
    for l in &o.lipschitz {
        let _ = writeln!(s, "  Lipschitz at {:.0e}     {:.6}", l.delta, l.estimate);
    }
    let _ = writeln!(s, "  multistart spread     {:.3e}", o.max_spread);
    if let Some(g) = &o.growth {
        let _ = writeln!(s, "  growth violations     {} of {}", g.violations, g.samples);
    }
}

pub fn fmt_ext(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.6e}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{:.6}", x + 0.0)).collect();
    format!("[{}]", parts.join(", "))
}

fn fmt_blocks(b: &[Range<usize>]) -> String {
    let parts: Vec<String> = b.iter().map(|r| format!("{}..{}", r.start, r.end)).collect();
    parts.join(" ")
}
