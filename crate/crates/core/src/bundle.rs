//! Curvature term, second subderivative and minimal quadratic bundle of g = θ∘λ,
//! plus the witness sequences that certify minimality.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cone::{GraphPoint, LinearSubspaceOfSym};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::polyfun::{equal_runs, KWitness, PolyhedralSpec};
use crate::spectral::{Block, SpectralPoint, DEFAULT_TOL_CLUSTER};

/// Relative residual below which `H` counts as lying in the bundle domain.
pub const DOMAIN_TOL: f64 = 1e-8;

/// g(X) = θ(λ(X)).
pub fn g_eval(spec: &PolyhedralSpec, x: &SymMatrix) -> Result<f64> {
    Ok(spec.theta_eval(&x.eigenvalues()?))
}

/// Weights `w_ij = 2(λᵢ(Y) − λⱼ(Y))/(λᵢ(X) − λⱼ(X))` on cross-cluster pairs,
/// in frame order; zero inside clusters and on 0/0 cells.
#[derive(Clone, Debug)]
pub struct CurvatureForm {
    p: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl CurvatureForm {
    pub fn new(pt: &SpectralPoint) -> Self {
        let n = pt.n();
        let f = &pt.frame;
        let x = &f.lam;
        let y = &pt.lam_y;
        let w = DMatrix::from_fn(n, n, |i, j| {
            if f.block_of(i) == f.block_of(j) || y[i] == y[j] {
                0.0
            } else {
                2.0 * (y[i] - y[j]) / (x[i] - x[j])
            }
        });
        Self { p: f.p.clone(), w }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    /// Υ(H) = Σ_{i<j} w_ij (PᵀHP)²_ij.
    pub fn eval(&self, h: &SymMatrix) -> f64 {
        self.bilinear(h, h)
    }

    /// Polarization of [`Self::eval`].
    pub fn bilinear(&self, h: &SymMatrix, g: &SymMatrix) -> f64 {
        let hh = h.congruence_t(&self.p);
        let gg = if std::ptr::eq(h, g) { hh.clone() } else { g.congruence_t(&self.p) };
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.w[(i, j)];
                if w != 0.0 {
                    s += w * hh.get(i, j) * gg.get(i, j);
                }
            }
        }
        s
    }
}

pub fn curvature_eval(cf: &CurvatureForm, h: &SymMatrix) -> f64 {
    cf.eval(h)
}

/// d²g(X, Y)(H): Υ(H) on the critical cone, +∞ off it.
pub fn second_subderivative(gp: &GraphPoint, h: &SymMatrix) -> Result<f64> {
    if gp.critical_cone_membership(h)? {
        Ok(CurvatureForm::new(&gp.pt).eval(h))
    } else {
        Ok(f64::INFINITY)
    }
}

/// Υ + δ_{aff C_g}, with a flag recording whether K(X, Y) ≠ ∅.
#[derive(Clone, Debug)]
pub struct MinimalBundle {
    pub curvature: CurvatureForm,
    pub domain: LinearSubspaceOfSym,
    pub k_witness: Option<KWitness>,
    pub certified: bool,
}

impl MinimalBundle {
    pub fn eval(&self, h: &SymMatrix) -> f64 {
        if self.domain.contains(h, DOMAIN_TOL) {
            self.curvature.eval(h)
        } else {
            f64::INFINITY
        }
    }
}

pub fn minimal_bundle(gp: &GraphPoint) -> Result<MinimalBundle> {
    let k_witness = gp.spec.k_set_witness_in_blocks(&gp.act, &gp.pt.lam_y, &gp.pt.frame.alpha)?;
    Ok(MinimalBundle {
        curvature: CurvatureForm::new(&gp.pt),
        domain: gp.affine_hull_basis(),
        certified: k_witness.is_some(),
        k_witness,
    })
}

#[derive(Clone, Debug)]
pub struct WitnessPoint {
    pub k: u64,
    pub x: Vec<f64>,
    /// The perturbed point, absent when Y ∉ ∂g(Xᵏ).
    pub gp: Option<GraphPoint>,
    pub subgradient_ok: bool,
    /// ι = η at the perturbed point, i.e. Y ∈ ri ∂g(Xᵏ).
    pub ri: bool,
}

#[derive(Clone, Debug)]
pub struct WitnessSequence {
    pub d: Vec<f64>,
    /// `chi[l]` partitions `alpha[l]` into runs of equal `d`.
    pub chi: Vec<Vec<Block>>,
    pub points: Vec<WitnessPoint>,
}

/// Xᵏ = P Diag(λ(X) + d/k) Pᵀ, Yᵏ = Y for each `k`.
pub fn witness_sequence(gp: &GraphPoint, d: &[f64], ks: &[u64]) -> Result<WitnessSequence> {
    let n = gp.n();
    if d.len() != n {
        return Err(Error::Dimension { expected: n, got: d.len() });
    }
    if ks.contains(&0) {
        return Err(Error::InvalidInput("sequence indices must be positive".into()));
    }
    let alpha = &gp.pt.frame.alpha;
    if let Some(row) = gp.spec.k_violation(&gp.act, alpha, d) {
        return Err(Error::Precondition(format!("direction is not in K(X, Y): {row}")));
    }
    // Snap roundoff-level differences so the χ partition is exact.
    let mut d = d.to_vec();
    for a in alpha {
        for i in (a.start + 1)..a.end {
            if (d[i - 1] - d[i]).abs() <= 1e-12 {
                d[i] = d[i - 1];
            }
        }
    }
    let chi: Vec<Vec<Block>> = alpha
        .iter()
        .map(|a| equal_runs(&d[a.clone()], 0.0).into_iter().map(|r| r.start + a.start..r.end + a.start).collect())
        .collect();
    let min_split = alpha
        .iter()
        .flat_map(|a| ((a.start + 1)..a.end).map(|i| d[i - 1] - d[i]))
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let x = gp.pt.lam_x();
    let scale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let xk: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b / k as f64).collect();
        let tol = if min_split.is_finite() {
            (0.1 * min_split / k as f64 / scale).min(DEFAULT_TOL_CLUSTER)
        } else {
            DEFAULT_TOL_CLUSTER
        };
        let pt = SpectralPoint::from_diagonal(&gp.pt.frame.p, &xk, &gp.pt.lam_y, tol)?;
        let (gpk, ok, ri) = match GraphPoint::new(&gp.spec, pt) {
            Ok(g) => {
                let ri = g.act.is_relative_interior();
                (Some(g), true, ri)
            }
            Err(Error::Domain(_)) => (None, false, false),
            Err(e) => return Err(e),
        };
        points.push(WitnessPoint { k, x: xk, gp: gpk, subgradient_ok: ok, ri });
    }
    Ok(WitnessSequence { d, chi, points })
}

/// d²g(Xᵏ, Y)(H) along the witness sequence with the constant recovery Hᵏ = H.
pub fn epi_convergence_probe(gp: &GraphPoint, d: &[f64], h: &SymMatrix, ks: &[u64]) -> Result<Vec<f64>> {
    let seq = witness_sequence(gp, d, ks)?;
    seq.points
        .iter()
        .map(|p| match &p.gp {
            Some(g) => second_subderivative(g, h),
            None => Err(Error::Numeric { what: "witness point left gph ∂g", residual: p.k as f64 }),
        })
        .collect()
}

/// Difference quotients (f(X + tH) − f(X) − t⟨Y, H⟩)/(t²/2). No inner
/// minimization, so each value only bounds the second subderivative from above.
pub fn fd_second_subderivative<F>(f: F, x: &SymMatrix, y: &SymMatrix, h: &SymMatrix, ts: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&SymMatrix) -> f64,
{
    let fx = f(x);
    if !fx.is_finite() {
        return Err(Error::Domain("function is not finite at the base point".into()));
    }
    let yh = y.inner(h);
    Ok(ts
        .iter()
        .map(|&t| {
            let ft = f(&x.axpy(t, h));
            if ft.is_finite() {
                (ft - fx - t * yh) / (0.5 * t * t)
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

/// Summary row for reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl CurvatureForm {
    /// Nonzero weights with `i < j`.
    pub fn table(&self) -> Vec<WeightEntry> {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.w[(i, j)] != 0.0)
            .map(|(i, j)| WeightEntry { i, j, w: self.w[(i, j)] })
            .collect()
    }
}
