//! Tilt-stability verdicts from the minimal quadratic bundle, with a brute-force
//! tilted-problem oracle as a cross-check.

pub mod oracle;
pub mod smooth;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bundle::{minimal_bundle, MinimalBundle};
use crate::cone::{GraphPoint, LinearSubspaceOfSym};
use crate::error::{Error, Result};
use crate::linalg::{svec_pairs, SymMatrix};
use crate::polyfun::PolyhedralSpec;
use crate::spectral::{joint_frame, DEFAULT_TOL_CLUSTER};
pub use oracle::{tilt_oracle, OracleOptions, OracleOutcome, OracleStatus};
pub use smooth::{hessian_norm_estimate, QuadraticTerm, SmoothTerm};

pub const DEFAULT_TOL_PSD: f64 = 1e-8;
/// The oracle is desk-scale only.
pub const ORACLE_MAX_N: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiltOptions {
    pub tol_cluster: f64,
    pub tol_membership: f64,
    pub tol_psd: f64,
    /// Run the oracle even when the reduced form is decisive.
    pub run_oracle: bool,
    pub oracle: OracleOptions,
}

impl Default for TiltOptions {
    fn default() -> Self {
        Self {
            tol_cluster: DEFAULT_TOL_CLUSTER,
            tol_membership: crate::cone::DEFAULT_TOL_MEMBERSHIP,
            tol_psd: DEFAULT_TOL_PSD,
            run_oracle: false,
            oracle: OracleOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Stationarity {
    pub gp: GraphPoint,
    /// ℓ₁ gap of the subgradient representation.
    pub residual: f64,
}

/// Forms Ȳ = −∇φ(X̄) and checks Ȳ ∈ ∂g(X̄).
pub fn check_stationarity(
    spec: &PolyhedralSpec,
    phi: &dyn SmoothTerm,
    xbar: &SymMatrix,
    tol_cluster: f64,
) -> Result<Stationarity> {
    if phi.n() != xbar.n() || spec.n() != xbar.n() {
        return Err(Error::Dimension { expected: spec.n(), got: xbar.n() });
    }
    let y = phi.gradient(xbar).scale(-1.0);
    let pt = joint_frame(xbar, &y, tol_cluster)?;
    let m = spec.subdiff_membership(pt.lam_x(), &pt.lam_y)?;
    if !m.member {
        return Err(Error::NotStationary { gap: m.gap, residual: m.residual });
    }
    let gp = GraphPoint::new(spec, pt)?;
    Ok(Stationarity { gp, residual: m.gap })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SsoscStatus {
    Positive,
    Marginal,
    Negative,
    /// aff C_g = {0}.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsoscOutcome {
    pub status: SsoscStatus,
    #[serde(with = "crate::ext_real")]
    pub lambda_min: f64,
    pub m_norm: f64,
    /// ‖M − Mᵀ‖ before symmetrization.
    pub asymmetry: f64,
}

/// Reduced matrix M_ij = ⟨∇²φ[B_i], B_j⟩ + Υ(B_i, B_j) over the bundle domain basis.
pub fn reduced_matrix(gp: &GraphPoint, phi: &dyn SmoothTerm, mb: &MinimalBundle) -> DMatrix<f64> {
    let basis = mb.domain.basis();
    let m = basis.len();
    let hb: Vec<SymMatrix> = basis.iter().map(|b| phi.hessian_apply(&gp.pt.x, b)).collect();
    DMatrix::from_fn(m, m, |i, j| hb[i].inner(&basis[j]) + mb.curvature.bilinear(&basis[i], &basis[j]))
}

pub fn ssosc_check(gp: &GraphPoint, phi: &dyn SmoothTerm, mb: &MinimalBundle, tol_psd: f64) -> SsoscOutcome {
    let m = reduced_matrix(gp, phi, mb);
    if m.nrows() == 0 {
        return SsoscOutcome { status: SsoscStatus::Vacuous, lambda_min: f64::INFINITY, m_norm: 0.0, asymmetry: 0.0 };
    }
    let asymmetry = (&m - m.transpose()).norm();
    let sym = (&m + m.transpose()) * 0.5;
    let m_norm = sym.norm();
    let lambda_min = sym.symmetric_eigenvalues().min();
    let tol = tol_psd * (1.0 + m_norm);
    let status = if lambda_min > tol {
        SsoscStatus::Positive
    } else if lambda_min > -tol {
        SsoscStatus::Marginal
    } else {
        SsoscStatus::Negative
    };
    SsoscOutcome { status, lambda_min, m_norm, asymmetry }
}

/// ker q: aff C_g with every entry of PᵀHP carrying a positive weight set to zero.
pub fn ker_q(gp: &GraphPoint, mb: &MinimalBundle) -> LinearSubspaceOfSym {
    let base = gp.affine_constraints();
    let w = mb.curvature.weights();
    let n = gp.n();
    let extra: Vec<usize> =
        svec_pairs(n).enumerate().filter(|(_, (i, j))| i != j && w[(*i, *j)] > 0.0).map(|(k, _)| k).collect();
    let mut a = DMatrix::zeros(base.nrows() + extra.len(), base.ncols());
    a.view_mut((0, 0), (base.nrows(), base.ncols())).copy_from(&base);
    for (r, k) in extra.into_iter().enumerate() {
        a[(base.nrows() + r, k)] = 1.0;
    }
    gp.subspace_from_constraints(&a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelOutcome {
    pub ker_q_dim: usize,
    /// dim(ker ∇²φ(X̄) ∩ ker q).
    pub intersection_dim: usize,
    pub holds: bool,
}

pub fn kernel_condition_check(gp: &GraphPoint, phi: &dyn SmoothTerm, mb: &MinimalBundle, tol_psd: f64) -> KernelOutcome {
    let kq = ker_q(gp, mb);
    let cols: Vec<_> = kq.basis().iter().map(|b| phi.hessian_apply(&gp.pt.x, b).svec()).collect();
    let intersection_dim = if cols.is_empty() {
        0
    } else {
        let z = DMatrix::from_columns(&cols);
        let tol = tol_psd * (1.0 + hessian_norm_estimate(phi, &gp.pt.x));
        let sv = z.singular_values();
        cols.len() - sv.iter().filter(|&&s| s > tol).count()
    };
    KernelOutcome { ker_q_dim: kq.dim(), intersection_dim, holds: intersection_dim == 0 }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TiltStable,
    NotTiltStable,
    /// K(X̄, Ȳ) is empty, so the bundle is not known to be minimal.
    Uncertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TiltReport {
    pub verdict: Verdict,
    /// λ_min fell inside the tolerance band around zero.
    pub marginal: bool,
    #[serde(with = "crate::ext_real")]
    pub lambda_min_reduced: f64,
    #[serde(with = "crate::ext_real::option")]
    pub modulus_estimate: Option<f64>,
    pub kernel_condition: bool,
    pub ssosc: SsoscOutcome,
    pub kernel: KernelOutcome,
    pub convex: bool,
    pub certified: bool,
    pub aff_dim: usize,
    pub stationarity_residual: f64,
    pub oracle: Option<OracleOutcome>,
    pub oracle_agrees: Option<bool>,
    pub diagnostics: Vec<String>,
}

/// Everything computed on the way to a verdict.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub gp: GraphPoint,
    pub bundle: MinimalBundle,
    pub report: TiltReport,
}

pub fn analyze(spec: &PolyhedralSpec, phi: &dyn SmoothTerm, xbar: &SymMatrix, options: &TiltOptions) -> Result<Analysis> {
    let st = check_stationarity(spec, phi, xbar, options.tol_cluster)?;
    let mut gp = st.gp;
    gp.tol_membership = options.tol_membership;
    let mb = minimal_bundle(&gp)?;
    let ssosc = ssosc_check(&gp, phi, &mb, options.tol_psd);
    let kernel = kernel_condition_check(&gp, phi, &mb, options.tol_psd);
    let convex = phi.is_convex();
    let mut diagnostics = Vec::new();
    let marginal = ssosc.status == SsoscStatus::Marginal;
    let positive = matches!(ssosc.status, SsoscStatus::Positive | SsoscStatus::Vacuous);
    let verdict = if !mb.certified {
        Verdict::Uncertified
    } else if positive {
        Verdict::TiltStable
    } else {
        Verdict::NotTiltStable
    };
    if convex && !marginal && positive != kernel.holds {
        diagnostics.push(format!(
            "SSOSC ({}) and the kernel condition ({}) disagree for convex φ",
            if positive { "positive" } else { "not positive" },
            if kernel.holds { "holds" } else { "fails" }
        ));
    }
    if ssosc.asymmetry > 1e-10 * ssosc.m_norm.max(f64::MIN_POSITIVE) && ssosc.asymmetry > 0.0 {
        diagnostics.push(format!("reduced matrix asymmetry {:.3e}", ssosc.asymmetry));
    }
    let modulus_estimate = positive.then(|| 1.0 / ssosc.lambda_min);
    let mut oracle = None;
    if options.run_oracle || marginal {
        if xbar.n() > ORACLE_MAX_N {
            diagnostics.push(format!("oracle skipped: n = {} exceeds {ORACLE_MAX_N}", xbar.n()));
        } else {
            if !convex {
                diagnostics.push("oracle is heuristic: φ is not convex".into());
            }
            let kappa = if verdict == Verdict::TiltStable { modulus_estimate } else { None };
            oracle = Some(tilt_oracle(spec, phi, xbar, &options.oracle, kappa)?);
        }
    }
    let oracle_agrees = oracle.as_ref().and_then(|o| match o.status {
        OracleStatus::Inconclusive => None,
        OracleStatus::Stable => Some(verdict == Verdict::TiltStable),
        OracleStatus::Unstable => Some(verdict == Verdict::NotTiltStable),
    });
    if oracle_agrees == Some(false) {
        diagnostics.push("oracle disagrees with the analytic verdict".into());
    }
    let report = TiltReport {
        verdict,
        marginal,
        lambda_min_reduced: ssosc.lambda_min,
        modulus_estimate,
        kernel_condition: kernel.holds,
        convex,
        certified: mb.certified,
        aff_dim: mb.domain.dim(),
        stationarity_residual: st.residual,
        ssosc,
        kernel,
        oracle,
        oracle_agrees,
        diagnostics,
    };
    Ok(Analysis { gp, bundle: mb, report })
}

pub fn tilt_verdict(spec: &PolyhedralSpec, phi: &dyn SmoothTerm, xbar: &SymMatrix, options: &TiltOptions) -> Result<TiltReport> {
    Ok(analyze(spec, phi, xbar, options)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svec_len;
    use crate::polyfun::Preset;

    fn sdp_nearest() -> (PolyhedralSpec, QuadraticTerm, SymMatrix) {
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 2).unwrap();
        let phi = QuadraticTerm::nearest_point(SymMatrix::from_diagonal(&[1.0, -1.0]), None);
        (spec, phi, SymMatrix::from_diagonal(&[1.0, 0.0]))
    }

    #[test]
    fn stationarity_examples() {
        let (spec, phi, xbar) = sdp_nearest();
        let st = check_stationarity(&spec, &phi, &xbar, 1e-8).unwrap();
        assert!(st.residual < 1e-12);
        assert_eq!(st.gp.pt.lam_y, vec![0.0, -1.0]);
        let bad = check_stationarity(&spec, &phi, &SymMatrix::from_diagonal(&[1.0, 0.5]), 1e-8);
        assert!(matches!(bad, Err(Error::NotStationary { .. })));
        let free = PolyhedralSpec::preset(Preset::Free, 2).unwrap();
        let st = check_stationarity(&free, &QuadraticTerm::zero(2), &SymMatrix::identity(2), 1e-8).unwrap();
        assert_eq!(st.residual, 0.0);
    }

    #[test]
    fn lambda_max_with_zero_phi_is_not_stationary() {
        let spec = PolyhedralSpec::preset(Preset::LambdaMax, 2).unwrap();
        let r = tilt_verdict(&spec, &QuadraticTerm::zero(2), &SymMatrix::identity(2), &TiltOptions::default());
        assert!(matches!(r, Err(Error::NotStationary { .. })));
    }

    #[test]
    fn sdp_nearest_point_is_stable() {
        let (spec, phi, xbar) = sdp_nearest();
        let r = tilt_verdict(&spec, &phi, &xbar, &TiltOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::TiltStable);
        assert!(r.lambda_min_reduced >= 1.0 - 1e-12);
        assert!(r.modulus_estimate.unwrap() <= 1.0 + 1e-12);
        assert!(r.kernel_condition);
        assert!(r.diagnostics.is_empty(), "{:?}", r.diagnostics);
    }

    #[test]
    fn zero_hessian_lambda_max_is_not_stable() {
        // φ linear with −∇φ = diag(1, 0) ∈ ∂λ₁(I): aff C holds diag(ρ, h) with
        // no cross-block entries, so the reduced form vanishes there.
        let spec = PolyhedralSpec::preset(Preset::LambdaMax, 2).unwrap();
        let phi = QuadraticTerm::linear(SymMatrix::from_diagonal(&[-1.0, 0.0]));
        let st = check_stationarity(&spec, &phi, &SymMatrix::identity(2), 1e-8).unwrap();
        let mb = minimal_bundle(&st.gp).unwrap();
        let s = ssosc_check(&st.gp, &phi, &mb, DEFAULT_TOL_PSD);
        assert!(mb.domain.dim() >= 1);
        assert_eq!(s.lambda_min, 0.0);
        assert_eq!(s.status, SsoscStatus::Marginal);
        assert!(!kernel_condition_check(&st.gp, &phi, &mb, DEFAULT_TOL_PSD).holds);
    }

    #[test]
    fn vacuous_ssosc() {
        // X̄ = 0 with Ȳ = −I: the PSD cone's critical cone is {0}.
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 2).unwrap();
        let phi = QuadraticTerm::linear(SymMatrix::identity(2));
        let r = tilt_verdict(&spec, &phi, &SymMatrix::zeros(2), &TiltOptions::default()).unwrap();
        assert_eq!(r.ssosc.status, SsoscStatus::Vacuous);
        assert_eq!(r.verdict, Verdict::TiltStable);
        assert_eq!(r.lambda_min_reduced, f64::INFINITY);
    }

    #[test]
    fn indefinite_reduced_form_is_unstable() {
        // φ = ⟨G, X⟩ + ½⟨X, 𝒜X⟩ with 𝒜 = −I on svec: the reduced form is −I plus Υ.
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 2).unwrap();
        let m = svec_len(2);
        let xbar = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let a = -DMatrix::<f64>::identity(m, m);
        // ∇φ(X̄) = G − X̄ must equal −Ȳ = diag(0, 1).
        let g = SymMatrix::from_diagonal(&[1.0, 1.0]);
        let phi = QuadraticTerm::new(g, SymMatrix::zeros(2), a).unwrap();
        let r = tilt_verdict(&spec, &phi, &xbar, &TiltOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotTiltStable);
        assert!(!r.marginal);
        assert!(!r.convex);
    }

    #[test]
    fn ker_q_for_sdp_matches_closed_form() {
        // X̄ = diag(2, 0, 0), Ȳ = diag(0, 0, −1): ker q = {H : (PᵀHP) rows of γ = {3} vanish}
        // inside aff C, which also kills nothing else here.
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 3).unwrap();
        let phi = QuadraticTerm::nearest_point(SymMatrix::from_diagonal(&[2.0, 0.0, -1.0]), None);
        let st = check_stationarity(&spec, &phi, &SymMatrix::from_diagonal(&[2.0, 0.0, 0.0]), 1e-8).unwrap();
        let mb = minimal_bundle(&st.gp).unwrap();
        let kq = ker_q(&st.gp, &mb);
        // Free entries: H₁₁, H₁₂, H₂₂.
        assert_eq!(kq.dim(), 3);
        for b in kq.basis() {
            for j in 0..3 {
                assert!(b.get(2, j).abs() < 1e-12);
            }
        }
    }
}
