//! Critical cone of g = θ∘λ, its affine hull, and the E blocks.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{nullspace, project_onto, svec_len, svec_pairs, SymMatrix};
use crate::polyfun::{dot, ActiveStructure, PolyhedralSpec};
use crate::spectral::{dir_eigenvalue_derivative, SpectralPoint};

pub const DEFAULT_TOL_MEMBERSHIP: f64 = 1e-9;

/// `e[l]` lists the indices `s` of `gamma[l]` that belong to Eˡ.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EBlocks(pub Vec<Vec<usize>>);

impl EBlocks {
    pub fn contains(&self, l: usize, s: usize) -> bool {
        self.0[l].contains(&s)
    }
}

/// s ∈ Eˡ when some η generator has two different entries inside γˡₛ.
pub fn e_blocks(spec: &PolyhedralSpec, pt: &SpectralPoint, act: &ActiveStructure) -> EBlocks {
    let gens: Vec<&[f64]> = act.generators(spec).collect();
    EBlocks(
        pt.gamma
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .enumerate()
                    .filter(|(_, g)| g.len() > 1 && gens.iter().any(|v| v[g.start..g.end].iter().any(|c| *c != v[g.start])))
                    .map(|(s, _)| s)
                    .collect()
            })
            .collect(),
    )
}

/// Orthonormal (Frobenius) basis of a linear subspace of Sⁿ.
#[derive(Clone, Debug)]
pub struct LinearSubspaceOfSym {
    n: usize,
    basis: Vec<SymMatrix>,
}

impl LinearSubspaceOfSym {
    pub fn new(n: usize, basis: Vec<SymMatrix>) -> Result<Self> {
        for (i, b) in basis.iter().enumerate() {
            if b.n() != n {
                return Err(Error::Dimension { expected: n, got: b.n() });
            }
            for (j, c) in basis.iter().enumerate().skip(i) {
                let want = if i == j { 1.0 } else { 0.0 };
                if (b.inner(c) - want).abs() > 1e-10 {
                    return Err(Error::InvalidInput(format!("basis elements {i}, {j} are not orthonormal")));
                }
            }
        }
        Ok(Self { n, basis })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, basis: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[SymMatrix] {
        &self.basis
    }

    pub fn project(&self, h: &SymMatrix) -> SymMatrix {
        project_onto(&self.basis, h)
    }

    /// `‖H − ΠH‖ ≤ tol·‖H‖`.
    pub fn contains(&self, h: &SymMatrix, tol: f64) -> bool {
        h.sub(&self.project(h)).norm() <= tol * h.norm()
    }
}

/// A point of gph ∂g with everything the second-order objects depend on.
#[derive(Clone, Debug)]
pub struct GraphPoint {
    pub spec: PolyhedralSpec,
    pub pt: SpectralPoint,
    pub act: ActiveStructure,
    pub e: EBlocks,
    pub tol_membership: f64,
}

impl GraphPoint {
    /// Fails with a domain error when λ(Y) ∉ ∂θ(λ(X)) in the joint frame.
    pub fn new(spec: &PolyhedralSpec, pt: SpectralPoint) -> Result<Self> {
        if spec.n() != pt.n() {
            return Err(Error::Dimension { expected: spec.n(), got: pt.n() });
        }
        let act = spec.active_structure(pt.lam_x(), &pt.lam_y)?;
        let e = e_blocks(spec, &pt, &act);
        Ok(Self { spec: spec.clone(), pt, act, e, tol_membership: DEFAULT_TOL_MEMBERSHIP })
    }

    pub fn n(&self) -> usize {
        self.pt.n()
    }

    /// Same point expressed in the frame P·Q.
    pub fn with_frame_rotation(&self, q: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.pt = self.pt.with_frame_rotation(q);
        out
    }

    fn tol(&self, h: &SymMatrix) -> f64 {
        let gen_scale = self
            .spec
            .pieces()
            .iter()
            .map(|p| &p.a)
            .chain(self.spec.constraints().iter().map(|c| &c.b))
            .map(|v| v.iter().map(|x| x.abs()).sum::<f64>())
            .fold(1.0, f64::max);
        self.tol_membership * (h.norm() + 1.0) * gen_scale
    }

    /// Condition (a): each α block of PᵀHP is block diagonal over its γ blocks.
    fn gamma_block_diagonal(&self, hat: &SymMatrix, tol: f64) -> bool {
        for (l, a) in self.pt.frame.alpha.iter().enumerate() {
            let gam = &self.pt.gamma[l];
            let which = |i: usize| gam.iter().position(|g| g.contains(&i));
            for i in a.clone() {
                for j in (i + 1)..a.end {
                    if which(i) != which(j) && hat.get(i, j).abs() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Condition (c): for s ∈ Eˡ the γˡₛ block is a multiple of the identity.
    fn e_blocks_scalar(&self, hat: &SymMatrix, tol: f64) -> bool {
        for (l, gam) in self.pt.gamma.iter().enumerate() {
            for &s in &self.e.0[l] {
                let g = gam[s].clone();
                for i in g.clone() {
                    if (hat.get(i, i) - hat.get(g.start, g.start)).abs() > tol {
                        return false;
                    }
                    for j in (i + 1)..g.end {
                        if hat.get(i, j).abs() > tol {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }

    fn eta_diag_equalities(&self, diag: &[f64], tol: f64) -> bool {
        let spec = &self.spec;
        if let Some(&nu0) = self.act.eta1.first() {
            let base = dot(&spec.pieces()[nu0].a, diag);
            if self.act.eta1.iter().any(|&nu| (dot(&spec.pieces()[nu].a, diag) - base).abs() > tol) {
                return false;
            }
        }
        self.act.eta2.iter().all(|&mu| dot(&spec.constraints()[mu].b, diag).abs() <= tol)
    }

    /// H ∈ C_g(X, Y) by the block conditions and the diagonal/max display.
    pub fn critical_cone_membership(&self, h: &SymMatrix) -> Result<bool> {
        let tol = self.tol(h);
        let hat = self.pt.frame.rotate(h);
        if !self.gamma_block_diagonal(&hat, tol) || !self.e_blocks_scalar(&hat, tol) {
            return Ok(false);
        }
        let diag = hat.diagonal();
        if !self.eta_diag_equalities(&diag, tol) {
            return Ok(false);
        }
        let lp = dir_eigenvalue_derivative(&self.pt.frame, h)?;
        let spec = &self.spec;
        if let Some(&nu0) = self.act.eta1.first() {
            let top = self.act.iota1.iter().map(|&nu| dot(&spec.pieces()[nu].a, &lp)).fold(f64::NEG_INFINITY, f64::max);
            if (dot(&spec.pieces()[nu0].a, &diag) - top).abs() > tol {
                return Ok(false);
            }
        }
        if !self.act.iota2.is_empty() {
            let top = self.act.iota2.iter().map(|&mu| dot(&spec.constraints()[mu].b, &lp)).fold(f64::NEG_INFINITY, f64::max);
            let ok = if self.act.eta2.is_empty() { top <= tol } else { top.abs() <= tol };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Independent route: λ'(X; H) ∈ C_θ(λ(X), λ(Y)) plus a simultaneous ordered
    /// spectral decomposition of every α block of PᵀHP with Diag(λ(Y)).
    pub fn crit_charc_membership(&self, h: &SymMatrix) -> Result<bool> {
        let tol = self.tol(h);
        let lp = dir_eigenvalue_derivative(&self.pt.frame, h)?;
        if !self.theta_cone_contains(&lp, tol) {
            return Ok(false);
        }
        let hat = self.pt.frame.rotate(h);
        if !self.gamma_block_diagonal(&hat, tol) {
            return Ok(false);
        }
        for gam in &self.pt.gamma {
            let spectra = gam
                .iter()
                .map(|g| {
                    let sub = DMatrix::from_fn(g.len(), g.len(), |i, j| hat.get(g.start + i, g.start + j));
                    SymMatrix::symmetrize(&sub).eigenvalues()
                })
                .collect::<Result<Vec<_>>>()?;
            for w in spectra.windows(2) {
                let lo = w[0].last().copied().unwrap_or(f64::INFINITY);
                let hi = w[1].first().copied().unwrap_or(f64::NEG_INFINITY);
                if lo < hi - tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn theta_cone_contains(&self, d: &[f64], tol: f64) -> bool {
        let spec = &self.spec;
        let vals: Vec<f64> = spec.pieces().iter().map(|p| dot(&p.a, d)).collect();
        if let Some(&nu0) = self.act.eta1.first() {
            let m = vals[nu0];
            if self.act.eta1.iter().any(|&nu| (vals[nu] - m).abs() > tol) {
                return false;
            }
            if self.act.iota1.iter().any(|&nu| vals[nu] > m + tol) {
                return false;
            }
        }
        self.act.iota2.iter().all(|&mu| {
            let v = dot(&spec.constraints()[mu].b, d);
            if self.act.eta2.contains(&mu) {
                v.abs() <= tol
            } else {
                v <= tol
            }
        })
    }

    /// H ∈ aff C_g(X, Y): conditions (a), (c) and the η equalities on diag(PᵀHP).
    pub fn affine_hull_membership(&self, h: &SymMatrix) -> bool {
        let tol = self.tol(h);
        let hat = self.pt.frame.rotate(h);
        self.gamma_block_diagonal(&hat, tol)
            && self.e_blocks_scalar(&hat, tol)
            && self.eta_diag_equalities(&hat.diagonal(), tol)
    }

    /// Linear constraints of aff C_g on svec(PᵀHP).
    pub(crate) fn affine_constraints(&self) -> DMatrix<f64> {
        let n = self.n();
        let index: std::collections::HashMap<(usize, usize), usize> =
            svec_pairs(n).enumerate().map(|(k, p)| (p, k)).collect();
        let m = svec_len(n);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let unit = |k: usize| {
            let mut r = vec![0.0; m];
            r[k] = 1.0;
            r
        };
        for (l, a) in self.pt.frame.alpha.iter().enumerate() {
            let gam = &self.pt.gamma[l];
            let which = |i: usize| gam.iter().position(|g| g.contains(&i));
            for i in a.clone() {
                for j in (i + 1)..a.end {
                    if which(i) != which(j) {
                        rows.push(unit(index[&(i, j)]));
                    }
                }
            }
            for &s in &self.e.0[l] {
                let g = gam[s].clone();
                for i in g.clone() {
                    if i > g.start {
                        let mut r = unit(index[&(i, i)]);
                        r[index[&(g.start, g.start)]] = -1.0;
                        rows.push(r);
                    }
                    for j in (i + 1)..g.end {
                        rows.push(unit(index[&(i, j)]));
                    }
                }
            }
        }
        let diag_row = |v: &[f64]| {
            let mut r = vec![0.0; m];
            for i in 0..n {
                r[index[&(i, i)]] = v[i];
            }
            r
        };
        for v in self.act.equality_rows(&self.spec) {
            rows.push(diag_row(&v));
        }
        DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j])
    }

    /// Orthonormal basis of aff C_g(X, Y) in the original coordinates.
    pub fn affine_hull_basis(&self) -> LinearSubspaceOfSym {
        self.subspace_from_constraints(&self.affine_constraints())
    }

    /// Nullspace of rotated-coordinate constraints, mapped back by P·Ĥ·Pᵀ.
    pub(crate) fn subspace_from_constraints(&self, a: &DMatrix<f64>) -> LinearSubspaceOfSym {
        let n = self.n();
        let basis = nullspace(a, svec_len(n))
            .into_iter()
            .map(|v| {
                let hat = SymMatrix::from_svec(n, &v).expect("svec length matches");
                self.pt.frame.unrotate(&hat)
            })
            .collect();
        LinearSubspaceOfSym { n, basis }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfun::Preset;
    use crate::spectral::joint_frame;

    fn gp(preset: Preset, x: &[f64], y: &[f64]) -> GraphPoint {
        let spec = PolyhedralSpec::preset(preset, x.len()).unwrap();
        let pt = joint_frame(&SymMatrix::from_diagonal(x), &SymMatrix::from_diagonal(y), 1e-8).unwrap();
        GraphPoint::new(&spec, pt).unwrap()
    }

    fn sym(rows: &[&[f64]]) -> SymMatrix {
        SymMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn e_blocks_examples() {
        let g = gp(Preset::LambdaMax, &[1.0, 1.0], &[1.0, 0.0]);
        assert_eq!(g.e, EBlocks(vec![vec![]]));
        let g = gp(Preset::Free, &[1.0, 1.0, 0.0], &[0.0, 0.0, 0.0]);
        assert!(g.e.0.iter().all(|v| v.is_empty()));
        // PSD cone at X = diag(1, 0, 0), Y = diag(0, −1, −1): the γ block {2, 3}
        // touches b² and b³, which differ inside it.
        let g = gp(Preset::SdpCone, &[1.0, 0.0, 0.0], &[0.0, -1.0, -1.0]);
        assert_eq!(g.e, EBlocks(vec![vec![], vec![0]]));
    }

    #[test]
    fn critical_cone_lambda_max() {
        let g = gp(Preset::LambdaMax, &[1.0, 1.0], &[1.0, 0.0]);
        // ρ = H₁₁ must equal max λ'; with H₂₂ ≤ H₁₁ this holds.
        assert!(g.critical_cone_membership(&SymMatrix::from_diagonal(&[5.0, 3.0])).unwrap());
        assert!(!g.critical_cone_membership(&SymMatrix::from_diagonal(&[3.0, 5.0])).unwrap());
        assert!(g.critical_cone_membership(&SymMatrix::zeros(2)).unwrap());
    }

    #[test]
    fn critical_cone_sdp() {
        let g = gp(Preset::SdpCone, &[1.0, 0.0], &[0.0, -1.0]);
        assert!(g.critical_cone_membership(&sym(&[&[0.3, 2.0], &[2.0, 0.0]])).unwrap());
        assert!(!g.critical_cone_membership(&sym(&[&[0.0, 0.0], &[0.0, -1.0]])).unwrap());
        assert!(!g.critical_cone_membership(&sym(&[&[0.0, 0.0], &[0.0, 1.0]])).unwrap());
    }

    #[test]
    fn affine_hull_examples() {
        let g = gp(Preset::LambdaMax, &[1.0, 1.0], &[1.0, 0.0]);
        assert!(g.affine_hull_membership(&SymMatrix::from_diagonal(&[3.0, 5.0])));
        let g = gp(Preset::SdpCone, &[1.0, 0.0], &[0.0, -1.0]);
        assert!(g.affine_hull_membership(&sym(&[&[1.0, 2.0], &[2.0, 0.0]])));
        assert!(!g.affine_hull_membership(&sym(&[&[1.0, 2.0], &[2.0, 0.1]])));
        assert!(g.affine_hull_membership(&SymMatrix::zeros(2)));
    }

    #[test]
    fn affine_hull_basis_dimensions() {
        assert_eq!(gp(Preset::SdpCone, &[1.0, 0.0], &[0.0, -1.0]).affine_hull_basis().dim(), 2);
        assert_eq!(gp(Preset::LambdaMax, &[1.0, 1.0], &[0.5, 0.5]).affine_hull_basis().dim(), 1);
        assert_eq!(gp(Preset::Free, &[2.0, 1.0, 1.0], &[0.0; 3]).affine_hull_basis().dim(), 6);
    }

    #[test]
    fn routes_agree_on_simple_cases() {
        let g = gp(Preset::LambdaMax, &[1.0, 1.0, 0.0], &[0.6, 0.4, 0.0]);
        for h in [
            SymMatrix::from_diagonal(&[1.0, 1.0, 7.0]),
            SymMatrix::from_diagonal(&[2.0, 1.0, 0.0]),
            SymMatrix::from_diagonal(&[1.0, 2.0, 0.0]),
            sym(&[&[1.0, 0.0, 3.0], &[0.0, 1.0, 0.0], &[3.0, 0.0, 0.0]]),
        ] {
            assert_eq!(g.critical_cone_membership(&h).unwrap(), g.crit_charc_membership(&h).unwrap());
        }
    }

    #[test]
    fn subspace_rejects_non_orthonormal() {
        let b = vec![SymMatrix::identity(2)];
        assert!(LinearSubspaceOfSym::new(2, b).is_err());
        let s = LinearSubspaceOfSym::new(2, vec![SymMatrix::from_diagonal(&[1.0, 0.0])]).unwrap();
        assert!(s.contains(&SymMatrix::from_diagonal(&[4.0, 0.0]), 1e-12));
        assert!(!s.contains(&SymMatrix::identity(2), 1e-8));
    }
}
