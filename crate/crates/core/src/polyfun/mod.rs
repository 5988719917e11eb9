//! Symmetric polyhedral functions θ = θ₁ + θ₂ on Rⁿ, where θ₁ is a finite max of
//! affine pieces and θ₂ is the indicator of a polyhedron.

pub mod lp;
pub mod prox;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::nullspace;
use crate::spectral::{Block, DEFAULT_TOL_CLUSTER};
use lp::{lp_solve, lp_solve_many, LpProblem, LpStatus, Relation, Sense};

pub const ACTIVE_TOL: f64 = 1e-9;
pub const ETA_TOL: f64 = 1e-9;
pub const MEMBERSHIP_TOL: f64 = 1e-9;
pub const K_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;
const SYMMETRY_SEED: u64 = 0x7417_5eed;
const MAX_SPREAD_PAIRS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub a: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub b: Vec<f64>,
    pub d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LambdaMax,
    SdpCone,
    #[serde(rename = "kyfan2_sdp")]
    KyFan2Sdp,
    Free,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::LambdaMax, Preset::SdpCone, Preset::KyFan2Sdp, Preset::Free];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LambdaMax => "lambda_max",
            Preset::SdpCone => "sdp_cone",
            Preset::KyFan2Sdp => "kyfan2_sdp",
            Preset::Free => "free",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preset `{s}`")))
    }
}

/// The data `{(aᵛ, cᵥ)}`, `{(bᵘ, dᵤ)}` of θ(x) = maxᵥ(⟨aᵛ,x⟩ − cᵥ) + δ{⟨bᵘ,x⟩ ≤ dᵤ ∀μ}.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralSpec {
    n: usize,
    pieces: Vec<Piece>,
    constraints: Vec<Halfspace>,
}

impl PolyhedralSpec {
    /// Validates the data and spot-checks permutation symmetry. An empty piece
    /// list stands for θ₁ = 0 and an empty constraint list for θ₂ = 0.
    pub fn new(n: usize, mut pieces: Vec<Piece>, mut constraints: Vec<Halfspace>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if pieces.is_empty() {
            pieces.push(Piece { a: vec![0.0; n], c: 0.0 });
        }
        if constraints.is_empty() {
            constraints.push(Halfspace { b: vec![0.0; n], d: 1.0 });
        }
        for v in pieces.iter().map(|p| &p.a).chain(constraints.iter().map(|h| &h.b)) {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        let finite = pieces.iter().all(|p| p.c.is_finite() && p.a.iter().all(|v| v.is_finite()))
            && constraints.iter().all(|h| h.d.is_finite() && h.b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::InvalidInput("non-finite polyhedral data".into()));
        }
        if constraints.iter().any(|h| h.d == 0.0 && h.b.iter().all(|v| *v == 0.0)) {
            return Err(Error::InvalidInput("constraint (0, 0) is not allowed".into()));
        }
        let spec = Self { n, pieces, constraints };
        spec.symmetry_spot_check()?;
        Ok(spec)
    }

    pub fn preset(preset: Preset, n: usize) -> Result<Self> {
        let e = |i: usize| (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let orthant = || (0..n).map(|i| Halfspace { b: e(i).iter().map(|v| 0.0 - v).collect(), d: 0.0 }).collect();
        match preset {
            Preset::LambdaMax => Self::new(n, (0..n).map(|i| Piece { a: e(i), c: 0.0 }).collect(), vec![]),
            Preset::SdpCone => Self::new(n, vec![], orthant()),
            Preset::KyFan2Sdp => {
                if n < 2 {
                    return Err(Error::InvalidInput("kyfan2_sdp needs n ≥ 2".into()));
                }
                let pieces = (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .map(|(i, j)| {
                        let mut a = vec![0.0; n];
                        a[i] = 1.0;
                        a[j] = 1.0;
                        Piece { a, c: 0.0 }
                    })
                    .collect();
                Self::new(n, pieces, orthant())
            }
            Preset::Free => Self::new(n, vec![], vec![]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    fn symmetry_spot_check(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(SYMMETRY_SEED);
        let n = self.n;
        for sample in 0..24 {
            let base: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let x: Vec<f64> = match sample % 3 {
                0 => base,
                1 => base.iter().map(|v| v.abs()).collect(),
                _ => base.iter().map(|v| -v.abs()).collect(),
            };
            let fx = self.theta_eval(&x);
            if !fx.is_finite() {
                continue;
            }
            for _ in 0..4 {
                let mut ux = x.clone();
                ux.shuffle(&mut rng);
                let fu = self.theta_eval(&ux);
                let gap = (fx - fu).abs();
                if !(gap <= SYMMETRY_TOL * (1.0 + fx.abs())) {
                    return Err(Error::NotPermutationSymmetric { gap });
                }
            }
        }
        Ok(())
    }

    pub fn piece_values(&self, x: &[f64]) -> Vec<f64> {
        self.pieces.iter().map(|p| dot(&p.a, x) - p.c).collect()
    }

    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|h| dot(&h.b, x) - h.d).collect()
    }

    fn constraint_tol(&self, mu: usize, x: &[f64]) -> f64 {
        let h = &self.constraints[mu];
        ACTIVE_TOL * (1.0 + h.d.abs() + h.b.iter().zip(x).map(|(b, v)| (b * v).abs()).sum::<f64>())
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.constraint_values(x).iter().enumerate().all(|(mu, r)| *r <= self.constraint_tol(mu, x))
    }

    /// θ(x), or `+∞` outside the domain.
    pub fn theta_eval(&self, x: &[f64]) -> f64 {
        if !self.is_feasible(x) {
            return f64::INFINITY;
        }
        self.piece_values(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// ι₁(x), ι₂(x) and the attained max.
    pub fn active_sets(&self, x: &[f64]) -> (Vec<usize>, Vec<usize>, f64) {
        let vals = self.piece_values(x);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tol = ACTIVE_TOL * (1.0 + max.abs());
        let iota1 = (0..vals.len()).filter(|&k| vals[k] >= max - tol).collect();
        let iota2 = self
            .constraint_values(x)
            .iter()
            .enumerate()
            .filter(|(mu, r)| r.abs() <= self.constraint_tol(*mu, x))
            .map(|(mu, _)| mu)
            .collect();
        (iota1, iota2, max)
    }

    fn representation_lp(&self, iota1: &[usize], iota2: &[usize], y: &[f64], slack_budget: Option<f64>) -> LpProblem {
        let (p, u, n) = (iota1.len(), iota2.len(), self.n);
        let nv = p + u + 2 * n;
        let mut obj = vec![0.0; nv];
        obj[p + u..].iter_mut().for_each(|c| *c = 1.0);
        let mut lp = LpProblem::new(Sense::Minimize, obj);
        for i in 0..n {
            let mut row = vec![0.0; nv];
            for (k, &nu) in iota1.iter().enumerate() {
                row[k] = self.pieces[nu].a[i];
            }
            for (k, &mu) in iota2.iter().enumerate() {
                row[p + k] = self.constraints[mu].b[i];
            }
            row[p + u + i] = 1.0;
            row[p + u + n + i] = -1.0;
            lp.add(row, Relation::Eq, y[i]);
        }
        let mut simplex = vec![0.0; nv];
        simplex[..p].iter_mut().for_each(|c| *c = 1.0);
        lp.add(simplex, Relation::Eq, 1.0);
        if let Some(budget) = slack_budget {
            let mut row = vec![0.0; nv];
            row[p + u..].iter_mut().for_each(|c| *c = 1.0);
            lp.add(row, Relation::Le, budget);
        }
        lp
    }

    /// Decides `y ∈ ∂θ(x)` by the ℓ₁-nearest representation.
    pub fn subdiff_membership(&self, x: &[f64], y: &[f64]) -> Result<SubdiffMembership> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        let p = self.pieces.len();
        let u = self.constraints.len();
        if !self.theta_eval(x).is_finite() {
            return Ok(SubdiffMembership {
                member: false,
                u: vec![0.0; p],
                v: vec![0.0; u],
                gap: f64::INFINITY,
                residual: y.to_vec(),
            });
        }
        let (iota1, iota2, _) = self.active_sets(x);
        let lp = self.representation_lp(&iota1, &iota2, y, None);
        let sol = lp_solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp(format!("membership program returned {:?}", sol.status)));
        }
        let (k1, k2, n) = (iota1.len(), iota2.len(), self.n);
        let mut uu = vec![0.0; p];
        let mut vv = vec![0.0; u];
        for (k, &nu) in iota1.iter().enumerate() {
            uu[nu] = sol.x[k];
        }
        for (k, &mu) in iota2.iter().enumerate() {
            vv[mu] = sol.x[k1 + k];
        }
        let residual: Vec<f64> = (0..n).map(|i| sol.x[k1 + k2 + i] - sol.x[k1 + k2 + n + i]).collect();
        let gap = sol.objective.max(0.0);
        let member = gap <= MEMBERSHIP_TOL * (1.0 + l1(y));
        Ok(SubdiffMembership { member, u: uu, v: vv, gap, residual })
    }

    /// ι, η and the attained value at `(x, y)`; requires `y ∈ ∂θ(x)`.
    pub fn active_structure(&self, x: &[f64], y: &[f64]) -> Result<ActiveStructure> {
        let m = self.subdiff_membership(x, y)?;
        if !m.member {
            return Err(Error::Domain(format!("y is not a subgradient of θ at x (ℓ₁ gap {:.3e})", m.gap)));
        }
        let (iota1, iota2, attained) = self.active_sets(x);
        let budget = 2.0 * m.gap + 1e-12 * (1.0 + l1(y));
        let lp = self.representation_lp(&iota1, &iota2, y, Some(budget));
        let nv = lp.num_vars();
        let objectives: Vec<Vec<f64>> = (0..iota1.len() + iota2.len())
            .map(|k| {
                let mut o = vec![0.0; nv];
                o[k] = 1.0;
                o
            })
            .collect();
        let mut lp = lp;
        lp.sense = Sense::Maximize;
        let sols = lp_solve_many(&lp, &objectives)?;
        let positive = |k: usize| match sols[k].status {
            LpStatus::Unbounded => true,
            LpStatus::Optimal => sols[k].objective > ETA_TOL,
            LpStatus::Infeasible => false,
        };
        let eta1 = iota1.iter().enumerate().filter(|(k, _)| positive(*k)).map(|(_, &nu)| nu).collect();
        let eta2 =
            iota2.iter().enumerate().filter(|(k, _)| positive(iota1.len() + *k)).map(|(_, &mu)| mu).collect();
        Ok(ActiveStructure { iota1, iota2, eta1, eta2, attained })
    }

    /// Membership of `d` in the critical cone C_θ(x, y).
    pub fn critical_cone_membership(&self, x: &[f64], y: &[f64], d: &[f64]) -> Result<bool> {
        let act = self.active_structure(x, y)?;
        self.check_dims(d)?;
        Ok(act.critical_cone_contains(self, d))
    }

    /// A direction in K(x, y), or `None` when K is empty. Within-cluster ordering
    /// is taken from runs of equal entries of `x`.
    pub fn k_set_witness(&self, x: &[f64], y: &[f64]) -> Result<Option<KWitness>> {
        let act = self.active_structure(x, y)?;
        let alpha = equal_runs(x, DEFAULT_TOL_CLUSTER);
        self.k_set_witness_in_blocks(&act, y, &alpha)
    }

    /// As [`Self::k_set_witness`] with explicit α blocks and a precomputed structure.
    pub fn k_set_witness_in_blocks(
        &self,
        act: &ActiveStructure,
        y: &[f64],
        alpha: &[Block],
    ) -> Result<Option<KWitness>> {
        let n = self.n;
        let t = n;
        let base_rows = self.k_rows(act, alpha, n + 1);
        let mut obj = vec![0.0; n + 1];
        obj[t] = 1.0;
        let mut lp = LpProblem::new(Sense::Maximize, obj);
        for j in 0..=n {
            lp = lp.free(j);
        }
        for (row, rel, rhs) in &base_rows {
            lp.add(row.clone(), *rel, *rhs);
        }
        let sol = lp_solve(&lp)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Lp(format!("K program returned {:?}", sol.status)));
        }
        let tstar = sol.objective;
        if tstar <= K_TOL {
            return Ok(None);
        }
        let mut d = sol.x[..n].to_vec();
        let mut margin = tstar;

        // Among witnesses with half the optimal margin, prefer one that moves
        // cross-cluster pairs with unequal y values together.
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| {
                let ai = alpha.iter().position(|b| b.contains(&i));
                let aj = alpha.iter().position(|b| b.contains(&j));
                ai != aj && (y[i] - y[j]).abs() > DEFAULT_TOL_CLUSTER * (1.0 + y[i].abs())
            })
            .collect();
        if !pairs.is_empty() && pairs.len() <= MAX_SPREAD_PAIRS && tstar / 2.0 >= K_TOL {
            let nv = n + 1 + pairs.len();
            let mut obj = vec![0.0; nv];
            obj[n + 1..].iter_mut().for_each(|c| *c = 1.0);
            let mut lp2 = LpProblem::new(Sense::Minimize, obj);
            for j in 0..=n {
                lp2 = lp2.free(j);
            }
            for (row, rel, rhs) in self.k_rows(act, alpha, nv) {
                lp2.add(row, rel, rhs);
            }
            let mut fix = vec![0.0; nv];
            fix[t] = 1.0;
            lp2.add(fix, Relation::Ge, tstar / 2.0);
            for (k, &(i, j)) in pairs.iter().enumerate() {
                for s in [1.0, -1.0] {
                    let mut row = vec![0.0; nv];
                    row[i] = s;
                    row[j] = -s;
                    row[n + 1 + k] = -1.0;
                    lp2.add(row, Relation::Le, 0.0);
                }
            }
            let s2 = lp_solve(&lp2)?;
            if s2.status == LpStatus::Optimal {
                d = s2.x[..n].to_vec();
                margin = s2.x[t];
            }
        }
        Ok(Some(KWitness { d, margin }))
    }

    /// Rows of the K program over variables `(d, t, extra…)` of width `width`.
    fn k_rows(&self, act: &ActiveStructure, alpha: &[Block], width: usize) -> Vec<(Vec<f64>, Relation, f64)> {
        let n = self.n;
        let t = n;
        let mut rows = Vec::new();
        let nu0 = act.eta1.first().copied();
        if let Some(nu0) = nu0 {
            let a0 = &self.pieces[nu0].a;
            for &nu in &act.eta1[1..] {
                let mut row = vec![0.0; width];
                for i in 0..n {
                    row[i] = self.pieces[nu].a[i] - a0[i];
                }
                rows.push((row, Relation::Eq, 0.0));
            }
            for nu in act.iota1.iter().filter(|nu| !act.eta1.contains(nu)) {
                let mut row = vec![0.0; width];
                for i in 0..n {
                    row[i] = self.pieces[*nu].a[i] - a0[i];
                }
                row[t] = 1.0;
                rows.push((row, Relation::Le, 0.0));
            }
        }
        for &mu in &act.eta2 {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&self.constraints[mu].b);
            rows.push((row, Relation::Eq, 0.0));
        }
        for mu in act.iota2.iter().filter(|mu| !act.eta2.contains(mu)) {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&self.constraints[*mu].b);
            row[t] = 1.0;
            rows.push((row, Relation::Le, 0.0));
        }
        for b in alpha {
            for i in b.start..b.end.saturating_sub(1) {
                let mut row = vec![0.0; width];
                row[i] = 1.0;
                row[i + 1] = -1.0;
                rows.push((row, Relation::Ge, 0.0));
            }
        }
        for i in 0..n {
            let mut row = vec![0.0; width];
            row[i] = 1.0;
            rows.push((row.clone(), Relation::Le, 1.0));
            rows.push((row, Relation::Ge, -1.0));
        }
        let mut row = vec![0.0; width];
        row[t] = 1.0;
        rows.push((row, Relation::Le, 1.0));
        rows
    }

    /// Orthonormal basis of span(C_θ(x, y) − C_θ(x, y)).
    pub fn min_bundle_subspace(&self, x: &[f64], y: &[f64]) -> Result<Vec<Vec<f64>>> {
        let act = self.active_structure(x, y)?;
        Ok(act.cone_span_basis(self))
    }

    fn check_dims(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::Dimension { expected: self.n, got: v.len() });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubdiffMembership {
    pub member: bool,
    /// Coefficients on all pieces (zero off ι₁).
    pub u: Vec<f64>,
    /// Coefficients on all constraints (zero off ι₂).
    pub v: Vec<f64>,
    /// ℓ₁ distance from `y` to the represented set.
    pub gap: f64,
    /// `y` minus the nearest represented point.
    pub residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ActiveStructure {
    pub iota1: Vec<usize>,
    pub iota2: Vec<usize>,
    pub eta1: Vec<usize>,
    pub eta2: Vec<usize>,
    /// Common value of the active pieces of θ₁.
    pub attained: f64,
}

impl ActiveStructure {
    /// `y` lies in the relative interior of ∂θ(x) exactly when ι = η.
    pub fn is_relative_interior(&self) -> bool {
        self.iota1 == self.eta1 && self.iota2 == self.eta2
    }

    /// The η generators: aᵛ for ν ∈ η₁ and bᵘ for μ ∈ η₂.
    pub fn generators<'a>(&'a self, spec: &'a PolyhedralSpec) -> impl Iterator<Item = &'a [f64]> + 'a {
        self.eta1
            .iter()
            .map(move |&nu| spec.pieces[nu].a.as_slice())
            .chain(self.eta2.iter().map(move |&mu| spec.constraints[mu].b.as_slice()))
    }

    /// Rows whose common kernel is span C_θ: aᵛ − aᵛ⁰ on η₁ and bᵘ on η₂.
    pub fn equality_rows(&self, spec: &PolyhedralSpec) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        if let Some(&nu0) = self.eta1.first() {
            let a0 = &spec.pieces[nu0].a;
            for &nu in &self.eta1[1..] {
                rows.push(spec.pieces[nu].a.iter().zip(a0).map(|(a, b)| a - b).collect());
            }
        }
        for &mu in &self.eta2 {
            rows.push(spec.constraints[mu].b.clone());
        }
        rows
    }

    pub fn critical_cone_contains(&self, spec: &PolyhedralSpec, d: &[f64]) -> bool {
        let tol = MEMBERSHIP_TOL * (1.0 + d.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let vals: Vec<f64> = spec.pieces.iter().map(|p| dot(&p.a, d)).collect();
        if let Some(&nu0) = self.eta1.first() {
            let m = vals[nu0];
            if self.eta1.iter().any(|&nu| (vals[nu] - m).abs() > tol) {
                return false;
            }
            if self.iota1.iter().any(|&nu| vals[nu] > m + tol) {
                return false;
            }
        }
        for &mu in &self.iota2 {
            let v = dot(&spec.constraints[mu].b, d);
            if self.eta2.contains(&mu) && v.abs() > tol || v > tol {
                return false;
            }
        }
        true
    }

    pub fn cone_span_basis(&self, spec: &PolyhedralSpec) -> Vec<Vec<f64>> {
        let n = spec.n;
        let rows = self.equality_rows(spec);
        let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
        nullspace(&a, n).into_iter().map(|v| v.iter().copied().collect()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KWitness {
    pub d: Vec<f64>,
    /// Smallest slack over the strict rows (1 when there are none).
    pub margin: f64,
}

impl PolyhedralSpec {
    /// Checks every row of K(x, y) at `d`; returns a description of the first
    /// violated row.
    pub fn k_violation(&self, act: &ActiveStructure, alpha: &[Block], d: &[f64]) -> Option<String> {
        let tol = K_TOL * (1.0 + d.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let vals: Vec<f64> = self.pieces.iter().map(|p| dot(&p.a, d)).collect();
        if let Some(&nu0) = act.eta1.first() {
            for &nu in &act.eta1 {
                if (vals[nu] - vals[nu0]).abs() > tol {
                    return Some(format!("equality on piece {nu} fails by {:.3e}", vals[nu] - vals[nu0]));
                }
            }
            for nu in act.iota1.iter().filter(|nu| !act.eta1.contains(nu)) {
                if vals[*nu] - vals[nu0] >= -K_TOL {
                    return Some(format!("strict inequality on piece {nu} fails ({:.3e})", vals[*nu] - vals[nu0]));
                }
            }
        }
        for &mu in &act.iota2 {
            let v = dot(&self.constraints[mu].b, d);
            if act.eta2.contains(&mu) {
                if v.abs() > tol {
                    return Some(format!("equality on constraint {mu} fails by {v:.3e}"));
                }
            } else if v >= -K_TOL {
                return Some(format!("strict inequality on constraint {mu} fails ({v:.3e})"));
            }
        }
        for b in alpha {
            for i in b.start..b.end.saturating_sub(1) {
                if d[i] < d[i + 1] - tol {
                    return Some(format!("ordering d[{i}] ≥ d[{}] fails", i + 1));
                }
            }
        }
        None
    }
}

/// Maximal runs of consecutive entries that agree within `tol·(1+|v|)`.
pub fn equal_runs(x: &[f64], tol: f64) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=x.len() {
        if i == x.len() || (x[i - 1] - x[i]).abs() > tol * (1.0 + x[i - 1].abs()) {
            blocks.push(start..i);
            start = i;
        }
    }
    blocks
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lmax(n: usize) -> PolyhedralSpec {
        PolyhedralSpec::preset(Preset::LambdaMax, n).unwrap()
    }

    fn sdp(n: usize) -> PolyhedralSpec {
        PolyhedralSpec::preset(Preset::SdpCone, n).unwrap()
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(lmax(2).theta_eval(&[3.0, 1.0]), 3.0);
        assert_eq!(sdp(2).theta_eval(&[1.0, -0.5]), f64::INFINITY);
        assert_eq!(sdp(2).theta_eval(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn membership_examples() {
        let m = lmax(2).subdiff_membership(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(m.member);
        assert!((m.u[0] - 0.5).abs() < 1e-12 && (m.u[1] - 0.5).abs() < 1e-12);
        let m = lmax(2).subdiff_membership(&[1.0, 1.0], &[0.7, 0.5]).unwrap();
        assert!(!m.member);
        assert!((m.gap - 0.2).abs() < 1e-12);
        let m = sdp(2).subdiff_membership(&[1.0, 0.0], &[0.0, -2.0]).unwrap();
        assert!(m.member);
        assert!((m.v[1] - 2.0).abs() < 1e-12 && m.v[0] == 0.0);
    }

    #[test]
    fn active_structure_examples() {
        let a = lmax(2).active_structure(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(a.iota1, vec![0, 1]);
        assert_eq!(a.eta1, vec![0]);
        let a = lmax(2).active_structure(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(a.eta1, vec![0, 1]);
        let a = sdp(2).active_structure(&[1.0, 0.0], &[0.0, -1.0]).unwrap();
        assert_eq!(a.eta2, vec![1]);
        assert!(a.iota2.contains(&1));
        assert!(matches!(lmax(2).active_structure(&[1.0, 1.0], &[0.7, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn lineality_generators_are_in_eta() {
        // x₁ = x₂ written as two inequalities; both multipliers can grow together.
        let spec = PolyhedralSpec::new(
            2,
            vec![],
            vec![Halfspace { b: vec![1.0, -1.0], d: 0.0 }, Halfspace { b: vec![-1.0, 1.0], d: 0.0 }],
        )
        .unwrap();
        let a = spec.active_structure(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(a.eta2, vec![0, 1]);
    }

    #[test]
    fn critical_cone_examples() {
        let s = lmax(2);
        for t in [-2.0, 0.0, 3.5] {
            assert!(s.critical_cone_membership(&[1.0, 1.0], &[0.5, 0.5], &[t, t]).unwrap());
        }
        assert!(!s.critical_cone_membership(&[1.0, 1.0], &[0.5, 0.5], &[1.0, 0.0]).unwrap());
        assert!(s.critical_cone_membership(&[1.0, 1.0], &[1.0, 0.0], &[0.0, 0.0]).unwrap());
        assert!(sdp(2).critical_cone_membership(&[1.0, 0.0], &[0.0, -1.0], &[0.0, 0.0]).unwrap());
    }

    #[test]
    fn k_witness_lambda_max() {
        let s = lmax(3);
        let (x, y) = ([1.0, 1.0, 0.0], [0.5, 0.5, 0.0]);
        let act = s.active_structure(&x, &y).unwrap();
        let alpha = equal_runs(&x, 1e-8);
        assert!(s.k_violation(&act, &alpha, &[0.0, 0.0, -1.0]).is_none());
        let w = s.k_set_witness(&x, &y).unwrap().expect("nonempty");
        assert!((w.d[0] - w.d[1]).abs() < 1e-9);
        assert!(w.margin > K_TOL);
        assert!(s.k_violation(&act, &alpha, &w.d).is_none());
    }

    #[test]
    fn k_witness_sdp_and_free() {
        let s = sdp(2);
        let w = s.k_set_witness(&[1.0, 0.0], &[0.0, -1.0]).unwrap().expect("nonempty");
        assert!(w.d[1].abs() < 1e-12);
        let free = PolyhedralSpec::preset(Preset::Free, 3).unwrap();
        let w = free.k_set_witness(&[1.0, 0.0, 0.0], &[0.0; 3]).unwrap().expect("whole space");
        assert!((w.margin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k_empty_when_ordering_conflicts() {
        // y = (0, 1) uses only the second piece, so d₁ < d₂ is required while
        // the shared cluster of x demands d₁ ≥ d₂.
        assert!(lmax(2).k_set_witness(&[1.0, 1.0], &[0.0, 1.0]).unwrap().is_none());
        let s = PolyhedralSpec::preset(Preset::SdpCone, 3).unwrap();
        let b = s.active_structure(&[0.0; 3], &[-1.0, -1.0, -1.0]).unwrap();
        assert_eq!(b.eta2, vec![0, 1, 2]);
    }

    #[test]
    fn bundle_subspace_examples() {
        let b = lmax(2).min_bundle_subspace(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0][0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((b[0][0] - b[0][1]).abs() < 1e-12);
        let b = sdp(2).min_bundle_subspace(&[1.0, 0.0], &[0.0, -1.0]).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0][0].abs() - 1.0).abs() < 1e-12);
        let free = PolyhedralSpec::preset(Preset::Free, 3).unwrap();
        assert_eq!(free.min_bundle_subspace(&[0.0; 3], &[0.0; 3]).unwrap().len(), 3);
    }

    #[test]
    fn presets_and_validation() {
        let k = PolyhedralSpec::preset(Preset::KyFan2Sdp, 4).unwrap();
        assert_eq!(k.pieces().len(), 6);
        assert_eq!(k.constraints().len(), 4);
        assert_eq!(k.theta_eval(&[3.0, 2.0, 1.0, 0.0]), 5.0);
        assert!("nope".parse::<Preset>().is_err());
        assert_eq!("kyfan2_sdp".parse::<Preset>().unwrap(), Preset::KyFan2Sdp);
        let bad = PolyhedralSpec::new(2, vec![Piece { a: vec![1.0, 0.0], c: 0.0 }], vec![]);
        assert!(matches!(bad, Err(Error::NotPermutationSymmetric { .. })));
        let zero = PolyhedralSpec::new(1, vec![], vec![Halfspace { b: vec![0.0], d: 0.0 }]);
        assert!(matches!(zero, Err(Error::InvalidInput(_))));
    }
}
