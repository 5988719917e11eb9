//! Ordered eigen-frames, eigenvalue clusters and the directional derivative of λ.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{apply_sign_convention, sorted_eigen, SymMatrix};

pub const DEFAULT_TOL_CLUSTER: f64 = 1e-8;
const COMMUTATOR_TOL: f64 = 1e-8;

/// A contiguous run of indices into the ordered spectrum.
pub type Block = Range<usize>;

#[derive(Clone, Debug)]
pub struct EigenFrame {
    /// λ(X), nonincreasing, snapped to the cluster mean.
    pub lam: Vec<f64>,
    pub p: DMatrix<f64>,
    pub alpha: Vec<Block>,
    /// One representative per α block, strictly decreasing.
    pub mu: Vec<f64>,
}

impl EigenFrame {
    pub fn n(&self) -> usize {
        self.lam.len()
    }

    /// Index of the α block containing `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.alpha.iter().position(|b| b.contains(&i)).expect("index inside the spectrum")
    }

    /// `Pᵀ H P`.
    pub fn rotate(&self, h: &SymMatrix) -> SymMatrix {
        h.congruence_t(&self.p)
    }

    /// `P Ĥ Pᵀ`.
    pub fn unrotate(&self, hat: &SymMatrix) -> SymMatrix {
        hat.congruence(&self.p)
    }
}

/// Splits a nonincreasing sequence into maximal runs whose consecutive gaps are
/// at most `tol·(1+|v|)`.
pub fn cluster_runs(values: &[f64], offset: usize, tol: f64) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        let split = i == values.len() || values[i - 1] - values[i] > tol * (1.0 + values[i - 1].abs());
        if split {
            blocks.push(offset + start..offset + i);
            start = i;
        }
    }
    blocks
}

fn snap(values: &mut [f64], blocks: &[Block], offset: usize) -> Vec<f64> {
    blocks
        .iter()
        .map(|b| {
            let r = (b.start - offset)..(b.end - offset);
            let mean = values[r.clone()].iter().sum::<f64>() / r.len() as f64;
            values[r].iter_mut().for_each(|v| *v = mean);
            mean
        })
        .collect()
}

pub fn eigen_frame(x: &SymMatrix, tol_cluster: f64) -> Result<EigenFrame> {
    let (mut lam, p) = sorted_eigen(x.as_matrix())?;
    let alpha = cluster_runs(&lam, 0, tol_cluster);
    let mu = snap(&mut lam, &alpha, 0);
    Ok(EigenFrame { lam, p, alpha, mu })
}

/// A pair (X, Y) with one orthogonal frame diagonalizing both, ordered by λ(X)
/// globally and by λ(Y) inside each α block.
#[derive(Clone, Debug)]
pub struct SpectralPoint {
    pub x: SymMatrix,
    pub y: SymMatrix,
    pub frame: EigenFrame,
    /// Diagonal of `Pᵀ Y P` in frame order; nonincreasing inside each α block.
    pub lam_y: Vec<f64>,
    /// `gamma[l]` partitions `alpha[l]` by the value of `lam_y`.
    pub gamma: Vec<Vec<Block>>,
}

impl SpectralPoint {
    pub fn n(&self) -> usize {
        self.frame.n()
    }

    pub fn lam_x(&self) -> &[f64] {
        &self.frame.lam
    }

    /// Builds the point `(P Diag(x) Pᵀ, P Diag(y) Pᵀ)` from declared spectra.
    /// Entries are reordered by x descending, then y descending; clusters use
    /// `tol_cluster` on the given values, with no eigensolve.
    pub fn from_diagonal(p: &DMatrix<f64>, x: &[f64], y: &[f64], tol_cluster: f64) -> Result<Self> {
        let n = x.len();
        if y.len() != n {
            return Err(Error::Dimension { expected: n, got: y.len() });
        }
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Dimension { expected: n, got: p.nrows() });
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectrum".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(y[b].total_cmp(&y[a])));
        let mut lam: Vec<f64> = order.iter().map(|&k| x[k]).collect();
        let mut lam_y: Vec<f64> = order.iter().map(|&k| y[k]).collect();
        let mut q = DMatrix::zeros(n, n);
        for (c, &k) in order.iter().enumerate() {
            q.set_column(c, &p.column(k));
        }
        apply_sign_convention(&mut q);
        let alpha = cluster_runs(&lam, 0, tol_cluster);
        let mu = snap(&mut lam, &alpha, 0);
        let gamma = gamma_blocks(&mut lam_y, &alpha, tol_cluster);
        let xm = SymMatrix::from_eigen(&q, &lam);
        let ym = SymMatrix::from_eigen(&q, &lam_y);
        Ok(Self { x: xm, y: ym, frame: EigenFrame { lam, p: q, alpha, mu }, lam_y, gamma })
    }

    /// The same point expressed in the frame `P·Q`. The caller is responsible for
    /// `Q` being block diagonal over the γ blocks.
    pub fn with_frame_rotation(&self, q: &DMatrix<f64>) -> Self {
        let mut out = self.clone();
        out.frame.p = &self.frame.p * q;
        out
    }
}

fn gamma_blocks(lam_y: &mut [f64], alpha: &[Block], tol: f64) -> Vec<Vec<Block>> {
    alpha
        .iter()
        .map(|a| {
            let g = cluster_runs(&lam_y[a.clone()], a.start, tol);
            snap(&mut lam_y[a.clone()], &g, a.start);
            g
        })
        .collect()
}

pub fn joint_frame(x: &SymMatrix, y: &SymMatrix, tol_cluster: f64) -> Result<SpectralPoint> {
    if x.n() != y.n() {
        return Err(Error::Dimension { expected: x.n(), got: y.n() });
    }
    let xm = x.as_matrix();
    let ym = y.as_matrix();
    let commutator = (xm * ym - ym * xm).norm();
    if commutator > COMMUTATOR_TOL * (1.0 + x.norm() * y.norm()) {
        return Err(Error::NotSimultaneousFrame { commutator });
    }
    let mut frame = eigen_frame(x, tol_cluster)?;
    let n = x.n();
    let mut lam_y = vec![0.0; n];
    for a in &frame.alpha {
        let pa = frame.p.columns(a.start, a.len()).into_owned();
        let block = pa.transpose() * ym * &pa;
        let (vals, q) = sorted_eigen(&SymMatrix::symmetrize(&block).as_matrix().clone())?;
        let rotated = &pa * q;
        frame.p.columns_mut(a.start, a.len()).copy_from(&rotated);
        lam_y[a.clone()].copy_from_slice(&vals);
    }
    apply_sign_convention(&mut frame.p);
    let gamma = gamma_blocks(&mut lam_y, &frame.alpha, tol_cluster);
    Ok(SpectralPoint { x: x.clone(), y: y.clone(), frame, lam_y, gamma })
}

/// λ'(X; H): eigenvalues of each `P_αᵀ H P_α`, nonincreasing per block, concatenated.
pub fn dir_eigenvalue_derivative(frame: &EigenFrame, h: &SymMatrix) -> Result<Vec<f64>> {
    let hm = h.as_matrix();
    let mut out = Vec::with_capacity(frame.n());
    for a in &frame.alpha {
        if a.len() == 1 {
            let c = frame.p.column(a.start);
            out.push((c.transpose() * hm * c)[(0, 0)]);
        } else {
            let pa = frame.p.columns(a.start, a.len());
            let block = SymMatrix::symmetrize(&(pa.transpose() * hm * pa));
            out.extend(block.eigenvalues()?);
        }
    }
    Ok(out)
}
