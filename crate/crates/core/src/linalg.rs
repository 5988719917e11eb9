//! Dense symmetric-matrix plumbing shared by every module.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// An n×n real symmetric matrix. Every constructor leaves the storage exactly
/// symmetric and finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validating constructor: rejects asymmetric or non-finite input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension { expected: n, got: row.len() });
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self(DMatrix::from_fn(n, n, |i, j| rows[i][j])))
    }

    /// Averages `m` with its transpose. Use when `m` is symmetric up to roundoff.
    pub fn symmetrize(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "symmetrize needs a square matrix");
        let n = m.nrows();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            out[(i, i)] = m[(i, i)];
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self(out)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    /// `P · Diag(d) · Pᵀ`.
    pub fn from_eigen(p: &DMatrix<f64>, d: &[f64]) -> Self {
        let scaled = p * DMatrix::from_diagonal(&DVector::from_column_slice(d));
        Self::symmetrize(&(scaled * p.transpose()))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| (0..self.n()).map(|j| self.0[(i, j)]).collect())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        Self(&self.0 - &other.0)
    }

    pub fn scale(&self, t: f64) -> SymMatrix {
        Self(&self.0 * t)
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &SymMatrix) -> SymMatrix {
        Self(&self.0 + &other.0 * t)
    }

    /// `Pᵀ · self · P`, symmetrized.
    pub fn congruence_t(&self, p: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrize(&(p.transpose() * &self.0 * p))
    }

    /// `P · self · Pᵀ`, symmetrized.
    pub fn congruence(&self, p: &DMatrix<f64>) -> SymMatrix {
        Self::symmetrize(&(p * &self.0 * p.transpose()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.0[(i, i)]).collect()
    }

    /// Isometric coordinates: upper triangle row-major, off-diagonals scaled by √2.
    pub fn svec(&self) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(svec_len(n));
        for (k, (i, j)) in svec_pairs(n).enumerate() {
            out[k] = if i == j { self.0[(i, i)] } else { self.0[(i, j)] * std::f64::consts::SQRT_2 };
        }
        out
    }

    pub fn from_svec(n: usize, v: &DVector<f64>) -> Result<SymMatrix> {
        if v.len() != svec_len(n) {
            return Err(Error::Dimension { expected: svec_len(n), got: v.len() });
        }
        let mut m = DMatrix::zeros(n, n);
        for (k, (i, j)) in svec_pairs(n).enumerate() {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
        }
        Ok(Self(m))
    }

    /// Eigenvalues in nonincreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(sorted_eigen(&self.0)?.0)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Index pairs `(i, j)` with `i ≤ j`, in svec order.
pub fn svec_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// Symmetric eigen-decomposition sorted nonincreasing, with the sign convention
/// applied to every column.
pub fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let eig = m.clone().try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER).ok_or_else(|| {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].powi(2))
            .sum::<f64>()
            .sqrt();
        Error::Numeric { what: "symmetric eigensolver", residual: off }
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lam = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut p = DMatrix::zeros(n, n);
    for (c, &k) in order.iter().enumerate() {
        p.set_column(c, &eig.eigenvectors.column(k));
    }
    apply_sign_convention(&mut p);
    Ok((lam, p))
}

/// Makes the largest-magnitude entry of each column positive (lowest row wins ties).
pub fn apply_sign_convention(p: &mut DMatrix<f64>) {
    for c in 0..p.ncols() {
        let mut best = 0;
        for r in 1..p.nrows() {
            if p[(r, c)].abs() > p[(best, c)].abs() {
                best = r;
            }
        }
        if p.nrows() > 0 && p[(best, c)] < 0.0 {
            let mut col = p.column_mut(c);
            col.neg_mut();
        }
    }
}

/// Orthonormal basis of `{x : A x = 0}` for an `m × ncols` matrix `A`.
/// Singular values at or below `1e-10 · σ_max` count as zero.
pub fn nullspace(a: &DMatrix<f64>, ncols: usize) -> Vec<DVector<f64>> {
    if ncols == 0 {
        return Vec::new();
    }
    if a.nrows() == 0 || a.iter().all(|v| *v == 0.0) {
        return (0..ncols).map(|k| DVector::from_fn(ncols, |i, _| if i == k { 1.0 } else { 0.0 })).collect();
    }
    let rows = a.nrows().max(ncols);
    let mut padded = DMatrix::zeros(rows, ncols);
    padded.view_mut((0, 0), (a.nrows(), ncols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax;
    (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| v_t.row(k).transpose())
        .collect()
}

/// Numerical rank with the same relative threshold as [`nullspace`].
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-10 * smax).count()
}

/// Haar-distributed orthogonal matrix from a QR factorization with sign fix.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            let mut col = q.column_mut(c);
            col.neg_mut();
        }
    }
    q
}

/// Symmetric matrix with iid Gaussian entries (diagonal variance 1, off-diagonal 1/2).
pub fn random_sym<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SymMatrix {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    SymMatrix::symmetrize(&g)
}

/// Orthogonal projection of `h` onto the span of an orthonormal family.
pub fn project_onto(basis: &[SymMatrix], h: &SymMatrix) -> SymMatrix {
    let mut out = SymMatrix::zeros(h.n());
    for b in basis {
        out = out.axpy(b.inner(h), b);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let bad = vec![vec![1.0, 2.0], vec![2.5, 1.0]];
        assert!(matches!(SymMatrix::from_rows(&bad), Err(Error::NotSymmetric { row: 0, col: 1 })));
        let nan = vec![vec![f64::NAN]];
        assert!(matches!(SymMatrix::from_rows(&nan), Err(Error::NonFinite { .. })));
        let ragged = vec![vec![1.0, 0.0], vec![0.0]];
        assert!(matches!(SymMatrix::from_rows(&ragged), Err(Error::Dimension { .. })));
    }

    #[test]
    fn svec_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_sym(4, &mut rng);
        let b = random_sym(4, &mut rng);
        assert!((a.svec().dot(&b.svec()) - a.inner(&b)).abs() < 1e-12);
        let back = SymMatrix::from_svec(4, &a.svec()).unwrap();
        assert!(back.sub(&a).norm() < 1e-14);
    }

    #[test]
    fn nullspace_of_rank_one_row() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = nullspace(&a, 3);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((&a * v).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(nullspace(&DMatrix::zeros(0, 2), 2).len(), 2);
    }

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let q = random_orthogonal(5, &mut rng);
        assert!((q.transpose() * &q - DMatrix::<f64>::identity(5, 5)).norm() < 1e-12);
    }

    #[test]
    fn sign_convention_prefers_lowest_row_on_ties() {
        let mut p = DMatrix::from_row_slice(2, 1, &[-0.5, 0.5]);
        apply_sign_convention(&mut p);
        assert_eq!(p[(0, 0)], 0.5);
    }
}
