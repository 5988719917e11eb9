use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{random_sym, svec_len, SymMatrix};

/// The smooth part φ of f = φ + g.
pub trait SmoothTerm {
    fn n(&self) -> usize;
    fn value(&self, x: &SymMatrix) -> f64;
    fn gradient(&self, x: &SymMatrix) -> SymMatrix;
    /// ∇²φ(base)[H].
    fn hessian_apply(&self, base: &SymMatrix, h: &SymMatrix) -> SymMatrix;
    fn is_convex(&self) -> bool;
}

/// φ(X) = ⟨G, X⟩ + ½⟨X − C, 𝒜(X − C)⟩ with 𝒜 a symmetric operator given as a
/// matrix on svec coordinates.
#[derive(Clone, Debug)]
pub struct QuadraticTerm {
    g: SymMatrix,
    c: SymMatrix,
    a: DMatrix<f64>,
    convex: bool,
}

impl QuadraticTerm {
    pub fn new(g: SymMatrix, c: SymMatrix, a: DMatrix<f64>) -> Result<Self> {
        let n = g.n();
        if c.n() != n {
            return Err(Error::Dimension { expected: n, got: c.n() });
        }
        let m = svec_len(n);
        if a.nrows() != m || a.ncols() != m {
            return Err(Error::Dimension { expected: m, got: a.nrows() });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite operator entry".into()));
        }
        let asym = (&a - a.transpose()).norm();
        if asym > 1e-12 * (1.0 + a.norm()) {
            return Err(Error::InvalidInput(format!("operator is not self-adjoint (asymmetry {asym:.3e})")));
        }
        let a = (&a + a.transpose()) * 0.5;
        let convex = m == 0 || a.clone().symmetric_eigenvalues().min() >= -1e-12 * (1.0 + a.norm());
        Ok(Self { g, c, a, convex })
    }

    pub fn zero(n: usize) -> Self {
        Self::linear(SymMatrix::zeros(n))
    }

    pub fn linear(g: SymMatrix) -> Self {
        let n = g.n();
        let m = svec_len(n);
        Self { g, c: SymMatrix::zeros(n), a: DMatrix::zeros(m, m), convex: true }
    }

    /// ½‖X − C‖² + ⟨G, X⟩.
    pub fn nearest_point(c: SymMatrix, g: Option<SymMatrix>) -> Self {
        let n = c.n();
        let m = svec_len(n);
        let g = g.unwrap_or_else(|| SymMatrix::zeros(n));
        Self { g, c, a: DMatrix::identity(m, m), convex: true }
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn apply(&self, h: &SymMatrix) -> SymMatrix {
        SymMatrix::from_svec(h.n(), &(&self.a * h.svec())).expect("svec length matches")
    }
}

impl SmoothTerm for QuadraticTerm {
    fn n(&self) -> usize {
        self.g.n()
    }

    fn value(&self, x: &SymMatrix) -> f64 {
        let r = x.sub(&self.c);
        self.g.inner(x) + 0.5 * r.inner(&self.apply(&r))
    }

    fn gradient(&self, x: &SymMatrix) -> SymMatrix {
        self.g.add(&self.apply(&x.sub(&self.c)))
    }

    fn hessian_apply(&self, _base: &SymMatrix, h: &SymMatrix) -> SymMatrix {
        self.apply(h)
    }

    fn is_convex(&self) -> bool {
        self.convex
    }
}

/// Largest |eigenvalue| of H ↦ ∇²φ(base)[H] by power iteration.
pub fn hessian_norm_estimate(phi: &dyn SmoothTerm, base: &SymMatrix) -> f64 {
    let n = phi.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e55);
    let mut v = random_sym(n, &mut rng);
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    v = v.scale(1.0 / nv);
    let mut est = 0.0;
    for _ in 0..200 {
        let w = phi.hessian_apply(base, &v);
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = nw;
        v = w.scale(1.0 / nw);
        if (est - prev).abs() <= 1e-10 * est {
            break;
        }
    }
    est
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_is_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = DMatrix::from_fn(6, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let a = &b * b.transpose();
        let phi = QuadraticTerm::new(SymMatrix::zeros(3), SymMatrix::identity(3), a).unwrap();
        assert!(phi.is_convex());
        let x = SymMatrix::zeros(3);
        for _ in 0..10 {
            let h = random_sym(3, &mut rng);
            let g = random_sym(3, &mut rng);
            let lhs = phi.hessian_apply(&x, &h).inner(&g);
            let rhs = h.inner(&phi.hessian_apply(&x, &g));
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = random_sym(3, &mut rng);
        let g = random_sym(3, &mut rng);
        let phi = QuadraticTerm::nearest_point(c, Some(g));
        let x = random_sym(3, &mut rng);
        let h = random_sym(3, &mut rng);
        let t = 1e-6;
        let fd = (phi.value(&x.axpy(t, &h)) - phi.value(&x.axpy(-t, &h))) / (2.0 * t);
        assert!((fd - phi.gradient(&x).inner(&h)).abs() < 1e-6);
    }

    #[test]
    fn rejects_asymmetric_operator_and_detects_nonconvexity() {
        let mut a = DMatrix::identity(3, 3);
        a[(0, 1)] = 1.0;
        assert!(QuadraticTerm::new(SymMatrix::zeros(2), SymMatrix::zeros(2), a).is_err());
        let a = -DMatrix::<f64>::identity(3, 3);
        assert!(!QuadraticTerm::new(SymMatrix::zeros(2), SymMatrix::zeros(2), a).unwrap().is_convex());
    }

    #[test]
    fn power_iteration_finds_operator_norm() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 0.5]));
        let phi = QuadraticTerm::new(SymMatrix::zeros(2), SymMatrix::zeros(2), a).unwrap();
        assert!((hessian_norm_estimate(&phi, &SymMatrix::zeros(2)) - 3.0).abs() < 1e-6);
        assert_eq!(hessian_norm_estimate(&QuadraticTerm::zero(2), &SymMatrix::zeros(2)), 0.0);
    }
}
