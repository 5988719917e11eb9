//! Proximal map of a polyhedral θ by active-set enumeration of the KKT system.
//!
//! prox_{τθ}(z) = argmin_x θ(x) + ‖x − z‖²/(2τ). At the solution
//! x = z − τ(Σ uᵥ aᵛ + Σ vᵤ bᵘ) with u in the simplex on the active pieces and
//! v ≥ 0 on the active constraints.

use nalgebra::{DMatrix, DVector};

use super::{dot, PolyhedralSpec};
use crate::error::{Error, Result};

const MAX_CASES: usize = 4096;
const KKT_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct VectorProx<'a> {
    spec: &'a PolyhedralSpec,
    domain_only: bool,
    last: Option<(Vec<usize>, Vec<usize>)>,
}

impl<'a> VectorProx<'a> {
    pub fn new(spec: &'a PolyhedralSpec) -> Self {
        Self { spec, domain_only: false, last: None }
    }

    /// Euclidean projection onto dom θ instead of the prox of θ.
    pub fn domain_projection(spec: &'a PolyhedralSpec) -> Self {
        Self { spec, domain_only: true, last: None }
    }

    fn piece(&self, k: usize) -> (&[f64], f64) {
        if self.domain_only {
            (&[], 0.0)
        } else {
            let p = &self.spec.pieces()[k];
            (&p.a, p.c)
        }
    }

    fn num_pieces(&self) -> usize {
        if self.domain_only {
            1
        } else {
            self.spec.pieces().len()
        }
    }

    fn piece_dot(&self, k: usize, x: &[f64]) -> f64 {
        let (a, c) = self.piece(k);
        if a.is_empty() {
            -c
        } else {
            dot(a, x) - c
        }
    }

    fn piece_coord(&self, k: usize, i: usize) -> f64 {
        let (a, _) = self.piece(k);
        if a.is_empty() {
            0.0
        } else {
            a[i]
        }
    }

    pub fn prox(&mut self, z: &[f64], tau: f64) -> Result<Vec<f64>> {
        let n = self.spec.n();
        if z.len() != n {
            return Err(Error::Dimension { expected: n, got: z.len() });
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidInput("prox step must be positive".into()));
        }
        if let Some((s1, s2)) = self.last.clone() {
            if let Some(x) = self.try_case(z, tau, &s1, &s2) {
                return Ok(x);
            }
        }
        let p = self.num_pieces();
        let u = self.spec.constraints().len();
        let total = p + u;
        if total >= usize::BITS as usize || (1usize << total) > MAX_CASES {
            return self.fallback(z, tau);
        }
        let mut masks: Vec<usize> = (1..(1usize << total)).filter(|m| m & ((1 << p) - 1) != 0).collect();
        masks.sort_by_key(|m| (m.count_ones(), *m));
        for m in masks {
            let s1: Vec<usize> = (0..p).filter(|k| m >> k & 1 == 1).collect();
            let s2: Vec<usize> = (0..u).filter(|k| m >> (p + k) & 1 == 1).collect();
            if let Some(x) = self.try_case(z, tau, &s1, &s2) {
                self.last = Some((s1, s2));
                return Ok(x);
            }
        }
        self.fallback(z, tau)
    }

    /// Solves the KKT equalities on the given active sets and returns x when all
    /// sign and feasibility conditions hold.
    fn try_case(&self, z: &[f64], tau: f64, s1: &[usize], s2: &[usize]) -> Option<Vec<f64>> {
        let n = self.spec.n();
        let cons = self.spec.constraints();
        let (k1, k2) = (s1.len(), s2.len());
        let gen = |k: usize, i: usize| if k < k1 { self.piece_coord(s1[k], i) } else { cons[s2[k - k1]].b[i] };
        let g = k1 + k2;
        // Unknowns: multipliers (g of them) and the level s.
        let dim = g + 1;
        let mut m = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for r in 0..g {
            for c in 0..g {
                m[(r, c)] = tau * (0..n).map(|i| gen(r, i) * gen(c, i)).sum::<f64>();
            }
            let zr: f64 = (0..n).map(|i| gen(r, i) * z[i]).sum();
            if r < k1 {
                m[(r, g)] = 1.0;
                rhs[r] = zr - self.piece(s1[r]).1;
            } else {
                rhs[r] = zr - cons[s2[r - k1]].d;
            }
        }
        for c in 0..k1 {
            m[(g, c)] = 1.0;
        }
        rhs[g] = 1.0;
        let sol = m.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
        if (&m * &sol - &rhs).norm() > 1e-9 * (1.0 + rhs.norm()) {
            return None;
        }
        if (0..g).any(|k| sol[k] < -KKT_TOL) {
            return None;
        }
        let x: Vec<f64> = (0..n).map(|i| z[i] - tau * (0..g).map(|k| sol[k].max(0.0) * gen(k, i)).sum::<f64>()).collect();
        let level = (0..self.num_pieces()).map(|k| self.piece_dot(k, &x)).fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0 + x.iter().map(|v| v.abs()).sum::<f64>();
        if s1.iter().any(|&k| self.piece_dot(k, &x) < level - 1e-9 * scale) {
            return None;
        }
        if cons.iter().any(|h| dot(&h.b, &x) - h.d > 1e-9 * scale) {
            return None;
        }
        Some(x)
    }

    /// Exact-penalty subgradient descent with diminishing steps, for
    /// representations too large to enumerate.
    fn fallback(&self, z: &[f64], tau: f64) -> Result<Vec<f64>> {
        let n = self.spec.n();
        let cons = self.spec.constraints();
        let penalty = 10.0
            * (1.0
                + (0..self.num_pieces())
                    .map(|k| (0..n).map(|i| self.piece_coord(k, i).abs()).sum::<f64>())
                    .fold(0.0, f64::max));
        let objective = |x: &[f64]| {
            let level = (0..self.num_pieces()).map(|k| self.piece_dot(k, x)).fold(f64::NEG_INFINITY, f64::max);
            let viol: f64 = cons.iter().map(|h| (dot(&h.b, x) - h.d).max(0.0)).sum();
            level + penalty * viol + x.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * tau)
        };
        let mut x = z.to_vec();
        let mut best = (objective(&x), x.clone());
        for it in 1..=20_000 {
            let mut g: Vec<f64> = x.iter().zip(z).map(|(a, b)| (a - b) / tau).collect();
            let top = (0..self.num_pieces())
                .max_by(|&a, &b| self.piece_dot(a, &x).total_cmp(&self.piece_dot(b, &x)))
                .expect("at least one piece");
            for (i, gi) in g.iter_mut().enumerate() {
                *gi += self.piece_coord(top, i);
            }
            for h in cons {
                if dot(&h.b, &x) > h.d {
                    for (i, gi) in g.iter_mut().enumerate() {
                        *gi += penalty * h.b[i];
                    }
                }
            }
            let step = tau / (it as f64).sqrt();
            for i in 0..n {
                x[i] -= step * g[i];
            }
            let f = objective(&x);
            if f < best.0 {
                best = (f, x.clone());
            }
        }
        let x = best.1;
        let viol = cons.iter().map(|h| (dot(&h.b, &x) - h.d).max(0.0)).fold(0.0, f64::max);
        if viol > 1e-6 {
            return Err(Error::Numeric { what: "polyhedral prox fallback", residual: viol });
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfun::{Piece, Preset};

    #[test]
    fn orthant_projection() {
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 3).unwrap();
        let mut p = VectorProx::new(&spec);
        let x = p.prox(&[1.0, -2.0, 0.5], 0.7).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn lambda_max_prox_matches_water_filling() {
        // prox of τ·max on z = (3, 1): lower the top entry by τ while it stays on top.
        let spec = PolyhedralSpec::preset(Preset::LambdaMax, 2).unwrap();
        let mut p = VectorProx::new(&spec);
        let x = p.prox(&[3.0, 1.0], 0.5).unwrap();
        assert!((x[0] - 2.5).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        // τ = 4 forces both to the common level (3 + 1 − 4)/2 = 0.
        let x = p.prox(&[3.0, 1.0], 4.0).unwrap();
        assert!(x[0].abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn prox_satisfies_variational_inequality() {
        let spec = PolyhedralSpec::preset(Preset::KyFan2Sdp, 3).unwrap();
        let mut p = VectorProx::new(&spec);
        let z = [2.0, -0.3, 0.8];
        let tau = 0.9;
        let x = p.prox(&z, tau).unwrap();
        let f = |w: &[f64]| spec.theta_eval(w) + w.iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * tau);
        let fx = f(&x);
        for d in [[0.01, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.01], [-0.01, 0.0, 0.01], [0.0, -0.01, 0.0]] {
            let w: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            assert!(f(&w) >= fx - 1e-12);
        }
    }

    #[test]
    fn fallback_handles_large_representations() {
        // 13 identical zero pieces push the enumeration past its cap.
        let pieces = (0..13).map(|_| Piece { a: vec![0.0, 0.0], c: 0.0 }).collect();
        let spec = PolyhedralSpec::new(2, pieces, vec![]).unwrap();
        let x = VectorProx::new(&spec).prox(&[1.0, 2.0], 1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn domain_projection_ignores_pieces() {
        let spec = PolyhedralSpec::preset(Preset::KyFan2Sdp, 3).unwrap();
        let x = VectorProx::domain_projection(&spec).prox(&[2.0, -1.0, 0.5], 1.0).unwrap();
        assert_eq!(x, vec![2.0, 0.0, 0.5]);
    }
}
