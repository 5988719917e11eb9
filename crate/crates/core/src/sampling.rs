//! Seeded random instances: graph points of ∂g, tilt problems with known
//! answers, and frame rotations that leave a point unchanged.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::cone::GraphPoint;
use crate::error::{Error, Result};
use crate::linalg::{nullspace, random_orthogonal, svec_len, SymMatrix};
use crate::polyfun::PolyhedralSpec;
use crate::spectral::{SpectralPoint, DEFAULT_TOL_CLUSTER};
use crate::tilt::QuadraticTerm;

const GRID: [f64; 8] = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
const MAX_TRIES: usize = 500;

/// A random spectrum with repeated values drawn from a small grid, feasible for θ.
pub fn random_spectrum<R: Rng + ?Sized>(spec: &PolyhedralSpec, rng: &mut R) -> Result<Vec<f64>> {
    let n = spec.n();
    for _ in 0..MAX_TRIES {
        let clusters = rng.random_range(1..=n);
        let mut vals = GRID.to_vec();
        vals.shuffle(rng);
        vals.truncate(clusters);
        let x: Vec<f64> = (0..n).map(|i| if i < clusters { vals[i] } else { vals[rng.random_range(0..clusters)] }).collect();
        if spec.is_feasible(&x) {
            return Ok(x);
        }
    }
    Err(Error::Precondition("no feasible grid spectrum found".into()))
}

/// y = Σ uᵥ aᵛ + Σ vᵤ bᵘ over the active sets at x with random sparse weights.
pub fn random_subgradient<R: Rng + ?Sized>(spec: &PolyhedralSpec, x: &[f64], rng: &mut R) -> Vec<f64> {
    let n = spec.n();
    let (iota1, iota2, _) = spec.active_sets(x);
    let mut u: Vec<f64> = iota1.iter().map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.2..1.0) }).collect();
    if u.iter().all(|&w| w == 0.0) {
        let k = rng.random_range(0..u.len());
        u[k] = 1.0;
    }
    let s: f64 = u.iter().sum();
    let mut y = vec![0.0; n];
    for (&k, w) in iota1.iter().zip(&u) {
        for (yi, ai) in y.iter_mut().zip(&spec.pieces()[k].a) {
            *yi += w / s * ai;
        }
    }
    for &k in &iota2 {
        if rng.random_bool(0.4) {
            continue;
        }
        let v = rng.random_range(0.2..2.0);
        for (yi, bi) in y.iter_mut().zip(&spec.constraints()[k].b) {
            *yi += v * bi;
        }
    }
    y
}

/// A random point of gph ∂g in a random frame.
pub fn random_graph_point<R: Rng + ?Sized>(spec: &PolyhedralSpec, rng: &mut R) -> Result<GraphPoint> {
    let x = random_spectrum(spec, rng)?;
    let y = random_subgradient(spec, &x, rng);
    let p = random_orthogonal(spec.n(), rng);
    GraphPoint::new(spec, SpectralPoint::from_diagonal(&p, &x, &y, DEFAULT_TOL_CLUSTER)?)
}

/// Block-diagonal orthogonal Q over the γ blocks; P·Q is another frame for the same point.
pub fn admissible_rotation<R: Rng + ?Sized>(pt: &SpectralPoint, rng: &mut R) -> DMatrix<f64> {
    let n = pt.n();
    let mut q = DMatrix::zeros(n, n);
    for g in pt.gamma.iter().flatten() {
        let b = random_orthogonal(g.len(), rng);
        q.view_mut((g.start, g.start), (g.len(), g.len())).copy_from(&b);
    }
    q
}

#[derive(Clone, Debug)]
pub struct TiltInstance {
    pub spec: PolyhedralSpec,
    pub phi: QuadraticTerm,
    pub xbar: SymMatrix,
}

/// φ(X) = −⟨Ȳ, X⟩ + ½⟨X − X̄, 𝒜(X − X̄)⟩, so X̄ is stationary by construction.
pub fn instance_with_operator(gp: &GraphPoint, a: DMatrix<f64>) -> Result<TiltInstance> {
    let phi = QuadraticTerm::new(gp.pt.y.scale(-1.0), gp.pt.x.clone(), a)?;
    Ok(TiltInstance { spec: gp.spec.clone(), phi, xbar: gp.pt.x.clone() })
}

/// 𝒜 = I: the tilted problems are proximal steps of g, hence tilt-stable.
pub fn stable_instance(gp: &GraphPoint) -> Result<TiltInstance> {
    let m = svec_len(gp.n());
    instance_with_operator(gp, DMatrix::identity(m, m))
}

/// A unit direction H₀ = P Diag(h) Pᵀ along which g is affine near X̄, with h
/// orthogonal to every active piece difference and active constraint normal.
pub fn flat_direction<R: Rng + ?Sized>(gp: &GraphPoint, rng: &mut R) -> Option<SymMatrix> {
    let spec = &gp.spec;
    let n = gp.n();
    let (iota1, iota2, _) = spec.active_sets(gp.pt.lam_x());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    if let Some((&first, rest)) = iota1.split_first() {
        let a0 = &spec.pieces()[first].a;
        for &k in rest {
            rows.push(spec.pieces()[k].a.iter().zip(a0).map(|(a, b)| a - b).collect());
        }
    }
    for &k in &iota2 {
        rows.push(spec.constraints()[k].b.clone());
    }
    let a = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let null = nullspace(&a, n);
    if null.is_empty() {
        return None;
    }
    let mut h = DVector::zeros(n);
    for v in &null {
        h += v * rng.random_range(-1.0..1.0);
    }
    let nh = h.norm();
    if nh < 1e-8 {
        return None;
    }
    let h: Vec<f64> = (h / nh).iter().copied().collect();
    Some(SymMatrix::from_eigen(&gp.pt.frame.p, &h))
}

/// 𝒜 = I − svec(H₀)svec(H₀)ᵀ with H₀ a flat direction: f is constant along H₀.
pub fn flat_instance<R: Rng + ?Sized>(gp: &GraphPoint, rng: &mut R) -> Result<Option<TiltInstance>> {
    let Some(h0) = flat_direction(gp, rng) else {
        return Ok(None);
    };
    let m = svec_len(gp.n());
    let s = h0.svec();
    let a = DMatrix::identity(m, m) - &s * s.transpose();
    instance_with_operator(gp, a).map(Some)
}

/// 𝒜 = BBᵀ with B a random m × rank Gaussian-like matrix.
pub fn random_psd_instance<R: Rng + ?Sized>(gp: &GraphPoint, rank: usize, rng: &mut R) -> Result<TiltInstance> {
    let m = svec_len(gp.n());
    let b = DMatrix::from_fn(m, rank.min(m), |_, _| rng.random_range(-1.0..1.0));
    instance_with_operator(gp, &b * b.transpose())
}

/// 𝒜 = (I − ssᵀ)BBᵀ(I − ssᵀ) with B square random and s = svec(K)/‖K‖, so ker 𝒜 = span K.
pub fn psd_instance_with_kernel<R: Rng + ?Sized>(gp: &GraphPoint, k: &SymMatrix, rng: &mut R) -> Result<TiltInstance> {
    let m = svec_len(gp.n());
    let nk = k.norm();
    if nk == 0.0 {
        return Err(Error::InvalidInput("kernel direction must be nonzero".into()));
    }
    let s = k.svec() / nk;
    let proj = DMatrix::identity(m, m) - &s * s.transpose();
    let b = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    let a = &proj * (&b * b.transpose()) * &proj;
    instance_with_operator(gp, (&a + a.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfun::Preset;
    use crate::tilt::{check_stationarity, SmoothTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn graph_points_are_valid_for_every_preset() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for preset in Preset::ALL {
            for n in 2..=4 {
                let spec = PolyhedralSpec::preset(preset, n).unwrap();
                for _ in 0..5 {
                    let gp = random_graph_point(&spec, &mut rng).unwrap();
                    let q = admissible_rotation(&gp.pt, &mut rng);
                    let rot = gp.pt.with_frame_rotation(&q);
                    let x2 = SymMatrix::from_eigen(&rot.frame.p, &rot.frame.lam);
                    assert!(x2.sub(&gp.pt.x).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constructed_instances_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = PolyhedralSpec::preset(Preset::LambdaMax, 3).unwrap();
        let gp = random_graph_point(&spec, &mut rng).unwrap();
        let inst = flat_instance(&gp, &mut rng).unwrap().expect("λ₁ is affine along I");
        let st = check_stationarity(&inst.spec, &inst.phi, &inst.xbar, DEFAULT_TOL_CLUSTER).unwrap();
        assert!(st.residual < 1e-9);
        assert!(inst.phi.is_convex());
    }
}
