//! Brute-force tilt oracle: solve min φ(X) + g(X) − ⟨V, X⟩ over a ball around X̄
//! for many small tilts V and look at how the minimizers move.
//!
//! Each solve uses three-operator (Davis–Yin) splitting with the ball projection,
//! the gradient of φ − ⟨V, ·⟩, and the spectral prox of g.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::smooth::{hessian_norm_estimate, SmoothTerm};
use crate::error::{Error, Result};
use crate::linalg::{random_sym, sorted_eigen, SymMatrix};
use crate::polyfun::prox::VectorProx;
use crate::polyfun::PolyhedralSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleOptions {
    pub seed: u64,
    /// Ball radius; derived from the eigenvalue gaps of X̄ when absent.
    pub radius: Option<f64>,
    pub deltas: Vec<f64>,
    /// Random tilts per δ level, not counting V = 0.
    pub tilts: usize,
    pub multistarts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub spread_tol: f64,
    pub blowup_ratio: f64,
    pub growth_samples: usize,
    /// δ level used for the reported Lipschitz estimate and the growth check.
    pub reference_delta: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            seed: 0x7117,
            radius: None,
            deltas: vec![1e-2, 1e-3, 1e-4],
            tilts: 10,
            multistarts: 5,
            max_iter: 20_000,
            tol: 1e-12,
            spread_tol: 1e-6,
            blowup_ratio: 10.0,
            growth_samples: 100,
            reference_delta: 1e-3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStatus {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzLevel {
    pub delta: f64,
    pub estimate: f64,
    pub pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub kappa: f64,
    pub samples: usize,
    pub violations: usize,
    /// Most negative value of rhs-minus-lhs slack seen (≥ 0 means no violation).
    pub worst_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub status: OracleStatus,
    pub seed: u64,
    pub radius: f64,
    pub step: f64,
    /// ‖X(0) − X̄‖.
    pub x0_error: f64,
    /// Largest multistart disagreement over all tilts.
    pub max_spread: f64,
    pub lipschitz: Vec<LipschitzLevel>,
    /// Estimate at the reference δ.
    pub lipschitz_reference: f64,
    pub hit_boundary: bool,
    pub solves: usize,
    pub nonconverged: usize,
    pub growth: Option<GrowthCheck>,
    /// φ is not convex, so multistart agreement proves little.
    pub heuristic: bool,
}

struct Solver<'a> {
    phi: &'a dyn SmoothTerm,
    xbar: &'a SymMatrix,
    radius: f64,
    step: f64,
    max_iter: usize,
    tol: f64,
    prox: VectorProx<'a>,
}

struct Solve {
    x: SymMatrix,
    converged: bool,
}

impl Solver<'_> {
    fn ball(&self, z: &SymMatrix) -> SymMatrix {
        let r = z.sub(self.xbar);
        let nr = r.norm();
        if nr <= self.radius {
            z.clone()
        } else {
            self.xbar.axpy(self.radius / nr, &r)
        }
    }

    fn spectral_prox(&mut self, w: &SymMatrix) -> Result<SymMatrix> {
        let (lam, p) = sorted_eigen(w.as_matrix())?;
        let x = self.prox.prox(&lam, self.step)?;
        Ok(SymMatrix::from_eigen(&p, &x))
    }

    fn solve(&mut self, v: &SymMatrix, start: &SymMatrix) -> Result<Solve> {
        let scale = 1.0 + self.xbar.norm();
        let mut z = start.clone();
        let mut xa = z.clone();
        for _ in 0..self.max_iter {
            let xb = self.ball(&z);
            let grad = self.phi.gradient(&xb).sub(v);
            let w = xb.scale(2.0).sub(&z).axpy(-self.step, &grad);
            xa = self.spectral_prox(&w)?;
            let diff = xa.sub(&xb);
            z = z.add(&diff);
            if diff.norm() <= self.tol * scale {
                return Ok(Solve { x: self.ball(&xa), converged: true });
            }
        }
        Ok(Solve { x: self.ball(&xa), converged: false })
    }
}

/// A quarter of the smallest gap between distinct eigenvalues of X̄, clamped.
pub fn default_radius(xbar: &SymMatrix) -> Result<f64> {
    let lam = xbar.eigenvalues()?;
    let scale = 1.0 + lam.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let gap = lam.windows(2).map(|w| w[0] - w[1]).filter(|&g| g > 1e-8 * scale).fold(f64::INFINITY, f64::min);
    Ok(if gap.is_finite() { (0.25 * gap).clamp(1e-2, 0.5) } else { 0.5 })
}

fn random_direction(n: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
    loop {
        let h = random_sym(n, rng);
        let nh = h.norm();
        if nh > 1e-12 {
            return h.scale(1.0 / nh);
        }
    }
}

/// f(X) = φ(X) + θ(λ(X)).
fn f_value(spec: &PolyhedralSpec, phi: &dyn SmoothTerm, x: &SymMatrix) -> Result<f64> {
    Ok(phi.value(x) + spec.theta_eval(&x.eigenvalues()?))
}

pub fn tilt_oracle(
    spec: &PolyhedralSpec,
    phi: &dyn SmoothTerm,
    xbar: &SymMatrix,
    opts: &OracleOptions,
    kappa: Option<f64>,
) -> Result<OracleOutcome> {
    let n = xbar.n();
    if spec.n() != n || phi.n() != n {
        return Err(Error::Dimension { expected: n, got: spec.n() });
    }
    if opts.multistarts == 0 || opts.deltas.is_empty() {
        return Err(Error::InvalidInput("oracle needs at least one start and one δ level".into()));
    }
    let radius = match opts.radius {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::InvalidInput(format!("oracle radius must be positive, got {r}"))),
        None => default_radius(xbar)?,
    };
    let lip = hessian_norm_estimate(phi, xbar);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut solver = Solver {
        phi,
        xbar,
        radius,
        step,
        max_iter: opts.max_iter,
        tol: opts.tol,
        prox: VectorProx::new(spec),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut solves = 0usize;
    let mut nonconverged = 0usize;
    let mut max_spread = 0.0_f64;
    let mut hit_boundary = false;

    // Solves one tilt from every start; returns the first start's minimizer.
    let mut solve_tilt = |v: &SymMatrix, rng: &mut ChaCha8Rng| -> Result<(SymMatrix, bool)> {
        let mut sols: Vec<SymMatrix> = Vec::with_capacity(opts.multistarts);
        let mut all_converged = true;
        for s in 0..opts.multistarts {
            let start = if s == 0 {
                xbar.clone()
            } else {
                let r = radius * rng.random::<f64>();
                xbar.axpy(r, &random_direction(n, rng))
            };
            let out = solver.solve(v, &start)?;
            solves += 1;
            if !out.converged {
                nonconverged += 1;
                all_converged = false;
                continue;
            }
            if out.x.sub(xbar).norm() >= radius * (1.0 - 1e-6) {
                hit_boundary = true;
            }
            sols.push(out.x);
        }
        for i in 0..sols.len() {
            for j in (i + 1)..sols.len() {
                max_spread = max_spread.max(sols[i].sub(&sols[j]).norm());
            }
        }
        match sols.into_iter().next() {
            Some(x) => Ok((x, all_converged)),
            None => Ok((xbar.clone(), false)),
        }
    };

    let (x0, x0_ok) = solve_tilt(&SymMatrix::zeros(n), &mut rng)?;
    let x0_error = x0.sub(xbar).norm();
    let mut lipschitz = Vec::with_capacity(opts.deltas.len());
    let mut reference: Option<Vec<(SymMatrix, SymMatrix)>> = None;
    for &delta in &opts.deltas {
        let mut pts: Vec<(SymMatrix, SymMatrix)> = Vec::with_capacity(opts.tilts + 1);
        if x0_ok {
            pts.push((SymMatrix::zeros(n), x0.clone()));
        }
        for _ in 0..opts.tilts {
            let v = random_direction(n, &mut rng).scale(delta * rng.random_range(0.1..=1.0));
            let (x, ok) = solve_tilt(&v, &mut rng)?;
            if ok {
                pts.push((v, x));
            }
        }
        let mut est = 0.0_f64;
        let mut pairs = 0;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let dv = pts[i].0.sub(&pts[j].0).norm();
                if dv > 0.0 {
                    est = est.max(pts[i].1.sub(&pts[j].1).norm() / dv);
                    pairs += 1;
                }
            }
        }
        lipschitz.push(LipschitzLevel { delta, estimate: est, pairs });
        if (delta - opts.reference_delta).abs() <= 1e-12 * delta {
            reference = Some(pts);
        }
    }
    let largest = lipschitz.iter().max_by(|a, b| a.delta.total_cmp(&b.delta)).map(|l| l.estimate).unwrap_or(0.0);
    let smallest = lipschitz.iter().min_by(|a, b| a.delta.total_cmp(&b.delta)).map(|l| l.estimate).unwrap_or(0.0);
    let blowup = smallest > opts.blowup_ratio * largest && smallest > 0.0;
    let lipschitz_reference = lipschitz
        .iter()
        .find(|l| (l.delta - opts.reference_delta).abs() <= 1e-12 * l.delta)
        .map(|l| l.estimate)
        .unwrap_or(f64::NAN);

    let growth = match (kappa, reference) {
        (Some(k), Some(pts)) if k.is_finite() && k > 0.0 => Some(growth_check(spec, phi, xbar, radius, k, &pts, opts, &mut rng)?),
        _ => None,
    };

    let status = if max_spread > opts.spread_tol || blowup || hit_boundary {
        OracleStatus::Unstable
    } else if nonconverged > 0 {
        OracleStatus::Inconclusive
    } else {
        OracleStatus::Stable
    };
    Ok(OracleOutcome {
        status,
        seed: opts.seed,
        radius,
        step,
        x0_error,
        max_spread,
        lipschitz,
        lipschitz_reference,
        hit_boundary,
        solves,
        nonconverged,
        growth,
        heuristic: !phi.is_convex(),
    })
}

#[allow(clippy::too_many_arguments)]
fn growth_check(
    spec: &PolyhedralSpec,
    phi: &dyn SmoothTerm,
    xbar: &SymMatrix,
    radius: f64,
    kappa: f64,
    pts: &[(SymMatrix, SymMatrix)],
    opts: &OracleOptions,
    rng: &mut ChaCha8Rng,
) -> Result<GrowthCheck> {
    let n = xbar.n();
    let mut dom = VectorProx::domain_projection(spec);
    let k = kappa * 1.05;
    let mut samples = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for (v, xv) in pts {
        let fv = f_value(spec, phi, xv)?;
        let slack = 1e-9 * (1.0 + fv.abs());
        for _ in 0..opts.growth_samples {
            let r = radius * rng.random::<f64>().powf(1.0 / crate::linalg::svec_len(n) as f64);
            let x = xbar.axpy(r, &random_direction(n, rng));
            let (lam, p) = sorted_eigen(x.as_matrix())?;
            let x = SymMatrix::from_eigen(&p, &dom.prox(&lam, 1.0)?);
            let fx = f_value(spec, phi, &x)?;
            if !fx.is_finite() {
                continue;
            }
            samples += 1;
            let dx = x.sub(xv);
            let rhs = fv + v.inner(&dx) + dx.norm().powi(2) / (2.0 * k);
            let margin = fx - rhs;
            worst = worst.min(margin);
            if margin < -slack {
                violations += 1;
            }
        }
    }
    Ok(GrowthCheck { kappa, samples, violations, worst_margin: if worst.is_finite() { worst } else { 0.0 } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyfun::Preset;
    use crate::tilt::smooth::QuadraticTerm;

    #[test]
    fn sdp_projection_is_stable_with_unit_lipschitz() {
        let spec = PolyhedralSpec::preset(Preset::SdpCone, 2).unwrap();
        let phi = QuadraticTerm::nearest_point(SymMatrix::from_diagonal(&[1.0, -1.0]), None);
        let xbar = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let out = tilt_oracle(&spec, &phi, &xbar, &OracleOptions::default(), Some(1.0)).unwrap();
        assert_eq!(out.status, OracleStatus::Stable, "{out:?}");
        assert!(out.x0_error < 1e-9);
        assert!(out.lipschitz_reference <= 1.1);
        let g = out.growth.unwrap();
        assert_eq!(g.violations, 0);
        assert!(g.samples > 0);
    }

    #[test]
    fn flat_direction_is_unstable() {
        // λ₁ with φ = ⟨G, X⟩: f is affine along the identity, so minimizers are not unique.
        let spec = PolyhedralSpec::preset(Preset::LambdaMax, 2).unwrap();
        let phi = QuadraticTerm::linear(SymMatrix::from_diagonal(&[-0.5, -0.5]));
        let xbar = SymMatrix::identity(2);
        let opts = OracleOptions { tilts: 4, multistarts: 3, max_iter: 5000, ..Default::default() };
        let out = tilt_oracle(&spec, &phi, &xbar, &opts, None).unwrap();
        assert_eq!(out.status, OracleStatus::Unstable, "{out:?}");
    }

    #[test]
    fn default_radius_uses_gaps() {
        assert_eq!(default_radius(&SymMatrix::from_diagonal(&[1.0, 0.0])).unwrap(), 0.25);
        assert_eq!(default_radius(&SymMatrix::identity(3)).unwrap(), 0.5);
    }
}
