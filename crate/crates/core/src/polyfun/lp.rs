//! Dense two-phase primal simplex (Bland's rule) for the small LPs behind η and K.

use crate::error::{Error, Result};

pub const MAX_VARS: usize = 512;
const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarBound {
    NonNegative,
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub bounds: Vec<VarBound>,
    pub constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { sense, objective, bounds: vec![VarBound::NonNegative; n], constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn free(mut self, j: usize) -> Self {
        self.bounds[j] = VarBound::Free;
        self
    }

    pub fn add(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.num_vars());
        self.constraints.push(Constraint { coeffs, rel, rhs });
    }

    /// Largest violation of any row or sign bound at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().zip(x).map(|(a, v)| (a * v).abs()).sum::<f64>();
            let v = match c.rel {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        for (b, v) in self.bounds.iter().zip(x) {
            if *b == VarBound::NonNegative {
                worst = worst.max(-v);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    fn without_point(status: LpStatus, n: usize) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::NAN,
            _ => f64::INFINITY,
        };
        Self { status, x: vec![0.0; n], objective }
    }
}

pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    let mut out = lp_solve_many(problem, std::slice::from_ref(&problem.objective))?;
    Ok(out.pop().expect("one objective"))
}

/// Solves the same feasible region under several objectives (all with
/// `problem.sense`), sharing a single phase 1.
pub fn lp_solve_many(problem: &LpProblem, objectives: &[Vec<f64>]) -> Result<Vec<LpSolution>> {
    let n = problem.num_vars();
    if n > MAX_VARS {
        return Err(Error::Lp(format!("{n} variables exceed the cap of {MAX_VARS}")));
    }
    if problem.bounds.len() != n || problem.constraints.iter().any(|c| c.coeffs.len() != n) {
        return Err(Error::Lp("inconsistent dimensions".into()));
    }
    let mut tab = match Tableau::phase_one(problem)? {
        Some(t) => t,
        None => return Ok(objectives.iter().map(|_| LpSolution::without_point(LpStatus::Infeasible, n)).collect()),
    };
    tab.drop_artificials();
    let mut out = Vec::with_capacity(objectives.len());
    for obj in objectives {
        if obj.len() != n {
            return Err(Error::Lp("objective length mismatch".into()));
        }
        let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
        let cost = tab.structural_cost(obj, sign);
        let mut t = tab.clone();
        let status = t.optimize(&cost)?;
        if status == LpStatus::Unbounded {
            out.push(LpSolution::without_point(LpStatus::Unbounded, n));
            continue;
        }
        let x = t.primal();
        let residual = problem.violation(&x);
        if residual > FEAS_TOL {
            return Err(Error::Numeric { what: "simplex", residual });
        }
        let objective = obj.iter().zip(&x).map(|(c, v)| c * v).sum();
        out.push(LpSolution { status: LpStatus::Optimal, x, objective });
    }
    Ok(out)
}

#[derive(Clone, Debug)]
struct Tableau {
    /// rows × (cols + 1); last column is the right-hand side.
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns that may never enter.
    banned: Vec<bool>,
    /// For each original variable: (positive column, optional negative column).
    var_cols: Vec<(usize, Option<usize>)>,
}

impl Tableau {
    /// Builds the standard form and drives it to a feasible basis, or `None`
    /// when the region is empty.
    fn phase_one(problem: &LpProblem) -> Result<Option<Tableau>> {
        let n = problem.num_vars();
        let mut var_cols = Vec::with_capacity(n);
        let mut cols = 0;
        for b in &problem.bounds {
            match b {
                VarBound::NonNegative => {
                    var_cols.push((cols, None));
                    cols += 1;
                }
                VarBound::Free => {
                    var_cols.push((cols, Some(cols + 1)));
                    cols += 2;
                }
            }
        }
        let m = problem.constraints.len();
        // Normalize to rhs ≥ 0 and count auxiliary columns.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
        for c in &problem.constraints {
            let mut coeffs = vec![0.0; cols];
            for (j, &(pc, nc)) in var_cols.iter().enumerate() {
                coeffs[pc] = c.coeffs[j];
                if let Some(nc) = nc {
                    coeffs[nc] = -c.coeffs[j];
                }
            }
            let (coeffs, rel, rhs) = if c.rhs < 0.0 {
                let flipped = match c.rel {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (coeffs.iter().map(|v| -v).collect(), flipped, -c.rhs)
            } else {
                (coeffs, c.rel, c.rhs)
            };
            rows.push((coeffs, rel, rhs));
        }
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let total = cols + n_slack + n_art;
        let art_start = cols + n_slack;
        let mut a = vec![vec![0.0; total + 1]; m];
        let mut basis = vec![0; m];
        let (mut s, mut r_art) = (cols, art_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            a[i][..cols].copy_from_slice(coeffs);
            a[i][total] = *rhs;
            match rel {
                Relation::Le => {
                    a[i][s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    a[i][s] = -1.0;
                    s += 1;
                    a[i][r_art] = 1.0;
                    basis[i] = r_art;
                    r_art += 1;
                }
                Relation::Eq => {
                    a[i][r_art] = 1.0;
                    basis[i] = r_art;
                    r_art += 1;
                }
            }
        }
        let mut banned = vec![false; total];
        let mut tab = Tableau { a, basis, cols: total, banned: banned.clone(), var_cols };
        if n_art == 0 {
            return Ok(Some(tab));
        }
        let mut cost = vec![0.0; total];
        cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
        tab.optimize(&cost)?;
        let infeas: f64 = tab.basis.iter().enumerate().filter(|(_, &b)| b >= art_start).map(|(i, _)| tab.a[i][total]).sum();
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if infeas > FEAS_TOL * scale {
            return Ok(None);
        }
        banned[art_start..].iter_mut().for_each(|b| *b = true);
        tab.banned = banned;
        // Pivot artificials out of the basis; rows with no usable pivot are redundant.
        let mut i = 0;
        while i < tab.a.len() {
            if tab.basis[i] >= art_start {
                let pick = (0..art_start).find(|&j| tab.a[i][j].abs() > 1e-9);
                match pick {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.a.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
        Ok(Some(tab))
    }

    fn drop_artificials(&mut self) {
        let keep: Vec<usize> = (0..self.cols).filter(|&j| !self.banned[j]).collect();
        if keep.len() == self.cols {
            return;
        }
        let mut remap = vec![usize::MAX; self.cols];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        for row in &mut self.a {
            let rhs = row[self.cols];
            let mut nr: Vec<f64> = keep.iter().map(|&j| row[j]).collect();
            nr.push(rhs);
            *row = nr;
        }
        self.basis.iter_mut().for_each(|b| *b = remap[*b]);
        self.cols = keep.len();
        self.banned = vec![false; self.cols];
    }

    fn structural_cost(&self, obj: &[f64], sign: f64) -> Vec<f64> {
        let mut cost = vec![0.0; self.cols];
        for (j, &(pc, nc)) in self.var_cols.iter().enumerate() {
            cost[pc] = sign * obj[j];
            if let Some(nc) = nc {
                cost[nc] = -sign * obj[j];
            }
        }
        cost
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.a[r][c];
        for k in 0..width {
            self.a[r][k] /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Minimizes `cost · z` from the current feasible basis.
    fn optimize(&mut self, cost: &[f64]) -> Result<LpStatus> {
        let rhs = self.cols;
        for _ in 0..MAX_PIVOTS {
            let mut entering = None;
            for j in 0..self.cols {
                if self.banned[j] || self.basis.contains(&j) {
                    continue;
                }
                let rc = cost[j] - self.basis.iter().enumerate().map(|(i, &b)| cost[b] * self.a[i][j]).sum::<f64>();
                if rc < -COST_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.a.len() {
                let aij = self.a[i][j];
                if aij > PIVOT_EPS {
                    let ratio = self.a[i][rhs].max(0.0) / aij;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((k, best)) => {
                            let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                            if ratio < best && !tie || tie && self.basis[i] < self.basis[k] {
                                Some((i, ratio))
                            } else {
                                Some((k, best))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(r, j);
        }
        Err(Error::Lp("pivot limit reached".into()))
    }

    fn primal(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.cols];
        for (i, &b) in self.basis.iter().enumerate() {
            z[b] = self.a[i][self.cols];
        }
        self.var_cols
            .iter()
            .map(|&(pc, nc)| z[pc] - nc.map_or(0.0, |c| z[c]))
            .collect()
    }
}
