//! Dense two-phase simplex for the small linear programs behind the effort
//! and force-transmission metrics.
//!
//! Pivoting is deterministic: Dantzig's rule with lowest-index tie breaking,
//! switching to Bland's rule once the objective stalls for `3(m+n)`
//! iterations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Feasibility tolerance on constraint rows.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const TINY_PIVOT: f64 = 1e-12;
const ROUNDOFF_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `sense cᵀx` subject to row constraints and per-variable bounds.
/// Variables default to `[0, ∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    /// Empty unless `status` is `Optimal`.
    pub solution: Vec<f64>,
    /// `NaN` unless `status` is `Optimal`.
    pub objective: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, sense: Sense) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            sense,
            constraints: Vec::new(),
            lower: vec![Some(0.0); n],
            upper: vec![None; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(objective, Sense::Min)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(objective, Sense::Max)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn with_constraint(mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constrain(coeffs, relation, rhs);
        self
    }

    pub fn with_bounds(mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(
                "bounds length differs from variable count".into(),
            ));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::Dimension(format!(
                    "row {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.rhs.is_finite() || !c.coeffs.iter().all(|x| x.is_finite()) {
                return Err(LpError::NonFinite("constraints"));
            }
        }
        if !self.objective.iter().all(|x| x.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        for (l, u) in self.lower.iter().zip(&self.upper) {
            if l.is_some_and(|l| !l.is_finite()) || u.is_some_and(|u| !u.is_finite()) {
                return Err(LpError::NonFinite("bounds"));
            }
        }
        Ok(())
    }

    /// Largest violation of any row or bound by `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            if let Some(l) = self.lower[j] {
                worst = worst.max(l - xj);
            }
            if let Some(u) = self.upper[j] {
                worst = worst.max(xj - u);
            }
        }
        worst
    }
}

/// How an original variable is expressed in the nonnegative columns.
#[derive(Clone, Copy)]
enum VarMap {
    /// x = offset + sign * y[col]
    Shifted { col: usize, offset: f64, sign: f64 },
    /// x = y[pos] - y[neg]
    Free { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    /// Structural + slack + artificial columns (the rhs column is stored
    /// separately).
    cols: usize,
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let cols = self.cols;
        let p = self.at(r, c);
        let inv = 1.0 / p;
        for j in 0..cols {
            self.a[r * cols + j] *= inv;
        }
        self.rhs[r] *= inv;
        self.a[r * cols + c] = 1.0;
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        let rrhs = self.rhs[r];
        for (i, row) in before
            .chunks_exact_mut(cols)
            .chain(after.chunks_exact_mut(cols))
            .enumerate()
        {
            let i = if i >= r { i + 1 } else { i };
            let f = row[c];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[c] = 0.0;
                self.rhs[i] -= f * rrhs;
                // basic values are nonnegative; anything below is roundoff and,
                // left alone, a later tiny pivot would blow it up
                if self.rhs[i] < 0.0 && self.rhs[i] > -ROUNDOFF_TOL {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Reduced costs `c_j - c_Bᵀ B⁻¹ A_j` and the current objective.
    fn reduced_costs(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut d = cost.to_vec();
        let mut z = 0.0;
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (j, dj) in d.iter_mut().enumerate() {
                    *dj -= cb * self.at(i, j);
                }
                z += cb * self.rhs[i];
            }
        }
        (d, z)
    }

    /// Minimizes `cost` over the current basis. `enterable` masks columns
    /// allowed to enter.
    fn optimize(
        &mut self,
        cost: &[f64],
        enterable: &[bool],
        force_bland: bool,
    ) -> Result<bool, LpError> {
        let stall_limit = 3 * (self.rows + self.cols);
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        let (mut d, mut z) = self.reduced_costs(cost);
        let mut bland = force_bland;
        let mut stalled = 0usize;
        for _ in 0..max_iter {
            let entering = if bland {
                (0..self.cols).find(|&j| enterable[j] && d[j] < -OPTIMALITY_TOL)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..self.cols {
                    if enterable[j] && d[j] < -OPTIMALITY_TOL && best.is_none_or(|b| d[j] < d[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let aic = self.at(i, c);
                // a basic artificial left at zero after phase one must stay there
                let pinned = !enterable[self.basis[i]] && aic.abs() > PIVOT_TOL;
                if aic > PIVOT_TOL || pinned {
                    let ratio = if pinned {
                        0.0
                    } else {
                        self.rhs[i].max(0.0) / aic
                    };
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - 1e-12 * best.abs().max(1.0)
                                || (ratio <= best + 1e-12 * best.abs().max(1.0)
                                    && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            if self.at(r, c).abs() < TINY_PIVOT {
                return Err(LpError::NumericalFailure(format!(
                    "pivot {:e} too small",
                    self.at(r, c)
                )));
            }
            self.pivot(r, c);
            let (nd, nz) = self.reduced_costs(cost);
            if nz < z - 1e-12 * z.abs().max(1.0) {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled > stall_limit {
                    bland = true;
                }
            }
            d = nd;
            z = nz;
        }
        Err(LpError::NumericalFailure("iteration limit reached".into()))
    }
}

/// Solves the program. Infeasibility and unboundedness are statuses, not
/// errors.
pub fn solve(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    match solve_once(lp, false) {
        Ok(out)
            if out.status != LpStatus::Optimal
                || lp.max_violation(&out.solution) <= violation_tol(lp, &out.solution) =>
        {
            Ok(out)
        }
        // retry once with Bland's rule from the start before giving up
        _ => {
            let out = solve_once(lp, true)?;
            if out.status == LpStatus::Optimal
                && lp.max_violation(&out.solution) > violation_tol(lp, &out.solution)
            {
                return Err(LpError::NumericalFailure(format!(
                    "solution violates constraints by {:e}",
                    lp.max_violation(&out.solution)
                )));
            }
            Ok(out)
        }
    }
}

fn violation_tol(lp: &LinearProgram, x: &[f64]) -> f64 {
    let scale = lp
        .constraints
        .iter()
        .map(|c| {
            c.coeffs
                .iter()
                .zip(x)
                .map(|(a, v)| (a * v).abs())
                .sum::<f64>()
                .max(c.rhs.abs())
        })
        .fold(1.0, f64::max);
    FEASIBILITY_TOL * scale
}

fn solve_once(lp: &LinearProgram, bland: bool) -> Result<LpOutcome, LpError> {
    let n = lp.num_vars();
    // map variables onto nonnegative columns
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let m = match (lp.lower[j], lp.upper[j]) {
            (Some(l), u) => {
                if let Some(u) = u {
                    bound_rows.push((ny, u - l));
                }
                VarMap::Shifted {
                    col: ny,
                    offset: l,
                    sign: 1.0,
                }
            }
            (None, Some(u)) => VarMap::Shifted {
                col: ny,
                offset: u,
                sign: -1.0,
            },
            (None, None) => {
                ny += 1;
                VarMap::Free {
                    pos: ny - 1,
                    neg: ny,
                }
            }
        };
        ny += 1;
        maps.push(m);
    }

    // rows as (dense coeffs over y, relation, rhs)
    let mut rows: Vec<(Vec<f64>, Relation, f64)> =
        Vec::with_capacity(lp.constraints.len() + bound_rows.len());
    for c in &lp.constraints {
        let mut coeffs = vec![0.0; ny];
        let mut rhs = c.rhs;
        for (j, &a) in c.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, offset, sign } => {
                    coeffs[col] += a * sign;
                    rhs -= a * offset;
                }
                VarMap::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, c.relation, rhs));
    }
    for &(col, width) in &bound_rows {
        let mut coeffs = vec![0.0; ny];
        coeffs[col] = 1.0;
        rows.push((coeffs, Relation::Le, width));
    }
    for row in &mut rows {
        // equilibrate so the feasibility tolerance is relative to each row
        let big = row.0.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        if big > 0.0 {
            row.0.iter_mut().for_each(|x| *x /= big);
            row.2 /= big;
        }
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|x| *x = -*x);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = ny + n_slack + n_art;
    let first_artificial = ny + n_slack;
    let mut t = Tableau {
        rows: m,
        cols,
        a: vec![0.0; m * cols],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        first_artificial,
    };
    let (mut s, mut art) = (ny, first_artificial);
    for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t.a[i * cols..i * cols + ny].copy_from_slice(coeffs);
        t.rhs[i] = *rhs;
        match rel {
            Relation::Le => {
                t.a[i * cols + s] = 1.0;
                t.basis[i] = s;
                s += 1;
            }
            Relation::Ge => {
                t.a[i * cols + s] = -1.0;
                s += 1;
                t.a[i * cols + art] = 1.0;
                t.basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                t.a[i * cols + art] = 1.0;
                t.basis[i] = art;
                art += 1;
            }
        }
    }

    let a0 = t.a.clone();
    let rhs0 = t.rhs.clone();
    let scale = rows.iter().map(|r| r.2).fold(1.0, f64::max);
    if n_art > 0 {
        let mut cost = vec![0.0; cols];
        cost[first_artificial..].iter_mut().for_each(|c| *c = 1.0);
        let all = vec![true; cols];
        t.optimize(&cost, &all, bland)?;
        let infeas: f64 = (0..m)
            .filter(|&i| t.basis[i] >= first_artificial)
            .map(|i| t.rhs[i].abs())
            .sum();
        if infeas > FEASIBILITY_TOL * scale {
            return Ok(LpOutcome {
                status: LpStatus::Infeasible,
                solution: Vec::new(),
                objective: f64::NAN,
            });
        }
        // pivot zero-valued artificials out where a real column can replace them
        for i in 0..m {
            if t.basis[i] >= first_artificial {
                let best = (0..first_artificial)
                    .map(|j| (j, t.at(i, j).abs()))
                    .filter(|&(_, a)| a > PIVOT_TOL)
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
                if let Some((j, _)) = best {
                    t.pivot(i, j);
                }
            }
        }
    }

    let sign = if lp.sense == Sense::Max { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; cols];
    for (j, &cj) in lp.objective.iter().enumerate() {
        match maps[j] {
            VarMap::Shifted { col, sign: s, .. } => cost[col] += sign * cj * s,
            VarMap::Free { pos, neg } => {
                cost[pos] += sign * cj;
                cost[neg] -= sign * cj;
            }
        }
    }
    let enterable: Vec<bool> = (0..cols).map(|j| j < t.first_artificial).collect();
    if !t.optimize(&cost, &enterable, bland)? {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            solution: Vec::new(),
            objective: f64::NAN,
        });
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[t.basis[i]] = t.rhs[i].max(0.0);
    }
    let recover = |y: &[f64]| -> Vec<f64> {
        maps.iter()
            .map(|m| match *m {
                VarMap::Shifted { col, offset, sign } => offset + sign * y[col],
                VarMap::Free { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    };
    let mut solution = recover(&y);
    // recompute the basic values from the original rows to shed the
    // roundoff accumulated over the pivots; a near-singular basis can make
    // this worse, so keep whichever candidate violates the rows less
    if m > 0 {
        let b = DMatrix::from_fn(m, m, |i, k| a0[i * cols + t.basis[k]]);
        if let Some(yb) = b.lu().solve(&DVector::from_column_slice(&rhs0)) {
            if yb
                .iter()
                .all(|v| v.is_finite() && *v >= -FEASIBILITY_TOL * scale)
            {
                for (k, v) in yb.iter().enumerate() {
                    y[t.basis[k]] = v.max(0.0);
                }
                let refined = recover(&y);
                if lp.max_violation(&refined) <= lp.max_violation(&solution) {
                    solution = refined;
                }
            }
        }
    }
    let objective = lp.objective.iter().zip(&solution).map(|(c, x)| c * x).sum();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        solution,
        objective,
    })
}
