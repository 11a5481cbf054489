//! Dense bounded-variable two-phase primal simplex.
//!
//! Solves `min cᵀx  s.t.  A x ≤ b,  lb ≤ x ≤ ub` for the small problems built
//! by the arbitrage and curtailment modules. Every row gets a slack in
//! `[0, ∞)`; rows that are violated at the starting point get an artificial
//! variable that phase one drives to zero.

use thiserror::Error;

use crate::num::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    /// Builds a matrix from row vectors. All rows must share a length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LpError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(LpError::Dimension(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(&a, &v)| a * v).sum())
            .collect()
    }
}

/// `min cᵀx  s.t.  A x ≤ b,  lb ≤ x ≤ ub`.
///
/// Bounds may be infinite (`lb = -∞`, `ub = +∞`); everything else must be finite.
#[derive(Clone, Debug, PartialEq)]
pub struct StandardLp<T> {
    pub c: Vec<T>,
    pub a: DenseMatrix<T>,
    pub b: Vec<T>,
    pub lb: Vec<T>,
    pub ub: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub x: Option<Vec<T>>,
    /// Objective at `x`; NaN when infeasible, `-∞` when unbounded.
    pub objective: T,
    pub iterations: usize,
}

/// Structural problems with the input, as opposed to infeasibility.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("variable {index} has lb > ub")]
    InvertedBounds { index: usize },
    #[error("non-finite data in {0}")]
    NonFinite(&'static str),
    #[error("iteration limit {0} reached")]
    IterationLimit(usize),
}

impl<T: Scalar> StandardLp<T> {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.c.len();
        let m = self.b.len();
        if self.a.rows() != m {
            return Err(LpError::Dimension(format!(
                "A has {} rows but b has {m}",
                self.a.rows()
            )));
        }
        if m > 0 && self.a.cols() != n {
            return Err(LpError::Dimension(format!(
                "A has {} columns but c has {n}",
                self.a.cols()
            )));
        }
        if self.lb.len() != n || self.ub.len() != n {
            return Err(LpError::Dimension(format!(
                "bounds have lengths {}/{}, expected {n}",
                self.lb.len(),
                self.ub.len()
            )));
        }
        if !self.c.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("c"));
        }
        if !self.b.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("b"));
        }
        if !self.a.data.iter().all(|v| v.is_finite()) {
            return Err(LpError::NonFinite("A"));
        }
        for j in 0..n {
            if self.lb[j].is_nan() || self.ub[j].is_nan() {
                return Err(LpError::NonFinite("bounds"));
            }
            if self.lb[j] > self.ub[j] || self.lb[j] == T::infinity() || self.ub[j] == T::neg_infinity() {
                return Err(LpError::InvertedBounds { index: j });
            }
        }
        Ok(())
    }

    /// Largest violation of `A x ≤ b` and of the bounds.
    pub fn max_violation(&self, x: &[T]) -> T {
        let ax = self.a.mul_vec(x);
        let rows = ax
            .iter()
            .zip(&self.b)
            .map(|(&l, &r)| (l - r).pos_part())
            .fold(T::zero(), T::max);
        let bounds = x
            .iter()
            .zip(self.lb.iter().zip(&self.ub))
            .map(|(&v, (&lo, &hi))| (lo - v).pos_part().max((v - hi).pos_part()))
            .fold(T::zero(), T::max);
        rows.max(bounds)
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.c.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }
}

/// Solves the LP. Deterministic: identical input gives bit-identical output.
pub fn solve_lp<T: Scalar>(problem: &StandardLp<T>) -> Result<LpSolution<T>, LpError> {
    problem.validate()?;
    let mut tab = Tableau::new(problem);
    let limit = 50 * (tab.m + tab.ncols) + 1000;

    if tab.n_art > 0 {
        tab.set_phase_one_costs();
        match tab.run(limit)? {
            RunEnd::Optimal => {}
            // Phase one is bounded below by zero.
            RunEnd::Unbounded => unreachable!("phase one objective is bounded"),
        }
        let infeas: T = tab.artificial_sum();
        let scale = T::one().max(problem.b.iter().fold(T::zero(), |a, &v| a.max(v.abs())));
        if infeas > T::lit(T::FEAS_TOL) * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: None,
                objective: T::nan(),
                iterations: tab.iterations,
            });
        }
        tab.fix_artificials();
    }

    tab.set_phase_two_costs(&problem.c);
    let end = tab.run(limit)?;
    if end == RunEnd::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: None,
            objective: T::neg_infinity(),
            iterations: tab.iterations,
        });
    }

    let mut x = tab.structural_values();
    for (j, v) in x.iter_mut().enumerate() {
        *v = v.max(problem.lb[j]).min(problem.ub[j]);
    }
    let objective = problem.objective_at(&x);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x: Some(x),
        objective,
        iterations: tab.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RunEnd {
    Optimal,
    Unbounded,
}

/// Consecutive degenerate pivots after which pricing switches to Bland's rule.
const DEGENERATE_STREAK: usize = 30;

struct Tableau<T> {
    m: usize,
    n: usize,
    n_art: usize,
    ncols: usize,
    /// `B⁻¹ [A | I | -E]`, row-major `m × ncols`.
    t: Vec<T>,
    basis: Vec<usize>,
    /// Row holding each variable when basic.
    row_of: Vec<Option<usize>>,
    beta: Vec<T>,
    value: Vec<T>,
    lb: Vec<T>,
    ub: Vec<T>,
    cost: Vec<T>,
    d: Vec<T>,
    iterations: usize,
    opt_tol: T,
    feas_tol: T,
    piv_tol: T,
    drop_tol: T,
    // scratch
    nz_row: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn new(p: &StandardLp<T>) -> Self {
        let m = p.num_rows();
        let n = p.num_vars();
        let feas_tol = T::lit(T::FEAS_TOL);

        // Starting point: zero when admissible, else the bound closest to zero.
        let start: Vec<T> = (0..n)
            .map(|j| {
                let (lo, hi) = (p.lb[j], p.ub[j]);
                if lo <= T::zero() && T::zero() <= hi {
                    T::zero()
                } else if lo > T::zero() {
                    lo
                } else {
                    hi
                }
            })
            .collect();
        let residual: Vec<T> = p
            .a
            .mul_vec(&start)
            .iter()
            .zip(&p.b)
            .map(|(&ax, &b)| b - ax)
            .collect();
        let art_rows: Vec<usize> = (0..m).filter(|&r| residual[r] < -feas_tol).collect();
        let n_art = art_rows.len();
        let ncols = n + m + n_art;

        let mut t = vec![T::zero(); m * ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![T::zero(); m];
        let mut row_of = vec![None; ncols];
        let mut value = vec![T::zero(); ncols];
        let mut lb = vec![T::zero(); ncols];
        let mut ub = vec![T::infinity(); ncols];
        lb[..n].copy_from_slice(&p.lb);
        ub[..n].copy_from_slice(&p.ub);
        value[..n].copy_from_slice(&start);

        let mut art_of_row = vec![None; m];
        for (k, &r) in art_rows.iter().enumerate() {
            art_of_row[r] = Some(n + m + k);
        }
        for r in 0..m {
            let row = &mut t[r * ncols..(r + 1) * ncols];
            row[..n].copy_from_slice(p.a.row(r));
            row[n + r] = T::one();
            match art_of_row[r] {
                Some(a) => {
                    // a_r basic: B⁻¹ scales the row by -1.
                    row[a] = -T::one();
                    for v in row.iter_mut() {
                        *v = -*v;
                    }
                    basis[r] = a;
                    beta[r] = -residual[r];
                }
                None => {
                    basis[r] = n + r;
                    beta[r] = residual[r].max(T::zero());
                }
            }
            row_of[basis[r]] = Some(r);
        }

        let scale = p.c.iter().fold(T::one(), |a, &v| a.max(v.abs()));
        Self {
            m,
            n,
            n_art,
            ncols,
            t,
            basis,
            row_of,
            beta,
            value,
            lb,
            ub,
            cost: vec![T::zero(); ncols],
            d: vec![T::zero(); ncols],
            iterations: 0,
            opt_tol: T::lit(T::FEAS_TOL) * scale,
            feas_tol,
            piv_tol: T::lit(T::PIVOT_TOL),
            drop_tol: T::lit(T::DROP_TOL),
            nz_row: Vec::with_capacity(ncols),
        }
    }

    fn set_phase_one_costs(&mut self) {
        let mut cost = vec![T::zero(); self.ncols];
        for c in cost.iter_mut().skip(self.n + self.m) {
            *c = T::one();
        }
        self.cost = cost;
        self.opt_tol = T::lit(T::FEAS_TOL);
        self.recompute_reduced_costs();
    }

    fn set_phase_two_costs(&mut self, c: &[T]) {
        let mut cost = vec![T::zero(); self.ncols];
        cost[..self.n].copy_from_slice(c);
        self.cost = cost;
        let scale = c.iter().fold(T::one(), |a, &v| a.max(v.abs()));
        self.opt_tol = T::lit(T::FEAS_TOL) * scale;
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let mut d = self.cost.clone();
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.t[r * self.ncols..(r + 1) * self.ncols];
            for (dj, &a) in d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        for r in 0..self.m {
            d[self.basis[r]] = T::zero();
        }
        self.d = d;
    }

    fn artificial_sum(&self) -> T {
        (self.n + self.m..self.ncols)
            .map(|j| match self.row_of[j] {
                Some(r) => self.beta[r].abs(),
                None => self.value[j].abs(),
            })
            .sum()
    }

    /// Pins artificials at zero so phase two can never move them.
    fn fix_artificials(&mut self) {
        for j in self.n + self.m..self.ncols {
            self.ub[j] = T::zero();
            if self.row_of[j].is_none() {
                self.value[j] = T::zero();
            }
        }
    }

    fn structural_values(&self) -> Vec<T> {
        (0..self.n)
            .map(|j| match self.row_of[j] {
                Some(r) => self.beta[r],
                None => self.value[j],
            })
            .collect()
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        let mut best_score = T::zero();
        for j in 0..self.ncols {
            if self.row_of[j].is_some() {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -self.opt_tol && self.value[j] < self.ub[j] - self.feas_tol {
                T::one()
            } else if dj > self.opt_tol && self.value[j] > self.lb[j] + self.feas_tol {
                -T::one()
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self, limit: usize) -> Result<RunEnd, LpError> {
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= limit {
                return Err(LpError::IterationLimit(limit));
            }
            let bland = degenerate >= DEGENERATE_STREAK;
            let Some((q, dir)) = self.price(bland) else {
                return Ok(RunEnd::Optimal);
            };
            self.iterations += 1;

            // Ratio test.
            let flip = if dir > T::zero() {
                self.ub[q] - self.value[q]
            } else {
                self.value[q] - self.lb[q]
            };
            let mut theta = flip;
            let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper bound)
            let mut leave_alpha = T::zero();
            for r in 0..self.m {
                let alpha = dir * self.t[r * self.ncols + q];
                let bv = self.basis[r];
                let (limit, to_upper) = if alpha > self.piv_tol {
                    if self.lb[bv] == T::neg_infinity() {
                        continue;
                    }
                    ((self.beta[r] - self.lb[bv]) / alpha, false)
                } else if alpha < -self.piv_tol {
                    if self.ub[bv] == T::infinity() {
                        continue;
                    }
                    ((self.ub[bv] - self.beta[r]) / (-alpha), true)
                } else {
                    continue;
                };
                let limit = limit.max(T::zero());
                let better = match leave {
                    _ if limit < theta => true,
                    Some((lr, _)) if limit == theta => {
                        if bland {
                            bv < self.basis[lr]
                        } else {
                            alpha.abs() > leave_alpha
                        }
                    }
                    _ => false,
                };
                if better {
                    theta = limit;
                    leave = Some((r, to_upper));
                    leave_alpha = alpha.abs();
                }
            }
            if theta == T::infinity() {
                return Ok(RunEnd::Unbounded);
            }
            if theta <= self.feas_tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }

            // Move along the edge.
            let step = dir * theta;
            if step != T::zero() {
                for r in 0..self.m {
                    let a = self.t[r * self.ncols + q];
                    if a != T::zero() {
                        self.beta[r] -= step * a;
                    }
                }
            }
            match leave {
                None => {
                    self.value[q] = if dir > T::zero() { self.ub[q] } else { self.lb[q] };
                }
                Some((r, to_upper)) => {
                    let entering_value = self.value[q] + step;
                    let out = self.basis[r];
                    self.value[out] = if to_upper { self.ub[out] } else { self.lb[out] };
                    self.row_of[out] = None;
                    self.pivot(r, q);
                    self.basis[r] = q;
                    self.row_of[q] = Some(r);
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.ncols;
        let piv = self.t[r * nc + q];
        let inv = T::one() / piv;
        self.nz_row.clear();
        {
            let row = &mut self.t[r * nc..(r + 1) * nc];
            for (j, v) in row.iter_mut().enumerate() {
                if *v != T::zero() {
                    *v *= inv;
                    if v.abs() < self.drop_tol {
                        *v = T::zero();
                    } else {
                        self.nz_row.push(j);
                    }
                }
            }
            row[q] = T::one();
        }
        let (before, rest) = self.t.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        let prow: &[T] = prow;
        let update = |row: &mut [T], nz: &[usize], drop: T| {
            let f = row[q];
            if f == T::zero() {
                return;
            }
            for &j in nz {
                let v = row[j] - f * prow[j];
                row[j] = if v.abs() < drop { T::zero() } else { v };
            }
            row[q] = T::zero();
        };
        for row in before.chunks_exact_mut(nc) {
            update(row, &self.nz_row, self.drop_tol);
        }
        for row in after.chunks_exact_mut(nc) {
            update(row, &self.nz_row, self.drop_tol);
        }
        let dq = self.d[q];
        if dq != T::zero() {
            for &j in &self.nz_row {
                self.d[j] -= dq * prow[j];
            }
            self.d[q] = T::zero();
        }
    }
}
