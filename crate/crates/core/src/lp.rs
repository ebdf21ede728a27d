//! Dense linear programming: minimize `c·x` subject to `A·x ≤ b`, `x` free.
//!
//! The solver is a two-phase tableau simplex with Bland's rule. Free
//! variables are split as `x = u − w`; after optimality every coordinate is
//! pivoted into the basis (zero reduced cost, objective unchanged) so the
//! returned optimizer is a vertex whenever `A` has full column rank.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program has no variables or no constraints")]
    Empty,
    #[error("row {row} has {got} coefficients, expected {expected}")]
    RowLength {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("rhs has {got} entries, expected {expected}")]
    RhsLength { got: usize, expected: usize },
    #[error("non-finite entry in the linear program")]
    NonFinite,
    #[error("simplex exceeded {0} pivots")]
    IterationLimit(usize),
    #[error("oracle supports n <= 3 and k <= 25, got n = {n}, k = {k}")]
    OracleTooLarge { n: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// `minimize objective·x  s.t.  rows·x ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    objective: Vec<T>,
    /// Row-major k×n.
    matrix: Vec<T>,
    rhs: Vec<T>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>, rows: Vec<Vec<T>>, rhs: Vec<T>) -> Result<Self, LpError> {
        let n = objective.len();
        if n == 0 || rows.is_empty() {
            return Err(LpError::Empty);
        }
        if rhs.len() != rows.len() {
            return Err(LpError::RhsLength {
                got: rhs.len(),
                expected: rows.len(),
            });
        }
        let mut matrix = Vec::with_capacity(n * rows.len());
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(LpError::RowLength {
                    row,
                    got: r.len(),
                    expected: n,
                });
            }
            matrix.extend(r);
        }
        let lp = Self {
            objective,
            matrix,
            rhs,
        };
        let finite = lp
            .objective
            .iter()
            .chain(&lp.matrix)
            .chain(&lp.rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(LpError::NonFinite);
        }
        Ok(lp)
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }

    pub fn row(&self, i: usize) -> &[T] {
        let n = self.num_vars();
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn row_activity(&self, i: usize, x: &[T]) -> T {
        self.row(i).iter().zip(x).map(|(&a, &v)| a * v).sum()
    }

    pub fn evaluate(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Largest constraint violation `max_i (a_i·x − b_i)`.
    pub fn max_violation(&self, x: &[T]) -> T {
        (0..self.num_rows())
            .map(|i| self.row_activity(i, x) - self.rhs[i])
            .fold(T::neg_infinity(), T::max)
    }

    pub fn is_feasible(&self, x: &[T], tol: T) -> bool {
        self.max_violation(x) <= tol
    }

    /// Rows satisfied with equality (absolute residual within `tol`).
    pub fn tight_rows(&self, x: &[T], tol: T) -> Vec<usize> {
        (0..self.num_rows())
            .filter(|&i| (self.row_activity(i, x) - self.rhs[i]).abs() <= tol)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Empty unless optimal.
    pub x: Vec<T>,
    /// `+∞` when infeasible, `−∞` when unbounded.
    pub objective: T,
    /// Rows tight at `x`.
    pub tight: Vec<usize>,
}

impl<T: Scalar> LpSolution<T> {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            x: Vec::new(),
            objective: T::infinity(),
            tight: Vec::new(),
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            objective: T::neg_infinity(),
            tight: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

const MAX_PIVOTS: usize = 200_000;

struct Tableau<T> {
    rows: usize,
    /// Number of structural + slack + artificial columns (rhs excluded).
    cols: usize,
    /// `rows × (cols + 1)`, last column is the rhs.
    data: Vec<T>,
    basis: Vec<usize>,
    /// Reduced costs (length `cols`) followed by minus the objective value.
    cost: Vec<T>,
    allowed: Vec<bool>,
    pivots: usize,
}

impl<T: Scalar> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> T {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) -> Result<(), LpError> {
        self.pivots += 1;
        if self.pivots > MAX_PIVOTS {
            return Err(LpError::IterationLimit(MAX_PIVOTS));
        }
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v = *v / p;
        }
        prow[pc] = T::one();
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != T::zero() {
                for (v, &q) in row.iter_mut().zip(prow.iter()) {
                    *v = *v - f * q;
                }
                row[pc] = T::zero();
            }
        }
        let f = self.cost[pc];
        if f != T::zero() {
            for (v, &q) in self.cost.iter_mut().zip(prow.iter()) {
                *v = *v - f * q;
            }
            self.cost[pc] = T::zero();
        }
        self.basis[pr] = pc;
        Ok(())
    }

    /// Bland's rule: lowest-index improving column.
    fn entering(&self, tol: T) -> Option<usize> {
        (0..self.cols).find(|&j| self.allowed[j] && self.cost[j] < -tol)
    }

    /// Minimum ratio; ties resolved by lowest basic variable index.
    fn leaving(&self, col: usize) -> Option<usize> {
        let ptol = T::pivot_tol();
        let mut best: Option<(usize, T)> = None;
        for r in 0..self.rows {
            let a = self.at(r, col);
            if a > ptol {
                let ratio = self.rhs(r).max(T::zero()) / a;
                best = match best {
                    None => Some((r, ratio)),
                    Some((br, bv)) => {
                        let slack = T::pivot_tol() * (T::one() + bv.abs());
                        if ratio < bv - slack
                            || (ratio <= bv + slack && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, bv))
                        }
                    }
                };
            }
        }
        best.map(|(r, _)| r)
    }

    /// Runs simplex iterations on the current cost row. `Ok(false)` means
    /// unbounded.
    fn optimize(&mut self, tol: T) -> Result<bool, LpError> {
        while let Some(col) = self.entering(tol) {
            match self.leaving(col) {
                Some(row) => self.pivot(row, col)?,
                None => return Ok(false),
            }
        }
        Ok(true)
    }

    fn set_cost(&mut self, costs: &[T]) {
        let w = self.cols + 1;
        self.cost = vec![T::zero(); w];
        self.cost[..costs.len()].copy_from_slice(costs);
        for r in 0..self.rows {
            let cb = if self.basis[r] < costs.len() {
                costs[self.basis[r]]
            } else {
                T::zero()
            };
            if cb != T::zero() {
                for c in 0..w {
                    self.cost[c] = self.cost[c] - cb * self.data[r * w + c];
                }
            }
        }
    }

    fn column_value(&self, col: usize) -> T {
        self.basis
            .iter()
            .position(|&b| b == col)
            .map_or(T::zero(), |r| self.rhs(r))
    }
}

/// Solves the LP with a deterministic pivot sequence.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    let n = lp.num_vars();
    let k = lp.num_rows();
    let tol = T::feasibility_tol();

    // Column layout: u (n) | w (n) | slack (k) | artificial (one per negative rhs row).
    let negative: Vec<usize> = (0..k).filter(|&i| lp.rhs[i] < T::zero()).collect();
    let n_art = negative.len();
    let cols = 2 * n + k + n_art;
    let width = cols + 1;
    let mut data = vec![T::zero(); k * width];
    let mut basis = vec![0; k];
    let mut art_of_row = vec![None; k];
    for (a, &i) in negative.iter().enumerate() {
        art_of_row[i] = Some(2 * n + k + a);
    }
    for i in 0..k {
        let sign = if lp.rhs[i] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        let row = &mut data[i * width..(i + 1) * width];
        for (j, &a) in lp.row(i).iter().enumerate() {
            row[j] = sign * a;
            row[n + j] = -sign * a;
        }
        row[2 * n + i] = sign;
        row[cols] = sign * lp.rhs[i];
        match art_of_row[i] {
            Some(a) => {
                row[a] = T::one();
                basis[i] = a;
            }
            None => basis[i] = 2 * n + i,
        }
    }

    let mut tab = Tableau {
        rows: k,
        cols,
        data,
        basis,
        cost: Vec::new(),
        allowed: vec![true; cols],
        pivots: 0,
    };

    if n_art > 0 {
        let mut phase1 = vec![T::zero(); cols];
        for c in phase1.iter_mut().skip(2 * n + k) {
            *c = T::one();
        }
        tab.set_cost(&phase1);
        tab.optimize(tol * T::lit(1e-3))?;
        let infeasibility = -tab.cost[cols];
        let scale = T::one() + lp.rhs.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if infeasibility > tol * scale {
            return Ok(LpSolution::infeasible());
        }
        // Drive zero-level artificials out of the basis.
        for r in 0..tab.rows {
            if tab.basis[r] >= 2 * n + k {
                if let Some(c) = (0..2 * n + k).find(|&c| tab.at(r, c).abs() > T::pivot_tol()) {
                    tab.pivot(r, c)?;
                }
            }
        }
        for c in 2 * n + k..cols {
            tab.allowed[c] = false;
        }
    }

    let mut phase2 = vec![T::zero(); cols];
    for j in 0..n {
        phase2[j] = lp.objective[j];
        phase2[n + j] = -lp.objective[j];
    }
    tab.set_cost(&phase2);
    let opt_tol =
        T::pivot_tol() * (T::one() + lp.objective.iter().fold(T::zero(), |m, v| m.max(v.abs())));
    if !tab.optimize(opt_tol)? {
        return Ok(LpSolution::unbounded());
    }

    // Bring every coordinate into the basis; at optimality both halves of a
    // nonbasic split pair have zero reduced cost, so this keeps the objective.
    for j in 0..n {
        let in_basis = tab.basis.iter().any(|&b| b == j || b == n + j);
        if in_basis {
            continue;
        }
        for col in [j, n + j] {
            if let Some(r) = tab.leaving(col) {
                tab.pivot(r, col)?;
                break;
            }
        }
    }

    let x: Vec<T> = (0..n)
        .map(|j| tab.column_value(j) - tab.column_value(n + j))
        .collect();
    let objective = lp.evaluate(&x);
    let tight = lp.tight_rows(&x, tol);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        tight,
    })
}

/// Exhaustive vertex-enumeration solver for tiny LPs, used as a test oracle.
///
/// Every `n`-subset of rows (plus a large bounding box) is solved as an
/// equality system; the best feasible basic solution wins. Unboundedness is
/// detected by doubling the box and checking whether the optimum moves.
pub fn vertex_enum_oracle<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>, LpError> {
    let n = lp.num_vars();
    let k = lp.num_rows();
    if n > 3 || k > 25 {
        return Err(LpError::OracleTooLarge { n, k });
    }
    let scale = lp.rhs.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let big = T::lit(1e6) * scale;
    let Some(first) = enumerate_with_box(lp, big) else {
        return Ok(LpSolution::infeasible());
    };
    let second = enumerate_with_box(lp, big + big).expect("larger box keeps feasibility");
    let gap = first.1 - second.1;
    if gap > T::lit(1e-6) * (T::one() + first.1.abs()) {
        return Ok(LpSolution::unbounded());
    }
    let x = first.0;
    let tight = lp.tight_rows(&x, T::feasibility_tol());
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: lp.evaluate(&x),
        x,
        tight,
    })
}

fn enumerate_with_box<T: Scalar>(lp: &LinearProgram<T>, big: T) -> Option<(Vec<T>, T)> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<T>, T)> = (0..lp.num_rows())
        .map(|i| (lp.row(i).to_vec(), lp.rhs[i]))
        .collect();
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        rows.push((e.clone(), big));
        e[j] = -T::one();
        rows.push((e, big));
    }
    let tol = T::feasibility_tol() * (T::one() + big.abs()) * T::lit(1e-3);
    let mut best: Option<(Vec<T>, T)> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<T>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<T> = idx.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            let feasible = rows.iter().all(|(r, rhs)| {
                let act: T = r.iter().zip(&x).map(|(&a, &v)| a * v).sum();
                act - *rhs <= tol
            });
            if feasible {
                let obj = lp.evaluate(&x);
                if best.as_ref().is_none_or(|(_, bo)| obj < *bo) {
                    best = Some((x, obj));
                }
            }
        }
        if !next_combination(&mut idx, rows.len()) {
            break;
        }
    }
    best
}

fn next_combination(idx: &mut [usize], total: usize) -> bool {
    let n = idx.len();
    let mut i = n;
    while i > 0 {
        i -= 1;
        if idx[i] < total - n + i {
            idx[i] += 1;
            for j in i + 1..n {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[p][col].abs() <= T::lit(1e-12) {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] = a[r][c] - f * a[col][c];
            }
            b[r] = b[r] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let s: T = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Rank of a set of rows (used to check the vertex property).
pub fn rank<T: Scalar>(rows: &[Vec<T>]) -> usize {
    let mut m: Vec<Vec<T>> = rows.to_vec();
    let Some(ncols) = m.first().map(|r| r.len()) else {
        return 0;
    };
    let mut rank = 0;
    for col in 0..ncols {
        let Some(p) =
            (rank..m.len()).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
        else {
            break;
        };
        if m[p][col].abs() <= T::lit(1e-9) {
            continue;
        }
        m.swap(rank, p);
        for r in rank + 1..m.len() {
            let f = m[r][col] / m[rank][col];
            for c in col..ncols {
                let v = m[rank][c];
                m[r][c] = m[r][c] - f * v;
            }
        }
        rank += 1;
    }
    rank
}
