//! Linear programs of the shape the stagewise subproblems take, and a
//! deterministic solver for them.
//!
//! A [`LinearProgram`] is `min c'x` over `A x = b`, a list of `>=` rows
//! (cut rows in practice), per-variable lower bounds (default 0), and a set
//! of free variables (the epigraph variable `r` in practice). [`solve_lp`]
//! reduces this to standard form for the crate's two-phase simplex
//! solver.
//!
//! Cut pools grow without bound while only a handful of cuts are active at
//! any optimum, so the `>=` rows are activated lazily: solve with the rows
//! seen so far, add the most violated remaining row (or a row blocking an
//! unbounded ray), repeat. The duals reported for never-activated rows are
//! zero, which together with the active-row duals forms an optimal dual for
//! the full program.

use std::collections::BTreeSet;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::cuts::CutPool;
use crate::error::{Error, Result};
use crate::model::StageData;
use crate::simplex::{solve_standard, StandardOutcome};

/// `min objective'x` subject to `eq_matrix x = eq_rhs`, `coef'x >= rhs` for
/// each inequality row, `x_i >= var_lower_bounds[i]` except for free
/// variables, which are unrestricted (their lower bound entry is ignored).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    /// Inequality rows `(coefficients, rhs)` meaning `coef'x >= rhs`.
    pub ineq_rows: Vec<(DVector<f64>, f64)>,
    pub var_lower_bounds: DVector<f64>,
    pub free_vars: BTreeSet<usize>,
}

impl LinearProgram {
    /// Equality-constrained program with zero lower bounds and no free vars.
    pub fn new(objective: DVector<f64>, eq_matrix: DMatrix<f64>, eq_rhs: DVector<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            eq_matrix,
            eq_rhs,
            ineq_rows: Vec::new(),
            var_lower_bounds: DVector::zeros(n),
            free_vars: BTreeSet::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_eq_rows(&self) -> usize {
        self.eq_matrix.nrows()
    }

    /// Append `coef'x >= rhs`.
    pub fn push_ge_row(&mut self, coef: DVector<f64>, rhs: f64) {
        self.ineq_rows.push((coef, rhs));
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.n_vars();
        if self.eq_matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "equality matrix has {} columns for {} variables",
                self.eq_matrix.ncols(),
                n
            )));
        }
        if self.eq_rhs.len() != self.eq_matrix.nrows() {
            return Err(Error::Dimension(format!(
                "equality rhs length {} for {} rows",
                self.eq_rhs.len(),
                self.eq_matrix.nrows()
            )));
        }
        if self.var_lower_bounds.len() != n {
            return Err(Error::Dimension(format!(
                "lower-bound vector length {} for {} variables",
                self.var_lower_bounds.len(),
                n
            )));
        }
        for (i, (coef, _)) in self.ineq_rows.iter().enumerate() {
            if coef.len() != n {
                return Err(Error::Dimension(format!(
                    "inequality row {i} has {} coefficients for {n} variables",
                    coef.len()
                )));
            }
        }
        if let Some(&j) = self.free_vars.iter().next_back() {
            if j >= n {
                return Err(Error::Dimension(format!(
                    "free variable index {j} out of range for {n} variables"
                )));
            }
        }
        Ok(())
    }

    /// Write the program in the textual LP exchange format.
    pub fn write_lp_format(&self, out: &mut dyn Write) -> std::io::Result<()> {
        let term = |coef: f64, j: usize| format!("{} x{}", coef, j + 1);
        writeln!(out, "Minimize")?;
        let obj: Vec<String> = (0..self.n_vars())
            .filter(|&j| self.objective[j] != 0.0)
            .map(|j| term(self.objective[j], j))
            .collect();
        writeln!(
            out,
            " obj: {}",
            if obj.is_empty() { "0 x1".to_string() } else { obj.join(" + ") }
        )?;
        writeln!(out, "Subject To")?;
        for i in 0..self.n_eq_rows() {
            let row: Vec<String> = (0..self.n_vars())
                .filter(|&j| self.eq_matrix[(i, j)] != 0.0)
                .map(|j| term(self.eq_matrix[(i, j)], j))
                .collect();
            let lhs = if row.is_empty() { "0 x1".to_string() } else { row.join(" + ") };
            writeln!(out, " e{}: {} = {}", i + 1, lhs, self.eq_rhs[i])?;
        }
        for (i, (coef, rhs)) in self.ineq_rows.iter().enumerate() {
            let row: Vec<String> = (0..self.n_vars())
                .filter(|&j| coef[j] != 0.0)
                .map(|j| term(coef[j], j))
                .collect();
            let lhs = if row.is_empty() { "0 x1".to_string() } else { row.join(" + ") };
            writeln!(out, " c{}: {} >= {}", i + 1, lhs, rhs)?;
        }
        writeln!(out, "Bounds")?;
        for j in 0..self.n_vars() {
            if self.free_vars.contains(&j) {
                writeln!(out, " x{} free", j + 1)?;
            } else if self.var_lower_bounds[j] != 0.0 {
                writeln!(out, " x{} >= {}", j + 1, self.var_lower_bounds[j])?;
            }
        }
        writeln!(out, "End")
    }
}

/// Solve outcome classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution record. Primal and dual vectors are meaningful only for
/// [`LpStatus::Optimal`]; they are empty otherwise.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values per variable.
    pub primal: DVector<f64>,
    pub objective: f64,
    /// Duals of the equality rows.
    pub eq_duals: DVector<f64>,
    /// Duals of the inequality rows, nonnegative, one per row (zero for rows
    /// inactive at the optimum).
    pub ineq_duals: Vec<f64>,
}

impl LpSolution {
    fn non_optimal(status: LpStatus) -> Self {
        LpSolution {
            status,
            primal: DVector::zeros(0),
            objective: f64::NAN,
            eq_duals: DVector::zeros(0),
            ineq_duals: Vec::new(),
        }
    }
}

/// Solve a [`LinearProgram`] deterministically.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.check_shape()?;
    let n = lp.n_vars();
    let m_eq = lp.n_eq_rows();

    // Effective lower bounds: zero for free variables (handled by splitting).
    let lb: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|j| if lp.free_vars.contains(&j) { 0.0 } else { lp.var_lower_bounds[j] }),
    );
    let shift_cost: f64 = lp.objective.dot(&lb);

    // Active inequality rows, kept sorted for a canonical standardized form.
    let mut active: BTreeSet<usize> = BTreeSet::new();
    loop {
        let (matrix, rhs, cost, pos_col, neg_col) = standardize(lp, &lb, &active);
        match solve_standard(&matrix, &rhs, &cost)? {
            StandardOutcome::Infeasible => {
                // The active rows are a subset of the full program, so
                // infeasibility of the relaxation is conclusive.
                return Ok(LpSolution::non_optimal(LpStatus::Infeasible));
            }
            StandardOutcome::Unbounded { ray } => {
                let dir = recover(&ray, &pos_col, &neg_col, None);
                match most_negative_row(lp, &active, &dir, 1e-9) {
                    Some(row) => {
                        active.insert(row);
                    }
                    None => return Ok(LpSolution::non_optimal(LpStatus::Unbounded)),
                }
            }
            StandardOutcome::Optimal { x, duals, .. } => {
                let primal = recover(&x, &pos_col, &neg_col, Some(&lb));
                match most_violated_row(lp, &active, &primal) {
                    Some(row) => {
                        active.insert(row);
                    }
                    None => {
                        let eq_duals = duals.rows(0, m_eq).into_owned();
                        let mut ineq_duals = vec![0.0; lp.ineq_rows.len()];
                        for (pos, &row) in active.iter().enumerate() {
                            ineq_duals[row] = duals[m_eq + pos].max(0.0);
                        }
                        let objective = lp.objective.dot(&primal);
                        // Numerical guard, not a semantic check: the shifted
                        // standardized objective must agree with the
                        // recovered one.
                        debug_assert!(shift_cost.is_finite());
                        return Ok(LpSolution {
                            status: LpStatus::Optimal,
                            primal,
                            objective,
                            eq_duals,
                            ineq_duals,
                        });
                    }
                }
            }
        }
    }
}

/// Build the standard form for the current active set. Returns the matrix,
/// rhs, cost, and for each original variable its positive column and (for
/// free variables) negative column.
fn standardize(
    lp: &LinearProgram,
    lb: &DVector<f64>,
    active: &BTreeSet<usize>,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, Vec<usize>, Vec<Option<usize>>) {
    let n = lp.n_vars();
    let m_eq = lp.n_eq_rows();
    let m = m_eq + active.len();
    let n_free = lp.free_vars.len();
    let cols = n + n_free + active.len();

    let mut pos_col = vec![0usize; n];
    let mut neg_col = vec![None; n];
    let mut next = 0usize;
    for j in 0..n {
        pos_col[j] = next;
        next += 1;
    }
    for &j in &lp.free_vars {
        neg_col[j] = Some(next);
        next += 1;
    }

    let mut matrix = DMatrix::zeros(m, cols);
    let mut rhs = DVector::zeros(m);
    let mut cost = DVector::zeros(cols);

    for j in 0..n {
        cost[pos_col[j]] = lp.objective[j];
        if let Some(nc) = neg_col[j] {
            cost[nc] = -lp.objective[j];
        }
        for i in 0..m_eq {
            let a = lp.eq_matrix[(i, j)];
            if a != 0.0 {
                matrix[(i, pos_col[j])] = a;
                if let Some(nc) = neg_col[j] {
                    matrix[(i, nc)] = -a;
                }
            }
        }
    }
    for i in 0..m_eq {
        rhs[i] = lp.eq_rhs[i] - lp.eq_matrix.row(i).transpose().dot(lb);
    }
    for (pos, &row) in active.iter().enumerate() {
        let (coef, h) = &lp.ineq_rows[row];
        let i = m_eq + pos;
        for j in 0..n {
            if coef[j] != 0.0 {
                matrix[(i, pos_col[j])] = coef[j];
                if let Some(nc) = neg_col[j] {
                    matrix[(i, nc)] = -coef[j];
                }
            }
        }
        // Surplus column: coef'x - s = h.
        matrix[(i, n + n_free + pos)] = -1.0;
        rhs[i] = h - coef.dot(lb);
    }
    (matrix, rhs, cost, pos_col, neg_col)
}

/// Map a standardized vector back to original variables. With `lb` given the
/// result is a point (shift applied); without, a direction.
fn recover(
    z: &DVector<f64>,
    pos_col: &[usize],
    neg_col: &[Option<usize>],
    lb: Option<&DVector<f64>>,
) -> DVector<f64> {
    DVector::from_iterator(
        pos_col.len(),
        (0..pos_col.len()).map(|j| {
            let mut v = z[pos_col[j]];
            if let Some(nc) = neg_col[j] {
                v -= z[nc];
            }
            if let Some(lb) = lb {
                v += lb[j];
            }
            v
        }),
    )
}

/// Most violated inactive row at `x`, if any (ties to the lowest index).
fn most_violated_row(
    lp: &LinearProgram,
    active: &BTreeSet<usize>,
    x: &DVector<f64>,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (row, (coef, h)) in lp.ineq_rows.iter().enumerate() {
        if active.contains(&row) {
            continue;
        }
        let slack = coef.dot(x) - h;
        let tol = 1e-9 * (1.0 + h.abs());
        if slack < -tol {
            match best {
                Some((_, s)) if slack >= s => {}
                _ => best = Some((row, slack)),
            }
        }
    }
    best.map(|(row, _)| row)
}

/// Inactive row that most steeply blocks ray direction `d`, if any.
fn most_negative_row(
    lp: &LinearProgram,
    active: &BTreeSet<usize>,
    d: &DVector<f64>,
    tol: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (row, (coef, _)) in lp.ineq_rows.iter().enumerate() {
        if active.contains(&row) {
            continue;
        }
        let along = coef.dot(d);
        if along < -tol {
            match best {
                Some((_, a)) if along >= a => {}
                _ => best = Some((row, along)),
            }
        }
    }
    best.map(|(row, _)| row)
}

/// Verify primal feasibility, dual feasibility, complementary slackness, and
/// strong duality of an optimal solution. Returns the first failure as text.
pub fn check_optimality(lp: &LinearProgram, sol: &LpSolution) -> std::result::Result<(), String> {
    if sol.status != LpStatus::Optimal {
        return Err(format!("status {:?} is not optimal", sol.status));
    }
    let x = &sol.primal;
    let n = lp.n_vars();
    let obj_tol = 1e-7 * (1.0 + sol.objective.abs());

    let residual = &lp.eq_matrix * x - &lp.eq_rhs;
    let feas_tol = 1e-7 * (1.0 + lp.eq_rhs.amax().max(1.0));
    if residual.amax() > feas_tol {
        return Err(format!("equality residual {} exceeds {}", residual.amax(), feas_tol));
    }
    for (i, (coef, h)) in lp.ineq_rows.iter().enumerate() {
        let slack = coef.dot(x) - h;
        if slack < -1e-7 * (1.0 + h.abs()) {
            return Err(format!("inequality row {i} violated by {}", -slack));
        }
        let rho = sol.ineq_duals[i];
        if rho < 0.0 {
            return Err(format!("inequality dual {i} negative: {rho}"));
        }
        if rho * slack.abs() > obj_tol * (1.0 + rho) {
            return Err(format!(
                "complementary slackness broken on row {i}: rho {rho}, slack {slack}"
            ));
        }
    }
    let mut dual_obj = sol.eq_duals.dot(&lp.eq_rhs);
    for (i, (_, h)) in lp.ineq_rows.iter().enumerate() {
        dual_obj += sol.ineq_duals[i] * h;
    }
    for j in 0..n {
        let mut rc = lp.objective[j] - sol.eq_duals.dot(&lp.eq_matrix.column(j));
        for (i, (coef, _)) in lp.ineq_rows.iter().enumerate() {
            rc -= sol.ineq_duals[i] * coef[j];
        }
        if lp.free_vars.contains(&j) {
            if rc.abs() > obj_tol {
                return Err(format!("free variable {j} has nonzero reduced cost {rc}"));
            }
        } else {
            if rc < -obj_tol {
                return Err(format!("variable {j} has negative reduced cost {rc}"));
            }
            let gap = x[j] - lp.var_lower_bounds[j];
            if x[j] < lp.var_lower_bounds[j] - feas_tol {
                return Err(format!("variable {j} below its lower bound by {}", -gap));
            }
            if rc * gap > obj_tol * (1.0 + rc.abs()) {
                return Err(format!(
                    "complementary slackness broken on variable {j}: rc {rc}, gap {gap}"
                ));
            }
            dual_obj += rc * lp.var_lower_bounds[j];
        }
    }
    if (sol.objective - dual_obj).abs() > obj_tol {
        return Err(format!(
            "duality gap {} exceeds {obj_tol}",
            (sol.objective - dual_obj).abs()
        ));
    }
    Ok(())
}

/// Assemble the stagewise subproblem LP at a trial state.
///
/// `tech`/`rhs` are the (possibly cluster-aggregated) technology matrix and
/// right-hand side, and `weight` is the number of scenarios aggregated into
/// them (1 for a plain scenario). The program is
///
/// ```text
/// min c_t'x + r
/// s.t. A_t x = rhs - tech * incoming
///      r - beta_j'x >= weight * alpha_j      (one row per cut)
///      r >= weight * initial_bound           (always present)
///      x >= 0, r free,
/// ```
///
/// with the `r` variable and all its rows omitted when `cuts` is `None`
/// (terminal stage). Keeping the bound row alongside the cuts makes the LP
/// value agree exactly with the pool's pointwise-max evaluation, which in
/// turn keeps the first-stage bound monotone as cuts accumulate.
pub fn build_stage_subproblem(
    stage: &StageData,
    tech: &DMatrix<f64>,
    rhs: &DVector<f64>,
    weight: usize,
    incoming: &DVector<f64>,
    cuts: Option<&CutPool>,
) -> Result<LinearProgram> {
    let n = stage.n_vars();
    let m = stage.n_rows();
    if tech.nrows() != m || rhs.len() != m {
        return Err(Error::Dimension(format!(
            "stage {}: technology/rhs rows {}x{} against {m} stage rows",
            stage.index,
            tech.nrows(),
            rhs.len()
        )));
    }
    if tech.ncols() != incoming.len() {
        return Err(Error::Dimension(format!(
            "stage {}: incoming state length {} against {} technology columns",
            stage.index,
            incoming.len(),
            tech.ncols()
        )));
    }
    if weight == 0 {
        return Err(Error::Dimension(format!(
            "stage {}: aggregation weight must be positive",
            stage.index
        )));
    }

    let has_r = cuts.is_some();
    let cols = n + usize::from(has_r);
    let mut objective = DVector::zeros(cols);
    objective.rows_mut(0, n).copy_from(&stage.cost);
    let mut eq_matrix = DMatrix::zeros(m, cols);
    eq_matrix.view_mut((0, 0), (m, n)).copy_from(&stage.recourse);
    let eq_rhs = rhs - tech * incoming;

    let mut lp = LinearProgram::new(objective, eq_matrix, eq_rhs);
    if let Some(pool) = cuts {
        let r_col = n;
        lp.objective[r_col] = 1.0;
        lp.free_vars.insert(r_col);
        let w = weight as f64;
        for cut in pool.cuts() {
            if cut.gradient.len() != n {
                return Err(Error::Dimension(format!(
                    "stage {}: cut gradient length {} against {n} variables",
                    stage.index,
                    cut.gradient.len()
                )));
            }
            let mut coef = DVector::zeros(cols);
            coef.rows_mut(0, n).copy_from(&(-&cut.gradient));
            coef[r_col] = 1.0;
            lp.push_ge_row(coef, w * cut.intercept);
        }
        let mut coef = DVector::zeros(cols);
        coef[r_col] = 1.0;
        lp.push_ge_row(coef, w * pool.initial_bound());
    }
    Ok(lp)
}
