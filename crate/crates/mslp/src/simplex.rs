//! Dense two-phase revised simplex on standard form.
//!
//! Solves `min c'w  s.t.  W w = b, w >= 0` and reports row duals. The LP
//! layer above reduces general instances (free variables, shifted bounds,
//! inequality rows) to this form.
//!
//! Pricing is deterministic Dantzig (most negative reduced cost, lowest index
//! on ties); after a long degenerate streak the solver switches to Bland's
//! rule, which guarantees finite termination. The basis inverse is kept
//! explicitly and refreshed from a fresh LU factorization every few dozen
//! pivots and before every extraction, so reported primals and duals come
//! from a clean factorization rather than accumulated eta updates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reduced-cost / pivot eligibility tolerance.
const TOL: f64 = 1e-9;
/// Degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: u32 = 256;
/// Pivots between basis refactorizations.
const REFACTOR_EVERY: u32 = 64;

/// Result of a standard-form solve.
#[derive(Clone, Debug)]
pub(crate) enum StandardOutcome {
    Optimal {
        /// Primal values per column of `W`.
        x: DVector<f64>,
        /// Row duals `y` with `y' = c_B' B^{-1}` in the original row
        /// orientation.
        duals: DVector<f64>,
    },
    Infeasible,
    Unbounded {
        /// Feasible ray direction per column of `W` with negative cost.
        ray: DVector<f64>,
    },
}

pub(crate) fn solve_standard(
    matrix: &DMatrix<f64>,
    rhs: &DVector<f64>,
    cost: &DVector<f64>,
) -> Result<StandardOutcome> {
    Simplex::new(matrix, rhs, cost).solve()
}

struct Simplex {
    /// Constraint matrix with rows flipped so the stored rhs is nonnegative.
    w: DMatrix<f64>,
    b: DVector<f64>,
    cost: DVector<f64>,
    flipped: Vec<bool>,
    m: usize,
    n: usize,
    /// Column index per row; artificial `i` is column `n + i`.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    bland: bool,
    degenerate_streak: u32,
    pivots_since_refactor: u32,
    iterations: u64,
    iteration_cap: u64,
}

impl Simplex {
    fn new(matrix: &DMatrix<f64>, rhs: &DVector<f64>, cost: &DVector<f64>) -> Self {
        let m = matrix.nrows();
        let n = matrix.ncols();
        let mut w = matrix.clone();
        let mut b = rhs.clone();
        let mut flipped = vec![false; m];
        for i in 0..m {
            if b[i] < 0.0 {
                flipped[i] = true;
                b[i] = -b[i];
                for j in 0..n {
                    w[(i, j)] = -w[(i, j)];
                }
            }
        }
        let basis: Vec<usize> = (0..m).map(|i| n + i).collect();
        let mut in_basis = vec![false; n + m];
        for &j in &basis {
            in_basis[j] = true;
        }
        Simplex {
            w,
            b: b.clone(),
            cost: cost.clone(),
            flipped,
            m,
            n,
            basis,
            in_basis,
            binv: DMatrix::identity(m, m),
            xb: b,
            bland: false,
            degenerate_streak: 0,
            pivots_since_refactor: 0,
            iterations: 0,
            iteration_cap: 20_000 + 200 * (m as u64 + n as u64),
        }
    }

    /// Column `j` of the flipped system (artificials are unit vectors).
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            self.w.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = 1.0;
            e
        }
    }

    fn solve(mut self) -> Result<StandardOutcome> {
        // Phase 1: minimize the artificial sum from the all-artificial basis.
        // Artificials never re-enter once they leave, in either phase.
        let n = self.n;
        let phase1_cost = move |j: usize| if j < n { 0.0 } else { 1.0 };
        match self.optimize(&phase1_cost)? {
            PhaseEnd::Optimal => {}
            PhaseEnd::Unbounded { .. } => {
                // The artificial sum is bounded below by zero; an unbounded
                // claim can only come from numerical breakdown.
                return Err(Error::LpNumerical(
                    "phase-1 objective reported unbounded".into(),
                ));
            }
        }
        let infeas: f64 = (0..self.m)
            .filter(|&i| self.basis[i] >= self.n)
            .map(|i| self.xb[i].max(0.0))
            .sum();
        let feas_tol = 1e-7 * (1.0 + self.b.amax());
        if infeas > feas_tol {
            return Ok(StandardOutcome::Infeasible);
        }
        self.drive_out_artificials()?;
        self.refactor()?;

        // Phase 2 on the real costs.
        let cost = self.cost.clone();
        let phase2_cost = move |j: usize| if j < n { cost[j] } else { 0.0 };
        let end = self.optimize(&phase2_cost)?;
        match end {
            PhaseEnd::Optimal => {
                self.refactor()?;
                let mut x = DVector::zeros(self.n);
                for i in 0..self.m {
                    if self.basis[i] < self.n {
                        x[self.basis[i]] = self.xb[i];
                    }
                }
                let cb = DVector::from_iterator(
                    self.m,
                    self.basis.iter().map(|&j| phase2_cost(j)),
                );
                let mut duals = self.binv.tr_mul(&cb);
                for i in 0..self.m {
                    if self.flipped[i] {
                        duals[i] = -duals[i];
                    }
                }
                Ok(StandardOutcome::Optimal { x, duals })
            }
            PhaseEnd::Unbounded { entering, u } => {
                let mut ray = DVector::zeros(self.n);
                ray[entering] = 1.0;
                for i in 0..self.m {
                    if self.basis[i] < self.n {
                        ray[self.basis[i]] = -u[i];
                    }
                }
                Ok(StandardOutcome::Unbounded { ray })
            }
        }
    }

    /// Pivot until no eligible entering column remains (or unboundedness).
    /// Only structural columns may enter; artificials only ever leave.
    fn optimize(&mut self, cost_of: &dyn Fn(usize) -> f64) -> Result<PhaseEnd> {
        loop {
            self.iterations += 1;
            if self.iterations > self.iteration_cap {
                return Err(Error::LpIterationLimit {
                    iterations: self.iteration_cap,
                });
            }
            let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| cost_of(j)));
            let y = self.binv.tr_mul(&cb);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let d = cost_of(j) - y.dot(&self.w.column(j));
                if d < -TOL {
                    if self.bland {
                        entering = Some((j, d));
                        break;
                    }
                    match entering {
                        Some((_, best)) if d >= best => {}
                        _ => entering = Some((j, d)),
                    }
                }
            }
            let Some((j_in, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let u = &self.binv * self.w.column(j_in);
            let Some(r) = self.ratio_test(&u) else {
                return Ok(PhaseEnd::Unbounded { entering: j_in, u });
            };
            self.pivot(r, j_in, &u)?;
        }
    }

    /// Leaving row for entering direction `u`, or `None` when unblocked.
    fn ratio_test(&self, u: &DVector<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if u[i] > TOL {
                let ratio = self.xb[i].max(0.0) / u[i];
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        let better = if tie {
                            if self.bland {
                                // Bland: lowest leaving variable index.
                                self.basis[i] < self.basis[bi]
                            } else {
                                // Stability: larger pivot magnitude.
                                u[i] > u[bi]
                            }
                        } else {
                            ratio < br
                        };
                        if better {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn pivot(&mut self, r: usize, j_in: usize, u: &DVector<f64>) -> Result<()> {
        let pivot = u[r];
        if pivot.abs() <= TOL {
            return Err(Error::LpNumerical(format!(
                "pivot element {pivot:.3e} too small"
            )));
        }
        let theta = self.xb[r].max(0.0) / pivot;
        if theta <= 1e-12 {
            self.degenerate_streak += 1;
            if self.degenerate_streak > DEGENERATE_STREAK {
                self.bland = true;
            }
        } else {
            self.degenerate_streak = 0;
        }

        let j_out = self.basis[r];
        self.in_basis[j_out] = false;
        self.in_basis[j_in] = true;
        self.basis[r] = j_in;

        let pivot_row = self.binv.row(r).into_owned();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let factor = u[i] / pivot;
            if factor != 0.0 {
                for c in 0..self.m {
                    self.binv[(i, c)] -= factor * pivot_row[c];
                }
                self.xb[i] -= factor * self.xb[r].max(0.0);
            }
        }
        for c in 0..self.m {
            self.binv[(r, c)] = pivot_row[c] / pivot;
        }
        self.xb[r] = theta;

        self.pivots_since_refactor += 1;
        if self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuild the basis inverse and basic solution from scratch.
    fn refactor(&mut self) -> Result<()> {
        if self.m == 0 {
            return Ok(());
        }
        let mut basis_matrix = DMatrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            basis_matrix.set_column(i, &self.column(j));
        }
        let inverse = basis_matrix
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::LpNumerical("singular basis matrix".into()))?;
        self.xb = &inverse * &self.b;
        self.binv = inverse;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    /// After phase 1, swap basic artificials for structural columns where a
    /// nonzero pivot exists. Rows with no such column are redundant; their
    /// artificial stays basic at zero and never moves again.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if self.basis[r] < self.n {
                continue;
            }
            let mut found = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let alpha: f64 = (0..self.m)
                    .map(|c| self.binv[(r, c)] * self.w[(c, j)])
                    .sum();
                if alpha.abs() > 1e-7 {
                    found = Some(j);
                    break;
                }
            }
            if let Some(j) = found {
                let u = &self.binv * self.column(j);
                self.pivot(r, j, &u)?;
            }
        }
        Ok(())
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded { entering: usize, u: DVector<f64> },
}
