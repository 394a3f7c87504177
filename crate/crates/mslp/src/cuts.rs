//! Cutting-plane models of the expected cost-to-go functions.
//!
//! A [`Cut`] for stage `t` is an affine minorant `q(x) = beta'x + alpha` of
//! the expected cost-to-go `Q_t(x)` seen from stage `t-1`. Pools are
//! append-only: refining a partition never invalidates earlier cuts, so cuts
//! are kept forever and the pool evaluation
//! `max(initial_bound, max_j beta_j'x + alpha_j)` can only grow pointwise.
//!
//! The `alpha` of a new cut folds in both the rhs term `b'lambda` and the
//! contribution of the cut rows that were active in the solved subproblem,
//! read off through `alpha_column` (the alphas of the next-stage pool, bound
//! row last). For cluster solves the within-cluster sum is already in the
//! aggregated data, so each solve enters the expectation with the averaged
//! weight `mass / cluster size` while its cut-row rhs carries the cluster
//! size — exactly the scaling the aggregated subproblem was built with.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpStatus};
use crate::model::ScenarioLattice;

/// How a cut was generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutKind {
    /// One subproblem per scenario.
    Fine,
    /// One subproblem per cluster of the current partition.
    Coarse,
    /// Mixed: processed clusters disaggregated, the rest aggregated.
    SemiCoarse,
}

impl std::fmt::Display for CutKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CutKind::Fine => "fine",
            CutKind::Coarse => "coarse",
            CutKind::SemiCoarse => "semi-coarse",
        })
    }
}

/// Affine minorant of one stage's expected cost-to-go.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    /// Stage whose cost-to-go this bounds (`2..=T`).
    pub stage: usize,
    /// Gradient `beta` in terms of the previous stage's variables.
    pub gradient: DVector<f64>,
    /// Intercept `alpha`.
    pub intercept: f64,
    pub kind: CutKind,
    /// Iteration that produced the cut.
    pub birth_iteration: u64,
    /// Version of the stage partition at generation time.
    pub partition_version: u64,
}

impl Cut {
    /// Cut value `beta'x + alpha` at a state.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.gradient.dot(x) + self.intercept
    }
}

/// Append-only cut collection for one stage, seeded with a constant lower
/// bound from the mean-value recursion.
#[derive(Clone, Debug)]
pub struct CutPool {
    stage: usize,
    initial_bound: f64,
    cuts: Vec<Cut>,
}

impl CutPool {
    pub fn new(stage: usize, initial_bound: f64) -> Self {
        CutPool {
            stage,
            initial_bound,
            cuts: Vec::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn initial_bound(&self) -> f64 {
        self.initial_bound
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    /// Append a cut after checking it belongs here and is well-formed.
    pub fn push(&mut self, cut: Cut) -> Result<()> {
        if cut.stage != self.stage {
            return Err(Error::Dimension(format!(
                "cut for stage {} pushed into pool for stage {}",
                cut.stage, self.stage
            )));
        }
        if let Some(first) = self.cuts.first() {
            if first.gradient.len() != cut.gradient.len() {
                return Err(Error::Dimension(format!(
                    "cut gradient length {} does not match pool's {}",
                    cut.gradient.len(),
                    first.gradient.len()
                )));
            }
        }
        if !cut.intercept.is_finite() || !cut.gradient.iter().all(|v| v.is_finite()) {
            return Err(Error::Model("non-finite cut coefficients".into()));
        }
        self.cuts.push(cut);
        Ok(())
    }

    /// Pointwise-max evaluation `max(initial_bound, max_j q_j(x))`.
    pub fn evaluate(&self, x: &DVector<f64>) -> f64 {
        self.cuts
            .iter()
            .map(|c| c.value(x))
            .fold(self.initial_bound, f64::max)
    }

    /// Intercepts of the subproblem's inequality rows in builder order:
    /// cut alphas, then the initial bound (the permanent bound row).
    pub fn alpha_column(&self) -> Vec<f64> {
        let mut col: Vec<f64> = self.cuts.iter().map(|c| c.intercept).collect();
        col.push(self.initial_bound);
        col
    }
}

/// True when the candidate improves the pool model at `x` by more than
/// `eps` (strictly).
pub fn is_violated(pool: &CutPool, x: &DVector<f64>, candidate: &Cut, eps: f64) -> bool {
    candidate.value(x) > pool.evaluate(x) + eps
}

/// Dual information of one solved subproblem entering an expectation cut.
#[derive(Clone, Copy, Debug)]
pub struct StageSolve<'a> {
    /// Probability mass: the realization's probability (scenario solve) or
    /// the sum over cluster members (cluster solve). Masses across one
    /// expectation must sum to 1.
    pub mass: f64,
    /// Number of scenarios aggregated into the solve (1 for a scenario).
    pub weight: usize,
    /// Technology matrix the subproblem was built with.
    pub tech: &'a DMatrix<f64>,
    /// Right-hand side the subproblem was built with.
    pub rhs: &'a DVector<f64>,
    /// Equality-row duals `lambda`.
    pub eq_duals: &'a DVector<f64>,
    /// Inequality-row duals `rho`, aligned with `alpha_column`.
    pub ineq_duals: &'a [f64],
}

/// Kind implied by a solve set's content: scenario solves alone make a fine
/// cut, aggregated solves alone a coarse one, and a mixture a semi-coarse
/// one. A cluster of weight 1 counts as a scenario solve — its subproblem is
/// one.
pub fn kind_from_solves(solves: &[StageSolve<'_>]) -> CutKind {
    let any_scenario = solves.iter().any(|s| s.weight == 1);
    let any_aggregated = solves.iter().any(|s| s.weight > 1);
    match (any_scenario, any_aggregated) {
        (true, true) => CutKind::SemiCoarse,
        (false, true) => CutKind::Coarse,
        _ => CutKind::Fine,
    }
}

/// Assemble the expectation cut
/// `beta = -Σ p̃ B'lambda`, `alpha = Σ p̃ (b'lambda + w Σ_j alpha_j rho_j)`
/// with `p̃ = mass / weight`, from subproblem duals all taken at one trial
/// state. `alpha_column` lists the inequality-row intercepts of the solved
/// subproblems (next-stage pool alphas, bound last); it is empty for
/// terminal-stage solves.
pub fn cut_from_duals(
    stage: usize,
    alpha_column: &[f64],
    solves: &[StageSolve<'_>],
    kind: CutKind,
    birth_iteration: u64,
    partition_version: u64,
) -> Result<Cut> {
    if solves.is_empty() {
        return Err(Error::Dimension("cut from an empty solve set".into()));
    }
    let mass_sum: f64 = solves.iter().map(|s| s.mass).sum();
    if (mass_sum - 1.0).abs() > 1e-9 {
        return Err(Error::Model(format!(
            "solve masses sum to {mass_sum}, expected 1"
        )));
    }
    let state_dim = solves[0].tech.ncols();
    let mut gradient = DVector::zeros(state_dim);
    let mut intercept = 0.0;
    for s in solves {
        if s.tech.ncols() != state_dim {
            return Err(Error::Dimension(format!(
                "technology column count {} does not match {}",
                s.tech.ncols(),
                state_dim
            )));
        }
        if s.ineq_duals.len() != alpha_column.len() {
            return Err(Error::Dimension(format!(
                "{} inequality duals against {} row intercepts",
                s.ineq_duals.len(),
                alpha_column.len()
            )));
        }
        if s.weight == 0 {
            return Err(Error::Dimension("zero aggregation weight".into()));
        }
        let p = s.mass / s.weight as f64;
        let w = s.weight as f64;
        gradient -= s.tech.tr_mul(s.eq_duals) * p;
        let cut_term: f64 = alpha_column
            .iter()
            .zip(s.ineq_duals)
            .map(|(a, r)| a * r)
            .sum();
        intercept += p * (s.rhs.dot(s.eq_duals) + w * cut_term);
    }
    Ok(Cut {
        stage,
        gradient,
        intercept,
        kind,
        birth_iteration,
        partition_version,
    })
}

/// Constant lower bounds on the expected cost-to-go functions, one per stage
/// `2..=T` (index `t - 2`), by backward recursion on the mean-value lattice
/// with the incoming state relaxed to a nonnegative decision:
///
/// ```text
/// bound_{T+1} = 0
/// bound_t = bound_{t+1} + min { c_t'x : A_t x + B̄_t x_prev = b̄_t, x, x_prev >= 0 }.
/// ```
///
/// Each stage value is bounded below by this constant as long as the
/// technology matrix is deterministic within each stage (true for the
/// generator family), because the LP value is convex in the rhs.
pub fn initial_bounds(lattice: &ScenarioLattice) -> Result<Vec<f64>> {
    let horizon = lattice.horizon();
    let mean = lattice.mean_value();
    let mut bounds = vec![0.0; horizon - 1];
    let mut tail = 0.0;
    for t in (2..=horizon).rev() {
        let stage = mean.stage(t);
        let r = &stage.realizations[0];
        let prev_vars = r.tech.ncols();
        let n = stage.n_vars();
        let m = stage.n_rows();
        let mut objective = DVector::zeros(prev_vars + n);
        objective.rows_mut(prev_vars, n).copy_from(&stage.cost);
        let mut eq = DMatrix::zeros(m, prev_vars + n);
        eq.view_mut((0, 0), (m, prev_vars)).copy_from(&r.tech);
        eq.view_mut((0, prev_vars), (m, n)).copy_from(&stage.recourse);
        let lp = LinearProgram::new(objective, eq, r.rhs.clone());
        let sol = solve_lp(&lp)?;
        match sol.status {
            LpStatus::Optimal => {
                tail += sol.objective;
                bounds[t - 2] = tail;
            }
            LpStatus::Unbounded => {
                return Err(Error::MeanValueBound {
                    stage: t,
                    kind: "unbounded",
                })
            }
            LpStatus::Infeasible => {
                return Err(Error::MeanValueBound {
                    stage: t,
                    kind: "infeasible",
                })
            }
        }
    }
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::build_stage_subproblem;
    use crate::model::{Realization, StageData};
    use nalgebra::{dmatrix, dvector};

    /// Stage with `min x+ + gamma x-  s.t.  x+ - x- = b - x_prev` recourse.
    fn absolute_stage(index: usize, gamma: f64, rhs_probs: &[(f64, f64)]) -> StageData {
        StageData {
            index,
            cost: dvector![1.0, gamma],
            recourse: dmatrix![1.0, -1.0],
            realizations: rhs_probs
                .iter()
                .map(|&(b, p)| Realization {
                    tech: dmatrix![1.0],
                    rhs: dvector![b],
                    probability: p,
                })
                .collect(),
        }
    }

    #[test]
    fn expectation_cut_from_symmetric_scenarios() {
        // Terminal stage, b in {+1, -1} equiprobable, gamma = 3, trial state
        // 0. Scenario duals are 1 and -3, so beta = 1 and alpha = 2, and the
        // cut supports the expected value at the trial state.
        let stage = absolute_stage(2, 3.0, &[(1.0, 0.5), (-1.0, 0.5)]);
        let incoming = dvector![0.0];
        let mut solves = Vec::new();
        let mut duals = Vec::new();
        let mut expected = 0.0;
        for r in &stage.realizations {
            let lp = build_stage_subproblem(&stage, &r.tech, &r.rhs, 1, &incoming, None).unwrap();
            let sol = solve_lp(&lp).unwrap();
            assert_eq!(sol.status, LpStatus::Optimal);
            expected += r.probability * sol.objective;
            duals.push((sol.eq_duals, sol.ineq_duals));
        }
        for (r, (eq, ineq)) in stage.realizations.iter().zip(&duals) {
            solves.push(StageSolve {
                mass: r.probability,
                weight: 1,
                tech: &r.tech,
                rhs: &r.rhs,
                eq_duals: eq,
                ineq_duals: ineq,
            });
        }
        let cut = cut_from_duals(2, &[], &solves, CutKind::Fine, 0, 0).unwrap();
        assert!((cut.gradient[0] - 1.0).abs() < 1e-9);
        assert!((cut.intercept - 2.0).abs() < 1e-9);
        // Supporting at the trial state: cut value equals the expectation.
        assert!((cut.value(&incoming) - expected).abs() < 1e-9);
        assert!((expected - 2.0).abs() < 1e-9);
    }

    #[test]
    fn pool_evaluation_is_pointwise_max() {
        // Supporting planes of max(-x, x-2, 2x-5): at the breakpoints x = 1
        // and x = 3 the pool reproduces the function values -1 and 1.
        let mut pool = CutPool::new(2, -100.0);
        for (beta, alpha) in [(-1.0, 0.0), (1.0, -2.0), (2.0, -5.0)] {
            pool.push(Cut {
                stage: 2,
                gradient: dvector![beta],
                intercept: alpha,
                kind: CutKind::Fine,
                birth_iteration: 0,
                partition_version: 0,
            })
            .unwrap();
        }
        assert_eq!(pool.evaluate(&dvector![1.0]), -1.0);
        assert_eq!(pool.evaluate(&dvector![3.0]), 1.0);
    }

    #[test]
    fn empty_pool_evaluates_to_bound_and_any_higher_cut_violates() {
        let pool = CutPool::new(2, 5.0);
        assert_eq!(pool.evaluate(&dvector![7.0]), 5.0);
        let candidate = Cut {
            stage: 2,
            gradient: dvector![0.0],
            intercept: 5.5,
            kind: CutKind::Fine,
            birth_iteration: 0,
            partition_version: 0,
        };
        assert!(is_violated(&pool, &dvector![7.0], &candidate, 1e-6));
        // Equality within tolerance is not a violation (strict test).
        let equal = Cut {
            intercept: 5.0,
            ..candidate.clone()
        };
        assert!(!is_violated(&pool, &dvector![7.0], &equal, 1e-6));
    }

    #[test]
    fn pool_rejects_wrong_stage_and_bad_numbers() {
        let mut pool = CutPool::new(2, 0.0);
        let cut = Cut {
            stage: 3,
            gradient: dvector![1.0],
            intercept: 0.0,
            kind: CutKind::Fine,
            birth_iteration: 0,
            partition_version: 0,
        };
        assert!(pool.push(cut.clone()).is_err());
        let nan = Cut {
            stage: 2,
            intercept: f64::NAN,
            ..cut
        };
        assert!(pool.push(nan).is_err());
    }

    #[test]
    fn masses_must_sum_to_one() {
        let tech = dmatrix![1.0];
        let rhs = dvector![1.0];
        let eq = dvector![1.0];
        let solve = StageSolve {
            mass: 0.6,
            weight: 1,
            tech: &tech,
            rhs: &rhs,
            eq_duals: &eq,
            ineq_duals: &[],
        };
        assert!(cut_from_duals(2, &[], &[solve], CutKind::Fine, 0, 0).is_err());
    }

    fn two_stage_lattice(gamma: f64, rhs_probs: &[(f64, f64)]) -> ScenarioLattice {
        ScenarioLattice {
            stages: vec![
                StageData {
                    index: 1,
                    cost: dvector![0.0],
                    recourse: dmatrix![1.0],
                    realizations: vec![Realization {
                        tech: DMatrix::zeros(1, 0),
                        rhs: dvector![1.0],
                        probability: 1.0,
                    }],
                },
                absolute_stage(2, gamma, rhs_probs),
            ],
        }
    }

    #[test]
    fn mean_value_bound_with_free_incoming_state() {
        // Stage-2 rhs in {0, 2}: the mean problem has rhs 1, and choosing
        // x_prev = 1 zeroes the recourse cost, so the seeded bound is 0.
        let lat = two_stage_lattice(3.0, &[(0.0, 0.5), (2.0, 0.5)]);
        let bounds = initial_bounds(&lat).unwrap();
        assert_eq!(bounds.len(), 1);
        assert!(bounds[0].abs() < 1e-9);
    }

    #[test]
    fn mean_value_bound_positive_when_state_cannot_help() {
        // B = 0 decouples the stages: stage-2 cost is pinned at b_mean = 5.
        let mut lat = two_stage_lattice(1.0, &[(4.0, 0.5), (6.0, 0.5)]);
        lat.stages[1].cost = dvector![1.0, 1.0];
        for r in &mut lat.stages[1].realizations {
            r.tech = dmatrix![0.0];
        }
        let bounds = initial_bounds(&lat).unwrap();
        assert!((bounds[0] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_mean_value_aborts() {
        let mut lat = two_stage_lattice(1.0, &[(1.0, 1.0)]);
        lat.stages[1].cost = dvector![1.0, -2.0];
        let err = initial_bounds(&lat).unwrap_err();
        assert!(err.to_string().contains("unbounded"));
    }

    #[test]
    fn subproblem_shapes_with_and_without_pool() {
        let stage = absolute_stage(2, 2.0, &[(1.0, 1.0)]);
        let r = &stage.realizations[0];
        let incoming = dvector![0.5];

        // Terminal: no epigraph variable, no rows.
        let terminal = build_stage_subproblem(&stage, &r.tech, &r.rhs, 1, &incoming, None).unwrap();
        assert_eq!(terminal.n_vars(), 2);
        assert!(terminal.ineq_rows.is_empty());
        assert!(terminal.free_vars.is_empty());

        // Empty pool: r present, only the bound row, r settles on the bound.
        let pool = CutPool::new(3, 4.0);
        let lp = build_stage_subproblem(&stage, &r.tech, &r.rhs, 1, &incoming, Some(&pool)).unwrap();
        assert_eq!(lp.n_vars(), 3);
        assert_eq!(lp.ineq_rows.len(), 1);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[2] - 4.0).abs() < 1e-9);

        // Cluster weight scales cut and bound rows.
        let mut pool = CutPool::new(3, 4.0);
        pool.push(Cut {
            stage: 3,
            gradient: dvector![0.0, 0.0],
            intercept: 6.0,
            kind: CutKind::Fine,
            birth_iteration: 0,
            partition_version: 0,
        })
        .unwrap();
        let lp = build_stage_subproblem(&stage, &r.tech, &r.rhs, 3, &incoming, Some(&pool)).unwrap();
        assert_eq!(lp.ineq_rows.len(), 2);
        assert_eq!(lp.ineq_rows[0].1, 18.0);
        assert_eq!(lp.ineq_rows[1].1, 12.0);
    }

    #[test]
    fn alpha_column_lists_cuts_then_bound() {
        let mut pool = CutPool::new(2, -1.5);
        pool.push(Cut {
            stage: 2,
            gradient: dvector![1.0],
            intercept: 3.0,
            kind: CutKind::Coarse,
            birth_iteration: 1,
            partition_version: 2,
        })
        .unwrap();
        assert_eq!(pool.alpha_column(), vec![3.0, -1.5]);
    }
}
