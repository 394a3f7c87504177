//! The iteration engine: forward simulation, backward cut generation in
//! fine, coarse and semi-coarse flavours, cautious (oscillating) passes, and
//! lower/upper bound computation.
//!
//! The engine owns the per-stage cut pools and partitions and exposes the
//! individual passes; the `variants` module strings them into the published
//! algorithm variants. All passes share one state convention: `states[t-1]`
//! is the trial state of stage `t`, and the cut pool for stage `t` models
//! the expected cost-to-go seen from stage `t - 1`.
//!
//! Two pass families generate cuts:
//!
//! * Quick passes sweep backward once per trajectory, from the horizon to
//!   stage 2, passing each cut straight up the tree.
//! * Cautious passes oscillate at each stage boundary: re-solve stage `t`,
//!   regenerate stage-`t + 1` cuts, and only advance once no generated cut
//!   is violated at the current trial state.
//!
//! Coarse variants run against the partitions: a coarse forward pass walks
//! a sampled cluster path using member-averaged data (the aggregated
//! subproblem scaled to one scenario, which leaves states physically
//! meaningful and reduces to the fine forward pass under singleton
//! partitions), and coarse backward passes solve one aggregated subproblem
//! per cluster.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cuts::{cut_from_duals, initial_bounds, is_violated, kind_from_solves, Cut, CutKind, CutPool, StageSolve};
use crate::error::{Error, Result};
use crate::lp::{build_stage_subproblem, solve_lp, LpSolution, LpStatus};
use crate::model::{
    pick_by_weight, PathSampler, SamplePath, ScenarioLattice, SolverConfig, Stream,
};
use crate::partition::{coarse_tree_size, DualSignature, Partition};

/// States and costs visited by one forward pass.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Realization indices (or cluster indices for a coarse pass).
    pub path: SamplePath,
    /// Trial states; `states[t - 1]` belongs to stage `t`.
    pub states: Vec<DVector<f64>>,
    /// Immediate stage costs `c_t' x_t` (epigraph variable excluded).
    pub immediate_costs: Vec<f64>,
}

impl Trajectory {
    /// Total sampled cost `z(xi) = sum_t c_t' x_t`.
    pub fn total_cost(&self) -> f64 {
        self.immediate_costs.iter().sum()
    }
}

/// Lower bound and sampled upper-bound statistics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bounds {
    /// First-stage optimum against the current cut pools.
    pub lower: f64,
    /// Mean sampled policy cost.
    pub sample_mean: f64,
    /// Population variance of the sampled costs.
    pub sample_var: f64,
    /// `sample_mean + multiplier * sigma / sqrt(samples)`.
    pub statistical_upper: f64,
}

impl Bounds {
    /// Optimality gap estimate `statistical_upper - lower`.
    pub fn gap(&self) -> f64 {
        self.statistical_upper - self.lower
    }

    /// Termination predicate `statistical_upper - lower <= eps`.
    pub fn converged(&self, eps: f64) -> bool {
        self.gap() <= eps
    }
}

/// Cumulative work counters.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Counters {
    /// Single-scenario subproblem solves (weight-1 LPs, incl. stage 1).
    pub lp_solves_scenario: u64,
    /// Aggregated cluster subproblem solves.
    pub lp_solves_cluster: u64,
    pub cuts_fine: u64,
    pub cuts_coarse: u64,
    pub cuts_semicoarse: u64,
}

impl Counters {
    pub fn total_cuts(&self) -> u64 {
        self.cuts_fine + self.cuts_coarse + self.cuts_semicoarse
    }
}

/// Provenance record kept per appended cut.
#[derive(Clone, Debug, Serialize)]
pub struct CutAudit {
    pub iteration: u64,
    pub stage: usize,
    pub kind: CutKind,
    /// LP solves that went into this cut (clusters count once).
    pub subproblem_solves: usize,
    /// Weight-1 solves among `subproblem_solves`: the single-scenario LP
    /// work behind the cut. A fine cut uses one per realization; a
    /// partition-based cut strictly fewer, since at least one cluster of
    /// weight 2 or more stays aggregated.
    pub scenario_solves: usize,
    /// Cluster count of the stage partition when the cut was appended.
    pub partition_len: usize,
    /// Realization count of the stage.
    pub realization_count: usize,
}

/// Cut generation mode of a cautious pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutMode {
    /// Scenario subproblems, expectation cuts.
    Fine,
    /// Partition-based: coarse attempt, semi-coarse with refinement on
    /// failure.
    Partition,
}

/// Stage-importance label used by structured cut generation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageClass {
    /// Gets fine cuts every backward sweep.
    MoreImportant,
    /// Gets partition-based cuts (coarse, then semi-coarse).
    LessImportant,
}

/// One aggregated subproblem solution, kept for reuse by the semi-coarse
/// step after a failed coarse attempt.
#[derive(Clone, Debug)]
struct ClusterSolve {
    members: Vec<usize>,
    mass: f64,
    weight: usize,
    tech: DMatrix<f64>,
    rhs: DVector<f64>,
    eq_duals: DVector<f64>,
    ineq_duals: Vec<f64>,
}

/// Solver state for one lattice: cut pools, partitions, counters, streams.
pub struct Engine<'a> {
    lattice: &'a ScenarioLattice,
    config: SolverConfig,
    pools: Vec<CutPool>,
    partitions: Vec<Partition>,
    sampler: PathSampler,
    iteration: u64,
    current_lower: f64,
    counters: Counters,
    audit: Vec<CutAudit>,
}

impl<'a> Engine<'a> {
    /// Validate the inputs, seed each stage pool with its mean-value bound,
    /// and start from all-in-one partitions.
    pub fn new(lattice: &'a ScenarioLattice, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let violations = lattice.validate();
        if !violations.is_empty() {
            let joined = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Model(joined));
        }
        let bounds = initial_bounds(lattice)?;
        let pools = (2..=lattice.horizon())
            .map(|t| CutPool::new(t, bounds[t - 2]))
            .collect();
        let partitions = (2..=lattice.horizon())
            .map(|t| Partition::all_in_one(lattice.stage(t)))
            .collect();
        let sampler = PathSampler::new(config.rng_seed);
        Ok(Engine {
            lattice,
            config,
            pools,
            partitions,
            sampler,
            iteration: 0,
            current_lower: f64::NEG_INFINITY,
            counters: Counters::default(),
            audit: Vec::new(),
        })
    }

    pub fn lattice(&self) -> &'a ScenarioLattice {
        self.lattice
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Cut pools for stages `2..=T` in order.
    pub fn pools(&self) -> &[CutPool] {
        &self.pools
    }

    /// Partitions for stages `2..=T` in order.
    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn audit(&self) -> &[CutAudit] {
        &self.audit
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Last computed lower bound (`-inf` before the first computation).
    pub fn current_lower_bound(&self) -> f64 {
        self.current_lower
    }

    /// Relative size of the coarse tree under the current partitions.
    pub fn coarse_size(&self) -> f64 {
        coarse_tree_size(&self.partitions, self.lattice)
    }

    /// Cluster count per stage `2..=T`.
    pub fn partition_lens(&self) -> Vec<usize> {
        self.partitions.iter().map(Partition::len).collect()
    }

    /// Replace every partition by singletons (fully refined).
    pub fn refine_to_singletons(&mut self) {
        for (pos, p) in self.partitions.iter_mut().enumerate() {
            *p = Partition::singletons(self.lattice.stage(pos + 2));
        }
    }

    /// Advance the iteration counter and return the new number (1-based).
    pub fn advance_iteration(&mut self) -> u64 {
        self.iteration += 1;
        self.iteration
    }

    /// Training path for the current iteration and sample index.
    pub fn training_path(&self, sample: u64) -> SamplePath {
        self.sampler
            .path_indexed(self.lattice, Stream::Training, self.iteration, sample)
    }

    /// Cluster path through the coarse tree, drawn by cluster mass with the
    /// same keyed uniforms as [`Engine::training_path`]; under singleton
    /// partitions the two coincide index-for-index.
    pub fn coarse_training_path(&self, sample: u64) -> Vec<usize> {
        (2..=self.lattice.horizon())
            .map(|t| {
                let u = self
                    .sampler
                    .uniform_indexed(Stream::Training, self.iteration, sample, t);
                pick_by_weight(u, self.partitions[t - 2].clusters().iter().map(|c| c.mass))
            })
            .collect()
    }

    /// Absolute cut-violation threshold at the current bound scale.
    pub fn cut_eps(&self) -> f64 {
        let scale = if self.current_lower.is_finite() {
            self.current_lower.abs()
        } else {
            0.0
        };
        self.config.cut_violation_tolerance * (1.0 + scale)
    }

    /// Intercepts of the inequality rows a stage-`t` subproblem carries.
    fn alpha_column_for(&self, t: usize) -> Vec<f64> {
        if t < self.lattice.horizon() {
            self.pools[t - 1].alpha_column()
        } else {
            Vec::new()
        }
    }

    /// Solve one stage subproblem (scenario or aggregated) and account for
    /// it. Stage `t` carries the pool of stage `t + 1` unless terminal.
    fn solve_stage_lp(
        &mut self,
        t: usize,
        tech: &DMatrix<f64>,
        rhs: &DVector<f64>,
        weight: usize,
        incoming: &DVector<f64>,
    ) -> Result<LpSolution> {
        let stage = self.lattice.stage(t);
        let pool = if t < self.lattice.horizon() {
            Some(&self.pools[t - 1])
        } else {
            None
        };
        let lp = build_stage_subproblem(stage, tech, rhs, weight, incoming, pool)?;
        let sol = solve_lp(&lp)?;
        if weight == 1 {
            self.counters.lp_solves_scenario += 1;
        } else {
            self.counters.lp_solves_cluster += 1;
        }
        match sol.status {
            LpStatus::Optimal => Ok(sol),
            LpStatus::Infeasible => Err(Error::InfeasibleSubproblem { stage: t }),
            LpStatus::Unbounded => Err(Error::UnboundedSubproblem { stage: t }),
        }
    }

    /// Solve the first-stage problem; returns the state, its immediate cost
    /// and the full objective (immediate plus cost-to-go model).
    fn solve_first_stage(&mut self) -> Result<(DVector<f64>, f64, f64)> {
        let stage = self.lattice.stage(1);
        let r = stage.realizations[0].clone();
        let incoming = DVector::zeros(0);
        let sol = self.solve_stage_lp(1, &r.tech, &r.rhs, 1, &incoming)?;
        let x = DVector::from_column_slice(&sol.primal.as_slice()[..stage.n_vars()]);
        let immediate = stage.cost.dot(&x);
        Ok((x, immediate, sol.objective))
    }

    /// Optimal value of the first-stage problem with the current
    /// cost-to-go model: the lower bound. Nondecreasing across a run
    /// because pools only grow.
    pub fn lower_bound(&mut self) -> Result<f64> {
        let (_, _, objective) = self.solve_first_stage()?;
        self.current_lower = objective;
        Ok(objective)
    }

    /// Forward pass along a sampled scenario path.
    pub fn forward_pass(&mut self, path: &SamplePath) -> Result<Trajectory> {
        let (x1, c1, _) = self.solve_first_stage()?;
        let mut states = vec![x1];
        let mut immediate_costs = vec![c1];
        for t in 2..=self.lattice.horizon() {
            let stage = self.lattice.stage(t);
            let r = stage.realizations[path.realization(t)].clone();
            let incoming = states[t - 2].clone();
            let sol = self.solve_stage_lp(t, &r.tech, &r.rhs, 1, &incoming)?;
            let x = DVector::from_column_slice(&sol.primal.as_slice()[..stage.n_vars()]);
            immediate_costs.push(stage.cost.dot(&x));
            states.push(x);
        }
        Ok(Trajectory {
            path: path.clone(),
            states,
            immediate_costs,
        })
    }

    /// Forward pass through the coarse tree along a cluster path, using
    /// member-averaged cluster data so states keep their physical scale.
    pub fn forward_pass_coarse(&mut self, cluster_path: &[usize]) -> Result<Trajectory> {
        let (x1, c1, _) = self.solve_first_stage()?;
        let mut states = vec![x1];
        let mut immediate_costs = vec![c1];
        for t in 2..=self.lattice.horizon() {
            let stage = self.lattice.stage(t);
            let cluster = &self.partitions[t - 2].clusters()[cluster_path[t - 2]];
            let tech = cluster.mean_tech();
            let rhs = cluster.mean_rhs();
            let incoming = states[t - 2].clone();
            let sol = self.solve_stage_lp(t, &tech, &rhs, 1, &incoming)?;
            let x = DVector::from_column_slice(&sol.primal.as_slice()[..stage.n_vars()]);
            immediate_costs.push(stage.cost.dot(&x));
            states.push(x);
        }
        Ok(Trajectory {
            path: SamplePath::new(cluster_path.to_vec()),
            states,
            immediate_costs,
        })
    }

    /// Append a cut to its stage pool and account for it.
    fn append_cut(
        &mut self,
        t: usize,
        cut: Cut,
        subproblem_solves: usize,
        scenario_solves: usize,
    ) -> Result<()> {
        match cut.kind {
            CutKind::Fine => self.counters.cuts_fine += 1,
            CutKind::Coarse => self.counters.cuts_coarse += 1,
            CutKind::SemiCoarse => self.counters.cuts_semicoarse += 1,
        }
        self.audit.push(CutAudit {
            iteration: self.iteration,
            stage: t,
            kind: cut.kind,
            subproblem_solves,
            scenario_solves,
            partition_len: self.partitions[t - 2].len(),
            realization_count: self.lattice.stage(t).realizations.len(),
        });
        self.pools[t - 2].push(cut)
    }

    /// Fine expectation cut for stage `t` at a trial state: solve every
    /// realization and aggregate the duals.
    fn fine_candidate(&mut self, t: usize, incoming: &DVector<f64>) -> Result<Cut> {
        let stage = self.lattice.stage(t);
        let alpha_col = self.alpha_column_for(t);
        let mut sols = Vec::with_capacity(stage.realizations.len());
        for k in 0..stage.realizations.len() {
            let r = stage.realizations[k].clone();
            sols.push(self.solve_stage_lp(t, &r.tech, &r.rhs, 1, incoming)?);
        }
        let solves: Vec<StageSolve<'_>> = stage
            .realizations
            .iter()
            .zip(&sols)
            .map(|(r, s)| StageSolve {
                mass: r.probability,
                weight: 1,
                tech: &r.tech,
                rhs: &r.rhs,
                eq_duals: &s.eq_duals,
                ineq_duals: &s.ineq_duals,
            })
            .collect();
        cut_from_duals(
            t,
            &alpha_col,
            &solves,
            CutKind::Fine,
            self.iteration,
            self.partitions[t - 2].version(),
        )
    }

    /// Coarse cut candidate for stage `t`: one aggregated solve per cluster.
    /// Also returns the cluster solutions for semi-coarse reuse.
    fn coarse_candidate(
        &mut self,
        t: usize,
        incoming: &DVector<f64>,
    ) -> Result<(Cut, Vec<ClusterSolve>)> {
        let alpha_col = self.alpha_column_for(t);
        let clusters: Vec<_> = self.partitions[t - 2]
            .clusters()
            .iter()
            .map(|c| (c.members.clone(), c.mass, c.weight(), c.tech.clone(), c.rhs.clone()))
            .collect();
        let mut csols = Vec::with_capacity(clusters.len());
        for (members, mass, weight, tech, rhs) in clusters {
            let sol = self.solve_stage_lp(t, &tech, &rhs, weight, incoming)?;
            csols.push(ClusterSolve {
                members,
                mass,
                weight,
                tech,
                rhs,
                eq_duals: sol.eq_duals,
                ineq_duals: sol.ineq_duals,
            });
        }
        let solves: Vec<StageSolve<'_>> = csols
            .iter()
            .map(|c| StageSolve {
                mass: c.mass,
                weight: c.weight,
                tech: &c.tech,
                rhs: &c.rhs,
                eq_duals: &c.eq_duals,
                ineq_duals: &c.ineq_duals,
            })
            .collect();
        let kind = if csols.iter().all(|c| c.weight == 1) {
            CutKind::Fine
        } else {
            CutKind::Coarse
        };
        let cut = cut_from_duals(
            t,
            &alpha_col,
            &solves,
            kind,
            self.iteration,
            self.partitions[t - 2].version(),
        )?;
        Ok((cut, csols))
    }

    /// Quick fine backward pass: for `t = T..2`, append the fine cut at the
    /// trajectory's trial state unconditionally. Returns cuts added.
    pub fn backward_pass_fine(&mut self, trajectory: &Trajectory) -> Result<usize> {
        let mut added = 0;
        for t in (2..=self.lattice.horizon()).rev() {
            let incoming = trajectory.states[t - 2].clone();
            let cut = self.fine_candidate(t, &incoming)?;
            let solves = self.lattice.stage(t).realizations.len();
            self.append_cut(t, cut, solves, solves)?;
            added += 1;
        }
        Ok(added)
    }

    /// Quick coarse backward pass, gated by the violation test: the coarse
    /// cut is appended only when it improves the pool at the trial state.
    /// Returns cuts added and the stages whose candidate was not violated
    /// (refinement candidates).
    pub fn backward_pass_coarse(&mut self, trajectory: &Trajectory) -> Result<(usize, Vec<usize>)> {
        self.coarse_sweep(trajectory, false)
    }

    /// Quick coarse backward pass with unconditional append: one standard
    /// SDDP backward step of the coarse tree, used by the preprocessing
    /// phase. Returns cuts added.
    pub fn backward_pass_coarse_all(&mut self, trajectory: &Trajectory) -> Result<usize> {
        Ok(self.coarse_sweep(trajectory, true)?.0)
    }

    fn coarse_sweep(
        &mut self,
        trajectory: &Trajectory,
        always_append: bool,
    ) -> Result<(usize, Vec<usize>)> {
        let mut added = 0;
        let mut unviolated = Vec::new();
        for t in (2..=self.lattice.horizon()).rev() {
            let incoming = trajectory.states[t - 2].clone();
            let (cut, csols) = self.coarse_candidate(t, &incoming)?;
            if always_append || is_violated(&self.pools[t - 2], &incoming, &cut, self.cut_eps()) {
                let singles = csols.iter().filter(|c| c.weight == 1).count();
                self.append_cut(t, cut, csols.len(), singles)?;
                added += 1;
            } else {
                unviolated.push(t);
            }
        }
        Ok((added, unviolated))
    }

    /// Semi-coarse step at stage `t` after a failed coarse attempt: solve
    /// the clusters, then disaggregate cluster by cluster until a violated
    /// candidate appears. Returns cuts added (0 or 1).
    pub fn backward_pass_semicoarse(
        &mut self,
        t: usize,
        trajectory: &Trajectory,
    ) -> Result<usize> {
        let incoming = trajectory.states[t - 2].clone();
        let (_, csols) = self.coarse_candidate(t, &incoming)?;
        self.semicoarse_loop(t, &incoming, csols)
    }

    /// Disaggregation loop shared by the quick adaptive sweep and the
    /// cautious partition mode. Processes the (pre-refinement) clusters in
    /// index order: solve the members of the current cluster, refine it by
    /// dual signature, rebuild the candidate from scenario solutions for
    /// processed clusters plus the aggregated solutions for the rest, and
    /// stop at the first violated candidate. Refinements persist either
    /// way; the candidate is appended only if violated.
    fn semicoarse_loop(
        &mut self,
        t: usize,
        incoming: &DVector<f64>,
        csols: Vec<ClusterSolve>,
    ) -> Result<usize> {
        let stage = self.lattice.stage(t);
        let alpha_col = self.alpha_column_for(t);
        let eps_cut = self.cut_eps();
        // Scenario solutions accumulated over processed clusters, keyed by
        // realization index.
        let mut scenario: Vec<(usize, DVector<f64>, Vec<f64>)> = Vec::new();
        for ci in 0..csols.len() {
            if csols[ci].weight > 1 {
                let mut signatures = std::collections::BTreeMap::new();
                for &k in &csols[ci].members {
                    let r = stage.realizations[k].clone();
                    let sol = self.solve_stage_lp(t, &r.tech, &r.rhs, 1, incoming)?;
                    signatures.insert(
                        k,
                        DualSignature {
                            eq: sol.eq_duals.clone(),
                            ineq: sol.ineq_duals.clone(),
                        },
                    );
                    scenario.push((k, sol.eq_duals, sol.ineq_duals));
                }
                let max_norm = signatures
                    .values()
                    .map(DualSignature::norm)
                    .fold(0.0, f64::max);
                let eps_refine = self.config.refine_tolerance * (1.0 + max_norm);
                self.partitions[t - 2].refine_absolute(stage, &signatures, eps_refine)?;
            } else {
                // A singleton cluster's aggregated solve already is the
                // scenario solve.
                let c = &csols[ci];
                scenario.push((c.members[0], c.eq_duals.clone(), c.ineq_duals.clone()));
            }
            let mut solves: Vec<StageSolve<'_>> = scenario
                .iter()
                .map(|(k, eq, ineq)| {
                    let r = &stage.realizations[*k];
                    StageSolve {
                        mass: r.probability,
                        weight: 1,
                        tech: &r.tech,
                        rhs: &r.rhs,
                        eq_duals: eq,
                        ineq_duals: ineq,
                    }
                })
                .collect();
            for c in &csols[ci + 1..] {
                solves.push(StageSolve {
                    mass: c.mass,
                    weight: c.weight,
                    tech: &c.tech,
                    rhs: &c.rhs,
                    eq_duals: &c.eq_duals,
                    ineq_duals: &c.ineq_duals,
                });
            }
            let cut = cut_from_duals(
                t,
                &alpha_col,
                &solves,
                kind_from_solves(&solves),
                self.iteration,
                self.partitions[t - 2].version(),
            )?;
            if is_violated(&self.pools[t - 2], incoming, &cut, eps_cut) {
                let remaining = &csols[ci + 1..];
                let work = scenario.len() + remaining.len();
                let singles =
                    scenario.len() + remaining.iter().filter(|c| c.weight == 1).count();
                self.append_cut(t, cut, work, singles)?;
                return Ok(1);
            }
        }
        Ok(0)
    }

    /// Quick adaptive backward pass: per stage, try the coarse cut; on
    /// failure fall through to the semi-coarse step, reusing the cluster
    /// solutions. Returns cuts added.
    pub fn backward_pass_adaptive(&mut self, trajectory: &Trajectory) -> Result<usize> {
        let mut added = 0;
        for t in (2..=self.lattice.horizon()).rev() {
            added += self.adaptive_stage(t, &trajectory.states[t - 2].clone())?;
        }
        Ok(added)
    }

    fn adaptive_stage(&mut self, t: usize, incoming: &DVector<f64>) -> Result<usize> {
        let (cut, csols) = self.coarse_candidate(t, incoming)?;
        if is_violated(&self.pools[t - 2], incoming, &cut, self.cut_eps()) {
            let singles = csols.iter().filter(|c| c.weight == 1).count();
            self.append_cut(t, cut, csols.len(), singles)?;
            Ok(1)
        } else {
            self.semicoarse_loop(t, incoming, csols)
        }
    }

    /// Structured backward pass: fine cuts at more-important stages,
    /// adaptive partition-based cuts at less-important ones. `classes` is
    /// indexed by stage (`classes[t - 2]` for stage `t`).
    pub fn backward_pass_structured(
        &mut self,
        trajectory: &Trajectory,
        classes: &[StageClass],
    ) -> Result<usize> {
        if classes.len() != self.lattice.horizon() - 1 {
            return Err(Error::Dimension(format!(
                "{} stage classes for {} stages",
                classes.len(),
                self.lattice.horizon() - 1
            )));
        }
        let mut added = 0;
        for t in (2..=self.lattice.horizon()).rev() {
            let incoming = trajectory.states[t - 2].clone();
            match classes[t - 2] {
                StageClass::MoreImportant => {
                    let cut = self.fine_candidate(t, &incoming)?;
                    let solves = self.lattice.stage(t).realizations.len();
                    self.append_cut(t, cut, solves, solves)?;
                    added += 1;
                }
                StageClass::LessImportant => {
                    added += self.adaptive_stage(t, &incoming)?;
                }
            }
        }
        Ok(added)
    }

    /// Cautious pass over a sampled path: at each boundary `(t, t + 1)`,
    /// oscillate between generating stage-`t + 1` cuts at the current trial
    /// state and re-solving stage `t` against the grown pool, advancing
    /// only when no generated cut is violated. Errors with
    /// [`Error::CautiousCap`] if a boundary fails to settle within the
    /// configured cap. Returns cuts added.
    pub fn cautious_pass(&mut self, path: &SamplePath, mode: CutMode) -> Result<usize> {
        let horizon = self.lattice.horizon();
        let (x1, _, _) = self.solve_first_stage()?;
        let mut states: Vec<DVector<f64>> = vec![x1];
        let mut added_total = 0;
        for t in 1..horizon {
            let mut inner = 0usize;
            loop {
                let incoming = states[t - 1].clone();
                let added = match mode {
                    CutMode::Fine => {
                        let cut = self.fine_candidate(t + 1, &incoming)?;
                        if is_violated(&self.pools[t - 1], &incoming, &cut, self.cut_eps()) {
                            let solves = self.lattice.stage(t + 1).realizations.len();
                            self.append_cut(t + 1, cut, solves, solves)?;
                            1
                        } else {
                            0
                        }
                    }
                    CutMode::Partition => self.adaptive_stage(t + 1, &incoming)?,
                };
                added_total += added;
                if added == 0 {
                    break;
                }
                inner += 1;
                if inner > self.config.cautious_cap {
                    return Err(Error::CautiousCap {
                        boundary: t,
                        cap: self.config.cautious_cap,
                    });
                }
                // Inner forward step: stage t against the updated pool.
                let x = if t == 1 {
                    self.solve_first_stage()?.0
                } else {
                    let stage = self.lattice.stage(t);
                    let r = stage.realizations[path.realization(t)].clone();
                    let prev = states[t - 2].clone();
                    let sol = self.solve_stage_lp(t, &r.tech, &r.rhs, 1, &prev)?;
                    DVector::from_column_slice(&sol.primal.as_slice()[..stage.n_vars()])
                };
                states[t - 1] = x;
            }
            if t + 1 < horizon {
                let stage = self.lattice.stage(t + 1);
                let r = stage.realizations[path.realization(t + 1)].clone();
                let prev = states[t - 1].clone();
                let sol = self.solve_stage_lp(t + 1, &r.tech, &r.rhs, 1, &prev)?;
                states.push(DVector::from_column_slice(
                    &sol.primal.as_slice()[..stage.n_vars()],
                ));
            }
        }
        Ok(added_total)
    }

    /// Out-of-sample statistical upper bound from `sample_count` forward
    /// passes on the evaluation stream.
    pub fn statistical_upper_bound(&mut self, sample_count: usize) -> Result<Bounds> {
        if !self.current_lower.is_finite() {
            self.lower_bound()?;
        }
        let mut costs = Vec::with_capacity(sample_count);
        for j in 0..sample_count {
            let path = self
                .sampler
                .path_in(self.lattice, Stream::Evaluation, j as u64);
            costs.push(self.forward_pass(&path)?.total_cost());
        }
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = costs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / n;
        Ok(Bounds {
            lower: self.current_lower,
            sample_mean: mean,
            sample_var: var,
            statistical_upper: mean + self.config.confidence_multiplier * var.sqrt() / n.sqrt(),
        })
    }

    /// Exact policy evaluation: enumerate every scenario path with its
    /// probability instead of sampling. The sample mean is then the exact
    /// expected policy cost; the variance is the exact policy-cost variance.
    pub fn enumerated_bounds(&mut self, path_cap: u64) -> Result<Bounds> {
        if !self.current_lower.is_finite() {
            self.lower_bound()?;
        }
        let count = self.lattice.path_count();
        if count > path_cap as u128 {
            return Err(Error::TreeTooLarge {
                nodes: count,
                cap: path_cap,
            });
        }
        let horizon = self.lattice.horizon();
        let mut indices = vec![0usize; horizon - 1];
        let mut weighted = Vec::with_capacity(count as usize);
        loop {
            let prob: f64 = indices
                .iter()
                .enumerate()
                .map(|(pos, &k)| self.lattice.stage(pos + 2).realizations[k].probability)
                .product();
            let path = SamplePath::new(indices.clone());
            weighted.push((prob, self.forward_pass(&path)?.total_cost()));
            // Odometer increment over the per-stage realization counts.
            let mut pos = horizon - 1;
            loop {
                if pos == 0 {
                    break;
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.lattice.stage(pos + 2).realizations.len() {
                    break;
                }
                indices[pos] = 0;
                if pos == 0 {
                    break;
                }
            }
            if indices.iter().all(|&k| k == 0) {
                break;
            }
        }
        let mean: f64 = weighted.iter().map(|(p, z)| p * z).sum();
        let var: f64 = weighted.iter().map(|(p, z)| p * (z - mean) * (z - mean)).sum();
        let n = weighted.len() as f64;
        Ok(Bounds {
            lower: self.current_lower,
            sample_mean: mean,
            sample_var: var,
            statistical_upper: mean + self.config.confidence_multiplier * var.sqrt() / n.sqrt(),
        })
    }
}
