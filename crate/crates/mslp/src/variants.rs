//! The published algorithm variants as configurations over the engine.
//!
//! Seven variants share one iteration loop and differ only in how each
//! iteration generates cuts:
//!
//! * `sddp-qp` — standard SDDP, quick pass: sample a path, forward, one
//!   fine backward sweep.
//! * `sddp-cp` — standard SDDP, cautious pass: oscillate at every stage
//!   boundary until no fine cut is violated.
//! * `apqp` — adaptive partitions, quick pass: coarse cut first, on
//!   failure the semi-coarse step with dual-guided refinement.
//! * `apcp` — adaptive partitions, cautious pass.
//! * `apep` — exploratory preprocessing: run standard SDDP on the coarse
//!   tree until the bound stalls, refine over a sampled path by a cautious
//!   partition pass, and hand over to standard SDDP on the original
//!   lattice once the coarse tree grows past the size threshold `nu`.
//! * `iter` — iterative refinement: the preprocessing loop with `nu`
//!   pinned to 1 (the hand-over never triggers by size) and quick-pass
//!   refinement rounds.
//! * `spap` — structured adaptive partitions: stages classified once as
//!   more or less important get fine or partition-based cuts respectively.
//!
//! The comparison harness runs several variants on one instance under an
//! identical budget and seed and reports lower bounds at checkpoints
//! relative to the `sddp-qp` baseline. Runs are independent given the
//! immutable lattice, so callers may parallelize them; the harness itself
//! runs them sequentially for reproducible logs.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::{CutMode, Engine, StageClass};
use crate::error::{Error, Result};
use crate::io::{IterationRow, ProgressLog};
use crate::lp::{build_stage_subproblem, solve_lp, LpStatus};
use crate::model::{ScenarioLattice, SolverConfig};

/// Algorithm selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    SddpQp,
    SddpCp,
    Apep,
    Iter,
    Apqp,
    Apcp,
    Spap,
}

impl Variant {
    /// Every variant, in reporting order.
    pub const ALL: [Variant; 7] = [
        Variant::SddpQp,
        Variant::SddpCp,
        Variant::Apep,
        Variant::Iter,
        Variant::Apqp,
        Variant::Apcp,
        Variant::Spap,
    ];

    /// Kebab-case name used by files and flags.
    pub fn name(self) -> &'static str {
        match self {
            Variant::SddpQp => "sddp-qp",
            Variant::SddpCp => "sddp-cp",
            Variant::Apep => "apep",
            Variant::Iter => "iter",
            Variant::Apqp => "apqp",
            Variant::Apcp => "apcp",
            Variant::Spap => "spap",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown variant {s:?}; expected one of sddp-qp, sddp-cp, apep, iter, apqp, apcp, spap"
                ))
            })
    }
}

/// A variant plus everything needed to run it.
#[derive(Clone, Debug)]
pub struct VariantSpec {
    pub variant: Variant,
    pub config: SolverConfig,
    /// Explicit stage classes for `spap` (stages `2..=T` in order); when
    /// absent they are derived via [`classify_stages`].
    pub stage_classes: Option<Vec<StageClass>>,
}

impl VariantSpec {
    pub fn new(variant: Variant, config: SolverConfig) -> Self {
        VariantSpec {
            variant,
            config,
            stage_classes: None,
        }
    }
}

/// Outcome of the myopic stage-importance classification.
#[derive(Clone, Debug, Serialize)]
pub struct StageClassification {
    /// Class per stage, `classes[t - 2]` for stage `t`.
    pub classes: Vec<StageClass>,
    /// Resolved threshold `Z` (the median of the myopic costs when the
    /// config leaves it unset).
    pub threshold: f64,
    /// Myopic stage costs `z_t = sum_k z*(t, k)`, indexed like `classes`.
    pub myopic_costs: Vec<f64>,
}

/// Classify stages by myopic cost: solve every stage-`t` realization with
/// the incoming state forced to zero (empty reservoirs) and no cost-to-go
/// model, sum the optima into `z_t`, and label stage `t` more important
/// (wet) iff `z_t <= Z`. `threshold = None` selects the median of the
/// `z_t` values.
pub fn classify_stages(
    lattice: &ScenarioLattice,
    threshold: Option<f64>,
) -> Result<StageClassification> {
    let mut costs = Vec::with_capacity(lattice.horizon().saturating_sub(1));
    for t in 2..=lattice.horizon() {
        let stage = lattice.stage(t);
        let incoming = DVector::zeros(lattice.stage(t - 1).n_vars());
        let mut total = 0.0;
        for r in &stage.realizations {
            let lp = build_stage_subproblem(stage, &r.tech, &r.rhs, 1, &incoming, None)?;
            let sol = solve_lp(&lp)?;
            match sol.status {
                LpStatus::Optimal => total += sol.objective,
                LpStatus::Infeasible => return Err(Error::InfeasibleSubproblem { stage: t }),
                LpStatus::Unbounded => return Err(Error::UnboundedSubproblem { stage: t }),
            }
        }
        costs.push(total);
    }
    let z = threshold.unwrap_or_else(|| median(&costs));
    let classes = costs
        .iter()
        .map(|&c| {
            if c <= z {
                StageClass::MoreImportant
            } else {
                StageClass::LessImportant
            }
        })
        .collect();
    Ok(StageClassification {
        classes,
        threshold: z,
        myopic_costs: costs,
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Coarse,
    Final,
}

enum Round {
    Coarse,
    Refine,
    Final,
}

/// Run one variant to its time or iteration budget and log every
/// iteration. Exactly one of the budgets must be set; the run stops at
/// whichever is hit first. The final bounds come from fresh out-of-sample
/// forward passes (excluded from the logged totals).
pub fn run_variant(lattice: &ScenarioLattice, spec: &VariantSpec) -> Result<ProgressLog> {
    run_variant_trained(lattice, spec).map(|(log, _)| log)
}

/// [`run_variant`], additionally handing back the trained engine so the
/// caller can inspect the final cut pools and partitions.
pub fn run_variant_trained<'a>(
    lattice: &'a ScenarioLattice,
    spec: &VariantSpec,
) -> Result<(ProgressLog, Engine<'a>)> {
    let mut config = spec.config.clone();
    if spec.variant == Variant::Iter {
        // The hand-over by coarse-tree size can never trigger: the size
        // formula is bounded by 1.
        config.preprocess_threshold = 1.0;
    }
    if config.time_limit.is_none() && config.max_iterations.is_none() {
        return Err(Error::Config(
            "run_variant needs a time limit or an iteration budget".into(),
        ));
    }
    let classes = match spec.variant {
        Variant::Spap => Some(match &spec.stage_classes {
            Some(c) => {
                if c.len() != lattice.horizon() - 1 {
                    return Err(Error::Dimension(format!(
                        "{} stage classes for {} stages",
                        c.len(),
                        lattice.horizon() - 1
                    )));
                }
                c.clone()
            }
            None => classify_stages(lattice, config.importance_threshold)?.classes,
        }),
        _ => None,
    };

    let start = Instant::now();
    let mut engine = Engine::new(lattice, config.clone())?;
    let initial_lower = engine.lower_bound()?;
    let samples = config.sample_paths_per_iter as u64;
    let mut phase = Phase::Coarse;
    let mut window = vec![initial_lower];
    let mut preprocess_end = None;
    let mut rows: Vec<IterationRow> = Vec::new();

    loop {
        if let Some(cap) = config.max_iterations {
            if engine.iteration() >= cap {
                break;
            }
        }
        if let Some(limit) = config.time_limit {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        engine.advance_iteration();
        let round = match spec.variant {
            Variant::SddpQp => {
                quick_fine(&mut engine, samples)?;
                Round::Final
            }
            Variant::SddpCp => {
                cautious(&mut engine, samples, CutMode::Fine)?;
                Round::Final
            }
            Variant::Apqp => {
                quick_adaptive(&mut engine, samples)?;
                Round::Final
            }
            Variant::Apcp => {
                cautious(&mut engine, samples, CutMode::Partition)?;
                Round::Final
            }
            Variant::Spap => {
                let classes = classes.as_ref().expect("derived above");
                for j in 0..samples {
                    let path = engine.training_path(j);
                    let trajectory = engine.forward_pass(&path)?;
                    engine.backward_pass_structured(&trajectory, classes)?;
                }
                Round::Final
            }
            Variant::Apep | Variant::Iter => preprocessed_round(
                &mut engine,
                spec.variant,
                &config,
                samples,
                &mut phase,
                &mut preprocess_end,
                &window,
            )?,
        };
        let lower = engine.lower_bound()?;
        match round {
            Round::Coarse => window.push(lower),
            Round::Refine => {
                // The coarse tree changed; restart the stall window from
                // the refined bound.
                window.clear();
                window.push(lower);
            }
            Round::Final => {}
        }
        let counters = engine.counters();
        rows.push(IterationRow {
            iteration: engine.iteration(),
            wall_seconds: start.elapsed().as_secs_f64(),
            lower_bound: lower,
            cuts_fine: counters.cuts_fine,
            cuts_coarse: counters.cuts_coarse,
            cuts_semicoarse: counters.cuts_semicoarse,
            lp_solves_scenario: counters.lp_solves_scenario,
            lp_solves_cluster: counters.lp_solves_cluster,
            coarse_tree_size: engine.coarse_size(),
            partition_sizes: engine.partition_lens(),
        });
    }

    let totals = engine.counters();
    let final_bounds = engine.statistical_upper_bound(config.upper_bound_samples)?;
    let log = ProgressLog {
        variant: spec.variant,
        config,
        initial_lower,
        rows,
        totals,
        final_bounds,
        preprocess_end_iteration: preprocess_end,
        stage_classes: classes,
        final_partition_sizes: engine.partition_lens(),
        audit: engine.audit().to_vec(),
    };
    Ok((log, engine))
}

fn quick_fine(engine: &mut Engine<'_>, samples: u64) -> Result<()> {
    for j in 0..samples {
        let path = engine.training_path(j);
        let trajectory = engine.forward_pass(&path)?;
        engine.backward_pass_fine(&trajectory)?;
    }
    Ok(())
}

fn quick_adaptive(engine: &mut Engine<'_>, samples: u64) -> Result<()> {
    for j in 0..samples {
        let path = engine.training_path(j);
        let trajectory = engine.forward_pass(&path)?;
        engine.backward_pass_adaptive(&trajectory)?;
    }
    Ok(())
}

fn cautious(engine: &mut Engine<'_>, samples: u64, mode: CutMode) -> Result<()> {
    for j in 0..samples {
        let path = engine.training_path(j);
        engine.cautious_pass(&path, mode)?;
    }
    Ok(())
}

/// One iteration of the preprocessing state machine shared by `apep` and
/// `iter`: hand over to standard SDDP once the coarse tree is large
/// enough, otherwise run coarse-tree SDDP until the bound stalls and then
/// a refinement round. A refinement round that neither cuts nor splits
/// also hands over — the coarse phase could make no further progress.
fn preprocessed_round(
    engine: &mut Engine<'_>,
    variant: Variant,
    config: &SolverConfig,
    samples: u64,
    phase: &mut Phase,
    preprocess_end: &mut Option<u64>,
    window: &[f64],
) -> Result<Round> {
    if *phase == Phase::Coarse && engine.coarse_size() > config.preprocess_threshold {
        *phase = Phase::Final;
    }
    if *phase == Phase::Final {
        if preprocess_end.is_none() {
            *preprocess_end = Some(engine.iteration());
        }
        quick_fine(engine, samples)?;
        return Ok(Round::Final);
    }
    if stalled(window, config.stall_window, config.stall_tolerance) {
        let cuts_before = engine.counters().total_cuts();
        let clusters_before: usize = engine.partition_lens().iter().sum();
        match variant {
            Variant::Apep => cautious(engine, samples, CutMode::Partition)?,
            _ => quick_adaptive(engine, samples)?,
        }
        let unchanged = engine.counters().total_cuts() == cuts_before
            && engine.partition_lens().iter().sum::<usize>() == clusters_before;
        if unchanged {
            // Livelock guard: nothing to cut and nothing to split means
            // the preprocessing phase is exhausted.
            *phase = Phase::Final;
        }
        Ok(Round::Refine)
    } else {
        for j in 0..samples {
            let path = engine.coarse_training_path(j);
            let trajectory = engine.forward_pass_coarse(&path)?;
            engine.backward_pass_coarse_all(&trajectory)?;
        }
        Ok(Round::Coarse)
    }
}

/// Stall rule: at least `n` bounds since the window was (re)seeded, and
/// the gain over the last `n` of them within `tolerance * (1 + |bound|)`.
fn stalled(window: &[f64], n: usize, tolerance: f64) -> bool {
    if window.len() < n + 1 {
        return false;
    }
    let last = *window.last().expect("nonempty window");
    let reference = window[window.len() - 1 - n];
    last - reference <= tolerance * (1.0 + last.abs())
}

/// One variant's line in a comparison.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonRow {
    pub variant: Variant,
    pub iterations: u64,
    pub final_lower: f64,
    /// `100 * (LB - LB_qp) / LB_qp` at the end of the budget.
    pub pct_lb: f64,
    /// Lower bound at each wall-clock checkpoint.
    pub lower_at_time: Vec<f64>,
    pub pct_at_time: Vec<f64>,
    /// Lower bound at each iteration checkpoint.
    pub lower_at_iteration: Vec<f64>,
    pub pct_at_iteration: Vec<f64>,
    pub lp_solves_scenario: u64,
    pub lp_solves_cluster: u64,
    pub cuts_total: u64,
}

/// Output of the comparison harness: rows aligned with the retained logs.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub time_checkpoints: Vec<f64>,
    pub iteration_checkpoints: Vec<u64>,
    pub rows: Vec<ComparisonRow>,
    pub logs: Vec<ProgressLog>,
    /// Set when a run failed; rows then cover only the completed runs.
    pub aborted: Option<String>,
}

/// Run each variant on the same instance with the same config and seed and
/// tabulate lower bounds against the `sddp-qp` baseline, which is added
/// up front when missing. A failing run aborts the table; completed rows
/// are kept and the failure is recorded in `aborted`.
pub fn compare(
    lattice: &ScenarioLattice,
    variants: &[Variant],
    config: &SolverConfig,
    time_checkpoints: &[f64],
    iteration_checkpoints: &[u64],
) -> Result<Comparison> {
    let mut list = Vec::new();
    if !variants.contains(&Variant::SddpQp) {
        list.push(Variant::SddpQp);
    }
    list.extend_from_slice(variants);

    let mut logs = Vec::new();
    let mut aborted = None;
    for v in &list {
        match run_variant(lattice, &VariantSpec::new(*v, config.clone())) {
            Ok(log) => logs.push(log),
            Err(e) => {
                aborted = Some(format!("{v}: {e}"));
                break;
            }
        }
    }

    let baseline = logs
        .iter()
        .find(|l| l.variant == Variant::SddpQp)
        .cloned();
    let rows = match baseline {
        Some(base) => logs
            .iter()
            .map(|log| {
                let lower_at_time: Vec<f64> = time_checkpoints
                    .iter()
                    .map(|&c| log.lower_at_time(c))
                    .collect();
                let lower_at_iteration: Vec<f64> = iteration_checkpoints
                    .iter()
                    .map(|&c| log.lower_at_iteration(c))
                    .collect();
                ComparisonRow {
                    variant: log.variant,
                    iterations: log.rows.last().map_or(0, |r| r.iteration),
                    final_lower: log.final_lower(),
                    pct_lb: pct(log.final_lower(), base.final_lower()),
                    pct_at_time: time_checkpoints
                        .iter()
                        .zip(&lower_at_time)
                        .map(|(&c, &lb)| pct(lb, base.lower_at_time(c)))
                        .collect(),
                    lower_at_time,
                    pct_at_iteration: iteration_checkpoints
                        .iter()
                        .zip(&lower_at_iteration)
                        .map(|(&c, &lb)| pct(lb, base.lower_at_iteration(c)))
                        .collect(),
                    lower_at_iteration,
                    lp_solves_scenario: log.totals.lp_solves_scenario,
                    lp_solves_cluster: log.totals.lp_solves_cluster,
                    cuts_total: log.totals.total_cuts(),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(Comparison {
        time_checkpoints: time_checkpoints.to_vec(),
        iteration_checkpoints: iteration_checkpoints.to_vec(),
        rows,
        logs,
        aborted,
    })
}

/// Relative lower bound against the baseline, in percent.
fn pct(lb: f64, baseline: f64) -> f64 {
    if baseline.abs() < 1e-12 {
        0.0
    } else {
        100.0 * (lb - baseline) / baseline
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dep::{solve_dep, DEFAULT_NODE_CAP};
    use crate::hydro::{generate_hydro, HydroConfig};
    use crate::model::{Realization, StageData};
    use nalgebra::{dmatrix, dvector, DMatrix};

    /// Chain instance: stage 1 pins the state to 0; each later stage
    /// solves `min xp + 3 xm  s.t.  xp - xm = b - xp_prev` with the listed
    /// equiprobable `b` values. The positive and negative parts carry
    /// different costs, so scenarios with opposite signs of `b - xp_prev`
    /// have different duals.
    fn chain(stage_bs: &[Vec<f64>]) -> ScenarioLattice {
        let mut stages = vec![StageData {
            index: 1,
            cost: dvector![1.0, 1.0],
            recourse: dmatrix![1.0, -1.0],
            realizations: vec![Realization {
                tech: DMatrix::zeros(1, 0),
                rhs: dvector![0.0],
                probability: 1.0,
            }],
        }];
        for (pos, bs) in stage_bs.iter().enumerate() {
            let p = 1.0 / bs.len() as f64;
            stages.push(StageData {
                index: pos + 2,
                cost: dvector![1.0, 3.0],
                recourse: dmatrix![1.0, -1.0],
                realizations: bs
                    .iter()
                    .map(|&b| Realization {
                        tech: dmatrix![1.0, 0.0],
                        rhs: dvector![b],
                        probability: p,
                    })
                    .collect(),
            });
        }
        ScenarioLattice { stages }
    }

    fn budget(max_iterations: u64) -> SolverConfig {
        let mut config = SolverConfig::default();
        config.max_iterations = Some(max_iterations);
        config.upper_bound_samples = 20;
        config
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.to_string(), v.name());
        }
        assert!("sddp".parse::<Variant>().is_err());
    }

    #[test]
    fn every_variant_solves_the_deterministic_chain() {
        let lattice = chain(&[vec![1.0], vec![1.0]]);
        let exact = solve_dep(&lattice, DEFAULT_NODE_CAP).unwrap().objective;
        for v in Variant::ALL {
            let log = run_variant(&lattice, &VariantSpec::new(v, budget(6))).unwrap();
            let lower = log.final_lower();
            assert!(
                (lower - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "{v}: {lower} vs exact {exact}"
            );
            assert!(log.is_monotone(), "{v}: non-monotone log");
        }
    }

    #[test]
    fn cautious_variants_converge_on_the_stochastic_chain() {
        let lattice = chain(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let exact = solve_dep(&lattice, DEFAULT_NODE_CAP).unwrap().objective;
        for v in [Variant::SddpCp, Variant::Apcp] {
            let log = run_variant(&lattice, &VariantSpec::new(v, budget(12))).unwrap();
            assert!(
                (log.final_lower() - exact).abs() <= 1e-6 * exact.abs().max(1.0),
                "{v}: {} vs exact {exact}",
                log.final_lower()
            );
        }
    }

    #[test]
    fn apep_with_zero_threshold_is_sddp_qp() {
        let lattice = chain(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let mut config = budget(8);
        config.preprocess_threshold = 0.0;
        let apep = run_variant(&lattice, &VariantSpec::new(Variant::Apep, config.clone())).unwrap();
        config.preprocess_threshold = SolverConfig::default().preprocess_threshold;
        let qp = run_variant(&lattice, &VariantSpec::new(Variant::SddpQp, config)).unwrap();
        assert_eq!(apep.preprocess_end_iteration, Some(1));
        assert_eq!(apep.rows.len(), qp.rows.len());
        for (a, b) in apep.rows.iter().zip(&qp.rows) {
            assert_eq!(a.lower_bound, b.lower_bound);
            assert_eq!(a.lp_solves_scenario, b.lp_solves_scenario);
            assert_eq!(a.cuts_coarse, 0);
            assert_eq!(a.cuts_semicoarse, 0);
        }
    }

    #[test]
    fn spap_extreme_thresholds_reduce_to_the_baselines() {
        let lattice = chain(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let mut config = budget(8);
        config.importance_threshold = Some(f64::INFINITY);
        let all_fine =
            run_variant(&lattice, &VariantSpec::new(Variant::Spap, config.clone())).unwrap();
        let qp = run_variant(&lattice, &VariantSpec::new(Variant::SddpQp, budget(8))).unwrap();
        for (a, b) in all_fine.rows.iter().zip(&qp.rows) {
            assert_eq!(a.lower_bound, b.lower_bound, "Z = +inf must match sddp-qp");
        }
        assert!(all_fine
            .stage_classes
            .as_ref()
            .unwrap()
            .iter()
            .all(|c| *c == StageClass::MoreImportant));

        config.importance_threshold = Some(f64::NEG_INFINITY);
        let all_partition =
            run_variant(&lattice, &VariantSpec::new(Variant::Spap, config)).unwrap();
        let apqp = run_variant(&lattice, &VariantSpec::new(Variant::Apqp, budget(8))).unwrap();
        for (a, b) in all_partition.rows.iter().zip(&apqp.rows) {
            assert_eq!(a.lower_bound, b.lower_bound, "Z = -inf must match apqp");
        }
        assert!(all_partition
            .stage_classes
            .as_ref()
            .unwrap()
            .iter()
            .all(|c| *c == StageClass::LessImportant));
    }

    #[test]
    fn classification_follows_the_inflow_profile() {
        // Strictly ramping seasonal curve, deterministic inflows. With
        // turbine limits 1 and demand 3, the myopic cost of stage t is
        // K * (3 - 2 min(f, 1)) for seasonal factor f, so the wet
        // (cheap) stages are exactly the high-inflow ones.
        let mut config = HydroConfig::new(13, 2, 0);
        config.inflow_spread = 0.0;
        config.seasonal = (0..12).map(|m| 0.2 + 0.1 * m as f64).collect();
        let lattice = generate_hydro(&config).unwrap();
        let classification = classify_stages(&lattice, None).unwrap();
        let factor = |t: usize| 0.2 + 0.1 * ((t - 1) % 12) as f64;
        for (pos, cost) in classification.myopic_costs.iter().enumerate() {
            let f: f64 = factor(pos + 2);
            let expected = 2.0 * (3.0 - 2.0 * f.min(1.0));
            assert!(
                (cost - expected).abs() < 1e-6,
                "stage {}: {cost} vs {expected}",
                pos + 2
            );
        }
        // Sorted myopic costs: [2 x4, 2.4, 2.8, | 3.2, ..., 5.2]; the
        // median threshold 3 separates factors >= 0.8 from the rest.
        assert!((classification.threshold - 3.0).abs() < 1e-6);
        for (pos, class) in classification.classes.iter().enumerate() {
            let expected = if factor(pos + 2) >= 0.8 {
                StageClass::MoreImportant
            } else {
                StageClass::LessImportant
            };
            assert_eq!(*class, expected, "stage {}", pos + 2);
        }
    }

    #[test]
    fn apep_hands_over_when_the_coarse_tree_first_exceeds_nu() {
        let lattice = chain(&[vec![1.0, -1.0], vec![1.0, -1.0]]);
        let exact = solve_dep(&lattice, DEFAULT_NODE_CAP).unwrap().objective;
        let mut config = budget(40);
        config.preprocess_threshold = 0.6;
        config.stall_window = 2;
        let log = run_variant(&lattice, &VariantSpec::new(Variant::Apep, config)).unwrap();
        let end = log.preprocess_end_iteration.expect("must hand over") as usize;
        // All-in-one partitions start at size 0.5 <= 0.6; the hand-over
        // iteration is the first whose starting size exceeds the
        // threshold, i.e. right after the first splitting refinement.
        assert!(end >= 2);
        assert!(log.rows[end - 2].coarse_tree_size > 0.6);
        for row in &log.rows[..end - 2] {
            assert!(row.coarse_tree_size <= 0.6);
        }
        assert!(
            (log.final_lower() - exact).abs() <= 1e-6 * exact.abs().max(1.0),
            "{} vs exact {exact}",
            log.final_lower()
        );
    }

    #[test]
    fn iterative_refinement_saves_scenario_solves_on_clustered_scenarios() {
        // 40 realizations per stage, but only four distinct values: the
        // partitions collapse the stage problems to four clusters, so the
        // coarse tree solves the instance with cluster LPs while sddp-qp
        // grinds through all 40 scenario LPs per backward stage.
        let values = [-2.0, -0.5, 0.5, 2.0];
        let duplicated: Vec<f64> = (0..40).map(|k| values[k / 10]).collect();
        let lattice = chain(&vec![duplicated; 5]);
        let reduced = chain(&vec![values.to_vec(); 5]);
        let exact = solve_dep(&reduced, DEFAULT_NODE_CAP).unwrap().objective;
        assert!(exact > 0.0);

        let mut config = budget(60);
        config.stall_window = 2;
        config.rng_seed = 11;
        let qp = run_variant(&lattice, &VariantSpec::new(Variant::SddpQp, config.clone())).unwrap();
        let iter = run_variant(&lattice, &VariantSpec::new(Variant::Iter, config)).unwrap();
        for log in [&qp, &iter] {
            assert!(
                (log.final_lower() - exact).abs() <= 1e-6 * exact.abs(),
                "{}: {} vs exact {exact}",
                log.variant,
                log.final_lower()
            );
        }
        let target = exact - 0.01 * exact.abs();
        let solves_to_target = |log: &ProgressLog| {
            log.rows
                .iter()
                .find(|r| r.lower_bound >= target)
                .map(|r| r.lp_solves_scenario)
                .expect("target reached")
        };
        let qp_solves = solves_to_target(&qp);
        let iter_solves = solves_to_target(&iter);
        assert!(
            iter_solves < qp_solves,
            "iter used {iter_solves} scenario solves to reach 99%, sddp-qp {qp_solves}"
        );
        assert!(iter.totals.cuts_coarse + iter.totals.cuts_semicoarse > 0);
    }

    #[test]
    fn compare_adds_the_baseline_and_reports_zero_for_identical_runs() {
        let lattice = chain(&[vec![1.0], vec![1.0]]);
        let comparison = compare(
            &lattice,
            &[Variant::Apqp],
            &budget(6),
            &[],
            &[2, 6],
        )
        .unwrap();
        assert!(comparison.aborted.is_none());
        assert_eq!(comparison.rows.len(), 2);
        assert_eq!(comparison.rows[0].variant, Variant::SddpQp);
        assert_eq!(comparison.rows[1].variant, Variant::Apqp);
        // Deterministic instance: both variants converge to the optimum,
        // so the relative bounds vanish.
        assert!(comparison.rows[1].pct_lb.abs() < 1e-9);
        assert_eq!(comparison.rows[1].pct_at_iteration.len(), 2);
        assert!(comparison.rows[1].pct_at_iteration[1].abs() < 1e-9);
        assert_eq!(comparison.rows[0].pct_lb, 0.0);
    }

    #[test]
    fn run_variant_requires_a_budget() {
        let lattice = chain(&[vec![1.0]]);
        let mut config = SolverConfig::default();
        config.max_iterations = None;
        config.time_limit = None;
        let err = run_variant(&lattice, &VariantSpec::new(Variant::SddpQp, config)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_iteration_run_reports_the_initial_bound() {
        let lattice = chain(&[vec![1.0, -1.0]]);
        let log = run_variant(&lattice, &VariantSpec::new(Variant::SddpQp, budget(0))).unwrap();
        assert!(log.rows.is_empty());
        assert_eq!(log.final_lower(), log.initial_lower);
        assert!(log.final_bounds.statistical_upper >= log.final_bounds.lower - 1e-9);
        assert_eq!(log.totals.total_cuts(), 0);
    }
}
