//! Problem data for multistage stochastic linear programs.
//!
//! A problem is a scenario lattice: one [`StageData`] per stage `t = 1..=T`,
//! each holding the fixed recourse matrix `A_t` and cost `c_t` plus a finite
//! set of [`Realization`]s `(B_{t,k}, b_{t,k}, p_{t,k})`. Uncertainty is
//! stagewise independent, so the lattice is the whole tree: any path through
//! the per-stage realization sets is a scenario. Stage 1 is deterministic
//! (exactly one realization) and the stagewise subproblem reads
//!
//! ```text
//! min c_t'x_t + (cost-to-go)   s.t.   A_t x_t = b_{t,k} - B_{t,k} x_{t-1},  x_t >= 0.
//! ```
//!
//! Modeling assumptions enforced here rather than discovered later:
//! `A_t`, `c_t` fixed per stage (only `B`, `b` vary across realizations),
//! probabilities positive and summing to one, and all entries finite.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One realization `(B_{t,k}, b_{t,k})` of the stage-`t` random data, with its
/// probability. `tech` has one column per *previous*-stage variable (zero
/// columns at stage 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    /// Technology matrix `B_{t,k}`, `n_rows x n_vars(t-1)`.
    pub tech: DMatrix<f64>,
    /// Right-hand side `b_{t,k}`, length `n_rows`.
    pub rhs: DVector<f64>,
    /// Probability in `(0, 1]`.
    pub probability: f64,
}

/// Per-stage fixed data plus the realization set.
#[derive(Clone, Debug, PartialEq)]
pub struct StageData {
    /// 1-based stage index.
    pub index: usize,
    /// Stage cost vector `c_t`.
    pub cost: DVector<f64>,
    /// Recourse matrix `A_t`, `n_rows x n_vars`.
    pub recourse: DMatrix<f64>,
    /// Realizations of `(B, b)`; exactly one at stage 1.
    pub realizations: Vec<Realization>,
}

impl StageData {
    /// Number of decision variables at this stage.
    pub fn n_vars(&self) -> usize {
        self.recourse.ncols()
    }

    /// Number of equality rows at this stage.
    pub fn n_rows(&self) -> usize {
        self.recourse.nrows()
    }

    /// Probability-weighted mean of the realizations `(Σ p_k B_k, Σ p_k b_k)`.
    pub fn mean_realization(&self) -> Realization {
        let mut tech = DMatrix::zeros(
            self.recourse.nrows(),
            self.realizations
                .first()
                .map_or(0, |r| r.tech.ncols()),
        );
        let mut rhs = DVector::zeros(self.n_rows());
        for r in &self.realizations {
            tech += &r.tech * r.probability;
            rhs += &r.rhs * r.probability;
        }
        Realization {
            tech,
            rhs,
            probability: 1.0,
        }
    }
}

/// A well-formedness violation found by [`ScenarioLattice::validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// Stage the violation refers to; 0 for lattice-level problems.
    pub stage: usize,
    /// Human-readable description.
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.stage == 0 {
            write!(f, "lattice: {}", self.message)
        } else {
            write!(f, "stage {}: {}", self.stage, self.message)
        }
    }
}

/// The full problem: stages `1..=T` in order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioLattice {
    pub stages: Vec<StageData>,
}

impl ScenarioLattice {
    /// Horizon `T`.
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// Stage data by 1-based index. Panics on an out-of-range stage; stage
    /// indices are structural, not user input, by the time this is called.
    pub fn stage(&self, t: usize) -> &StageData {
        &self.stages[t - 1]
    }

    /// Collect every well-formedness violation. An empty report means the
    /// lattice satisfies all structural rules.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |stage: usize, message: String| out.push(Violation { stage, message });

        if self.stages.len() < 2 {
            push(0, format!("horizon must be at least 2, got {}", self.stages.len()));
        }
        for (pos, stage) in self.stages.iter().enumerate() {
            let t = pos + 1;
            if stage.index != t {
                push(t, format!("stage index {} does not match position {t}", stage.index));
            }
            if stage.cost.len() != stage.recourse.ncols() {
                push(
                    t,
                    format!(
                        "cost length {} != recourse column count {}",
                        stage.cost.len(),
                        stage.recourse.ncols()
                    ),
                );
            }
            if stage.realizations.is_empty() {
                push(t, "no realizations".to_string());
                continue;
            }
            if t == 1 && stage.realizations.len() != 1 {
                push(
                    t,
                    format!(
                        "stage 1 must be deterministic (1 realization), got {}",
                        stage.realizations.len()
                    ),
                );
            }
            let prev_vars = if t == 1 { 0 } else { self.stages[pos - 1].n_vars() };
            let mut prob_sum = 0.0;
            for (k, r) in stage.realizations.iter().enumerate() {
                if r.rhs.len() != stage.n_rows() {
                    push(
                        t,
                        format!(
                            "realization {}: rhs length {} != row count {}",
                            k + 1,
                            r.rhs.len(),
                            stage.n_rows()
                        ),
                    );
                }
                if r.tech.nrows() != stage.n_rows() || r.tech.ncols() != prev_vars {
                    push(
                        t,
                        format!(
                            "realization {}: technology matrix is {}x{}, expected {}x{}",
                            k + 1,
                            r.tech.nrows(),
                            r.tech.ncols(),
                            stage.n_rows(),
                            prev_vars
                        ),
                    );
                }
                if !(r.probability > 0.0 && r.probability <= 1.0) {
                    push(
                        t,
                        format!("realization {}: probability {} outside (0, 1]", k + 1, r.probability),
                    );
                }
                prob_sum += r.probability;
                let finite = r.tech.iter().all(|v| v.is_finite())
                    && r.rhs.iter().all(|v| v.is_finite());
                if !finite {
                    push(t, format!("realization {}: non-finite entry", k + 1));
                }
            }
            if (prob_sum - 1.0).abs() > 1e-9 {
                push(t, format!("probabilities sum to {prob_sum}, expected 1"));
            }
            let finite = stage.cost.iter().all(|v| v.is_finite())
                && stage.recourse.iter().all(|v| v.is_finite());
            if !finite {
                push(t, "non-finite entry in cost or recourse".to_string());
            }
        }
        out
    }

    /// Validate and return the lattice, or the first-violations error.
    pub fn validated(self) -> Result<Self> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(self)
        } else {
            let joined = violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::Model(joined))
        }
    }

    /// Deterministic companion lattice: each stage keeps `A_t`, `c_t` and
    /// collapses its realizations to the probability-weighted mean
    /// `(Σ p_k B_k, Σ p_k b_k)` with probability 1. Idempotent.
    pub fn mean_value(&self) -> ScenarioLattice {
        ScenarioLattice {
            stages: self
                .stages
                .iter()
                .map(|s| StageData {
                    index: s.index,
                    cost: s.cost.clone(),
                    recourse: s.recourse.clone(),
                    realizations: vec![s.mean_realization()],
                })
                .collect(),
        }
    }

    /// True when every stage has exactly one realization.
    pub fn is_deterministic(&self) -> bool {
        self.stages.iter().all(|s| s.realizations.len() == 1)
    }

    /// Number of scenario paths `Π_t |Ξ_t|`, saturating at `u128::MAX`.
    pub fn path_count(&self) -> u128 {
        self.stages
            .iter()
            .map(|s| s.realizations.len() as u128)
            .try_fold(1u128, |acc, n| acc.checked_mul(n))
            .unwrap_or(u128::MAX)
    }
}

/// Knobs shared by every solver variant. Tolerances suffixed `_tolerance`
/// are scale-free: the engine multiplies them by `1 + |current bound|` (or by
/// `1 + max signature norm` for `refine_tolerance`) before comparing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sample paths drawn per iteration, `|J|`. One path per iteration is the
    /// empirically strongest setting and the default.
    pub sample_paths_per_iter: usize,
    /// Stall window `n`: preprocessing counts the bound as stalled when it
    /// gained at most `stall_tolerance` over the last `n` iterations.
    pub stall_window: usize,
    /// Stall tolerance, scaled by `1 + |bound|`.
    pub stall_tolerance: f64,
    /// Dual-distance threshold for partition refinement, scaled per cluster
    /// by `1 + max signature norm`.
    pub refine_tolerance: f64,
    /// Cut violation tolerance, scaled by `1 + |bound|`.
    pub cut_violation_tolerance: f64,
    /// Coarse-tree size threshold `nu` in `[0, 1]`: preprocessing ends once
    /// the relative coarse tree size exceeds it. Zero disables preprocessing.
    pub preprocess_threshold: f64,
    /// Stage-importance threshold `Z`; `None` selects the median of the
    /// myopic stage costs.
    pub importance_threshold: Option<f64>,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    /// Iteration budget.
    pub max_iterations: Option<u64>,
    /// Seed for every random stream in a run.
    pub rng_seed: u64,
    /// Multiplier on the standard error in the statistical upper bound.
    pub confidence_multiplier: f64,
    /// Cap on inner rounds per stage boundary in a cautious pass.
    pub cautious_cap: usize,
    /// Out-of-sample forward passes for the end-of-run statistical upper
    /// bound.
    pub upper_bound_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            sample_paths_per_iter: 1,
            stall_window: 30,
            stall_tolerance: 1e-4,
            refine_tolerance: 1e-4,
            cut_violation_tolerance: 1e-6,
            preprocess_threshold: 0.5,
            importance_threshold: None,
            time_limit: None,
            max_iterations: None,
            rng_seed: 0,
            confidence_multiplier: 1.96,
            cautious_cap: 100,
            upper_bound_samples: 100,
        }
    }
}

impl SolverConfig {
    /// Range-check every field.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sample_paths_per_iter == 0 {
            return bad("sample_paths_per_iter must be at least 1".into());
        }
        if self.stall_window == 0 {
            return bad("stall_window must be at least 1".into());
        }
        for (name, v) in [
            ("stall_tolerance", self.stall_tolerance),
            ("refine_tolerance", self.refine_tolerance),
            ("cut_violation_tolerance", self.cut_violation_tolerance),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.preprocess_threshold) {
            return bad(format!(
                "preprocess_threshold must lie in [0, 1], got {}",
                self.preprocess_threshold
            ));
        }
        if let Some(z) = self.importance_threshold {
            if z.is_nan() {
                return bad("importance_threshold must not be NaN".into());
            }
        }
        if let Some(t) = self.time_limit {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("time_limit must be positive, got {t}"));
            }
        }
        if !(self.confidence_multiplier >= 0.0 && self.confidence_multiplier.is_finite()) {
            return bad(format!(
                "confidence_multiplier must be finite and >= 0, got {}",
                self.confidence_multiplier
            ));
        }
        if self.cautious_cap == 0 {
            return bad("cautious_cap must be at least 1".into());
        }
        if self.upper_bound_samples == 0 {
            return bad("upper_bound_samples must be at least 1".into());
        }
        Ok(())
    }
}

/// One sampled scenario path: a realization index per stage `2..=T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePath {
    indices: Vec<usize>,
}

impl SamplePath {
    /// Build from indices for stages `2..=T` in order.
    pub fn new(indices: Vec<usize>) -> Self {
        SamplePath { indices }
    }

    /// Realization index at stage `t` (valid for `2 <= t <= T`).
    pub fn realization(&self, t: usize) -> usize {
        self.indices[t - 2]
    }

    /// Indices for stages `2..=T`.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
}

/// Named random streams, so training, evaluation, and generator draws never
/// collide even under a shared seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    /// Per-iteration training paths.
    Training,
    /// Out-of-sample evaluation paths for the statistical upper bound.
    Evaluation,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Training => 0x5444, // "TD"
            Stream::Evaluation => 0x4544,
        }
    }
}

/// Counter-style path sampler. Every draw is keyed by
/// `(seed, stream, iteration, stage)`, so two engines sharing a seed see the
/// same path sequence regardless of what else they computed in between.
#[derive(Clone, Debug)]
pub struct PathSampler {
    seed: u64,
}

impl PathSampler {
    pub fn new(seed: u64) -> Self {
        PathSampler { seed }
    }

    /// Uniform draw in `[0, 1)` for the keyed counter.
    pub fn uniform(&self, stream: Stream, iteration: u64, stage: usize) -> f64 {
        self.uniform_indexed(stream, iteration, 0, stage)
    }

    /// Uniform draw keyed additionally by a within-iteration sample index,
    /// for iterations that draw several paths.
    pub fn uniform_indexed(&self, stream: Stream, iteration: u64, sample: u64, stage: usize) -> f64 {
        let key = mix(
            mix(mix(mix(self.seed, stream.tag()), iteration), sample),
            stage as u64,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.gen::<f64>()
    }

    /// Sample a path through the lattice for one training iteration.
    pub fn path(&self, lattice: &ScenarioLattice, iteration: u64) -> SamplePath {
        self.path_in(lattice, Stream::Training, iteration)
    }

    /// Sample a path in a chosen stream (`Evaluation` indexes by sample id).
    pub fn path_in(&self, lattice: &ScenarioLattice, stream: Stream, iteration: u64) -> SamplePath {
        self.path_indexed(lattice, stream, iteration, 0)
    }

    /// Sample the `sample`-th path of one iteration.
    pub fn path_indexed(
        &self,
        lattice: &ScenarioLattice,
        stream: Stream,
        iteration: u64,
        sample: u64,
    ) -> SamplePath {
        let indices = (2..=lattice.horizon())
            .map(|t| {
                let u = self.uniform_indexed(stream, iteration, sample, t);
                pick_by_weight(
                    u,
                    lattice.stage(t).realizations.iter().map(|r| r.probability),
                )
            })
            .collect();
        SamplePath::new(indices)
    }
}

/// Map a uniform `u in [0, 1)` to an index by cumulative weight. The last
/// index absorbs any rounding residue, so the result is always in range.
pub fn pick_by_weight(u: f64, weights: impl IntoIterator<Item = f64>) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.into_iter().enumerate() {
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// SplitMix64 finalizer; stirs one word into a counter key.
fn mix(state: u64, word: u64) -> u64 {
    let mut z = state
        .wrapping_add(0x9e3779b97f4a7c15)
        .wrapping_add(word.wrapping_mul(0xbf58476d1ce4e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
