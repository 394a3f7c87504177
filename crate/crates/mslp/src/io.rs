//! Instance files, run configuration and progress-log persistence.
//!
//! Three file formats live here:
//!
//! * `mslp-v1` — the instance format: a line-oriented text file with a
//!   version header, one block per stage and one sub-block per
//!   realization. Matrices are written dense, row-major, as whitespace
//!   separated decimals in shortest round-trip form, so `read(write(x))`
//!   reproduces `x` exactly. Blank lines and `#` comments are ignored.
//!
//!   ```text
//!   mslp-v1
//!   stages 2
//!   stage 1 vars 2 rows 1 realizations 1
//!   cost 1 1
//!   recourse 1 -1
//!   realization 1 prob 1
//!   tech
//!   rhs 0
//!   stage 2 vars 2 rows 1 realizations 2
//!   ...
//!   ```
//!
//! * run config — one TOML document holding the solver knobs, an optional
//!   variant name and an optional hydro generator block.
//!
//! * progress logs — a delimiter-separated table with one row per
//!   iteration plus a JSON summary next to it. Counter columns are
//!   cumulative; per-stage partition sizes are kept in the in-memory rows
//!   and the summary but stay out of the table to keep its column set
//!   fixed.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::engine::{Bounds, Counters, CutAudit, StageClass};
use crate::error::{Error, Result};
use crate::hydro::HydroConfig;
use crate::model::{Realization, ScenarioLattice, SolverConfig, StageData};
use crate::variants::Variant;

/// Version header every instance file must start with.
pub const INSTANCE_VERSION: &str = "mslp-v1";

/// Column set of the iteration table, in emission order.
pub const LOG_COLUMNS: [&str; 9] = [
    "iteration",
    "wall_seconds",
    "lower_bound",
    "cuts_fine",
    "cuts_coarse",
    "cuts_semicoarse",
    "lp_solves_scenario",
    "lp_solves_cluster",
    "coarse_tree_size",
];

// ---------------------------------------------------------------------------
// Instance format
// ---------------------------------------------------------------------------

fn push_floats(out: &mut String, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.push(' ');
        out.push_str(&v.to_string());
    }
    out.push('\n');
}

/// Serialize a lattice to the `mslp-v1` text form.
pub fn instance_to_string(lattice: &ScenarioLattice) -> String {
    let mut out = String::new();
    out.push_str(INSTANCE_VERSION);
    out.push('\n');
    out.push_str(&format!("stages {}\n", lattice.horizon()));
    for stage in &lattice.stages {
        out.push_str(&format!(
            "stage {} vars {} rows {} realizations {}\n",
            stage.index,
            stage.n_vars(),
            stage.n_rows(),
            stage.realizations.len()
        ));
        out.push_str("cost");
        push_floats(&mut out, stage.cost.iter().copied());
        out.push_str("recourse");
        push_floats(&mut out, stage.recourse.row_iter().flat_map(|r| {
            r.iter().copied().collect::<Vec<_>>()
        }));
        for (k, real) in stage.realizations.iter().enumerate() {
            out.push_str(&format!("realization {} prob {}\n", k + 1, real.probability));
            out.push_str("tech");
            push_floats(&mut out, real.tech.row_iter().flat_map(|r| {
                r.iter().copied().collect::<Vec<_>>()
            }));
            out.push_str("rhs");
            push_floats(&mut out, real.rhs.iter().copied());
        }
    }
    out
}

/// Write a lattice to `path` in the `mslp-v1` format.
pub fn write_instance(lattice: &ScenarioLattice, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, instance_to_string(lattice))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Token stream over the instance text with 1-based line tracking.
struct Tokens<'a> {
    origin: &'a str,
    items: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str, origin: &'a str) -> Self {
        let mut items = Vec::new();
        let mut last_line = 1;
        for (idx, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                items.push((idx + 1, tok));
            }
            last_line = idx + 1;
        }
        Tokens {
            origin,
            items,
            pos: 0,
            last_line,
        }
    }

    fn fail(&self, line: usize, message: String) -> Error {
        Error::parse(self.origin, line, message)
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.items.get(self.pos) {
            Some(&(line, tok)) => {
                self.pos += 1;
                Ok((line, tok))
            }
            None => Err(self.fail(
                self.last_line,
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<usize> {
        let (line, tok) = self.next(kw)?;
        if tok == kw {
            Ok(line)
        } else {
            Err(self.fail(line, format!("expected {kw:?}, found {tok:?}")))
        }
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let (line, tok) = self.next(what)?;
        tok.parse()
            .map_err(|_| self.fail(line, format!("expected {what} (an integer), found {tok:?}")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let (line, tok) = self.next(what)?;
        tok.parse()
            .map_err(|_| self.fail(line, format!("expected {what} (a number), found {tok:?}")))
    }

    fn floats(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        (0..count).map(|_| self.f64(what)).collect()
    }

    fn finished(&mut self) -> Result<()> {
        if let Some(&(line, tok)) = self.items.get(self.pos) {
            return Err(self.fail(line, format!("trailing content {tok:?} after last stage")));
        }
        Ok(())
    }
}

/// Parse the `mslp-v1` text form. `origin` labels error messages (a file
/// path or a pseudo-name for in-memory input).
pub fn instance_from_str(text: &str, origin: &str) -> Result<ScenarioLattice> {
    let mut tokens = Tokens::new(text, origin);
    let (_, version) = tokens.next("version header")?;
    if version != INSTANCE_VERSION {
        return Err(Error::Version {
            found: version.to_string(),
            expected: INSTANCE_VERSION.to_string(),
        });
    }
    tokens.keyword("stages")?;
    let horizon = tokens.usize("stage count")?;
    let mut stages = Vec::with_capacity(horizon);
    let mut prev_vars = 0usize;
    for t in 1..=horizon {
        let line = tokens.keyword("stage")?;
        let index = tokens.usize("stage index")?;
        if index != t {
            return Err(tokens.fail(line, format!("expected stage {t}, found stage {index}")));
        }
        tokens.keyword("vars")?;
        let n = tokens.usize("variable count")?;
        tokens.keyword("rows")?;
        let m = tokens.usize("row count")?;
        tokens.keyword("realizations")?;
        let count = tokens.usize("realization count")?;
        tokens.keyword("cost")?;
        let cost = DVector::from_vec(tokens.floats(n, "cost coefficient")?);
        tokens.keyword("recourse")?;
        let recourse =
            DMatrix::from_row_slice(m, n, &tokens.floats(m * n, "recourse entry")?);
        let n_prev = if t == 1 { 0 } else { prev_vars };
        let mut realizations = Vec::with_capacity(count);
        for k in 1..=count {
            let line = tokens.keyword("realization")?;
            let found = tokens.usize("realization index")?;
            if found != k {
                return Err(tokens.fail(
                    line,
                    format!("expected realization {k}, found realization {found}"),
                ));
            }
            tokens.keyword("prob")?;
            let probability = tokens.f64("probability")?;
            tokens.keyword("tech")?;
            let tech =
                DMatrix::from_row_slice(m, n_prev, &tokens.floats(m * n_prev, "tech entry")?);
            tokens.keyword("rhs")?;
            let rhs = DVector::from_vec(tokens.floats(m, "rhs entry")?);
            realizations.push(Realization {
                tech,
                rhs,
                probability,
            });
        }
        stages.push(StageData {
            index: t,
            cost,
            recourse,
            realizations,
        });
        prev_vars = n;
    }
    tokens.finished()?;
    ScenarioLattice { stages }.validated()
}

/// Read an `mslp-v1` instance file.
pub fn read_instance(path: impl AsRef<Path>) -> Result<ScenarioLattice> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(label.clone(), e))?;
    instance_from_str(&text, &label)
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// One structured document covering a whole run: which variant, the solver
/// knobs, and (optionally) the hydro generator to produce the instance.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Variant to run; command-line flags take precedence.
    pub variant: Option<Variant>,
    /// Engine and budget knobs.
    pub solver: SolverConfig,
    /// When present, the instance is generated instead of read from disk.
    pub hydro: Option<HydroConfig>,
}

/// Read a [`RunConfig`] TOML document.
pub fn read_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let label = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(label.clone(), e))?;
    config_from_str(&text, &label)
}

/// Parse a [`RunConfig`] TOML document; `origin` labels errors.
pub fn config_from_str(text: &str, origin: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        Error::parse(origin, line, e.message().to_string())
    })
}

/// Write a [`RunConfig`] as pretty TOML.
pub fn write_config(config: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("config not serializable: {e}")))?;
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Progress logs
// ---------------------------------------------------------------------------

/// One solver iteration as logged. Counters are cumulative since the start
/// of the run.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRow {
    pub iteration: u64,
    pub wall_seconds: f64,
    pub lower_bound: f64,
    pub cuts_fine: u64,
    pub cuts_coarse: u64,
    pub cuts_semicoarse: u64,
    pub lp_solves_scenario: u64,
    pub lp_solves_cluster: u64,
    pub coarse_tree_size: f64,
    /// Cluster count per stage `2..=T`; summary-only (not a table column).
    pub partition_sizes: Vec<usize>,
}

/// Everything a run leaves behind.
#[derive(Clone, Debug, Serialize)]
pub struct ProgressLog {
    pub variant: Variant,
    pub config: SolverConfig,
    /// Lower bound before the first iteration (mean-value seeded pools).
    pub initial_lower: f64,
    pub rows: Vec<IterationRow>,
    /// Counters at the end of training, excluding the out-of-sample
    /// evaluation passes behind `final_bounds`.
    pub totals: Counters,
    pub final_bounds: Bounds,
    /// First iteration run as standard SDDP on the original lattice after
    /// preprocessing (`apep`/`iter` only); `None` when the run never left
    /// the preprocessing phase or the variant has none.
    pub preprocess_end_iteration: Option<u64>,
    /// Stage classes used by `spap`.
    pub stage_classes: Option<Vec<StageClass>>,
    pub final_partition_sizes: Vec<usize>,
    /// Per-cut provenance, in append order.
    pub audit: Vec<CutAudit>,
}

impl ProgressLog {
    /// Lower bound after the last iteration (the initial bound for an
    /// empty run).
    pub fn final_lower(&self) -> f64 {
        self.rows.last().map_or(self.initial_lower, |r| r.lower_bound)
    }

    /// The lower-bound column.
    pub fn lower_bounds(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lower_bound).collect()
    }

    /// True when both the bound and the clock never decrease.
    pub fn is_monotone(&self) -> bool {
        let mut bound = self.initial_lower;
        let mut clock = 0.0;
        for row in &self.rows {
            if row.lower_bound < bound - 1e-9 || row.wall_seconds < clock {
                return false;
            }
            bound = row.lower_bound;
            clock = row.wall_seconds;
        }
        true
    }

    /// Bound reached within `seconds` of wall time.
    pub fn lower_at_time(&self, seconds: f64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.wall_seconds <= seconds)
            .last()
            .map_or(self.initial_lower, |r| r.lower_bound)
    }

    /// Bound reached by the end of `iteration`.
    pub fn lower_at_iteration(&self, iteration: u64) -> f64 {
        self.rows
            .iter()
            .take_while(|r| r.iteration <= iteration)
            .last()
            .map_or(self.initial_lower, |r| r.lower_bound)
    }

    /// The iteration table as delimiter-separated text with a stable
    /// header.
    pub fn csv(&self) -> String {
        let mut out = LOG_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.iteration,
                r.wall_seconds,
                r.lower_bound,
                r.cuts_fine,
                r.cuts_coarse,
                r.cuts_semicoarse,
                r.lp_solves_scenario,
                r.lp_solves_cluster,
                r.coarse_tree_size
            ));
        }
        out
    }

    /// The machine-readable summary: final bound and bounds statistics,
    /// totals, configuration and partition state.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            variant: Variant,
            seed: u64,
            iterations: u64,
            final_lower: f64,
            initial_lower: f64,
            bounds: &'a Bounds,
            totals: &'a Counters,
            preprocess_end_iteration: Option<u64>,
            stage_classes: &'a Option<Vec<StageClass>>,
            final_partition_sizes: &'a [usize],
            config: &'a SolverConfig,
        }
        let summary = Summary {
            variant: self.variant,
            seed: self.config.rng_seed,
            iterations: self.rows.last().map_or(0, |r| r.iteration),
            final_lower: self.final_lower(),
            initial_lower: self.initial_lower,
            bounds: &self.final_bounds,
            totals: &self.totals,
            preprocess_end_iteration: self.preprocess_end_iteration,
            stage_classes: &self.stage_classes,
            final_partition_sizes: &self.final_partition_sizes,
            config: &self.config,
        };
        serde_json::to_string_pretty(&summary).expect("log serializes")
    }
}

/// Companion summary path for a log table path: the same stem with a
/// `.json` extension (or `.summary.json` when the table itself is JSON).
pub fn summary_path(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == "json") {
        path.with_extension("summary.json")
    } else {
        path.with_extension("json")
    }
}

/// Write the iteration table to `path` and the JSON summary next to it
/// (see [`summary_path`]).
pub fn write_log(log: &ProgressLog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, log.csv()).map_err(|e| Error::io(path.display().to_string(), e))?;
    let summary = summary_path(path);
    fs::write(&summary, log.summary_json())
        .map_err(|e| Error::io(summary.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn tiny_lattice() -> ScenarioLattice {
        use nalgebra::{dmatrix, dvector};
        ScenarioLattice {
            stages: vec![
                StageData {
                    index: 1,
                    cost: dvector![1.0, 1.0],
                    recourse: dmatrix![1.0, -1.0],
                    realizations: vec![Realization {
                        tech: DMatrix::zeros(1, 0),
                        rhs: dvector![0.0],
                        probability: 1.0,
                    }],
                },
                StageData {
                    index: 2,
                    cost: dvector![1.0, 3.0],
                    recourse: dmatrix![1.0, -1.0],
                    realizations: vec![
                        Realization {
                            tech: dmatrix![1.0, 0.0],
                            rhs: dvector![0.1 + 1.0 / 3.0],
                            probability: 0.5,
                        },
                        Realization {
                            tech: dmatrix![1.0, 0.0],
                            rhs: dvector![-1.0],
                            probability: 0.5,
                        },
                    ],
                },
            ],
        }
    }

    fn random_lattice(rng: &mut StdRng) -> ScenarioLattice {
        let horizon = rng.gen_range(2..=4);
        let mut stages = Vec::new();
        let mut prev_vars = 0;
        for t in 1..=horizon {
            let n = rng.gen_range(1..=3);
            let m = rng.gen_range(1..=2);
            let count = if t == 1 { 1 } else { rng.gen_range(1..=3) };
            let mut weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let n_prev = if t == 1 { 0 } else { prev_vars };
            let dense = |rows: usize, cols: usize, rng: &mut StdRng| {
                DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-5.0..5.0))
            };
            stages.push(StageData {
                index: t,
                cost: DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(-2.0..5.0))),
                recourse: dense(m, n, rng),
                realizations: weights
                    .into_iter()
                    .map(|probability| Realization {
                        tech: dense(m, n_prev, rng),
                        rhs: DVector::from_iterator(m, (0..m).map(|_| rng.gen_range(-3.0..3.0))),
                        probability,
                    })
                    .collect(),
            });
            prev_vars = n;
        }
        ScenarioLattice { stages }
    }

    #[test]
    fn instance_round_trip_is_exact_for_1000_random_lattices() {
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..1000 {
            let lattice = random_lattice(&mut rng);
            let text = instance_to_string(&lattice);
            let parsed = instance_from_str(&text, "memory").unwrap();
            assert_eq!(lattice, parsed, "case {case}");
        }
    }

    #[test]
    fn instance_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.mslp");
        let lattice = tiny_lattice();
        write_instance(&lattice, &path).unwrap();
        let second = dir.path().join("again.mslp");
        write_instance(&lattice, &second).unwrap();
        assert_eq!(
            fs::read(&path).unwrap(),
            fs::read(&second).unwrap(),
            "serialization must be deterministic"
        );
        assert_eq!(read_instance(&path).unwrap(), lattice);
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = instance_to_string(&tiny_lattice()).replace("mslp-v1", "mslp-v9");
        match instance_from_str(&text, "memory").unwrap_err() {
            Error::Version { found, expected } => {
                assert_eq!(found, "mslp-v9");
                assert_eq!(expected, "mslp-v1");
            }
            other => panic!("expected version error, got {other}"),
        }
    }

    #[test]
    fn truncated_instance_names_the_line() {
        let text = instance_to_string(&tiny_lattice());
        let lines: Vec<&str> = text.lines().collect();
        let truncated = lines[..lines.len() - 1].join("\n");
        match instance_from_str(&truncated, "memory").unwrap_err() {
            Error::Parse { path, line, message } => {
                assert_eq!(path, "memory");
                assert_eq!(line, lines.len() - 1);
                assert!(message.contains("end of file"), "{message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn bad_token_is_located() {
        let text = instance_to_string(&tiny_lattice()).replace("cost 1 3", "cost 1 x");
        match instance_from_str(&text, "memory").unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert!(message.contains('x'), "{message}");
                assert!(line > 1);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = instance_to_string(&tiny_lattice());
        let commented = format!("# generated file\n\n{}\n# trailing note\n", text);
        assert_eq!(instance_from_str(&commented, "memory").unwrap(), tiny_lattice());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        let mut config = RunConfig::default();
        config.variant = Some(Variant::Apep);
        config.solver.max_iterations = Some(25);
        config.solver.rng_seed = 9;
        config.hydro = Some(HydroConfig::new(3, 3, 7));
        write_config(&config, &path).unwrap();
        assert_eq!(read_config(&path).unwrap(), config);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let parsed =
            config_from_str("variant = \"iter\"\n[solver]\nrng_seed = 4\n", "memory").unwrap();
        assert_eq!(parsed.variant, Some(Variant::Iter));
        assert_eq!(parsed.solver.rng_seed, 4);
        assert_eq!(
            parsed.solver.stall_window,
            SolverConfig::default().stall_window
        );
        assert!(parsed.hydro.is_none());
    }

    #[test]
    fn unknown_config_field_is_a_parse_error_with_a_line() {
        let err = config_from_str("[solver]\nbogus = 1\n", "memory").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    fn sample_log() -> ProgressLog {
        let row = |iteration, wall, lower, fine, scenario| IterationRow {
            iteration,
            wall_seconds: wall,
            lower_bound: lower,
            cuts_fine: fine,
            cuts_coarse: 0,
            cuts_semicoarse: 0,
            lp_solves_scenario: scenario,
            lp_solves_cluster: 0,
            coarse_tree_size: 0.5,
            partition_sizes: vec![1],
        };
        ProgressLog {
            variant: Variant::SddpQp,
            config: SolverConfig::default(),
            initial_lower: 0.25,
            rows: vec![row(1, 0.5, 1.0, 1, 4), row(2, 1.5, 2.0, 2, 8)],
            totals: Counters {
                lp_solves_scenario: 8,
                lp_solves_cluster: 0,
                cuts_fine: 2,
                cuts_coarse: 0,
                cuts_semicoarse: 0,
            },
            final_bounds: Bounds {
                lower: 2.0,
                sample_mean: 2.5,
                sample_var: 0.25,
                statistical_upper: 2.6,
            },
            preprocess_end_iteration: None,
            stage_classes: None,
            final_partition_sizes: vec![1],
            audit: Vec::new(),
        }
    }

    #[test]
    fn csv_layout_is_pinned() {
        let expected = "iteration,wall_seconds,lower_bound,cuts_fine,cuts_coarse,\
                        cuts_semicoarse,lp_solves_scenario,lp_solves_cluster,coarse_tree_size\n\
                        1,0.5,1,1,0,0,4,0,0.5\n\
                        2,1.5,2,2,0,0,8,0,0.5\n";
        assert_eq!(sample_log().csv(), expected);
    }

    #[test]
    fn summary_reports_the_final_state() {
        let log = sample_log();
        let value: serde_json::Value = serde_json::from_str(&log.summary_json()).unwrap();
        assert_eq!(value["variant"], "sddp-qp");
        assert_eq!(value["iterations"], 2);
        assert_eq!(value["final_lower"], 2.0);
        assert_eq!(value["totals"]["cuts_fine"], 2);
        assert_eq!(value["bounds"]["statistical_upper"], 2.6);
    }

    #[test]
    fn write_log_emits_table_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        write_log(&sample_log(), &path).unwrap();
        let table = fs::read_to_string(&path).unwrap();
        assert!(table.starts_with("iteration,wall_seconds,lower_bound"));
        let summary = fs::read_to_string(dir.path().join("run.json")).unwrap();
        assert!(serde_json::from_str::<serde_json::Value>(&summary).is_ok());
    }

    #[test]
    fn empty_log_is_header_only_but_keeps_the_initial_bound() {
        let mut log = sample_log();
        log.rows.clear();
        assert_eq!(log.csv().lines().count(), 1);
        assert_eq!(log.final_lower(), 0.25);
        assert!(log.is_monotone());
    }

    #[test]
    fn checkpoint_lookups_fall_back_to_the_initial_bound() {
        let log = sample_log();
        assert_eq!(log.lower_at_time(0.1), 0.25);
        assert_eq!(log.lower_at_time(0.5), 1.0);
        assert_eq!(log.lower_at_time(10.0), 2.0);
        assert_eq!(log.lower_at_iteration(0), 0.25);
        assert_eq!(log.lower_at_iteration(1), 1.0);
        assert_eq!(log.lower_at_iteration(5), 2.0);
    }

    #[test]
    fn monotonicity_check_catches_regressions() {
        let mut log = sample_log();
        log.rows[1].lower_bound = 0.5;
        assert!(!log.is_monotone());
    }

    #[test]
    fn summary_path_avoids_clobbering_json_tables() {
        assert_eq!(summary_path(Path::new("a/run.csv")), Path::new("a/run.json"));
        assert_eq!(summary_path(Path::new("run")), Path::new("run.json"));
        assert_eq!(
            summary_path(Path::new("run.json")),
            Path::new("run.summary.json")
        );
    }
}
