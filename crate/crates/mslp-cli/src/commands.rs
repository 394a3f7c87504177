//! Implementations of the five subcommands.

use std::path::{Path, PathBuf};

use mslp::dep::{solve_dep, DEFAULT_NODE_CAP};
use mslp::engine::StageClass;
use mslp::hydro::{generate_hydro, HydroConfig};
use mslp::io::{read_config, read_instance, write_instance, write_log, ProgressLog, RunConfig};
use mslp::model::ScenarioLattice;
use mslp::variants::{self, Variant, VariantSpec};

use crate::table;
use crate::{
    CompareArgs, DepArgs, Failure, Format, GenerateArgs, SolveArgs, SolverFlags, ValidateArgs,
    CONFIG_ENV, DEFAULT_MAX_ITERATIONS,
};

/// Load the run configuration named by the flag, falling back to the
/// `MSLP_CONFIG` environment variable, then to built-in defaults.
fn load_config(flag: &Option<PathBuf>) -> Result<RunConfig, Failure> {
    let path = flag
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(p) => Ok(read_config(p)?),
        None => Ok(RunConfig::default()),
    }
}

/// Configuration with flag overrides applied, plus the default iteration
/// budget when neither flags nor file set any budget.
fn solver_config(flags: &SolverFlags) -> Result<RunConfig, Failure> {
    let mut run = load_config(&flags.config)?;
    let s = &mut run.solver;
    if let Some(v) = flags.samples_per_iter {
        s.sample_paths_per_iter = v;
    }
    if let Some(v) = flags.stall_n {
        s.stall_window = v;
    }
    if let Some(v) = flags.stall_eps {
        s.stall_tolerance = v;
    }
    if let Some(v) = flags.dual_eps {
        s.refine_tolerance = v;
    }
    if let Some(v) = flags.cut_eps {
        s.cut_violation_tolerance = v;
    }
    if let Some(v) = flags.nu {
        s.preprocess_threshold = v;
    }
    if let Some(v) = flags.importance_z {
        s.importance_threshold = Some(v);
    }
    if let Some(v) = flags.time_limit {
        s.time_limit = Some(v);
    }
    if let Some(v) = flags.max_iter {
        s.max_iterations = Some(v);
    }
    if let Some(v) = flags.seed {
        s.rng_seed = v;
    }
    if s.time_limit.is_none() && s.max_iterations.is_none() {
        s.max_iterations = Some(DEFAULT_MAX_ITERATIONS);
    }
    Ok(run)
}

/// The instance to work on: an explicit file when given, otherwise the
/// config's generator table.
fn resolve_instance(
    path: &Option<PathBuf>,
    run: &RunConfig,
) -> Result<ScenarioLattice, Failure> {
    match (path, &run.hydro) {
        (Some(p), _) => Ok(read_instance(p)?),
        (None, Some(h)) => Ok(generate_hydro(h)?),
        (None, None) => Err(Failure::usage(
            "no instance file given and the configuration has no [hydro] table",
        )),
    }
}

pub fn generate(args: &GenerateArgs) -> Result<(), Failure> {
    let run = load_config(&args.config)?;
    let mut hydro = run.hydro.unwrap_or_else(|| HydroConfig::new(25, 50, 0));
    if let Some(t) = args.horizon {
        hydro.horizon = t;
        // Keep the demand profile consistent with an overridden horizon by
        // cycling the configured profile to the new length.
        if hydro.demand.len() != t && !hydro.demand.is_empty() {
            hydro.demand = (0..t).map(|i| hydro.demand[i % hydro.demand.len()]).collect();
        }
    }
    if let Some(k) = args.realizations {
        hydro.realizations_per_stage = k;
    }
    if let Some(seed) = args.seed {
        hydro.seed = seed;
    }
    let lattice = generate_hydro(&hydro)?;
    write_instance(&lattice, &args.output)?;

    let s1 = lattice.stage(1);
    let s2 = lattice.stage(2);
    println!("wrote {}", args.output.display());
    println!(
        "T = {}, realizations per stage = {}",
        lattice.horizon(),
        s2.realizations.len()
    );
    println!(
        "stage 1: {} variables, {} rows, 1 realization",
        s1.cost.len(),
        s1.recourse.nrows()
    );
    println!(
        "stages 2..={}: {} variables, {} rows",
        lattice.horizon(),
        s2.cost.len(),
        s2.recourse.nrows()
    );
    Ok(())
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let run = solver_config(&args.solver)?;
    let lattice = resolve_instance(&args.instance, &run)?;
    let variant = args.variant.or(run.variant).unwrap_or(Variant::SddpQp);
    let spec = VariantSpec::new(variant, run.solver.clone());
    let log = variants::run_variant(&lattice, &spec)?;
    if let Some(path) = &args.log {
        write_log(&log, path)?;
    }
    match args.format {
        Format::Delimited => print!("{}", log.csv()),
        Format::Table => print_run_summary(&log),
    }
    Ok(())
}

fn print_run_summary(log: &ProgressLog) {
    println!("variant = {}", log.variant);
    println!(
        "iterations = {}",
        log.rows.last().map(|r| r.iteration).unwrap_or(0)
    );
    println!("initial_lower = {}", log.initial_lower);
    println!("lower_bound = {}", log.final_lower());
    println!("sample_mean = {}", log.final_bounds.sample_mean);
    println!("statistical_upper = {}", log.final_bounds.statistical_upper);
    println!("gap = {}", log.final_bounds.gap());
    if let Some(end) = log.preprocess_end_iteration {
        println!("preprocess_end = {end}");
    }
    if let Some(classes) = &log.stage_classes {
        let tags: Vec<&str> = classes
            .iter()
            .map(|c| match c {
                StageClass::MoreImportant => "mi",
                StageClass::LessImportant => "li",
            })
            .collect();
        println!("stage_classes = {}", tags.join(","));
    }
    println!(
        "lp_solves = {} scenario + {} cluster",
        log.totals.lp_solves_scenario, log.totals.lp_solves_cluster
    );
    println!(
        "cuts = {} fine + {} coarse + {} semi-coarse",
        log.totals.cuts_fine, log.totals.cuts_coarse, log.totals.cuts_semicoarse
    );
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let run = solver_config(&args.solver)?;
    let lattice = resolve_instance(&args.instance, &run)?;
    let list: Vec<Variant> = if args.variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        args.variants.clone()
    };
    let comparison = variants::compare(
        &lattice,
        &list,
        &run.solver,
        &args.checkpoint_time,
        &args.checkpoint_iter,
    )?;
    if let Some(prefix) = &args.log {
        for log in &comparison.logs {
            write_log(log, log_path_for(prefix, log.variant))?;
        }
    }
    match args.format {
        Format::Table => print!("{}", table::comparison(&comparison, false)),
        Format::Delimited => print!("{}", table::comparison(&comparison, true)),
    }
    if let Some(message) = &comparison.aborted {
        return Err(Failure {
            code: 3,
            message: Some(format!("comparison aborted, partial table kept: {message}")),
        });
    }
    Ok(())
}

/// `PREFIX.<variant>.csv`, next to the prefix path.
fn log_path_for(prefix: &Path, variant: Variant) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if !name.is_empty() {
        name.push('.');
    }
    name.push_str(&format!("{variant}.csv"));
    prefix.with_file_name(name)
}

pub fn dep(args: &DepArgs) -> Result<(), Failure> {
    let run = load_config(&args.config)?;
    let lattice = resolve_instance(&args.instance, &run)?;
    let cap = args.node_cap.unwrap_or(DEFAULT_NODE_CAP);
    let solution = solve_dep(&lattice, cap)?;
    println!("z* = {}", solution.objective);
    let parts: Vec<String> = solution.first_stage.iter().map(|v| v.to_string()).collect();
    println!("x1 = [{}]", parts.join(", "));
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<(), Failure> {
    match read_instance(&args.instance) {
        Ok(lattice) => {
            println!(
                "ok: {} stages, {} scenario paths, no violations",
                lattice.horizon(),
                lattice.path_count()
            );
            Ok(())
        }
        Err(mslp::Error::Model(report)) => {
            for violation in report.split("; ") {
                println!("violation: {violation}");
            }
            Err(Failure::silent(3))
        }
        Err(e) => Err(e.into()),
    }
}
