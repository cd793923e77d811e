//! Benchmark harness for the clarsta solver.
//!
//! `clarsta run` executes one experiment and writes a per-iteration trace
//! CSV plus a one-row summary CSV; `clarsta grid` does the same for the
//! cross product of a JSON experiment spec. Timing is reported as the
//! decomposition `total_time = alg_time + nf * t_feval`, with `t_feval`
//! measured in a separate pre-pass so the counted run is never perturbed
//! by instrumentation.
//!
//! Exit codes: 0 success, 2 invalid spec or arguments, 3 runtime failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Deserialize;

use clarsta::driver::{run, DriverError, RunResult, SolverConfig};
use clarsta::problems::{
    chain_rosenbrock, named_instance, trigonometric, Objective, ProblemInstance,
};
use clarsta::sets::{ConvexSet, HalfspaceSense, ProjectionSettings};

#[derive(Parser)]
#[command(name = "clarsta", version, about = "Benchmark harness for the clarsta solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and write trace + summary CSVs.
    Run(RunArgs),
    /// Run every cell of a cross-product experiment spec.
    Grid(GridArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Objective: chain_rosenbrock or trigonometric.
    #[arg(long)]
    problem: String,
    /// Named constraint (box, ball, halfspace) or path to a JSON set
    /// descriptor file.
    #[arg(long)]
    constraint: String,
    /// Ambient dimension, at least 2.
    #[arg(long)]
    n: usize,
    /// Subspace dimension.
    #[arg(long)]
    p: usize,
    /// Fresh random directions per iteration.
    #[arg(long = "p-rand")]
    p_rand: usize,
    #[arg(long)]
    seed: u64,
    /// Evaluation budget; defaults to 100(n+1).
    #[arg(long)]
    budget: Option<usize>,
    /// JSON file of solver overrides; keys mirror SolverConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the CSV files (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// JSON grid spec; see the README for the schema.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the CSV files (created if missing).
    #[arg(long)]
    out: PathBuf,
}

/// Failures split by exit code: bad inputs (2) versus runtime trouble (3).
enum Failure {
    Spec(String),
    Runtime(String),
}

fn spec_err<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Spec(msg.into()))
}

impl From<DriverError> for Failure {
    fn from(err: DriverError) -> Self {
        match err {
            DriverError::InvalidConfig(_) | DriverError::InfeasibleStart => {
                Failure::Spec(err.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<clarsta::sets::SetError> for Failure {
    fn from(err: clarsta::sets::SetError) -> Self {
        Failure::Spec(err.to_string())
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run_command(&args),
        Command::Grid(args) => grid_command(&args),
    };
    match outcome {
        Ok(()) => {}
        Err(Failure::Spec(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            std::process::exit(3);
        }
    }
}

// ---------------------------------------------------------------------------
// JSON descriptors

/// Constraint set schema accepted on the command line and in grid specs.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum SetDescriptor {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64, sense: SenseDescriptor },
    Intersection { members: Vec<SetDescriptor> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SenseDescriptor {
    Le,
    Ge,
}

impl SetDescriptor {
    fn build(&self) -> Result<ConvexSet, Failure> {
        let set = match self {
            SetDescriptor::Box { lower, upper } => ConvexSet::axis_box(
                DVector::from_vec(lower.clone()),
                DVector::from_vec(upper.clone()),
            )?,
            SetDescriptor::Ball { center, radius } => {
                ConvexSet::ball(DVector::from_vec(center.clone()), *radius)?
            }
            SetDescriptor::Halfspace { normal, offset, sense } => {
                let sense = match sense {
                    SenseDescriptor::Le => HalfspaceSense::Le,
                    SenseDescriptor::Ge => HalfspaceSense::Ge,
                };
                ConvexSet::halfspace(DVector::from_vec(normal.clone()), *offset, sense)?
            }
            SetDescriptor::Intersection { members } => {
                let built: Result<Vec<_>, Failure> = members.iter().map(|m| m.build()).collect();
                ConvexSet::intersection(built?)?
            }
        };
        Ok(set)
    }

    /// Summary-column label for a set built from a descriptor.
    fn label(&self) -> &'static str {
        match self {
            SetDescriptor::Box { .. } => "custom_box",
            SetDescriptor::Ball { .. } => "custom_ball",
            SetDescriptor::Halfspace { .. } => "custom_halfspace",
            SetDescriptor::Intersection { .. } => "custom_intersection",
        }
    }
}

/// Solver overrides; every key matches a SolverConfig field name. Unknown
/// keys are rejected so typos fail loudly instead of silently running the
/// defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigOverrides {
    p: Option<usize>,
    p_rand: Option<usize>,
    delta0: Option<f64>,
    delta_min: Option<f64>,
    delta_max: Option<f64>,
    gamma_dec: Option<f64>,
    gamma_inc: Option<f64>,
    k_bar: Option<usize>,
    eta1: Option<f64>,
    eta2: Option<f64>,
    mu: Option<f64>,
    eps_rad: Option<f64>,
    eps_geo: Option<f64>,
    resample_period: Option<usize>,
    max_evals: Option<usize>,
    max_iters: Option<usize>,
    seed: Option<u64>,
    infeasible_mirror_mode: Option<bool>,
    kappa_tr: Option<f64>,
}

impl ConfigOverrides {
    fn apply(&self, config: &mut SolverConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            p, p_rand, delta0, delta_min, delta_max, gamma_dec, gamma_inc, k_bar, eta1, eta2,
            mu, eps_rad, eps_geo, resample_period, max_evals, max_iters, seed,
            infeasible_mirror_mode, kappa_tr
        );
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Spec(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Spec(format!("invalid {what} {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Experiment assembly

/// One fully resolved experiment cell.
struct Experiment {
    instance: ProblemInstance,
    problem: String,
    /// Constraint label for file names and the summary row.
    constraint: String,
    n: usize,
    config: SolverConfig,
}

#[derive(Clone)]
enum ConstraintChoice {
    Named(String),
    Custom(SetDescriptor),
}

fn resolve_constraint_arg(raw: &str) -> Result<ConstraintChoice, Failure> {
    if matches!(raw, "box" | "ball" | "halfspace") {
        return Ok(ConstraintChoice::Named(raw.to_string()));
    }
    let path = Path::new(raw);
    if path.is_file() {
        return Ok(ConstraintChoice::Custom(read_json(path, "constraint descriptor")?));
    }
    spec_err(format!(
        "unknown constraint '{raw}': expected box, ball, halfspace, or a path to a JSON set \
         descriptor"
    ))
}

#[allow(clippy::too_many_arguments)]
fn build_experiment(
    problem: &str,
    constraint: &ConstraintChoice,
    n: usize,
    p: usize,
    p_rand: usize,
    seed: u64,
    budget: Option<usize>,
    overrides: &ConfigOverrides,
) -> Result<Experiment, Failure> {
    if n < 2 {
        return spec_err(format!("dimension must be at least 2, got {n}"));
    }
    let (instance, label) = match constraint {
        ConstraintChoice::Named(name) => {
            let inst = named_instance(problem, name, n).ok_or_else(|| {
                Failure::Spec(format!("unknown problem/constraint pair '{problem}'/'{name}'"))
            })?;
            (inst, name.clone())
        }
        ConstraintChoice::Custom(descriptor) => {
            (custom_instance(problem, descriptor, n)?, descriptor.label().to_string())
        }
    };
    let budget = budget.unwrap_or(100 * (n + 1));
    if budget < p + 1 {
        return spec_err(format!(
            "budget {budget} cannot fit one model build (need at least p+1 = {})",
            p + 1
        ));
    }
    let mut config = SolverConfig::new(p, p_rand, budget, seed);
    overrides.apply(&mut config);
    Ok(Experiment { instance, problem: problem.to_string(), constraint: label, n, config })
}

/// A standard objective over a user-supplied set; the standard start is
/// projected onto the set so the run begins feasible.
fn custom_instance(
    problem: &str,
    descriptor: &SetDescriptor,
    n: usize,
) -> Result<ProblemInstance, Failure> {
    let set = descriptor.build()?;
    if let Some(d) = set.dim() {
        if d != n {
            return spec_err(format!("constraint descriptor has dimension {d}, but n = {n}"));
        }
    }
    let (objective, x0_base): (Objective, DVector<f64>) = match problem {
        "chain_rosenbrock" => {
            (Arc::new(|x: &DVector<f64>| chain_rosenbrock(x)) as _, DVector::zeros(n))
        }
        "trigonometric" => {
            (Arc::new(|x: &DVector<f64>| trigonometric(x)) as _, DVector::from_element(n, 1.0))
        }
        other => return spec_err(format!("unknown problem '{other}'")),
    };
    let x0 = set.project(&x0_base, &ProjectionSettings::default())?;
    Ok(ProblemInstance {
        name: format!("{problem}_{}", descriptor.label()),
        dimension: n,
        objective,
        set,
        x0,
        known_optimum: None,
    })
}

// ---------------------------------------------------------------------------
// Execution and timing

struct TimingReport {
    total_time: f64,
    t_feval: f64,
    alg_time: f64,
}

/// Mean seconds per oracle call, measured on perturbed copies of the start
/// point before the counted run. Never reuses the run's ledger, so the
/// measurement cannot contaminate the experiment.
fn time_feval(instance: &ProblemInstance, budget: usize) -> f64 {
    let samples = budget.clamp(1, 1000);
    let n = instance.dimension;
    let clock = Instant::now();
    for i in 0..samples {
        let pt = &instance.x0 + DVector::from_element(n, 1e-9 * (i + 1) as f64);
        std::hint::black_box((instance.objective)(&pt));
    }
    clock.elapsed().as_secs_f64() / samples as f64
}

fn execute(exp: &Experiment) -> Result<(RunResult, TimingReport), Failure> {
    let t_feval = time_feval(&exp.instance, exp.config.max_evals);
    let objective = exp.instance.objective.clone();
    let result = run(|x: &DVector<f64>| objective(x), &exp.instance.set, &exp.instance.x0, &exp.config)?;
    let total_time = result.wall_time;
    let alg_time = total_time - result.nf as f64 * t_feval;
    if alg_time < 0.0 {
        eprintln!(
            "note: negative alg_time ({alg_time:.3e} s) for {}/{} seed {}; timing noise",
            exp.problem, exp.constraint, exp.config.seed
        );
    }
    Ok((result, TimingReport { total_time, t_feval, alg_time }))
}

// ---------------------------------------------------------------------------
// CSV output

const SUMMARY_HEADER: &str =
    "problem,constraint,n,p,p_rand,seed,nf,best_value,total_time_s,alg_time_s,t_feval_s,stop_reason";

const TRACE_HEADER: &str =
    "k,delta,pi_m,rho,accepted,model_test_passed,f_best,nf,sigma_min_du,resampled";

fn trace_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.iterations.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for rec in &result.iterations {
        let rho = rec.rho.map(|r| r.to_string()).unwrap_or_default();
        let sigma = rec.sigma_min_du.map(|s| s.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            rec.k,
            rec.delta,
            rec.pi_m,
            rho,
            rec.accepted,
            rec.model_test_passed,
            rec.f_best,
            rec.nf,
            sigma,
            rec.resampled
        );
    }
    out
}

fn summary_row(exp: &Experiment, result: &RunResult, timing: &TimingReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        exp.problem,
        exp.constraint,
        exp.n,
        exp.config.p,
        exp.config.p_rand,
        exp.config.seed,
        result.nf,
        result.best_value,
        timing.total_time,
        timing.alg_time,
        timing.t_feval,
        result.stop_reason
    )
}

fn trace_file_name(exp: &Experiment) -> String {
    format!(
        "trace_{}_{}_n{}_p{}_pr{}_seed{}.csv",
        exp.problem, exp.constraint, exp.n, exp.config.p, exp.config.p_rand, exp.config.seed
    )
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))
}

// ---------------------------------------------------------------------------
// Subcommands

fn run_command(args: &RunArgs) -> Result<(), Failure> {
    let overrides: ConfigOverrides = match &args.config {
        Some(path) => read_json(path, "config file")?,
        None => ConfigOverrides::default(),
    };
    let constraint = resolve_constraint_arg(&args.constraint)?;
    let exp = build_experiment(
        &args.problem,
        &constraint,
        args.n,
        args.p,
        args.p_rand,
        args.seed,
        args.budget,
        &overrides,
    )?;
    ensure_out_dir(&args.out)?;
    let (result, timing) = execute(&exp)?;
    write_file(&args.out, &trace_file_name(&exp), &trace_csv(&result))?;
    let summary = format!("{SUMMARY_HEADER}\n{}\n", summary_row(&exp, &result, &timing));
    write_file(&args.out, "summary.csv", &summary)?;
    println!(
        "{}/{} n={} seed={}: nf={} best={} stop={}",
        exp.problem,
        exp.constraint,
        exp.n,
        exp.config.seed,
        result.nf,
        result.best_value,
        result.stop_reason
    );
    Ok(())
}

/// Cross-product grid description.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    problems: Vec<String>,
    constraints: Vec<ConstraintEntry>,
    ns: Vec<usize>,
    /// Pairs `[p, p_rand]`.
    p_choices: Vec<(usize, usize)>,
    seeds: Vec<u64>,
    /// Shared budget; omitted means 100(n+1) per cell.
    #[serde(default)]
    budget: Option<usize>,
    /// Solver overrides applied to every cell.
    #[serde(default)]
    config: Option<ConfigOverrides>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ConstraintEntry {
    Name(String),
    Descriptor(SetDescriptor),
}

fn grid_command(args: &GridArgs) -> Result<(), Failure> {
    let grid: GridSpec = read_json(&args.spec, "grid spec")?;
    for (name, len) in [
        ("problems", grid.problems.len()),
        ("constraints", grid.constraints.len()),
        ("ns", grid.ns.len()),
        ("p_choices", grid.p_choices.len()),
        ("seeds", grid.seeds.len()),
    ] {
        if len == 0 {
            return spec_err(format!("grid spec has an empty '{name}' list"));
        }
    }
    let overrides = grid.config.clone().unwrap_or_default();
    ensure_out_dir(&args.out)?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut failures = 0usize;
    for &n in &grid.ns {
        for problem in &grid.problems {
            for entry in &grid.constraints {
                for &(p, p_rand) in &grid.p_choices {
                    for &seed in &grid.seeds {
                        let choice = match entry {
                            ConstraintEntry::Name(name) => ConstraintChoice::Named(name.clone()),
                            ConstraintEntry::Descriptor(d) => ConstraintChoice::Custom(d.clone()),
                        };
                        let cell = build_experiment(
                            problem,
                            &choice,
                            n,
                            p,
                            p_rand,
                            seed,
                            grid.budget,
                            &overrides,
                        )
                        .and_then(|exp| {
                            let (result, timing) = execute(&exp)?;
                            write_file(&args.out, &trace_file_name(&exp), &trace_csv(&result))?;
                            Ok(summary_row(&exp, &result, &timing))
                        });
                        match cell {
                            Ok(row) => {
                                summary.push_str(&row);
                                summary.push('\n');
                            }
                            Err(failure) => {
                                // One broken cell must not sink the rest of
                                // the grid; report and keep going.
                                failures += 1;
                                let msg = match &failure {
                                    Failure::Spec(m) | Failure::Runtime(m) => m,
                                };
                                eprintln!(
                                    "cell {problem}/n={n}/p={p}/p_rand={p_rand}/seed={seed} \
                                     failed: {msg}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    write_file(&args.out, "summary.csv", &summary)?;
    if failures > 0 {
        return Err(Failure::Runtime(format!("{failures} grid cell(s) failed")));
    }
    println!("grid complete: summary at {}", args.out.join("summary.csv").display());
    Ok(())
}
