use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Value};

use handsoff::abstraction::{validate_abstraction, Verdict};
use handsoff::config::{parse_config, ProblemConfig};
use handsoff::controller::{solve, Infeasible, Solution, SolveOptions, SolveOutcome};
use handsoff::graph::{add_extra_edges, build_graph, export_dot, export_json};
use handsoff::oracle::{brute_force_optimum, compare, OracleOptions, OracleResult, Verdict as Cmp};
use handsoff::report;
use handsoff::system::{is_admissible, reaches_origin, simulate, sparsity, HybridControlSequence};
use handsoff::walk::{enumerate_t_walks, walk_weight};
use handsoff::{Error, Result};

const EXIT_ERROR: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_INVALID: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(name = "handsoff", version, about = "Sparsest hybrid control of switched linear systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a hands-off control sequence through the transition graph.
    Solve(Common),
    /// Solve the instance exactly by exhaustive search.
    Oracle(Common),
    /// Run both solvers and compare their optima.
    Compare(Common),
    /// Build the transition graph and print it.
    Graph(Common),
    /// Check the abstraction against the system.
    Validate(Common),
    /// Simulate a given hybrid control sequence from the configured initial state.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Problem configuration (JSON).
    config: PathBuf,
    /// Seed for validation sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random samples per region and subsystem during validation.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Largest number of walks enumerated for the cross-check.
    #[arg(long, default_value_t = 100_000)]
    cap: usize,
    /// Largest number of discrete sequences the oracle may search.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
    /// Output format for `graph`.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Worker threads for the oracle.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Directory to write report files into.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated subsystem indices (1-based).
    #[arg(long, value_delimiter = ',', required = true)]
    nu: Vec<usize>,
    /// Comma-separated continuous controls.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    mu: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Dot,
    Json,
}

struct Output {
    stdout: String,
    files: Vec<(&'static str, String)>,
    code: u8,
}

impl Output {
    fn json(value: &Value, name: &'static str, code: u8) -> Self {
        let text = report::to_text(value);
        Output {
            files: vec![(name, text.clone())],
            stdout: text,
            code,
        }
    }
}

fn load(path: &Path) -> Result<ProblemConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn solve_options(c: &Common, cfg: &ProblemConfig) -> SolveOptions {
    SolveOptions {
        samples: c.samples,
        seed: c.seed,
        extra_edges: cfg.extra_edges.clone(),
        free_value: cfg.free_nonzero_default,
        origin_eps: cfg.epsilon,
    }
}

fn oracle_options(c: &Common) -> OracleOptions {
    OracleOptions {
        budget: c.budget,
        jobs: c.jobs,
        ..OracleOptions::default()
    }
}

fn run_solve(c: &Common, cfg: &ProblemConfig) -> Result<Solution> {
    solve(&cfg.system, &cfg.abstraction, &cfg.xi, cfg.horizon, &solve_options(c, cfg))
}

/// Minimum walk weight found by exhaustive enumeration, for cross-checking.
fn enumeration_json(c: &Common, cfg: &ProblemConfig, sol: &Solution) -> Result<Value> {
    let Some(graph) = &sol.graph else {
        return Ok(Value::Null);
    };
    let start = sol.abstraction.classify(&cfg.xi, handsoff::system::EPS_ZERO)?;
    match enumerate_t_walks(graph, &cfg.system, start, 0, cfg.horizon, c.cap) {
        Ok(walks) => Ok(json!({
            "walks": walks.len(),
            "min_weight": walks.iter().map(|w| walk_weight(graph, w)).min(),
        })),
        Err(Error::CapExceeded { cap, reached }) => {
            Ok(json!({ "cap_exceeded": true, "cap": cap, "reached": reached }))
        }
        Err(e) => Err(e),
    }
}

fn solve_code(sol: &Solution) -> u8 {
    match &sol.outcome {
        SolveOutcome::Solved(_) => 0,
        SolveOutcome::Infeasible(Infeasible::NoWalk { .. }) => EXIT_INFEASIBLE,
        SolveOutcome::Infeasible(Infeasible::AbstractionInvalid(_)) => EXIT_INVALID,
    }
}

fn cmd_solve(c: &Common) -> Result<Output> {
    let cfg = load(&c.config)?;
    let sol = run_solve(c, &cfg)?;
    let mut value = report::solution_json(&cfg, &sol);
    value["enumeration"] = enumeration_json(c, &cfg, &sol)?;
    let mut out = Output::json(&value, "solve.json", solve_code(&sol));
    if let Some(r) = sol.report() {
        out.files.push(("trajectory.csv", report::trajectory_csv(&r.trajectory, &r.sequence)));
    }
    Ok(out)
}

fn run_oracle(c: &Common, cfg: &ProblemConfig) -> Result<Option<OracleResult>> {
    brute_force_optimum(&cfg.system, &cfg.xi, cfg.horizon, &oracle_options(c))
}

fn cmd_oracle(c: &Common) -> Result<Output> {
    let cfg = load(&c.config)?;
    let result = run_oracle(c, &cfg)?;
    let mut value = report::oracle_json(result.as_ref());
    value["notes"] = json!(report::reference_notes(&cfg, result.as_ref().map(|r| r.total)));
    let code = if result.is_some() { 0 } else { EXIT_INFEASIBLE };
    Ok(Output::json(&value, "oracle.json", code))
}

fn cmd_compare(c: &Common) -> Result<Output> {
    let cfg = load(&c.config)?;
    let sol = run_solve(c, &cfg)?;
    let oracle = run_oracle(c, &cfg)?;
    let cmp = compare(sol.total(), oracle.as_ref().map(|r| r.total));
    let value = json!({
        "solve": report::solution_json(&cfg, &sol),
        "oracle": report::oracle_json(oracle.as_ref()),
        "comparison": report::comparison_json(&cmp),
        "notes": report::reference_notes(&cfg, cmp.oracle_total.or(cmp.graph_total)),
    });
    let code = match cmp.verdict {
        Cmp::Match => 0,
        Cmp::BothInfeasible => EXIT_INFEASIBLE,
        _ => EXIT_MISMATCH,
    };
    Ok(Output::json(&value, "compare.json", code))
}

fn cmd_graph(c: &Common) -> Result<Output> {
    let cfg = load(&c.config)?;
    let abs = cfg.abstraction.build(&cfg.system)?;
    let mut graph = build_graph(&cfg.system, &abs)?;
    if !cfg.extra_edges.is_empty() {
        graph = add_extra_edges(&graph, &cfg.system, &abs, &cfg.extra_edges, c.samples, c.seed)?;
    }
    let (text, name) = match c.format {
        Format::Dot => (export_dot(&graph), "graph.dot"),
        Format::Json => (export_json(&graph), "graph.json"),
    };
    Ok(Output {
        files: vec![(name, text.clone())],
        stdout: text,
        code: 0,
    })
}

fn cmd_validate(c: &Common) -> Result<Output> {
    let cfg = load(&c.config)?;
    let abs = cfg.abstraction.build(&cfg.system)?;
    let r = validate_abstraction(&cfg.system, &abs, c.samples, c.seed)?;
    let code = if r.verdict == Verdict::Invalid { EXIT_INVALID } else { 0 };
    let value = json!({
        "abstraction": report::abstraction_json(&abs),
        "validation": report::validation_json(&r),
    });
    Ok(Output::json(&value, "validate.json", code))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Output> {
    let cfg = load(&a.common.config)?;
    if a.nu.contains(&0) {
        return Err(Error::MalformedSequence("subsystem indices are 1-based".into()));
    }
    let seq = HybridControlSequence::new(a.nu.iter().map(|i| i - 1).collect(), a.mu.clone())?;
    let traj = simulate(&cfg.system, &cfg.xi, &seq)?;
    let value = json!({
        "sequence": report::sequence_json(&seq),
        "trajectory": report::trajectory_json(&traj),
        "sparsity": report::sparsity_json(&sparsity(&seq)),
        "admissible": is_admissible(&cfg.system, &seq)?,
        "reached_origin": reaches_origin(&traj, cfg.epsilon),
        "xi": report::nums(DVector::as_slice(&cfg.xi)),
    });
    let mut out = Output::json(&value, "simulate.json", 0);
    out.files.push(("trajectory.csv", report::trajectory_csv(&traj, &seq)));
    Ok(out)
}

fn error_json(e: &Error) -> Value {
    let path = match e {
        Error::Schema { path, .. } => Value::String(path.clone()),
        _ => Value::Null,
    };
    let message = match e {
        Error::Schema { message, .. } => message.clone(),
        other => other.to_string(),
    };
    json!({ "error": { "kind": e.kind(), "message": message, "path": path } })
}

fn write_files(dir: &Path, files: &[(&'static str, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    for (name, text) in files {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, result) = match &cli.command {
        Command::Solve(c) => (c, cmd_solve(c)),
        Command::Oracle(c) => (c, cmd_oracle(c)),
        Command::Compare(c) => (c, cmd_compare(c)),
        Command::Graph(c) => (c, cmd_graph(c)),
        Command::Validate(c) => (c, cmd_validate(c)),
        Command::Simulate(a) => (&a.common, cmd_simulate(a)),
    };
    let result = result.and_then(|out| {
        if let Some(dir) = &common.out {
            write_files(dir, &out.files)?;
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            print!("{}", out.stdout);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprint!("{}", report::to_text(&error_json(&e)));
            ExitCode::from(EXIT_ERROR)
        }
    }
}
