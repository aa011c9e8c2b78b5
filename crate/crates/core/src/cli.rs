//! The `flowmech` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible parameters (B < 1 or
//! an exponent range overflow), 4 oracle limits exceeded. A run outside the
//! regime `B >= ln m / eps^2` still succeeds; it prints a warning on stderr
//! and marks the result `"guarantee": "void"`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::benchgen::{GenError, GeneratorSpec, RandomMucaParams, RandomParams};
use crate::engine::StopRule;
use crate::mechanism::{self, MechanismError, MucaAuction, UfpAuction};
use crate::model::{InstanceError, MucaInstance, NormalizedInstance, UfpInstance};
use crate::oracle::{self, OracleError, OracleLimits};
use crate::report::{self, Guarantee, SolutionDoc};
use crate::{muca, repeat, ufp, SolveError, SolverConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE_PARAMETERS: i32 = 3;
pub const EXIT_ORACLE_LIMIT: i32 = 4;

/// Environment variable bounding the worker thread count (0 = automatic).
pub const THREADS_ENV: &str = "FLOWMECH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "flowmech", version, about = "Primal-dual unsplittable flow and auction solver with truthful payments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a solver and print the allocation with its dual certificate.
    Solve(SolveArgs),
    /// Compute critical-value payments of all winners.
    Payments(PaymentsArgs),
    /// Evaluate one agent's utility over a grid of misreports.
    Audit(AuditArgs),
    /// Exact optimum of a small instance by exhaustive search.
    Oracle(OracleArgs),
    /// Generate an instance file.
    Gen(GenArgs),
    /// Print the smallest epsilon for which the approximation guarantee applies.
    RecommendEpsilon(InputArgs),
    /// Check a solution document against its instance.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProblemArg {
    Ufp,
    Muca,
    Repeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StopArg {
    /// Stop once the price potential exceeds its threshold.
    Threshold,
    /// Route until no pending request fits.
    Exhaustion,
}

impl From<StopArg> for StopRule {
    fn from(s: StopArg) -> Self {
        match s {
            StopArg::Threshold => StopRule::WeightThreshold,
            StopArg::Exhaustion => StopRule::Exhaustion,
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Use demands and capacities as given instead of dividing by the largest demand.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long, value_enum, default_value_t = StopArg::Threshold)]
    stop: StopArg,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(value_enum)]
    problem: ProblemArg,
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write one JSON iteration record per line to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PaymentsArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Absolute payment tolerance (default 1e-6 times each winner's value).
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    io: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    request: String,
    /// Number of value misreports, evenly spaced in (0, 2 max value].
    #[arg(long, default_value_t = 50)]
    grid: usize,
    /// Number of demand misreports, evenly spaced above the true demand.
    #[arg(long, default_value_t = 5)]
    demand_grid: usize,
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(value_enum)]
    problem: ProblemArg,
    #[command(flatten)]
    io: InputArgs,
    #[arg(long, default_value_t = 10)]
    max_requests: usize,
    #[arg(long, default_value_t = 20)]
    max_paths: usize,
    /// Cap on the total number of copies (repeat only; default from capacities).
    #[arg(long)]
    max_copies: Option<usize>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(subcommand)]
    family: GenFamily,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GenFamily {
    DirectedLb {
        #[arg(long = "B")]
        b: usize,
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        subdivide: bool,
    },
    UndirectedLb {
        #[arg(long = "B")]
        b: usize,
    },
    MucaLb {
        #[arg(long)]
        p: usize,
        #[arg(long = "B")]
        b: u64,
        #[arg(long)]
        m: usize,
    },
    Random {
        #[arg(long, default_value_t = 8)]
        vertices: usize,
        #[arg(long, default_value_t = 12)]
        edges: usize,
        #[arg(long, default_value_t = 10)]
        requests: usize,
        #[arg(long = "B", default_value_t = 1.0)]
        b: f64,
        #[arg(long, default_value_t = 1.0)]
        value_min: f64,
        #[arg(long, default_value_t = 10.0)]
        value_max: f64,
        #[arg(long, default_value_t = 0.1)]
        demand_min: f64,
        #[arg(long, default_value_t = 1.0)]
        demand_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        undirected: bool,
    },
    RandomMuca {
        #[arg(long, default_value_t = 6)]
        items: usize,
        #[arg(long, default_value_t = 10)]
        requests: usize,
        #[arg(long = "B", default_value_t = 1)]
        b: u64,
        #[arg(long, default_value_t = 3)]
        max_bundle: usize,
        #[arg(long, default_value_t = 1.0)]
        value_min: f64,
        #[arg(long, default_value_t = 10.0)]
        value_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    io: InputArgs,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID_INPUT,
            message: message.into(),
        }
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Failure::invalid(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::BTooSmall(_) | SolveError::ExponentRange(_) => EXIT_INFEASIBLE_PARAMETERS,
            SolveError::EpsilonOutOfRange(_) | SolveError::Invariant(_) => EXIT_INVALID_INPUT,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<MechanismError> for Failure {
    fn from(e: MechanismError) -> Self {
        match e {
            MechanismError::Solve(s) => s.into(),
            other => Failure::invalid(other.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        Failure {
            code: EXIT_ORACLE_LIMIT,
            message: e.to_string(),
        }
    }
}

impl From<GenError> for Failure {
    fn from(e: GenError) -> Self {
        Failure::invalid(e.to_string())
    }
}

enum Loaded {
    Ufp(UfpInstance<f64>),
    Muca(MucaInstance<f64>),
}

fn read(path: &FsPath) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &FsPath) -> Result<Loaded, Failure> {
    let text = read(path)?;
    let is_muca = matches!(
        serde_json::from_str::<serde_json::Value>(&text),
        Ok(serde_json::Value::Object(map)) if map.contains_key("items")
    );
    Ok(if is_muca {
        Loaded::Muca(MucaInstance::from_json(&text)?)
    } else {
        Loaded::Ufp(UfpInstance::from_json(&text)?)
    })
}

fn load_ufp(path: &FsPath) -> Result<UfpInstance<f64>, Failure> {
    match load(path)? {
        Loaded::Ufp(i) => Ok(i),
        Loaded::Muca(_) => Err(Failure::invalid("expected a flow instance, found an auction instance")),
    }
}

fn load_muca(path: &FsPath) -> Result<MucaInstance<f64>, Failure> {
    match load(path)? {
        Loaded::Muca(i) => Ok(i),
        Loaded::Ufp(_) => Err(Failure::invalid("expected an auction instance, found a flow instance")),
    }
}

/// Output buffered while a command runs on the worker pool.
#[derive(Default)]
struct Io {
    stdout: Vec<u8>,
    stderr: Vec<u8>,
}

impl Io {
    fn emit<T: Serialize>(&mut self, output: Option<&FsPath>, doc: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(doc).expect("document serializes");
        text.push('\n');
        self.write_text(output, &text)
    }

    fn write_text(&mut self, output: Option<&FsPath>, text: &str) -> Result<(), Failure> {
        match output {
            Some(p) => std::fs::write(p, text).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", p.display()))),
            None => {
                self.stdout.extend_from_slice(text.as_bytes());
                Ok(())
            }
        }
    }

    fn warn(&mut self, value: serde_json::Value) {
        self.stderr.extend_from_slice(format!("{value}\n").as_bytes());
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), Failure> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Failure::invalid(format!("epsilon = {epsilon} must lie in (0, 1]")))
    }
}

fn normalized(inst: &UfpInstance<f64>, no_normalize: bool) -> Result<NormalizedInstance<f64>, Failure> {
    let norm = if no_normalize {
        NormalizedInstance::as_given(inst)?
    } else {
        NormalizedInstance::normalize(inst)
    };
    if !norm.is_b_sufficient() {
        return Err(Failure {
            code: EXIT_INFEASIBLE_PARAMETERS,
            message: SolveError::BTooSmall(norm.b()).to_string(),
        });
    }
    Ok(norm)
}

fn guarantee(io: &mut Io, holds: bool, b: f64, m: usize, epsilon: f64) -> Guarantee {
    if !holds {
        io.warn(json!({
            "warning": "guarantee-void",
            "message": "B is below ln m / epsilon^2; the approximation guarantee does not apply",
            "B": b,
            "m": m,
            "epsilon": epsilon,
            "required_B": (m as f64).ln() / (epsilon * epsilon),
        }));
    }
    Guarantee::from_bool(holds)
}

fn config(s: &SolverArgs) -> Result<SolverConfig<f64>, Failure> {
    check_epsilon(s.epsilon)?;
    Ok(SolverConfig::new(s.epsilon).with_stop_rule(s.stop.into()))
}

fn cmd_solve(io: &mut Io, a: &SolveArgs) -> Result<(), Failure> {
    let cfg = config(&a.solver)?;
    let out = a.io.output.as_deref();
    let (doc, trace): (SolutionDoc, String) = match a.problem {
        ProblemArg::Ufp | ProblemArg::Repeat => {
            let inst = load_ufp(&a.io.input)?;
            let norm = normalized(&inst, a.solver.no_normalize)?;
            let g = guarantee(io, norm.guarantee_holds(cfg.epsilon), norm.b(), inst.edge_count(), cfg.epsilon);
            let ids = |r: usize| inst.requests[r].id.clone();
            if a.problem == ProblemArg::Ufp {
                let sol = ufp::solve_ufp_with(&norm, &cfg)?;
                (report::ufp_solution_doc(&inst, &sol, g), report::trace_lines(&sol.trace.records, ids))
            } else {
                let sol = repeat::solve_ufp_repeat_with(&norm, &cfg)?;
                (report::repeat_solution_doc(&inst, &sol, g), report::trace_lines(&sol.trace.records, ids))
            }
        }
        ProblemArg::Muca => {
            let inst = load_muca(&a.io.input)?;
            let g = guarantee(io, inst.guarantee_holds(cfg.epsilon), inst.b() as f64, inst.items().len(), cfg.epsilon);
            let sol = muca::solve_muca_with(&inst, &cfg)?;
            let ids = |r: usize| inst.requests()[r].id.clone();
            (report::muca_solution_doc(&inst, &sol, g), report::trace_lines(&sol.trace.records, ids))
        }
    };
    if let Some(p) = &a.trace {
        std::fs::write(p, trace).map_err(|e| Failure::invalid(format!("cannot write {}: {e}", p.display())))?;
    }
    io.emit(out, &doc)
}

fn check_tolerance(t: Option<f64>) -> Result<(), Failure> {
    match t {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(Failure::invalid(format!("tolerance = {t} must be positive"))),
        _ => Ok(()),
    }
}

fn cmd_payments(io: &mut Io, a: &PaymentsArgs) -> Result<(), Failure> {
    let cfg = config(&a.solver)?;
    check_tolerance(a.tolerance)?;
    let profile = match load(&a.io.input)? {
        Loaded::Ufp(inst) => {
            let norm = normalized(&inst, a.solver.no_normalize)?;
            guarantee(io, norm.guarantee_holds(cfg.epsilon), norm.b(), inst.edge_count(), cfg.epsilon);
            mechanism::payments(&UfpAuction::new(norm, cfg), a.tolerance)?
        }
        Loaded::Muca(inst) => {
            guarantee(io, inst.guarantee_holds(cfg.epsilon), inst.b() as f64, inst.items().len(), cfg.epsilon);
            mechanism::payments(&MucaAuction::new(inst, cfg), a.tolerance)?
        }
    };
    io.emit(a.io.output.as_deref(), &report::payments_doc(&profile))
}

/// `k` evenly spaced demands in `(d, 1]`.
fn demand_grid(d: f64, k: usize) -> Vec<f64> {
    let mut out: Vec<f64> = (1..=k).map(|i| d + (1.0 - d) * i as f64 / k as f64).collect();
    out.dedup();
    out.retain(|&x| x > d);
    out
}

fn cmd_audit(io: &mut Io, a: &AuditArgs) -> Result<(), Failure> {
    let cfg = config(&a.solver)?;
    check_tolerance(a.tolerance)?;
    let unknown = || Failure::invalid(format!("unknown request id {}", a.request));
    let doc = match load(&a.io.input)? {
        Loaded::Ufp(inst) => {
            let r = inst.request_index(&a.request).ok_or_else(unknown)?;
            let norm = normalized(&inst, a.solver.no_normalize)?;
            let top = inst.requests.iter().map(|q| q.value).fold(0.0, f64::max);
            let values = mechanism::value_grid(2.0 * top, a.grid);
            let demands = demand_grid(norm.inner().requests[r].demand, a.demand_grid);
            let scale = norm.scale();
            let rep = mechanism::utility_audit(&UfpAuction::new(norm, cfg), r, &values, Some(&demands), a.tolerance)?;
            report::audit_doc(&rep, scale)
        }
        Loaded::Muca(inst) => {
            let r = inst.request_index(&a.request).ok_or_else(unknown)?;
            let top = inst.requests().iter().map(|q| q.value).fold(0.0, f64::max);
            let values = mechanism::value_grid(2.0 * top, a.grid);
            let rep = mechanism::utility_audit(&MucaAuction::new(inst, cfg), r, &values, None, a.tolerance)?;
            report::audit_doc(&rep, 1.0)
        }
    };
    io.emit(a.io.output.as_deref(), &doc)
}

fn cmd_oracle(io: &mut Io, a: &OracleArgs) -> Result<(), Failure> {
    let limits = OracleLimits {
        max_requests: a.max_requests,
        max_paths: a.max_paths,
    };
    let doc = match a.problem {
        ProblemArg::Ufp => {
            let inst = load_ufp(&a.io.input)?;
            report::ufp_oracle_doc(&inst, &oracle::brute_force_opt_ufp(&inst, &limits)?)
        }
        ProblemArg::Muca => {
            let inst = load_muca(&a.io.input)?;
            report::muca_oracle_doc(&inst, &oracle::brute_force_opt_muca(&inst, limits.max_requests)?)
        }
        ProblemArg::Repeat => {
            let inst = load_ufp(&a.io.input)?;
            // Enough copies to saturate every edge with the smallest demand.
            let cap = a.max_copies.unwrap_or_else(|| {
                let total: f64 = inst.edges.iter().map(|e| e.capacity).sum();
                let d_min = inst.requests.iter().map(|r| r.demand).fold(f64::INFINITY, f64::min);
                if d_min.is_finite() {
                    (total / d_min).floor() as usize
                } else {
                    0
                }
            });
            report::repeat_oracle_doc(&inst, &oracle::brute_force_opt_repeat(&inst, cap, &limits)?)
        }
    };
    io.emit(a.io.output.as_deref(), &doc)
}

fn cmd_gen(io: &mut Io, a: &GenArgs) -> Result<(), Failure> {
    let spec = match &a.family {
        GenFamily::DirectedLb { b, ell, subdivide } => GeneratorSpec::DirectedLb {
            b: *b,
            ell: *ell,
            subdivide: *subdivide,
        },
        GenFamily::UndirectedLb { b } => GeneratorSpec::UndirectedLb { b: *b },
        GenFamily::MucaLb { p, b, m } => GeneratorSpec::MucaLb { p: *p, b: *b, m: *m },
        GenFamily::Random {
            vertices,
            edges,
            requests,
            b,
            value_min,
            value_max,
            demand_min,
            demand_max,
            seed,
            undirected,
        } => GeneratorSpec::Random(RandomParams {
            vertices: *vertices,
            edges: *edges,
            requests: *requests,
            b: *b,
            value_range: (*value_min, *value_max),
            demand_range: (*demand_min, *demand_max),
            seed: *seed,
            directed: !undirected,
        }),
        GenFamily::RandomMuca {
            items,
            requests,
            b,
            max_bundle,
            value_min,
            value_max,
            seed,
        } => GeneratorSpec::RandomMuca(RandomMucaParams {
            items: *items,
            requests: *requests,
            b: *b,
            max_bundle: *max_bundle,
            value_range: (*value_min, *value_max),
            seed: *seed,
        }),
    };
    let generated = spec.generate::<f64>()?;
    let mut text = generated.to_json();
    text.push('\n');
    io.write_text(a.output.as_deref(), &text)
}

fn cmd_recommend(io: &mut Io, a: &InputArgs) -> Result<(), Failure> {
    let (m, b) = match load(&a.input)? {
        Loaded::Ufp(inst) => (inst.edge_count(), NormalizedInstance::normalize(&inst).b()),
        Loaded::Muca(inst) => (inst.items().len(), inst.b() as f64),
    };
    let eps = ((m as f64).ln() / b).sqrt();
    let note = if eps <= 1.0 {
        format!("B >= ln m / epsilon^2 holds for every epsilon in [{eps}, 1]; solving with epsilon / 6 bounds the ratio by (1 + epsilon) e / (e - 1) for ufp and muca, and by 1 + epsilon for repeat")
    } else {
        "no epsilon in (0, 1] satisfies B >= ln m / epsilon^2; results carry no approximation guarantee".to_string()
    };
    let doc = json!({
        "epsilon_max": eps,
        "m": m,
        "B": b,
        "applicable": eps <= 1.0,
        "note": note,
    });
    io.emit(a.output.as_deref(), &doc)
}

fn cmd_verify(io: &mut Io, a: &VerifyArgs) -> Result<(), Failure> {
    let text = read(&a.solution)?;
    let doc: SolutionDoc = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("solution document: {e}")))?;
    let result = match load(&a.io.input)? {
        Loaded::Ufp(inst) => report::verify_ufp(&inst, &doc),
        Loaded::Muca(inst) => report::verify_muca(&inst, &doc),
    };
    io.emit(a.io.output.as_deref(), &result)?;
    if result.feasible {
        Ok(())
    } else {
        Err(Failure::invalid("solution is infeasible"))
    }
}

fn dispatch(io: &mut Io, cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(io, a),
        Command::Payments(a) => cmd_payments(io, a),
        Command::Audit(a) => cmd_audit(io, a),
        Command::Oracle(a) => cmd_oracle(io, a),
        Command::Gen(a) => cmd_gen(io, a),
        Command::RecommendEpsilon(a) => cmd_recommend(io, a),
        Command::Verify(a) => cmd_verify(io, a),
    }
}

fn thread_count() -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::invalid(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                EXIT_INVALID_INPUT
            } else {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            };
        }
    };
    let mut io = Io::default();
    let result = thread_count().and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Failure::invalid(format!("cannot start worker threads: {e}")))?;
        pool.install(|| dispatch(&mut io, &cli))
    });
    let _ = stdout.write_all(&io.stdout);
    let _ = stderr.write_all(&io.stderr);
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
