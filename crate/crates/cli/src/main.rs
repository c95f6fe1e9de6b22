use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use reachstl::occupancy::Occupancy;
use reachstl::problem::{generate_benchmark, parse_problem, Problem, BENCHMARK_NAMES};
use reachstl::reach::ReachSequence;
use reachstl::sim::random_trajectory;
use reachstl::stl::{formula_horizon, monitor_trace};
use reachstl::verify::{
    reach_for_formula, tune_truncation_order, verify, IterationRecord, Method, Verdict, VerdictKind, VerifierConfig,
};

const EXIT_INPUT: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_COMPUTE: u8 = 5;

/// Switching period of Monte Carlo inputs.
const MC_DT: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] reachstl::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{what}: {source}")]
    Json {
        what: &'static str,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use reachstl::Error as E;
        match self {
            CliError::Io { .. } | CliError::Core(E::Io(_)) => EXIT_IO,
            CliError::Json { .. } | CliError::Usage(_) => EXIT_INPUT,
            CliError::Core(
                E::DimensionMismatch { .. }
                | E::InvalidParameter(_)
                | E::OutOfRange(_)
                | E::Parse(_)
                | E::Unsupported(_)
                | E::Problem { .. },
            ) => EXIT_INPUT,
            CliError::Core(_) => EXIT_COMPUTE,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Reachability-based verification of signal temporal logic specifications for linear systems.
///
/// Exit codes: 0 safe, 1 unsafe, 2 unknown, 3 invalid input, 4 I/O error, 5 numerical failure.
/// Log verbosity is read from REACHSTL_LOG (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "reachstl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the specification or return a counterexample.
    Verify(VerifyArgs),
    /// Search for counterexamples only; never reports safe.
    FalsifyOnly(VerifyArgs),
    /// Predict the states from which the specification can still be satisfied.
    Predict(PredictArgs),
    /// Write a generated benchmark problem file.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct ProblemArgs {
    /// Problem JSON file.
    #[arg(long)]
    problem: PathBuf,
    /// STL specification overriding the one in the problem file.
    #[arg(long)]
    spec: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Wholeset,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Maximum number of refinement iterations.
    #[arg(long, default_value_t = 12)]
    max_iter: usize,
    /// Initial time step (default: the formula horizon).
    #[arg(long)]
    dt_init: Option<f64>,
    /// Margin for strict inequalities in the counterexample search.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Also run a comparison method and report its verdict.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Write per-step interval projections and 2-D shadows to reach.json.
    #[arg(long)]
    emit_reach: bool,
    /// Coordinates (1-based) of the 2-D shadows in reach.json, e.g. `1,2`. Repeatable.
    #[arg(long = "shadow", value_parser = parse_pair)]
    shadows: Vec<(usize, usize)>,
    /// Seed for Monte Carlo validation with random trajectories.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo trajectories.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Time step (default: the formula horizon divided by 20).
    #[arg(long)]
    dt: Option<f64>,
    /// Taylor truncation order (default: tuned for the time step).
    #[arg(long)]
    kappa: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Benchmark name.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(BENCHMARK_NAMES))]
    name: String,
    /// Generator parameters as a JSON object, e.g. '{"n": 12}'.
    #[arg(long)]
    params: Option<String>,
    /// Output file (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated coordinates")?;
    let a: usize = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{e}"))?;
    if a == 0 || b == 0 || a == b {
        return Err("coordinates are 1-based and must differ".into());
    }
    Ok((a - 1, b - 1))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("REACHSTL_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let res = match cli.command {
        Command::Verify(a) => run_verify(&a, false),
        Command::FalsifyOnly(a) => run_verify(&a, true),
        Command::Predict(a) => run_predict(&a),
        Command::Bench(a) => run_bench(&a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        what: "serializing output",
        source,
    })?;
    text.push('\n');
    write(path, &text)
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads the problem, replacing its specification when one is given inline.
fn load(args: &ProblemArgs) -> Result<Problem> {
    let text = read(&args.problem)?;
    let Some(spec) = &args.spec else {
        return Ok(parse_problem(&text)?.resolve()?);
    };
    let mut value: Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        what: "problem file",
        source,
    })?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Usage("problem file must be a JSON object".into()))?;
    obj.insert("spec".into(), Value::String(spec.clone()));
    Ok(parse_problem(&value.to_string())?.resolve()?)
}

#[derive(Debug, Serialize)]
struct VerdictJson {
    result: VerdictKind,
    iterations: usize,
    dt_final: f64,
    kappa: usize,
    wall_time_ms: f64,
    mode: &'static str,
    spec: String,
    diagnostics: Vec<String>,
    history: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<MonteCarloJson>,
}

#[derive(Debug, Serialize)]
struct BaselineJson {
    method: &'static str,
    result: VerdictKind,
    iterations: usize,
    dt_final: f64,
    wall_time_ms: f64,
    diagnostics: Vec<String>,
}

#[derive(Debug, Serialize)]
struct MonteCarloJson {
    seed: u64,
    samples: usize,
    violations: usize,
    input_period: f64,
}

fn timed_verify(p: &Problem, cfg: &VerifierConfig) -> Result<(Verdict, f64)> {
    let start = Instant::now();
    let v = verify(&p.system, &p.x0, &p.inputs, &p.spec, cfg)?;
    Ok((v, start.elapsed().as_secs_f64() * 1e3))
}

fn run_verify(args: &VerifyArgs, falsify_only: bool) -> Result<u8> {
    let p = load(&args.problem)?;
    let mut cfg = VerifierConfig {
        max_iterations: args.max_iter,
        initial_dt: args.dt_init,
        falsify_only,
        ..VerifierConfig::default()
    };
    if let Some(eps) = args.epsilon {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(CliError::Usage(format!("--epsilon must be positive, got {eps}")));
        }
        cfg.epsilon = eps;
    }
    if let Some((i, j)) = args.shadows.iter().copied().find(|&(i, j)| i.max(j) >= p.system.dim()) {
        return Err(CliError::Usage(format!(
            "--shadow {},{} exceeds the state dimension {}",
            i + 1,
            j + 1,
            p.system.dim()
        )));
    }
    let out = &args.problem.out;
    create_dir(out)?;

    let (verdict, wall) = timed_verify(&p, &cfg)?;
    log::info!("verdict {} after {} iterations", verdict.result.as_str(), verdict.iterations);

    let mut counterexample = None;
    if let Some(tr) = &verdict.counterexample {
        write(&out.join("counterexample.csv"), &tr.to_csv())?;
        counterexample = Some("counterexample.csv".to_string());
    }

    let baseline = match args.baseline {
        Some(Baseline::Wholeset) => {
            let bcfg = VerifierConfig {
                method: Method::Wholeset,
                falsify_only: false,
                ..cfg
            };
            let (b, ms) = timed_verify(&p, &bcfg)?;
            Some(BaselineJson {
                method: "wholeset",
                result: b.result,
                iterations: b.iterations,
                dt_final: b.dt,
                wall_time_ms: ms,
                diagnostics: b.diagnostics,
            })
        }
        None => None,
    };

    let monte_carlo = match args.seed {
        Some(seed) => Some(monte_carlo(&p, seed, args.samples)?),
        None => None,
    };
    let mut diagnostics = verdict.diagnostics.clone();
    if let Some(mc) = &monte_carlo {
        if verdict.result == VerdictKind::Safe && mc.violations > 0 {
            log::error!("{} of {} random trajectories violate a specification verified safe", mc.violations, mc.samples);
            diagnostics.push(format!("monte carlo found {} violating trajectories", mc.violations));
        }
    }

    if args.emit_reach {
        if verdict.history.iter().any(|r| r.steps > 0) {
            let seq = reach_for_formula(&p.system, &p.x0, &p.inputs, &p.spec, verdict.dt, verdict.kappa)?;
            let shadows = if args.shadows.is_empty() && p.system.dim() >= 2 {
                vec![(0, 1)]
            } else {
                args.shadows.clone()
            };
            write_json(&out.join("reach.json"), &reach_json(&seq, &shadows)?)?;
        } else {
            log::warn!("no reachable sets were computed; reach.json is not written");
        }
    }

    write_json(
        &out.join("verdict.json"),
        &VerdictJson {
            result: verdict.result,
            iterations: verdict.iterations,
            dt_final: verdict.dt,
            kappa: verdict.kappa,
            wall_time_ms: wall,
            mode: if falsify_only { "falsify-only" } else { "verify" },
            spec: p.spec_text.clone(),
            diagnostics,
            history: verdict.history,
            counterexample,
            baseline,
            monte_carlo,
        },
    )?;
    println!("{}", verdict.result.as_str());
    Ok(match verdict.result {
        VerdictKind::Safe => 0,
        VerdictKind::Unsafe => 1,
        VerdictKind::Unknown => 2,
    })
}

fn monte_carlo(p: &Problem, seed: u64, samples: usize) -> Result<MonteCarloJson> {
    let horizon = formula_horizon(&p.spec);
    let period = if horizon > 0.0 { MC_DT.min(horizon / 4.0) } else { MC_DT };
    let steps = ((horizon / period) - 1e-9).ceil().max(1.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for _ in 0..samples {
        let tr = random_trajectory(&mut rng, &p.system, &p.x0, &p.inputs, period, steps, 4, 0.3)?;
        if !monitor_trace(&p.spec, &tr.to_trace())? {
            violations += 1;
        }
    }
    Ok(MonteCarloJson {
        seed,
        samples,
        violations,
        input_period: period,
    })
}

#[derive(Debug, Serialize)]
struct ShadowJson {
    dims: [usize; 2],
    vertices: Vec<[f64; 2]>,
}

#[derive(Debug, Serialize)]
struct ReachStepJson {
    t_start: f64,
    t_end: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    shadows: Vec<ShadowJson>,
}

#[derive(Debug, Serialize)]
struct ReachJson {
    dt: f64,
    kappa: usize,
    steps: Vec<ReachStepJson>,
}

/// Time-interval sets as boxes and polygons; dimensions are reported 1-based.
fn reach_json(seq: &ReachSequence, shadows: &[(usize, usize)]) -> Result<ReachJson> {
    let mut steps = Vec::with_capacity(seq.rtau.len());
    for (i, z) in seq.rtau.iter().enumerate() {
        let b = z.interval_enclosure();
        let mut sh = Vec::with_capacity(shadows.len());
        for &(a, c) in shadows {
            sh.push(ShadowJson {
                dims: [a + 1, c + 1],
                vertices: z.polygon(a, c)?,
            });
        }
        steps.push(ReachStepJson {
            t_start: i as f64 * seq.dt,
            t_end: (i + 1) as f64 * seq.dt,
            lo: b.lo.iter().copied().collect(),
            hi: b.hi.iter().copied().collect(),
            shadows: sh,
        });
    }
    Ok(ReachJson {
        dt: seq.dt,
        kappa: seq.kappa,
        steps,
    })
}

fn run_predict(args: &PredictArgs) -> Result<u8> {
    let p = load(&args.problem)?;
    let horizon = formula_horizon(&p.spec);
    let dt = match args.dt {
        Some(d) => d,
        None if horizon > 0.0 => horizon / 20.0,
        None => 1.0,
    };
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
    }
    let kappa = match args.kappa {
        Some(k) => k,
        None => tune_truncation_order(&p.system.a, dt, 100)?,
    };
    create_dir(&args.problem.out)?;
    let start = Instant::now();
    let occ = Occupancy::compute(&p.system, &p.x0, &p.inputs, &p.spec, dt, kappa)?;
    log::info!(
        "occupancy: {} intervals, {} polytopes, {:.1} ms",
        occ.seq.steps(),
        occ.legal.len(),
        start.elapsed().as_secs_f64() * 1e3
    );
    write_json(&args.problem.out.join("occupancy.json"), &occ.to_json())?;
    println!("{} polytopes over {} intervals", occ.legal.len(), occ.seq.steps());
    Ok(0)
}

fn run_bench(args: &BenchArgs) -> Result<u8> {
    let params = match &args.params {
        Some(text) => serde_json::from_str(text).map_err(|source| CliError::Json {
            what: "--params",
            source,
        })?,
        None => Value::Null,
    };
    let pf = generate_benchmark(&args.name, &params)?;
    pf.resolve()?;
    let text = pf.to_json()?;
    match &args.out {
        Some(path) => write(path, &text)?,
        None => print!("{text}"),
    }
    Ok(0)
}
