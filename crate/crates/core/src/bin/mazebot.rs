use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::{json, Value};

use mazebot::automaton::{compile_rational, parse_automaton, verify_gadget, write_automaton};
use mazebot::harness::{
    coverage_experiment, default_checkpoints, distribution_experiment, flag_choice_experiment, increment_experiment,
    parse_seed, resolve_seed, return_experiment, simulate, ExperimentConfig, ExperimentReport, HarnessError, Results,
    Target, DEFAULT_BUDGET, SEED_ENV,
};
use mazebot::lattice::FlagSet;
use mazebot::walks::{
    balanced_parts, classify_recurrence, dp_step_distribution, first_return_cdf, max_multinomial, mixture_distribution,
    shifted_bound_sweep, stirling_asymptotic, z3_origin_return_exact, z3_upper_bound, ArithmeticMode, MixtureSpec,
    WalkError, WalkSpec,
};

#[derive(Parser)]
#[command(name = "mazebot", version, about = "Maze-robot automata on integer lattices")]
struct Cli {
    /// Master seed, decimal or 0x-hex. Overrides MAZEBOT_SEED.
    #[arg(long, global = true, value_parser = seed_arg)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    radius: Option<u64>,
    #[arg(long, global = true, default_value = "rational")]
    mode: ArithmeticMode,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Record wall-clock time in the report (breaks byte-identical output).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

fn seed_arg(s: &str) -> Result<u64, String> {
    parse_seed(s).ok_or_else(|| format!("`{s}` is not an unsigned 64-bit integer"))
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Flags {
    None,
    Origin,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Position,
    Increments,
    FlagChoice,
}

#[derive(Subcommand)]
enum Command {
    /// Run one program (or an automaton file) for --budget steps.
    Simulate {
        target: Option<Target>,
        /// Automaton description file, compiled before running.
        #[arg(long = "in", conflicts_with = "target")]
        input: Option<PathBuf>,
        /// Flag set for --in automata.
        #[arg(long, value_enum, default_value_t = Flags::None)]
        flags: Flags,
        /// Include the step-by-step trajectory.
        #[arg(long)]
        log: bool,
    },
    /// Fraction of the L1 ball of --radius visited by each trial.
    Coverage {
        target: Target,
        /// Comma-separated checkpoints; default powers of ten up to --budget.
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
    },
    /// First returns to the origin, with exact oracles.
    Returns {
        target: Target,
        #[arg(long, value_delimiter = ',')]
        checkpoints: Vec<u64>,
    },
    /// Empirical law against its exact counterpart (chi-square).
    Compare {
        target: Target,
        #[arg(long, default_value_t = 8)]
        checkpoint: u64,
        #[arg(long, value_enum, default_value_t = Kind::Position)]
        kind: Kind,
    },
    /// Exact random-walk computations.
    Analyze {
        #[command(subcommand)]
        what: Analysis,
    },
    /// Compile a rational automaton file to a fair-bit automaton.
    Compile {
        #[arg(long = "in")]
        input: PathBuf,
        /// Write the compiled automaton here; otherwise it is embedded in the report.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Check every choice gadget by exact absorption.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand)]
enum Analysis {
    /// Exact P(Y_n = 0) for the simple walk on Z^3.
    Z3Return {
        #[arg(long)]
        n: u64,
    },
    /// P(Y_n = 0) on Z^3 for n up to --max-n.
    Z3Table {
        #[arg(long, default_value_t = 30)]
        max_n: u64,
    },
    /// P(Y_2n = 0) against the multinomial upper bound and its Stirling form.
    Bounds {
        #[arg(long, default_value_t = 200)]
        max_n: u64,
    },
    /// Largest trinomial coefficient n!/(i!j!k!).
    Multinomial {
        #[arg(long)]
        n: u64,
    },
    /// P(Y_2n = x) <= P(Y_2n = 0) over a range of shifts.
    Shifted {
        #[arg(long, default_value_t = 12)]
        max_n: u64,
        #[arg(long, default_value_t = 4)]
        max_l1: u64,
    },
    /// Binomial mixture formula against the one-step mixed walk.
    Mixture {
        #[arg(long, default_value = "simple-z3")]
        a: String,
        #[arg(long, default_value = "lazy-z3")]
        b: String,
        /// Probability of a step from the first walk.
        #[arg(long, default_value = "1/2")]
        p: String,
        #[arg(long, default_value_t = 12)]
        max_n: u64,
    },
    /// Recurrence evidence from the origin-return series.
    Classify {
        #[arg(long, default_value = "simple-z2")]
        walk: String,
        #[arg(long, default_value_t = 200)]
        horizon: u64,
    },
    /// Exact position law after --n steps, in the grid text format.
    Grid {
        #[arg(long, default_value = "simple-z2")]
        walk: String,
        #[arg(long)]
        n: u64,
    },
    /// Exact first-return CDF.
    FirstReturn {
        #[arg(long, default_value = "simple-z1")]
        walk: String,
        #[arg(long, default_value_t = 20)]
        horizon: u64,
    },
}

enum Output {
    Report(Box<ExperimentReport>),
    Text(String),
}

struct Failure {
    error: HarnessError,
    code: u8,
}

impl From<HarnessError> for Failure {
    fn from(error: HarnessError) -> Self {
        Failure { error, code: 1 }
    }
}

impl From<WalkError> for Failure {
    fn from(e: WalkError) -> Self {
        HarnessError::from(e).into()
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    HarnessError::Invalid(msg.into()).into()
}

fn walk_by_name(name: &str) -> Result<WalkSpec, Failure> {
    let (kind, dim) = name
        .split_once("-z")
        .ok_or_else(|| invalid(format!("walk `{name}`: expected simple-zK or lazy-zK")))?;
    let dim: usize = dim
        .parse()
        .map_err(|_| invalid(format!("walk `{name}`: bad dimension")))?;
    if !(1..=8).contains(&dim) {
        return Err(invalid(format!("walk `{name}`: dimension must be 1..=8")));
    }
    match kind {
        "simple" => Ok(WalkSpec::simple(dim)),
        "lazy" => Ok(WalkSpec::lazy(dim)),
        _ => Err(invalid(format!("walk `{name}`: expected simple-zK or lazy-zK"))),
    }
}

fn parse_ratio(s: &str) -> Result<BigRational, Failure> {
    let bad = || invalid(format!("`{s}` is not a fraction"));
    let (n, d) = s.split_once('/').unwrap_or((s, "1"));
    let n: BigInt = n.trim().parse().map_err(|_| bad())?;
    let d: BigInt = d.trim().parse().map_err(|_| bad())?;
    if d == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

fn read(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())).into())
}

fn config(cli: &Cli, target: Target) -> Result<ExperimentConfig, Failure> {
    let env = std::env::var(SEED_ENV).ok();
    let (seed, source) = resolve_seed(cli.seed, env.as_deref())?;
    let mut cfg = ExperimentConfig::new(target).mode(cli.mode);
    cfg.seed = seed;
    cfg.seed_source = source;
    if let Some(b) = cli.budget {
        cfg.budget = b;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(r) = cli.radius {
        cfg.radius = r;
    }
    cfg.out = cli.out.as_ref().map(|p| p.display().to_string());
    Ok(cfg)
}

fn analysis(cli: &Cli, what: &Analysis) -> Result<Output, Failure> {
    let mode = cli.mode;
    let value = match what {
        Analysis::Z3Return { n } => {
            let p = z3_origin_return_exact(*n);
            json!({"analysis": "z3-return", "n": n, "value": p.to_string(), "value_f64": f(&p)})
        }
        Analysis::Z3Table { max_n } => {
            let rows: Vec<Value> = (0..=*max_n)
                .map(|n| {
                    let p = z3_origin_return_exact(n);
                    json!({"n": n, "value": p.to_string(), "value_f64": f(&p)})
                })
                .collect();
            json!({"analysis": "z3-table", "rows": rows})
        }
        Analysis::Bounds { max_n } => {
            let rows: Vec<Value> = (1..=*max_n)
                .map(|n| {
                    let p = z3_origin_return_exact(2 * n);
                    let u = z3_upper_bound(n);
                    let s = stirling_asymptotic(n);
                    json!({
                        "n": n,
                        "return_2n": f(&p),
                        "upper_bound": f(&u),
                        "holds": p <= u,
                        "equal": p == u,
                        "stirling": s,
                        "bound_over_stirling": f(&u) / s,
                    })
                })
                .collect();
            let all = rows.iter().all(|r| r["holds"] == true);
            json!({"analysis": "bounds", "all_hold": all, "rows": rows})
        }
        Analysis::Multinomial { n } => {
            json!({"analysis": "multinomial", "n": n, "value": max_multinomial(*n).to_string(), "parts": balanced_parts(*n)})
        }
        Analysis::Shifted { max_n, max_l1 } => {
            let cases = shifted_bound_sweep(*max_n, *max_l1);
            let failures: Vec<Value> = cases
                .iter()
                .filter(|c| !c.holds)
                .map(|c| json!({"n": c.n, "x": c.x, "lhs": c.lhs, "rhs": c.rhs}))
                .collect();
            json!({
                "analysis": "shifted",
                "max_n": max_n,
                "max_l1": max_l1,
                "cases": cases.len(),
                "all_hold": failures.is_empty(),
                "failures": failures,
            })
        }
        Analysis::Mixture { a, b, p, max_n } => {
            let m = MixtureSpec::new(walk_by_name(a)?, walk_by_name(b)?, parse_ratio(p)?)?;
            let one = m.one_step();
            let origin = vec![0; one.dim()];
            let mut rows = Vec::new();
            for n in 0..=*max_n {
                let mix = mixture_distribution(&m, n, n, mode)?;
                let direct = dp_step_distribution(&one, n, n, mode)?;
                let mass = mix.mass_f64(&origin);
                rows.push(json!({
                    "n": n,
                    "origin": mix.mass_rational(&origin).map(|r| r.to_string()),
                    "origin_f64": mass,
                    "scaled": mass * (n as f64).powf(1.5),
                    "equal": mix.same_law(&direct),
                }));
            }
            json!({"analysis": "mixture", "a": a, "b": b, "p": p, "rows": rows})
        }
        Analysis::Classify { walk, horizon } => {
            let r = classify_recurrence(&walk_by_name(walk)?, *horizon, mode)?;
            let mut v = serde_json::to_value(r).expect("serializes");
            v["analysis"] = "classify".into();
            v["walk"] = walk.as_str().into();
            v
        }
        Analysis::Grid { walk, n } => {
            let w = walk_by_name(walk)?;
            let radius = cli.radius.unwrap_or(*n * w.reach());
            return Ok(Output::Text(dp_step_distribution(&w, *n, radius, mode)?.to_text()));
        }
        Analysis::FirstReturn { walk, horizon } => {
            let s = first_return_cdf(&walk_by_name(walk)?, *horizon, mode)?;
            let exact = s.rational();
            let rows: Vec<Value> = (0..s.len())
                .map(|t| json!({"n": t, "cdf": exact.map(|e| e[t].to_string()), "cdf_f64": s.f64_at(t)}))
                .collect();
            json!({"analysis": "first-return", "walk": walk, "rows": rows})
        }
    };
    Ok(Output::Report(Box::new(ExperimentReport::new(
        "analyze",
        None,
        Results::Value(value),
    ))))
}

fn f(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

fn compile(input: &PathBuf, emit: Option<&PathBuf>, verify: bool) -> Result<(Output, bool), Failure> {
    let src = parse_automaton(&read(input)?).map_err(HarnessError::from)?;
    let compiled = compile_rational(&src).map_err(HarnessError::from)?;
    let text = write_automaton(&compiled.automaton.to_rational());
    let mut value = json!({
        "input": input.display().to_string(),
        "source_states": src.states.len(),
        "compiled_states": compiled.automaton.len(),
        "gadgets": compiled.gadgets.len(),
    });
    let mut ok = true;
    if verify {
        let a = &compiled.automaton;
        let mut rows = Vec::new();
        for g in &compiled.gadgets {
            let v = verify_gadget(a, g).map_err(HarnessError::from)?;
            ok &= v.passed();
            let name = |m: &std::collections::BTreeMap<usize, BigRational>| {
                m.iter()
                    .map(|(s, p)| (a.state(*s).name.clone(), Value::from(p.to_string())))
                    .collect::<serde_json::Map<_, _>>()
            };
            rows.push(json!({
                "gadget": g.id,
                "depth": g.depth,
                "denominator": g.denominator.to_string(),
                "expected": name(&v.expected),
                "computed": name(&v.computed),
                "exact_match": v.exact_match,
                "zero_displacement": v.displacement.is_ok(),
                "displacement_error": v.displacement.err(),
            }));
        }
        value["verification"] = rows.into();
        value["all_exact"] = ok.into();
    }
    match emit {
        Some(p) => {
            std::fs::write(p, &text).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            value["compiled_path"] = p.display().to_string().into();
        }
        None => value["compiled"] = text.into(),
    }
    Ok((
        Output::Report(Box::new(ExperimentReport::new("compile", None, Results::Value(value)))),
        ok,
    ))
}

fn execute(cli: &Cli) -> Result<(Output, bool), Failure> {
    let out = match &cli.command {
        Command::Simulate {
            target,
            input,
            flags,
            log,
        } => {
            let budget = cli.budget.unwrap_or(DEFAULT_BUDGET);
            let env = std::env::var(SEED_ENV).ok();
            let (seed, _) = resolve_seed(cli.seed, env.as_deref())?;
            let (results, cfg) = match (target, input) {
                (Some(t @ Target::Program(k)), None) => {
                    let d = k.build();
                    let r = simulate(&d.automaton, &d.flags, budget, seed, *log)?;
                    let mut cfg = config(cli, *t)?;
                    cfg.budget = budget;
                    (r, Some(cfg))
                }
                (Some(Target::Walk(_)), None) => return Err(invalid("simulate runs programs or automaton files")),
                (None, Some(path)) => {
                    let src = parse_automaton(&read(path)?).map_err(HarnessError::from)?;
                    let c = compile_rational(&src).map_err(HarnessError::from)?;
                    let fl = match flags {
                        Flags::None => FlagSet::Empty,
                        Flags::Origin => FlagSet::origin_point(src.dim),
                    };
                    (simulate(&c.automaton, &fl, budget, seed, *log)?, None)
                }
                _ => return Err(invalid("give a program name or --in FILE")),
            };
            let mut rep = ExperimentReport::new("simulate", cfg, Results::Simulation(results));
            if rep.config.is_none() {
                // Files have no target; keep the seed visible anyway.
                rep.results = match rep.results {
                    Results::Simulation(s) => {
                        let mut v = serde_json::to_value(s).expect("serializes");
                        v["seed"] = seed.into();
                        v["budget"] = budget.into();
                        Results::Value(v)
                    }
                    other => other,
                };
            }
            Output::Report(Box::new(rep))
        }
        Command::Coverage { target, checkpoints } => {
            let cfg = config(cli, *target)?;
            let cps = if checkpoints.is_empty() {
                default_checkpoints(cfg.budget)
            } else {
                checkpoints.clone()
            };
            Output::Report(Box::new(coverage_experiment(&cfg, &cps)?))
        }
        Command::Returns { target, checkpoints } => {
            let cfg = config(cli, *target)?;
            let cps = if checkpoints.is_empty() {
                default_checkpoints(cfg.budget)
            } else {
                checkpoints.clone()
            };
            Output::Report(Box::new(return_experiment(&cfg, &cps)?))
        }
        Command::Compare {
            target,
            checkpoint,
            kind,
        } => {
            let cfg = config(cli, *target)?;
            Output::Report(Box::new(match kind {
                Kind::Position => distribution_experiment(&cfg, *checkpoint)?,
                Kind::Increments => increment_experiment(&cfg)?,
                Kind::FlagChoice => flag_choice_experiment(&cfg)?,
            }))
        }
        Command::Analyze { what } => analysis(cli, what)?,
        Command::Compile { input, emit, verify } => return compile(input, emit.as_ref(), *verify),
    };
    Ok((out, true))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let obj = json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}});
            eprintln!("{obj}");
            return ExitCode::from(2);
        }
    };
    let start = Instant::now();
    let result = execute(&cli);
    let (output, ok) = match result {
        Ok(x) => x,
        Err(Failure { error, code }) => {
            eprintln!("{}", error.to_json());
            return ExitCode::from(code);
        }
    };
    let text = match output {
        Output::Text(t) => t,
        Output::Report(mut r) => {
            if cli.timing {
                r.wall_clock_ms = Some(start.elapsed().as_millis() as u64);
            }
            match cli.format {
                Format::Json => r.to_json(),
                Format::Csv => r.to_csv(),
            }
        }
    };
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, text) {
                eprintln!("{}", HarnessError::Io(format!("{}: {e}", p.display())).to_json());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
