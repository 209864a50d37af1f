//! `lindiff` command line.

mod report;
mod spec_file;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lindiff::boundary::{classify, mean_exit_time};
use lindiff::chain::{discretize, lemma21_report, symmetrizing_basis, FiniteChain};
use lindiff::form::{energy, is_regular_subspace, membership, DomainVariant};
use lindiff::montecarlo::{estimate_exit_time, estimate_hitting, hitting_formula, SimConfig};
use lindiff::Verdict;
use serde_json::json;

use report::{emit, Failure};
use spec_file::{build_named_example, load_function, SpecFile};

#[derive(Parser)]
#[command(name = "lindiff", version, about = "One-dimensional diffusions given by scale, speed and killing")]
struct Cli {
    /// Aligned table instead of JSON.
    #[arg(long, global = true)]
    pretty: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Expect {
    Yes,
    No,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Full,
    ZeroBoundary,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical spec file of a built-in example.
    Example {
        name: String,
        /// Rational windows over the whole line.
        #[arg(long)]
        signed: bool,
    },
    /// Endpoint classes, dissipativity, recurrence and conservativeness.
    Classify { spec: String },
    /// Dirichlet energy of `u` (and `v`): `s`, `c` or a function file.
    Energy {
        spec: String,
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: Option<String>,
    },
    /// Whether a function lies in the form domain.
    Membership {
        spec: String,
        #[arg(long)]
        u: String,
        #[arg(long, value_enum, default_value = "full")]
        variant: Variant,
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Whether `sub` is a regular subspace of `sup`.
    Subspace {
        #[arg(long)]
        sub: String,
        #[arg(long)]
        sup: String,
        #[arg(long, value_enum)]
        expect: Option<Expect>,
    },
    /// Monte Carlo hitting probability against the scale formula (CSV).
    Hitting(SimArgs),
    /// Monte Carlo mean exit time against the Green integral (CSV).
    Simulate(SimArgs),
    /// Resolvent positivity clauses and symmetrizing cone of a chain file or a discretized spec.
    ChainCheck {
        /// JSON file `{"q": [[...], ...]}`.
        chain: Option<String>,
        /// Discretize this spec instead.
        #[arg(long, conflicts_with = "chain")]
        spec: Option<String>,
        /// Grid points for `--spec`, evenly spaced over the interval.
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
}

#[derive(clap::Args)]
struct SimArgs {
    spec: String,
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    b: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    seed: u64,
    /// Grid step in natural scale.
    #[arg(long, default_value_t = 1.0 / 64.0)]
    h: f64,
    #[arg(long)]
    max_steps: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command, cli.pretty) {
        Ok(code) => code,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn input<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Input(e.to_string()))
}

fn verdict_code(v: &Verdict, expect: Option<Expect>) -> ExitCode {
    match (v, expect) {
        (Verdict::No(_), Some(Expect::Yes)) | (Verdict::Yes, Some(Expect::No)) => ExitCode::from(1),
        _ => ExitCode::SUCCESS,
    }
}

/// Evenly spaced points over the interval, infinite ends cut at distance 8
/// from the nearest finite reference point.
fn default_grid(spec: &lindiff::DiffusionSpec, points: usize) -> Vec<f64> {
    let i = spec.interval;
    let lo = if i.lo.is_finite() { i.lo } else { i.hi.min(spec.probe_point()) - 8.0 };
    let hi = if i.hi.is_finite() { i.hi } else { i.lo.max(spec.probe_point()) + 8.0 };
    let n = points.max(2);
    (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect()
}

fn sim_config(args: &SimArgs) -> SimConfig {
    let mut cfg = SimConfig::new(args.h, args.seed);
    if let Some(m) = args.max_steps {
        cfg.max_steps = m;
    }
    cfg
}

fn run(command: Command, pretty: bool) -> Result<ExitCode, Failure> {
    const TOL: f64 = 1e-9;
    match command {
        Command::Example { name, signed } => {
            let file = input(build_named_example(&name, signed))?;
            print!("{}", file.to_canonical_json());
        }
        Command::Classify { spec } => {
            let file = input(SpecFile::load(&spec))?;
            let r = classify(&file.spec);
            emit(&json!({ "spec_id": file.name, "report": r }), pretty);
        }
        Command::Energy { spec, u, v } => {
            let file = input(SpecFile::load(&spec))?;
            let fu = input(load_function(&u, &file.spec))?;
            let fv = match &v {
                Some(v) => input(load_function(v, &file.spec))?,
                None => input(load_function(&u, &file.spec))?,
            };
            if fu.scale != file.spec.scale || fv.scale != file.spec.scale {
                return Err(Failure::Input("energy needs functions written over the spec's own scale".into()));
            }
            let e = input(energy(&file.spec, &fu.function, &fv.function, TOL))?;
            emit(&json!({ "spec_id": file.name, "energy": e.value, "error": e.error }), pretty);
        }
        Command::Membership { spec, u, variant, expect } => {
            let file = input(SpecFile::load(&spec))?;
            let f = input(load_function(&u, &file.spec))?;
            let variant = match variant {
                Variant::Full => DomainVariant::Full,
                Variant::ZeroBoundary => DomainVariant::ZeroBoundary,
            };
            let v = membership(&file.spec, &f.scale, &f.function, variant);
            emit(&json!({ "spec_id": file.name, "membership": v }), pretty);
            return Ok(verdict_code(&v, expect));
        }
        Command::Subspace { sub, sup, expect } => {
            let a = input(SpecFile::load(&sub))?;
            let b = input(SpecFile::load(&sup))?;
            let v = input(is_regular_subspace(&a.spec, &b.spec))?;
            emit(&json!({ "sub": a.name, "sup": b.name, "regular_subspace": v }), pretty);
            return Ok(verdict_code(&v, expect));
        }
        Command::Hitting(args) => {
            let file = input(SpecFile::load(&args.spec))?;
            let est = input(estimate_hitting(&file.spec, args.a, args.x, args.b, args.n, &sim_config(&args)))?;
            let f = hitting_formula(&file.spec, args.a, args.x, args.b, 1e-12);
            let pass = (est.p_hat - f.value).abs() <= est.ci + f.error && !est.flagged;
            println!("spec_id,a,x,b,n,p_hat,ci,formula_p,pass");
            println!("{},{},{},{},{},{},{},{},{}", file.name, args.a, args.x, args.b, est.n, est.p_hat, est.ci, f.value, pass);
        }
        Command::Simulate(args) => {
            let file = input(SpecFile::load(&args.spec))?;
            let est = input(estimate_exit_time(&file.spec, args.a, args.x, args.b, args.n, &sim_config(&args)))?;
            let green = mean_exit_time(&file.spec, args.a, args.x, args.b, 1e-12).ok();
            let (green_time, pass) = match green {
                Some(g) => (g.value.to_string(), (est.mean - g.value).abs() <= 0.02 * g.value + 3.0 * est.stderr + g.error && !est.flagged),
                None => ("NA".to_string(), false),
            };
            println!("spec_id,a,x,b,n,mean_time,stderr,green_time,pass");
            println!("{},{},{},{},{},{},{},{},{}", file.name, args.a, args.x, args.b, est.n, est.mean, est.stderr, green_time, pass);
        }
        Command::ChainCheck { chain, spec, points, alpha } => {
            let (id, chain) = match (chain, spec) {
                (Some(path), None) => {
                    let text = input(std::fs::read_to_string(&path))?;
                    let c: FiniteChain = input(serde_json::from_str(&text))?;
                    (path, c)
                }
                (None, Some(s)) => {
                    let file = input(SpecFile::load(&s))?;
                    let grid = default_grid(&file.spec, points);
                    (file.name, input(discretize(&file.spec, &grid, 1e-12))?)
                }
                _ => return Err(Failure::Input("give a chain file or --spec".into())),
            };
            let report = lemma21_report(&chain, alpha);
            let cone = symmetrizing_basis(&chain).ok();
            emit(
                &json!({
                    "chain": id,
                    "states": chain.n(),
                    "lemma": report,
                    "cone_dimension": cone.as_ref().map_or(0, |c| c.dimension()),
                    "cone_basis": cone.map(|c| c.basis),
                }),
                pretty,
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
