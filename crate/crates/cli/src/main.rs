//! `mimo-clt`: deterministic equivalents, Monte Carlo runs and rate
//! diagnostics for Kronecker-correlated Rayleigh channels.
//!
//! Every subcommand prints one JSON object on stdout. Failures print a JSON
//! error object on stderr and exit with 2 (bad input), 3 (numerical) or
//! 4 (I/O).

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use mimo_clt::equivalents::gaussian_outage;
use mimo_clt::fixed_point::check_a_priori;
use mimo_clt::{
    generate, normality_test, rate_fit, run_batch, solve, solve_path, v_of_rho, BatchConfig, Error,
    ErrorClass, FixedPoint, InfoUnit, LogDetMethod, ProfileKind, RateConfig, TrialSchedule,
    ValidatedProfile, VarianceProfile, DEFAULT_TOL,
};
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(
    version,
    about = "Mutual-information CLT toolkit for correlated MIMO channels"
)]
struct Cli {
    /// Report information in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the canonical system at one t or along a grid.
    Solve(SolveArgs),
    /// Deterministic mean V and variance σ² of the mutual information.
    Equiv(EquivArgs),
    /// Gaussian outage probability P(I < threshold).
    Outage(OutageArgs),
    /// Monte Carlo realizations of the mutual information.
    Simulate(SimulateArgs),
    /// Empirical decay rates of the resolvent approximations.
    Verify(VerifyArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["profile", "generate"])))]
struct ProfileArgs {
    /// Variance profile JSON file.
    #[arg(long, value_name = "PATH")]
    profile: Option<PathBuf>,

    /// Generator spec, e.g. constant:1, linear-ramp:0.5,1.5, exponential-decay:0.9.
    #[arg(long, value_name = "KIND:PARAMS", requires_all = ["big_n", "n"])]
    generate: Option<ProfileKind>,

    /// Receive dimension for --generate.
    #[arg(long = "N", value_name = "N", requires = "generate")]
    big_n: Option<usize>,

    /// Transmit dimension for --generate.
    #[arg(long = "n", value_name = "n", requires = "generate")]
    n: Option<usize>,

    /// Also write the profile in use to this file.
    #[arg(long, value_name = "PATH")]
    write_profile: Option<PathBuf>,
}

impl ProfileArgs {
    fn load(&self) -> Result<ValidatedProfile, Error> {
        let raw = match (&self.profile, self.generate) {
            (Some(path), _) => VarianceProfile::read_json(path)?,
            (None, Some(kind)) => generate(
                kind,
                self.big_n.unwrap_or_default(),
                self.n.unwrap_or_default(),
            )?,
            (None, None) => unreachable!("clap enforces one profile source"),
        };
        if let Some(path) = &self.write_profile {
            raw.write_json(path)?;
        }
        raw.validate()
    }
}

#[derive(Args)]
#[command(group(ArgGroup::new("points").required(true).args(["t", "t_grid"])))]
struct SolveArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    #[arg(long)]
    t: Option<f64>,

    /// Strictly increasing comma-separated values of t.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    t_grid: Option<Vec<f64>>,

    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct EquivArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    #[arg(long)]
    rho: f64,

    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct OutageArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    #[arg(long)]
    rho: f64,

    /// Rate threshold, in the display unit.
    #[arg(long)]
    threshold: f64,

    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    profile: ProfileArgs,

    #[arg(long)]
    rho: f64,

    #[arg(long)]
    trials: u64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Worker threads; 0 lets rayon decide.
    #[arg(long, default_value_t = 0)]
    threads: usize,

    /// Write one sample per line to this file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// eigen or cholesky.
    #[arg(long, default_value = "eigen")]
    method: LogDetMethod,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Scaling {
    /// trials-per-n · (n / n_min)²
    Quadratic,
    /// trials-per-n at every n
    Fixed,
}

#[derive(Args)]
struct VerifyArgs {
    /// Profile generator applied at every dimension.
    #[arg(long, value_name = "KIND:PARAMS")]
    profile_family: ProfileKind,

    /// N / n.
    #[arg(long, default_value_t = 1.0)]
    ratio: f64,

    #[arg(long)]
    rho: f64,

    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "8,16,32,64")]
    ns: Vec<usize>,

    /// Trials at the smallest n.
    #[arg(long)]
    trials_per_n: u64,

    #[arg(long, value_enum, default_value_t = Scaling::Quadratic)]
    scaling: Scaling,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 0)]
    threads: usize,

    #[arg(long, default_value = "cholesky")]
    method: LogDetMethod,
}

fn check_tol(tol: f64) -> Result<(), Error> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tol must be > 0, got {tol}"
        )))
    }
}

fn fixed_point_json(fp: &FixedPoint) -> Value {
    json!({
        "t": fp.t,
        "delta": fp.delta,
        "delta_tilde": fp.delta_tilde,
        "gamma": fp.gamma,
        "gamma_tilde": fp.gamma_tilde,
        "one_minus_t2gg": fp.one_minus_t2gg(),
    })
}

fn dims(p: &ValidatedProfile) -> Value {
    json!({ "N": p.big_n(), "n": p.n() })
}

fn unit_name(unit: InfoUnit) -> &'static str {
    match unit {
        InfoUnit::Nats => "nats",
        InfoUnit::Bits => "bits",
    }
}

fn run_solve(args: &SolveArgs) -> Result<Value, Error> {
    check_tol(args.tol)?;
    let p = args.profile.load()?;
    let mut out = json!({ "schema": SCHEMA, "command": "solve", "dims": dims(&p) });
    if let Some(t) = args.t {
        let fp = solve(&p, t, args.tol)?;
        check_a_priori(&p, &fp)?;
        merge(&mut out, fixed_point_json(&fp));
    } else if let Some(grid) = &args.t_grid {
        let path = solve_path(&p, grid, args.tol)?;
        let points: Vec<Value> = path.iter().map(fixed_point_json).collect();
        out["points"] = Value::Array(points);
    }
    Ok(out)
}

fn run_equiv(args: &EquivArgs, unit: InfoUnit) -> Result<Value, Error> {
    check_tol(args.tol)?;
    let p = args.profile.load()?;
    let eq = v_of_rho(&p, args.rho, args.tol)?;
    let (m2, big_m2) = eq.variance_bounds(&p);
    Ok(json!({
        "schema": SCHEMA,
        "command": "equiv",
        "dims": dims(&p),
        "unit": unit_name(unit),
        "rho": eq.rho,
        "v": unit.from_nats(eq.v),
        "sigma2": unit.from_nats_sq(eq.sigma2),
        "sigma2_bounds": [unit.from_nats_sq(m2), unit.from_nats_sq(big_m2)],
        "delta": eq.fp.delta,
        "delta_tilde": eq.fp.delta_tilde,
    }))
}

fn run_outage(args: &OutageArgs, unit: InfoUnit) -> Result<Value, Error> {
    check_tol(args.tol)?;
    if !(args.rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "outage needs rho > 0, got {}",
            args.rho
        )));
    }
    let p = args.profile.load()?;
    let eq = v_of_rho(&p, args.rho, args.tol)?;
    let probability = gaussian_outage(eq.v, eq.sigma(), unit.to_nats(args.threshold));
    Ok(json!({
        "schema": SCHEMA,
        "command": "outage",
        "dims": dims(&p),
        "unit": unit_name(unit),
        "rho": eq.rho,
        "threshold": args.threshold,
        "probability": probability,
        "v": unit.from_nats(eq.v),
        "sigma2": unit.from_nats_sq(eq.sigma2),
    }))
}

fn run_simulate(args: &SimulateArgs, unit: InfoUnit) -> Result<Value, Error> {
    let p = args.profile.load()?;
    let config = BatchConfig {
        threads: args.threads,
        method: args.method,
        ..BatchConfig::new(args.rho, args.trials, args.seed)
    };
    let batch = run_batch(&p, &config)?;
    if let Some(path) = &args.out {
        batch.write_csv(BufWriter::new(File::create(path)?), unit)?;
    }
    let eq = v_of_rho(&p, args.rho, DEFAULT_TOL)?;
    let report = match normality_test(&batch, &eq) {
        Ok(r) => serde_json::to_value(r)?,
        // Too few samples or σ = 0: the summary still stands on its own.
        Err(Error::InsufficientSamples { .. } | Error::InvalidArgument(_)) => Value::Null,
        Err(e) => return Err(e),
    };
    Ok(json!({
        "schema": SCHEMA,
        "command": "simulate",
        "dims": dims(&p),
        "unit": unit_name(unit),
        "rho": args.rho,
        "trials": args.trials,
        "seed": args.seed,
        "method": args.method,
        "mean": unit.from_nats(batch.mean),
        "var": batch.var.map(|v| unit.from_nats_sq(v)),
        "v": unit.from_nats(eq.v),
        "sigma2": unit.from_nats_sq(eq.sigma2),
        "normality": report,
    }))
}

fn run_verify(args: &VerifyArgs) -> Result<Value, Error> {
    let schedule = match args.scaling {
        Scaling::Quadratic => TrialSchedule::Quadratic(args.trials_per_n),
        Scaling::Fixed => TrialSchedule::Fixed(args.trials_per_n),
    };
    if args.trials_per_n == 0 {
        return Err(Error::InvalidArgument("trials-per-n must be >= 1".into()));
    }
    let report = rate_fit(&RateConfig {
        family: args.profile_family,
        ratio: args.ratio,
        rho: args.rho,
        ns: args.ns.clone(),
        schedule,
        seed: args.seed,
        threads: args.threads,
        method: args.method,
    })?;
    let mut out = json!({ "schema": SCHEMA, "command": "verify", "method": args.method });
    merge(&mut out, serde_json::to_value(report)?);
    Ok(out)
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.class() {
        ErrorClass::Input => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let unit = if cli.bits {
        InfoUnit::Bits
    } else {
        InfoUnit::Nats
    };
    let result = match &cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Equiv(a) => run_equiv(a, unit),
        Command::Outage(a) => run_outage(a, unit),
        Command::Simulate(a) => run_simulate(a, unit),
        Command::Verify(a) => run_verify(a),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = json!({
                "schema": SCHEMA,
                "error": { "kind": e.kind(), "message": e.to_string() },
            });
            eprintln!("{body}");
            ExitCode::from(exit_code(&e))
        }
    }
}
