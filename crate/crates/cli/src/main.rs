//! `vdflab`: drive the delay-function laboratory from the shell.
//!
//! Exit status: 0 success (or accepted proof), 1 rejected proof, 2 usage,
//! malformed input or any other error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use vdflab::attack::AttackConfig;
use vdflab::harness::{
    self, BenchConfig, ExperimentConfig, ParamsFile, Scheme, SecretsFile, Stream, TranscriptFile,
};
use vdflab::two_square::VerifyVariant;
use vdflab::Modulus;

const EXIT_REJECT: u8 = 1;
const EXIT_ERROR: u8 = 2;

#[derive(Parser)]
#[command(
    name = "vdflab",
    version,
    about = "Verifiable delay function laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an RSA modulus and write public parameters and secrets.
    Setup(SetupArgs),
    /// Evaluate a VDF and write its transcript.
    Eval(EvalArgs),
    /// Verify a transcript. Exits 0 on accept, 1 on reject, 2 on bad input.
    Verify(VerifyArgs),
    /// Run the forgery experiment against Wesolowski verification.
    Attack(AttackArgs),
    /// Count group operations of every scheme across a (lambda, T) grid.
    Bench(BenchArgs),
    /// Map when the two-squaring verifier accepts honest outputs.
    Characterize(CharacterizeArgs),
}

#[derive(Args)]
struct SetupArgs {
    #[arg(long, env = "VDFLAB_LAMBDA", default_value_t = 32)]
    lambda: u64,
    #[arg(long, env = "VDFLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "VDFLAB_DELTA", default_value_t = 2)]
    delta: u64,
    /// Challenge prime width for Wesolowski; defaults to 2·lambda.
    #[arg(long, env = "VDFLAB_ELL_BITS")]
    ell_bits: Option<u64>,
    /// Bind T into the Wesolowski challenge.
    #[arg(long, env = "VDFLAB_WITH_T_IN_HASH")]
    with_t_in_hash: bool,
    /// Use this safe prime instead of generating one (decimal).
    #[arg(long, requires = "q")]
    p: Option<String>,
    #[arg(long, requires = "p")]
    q: Option<String>,
    /// Public parameter file; stdout if omitted.
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
    /// Where to write the factorization; not written if omitted.
    #[arg(long, env = "VDFLAB_SECRETS")]
    secrets: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, env = "VDFLAB_PARAMS")]
    params: PathBuf,
    #[arg(long, env = "VDFLAB_SCHEME")]
    scheme: Scheme,
    /// Delay T (number of sequential squarings).
    #[arg(long, env = "VDFLAB_TIME_PARAM")]
    time_param: u64,
    /// Input x as UTF-8 text.
    #[arg(long, default_value = "", conflicts_with = "input_hex")]
    input: String,
    /// Input x as hex bytes.
    #[arg(long)]
    input_hex: Option<String>,
    /// Verification variant recorded in two_square transcripts.
    #[arg(long, env = "VDFLAB_VARIANT", default_value = "A")]
    variant: VerifyVariant,
    /// Transcript file; stdout if omitted.
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "VDFLAB_PARAMS")]
    params: PathBuf,
    #[arg(long, env = "VDFLAB_TRANSCRIPT")]
    transcript: PathBuf,
    /// Override the variant recorded in a two_square transcript.
    #[arg(long, env = "VDFLAB_VARIANT")]
    variant: Option<VerifyVariant>,
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// τ has 2·lambda+1 bits; also sizes the generated modulus.
    #[arg(long, env = "VDFLAB_LAMBDA", default_value_t = 32)]
    lambda: u64,
    #[arg(long, env = "VDFLAB_ELL_BITS", default_value_t = 8)]
    ell_bits: u64,
    #[arg(long, env = "VDFLAB_TRIALS", default_value_t = 1000)]
    trials: u64,
    #[arg(long, env = "VDFLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Re-derive ℓ from (g, y, T) for every candidate T.
    #[arg(long, env = "VDFLAB_WITH_T_IN_HASH")]
    with_t_in_hash: bool,
    /// Search budget per trial when T is hashed; defaults to 2^ell_bits.
    #[arg(long)]
    iteration_budget: Option<u64>,
    /// Attack this public modulus instead of generating one from the seed.
    #[arg(long, env = "VDFLAB_PARAMS")]
    params: Option<PathBuf>,
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Repeatable; defaults to 8, 16, 32.
    #[arg(long = "lambda", env = "VDFLAB_LAMBDA", value_delimiter = ',')]
    lambdas: Vec<u64>,
    /// Repeatable powers of two; defaults to 2^4 through 2^16.
    #[arg(long = "time-param", env = "VDFLAB_TIME_PARAM", value_delimiter = ',')]
    delays: Vec<u64>,
    #[arg(long, env = "VDFLAB_DELTA", default_value_t = 2)]
    delta: u64,
    /// Challenge widths for the Wesolowski sweep; defaults to 16, 32, 64.
    #[arg(long = "ell-bits", env = "VDFLAB_ELL_BITS", value_delimiter = ',')]
    ell_sweep: Vec<u64>,
    #[arg(long, default_value_t = 64)]
    sweep_samples: u64,
    #[arg(long, env = "VDFLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Per-cell wall-clock limit in milliseconds.
    #[arg(long, env = "VDFLAB_TIMEOUT_MS")]
    timeout_ms: Option<u64>,
    /// Include wall-clock times (output is then not reproducible).
    #[arg(long)]
    timings: bool,
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CharacterizeArgs {
    #[arg(long, env = "VDFLAB_PARAMS")]
    params: PathBuf,
    #[arg(long, env = "VDFLAB_SECRETS")]
    secrets: PathBuf,
    #[arg(long, env = "VDFLAB_TIME_PARAM")]
    time_param: u64,
    /// Enumerate every unit of ℤ*_N (small N only).
    #[arg(long)]
    exhaustive: bool,
    /// Number of hashed inputs in sampled mode.
    #[arg(long, env = "VDFLAB_TRIALS", default_value_t = 1000)]
    trials: u64,
    #[arg(long, env = "VDFLAB_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "VDFLAB_OUT")]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = harness::to_json(value);
    match out {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn parse_prime(s: &str) -> Result<num_bigint::BigUint> {
    s.parse()
        .with_context(|| format!("{s:?} is not a decimal integer"))
}

fn cmd_setup(args: SetupArgs) -> Result<()> {
    let config = ExperimentConfig {
        lambda: args.lambda,
        seed: args.seed,
        delta: args.delta,
        ell_bits: args.ell_bits,
        with_t_in_hash: args.with_t_in_hash,
        ..ExperimentConfig::default()
    };
    let (params, secrets) = match (&args.p, &args.q) {
        (Some(p), Some(q)) => {
            harness::setup_from_primes(&config, parse_prime(p)?, parse_prime(q)?)?
        }
        _ => harness::setup(&config)?,
    };
    emit(&params, args.out.as_deref())?;
    if let Some(path) = &args.secrets {
        emit(&secrets, Some(path))?;
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let params: ParamsFile = read_json(&args.params)?;
    let x = match &args.input_hex {
        Some(h) => hex::decode(h).context("--input-hex is not valid hex")?,
        None => args.input.into_bytes(),
    };
    let transcript = harness::eval(&params, args.scheme, &x, args.time_param, args.variant)?;
    match &args.out {
        Some(path) => {
            emit(&transcript, Some(path))?;
            let ops = match &transcript {
                TranscriptFile::Wesolowski { eval_ops, .. }
                | TranscriptFile::Pietrzak { eval_ops, .. }
                | TranscriptFile::TwoSquare { eval_ops, .. } => eval_ops,
            };
            emit(ops, None)
        }
        None => emit(&transcript, None),
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<bool> {
    let params: ParamsFile = read_json(&args.params)?;
    let transcript: TranscriptFile = read_json(&args.transcript)?;
    let report = harness::verify(&params, &transcript, args.variant)?;
    emit(&report, args.out.as_deref())?;
    Ok(report.accept)
}

fn cmd_attack(args: AttackArgs) -> Result<()> {
    let config = AttackConfig {
        tau_lambda: args.lambda,
        ell_bits: args.ell_bits,
        with_t_in_hash: args.with_t_in_hash,
        iteration_budget: args.iteration_budget,
    };
    let modulus = match &args.params {
        Some(path) => read_json::<ParamsFile>(path)?.modulus()?,
        None => {
            if args.lambda < harness::MIN_LAMBDA {
                bail!("lambda must be at least {}", harness::MIN_LAMBDA);
            }
            let mut rng = harness::seeded_rng(args.seed, Stream::Setup);
            Modulus::setup(args.lambda, vdflab::group::DEFAULT_PRIME_FACTOR, &mut rng)?
        }
    };
    let report = harness::attack(&modulus, &config, args.trials, args.seed)?;
    emit(&report, args.out.as_deref())?;

    let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
    eprintln!(
        "accept rate of terminated forgeries: {}",
        fmt(report.accept_rate)
    );
    eprintln!(
        "termination rate: {}  reference ord(2)/ell: {}  1/ell: {}",
        fmt(report.termination_rate),
        fmt(report.mean_reference_rate),
        fmt(report.mean_inverse_ell)
    );
    if report.with_t_in_hash {
        eprintln!(
            "hits per evaluated (T, ell): {}",
            fmt(report.per_iteration_rate)
        );
    }
    if report.low_confidence {
        eprintln!(
            "warning: {} trials is below {}; rates are low-confidence",
            report.trials,
            vdflab::attack::LOW_CONFIDENCE_TRIALS
        );
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let defaults = BenchConfig::default();
    let or_default = |v: Vec<u64>, d: Vec<u64>| if v.is_empty() { d } else { v };
    let config = BenchConfig {
        lambdas: or_default(args.lambdas, defaults.lambdas),
        delays: or_default(args.delays, defaults.delays),
        delta: args.delta,
        ell_sweep: or_default(args.ell_sweep, defaults.ell_sweep),
        sweep_samples: args.sweep_samples,
        seed: args.seed,
        timeout: args.timeout_ms.map(Duration::from_millis),
        timings: args.timings,
        ..defaults
    };
    let report = harness::bench(&config)?;
    emit(&report, args.out.as_deref())?;
    let failed: Vec<&str> = [
        (
            "two_square verify squarings",
            report.checks.two_square_verify_squarings_equal_delta,
        ),
        (
            "two_square eval cost",
            report.checks.two_square_eval_cost_exact,
        ),
        (
            "wesolowski verify bound",
            report.checks.wesolowski_verify_within_bound,
        ),
        (
            "pietrzak proof size",
            report.checks.pietrzak_proof_elements_log_t,
        ),
        (
            "pietrzak verify bound",
            report.checks.pietrzak_verify_within_bound,
        ),
        ("proof schemes accept", report.checks.proof_schemes_accept),
    ]
    .into_iter()
    .filter(|(_, ok)| !ok)
    .map(|(name, _)| name)
    .collect();
    if !failed.is_empty() {
        bail!("bench checks failed: {}", failed.join(", "));
    }
    Ok(())
}

fn cmd_characterize(args: CharacterizeArgs) -> Result<()> {
    let params: ParamsFile = read_json(&args.params)?;
    let secrets: SecretsFile = read_json(&args.secrets)?;
    let modulus = params.modulus_with_secrets(&secrets)?;
    let pp = params.two_square(&modulus)?;
    let report = harness::characterize(
        &pp,
        args.time_param,
        args.exhaustive,
        args.trials,
        args.seed,
    )?;
    emit(&report, args.out.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Setup(a) => cmd_setup(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Attack(a) => cmd_attack(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
        Command::Characterize(a) => cmd_characterize(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_REJECT),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
