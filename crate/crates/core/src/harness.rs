//! Experiment plumbing: seeded randomness, versioned JSON files, transcript
//! dispatch and the cost benchmark.
//!
//! Every file carries `format_version`. Big integers are lowercase hex;
//! input bytes are hex as well. All maps are ordered so that serialized
//! output is a pure function of the inputs.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackConfig, AttackReport};
use crate::error::{Error, Result};
use crate::group::{parse_hex, to_hex, Cancellation, GroupElement, Modulus, OpCounter};
use crate::hash::{DELAY_WIDTH, XOF_NAME};
use crate::pietrzak::{self, PietrzakParams, PietrzakTranscript};
use crate::two_square::{self, CharacterizationReport, TwoSquareParams, VerifyVariant};
use crate::wesolowski::{self, WesolowskiParams, WesolowskiTranscript};

pub const FORMAT_VERSION: u32 = 1;
pub const XOF_DOMAIN: &str = "vdflab-xof-v1";
pub const MIN_LAMBDA: u64 = 8;

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Setup = 0,
    Attack = 1,
    Characterize = 2,
    Bench = 3,
}

pub fn seeded_rng(seed: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Wesolowski,
    Pietrzak,
    TwoSquare,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Wesolowski, Scheme::Pietrzak, Scheme::TwoSquare];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Wesolowski => "wesolowski",
            Scheme::Pietrzak => "pietrzak",
            Scheme::TwoSquare => "two_square",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wesolowski" => Ok(Scheme::Wesolowski),
            "pietrzak" => Ok(Scheme::Pietrzak),
            "two_square" | "two-square" => Ok(Scheme::TwoSquare),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Everything a run depends on. `seed` fixes every random choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub lambda: u64,
    #[serde(rename = "T")]
    pub t: u64,
    pub ell_bits: Option<u64>,
    pub delta: u64,
    pub trials: u64,
    pub seed: u64,
    pub variant: VerifyVariant,
    pub with_t_in_hash: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Wesolowski,
            lambda: 32,
            t: 1 << 10,
            ell_bits: None,
            delta: two_square::DEFAULT_DELTA,
            trials: 1000,
            seed: 0,
            variant: VerifyVariant::A,
            with_t_in_hash: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < MIN_LAMBDA {
            return Err(Error::InvalidParameter(format!(
                "lambda must be at least {MIN_LAMBDA}, got {}",
                self.lambda
            )));
        }
        if self.delta < 1 {
            return Err(Error::InvalidParameter("delta must be at least 1".into()));
        }
        if self.ell_bits.is_some_and(|b| b < 4) {
            return Err(Error::InvalidParameter(
                "ell_bits must be at least 4".into(),
            ));
        }
        Ok(())
    }

    pub fn ell_bits(&self) -> u64 {
        self.ell_bits
            .unwrap_or_else(|| WesolowskiParams::default_ell_bits(self.lambda))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashConfig {
    pub xof: String,
    pub domain: String,
    /// Bytes per encoded group element.
    pub element_width: usize,
    /// Bytes per encoded delay.
    pub delay_width: usize,
}

impl HashConfig {
    pub fn for_modulus(modulus: &Modulus) -> Self {
        Self {
            xof: XOF_NAME.to_string(),
            domain: XOF_DOMAIN.to_string(),
            element_width: modulus.element_width(),
            delay_width: DELAY_WIDTH,
        }
    }
}

/// Public parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub format_version: u32,
    pub modulus: String,
    pub modulus_bits: u64,
    pub lambda: u64,
    pub delta: u64,
    pub ell_bits: u64,
    pub include_t_in_hash: bool,
    pub hash: HashConfig,
    pub seed: u64,
}

/// The factorization of N, stored apart from the public parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretsFile {
    pub format_version: u32,
    pub modulus: String,
    pub p: String,
    pub q: String,
}

fn check_version(v: u32, what: &str) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(Error::MalformedTranscript(format!(
            "unsupported {what} format_version {v}"
        )));
    }
    Ok(())
}

impl ParamsFile {
    pub fn new(modulus: &Modulus, config: &ExperimentConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            modulus: to_hex(modulus.n()),
            modulus_bits: modulus.bits(),
            lambda: config.lambda,
            delta: config.delta,
            ell_bits: config.ell_bits(),
            include_t_in_hash: config.with_t_in_hash,
            hash: HashConfig::for_modulus(modulus),
            seed: config.seed,
        }
    }

    /// The public modulus; never carries a trapdoor.
    pub fn modulus(&self) -> Result<Modulus> {
        check_version(self.format_version, "parameter file")?;
        let m = Modulus::public(parse_hex(&self.modulus)?)?;
        if self.hash != HashConfig::for_modulus(&m) {
            return Err(Error::InvalidParameter(
                "hash configuration does not match this build".into(),
            ));
        }
        Ok(m)
    }

    /// The modulus with its trapdoor attached from `secrets`.
    pub fn modulus_with_secrets(&self, secrets: &SecretsFile) -> Result<Modulus> {
        check_version(secrets.format_version, "secrets file")?;
        let public = self.modulus()?;
        let m = Modulus::from_primes(parse_hex(&secrets.p)?, parse_hex(&secrets.q)?)?;
        if m != public {
            return Err(Error::ModulusMismatch);
        }
        Ok(m)
    }

    pub fn wesolowski(&self, modulus: &Modulus) -> WesolowskiParams {
        WesolowskiParams::new(modulus.clone(), self.ell_bits).with_t_in_hash(self.include_t_in_hash)
    }

    pub fn pietrzak(&self, modulus: &Modulus) -> PietrzakParams {
        PietrzakParams::new(modulus.clone(), self.lambda)
    }

    pub fn two_square(&self, modulus: &Modulus) -> Result<TwoSquareParams> {
        TwoSquareParams::new(modulus.clone()).with_delta(self.delta)
    }
}

impl SecretsFile {
    pub fn new(modulus: &Modulus) -> Result<Self> {
        let td = modulus.require_trapdoor()?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            modulus: to_hex(modulus.n()),
            p: to_hex(&td.p),
            q: to_hex(&td.q),
        })
    }
}

/// Generates parameters (and secrets) from the configuration's seed.
pub fn setup(config: &ExperimentConfig) -> Result<(ParamsFile, SecretsFile)> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed, Stream::Setup);
    let modulus = Modulus::setup(config.lambda, crate::group::DEFAULT_PRIME_FACTOR, &mut rng)?;
    Ok((
        ParamsFile::new(&modulus, config),
        SecretsFile::new(&modulus)?,
    ))
}

/// Parameters for an explicitly chosen factorization.
pub fn setup_from_primes(
    config: &ExperimentConfig,
    p: BigUint,
    q: BigUint,
) -> Result<(ParamsFile, SecretsFile)> {
    config.validate()?;
    let modulus = Modulus::from_primes(p, q)?;
    Ok((
        ParamsFile::new(&modulus, config),
        SecretsFile::new(&modulus)?,
    ))
}

/// A persisted evaluation, tagged by scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum TranscriptFile {
    Wesolowski {
        format_version: u32,
        modulus: String,
        x: String,
        #[serde(rename = "T")]
        t: u64,
        y: String,
        pi: String,
        ell: String,
        include_t_in_hash: bool,
        eval_ops: OpCounter,
    },
    Pietrzak {
        format_version: u32,
        modulus: String,
        x: String,
        #[serde(rename = "T")]
        t: u64,
        y: String,
        mu: Vec<String>,
        r: Vec<String>,
        lambda: u64,
        eval_ops: OpCounter,
    },
    TwoSquare {
        format_version: u32,
        modulus: String,
        x: String,
        #[serde(rename = "T")]
        t: u64,
        delta: u64,
        y: String,
        variant: VerifyVariant,
        eval_ops: OpCounter,
    },
}

impl TranscriptFile {
    pub fn scheme(&self) -> Scheme {
        match self {
            TranscriptFile::Wesolowski { .. } => Scheme::Wesolowski,
            TranscriptFile::Pietrzak { .. } => Scheme::Pietrzak,
            TranscriptFile::TwoSquare { .. } => Scheme::TwoSquare,
        }
    }

    fn header(&self) -> (u32, &str, &str) {
        match self {
            TranscriptFile::Wesolowski {
                format_version,
                modulus,
                x,
                ..
            }
            | TranscriptFile::Pietrzak {
                format_version,
                modulus,
                x,
                ..
            }
            | TranscriptFile::TwoSquare {
                format_version,
                modulus,
                x,
                ..
            } => (*format_version, modulus, x),
        }
    }

    pub fn y_mut(&mut self) -> &mut String {
        match self {
            TranscriptFile::Wesolowski { y, .. }
            | TranscriptFile::Pietrzak { y, .. }
            | TranscriptFile::TwoSquare { y, .. } => y,
        }
    }
}

/// Runs the evaluator (and prover) for the configured scheme.
pub fn eval(
    params: &ParamsFile,
    scheme: Scheme,
    x: &[u8],
    t: u64,
    variant: VerifyVariant,
) -> Result<TranscriptFile> {
    let modulus = params.modulus()?;
    let n = params.modulus.clone();
    let xh = hex::encode(x);
    Ok(match scheme {
        Scheme::Wesolowski => {
            let ev = wesolowski::eval(&params.wesolowski(&modulus), x, t)?;
            let tr = ev.transcript;
            TranscriptFile::Wesolowski {
                format_version: FORMAT_VERSION,
                modulus: n,
                x: xh,
                t,
                y: tr.y.to_hex(),
                pi: tr.pi.to_hex(),
                ell: to_hex(&tr.ell),
                include_t_in_hash: tr.include_t_in_hash,
                eval_ops: ev.ops,
            }
        }
        Scheme::Pietrzak => {
            let pp = params.pietrzak(&modulus);
            let ev = pietrzak::eval(&pp, x, t)?;
            let proof = pietrzak::prove(&pp, x, t, &ev.transcript)?;
            let tr = proof.transcript;
            TranscriptFile::Pietrzak {
                format_version: FORMAT_VERSION,
                modulus: n,
                x: xh,
                t,
                y: tr.y.to_hex(),
                mu: tr.mu.iter().map(GroupElement::to_hex).collect(),
                r: tr.r.iter().map(to_hex).collect(),
                lambda: tr.lambda,
                eval_ops: ev.ops + proof.ops,
            }
        }
        Scheme::TwoSquare => {
            let pp = params.two_square(&modulus)?;
            let ev = two_square::eval(&pp, x, t)?;
            TranscriptFile::TwoSquare {
                format_version: FORMAT_VERSION,
                modulus: n,
                x: xh,
                t,
                delta: pp.delta,
                y: ev.transcript.y.to_hex(),
                variant,
                eval_ops: ev.ops,
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub format_version: u32,
    pub scheme: Scheme,
    pub accept: bool,
    pub ops: OpCounter,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<VerifyVariant>,
    /// Cost of `2^(T+δ+2) mod N`, outside the group-side count.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_ops: Option<OpCounter>,
}

impl VerifyReport {
    fn new(scheme: Scheme, accept: bool, ops: OpCounter, reason: Option<String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scheme,
            accept,
            ops,
            reason,
            variant: None,
            m_ops: None,
        }
    }

    fn rejected(scheme: Scheme, reason: String) -> Self {
        Self::new(scheme, false, OpCounter::default(), Some(reason))
    }
}

/// Decodes an element; syntax errors are malformed input, while canonical
/// hex that is not a unit mod N is a well-formed but invalid claim.
enum Decoded {
    Element(GroupElement),
    Invalid(String),
}

fn decode_element(modulus: &Modulus, s: &str, what: &str) -> Result<Decoded> {
    let v = parse_hex(s).map_err(|e| Error::MalformedTranscript(format!("{what}: {e}")))?;
    Ok(match modulus.element(v) {
        Ok(e) => Decoded::Element(e),
        Err(e) => Decoded::Invalid(format!("{what}: {e}")),
    })
}

macro_rules! element_or_reject {
    ($scheme:expr, $modulus:expr, $s:expr, $what:expr) => {
        match decode_element($modulus, $s, $what)? {
            Decoded::Element(e) => e,
            Decoded::Invalid(reason) => return Ok(VerifyReport::rejected($scheme, reason)),
        }
    };
}

/// Verifies a transcript against public parameters. `Err` means the input
/// is malformed or belongs to other parameters; a failed check is `Ok` with
/// `accept = false`.
pub fn verify(
    params: &ParamsFile,
    transcript: &TranscriptFile,
    variant: Option<VerifyVariant>,
) -> Result<VerifyReport> {
    let modulus = params.modulus()?;
    let (version, n, x) = transcript.header();
    check_version(version, "transcript")?;
    if parse_hex(n)? != *modulus.n() {
        return Err(Error::ModulusMismatch);
    }
    let x = hex::decode(x).map_err(|e| Error::MalformedHex(format!("x: {e}")))?;
    let scheme = transcript.scheme();
    match transcript {
        TranscriptFile::Wesolowski {
            t,
            y,
            pi,
            ell,
            include_t_in_hash,
            ..
        } => {
            let y = element_or_reject!(scheme, &modulus, y, "y");
            let pi = element_or_reject!(scheme, &modulus, pi, "pi");
            let tr = WesolowskiTranscript {
                x,
                t: *t,
                y,
                pi,
                ell: parse_hex(ell)?,
                include_t_in_hash: *include_t_in_hash,
            };
            let v = wesolowski::verify(&params.wesolowski(&modulus), &tr);
            Ok(VerifyReport::new(scheme, v.accept, v.ops, v.reason))
        }
        TranscriptFile::Pietrzak {
            t,
            y,
            mu,
            r,
            lambda,
            ..
        } => {
            let y = element_or_reject!(scheme, &modulus, y, "y");
            let mut mus = Vec::with_capacity(mu.len());
            for m in mu {
                mus.push(element_or_reject!(scheme, &modulus, m, "mu"));
            }
            let rs = r.iter().map(|s| parse_hex(s)).collect::<Result<Vec<_>>>()?;
            let tr = PietrzakTranscript {
                x,
                t: *t,
                y,
                mu: mus,
                r: rs,
                lambda: *lambda,
            };
            let v = pietrzak::verify(&params.pietrzak(&modulus), &tr);
            Ok(VerifyReport::new(scheme, v.accept, v.ops, v.reason))
        }
        TranscriptFile::TwoSquare {
            t,
            delta,
            y,
            variant: recorded,
            ..
        } => {
            let pp = params.two_square(&modulus)?;
            if *delta != pp.delta {
                return Ok(VerifyReport::rejected(
                    scheme,
                    "delta does not match parameters".into(),
                ));
            }
            let variant = variant.unwrap_or(*recorded);
            let y = element_or_reject!(scheme, &modulus, y, "y");
            let check = two_square::verify_detailed(&pp, &x, *t, &y, variant);
            let mut report = VerifyReport::new(
                scheme,
                check.verdict.accept,
                check.verdict.ops,
                check.verdict.reason,
            );
            report.variant = Some(variant);
            report.m_ops = Some(check.m_ops);
            Ok(report)
        }
    }
}

/// Runs the forgery experiment with randomness from `seed`.
pub fn attack(
    modulus: &Modulus,
    config: &AttackConfig,
    trials: u64,
    seed: u64,
) -> Result<AttackReport> {
    attack::success_experiment(
        modulus,
        config,
        trials,
        &mut seeded_rng(seed, Stream::Attack),
    )
}

/// Characterizes every unit (`exhaustive`) or `samples` seeded hash outputs.
pub fn characterize(
    params: &TwoSquareParams,
    t: u64,
    exhaustive: bool,
    samples: u64,
    seed: u64,
) -> Result<CharacterizationReport> {
    if exhaustive {
        return two_square::characterize_exhaustive(params, t);
    }
    let mut rng = seeded_rng(seed, Stream::Characterize);
    let inputs: Vec<Vec<u8>> = (0..samples)
        .map(|_| rng.gen::<[u8; 32]>().to_vec())
        .collect();
    two_square::characterize_sampled(params, t, &inputs)
}

/// Benchmark grid and options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub lambdas: Vec<u64>,
    pub delays: Vec<u64>,
    pub delta: u64,
    pub ell_sweep: Vec<u64>,
    pub sweep_samples: u64,
    pub sweep_delay: u64,
    pub seed: u64,
    /// Per-cell wall-clock limit.
    pub timeout: Option<Duration>,
    /// Include wall-clock times; they make reports machine-dependent.
    pub timings: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![8, 16, 32],
            delays: (4..=16).map(|k| 1u64 << k).collect(),
            delta: two_square::DEFAULT_DELTA,
            ell_sweep: vec![16, 32, 64],
            sweep_samples: 64,
            sweep_delay: 1 << 10,
            seed: 0,
            timeout: None,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub eval_ms: f64,
    pub verify_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Timeout,
}

/// One (scheme, λ, T) cell. Eval columns include proof generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scheme: Scheme,
    pub lambda: u64,
    pub modulus_bits: u64,
    #[serde(rename = "T")]
    pub t: u64,
    pub status: CellStatus,
    pub eval_squarings: u64,
    pub eval_mults: u64,
    pub verify_squarings: u64,
    pub verify_mults: u64,
    pub verify_inversions: u64,
    pub verify_group_ops: u64,
    pub proof_elements: u64,
    /// Whether verification accepted the honest output.
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell_bits: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_times: Option<WallTimes>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub ell_bits: u64,
    pub samples: u64,
    pub mean_group_ops: f64,
    pub max_group_ops: u64,
    /// `2·bits(ℓ) + 4`
    pub bound: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllSweep {
    #[serde(rename = "T")]
    pub t: u64,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of mean group ops against ell_bits.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

/// Pietrzak verification cost against λ·log2(T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchChecks {
    pub two_square_verify_squarings_equal_delta: bool,
    pub two_square_eval_cost_exact: bool,
    pub wesolowski_verify_within_bound: bool,
    pub pietrzak_proof_elements_log_t: bool,
    /// Every Pietrzak verification within `(4λ+2)·log2(T) + 1` group ops.
    pub pietrzak_verify_within_bound: bool,
    pub proof_schemes_accept: bool,
    pub ell_slope_in_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub format_version: u32,
    pub seed: u64,
    pub delta: u64,
    pub rows: Vec<BenchRow>,
    pub ell_sweep: EllSweep,
    pub pietrzak_verify_fit: Option<LinearFit>,
    pub checks: BenchChecks,
}

/// Least-squares fit `y = slope·x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

const BENCH_INPUT: &[u8] = b"vdflab-bench";

fn cancellation(timeout: Option<Duration>) -> Cancellation {
    timeout.map_or_else(Cancellation::never, |d| {
        Cancellation::with_deadline(Instant::now() + d)
    })
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

struct CellResult {
    eval: OpCounter,
    verify: OpCounter,
    proof_elements: u64,
    accepted: bool,
    ell_bits: Option<u64>,
    times: WallTimes,
}

fn bench_cell(
    scheme: Scheme,
    modulus: &Modulus,
    lambda: u64,
    delta: u64,
    t: u64,
    cancel: &Cancellation,
) -> Result<CellResult> {
    let start = Instant::now();
    match scheme {
        Scheme::Wesolowski => {
            let params =
                WesolowskiParams::new(modulus.clone(), WesolowskiParams::default_ell_bits(lambda));
            let ev = wesolowski::eval_cancellable(&params, BENCH_INPUT, t, cancel)?;
            let eval_time = start.elapsed();
            let v0 = Instant::now();
            let verdict = wesolowski::verify(&params, &ev.transcript);
            Ok(CellResult {
                eval: ev.ops,
                verify: verdict.ops,
                proof_elements: 1,
                accepted: verdict.accept,
                ell_bits: Some(ev.transcript.ell.bits()),
                times: WallTimes {
                    eval_ms: ms(eval_time),
                    verify_ms: ms(v0.elapsed()),
                },
            })
        }
        Scheme::Pietrzak => {
            let params = PietrzakParams::new(modulus.clone(), lambda);
            let ev = pietrzak::eval_cancellable(&params, BENCH_INPUT, t, cancel)?;
            let proof =
                pietrzak::prove_cancellable(&params, BENCH_INPUT, t, &ev.transcript, cancel)?;
            let eval_time = start.elapsed();
            let v0 = Instant::now();
            let verdict = pietrzak::verify(&params, &proof.transcript);
            Ok(CellResult {
                eval: ev.ops + proof.ops,
                verify: verdict.ops,
                proof_elements: proof.transcript.mu.len() as u64,
                accepted: verdict.accept,
                ell_bits: None,
                times: WallTimes {
                    eval_ms: ms(eval_time),
                    verify_ms: ms(v0.elapsed()),
                },
            })
        }
        Scheme::TwoSquare => {
            let params = TwoSquareParams::new(modulus.clone()).with_delta(delta)?;
            let ev = two_square::eval_cancellable(&params, BENCH_INPUT, t, cancel)?;
            let eval_time = start.elapsed();
            let v0 = Instant::now();
            let verdict =
                two_square::verify(&params, BENCH_INPUT, t, &ev.transcript.y, VerifyVariant::A);
            Ok(CellResult {
                eval: ev.ops,
                verify: verdict.ops,
                proof_elements: 0,
                accepted: verdict.accept,
                ell_bits: None,
                times: WallTimes {
                    eval_ms: ms(eval_time),
                    verify_ms: ms(v0.elapsed()),
                },
            })
        }
    }
}

/// Wesolowski verification cost across challenge widths at one modulus.
pub fn ell_sweep(modulus: &Modulus, config: &BenchConfig) -> Result<EllSweep> {
    let mut points = Vec::with_capacity(config.ell_sweep.len());
    for &bits in &config.ell_sweep {
        let params = WesolowskiParams::new(modulus.clone(), bits);
        let mut total = 0u64;
        let mut max = 0u64;
        let mut bound = 0u64;
        for i in 0..config.sweep_samples {
            let ev = wesolowski::eval(&params, &i.to_be_bytes(), config.sweep_delay)?;
            let verdict = wesolowski::verify(&params, &ev.transcript);
            if !verdict.accept {
                return Err(Error::InconsistentClaim(format!(
                    "honest Wesolowski transcript rejected at ell_bits={bits}"
                )));
            }
            let ops = verdict.ops.group_ops();
            let b = 2 * ev.transcript.ell.bits() + 4;
            total += ops;
            max = max.max(ops);
            bound = bound.max(b);
        }
        points.push(SweepPoint {
            ell_bits: bits,
            samples: config.sweep_samples,
            mean_group_ops: if config.sweep_samples == 0 {
                0.0
            } else {
                total as f64 / config.sweep_samples as f64
            },
            max_group_ops: max,
            bound,
        });
    }
    let fit = linear_fit(
        &points
            .iter()
            .filter(|p| p.samples > 0)
            .map(|p| (p.ell_bits as f64, p.mean_group_ops))
            .collect::<Vec<_>>(),
    );
    Ok(EllSweep {
        t: config.sweep_delay,
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
    })
}

/// Runs every scheme on a shared modulus and input per (λ, T) cell.
pub fn bench(config: &BenchConfig) -> Result<BenchReport> {
    if config.delays.iter().any(|&t| t < 2 || !t.is_power_of_two()) {
        return Err(Error::InvalidParameter(
            "bench delays must be powers of two and at least 2".into(),
        ));
    }
    if config.delays.iter().any(|&t| t > 1 << 20) {
        return Err(Error::InvalidParameter(
            "bench delays are capped at 2^20".into(),
        ));
    }
    let mut rng = seeded_rng(config.seed, Stream::Bench);
    let mut rows = Vec::new();
    let mut largest: Option<Modulus> = None;
    for &lambda in &config.lambdas {
        if lambda < MIN_LAMBDA {
            return Err(Error::InvalidParameter(format!(
                "lambda must be at least {MIN_LAMBDA}, got {lambda}"
            )));
        }
        let modulus = Modulus::setup(lambda, crate::group::DEFAULT_PRIME_FACTOR, &mut rng)?;
        for &t in &config.delays {
            for scheme in Scheme::ALL {
                let cancel = cancellation(config.timeout);
                let row = match bench_cell(scheme, &modulus, lambda, config.delta, t, &cancel) {
                    Ok(c) => BenchRow {
                        scheme,
                        lambda,
                        modulus_bits: modulus.bits(),
                        t,
                        status: CellStatus::Ok,
                        eval_squarings: c.eval.squarings,
                        eval_mults: c.eval.multiplications,
                        verify_squarings: c.verify.squarings,
                        verify_mults: c.verify.multiplications,
                        verify_inversions: c.verify.inversions,
                        verify_group_ops: c.verify.group_ops(),
                        proof_elements: c.proof_elements,
                        accepted: c.accepted,
                        ell_bits: c.ell_bits,
                        wall_times: config.timings.then_some(c.times),
                    },
                    Err(Error::Cancelled) => BenchRow {
                        scheme,
                        lambda,
                        modulus_bits: modulus.bits(),
                        t,
                        status: CellStatus::Timeout,
                        eval_squarings: 0,
                        eval_mults: 0,
                        verify_squarings: 0,
                        verify_mults: 0,
                        verify_inversions: 0,
                        verify_group_ops: 0,
                        proof_elements: 0,
                        accepted: false,
                        ell_bits: None,
                        wall_times: None,
                    },
                    Err(e) => return Err(e),
                };
                rows.push(row);
            }
        }
        largest = Some(modulus);
    }
    let sweep = match &largest {
        Some(m) => ell_sweep(m, config)?,
        None => EllSweep {
            t: config.sweep_delay,
            points: Vec::new(),
            slope: None,
            intercept: None,
        },
    };
    let done = |s: Scheme| {
        rows.iter()
            .filter(move |r| r.scheme == s && r.status == CellStatus::Ok)
    };
    let checks = BenchChecks {
        two_square_verify_squarings_equal_delta: done(Scheme::TwoSquare)
            .all(|r| r.verify_squarings == config.delta),
        two_square_eval_cost_exact: done(Scheme::TwoSquare)
            .all(|r| r.eval_squarings == r.t && r.eval_mults == 1),
        wesolowski_verify_within_bound: done(Scheme::Wesolowski)
            .all(|r| r.verify_group_ops <= 2 * r.ell_bits.unwrap_or(0) + 4)
            && sweep.points.iter().all(|p| p.max_group_ops <= p.bound),
        pietrzak_proof_elements_log_t: done(Scheme::Pietrzak)
            .all(|r| r.proof_elements == u64::from(r.t.trailing_zeros())),
        pietrzak_verify_within_bound: done(Scheme::Pietrzak).all(|r| {
            r.verify_group_ops <= (4 * r.lambda + 2) * u64::from(r.t.trailing_zeros()) + 1
        }),
        proof_schemes_accept: done(Scheme::Wesolowski)
            .chain(done(Scheme::Pietrzak))
            .all(|r| r.accepted),
        ell_slope_in_range: sweep.slope.is_some_and(|s| (1.0..=2.0).contains(&s)),
    };
    let pietrzak_points: Vec<(f64, f64)> = done(Scheme::Pietrzak)
        .map(|r| {
            let x = r.lambda as f64 * f64::from(r.t.trailing_zeros());
            (x, r.verify_group_ops as f64)
        })
        .collect();
    let pietrzak_verify_fit =
        linear_fit(&pietrzak_points).map(|(slope, intercept)| LinearFit { slope, intercept });
    Ok(BenchReport {
        format_version: FORMAT_VERSION,
        seed: config.seed,
        delta: config.delta,
        rows,
        ell_sweep: sweep,
        pietrzak_verify_fit,
        checks,
    })
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
