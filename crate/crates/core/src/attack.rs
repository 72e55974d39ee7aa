//! Forgery against non-interactive Wesolowski verification.
//!
//! The attacker never squares T times. It picks a short exponent τ, publishes
//! `y = g^τ` and `π = g^⌊τ/ℓ⌋`, and then searches for a delay T with
//! `2^T ≡ τ (mod ℓ)`. Verification of `(x, y, π, T)` then reduces to
//! `π^ℓ · g^(τ mod ℓ) = g^τ = y` and accepts, although `y ≠ g^(2^T)`.
//!
//! When ℓ does not depend on T the search succeeds iff `τ mod ℓ` lies in the
//! subgroup generated by 2 modulo ℓ, so the exact success rate is
//! `ord_ℓ(2)/ℓ`. When T is hashed into ℓ, every candidate T brings a fresh
//! prime and each attempt succeeds with probability about 1/ℓ.

use std::collections::BTreeMap;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{trapdoor_exp, GroupElement, Modulus, OpCounter};
use crate::hash::hash_to_group;
use crate::wesolowski::{self, challenge_prime, WesolowskiParams, WesolowskiTranscript};

/// Largest challenge width the attack loop accepts.
pub const MAX_ATTACK_ELL_BITS: u64 = 24;
/// Below this many trials a report is marked low-confidence.
pub const LOW_CONFIDENCE_TRIALS: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackTranscript {
    pub x: Vec<u8>,
    pub g: GroupElement,
    /// The attacker's secret exponent.
    pub tau: BigUint,
    pub y: GroupElement,
    pub ell: BigUint,
    pub pi: GroupElement,
    /// The claimed delay.
    pub t: u64,
    pub loop_iterations: u64,
    pub succeeded: bool,
    pub include_t_in_hash: bool,
}

impl AttackTranscript {
    /// The search stopped at `T = log2 τ`, i.e. `y` is the honest output.
    pub fn is_degenerate(&self) -> bool {
        self.succeeded && self.tau == BigUint::one() << self.t
    }

    pub fn is_forgery(&self) -> bool {
        self.succeeded && !self.is_degenerate()
    }

    pub fn to_wesolowski(&self) -> WesolowskiTranscript {
        WesolowskiTranscript {
            x: self.x.clone(),
            t: self.t,
            y: self.y.clone(),
            pi: self.pi.clone(),
            ell: self.ell.clone(),
            include_t_in_hash: self.include_t_in_hash,
        }
    }
}

/// ⌈log2 τ⌉ for τ ≥ 1.
pub fn ceil_log2(tau: &BigUint) -> u64 {
    let bits = tau.bits();
    if tau.count_ones() == 1 {
        bits - 1
    } else {
        bits
    }
}

/// Uniform τ with exactly `2·lambda + 1` bits.
pub fn sample_tau<R: Rng + ?Sized>(lambda: u64, rng: &mut R) -> BigUint {
    let bits = 2 * lambda + 1;
    let mut tau = rng.gen_biguint(bits);
    tau.set_bit(bits - 1, true);
    tau
}

/// Multiplicative order of 2 modulo an odd prime `ell`, from the
/// factorization of `ell - 1`.
pub fn order_of_two(ell: u64) -> u64 {
    assert!(
        ell > 2 && ell % 2 == 1,
        "order of 2 needs an odd prime modulus"
    );
    let pow2 = |e: u64| BigUint::from(2u8).modpow(&BigUint::from(e), &BigUint::from(ell));
    let mut order = ell - 1;
    let mut rest = ell - 1;
    let mut f = 2u64;
    while f * f <= rest {
        if rest.is_multiple_of(f) {
            while rest.is_multiple_of(f) {
                rest /= f;
            }
            while order.is_multiple_of(f) && pow2(order / f).is_one() {
                order /= f;
            }
        }
        f += 1;
    }
    if rest > 1 {
        while order.is_multiple_of(rest) && pow2(order / rest).is_one() {
            order /= rest;
        }
    }
    order
}

/// Outcome of the delay search for a fixed ℓ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DelaySearch {
    pub t: u64,
    pub iterations: u64,
    pub found: bool,
}

/// Steps T upward from `start` until `2^T ≡ τ (mod ℓ)`, giving up after
/// `max_iterations` increments.
pub fn search_delay(tau: &BigUint, ell: u64, start: u64, max_iterations: u64) -> DelaySearch {
    let target = (tau % ell).to_u64().expect("residue fits in u64");
    let mut current = BigUint::from(2u8)
        .modpow(&BigUint::from(start), &BigUint::from(ell))
        .to_u64()
        .expect("residue fits in u64");
    let mut t = start;
    let mut iterations = 0;
    while current != target {
        if iterations == max_iterations {
            return DelaySearch {
                t,
                iterations,
                found: false,
            };
        }
        t += 1;
        iterations += 1;
        current = current * 2 % ell;
    }
    DelaySearch {
        t,
        iterations,
        found: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// τ has `2·tau_lambda + 1` bits.
    pub tau_lambda: u64,
    pub ell_bits: u64,
    pub with_t_in_hash: bool,
    /// Iteration budget of the search when T is hashed into ℓ. Defaults to
    /// 2^ell_bits, the scale of the cycle bound in the other mode.
    pub iteration_budget: Option<u64>,
}

impl AttackConfig {
    pub fn new(tau_lambda: u64, ell_bits: u64) -> Self {
        Self {
            tau_lambda,
            ell_bits,
            with_t_in_hash: false,
            iteration_budget: None,
        }
    }

    pub fn with_t_in_hash(mut self, on: bool) -> Self {
        self.with_t_in_hash = on;
        self
    }

    fn budget(&self) -> u64 {
        self.iteration_budget.unwrap_or(1 << self.ell_bits)
    }

    fn validate(&self) -> Result<()> {
        if !(4..=MAX_ATTACK_ELL_BITS).contains(&self.ell_bits) {
            return Err(Error::InvalidParameter(format!(
                "attack needs 4 <= ell_bits <= {MAX_ATTACK_ELL_BITS}, got {}",
                self.ell_bits
            )));
        }
        if self.tau_lambda == 0 {
            return Err(Error::InvalidParameter(
                "tau_lambda must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the attacker on input `x`, sampling τ from `rng`.
pub fn forge<R: Rng + ?Sized>(
    modulus: &Modulus,
    config: &AttackConfig,
    x: &[u8],
    rng: &mut R,
) -> Result<AttackTranscript> {
    config.validate()?;
    let tau = sample_tau(config.tau_lambda, rng);
    forge_with_tau(modulus, config, x, tau).map(|(transcript, _)| transcript)
}

/// The deterministic part of the attack for a given τ. Also returns every
/// prime evaluated during the search (one unless T is hashed into ℓ).
pub fn forge_with_tau(
    modulus: &Modulus,
    config: &AttackConfig,
    x: &[u8],
    tau: BigUint,
) -> Result<(AttackTranscript, Vec<u64>)> {
    config.validate()?;
    let params = WesolowskiParams::new(modulus.clone(), config.ell_bits)
        .with_t_in_hash(config.with_t_in_hash);
    let mut ops = OpCounter::default();
    let g = hash_to_group(x, modulus)?;
    let y = g.pow(&tau, &mut ops);
    let start = ceil_log2(&tau);

    let (ell, search, evaluated) = if config.with_t_in_hash {
        let budget = config.budget();
        let mut t = start;
        let mut iterations = 0;
        let mut evaluated = Vec::new();
        loop {
            let ell = challenge_prime(&params, &g, &y, t)?;
            let ell_u = ell.to_u64().expect("ell_bits <= 24");
            evaluated.push(ell_u);
            let hit = &tau % &ell == BigUint::from(2u8).modpow(&BigUint::from(t), &ell);
            if hit || iterations == budget {
                break (
                    ell,
                    DelaySearch {
                        t,
                        iterations,
                        found: hit,
                    },
                    evaluated,
                );
            }
            t += 1;
            iterations += 1;
        }
    } else {
        let ell = challenge_prime(&params, &g, &y, 0)?;
        let ell_u = ell.to_u64().expect("ell_bits <= 24");
        let search = search_delay(&tau, ell_u, start, order_of_two(ell_u));
        (ell, search, vec![ell_u])
    };

    let pi = g.pow(&(&tau / &ell), &mut ops);
    Ok((
        AttackTranscript {
            x: x.to_vec(),
            g,
            tau,
            y,
            ell,
            pi,
            t: search.t,
            loop_iterations: search.iterations,
            succeeded: search.found,
            include_t_in_hash: config.with_t_in_hash,
        },
        evaluated,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EllStats {
    pub trials: u64,
    pub terminated: u64,
    pub order_of_two: u64,
    /// ord_ℓ(2)/ℓ
    pub reference_rate: f64,
    /// 1/ℓ
    pub inverse_ell: f64,
    pub termination_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub format_version: u32,
    pub ell_bits: u64,
    pub trials: u64,
    pub tau_bits: u64,
    pub with_t_in_hash: bool,
    /// Fraction of terminated forgeries the verifier accepted.
    pub accept_rate: Option<f64>,
    pub termination_rate: Option<f64>,
    /// Mean of ord_ℓ(2)/ℓ over the sampled primes (fixed-ℓ mode).
    pub mean_reference_rate: Option<f64>,
    /// Mean of 1/ℓ over every prime the searches evaluated.
    pub mean_inverse_ell: Option<f64>,
    /// Hits per evaluated (T, ℓ) pair (T-in-hash mode).
    pub per_iteration_rate: Option<f64>,
    pub iteration_budget: Option<u64>,
    pub terminated: u64,
    pub accepted: u64,
    pub forgeries: u64,
    pub degenerate: u64,
    /// Forgeries whose y happens to equal g^(2^T); needs the trapdoor.
    pub honest_output_collisions: Option<u64>,
    pub max_loop_iterations: u64,
    pub low_confidence: bool,
    /// Fixed-ℓ mode only.
    pub per_ell: BTreeMap<u64, EllStats>,
}

struct TrialOutcome {
    ell: u64,
    terminated: bool,
    accepted: bool,
    degenerate: bool,
    honest_collision: Option<bool>,
    loop_iterations: u64,
    evaluated: Vec<u64>,
}

/// Independent per-trial generator: stream `index` of a ChaCha keyed by
/// `base`, so results do not depend on scheduling.
pub fn trial_rng(base: [u8; 32], index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(base);
    rng.set_stream(index);
    rng
}

fn run_trial(
    modulus: &Modulus,
    config: &AttackConfig,
    base: [u8; 32],
    index: u64,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(base, index);
    let x: [u8; 32] = rng.gen();
    let tau = sample_tau(config.tau_lambda, &mut rng);
    let (transcript, evaluated) = forge_with_tau(modulus, config, &x, tau)?;
    let params = WesolowskiParams::new(modulus.clone(), config.ell_bits)
        .with_t_in_hash(config.with_t_in_hash);
    let accepted =
        transcript.succeeded && wesolowski::verify(&params, &transcript.to_wesolowski()).accept;
    let honest_collision = match (modulus.trapdoor(), transcript.is_forgery()) {
        (Some(td), true) => Some(trapdoor_exp(&transcript.g, transcript.t, 0, td)? == transcript.y),
        _ => None,
    };
    Ok(TrialOutcome {
        ell: transcript.ell.to_u64().expect("ell_bits <= 24"),
        terminated: transcript.succeeded,
        accepted,
        degenerate: transcript.is_degenerate(),
        honest_collision,
        loop_iterations: transcript.loop_iterations,
        evaluated,
    })
}

/// Runs `trials` independent forgeries and tallies how often the search
/// terminates and how often the verifier accepts the result.
pub fn success_experiment<R: Rng + ?Sized>(
    modulus: &Modulus,
    config: &AttackConfig,
    trials: u64,
    rng: &mut R,
) -> Result<AttackReport> {
    config.validate()?;
    let base: [u8; 32] = rng.gen();
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(modulus, config, base, i))
        .collect::<Result<Vec<_>>>()?;

    let mut per_ell: BTreeMap<u64, EllStats> = BTreeMap::new();
    let mut terminated = 0;
    let mut accepted = 0;
    let mut degenerate = 0;
    let mut collisions: Option<u64> = modulus.trapdoor().map(|_| 0);
    let mut reference_sum = 0.0;
    let mut inverse_sum = 0.0;
    let mut evaluated_count = 0u64;
    let mut max_loop_iterations = 0;
    for o in &outcomes {
        terminated += o.terminated as u64;
        accepted += o.accepted as u64;
        degenerate += o.degenerate as u64;
        if let (Some(c), Some(true)) = (collisions.as_mut(), o.honest_collision) {
            *c += 1;
        }
        max_loop_iterations = max_loop_iterations.max(o.loop_iterations);
        for &ell in &o.evaluated {
            inverse_sum += 1.0 / ell as f64;
        }
        evaluated_count += o.evaluated.len() as u64;
        if !config.with_t_in_hash {
            let stats = per_ell.entry(o.ell).or_insert_with(|| {
                let order = order_of_two(o.ell);
                EllStats {
                    order_of_two: order,
                    reference_rate: order as f64 / o.ell as f64,
                    inverse_ell: 1.0 / o.ell as f64,
                    ..EllStats::default()
                }
            });
            stats.trials += 1;
            stats.terminated += o.terminated as u64;
            reference_sum += stats.reference_rate;
        }
    }
    for stats in per_ell.values_mut() {
        stats.termination_rate = stats.terminated as f64 / stats.trials as f64;
    }

    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let forgeries = terminated - degenerate;
    Ok(AttackReport {
        format_version: 1,
        ell_bits: config.ell_bits,
        trials,
        tau_bits: 2 * config.tau_lambda + 1,
        with_t_in_hash: config.with_t_in_hash,
        accept_rate: ratio(accepted, terminated),
        termination_rate: ratio(terminated, trials),
        mean_reference_rate: (!config.with_t_in_hash && trials > 0)
            .then(|| reference_sum / trials as f64),
        mean_inverse_ell: (evaluated_count > 0).then(|| inverse_sum / evaluated_count as f64),
        per_iteration_rate: config
            .with_t_in_hash
            .then(|| ratio(terminated, evaluated_count))
            .flatten(),
        iteration_budget: config.with_t_in_hash.then(|| config.budget()),
        terminated,
        accepted,
        forgeries,
        degenerate,
        honest_output_collisions: collisions,
        max_loop_iterations,
        low_confidence: trials < LOW_CONFIDENCE_TRIALS,
        per_ell,
    })
}

/// Whether `x` belongs to the subgroup generated by 2 modulo `ell`, by
/// enumerating the powers. Slow; used as an oracle.
pub fn in_powers_of_two(x: u64, ell: u64) -> bool {
    let mut p = 1 % ell;
    for _ in 0..ell {
        if p == x % ell {
            return true;
        }
        p = p * 2 % ell;
    }
    false
}

impl AttackReport {
    pub fn is_empty(&self) -> bool {
        self.trials == 0
    }
}
