//! Primality testing and safe-prime generation.
//!
//! Miller–Rabin here is deterministic in its input: the first witnesses are
//! the small primes 2..=37 and any further rounds draw witnesses from a
//! ChaCha stream keyed by the candidate itself. Hash-to-prime relies on that,
//! since two parties must agree on which candidate is "the first prime".

use std::sync::OnceLock;

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha3::{Digest, Sha3_256};

use crate::error::{Error, Result};

/// Rounds used everywhere a prime is produced or accepted.
pub const MILLER_RABIN_ROUNDS: usize = 40;

const FIXED_WITNESSES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
const SIEVE_LIMIT: u32 = 2048;

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        let limit = SIEVE_LIMIT as usize;
        let mut composite = vec![false; limit];
        let mut primes = Vec::new();
        for i in 2..limit {
            if !composite[i] {
                primes.push(i as u32);
                for j in (i * i..limit).step_by(i) {
                    composite[j] = true;
                }
            }
        }
        primes
    })
}

/// Outcome of trial division by the sieve primes.
enum TrialDivision {
    Prime,
    Composite,
    Unknown,
}

fn trial_divide(n: &BigUint) -> TrialDivision {
    if let Some(small) = n.to_u64() {
        if small < 2 {
            return TrialDivision::Composite;
        }
    }
    for &p in small_primes() {
        let p_big = BigUint::from(p);
        if *n == p_big {
            return TrialDivision::Prime;
        }
        if (n % p).is_zero() {
            return TrialDivision::Composite;
        }
        if p_big.clone() * &p_big > *n {
            return TrialDivision::Prime;
        }
    }
    TrialDivision::Unknown
}

/// Miller–Rabin with `rounds` witnesses after trial division.
pub fn is_probable_prime(n: &BigUint, rounds: usize) -> bool {
    match trial_divide(n) {
        TrialDivision::Prime => return true,
        TrialDivision::Composite => return false,
        TrialDivision::Unknown => {}
    }

    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let passes = |base: &BigUint| -> bool {
        let mut x = base.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            return true;
        }
        for _ in 1..s {
            x = &x * &x % n;
            if x == n_minus_1 {
                return true;
            }
            if x.is_one() {
                return false;
            }
        }
        false
    };

    let fixed = rounds.min(FIXED_WITNESSES.len());
    for &w in &FIXED_WITNESSES[..fixed] {
        if !passes(&BigUint::from(w)) {
            return false;
        }
    }
    if rounds > fixed {
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&Sha3_256::digest(n.to_bytes_be()));
        let mut rng = ChaCha20Rng::from_seed(seed);
        let two = BigUint::from(2u8);
        let upper = n - &one;
        for _ in fixed..rounds {
            let base = rng.gen_biguint_range(&two, &upper);
            if !passes(&base) {
                return false;
            }
        }
    }
    true
}

pub fn is_prime(n: &BigUint) -> bool {
    is_probable_prime(n, MILLER_RABIN_ROUNDS)
}

/// `p` prime and `(p - 1) / 2` prime.
pub fn is_safe_prime(p: &BigUint) -> bool {
    if p.is_even() || *p < BigUint::from(5u8) {
        return false;
    }
    let sophie = p >> 1u32;
    is_prime(&sophie) && is_prime(p)
}

/// Cheap rejection of safe-prime candidates: `p` and `(p - 1) / 2` must both
/// avoid every sieve prime as a factor (unless they equal it).
fn survives_sieve(p: &BigUint) -> bool {
    for &r in small_primes().iter().skip(1) {
        let rem = (p % r).to_u32().unwrap_or(0);
        let r_big = BigUint::from(r);
        // p ≡ 0 (mod r) kills p; p ≡ 1 (mod r) kills (p - 1) / 2.
        if rem == 0 && *p != r_big {
            return false;
        }
        if rem == 1 && (p >> 1u32) != r_big {
            return false;
        }
    }
    true
}

/// Default candidate budget for a `bits`-bit safe-prime search.
pub fn default_attempt_bound(bits: u64) -> u64 {
    64 * bits * bits + 4096
}

/// Samples a uniformly random safe prime of exactly `bits` bits.
pub fn generate_safe_prime<R: Rng + ?Sized>(
    bits: u64,
    rng: &mut R,
    max_attempts: u64,
) -> Result<BigUint> {
    if bits < 3 {
        return Err(Error::InvalidParameter(format!(
            "safe primes need at least 3 bits, got {bits}"
        )));
    }
    for _ in 0..max_attempts {
        let mut candidate = rng.gen_biguint(bits);
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(0, true);
        // Safe primes above 7 are 3 mod 4: (p - 1) / 2 must be odd.
        if bits >= 4 {
            candidate.set_bit(1, true);
        }
        if !survives_sieve(&candidate) {
            continue;
        }
        if is_safe_prime(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::SearchExhausted {
        what: "safe prime generation",
        attempts: max_attempts,
    })
}
