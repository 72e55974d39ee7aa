//! Non-interactive Wesolowski VDF over ℤ*_N.
//!
//! The prover publishes `y = g^(2^T)` and `π = g^⌊2^T/ℓ⌋` where the prime
//! `ℓ = H_prime(bin(g) ||| bin(y) [||| bin(T)])`. The verifier checks
//! `π^ℓ · g^(2^T mod ℓ) = y`, computed as one joint exponentiation so that it
//! costs at most `2·bits(ℓ)` group operations.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::group::{
    multi_exp, sequential_square_cancellable, Cancellation, GroupElement, Modulus, OpCounter,
    CANCEL_CHECK_INTERVAL,
};
use crate::hash::{bin_delay, bin_element, hash_to_group, hash_to_prime};
use crate::outcome::{Evaluation, Verdict};

#[derive(Debug, Clone)]
pub struct WesolowskiParams {
    pub modulus: Modulus,
    /// Bit-length of the prime challenge ℓ.
    pub ell_bits: u64,
    /// Bind the delay into the challenge: `ℓ = H_prime(g ||| y ||| T)`.
    pub include_t_in_hash: bool,
}

impl WesolowskiParams {
    pub fn new(modulus: Modulus, ell_bits: u64) -> Self {
        Self {
            modulus,
            ell_bits,
            include_t_in_hash: false,
        }
    }

    pub fn with_t_in_hash(mut self, include: bool) -> Self {
        self.include_t_in_hash = include;
        self
    }

    /// ℓ of twice the security parameter.
    pub fn default_ell_bits(lambda: u64) -> u64 {
        2 * lambda
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WesolowskiTranscript {
    pub x: Vec<u8>,
    pub t: u64,
    pub y: GroupElement,
    pub pi: GroupElement,
    pub ell: BigUint,
    pub include_t_in_hash: bool,
}

/// The Fiat–Shamir prime for `(g, y[, T])`.
pub fn challenge_prime(
    params: &WesolowskiParams,
    g: &GroupElement,
    y: &GroupElement,
    t: u64,
) -> Result<BigUint> {
    let mut seed = bin_element(g);
    seed.extend_from_slice(&bin_element(y));
    if params.include_t_in_hash {
        seed.extend_from_slice(&bin_delay(t));
    }
    hash_to_prime(&seed, params.ell_bits)
}

pub fn eval(
    params: &WesolowskiParams,
    x: &[u8],
    t: u64,
) -> Result<Evaluation<WesolowskiTranscript>> {
    eval_cancellable(params, x, t, &Cancellation::never())
}

pub fn eval_cancellable(
    params: &WesolowskiParams,
    x: &[u8],
    t: u64,
    cancel: &Cancellation,
) -> Result<Evaluation<WesolowskiTranscript>> {
    if t < 1 {
        return Err(Error::InvalidParameter("delay T must be at least 1".into()));
    }
    let g = hash_to_group(x, &params.modulus)?;
    let (y, mut ops) = sequential_square_cancellable(&g, t, cancel)?;
    let ell = challenge_prime(params, &g, &y, t)?;
    let pi = proof_longdiv_cancellable(&g, t, &ell, &mut ops, cancel)?;
    Ok(Evaluation {
        transcript: WesolowskiTranscript {
            x: x.to_vec(),
            t,
            y,
            pi,
            ell,
            include_t_in_hash: params.include_t_in_hash,
        },
        ops,
    })
}

/// `g^⌊2^t/ℓ⌋` by streaming long division of 2^t by ℓ: one squaring per
/// quotient bit plus a multiplication by `g` for each set bit. The quotient
/// itself is never materialized.
pub fn proof_longdiv(g: &GroupElement, t: u64, ell: &BigUint, ops: &mut OpCounter) -> GroupElement {
    proof_longdiv_cancellable(g, t, ell, ops, &Cancellation::never())
        .expect("uncancellable run cannot be cancelled")
}

pub fn proof_longdiv_cancellable(
    g: &GroupElement,
    t: u64,
    ell: &BigUint,
    ops: &mut OpCounter,
    cancel: &Cancellation,
) -> Result<GroupElement> {
    let mut remainder = BigUint::one();
    let mut acc = g.identity();
    for i in 0..t {
        if i % CANCEL_CHECK_INTERVAL == 0 && i > 0 && cancel.is_cancelled() {
            return Err(Error::Cancelled);
        }
        remainder <<= 1u32;
        acc = acc.square(ops);
        if remainder >= *ell {
            remainder -= ell;
            acc = acc.mul(g, ops)?;
        }
    }
    Ok(acc)
}

/// Recomputes `g` and `ℓ` from the transcript and checks the proof.
pub fn verify(params: &WesolowskiParams, transcript: &WesolowskiTranscript) -> Verdict {
    let ops = OpCounter::default();
    if transcript.y.modulus() != params.modulus.n() || transcript.pi.modulus() != params.modulus.n()
    {
        return Verdict::reject(ops, "transcript elements belong to a different modulus");
    }
    if transcript.include_t_in_hash != params.include_t_in_hash {
        return Verdict::reject(ops, "challenge derivation flag does not match parameters");
    }
    let g = match hash_to_group(&transcript.x, &params.modulus) {
        Ok(g) => g,
        Err(e) => return Verdict::reject(ops, format!("hash to group failed: {e}")),
    };
    let ell = match challenge_prime(params, &g, &transcript.y, transcript.t) {
        Ok(ell) => ell,
        Err(e) => return Verdict::reject(ops, format!("hash to prime failed: {e}")),
    };
    if ell != transcript.ell {
        return Verdict::reject(ops, "challenge prime does not match the transcript");
    }
    verify_with_challenge(&g, transcript.t, &ell, &transcript.y, &transcript.pi)
}

/// The verification equation for an externally fixed `g` and `ℓ`.
pub fn verify_with_challenge(
    g: &GroupElement,
    t: u64,
    ell: &BigUint,
    y: &GroupElement,
    pi: &GroupElement,
) -> Verdict {
    let mut ops = OpCounter::default();
    if ell.is_zero() {
        return Verdict::reject(ops, "challenge must be positive");
    }
    // 2^T mod ℓ is integer arithmetic on the public challenge, not group work.
    let r = BigUint::from(2u8).modpow(&BigUint::from(t), ell);
    match multi_exp(pi, ell, g, &r, &mut ops) {
        Ok(rhs) => Verdict::decide(rhs == *y, ops, "pi^ell * g^(2^T mod ell) != y"),
        Err(e) => Verdict::reject(ops, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::sequential_square;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn n35() -> Modulus {
        Modulus::from_primes(5u32.into(), 7u32.into()).unwrap()
    }

    #[test]
    fn hand_worked_instance() {
        let m = n35();
        let g = m.element(2u32).unwrap();
        let ell = BigUint::from(5u32);
        let (y, _) = sequential_square(&g, 3);
        assert_eq!(*y.value(), BigUint::from(11u32));
        let pi = proof_longdiv(&g, 3, &ell, &mut OpCounter::default());
        assert_eq!(*pi.value(), BigUint::from(2u32));
        assert!(verify_with_challenge(&g, 3, &ell, &y, &pi).accept);

        let mut ops = OpCounter::default();
        let tampered = y.mul(&g, &mut ops).unwrap();
        assert!(!verify_with_challenge(&g, 3, &ell, &tampered, &pi).accept);
    }

    #[test]
    fn quotient_zero_cases() {
        let m = n35();
        let g = m.element(3u32).unwrap();
        let mut ops = OpCounter::default();
        let pi = proof_longdiv(&g, 1, &BigUint::from(3u32), &mut ops);
        assert!(pi.is_one());
        let y = g.square(&mut ops);
        assert!(verify_with_challenge(&g, 1, &BigUint::from(3u32), &y, &m.one()).accept);
        // ℓ > 2^T
        let pi = proof_longdiv(&g, 4, &BigUint::from(17u32), &mut ops);
        assert!(pi.is_one());
    }

    #[test]
    fn longdiv_matches_direct_exponent() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let m = Modulus::setup(16, 2, &mut rng).unwrap();
        for _ in 0..1000 {
            let g = hash_to_group(&rng.gen::<[u8; 8]>(), &m).unwrap();
            let t = rng.gen_range(0..=20u64);
            let ell =
                crate::hash::hash_to_prime(&rng.gen::<[u8; 8]>(), rng.gen_range(4..=24)).unwrap();
            let quotient = (BigUint::one() << t) / &ell;
            let mut ops = OpCounter::default();
            let expected = g.pow(&quotient, &mut OpCounter::default());
            assert_eq!(proof_longdiv(&g, t, &ell, &mut ops), expected);
            assert_eq!(ops.squarings, t);
            assert_eq!(ops.multiplications, quotient.count_ones());
        }
    }

    #[test]
    fn eval_verify_round_trip_and_cost() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let m = Modulus::setup(16, 2, &mut rng).unwrap();
        for include in [false, true] {
            let params = WesolowskiParams::new(m.clone(), 32).with_t_in_hash(include);
            for _ in 0..50 {
                let x: [u8; 16] = rng.gen();
                let t = rng.gen_range(1..=1u64 << 12);
                let ev = eval(&params, &x, t).unwrap();
                assert_eq!(ev.ops.squarings, 2 * t);
                let verdict = verify(&params, &ev.transcript);
                assert!(verdict.accept, "{verdict:?}");
                let bound = 2 * ev.transcript.ell.bits() + 4;
                assert!(verdict.ops.group_ops() <= bound);
                assert_eq!(ev.transcript.ell.bits(), 32);
            }
        }
    }

    #[test]
    fn verify_rejects_tampering() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let m = Modulus::setup(16, 2, &mut rng).unwrap();
        let params = WesolowskiParams::new(m.clone(), 32);
        let ev = eval(&params, b"input", 100).unwrap();
        let g = hash_to_group(b"input", &m).unwrap();
        let mut ops = OpCounter::default();

        let mut bad = ev.transcript.clone();
        bad.y = bad.y.mul(&g, &mut ops).unwrap();
        assert!(!verify(&params, &bad).accept);

        let mut bad = ev.transcript.clone();
        bad.pi = bad.pi.mul(&g, &mut ops).unwrap();
        assert!(!verify(&params, &bad).accept);

        let mut bad = ev.transcript.clone();
        bad.t += 1;
        assert!(!verify(&params, &bad).accept);

        let mut bad = ev.transcript.clone();
        bad.include_t_in_hash = true;
        assert!(!verify(&params, &bad).accept);

        let other = Modulus::setup(16, 2, &mut rng).unwrap();
        let verdict = verify(&WesolowskiParams::new(other, 32), &ev.transcript);
        assert!(!verdict.accept);
        assert!(verdict.reason.unwrap().contains("different modulus"));
    }

    #[test]
    fn t_must_be_positive() {
        let params = WesolowskiParams::new(n35(), 8);
        assert!(eval(&params, b"x", 0).is_err());
    }

    #[test]
    fn output_proof_pair_is_unique_under_fixed_challenge() {
        let m = n35();
        let mut ops = OpCounter::default();
        for g in m.units() {
            for t in 1..=6u64 {
                let honest_y = g.pow(&(BigUint::one() << t), &mut ops);
                for ell in [5u32, 7, 11, 13] {
                    let ell = BigUint::from(ell);
                    let passing: Vec<_> = m
                        .units()
                        .filter(|pi| verify_with_challenge(&g, t, &ell, &honest_y, pi).accept)
                        .collect();
                    assert_eq!(passing.len(), 1, "g={g:?} t={t} ell={ell}");
                    assert_eq!(passing[0], proof_longdiv(&g, t, &ell, &mut ops));
                }
            }
        }
    }
}
