//! Pietrzak's VDF: the halving protocol made non-interactive.
//!
//! A claim `y = g^(2^T)` is reduced level by level. With midpoint
//! `μ = g^(2^(T/2))` and challenge `r`, the identity
//! `μ^r · y = (g^r · μ)^(2^(T/2))` turns it into the claim
//! `(g^r·μ, μ^r·y, T/2)`. After log2(T) levels the verifier checks a single
//! squaring. The proof is the list of midpoints.

use num_bigint::BigUint;
use num_traits::One;

use crate::error::{Error, Result};
use crate::group::{sequential_square_cancellable, Cancellation, GroupElement, Modulus, OpCounter};
use crate::hash::{bin_delay, bin_element, hash_to_group, xof_expand, DomainTag, HashInput};
use crate::outcome::{Evaluation, Verdict};

#[derive(Debug, Clone)]
pub struct PietrzakParams {
    pub modulus: Modulus,
    /// Challenges are drawn from [1, 2^lambda].
    pub lambda: u64,
}

impl PietrzakParams {
    pub fn new(modulus: Modulus, lambda: u64) -> Self {
        Self { modulus, lambda }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PietrzakTranscript {
    pub x: Vec<u8>,
    pub t: u64,
    pub y: GroupElement,
    pub mu: Vec<GroupElement>,
    pub r: Vec<BigUint>,
    pub lambda: u64,
}

/// log2(T) for a power of two T ≥ 2.
pub fn levels(t: u64) -> Result<u32> {
    if t < 2 || !t.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "delay T must be a power of two and at least 2, got {t}"
        )));
    }
    Ok(t.trailing_zeros())
}

/// Fiat–Shamir challenge in [1, 2^lambda] bound to one level's claim.
pub fn challenge(
    lambda: u64,
    g: &GroupElement,
    y: &GroupElement,
    mu: &GroupElement,
    t: u64,
) -> BigUint {
    let input = HashInput::new(DomainTag::Challenge)
        .chain(&bin_element(g))
        .chain(&bin_element(y))
        .chain(&bin_element(mu))
        .chain(&bin_delay(t));
    let wide = xof_expand(&input, lambda + 1);
    let mask = (BigUint::one() << lambda) - 1u32;
    (wide & mask) + 1u32
}

pub fn eval(params: &PietrzakParams, x: &[u8], t: u64) -> Result<Evaluation<GroupElement>> {
    eval_cancellable(params, x, t, &Cancellation::never())
}

pub fn eval_cancellable(
    params: &PietrzakParams,
    x: &[u8],
    t: u64,
    cancel: &Cancellation,
) -> Result<Evaluation<GroupElement>> {
    levels(t)?;
    let g = hash_to_group(x, &params.modulus)?;
    let (y, ops) = sequential_square_cancellable(&g, t, cancel)?;
    Ok(Evaluation { transcript: y, ops })
}

pub fn prove(
    params: &PietrzakParams,
    x: &[u8],
    t: u64,
    y: &GroupElement,
) -> Result<Evaluation<PietrzakTranscript>> {
    prove_cancellable(params, x, t, y, &Cancellation::never())
}

/// Runs the halving recursion, re-squaring from each folded base to find
/// its midpoint (about T squarings in total).
pub fn prove_cancellable(
    params: &PietrzakParams,
    x: &[u8],
    t: u64,
    y: &GroupElement,
    cancel: &Cancellation,
) -> Result<Evaluation<PietrzakTranscript>> {
    let depth = levels(t)?;
    let mut ops = OpCounter::default();
    let mut g = hash_to_group(x, &params.modulus)?;
    let mut claim_y = y.clone();
    let mut claim_t = t;
    let mut mus = Vec::with_capacity(depth as usize);
    let mut rs = Vec::with_capacity(depth as usize);

    while claim_t > 1 {
        let half = claim_t / 2;
        let (mu, cost) = sequential_square_cancellable(&g, half, cancel)?;
        ops += cost;
        let r = challenge(params.lambda, &g, &claim_y, &mu, claim_t);
        let g_next = g.pow(&r, &mut ops).mul(&mu, &mut ops)?;
        let y_next = mu.pow(&r, &mut ops).mul(&claim_y, &mut ops)?;
        mus.push(mu);
        rs.push(r);
        g = g_next;
        claim_y = y_next;
        claim_t = half;
    }
    if g.square(&mut ops) != claim_y {
        return Err(Error::InconsistentClaim(
            "folded claim fails the final squaring; y is not g^(2^T)".into(),
        ));
    }
    Ok(Evaluation {
        transcript: PietrzakTranscript {
            x: x.to_vec(),
            t,
            y: y.clone(),
            mu: mus,
            r: rs,
            lambda: params.lambda,
        },
        ops,
    })
}

pub fn verify(params: &PietrzakParams, transcript: &PietrzakTranscript) -> Verdict {
    let mut ops = OpCounter::default();
    let depth = match levels(transcript.t) {
        Ok(d) => d as usize,
        Err(e) => return Verdict::reject(ops, e.to_string()),
    };
    if transcript.mu.len() != depth || transcript.r.len() != depth {
        return Verdict::reject(
            ops,
            format!(
                "expected {depth} midpoints and challenges, got {} and {}",
                transcript.mu.len(),
                transcript.r.len()
            ),
        );
    }
    if transcript.lambda != params.lambda {
        return Verdict::reject(ops, "challenge width does not match parameters");
    }
    let n = params.modulus.n();
    if transcript.y.modulus() != n || transcript.mu.iter().any(|m| m.modulus() != n) {
        return Verdict::reject(ops, "transcript elements belong to a different modulus");
    }
    let mut g = match hash_to_group(&transcript.x, &params.modulus) {
        Ok(g) => g,
        Err(e) => return Verdict::reject(ops, format!("hash to group failed: {e}")),
    };
    let mut y = transcript.y.clone();
    let mut t = transcript.t;
    for (mu, claimed_r) in transcript.mu.iter().zip(&transcript.r) {
        let r = challenge(params.lambda, &g, &y, mu, t);
        if r != *claimed_r {
            return Verdict::reject(ops, "challenge does not match the transcript");
        }
        let folded = g
            .pow(&r, &mut ops)
            .mul(mu, &mut ops)
            .and_then(|g_next| Ok((g_next, mu.pow(&r, &mut ops).mul(&y, &mut ops)?)));
        match folded {
            Ok((g_next, y_next)) => {
                g = g_next;
                y = y_next;
            }
            Err(e) => return Verdict::reject(ops, e.to_string()),
        }
        t /= 2;
    }
    let accept = g.square(&mut ops) == y;
    Verdict::decide(accept, ops, "final claim fails y = g^2")
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

    fn random_modulus(seed: u64) -> Modulus {
        Modulus::setup(16, 2, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    /// Finds an input whose hash lands on the requested element.
    fn input_hashing_to(m: &Modulus, target: u32) -> Vec<u8> {
        (0u32..)
            .map(|i| i.to_be_bytes().to_vec())
            .find(|x| *hash_to_group(x, m).unwrap().value() == BigUint::from(target))
            .unwrap()
    }

    #[test]
    fn small_instance_with_g_two() {
        let m = n35();
        let params = PietrzakParams::new(m.clone(), 8);
        let x = input_hashing_to(&m, 2);
        let y = eval(&params, &x, 4).unwrap().transcript;
        assert_eq!(*y.value(), BigUint::from(16u32));
        let proof = prove(&params, &x, 4, &y).unwrap().transcript;
        assert_eq!(proof.mu.len(), 2);
        assert_eq!(*proof.mu[0].value(), BigUint::from(16u32));
        assert!(verify(&params, &proof).accept);
    }

    #[test]
    fn single_level() {
        let m = random_modulus(1);
        let params = PietrzakParams::new(m.clone(), 16);
        let g = hash_to_group(b"x", &m).unwrap();
        let y = eval(&params, b"x", 2).unwrap().transcript;
        assert_eq!(y, sequential_square(&g, 2).0);
        let proof = prove(&params, b"x", 2, &y).unwrap().transcript;
        assert_eq!(proof.mu, vec![sequential_square(&g, 1).0]);
        assert!(verify(&params, &proof).accept);

        let mut ops = OpCounter::default();
        let mut bad = proof.clone();
        bad.y = bad.y.mul(&g, &mut ops).unwrap();
        assert!(!verify(&params, &bad).accept);
    }

    #[test]
    fn rejects_non_power_of_two_delay() {
        let params = PietrzakParams::new(n35(), 8);
        for t in [0u64, 1, 3, 6, 12] {
            assert!(eval(&params, b"x", t).is_err(), "{t}");
        }
    }

    #[test]
    fn prove_refuses_a_wrong_claim() {
        let m = random_modulus(2);
        let params = PietrzakParams::new(m.clone(), 16);
        let y = eval(&params, b"x", 8).unwrap().transcript;
        let wrong = y.square(&mut OpCounter::default());
        assert!(matches!(
            prove(&params, b"x", 8, &wrong),
            Err(Error::InconsistentClaim(_))
        ));
    }

    #[test]
    fn completeness_and_proof_size() {
        let m = random_modulus(3);
        let params = PietrzakParams::new(m, 32);
        let mut rng = ChaCha20Rng::seed_from_u64(30);
        for k in 1..=12u32 {
            let t = 1u64 << k;
            let x: [u8; 8] = rng.gen();
            let y = eval(&params, &x, t).unwrap().transcript;
            let proof = prove(&params, &x, t, &y).unwrap().transcript;
            assert_eq!(proof.mu.len(), k as usize);
            assert!(proof
                .r
                .iter()
                .all(|r| r.bits() <= 33 && *r >= BigUint::one()));
            assert!(verify(&params, &proof).accept, "T = {t}");
        }
    }

    #[test]
    fn perturbed_midpoints_are_rejected() {
        let m = random_modulus(4);
        let params = PietrzakParams::new(m.clone(), 32);
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let x = b"perturb";
        let t = 256;
        let y = eval(&params, x, t).unwrap().transcript;
        let proof = prove(&params, x, t, &y).unwrap().transcript;
        for _ in 0..100 {
            let mut bad = proof.clone();
            let level = rng.gen_range(0..bad.mu.len());
            let noise = hash_to_group(&rng.gen::<[u8; 8]>(), &m).unwrap();
            if noise.is_one() {
                continue;
            }
            bad.mu[level] = bad.mu[level]
                .mul(&noise, &mut OpCounter::default())
                .unwrap();
            assert!(!verify(&params, &bad).accept);
        }
    }

    #[test]
    fn malformed_transcripts_are_rejected_with_reason() {
        let m = random_modulus(5);
        let params = PietrzakParams::new(m, 16);
        let y = eval(&params, b"x", 16).unwrap().transcript;
        let proof = prove(&params, b"x", 16, &y).unwrap().transcript;

        let mut short = proof.clone();
        short.mu.pop();
        assert!(verify(&params, &short)
            .reason
            .unwrap()
            .contains("midpoints"));

        let mut wrong_r = proof.clone();
        wrong_r.r[0] += 1u32;
        assert!(!verify(&params, &wrong_r).accept);

        let mut odd = proof.clone();
        odd.t = 12;
        assert!(!verify(&params, &odd).accept);
    }
}
