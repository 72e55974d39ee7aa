//! Hash derivations: hash-to-group, hash-to-prime and the hash onto
//! maximal-order residues modulo 2^(T+δ+2).
//!
//! All three are built on one SHAKE256 expansion, domain-separated by a
//! [`DomainTag`]. Rejection loops append a 4-byte big-endian counter to the
//! input bytes.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::error::{Error, Result};
use crate::group::{GroupElement, Modulus};
use crate::primes;

/// Name of the expansion function, recorded in parameter files.
pub const XOF_NAME: &str = "shake256";
/// Byte width of `bin(T)`.
pub const DELAY_WIDTH: usize = 8;

pub const GROUP_RETRY_BOUND: u32 = 1 << 16;
pub const PRIME_RETRY_BOUND: u32 = 1 << 20;
pub const MAXIMAL_ORDER_RETRY_BOUND: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    /// H_G: bytes to ℤ*_N.
    Group,
    /// H_prime: bytes to a prime challenge.
    Prime,
    /// H: bytes to a maximal-order residue of ℤ*_{2^(T+δ+2)}.
    MaximalOrder,
    /// Fiat–Shamir challenges of the halving protocol.
    Challenge,
    /// Free-form expansion used by tests and tooling.
    Raw,
}

impl DomainTag {
    fn label(self) -> &'static [u8] {
        match self {
            DomainTag::Group => b"H_G",
            DomainTag::Prime => b"H_prime",
            DomainTag::MaximalOrder => b"H_maxord",
            DomainTag::Challenge => b"H_challenge",
            DomainTag::Raw => b"H_raw",
        }
    }
}

/// Tagged input to the expansion function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashInput {
    tag: DomainTag,
    bytes: Vec<u8>,
}

impl HashInput {
    pub fn new(tag: DomainTag) -> Self {
        Self {
            tag,
            bytes: Vec::new(),
        }
    }

    pub fn with_bytes(tag: DomainTag, bytes: &[u8]) -> Self {
        Self {
            tag,
            bytes: bytes.to_vec(),
        }
    }

    /// Appends `bytes` (the `|||` operator).
    pub fn chain(mut self, bytes: &[u8]) -> Self {
        self.bytes.extend_from_slice(bytes);
        self
    }

    pub fn tag(&self) -> DomainTag {
        self.tag
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn with_counter(&self, counter: u32) -> HashInput {
        self.clone().chain(&counter.to_be_bytes())
    }
}

/// Fixed-width big-endian encoding.
pub fn bin(value: &BigUint, width: usize) -> Result<Vec<u8>> {
    let raw = if value.is_zero() {
        Vec::new()
    } else {
        value.to_bytes_be()
    };
    if raw.len() > width {
        return Err(Error::WidthOverflow { width });
    }
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(&raw);
    Ok(out)
}

/// `bin(e)` at the group's element width.
pub fn bin_element(e: &GroupElement) -> Vec<u8> {
    let width = e.modulus().bits().div_ceil(8) as usize;
    bin(e.value(), width).expect("canonical element fits its modulus width")
}

/// `bin(T)` at [`DELAY_WIDTH`].
pub fn bin_delay(t: u64) -> [u8; DELAY_WIDTH] {
    t.to_be_bytes()
}

/// Deterministic expansion to an integer of exactly `nbits` bits.
pub fn xof_expand(input: &HashInput, nbits: u64) -> BigUint {
    assert!(nbits >= 1, "xof_expand needs at least one bit");
    let label = input.tag.label();
    let mut xof = Shake256::default();
    xof.update(b"vdflab-xof-v1");
    xof.update(&[label.len() as u8]);
    xof.update(label);
    xof.update(&nbits.to_be_bytes());
    xof.update(&input.bytes);
    let mut reader = xof.finalize_xof();

    let nbytes = nbits.div_ceil(8) as usize;
    let mut buf = vec![0u8; nbytes];
    reader.read(&mut buf);
    let excess = (nbytes as u64 * 8 - nbits) as u32;
    buf[0] &= 0xffu8 >> excess;
    let mut out = BigUint::from_bytes_be(&buf);
    out.set_bit(nbits - 1, true);
    out
}

/// H_G: hashes `x` to a unit of ℤ*_N by rejection sampling.
pub fn hash_to_group(x: &[u8], modulus: &Modulus) -> Result<GroupElement> {
    let input = HashInput::with_bytes(DomainTag::Group, x);
    let width = modulus.bits() + 64;
    for counter in 0..GROUP_RETRY_BOUND {
        let candidate = xof_expand(&input.with_counter(counter), width);
        if let Ok(g) = modulus.reduce(&candidate) {
            return Ok(g);
        }
    }
    Err(Error::SearchExhausted {
        what: "hash to group",
        attempts: GROUP_RETRY_BOUND as u64,
    })
}

/// H_prime: the first `bits`-bit odd candidate in counter order that passes
/// Miller–Rabin.
pub fn hash_to_prime(seed: &[u8], bits: u64) -> Result<BigUint> {
    if bits < 4 {
        return Err(Error::InvalidParameter(format!(
            "hash_to_prime needs at least 4 bits, got {bits}"
        )));
    }
    let input = HashInput::with_bytes(DomainTag::Prime, seed);
    for counter in 0..PRIME_RETRY_BOUND {
        let mut candidate = xof_expand(&input.with_counter(counter), bits);
        candidate.set_bit(0, true);
        if primes::is_prime(&candidate) {
            return Ok(candidate);
        }
    }
    Err(Error::SearchExhausted {
        what: "hash to prime",
        attempts: PRIME_RETRY_BOUND as u64,
    })
}

/// Output of [`hash_to_maximal_order`].
#[derive(Debug, Clone)]
pub struct MaximalOrderHash {
    /// The (T+δ+2)-bit integer, ≡ 3 or 5 (mod 8).
    pub raw: BigUint,
    /// `raw mod N`.
    pub element: GroupElement,
    /// Rejection-loop counter that produced a unit.
    pub counter: u32,
}

/// H: hashes `x` to an integer of maximal order 2^(T+δ) in ℤ*_{2^(T+δ+2)},
/// reduced into ℤ*_N.
///
/// The low three bits are overwritten with 011 or 101; those residues are
/// exactly the elements of maximal order modulo 2^k for k ≥ 3. Candidates
/// that are not units mod N are resampled with the next counter.
pub fn hash_to_maximal_order(
    x: &[u8],
    t: u64,
    delta: u64,
    modulus: &Modulus,
) -> Result<MaximalOrderHash> {
    let k = t
        .checked_add(delta)
        .and_then(|v| v.checked_add(2))
        .filter(|&k| k >= 3)
        .ok_or_else(|| Error::InvalidParameter("T + delta + 2 must be at least 3".into()))?;
    let input = HashInput::new(DomainTag::MaximalOrder)
        .chain(&bin_delay(t))
        .chain(&bin_delay(delta))
        .chain(x);
    for counter in 0..MAXIMAL_ORDER_RETRY_BOUND {
        let expanded = xof_expand(&input.with_counter(counter), k + 1);
        let choice = expanded.bit(0);
        let mut raw: BigUint = expanded >> 1u32;
        raw.set_bit(0, true);
        raw.set_bit(1, !choice);
        raw.set_bit(2, choice);
        if let Ok(element) = modulus.reduce(&raw) {
            return Ok(MaximalOrderHash {
                raw,
                element,
                counter,
            });
        }
    }
    Err(Error::SearchExhausted {
        what: "hash to maximal order",
        attempts: MAXIMAL_ORDER_RETRY_BOUND as u64,
    })
}

/// Order of an odd `a` in ℤ*_{2^k}, by repeated squaring (every such order
/// is a power of two).
pub fn two_adic_order(a: &BigUint, k: u64) -> BigUint {
    let modulus = BigUint::one() << k;
    assert!(a.is_odd(), "only odd residues are units mod 2^k");
    let mut x = a % &modulus;
    let mut order = BigUint::one();
    while !x.is_one() {
        x = &x * &x % &modulus;
        order <<= 1u32;
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn n77() -> Modulus {
        Modulus::from_primes(7u32.into(), 11u32.into()).unwrap()
    }

    #[test]
    fn bin_encodings() {
        assert_eq!(bin(&1u32.into(), 2).unwrap(), vec![0x00, 0x01]);
        assert_eq!(bin(&255u32.into(), 2).unwrap(), vec![0x00, 0xff]);
        assert_eq!(bin(&0u32.into(), 1).unwrap(), vec![0x00]);
        let cat = [
            bin(&77u32.into(), 1).unwrap(),
            bin(&2u32.into(), 1).unwrap(),
        ]
        .concat();
        assert_eq!(cat, vec![0x4d, 0x02]);
        assert_eq!(
            bin(&256u32.into(), 1).unwrap_err(),
            Error::WidthOverflow { width: 1 }
        );
        assert_eq!(bin_element(&n77().element(2u32).unwrap()), vec![0x02]);
    }

    #[test]
    fn xof_is_deterministic_and_exact_width() {
        let input = HashInput::with_bytes(DomainTag::Raw, b"seed");
        assert_eq!(xof_expand(&input, 1), BigUint::one());
        for nbits in [1u64, 7, 8, 9, 63, 64, 65, 1000] {
            let a = xof_expand(&input, nbits);
            assert_eq!(a, xof_expand(&input, nbits));
            assert_eq!(a.bits(), nbits);
        }
    }

    #[test]
    fn domain_tags_separate_streams() {
        let tags = [
            DomainTag::Group,
            DomainTag::Prime,
            DomainTag::MaximalOrder,
            DomainTag::Challenge,
            DomainTag::Raw,
        ];
        let outs: Vec<_> = tags
            .iter()
            .map(|&t| xof_expand(&HashInput::with_bytes(t, b"same bytes"), 256))
            .collect();
        for i in 0..outs.len() {
            for j in i + 1..outs.len() {
                assert_ne!(outs[i], outs[j]);
            }
        }
    }

    #[test]
    fn single_bit_flip_avalanche() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let nbits = 256u64;
        let mut total_diff = 0u64;
        let trials = 1000;
        for _ in 0..trials {
            let mut seed = [0u8; 32];
            rng.fill(&mut seed);
            let a = xof_expand(&HashInput::with_bytes(DomainTag::Raw, &seed), nbits);
            let bit = rng.gen_range(0..256);
            seed[bit / 8] ^= 1 << (bit % 8);
            let b = xof_expand(&HashInput::with_bytes(DomainTag::Raw, &seed), nbits);
            total_diff += (a ^ b).count_ones();
        }
        // The top bit is forced, so 255 bits are free.
        let mean_fraction = total_diff as f64 / (trials as f64 * (nbits - 1) as f64);
        assert!(mean_fraction >= 0.45, "{mean_fraction}");
    }

    #[test]
    fn hash_to_group_is_a_stable_unit() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let m = Modulus::setup(16, 2, &mut rng).unwrap();
        for i in 0u32..200 {
            let g = hash_to_group(&i.to_be_bytes(), &m).unwrap();
            assert!(g.value().gcd(m.n()).is_one());
            assert_eq!(g, hash_to_group(&i.to_be_bytes(), &m).unwrap());
        }
    }

    #[test]
    fn hash_to_group_is_uniform_over_units_mod_77() {
        let m = n77();
        let mut counts = std::collections::BTreeMap::<u64, u64>::new();
        let samples = 1000u64;
        for i in 0..samples {
            let g = hash_to_group(&i.to_be_bytes(), &m).unwrap();
            *counts.entry(g.value().to_u64().unwrap()).or_default() += 1;
        }
        let units = 60.0;
        let expected = samples as f64 / units;
        let chi2: f64 = m
            .units()
            .map(|u| {
                let observed = *counts.get(&u.value().to_u64().unwrap()).unwrap_or(&0) as f64;
                (observed - expected).powi(2) / expected
            })
            .sum();
        // 0.99 quantile of chi-square with 59 degrees of freedom.
        assert!(chi2 < 87.1657, "chi-square statistic {chi2}");
    }

    fn trial_division_prime(n: u64) -> bool {
        n >= 2
            && (2..)
                .take_while(|d| d * d <= n)
                .all(|d| !n.is_multiple_of(d))
    }

    #[test]
    fn hash_to_prime_small_widths() {
        for i in 0u32..200 {
            let p = hash_to_prime(&i.to_be_bytes(), 4).unwrap();
            assert!(p == 11u32.into() || p == 13u32.into(), "{p}");
        }
        assert!(hash_to_prime(b"x", 3).is_err());
    }

    #[test]
    fn hash_to_prime_outputs_are_prime_by_trial_division() {
        for i in 0u32..1000 {
            let seed = i.to_le_bytes();
            let p = hash_to_prime(&seed, 16).unwrap();
            assert_eq!(p.bits(), 16);
            assert!(trial_division_prime(p.to_u64().unwrap()), "{p}");
            assert_eq!(p, hash_to_prime(&seed, 16).unwrap());
        }
    }

    #[test]
    fn maximal_order_example() {
        let m = n77();
        for i in 0u32..50 {
            let h = hash_to_maximal_order(&i.to_be_bytes(), 3, 2, &m).unwrap();
            assert_eq!(h.raw.bits(), 7);
            let low = (&h.raw % 8u32).to_u32().unwrap();
            assert!(low == 3 || low == 5);
            assert_eq!(two_adic_order(&h.raw, 7), BigUint::from(32u32));
            assert_eq!(h.element, m.reduce(&h.raw).unwrap());
            let again = hash_to_maximal_order(&i.to_be_bytes(), 3, 2, &m).unwrap();
            assert_eq!(again.element, h.element);
        }
        assert!(hash_to_maximal_order(b"x", 0, 0, &m).is_err());
    }

    fn brute_force_order_mod_pow2(a: u64, k: u64) -> u64 {
        let modulus = 1u64 << k;
        let mut x = a % modulus;
        let mut ord = 1;
        while x != 1 {
            x = x * a % modulus;
            ord += 1;
        }
        ord
    }

    #[test]
    fn maximal_order_by_brute_force_up_to_k_20() {
        let m = n77();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for k in 3u64..=20 {
            let delta = 2.min(k - 3);
            let t = k - 2 - delta;
            for _ in 0..100 {
                let x: [u8; 16] = rng.gen();
                let h = hash_to_maximal_order(&x, t, delta, &m).unwrap();
                let raw = h.raw.to_u64().unwrap();
                assert_eq!(
                    brute_force_order_mod_pow2(raw, k),
                    1 << (k - 2),
                    "k={k} raw={raw}"
                );
            }
        }
    }
}
