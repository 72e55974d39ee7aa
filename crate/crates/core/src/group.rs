//! Arithmetic in the RSA group ℤ*_N.
//!
//! Every group operation takes an [`OpCounter`] so callers can account for
//! exactly how many squarings, multiplications and inversions a protocol
//! step costs. Integer work that does not touch group elements (reducing
//! exponents, computing challenges) is deliberately not counted.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::primes;

/// Sequential loops poll their [`Cancellation`] once per this many squarings.
pub const CANCEL_CHECK_INTERVAL: u64 = 1 << 16;

/// Modulus bit-length multiplier: each prime factor has `c · λ` bits.
pub const DEFAULT_PRIME_FACTOR: u64 = 2;

/// Tally of group operations performed by one call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounter {
    pub squarings: u64,
    pub multiplications: u64,
    pub inversions: u64,
}

impl OpCounter {
    /// Squarings plus multiplications.
    pub fn group_ops(&self) -> u64 {
        self.squarings + self.multiplications
    }
}

impl Add for OpCounter {
    type Output = OpCounter;

    fn add(mut self, rhs: OpCounter) -> OpCounter {
        self += rhs;
        self
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        self.squarings += rhs.squarings;
        self.multiplications += rhs.multiplications;
        self.inversions += rhs.inversions;
    }
}

/// Cooperative cancellation for long sequential loops.
#[derive(Debug, Clone, Default)]
pub struct Cancellation {
    flag: Option<Arc<AtomicBool>>,
    deadline: Option<Instant>,
}

impl Cancellation {
    pub fn never() -> Self {
        Self::default()
    }

    pub fn with_flag(flag: Arc<AtomicBool>) -> Self {
        Self {
            flag: Some(flag),
            deadline: None,
        }
    }

    pub fn with_deadline(deadline: Instant) -> Self {
        Self {
            flag: None,
            deadline: Some(deadline),
        }
    }

    pub fn is_cancelled(&self) -> bool {
        if let Some(flag) = &self.flag {
            if flag.load(Ordering::Relaxed) {
                return true;
            }
        }
        matches!(self.deadline, Some(d) if Instant::now() >= d)
    }
}

/// Knowledge of the factorization of N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trapdoor {
    pub p: BigUint,
    pub q: BigUint,
    /// (p - 1) / 2
    pub p_prime: BigUint,
    /// (q - 1) / 2
    pub q_prime: BigUint,
    /// Euler's totient (p - 1)(q - 1).
    pub phi: BigUint,
    /// Carmichael's function lcm(p - 1, q - 1) = 2·p'·q'.
    pub lambda: BigUint,
}

impl Trapdoor {
    fn new(p: BigUint, q: BigUint) -> Self {
        let one = BigUint::one();
        let p1 = &p - &one;
        let q1 = &q - &one;
        Trapdoor {
            p_prime: &p1 >> 1u32,
            q_prime: &q1 >> 1u32,
            phi: &p1 * &q1,
            lambda: p1.lcm(&q1),
            p,
            q,
        }
    }

    pub fn modulus(&self) -> BigUint {
        &self.p * &self.q
    }
}

/// Source of safe primes for [`Modulus::setup_with`]. Tests substitute a
/// scripted source to force particular factors.
pub trait SafePrimeSource {
    fn next_safe_prime(&mut self, bits: u64) -> Result<BigUint>;
}

/// Random safe primes drawn from an RNG.
pub struct RandomSafePrimes<'a, R: Rng + ?Sized> {
    pub rng: &'a mut R,
    pub max_attempts: Option<u64>,
}

impl<'a, R: Rng + ?Sized> RandomSafePrimes<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Self {
            rng,
            max_attempts: None,
        }
    }
}

impl<R: Rng + ?Sized> SafePrimeSource for RandomSafePrimes<'_, R> {
    fn next_safe_prime(&mut self, bits: u64) -> Result<BigUint> {
        let bound = self
            .max_attempts
            .unwrap_or_else(|| primes::default_attempt_bound(bits));
        primes::generate_safe_prime(bits, self.rng, bound)
    }
}

/// An RSA modulus N = p·q, optionally with its trapdoor.
#[derive(Clone)]
pub struct Modulus {
    n: Arc<BigUint>,
    trapdoor: Option<Arc<Trapdoor>>,
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Modulus")
            .field("n", &to_hex(&self.n))
            .field("trapdoor", &self.trapdoor.is_some())
            .finish()
    }
}

impl PartialEq for Modulus {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl Eq for Modulus {}

impl Modulus {
    /// A modulus whose factorization is not known to this process.
    pub fn public(n: BigUint) -> Result<Self> {
        if n.is_even() || n < BigUint::from(3u8) {
            return Err(Error::InvalidParameter(
                "modulus must be odd and at least 3".into(),
            ));
        }
        Ok(Modulus {
            n: Arc::new(n),
            trapdoor: None,
        })
    }

    /// Builds N = p·q from two distinct safe primes.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::InvalidParameter("p and q must differ".into()));
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if !primes::is_safe_prime(v) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {v} is not a safe prime"
                )));
            }
        }
        let trapdoor = Trapdoor::new(p, q);
        Ok(Modulus {
            n: Arc::new(trapdoor.modulus()),
            trapdoor: Some(Arc::new(trapdoor)),
        })
    }

    /// Draws two distinct safe primes of `factor · lambda` bits each.
    pub fn setup<R: Rng + ?Sized>(lambda: u64, factor: u64, rng: &mut R) -> Result<Self> {
        Self::setup_with(lambda, factor, &mut RandomSafePrimes::new(rng))
    }

    pub fn setup_with<S: SafePrimeSource + ?Sized>(
        lambda: u64,
        factor: u64,
        source: &mut S,
    ) -> Result<Self> {
        if lambda < 8 {
            return Err(Error::InvalidParameter(format!(
                "security parameter must be at least 8, got {lambda}"
            )));
        }
        if factor == 0 {
            return Err(Error::InvalidParameter(
                "modulus factor must be positive".into(),
            ));
        }
        let bits = factor * lambda;
        let p = source.next_safe_prime(bits)?;
        let mut q = source.next_safe_prime(bits)?;
        while q == p {
            q = source.next_safe_prime(bits)?;
        }
        Self::from_primes(p, q)
    }

    pub fn n(&self) -> &BigUint {
        &self.n
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Byte width of `bin(·)` for elements of this group.
    pub fn element_width(&self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    pub fn trapdoor(&self) -> Option<&Trapdoor> {
        self.trapdoor.as_deref()
    }

    pub fn require_trapdoor(&self) -> Result<&Trapdoor> {
        self.trapdoor().ok_or(Error::MissingTrapdoor)
    }

    /// The same modulus with the factorization dropped.
    pub fn without_trapdoor(&self) -> Modulus {
        Modulus {
            n: self.n.clone(),
            trapdoor: None,
        }
    }

    pub fn one(&self) -> GroupElement {
        GroupElement {
            value: BigUint::one(),
            n: self.n.clone(),
        }
    }

    /// Wraps a canonical residue, rejecting non-units.
    pub fn element(&self, value: impl Into<BigUint>) -> Result<GroupElement> {
        let value = value.into();
        if value >= *self.n {
            return Err(Error::NotCanonical);
        }
        if value.is_zero() || !value.gcd(&self.n).is_one() {
            return Err(Error::NotAUnit);
        }
        Ok(GroupElement {
            value,
            n: self.n.clone(),
        })
    }

    /// Reduces an arbitrary integer mod N, then wraps it.
    pub fn reduce(&self, value: &BigUint) -> Result<GroupElement> {
        self.element(value % &*self.n)
    }

    pub fn element_from_hex(&self, s: &str) -> Result<GroupElement> {
        self.element(parse_hex(s)?)
    }

    /// All units of ℤ*_N in increasing order. Only sensible for tiny N.
    pub fn units(&self) -> impl Iterator<Item = GroupElement> + '_ {
        num_iter_range(&self.n).filter_map(move |v| self.element(v).ok())
    }
}

fn num_iter_range(n: &BigUint) -> impl Iterator<Item = BigUint> {
    let n = n.clone();
    std::iter::successors(Some(BigUint::one()), move |v| {
        let next = v + 1u32;
        (next < n).then_some(next)
    })
}

/// A unit of ℤ*_N, bound to its modulus.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupElement {
    value: BigUint,
    n: Arc<BigUint>,
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({})", self.value)
    }
}

impl GroupElement {
    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    /// The identity of this element's group.
    pub fn identity(&self) -> GroupElement {
        self.with_value(BigUint::one())
    }

    pub fn is_one(&self) -> bool {
        self.value.is_one()
    }

    pub fn to_hex(&self) -> String {
        to_hex(&self.value)
    }

    fn same_group(&self, other: &GroupElement) -> Result<()> {
        if Arc::ptr_eq(&self.n, &other.n) || self.n == other.n {
            Ok(())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    fn with_value(&self, value: BigUint) -> GroupElement {
        GroupElement {
            value,
            n: self.n.clone(),
        }
    }

    pub fn mul(&self, other: &GroupElement, ops: &mut OpCounter) -> Result<GroupElement> {
        self.same_group(other)?;
        ops.multiplications += 1;
        Ok(self.with_value(&self.value * &other.value % &*self.n))
    }

    pub fn square(&self, ops: &mut OpCounter) -> GroupElement {
        ops.squarings += 1;
        self.with_value(&self.value * &self.value % &*self.n)
    }

    /// Inverse via the extended Euclidean algorithm.
    pub fn inverse(&self, ops: &mut OpCounter) -> Result<GroupElement> {
        ops.inversions += 1;
        let a = BigInt::from_biguint(Sign::Plus, self.value.clone());
        let m = BigInt::from_biguint(Sign::Plus, (*self.n).clone());
        let egcd = a.extended_gcd(&m);
        if !egcd.gcd.is_one() {
            return Err(Error::NotAUnit);
        }
        let inv = egcd.x.mod_floor(&m);
        Ok(self.with_value(inv.to_biguint().expect("mod_floor is non-negative")))
    }

    /// Left-to-right square-and-multiply: `bits(e) - 1` squarings and
    /// `popcount(e) - 1` multiplications.
    pub fn pow(&self, e: &BigUint, ops: &mut OpCounter) -> GroupElement {
        let bits = e.bits();
        if bits == 0 {
            return self.with_value(BigUint::one());
        }
        let mut acc = self.clone();
        for i in (0..bits - 1).rev() {
            acc = acc.square(ops);
            if e.bit(i) {
                ops.multiplications += 1;
                acc.value = &acc.value * &self.value % &*self.n;
            }
        }
        acc
    }

    pub fn pow_u64(&self, e: u64, ops: &mut OpCounter) -> GroupElement {
        self.pow(&BigUint::from(e), ops)
    }
}

/// Joint exponentiation `a^ea · b^eb` with one shared squaring chain.
///
/// Costs at most `max(bits(ea), bits(eb)) - 1` squarings and as many
/// multiplications plus one for the precomputed product `a·b`.
pub fn multi_exp(
    a: &GroupElement,
    ea: &BigUint,
    b: &GroupElement,
    eb: &BigUint,
    ops: &mut OpCounter,
) -> Result<GroupElement> {
    a.same_group(b)?;
    let bits = ea.bits().max(eb.bits());
    let mut product: Option<GroupElement> = None;
    let mut acc: Option<GroupElement> = None;
    for i in (0..bits).rev() {
        if let Some(cur) = acc.take() {
            acc = Some(cur.square(ops));
        }
        let factor = match (ea.bit(i), eb.bit(i)) {
            (false, false) => continue,
            (true, false) => a.clone(),
            (false, true) => b.clone(),
            (true, true) => match &product {
                Some(ab) => ab.clone(),
                None => {
                    let ab = a.mul(b, ops)?;
                    product = Some(ab.clone());
                    ab
                }
            },
        };
        acc = Some(match acc {
            Some(cur) => cur.mul(&factor, ops)?,
            None => factor,
        });
    }
    Ok(acc.unwrap_or_else(|| a.with_value(BigUint::one())))
}

/// `g^(2^t)` by exactly `t` successive squarings.
pub fn sequential_square(g: &GroupElement, t: u64) -> (GroupElement, OpCounter) {
    sequential_square_cancellable(g, t, &Cancellation::never())
        .expect("uncancellable run cannot be cancelled")
}

/// As [`sequential_square`], polling `cancel` every
/// [`CANCEL_CHECK_INTERVAL`] squarings.
pub fn sequential_square_cancellable(
    g: &GroupElement,
    t: u64,
    cancel: &Cancellation,
) -> Result<(GroupElement, OpCounter)> {
    let mut ops = OpCounter::default();
    let mut acc = g.clone();
    for i in 0..t {
        if i % CANCEL_CHECK_INTERVAL == 0 && i > 0 && cancel.is_cancelled() {
            return Err(Error::Cancelled);
        }
        acc = acc.square(&mut ops);
    }
    Ok((acc, ops))
}

/// `g^(2^t + addend)` using the trapdoor: the exponent is first reduced
/// modulo φ(N), so the cost is independent of `t`.
pub fn trapdoor_exp(
    g: &GroupElement,
    t: u64,
    addend: u32,
    trapdoor: &Trapdoor,
) -> Result<GroupElement> {
    if *g.modulus() != trapdoor.modulus() {
        return Err(Error::ModulusMismatch);
    }
    let e = trapdoor_exponent(t, addend, &trapdoor.phi);
    Ok(g.pow(&e, &mut OpCounter::default()))
}

/// `(2^t + addend) mod m`.
pub fn trapdoor_exponent(t: u64, addend: u32, m: &BigUint) -> BigUint {
    let two_t = BigUint::from(2u8).modpow(&BigUint::from(t), m);
    (two_t + addend) % m
}

/// Exact multiplicative order of `g`, found by stripping the prime factors
/// {2, p', q'} of λ(N) while the power stays 1.
pub fn element_order(g: &GroupElement, trapdoor: &Trapdoor) -> Result<BigUint> {
    if *g.modulus() != trapdoor.modulus() {
        return Err(Error::ModulusMismatch);
    }
    let mut factors = vec![BigUint::from(2u8), trapdoor.p_prime.clone()];
    if trapdoor.q_prime != trapdoor.p_prime {
        factors.push(trapdoor.q_prime.clone());
    }
    factors.dedup();
    let mut ops = OpCounter::default();
    let mut order = trapdoor.lambda.clone();
    for r in &factors {
        while (&order % r).is_zero() {
            let candidate = &order / r;
            if g.pow(&candidate, &mut ops).is_one() {
                order = candidate;
            } else {
                break;
            }
        }
    }
    Ok(order)
}

/// Lowercase big-endian hex without leading zeros ("0" for zero).
pub fn to_hex(v: &BigUint) -> String {
    v.to_str_radix(16)
}

/// Inverse of [`to_hex`]; rejects uppercase digits and leading zeros.
pub fn parse_hex(s: &str) -> Result<BigUint> {
    let canonical = !s.is_empty()
        && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        && (s == "0" || !s.starts_with('0'));
    if !canonical {
        return Err(Error::MalformedHex(s.to_string()));
    }
    BigUint::parse_bytes(s.as_bytes(), 16).ok_or_else(|| Error::MalformedHex(s.to_string()))
}
