//! The proof-less δ-squaring VDF.
//!
//! `Eval` hashes `x` to `g` (a residue of maximal order modulo 2^(T+δ+2),
//! reduced mod N) and outputs `y = g^(2^T + 1)`: T squarings and one
//! multiplication. `Verify` computes `L = (y·g⁻¹)^(2^δ)` with exactly δ
//! squarings and compares it against `1 mod m`, `m = 2^(T+δ+2) mod N`.
//!
//! The comparison admits several readings, so all of them are implemented
//! as [`VerifyVariant`]s. For the honest output `L = g^(2^(T+δ))`, hence
//! variant A accepts honest outputs exactly when the order of `g` divides
//! 2^(T+δ). [`characterize`] measures this with the trapdoor.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{
    element_order, sequential_square_cancellable, trapdoor_exp, trapdoor_exponent, Cancellation,
    GroupElement, Modulus, OpCounter, SafePrimeSource, Trapdoor, DEFAULT_PRIME_FACTOR,
};
use crate::hash::hash_to_maximal_order;
use crate::outcome::{Evaluation, Verdict};

pub const DEFAULT_DELTA: u64 = 2;
/// Exhaustive characterization refuses moduli above this bound.
pub const EXHAUSTIVE_LIMIT: u64 = 1_000_000;
pub const CHARACTERIZATION_SCHEMA: &str = "vdflab/two-square-characterization/v1";

#[derive(Debug, Clone)]
pub struct TwoSquareParams {
    pub modulus: Modulus,
    pub delta: u64,
}

impl TwoSquareParams {
    pub fn new(modulus: Modulus) -> Self {
        Self {
            modulus,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_delta(mut self, delta: u64) -> Result<Self> {
        if delta < 1 {
            return Err(Error::InvalidParameter("delta must be at least 1".into()));
        }
        self.delta = delta;
        Ok(self)
    }
}

fn check_delay(t: u64) -> Result<()> {
    if t < 1 {
        return Err(Error::InvalidParameter("delay T must be at least 1".into()));
    }
    Ok(())
}

pub fn setup<R: Rng + ?Sized>(lambda: u64, t: u64, rng: &mut R) -> Result<TwoSquareParams> {
    check_delay(t)?;
    Ok(TwoSquareParams::new(Modulus::setup(
        lambda,
        DEFAULT_PRIME_FACTOR,
        rng,
    )?))
}

pub fn setup_with<S: SafePrimeSource + ?Sized>(
    lambda: u64,
    t: u64,
    source: &mut S,
) -> Result<TwoSquareParams> {
    check_delay(t)?;
    Ok(TwoSquareParams::new(Modulus::setup_with(
        lambda,
        DEFAULT_PRIME_FACTOR,
        source,
    )?))
}

/// `(x, T, y)`; the proof is always empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoSquareOutput {
    pub x: Vec<u8>,
    pub t: u64,
    pub delta: u64,
    pub y: GroupElement,
}

/// Readings of "`L = 1 mod m`".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VerifyVariant {
    /// `L = 1` as integers when m > 1; with m = 1 the target is 0, which a
    /// unit never equals.
    A,
    /// `L mod m = 1 mod m`.
    B,
    /// `L = (1 mod m)` as integers.
    C,
}

impl VerifyVariant {
    pub const ALL: [VerifyVariant; 3] = [VerifyVariant::A, VerifyVariant::B, VerifyVariant::C];

    fn decide(self, l: &BigUint, m: &BigUint) -> bool {
        let one_mod_m = BigUint::one() % m;
        match self {
            VerifyVariant::A => {
                if m.is_one() {
                    l.is_zero()
                } else {
                    l.is_one()
                }
            }
            VerifyVariant::B => l % m == one_mod_m,
            VerifyVariant::C => *l == one_mod_m,
        }
    }
}

impl fmt::Display for VerifyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerifyVariant::A => "A",
            VerifyVariant::B => "B",
            VerifyVariant::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for VerifyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(VerifyVariant::A),
            "B" | "b" => Ok(VerifyVariant::B),
            "C" | "c" => Ok(VerifyVariant::C),
            other => Err(Error::InvalidParameter(format!(
                "unknown verification variant {other:?}"
            ))),
        }
    }
}

pub fn hash_input(params: &TwoSquareParams, x: &[u8], t: u64) -> Result<GroupElement> {
    Ok(hash_to_maximal_order(x, t, params.delta, &params.modulus)?.element)
}

pub fn eval(params: &TwoSquareParams, x: &[u8], t: u64) -> Result<Evaluation<TwoSquareOutput>> {
    eval_cancellable(params, x, t, &Cancellation::never())
}

pub fn eval_cancellable(
    params: &TwoSquareParams,
    x: &[u8],
    t: u64,
    cancel: &Cancellation,
) -> Result<Evaluation<TwoSquareOutput>> {
    check_delay(t)?;
    let g = hash_input(params, x, t)?;
    let (y, ops) = eval_element_cancellable(&g, t, cancel)?;
    Ok(Evaluation {
        transcript: TwoSquareOutput {
            x: x.to_vec(),
            t,
            delta: params.delta,
            y,
        },
        ops,
    })
}

/// `g^(2^t + 1)`: t squarings, then one multiplication by `g`.
pub fn eval_element(g: &GroupElement, t: u64) -> (GroupElement, OpCounter) {
    eval_element_cancellable(g, t, &Cancellation::never())
        .expect("uncancellable run cannot be cancelled")
}

fn eval_element_cancellable(
    g: &GroupElement,
    t: u64,
    cancel: &Cancellation,
) -> Result<(GroupElement, OpCounter)> {
    let (s, mut ops) = sequential_square_cancellable(g, t, cancel)?;
    let y = s.mul(g, &mut ops)?;
    Ok((y, ops))
}

/// Everything the verifier computed, for reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoSquareCheck {
    pub verdict: Verdict,
    /// `(y·g⁻¹)^(2^δ)`, when it could be computed.
    pub residue: Option<BigUint>,
    /// `2^(T+δ+2) mod N`.
    pub m: BigUint,
    /// Cost of computing `m` from the public constant 2; kept apart from
    /// the verifier's group work in `verdict.ops`.
    pub m_ops: OpCounter,
}

/// `2^(T+δ+2) mod N` by square-and-multiply on the exponent T+δ+2.
pub fn reduction_modulus(t: u64, delta: u64, modulus: &Modulus) -> (BigUint, OpCounter) {
    let mut ops = OpCounter::default();
    let two = modulus
        .element(2u32)
        .expect("2 is a unit modulo an odd N >= 3");
    let m = two.pow_u64(t + delta + 2, &mut ops);
    (m.value().clone(), ops)
}

pub fn verify(
    params: &TwoSquareParams,
    x: &[u8],
    t: u64,
    y: &GroupElement,
    variant: VerifyVariant,
) -> Verdict {
    verify_detailed(params, x, t, y, variant).verdict
}

pub fn verify_detailed(
    params: &TwoSquareParams,
    x: &[u8],
    t: u64,
    y: &GroupElement,
    variant: VerifyVariant,
) -> TwoSquareCheck {
    let (m, m_ops) = reduction_modulus(t, params.delta, &params.modulus);
    let reject = |reason: String| TwoSquareCheck {
        verdict: Verdict::reject(OpCounter::default(), reason),
        residue: None,
        m: m.clone(),
        m_ops,
    };
    if y.modulus() != params.modulus.n() {
        return reject("output belongs to a different modulus".into());
    }
    if t < 1 {
        return reject("delay T must be at least 1".into());
    }
    let g = match hash_input(params, x, t) {
        Ok(g) => g,
        Err(e) => return reject(format!("hash failed: {e}")),
    };
    let (verdict, residue) = verify_element(&g, y, params.delta, &m, variant);
    TwoSquareCheck {
        verdict,
        residue,
        m,
        m_ops,
    }
}

/// The check on an explicit `g`: one inversion, one multiplication and
/// exactly `delta` squarings.
pub fn verify_element(
    g: &GroupElement,
    y: &GroupElement,
    delta: u64,
    m: &BigUint,
    variant: VerifyVariant,
) -> (Verdict, Option<BigUint>) {
    let mut ops = OpCounter::default();
    let ratio = match g.inverse(&mut ops).and_then(|inv| y.mul(&inv, &mut ops)) {
        Ok(r) => r,
        Err(e) => return (Verdict::reject(ops, e.to_string()), None),
    };
    let mut l = ratio;
    for _ in 0..delta {
        l = l.square(&mut ops);
    }
    let accept = variant.decide(l.value(), m);
    (
        Verdict::decide(accept, ops, "(y * g^-1)^(2^delta) does not match 1 mod m"),
        Some(l.value().clone()),
    )
}

/// Does `order` divide 2^k?
pub fn divides_power_of_two(order: &BigUint, k: u64) -> bool {
    order.count_ones() == 1 && order.bits() - 1 <= k
}

/// What happens to the honest output for one element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceCharacterization {
    pub g: GroupElement,
    pub honest_y: GroupElement,
    pub order: BigUint,
    /// ord(g) | 2^(T+δ)
    pub predicate: bool,
    pub accepted: BTreeMap<VerifyVariant, bool>,
}

impl InstanceCharacterization {
    /// Variant A must accept exactly when the predicate holds (given m > 1).
    pub fn is_exception(&self, m_is_one: bool) -> bool {
        let a = self.accepted[&VerifyVariant::A];
        if m_is_one {
            a
        } else {
            a != self.predicate
        }
    }
}

pub fn characterize_element(
    params: &TwoSquareParams,
    g: &GroupElement,
    t: u64,
    trapdoor: &Trapdoor,
) -> Result<InstanceCharacterization> {
    let honest_y = trapdoor_exp(g, t, 1, trapdoor)?;
    let order = element_order(g, trapdoor)?;
    let (m, _) = reduction_modulus(t, params.delta, &params.modulus);
    let accepted = VerifyVariant::ALL
        .iter()
        .map(|&v| {
            (
                v,
                verify_element(g, &honest_y, params.delta, &m, v).0.accept,
            )
        })
        .collect();
    Ok(InstanceCharacterization {
        g: g.clone(),
        honest_y,
        predicate: divides_power_of_two(&order, t + params.delta),
        order,
        accepted,
    })
}

/// Characterizes the element that `x` hashes to.
pub fn characterize(
    params: &TwoSquareParams,
    x: &[u8],
    t: u64,
) -> Result<InstanceCharacterization> {
    let trapdoor = params.modulus.require_trapdoor()?;
    let g = hash_input(params, x, t)?;
    characterize_element(params, &g, t, trapdoor)
}

/// Fast evaluation for elements whose order divides 2^(T+δ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutProbe {
    pub applicable: bool,
    /// Hex of `g^((2^T + 1) mod ord(g))`.
    pub fast_y: Option<String>,
    pub accepted: Option<bool>,
    pub probe_ops: Option<OpCounter>,
    /// Probe group operations divided by T.
    pub ops_per_delay: Option<f64>,
}

pub fn shortcut_probe_element(
    params: &TwoSquareParams,
    g: &GroupElement,
    t: u64,
    trapdoor: &Trapdoor,
) -> Result<ShortcutProbe> {
    let order = element_order(g, trapdoor)?;
    if !divides_power_of_two(&order, t + params.delta) {
        return Ok(ShortcutProbe {
            applicable: false,
            fast_y: None,
            accepted: None,
            probe_ops: None,
            ops_per_delay: None,
        });
    }
    let mut ops = OpCounter::default();
    let exponent = trapdoor_exponent(t, 1, &order);
    let fast_y = g.pow(&exponent, &mut ops);
    let (m, _) = reduction_modulus(t, params.delta, &params.modulus);
    let accepted = verify_element(g, &fast_y, params.delta, &m, VerifyVariant::A)
        .0
        .accept;
    Ok(ShortcutProbe {
        applicable: true,
        fast_y: Some(fast_y.to_hex()),
        accepted: Some(accepted),
        probe_ops: Some(ops),
        ops_per_delay: Some(ops.group_ops() as f64 / t as f64),
    })
}

pub fn shortcut_probe(params: &TwoSquareParams, x: &[u8], t: u64) -> Result<ShortcutProbe> {
    let trapdoor = params.modulus.require_trapdoor()?;
    let g = hash_input(params, x, t)?;
    shortcut_probe_element(params, &g, t, trapdoor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacterizationMode {
    /// Every unit of ℤ*_N.
    Exhaustive,
    /// Hash outputs of seeded inputs.
    Sampled,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub accepted: u64,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    /// Elements whose order divides 2^(T+δ).
    pub dividing_power_of_two: u64,
    pub min_order_bits: Option<u64>,
    pub max_order_bits: Option<u64>,
    /// Count of elements per bit-length of their order.
    pub order_bits_histogram: BTreeMap<u64, u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShortcutStats {
    pub applicable: u64,
    pub accepted: u64,
    pub max_probe_ops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub format_version: u32,
    pub schema: String,
    pub mode: CharacterizationMode,
    pub modulus_bits: u64,
    #[serde(rename = "T")]
    pub t: u64,
    pub delta: u64,
    /// `2^(T+δ+2) mod N == 1`; variants A and C then reject every unit.
    pub m_is_one: bool,
    pub instances: u64,
    pub predicate_true: u64,
    pub variants: BTreeMap<VerifyVariant, VariantStats>,
    /// Instances where variant A disagrees with the order predicate.
    pub exceptions: u64,
    pub orders: OrderStats,
    pub shortcut: ShortcutStats,
}

impl CharacterizationReport {
    fn tally(
        params: &TwoSquareParams,
        t: u64,
        mode: CharacterizationMode,
        rows: &[(InstanceCharacterization, ShortcutProbe)],
    ) -> Self {
        let (m, _) = reduction_modulus(t, params.delta, &params.modulus);
        let m_is_one = m.is_one();
        let instances = rows.len() as u64;
        let mut variants: BTreeMap<VerifyVariant, VariantStats> = VerifyVariant::ALL
            .iter()
            .map(|&v| (v, VariantStats::default()))
            .collect();
        let mut orders = OrderStats::default();
        let mut shortcut = ShortcutStats::default();
        let mut predicate_true = 0;
        let mut exceptions = 0;
        for (inst, probe) in rows {
            for (v, &acc) in &inst.accepted {
                variants.get_mut(v).expect("all variants present").accepted += acc as u64;
            }
            predicate_true += inst.predicate as u64;
            exceptions += inst.is_exception(m_is_one) as u64;
            let bits = inst.order.bits();
            orders.dividing_power_of_two += inst.predicate as u64;
            orders.min_order_bits = Some(orders.min_order_bits.map_or(bits, |b| b.min(bits)));
            orders.max_order_bits = Some(orders.max_order_bits.map_or(bits, |b| b.max(bits)));
            *orders.order_bits_histogram.entry(bits).or_default() += 1;
            if probe.applicable {
                shortcut.applicable += 1;
                shortcut.accepted += probe.accepted.unwrap_or(false) as u64;
                let cost = probe.probe_ops.map_or(0, |o| o.group_ops());
                shortcut.max_probe_ops = shortcut.max_probe_ops.max(cost);
            }
        }
        for stats in variants.values_mut() {
            stats.rate = (instances > 0).then(|| stats.accepted as f64 / instances as f64);
        }
        CharacterizationReport {
            format_version: 1,
            schema: CHARACTERIZATION_SCHEMA.to_string(),
            mode,
            modulus_bits: params.modulus.bits(),
            t,
            delta: params.delta,
            m_is_one,
            instances,
            predicate_true,
            variants,
            exceptions,
            orders,
            shortcut,
        }
    }

    pub fn variant_a_accepted(&self) -> u64 {
        self.variants
            .get(&VerifyVariant::A)
            .map_or(0, |s| s.accepted)
    }
}

fn characterize_row(
    params: &TwoSquareParams,
    g: &GroupElement,
    t: u64,
    trapdoor: &Trapdoor,
) -> Result<(InstanceCharacterization, ShortcutProbe)> {
    Ok((
        characterize_element(params, g, t, trapdoor)?,
        shortcut_probe_element(params, g, t, trapdoor)?,
    ))
}

/// Characterizes every unit of a small modulus.
pub fn characterize_exhaustive(params: &TwoSquareParams, t: u64) -> Result<CharacterizationReport> {
    check_delay(t)?;
    let trapdoor = params.modulus.require_trapdoor()?;
    if params
        .modulus
        .n()
        .to_u64()
        .is_none_or(|n| n > EXHAUSTIVE_LIMIT)
    {
        return Err(Error::InvalidParameter(format!(
            "exhaustive characterization needs N <= {EXHAUSTIVE_LIMIT}"
        )));
    }
    let units: Vec<GroupElement> = params.modulus.units().collect();
    let rows = units
        .par_iter()
        .map(|g| characterize_row(params, g, t, trapdoor))
        .collect::<Result<Vec<_>>>()?;
    Ok(CharacterizationReport::tally(
        params,
        t,
        CharacterizationMode::Exhaustive,
        &rows,
    ))
}

/// Characterizes the hash outputs of `inputs`.
pub fn characterize_sampled(
    params: &TwoSquareParams,
    t: u64,
    inputs: &[Vec<u8>],
) -> Result<CharacterizationReport> {
    check_delay(t)?;
    let trapdoor = params.modulus.require_trapdoor()?;
    let rows = inputs
        .par_iter()
        .map(|x| {
            let g = hash_input(params, x, t)?;
            characterize_row(params, &g, t, trapdoor)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CharacterizationReport::tally(
        params,
        t,
        CharacterizationMode::Sampled,
        &rows,
    ))
}
