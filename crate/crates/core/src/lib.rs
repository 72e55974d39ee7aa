//! Verifiable delay functions built on sequential squaring in RSA groups.
//!
//! * [`group`]: ℤ*_N arithmetic with operation counting and the trapdoor.
//! * [`hash`]: hash-to-group, hash-to-prime, hash onto maximal-order residues.
//! * [`wesolowski`], [`pietrzak`]: the two proof-carrying time-lock VDFs.
//! * [`attack`]: the forgery against non-interactive Wesolowski verification.
//! * [`two_square`]: the proof-less δ-squaring VDF and its characterization.
//! * [`harness`]: configuration, persistence and the benchmark runner.

pub mod attack;
pub mod error;
pub mod group;
pub mod harness;
pub mod hash;
pub mod outcome;
pub mod pietrzak;
pub mod primes;
pub mod two_square;
pub mod wesolowski;

pub use error::{Error, Result};
pub use group::{GroupElement, Modulus, OpCounter, Trapdoor};
pub use outcome::{Evaluation, Verdict};
