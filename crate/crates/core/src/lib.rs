//! Desk-scale simulation of Forrelation-encoded oracle worlds.
//!
//! The crate is `no_std` (it needs `alloc`). It covers:
//!
//! * [`forrelation`]: uniform and Forrelated instance samplers, the
//!   forrelation value and the two-query quantum test that detects it;
//! * [`quantum`]: a statevector simulator for phase-oracle query programs
//!   that records per-position query mass;
//! * [`ac0`]: unbounded fan-in circuits, sensitivity, block resampling and
//!   the literal-substitution reduction used to relate the two;
//! * [`oracle`] and [`nporacle`]: the encoded oracle `A`, its resampling,
//!   Forrelation decoding and the NP-collapsing oracle `B`;
//! * [`crypto`]: PRF, injective OWF, trapdoor function, PKE, key exchange
//!   and semi-honest OT evaluated through oracle access only;
//! * [`games`]: security games and resampling experiments.
//!
//! IO, file formats and the command line live in the `forrelation-lab`
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ac0;
pub mod bits;
pub mod crypto;
mod error;
pub mod exec;
pub mod forrelation;
pub mod games;
pub mod nporacle;
pub mod oracle;
pub mod quantum;
pub mod rng;
pub mod stats;
pub mod walsh;

pub use bits::{BitString, TruthTable};
pub use error::{Error, Result};
