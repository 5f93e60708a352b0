//! Byzantine-resilient gradient coding over a finite alphabet.
//!
//! Each worker returns the sum of the partial gradients of its group. When
//! replies in a group disagree, the main node runs bisection matches between
//! representatives of disagreeing classes and only computes a partial
//! gradient itself when a vote cannot settle the dispute.

pub mod adversary;
pub mod alphabet;
pub mod assignment;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod protocol;
pub mod workers;

pub use alphabet::{Alphabet, GradientVec, IndexRange, Symbol};
pub use assignment::{SystemConfig, WorkerId};
pub use error::{Error, Result};

/// Splits one seed into independent streams (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
