//! Compiles weighted if-then rules into restricted Boltzmann machines whose
//! rank energy is proportional to weighted satisfiability, and runs
//! inference, training and relational reasoning on the compiled models.

pub mod autoenc;
pub mod cli;
pub mod compile;
pub mod data;
pub mod error;
pub mod experiment;
pub mod ground;
pub mod logic;
pub mod rbm;
pub mod relpipe;
pub mod verify;

pub use error::{Error, Result};

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Independent child seed for stream `index` of `seed` (splitmix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
