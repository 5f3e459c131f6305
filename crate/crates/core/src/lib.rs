//! Decoy-state BB84 over fiber: channel model, single-photon bounds,
//! key-rate formulas and finite-data optimization.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: Poisson source, lossy fiber, threshold detector.
//! * [`bounds`]: decoy-state estimators for the single-photon yield and error
//!   rate, plus a brute-force adversary used to check them.
//! * [`rate`]: binary entropy, key-rate formulas, optimal signal intensity.
//! * [`curves`]: key rate versus fiber length and maximal secure distance.
//! * [`fluct`]: statistical fluctuations from a finite number of pulses and
//!   the allocation of pulses between signal and decoys.
//! * [`reproduce`]: tabulated rate curves and headline numbers.
//! * [`numerics`]: bisection and golden-section search.
//!
//! ```
//! use decoy_core::{curves::Protocol, model::ExperimentParams, rate};
//!
//! let gys = ExperimentParams::gys();
//! let mu = rate::optimal_mu(&gys)?;
//! assert!((mu - 0.48).abs() < 0.01);
//!
//! let km = Protocol::VacuumWeak { mu: 0.48, nu: 0.05 }.max_distance(&gys)?;
//! assert!((km - 140.6).abs() < 0.5);
//! # Ok::<(), decoy_core::Error>(())
//! ```

pub mod bounds;
pub mod curves;
pub mod error;
pub mod fluct;
pub mod model;
pub mod numerics;
pub mod rate;
pub mod reproduce;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/fluctuations.md")]
    mod fluctuations {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
