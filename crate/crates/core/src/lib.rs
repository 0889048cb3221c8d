//! Models of a BB84 link sourced by a weak broadband emitter that shares its
//! fiber with a shortwave classical channel. An event-level simulator and a
//! time-tag processing chain cross-check the analytic model.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files or
//! the command line lives in the `qkdlink` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub mod bb84;
pub mod detection;
pub mod emitter;
pub mod error;
pub mod experiments;
pub mod link;
pub mod montecarlo;
pub mod qtag;
pub mod spectrum;
pub mod system;
pub mod tagproc;
pub mod units;

pub use error::Error;
