//! Time-slotted LEO satellite network simulator with a masked
//! advantage-actor-critic next-hop resource manager and heuristic baselines.
//!
//! The pipeline is: [`constellation`] builds per-slot topologies, [`traffic`]
//! draws service requests, [`netsim`] moves them hop by hop under link
//! budgets, [`features`] turns local state into observations and rewards,
//! [`policy`] and [`baselines`] decide, and [`experiments`] runs it all.

pub mod baselines;
pub mod constellation;
pub mod error;
pub mod experiments;
pub mod features;
pub mod netsim;
pub mod policy;
pub mod seed;
pub mod traffic;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil;
