//! Stochastic trip planning over a public transit network.
//!
//! Edge travel times are modelled as Gaussian processes over time of day,
//! either fitted in batch ([`gp::batch`]) or learned online with structured
//! kernel interpolation ([`gp::online`]). Candidate paths with at most one
//! transfer are composed into Gaussian path laws and ranked by their
//! optimality index, the probability of being the fastest option
//! ([`ssp`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the model
//! store and the command line live in the `stochtransit` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod corr;
pub mod error;
pub mod gaussianity;
pub mod gp;
pub mod graph;
pub mod ingest;
pub mod math;
pub mod sim;
pub mod ssp;
pub mod time;

pub use error::{Error, Result};
pub use graph::{EdgeKey, RouteIx, StopIx, TransitGraph};
pub use math::Gaussian;
