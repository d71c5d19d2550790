//! File formats, artifact store, pipelines and the command line around
//! `stochtransit-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod replay;
pub mod store;
pub mod world;

pub use config::Config;
pub use error::{Error, Result};
