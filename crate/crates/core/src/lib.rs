pub mod artifact;
pub mod bundle;
pub mod config;
pub mod decision;
pub mod detect;
pub mod error;
pub mod ingest;
pub mod irl;
pub mod intention;
pub mod numeric;
pub mod planner;
pub mod rng;
pub mod sim;
pub mod style;

pub use error::{Error, Result};
