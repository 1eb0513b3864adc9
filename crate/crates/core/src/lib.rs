pub mod agent;
pub mod cli;
pub mod engine;
pub mod error;
pub mod graph;
pub mod knowledge;
pub mod network;
pub mod params;
pub mod planner;
pub mod scenarios;
pub mod spatial;
pub mod terrain;

pub use error::{Error, Result};
