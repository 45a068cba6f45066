//! Multi-timescale power-system operations simulator with water and CO₂
//! accounting.

pub mod fixture;
pub mod forecast;
pub mod io;
pub mod metrics;
pub mod commitment;
pub mod network;
pub mod scenario;
pub mod regulation;
pub mod reserves;
pub mod rtuc;
pub mod scuc;
pub mod sced;
pub mod sim;
pub mod water;

#[cfg(test)]
mod testkit;

pub use fixture::canonical_fixture;
pub use io::{load_scenario, write_scenario, ScenarioError};
pub use scenario::{classify_resources, Classification, Mode, ResourceClass, Scenario};
