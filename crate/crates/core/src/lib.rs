//! Randomly reinforced two-colour urns with random barriers.
//!
//! The crate simulates the urn, exposes the exact drift/martingale split of
//! its proportion process, enumerates exact laws at small horizons, and runs
//! Monte Carlo suites checking almost-sure convergence, the conditional
//! central limit theorem with variance `q Z (1 - Z) / m^2`, strictness of the
//! barriers and non-atomicity of the limit.

pub mod cli;
pub mod decomposition;
pub mod distributions;
pub mod error;
pub mod experiments;
pub mod oracle;
pub mod provenance;
pub mod rng;
pub mod stats;
pub mod urn;

pub use error::{Result, UrnError};
