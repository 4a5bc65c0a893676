//! JSON graph documents, attack scripts and named scenarios.

pub mod document;
pub mod scenario;
pub mod script;

pub use document::{format_g17, GraphDocument, Real, SCHEMA_VERSION};
pub use scenario::{RandomParams, Scenario, StakeDist};
