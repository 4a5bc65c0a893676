//! Security analysis for restaking networks.
//!
//! A restaking graph is a bipartite graph between *services* (each with a
//! corruption profit and a collusion threshold) and *node operators* (each
//! with stake). This crate provides:
//!
//! - the graph model and adversary profit functions ([`graph`], [`profit`]),
//! - exhaustive attack search, γ-security and the cascade coefficient
//!   ([`attack`], [`cascade`]),
//! - pro-rata incentives and rebalancing sets ([`incentive`]),
//! - the iterated reward / attack / rebalance game ([`dynamics`]),
//! - greedy attack-sequence search and minimal halting rewards ([`optimizer`]),
//! - JSON documents, named scenarios and seeded generators ([`io`]).
//!
//! Exhaustive routines work on bitmasks and refuse graphs larger than
//! [`attack::MAX_EXHAUSTIVE_SERVICES`] services or
//! [`attack::MAX_EXHAUSTIVE_OPERATORS`] operators.

pub mod attack;
pub mod cascade;
pub mod dynamics;
mod error;
pub mod exec;
pub mod graph;
pub mod incentive;
pub mod io;
mod mask;
pub mod numeric;
pub mod optimizer;
pub mod profit;

pub use attack::{Attack, AttackSequence, SecurityReport};
pub use cascade::CascadeResult;
pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{OperatorRecord, RestakingGraph, ServiceRecord, StakeProfitRatio};
pub use incentive::IncentiveSchedule;
pub use profit::ProfitSpec;
