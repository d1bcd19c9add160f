//! Automated exploit generation campaigns against vulnerable Solidity
//! contracts: preprocessing, prompting a generation backend, repairing common
//! output defects, validating candidates with Foundry and analyzing outcomes.

pub mod analytics;
pub mod assets;
pub mod corpus;
pub mod genbackend;
pub mod harness;
pub mod pipeline;
pub mod soltx;
pub mod template;
