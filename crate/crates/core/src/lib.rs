//! Simulator for a covert timing channel built on a shared block-based
//! file-system cache.
//!
//! A sender in one compartment signals 1-bits by reading a file large enough
//! to flush the shared cache and 0-bits by staying idle; a receiver in
//! another compartment times re-reads of its own small file and decodes slow
//! reads as 1-bits. The crate provides the cache model, closed-form timing,
//! the bit codec (including a three-fold repetition code), a deterministic
//! discrete-event engine with an optional cache-flushing disruptor, and the
//! reporting used by the `cachechan` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod codec;
pub mod config;
pub mod reference;
pub mod report;
pub mod sim;
pub mod timing;
pub mod units;

pub use cache::{BlockCache, BlockId, ReadOutcome, SimFile, Volume};
pub use codec::{Bit, BitMessage, SlotRecord};
pub use sim::{run_scenario, ScenarioConfig, SimulationTrace};
pub use timing::{PhysicalParams, SchemeVariant, TimingParams};
