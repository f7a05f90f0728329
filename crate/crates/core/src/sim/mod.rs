//! Discrete-event simulation of the channel.
//!
//! A sender, a receiver and an optional disruptor share one [`BlockCache`]
//! and take turns on a virtual clock driven by an event queue. Nothing
//! sleeps; a run is a pure function of its [`ScenarioConfig`].
//!
//! [`BlockCache`]: crate::cache::BlockCache

mod divergence;
mod engine;
mod queue;
mod trace;

use serde::Serialize;
use thiserror::Error;

use crate::cache::CacheError;
use crate::codec::{BitMessage, CodecError};
use crate::timing::{
    PhysicalParams, SchemeVariant, TimingError, TimingParams, DEFAULT_SAFETY_FRACTION,
};
use crate::units::{mb_to_blocks, BLOCK_SIZE_MB};

pub use divergence::{divergence_adjust, AdjustedSchedule, DivergenceTracker};
pub use engine::run_scenario;
pub use queue::EventQueue;
pub use trace::{Action, Actor, ChannelMetrics, SimulationTrace, TraceEvent};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("optimized scheme needs a non-empty message")]
    EmptyOptimizedMessage,
    #[error("disruptor file of {file_mb} MB exceeds the {cache_mb} MB cache")]
    DisruptorFileTooLarge { file_mb: f64, cache_mb: f64 },
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    #[default]
    None,
    Repetition3,
}

/// How concurrent reads share the backing store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackingStore {
    /// Every read gets the full disk rate regardless of other readers.
    #[default]
    Independent,
    /// Misses are served by one FIFO disk; a read that misses waits until
    /// earlier reads have finished with it.
    SharedQueue,
}

/// Periodic cache flusher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisruptorConfig {
    /// Seconds between ticks.
    pub interval: f64,
    /// Size of the file read on every tick, MB.
    pub file_mb: f64,
    /// Phase of the tick train: ticks fire at `start_offset + k * interval`
    /// for `k >= 1`.
    #[serde(default)]
    pub start_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub physical: PhysicalParams,
    pub timing: TimingParams,
    pub variant: SchemeVariant,
    pub message: BitMessage,
    pub coding: Coding,
    pub jitter_fraction: f64,
    pub rng_seed: u64,
    pub disruptor: Option<DisruptorConfig>,
    /// Extra seconds appended to every slot.
    pub per_bit_overhead: f64,
    pub backing_store: BackingStore,
    /// Largest tolerated sender/receiver offset in the optimized scheme,
    /// seconds. Defaults to half a block miss.
    pub divergence_tolerance: f64,
}

impl ScenarioConfig {
    /// Noiseless scenario with derived timing and the default safety frame.
    pub fn new(
        physical: PhysicalParams,
        variant: SchemeVariant,
        message: BitMessage,
    ) -> Result<Self, SimError> {
        let timing = TimingParams::derive(&physical, DEFAULT_SAFETY_FRACTION)?;
        Ok(ScenarioConfig {
            divergence_tolerance: default_divergence_tolerance(&physical),
            physical,
            timing,
            variant,
            message,
            coding: Coding::None,
            jitter_fraction: 0.0,
            rng_seed: 0,
            disruptor: None,
            per_bit_overhead: 0.0,
            backing_store: BackingStore::Independent,
        })
    }

    pub fn with_safety_fraction(mut self, fraction: f64) -> Result<Self, SimError> {
        let threshold = self.timing.threshold;
        let wait = self.timing.wait_period;
        self.timing = TimingParams::derive(&self.physical, fraction)?;
        self.timing.threshold = threshold;
        self.timing.wait_period = wait;
        Ok(self)
    }

    pub fn with_coding(mut self, coding: Coding) -> Self {
        self.coding = coding;
        self
    }

    pub fn with_jitter(mut self, fraction: f64, seed: u64) -> Self {
        self.jitter_fraction = fraction;
        self.rng_seed = seed;
        self
    }

    pub fn with_disruptor(mut self, disruptor: DisruptorConfig) -> Self {
        self.disruptor = Some(disruptor);
        self
    }

    pub fn with_backing_store(mut self, store: BackingStore) -> Self {
        self.backing_store = store;
        self
    }

    /// Bits actually put on the channel after coding.
    pub fn channel_message(&self) -> BitMessage {
        match self.coding {
            Coding::None => self.message.clone(),
            Coding::Repetition3 => crate::codec::encode_repetition3(&self.message),
        }
    }

    /// Nominal slot length in seconds for this scheme.
    pub fn nominal_slot(&self) -> f64 {
        let frames = match self.variant {
            SchemeVariant::Basic => self.timing.frame_bit_time(),
            SchemeVariant::Optimized => self.timing.sender_frame + self.timing.receiver_frame,
        };
        frames + self.per_bit_overhead
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.physical.validate()?;
        self.timing.validate()?;
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if mb_to_blocks(self.physical.cache_mb).is_none() {
            return bad(format!(
                "cache_mb = {} must be a whole multiple of the {BLOCK_SIZE_MB} MB block size",
                self.physical.cache_mb
            ));
        }
        if self.physical.cache_mb < self.physical.receiver_read_mb {
            return bad(format!(
                "cache_mb = {} cannot hold the {} MB receiver file",
                self.physical.cache_mb, self.physical.receiver_read_mb
            ));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return bad(format!(
                "jitter_fraction = {} must lie in [0, 0.5)",
                self.jitter_fraction
            ));
        }
        if !(self.per_bit_overhead.is_finite() && self.per_bit_overhead >= 0.0) {
            return bad(format!(
                "per_bit_overhead = {} must be >= 0",
                self.per_bit_overhead
            ));
        }
        if !(self.divergence_tolerance.is_finite() && self.divergence_tolerance > 0.0) {
            return bad(format!(
                "divergence_tolerance = {} must be > 0",
                self.divergence_tolerance
            ));
        }
        if self.variant == SchemeVariant::Optimized && self.message.is_empty() {
            return Err(SimError::EmptyOptimizedMessage);
        }
        if let Some(d) = &self.disruptor {
            if !(d.interval.is_finite() && d.interval > 0.0) {
                return bad(format!("disruptor interval = {} must be > 0", d.interval));
            }
            if !(d.start_offset.is_finite() && d.start_offset >= 0.0) {
                return bad(format!(
                    "disruptor start_offset = {} must be >= 0",
                    d.start_offset
                ));
            }
            if !(d.file_mb > 0.0) || mb_to_blocks(d.file_mb).is_none() {
                return bad(format!(
                    "disruptor file_mb = {} must be a positive multiple of the block size",
                    d.file_mb
                ));
            }
            if d.file_mb > self.physical.cache_mb {
                return Err(SimError::DisruptorFileTooLarge {
                    file_mb: d.file_mb,
                    cache_mb: self.physical.cache_mb,
                });
            }
        }
        Ok(())
    }
}

/// Half of one block-miss time: `block / (2 l)`.
pub fn default_divergence_tolerance(physical: &PhysicalParams) -> f64 {
    BLOCK_SIZE_MB / (2.0 * physical.disk_rate)
}
