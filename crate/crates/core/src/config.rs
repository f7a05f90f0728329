//! On-disk scenario and sweep files (TOML).
//!
//! A scenario file:
//!
//! ```toml
//! variant = "optimized"        # or "basic" (default)
//! coding = "none"              # or "repetition3"
//! jitter_fraction = 0.0
//! seed = 7
//! per_bit_overhead = 0.0
//! backing_store = "independent" # or "shared-queue"
//!
//! [physical]
//! cache_mb = 2.0
//! evict_time = 0.292           # or disk_rate = 6.849
//! hit_cost = 3000.0            # MB/s, or "instant"
//! receiver_read_mb = 1.0
//!
//! [timing]                     # every key optional
//! safety_fraction = 0.1
//! wait_period = 0.125
//!
//! [message]
//! ones = 27                    # or bits = "1011..."
//! zeros = 37
//! arrangement_seed = 1
//!
//! [disruptor]                  # optional
//! interval = 0.2
//! file_mb = 2.0
//! start_offset = 0.0
//! ```
//!
//! Unknown keys are rejected. A sweep file adds `cache_sizes_mb` and
//! optional per-size `read_times` / `wait_periods`, keeps `[message]` at top
//! level and holds the scenario template under `[base]`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::codec::{Bit, BitMessage};
use crate::sim::{
    default_divergence_tolerance, BackingStore, Coding, DisruptorConfig, ScenarioConfig, SimError,
};
use crate::timing::{
    default_wait_period, HitCost, PhysicalParams, SchemeVariant, TimingParams, DEFAULT_RAM_RATE,
    DEFAULT_RECEIVER_READ_MB, DEFAULT_SAFETY_FRACTION,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("field `{field}`: {reason}")]
    Field { field: &'static str, reason: String },
    #[error(transparent)]
    Scenario(#[from] SimError),
}

fn field_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_toml(&text, &path.display().to_string())
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, ConfigError> {
    toml::from_str(text).map_err(|source| ConfigError::Parse {
        path: origin.to_string(),
        source: Box::new(source),
    })
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub cache_mb: Option<f64>,
    pub disk_rate: Option<f64>,
    /// Observed cold read time of the whole cache; fits `disk_rate`.
    pub evict_time: Option<f64>,
    pub hit_cost: Option<HitCost>,
    pub receiver_read_mb: Option<f64>,
}

impl PhysicalSection {
    fn resolve(&self, cache_override: Option<f64>) -> Result<PhysicalParams, ConfigError> {
        let cache_mb = cache_override
            .or(self.cache_mb)
            .ok_or_else(|| field_err("physical.cache_mb", "missing"))?;
        let disk_rate = match (self.disk_rate, self.evict_time) {
            (Some(l), None) => l,
            (None, Some(t)) if t > 0.0 => cache_mb / t,
            (None, Some(t)) => {
                return Err(field_err("physical.evict_time", format!("{t} must be > 0")))
            }
            (Some(_), Some(_)) => {
                return Err(field_err(
                    "physical.disk_rate",
                    "give either disk_rate or evict_time, not both",
                ))
            }
            (None, None) => {
                return Err(field_err(
                    "physical.disk_rate",
                    "missing (or give evict_time)",
                ))
            }
        };
        let p = PhysicalParams {
            cache_mb,
            disk_rate,
            hit_cost: self.hit_cost.unwrap_or(HitCost::Rate(DEFAULT_RAM_RATE)),
            receiver_read_mb: self.receiver_read_mb.unwrap_or(DEFAULT_RECEIVER_READ_MB),
        };
        p.validate()
            .map_err(|e| field_err("physical", e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub safety_fraction: Option<f64>,
    pub sender_frame: Option<f64>,
    pub receiver_frame: Option<f64>,
    pub wait_period: Option<f64>,
    pub threshold: Option<f64>,
}

impl TimingSection {
    fn resolve(
        &self,
        phys: &PhysicalParams,
        wait_override: Option<f64>,
    ) -> Result<TimingParams, ConfigError> {
        let fraction = self.safety_fraction.unwrap_or(DEFAULT_SAFETY_FRACTION);
        let mut t =
            TimingParams::derive(phys, fraction).map_err(|e| field_err("timing", e.to_string()))?;
        if let Some(v) = self.sender_frame {
            if v < phys.evict_time() {
                return Err(field_err(
                    "timing.sender_frame",
                    format!(
                        "{v} is shorter than a full eviction ({})",
                        phys.evict_time()
                    ),
                ));
            }
            t.sender_frame = v;
        }
        if let Some(v) = self.receiver_frame {
            if v < phys.probe_miss_time() {
                return Err(field_err(
                    "timing.receiver_frame",
                    format!(
                        "{v} is shorter than an all-miss probe ({})",
                        phys.probe_miss_time()
                    ),
                ));
            }
            t.receiver_frame = v;
        }
        if let Some(v) = wait_override.or(self.wait_period) {
            t.wait_period = v;
        }
        if let Some(v) = self.threshold {
            t.threshold = v;
        }
        t.validate()
            .map_err(|e| field_err("timing", e.to_string()))?;
        Ok(t)
    }
}

/// Either a literal bit string or bit counts arranged by a seeded shuffle.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageSpec {
    pub bits: Option<String>,
    pub ones: Option<u64>,
    pub zeros: Option<u64>,
    #[serde(default)]
    pub arrangement_seed: u64,
}

impl MessageSpec {
    pub fn counts(ones: u64, zeros: u64, arrangement_seed: u64) -> Self {
        MessageSpec {
            bits: None,
            ones: Some(ones),
            zeros: Some(zeros),
            arrangement_seed,
        }
    }

    pub fn resolve(&self) -> Result<BitMessage, ConfigError> {
        match (&self.bits, self.ones, self.zeros) {
            (Some(bits), None, None) => bits
                .parse()
                .map_err(|e: crate::codec::CodecError| field_err("message.bits", e.to_string())),
            (None, ones, zeros) if ones.is_some() || zeros.is_some() => Ok(arranged_message(
                ones.unwrap_or(0),
                zeros.unwrap_or(0),
                self.arrangement_seed,
            )),
            (None, _, _) => Err(field_err("message", "give either `bits` or `ones`/`zeros`")),
            (Some(_), _, _) => Err(field_err(
                "message.bits",
                "cannot be combined with ones/zeros",
            )),
        }
    }

    /// (ones, zeros) of the resolved message.
    pub fn bit_counts(&self) -> Result<(u64, u64), ConfigError> {
        let m = self.resolve()?;
        Ok((m.count_ones() as u64, m.count_zeros() as u64))
    }
}

/// `ones` 1-bits and `zeros` 0-bits in a seeded random order.
pub fn arranged_message(ones: u64, zeros: u64, seed: u64) -> BitMessage {
    let mut bits: Vec<Bit> = std::iter::repeat_n(Bit::One, ones as usize)
        .chain(std::iter::repeat_n(Bit::Zero, zeros as usize))
        .collect();
    bits.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    BitMessage::new(bits)
}

fn default_variant() -> SchemeVariant {
    SchemeVariant::Basic
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_variant")]
    pub variant: SchemeVariant,
    #[serde(default)]
    pub coding: Coding,
    #[serde(default)]
    pub jitter_fraction: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub per_bit_overhead: f64,
    #[serde(default)]
    pub backing_store: BackingStore,
    pub divergence_tolerance: Option<f64>,
    #[serde(default)]
    pub physical: PhysicalSection,
    #[serde(default)]
    pub timing: TimingSection,
    pub message: Option<MessageSpec>,
    pub disruptor: Option<DisruptorConfig>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        read_toml(path)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        parse_toml(text, "<inline>")
    }

    /// Resolves into a runnable scenario. `seed` overrides the file's seed.
    pub fn to_config(&self, seed: Option<u64>) -> Result<ScenarioConfig, ConfigError> {
        let message = self
            .message
            .as_ref()
            .ok_or_else(|| field_err("message", "missing"))?
            .resolve()?;
        self.build(None, None, message, seed)
    }

    fn build(
        &self,
        cache_override: Option<f64>,
        wait_override: Option<f64>,
        message: BitMessage,
        seed: Option<u64>,
    ) -> Result<ScenarioConfig, ConfigError> {
        let physical = self.physical.resolve(cache_override)?;
        let timing = self.timing.resolve(&physical, wait_override)?;
        let cfg = ScenarioConfig {
            physical,
            timing,
            variant: self.variant,
            message,
            coding: self.coding,
            jitter_fraction: self.jitter_fraction,
            rng_seed: seed.unwrap_or(self.seed),
            disruptor: self.disruptor,
            per_bit_overhead: self.per_bit_overhead,
            backing_store: self.backing_store,
            divergence_tolerance: self
                .divergence_tolerance
                .unwrap_or_else(|| default_divergence_tolerance(&physical)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub cache_sizes_mb: Vec<f64>,
    /// Observed full-cache read time per size; fits the disk rate per row.
    pub read_times: Option<Vec<f64>>,
    /// 0-bit wait per size; defaults to `c / 16`.
    pub wait_periods: Option<Vec<f64>>,
    pub message: MessageSpec,
    #[serde(default = "empty_base")]
    pub base: ScenarioFile,
}

fn empty_base() -> ScenarioFile {
    ScenarioFile {
        variant: SchemeVariant::Basic,
        coding: Coding::None,
        jitter_fraction: 0.0,
        seed: 0,
        per_bit_overhead: 0.0,
        backing_store: BackingStore::Independent,
        divergence_tolerance: None,
        physical: PhysicalSection::default(),
        timing: TimingSection::default(),
        message: None,
        disruptor: None,
    }
}

/// Inputs for one row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub cache_mb: f64,
    pub read_time: Option<f64>,
    pub wait_period: Option<f64>,
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let spec: SweepSpec = read_toml(path)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let spec: SweepSpec = parse_toml(text, "<inline>")?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cache_sizes_mb.is_empty() {
            return Err(field_err("cache_sizes_mb", "must not be empty"));
        }
        if let Some(bad) = self.cache_sizes_mb.iter().find(|c| !(**c > 0.0)) {
            return Err(field_err("cache_sizes_mb", format!("{bad} is not > 0")));
        }
        let n = self.cache_sizes_mb.len();
        for (name, list) in [
            ("read_times", &self.read_times),
            ("wait_periods", &self.wait_periods),
        ] {
            if let Some(l) = list {
                if l.len() != n {
                    return Err(field_err(
                        name,
                        format!("has {} entries, cache_sizes_mb has {n}", l.len()),
                    ));
                }
            }
        }
        if let Some(bad) = self.read_times.iter().flatten().find(|t| !(**t > 0.0)) {
            return Err(field_err("read_times", format!("{bad} is not > 0")));
        }
        if let Some(bad) = self.wait_periods.iter().flatten().find(|t| !(**t >= 0.0)) {
            return Err(field_err("wait_periods", format!("{bad} is negative")));
        }
        if self.base.message.is_some() {
            return Err(field_err(
                "base.message",
                "put the message at top level of a sweep",
            ));
        }
        self.message.resolve()?;
        Ok(())
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        self.cache_sizes_mb
            .iter()
            .enumerate()
            .map(|(i, &cache_mb)| SweepPoint {
                cache_mb,
                read_time: self.read_times.as_ref().map(|v| v[i]),
                wait_period: self.wait_periods.as_ref().map(|v| v[i]),
            })
            .collect()
    }

    /// Physical parameters for one point: the disk rate is fitted from the
    /// point's read time when given, else taken from the base.
    pub fn physical_for(&self, point: &SweepPoint) -> Result<PhysicalParams, ConfigError> {
        let mut section = self.base.physical.clone();
        if let Some(t) = point.read_time {
            section.disk_rate = None;
            section.evict_time = Some(t);
        } else if section.evict_time.is_some() {
            return Err(field_err(
                "base.physical.evict_time",
                "is per cache size in a sweep; use read_times or disk_rate",
            ));
        }
        section.resolve(Some(point.cache_mb))
    }

    pub fn wait_for(&self, point: &SweepPoint) -> f64 {
        point
            .wait_period
            .or(self.base.timing.wait_period)
            .unwrap_or_else(|| default_wait_period(point.cache_mb))
    }

    pub fn scenario_for(
        &self,
        point: &SweepPoint,
        seed: Option<u64>,
    ) -> Result<ScenarioConfig, ConfigError> {
        let mut base = self.base.clone();
        if let Some(t) = point.read_time {
            base.physical.disk_rate = None;
            base.physical.evict_time = Some(t);
        }
        base.build(
            Some(point.cache_mb),
            Some(self.wait_for(point)),
            self.message.resolve()?,
            seed,
        )
    }
}
