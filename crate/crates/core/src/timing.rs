//! Closed-form timing of the covert channel.
//!
//! Two schemes are modelled. The basic scheme gives every bit a fixed slot
//! made of a sender frame and a receiver frame, each padded by a safety
//! frame. The optimized scheme drops the safety frames and pipelines the
//! receiver's re-read behind the sender's eviction, paying one extra probe at
//! the end of the message.
//!
//! All values here are `f64` seconds, MB and MB/s. The simulator converts to
//! integer nanoseconds at its boundary.

use std::fmt;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec;
use crate::units::{mb_to_blocks, SimTime, BLOCK_SIZE_MB};

/// Default cache-hit read rate, MB/s.
pub const DEFAULT_RAM_RATE: f64 = 3000.0;

/// Default proportional safety frame.
pub const DEFAULT_SAFETY_FRACTION: f64 = 0.10;

/// MB read by the receiver per probe (two blocks).
pub const DEFAULT_RECEIVER_READ_MB: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimingError {
    #[error("invalid {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("safety frame requested for negative nominal time {0}")]
    NegativeNominal(f64),
    #[error("optimized scheme needs at least one bit (trailing probe is undefined otherwise)")]
    EmptyMessage,
    #[error("total time must be positive, got {0}")]
    NonPositiveTime(f64),
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> TimingError {
    TimingError::InvalidParameter {
        name,
        value,
        reason,
    }
}

/// Cost of serving a block that is already resident.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HitCost {
    /// Hits take no time at all.
    Instant,
    /// Hits are read from RAM at this rate, MB/s.
    Rate(f64),
}

impl HitCost {
    pub fn exceeds(&self, rate: f64) -> bool {
        match *self {
            HitCost::Instant => true,
            HitCost::Rate(r) => r > rate,
        }
    }

    /// Seconds to serve `mb` megabytes from the cache.
    pub fn time_for(&self, mb: f64) -> f64 {
        match *self {
            HitCost::Instant => 0.0,
            HitCost::Rate(r) => mb / r,
        }
    }
}

impl Serialize for HitCost {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            HitCost::Instant => s.serialize_str("instant"),
            HitCost::Rate(r) => s.serialize_f64(r),
        }
    }
}

impl<'de> Deserialize<'de> for HitCost {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct HitCostVisitor;

        impl Visitor<'_> for HitCostVisitor {
            type Value = HitCost;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a rate in MB/s or the string \"instant\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<HitCost, E> {
                match v {
                    "instant" => Ok(HitCost::Instant),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<HitCost, E> {
                Ok(HitCost::Rate(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<HitCost, E> {
                Ok(HitCost::Rate(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<HitCost, E> {
                Ok(HitCost::Rate(v as f64))
            }
        }

        d.deserialize_any(HitCostVisitor)
    }
}

/// Physical parameters of the shared cache and its backing store.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Cache size `c`, MB.
    pub cache_mb: f64,
    /// Backing-store read rate `l`, MB/s.
    pub disk_rate: f64,
    /// Cost of a cache hit.
    #[serde(default = "default_hit_cost")]
    pub hit_cost: HitCost,
    /// MB read by the receiver per probe.
    #[serde(default = "default_receiver_read_mb")]
    pub receiver_read_mb: f64,
}

fn default_hit_cost() -> HitCost {
    HitCost::Rate(DEFAULT_RAM_RATE)
}

fn default_receiver_read_mb() -> f64 {
    DEFAULT_RECEIVER_READ_MB
}

impl PhysicalParams {
    /// Parameters with the default hit cost and a 1 MB receiver probe.
    pub fn new(cache_mb: f64, disk_rate: f64) -> Result<Self, TimingError> {
        let p = PhysicalParams {
            cache_mb,
            disk_rate,
            hit_cost: default_hit_cost(),
            receiver_read_mb: DEFAULT_RECEIVER_READ_MB,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_hit_cost(mut self, hit_cost: HitCost) -> Result<Self, TimingError> {
        self.hit_cost = hit_cost;
        self.validate()?;
        Ok(self)
    }

    pub fn with_receiver_read_mb(mut self, mb: f64) -> Result<Self, TimingError> {
        self.receiver_read_mb = mb;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        if !(self.cache_mb.is_finite() && self.cache_mb > 0.0) {
            return Err(invalid("cache_mb", self.cache_mb, "must be > 0"));
        }
        if !(self.disk_rate.is_finite() && self.disk_rate > 0.0) {
            return Err(invalid("disk_rate", self.disk_rate, "must be > 0"));
        }
        if let HitCost::Rate(r) = self.hit_cost {
            if !r.is_finite() || r <= 0.0 {
                return Err(invalid("ram_rate", r, "must be > 0"));
            }
        }
        if !self.hit_cost.exceeds(self.disk_rate) {
            let r = match self.hit_cost {
                HitCost::Rate(r) => r,
                HitCost::Instant => f64::INFINITY,
            };
            return Err(invalid("ram_rate", r, "must exceed disk_rate"));
        }
        if !(self.receiver_read_mb > 0.0) {
            return Err(invalid(
                "receiver_read_mb",
                self.receiver_read_mb,
                "must be > 0",
            ));
        }
        if mb_to_blocks(self.receiver_read_mb).is_none() {
            return Err(invalid(
                "receiver_read_mb",
                self.receiver_read_mb,
                "must be a whole multiple of the 0.5 MB block size",
            ));
        }
        Ok(())
    }

    /// Seconds to evict the whole cache from cold: `c / l`.
    pub fn evict_time(&self) -> f64 {
        self.cache_mb / self.disk_rate
    }

    /// Seconds for an all-miss receiver probe: `r / l`.
    pub fn probe_miss_time(&self) -> f64 {
        self.receiver_read_mb / self.disk_rate
    }

    /// Seconds for an all-hit receiver probe.
    pub fn probe_hit_time(&self) -> f64 {
        self.hit_cost.time_for(self.receiver_read_mb)
    }

    /// Per-block costs round up, so a read never undercuts its rate.
    pub fn block_miss_time(&self) -> SimTime {
        SimTime::from_secs_f64_ceil(BLOCK_SIZE_MB / self.disk_rate)
    }

    pub fn block_hit_time(&self) -> SimTime {
        SimTime::from_secs_f64_ceil(self.hit_cost.time_for(BLOCK_SIZE_MB))
    }

    /// Capacity of the cache in whole blocks.
    pub fn cache_blocks(&self) -> u64 {
        (self.cache_mb / BLOCK_SIZE_MB + 1e-9).floor() as u64
    }

    pub fn receiver_blocks(&self) -> u64 {
        mb_to_blocks(self.receiver_read_mb).unwrap_or(0)
    }
}

/// Frame lengths and decision parameters of the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingParams {
    /// Nominal sender frame, seconds.
    pub sender_frame: f64,
    /// Nominal receiver frame, seconds.
    pub receiver_frame: f64,
    /// Safety frame as a fraction of the nominal frame.
    pub safety_fraction: f64,
    /// Sender idle time used to signal a 0-bit, seconds.
    pub wait_period: f64,
    /// Receiver decision threshold, seconds.
    pub threshold: f64,
}

impl TimingParams {
    /// Frames derived from the physical parameters: the sender frame is one
    /// full eviction, the receiver frame one all-miss probe, the wait period
    /// `c/16` (capped at the sender frame) and the threshold the hit/miss
    /// midpoint.
    pub fn derive(phys: &PhysicalParams, safety_fraction: f64) -> Result<Self, TimingError> {
        phys.validate()?;
        let sender_frame = phys.evict_time();
        let t = TimingParams {
            sender_frame,
            receiver_frame: phys.probe_miss_time(),
            safety_fraction,
            wait_period: default_wait_period(phys.cache_mb).min(sender_frame),
            threshold: codec::default_threshold(phys),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TimingError> {
        if !(self.safety_fraction.is_finite() && self.safety_fraction >= 0.0) {
            return Err(invalid(
                "safety_fraction",
                self.safety_fraction,
                "must be >= 0",
            ));
        }
        if !(self.sender_frame.is_finite() && self.sender_frame > 0.0) {
            return Err(invalid("sender_frame", self.sender_frame, "must be > 0"));
        }
        if !(self.receiver_frame.is_finite() && self.receiver_frame > 0.0) {
            return Err(invalid(
                "receiver_frame",
                self.receiver_frame,
                "must be > 0",
            ));
        }
        if !(self.wait_period.is_finite() && self.wait_period >= 0.0) {
            return Err(invalid("wait_period", self.wait_period, "must be >= 0"));
        }
        let padded_receiver = self.receiver_frame + self.receiver_frame * self.safety_fraction;
        if !(self.threshold > 0.0 && self.threshold < padded_receiver) {
            return Err(invalid(
                "threshold",
                self.threshold,
                "must lie strictly between 0 and the padded receiver frame",
            ));
        }
        Ok(())
    }

    /// Safety frame for a nominal duration: `safety_fraction * nominal`.
    pub fn safety_frame(&self, nominal: f64) -> Result<f64, TimingError> {
        if nominal < 0.0 || nominal.is_nan() {
            return Err(TimingError::NegativeNominal(nominal));
        }
        Ok(self.safety_fraction * nominal)
    }

    /// Sender frame plus its safety frame.
    pub fn padded_sender_frame(&self) -> f64 {
        self.sender_frame * (1.0 + self.safety_fraction)
    }

    /// Receiver frame plus its safety frame.
    pub fn padded_receiver_frame(&self) -> f64 {
        self.receiver_frame * (1.0 + self.safety_fraction)
    }

    /// Bit time of the basic scheme from explicit frame lengths:
    /// `(t_S + t_sav(t_S)) + (t_R + t_sav(t_R))`.
    pub fn frame_bit_time(&self) -> f64 {
        self.padded_sender_frame() + self.padded_receiver_frame()
    }
}

/// Which slot discipline the sender and receiver follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeVariant {
    Basic,
    Optimized,
}

impl fmt::Display for SchemeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeVariant::Basic => f.write_str("basic"),
            SchemeVariant::Optimized => f.write_str("optimized"),
        }
    }
}

/// 0-bit wait period fitted to the reference measurements: `c / 16` seconds.
pub fn default_wait_period(cache_mb: f64) -> f64 {
    cache_mb / 16.0
}

/// Basic-scheme bit time from physical parameters:
/// `(c/l + t_sav(c/l)) + (r/l + t_sav(r/l))`.
pub fn bit_time_basic(phys: &PhysicalParams, timing: &TimingParams) -> Result<f64, TimingError> {
    phys.validate()?;
    let send = phys.evict_time();
    let recv = phys.probe_miss_time();
    Ok(send + timing.safety_frame(send)? + recv + timing.safety_frame(recv)?)
}

/// Total basic-scheme time for `n_bits` bits of `bit_time` each.
pub fn total_time_basic(n_bits: u64, bit_time: f64) -> f64 {
    n_bits as f64 * bit_time
}

/// Optimized-scheme bit time: `(c + r) / l`.
pub fn bit_time_optimized(phys: &PhysicalParams) -> Result<f64, TimingError> {
    phys.validate()?;
    Ok((phys.cache_mb + phys.receiver_read_mb) / phys.disk_rate)
}

/// Optimized-scheme total: `n * t_b + r / l`, the last term being the
/// receiver's extra probe for the final bit.
pub fn total_time_optimized(n_bits: u64, phys: &PhysicalParams) -> Result<f64, TimingError> {
    if n_bits == 0 {
        return Err(TimingError::EmptyMessage);
    }
    Ok(n_bits as f64 * bit_time_optimized(phys)? + phys.probe_miss_time())
}

/// Theoretical time of a mixed message, split by bit value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoryBreakdown {
    pub ones_time: f64,
    pub zeros_time: f64,
    pub total: f64,
}

/// Each 1-bit costs `one_bit_time`, each 0-bit costs `wait_period`.
pub fn mixed_message_theoretical_time(
    n_ones: u64,
    n_zeros: u64,
    one_bit_time: f64,
    wait_period: f64,
) -> TheoryBreakdown {
    let ones_time = n_ones as f64 * one_bit_time;
    let zeros_time = n_zeros as f64 * wait_period;
    TheoryBreakdown {
        ones_time,
        zeros_time,
        total: ones_time + zeros_time,
    }
}

/// Fits the backing-store rate from an observed full-cache eviction time.
pub fn fit_params_from_observation(
    cache_size_mb: f64,
    observed_evict_time: f64,
) -> Result<PhysicalParams, TimingError> {
    if !(observed_evict_time > 0.0) {
        return Err(invalid(
            "observed_evict_time",
            observed_evict_time,
            "must be > 0",
        ));
    }
    PhysicalParams::new(cache_size_mb, cache_size_mb / observed_evict_time)
}

/// Bits per second.
pub fn throughput(n_bits: u64, total_time: f64) -> Result<f64, TimingError> {
    if !(total_time > 0.0) {
        return Err(TimingError::NonPositiveTime(total_time));
    }
    Ok(n_bits as f64 / total_time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-12)
    }

    fn zero_safety(phys: &PhysicalParams) -> TimingParams {
        TimingParams::derive(phys, 0.0).unwrap()
    }

    #[test]
    fn safety_frame_examples() {
        let phys = PhysicalParams::new(32.0, 8.0).unwrap();
        let t = TimingParams::derive(&phys, 0.1).unwrap();
        assert!(close(t.safety_frame(1.0).unwrap(), 0.1, 1e-12));
        assert_eq!(t.safety_frame(0.0).unwrap(), 0.0);
        assert!(close(t.safety_frame(4.473).unwrap(), 0.4473, 1e-12));
        assert!(matches!(
            t.safety_frame(-1.0),
            Err(TimingError::NegativeNominal(_))
        ));
    }

    #[test]
    fn basic_bit_time_examples() {
        let phys = PhysicalParams::new(32.0, 8.0).unwrap();
        assert!(close(
            bit_time_basic(&phys, &zero_safety(&phys)).unwrap(),
            4.125,
            1e-12
        ));

        let phys = PhysicalParams::new(2.0, 6.849).unwrap();
        let tb = bit_time_basic(&phys, &zero_safety(&phys)).unwrap();
        // 2/6.849 + 1/6.849
        assert!((tb - 0.438).abs() < 5e-4, "{tb}");

        let padded = TimingParams::derive(&phys, 0.1).unwrap();
        assert!(close(
            bit_time_basic(&phys, &padded).unwrap(),
            1.1 * tb,
            1e-12
        ));
    }

    #[test]
    fn frame_bit_time_matches_physical_form() {
        let phys = PhysicalParams::new(16.0, 7.0).unwrap();
        let t = TimingParams::derive(&phys, 0.25).unwrap();
        assert!(close(
            t.frame_bit_time(),
            bit_time_basic(&phys, &t).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn total_basic_examples() {
        assert_eq!(total_time_basic(0, 3.0), 0.0);
        assert_eq!(total_time_basic(64, 0.5), 32.0);
        let t = total_time_basic(27, 2.224);
        assert!(close(t, 60.048, 1e-9));
        assert!(close(t, 60.055, 0.005));
    }

    #[test]
    fn optimized_bit_time_examples() {
        let phys = PhysicalParams::new(32.0, 7.154).unwrap();
        assert!((bit_time_optimized(&phys).unwrap() - 4.613).abs() < 5e-4);
        assert!(PhysicalParams::new(0.0, 7.0).is_err());
        let phys = PhysicalParams::new(7.0, 7.0).unwrap();
        assert!(close(bit_time_optimized(&phys).unwrap(), 8.0 / 7.0, 1e-12));
    }

    #[test]
    fn optimized_total_examples() {
        let phys = PhysicalParams::new(1.0, 1.0).unwrap();
        assert!(close(total_time_optimized(1, &phys).unwrap(), 3.0, 1e-12));

        let phys = PhysicalParams::new(2.0, 6.849).unwrap();
        let t = total_time_optimized(64, &phys).unwrap();
        assert!((t - 28.18).abs() < 0.01, "{t}");

        assert_eq!(
            total_time_optimized(0, &phys),
            Err(TimingError::EmptyMessage)
        );
    }

    #[test]
    fn mixed_message_examples() {
        let b = mixed_message_theoretical_time(27, 37, 4.4727, 2.0);
        assert!((b.ones_time - 120.76).abs() < 0.01);
        assert_eq!(b.zeros_time, 74.0);
        assert!(close(b.total, 194.762, 1e-4));

        let b = mixed_message_theoretical_time(0, 0, 1.0, 1.0);
        assert_eq!(b.total, 0.0);

        let b = mixed_message_theoretical_time(27, 37, 0.2916, 0.125);
        assert!((b.ones_time - 7.873).abs() < 1e-3);
        assert_eq!(b.zeros_time, 4.625);
        assert!((b.total - 12.498).abs() < 1e-3);
    }

    #[test]
    fn fit_examples() {
        let p = fit_params_from_observation(2.0, 0.292).unwrap();
        assert!((p.disk_rate - 6.849).abs() < 1e-3);
        let p = fit_params_from_observation(64.0, 8.810).unwrap();
        assert!((p.disk_rate - 7.264).abs() < 1e-3);
        let p = fit_params_from_observation(5.5, 5.5).unwrap();
        assert_eq!(p.disk_rate, 1.0);
        assert!(fit_params_from_observation(2.0, 0.0).is_err());
    }

    #[test]
    fn throughput_examples() {
        assert!((throughput(64, 28.238).unwrap() - 2.266).abs() < 5e-4);
        assert!((throughput(64, 436.724).unwrap() - 0.147).abs() < 5e-4);
        assert_eq!(throughput(0, 3.0).unwrap(), 0.0);
        assert!(throughput(1, 0.0).is_err());
        assert!(throughput(1, -1.0).is_err());
    }

    #[test]
    fn physical_invariants_rejected() {
        assert!(PhysicalParams::new(2.0, 0.0).is_err());
        let p = PhysicalParams::new(2.0, 7.0).unwrap();
        assert!(p.with_hit_cost(HitCost::Rate(7.0)).is_err());
        assert!(p.with_hit_cost(HitCost::Instant).is_ok());
        assert!(p.with_receiver_read_mb(0.75).is_err());
        assert!(p.with_receiver_read_mb(1.5).is_ok());
    }

    #[test]
    fn hit_cost_serde() {
        let p: PhysicalParams =
            toml::from_str("cache_mb = 2.0\ndisk_rate = 7.0\nhit_cost = \"instant\"\n").unwrap();
        assert_eq!(p.hit_cost, HitCost::Instant);
        let p: PhysicalParams =
            toml::from_str("cache_mb = 2.0\ndisk_rate = 7.0\nhit_cost = 3000\n").unwrap();
        assert_eq!(p.hit_cost, HitCost::Rate(3000.0));
        assert_eq!(
            serde_json::to_string(&HitCost::Instant).unwrap(),
            "\"instant\""
        );
    }

    fn phys_strategy() -> impl Strategy<Value = PhysicalParams> {
        (1u32..=128, 0.5f64..100.0, 1u32..=4).prop_map(|(half_mb, l, r)| {
            PhysicalParams::new(half_mb as f64 * 0.5, l)
                .unwrap()
                .with_receiver_read_mb(r as f64 * 0.5)
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn optimized_never_slower_than_basic(phys in phys_strategy(), frac in 0.0f64..1.0) {
            let t = TimingParams::derive(&phys, frac).unwrap();
            let basic = bit_time_basic(&phys, &t).unwrap();
            let opt = bit_time_optimized(&phys).unwrap();
            prop_assert!(opt <= basic * (1.0 + 1e-12));
            if frac > 1e-9 {
                prop_assert!(opt < basic);
            }
        }

        #[test]
        fn total_basic_is_additive(a in 0u64..10_000, b in 0u64..10_000, tb in 0.0f64..100.0) {
            let lhs = total_time_basic(a + b, tb);
            let rhs = total_time_basic(a, tb) + total_time_basic(b, tb);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
        }

        #[test]
        fn fit_round_trips_rate(c in 0.5f64..256.0, l in 0.1f64..500.0) {
            let p = fit_params_from_observation(c, c / l).unwrap();
            prop_assert!((p.disk_rate - l).abs() <= 1e-9 * l);
        }

        #[test]
        fn throughput_times_total_is_n(n in 0u64..100_000, total in 1e-3f64..1e6) {
            let tp = throughput(n, total).unwrap();
            prop_assert!((tp * total - n as f64).abs() <= 1e-9 * (n as f64).max(1.0));
        }

        #[test]
        fn optimized_total_telescopes(phys in phys_strategy(), n in 2u64..500) {
            let d = total_time_optimized(n, &phys).unwrap()
                - total_time_optimized(n - 1, &phys).unwrap();
            let tb = bit_time_optimized(&phys).unwrap();
            prop_assert!((d - tb).abs() <= 1e-9 * tb.max(1.0) * n as f64);
        }
    }
}
