use serde::Serialize;

use crate::codec::{BitMessage, SlotRecord};
use crate::sim::ScenarioConfig;
use crate::units::SimTime;

/// Simulated parties. The declaration order is the tie-break order for
/// events scheduled at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Actor {
    Disruptor,
    Sender,
    Receiver,
}

impl Actor {
    pub(crate) fn priority(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Receiver caches its file before the first slot.
    WarmUp,
    /// Sender reads its whole file to signal a 1-bit.
    Evict,
    /// Sender stays off the file system to signal a 0-bit.
    Wait,
    /// Receiver times a read of its file.
    Probe,
    Idle,
    /// Disruptor reads its file.
    Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time_ns: SimTime,
    pub actor: Actor,
    pub action: Action,
    pub duration_ns: SimTime,
    pub blocks_touched: u64,
    pub misses: u64,
    /// Channel slot the event belongs to, if any.
    pub slot: Option<usize>,
}

impl TraceEvent {
    pub fn end(&self) -> SimTime {
        self.time_ns + self.duration_ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelMetrics {
    /// End of the receiver's last slot, seconds.
    pub total_time: f64,
    /// Start of the first slot (after the receiver's warm-up), seconds.
    pub transmission_start: f64,
    /// Decoded message bits per second of `total_time`.
    pub throughput: f64,
    pub bit_errors: usize,
    pub ber: f64,
    /// Channel slots whose decoded bit differs from the sent bit.
    pub slot_errors: usize,
    pub channel_bits: usize,
    /// Largest sender/receiver slot-start offset seen, seconds.
    pub divergence_max: f64,
    pub adjustments: usize,
}

impl ChannelMetrics {
    pub fn transmission_time(&self) -> f64 {
        self.total_time - self.transmission_start
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationTrace {
    pub config: ScenarioConfig,
    pub events: Vec<TraceEvent>,
    pub slots: Vec<SlotRecord>,
    pub decoded_message: BitMessage,
    pub metrics: ChannelMetrics,
    /// End of the receiver's last slot, nanoseconds.
    pub total_time_ns: SimTime,
    pub transmission_start_ns: SimTime,
}

impl SimulationTrace {
    /// Pretty JSON with a fixed field order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn events_of(&self, actor: Actor) -> impl Iterator<Item = &TraceEvent> + '_ {
        self.events.iter().filter(move |e| e.actor == actor)
    }

    /// Sent-vs-decoded channel bits, one flag per slot.
    pub fn slot_error_pattern(&self) -> Vec<bool> {
        self.slots.iter().map(|s| s.is_error()).collect()
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let m = &self.metrics;
        format!(
            "total_time={:.3}s throughput={:.3}bit/s ber={:.4} bit_errors={} channel_bits={} adjustments={}",
            m.total_time, m.throughput, m.ber, m.bit_errors, m.channel_bits, m.adjustments
        )
    }
}
