//! Bit-level protocol: modulation, threshold demodulation and the
//! three-fold repetition code.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::timing::PhysicalParams;
use crate::units::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("repetition-coded message length {0} is not a multiple of 3")]
    Framing(usize),
    #[error("invalid bit character {ch:?} at position {pos}")]
    InvalidChar { ch: char, pos: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bit {
    Zero,
    One,
}

impl Bit {
    pub fn flipped(self) -> Bit {
        match self {
            Bit::Zero => Bit::One,
            Bit::One => Bit::Zero,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Bit::Zero => '0',
            Bit::One => '1',
        }
    }
}

impl From<bool> for Bit {
    fn from(b: bool) -> Bit {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl From<Bit> for bool {
    fn from(b: Bit) -> bool {
        b == Bit::One
    }
}

impl Serialize for Bit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(match self {
            Bit::Zero => 0,
            Bit::One => 1,
        })
    }
}

/// An ordered sequence of bits. Serialized as an ASCII string of `0`/`1`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct BitMessage(Vec<Bit>);

impl BitMessage {
    pub fn new(bits: Vec<Bit>) -> Self {
        BitMessage(bits)
    }

    pub fn bits(&self) -> &[Bit] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b == Bit::One).count()
    }

    pub fn count_zeros(&self) -> usize {
        self.len() - self.count_ones()
    }

    /// Positions where `self` and `other` differ, plus any length surplus.
    pub fn hamming_distance(&self, other: &BitMessage) -> usize {
        let common = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        common + self.len().abs_diff(other.len())
    }

    /// Alternating pattern starting with a 1-bit.
    pub fn alternating(len: usize) -> Self {
        BitMessage((0..len).map(|i| Bit::from(i % 2 == 0)).collect())
    }

    pub fn ones(len: usize) -> Self {
        BitMessage(vec![Bit::One; len])
    }
}

impl FromIterator<Bit> for BitMessage {
    fn from_iter<I: IntoIterator<Item = Bit>>(iter: I) -> Self {
        BitMessage(iter.into_iter().collect())
    }
}

impl From<Vec<Bit>> for BitMessage {
    fn from(bits: Vec<Bit>) -> Self {
        BitMessage(bits)
    }
}

impl fmt::Display for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.0.iter().map(|b| b.as_char()).collect();
        f.write_str(&s)
    }
}

impl FromStr for BitMessage {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(pos, ch)| match ch {
                '0' => Ok(Bit::Zero),
                '1' => Ok(Bit::One),
                _ => Err(CodecError::InvalidChar { ch, pos }),
            })
            .collect()
    }
}

impl Serialize for BitMessage {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitMessage {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What the sender does during its frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SenderAction {
    /// Read the whole sender file, flushing the shared cache.
    ReadFullSenderFile,
    /// Stay away from the file system for this many seconds.
    Wait(f64),
}

pub fn modulate(bit: Bit, wait_period: f64) -> SenderAction {
    match bit {
        Bit::One => SenderAction::ReadFullSenderFile,
        Bit::Zero => SenderAction::Wait(wait_period),
    }
}

/// A read slower than the threshold is a 1-bit. Equality decodes as 0.
pub fn demodulate(measured: f64, threshold: f64) -> Bit {
    Bit::from(measured > threshold)
}

pub fn demodulate_time(measured: SimTime, threshold: SimTime) -> Bit {
    Bit::from(measured > threshold)
}

/// Midpoint between an all-hit and an all-miss receiver probe, computed on
/// the same per-block nanosecond costs the simulator charges.
pub fn default_threshold_time(params: &PhysicalParams) -> SimTime {
    let blocks = params.receiver_blocks();
    let hit = params.block_hit_time() * blocks;
    let miss = params.block_miss_time() * blocks;
    SimTime((hit.as_nanos() + miss.as_nanos()) / 2)
}

/// [`default_threshold_time`] in seconds.
pub fn default_threshold(params: &PhysicalParams) -> f64 {
    default_threshold_time(params).as_secs_f64()
}

pub fn encode_repetition3(message: &BitMessage) -> BitMessage {
    message.0.iter().flat_map(|&b| [b, b, b]).collect()
}

/// Majority vote over each consecutive triple: 000, 001, 010, 100 decode to
/// 0 and 011, 101, 110, 111 decode to 1.
pub fn decode_repetition3(received: &BitMessage) -> Result<BitMessage, CodecError> {
    if !received.len().is_multiple_of(3) {
        return Err(CodecError::Framing(received.len()));
    }
    Ok(received
        .0
        .chunks_exact(3)
        .map(|t| {
            let ones = t.iter().filter(|b| **b == Bit::One).count();
            Bit::from(ones >= 2)
        })
        .collect())
}

/// One receiver probe as seen on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotRecord {
    pub slot_index: usize,
    pub sent_bit: Bit,
    /// Measured read time, nanoseconds.
    pub measured_ns: SimTime,
    /// Decision threshold, nanoseconds.
    pub threshold_ns: SimTime,
    pub decoded_bit: Bit,
}

impl SlotRecord {
    pub fn new(slot_index: usize, sent_bit: Bit, measured: SimTime, threshold: SimTime) -> Self {
        SlotRecord {
            slot_index,
            sent_bit,
            measured_ns: measured,
            threshold_ns: threshold,
            decoded_bit: demodulate_time(measured, threshold),
        }
    }

    pub fn measured_read_time(&self) -> f64 {
        self.measured_ns.as_secs_f64()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold_ns.as_secs_f64()
    }

    pub fn is_error(&self) -> bool {
        self.sent_bit != self.decoded_bit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::HitCost;
    use proptest::prelude::*;

    fn msg(s: &str) -> BitMessage {
        s.parse().unwrap()
    }

    #[test]
    fn modulation() {
        assert_eq!(modulate(Bit::One, 0.125), SenderAction::ReadFullSenderFile);
        assert_eq!(modulate(Bit::Zero, 0.125), SenderAction::Wait(0.125));
        let actions: Vec<_> = msg("10").bits().iter().map(|b| modulate(*b, 1.0)).collect();
        assert_eq!(
            actions,
            vec![SenderAction::ReadFullSenderFile, SenderAction::Wait(1.0)]
        );
    }

    #[test]
    fn demodulation() {
        assert_eq!(demodulate(0.15, 0.07), Bit::One);
        assert_eq!(demodulate(0.0, 0.07), Bit::Zero);
        assert_eq!(demodulate(0.07, 0.07), Bit::Zero);
    }

    #[test]
    fn all_miss_probe_beats_midpoint() {
        let params = PhysicalParams::new(2.0, 0.5 / 0.07).unwrap();
        let miss = params.block_miss_time() * 2;
        assert_eq!(
            demodulate(miss.as_secs_f64(), default_threshold(&params)),
            Bit::One
        );
    }

    #[test]
    fn threshold_examples() {
        let instant = PhysicalParams::new(2.0, 7.0)
            .unwrap()
            .with_hit_cost(HitCost::Instant)
            .unwrap();
        assert!((default_threshold(&instant) - 1.0 / 14.0).abs() < 1e-9);

        let p = PhysicalParams::new(2.0, 6.849).unwrap();
        let expect = (1.0 / 3000.0 + 1.0 / 6.849) / 2.0;
        assert!((default_threshold(&p) - expect).abs() < 1e-8);
        assert!((default_threshold(&p) - 0.0732).abs() < 5e-5);

        assert!(PhysicalParams::new(2.0, 7.0)
            .unwrap()
            .with_hit_cost(HitCost::Rate(7.0))
            .is_err());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(encode_repetition3(&msg("")), msg(""));
        assert_eq!(encode_repetition3(&msg("10")), msg("111000"));
    }

    #[test]
    fn decode_table_is_exact() {
        let zeros = ["000", "001", "010", "100"];
        let ones = ["011", "101", "110", "111"];
        for p in zeros {
            assert_eq!(decode_repetition3(&msg(p)).unwrap(), msg("0"), "{p}");
        }
        for p in ones {
            assert_eq!(decode_repetition3(&msg(p)).unwrap(), msg("1"), "{p}");
        }
    }

    #[test]
    fn decode_rejects_bad_framing() {
        assert_eq!(
            decode_repetition3(&msg("0101")),
            Err(CodecError::Framing(4))
        );
    }

    #[test]
    fn round_trip_exhaustive_up_to_16() {
        for len in 0..=16usize {
            for word in 0u32..(1 << len) {
                let m: BitMessage = (0..len).map(|i| Bit::from(word >> i & 1 == 1)).collect();
                assert_eq!(decode_repetition3(&encode_repetition3(&m)).unwrap(), m);
            }
        }
    }

    #[test]
    fn message_parsing() {
        assert_eq!(msg("1010").to_string(), "1010");
        assert_eq!(
            "10x".parse::<BitMessage>(),
            Err(CodecError::InvalidChar { ch: 'x', pos: 2 })
        );
        assert_eq!(serde_json::to_string(&msg("011")).unwrap(), "\"011\"");
        assert_eq!(BitMessage::alternating(5), msg("10101"));
        assert_eq!(msg("1100").hamming_distance(&msg("1010")), 2);
    }

    fn message_strategy() -> impl Strategy<Value = BitMessage> {
        prop::collection::vec(any::<bool>(), 0..200)
            .prop_map(|v| v.into_iter().map(Bit::from).collect())
    }

    proptest! {
        #[test]
        fn encoded_length_triples(m in message_strategy()) {
            prop_assert_eq!(encode_repetition3(&m).len(), 3 * m.len());
        }

        #[test]
        fn round_trip(m in message_strategy()) {
            prop_assert_eq!(decode_repetition3(&encode_repetition3(&m)).unwrap(), m);
        }

        #[test]
        fn corrects_one_flip_per_triple(
            m in message_strategy(),
            flips in prop::collection::vec(prop::option::of(0usize..3), 200),
        ) {
            let mut bits = encode_repetition3(&m).bits().to_vec();
            for (t, f) in flips.iter().take(m.len()).enumerate() {
                if let Some(off) = f {
                    bits[3 * t + off] = bits[3 * t + off].flipped();
                }
            }
            prop_assert_eq!(decode_repetition3(&BitMessage::new(bits)).unwrap(), m);
        }

        #[test]
        fn demodulation_is_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0, th in 1e-3f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(demodulate(lo, th) <= demodulate(hi, th));
        }
    }
}
