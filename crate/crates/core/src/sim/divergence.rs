//! Sender/receiver drift in the pipelined scheme.
//!
//! Both parties time their slots independently, so jitter makes the sender's
//! slot starts wander away from the receiver's. Small offsets are harmless;
//! once the offset exceeds the tolerance the sender stretches or shortens its
//! next wait so that it starts together with the receiver again.

use crate::units::SimTime;

fn signed(t: SimTime) -> i128 {
    t.as_nanos() as i128
}

#[derive(Debug, Clone)]
pub struct DivergenceTracker {
    tolerance: SimTime,
    max_abs: u64,
    adjusted: Vec<usize>,
}

impl DivergenceTracker {
    pub fn new(tolerance: SimTime) -> Self {
        DivergenceTracker {
            tolerance,
            max_abs: 0,
            adjusted: Vec::new(),
        }
    }

    /// Records the divergence of `proposed` from `receiver` for slot `bit` and
    /// returns the start the sender should actually use. A start cannot be
    /// moved before `earliest` (the end of the sender's previous action).
    pub fn align(
        &mut self,
        bit: usize,
        proposed: SimTime,
        receiver: SimTime,
        earliest: SimTime,
    ) -> SimTime {
        let div = signed(proposed) - signed(receiver);
        self.max_abs = self.max_abs.max(div.unsigned_abs() as u64);
        if div.unsigned_abs() > self.tolerance.as_nanos() as u128 {
            self.adjusted.push(bit);
            receiver.max(earliest)
        } else {
            proposed
        }
    }

    /// Records a divergence without adjusting (basic scheme).
    pub fn observe(&mut self, sender: SimTime, receiver: SimTime) {
        let div = signed(sender) - signed(receiver);
        self.max_abs = self.max_abs.max(div.unsigned_abs() as u64);
    }

    pub fn max_divergence(&self) -> SimTime {
        SimTime(self.max_abs)
    }

    pub fn adjusted_bits(&self) -> &[usize] {
        &self.adjusted
    }

    pub fn tolerance(&self) -> SimTime {
        self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedSchedule {
    pub starts: Vec<SimTime>,
    /// Slots at which the sender re-aligned.
    pub adjusted_bits: Vec<usize>,
    /// Largest divergence seen before any adjustment.
    pub max_divergence: SimTime,
}

/// Applies the re-alignment rule to whole schedules.
///
/// `sender_nominal` holds the sender's free-running slot starts (as if it
/// never adjusted); an adjustment at slot `k` shifts every later start by the
/// same amount. `receiver` holds the receiver's slot starts. Both slices are
/// truncated to the shorter length.
pub fn divergence_adjust(
    sender_nominal: &[SimTime],
    receiver: &[SimTime],
    tolerance: SimTime,
) -> AdjustedSchedule {
    let mut tracker = DivergenceTracker::new(tolerance);
    let mut offset: i128 = 0;
    let mut starts = Vec::with_capacity(sender_nominal.len().min(receiver.len()));
    for (k, (&nominal, &recv)) in sender_nominal.iter().zip(receiver).enumerate() {
        let proposed = SimTime((signed(nominal) + offset).max(0) as u64);
        let actual = tracker.align(k, proposed, recv, SimTime::ZERO);
        offset += signed(actual) - signed(proposed);
        starts.push(actual);
    }
    AdjustedSchedule {
        starts,
        adjusted_bits: tracker.adjusted.clone(),
        max_divergence: tracker.max_divergence(),
    }
}
