//! Size and time units shared by every module.
//!
//! Sizes in the public API are expressed in MB (2^20 bytes) and rates in MB/s,
//! matching how cache sizes and disk bandwidth are usually quoted. The
//! simulator itself keeps time as integer nanoseconds so that long runs
//! accumulate without floating-point drift.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// Bytes per MB.
pub const MB_BYTES: u64 = 1 << 20;

/// Block size of the modelled file-system cache: 512 KiB, so 1 MB is two blocks.
pub const BLOCK_SIZE_BYTES: u64 = 512 * 1024;

/// Block size in MB (0.5).
pub const BLOCK_SIZE_MB: f64 = BLOCK_SIZE_BYTES as f64 / MB_BYTES as f64;

const NANOS_PER_SEC: f64 = 1e9;

/// Number of whole blocks in `mb` megabytes, or `None` if `mb` is not a
/// non-negative whole multiple of the block size.
pub fn mb_to_blocks(mb: f64) -> Option<u64> {
    if !mb.is_finite() || mb < 0.0 {
        return None;
    }
    let blocks = mb / BLOCK_SIZE_MB;
    let rounded = blocks.round();
    if (blocks - rounded).abs() > 1e-9 {
        return None;
    }
    Some(rounded as u64)
}

/// A point on (or span of) the virtual clock, in nanoseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    /// Rounds to the nearest nanosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((secs * NANOS_PER_SEC).round() as u64)
    }

    /// Rounds up to the next whole nanosecond.
    pub fn from_secs_f64_ceil(secs: f64) -> Self {
        if secs.is_nan() || secs <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((secs * NANOS_PER_SEC).ceil() as u64)
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// Scales a duration by `factor`, rounding to the nearest nanosecond.
    pub fn scale(self, factor: f64) -> SimTime {
        SimTime::from_secs_f64(self.as_secs_f64() * factor)
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl std::ops::Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}
