//! In-memory time-tag stream shared by the simulator and the analyzer.

use serde::{Deserialize, Serialize};

/// Detector channel of the three-arm setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    /// Primary idler.
    Idler1 = 1,
    /// Secondary signal, used as the reference.
    Signal2 = 2,
    /// Secondary idler.
    Idler2 = 3,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Idler1, Channel::Signal2, Channel::Idler2];

    pub fn from_u8(raw: u8) -> Option<Self> {
        match raw {
            1 => Some(Channel::Idler1),
            2 => Some(Channel::Signal2),
            3 => Some(Channel::Idler2),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }
}

/// One detection: channel and timestamp in ticks from run start.
///
/// Ordering is by timestamp first, then channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeTag {
    pub timestamp: u64,
    pub channel: Channel,
}

impl TimeTag {
    pub fn new(channel: Channel, timestamp: u64) -> Self {
        Self { timestamp, channel }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    /// Tick length in femtoseconds.
    pub resolution_fs: u64,
    pub records: Vec<TimeTag>,
}

impl TimeTagStream {
    pub fn new(resolution_fs: u64, records: Vec<TimeTag>) -> Self {
        Self {
            resolution_fs,
            records,
        }
    }

    pub fn resolution_seconds(&self) -> f64 {
        self.resolution_fs as f64 * 1e-15
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of the first record that breaks timestamp order, if any.
    pub fn first_unsorted(&self) -> Option<usize> {
        self.records
            .windows(2)
            .position(|w| w[1].timestamp < w[0].timestamp)
            .map(|i| i + 1)
    }

    pub fn is_sorted(&self) -> bool {
        self.first_unsorted().is_none()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records.iter().filter(|r| r.channel == channel).count()
    }

    /// Sorted timestamps of one channel.
    pub fn timestamps(&self, channel: Channel) -> Vec<u64> {
        self.records
            .iter()
            .filter(|r| r.channel == channel)
            .map(|r| r.timestamp)
            .collect()
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.records.last().map(|r| r.timestamp)
    }
}
