use std::time::Duration;

use crate::classify::TrafficClass;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassCount {
    pub packets: u64,
    pub bytes: u64,
}

impl ClassCount {
    fn add(&mut self, other: ClassCount) {
        self.packets += other.packets;
        self.bytes += other.bytes;
    }
}

pub type ClassCounts = [ClassCount; TrafficClass::COUNT];

pub fn total_packets(counts: &ClassCounts) -> u64 {
    counts.iter().map(|c| c.packets).sum()
}

/// Tumbling per-class counters.
///
/// Records go into the current window. When time reaches the end of the
/// current window it closes: its counts become `previous` and the current
/// window restarts at zero. If more than one window length has elapsed,
/// the windows in between were empty, so `previous` is all zero. The
/// exported gauges read `previous`, which is why they fall back to zero when
/// traffic stops.
#[derive(Debug, Clone)]
pub struct ClassWindow {
    length: Duration,
    start: Option<Duration>,
    current: ClassCounts,
    previous: ClassCounts,
    closed_totals: ClassCounts,
    closed_windows: u64,
}

impl ClassWindow {
    /// Panics on a zero-length window.
    pub fn new(length: Duration) -> Self {
        assert!(!length.is_zero(), "window length must be positive");
        ClassWindow {
            length,
            start: None,
            current: Default::default(),
            previous: Default::default(),
            closed_totals: Default::default(),
            closed_windows: 0,
        }
    }

    pub fn length(&self) -> Duration {
        self.length
    }

    /// Roll forward to `now`. The first call anchors the first window.
    pub fn advance(&mut self, now: Duration) {
        let start = *self.start.get_or_insert(now);
        if now < start + self.length {
            return;
        }
        let elapsed = (now - start).as_nanos() / self.length.as_nanos();
        let windows = u64::try_from(elapsed).unwrap_or(u64::MAX);
        self.close_current();
        if windows > 1 {
            self.previous = Default::default();
            self.closed_windows += windows - 1;
        }
        let step = self.length.as_nanos() * u128::from(windows);
        self.start = Some(start + Duration::from_nanos(u64::try_from(step).unwrap_or(u64::MAX)));
    }

    fn close_current(&mut self) {
        for (total, c) in self.closed_totals.iter_mut().zip(&self.current) {
            total.add(*c);
        }
        self.previous = std::mem::take(&mut self.current);
        self.closed_windows += 1;
    }

    pub fn record(&mut self, class: TrafficClass, bytes: u64, now: Duration) {
        self.advance(now);
        let c = &mut self.current[class.index()];
        c.packets += 1;
        c.bytes += bytes;
    }

    /// Close the current window early, e.g. at shutdown. The next window
    /// starts at `now`.
    pub fn close(&mut self, now: Duration) {
        let closed = self.closed_windows;
        self.advance(now);
        // on an exact boundary advance has already closed everything up to now
        if self.closed_windows > closed && self.start == Some(now) {
            return;
        }
        self.close_current();
        self.start = Some(now);
    }

    pub fn current(&self) -> &ClassCounts {
        &self.current
    }

    /// Counts of the most recently closed window.
    pub fn previous(&self) -> &ClassCounts {
        &self.previous
    }

    /// Sum over every closed window.
    pub fn closed_totals(&self) -> &ClassCounts {
        &self.closed_totals
    }

    pub fn closed_windows(&self) -> u64 {
        self.closed_windows
    }
}
