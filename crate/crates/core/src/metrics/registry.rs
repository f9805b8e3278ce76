use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use crate::classify::TrafficClass;

use super::gauge::{render, Gauge};
use super::host::HostMetrics;
use super::window::{ClassCounts, ClassWindow};

pub const DEFAULT_WINDOW: Duration = Duration::from_secs(10);

pub const TRAFFIC_PACKETS: &str = "vinevi_traffic_class_packets";
pub const TRAFFIC_BYTES: &str = "vinevi_traffic_class_bytes";
pub const HOST_CPU: &str = "vinevi_host_cpu_percent";
pub const HOST_MEM_AVAILABLE: &str = "vinevi_host_memory_available_bytes";
pub const HOST_MEM_TOTAL: &str = "vinevi_host_memory_total_bytes";
pub const DROPPED: &str = "vinevi_dropped_packets";
pub const PUSH_FAILURES: &str = "vinevi_push_failures";

#[derive(Debug)]
struct State {
    window: ClassWindow,
    host: Option<HostMetrics>,
    dropped: u64,
    push_failures: u64,
}

/// Consistent copy of the registry at one instant.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub previous: ClassCounts,
    pub current: ClassCounts,
    pub closed_totals: ClassCounts,
    pub closed_windows: u64,
    pub host: Option<HostMetrics>,
    pub dropped: u64,
    pub push_failures: u64,
}

impl Snapshot {
    /// Gauges in exposition order. Host families are omitted when no host
    /// sample is available.
    pub fn gauges(&self) -> Vec<Gauge> {
        let mut out = Vec::with_capacity(2 * TrafficClass::COUNT + 5);
        out.push(Gauge::new(
            DROPPED,
            "Packets dropped because the classification queue was full.",
            self.dropped as f64,
        ));
        if let Some(h) = &self.host {
            out.push(Gauge::new(HOST_CPU, "Host CPU utilisation in percent.", h.cpu_percent));
            out.push(Gauge::new(
                HOST_MEM_AVAILABLE,
                "Host memory available in bytes.",
                h.mem_available as f64,
            ));
            out.push(Gauge::new(
                HOST_MEM_TOTAL,
                "Host memory total in bytes.",
                h.mem_total as f64,
            ));
        }
        out.push(Gauge::new(
            PUSH_FAILURES,
            "Failed pushes to the remote collector.",
            self.push_failures as f64,
        ));
        for class in TrafficClass::ALL {
            let c = self.previous[class.index()];
            out.push(
                Gauge::new(
                    TRAFFIC_BYTES,
                    "Bytes classified per traffic class in the last closed window.",
                    c.bytes as f64,
                )
                .with_label("class", class.as_str()),
            );
            out.push(
                Gauge::new(
                    TRAFFIC_PACKETS,
                    "Packets classified per traffic class in the last closed window.",
                    c.packets as f64,
                )
                .with_label("class", class.as_str()),
            );
        }
        out
    }

    pub fn render(&self) -> String {
        render(&self.gauges())
    }
}

/// Shared, internally synchronised gauge state.
///
/// Writers call [`Registry::record`]; readers take a [`Snapshot`] under the
/// same lock, so a rendered body never mixes two windows.
#[derive(Debug)]
pub struct Registry {
    epoch: Instant,
    state: Mutex<State>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(DEFAULT_WINDOW)
    }
}

impl Registry {
    pub fn new(window: Duration) -> Self {
        Registry {
            epoch: Instant::now(),
            state: Mutex::new(State {
                window: ClassWindow::new(window),
                host: None,
                dropped: 0,
                push_failures: 0,
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        // counters stay usable even if a writer panicked mid-update
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Time since the registry was created; the clock used by the agent.
    pub fn now(&self) -> Duration {
        self.epoch.elapsed()
    }

    pub fn window_length(&self) -> Duration {
        self.lock().window.length()
    }

    pub fn record(&self, class: TrafficClass, bytes: u64, now: Duration) {
        self.lock().window.record(class, bytes, now);
    }

    /// Close the current window immediately (shutdown).
    pub fn close_window(&self, now: Duration) {
        self.lock().window.close(now);
    }

    pub fn set_host(&self, host: Option<HostMetrics>) {
        self.lock().host = host;
    }

    pub fn add_dropped(&self, n: u64) {
        self.lock().dropped += n;
    }

    pub fn inc_push_failures(&self) {
        self.lock().push_failures += 1;
    }

    /// Roll windows up to `now` and copy the state.
    pub fn snapshot(&self, now: Duration) -> Snapshot {
        let mut s = self.lock();
        s.window.advance(now);
        Snapshot {
            previous: *s.window.previous(),
            current: *s.window.current(),
            closed_totals: *s.window.closed_totals(),
            closed_windows: s.window.closed_windows(),
            host: s.host,
            dropped: s.dropped,
            push_failures: s.push_failures,
        }
    }

    pub fn render_exposition(&self, now: Duration) -> String {
        self.snapshot(now).render()
    }
}
